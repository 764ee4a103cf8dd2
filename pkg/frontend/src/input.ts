/**
 * Keyboard to action mapping and the step pump. One action is in
 * flight at a time; while waiting for the ack at most one more press
 * is remembered (latest wins), everything else is dropped.
 */

import { GameId } from "./protocol.js";

export type SendAction = (action: string) => Promise<unknown>;

const TRAVELER_KEYS: Record<string, string> = {
  ArrowLeft: "left",
  ArrowRight: "right",
  " ": "stay",
};

const PACMAN_KEYS: Record<string, string> = {
  ArrowLeft: "left",
  ArrowRight: "right",
  ArrowUp: "up",
  ArrowDown: "down",
  " ": "stay",
};

// pong: w/s drive the left paddle, arrows the right; an action is a
// "left+right" pair built from whatever is held when a key lands
const PONG_STEP_KEYS = new Set(["w", "s", "ArrowUp", "ArrowDown", " "]);

export function actionForKey(
  game: GameId,
  key: string,
  held: ReadonlySet<string>,
): string | null {
  if (game === "traveler") return TRAVELER_KEYS[key] ?? null;
  if (game === "pacman") return PACMAN_KEYS[key] ?? null;
  if (!PONG_STEP_KEYS.has(key)) return null;
  if (key === " ") return "stay+stay";
  const left = held.has("w") ? "up" : held.has("s") ? "down" : "stay";
  const right = held.has("ArrowUp")
    ? "up"
    : held.has("ArrowDown")
      ? "down"
      : "stay";
  return `${left}+${right}`;
}

export interface KeyEventLike {
  key: string;
}

export interface ListenerTarget {
  addEventListener(type: string, fn: (ev: KeyEventLike) => void): void;
  removeEventListener(type: string, fn: (ev: KeyEventLike) => void): void;
}

export class InputLoop {
  private held = new Set<string>();
  private busy = false;
  private queued: string | null = null;
  private detachFns: Array<() => void> = [];
  enabled = true;

  constructor(
    private game: GameId,
    private send: SendAction,
  ) {}

  keydown(key: string): void {
    this.held.add(key);
    if (!this.enabled) return;
    const action = actionForKey(this.game, key, this.held);
    if (action === null) return;
    if (this.busy) {
      this.queued = action;
      return;
    }
    void this.fire(action);
  }

  keyup(key: string): void {
    this.held.delete(key);
  }

  attach(target: ListenerTarget): void {
    const down = (ev: KeyEventLike) => this.keydown(ev.key);
    const up = (ev: KeyEventLike) => this.keyup(ev.key);
    target.addEventListener("keydown", down);
    target.addEventListener("keyup", up);
    this.detachFns.push(() => {
      target.removeEventListener("keydown", down);
      target.removeEventListener("keyup", up);
    });
  }

  detach(): void {
    for (const fn of this.detachFns) fn();
    this.detachFns = [];
  }

  private async fire(action: string): Promise<void> {
    this.busy = true;
    try {
      await this.send(action);
    } catch {
      this.queued = null; // the app surfaces the failure; stop pumping
    } finally {
      this.busy = false;
      const next = this.queued;
      this.queued = null;
      if (next !== null && this.enabled) void this.fire(next);
    }
  }
}
