import { CreatedMsg, FrameMsg } from "../src/protocol";
import { FetchLike, WsLike } from "../src/session";

export class FakeSocket implements WsLike {
  sent: string[] = [];
  closed = false;
  onopen: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
    this.onclose?.();
  }

  open(): void {
    this.onopen?.();
  }

  reply(obj: unknown): void {
    this.onmessage?.({ data: JSON.stringify(obj) });
  }

  replyRaw(raw: unknown): void {
    this.onmessage?.({ data: raw });
  }

  lastSent(): unknown {
    return JSON.parse(this.sent[this.sent.length - 1]);
  }
}

export function frameMsg(overrides: Partial<FrameMsg> = {}): FrameMsg {
  return {
    type: "frame",
    step: 1,
    frame: "cGxhY2Vob2xkZXI=",
    score: 0,
    event: false,
    terminal: false,
    player_x: 0,
    spacon_running: null,
    numcon_running: 1.0,
    actacc_running: 1.0,
    ambiguous_match: false,
    ...overrides,
  };
}

export function createdMsg(overrides: Partial<CreatedMsg> = {}): CreatedMsg {
  return {
    ...frameMsg(),
    type: "created",
    step: 0,
    session_id: "s-test",
    config: { game: "traveler", kind: "reference", seed: 0 },
    ...overrides,
  };
}

export interface FetchCall {
  url: string;
  method: string;
  body: unknown;
}

/** A fetch stub fed from a queue of {status, body} responses. */
export function fakeFetch(
  responses: Array<{ status: number; body: unknown }>,
): { fetch: FetchLike; calls: FetchCall[] } {
  const calls: FetchCall[] = [];
  const queue = [...responses];
  const fetch: FetchLike = async (url, init) => {
    calls.push({
      url,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(init.body) : undefined,
    });
    const next = queue.shift();
    if (!next) throw new Error("fakeFetch: response queue empty");
    return {
      status: next.status,
      json: async () => next.body,
    };
  };
  return { fetch, calls };
}
