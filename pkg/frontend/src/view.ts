/**
 * View state for one session. Everything shown derives from server
 * messages; there is no client-side game logic and no smoothing. The
 * gauges display the running telemetry values verbatim (fixed-decimal
 * formatting only).
 *
 * Elements are taken structurally so tests can pass plain objects and
 * the browser passes real DOM nodes.
 */

import {
  CreatedMsg,
  EndedMsg,
  FrameMsg,
  MapResponse,
  frameDataUrl,
} from "./protocol.js";

export interface TextEl {
  textContent: string | null;
}

export interface ImgEl {
  src: string;
}

export interface ToggleEl extends TextEl {
  hidden: boolean;
}

export interface MarkerEl extends TextEl {
  style?: { left?: string };
}

export interface ViewEls {
  status: TextEl;
  banner: ToggleEl;
  frame: ImgEl;
  map: ImgEl;
  marker: MarkerEl;
  ledgerScore: TextEl; // accumulated from server event flags
  readbackScore: TextEl; // what the score strip says
  spacon: TextEl;
  numcon: TextEl;
  actacc: TextEl;
  ambiguity: ToggleEl;
  step: TextEl;
}

export type ConnectionState =
  | "idle"
  | "connecting"
  | "live"
  | "ended"
  | "error";

export const GAUGE_DASH = "--";

export function fmtDb(v: number | null): string {
  return v === null ? GAUGE_DASH : v.toFixed(2);
}

export function fmtRatio(v: number | null): string {
  return v === null ? GAUGE_DASH : v.toFixed(4);
}

export class SessionView {
  state: ConnectionState = "idle";
  private ledger = 0;

  constructor(private els: ViewEls) {
    this.setState("idle");
    this.els.banner.hidden = true;
    this.els.ambiguity.hidden = true;
  }

  setState(state: ConnectionState): void {
    this.state = state;
    this.els.status.textContent = state;
  }

  applyCreated(msg: CreatedMsg): void {
    this.els.banner.hidden = true;
    this.ledger = msg.score ?? 0;
    this.setState("live");
    this.renderStep(msg);
  }

  applyFrame(msg: FrameMsg): void {
    if (msg.event) this.ledger += 1;
    this.renderStep(msg);
  }

  applyEnded(_msg: EndedMsg): void {
    this.setState("ended");
  }

  applyError(text: string): void {
    this.els.banner.textContent = text;
    this.els.banner.hidden = false;
    this.setState("error");
  }

  applyMap(res: MapResponse): void {
    this.els.map.src = frameDataUrl(res.map);
    const pos = res.meta.player_pos;
    if (pos && res.meta.origin) {
      // marker sits at the exported position, in map-image pixels
      const x = pos[0] - res.meta.origin[0];
      this.els.marker.textContent = `x=${pos.join(",")}`;
      if (this.els.marker.style) this.els.marker.style.left = `${x}px`;
    } else {
      this.els.marker.textContent = "";
    }
  }

  private renderStep(msg: FrameMsg | CreatedMsg): void {
    this.els.frame.src = frameDataUrl(msg.frame);
    this.els.step.textContent = String(msg.step);
    this.els.ledgerScore.textContent = String(this.ledger);
    this.els.readbackScore.textContent =
      msg.score === null ? "??" : String(msg.score);
    this.els.spacon.textContent = fmtDb(msg.spacon_running);
    this.els.numcon.textContent = fmtRatio(msg.numcon_running);
    this.els.actacc.textContent = fmtRatio(msg.actacc_running);
    this.els.ambiguity.hidden = !msg.ambiguous_match;
  }
}
