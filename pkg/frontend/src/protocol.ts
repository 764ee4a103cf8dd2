/**
 * Wire protocol for the session service. Message shapes mirror the
 * server payloads verbatim; the client adds nothing and infers nothing.
 */

export type GameId = "traveler" | "pong" | "pacman";

export const GAMES: GameId[] = ["traveler", "pong", "pacman"];

export type GeneratorKind =
  | "reference"
  | "numeric_jitter"
  | "spatial_reshuffle"
  | "composite";

export interface GeneratorConfig {
  game: GameId;
  seed: number;
  kind?: GeneratorKind;
  p?: number;
  q?: number;
}

// strip games report a scalar, grid games [x, y], mapless games null
export type PlayerPos = number | [number, number] | null;

export interface FrameMsg {
  type: "frame";
  step: number;
  frame: string; // base64 PNG
  score: number | null; // strip readback, null when unreadable
  event: boolean;
  terminal: boolean;
  player_x: PlayerPos;
  spacon_running: number | null;
  numcon_running: number | null;
  actacc_running: number | null;
  ambiguous_match: boolean;
}

export interface CreatedMsg extends Omit<FrameMsg, "type"> {
  type: "created";
  session_id: string;
  config: Record<string, unknown>;
}

export interface EndedMsg {
  type: "ended";
  step: number;
}

export interface UpdatedMsg {
  type: "updated";
  p: number;
  q: number;
}

export interface ErrorMsg {
  type: "error";
  message: string;
}

export type StreamMsg = FrameMsg | EndedMsg | UpdatedMsg | ErrorMsg;

export interface MapMeta {
  topology: "strip" | "grid";
  origin: number[] | null;
  player_pos: number[] | null;
  linked: number;
  shape: number[] | null;
}

export interface MapResponse {
  map: string;
  mask: string;
  meta: MapMeta;
}

export interface ReportResponse {
  game: GameId;
  generator: Record<string, unknown>;
  steps: number;
  numcon: number;
  spacon: number | null;
  actacc: number | null;
  ambiguity_rate: number;
  counts: Record<string, number>;
  ended: boolean;
}

const STREAM_TYPES = new Set(["frame", "ended", "updated", "error"]);

export function parseStreamMsg(raw: string): StreamMsg {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    throw new Error(`unparsable server message: ${raw.slice(0, 80)}`);
  }
  if (typeof data !== "object" || data === null) {
    throw new Error("server message is not an object");
  }
  const type = (data as { type?: unknown }).type;
  if (typeof type !== "string" || !STREAM_TYPES.has(type)) {
    throw new Error(`unknown server message type: ${String(type)}`);
  }
  return data as StreamMsg;
}

export function actionMsg(action: string): string {
  return JSON.stringify({ type: "action", action });
}

export function updateMsg(p?: number, q?: number): string {
  const body: { type: string; p?: number; q?: number } = { type: "update" };
  if (p !== undefined) body.p = p;
  if (q !== undefined) body.q = q;
  return JSON.stringify(body);
}

export function frameDataUrl(b64png: string): string {
  return "data:image/png;base64," + b64png;
}
