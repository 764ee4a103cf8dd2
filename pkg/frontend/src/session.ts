/**
 * HTTP + WebSocket client for the session service. Transports are
 * injectable so tests can run without a server (and node tests can
 * supply a ws-backed socket where there is no native WebSocket).
 */

import {
  CreatedMsg,
  EndedMsg,
  FrameMsg,
  GeneratorConfig,
  MapResponse,
  ReportResponse,
  StreamMsg,
  UpdatedMsg,
  actionMsg,
  parseStreamMsg,
  updateMsg,
} from "./protocol.js";

// the subset of the WebSocket surface the client touches; both the
// browser WebSocket and the ws package satisfy it structurally
export interface WsLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type WsFactory = (url: string) => WsLike;

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; json(): Promise<unknown> }>;

export interface SessionApiOptions {
  baseUrl: string;
  fetchImpl?: FetchLike;
  wsFactory?: WsFactory;
}

interface Pending {
  kind: "action" | "update";
  resolve: (msg: StreamMsg) => void;
  reject: (err: Error) => void;
}

export class SessionStream {
  private pending: Pending[] = [];
  private actionInFlight = false;
  private closedByUs = false;
  closed = false;
  onClose: (() => void) | null = null;

  constructor(private ws: WsLike) {
    ws.onmessage = (ev) => this.handleMessage(ev.data);
    ws.onclose = () => {
      this.closed = true;
      this.failPending(new Error("stream closed"));
      if (!this.closedByUs && this.onClose) this.onClose();
    };
    ws.onerror = () => {
      this.failPending(new Error("stream error"));
    };
  }

  /** One action in flight; a second send before the ack is a bug upstream. */
  async sendAction(action: string): Promise<FrameMsg | EndedMsg> {
    if (this.actionInFlight) {
      throw new Error("action already in flight");
    }
    this.actionInFlight = true;
    try {
      const msg = await this.request("action", actionMsg(action));
      if (msg.type !== "frame" && msg.type !== "ended") {
        throw new Error(`expected frame or ended, got ${msg.type}`);
      }
      return msg;
    } finally {
      this.actionInFlight = false;
    }
  }

  async update(pq: { p?: number; q?: number }): Promise<UpdatedMsg> {
    const msg = await this.request("update", updateMsg(pq.p, pq.q));
    if (msg.type !== "updated") {
      throw new Error(`expected updated, got ${msg.type}`);
    }
    return msg;
  }

  close(): void {
    this.closedByUs = true;
    this.ws.close();
  }

  private request(kind: Pending["kind"], payload: string): Promise<StreamMsg> {
    if (this.closed) {
      return Promise.reject(new Error("stream closed"));
    }
    return new Promise<StreamMsg>((resolve, reject) => {
      this.pending.push({ kind, resolve, reject });
      this.ws.send(payload);
    });
  }

  // replies come back in request order, so a FIFO correlates them
  private handleMessage(data: unknown): void {
    const raw = typeof data === "string" ? data : String(data);
    const head = this.pending.shift();
    if (!head) return; // unsolicited; the server does not push
    let msg: StreamMsg;
    try {
      msg = parseStreamMsg(raw);
    } catch (err) {
      head.reject(err instanceof Error ? err : new Error(String(err)));
      return;
    }
    if (msg.type === "error") {
      head.reject(new Error(msg.message));
      return;
    }
    head.resolve(msg);
  }

  private failPending(err: Error): void {
    const waiting = this.pending;
    this.pending = [];
    for (const p of waiting) p.reject(err);
  }
}

export class SessionApi {
  private fetchImpl: FetchLike;
  private wsFactory: WsFactory;

  constructor(private opts: SessionApiOptions) {
    this.fetchImpl =
      opts.fetchImpl ?? (globalThis.fetch as unknown as FetchLike);
    this.wsFactory =
      opts.wsFactory ??
      ((url: string) =>
        new (globalThis as { WebSocket: new (u: string) => WsLike }).WebSocket(
          url,
        ));
  }

  async createSession(cfg: GeneratorConfig): Promise<CreatedMsg> {
    const res = await this.fetchJson("POST", "/sessions", cfg);
    if (res.status !== 201) {
      throw new Error(detailOf(res.body) ?? `create failed (${res.status})`);
    }
    return res.body as CreatedMsg;
  }

  async getMap(sessionId: string): Promise<MapResponse> {
    const res = await this.fetchJson("GET", `/sessions/${sessionId}/map`);
    if (res.status !== 200) {
      throw new Error(detailOf(res.body) ?? `map failed (${res.status})`);
    }
    return res.body as MapResponse;
  }

  async getReport(sessionId: string): Promise<ReportResponse> {
    const res = await this.fetchJson("GET", `/sessions/${sessionId}/report`);
    if (res.status !== 200) {
      throw new Error(detailOf(res.body) ?? `report failed (${res.status})`);
    }
    return res.body as ReportResponse;
  }

  async deleteSession(sessionId: string): Promise<void> {
    await this.fetchJson("DELETE", `/sessions/${sessionId}`);
  }

  openStream(sessionId: string): Promise<SessionStream> {
    const wsBase = this.opts.baseUrl.replace(/^http/, "ws");
    const ws = this.wsFactory(`${wsBase}/sessions/${sessionId}/stream`);
    return new Promise<SessionStream>((resolve, reject) => {
      let settled = false;
      ws.onopen = () => {
        settled = true;
        resolve(new SessionStream(ws));
      };
      ws.onerror = () => {
        if (!settled) reject(new Error("could not open stream"));
      };
      ws.onclose = () => {
        if (!settled) reject(new Error("stream closed before open"));
      };
    });
  }

  private async fetchJson(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<{ status: number; body: unknown }> {
    const res = await this.fetchImpl(this.opts.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    let parsed: unknown = null;
    try {
      parsed = await res.json();
    } catch {
      // non-JSON error body; status carries the signal
    }
    return { status: res.status, body: parsed };
  }
}

function detailOf(body: unknown): string | null {
  if (typeof body === "object" && body !== null && "detail" in body) {
    return String((body as { detail: unknown }).detail);
  }
  return null;
}
