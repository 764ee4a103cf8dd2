/**
 * Browser entry point: wires the form, the session stream, keyboard
 * input, map refreshes, and the telemetry gauges into the page. All
 * state shown comes from server messages (see view.ts).
 */

import {
  EndedMsg,
  FrameMsg,
  GameId,
  GeneratorConfig,
  GeneratorKind,
} from "./protocol.js";
import { FetchLike, SessionApi, SessionStream, WsFactory } from "./session.js";
import { InputLoop } from "./input.js";
import { SessionView, ViewEls } from "./view.js";

export interface AppOptions {
  doc: Document;
  baseUrl: string;
  fetchImpl?: FetchLike;
  wsFactory?: WsFactory;
  mapRefreshEvery?: number;
}

const PAGE = `
  <form id="conn-form">
    <label>game
      <select id="f-game">
        <option>traveler</option><option>pong</option><option>pacman</option>
      </select>
    </label>
    <label>generator
      <select id="f-kind">
        <option>reference</option><option>numeric_jitter</option>
        <option>spatial_reshuffle</option><option>composite</option>
      </select>
    </label>
    <label>seed <input id="f-seed" type="number" value="0"></label>
    <button id="connect" type="button">Connect</button>
  </form>
  <div id="status"></div>
  <div id="banner" hidden></div>
  <div class="stage">
    <img id="frame" alt="frame">
    <div class="map-wrap">
      <img id="map" alt="constructed map">
      <div id="marker"></div>
    </div>
  </div>
  <div class="scores">
    score <span id="score-ledger"></span> /
    strip <span id="score-readback"></span>
    <span id="step"></span>
    <span id="ambiguity" hidden>ambiguous match</span>
  </div>
  <div class="gauges">
    spacon <span id="gauge-spacon"></span> dB |
    numcon <span id="gauge-numcon"></span> |
    actacc <span id="gauge-actacc"></span>
  </div>
  <div class="corruption">
    <label>p <input id="f-p" type="range" min="0" max="1" step="0.05" value="0"></label>
    <label>q <input id="f-q" type="range" min="0" max="1" step="0.05" value="0"></label>
    <span id="corr-echo"></span>
  </div>
`;

export class App {
  readonly api: SessionApi;
  view!: SessionView;
  private doc: Document;
  private stream: SessionStream | null = null;
  private input: InputLoop | null = null;
  private sessionId: string | null = null;
  private game: GameId = "traveler";
  private mapRefreshEvery: number;

  constructor(opts: AppOptions) {
    this.doc = opts.doc;
    this.mapRefreshEvery = opts.mapRefreshEvery ?? 8;
    this.api = new SessionApi({
      baseUrl: opts.baseUrl,
      fetchImpl: opts.fetchImpl,
      wsFactory: opts.wsFactory,
    });
  }

  mount(root: Element): void {
    root.innerHTML = PAGE;
    const get = (id: string) => {
      const el = this.doc.getElementById(id);
      if (!el) throw new Error(`missing element #${id}`);
      return el;
    };
    const els: ViewEls = {
      status: get("status"),
      banner: get("banner") as HTMLElement,
      frame: get("frame") as HTMLImageElement,
      map: get("map") as HTMLImageElement,
      marker: get("marker") as HTMLElement,
      ledgerScore: get("score-ledger"),
      readbackScore: get("score-readback"),
      spacon: get("gauge-spacon"),
      numcon: get("gauge-numcon"),
      actacc: get("gauge-actacc"),
      ambiguity: get("ambiguity") as HTMLElement,
      step: get("step"),
    };
    this.view = new SessionView(els);

    get("connect").addEventListener("click", () => {
      void this.connectFromForm();
    });
    const corr = (id: string) =>
      get(id).addEventListener("input", () => void this.pushCorruption());
    corr("f-p");
    corr("f-q");
  }

  private field(id: string): HTMLInputElement {
    return this.doc.getElementById(id) as HTMLInputElement;
  }

  async connectFromForm(): Promise<void> {
    const game = this.field("f-game").value as GameId;
    const kind = this.field("f-kind").value as GeneratorKind;
    const cfg: GeneratorConfig = {
      game,
      kind,
      seed: Number(this.field("f-seed").value) || 0,
    };
    const p = Number(this.field("f-p").value);
    const q = Number(this.field("f-q").value);
    if (kind === "numeric_jitter" || kind === "composite") cfg.p = p;
    if (kind === "spatial_reshuffle" || kind === "composite") cfg.q = q;
    await this.connect(cfg);
  }

  async connect(cfg: GeneratorConfig): Promise<void> {
    this.disconnect();
    this.view.setState("connecting");
    try {
      const created = await this.api.createSession(cfg);
      this.sessionId = created.session_id;
      this.game = cfg.game;
      this.stream = await this.api.openStream(created.session_id);
      this.stream.onClose = () => this.view.applyError("connection lost");
      this.view.applyCreated(created);
      this.input = new InputLoop(cfg.game, (a) => this.step(a));
      this.input.attach(
        this.doc as unknown as Parameters<InputLoop["attach"]>[0],
      );
      await this.refreshMap();
    } catch (err) {
      this.view.applyError(err instanceof Error ? err.message : String(err));
    }
  }

  disconnect(): void {
    if (this.input) {
      this.input.detach();
      this.input = null;
    }
    if (this.stream) {
      this.stream.onClose = null;
      this.stream.close();
      this.stream = null;
    }
    if (this.sessionId) {
      void this.api.deleteSession(this.sessionId).catch(() => undefined);
      this.sessionId = null;
    }
  }

  async step(action: string): Promise<void> {
    if (!this.stream) return;
    let msg: FrameMsg | EndedMsg;
    try {
      msg = await this.stream.sendAction(action);
    } catch (err) {
      this.view.applyError(err instanceof Error ? err.message : String(err));
      return;
    }
    if (msg.type === "ended") {
      this.view.applyEnded(msg);
      if (this.input) this.input.enabled = false;
      await this.refreshMap();
      return;
    }
    this.view.applyFrame(msg);
    if (msg.step % this.mapRefreshEvery === 0) await this.refreshMap();
  }

  private async pushCorruption(): Promise<void> {
    if (!this.stream) return;
    const p = Number(this.field("f-p").value);
    const q = Number(this.field("f-q").value);
    const echo = this.doc.getElementById("corr-echo");
    try {
      const upd = await this.stream.update({ p, q });
      if (echo) {
        echo.textContent = `p=${upd.p.toFixed(2)} q=${upd.q.toFixed(2)}`;
      }
    } catch (err) {
      this.view.applyError(err instanceof Error ? err.message : String(err));
    }
  }

  private async refreshMap(): Promise<void> {
    if (!this.sessionId) return;
    try {
      this.view.applyMap(await this.api.getMap(this.sessionId));
    } catch {
      // mapless game or empty map; the panel just stays blank
    }
  }
}

export function initApp(opts: AppOptions): App {
  const root = opts.doc.getElementById("app");
  if (!root) throw new Error("missing #app container");
  const app = new App(opts);
  app.mount(root);
  return app;
}

// real-browser boot; tests construct the App themselves
if (typeof document !== "undefined" && document.getElementById("app")) {
  const params = new URLSearchParams(window.location.search);
  const app = initApp({
    doc: document,
    baseUrl: params.get("api") ?? window.location.origin,
  });
  (window as Window & { __conworldApp?: App }).__conworldApp = app;
}
