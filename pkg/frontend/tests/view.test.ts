import { describe, expect, it } from "vitest";
import { GAUGE_DASH, SessionView, ViewEls, fmtDb, fmtRatio } from "../src/view";
import { createdMsg, frameMsg } from "./fakes";

function stubEls(): ViewEls {
  const text = () => ({ textContent: "" as string | null });
  return {
    status: text(),
    banner: { textContent: "", hidden: true },
    frame: { src: "" },
    map: { src: "" },
    marker: { textContent: "", style: {} },
    ledgerScore: text(),
    readbackScore: text(),
    spacon: text(),
    numcon: text(),
    actacc: text(),
    ambiguity: { textContent: "", hidden: true },
    step: text(),
  };
}

describe("SessionView", () => {
  it("renders the created payload and goes live", () => {
    const els = stubEls();
    const view = new SessionView(els);
    expect(els.status.textContent).toBe("idle");
    view.applyCreated(createdMsg({ spacon_running: null }));
    expect(els.status.textContent).toBe("live");
    expect(els.frame.src).toContain("data:image/png;base64,");
    expect(els.step.textContent).toBe("0");
    expect(els.ledgerScore.textContent).toBe("0");
    expect(els.readbackScore.textContent).toBe("0");
    expect(els.spacon.textContent).toBe(GAUGE_DASH);
    expect(els.numcon.textContent).toBe("1.0000");
  });

  it("accumulates the ledger from server event flags only", () => {
    const els = stubEls();
    const view = new SessionView(els);
    view.applyCreated(createdMsg());
    view.applyFrame(frameMsg({ step: 1, event: true, score: 1 }));
    view.applyFrame(frameMsg({ step: 2, event: false, score: 1 }));
    view.applyFrame(frameMsg({ step: 3, event: true, score: 2 }));
    expect(els.ledgerScore.textContent).toBe("2");
    expect(els.readbackScore.textContent).toBe("2");
  });

  it("shows readback divergence side by side", () => {
    const els = stubEls();
    const view = new SessionView(els);
    view.applyCreated(createdMsg());
    // a jittered strip reads 7 while no event fired
    view.applyFrame(frameMsg({ step: 1, event: false, score: 7 }));
    expect(els.ledgerScore.textContent).toBe("0");
    expect(els.readbackScore.textContent).toBe("7");
  });

  it("marks unreadable strips instead of inventing a number", () => {
    const els = stubEls();
    const view = new SessionView(els);
    view.applyCreated(createdMsg());
    view.applyFrame(frameMsg({ step: 1, score: null }));
    expect(els.readbackScore.textContent).toBe("??");
  });

  it("displays telemetry verbatim with fixed formatting", () => {
    const els = stubEls();
    const view = new SessionView(els);
    view.applyCreated(createdMsg());
    view.applyFrame(
      frameMsg({
        spacon_running: 47.1234567,
        numcon_running: 0.33333,
        actacc_running: null,
      }),
    );
    expect(els.spacon.textContent).toBe("47.12");
    expect(els.numcon.textContent).toBe("0.3333");
    expect(els.actacc.textContent).toBe(GAUGE_DASH);
  });

  it("toggles the ambiguity indicator per step", () => {
    const els = stubEls();
    const view = new SessionView(els);
    view.applyCreated(createdMsg());
    view.applyFrame(frameMsg({ ambiguous_match: true }));
    expect(els.ambiguity.hidden).toBe(false);
    view.applyFrame(frameMsg({ ambiguous_match: false }));
    expect(els.ambiguity.hidden).toBe(true);
  });

  it("surfaces errors in the banner and ended as a state", () => {
    const els = stubEls();
    const view = new SessionView(els);
    view.applyError("unknown game 'tetris'");
    expect(els.banner.hidden).toBe(false);
    expect(els.banner.textContent).toContain("tetris");
    expect(view.state).toBe("error");
    view.applyEnded({ type: "ended", step: 53 });
    expect(view.state).toBe("ended");
  });

  it("places the map marker at the exported position", () => {
    const els = stubEls();
    const view = new SessionView(els);
    view.applyMap({
      map: "QUJD",
      mask: "QUJD",
      meta: {
        topology: "strip",
        origin: [-48],
        player_pos: [12],
        linked: 16,
        shape: [80, 156, 3],
      },
    });
    expect(els.map.src).toBe("data:image/png;base64,QUJD");
    expect(els.marker.textContent).toBe("x=12");
    expect(els.marker.style?.left).toBe("60px");
  });
});

it("formatters render null as a dash", () => {
  expect(fmtDb(null)).toBe(GAUGE_DASH);
  expect(fmtDb(99.0)).toBe("99.00");
  expect(fmtRatio(null)).toBe(GAUGE_DASH);
  expect(fmtRatio(1)).toBe("1.0000");
});
