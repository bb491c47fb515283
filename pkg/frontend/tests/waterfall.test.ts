import { describe, expect, it } from "vitest";
import type { WaterfallPoint } from "../src/api.js";
import { createWaterfallView } from "../src/views/waterfall.js";

function point(
  subject: string,
  age: number,
  state: number,
  posterior = 0.9,
): WaterfallPoint {
  return { subject_id: subject, age_months: age, state, posterior_max: posterior };
}

const POINTS: WaterfallPoint[] = [
  point("a", 6, 0),
  point("a", 12, 1),
  point("b", 6, 0),
  point("b", 18, 1),
  point("c", 9, 0),
  point("c", 24, 2),
];

describe("waterfall view", () => {
  it("draws one lane per state and one dot per visit", () => {
    const view = createWaterfallView();
    view.update(POINTS, 3);
    const labels = [...view.el.querySelectorAll(".wf-lane-label")].map((l) => l.textContent);
    expect(labels).toEqual(["S0", "S1", "S2"]);
    expect(view.el.querySelectorAll(".wf-dot").length).toBe(POINTS.length);
    expect(view.el.querySelectorAll('.wf-dot[data-state="0"]').length).toBe(3);
  });

  it("connects each subject's visits with a polyline", () => {
    const view = createWaterfallView();
    view.update(POINTS, 3);
    const lines = [...view.el.querySelectorAll(".wf-line")];
    expect(lines.map((l) => l.getAttribute("data-subject"))).toEqual(["a", "b", "c"]);
    const first = lines[0].getAttribute("points")!;
    expect(first.split(" ").length).toBe(2);
  });

  it("jitters same-age dots apart inside a lane", () => {
    const view = createWaterfallView();
    view.update([point("a", 6, 0), point("b", 6, 0), point("c", 6, 0)], 1);
    const dots = [...view.el.querySelectorAll(".wf-dot")];
    const cys = dots.map((d) => Number(d.getAttribute("cy")));
    const cxs = dots.map((d) => Number(d.getAttribute("cx")));
    expect(new Set(cxs).size).toBe(1);
    expect(new Set(cys).size).toBe(3);
  });

  it("is deterministic across rerenders", () => {
    const view = createWaterfallView();
    view.update(POINTS, 3);
    const first = view.el.innerHTML;
    view.update(POINTS, 3);
    expect(view.el.innerHTML).toBe(first);
  });

  it("limits trajectory lines and says so", () => {
    const view = createWaterfallView({ maxTrajectories: 2 });
    view.update(POINTS, 3);
    expect(view.el.querySelectorAll(".wf-line").length).toBe(2);
    expect(view.el.querySelector(".wf-overflow")!.textContent).toBe(
      "Trajectory lines drawn for 2 of 3 subjects.",
    );
  });

  it("shows an empty-state message for an empty cohort", () => {
    const view = createWaterfallView();
    view.update([], 3);
    expect(view.el.querySelector(".wf-empty")!.textContent).toBe(
      "No subjects in the active cohort.",
    );
    expect(view.el.querySelectorAll(".wf-dot").length).toBe(0);
  });
});
