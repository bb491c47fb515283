import type { WaterfallPoint } from "../api.js";
import { clear, el, svgEl } from "../dom.js";
import { beeswarmOffsets, linearScale, stateColor, ticks } from "../layout.js";

/**
 * One horizontal lane per state; every visit becomes a dot at its age,
 * jittered vertically by the greedy beeswarm so nearby dots stay legible.
 * Consecutive visits of a subject are joined by a polyline. Only the
 * first maxTrajectories subjects (by id) get lines, with a note when
 * some are left out.
 */
export interface WaterfallConfig {
  width: number;
  laneHeight: number;
  dotRadius: number;
  maxTrajectories: number;
}

export const WATERFALL_DEFAULTS: WaterfallConfig = {
  width: 860,
  laneHeight: 64,
  dotRadius: 4,
  maxTrajectories: 200,
};

const MARGIN = { top: 28, right: 16, bottom: 8, left: 52 };

export interface WaterfallView {
  readonly el: HTMLElement;
  update(points: WaterfallPoint[], nStates: number): void;
  clearView(): void;
}

export function createWaterfallView(
  config: Partial<WaterfallConfig> = {},
): WaterfallView {
  const cfg: WaterfallConfig = { ...WATERFALL_DEFAULTS, ...config };
  const root = el("div", { class: "waterfall" });

  function update(points: WaterfallPoint[], nStates: number): void {
    clear(root);
    if (points.length === 0) {
      root.appendChild(
        el("div", { class: "empty-note wf-empty" }, "No subjects in the active cohort."),
      );
      return;
    }

    const ages = points.map((p) => p.age_months);
    const x = linearScale(
      [Math.min(...ages), Math.max(...ages)],
      [MARGIN.left, cfg.width - MARGIN.right],
    );
    const height = MARGIN.top + nStates * cfg.laneHeight + MARGIN.bottom;
    const svg = svgEl("svg", {
      class: "wf-svg",
      width: cfg.width,
      height,
      viewBox: `0 0 ${cfg.width} ${height}`,
    });

    for (const tick of ticks(x.domain, 8)) {
      svg.appendChild(
        svgEl("line", {
          class: "wf-grid",
          x1: x(tick), x2: x(tick),
          y1: MARGIN.top, y2: height - MARGIN.bottom,
        }),
      );
      svg.appendChild(
        svgEl("text", { class: "wf-tick", x: x(tick), y: MARGIN.top - 8 }, String(tick)),
      );
    }

    const positions = new Array<{ px: number; py: number }>(points.length);
    for (let state = 0; state < nStates; state++) {
      const laneTop = MARGIN.top + state * cfg.laneHeight;
      const laneCenter = laneTop + cfg.laneHeight / 2;
      if (state % 2 === 1) {
        svg.appendChild(
          svgEl("rect", {
            class: "wf-lane-bg",
            x: MARGIN.left, y: laneTop,
            width: cfg.width - MARGIN.left - MARGIN.right,
            height: cfg.laneHeight,
          }),
        );
      }
      svg.appendChild(
        svgEl("text", { class: "wf-lane-label", x: 8, y: laneCenter + 4 }, `S${state}`),
      );

      const laneIdx = points
        .map((p, i) => i)
        .filter((i) => points[i].state === state)
        .sort((a, b) =>
          points[a].age_months - points[b].age_months ||
          points[a].subject_id.localeCompare(points[b].subject_id) ||
          a - b,
        );
      const xs = laneIdx.map((i) => x(points[i].age_months));
      const offsets = beeswarmOffsets(
        xs, cfg.dotRadius, cfg.laneHeight / 2 - cfg.dotRadius - 2,
      );
      laneIdx.forEach((pointIdx, k) => {
        positions[pointIdx] = { px: xs[k], py: laneCenter + offsets[k] };
      });
    }

    const subjectIds = [...new Set(points.map((p) => p.subject_id))].sort();
    const drawn = subjectIds.slice(0, cfg.maxTrajectories);
    const drawnSet = new Set(drawn);
    const lines = svgEl("g", { class: "wf-lines" });
    for (const sid of drawn) {
      const path = points
        .map((p, i) => ({ p, i }))
        .filter(({ p }) => p.subject_id === sid)
        .map(({ i }) => `${positions[i].px},${positions[i].py}`)
        .join(" ");
      lines.appendChild(
        svgEl("polyline", { class: "wf-line", "data-subject": sid, points: path }),
      );
    }
    svg.appendChild(lines);

    const dots = svgEl("g", { class: "wf-dots" });
    points.forEach((p, i) => {
      const dot = svgEl("circle", {
        class: "wf-dot",
        "data-subject": p.subject_id,
        "data-state": p.state,
        cx: positions[i].px,
        cy: positions[i].py,
        r: cfg.dotRadius,
        fill: stateColor(p.state),
      });
      if (!drawnSet.has(p.subject_id)) {
        dot.classList.add("wf-dot-unlined");
      }
      dot.appendChild(
        svgEl("title", {}, `${p.subject_id} at ${p.age_months} months, S${p.state}, p=${p.posterior_max}`),
      );
      dots.appendChild(dot);
    });
    svg.appendChild(dots);
    root.appendChild(svg);

    if (subjectIds.length > cfg.maxTrajectories) {
      root.appendChild(
        el(
          "div",
          { class: "wf-overflow" },
          `Trajectory lines drawn for ${cfg.maxTrajectories} of ${subjectIds.length} subjects.`,
        ),
      );
    }
  }

  function clearView(): void {
    clear(root);
  }

  return { el: root, update, clearView };
}
