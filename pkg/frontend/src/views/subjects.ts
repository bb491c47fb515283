import type { DensityData, SubjectDetail } from "../api.js";
import { clear, el, svgEl } from "../dom.js";
import { linearScale, stateColor, ticks } from "../layout.js";

/**
 * Subject browser: a list of subject ids scoped to the active cohort, a
 * per-subject dot timeline colored by decoded state with the decoded
 * state's posterior under each visit, and a mirrored density plot for two
 * selected outcomes sharing one age axis (first outcome above, second
 * below).
 */
export interface SubjectsOptions {
  onSelect?: (subjectId: string) => void;
  onOutcomesChange?: (above: string, below: string) => void;
}

export interface SubjectsView {
  readonly el: HTMLElement;
  updateList(subjectIds: string[], selected: string | null): void;
  updateDetail(subjectId: string, detail: SubjectDetail): void;
  clearDetail(): void;
  setOutcomeNames(names: string[]): void;
  outcomes(): [string, string] | null;
  updateDensities(above: DensityData | null, below: DensityData | null): void;
}

const TIMELINE = { width: 860, height: 96, left: 16, right: 16, axisY: 46 };
const DENSITY = { width: 860, height: 240, left: 44, right: 16, pad: 14 };

export function createSubjectsView(options: SubjectsOptions = {}): SubjectsView {
  const root = el("div", { class: "subjects" });
  const list = el("ul", { class: "sub-list" });
  const detail = el("div", { class: "sub-detail" });
  const aboveSelect = el("select", { class: "density-above" });
  const belowSelect = el("select", { class: "density-below" });
  const densityPlot = el("div", { class: "density-plot" });

  const controls = el("div", { class: "density-controls" });
  controls.append(
    el("span", { class: "density-label" }, "above"),
    aboveSelect,
    el("span", { class: "density-label" }, "below"),
    belowSelect,
  );
  const densities = el("div", { class: "densities" });
  densities.append(controls, densityPlot);
  root.append(el("div", { class: "sub-list-wrap" }), detail, densities);
  root.querySelector(".sub-list-wrap")!.appendChild(list);

  const notifyOutcomes = () => {
    const pair = outcomes();
    if (pair) {
      options.onOutcomesChange?.(pair[0], pair[1]);
    }
  };
  aboveSelect.addEventListener("change", notifyOutcomes);
  belowSelect.addEventListener("change", notifyOutcomes);

  function updateList(subjectIds: string[], selected: string | null): void {
    clear(list);
    for (const sid of subjectIds) {
      const item = el("li", {
        class: sid === selected ? "sub-item sub-selected" : "sub-item",
        "data-subject": sid,
      });
      const button = el("button", { class: "sub-pick" }, sid);
      button.addEventListener("click", () => options.onSelect?.(sid));
      item.appendChild(button);
      list.appendChild(item);
    }
    if (subjectIds.length === 0) {
      list.appendChild(el("li", { class: "empty-note" }, "no subjects"));
    }
  }

  function updateDetail(subjectId: string, data: SubjectDetail): void {
    clear(detail);
    detail.appendChild(el("div", { class: "sub-title" }, `Subject ${subjectId}`));
    const ages = data.visits.map((v) => v.age_months);
    const x = linearScale(
      [Math.min(...ages), Math.max(...ages)],
      [TIMELINE.left + 10, TIMELINE.width - TIMELINE.right - 10],
    );
    const svg = svgEl("svg", {
      class: "sub-timeline",
      width: TIMELINE.width,
      height: TIMELINE.height,
      viewBox: `0 0 ${TIMELINE.width} ${TIMELINE.height}`,
    });
    svg.appendChild(
      svgEl("line", {
        class: "sub-axis",
        x1: TIMELINE.left, x2: TIMELINE.width - TIMELINE.right,
        y1: TIMELINE.axisY, y2: TIMELINE.axisY,
      }),
    );
    data.visits.forEach((visit, t) => {
      const cx = x(visit.age_months);
      const posterior = visit.posterior[visit.state];
      const dot = svgEl("circle", {
        class: "sub-dot",
        "data-state": visit.state,
        cx, cy: TIMELINE.axisY, r: 6,
        fill: stateColor(visit.state),
      });
      dot.appendChild(
        svgEl("title", {}, `visit ${t}: S${visit.state} at ${visit.age_months} months, p=${posterior}`),
      );
      svg.appendChild(dot);
      svg.appendChild(
        svgEl("text", { class: "sub-age", x: cx, y: TIMELINE.axisY - 14 }, String(visit.age_months)),
      );
      const label = svgEl(
        "text",
        { class: "sub-post", x: cx, y: TIMELINE.axisY + 22 },
        posterior.toFixed(2),
      );
      label.appendChild(svgEl("title", {}, String(posterior)));
      svg.appendChild(label);
    });
    detail.appendChild(svg);
  }

  function clearDetail(): void {
    clear(detail);
    detail.appendChild(el("div", { class: "empty-note" }, "no subject selected"));
  }

  function setOutcomeNames(names: string[]): void {
    for (const select of [aboveSelect, belowSelect]) {
      clear(select);
      for (const name of names) {
        select.appendChild(el("option", { value: name }, name));
      }
    }
    if (names.length > 0) {
      aboveSelect.value = names[0];
      belowSelect.value = names[Math.min(1, names.length - 1)];
    }
  }

  function outcomes(): [string, string] | null {
    if (aboveSelect.options.length === 0) {
      return null;
    }
    return [aboveSelect.value, belowSelect.value];
  }

  function halfPath(
    data: DensityData,
    x: (v: number) => number,
    mid: number,
    sign: -1 | 1,
    half: number,
  ): string {
    const maxDensity = Math.max(...data.grid.map(([, d]) => d), 0);
    const y = linearScale([0, maxDensity || 1], [0, half - DENSITY.pad]);
    const steps = data.grid.map(([gx, gd]) => `${x(gx)},${mid - sign * y(gd)}`);
    const first = data.grid[0];
    const last = data.grid[data.grid.length - 1];
    return `${x(first[0])},${mid} ${steps.join(" ")} ${x(last[0])},${mid}`;
  }

  function updateDensities(above: DensityData | null, below: DensityData | null): void {
    clear(densityPlot);
    if (above === null && below === null) {
      densityPlot.appendChild(el("div", { class: "empty-note" }, "no outcome events"));
      return;
    }
    const xsAll: number[] = [];
    for (const data of [above, below]) {
      if (data) {
        xsAll.push(data.grid[0][0], data.grid[data.grid.length - 1][0]);
      }
    }
    const mid = DENSITY.height / 2;
    const x = linearScale(
      [Math.min(...xsAll), Math.max(...xsAll)],
      [DENSITY.left, DENSITY.width - DENSITY.right],
    );
    const svg = svgEl("svg", {
      class: "density-svg",
      width: DENSITY.width,
      height: DENSITY.height,
      viewBox: `0 0 ${DENSITY.width} ${DENSITY.height}`,
    });
    svg.appendChild(
      svgEl("line", {
        class: "density-axis",
        x1: DENSITY.left, x2: DENSITY.width - DENSITY.right, y1: mid, y2: mid,
      }),
    );
    for (const tick of ticks(x.domain, 8)) {
      svg.appendChild(
        svgEl("text", { class: "density-tick", x: x(tick), y: mid + 4 }, String(tick)),
      );
    }
    if (above) {
      svg.appendChild(
        svgEl("polygon", {
          class: "density-area density-area-above",
          "data-outcome": above.outcome,
          points: halfPath(above, x, mid, 1, mid),
        }),
      );
      svg.appendChild(
        svgEl("text", { class: "density-name density-name-above", x: DENSITY.left, y: 16 },
          `${above.outcome} (n=${above.sample_ages.length})`),
      );
    } else {
      svg.appendChild(
        svgEl("text", { class: "density-empty", x: DENSITY.left, y: 16 }, "no events above"),
      );
    }
    if (below) {
      svg.appendChild(
        svgEl("polygon", {
          class: "density-area density-area-below",
          "data-outcome": below.outcome,
          points: halfPath(below, x, mid, -1, mid),
        }),
      );
      svg.appendChild(
        svgEl("text", { class: "density-name density-name-below", x: DENSITY.left, y: DENSITY.height - 6 },
          `${below.outcome} (n=${below.sample_ages.length})`),
      );
    } else {
      svg.appendChild(
        svgEl("text", { class: "density-empty", x: DENSITY.left, y: DENSITY.height - 6 },
          "no events below"),
      );
    }
    densityPlot.appendChild(svg);
  }

  clearDetail();
  updateDensities(null, null);

  return {
    el: root,
    updateList,
    updateDetail,
    clearDetail,
    setOutcomeNames,
    outcomes,
    updateDensities,
  };
}
