import { beforeEach, describe, expect, it } from "vitest";
import { ApiClient, type FeatureMatrixData } from "../src/api.js";
import { createFeatureMatrixView } from "../src/views/featureMatrix.js";
import { makeFetch, type RecordedCall } from "./helpers.js";

// Eleven states by three variables, every probability given to two
// decimals so the on-screen text is easy to eyeball against the payload.
const ELEVEN_STATE_MATRIX: FeatureMatrixData = {
  states: [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
  rows: {
    IAA: [0.02, 0.05, 0.11, 0.27, 0.42, 0.55, 0.63, 0.78, 0.84, 0.91, 0.97],
    "IA-2A": [0.01, 0.03, 0.08, 0.15, 0.3, 0.47, 0.58, 0.66, 0.72, 0.88, 0.95],
    GADA: [0.04, 0.09, 0.13, 0.22, 0.35, 0.49, 0.61, 0.74, 0.81, 0.86, 0.93],
  },
  source: { IAA: "model", "IA-2A": "model", GADA: "model" },
};

describe("feature matrix view", () => {
  beforeEach(() => {
    document.body.innerHTML = "";
  });

  it("renders an 11x3 grid whose cell text equals the API values", async () => {
    const log: RecordedCall[] = [];
    const api = new ApiClient(
      "",
      makeFetch([[/\/feature-matrix$/, () => ELEVEN_STATE_MATRIX]], log),
    );
    const data = await api.getFeatureMatrix("m1");

    const view = createFeatureMatrixView();
    document.body.appendChild(view.el);
    view.update(data);

    const cells = view.el.querySelectorAll(".fm-cell");
    expect(cells.length).toBe(33);
    for (const [variable, values] of Object.entries(data.rows)) {
      values.forEach((value, state) => {
        const cell = view.el.querySelector(
          `.fm-cell[data-var="${variable}"][data-state="${state}"]`,
        );
        expect(cell).not.toBeNull();
        expect(cell!.textContent).toBe(String(value));
      });
    }
  });

  it("shows eleven state headers and three variable rows", () => {
    const view = createFeatureMatrixView();
    view.update(ELEVEN_STATE_MATRIX);
    const headers = [...view.el.querySelectorAll(".fm-state")].map((h) => h.textContent);
    expect(headers).toEqual(ELEVEN_STATE_MATRIX.states.map((s) => `S${s}`));
    expect(view.el.querySelectorAll(".fm-var").length).toBe(3);
  });

  it("scales color intensity with the value", () => {
    const view = createFeatureMatrixView();
    view.update(ELEVEN_STATE_MATRIX);
    const faint = view.el.querySelector<HTMLElement>('.fm-cell[data-var="IAA"][data-state="0"]');
    const strong = view.el.querySelector<HTMLElement>('.fm-cell[data-var="IAA"][data-state="10"]');
    expect(faint!.style.backgroundColor).not.toBe("");
    expect(strong!.style.backgroundColor).not.toBe("");
    expect(faint!.style.backgroundColor).not.toBe(strong!.style.backgroundColor);
  });

  it("marks null cells as undefined instead of inventing a number", () => {
    const view = createFeatureMatrixView();
    view.update({
      states: [0, 1, 2],
      rows: { smoker: [0.5, null, 0.25] },
      source: { smoker: "empirical" },
    });
    const cell = view.el.querySelector('.fm-cell[data-var="smoker"][data-state="1"]');
    expect(cell!.classList.contains("fm-undefined")).toBe(true);
    expect(cell!.textContent).toBe("n/a");
    const defined = view.el.querySelector('.fm-cell[data-var="smoker"][data-state="0"]');
    expect(defined!.classList.contains("fm-undefined")).toBe(false);
    expect(defined!.textContent).toBe("0.5");
  });

  it("labels each row with its source", () => {
    const view = createFeatureMatrixView();
    view.update({
      states: [0],
      rows: { IAA: [0.5], smoker: [0.125] },
      source: { IAA: "model", smoker: "empirical" },
    });
    const sources = [...view.el.querySelectorAll(".fm-source")].map((s) => s.textContent);
    expect(sources).toEqual(["model", "empirical"]);
  });
});
