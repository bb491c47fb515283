import type { FeatureMatrixData } from "../api.js";
import { clear, el } from "../dom.js";

/**
 * Heatmap of per-state variable probabilities. Cell text is the API value
 * rendered verbatim; color intensity tracks the value. Cells the service
 * reports as null (no decoded visits in that state) get a distinct style
 * instead of a number.
 */
export interface FeatureMatrixView {
  readonly el: HTMLElement;
  update(data: FeatureMatrixData): void;
  clearView(): void;
}

export function createFeatureMatrixView(): FeatureMatrixView {
  const root = el("div", { class: "feature-matrix" });

  function update(data: FeatureMatrixData): void {
    clear(root);
    const table = el("table", { class: "fm-table" });
    const head = el("tr");
    head.appendChild(el("th", {}, ""));
    for (const state of data.states) {
      head.appendChild(el("th", { class: "fm-state" }, `S${state}`));
    }
    table.appendChild(head);

    for (const [variable, values] of Object.entries(data.rows)) {
      const row = el("tr");
      const label = el("th", { class: "fm-var" }, variable);
      label.appendChild(el("span", { class: "fm-source" }, data.source[variable] ?? ""));
      row.appendChild(label);
      values.forEach((value, i) => {
        const cell = el("td", {
          class: "fm-cell",
          "data-var": variable,
          "data-state": String(data.states[i]),
        });
        if (value === null) {
          cell.classList.add("fm-undefined");
          cell.textContent = "n/a";
          cell.title = `${variable}: no decoded visits in state ${data.states[i]}`;
        } else {
          cell.textContent = String(value);
          cell.style.backgroundColor = `rgba(66, 105, 208, ${(0.85 * value).toFixed(3)})`;
          if (value > 0.55) {
            cell.classList.add("fm-dark");
          }
        }
        row.appendChild(cell);
      });
      table.appendChild(row);
    }
    root.appendChild(table);
  }

  function clearView(): void {
    clear(root);
  }

  return { el: root, update, clearView };
}
