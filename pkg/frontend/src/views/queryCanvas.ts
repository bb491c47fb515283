import { clear, el } from "../dom.js";
import {
  cloneGraph,
  emptyNode,
  serializeQuery,
  type QueryGraph,
  type QueryNode,
} from "../query.js";

/**
 * Node-link editor for state-sequence queries. The canvas holds a chain of
 * state nodes joined by direct or eventual edges; every edit re-serializes
 * the chain to query text, which the save action posts to the service.
 */
export interface QueryCanvasOptions {
  onSave?: (name: string, queryText: string) => void;
}

export interface QueryCanvasView {
  readonly el: HTMLElement;
  graph(): QueryGraph;
  setGraph(graph: QueryGraph): void;
  queryText(): string;
}

export function createQueryCanvasView(
  options: QueryCanvasOptions = {},
): QueryCanvasView {
  let current: QueryGraph = { nodes: [emptyNode(0)], edges: [] };
  const root = el("div", { class: "query-canvas" });
  const row = el("div", { class: "qc-row" });
  const text = el("code", { class: "qc-text" });
  const nameInput = el("input", {
    class: "qc-name",
    type: "text",
    placeholder: "cohort name",
  });
  const saveButton = el("button", { class: "qc-save" }, "Save cohort");
  const addButton = el("button", { class: "qc-add" }, "Add state");

  addButton.addEventListener("click", () => {
    if (current.nodes.length > 0) {
      current.edges.push("eventual");
    }
    current.nodes.push(emptyNode(0));
    render();
  });
  saveButton.addEventListener("click", () => {
    const query = serializeQuery(current);
    if (query !== "" && options.onSave) {
      options.onSave(nameInput.value.trim(), query);
    }
  });

  const actions = el("div", { class: "qc-actions" });
  actions.append(addButton, text, nameInput, saveButton);
  root.append(row, actions);

  function numberOrNull(raw: string): number | null {
    if (raw.trim() === "") {
      return null;
    }
    const value = Number(raw);
    return Number.isFinite(value) ? value : null;
  }

  function attrInput(
    label: string,
    cls: string,
    value: number | null,
    apply: (v: number | null) => void,
  ): HTMLElement {
    const wrap = el("label", { class: "qc-attr" }, label);
    const input = el("input", { class: cls, type: "number" });
    input.value = value === null ? "" : String(value);
    input.addEventListener("change", () => {
      apply(numberOrNull(input.value));
      render();
    });
    wrap.appendChild(input);
    return wrap;
  }

  function flagInput(
    label: string,
    cls: string,
    value: boolean,
    apply: (v: boolean) => void,
  ): HTMLElement {
    const wrap = el("label", { class: "qc-flag" });
    const input = el("input", { class: cls, type: "checkbox" });
    input.checked = value;
    input.addEventListener("change", () => {
      apply(input.checked);
      render();
    });
    wrap.append(input, document.createTextNode(label));
    return wrap;
  }

  function nodeChip(node: QueryNode, index: number): HTMLElement {
    const chip = el("div", { class: "qc-node", "data-index": String(index) });
    const head = el("div", { class: "qc-node-head" }, "S");
    const stateInput = el("input", { class: "qc-state", type: "number", min: "0" });
    stateInput.value = String(node.state);
    stateInput.addEventListener("change", () => {
      const value = Math.trunc(Number(stateInput.value));
      if (Number.isFinite(value) && value >= 0) {
        node.state = value;
      }
      render();
    });
    const remove = el("button", { class: "qc-remove", title: "remove node" }, "x");
    remove.addEventListener("click", () => {
      current.nodes.splice(index, 1);
      current.edges.splice(Math.max(0, index - 1), 1);
      render();
    });
    head.append(stateInput, remove);
    chip.appendChild(head);
    chip.appendChild(flagInput("initial", "qc-initial", node.initial, (v) => (node.initial = v)));
    chip.appendChild(flagInput("final", "qc-final", node.final, (v) => (node.final = v)));
    chip.appendChild(attrInput("min age", "qc-min-age", node.minAge, (v) => (node.minAge = v)));
    chip.appendChild(attrInput("max age", "qc-max-age", node.maxAge, (v) => (node.maxAge = v)));
    chip.appendChild(
      attrInput("min visits", "qc-min-visits", node.minVisits, (v) => {
        node.minVisits = v === null ? null : Math.max(1, Math.trunc(v));
      }),
    );
    return chip;
  }

  function render(): void {
    clear(row);
    current.nodes.forEach((node, i) => {
      if (i > 0) {
        const edge = el(
          "button",
          { class: "qc-edge", "data-index": String(i - 1), title: "toggle edge kind" },
          current.edges[i - 1] === "direct" ? "->" : "~>",
        );
        edge.addEventListener("click", () => {
          current.edges[i - 1] = current.edges[i - 1] === "direct" ? "eventual" : "direct";
          render();
        });
        row.appendChild(edge);
      }
      row.appendChild(nodeChip(node, i));
    });
    const query = serializeQuery(current);
    text.textContent = query;
    saveButton.disabled = query === "";
  }

  render();

  return {
    el: root,
    graph: () => cloneGraph(current),
    setGraph: (graph: QueryGraph) => {
      current = cloneGraph(graph);
      render();
    },
    queryText: () => serializeQuery(current),
  };
}
