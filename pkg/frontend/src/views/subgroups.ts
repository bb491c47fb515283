import type { CohortInfo } from "../api.js";
import { clear, el } from "../dom.js";

/** Saved cohorts with member counts; selecting one scopes every other
 * view to it, and the built-in "all subjects" row clears the scope. */
export interface SubgroupsOptions {
  onActivate?: (cohortId: string | null) => void;
  onDelete?: (cohortId: string) => void;
}

export interface SubgroupsView {
  readonly el: HTMLElement;
  update(cohorts: CohortInfo[], activeId: string | null): void;
}

export function createSubgroupsView(options: SubgroupsOptions = {}): SubgroupsView {
  const root = el("div", { class: "subgroups" });

  function entry(
    label: string,
    cohortId: string | null,
    active: boolean,
    detail?: CohortInfo,
  ): HTMLElement {
    const item = el("li", {
      class: active ? "sg-item sg-active" : "sg-item",
      "data-cohort": cohortId ?? "",
    });
    const activate = el("button", { class: "sg-activate" }, label);
    activate.addEventListener("click", () => options.onActivate?.(cohortId));
    item.appendChild(activate);
    if (detail) {
      item.appendChild(
        el("span", { class: "sg-count" }, `${detail.member_ids.length} subjects`),
      );
      item.appendChild(el("code", { class: "sg-query" }, detail.query_text));
      const del = el("button", { class: "sg-delete", title: "delete cohort" }, "delete");
      del.addEventListener("click", () => options.onDelete?.(detail.cohort_id));
      item.appendChild(del);
    }
    return item;
  }

  function update(cohorts: CohortInfo[], activeId: string | null): void {
    clear(root);
    const list = el("ul", { class: "sg-list" });
    list.appendChild(entry("All subjects", null, activeId === null));
    for (const cohort of cohorts) {
      list.appendChild(
        entry(
          cohort.name !== "" ? cohort.name : cohort.cohort_id,
          cohort.cohort_id,
          activeId === cohort.cohort_id,
          cohort,
        ),
      );
    }
    root.appendChild(list);
  }

  return { el: root, update };
}
