import {
  ApiClient,
  ApiError,
  type CohortInfo,
  type DensityData,
  type ModelInfo,
} from "./api.js";
import { clear, el } from "./dom.js";
import type { QueryGraph } from "./query.js";
import { createFeatureMatrixView, type FeatureMatrixView } from "./views/featureMatrix.js";
import { createQueryCanvasView, type QueryCanvasView } from "./views/queryCanvas.js";
import { createSubgroupsView, type SubgroupsView } from "./views/subgroups.js";
import { createSubjectsView, type SubjectsView } from "./views/subjects.js";
import {
  createWaterfallView,
  type WaterfallConfig,
  type WaterfallView,
} from "./views/waterfall.js";

/**
 * Wires the views together around one ViewState. Activating a cohort
 * re-fetches every cohort-scoped payload (waterfall, densities, and the
 * subject list derived from the waterfall) in a single refresh cycle;
 * responses that arrive after a newer request for the same view are
 * discarded, so the screen always reflects the latest selection.
 */
export interface ViewState {
  modelId: string | null;
  selectedVariables: string[];
  cohortId: string | null;
  canvas: QueryGraph;
  subjectId: string | null;
}

export interface AppOptions {
  root: HTMLElement;
  api: ApiClient;
  waterfall?: Partial<WaterfallConfig>;
}

export class App {
  readonly matrix: FeatureMatrixView;
  readonly waterfall: WaterfallView;
  readonly canvas: QueryCanvasView;
  readonly subgroups: SubgroupsView;
  readonly subjects: SubjectsView;

  private readonly api: ApiClient;
  private readonly status: HTMLElement;
  private readonly varsBox: HTMLElement;
  private readonly modelSummary: HTMLElement;

  private model: ModelInfo | null = null;
  private selectedVariables: string[] = [];
  private cohortId: string | null = null;
  private subjectId: string | null = null;
  private subjectIds: string[] = [];
  private cohorts: CohortInfo[] = [];
  private readonly tokens = new Map<string, number>();

  constructor(options: AppOptions) {
    this.api = options.api;
    this.matrix = createFeatureMatrixView();
    this.waterfall = createWaterfallView(options.waterfall);
    this.canvas = createQueryCanvasView({
      onSave: (name, query) => void this.saveCohort(name, query),
    });
    this.subgroups = createSubgroupsView({
      onActivate: (cohortId) => void this.activateCohort(cohortId),
      onDelete: (cohortId) => void this.deleteCohort(cohortId),
    });
    this.subjects = createSubjectsView({
      onSelect: (sid) => void this.selectSubject(sid),
      onOutcomesChange: () => void this.run(() => this.refreshDensities()),
    });

    this.status = el("div", { class: "app-status" });
    this.varsBox = el("div", { class: "var-picker" });
    this.modelSummary = el("div", { class: "model-summary" });
    this.buildSkeleton(options.root);
  }

  state(): ViewState {
    return {
      modelId: this.model?.model_id ?? null,
      selectedVariables: [...this.selectedVariables],
      cohortId: this.cohortId,
      canvas: this.canvas.graph(),
      subjectId: this.subjectId,
    };
  }

  private buildSkeleton(root: HTMLElement): void {
    clear(root);
    const header = el("header", { class: "app-header" });
    header.appendChild(el("h1", {}, "Progression explorer"));

    const loadForm = el("div", { class: "model-form" });
    const modelInput = el("input", {
      class: "model-input",
      type: "text",
      placeholder: "model id",
    });
    const loadButton = el("button", { class: "model-load" }, "Load model");
    loadButton.addEventListener("click", () =>
      void this.run(() => this.loadModel(modelInput.value.trim())),
    );
    loadForm.append(modelInput, loadButton);

    const trainForm = el("div", { class: "train-form" });
    const datasetInput = el("input", {
      class: "train-dataset",
      type: "text",
      placeholder: "dataset id",
    });
    const statesInput = el("input", {
      class: "train-states",
      type: "number",
      min: "1",
      value: "3",
    });
    const seedInput = el("input", {
      class: "train-seed",
      type: "number",
      value: "0",
    });
    const trainButton = el("button", { class: "train-run" }, "Train");
    trainButton.addEventListener("click", () =>
      void this.run(async () => {
        const result = await this.api.trainModel({
          dataset_id: datasetInput.value.trim(),
          n_states: Number(statesInput.value),
          seed: Number(seedInput.value),
        });
        this.setStatus(`trained ${result.model_id}`);
        await this.loadModel(result.model_id);
      }),
    );
    trainForm.append(
      datasetInput,
      el("span", { class: "train-label" }, "states"),
      statesInput,
      el("span", { class: "train-label" }, "seed"),
      seedInput,
      trainButton,
    );

    header.append(loadForm, trainForm, this.modelSummary, this.status);
    root.appendChild(header);

    root.appendChild(this.section("Feature matrix", this.varsBox, this.matrix.el));
    root.appendChild(this.section("Pathways", this.waterfall.el));
    root.appendChild(this.section("Query canvas", this.canvas.el));
    root.appendChild(this.section("Subgroups", this.subgroups.el));
    root.appendChild(this.section("Subjects", this.subjects.el));
  }

  private section(title: string, ...children: HTMLElement[]): HTMLElement {
    const wrap = el("section", { class: "panel" });
    wrap.appendChild(el("h2", {}, title));
    wrap.append(...children);
    return wrap;
  }

  private setStatus(message: string, isError = false): void {
    this.status.textContent = message;
    this.status.classList.toggle("app-error", isError);
  }

  async run(action: () => Promise<void>): Promise<void> {
    try {
      await action();
    } catch (err) {
      if (err instanceof ApiError) {
        this.setStatus(err.message, true);
      } else {
        this.setStatus(String(err), true);
        throw err;
      }
    }
  }

  /** Tag a request for one view; resolves null when a newer request for
   * the same view started while this one was in flight. */
  private async guard<T>(view: string, work: Promise<T>): Promise<T | null> {
    const token = (this.tokens.get(view) ?? 0) + 1;
    this.tokens.set(view, token);
    try {
      const result = await work;
      return this.tokens.get(view) === token ? result : null;
    } catch (err) {
      if (this.tokens.get(view) !== token) {
        return null;
      }
      throw err;
    }
  }

  async loadModel(modelId: string): Promise<void> {
    if (modelId === "") {
      return;
    }
    const model = await this.api.getModel(modelId);
    this.model = model;
    this.cohortId = null;
    this.subjectId = null;
    this.selectedVariables = [
      ...model.dataset.model_variables,
      ...model.dataset.extra_variables,
    ];
    this.modelSummary.textContent =
      `model ${model.model_id}: ${model.n_states} states, ` +
      `log-likelihood ${model.log_likelihood}, ` +
      `dataset ${model.dataset.dataset_id} (${model.dataset.n_subjects} subjects)`;
    this.renderVariablePicker();
    this.subjects.setOutcomeNames(model.dataset.outcome_names);
    this.setStatus(`loaded ${model.model_id}`);
    await Promise.all([
      this.refreshMatrix(),
      this.refreshCohortScoped(),
      this.refreshCohorts(),
    ]);
  }

  private renderVariablePicker(): void {
    clear(this.varsBox);
    if (!this.model) {
      return;
    }
    const all = [
      ...this.model.dataset.model_variables,
      ...this.model.dataset.extra_variables,
    ];
    for (const variable of all) {
      const label = el("label", { class: "var-option" });
      const box = el("input", { class: "var-check", type: "checkbox" });
      box.checked = this.selectedVariables.includes(variable);
      box.dataset.variable = variable;
      box.addEventListener("change", () => {
        const checked = [...this.varsBox.querySelectorAll<HTMLInputElement>(".var-check")]
          .filter((c) => c.checked)
          .map((c) => c.dataset.variable ?? "");
        this.selectedVariables = all.filter((v) => checked.includes(v));
        void this.run(() => this.refreshMatrix());
      });
      label.append(box, document.createTextNode(variable));
      this.varsBox.appendChild(label);
    }
  }

  private async refreshMatrix(): Promise<void> {
    if (!this.model) {
      return;
    }
    if (this.selectedVariables.length === 0) {
      this.matrix.clearView();
      return;
    }
    const data = await this.guard(
      "matrix",
      this.api.getFeatureMatrix(this.model.model_id, this.selectedVariables),
    );
    if (data) {
      this.matrix.update(data);
    }
  }

  /** One refresh cycle over everything scoped by the active cohort. */
  private async refreshCohortScoped(): Promise<void> {
    await Promise.all([this.refreshWaterfall(), this.refreshDensities()]);
  }

  private async refreshWaterfall(): Promise<void> {
    if (!this.model) {
      return;
    }
    const points = await this.guard(
      "waterfall",
      this.api.getWaterfall(this.model.model_id, this.cohortId),
    );
    if (points === null) {
      return;
    }
    this.waterfall.update(points, this.model.n_states);
    this.subjectIds = [...new Set(points.map((p) => p.subject_id))].sort();
    if (this.subjectId !== null && !this.subjectIds.includes(this.subjectId)) {
      this.subjectId = null;
      this.subjects.clearDetail();
    }
    this.subjects.updateList(this.subjectIds, this.subjectId);
  }

  private async refreshDensities(): Promise<void> {
    if (!this.model) {
      return;
    }
    const pair = this.subjects.outcomes();
    if (pair === null) {
      this.subjects.updateDensities(null, null);
      return;
    }
    const modelId = this.model.model_id;
    const tolerant = (outcome: string): Promise<DensityData | null> =>
      this.api.getDensity(modelId, outcome, this.cohortId).catch((err) => {
        if (err instanceof ApiError) {
          return null;
        }
        throw err;
      });
    const result = await this.guard(
      "density",
      Promise.all([tolerant(pair[0]), tolerant(pair[1])]),
    );
    if (result) {
      this.subjects.updateDensities(result[0], result[1]);
    }
  }

  private async refreshCohorts(): Promise<void> {
    const cohorts = await this.guard("cohorts", this.api.listCohorts());
    if (cohorts === null) {
      return;
    }
    this.cohorts = cohorts;
    this.subgroups.update(this.cohorts, this.cohortId);
  }

  async activateCohort(cohortId: string | null): Promise<void> {
    this.cohortId = cohortId;
    this.subgroups.update(this.cohorts, cohortId);
    await this.run(() => this.refreshCohortScoped());
  }

  async saveCohort(name: string, query: string): Promise<void> {
    if (!this.model) {
      this.setStatus("load a model before saving cohorts", true);
      return;
    }
    const modelId = this.model.model_id;
    await this.run(async () => {
      const cohort = await this.api.createCohort(modelId, name, query);
      this.setStatus(
        `saved ${cohort.name !== "" ? cohort.name : cohort.cohort_id} ` +
        `(${cohort.member_ids.length} subjects)`,
      );
      await this.refreshCohorts();
      await this.activateCohort(cohort.cohort_id);
    });
  }

  async deleteCohort(cohortId: string): Promise<void> {
    await this.run(async () => {
      await this.api.deleteCohort(cohortId);
      const wasActive = this.cohortId === cohortId;
      if (wasActive) {
        this.cohortId = null;
      }
      await this.refreshCohorts();
      if (wasActive) {
        await this.refreshCohortScoped();
      }
    });
  }

  async selectSubject(subjectId: string): Promise<void> {
    if (!this.model) {
      return;
    }
    this.subjectId = subjectId;
    this.subjects.updateList(this.subjectIds, subjectId);
    const modelId = this.model.model_id;
    await this.run(async () => {
      const detail = await this.guard("subject", this.api.getSubject(modelId, subjectId));
      if (detail) {
        this.subjects.updateDetail(subjectId, detail);
      }
    });
  }
}

export function createApp(options: AppOptions): App {
  return new App(options);
}
