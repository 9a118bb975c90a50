// Single-page application shell: a seven-step wizard over one session,
// background job polling, and the editing widgets for each stage.

import { ApiClient, ApiError } from "./api.js";
import { ClusterCanvas } from "./clusterCanvas.js";
import { clear, el } from "./dom.js";
import { MutationGate } from "./gate.js";
import { OutlineEditor } from "./outlineEditor.js";
import { SectionEditor } from "./sectionEditor.js";
import type {
  ExportDownload,
  ReferenceRow,
  SessionSummary,
  SessionView,
} from "./types.js";
import {
  STEPS,
  effectiveState,
  stepViews,
  suggestedStep,
  type StepId,
  type StepView,
} from "./wizard.js";

export interface AppOptions {
  /** Job progress poll period; the production default is 2 s. */
  pollIntervalMs?: number;
}

const RUN_BUTTON: Partial<Record<StepId, { id: string; label: string; rerun: string }>> = {
  references: {
    id: "btn-search",
    label: "Search arXiv",
    rerun: "Search again (replaces search results)",
  },
  clusters: {
    id: "btn-run-categorize",
    label: "Run categorization",
    rerun: "Re-run categorization (discards outline and drafts)",
  },
  outline: {
    id: "btn-run-outline",
    label: "Generate outline",
    rerun: "Regenerate outline (discards drafts)",
  },
  sections: {
    id: "btn-run-compose",
    label: "Compose sections",
    rerun: "Re-compose (edited sections are kept)",
  },
  export: {
    id: "btn-run-export",
    label: "Build export bundles",
    rerun: "Rebuild export bundles",
  },
};

export class App {
  readonly api: ApiClient;
  session: SessionView | null = null;
  sessions: SessionSummary[] = [];
  currentStep: StepId = "topic";
  lastExport: ExportDownload | null = null;

  private readonly root: HTMLElement;
  private readonly pollInterval: number;
  private pollTimer: ReturnType<typeof setInterval> | null = null;
  private pendingTitle = "";
  private pendingCriterion = "";
  private toastText = "";
  private chainIngest = false;

  private readonly stageGate = new MutationGate();
  private readonly uploadGate = new MutationGate();
  private readonly exportGate = new MutationGate();

  private canvas: ClusterCanvas | null = null;
  private readonly canvasHost = el("div", { id: "canvas-host" });
  private outlineEditor: OutlineEditor | null = null;
  private readonly outlineHost = el("div", { id: "outline-host" });
  private sectionEditor: SectionEditor | null = null;
  private readonly sectionHost = el("div", { id: "section-host" });

  constructor(root: HTMLElement, api: ApiClient, options: AppOptions = {}) {
    this.root = root;
    this.api = api;
    this.pollInterval = options.pollIntervalMs ?? 2000;
    this.root.classList.add("surveygen-app");
  }

  async start(): Promise<void> {
    await this.loadSessions();
    this.render();
  }

  stop(): void {
    this.stopPolling();
  }

  // -- state management ---------------------------------------------------

  private async loadSessions(): Promise<void> {
    try {
      this.sessions = await this.api.listSessions();
    } catch (err) {
      this.showError(err);
    }
  }

  async refresh(): Promise<void> {
    if (!this.session) {
      return;
    }
    try {
      this.applyView(await this.api.getSession(this.session.session_id));
    } catch (err) {
      this.showError(err);
      this.render();
    }
  }

  private applyView(view: SessionView): void {
    this.session = view;
    const running = view.active_job !== null && view.active_job.state === "running";
    if (running) {
      this.startPolling();
    } else {
      this.stopPolling();
      void this.afterJobSettled(view);
    }
    this.render();
  }

  private async afterJobSettled(view: SessionView): Promise<void> {
    if (!this.chainIngest) {
      return;
    }
    this.chainIngest = false;
    // search leaves arXiv hits without fulltext; fetch and parse them next
    const pending = view.references.some((r: ReferenceRow) => !r.fulltext);
    if (pending && view.state === "references_ready") {
      await this.startStage("ingest", false);
    }
  }

  private startPolling(): void {
    if (this.pollTimer !== null) {
      return;
    }
    this.pollTimer = setInterval(() => void this.pollTick(), this.pollInterval);
  }

  private stopPolling(): void {
    if (this.pollTimer !== null) {
      clearInterval(this.pollTimer);
      this.pollTimer = null;
    }
  }

  private async pollTick(): Promise<void> {
    if (!this.session) {
      this.stopPolling();
      return;
    }
    try {
      this.applyView(await this.api.getSession(this.session.session_id));
    } catch {
      // transient poll failure; the next tick retries
    }
  }

  private async selectSession(sessionId: string): Promise<void> {
    if (!sessionId) {
      this.session = null;
      this.currentStep = "topic";
      this.pendingTitle = "";
      this.pendingCriterion = "";
      this.stopPolling();
      this.render();
      return;
    }
    try {
      const view = await this.api.getSession(sessionId);
      this.currentStep = suggestedStep(view);
      this.applyView(view);
    } catch (err) {
      this.showError(err);
      this.render();
    }
  }

  private async createSession(criterion: string | null): Promise<void> {
    await this.stageGate.run(async () => {
      try {
        const view = await this.api.createSession(this.pendingTitle.trim(), criterion);
        this.session = view;
        this.currentStep = "references";
        await this.loadSessions();
        this.render();
      } catch (err) {
        this.showError(err);
        this.render();
      }
    });
  }

  private async startStage(stage: string, confirm: boolean, force = false): Promise<void> {
    await this.stageGate.run(async () => {
      if (!this.session) {
        return;
      }
      try {
        await this.api.runStage(this.session.session_id, stage, { confirm, force });
        if (stage === "search") {
          this.chainIngest = true;
        }
      } catch (err) {
        this.showError(err);
      }
      await this.refresh();
    });
  }

  private async uploadFiles(files: ArrayLike<File>): Promise<void> {
    await this.uploadGate.run(async () => {
      if (!this.session) {
        return;
      }
      for (let i = 0; i < files.length; i++) {
        const file = files[i];
        if (!file) {
          continue;
        }
        try {
          const binary = /\.pdf$/i.test(file.name);
          const content = binary
            ? new Uint8Array(await file.arrayBuffer())
            : await file.text();
          await this.api.uploadReference(this.session.session_id, file.name, content);
        } catch (err) {
          this.showError(err);
          break;
        }
      }
      await this.refresh();
    });
  }

  private async downloadExport(format: string): Promise<void> {
    await this.exportGate.run(async () => {
      if (!this.session) {
        return;
      }
      try {
        const result = await this.api.downloadExport(this.session.session_id, format);
        this.lastExport = result;
        this.triggerBrowserDownload(result);
      } catch (err) {
        this.showError(err);
      }
      this.render();
    });
  }

  private triggerBrowserDownload(result: ExportDownload): void {
    // test DOMs have no object URLs; skipping the anchor click is fine there
    if (typeof URL === "undefined" || typeof URL.createObjectURL !== "function") {
      return;
    }
    const url = URL.createObjectURL(new Blob([result.bytes as BlobPart], { type: "application/zip" }));
    const anchor = el("a");
    anchor.href = url;
    anchor.download = result.filename;
    anchor.click();
    URL.revokeObjectURL(url);
  }

  private showError(err: unknown): void {
    if (err instanceof ApiError) {
      this.toastText = `${err.name}: ${err.detail}`;
    } else {
      this.toastText = String(err);
    }
  }

  private showToast(message: string): void {
    this.toastText = message;
    this.render();
  }

  // -- rendering ------------------------------------------------------------

  render(): void {
    const views = stepViews(this.session);
    clear(this.root);
    this.root.append(
      this.renderHeader(),
      el("div", { className: "layout" }, [
        this.renderSidebar(views),
        this.renderPanel(views),
      ]),
      this.renderFooter(views),
      this.renderToast(),
    );
  }

  private renderHeader(): HTMLElement {
    const options = [el("option", { value: "", text: "— new survey —" })];
    for (const summary of this.sessions) {
      options.push(
        el("option", {
          value: summary.session_id,
          text: `${summary.topic_title} [${summary.state}]`,
        }),
      );
    }
    const picker = el(
      "select",
      {
        id: "session-picker",
        onChange: (ev) =>
          void this.selectSession((ev.target as HTMLSelectElement).value),
      },
      options,
    );
    picker.value = this.session?.session_id ?? "";
    const state = el("span", {
      id: "session-state",
      className: "state-badge",
      text: this.session ? this.session.state : "no session",
    });
    const header = el("header", {}, [
      el("h1", { text: "surveygen" }),
      picker,
      state,
    ]);
    const warnings = this.session?.warnings ?? [];
    if (warnings.length > 0) {
      const details = el("details", { className: "warnings" }, [
        el("summary", { text: `${warnings.length} warning(s)` }),
        el("ul", {}, warnings.map((w) => el("li", { text: w }))),
      ]);
      header.append(details);
    }
    return header;
  }

  private renderSidebar(views: StepView[]): HTMLElement {
    const items = views.map((view) => {
      const classes: string[] = [view.status];
      if (view.id === this.currentStep) {
        classes.push("current");
      }
      const pieces: (Node | string)[] = [
        el("span", { className: "step-index", text: String(view.index) }),
        el("span", { className: "step-title", text: view.title }),
      ];
      if (view.optional) {
        pieces.push(el("span", { className: "step-optional", text: "optional" }));
      }
      if (view.error) {
        pieces.push(el("span", { className: "step-error-dot", text: "!" }));
      }
      return el(
        "li",
        {
          className: classes.join(" "),
          dataset: { step: view.id, status: view.status },
          onClick: () => {
            if (view.status !== "locked") {
              this.currentStep = view.id;
              this.render();
            }
          },
        },
        pieces,
      );
    });
    return el("aside", {}, [el("ol", { id: "wizard-steps" }, items)]);
  }

  private renderPanel(views: StepView[]): HTMLElement {
    const view = views.find((v) => v.id === this.currentStep) ?? views[0];
    const panel = el("main", { id: `panel-${view.id}`, className: "panel" });
    panel.append(el("h2", { text: `Step ${view.index}: ${view.title}` }));
    if (view.error) {
      panel.append(el("div", { className: "step-error", text: view.error }));
    }
    const progress = this.progressFragment(view);
    if (progress) {
      panel.append(progress);
    }
    switch (view.id) {
      case "topic":
        panel.append(this.topicPanel());
        break;
      case "criterion":
        panel.append(this.criterionPanel());
        break;
      case "references":
        panel.append(this.referencesPanel(view));
        break;
      case "clusters":
        panel.append(this.clustersPanel(view));
        break;
      case "outline":
        panel.append(this.outlinePanel(view));
        break;
      case "sections":
        panel.append(this.sectionsPanel(view));
        break;
      case "export":
        panel.append(this.exportPanel(view));
        break;
    }
    return panel;
  }

  private progressFragment(view: StepView): HTMLElement | null {
    const job = this.session?.active_job;
    if (!job || job.state !== "running" || view.status !== "running") {
      return null;
    }
    const pct = Math.round(job.progress * 100);
    const bar = el("div", { className: "progress-bar" });
    const fill = el("div", { className: "progress-fill" });
    fill.style.width = `${pct}%`;
    bar.append(fill);
    return el("div", { className: "progress" }, [
      el("div", {
        className: "progress-label",
        text: `${job.stage}: ${job.message || "working"} (${pct}%)`,
      }),
      bar,
    ]);
  }

  private runButton(view: StepView): HTMLElement | null {
    const spec = RUN_BUTTON[view.id];
    if (!spec || !view.stage) {
      return null;
    }
    const label = view.needsConfirm ? spec.rerun : spec.label;
    return el("button", {
      id: spec.id,
      text: label,
      disabled: !view.runnable || this.stageGate.inFlight,
      onClick: () => void this.startStage(view.stage!, view.needsConfirm),
    });
  }

  private topicPanel(): HTMLElement {
    if (this.session) {
      return el("div", {}, [
        el("p", { text: `Topic: ${this.session.topic.title}` }),
        el("p", {
          className: "muted",
          text: `Session ${this.session.session_id}, created ${this.session.created_at}`,
        }),
      ]);
    }
    return el("div", {}, [
      el("label", { htmlFor: "topic-title", text: "Survey topic" }),
      el("input", {
        id: "topic-title",
        type: "text",
        value: this.pendingTitle,
        placeholder: "e.g. Neural Approaches to Automated Text Summarization",
        onInput: (ev) => {
          this.pendingTitle = (ev.target as HTMLInputElement).value;
          const next = this.root.querySelector<HTMLButtonElement>("#btn-next");
          if (next) {
            next.disabled = this.pendingTitle.trim() === "";
          }
        },
      }),
      el("p", { className: "hint", text: "Continue to choose an optional grouping criterion." }),
    ]);
  }

  private criterionPanel(): HTMLElement {
    if (this.session) {
      return el("div", {}, [
        el("p", { text: `Grouping criterion: ${this.session.topic.criterion}` }),
        el("p", { className: "muted", text: "Fixed at session creation." }),
      ]);
    }
    return el("div", {}, [
      el("label", { htmlFor: "criterion-text", text: "Group references by (optional)" }),
      el("textarea", {
        id: "criterion-text",
        rows: 3,
        value: this.pendingCriterion,
        placeholder: "default: main research theme",
        onInput: (ev) => {
          this.pendingCriterion = (ev.target as HTMLTextAreaElement).value;
        },
      }),
      el("button", {
        id: "btn-create",
        text: "Create survey session",
        disabled: this.pendingTitle.trim() === "",
        onClick: () => void this.createSession(this.pendingCriterion.trim() || null),
      }),
      el("p", {
        className: "hint",
        text: "Skip to group by the default criterion (main research theme).",
      }),
    ]);
  }

  private referencesPanel(view: StepView): HTMLElement {
    const box = el("div", {});
    if (!this.session) {
      box.append(el("p", { className: "muted", text: "Create a session first." }));
      return box;
    }
    const actions = el("div", { className: "ref-actions" });
    const run = this.runButton(view);
    if (run) {
      actions.append(run);
    }
    const effective = effectiveState(this.session);
    const canUpload = effective === "created" || effective === "references_ready";
    const fileInput = el("input", {
      id: "ref-files",
      type: "file",
      multiple: true,
      disabled: !canUpload || this.uploadGate.inFlight,
      onChange: (ev) => {
        const files = (ev.target as HTMLInputElement).files;
        if (files && files.length > 0) {
          void this.uploadFiles(files);
        }
      },
    });
    actions.append(
      el("label", { htmlFor: "ref-files", text: "Upload PDF or Markdown references:" }),
      fileInput,
    );
    box.append(actions);

    const refs = this.session.references;
    const pending = refs.filter((r) => !r.fulltext).length;
    if (pending > 0) {
      box.append(
        el("div", { className: "ingest-note" }, [
          el("span", { text: `${pending} reference(s) await download and parsing. ` }),
          el("button", {
            id: "btn-run-ingest",
            text: "Fetch and parse",
            disabled: this.stageGate.inFlight,
            onClick: () => void this.startStage("ingest", false),
          }),
        ]),
      );
    }
    if (refs.length === 0) {
      box.append(el("p", { className: "muted", text: "No references yet." }));
      return box;
    }
    const header = el("tr", {}, ["id", "title", "authors", "year", "source", "parsed", "flags"].map(
      (text) => el("th", { text }),
    ));
    const rows = refs.map((ref) =>
      el("tr", { dataset: { ref: ref.ref_id } }, [
        el("td", { text: ref.ref_id }),
        el("td", { text: ref.title }),
        el("td", { text: ref.authors }),
        el("td", { text: ref.year ? String(ref.year) : "" }),
        el("td", { text: ref.source }),
        el("td", { text: ref.fulltext ? "yes" : "pending" }),
        el("td", {
          className: ref.flagged_fields.length > 0 ? "flagged" : "",
          text: ref.flagged_fields.join(", "),
        }),
      ]),
    );
    box.append(
      el("table", { id: "refs-table" }, [
        el("thead", {}, [header]),
        el("tbody", {}, rows),
      ]),
    );
    return box;
  }

  private clustersPanel(view: StepView): HTMLElement {
    const box = el("div", {});
    const run = this.runButton(view);
    if (run) {
      box.append(run);
    }
    const clusters = this.session?.clusters ?? null;
    if (!clusters) {
      box.append(
        el("p", {
          className: "muted",
          text: "Run categorization to group the references, then adjust by dragging points.",
        }),
      );
      return box;
    }
    if (!this.canvas) {
      this.canvas = new ClusterCanvas(this.canvasHost, {
        reassign: async (refId, target, version) => {
          const updated = await this.api.reassignReference(this.session!.session_id, {
            version,
            ref_id: refId,
            target,
          });
          if (this.session) {
            this.session.clusters = updated;
          }
          return updated;
        },
        reload: () => this.refresh(),
        notify: (message) => this.showToast(message),
      });
    }
    this.canvas.setModel(clusters, view.editable);
    box.append(this.canvasHost);
    if (!view.editable && view.status === "complete") {
      box.append(
        el("p", {
          className: "muted",
          text: "Reassignment is only possible right after categorization; re-run the stage to adjust again.",
        }),
      );
    }
    return box;
  }

  private outlinePanel(view: StepView): HTMLElement {
    const box = el("div", {});
    const run = this.runButton(view);
    if (run) {
      box.append(run);
    }
    if (!this.outlineEditor) {
      this.outlineEditor = new OutlineEditor(this.outlineHost, {
        apply: async (text, version) => {
          const result = await this.api.applyOutlineText(
            this.session!.session_id,
            version,
            text,
          );
          if (this.session?.outline) {
            this.session.outline = {
              ...this.session.outline,
              version: result.version,
              text: result.text,
            };
          }
          return result;
        },
        reload: () => this.refresh(),
        notify: (message) => this.showToast(message),
      });
    }
    this.outlineEditor.setModel(this.session?.outline ?? null, view.editable);
    box.append(this.outlineHost);
    return box;
  }

  private sectionsPanel(view: StepView): HTMLElement {
    const box = el("div", {});
    const run = this.runButton(view);
    if (run) {
      box.append(run);
      if (view.needsConfirm) {
        box.append(
          el("button", {
            id: "btn-run-compose-force",
            text: "Regenerate all sections (discards edits)",
            disabled: !view.runnable || this.stageGate.inFlight,
            onClick: () => void this.startStage("compose", true, true),
          }),
        );
      }
    }
    if (!this.sectionEditor) {
      this.sectionEditor = new SectionEditor(this.sectionHost, {
        save: async (index, version, body) => {
          const result = await this.api.editSection(
            this.session!.session_id,
            index,
            version,
            body,
          );
          const sections = this.session?.sections;
          if (sections) {
            this.session!.sections = sections.map((s) =>
              s.index === index
                ? { ...s, body, version: result.version, status: result.status }
                : s,
            );
          }
          return result;
        },
        toggleAsset: async (refId, assetIndex, enabled) => {
          const result = await this.api.toggleAsset(
            this.session!.session_id,
            refId,
            assetIndex,
            enabled,
          );
          if (this.session) {
            this.session.disabled_assets = result.disabled_assets;
            this.session.assets = this.session.assets.map((a) => ({
              ...a,
              disabled: result.disabled_assets.includes(`${a.ref_id}:${a.asset_index}`),
            }));
          }
        },
        reload: () => this.refresh(),
        notify: (message) => this.showToast(message),
      });
    }
    const effective = this.session ? effectiveState(this.session) : null;
    const assetsEditable = effective === "draft_ready" || effective === "exported";
    this.sectionEditor.setModel(
      this.session?.sections ?? null,
      this.session?.assets ?? [],
      view.editable,
      assetsEditable,
    );
    box.append(this.sectionHost);
    return box;
  }

  private exportPanel(view: StepView): HTMLElement {
    const box = el("div", {});
    const run = this.runButton(view);
    if (run) {
      box.append(run);
    }
    const info = this.session?.export;
    if (!info || !info.available) {
      box.append(
        el("p", { className: "muted", text: "Compose the survey before exporting." }),
      );
      return box;
    }
    box.append(
      el("p", {
        id: "export-built",
        text: info.built.length > 0
          ? `Built bundles: ${info.built.join(", ")}`
          : "No bundles built yet.",
      }),
    );
    const buttons = info.formats.map((format) =>
      el("button", {
        id: `btn-download-${format}`,
        text: `Download ${format} bundle`,
        disabled: this.exportGate.inFlight,
        onClick: () => void this.downloadExport(format),
      }),
    );
    box.append(el("div", { className: "export-actions" }, buttons));
    if (this.lastExport) {
      box.append(
        el("p", {
          id: "export-result",
          text:
            `${this.lastExport.filename}: ${this.lastExport.bytes.length} bytes, ` +
            `${this.lastExport.warnings} export warning(s)`,
        }),
      );
    }
    return box;
  }

  private renderFooter(views: StepView[]): HTMLElement {
    const idx = STEPS.findIndex((s) => s.id === this.currentStep);
    const current = views[idx];
    const next = idx + 1 < views.length ? views[idx + 1] : null;

    const creating = !this.session;
    const titleReady = this.pendingTitle.trim() !== "";

    let nextEnabled = next !== null && next.status !== "locked";
    if (creating && current.id === "topic") {
      nextEnabled = titleReady;
    }
    if (creating && current.id === "criterion") {
      nextEnabled = titleReady;
    }
    if (creating && idx > 1) {
      nextEnabled = false;
    }

    const back = el("button", {
      id: "btn-back",
      text: "Back",
      disabled: idx === 0,
      onClick: () => {
        this.currentStep = STEPS[Math.max(0, idx - 1)].id;
        this.render();
      },
    });
    const nextBtn = el("button", {
      id: "btn-next",
      text: "Next",
      disabled: !nextEnabled,
      onClick: () => {
        if (creating && current.id === "criterion") {
          void this.createSession(this.pendingCriterion.trim() || null);
          return;
        }
        if (next) {
          this.currentStep = next.id;
          this.render();
        }
      },
    });
    const nav = el("div", { className: "wizard-nav" }, [back]);
    if (current.optional) {
      nav.append(
        el("button", {
          id: "btn-skip",
          text: "Skip",
          disabled: !nextEnabled,
          onClick: () => {
            if (creating && current.id === "criterion") {
              void this.createSession(null);
              return;
            }
            if (next) {
              this.currentStep = next.id;
              this.render();
            }
          },
        }),
      );
    }
    nav.append(nextBtn);
    return el("footer", {}, [nav]);
  }

  private renderToast(): HTMLElement {
    const toast = el("div", { id: "toast", className: this.toastText ? "show" : "" });
    if (this.toastText) {
      toast.append(
        el("span", { text: this.toastText }),
        el("button", {
          className: "toast-close",
          text: "dismiss",
          onClick: () => {
            this.toastText = "";
            this.render();
          },
        }),
      );
    }
    return toast;
  }
}
