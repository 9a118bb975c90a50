// Step wizard model: maps session state to what each of the seven steps
// may do right now. Pure functions, no DOM.

import type { ReadyState, SessionState, SessionView } from "./types.js";

export type StepId =
  | "topic"
  | "criterion"
  | "references"
  | "clusters"
  | "outline"
  | "sections"
  | "export";

export interface StepDefinition {
  id: StepId;
  index: number;
  title: string;
  optional: boolean;
  /** Pipeline stage this step runs, if any. */
  stage?: string;
}

export const STEPS: readonly StepDefinition[] = [
  { id: "topic", index: 1, title: "Topic", optional: false },
  { id: "criterion", index: 2, title: "Grouping criterion", optional: true },
  { id: "references", index: 3, title: "References", optional: false, stage: "search" },
  { id: "clusters", index: 4, title: "Categorization", optional: true, stage: "categorize" },
  { id: "outline", index: 5, title: "Outline", optional: true, stage: "outline" },
  { id: "sections", index: 6, title: "Sections", optional: true, stage: "compose" },
  { id: "export", index: 7, title: "Export", optional: false, stage: "export" },
];

export type StepStatus = "locked" | "ready" | "running" | "complete";

export interface StepView extends StepDefinition {
  status: StepStatus;
  /** The step's editing surface (canvas, text editors, toggles) is usable. */
  editable: boolean;
  /** Its stage can be started now (first run). */
  runnable: boolean;
  /** Re-running needs confirm=true because results already exist. */
  needsConfirm: boolean;
  /** Error text from the last failed run of this step's stage. */
  error: string;
}

const READY_RANK: Record<ReadyState, number> = {
  created: 0,
  references_ready: 1,
  clusters_ready: 2,
  outline_ready: 3,
  draft_ready: 4,
  exported: 5,
};

const RUNNING_STEP: Partial<Record<SessionState, StepId>> = {
  searching: "references",
  categorizing: "clusters",
  outlining: "outline",
  composing: "sections",
};

/** Artifact rank at which each step counts as complete. */
const DONE_RANK: Record<StepId, number> = {
  topic: 0,
  criterion: 0,
  references: 1,
  clusters: 2,
  outline: 3,
  sections: 4,
  export: 5,
};

/** State in which each step's editing surface is live. */
const EDIT_STATE: Partial<Record<StepId, SessionState[]>> = {
  clusters: ["clusters_ready"],
  outline: ["outline_ready"],
  sections: ["draft_ready"],
  export: ["draft_ready", "exported"],
};

/** Failed sessions act as their resume state; all other states act as themselves. */
export function effectiveState(view: SessionView): SessionState {
  return view.state === "failed" ? view.resume_state : view.state;
}

export function stateRank(view: SessionView): number {
  const direct = READY_RANK[view.state as ReadyState];
  if (direct !== undefined) {
    return direct;
  }
  return READY_RANK[view.resume_state] ?? 0;
}

function stageError(view: SessionView, stage: string | undefined): string {
  if (!stage) {
    return "";
  }
  // failures record "stage: ExcType: message" on the session
  if (view.state === "failed" && view.error.startsWith(`${stage}:`)) {
    return view.error;
  }
  if (view.active_job && view.active_job.stage === stage && view.active_job.error) {
    return view.active_job.error;
  }
  return "";
}

export function stepViews(view: SessionView | null): StepView[] {
  if (view === null) {
    // before a session exists only the create steps are actionable
    return STEPS.map((step) => ({
      ...step,
      status: step.id === "topic" || step.id === "criterion" ? "ready" : "locked",
      editable: step.id === "topic" || step.id === "criterion",
      runnable: false,
      needsConfirm: false,
      error: "",
    }));
  }
  const rank = stateRank(view);
  const runningStep = RUNNING_STEP[view.state];
  return STEPS.map((step) => {
    let status: StepStatus;
    if (runningStep === step.id) {
      status = "running";
    } else if (rank >= DONE_RANK[step.id]) {
      status = "complete";
    } else if (rank >= DONE_RANK[step.id] - 1) {
      status = "ready";
    } else {
      status = "locked";
    }
    const editStates = EDIT_STATE[step.id];
    const editable =
      editStates !== undefined && editStates.includes(effectiveState(view));
    const idle = runningStep === undefined;
    const runnable =
      idle && step.stage !== undefined && rank >= DONE_RANK[step.id] - 1;
    return {
      ...step,
      status,
      editable,
      runnable,
      needsConfirm: runnable && rank >= DONE_RANK[step.id] && step.id !== "export",
      error: stageError(view, step.stage),
    };
  });
}

/** First step the user still has work on; export once everything is built. */
export function suggestedStep(view: SessionView): StepId {
  const views = stepViews(view);
  const running = views.find((s) => s.status === "running");
  if (running) {
    return running.id;
  }
  const next = views.find((s) => s.status === "ready");
  return next ? next.id : "export";
}

export function stepById(id: StepId): StepDefinition {
  const step = STEPS.find((s) => s.id === id);
  if (!step) {
    throw new Error(`unknown step ${id}`);
  }
  return step;
}
