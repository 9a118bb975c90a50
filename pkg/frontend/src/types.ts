// Mirrors of the service's JSON payloads. Field names match the wire format.

export type ReadyState =
  | "created"
  | "references_ready"
  | "clusters_ready"
  | "outline_ready"
  | "draft_ready"
  | "exported";

export type TransientState =
  | "searching"
  | "categorizing"
  | "outlining"
  | "composing";

export type SessionState = ReadyState | TransientState | "failed";

export interface TopicInfo {
  title: string;
  criterion: string;
}

export interface ReferenceRow {
  ref_id: string;
  source: string;
  title: string;
  authors: string;
  abstract: string;
  arxiv_id: string;
  year: number;
  pdf_url: string;
  fulltext: boolean;
  asset_count: number;
  flagged_fields: string[];
}

export interface ClusterView {
  criterion: string;
  names: string[];
  assignments: Record<string, number>;
  coords2d: Record<string, number[]>;
  version: number;
}

export interface OutlineView {
  text: string;
  version: number;
  predefined: string[];
}

export interface SectionView {
  index: number;
  title: string;
  status: string;
  version: number;
  summary: string;
  body: string;
  warnings: string[];
}

export interface AssetRow {
  ref_id: string;
  asset_index: number;
  kind: string;
  caption: string;
  disabled: boolean;
}

export interface JobSnapshot {
  job_id: string;
  session_id: string;
  stage: string;
  state: "running" | "done" | "failed";
  progress: number;
  message: string;
  error: string;
}

export interface ExportInfo {
  available: boolean;
  formats: string[];
  built: string[];
}

export interface SessionView {
  session_id: string;
  topic: TopicInfo;
  state: SessionState;
  resume_state: ReadyState;
  active_stage: string;
  created_at: string;
  updated_at: string;
  timing: Record<string, number>;
  stage_info: Record<string, Record<string, unknown>>;
  error: string;
  disabled_assets: string[];
  warnings: string[];
  active_job: JobSnapshot | null;
  references: ReferenceRow[];
  clusters: ClusterView | null;
  outline: OutlineView | null;
  sections: SectionView[] | null;
  assets: AssetRow[];
  export: ExportInfo;
}

export interface SessionSummary {
  session_id: string;
  topic_title: string;
  state: SessionState;
  created_at: string;
  updated_at: string;
}

export interface ClusterEdit {
  version: number;
  ref_id: string;
  target: number;
}

export interface OutlineEditResult {
  version: number;
  text: string;
}

export interface SectionEditResult {
  index: number;
  version: number;
  status: string;
}

export interface StageOptions {
  confirm?: boolean;
  force?: boolean;
}

export interface ExportDownload {
  format: string;
  filename: string;
  bytes: Uint8Array;
  warnings: number;
}
