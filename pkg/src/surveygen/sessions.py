"""Session lifecycle: state machine, persistence, background jobs, user edits.

One directory per session under the storage root. The manifest is the commit
record: a stage's artifacts are written first and the manifest state flips
last, so a crash at any point reloads into the last ready state.
"""

from __future__ import annotations

import os
import threading
import time
import uuid
from dataclasses import asdict, dataclass, replace

from . import artifacts, pipeline
from .clustering import reassign_reference
from .config import Settings
from .errors import (InvalidTransition, InvariantViolation, JobAlreadyRunning,
                     StaleVersion, StorageUnavailable, UnknownReference,
                     UnknownSection, UnknownSession)
from .hyde import DEFAULT_CRITERION
from .ingest import build_reference, index_reference, parse_document
from .jobs import Job, JobRunner
from .outline import apply_edit, render_outline, replace_text
from .providers import build_providers

READY_STATES = ("created", "references_ready", "clusters_ready",
                "outline_ready", "draft_ready", "exported")
READY_RANK = {s: i for i, s in enumerate(READY_STATES)}
TRANSIENT_STATES = ("searching", "categorizing", "outlining", "composing")
ALL_STATES = frozenset(READY_STATES) | frozenset(TRANSIENT_STATES) | {"failed"}

# fallback rollback targets when a manifest predates the resume_state field
_ROLLBACK = {"searching": "created", "categorizing": "references_ready",
             "outlining": "clusters_ready", "composing": "outline_ready"}


@dataclass(frozen=True)
class StageSpec:
    name: str
    pre: tuple[str, ...]
    running: str | None  # None keeps the current state while the job runs
    done: str
    done_rank: int  # rank of the artifact group the stage produces


STAGES = {
    "search": StageSpec("search", ("created",), "searching",
                        "references_ready", 1),
    "ingest": StageSpec("ingest", ("created", "references_ready"), "searching",
                        "references_ready", 1),
    "categorize": StageSpec("categorize", ("references_ready",), "categorizing",
                            "clusters_ready", 2),
    "outline": StageSpec("outline", ("clusters_ready",), "outlining",
                         "outline_ready", 3),
    "compose": StageSpec("compose", ("outline_ready",), "composing",
                         "draft_ready", 4),
    "export": StageSpec("export", ("draft_ready", "exported"), None,
                        "exported", 5),
}
STAGE_ORDER = ("search", "ingest", "categorize", "outline", "compose", "export")


class SessionManager:
    """All session operations; everything below it is pure library code."""

    def __init__(self, settings: Settings, runner: JobRunner | None = None):
        self.settings = settings
        self.root = settings.storage_root
        try:
            os.makedirs(self.root, exist_ok=True)
        except OSError as exc:
            raise StorageUnavailable(f"cannot create storage root: {exc}")
        self.runner = runner or JobRunner(
            max_workers=max(4, settings.concurrency_cap))
        self._locks: dict[str, threading.RLock] = {}
        self._locks_guard = threading.Lock()
        self.recover_all()

    # -- plumbing ---------------------------------------------------------

    def _lock(self, session_id: str) -> threading.RLock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.RLock())

    def _dir(self, session_id: str) -> str:
        return os.path.join(self.root, session_id)

    def _manifest(self, session_id: str) -> dict:
        manifest = artifacts.read_json(
            os.path.join(self._dir(session_id), artifacts.MANIFEST))
        if manifest is None:
            raise UnknownSession(session_id)
        return manifest

    def _save_manifest(self, session_id: str, manifest: dict) -> None:
        manifest["updated_at"] = time.time()
        artifacts.write_json(
            os.path.join(self._dir(session_id), artifacts.MANIFEST), manifest)

    def _session_settings(self, manifest: dict) -> Settings:
        return Settings(**manifest["config"])

    def _effective_state(self, manifest: dict) -> str:
        if manifest["state"] == "failed":
            return manifest.get("resume_state", "created")
        return manifest["state"]

    def _ensure_no_job(self, session_id: str, manifest: dict) -> None:
        if self.runner.active(session_id) is not None or manifest["active_stage"]:
            raise JobAlreadyRunning(
                f"session {session_id} has an active "
                f"{manifest['active_stage'] or 'stage'} job")

    def _require_state(self, manifest: dict, wanted: tuple[str, ...],
                       action: str, guidance: str = "") -> None:
        state = self._effective_state(manifest)
        if state not in wanted:
            hint = f"; {guidance}" if guidance else ""
            raise InvalidTransition(
                f"{action} requires state {' or '.join(wanted)}, "
                f"session is {manifest['state']}{hint}")

    # -- lifecycle ---------------------------------------------------------

    def create_session(self, title: str, criterion: str | None = None) -> dict:
        title = (title or "").strip()
        if not title:
            raise ValueError("topic title must be non-empty")
        criterion = (criterion or "").strip() or DEFAULT_CRITERION
        session_id = uuid.uuid4().hex[:12]
        path = self._dir(session_id)
        try:
            os.makedirs(path)
        except OSError as exc:
            raise StorageUnavailable(f"cannot create session directory: {exc}")
        now = time.time()
        manifest = {
            "session_id": session_id,
            "topic_title": title,
            "criterion": criterion,
            "state": "created",
            "resume_state": "created",
            "active_stage": "",
            "created_at": now,
            "updated_at": now,
            "timing": {},
            "stage_info": {},
            "warnings": [],
            "error": "",
            "disabled_assets": [],
            "config": asdict(self.settings),
        }
        self._save_manifest(session_id, manifest)
        return manifest

    def list_sessions(self) -> list[dict]:
        out = []
        for name in sorted(os.listdir(self.root)):
            manifest = artifacts.read_json(
                os.path.join(self.root, name, artifacts.MANIFEST))
            if manifest is not None:
                out.append({
                    "session_id": manifest["session_id"],
                    "topic_title": manifest["topic_title"],
                    "state": manifest["state"],
                    "created_at": manifest["created_at"],
                    "updated_at": manifest["updated_at"],
                })
        return sorted(out, key=lambda s: s["created_at"])

    def recover_all(self) -> None:
        """Roll interrupted jobs back to their last ready state on startup."""
        if not os.path.isdir(self.root):
            return
        for name in os.listdir(self.root):
            session_dir = os.path.join(self.root, name)
            manifest = artifacts.read_json(
                os.path.join(session_dir, artifacts.MANIFEST))
            if manifest is None or not manifest.get("active_stage"):
                continue
            stage = manifest["active_stage"]
            resume = manifest.get("resume_state") or _ROLLBACK.get(
                manifest["state"], "created")
            if resume not in READY_RANK:
                resume = "created"
            artifacts.delete_ranks(session_dir, READY_RANK[resume] + 1)
            manifest["state"] = resume
            manifest["resume_state"] = resume
            manifest["active_stage"] = ""
            manifest["warnings"].append(
                f"interrupted {stage} stage was rolled back to {resume}")
            self._save_manifest(name, manifest)

    # -- references --------------------------------------------------------

    def upload_reference(self, session_id: str, filename: str,
                         raw: bytes) -> dict:
        with self._lock(session_id):
            manifest = self._manifest(session_id)
            self._ensure_no_job(session_id, manifest)
            self._require_state(
                manifest, ("created", "references_ready"), "uploading",
                "re-run categorize with confirm to add references later")
            settings = self._session_settings(manifest)
            chat, embedder = build_providers(settings)
            session_dir = self._dir(session_id)
            refs = artifacts.load_references(session_dir)
            ref_id = artifacts.next_ref_id(refs)
            markdown, found_assets = parse_document(
                raw, filename, settings.parser_cmd, settings.upload_limit_mb,
                os.path.join(session_dir, artifacts.ASSETS_DIR),
                asset_prefix=ref_id)
            paper = build_reference(ref_id, "upload", markdown, found_assets,
                                    chat=chat)
            store = pipeline.ensure_store(session_dir, embedder, settings)
            index_reference(paper, store, embedder, settings.chunk_size,
                            settings.chunk_overlap)
            artifacts.save_store(session_dir, store)
            record = artifacts.ref_to_dict(paper, fulltext=True)
            refs.append(record)
            artifacts.save_references(session_dir, refs)
            if manifest["state"] in ("created", "failed"):
                manifest["state"] = manifest["resume_state"] = "references_ready"
                manifest["error"] = ""
            self._save_manifest(session_id, manifest)
            return record

    # -- stage execution ----------------------------------------------------

    def run_stage(self, session_id: str, stage: str, confirm: bool = False,
                  options: dict | None = None) -> Job:
        spec = STAGES.get(stage)
        if spec is None:
            raise ValueError(f"unknown stage {stage!r}; expected one of "
                             + ", ".join(STAGE_ORDER))
        with self._lock(session_id):
            manifest = self._manifest(session_id)
            self._ensure_no_job(session_id, manifest)
            effective = self._effective_state(manifest)
            if effective in spec.pre:
                resume = effective
            elif READY_RANK.get(effective, -1) >= spec.done_rank:
                if not confirm:
                    raise InvalidTransition(
                        f"stage {stage} already completed; pass confirm=true "
                        f"to re-run it and discard downstream results")
                artifacts.delete_ranks(self._dir(session_id), spec.done_rank + 1)
                resume = READY_STATES[spec.done_rank - 1]
            else:
                raise InvalidTransition(
                    f"stage {stage} requires state {' or '.join(spec.pre)}, "
                    f"session is {manifest['state']}")
            manifest["state"] = spec.running or resume
            manifest["resume_state"] = resume
            manifest["active_stage"] = stage
            manifest["error"] = ""
            self._save_manifest(session_id, manifest)
            opts = dict(options or {})
            return self.runner.submit(
                session_id, stage,
                lambda progress: self._execute(session_id, spec, opts, progress))

    def _execute(self, session_id: str, spec: StageSpec, options: dict,
                 progress) -> None:
        started = time.perf_counter()
        manifest = self._manifest(session_id)
        settings = self._session_settings(manifest)
        chat, embedder = build_providers(settings)
        ctx = pipeline.StageContext(
            session_dir=self._dir(session_id), settings=settings,
            manifest=manifest, chat=chat, embedder=embedder,
            progress=progress, options=options)
        try:
            info = pipeline.STAGE_FUNCTIONS[spec.name](ctx)
        except Exception as exc:
            with self._lock(session_id):
                current = self._manifest(session_id)
                current["state"] = "failed"
                current["active_stage"] = ""
                current["error"] = f"{spec.name}: {type(exc).__name__}: {exc}"
                self._save_manifest(session_id, current)
            raise
        elapsed = time.perf_counter() - started
        with self._lock(session_id):
            current = self._manifest(session_id)
            current["state"] = current["resume_state"] = spec.done
            current["active_stage"] = ""
            current["error"] = ""
            current["timing"][spec.name] = elapsed
            current["stage_info"][spec.name] = info
            self._save_manifest(session_id, current)

    def job(self, job_id: str) -> Job:
        return self.runner.get(job_id)

    def wait(self, job_id: str, timeout: float | None = None) -> Job:
        return self.runner.wait(job_id, timeout)

    # -- user edits ----------------------------------------------------------

    def edit_clusters(self, session_id: str, version: int, ref_id: str,
                      target: int) -> dict:
        with self._lock(session_id):
            manifest = self._manifest(session_id)
            self._ensure_no_job(session_id, manifest)
            self._require_state(manifest, ("clusters_ready",),
                                "cluster reassignment")
            session_dir = self._dir(session_id)
            model = artifacts.load_clusters(session_dir)
            if model is None:
                raise InvalidTransition("no cluster model; run categorize first")
            if version != model.version:
                raise StaleVersion(f"cluster model is at version "
                                   f"{model.version}, edit was based on {version}")
            updated = reassign_reference(model, ref_id, target)
            artifacts.save_clusters(session_dir, updated)
            return self._cluster_view(updated)

    def edit_outline(self, session_id: str, version: int, edit: dict) -> dict:
        with self._lock(session_id):
            manifest = self._manifest(session_id)
            self._ensure_no_job(session_id, manifest)
            self._require_state(
                manifest, ("outline_ready",), "outline editing",
                "the outline is frozen once composing starts; re-run the "
                "outline or compose stage with confirm to change it")
            session_dir = self._dir(session_id)
            current = artifacts.load_outline(session_dir)
            if current is None:
                raise InvalidTransition("no outline; run the outline stage first")
            if version != current.version:
                raise StaleVersion(f"outline is at version {current.version}, "
                                   f"edit was based on {version}")
            try:
                if edit.get("text") is not None:
                    updated = replace_text(current, edit["text"])
                else:
                    updated = apply_edit(current, edit)
            except KeyError as exc:
                raise InvariantViolation(f"outline edit is missing field {exc}")
            artifacts.save_outline(session_dir, updated)
            return {"version": updated.version, "text": render_outline(updated)}

    def edit_section(self, session_id: str, index: int, version: int,
                     body: str) -> dict:
        with self._lock(session_id):
            manifest = self._manifest(session_id)
            self._ensure_no_job(session_id, manifest)
            self._require_state(manifest, ("draft_ready",), "section editing")
            session_dir = self._dir(session_id)
            drafts, versions = artifacts.load_drafts(session_dir)
            if index not in drafts:
                raise UnknownSection(f"no section at outline index {index}")
            if version != versions.get(index, 1):
                raise StaleVersion(
                    f"section {index} is at version {versions.get(index, 1)}, "
                    f"edit was based on {version}")
            drafts[index] = replace(drafts[index], body=body, status="edited")
            versions[index] = versions.get(index, 1) + 1
            artifacts.save_drafts(session_dir, drafts, versions)
            return {"index": index, "version": versions[index],
                    "status": "edited"}

    def toggle_asset(self, session_id: str, ref_id: str, asset_index: int,
                     enabled: bool) -> dict:
        with self._lock(session_id):
            manifest = self._manifest(session_id)
            self._ensure_no_job(session_id, manifest)
            self._require_state(manifest, ("draft_ready", "exported"),
                                "asset toggling")
            store = artifacts.load_store(self._dir(session_id))
            assets = (store.assets.get(ref_id, []) if store else [])
            if asset_index < 0 or asset_index >= len(assets):
                raise UnknownReference(f"no asset {ref_id}:{asset_index}")
            key = f"{ref_id}:{asset_index}"
            disabled = set(manifest["disabled_assets"])
            if enabled:
                disabled.discard(key)
            else:
                disabled.add(key)
            manifest["disabled_assets"] = sorted(disabled)
            self._save_manifest(session_id, manifest)
            return {"disabled_assets": manifest["disabled_assets"]}

    # -- export ---------------------------------------------------------------

    def export_bundle(self, session_id: str, fmt: str):
        with self._lock(session_id):
            manifest = self._manifest(session_id)
            self._require_state(manifest, ("draft_ready", "exported"),
                                "export")
            settings = self._session_settings(manifest)
            disabled = list(manifest["disabled_assets"])
            title = manifest["topic_title"]
        _chat, embedder = build_providers(settings)
        return pipeline.build_export(self._dir(session_id), settings, embedder,
                                     title, fmt, disabled)

    # -- views ----------------------------------------------------------------

    def _cluster_view(self, model) -> dict:
        return {"criterion": model.criterion, "names": list(model.names),
                "assignments": dict(model.assignments),
                "coords2d": {r: list(xy) for r, xy in model.coords2d.items()},
                "version": model.version}

    def describe(self, session_id: str) -> dict:
        manifest = self._manifest(session_id)
        session_dir = self._dir(session_id)
        view = {
            "session_id": manifest["session_id"],
            "topic": {"title": manifest["topic_title"],
                      "criterion": manifest["criterion"]},
            "state": manifest["state"],
            "resume_state": manifest["resume_state"],
            "active_stage": manifest["active_stage"],
            "created_at": manifest["created_at"],
            "updated_at": manifest["updated_at"],
            "timing": manifest["timing"],
            "stage_info": manifest["stage_info"],
            "error": manifest["error"],
            "disabled_assets": manifest["disabled_assets"],
            "warnings": list(manifest["warnings"]) + [
                f"{stage}: {w}" for stage, info in manifest["stage_info"].items()
                for w in info.get("warnings", ())],
        }
        active = self.runner.active(session_id)
        view["active_job"] = active.snapshot() if active else None
        view["references"] = artifacts.load_references(session_dir)
        model = artifacts.load_clusters(session_dir)
        view["clusters"] = self._cluster_view(model) if model else None
        outline = artifacts.load_outline(session_dir)
        view["outline"] = ({"text": render_outline(outline),
                            "version": outline.version,
                            "predefined": list(outline.predefined)}
                           if outline else None)
        drafts, versions = artifacts.load_drafts(session_dir)
        view["sections"] = [
            {"index": idx, "title": d.title, "status": d.status,
             "version": versions.get(idx, 1), "summary": d.summary,
             "body": d.body, "warnings": list(d.warnings)}
            for idx, d in sorted(drafts.items())] or None
        view["assets"] = self._asset_view(session_dir, manifest) if drafts else []
        export_info = artifacts.read_json(
            os.path.join(session_dir, artifacts.EXPORT_DIR, "info.json"))
        settings = self._session_settings(manifest)
        view["export"] = {
            "available": manifest["state"] in ("draft_ready", "exported"),
            "formats": ["markdown", "latex"] + (["pdf"] if settings.latex_cmd
                                                else []),
            "built": (export_info or {}).get("formats", []),
        }
        return view

    def _asset_view(self, session_dir: str, manifest: dict) -> list[dict]:
        store = artifacts.load_store(session_dir)
        if store is None:
            return []
        disabled = set(manifest["disabled_assets"])
        return [{"ref_id": ref_id, "asset_index": i, "kind": a.kind,
                 "caption": a.caption,
                 "disabled": f"{ref_id}:{i}" in disabled}
                for ref_id in sorted(store.assets)
                for i, a in enumerate(store.assets[ref_id])]
