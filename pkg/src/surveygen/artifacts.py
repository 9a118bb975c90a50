"""Per-session artifact files: layout, (de)serialization, and invalidation.

Each session is one directory of stage-named files. Files are written with a
tmp-then-rename so readers never observe a half-written artifact. Artifacts
are grouped into ranks that mirror the pipeline order; invalidating a stage
deletes every rank downstream of it.
"""

from __future__ import annotations

import json
import os
import shutil

from .clustering import ClusterModel
from .compose import SectionDraft
from .hyde import ReferenceDescription
from .ingest import ReferencePaper
from .outline import Outline
from .store import VectorStore

MANIFEST = "manifest.json"
REFERENCES = "references.json"
STORE_DIR = "store"
ASSETS_DIR = "assets"
DESCRIPTIONS = "descriptions.json"
CLUSTERS = "clusters.json"
OUTLINE = "outline.json"
DRAFTS = "drafts.json"
EXPORT_DIR = "export"

# 1-based ranks by pipeline depth; rank k is produced strictly before rank k+1
RANKED_ARTIFACTS: tuple[tuple[str, ...], ...] = (
    (REFERENCES, STORE_DIR, ASSETS_DIR),
    (DESCRIPTIONS, CLUSTERS),
    (OUTLINE,),
    (DRAFTS,),
    (EXPORT_DIR,),
)


def write_json(path: str, payload) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=1)
    os.replace(tmp, path)


def read_json(path: str):
    if not os.path.exists(path):
        return None
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_bytes(path: str, payload: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def delete_ranks(session_dir: str, min_rank: int) -> None:
    """Remove every artifact whose rank is >= min_rank (1-based)."""
    for rank, names in enumerate(RANKED_ARTIFACTS, start=1):
        if rank < min_rank:
            continue
        for name in names:
            path = os.path.join(session_dir, name)
            if os.path.isdir(path):
                shutil.rmtree(path, ignore_errors=True)
            elif os.path.exists(path):
                os.remove(path)


def artifact_mtimes(session_dir: str) -> list[tuple[int, str, float]]:
    """(rank, name, mtime) for every artifact present, in rank order."""
    out = []
    for rank, names in enumerate(RANKED_ARTIFACTS, start=1):
        for name in names:
            path = os.path.join(session_dir, name)
            if os.path.exists(path):
                out.append((rank, name, os.stat(path).st_mtime))
    return out


# -- references ---------------------------------------------------------------

def ref_to_dict(paper: ReferencePaper, fulltext: bool, pdf_url: str = "") -> dict:
    return {
        "ref_id": paper.ref_id,
        "source": paper.source,
        "title": paper.title,
        "authors": paper.authors,
        "abstract": paper.abstract,
        "arxiv_id": paper.arxiv_id,
        "year": paper.year,
        "pdf_url": pdf_url,
        "fulltext": fulltext,
        "asset_count": len(paper.assets),
        "flagged_fields": list(paper.flagged_fields),
    }


def ref_from_dict(d: dict) -> ReferencePaper:
    return ReferencePaper(
        ref_id=d["ref_id"], source=d["source"], title=d.get("title", ""),
        authors=d.get("authors", ""), abstract=d.get("abstract", ""),
        arxiv_id=d.get("arxiv_id", ""), year=d.get("year", 0),
        flagged_fields=tuple(d.get("flagged_fields", ())))


def save_references(session_dir: str, refs: list[dict]) -> None:
    write_json(os.path.join(session_dir, REFERENCES), refs)


def load_references(session_dir: str) -> list[dict]:
    return read_json(os.path.join(session_dir, REFERENCES)) or []


def next_ref_id(refs: list[dict]) -> str:
    taken = [int(r["ref_id"][1:]) for r in refs
             if r["ref_id"][:1] == "r" and r["ref_id"][1:].isdigit()]
    return f"r{max(taken, default=0) + 1}"


# -- vector store ------------------------------------------------------------

def load_store(session_dir: str) -> VectorStore | None:
    path = os.path.join(session_dir, STORE_DIR)
    if not os.path.exists(os.path.join(path, "manifest.json")):
        return None
    return VectorStore.load(path)


def save_store(session_dir: str, store: VectorStore) -> None:
    store.save(os.path.join(session_dir, STORE_DIR))


# -- categorization ----------------------------------------------------------

def save_descriptions(session_dir: str, criterion: str, queries: list[str],
                      descriptions: list[ReferenceDescription]) -> None:
    payload = {
        "criterion": criterion,
        "queries": list(queries),
        "descriptions": [
            {"ref_id": d.ref_id, "text": d.text, "embedding": list(d.embedding)}
            for d in descriptions],
    }
    write_json(os.path.join(session_dir, DESCRIPTIONS), payload)


def load_descriptions(session_dir: str) -> list[ReferenceDescription]:
    payload = read_json(os.path.join(session_dir, DESCRIPTIONS))
    if payload is None:
        return []
    return [ReferenceDescription(ref_id=d["ref_id"], criterion=payload["criterion"],
                                 text=d["text"], embedding=tuple(d["embedding"]))
            for d in payload["descriptions"]]


def save_clusters(session_dir: str, model: ClusterModel) -> None:
    payload = {
        "criterion": model.criterion,
        "assignments": dict(model.assignments),
        "names": list(model.names),
        "coords2d": {r: list(xy) for r, xy in model.coords2d.items()},
        "diagnostics": _plain(model.diagnostics),
        "version": model.version,
    }
    write_json(os.path.join(session_dir, CLUSTERS), payload)


def load_clusters(session_dir: str) -> ClusterModel | None:
    payload = read_json(os.path.join(session_dir, CLUSTERS))
    if payload is None:
        return None
    return ClusterModel(
        criterion=payload["criterion"],
        assignments={r: int(c) for r, c in payload["assignments"].items()},
        names=tuple(payload["names"]),
        coords2d={r: (float(x), float(y))
                  for r, (x, y) in payload["coords2d"].items()},
        diagnostics=payload.get("diagnostics", {}),
        version=int(payload["version"]))


def _plain(value):
    """JSON-safe copy (numpy scalars and int keys show up in diagnostics)."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "item"):
        return value.item()
    return value


# -- outline -------------------------------------------------------------------

def save_outline(session_dir: str, outline: Outline) -> None:
    payload = {
        "entries": [[lvl, title] for lvl, title in outline.entries],
        "predefined": list(outline.predefined),
        "version": outline.version,
    }
    write_json(os.path.join(session_dir, OUTLINE), payload)


def load_outline(session_dir: str) -> Outline | None:
    payload = read_json(os.path.join(session_dir, OUTLINE))
    if payload is None:
        return None
    return Outline(entries=tuple((int(l), t) for l, t in payload["entries"]),
                   predefined=tuple(payload["predefined"]),
                   version=int(payload["version"]))


# -- drafts --------------------------------------------------------------------

def save_drafts(session_dir: str, drafts: dict[int, SectionDraft],
                versions: dict[int, int]) -> None:
    payload = {"sections": [
        {"position": d.position, "title": d.title, "body": d.body,
         "summary": d.summary, "status": d.status, "warnings": list(d.warnings),
         "version": versions.get(idx, 1)}
        for idx, d in sorted(drafts.items())]}
    write_json(os.path.join(session_dir, DRAFTS), payload)


def load_drafts(session_dir: str) -> tuple[dict[int, SectionDraft], dict[int, int]]:
    payload = read_json(os.path.join(session_dir, DRAFTS))
    if payload is None:
        return {}, {}
    drafts: dict[int, SectionDraft] = {}
    versions: dict[int, int] = {}
    for s in payload["sections"]:
        idx = int(s["position"])
        drafts[idx] = SectionDraft(
            position=idx, title=s["title"], body=s["body"],
            summary=s.get("summary", ""), status=s.get("status", "generated"),
            warnings=tuple(s.get("warnings", ())))
        versions[idx] = int(s.get("version", 1))
    return drafts, versions
