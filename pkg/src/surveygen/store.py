"""Per-session vector store: one collection of embedded chunks per reference.

Search is exact cosine over unit vectors (a dot product), sorted descending
with ties broken by (ref_id, chunk_index). The store persists as a JSON
manifest plus flat binary embedding matrices in the session directory.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import EmptyScope


@dataclass(frozen=True)
class ChunkRecord:
    ref_id: str
    chunk_index: int
    text: str
    char_span: tuple[int, int]
    embedding: tuple[float, ...]


@dataclass(frozen=True)
class AssetRecord:
    ref_id: str
    kind: str  # "figure" | "table"
    caption: str
    payload: str  # markdown table text, or an image filename in the session dir
    caption_embedding: tuple[float, ...] = ()


def dot(a: Sequence[float], b: Sequence[float]) -> float:
    return math.fsum(x * y for x, y in zip(a, b))


class VectorStore:
    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dimension must be positive")
        self.dim = dim
        self.collections: dict[str, list[ChunkRecord]] = {}
        self.assets: dict[str, list[AssetRecord]] = {}

    def _check_dim(self, vec):
        if len(vec) != self.dim:
            raise ValueError(f"embedding dimension {len(vec)} != store dimension {self.dim}")

    def replace_collection(self, ref_id: str, records: list[ChunkRecord]):
        for r in records:
            self._check_dim(r.embedding)
        self.collections[ref_id] = list(records)

    def replace_assets(self, ref_id: str, assets: list[AssetRecord]):
        for a in assets:
            self._check_dim(a.caption_embedding)
        self.assets[ref_id] = list(assets)

    def drop(self, ref_id: str):
        self.collections.pop(ref_id, None)
        self.assets.pop(ref_id, None)

    def ref_ids(self) -> list[str]:
        return list(self.collections)

    def collection(self, ref_id: str) -> list[ChunkRecord]:
        return self.collections.get(ref_id, [])

    def chunk_count(self) -> int:
        return sum(len(c) for c in self.collections.values())

    def all_assets(self) -> list[AssetRecord]:
        return [a for assets in self.assets.values() for a in assets]

    def search(self, query_vec: Sequence[float], top_k: int,
               scope: Sequence[str] | None = None) -> list[tuple[ChunkRecord, float]]:
        """Exact cosine search; scope is a set of ref_ids or None for all."""
        if top_k < 1:
            raise ValueError("top_k must be >= 1")
        self._check_dim(query_vec)
        ids = list(self.collections) if scope is None else [
            r for r in scope if r in self.collections]
        pool = [rec for rid in ids for rec in self.collections[rid]]
        if not pool:
            raise EmptyScope(f"no indexed chunks in scope {scope!r}")
        scored = [(rec, dot(query_vec, rec.embedding)) for rec in pool]
        scored.sort(key=lambda pair: (-pair[1], pair[0].ref_id, pair[0].chunk_index))
        return scored[:top_k]

    # -- persistence ------------------------------------------------------

    def save(self, directory: str):
        os.makedirs(directory, exist_ok=True)
        manifest = {"dim": self.dim, "refs": []}
        chunk_rows, asset_rows = [], []
        for ref_id, records in self.collections.items():
            entry = {"ref_id": ref_id, "chunks": [], "assets": []}
            for rec in records:
                entry["chunks"].append({
                    "i": rec.chunk_index, "span": list(rec.char_span), "text": rec.text})
                chunk_rows.append(rec.embedding)
            for a in self.assets.get(ref_id, []):
                entry["assets"].append({
                    "kind": a.kind, "caption": a.caption, "payload": a.payload})
                asset_rows.append(a.caption_embedding)
            manifest["refs"].append(entry)
        tmp = os.path.join(directory, "manifest.json.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, ensure_ascii=False)
        np.save(os.path.join(directory, "chunks.npy"),
                np.array(chunk_rows, dtype=np.float64).reshape(len(chunk_rows), self.dim))
        np.save(os.path.join(directory, "assets.npy"),
                np.array(asset_rows, dtype=np.float64).reshape(len(asset_rows), self.dim))
        os.replace(tmp, os.path.join(directory, "manifest.json"))

    @classmethod
    def load(cls, directory: str) -> "VectorStore":
        with open(os.path.join(directory, "manifest.json"), encoding="utf-8") as fh:
            manifest = json.load(fh)
        chunk_mat = np.load(os.path.join(directory, "chunks.npy"))
        asset_mat = np.load(os.path.join(directory, "assets.npy"))
        store = cls(manifest["dim"])
        ci = ai = 0
        for entry in manifest["refs"]:
            ref_id = entry["ref_id"]
            records = []
            for ch in entry["chunks"]:
                records.append(ChunkRecord(
                    ref_id=ref_id, chunk_index=ch["i"], text=ch["text"],
                    char_span=tuple(ch["span"]),
                    embedding=tuple(float(x) for x in chunk_mat[ci])))
                ci += 1
            store.collections[ref_id] = records
            assets = []
            for a in entry["assets"]:
                assets.append(AssetRecord(
                    ref_id=ref_id, kind=a["kind"], caption=a["caption"],
                    payload=a["payload"],
                    caption_embedding=tuple(float(x) for x in asset_mat[ai])))
                ai += 1
            if assets:
                store.assets[ref_id] = assets
        return store


def retrieve(store: VectorStore, embedder, query: str, top_k: int,
             scope: Sequence[str] | None = None) -> list[tuple[ChunkRecord, float]]:
    query_vec = embedder.embed([query])[0]
    return store.search(query_vec, top_k=top_k, scope=scope)
