"""Adaptive clustering of reference descriptions.

Agglomerative average-linkage over cosine distance, cut at each candidate
cluster count; the count with the best silhouette wins (ties go to the
smaller count). Outputs a ClusterModel with assignments, names (filled by a
separate naming call), 2-D coordinates, and per-candidate diagnostics.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

from . import providers
from .errors import (InvalidCluster, NamingFormatError, TooFewReferences,
                     UnknownReference)
from .providers import ChatProvider, chat_request
from .textutil import numbered_lines

NAME_PROMPT = """References for a survey were grouped into {L} clusters by the criterion "{criterion}".
Each cluster is shown with its member descriptions.

{blocks}

Give each cluster a name usable as a survey section title: at most 8 words,
a noun phrase, all names different from each other. Return a numbered list
with exactly {L} lines, like "1. Name".{reminder}"""


def cosine_distance_matrix(vectors) -> list[list[float]]:
    """Symmetric cosine distances; tolerates non-normalized rows."""
    n = len(vectors)
    norms = [math.sqrt(math.fsum(x * x for x in v)) for v in vectors]
    mat = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            den = norms[i] * norms[j]
            sim = math.fsum(a * b for a, b in zip(vectors[i], vectors[j])) / den \
                if den else 0.0
            mat[i][j] = mat[j][i] = 1.0 - sim
    return mat


def agglomerate(distance, n_clusters: int) -> list[int]:
    """Average-linkage clustering cut at n_clusters.

    Linkage between clusters is the mean of all cross-pair distances from the
    ORIGINAL matrix, maintained incrementally: merging A and B just adds their
    cross-distance sums toward every other cluster. Exactly tied linkages
    merge the pair with the smallest (min member of A, min member of B)
    signature. Labels come out numbered by each cluster's smallest member.
    """
    n = len(distance)
    if not 1 <= n_clusters <= n:
        raise ValueError("n_clusters out of range")
    # clusters are keyed by their smallest member index
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    cross: dict[tuple[int, int], float] = {}
    for i in range(n):
        for j in range(i + 1, n):
            cross[(i, j)] = distance[i][j]
    active = list(range(n))
    while len(active) > n_clusters:
        best_link, best_sig = None, None
        for x in range(len(active)):
            for y in range(x + 1, len(active)):
                a, b = active[x], active[y]
                link = cross[(a, b)] / (len(members[a]) * len(members[b]))
                if best_link is None or link < best_link or \
                        (link == best_link and (a, b) < best_sig):
                    best_link, best_sig = link, (a, b)
        a, b = best_sig
        for c in active:
            if c in (a, b):
                continue
            cross[(min(a, c), max(a, c))] = \
                cross[(min(a, c), max(a, c))] + cross[(min(b, c), max(b, c))]
        members[a].extend(members[b])
        del members[b]
        active.remove(b)
    labels = [0] * n
    for idx, rep in enumerate(sorted(active)):
        for m in members[rep]:
            labels[m] = idx
    return labels


def silhouette_cosine(distance, labels) -> float:
    from sklearn.metrics import silhouette_score

    return float(silhouette_score(np.asarray(distance), np.asarray(labels),
                                  metric="precomputed"))


def choose_cluster_count(distance, candidate_counts) -> tuple[int, dict]:
    """Silhouette selection over the surviving candidates; smaller count wins ties."""
    n = len(distance)
    survivors = [c for c in candidate_counts if 2 <= c <= n - 1]
    scores: dict[int, float] = {}
    if not survivors:
        return 1, {"scores": scores, "chosen": 1}
    best_c, best_score = None, None
    for c in sorted(survivors):
        labels = agglomerate(distance, c)
        score = silhouette_cosine(distance, labels)
        scores[c] = score
        if best_score is None or score > best_score:
            best_c, best_score = c, score
    return best_c, {"scores": scores, "chosen": best_c}


# -- representation plumbing -------------------------------------------------

def reduce_dimensions(matrix: np.ndarray, backend: str, q: int) -> np.ndarray:
    """n x m -> n x q when n > q; otherwise the input comes back unchanged."""
    n, m = matrix.shape
    if backend == "identity" or n <= q or m <= q:
        return matrix
    if backend == "pca":
        from sklearn.decomposition import PCA

        k = min(q, n - 1, m)
        return PCA(n_components=k, random_state=0).fit_transform(matrix)
    if backend == "umap":
        try:
            import umap
        except ImportError as exc:
            raise RuntimeError(
                "reducer 'umap' needs the umap-learn package installed") from exc
        return umap.UMAP(n_components=q, random_state=0).fit_transform(matrix)
    raise ValueError(f"unknown reducer backend: {backend!r}")


def project_2d(matrix: np.ndarray, backend: str) -> np.ndarray:
    """Presentation-only 2-D coordinates; finite values, no other guarantees."""
    n, m = matrix.shape
    if n == 1:
        return np.zeros((1, 2))
    if backend == "tsne" and n >= 5:
        from sklearn.manifold import TSNE

        perplexity = max(2.0, min(30.0, (n - 1) / 3))
        coords = TSNE(n_components=2, random_state=0,
                      perplexity=perplexity, init="pca").fit_transform(matrix)
        return np.asarray(coords, dtype=float)
    from sklearn.decomposition import PCA

    k = min(2, n - 1, m)
    coords = PCA(n_components=k, random_state=0).fit_transform(matrix)
    if coords.shape[1] < 2:
        coords = np.hstack([coords, np.zeros((n, 2 - coords.shape[1]))])
    return coords


# -- cluster model ------------------------------------------------------------

@dataclass(frozen=True)
class ClusterModel:
    criterion: str
    assignments: dict[str, int]
    names: tuple[str, ...]
    coords2d: dict[str, tuple[float, float]]
    diagnostics: dict = field(default_factory=dict)
    version: int = 1

    @property
    def cluster_count(self) -> int:
        return max(self.assignments.values()) + 1 if self.assignments else 0

    def members(self, cluster: int) -> list[str]:
        return [r for r, c in self.assignments.items() if c == cluster]


def cluster_descriptions(descriptions, candidate_counts,
                         reducer: str = "identity", reduced_dim: int = 10,
                         coords_backend: str = "pca",
                         criterion: str = "") -> ClusterModel:
    if len(descriptions) < 2:
        raise TooFewReferences("clustering needs at least 2 descriptions")
    matrix = np.asarray([d.embedding for d in descriptions], dtype=np.float64)
    rep = reduce_dimensions(matrix, reducer, reduced_dim)
    distance = cosine_distance_matrix([list(row) for row in rep])
    chosen, diagnostics = choose_cluster_count(distance, candidate_counts)
    if chosen == 1:
        labels = [0] * len(descriptions)
    else:
        labels = agglomerate(distance, chosen)
    coords = project_2d(rep, coords_backend)
    assignments = {d.ref_id: int(lab) for d, lab in zip(descriptions, labels)}
    coords2d = {d.ref_id: (float(x), float(y))
                for d, (x, y) in zip(descriptions, coords)}
    return ClusterModel(criterion=criterion or descriptions[0].criterion,
                        assignments=assignments, names=(),
                        coords2d=coords2d, diagnostics=diagnostics)


_WORDS_RE = re.compile(r"\S+")


def _parse_names(reply: str, want: int):
    names = [n.strip().rstrip(".") for n in numbered_lines(reply)]
    names = [n for n in names if n]
    if len(names) != want:
        return None, f"expected {want} names, got {len(names)}"
    if any(len(_WORDS_RE.findall(n)) > 8 for n in names):
        return None, "a name exceeds 8 words"
    if len({n.lower() for n in names}) != want:
        return None, "names are not pairwise distinct"
    return names, ""


def name_clusters(chat: ChatProvider, model: ClusterModel, descriptions) -> ClusterModel:
    """One call names all clusters at once; a single re-prompt on bad format."""
    by_ref = {d.ref_id: d.text for d in descriptions}
    blocks = []
    for c in range(model.cluster_count):
        texts = [by_ref.get(r, "") for r in model.members(c)]
        joined = "\n".join(f"- {t}" for t in texts if t) or "- (no descriptions)"
        blocks.append(f"Cluster {c + 1}:\n{joined}")
    reminder = ""
    last_reason = ""
    for _attempt in range(2):
        prompt = NAME_PROMPT.format(L=model.cluster_count, criterion=model.criterion,
                                    blocks="\n\n".join(blocks), reminder=reminder)
        reply = chat.complete(chat_request(prompt, providers.PURPOSE_NAME))
        names, last_reason = _parse_names(reply, model.cluster_count)
        if names is not None:
            return replace(model, names=tuple(names))
        reminder = (f"\n\nYour previous reply was rejected ({last_reason}). "
                    f"Reply with exactly {model.cluster_count} numbered lines.")
    raise NamingFormatError(f"cluster naming failed twice: {last_reason}")


def reassign_reference(model: ClusterModel, ref_id: str, target: int) -> ClusterModel:
    if ref_id not in model.assignments:
        raise UnknownReference(ref_id)
    if not 0 <= target < model.cluster_count:
        raise InvalidCluster(f"target {target} outside [0, {model.cluster_count})")
    source = model.assignments[ref_id]
    assignments = dict(model.assignments)
    assignments[ref_id] = target
    names = list(model.names)
    if source != target and not any(c == source for c in assignments.values()):
        # source cluster emptied: drop it and compact the indices above
        assignments = {r: (c - 1 if c > source else c) for r, c in assignments.items()}
        if names:
            names.pop(source)
    return replace(model, assignments=assignments, names=tuple(names),
                   version=model.version + 1)
