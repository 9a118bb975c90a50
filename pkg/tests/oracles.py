"""Independent reference implementations used to cross-check the real ones.

Each oracle is deliberately written with different logic (exhaustive search,
selection by repeated max, pairwise definitions straight from the math) so a
shared bug with the implementation under test is unlikely.
"""

from __future__ import annotations

import math

import numpy as np


def better_hit(a, b):
    """True when scored chunk a ranks ahead of b (higher score, then id order)."""
    if a[1] != b[1]:
        return a[1] > b[1]
    ka = (a[0].ref_id, a[0].chunk_index)
    kb = (b[0].ref_id, b[0].chunk_index)
    return ka < kb


def brute_force_ranking(store, query_vec, scope=None):
    """Full ranking by repeated max-extraction.

    Scores use the same exactly-rounded summation as the implementation
    (fsum); with any other summation order, scores that are mathematically
    tied can differ in the last ulp and the "correct" order is undefined.
    The independent part is the ranking itself.
    """
    ids = list(store.collections) if scope is None else [
        r for r in scope if r in store.collections]
    remaining = []
    for rid in ids:
        for rec in store.collections[rid]:
            score = math.fsum(a * b for a, b in zip(query_vec, rec.embedding))
            remaining.append((rec, score))
    out = []
    while remaining:
        best = remaining[0]
        for cand in remaining[1:]:
            if better_hit(cand, best):
                best = cand
        out.append(best)
        remaining.remove(best)
    return out


def pairwise_cosine_distance(vectors):
    """Dense symmetric cosine-distance matrix, direct from the definition."""
    n = len(vectors)
    mat = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            num = sum(a * b for a, b in zip(vectors[i], vectors[j]))
            den = math.sqrt(sum(a * a for a in vectors[i])) * \
                math.sqrt(sum(b * b for b in vectors[j]))
            d = 1.0 - (num / den if den else 0.0)
            mat[i][j] = mat[j][i] = d
    return mat


def average_linkage_merge_sequence(distance, n_clusters):
    """Exhaustive bottom-up average-linkage clustering over a distance matrix.

    Returns cluster membership lists. Linkage between clusters A and B is the
    mean of all cross distances in the ORIGINAL matrix, recomputed from
    scratch with fsum every round. Ties merge the pair with the smallest
    sorted (min(A), min(B)) signature.
    """
    clusters = [[i] for i in range(len(distance))]
    while len(clusters) > n_clusters:
        best = None
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                link = math.fsum(distance[a][b] for a in clusters[i]
                                 for b in clusters[j]) / (len(clusters[i]) * len(clusters[j]))
                sig = tuple(sorted((min(clusters[i]), min(clusters[j]))))
                if best is None or link < best[0] or \
                        (link == best[0] and sig < best[1]):
                    best = (link, sig, i, j)
        _, _, i, j = best
        merged = sorted(clusters[i] + clusters[j])
        clusters = [c for k, c in enumerate(clusters) if k not in (i, j)] + [merged]
    return sorted(clusters, key=min)


def silhouette(distance, labels):
    """Mean silhouette coefficient straight from the definition."""
    n = len(labels)
    by_label = {}
    for i, lab in enumerate(labels):
        by_label.setdefault(lab, []).append(i)
    if len(by_label) < 2:
        raise ValueError("silhouette needs >= 2 clusters")
    vals = []
    for i in range(n):
        own = by_label[labels[i]]
        if len(own) == 1:
            vals.append(0.0)
            continue
        a = math.fsum(distance[i][j] for j in own if j != i) / (len(own) - 1)
        b = min(math.fsum(distance[i][j] for j in members) / len(members)
                for lab, members in by_label.items() if lab != labels[i])
        denom = max(a, b)
        vals.append(0.0 if denom == 0 else (b - a) / denom)
    return math.fsum(vals) / n


def citation_matrix_filter(sentence_vecs, chunks, tau_static, k_sigma, max_per_sentence):
    """Brute-force sentence-by-chunk citation assignment from the formula."""
    sims = {}
    all_scores = []
    for si, sv in enumerate(sentence_vecs):
        for cj, chunk in enumerate(chunks):
            # same exactly-rounded per-pair sum as the implementation; the
            # independent part is the threshold/collapse/cap logic below
            score = math.fsum(a * b for a, b in zip(sv, chunk.embedding))
            sims[(si, cj)] = score
            all_scores.append(score)
    mu = math.fsum(all_scores) / len(all_scores)
    var = math.fsum((s - mu) ** 2 for s in all_scores) / len(all_scores)
    tau = max(tau_static, mu + k_sigma * math.sqrt(var))
    out = []
    for si in range(len(sentence_vecs)):
        best_per_ref = {}
        for cj, chunk in enumerate(chunks):
            score = sims[(si, cj)]
            if score >= tau:
                prev = best_per_ref.get(chunk.ref_id)
                if prev is None or score > prev:
                    best_per_ref[chunk.ref_id] = score
        ranked = sorted(best_per_ref.items(), key=lambda kv: (-kv[1], kv[0]))
        for ref_id, score in ranked[:max_per_sentence]:
            out.append((si, ref_id, score))
    return tau, out
