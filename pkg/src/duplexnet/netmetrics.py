"""Centrality, similarity, aggregate network statistics and ranking tables.

Functions take either a :class:`ShareMatrix` or a plain array. Arrays are read
as "oriented" matrices: row ``i`` lists the weights of the links from focal
industry ``i`` to its partners (see :attr:`ShareMatrix.oriented`). For a
``ShareMatrix`` the orientation is derived from its direction tag.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Literal, Mapping, Sequence, TextIO

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from duplexnet.errors import DegenerateGraph, KTooLarge, NonConvergence
from duplexnet.netcore import IndustryIndex, ShareMatrix


def _oriented(w: ShareMatrix | np.ndarray) -> np.ndarray:
    if isinstance(w, ShareMatrix):
        return w.oriented
    m = np.asarray(w, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def _meta(w) -> dict:
    if isinstance(w, ShareMatrix):
        return {"period": w.period, "layer": w.layer, "direction": w.direction}
    return {"period": None, "layer": None, "direction": None}


@dataclass(frozen=True)
class CentralityVector:
    kind: Literal["pagerank", "degree", "strength"]
    values: np.ndarray
    period: object = None
    layer: str | None = None
    direction: str | None = None
    iterations: int | None = None


def pagerank(
    shares: ShareMatrix | np.ndarray,
    damping: float = 0.85,
    tol: float = 1e-12,
    max_iter: int = 10_000,
) -> CentralityVector:
    """Weighted directed PageRank by power iteration.

    Each industry passes its score to its partners in proportion to the link
    weights of its (oriented) row. Rows without links are dangling and spread
    their score uniformly. Self-links are kept. Iteration stops once the L1
    change falls below ``tol``.
    """
    if not 0 < damping < 1:
        raise ValueError("damping must lie in (0, 1)")
    g = _oriented(shares)
    n = g.shape[0]
    out = g.sum(axis=1)
    dangling = out == 0
    p = np.zeros_like(g)
    np.divide(g, out[:, None], out=p, where=~dangling[:, None])
    pt = p.T.copy()
    x = np.full(n, 1.0 / n)
    teleport = (1.0 - damping) / n
    for it in range(1, max_iter + 1):
        x_new = teleport + damping * (pt @ x + x[dangling].sum() / n)
        x_new /= x_new.sum()
        change = np.abs(x_new - x).sum()
        x = x_new
        if change < tol:
            return CentralityVector("pagerank", x, iterations=it, **_meta(shares))
    raise NonConvergence(max_iter, change)


def degree_strength(
    w: ShareMatrix | np.ndarray,
    mode: Literal["in", "out", "all"] = "in",
    threshold: float | None = None,
) -> tuple[CentralityVector, CentralityVector]:
    """Degree (link count) and strength (sum of link weights) per industry.

    Links are positive off-diagonal entries, or entries ``>= threshold`` when a
    threshold is given. ``in`` counts links pointing at a node (column of the
    oriented matrix), ``out`` links leaving it (row).
    """
    g = _oriented(w).copy()
    np.fill_diagonal(g, 0.0)
    links = g >= threshold if threshold is not None else g > 0
    links &= g > 0
    weights = np.where(links, g, 0.0)
    if mode == "in":
        deg, st = links.sum(axis=0), weights.sum(axis=0)
    elif mode == "out":
        deg, st = links.sum(axis=1), weights.sum(axis=1)
    elif mode == "all":
        deg = links.sum(axis=0) + links.sum(axis=1)
        st = weights.sum(axis=0) + weights.sum(axis=1)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    meta = _meta(w)
    return (
        CentralityVector("degree", deg.astype(int), **meta),
        CentralityVector("strength", st, **meta),
    )


def cosine_similarity(w: ShareMatrix | np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity of the oriented rows.

    Zero rows have similarity 0 with everything, themselves included; the
    diagonal is exactly 1 for nonzero rows.
    """
    v = _oriented(w)
    norms = np.sqrt((v * v).sum(axis=1))
    nz = norms > 0
    u = np.zeros_like(v)
    u[nz] = v[nz] / norms[nz, None]
    sim = u @ u.T
    sim = np.clip((sim + sim.T) / 2.0, 0.0, 1.0)
    np.fill_diagonal(sim, np.where(nz, 1.0, 0.0))
    return sim


@dataclass(frozen=True)
class NetworkStats:
    density: float
    avg_degree: float
    avg_weight: float
    reciprocity: float
    transitivity: float
    diameter: float
    mean_distance: float
    assortativity_by_degree: float
    assortativity_by_size: float

    FIELDS = (
        "density",
        "avg_degree",
        "avg_weight",
        "reciprocity",
        "transitivity",
        "diameter",
        "mean_distance",
        "assortativity_by_degree",
        "assortativity_by_size",
    )

    def as_dict(self) -> dict[str, float]:
        return {f: getattr(self, f) for f in self.FIELDS}


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    if a.size < 2:
        return float("nan")
    da, db = a - a.mean(), b - b.mean()
    den = np.sqrt((da * da).sum() * (db * db).sum())
    if den == 0:
        return float("nan")
    return float(np.clip((da * db).sum() / den, -1.0, 1.0))


def network_stats(
    w: ShareMatrix | np.ndarray,
    threshold: float = 0.0,
    sizes: np.ndarray | None = None,
    percent: bool = False,
) -> NetworkStats:
    """Aggregate statistics of the binarised directed graph.

    A link ``i -> j`` exists when the off-diagonal weight is positive and at
    least ``threshold``. Transitivity uses the undirected projection; diameter
    and mean distance are hop counts between ordered reachable pairs in the
    largest weakly connected component. Degree assortativity correlates the
    source's out-degree with the target's in-degree over links; size
    assortativity correlates ``sizes`` of the endpoints. Undefined
    correlations (no variation) are NaN.
    """
    g = _oriented(w).astype(float).copy()
    n = g.shape[0]
    if n < 2:
        raise ValueError("need at least two nodes")
    np.fill_diagonal(g, 0.0)
    b = (g > 0) & (g >= threshold)
    e = int(b.sum())
    if e == 0:
        raise DegenerateGraph("graph has no links")

    density = e / (n * (n - 1))
    avg_degree = e / n
    avg_weight = float(g[b].mean()) * (100.0 if percent else 1.0)
    reciprocity = float((b & b.T).sum()) / e

    u = (b | b.T).astype(float)
    k = u.sum(axis=1)
    triples = float((k * (k - 1)).sum())
    closed = float(np.trace(u @ u @ u))
    transitivity = closed / triples if triples > 0 else float("nan")

    _, labels = connected_components(csr_matrix(b), directed=True, connection="weak")
    counts = np.bincount(labels)
    comp = np.flatnonzero(labels == counts.argmax())
    dist = shortest_path(csr_matrix(b[np.ix_(comp, comp)].astype(float)), unweighted=True)
    off = ~np.eye(len(comp), dtype=bool) & np.isfinite(dist)
    diameter = float(dist[off].max()) if off.any() else 0.0
    mean_distance = float(dist[off].mean()) if off.any() else float("nan")

    src, tgt = np.nonzero(b)
    out_deg, in_deg = b.sum(axis=1), b.sum(axis=0)
    assort_deg = _pearson(out_deg[src].astype(float), in_deg[tgt].astype(float))
    if sizes is None:
        assort_size = float("nan")
    else:
        a = np.asarray(sizes, dtype=float)
        assort_size = _pearson(a[src], a[tgt])

    return NetworkStats(
        density,
        avg_degree,
        avg_weight,
        reciprocity,
        transitivity,
        diameter,
        mean_distance,
        assort_deg,
        assort_size,
    )


# -- rankings -------------------------------------------------------------


@dataclass(frozen=True)
class RankingRow:
    rank: int
    code: str
    label: str
    value: float


@dataclass(frozen=True)
class Ranking:
    rows: list[RankingRow]
    quartiles: tuple[float, float, float]
    period: object = None

    def write_csv(self, stream: TextIO) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["rank", "code", "label", "value"])
        for r in self.rows:
            w.writerow([r.rank, r.code, r.label, format(r.value, ".10g")])
        w.writerow(["Q1/Md/Q3", "", "", "/".join(format(q, ".10g") for q in self.quartiles)])


def top_k_ranking(
    values: np.ndarray,
    index: IndustryIndex | Sequence[str],
    k: int = 10,
    labels: Mapping[str, str] | None = None,
    period=None,
) -> Ranking:
    """Top ``k`` industries by value (ties by ascending code) plus the quartiles
    of the full distribution (linear interpolation between order statistics)."""
    codes = index.codes if isinstance(index, IndustryIndex) else tuple(index)
    v = np.asarray(values, dtype=float)
    if k > len(codes):
        raise KTooLarge(f"k={k} exceeds {len(codes)} industries")
    order = sorted(range(len(codes)), key=lambda i: (-v[i], codes[i]))[:k]
    labels = labels or {}
    rows = [RankingRow(r + 1, codes[i], labels.get(codes[i], ""), float(v[i])) for r, i in enumerate(order)]
    q = np.quantile(v, [0.25, 0.5, 0.75])
    return Ranking(rows, (float(q[0]), float(q[1]), float(q[2])), period)


def export_filtered_edges(
    matrices: Sequence[np.ndarray | ShareMatrix],
    index: IndustryIndex,
    pool: Sequence[np.ndarray | ShareMatrix] | None = None,
) -> list[tuple[str, str, float]]:
    """Important links for plotting.

    Averages ``matrices`` (the periods of one display window) and keeps pairs
    whose mean weight exceeds the mean plus one standard deviation of all
    off-diagonal weights in ``pool`` (defaults to ``matrices``; pass every
    period of every window to share one threshold across plots). Entries are
    returned as ``(source, target, weight)`` with ``source`` the supplier
    column and ``target`` the receiving row; self-links are never exported.
    """
    def raw(m):
        return m.matrix if isinstance(m, ShareMatrix) else np.asarray(m, dtype=float)

    mats = [raw(m) for m in matrices]
    if not mats:
        raise ValueError("need at least one period")
    pool_mats = [raw(m) for m in (pool if pool is not None else matrices)]
    n = mats[0].shape[0]
    off = ~np.eye(n, dtype=bool)
    pooled = np.concatenate([m[off] for m in pool_mats])
    cut = pooled.mean() + pooled.std(ddof=1)
    mean = np.mean(mats, axis=0)
    keep = (mean > cut) & off
    rows, cols = np.nonzero(keep)
    return [(index.codes[j], index.codes[i], float(mean[i, j])) for i, j in zip(rows, cols)]
