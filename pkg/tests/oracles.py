"""Naive reference implementations used by the test suite.

Each follows the textbook definition with explicit loops and shares no code
with the package.
"""

import math
from collections import deque

import numpy as np


def links(w, threshold=0.0):
    n = len(w)
    return [(i, j) for i in range(n) for j in range(n) if i != j and w[i][j] > 0 and w[i][j] >= threshold]


def _weak_components(n, edges):
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in edges:
        parent[find(i)] = find(j)
    comps = {}
    for v in range(n):
        comps.setdefault(find(v), []).append(v)
    return list(comps.values())


def _bfs(src, adj):
    dist = {src: 0}
    q = deque([src])
    while q:
        v = q.popleft()
        for u in adj[v]:
            if u not in dist:
                dist[u] = dist[v] + 1
                q.append(u)
    return dist


def _pearson(xs, ys):
    n = len(xs)
    if n < 2:
        return math.nan
    mx, my = sum(xs) / n, sum(ys) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        return math.nan
    return sxy / math.sqrt(sxx * syy)


def network_stats(w, threshold=0.0, sizes=None, percent=False):
    w = np.asarray(w, dtype=float).tolist()
    n = len(w)
    E = links(w, threshold)
    eset = set(E)
    m = len(E)
    out = {}
    out["density"] = m / (n * (n - 1))
    out["avg_degree"] = m / n
    out["avg_weight"] = sum(w[i][j] for i, j in E) / m * (100 if percent else 1)
    out["reciprocity"] = sum(1 for i, j in E if (j, i) in eset) / m

    nbr = [set() for _ in range(n)]
    for i, j in E:
        nbr[i].add(j)
        nbr[j].add(i)
    closed = triples = 0
    for v in range(n):
        ns = sorted(nbr[v])
        for a in ns:
            for b in ns:
                if a != b:
                    triples += 1
                    if b in nbr[a]:
                        closed += 1
    out["transitivity"] = closed / triples if triples else math.nan

    comps = _weak_components(n, E)
    big = max(comps, key=lambda c: (len(c), -min(c)))
    inside = set(big)
    adj = {v: [j for (i, j) in E if i == v and j in inside] for v in big}
    dists = []
    for v in big:
        d = _bfs(v, adj)
        dists += [h for u, h in d.items() if u != v]
    out["diameter"] = max(dists) if dists else 0.0
    out["mean_distance"] = sum(dists) / len(dists) if dists else math.nan

    outdeg = [sum(1 for (i, _) in E if i == v) for v in range(n)]
    indeg = [sum(1 for (_, j) in E if j == v) for v in range(n)]
    out["assortativity_by_degree"] = _pearson([outdeg[i] for i, j in E], [indeg[j] for i, j in E])
    if sizes is None:
        out["assortativity_by_size"] = math.nan
    else:
        out["assortativity_by_size"] = _pearson([sizes[i] for i, j in E], [sizes[j] for i, j in E])
    return out


def cosine(w):
    w = np.asarray(w, dtype=float)
    n = w.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            ni = math.sqrt(sum(x * x for x in w[i]))
            nj = math.sqrt(sum(x * x for x in w[j]))
            if ni == 0 or nj == 0:
                continue
            out[i, j] = sum(a * b for a, b in zip(w[i], w[j])) / (ni * nj)
    return out


def spillover(w, sizes, theta=None):
    """Binary (theta given) or weighted spillover by double loop."""
    n = len(w)
    out = []
    for i in range(n):
        total = 0.0
        for j in range(n):
            if i == j:
                continue
            if theta is None:
                total += w[i][j] * sizes[j]
            elif w[i][j] >= theta:
                total += sizes[j]
        out.append(total)
    return np.array(out)


def dummy_ols(y, X, ind, per, w):
    """WLS of y on X plus full industry and period dummy sets."""
    inds, pers = sorted(set(ind)), sorted(set(per))
    D = [[1.0 if ind[r] == g else 0.0 for g in inds] + [1.0 if per[r] == p else 0.0 for p in pers[1:]] for r in range(len(y))]
    Z = np.column_stack([X, np.array(D)])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(Z * sw[:, None], y * sw, rcond=None)
    return coef[: X.shape[1]]


def level_instrument_pairs(T, max_lag=None):
    """Enumerate (equation period t, instrument period s) for the differenced
    equation: s <= t - 2, and t - s <= 1 + max_lag when limited."""
    pairs = []
    for t in range(2, T):
        for s in range(0, t - 1):
            if max_lag is None or t - s <= 1 + max_lag:
                pairs.append((t, s))
    return pairs
