"""Weighted fixed-effects regression with two-way clustered standard errors."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from duplexnet.econ.data import to_grid
from duplexnet.econ.results import EstimationResult, RegressionSpec
from duplexnet.errors import NonConvergence, NonPositiveWeight, RankDeficient


def demean(
    data: np.ndarray,
    groups: list[np.ndarray],
    weights: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> np.ndarray:
    """Weighted within transformation by alternating projections.

    Repeatedly subtracts weighted group means for each grouping until the
    largest change in a sweep is below ``tol``.
    """
    x = np.array(data, dtype=float, copy=True)
    if x.ndim == 1:
        x = x[:, None]
    if not groups:
        return x
    sums_w = [np.bincount(g, weights=weights) for g in groups]
    for it in range(max_iter):
        delta = 0.0
        for g, sw in zip(groups, sums_w):
            for c in range(x.shape[1]):
                means = np.bincount(g, weights=weights * x[:, c]) / sw
                x[:, c] -= means[g]
                delta = max(delta, float(np.abs(means).max()))
        if len(groups) == 1 or delta < tol:
            return x
    raise NonConvergence(max_iter, delta)


def _codes(labels: np.ndarray) -> np.ndarray:
    _, inv = np.unique(labels, return_inverse=True)
    return inv


def cluster_meat(scores: np.ndarray, clusters: np.ndarray) -> tuple[np.ndarray, int]:
    g = _codes(clusters)
    G = int(g.max()) + 1
    summed = np.zeros((G, scores.shape[1]))
    np.add.at(summed, g, scores)
    return summed.T @ summed, G


def fe_weighted(spec: RegressionSpec, panel) -> EstimationResult:
    """Weighted least squares after absorbing industry and/or time effects.

    ``se="twoway"`` clusters by industry and by period and subtracts the
    heteroskedasticity-robust term of their intersection; each piece carries
    the usual ``G / (G - 1)`` factor. ``se="robust"`` is that intersection
    term alone; ``se="classical"`` is the homoskedastic formula.
    """
    spec = replace(spec, estimator="fe_weighted")
    terms = [spec.dependent, *spec.regressors] + ([spec.weights] if spec.weights else [])
    grid = to_grid(panel, terms)
    N, T = grid.shape
    y = grid.term(spec.dependent).ravel()
    X = np.column_stack([grid.term(r).ravel() for r in spec.regressors])
    w = grid.term(spec.weights).ravel() if spec.weights else np.ones_like(y)
    ind = np.repeat(np.arange(N), T)
    per = np.tile(np.arange(T), N)
    ok = np.isfinite(y) & np.all(np.isfinite(X), axis=1) & np.isfinite(w)
    y, X, w, ind, per = y[ok], X[ok], w[ok], ind[ok], per[ok]
    if (w <= 0).any():
        raise NonPositiveWeight("regression weights must be > 0")
    n, k = X.shape

    groups = []
    if spec.fixed_effects in ("industry", "both"):
        groups.append(_codes(ind))
    if spec.fixed_effects in ("time", "both"):
        groups.append(_codes(per))
    dm = demean(np.column_stack([y, X]), groups, w)
    yt, Xt = dm[:, 0], dm[:, 1:]

    B = (Xt * w[:, None]).T @ Xt
    scale = np.sqrt(np.diag(B))
    if (scale == 0).any() or np.linalg.matrix_rank(B / np.outer(scale, scale)) < k:
        raise RankDeficient("regressors are collinear after absorbing fixed effects")
    beta = np.linalg.solve(B, (Xt * w[:, None]).T @ yt)
    e = yt - Xt @ beta
    Binv = np.linalg.inv(B)
    scores = Xt * (w * e)[:, None]

    if spec.se == "classical":
        dof = n - k - sum(len(np.unique(g)) for g in groups) + (1 if len(groups) == 2 else 0)
        sigma2 = float((w * e * e).sum()) / max(dof, 1)
        V = sigma2 * Binv
    else:
        het = scores.T @ scores * (n / (n - 1))
        if spec.se == "twoway":
            m_i, G_i = cluster_meat(scores, ind)
            m_t, G_t = cluster_meat(scores, per)
            meat = m_i * G_i / max(G_i - 1, 1) + m_t * G_t / max(G_t - 1, 1) - het
        else:
            meat = het
        V = Binv @ meat @ Binv
        vals, vecs = np.linalg.eigh((V + V.T) / 2.0)
        if (vals < 0).any():
            V = (vecs * np.clip(vals, 0.0, None)) @ vecs.T

    fitted = y - e
    r2 = float(np.corrcoef(fitted, y)[0, 1] ** 2) if n > 1 and fitted.std() > 0 else float("nan")
    return EstimationResult(
        spec=spec,
        names=list(spec.regressors),
        params=beta,
        cov=V,
        n_obs=n,
        n_groups=len(np.unique(ind)),
        r2_proxy=r2,
        internals={"residuals": e, "fitted": fitted},
    )
