"""Serial-correlation and overidentification tests for GMM results."""

from __future__ import annotations

from typing import Literal

import numpy as np
from scipy import stats

from duplexnet.econ.results import EstimationResult
from duplexnet.errors import JustIdentified, TooFewPeriodsForOrder


def _internals(result: EstimationResult):
    if result.internals is None or not hasattr(result.internals, "system"):
        raise ValueError("test needs a GMM result")
    return result.internals


def ar_statistic(result: EstimationResult, order: int) -> float:
    """Arellano-Bond z statistic for order-``order`` autocorrelation of the
    differenced residuals, including the estimation-error correction terms."""
    it = _internals(result)
    s = it.system
    R = s.n_diff
    if order < 1 or R <= order:
        raise TooFewPeriodsForOrder(f"{R} difference periods cannot test order {order}")
    u = it.u[:, :R]
    Xd = s.X[:, :R, :]
    w = np.zeros_like(u)
    w[:, order:] = u[:, :-order]
    wu = (w * u).sum(axis=1)                       # per group
    d0 = wu.sum()
    d1 = (wu * wu).sum()
    wX = np.einsum("nr,nrk->k", w, Xd)
    g = np.einsum("nrl,nr->nl", s.Z, it.u)
    gw = (g * wu[:, None]).sum(axis=0)
    d2 = -2.0 * wX @ it.Minv @ it.Sxz.T @ it.W @ gw
    d3 = wX @ it.V @ wX
    var = d1 + d2 + d3
    if not var > 0:
        var = d1
    if not var > 0:
        return float("nan")
    return float(d0 / np.sqrt(var))


def ar_test(result: EstimationResult, order: int) -> float:
    """Two-sided normal p-value of :func:`ar_statistic`."""
    z = ar_statistic(result, order)
    if not np.isfinite(z):
        return float("nan")
    return float(2.0 * stats.norm.sf(abs(z)))


def sargan_statistic(
    result: EstimationResult, weights: Literal["twostep", "onestep"] = "twostep"
) -> tuple[float, int]:
    """Overidentification statistic and its degrees of freedom.

    ``twostep`` is Hansen's J: the minimised two-step criterion, i.e. the
    moments at the two-step estimate weighted by the inverse outer product
    of the one-step moments. One-step results are refitted in two steps for
    this purpose; the reported coefficients are unaffected.
    ``onestep`` uses the one-step weighting matrix scaled by the residual
    variance of the differenced equation (classical Sargan form, valid under
    homoskedastic errors).
    """
    it = _internals(result)
    s = it.system
    L, K = s.Z.shape[2], s.X.shape[2]
    df = L - K
    if df <= 0:
        raise JustIdentified(f"{L} instruments for {K} parameters")
    if weights == "twostep":
        if it.steps != 2:
            from duplexnet.econ.gmm import fit_system

            _, it, _ = fit_system(s, steps=2)
        g = np.einsum("nrl,nr->l", s.Z, it.u)
        stat = float(g @ it.W @ g)
    elif weights == "onestep":
        g = np.einsum("nrl,nr->l", s.Z, it.u)
        ud = it.u[:, : s.n_diff]
        n_d = max(int(s.valid[:, : s.n_diff].sum()), 1)
        sigma2 = float((ud * ud).sum()) / (2.0 * n_d)
        stat = float(g @ it.W1 @ g) / sigma2
    else:
        raise ValueError(f"unknown weights {weights!r}")
    return stat, df


def sargan_test(result: EstimationResult, weights: Literal["twostep", "onestep"] = "twostep") -> float:
    stat, df = sargan_statistic(result, weights)
    return float(stats.chi2.sf(stat, df))
