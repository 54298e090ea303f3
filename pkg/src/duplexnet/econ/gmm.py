"""Arellano-Bond difference GMM and Blundell-Bond system GMM.

Model: ``y[i,t] = rho * y[i,t-1] + beta' x[i,t] + delta_t + mu_i + e[i,t]``
with ``x`` strictly exogenous. The difference equation is instrumented by
lagged levels of ``y`` (GMM style) and by ``Δx`` and the time effects
themselves (IV style). System GMM adds the levels equation, instrumented by
``Δy[t-1]``, ``x``, a constant and level time dummies.

Estimation is fully vectorised over groups; every array carries the group
on axis 0 and the equation row on axis 1. Rows with any missing value in the
equation are zeroed (listwise deletion per equation row).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from duplexnet.econ.data import GridArrays, to_grid
from duplexnet.econ.instruments import (
    difference_instruments,
    difference_weight_matrix,
    equation_periods,
    level_instruments,
)
from duplexnet.econ.results import EstimationResult, RegressionSpec
from duplexnet.errors import InsufficientPeriods, RankDeficient, SingularWeightingMatrix


@dataclass
class GmmSystem:
    """Stacked per-group arrays. ``n_diff`` leading rows hold the difference
    equation; any further rows hold the levels equation."""

    X: np.ndarray
    y: np.ndarray
    Z: np.ndarray
    H: np.ndarray
    valid: np.ndarray
    names: list[str]
    n_diff: int
    n_dep_instruments: int
    # levels fit for the R^2 proxy
    level_X: np.ndarray
    level_y: np.ndarray
    level_names: list[str]


@dataclass
class GmmInternals:
    system: GmmSystem
    W: np.ndarray
    W1: np.ndarray
    Sxz: np.ndarray
    Minv: np.ndarray
    u: np.ndarray
    u1: np.ndarray
    V: np.ndarray
    V1: np.ndarray
    steps: int


def _sym_inverse(a: np.ndarray) -> tuple[np.ndarray, int]:
    a = (a + a.T) / 2.0
    rank = int(np.linalg.matrix_rank(a))
    if rank == 0:
        raise SingularWeightingMatrix("weighting matrix is zero; no usable instruments")
    if rank < a.shape[0]:
        inv = np.linalg.pinv(a, hermitian=True)
    else:
        inv = np.linalg.inv(a)
    return (inv + inv.T) / 2.0, rank


def _exog_terms(spec: RegressionSpec) -> list[str]:
    if spec.lagged_dependent not in spec.regressors:
        raise ValueError(f"GMM estimators need {spec.lagged_dependent!r} among the regressors")
    return [r for r in spec.regressors if r != spec.lagged_dependent]


def build_system(grid: GridArrays, spec: RegressionSpec, system: bool) -> GmmSystem:
    N, T = grid.shape
    if T < 3:
        raise InsufficientPeriods(f"need at least 3 periods, got {T}")
    opts = spec.gmm
    exog = _exog_terms(spec)
    Y = grid.term(spec.dependent)
    xs = [grid.term(e) for e in exog]
    periods = equation_periods(T)
    R = len(periods)
    t, t1, t2 = periods, periods - 1, periods - 2

    # difference equation
    dy = Y[:, t] - Y[:, t1]
    dylag = Y[:, t1] - Y[:, t2]
    dxs = [x[:, t] - x[:, t1] for x in xs]
    valid_d = np.isfinite(dy) & np.isfinite(dylag)
    for dx in dxs:
        valid_d &= np.isfinite(dx)

    z_lev = level_instruments(Y, opts.max_instrument_lag, opts.collapsed)
    n_dep = z_lev.shape[2]
    kx = len(xs)
    plabels = [grid.periods[p] for p in periods]

    if not system:
        n_time = R if opts.time_dummies else 0
        time_names = [f"dT{p}" for p in plabels] if opts.time_dummies else []
        K = 1 + kx + n_time
        X = np.zeros((N, R, K))
        X[:, :, 0] = dylag
        for k, dx in enumerate(dxs):
            X[:, :, 1 + k] = dx
        if n_time:
            X[:, :, 1 + kx :] = np.eye(R)[None, :, :]
        Z = np.concatenate([z_lev, X[:, :, 1:]], axis=2)
        yv = dy
        valid = valid_d
        H = difference_weight_matrix(R)
        names = [spec.lagged_dependent] + exog + time_names
        # levels fit: y_t = rho y_{t-1} + beta x_t + cumulated time effects
        lvl_X = np.zeros((N, R, K))
        lvl_X[:, :, 0] = Y[:, t1]
        for k, x in enumerate(xs):
            lvl_X[:, :, 1 + k] = x[:, t]
        if n_time:
            lvl_X[:, :, 1 + kx :] = np.tril(np.ones((R, R)))[None, :, :]
        lvl_y = Y[:, t]
        lvl_names = names
    else:
        # time effects: constant + level dummies for periods after the first equation period
        n_dum = R - 1 if opts.time_dummies else 0
        time_names = ["const"] + [f"T{p}" for p in plabels[1:]][:n_dum]
        K = 1 + kx + 1 + n_dum
        ly = Y[:, t]
        lylag = Y[:, t1]
        lxs = [x[:, t] for x in xs]
        valid_l = np.isfinite(ly) & np.isfinite(lylag)
        for lx in lxs:
            valid_l &= np.isfinite(lx)

        lev_dum = np.eye(R)[:, 1:][:, :n_dum]                 # (R, n_dum)
        dif_dum = lev_dum - np.vstack([np.zeros((1, n_dum)), lev_dum[:-1]])

        Xd = np.zeros((N, R, K))
        Xd[:, :, 0] = dylag
        for k, dx in enumerate(dxs):
            Xd[:, :, 1 + k] = dx
        Xd[:, :, 2 + kx :] = dif_dum[None]
        Xl = np.zeros((N, R, K))
        Xl[:, :, 0] = lylag
        for k, lx in enumerate(lxs):
            Xl[:, :, 1 + k] = lx
        Xl[:, :, 1 + kx] = 1.0
        Xl[:, :, 2 + kx :] = lev_dum[None]
        X = np.concatenate([Xd, Xl], axis=1)
        yv = np.concatenate([dy, ly], axis=1)
        valid = np.concatenate([valid_d, valid_l], axis=1)

        z_dif = difference_instruments(Y, opts.collapsed)
        # time effects instrument the levels block only: their differenced
        # moments are exact combinations of the levels ones
        zd = np.concatenate([z_lev, Xd[:, :, 1 : 1 + kx]], axis=2)
        zl = np.concatenate([z_dif, Xl[:, :, 1:]], axis=2)
        Z = np.zeros((N, 2 * R, zd.shape[2] + zl.shape[2]))
        Z[:, :R, : zd.shape[2]] = zd
        Z[:, R:, zd.shape[2] :] = zl
        H = np.zeros((2 * R, 2 * R))
        H[:R, :R] = difference_weight_matrix(R)
        H[R:, R:] = np.eye(R)
        names = [spec.lagged_dependent] + exog + time_names
        lvl_X, lvl_y, lvl_names = Xl, ly, names

    X = np.where(valid[:, :, None], np.nan_to_num(X), 0.0)
    Z = np.where(valid[:, :, None], np.nan_to_num(Z), 0.0)
    yv = np.where(valid, np.nan_to_num(yv), 0.0)
    return GmmSystem(X, yv, Z, H, valid, names, R, n_dep, lvl_X, lvl_y, lvl_names)


def _solve(Sxz, W, Szy):
    M = Sxz.T @ W @ Sxz
    M = (M + M.T) / 2.0
    if np.linalg.matrix_rank(M) < M.shape[0]:
        raise RankDeficient("GMM design is rank deficient")
    Minv = np.linalg.inv(M)
    return Minv @ (Sxz.T @ W @ Szy), Minv


def fit_system(sysm: GmmSystem, steps: int = 1, windmeijer: bool = False, robust: bool = True):
    X, y, Z, H = sysm.X, sysm.y, sysm.Z, sysm.H
    HZ = np.einsum("rs,nsl->nrl", H, Z)
    ZHZ = np.einsum("nrl,nrm->lm", Z, HZ)
    W1, rank1 = _sym_inverse(ZHZ)
    Sxz = np.einsum("nrl,nrk->lk", Z, X)
    Szy = np.einsum("nrl,nr->l", Z, y)
    b1, M1inv = _solve(Sxz, W1, Szy)
    u1 = y - np.einsum("nrk,k->nr", X, b1)
    g1 = np.einsum("nrl,nr->nl", Z, u1)
    S1 = g1.T @ g1
    V1 = M1inv @ Sxz.T @ W1 @ S1 @ W1 @ Sxz @ M1inv
    ranks = {"instruments": Z.shape[2], "rank_ZHZ": rank1}
    if not robust:
        ud = u1[:, : sysm.n_diff]
        n_d = max(int(sysm.valid[:, : sysm.n_diff].sum()), 1)
        sigma2 = float((ud * ud).sum()) / (2.0 * n_d)
        V1c = sigma2 * M1inv
    else:
        V1c = V1
    if steps == 1:
        return b1, GmmInternals(sysm, W1, W1, Sxz, M1inv, u1, u1, V1c, V1, 1), ranks

    W2, rank2 = _sym_inverse(S1)
    ranks["rank_S1"] = rank2
    b2, M2inv = _solve(Sxz, W2, Szy)
    u2 = y - np.einsum("nrk,k->nr", X, b2)
    V2 = M2inv
    if windmeijer:
        zx = np.einsum("nrl,nrk->nlk", Z, X)
        g2 = np.einsum("nrl,nr->l", Z, u2)
        K = X.shape[2]
        D = np.zeros((K, K))
        for k in range(K):
            dOmega = -(np.einsum("nl,nm->lm", zx[:, :, k], g1) + np.einsum("nl,nm->lm", g1, zx[:, :, k]))
            D[:, k] = -M2inv @ Sxz.T @ W2 @ dOmega @ W2 @ g2
        V2 = V2 + D @ V2 + V2 @ D.T + D @ V1 @ D.T
    return b2, GmmInternals(sysm, W2, W1, Sxz, M2inv, u2, u1, V2, V1, 2), ranks


def _r2_proxy(sysm: GmmSystem, params: np.ndarray) -> float:
    X, y = sysm.level_X, sysm.level_y
    ok = np.isfinite(y) & np.all(np.isfinite(X), axis=2)
    fitted = np.einsum("nrk,k->nr", np.nan_to_num(X), params)[ok]
    obs = y[ok]
    if fitted.size < 2 or fitted.std() == 0 or obs.std() == 0:
        return float("nan")
    return float(np.corrcoef(fitted, obs)[0, 1] ** 2)


def _estimate(spec: RegressionSpec, panel, system: bool) -> EstimationResult:
    from duplexnet.econ.diagnostics import ar_test, sargan_test
    from duplexnet.errors import JustIdentified, TooFewPeriodsForOrder

    terms = [spec.dependent, *spec.regressors]
    grid = to_grid(panel, terms)
    sysm = build_system(grid, spec, system)
    robust = spec.se != "classical"
    params, internals, ranks = fit_system(sysm, spec.gmm.steps, spec.gmm.windmeijer, robust)
    rows = sysm.valid[:, sysm.n_diff :] if system else sysm.valid
    res = EstimationResult(
        spec=spec,
        names=sysm.names,
        params=params,
        cov=internals.V,
        n_obs=int(rows.sum()),
        n_groups=int(sysm.valid.any(axis=1).sum()),
        n_instruments=int(sysm.Z.shape[2]),
        r2_proxy=_r2_proxy(sysm, params),
        rank_report=ranks,
        internals=internals,
    )
    for order, attr in ((1, "ar1_p"), (2, "ar2_p")):
        try:
            setattr(res, attr, ar_test(res, order))
        except TooFewPeriodsForOrder:
            pass
    try:
        res.sargan_p = sargan_test(res)
    except JustIdentified:
        pass
    return res


def ab_gmm(spec: RegressionSpec, panel) -> EstimationResult:
    """Arellano-Bond difference GMM (one- or two-step per ``spec.gmm.steps``)."""
    return _estimate(replace(spec, estimator="ab_diff"), panel, system=False)


def bb_gmm(spec: RegressionSpec, panel) -> EstimationResult:
    """Blundell-Bond system GMM."""
    return _estimate(replace(spec, estimator="bb_sys"), panel, system=True)
