"""Instrument blocks for dynamic panel GMM.

Arrays are laid out per group: ``(N groups, R equation rows, L instruments)``.
Equation rows are the periods ``t = 2 .. T-1`` (0-based) of the period grid;
row ``r`` refers to period ``t = r + 2``. Missing instrument values become 0.
"""

from __future__ import annotations

import numpy as np


def equation_periods(T: int) -> np.ndarray:
    return np.arange(2, T)


def _depths(T: int, max_lag: int | None) -> np.ndarray:
    deepest = T - 1 if max_lag is None else min(T - 1, 1 + max_lag)
    return np.arange(2, deepest + 1)


def level_instruments(y: np.ndarray, max_lag: int | None = None, collapsed: bool = False) -> np.ndarray:
    """Lagged levels ``y[s]`` for the differenced equation of period ``t``.

    Uncollapsed: one column per (period, lag depth), a block-diagonal
    layout. Collapsed: one column per lag depth shared across periods.
    """
    N, T = y.shape
    periods = equation_periods(T)
    depths = _depths(T, max_lag)
    yz = np.nan_to_num(y, nan=0.0)
    if collapsed:
        z = np.zeros((N, len(periods), len(depths)))
        for r, t in enumerate(periods):
            for c, d in enumerate(depths):
                if t - d >= 0:
                    z[:, r, c] = yz[:, t - d]
        return z
    cols = [(r, t - d) for r, t in enumerate(periods) for d in depths if t - d >= 0]
    z = np.zeros((N, len(periods), len(cols)))
    for c, (r, s) in enumerate(cols):
        z[:, r, c] = yz[:, s]
    return z


def difference_instruments(y: np.ndarray, collapsed: bool = False) -> np.ndarray:
    """``Δy[t-1]`` for the levels equation of period ``t`` (system GMM)."""
    N, T = y.shape
    periods = equation_periods(T)
    dy = np.nan_to_num(y[:, 1:] - y[:, :-1], nan=0.0)  # dy[:, k] = y[k+1] - y[k]
    if collapsed:
        z = np.zeros((N, len(periods), 1))
        for r, t in enumerate(periods):
            z[:, r, 0] = dy[:, t - 2]
        return z
    z = np.zeros((N, len(periods), len(periods)))
    for r, t in enumerate(periods):
        z[:, r, r] = dy[:, t - 2]
    return z


def count_level_instruments(T: int, max_lag: int | None = None, collapsed: bool = False) -> int:
    depths = _depths(T, max_lag)
    if collapsed:
        return len(depths)
    return int(sum(sum(1 for d in depths if t - d >= 0) for t in equation_periods(T)))


def difference_weight_matrix(R: int) -> np.ndarray:
    """Tridiagonal (2, -1) covariance pattern of first-differenced iid errors."""
    return 2.0 * np.eye(R) - np.eye(R, k=1) - np.eye(R, k=-1)
