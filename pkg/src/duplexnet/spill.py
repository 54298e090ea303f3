"""Thresholded links and first-order cross-industry spillovers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from duplexnet.errors import IndexMismatch
from duplexnet.netcore import NodeSizeVector, ShareMatrix

DEFAULT_THETA = 0.05
ROBUSTNESS_THETAS = (0.025, 0.10, 0.20)


@dataclass(frozen=True)
class LinkMatrix:
    """Binary links in oriented form: ``links[i, j] = 1`` if partner ``j``
    accounts for at least ``theta`` of focal industry ``i``'s inputs (up) or
    output (dw)."""

    links: np.ndarray
    theta: float
    period: object = None
    layer: str | None = None
    direction: str | None = None


@dataclass(frozen=True)
class SpilloverVector:
    values: np.ndarray
    variant: Literal["binary", "weighted"]
    period: object = None
    layer: str | None = None
    direction: str | None = None


def _oriented(w):
    if isinstance(w, ShareMatrix):
        return w.oriented, dict(period=w.period, layer=w.layer, direction=w.direction)
    return np.asarray(w, dtype=float), {}


def _sizes(a, n: int) -> np.ndarray:
    v = a.values if isinstance(a, NodeSizeVector) else np.asarray(a, dtype=float)
    if v.shape != (n,):
        raise IndexMismatch(f"size vector of shape {v.shape} for {n} industries")
    return v


def threshold_links(w: ShareMatrix | np.ndarray, theta: float = DEFAULT_THETA) -> LinkMatrix:
    """``1(w >= theta)``; a weight exactly at the threshold counts as a link."""
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    m, meta = _oriented(w)
    return LinkMatrix((m >= theta).astype(np.int8), theta, **meta)


def spillover(links: LinkMatrix | np.ndarray, sizes: NodeSizeVector | np.ndarray) -> SpilloverVector:
    """``Spill_i = sum_{j != i} L[i, j] * A_j``."""
    if isinstance(links, LinkMatrix):
        lm = links.links.astype(float)
        meta = dict(period=links.period, layer=links.layer, direction=links.direction)
    else:
        lm, meta = np.asarray(links, dtype=float), {}
    a = _sizes(sizes, lm.shape[0])
    lm = lm.copy()
    np.fill_diagonal(lm, 0.0)
    return SpilloverVector(lm @ a, "binary", **meta)


def spillover_weighted(w: ShareMatrix | np.ndarray, sizes: NodeSizeVector | np.ndarray) -> SpilloverVector:
    """``Spill_i = sum_{j != i} w[i, j] * A_j`` on the oriented share matrix."""
    m, meta = _oriented(w)
    a = _sizes(sizes, m.shape[0])
    m = m.copy()
    np.fill_diagonal(m, 0.0)
    return SpilloverVector(m @ a, "weighted", **meta)
