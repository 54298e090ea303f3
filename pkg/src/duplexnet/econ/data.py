"""Turn a long panel into balanced ``(industry, period)`` arrays."""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
import pandas as pd

from duplexnet.errors import DataError
from duplexnet.panel import KEYS, PanelDataset

_LAG = re.compile(r"^L(\d+)\.(.+)$")


def parse_term(term: str) -> tuple[str, int]:
    """``"L2.x"`` -> ``("x", 2)``; plain names have lag 0."""
    m = _LAG.match(term)
    if m:
        return m.group(2), int(m.group(1))
    return term, 0


@dataclass
class GridArrays:
    industries: list
    periods: list
    columns: dict[str, np.ndarray]

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.industries), len(self.periods)

    def term(self, name: str) -> np.ndarray:
        """Values of a (possibly lagged) column on the grid, NaN where missing."""
        if name in self.columns:
            return self.columns[name]
        base, k = parse_term(name)
        if base not in self.columns:
            raise DataError(f"unknown column {base!r}")
        x = self.columns[base]
        out = np.full_like(x, np.nan)
        if k < x.shape[1]:
            out[:, k:] = x[:, : x.shape[1] - k]
        return out


def to_grid(panel: PanelDataset | pd.DataFrame, columns) -> GridArrays:
    df = panel.data if isinstance(panel, PanelDataset) else panel
    if list(df.index.names) != KEYS:
        df = df.set_index(KEYS)
    industries = sorted(df.index.get_level_values("industry").unique())
    periods = sorted(df.index.get_level_values("period").unique())
    full = pd.MultiIndex.from_product([industries, periods], names=KEYS)
    needed = sorted({parse_term(c)[0] for c in columns})
    missing = [c for c in needed if c not in df.columns]
    if missing:
        raise DataError(f"panel lacks columns {missing}")
    sub = df[needed].reindex(full)
    arrays = {
        c: sub[c].to_numpy(dtype=float).reshape(len(industries), len(periods)) for c in needed
    }
    return GridArrays(industries, periods, arrays)
