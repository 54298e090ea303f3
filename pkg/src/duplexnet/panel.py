"""Regression panel: assembly, transformation ledger, lags and subgroups.

A :class:`PanelDataset` is a long frame indexed by ``(industry, period)``.
Missing observations are NaN (never zero). Every transformation appends an
entry to the column's provenance list so that the final column can be
replayed bit-for-bit from the raw one.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Mapping, Sequence, TextIO

import numpy as np
import pandas as pd

from duplexnet.errors import (
    DomainError,
    EmptyCell,
    GridMismatch,
    TooFewObservations,
    UnknownClass,
    ZeroDispersion,
)

KEYS = ["industry", "period"]
SUBPERIODS = {"1977-1997": (1977, 1997), "1992-2012": (1992, 2012)}
DEFAULT_PERIODS = tuple(range(1977, 2013, 5))


@dataclass
class Removal:
    industry: str
    period: object
    column: str
    value: float
    reason: str


@dataclass
class PanelDataset:
    data: pd.DataFrame
    provenance: dict[str, list[dict]] = field(default_factory=dict)
    removals: list[Removal] = field(default_factory=list)

    def __post_init__(self):
        df = self.data
        if list(df.index.names) != KEYS:
            df = df.set_index(KEYS)
        if df.index.duplicated().any():
            raise ValueError("duplicate (industry, period) keys")
        self.data = df.sort_index()
        for c in self.data.columns:
            self.provenance.setdefault(c, [])

    @property
    def industries(self) -> list[str]:
        return sorted(self.data.index.get_level_values("industry").unique())

    @property
    def periods(self) -> list:
        return sorted(self.data.index.get_level_values("period").unique())

    def __getitem__(self, column: str) -> pd.Series:
        return self.data[column]

    def __len__(self) -> int:
        return len(self.data)

    def copy(self) -> "PanelDataset":
        return PanelDataset(
            self.data.copy(),
            {k: [dict(s) for s in v] for k, v in self.provenance.items()},
            list(self.removals),
        )

    def with_column(self, name: str, values: pd.Series, step: dict | None = None) -> "PanelDataset":
        out = self.copy()
        out.data[name] = values.reindex(out.data.index)
        if step is not None:
            out.provenance.setdefault(name, []).append(step)
        else:
            out.provenance.setdefault(name, [])
        return out

    # -- persistence ------------------------------------------------------

    def write_csv(self, path: str | Path, float_format: str = "%.17g") -> None:
        """Write ``path`` plus a ``<stem>.provenance.json`` sidecar."""
        path = Path(path)
        self.data.reset_index().to_csv(path, index=False, float_format=float_format, na_rep="NA", lineterminator="\n")
        side = {
            "provenance": self.provenance,
            "removals": [r.__dict__ for r in self.removals],
        }
        path.with_suffix(".provenance.json").write_text(
            json.dumps(side, indent=1, sort_keys=True, default=_json_default) + "\n"
        )

    @classmethod
    def read_csv(cls, path: str | Path) -> "PanelDataset":
        path = Path(path)
        df = pd.read_csv(path, dtype={"industry": str}, na_values=["NA"], keep_default_na=False, float_precision="round_trip")
        side_path = path.with_suffix(".provenance.json")
        prov, removals = {}, []
        if side_path.exists():
            side = json.loads(side_path.read_text())
            prov = side.get("provenance", {})
            removals = [Removal(**r) for r in side.get("removals", [])]
        return cls(df.set_index(KEYS), prov, removals)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(f"not serialisable: {o!r}")


# -- assembly -------------------------------------------------------------


def assemble(
    sources: Sequence[pd.DataFrame],
    balanced: bool = True,
    required: Sequence[str] | None = None,
    positive: Sequence[str] = ("size_market", "size_innovation"),
) -> PanelDataset:
    """Outer-join source frames (each indexed by industry and period).

    All sources must cover the same period grid. In balanced mode an
    industry is dropped unless it has a row in every period with all
    ``required`` columns (default: every column) present and every
    ``positive`` column strictly positive.
    """
    frames = [s if list(s.index.names) == KEYS else s.set_index(KEYS) for s in sources]
    grids = [tuple(sorted(f.index.get_level_values("period").unique())) for f in frames]
    if any(g != grids[0] for g in grids[1:]):
        raise GridMismatch(f"sources cover different periods: {sorted(set(grids))}")
    data = pd.concat(frames, axis=1, join="outer").sort_index()
    dup = data.columns[data.columns.duplicated()]
    if len(dup):
        raise ValueError(f"columns present in several sources: {list(dup)}")
    periods = list(grids[0])
    industries = sorted(data.index.get_level_values("industry").unique())
    full = pd.MultiIndex.from_product([industries, periods], names=KEYS)
    data = data.reindex(full)
    if balanced:
        req = list(required) if required is not None else list(data.columns)
        ok = data[req].notna().all(axis=1)
        for c in positive:
            if c in data:
                ok &= data[c] > 0
        keep = ok.groupby(level="industry").all()
        data = data.loc[keep[keep].index.tolist()]
    return PanelDataset(data)


# -- column transformations ----------------------------------------------


def scale_by_sd(x: pd.Series) -> tuple[pd.Series, float]:
    """Divide by the sample standard deviation over all observations."""
    v = x.dropna().to_numpy(dtype=float)
    sd = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    if not sd > 0:
        raise ZeroDispersion(f"column {x.name!r} has zero dispersion")
    return x / sd, sd


def log1p(x: pd.Series) -> pd.Series:
    bad = x.dropna() <= -1
    if bad.any():
        raise DomainError(f"log(1+x) undefined for {x.dropna()[bad].iloc[0]} in {x.name!r}")
    return np.log1p(x)


def iqr_bounds(x: pd.Series | np.ndarray, a: float) -> tuple[float, float]:
    v = np.asarray(pd.Series(x).dropna(), dtype=float)
    if a <= 0:
        raise ValueError("IQR multiplier must be > 0")
    if v.size < 4:
        raise TooFewObservations(f"need at least 4 observations, got {v.size}")
    q1, q3 = np.quantile(v, [0.25, 0.75])
    iqr = q3 - q1
    return float(q1 - a * iqr), float(q3 + a * iqr)


def remove_outliers_iqr(panel: PanelDataset, column: str, a: float = 30.0) -> PanelDataset:
    """Drop whole rows whose ``column`` lies outside ``[Q1 - a IQR, Q3 + a IQR]``.

    Quartiles are pooled over all industries and periods.
    """
    lo, hi = iqr_bounds(panel.data[column], a)
    x = panel.data[column]
    out_mask = x.notna() & ((x < lo) | (x > hi))
    out = panel.copy()
    dropped = x[out_mask]
    for (ind, per), val in dropped.items():
        out.removals.append(Removal(ind, per, column, float(val), f"outside [{lo!r}, {hi!r}] (a={a})"))
    out.data = out.data.loc[~out_mask]
    out.provenance[column].append(
        {"op": "remove_outliers_iqr", "a": a, "lo": lo, "hi": hi, "removed": int(out_mask.sum())}
    )
    return out


@dataclass(frozen=True)
class TransformPlan:
    """Fixed-order preprocessing: sd scaling, then log(1+x), then IQR filtering."""

    scale: Sequence[str] = ()
    log: Sequence[str] = ()
    log_exempt: Sequence[str] = ("prod_labor_share",)
    outliers: Sequence[str] = ()
    iqr_multiplier: float = 30.0


def transform(panel: PanelDataset, plan: TransformPlan) -> PanelDataset:
    out = panel.copy()
    for c in plan.scale:
        out.data[c], sd = scale_by_sd(out.data[c])
        out.provenance[c].append({"op": "scale_by_sd", "sd": sd})
    for c in plan.log:
        if c in plan.log_exempt:
            continue
        out.data[c] = log1p(out.data[c])
        out.provenance[c].append({"op": "log1p"})
    for c in plan.outliers:
        out = remove_outliers_iqr(out, c, plan.iqr_multiplier)
    return out


def replay(raw: pd.Series, steps: Iterable[Mapping]) -> pd.Series:
    """Re-apply recorded steps to a raw column using the stored parameters."""
    x = raw.copy()
    for s in steps:
        op = s["op"]
        if op == "scale_by_sd":
            x = x / s["sd"]
        elif op == "deflate":
            continue
        elif op == "log1p":
            x = np.log1p(x)
        elif op == "remove_outliers_iqr":
            x = x[~(x.notna() & ((x < s["lo"]) | (x > s["hi"])))]
        else:
            raise ValueError(f"unknown provenance op {op!r}")
    return x


# -- lags -----------------------------------------------------------------


def lag(x: pd.Series, k: int = 1, grid: Sequence | None = None) -> pd.Series:
    """Shift within industry by ``k`` steps of the period grid.

    The grid defaults to the sorted periods present in ``x``; gaps in an
    industry's series yield NaN rather than borrowing a value from further back.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    grid = list(grid) if grid is not None else sorted(x.index.get_level_values("period").unique())
    pos = {p: i for i, p in enumerate(grid)}
    periods = x.index.get_level_values("period")
    inds = x.index.get_level_values("industry")
    src = [
        (ind, grid[pos[p] - k]) if pos[p] - k >= 0 else None
        for ind, p in zip(inds, periods)
    ]
    lookup = x.to_dict()
    vals = [lookup.get(s, np.nan) if s is not None else np.nan for s in src]
    return pd.Series(vals, index=x.index, name=f"L{k}.{x.name}" if x.name else None, dtype=float)


def add_lags(panel: PanelDataset, columns: Iterable[str], k: int = 1, grid: Sequence | None = None) -> PanelDataset:
    grid = grid if grid is not None else panel.periods
    out = panel
    for c in columns:
        out = out.with_column(f"L{k}.{c}", lag(panel.data[c], k, grid), None)
    return out


# -- subgroups ------------------------------------------------------------


@dataclass(frozen=True)
class GroupSpec:
    name: str
    rule: Literal["median", "prefix", "class", "periods"]
    column: str | None = None
    side: Literal["above", "below"] = "above"
    prefix: str | None = None
    classes: Mapping[str, str] | None = None
    class_name: str | None = None
    periods: tuple | None = None


def read_class_file(stream: TextIO, code: str = "industry", label: str = "class") -> dict[str, str]:
    return {r[code].strip(): r[label].strip() for r in csv.DictReader(stream)}


def median_split(panel: PanelDataset, column: str) -> tuple[list[str], list[str]]:
    """Industries whose time-averaged ``column`` is strictly above / at or below
    the cross-industry median."""
    avg = panel.data[column].groupby(level="industry").mean().dropna()
    md = float(np.median(avg.to_numpy()))
    above = sorted(avg.index[avg > md])
    below = sorted(avg.index[avg <= md])
    return above, below


def subset(panel: PanelDataset, spec: GroupSpec) -> PanelDataset:
    inds = panel.data.index.get_level_values("industry")
    pers = panel.data.index.get_level_values("period")
    if spec.rule == "median":
        above, below = median_split(panel, spec.column)
        mask = inds.isin(above if spec.side == "above" else below)
    elif spec.rule == "prefix":
        mask = np.array([str(c).startswith(spec.prefix) for c in inds])
    elif spec.rule == "class":
        classes = spec.classes or {}
        if spec.class_name not in set(classes.values()):
            raise UnknownClass(f"class {spec.class_name!r} not in class file")
        members = {c for c, k in classes.items() if k == spec.class_name}
        mask = inds.isin(members)
    elif spec.rule == "periods":
        lo, hi = spec.periods
        mask = (pers >= lo) & (pers <= hi)
    else:
        raise ValueError(f"unknown group rule {spec.rule!r}")
    out = panel.copy()
    out.data = out.data.loc[np.asarray(mask, dtype=bool)]
    if out.data.empty:
        raise EmptyCell(f"group {spec.name!r} is empty")
    return out


def subperiod_specs(windows: Mapping[str, tuple[int, int]] = SUBPERIODS) -> list[GroupSpec]:
    return [GroupSpec(name, "periods", periods=w) for name, w in windows.items()]
