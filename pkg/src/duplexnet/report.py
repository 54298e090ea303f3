"""Regression table layouts and formatting."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from duplexnet.econ.results import EstimationResult
from duplexnet.errors import MissingCell

A_MU, A_TAU = "L1.size_market", "L1.size_innovation"
PR_MU_UP, PR_MU_DW, PR_TAU_DW = "L1.pr_market_up", "L1.pr_market_dw", "L1.pr_innovation_dw"
S_MU_UP, S_MU_DW = "L1.spill_market_up", "L1.spill_market_dw"
S_TAU_UP, S_TAU_DW = "L1.spill_innovation_up", "L1.spill_innovation_dw"

BETWEEN_MU = (A_MU, A_TAU, PR_TAU_DW, S_TAU_UP, S_TAU_DW)
BETWEEN_TAU = (A_MU, A_TAU, PR_MU_UP, PR_MU_DW, S_MU_UP, S_MU_DW)
WITHIN_MU = (A_MU, PR_MU_UP, PR_MU_DW, S_MU_UP, S_MU_DW)
WITHIN_TAU = (A_TAU, PR_TAU_DW, S_TAU_UP, S_TAU_DW)
BOTH = (A_MU, A_TAU, PR_MU_UP, PR_MU_DW, PR_TAU_DW, S_MU_UP, S_MU_DW, S_TAU_UP, S_TAU_DW)


@dataclass(frozen=True)
class Cell:
    key: str
    group: str
    subgroup: str
    dependent: str
    regressors: tuple[str, ...]
    controls: bool


def dp_tp_layout() -> list[Cell]:
    """Twelve columns: between-layer, within-layer and combined effects for
    both outcomes, each without and with controls."""
    blocks = [
        ("Type 1", "innovation -> market", "size_market", BETWEEN_MU),
        ("Type 1", "market -> innovation", "size_innovation", BETWEEN_TAU),
        ("Type 2", "Market", "size_market", WITHIN_MU),
        ("Type 2", "Innovation", "size_innovation", WITHIN_TAU),
        ("Both", "", "size_market", BOTH),
        ("Both", "", "size_innovation", BOTH),
    ]
    cells = []
    for b, (group, sub, dep, regs) in enumerate(blocks):
        for c, controls in enumerate((False, True)):
            cells.append(Cell(str(2 * b + c + 1), group, sub, dep, regs, controls))
    return cells


def single_layout(dependent: str, regressors: Sequence[str]) -> list[Cell]:
    return [Cell("1", "", "", dependent, tuple(regressors), False)]


def _fmt(x: float) -> str:
    if x is None or not np.isfinite(x):
        return ""
    return format(float(x), ".10g")


def table_rows(layout: Sequence[Cell], results: Mapping[str, "EstimationResult"]) -> list[list[str]]:
    """Rows of the formatted table: header lines, coefficient / (se) pairs,
    then the diagnostics footer."""
    missing = [c.key for c in layout if c.key not in results]
    if missing:
        raise MissingCell(f"no estimation result for cells {missing}")
    order: list[str] = []
    for c in layout:
        for n in results[c.key].names:
            if n not in order and n in c.regressors + (f"L1.{c.dependent}",):
                order.append(n)
    rows = [
        [""] + [c.group for c in layout],
        [""] + [c.subgroup for c in layout],
        [""] + [c.dependent for c in layout],
        [""] + [f"({c.key})" for c in layout],
    ]
    for name in order:
        coef, se = [name], [""]
        for c in layout:
            r = results[c.key]
            if name in r.names:
                i = r.names.index(name)
                coef.append(_fmt(r.params[i]) + r.codes[i])
                se.append(f"({_fmt(r.std_errors[i])})")
            else:
                coef.append("")
                se.append("")
        rows += [coef, se]
    rows.append(["AR(1)"] + [_fmt(results[c.key].ar1_p) for c in layout])
    rows.append(["AR(2)"] + [_fmt(results[c.key].ar2_p) for c in layout])
    rows.append(["Sargan"] + [_fmt(results[c.key].sargan_p) for c in layout])
    rows.append(["Controls"] + ["Y" if c.controls else "" for c in layout])
    rows.append(["R2"] + [_fmt(results[c.key].r2_proxy) for c in layout])
    rows.append(["N"] + [str(results[c.key].n_obs) for c in layout])
    return rows


def format_csv(rows: list[list[str]]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def format_text(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for k, r in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(r, widths))).rstrip())
        if k == 3:
            lines.append("-" * len(lines[0]))
    return "\n".join(lines) + "\n"
