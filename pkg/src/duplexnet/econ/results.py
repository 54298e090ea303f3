"""Regression specifications and results."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Literal, TextIO

import numpy as np
import pandas as pd
from scipy import stats


@dataclass(frozen=True)
class GmmOptions:
    """``max_instrument_lag`` is the number of lag depths of the dependent
    variable used as instruments (depths 2 .. 1 + max); ``None`` uses all."""

    max_instrument_lag: int | None = None
    collapsed: bool = False
    steps: Literal[1, 2] = 1
    time_dummies: bool = True
    windmeijer: bool = False


@dataclass(frozen=True)
class RegressionSpec:
    """One regression.

    Regressors are panel columns; the prefix ``L<k>.`` requests a ``k``-period
    lag computed on the panel's period grid. GMM estimators require
    ``L1.<dependent>`` among the regressors and treat every other regressor
    as strictly exogenous.
    """

    dependent: str
    regressors: tuple[str, ...]
    estimator: Literal["fe_weighted", "ab_diff", "bb_sys"] = "bb_sys"
    weights: str | None = None
    fixed_effects: Literal["industry", "time", "both"] = "both"
    gmm: GmmOptions = GmmOptions()
    se: Literal["robust", "twoway", "classical"] = "robust"

    def __post_init__(self):
        object.__setattr__(self, "regressors", tuple(self.regressors))
        if self.dependent in self.regressors:
            raise ValueError("dependent variable cannot be a same-date regressor")

    @property
    def lagged_dependent(self) -> str:
        return f"L1.{self.dependent}"


def significance_code(p: float) -> str:
    """R-style stars; thresholds are strict, so p = 0.05 gets ``.``."""
    if not np.isfinite(p):
        return ""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    if p < 0.1:
        return "."
    return ""


@dataclass
class EstimationResult:
    spec: RegressionSpec
    names: list[str]
    params: np.ndarray
    cov: np.ndarray
    n_obs: int
    n_groups: int
    n_instruments: int = 0
    r2_proxy: float = float("nan")
    ar1_p: float = float("nan")
    ar2_p: float = float("nan")
    sargan_p: float = float("nan")
    rank_report: dict = field(default_factory=dict)
    internals: object = field(default=None, repr=False)

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    @property
    def tstats(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.params / self.std_errors

    @property
    def pvalues(self) -> np.ndarray:
        return 2.0 * stats.norm.sf(np.abs(self.tstats))

    @property
    def codes(self) -> list[str]:
        return [significance_code(p) for p in self.pvalues]

    def coef(self, name: str) -> float:
        return float(self.params[self.names.index(name)])

    def se(self, name: str) -> float:
        return float(self.std_errors[self.names.index(name)])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"coef": self.params, "se": self.std_errors, "p": self.pvalues, "code": self.codes},
            index=pd.Index(self.names, name="regressor"),
        )

    def diagnostics(self) -> dict[str, float]:
        return {
            "AR1": self.ar1_p,
            "AR2": self.ar2_p,
            "Sargan": self.sargan_p,
            "R2": self.r2_proxy,
            "N": self.n_obs,
            "groups": self.n_groups,
            "instruments": self.n_instruments,
        }

    def write_csv(self, coef_stream: TextIO, diag_stream: TextIO | None = None) -> None:
        w = csv.writer(coef_stream, lineterminator="\n")
        w.writerow(["regressor", "coef", "se", "code"])
        for n, b, s, c in zip(self.names, self.params, self.std_errors, self.codes):
            w.writerow([n, _fmt(b), _fmt(s), c])
        if diag_stream is not None:
            d = csv.writer(diag_stream, lineterminator="\n")
            d.writerow(list(self.diagnostics()))
            d.writerow([_fmt(v) for v in self.diagnostics().values()])


def significance_codes(result: EstimationResult) -> pd.DataFrame:
    """Coefficient table annotated with significance codes."""
    return result.to_frame()


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not np.isfinite(x):
        return "NA"
    return format(x, ".10g")
