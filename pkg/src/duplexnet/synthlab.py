"""Synthetic ground truth: data generators, independent oracles, Monte Carlo.

Oracles here deliberately share no numerical code with the modules they
check (e.g. the PageRank oracle builds its own transition matrix and solves
a linear system instead of iterating).
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import pandas as pd

from duplexnet.errors import DuplexError, SingularSystem
from duplexnet.netcore import (
    LAYERS,
    DuplexPanelNetwork,
    FlowMatrix,
    IndustryIndex,
    PeriodNetwork,
    input_shares,
    node_sizes,
    output_shares,
)
from duplexnet.panel import PanelDataset


@dataclass(frozen=True)
class DgpSpec:
    """Dynamic panel design ``y_it = rho y_i,t-1 + beta' x_it + mu_i + e_it``.

    ``x_error_corr`` correlates each regressor with the contemporaneous
    error, which breaks its exogeneity (used for power checks).
    """

    N: int = 300
    T: int = 8
    rho: float = 0.5
    fe_sd: float = 1.0
    noise_sd: float = 1.0
    beta: tuple[float, ...] = ()
    x_sd: float = 1.0
    x_error_corr: float = 0.0
    init_sd: float = 1.0
    burn_in: int = 50
    seed: int = 0
    allow_nonstationary: bool = False

    def __post_init__(self):
        if abs(self.rho) >= 1 and not self.allow_nonstationary:
            raise ValueError("|rho| >= 1 requires allow_nonstationary=True")
        if self.N < 1 or self.T < 1:
            raise ValueError("N and T must be positive")


def gen_ar1_panel(spec: DgpSpec) -> PanelDataset:
    """Draw a panel with columns ``y`` and ``x1..xk``; periods are 0..T-1.

    The recursion starts ``burn_in`` periods before the first kept period,
    at the stationary mean ``mu / (1 - rho)`` plus ``init_sd`` noise.
    """
    rng = np.random.default_rng(spec.seed)
    N, T, B = spec.N, spec.T, spec.burn_in
    L = B + T
    k = len(spec.beta)
    mu = rng.normal(0.0, spec.fe_sd, N) if spec.fe_sd > 0 else np.zeros(N)
    eps = rng.normal(0.0, 1.0, (N, L)) * spec.noise_sd
    xs = rng.normal(0.0, 1.0, (k, N, L))
    if spec.x_error_corr:
        c = spec.x_error_corr
        z = eps / spec.noise_sd if spec.noise_sd > 0 else 0.0
        xs = c * z + np.sqrt(1 - c * c) * xs
    xs = xs * spec.x_sd
    beta = np.asarray(spec.beta, dtype=float)
    y = np.empty((N, L))
    start = mu / (1 - spec.rho) if abs(spec.rho) < 1 else mu
    y[:, 0] = start + spec.init_sd * rng.normal(0.0, 1.0, N)
    for t in range(1, L):
        y[:, t] = spec.rho * y[:, t - 1] + mu + eps[:, t]
        if k:
            y[:, t] += np.tensordot(beta, xs[:, :, t], axes=1)
    y, xs = y[:, B:], xs[:, :, B:]
    ids = [f"i{i:04d}" for i in range(N)]
    data = {
        "industry": np.repeat(ids, T),
        "period": np.tile(np.arange(T), N),
        "y": y.ravel(),
    }
    for j in range(k):
        data[f"x{j + 1}"] = xs[j].ravel()
    return PanelDataset(pd.DataFrame(data))


# -- networks -------------------------------------------------------------


def random_flow_matrix(
    n: int, density: float, rng: np.random.Generator, weight_law: str = "exponential"
) -> np.ndarray:
    """Bernoulli(density) support with skewed positive magnitudes."""
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    support = rng.random((n, n)) < density
    if weight_law == "exponential":
        mags = rng.exponential(1.0, (n, n))
    elif weight_law == "lognormal":
        mags = rng.lognormal(0.0, 1.0, (n, n))
    elif weight_law == "uniform":
        mags = rng.uniform(0.0, 1.0, (n, n))
    else:
        raise ValueError(f"unknown weight law {weight_law!r}")
    return np.where(support, mags + 1e-12, 0.0)


def gen_random_duplex(
    N: int,
    T: int,
    density: float,
    weight_law: str = "exponential",
    seed: int = 0,
    periods: Sequence | None = None,
) -> DuplexPanelNetwork:
    """Independent random flow matrices per period and layer; patent stocks
    are exponential draws."""
    rng = np.random.default_rng(seed)
    index = IndustryIndex(tuple(f"n{i:03d}" for i in range(N)))
    periods = list(periods) if periods is not None else list(range(T))
    networks = {}
    for p in periods:
        flows, shares, sizes = {}, {}, {}
        for layer in LAYERS:
            fm = FlowMatrix(p, layer, random_flow_matrix(N, density, rng, weight_law), index)
            flows[layer] = fm
            shares[(layer, "up")] = input_shares(fm)
            shares[(layer, "dw")] = output_shares(fm)
        sizes["market"] = node_sizes(flows["market"], "market")
        sizes["innovation"] = node_sizes(
            flows["innovation"], "innovation", rng.exponential(10.0, N)
        )
        networks[p] = PeriodNetwork(flows, shares, sizes)
    return DuplexPanelNetwork(index, periods, networks)


# -- oracles --------------------------------------------------------------


def oracle_pagerank_dense(adjacency: np.ndarray, damping: float = 0.85) -> np.ndarray:
    """PageRank as the solution of ``(I - d M) x = (1 - d) / N``.

    ``adjacency[i, j]`` is the weight of the link ``i -> j``. ``M[j, i]`` is the
    probability of moving from ``i`` to ``j``; nodes without out-links move
    uniformly.
    """
    a = np.asarray(adjacency, dtype=float)
    n = a.shape[0]
    if n > 200:
        raise ValueError("dense oracle limited to N <= 200")
    M = np.empty((n, n))
    for i in range(n):
        total = sum(a[i, j] for j in range(n))
        for j in range(n):
            M[j, i] = a[i, j] / total if total > 0 else 1.0 / n
    system = np.eye(n) - damping * M
    try:
        x = np.linalg.solve(system, np.full(n, (1.0 - damping) / n))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from None
    return x / x.sum()


# -- Monte Carlo ----------------------------------------------------------


def replication_seeds(master_seed: int, reps: int) -> list[int]:
    """Per-replication seeds; the first ``k`` seeds do not depend on ``reps``."""
    children = np.random.SeedSequence(master_seed).spawn(reps)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


@dataclass
class MonteCarloSummary:
    truth: float | None
    estimates: np.ndarray
    std_errors: np.ndarray
    extras: list[dict]
    failures: dict[str, int] = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return float(np.nanmean(self.estimates))

    @property
    def sd(self) -> float:
        return float(np.nanstd(self.estimates, ddof=1)) if len(self.estimates) > 1 else 0.0

    @property
    def bias(self) -> float:
        return self.mean - self.truth

    @property
    def coverage(self) -> float:
        """Share of replications whose 95% normal interval covers the truth."""
        if self.truth is None:
            return float("nan")
        ok = np.isfinite(self.estimates) & np.isfinite(self.std_errors)
        lo = self.estimates - 1.959963984540054 * self.std_errors
        hi = self.estimates + 1.959963984540054 * self.std_errors
        return float(((lo <= self.truth) & (self.truth <= hi))[ok].mean()) if ok.any() else float("nan")

    @property
    def n_failed(self) -> int:
        return sum(self.failures.values())

    def rate(self, key: str, level: float = 0.05) -> float:
        """Share of replications where ``extras[key] < level`` (rejection rate)."""
        vals = np.array([e.get(key, np.nan) for e in self.extras], dtype=float)
        vals = vals[np.isfinite(vals)]
        return float((vals < level).mean()) if vals.size else float("nan")


def _one_rep(args):
    estimator, dgp, seed, param, extract = args
    panel = gen_ar1_panel(replace(dgp, seed=seed))
    try:
        res = estimator(panel)
    except DuplexError as exc:
        return None, type(exc).__name__
    i = res.names.index(param)
    out = {"estimate": float(res.params[i]), "se": float(res.std_errors[i])}
    if extract is not None:
        out.update(extract(res))
    return out, None


def montecarlo(
    estimator: Callable,
    dgp: DgpSpec,
    reps: int,
    master_seed: int = 0,
    param: str = "L1.y",
    truth: float | None = None,
    extract: Callable | None = None,
    n_jobs: int = 1,
) -> MonteCarloSummary:
    """Run ``estimator(panel)`` on ``reps`` independent draws of ``dgp``.

    Estimator errors are counted by exception name instead of aborting.
    With ``n_jobs > 1`` the callables must be picklable (module-level).
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    seeds = replication_seeds(master_seed, reps)
    jobs = [(estimator, dgp, s, param, extract) for s in seeds]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            outcomes = list(ex.map(_one_rep, jobs))
    else:
        outcomes = [_one_rep(j) for j in jobs]
    est, ses, extras, failures = [], [], [], {}
    for out, err in outcomes:
        if err is not None:
            failures[err] = failures.get(err, 0) + 1
            continue
        est.append(out.pop("estimate"))
        ses.append(out.pop("se"))
        extras.append(out)
    truth = dgp.rho if truth is None and param == "L1.y" else truth
    return MonteCarloSummary(truth, np.array(est), np.array(ses), extras, failures)


# -- synthetic pipeline inputs -------------------------------------------


@dataclass(frozen=True)
class SyntheticInputs:
    market_edges: Path
    innovation_edges: Path
    concordance: Path
    events: Path
    aux: Path


def write_synthetic_inputs(
    out_dir: str | Path,
    n_industries: int = 100,
    periods: Sequence[int] = tuple(range(1977, 2013, 5)),
    window_len: int = 5,
    seed: int = 0,
    density: float = 0.08,
    n_classes: int | None = None,
    patents_per_class_year: float = 2.0,
) -> SyntheticInputs:
    """Write a full set of raw pipeline inputs.

    Industry output and patenting follow latent AR(1) log-size processes;
    market flows distribute each supplier's output over a sparse, slowly
    changing customer set; patents live in technology classes that map to
    industries through a weighted concordance.
    """
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    N, T = n_industries, len(periods)
    n_classes = n_classes or N
    codes = [f"{31 + i % 3}{i:04d}" for i in range(N)]
    classes = [f"C{j:03d}" for j in range(n_classes)]

    mu_s = rng.normal(0, 0.5, N)
    mu_v = rng.normal(0, 0.5, N)
    s = np.empty((N, T))
    v = np.empty((N, T))
    s[:, 0] = 3.0 + mu_s / 0.3 + rng.normal(0, 0.3, N)
    v[:, 0] = mu_v / 0.3 + rng.normal(0, 0.3, N)
    for t in range(1, T):
        s[:, t] = 0.7 * s[:, t - 1] + 0.9 + mu_s + 0.05 * v[:, t - 1] + rng.normal(0, 0.2, N)
        v[:, t] = 0.7 * v[:, t - 1] + mu_v + 0.05 * (s[:, t - 1] - 3) + rng.normal(0, 0.2, N)

    # market: supplier j ships exp(s_j) spread over its customers
    base_support = rng.random((N, N)) < density
    base_support[np.arange(N), rng.integers(0, N, N)] = True
    with open(out / "market_edges.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source", "target", "value", "period"])
        for t, p in enumerate(periods):
            churn = rng.random((N, N)) < 0.02
            support = base_support ^ churn
            for j in range(N):
                cust = np.flatnonzero(support[:, j])
                if cust.size == 0:
                    cust = np.array([j])
                shares = rng.dirichlet(np.full(cust.size, 0.5))
                total = float(np.exp(s[j, t]))
                for i, sh in zip(cust, shares):
                    if sh * total > 0:
                        w.writerow([codes[j], codes[i], format(sh * total, ".10g"), p])

    # concordance: each class -> its home industry plus up to two others
    home = rng.integers(0, N, n_classes)
    home[: min(N, n_classes)] = np.arange(min(N, n_classes))
    with open(out / "concordance.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source", "target", "weight"])
        for c, cls in enumerate(classes):
            others = rng.choice(N, size=rng.integers(0, 3), replace=False)
            targets = [int(home[c])] + [int(o) for o in others if o != home[c]]
            wts = np.array([1.0] + [0.1] * (len(targets) - 1))
            wts = wts / wts.sum()
            for tgt, wt in zip(targets, wts):
                w.writerow([cls, codes[tgt], format(wt, ".10g")])

    # patents: yearly counts per class driven by the home industry's v
    first_year = periods[0] - window_len + 1
    pid = 0
    with open(out / "events.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "year", "codes", "forward_citations"])
        for year in range(first_year, periods[-1] + 1):
            t = min(max(0, int(np.searchsorted(periods, year))), T - 1)
            lam = patents_per_class_year * np.exp(v[home, t] - v[home, t].mean())
            counts = rng.poisson(lam)
            for c, k in enumerate(counts):
                for _ in range(int(k)):
                    extra = rng.random() < 0.2
                    cs = [classes[c]] + ([classes[int(rng.integers(n_classes))]] if extra else [])
                    w.writerow([f"P{pid:07d}", year, ";".join(cs), int(rng.poisson(2.0))])
                    pid += 1

    # class-level citation counts per window
    cite_support = rng.random((n_classes, n_classes)) < density * 1.5
    np.fill_diagonal(cite_support, True)
    with open(out / "innovation_edges.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source", "target", "value", "period"])
        for t, p in enumerate(periods):
            lam = np.exp(v[home, t])[None, :] * cite_support * 3.0
            counts = rng.poisson(lam)
            for a, b in zip(*np.nonzero(counts)):
                # b (cited) -> a (citing)
                w.writerow([classes[b], classes[a], int(counts[a, b]), p])

    # auxiliary NBER-CES style controls
    rows = []
    for i, code in enumerate(codes):
        emp0 = rng.lognormal(3, 0.5)
        for t, p in enumerate(periods):
            defl = float(1.0 + 0.03 * t + rng.normal(0, 0.01))
            emp = emp0 * np.exp(0.5 * (s[i, t] - s[i, 0]) + rng.normal(0, 0.05))
            rows.append(
                {
                    "industry": code,
                    "period": p,
                    "employment": emp,
                    "wage": emp * rng.lognormal(3.0, 0.2),
                    "capital_intensity": rng.lognormal(4.0, 0.5),
                    "investment_pc": rng.lognormal(1.0, 0.5),
                    "energy_pc": rng.lognormal(0.5, 0.5),
                    "materials_pc": rng.lognormal(2.0, 0.5),
                    "prod_labor_share": float(rng.uniform(0.4, 0.9)),
                    "rel_prod_wage": rng.lognormal(-0.3, 0.1),
                    "tfp": rng.lognormal(0.0, 0.1),
                    "value_added_pc": rng.lognormal(2.0, 0.4),
                    "deflator": max(defl, 0.5),
                }
            )
    pd.DataFrame(rows).to_csv(out / "aux.csv", index=False, float_format="%.10g", lineterminator="\n")
    return SyntheticInputs(
        out / "market_edges.csv",
        out / "innovation_edges.csv",
        out / "concordance.csv",
        out / "events.csv",
        out / "aux.csv",
    )
