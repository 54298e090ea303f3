"""Acceptance criteria, each at its stated tolerance.

Every test prints one ``criterion <n> <title>: PASS|FAIL`` line and the
terminal summary repeats them in order.
"""

import math
import time

import numpy as np
import pandas as pd
import pytest

import oracles
from duplexnet.cli import main
from duplexnet.econ import GmmOptions, RegressionSpec, bb_gmm, count_level_instruments, fe_weighted
from duplexnet.econ.data import to_grid
from duplexnet.econ.gmm import build_system
from duplexnet.econ.instruments import level_instruments
from duplexnet.netcore import FlowMatrix, IndustryIndex, input_shares, output_shares
from duplexnet.netmetrics import NetworkStats, cosine_similarity, network_stats, pagerank
from duplexnet.panel import PanelDataset, TransformPlan, iqr_bounds, remove_outliers_iqr, replay, transform
from duplexnet.spill import ROBUSTNESS_THETAS, spillover, spillover_weighted, threshold_links
from duplexnet.synthlab import DgpSpec, gen_ar1_panel, montecarlo, oracle_pagerank_dense

THETAS = sorted({0.025, 0.05, 0.10, 0.20, *ROBUSTNESS_THETAS})


def flows(rng, n, density=None):
    """Random nonnegative flows with some empty rows and columns."""
    density = rng.uniform(0.05, 0.6) if density is None else density
    m = np.where(rng.random((n, n)) < density, rng.exponential(1.0, (n, n)), 0.0)
    if n > 3:
        m[rng.integers(n)] = 0.0
        m[:, rng.integers(n)] = 0.0
    return m


def shares(m):
    f = FlowMatrix(0, "market", m, IndustryIndex(tuple(f"n{i}" for i in range(len(m)))))
    return input_shares(f), output_shares(f)


def check_link_bound(lm):
    if lm.theta == 0.05:
        assert lm.links.sum(axis=1).max(initial=0) <= 20


INI = """[paths]
market_edges = inputs/market_edges.csv
innovation_edges = inputs/innovation_edges.csv
concordance = inputs/concordance.csv
events = inputs/events.csv
aux = inputs/aux.csv
output_dir = out

[ingest]
anchors = 1977:2012:5

[spill]
theta = 0.05

[simulate]
n_industries = 100
seed = 0
"""


@pytest.fixture(scope="module")
def pipeline_runs(tmp_path_factory):
    """Two independent ``simulate -> all`` runs with their wall times."""
    runs = []
    for k in range(2):
        d = tmp_path_factory.mktemp(f"run{k}")
        (d / "run.ini").write_text(INI)
        ini = str(d / "run.ini")
        t0 = time.perf_counter()
        codes = (main(["simulate", "-c", ini]), main(["all", "-c", ini]))
        runs.append((d / "out", codes, time.perf_counter() - t0))
    return runs


def test_c01_share_stochasticity(criterion):
    with criterion(1, "share stochasticity"):
        t0 = time.perf_counter()
        rng = np.random.default_rng(101)
        for _ in range(100):
            m = flows(rng, int(rng.integers(2, 61)))
            up, dw = (s.matrix for s in shares(m))
            rows = m.sum(axis=1) > 0
            cols = m.sum(axis=0) > 0
            assert np.abs(up.sum(axis=1)[rows] - 1.0).max(initial=0) <= 1e-9
            assert np.abs(dw.sum(axis=0)[cols] - 1.0).max(initial=0) <= 1e-9
        assert time.perf_counter() - t0 < 5.0


def test_c02_pagerank_oracle(criterion):
    with criterion(2, "pagerank oracle"):
        t0 = time.perf_counter()
        rng = np.random.default_rng(202)
        for _ in range(50):
            m = flows(rng, int(rng.integers(2, 51)))
            pr = pagerank(m).values
            assert np.abs(pr - oracle_pagerank_dense(m)).max() <= 1e-10
        for n in (2, 3, 10, 25, 50):
            w = np.ones((n, n)) - np.eye(n)
            assert np.abs(pagerank(w).values - 1.0 / n).max() <= 1e-12
        assert time.perf_counter() - t0 < 10.0


def test_c03_spillover_oracle(criterion):
    with criterion(3, "spillover oracle"):
        rng = np.random.default_rng(303)
        for _ in range(100):
            n = int(rng.integers(2, 41))
            # integer sizes and dyadic weights keep every sum exact
            a = rng.integers(0, 10_000, n).astype(float)
            b = rng.integers(0, 10_000, n).astype(float)
            dyadic = np.where(rng.random((n, n)) < 0.4, rng.integers(0, 1025, (n, n)) / 1024.0, 0.0)
            assert np.array_equal(spillover_weighted(dyadic, a).values, oracles.spillover(dyadic, a))
            for w in shares(flows(rng, n)):
                o = w.oriented
                prev = None
                for theta in THETAS:
                    lm = threshold_links(w, theta)
                    check_link_bound(lm)
                    got = spillover(lm, a).values
                    assert np.array_equal(got, oracles.spillover(o, a, theta))
                    if prev is not None:
                        assert (got <= prev).all()
                    prev = got
                lm = threshold_links(w, 0.05)
                x, y = int(rng.integers(-5, 6)), int(rng.integers(-5, 6))
                assert np.array_equal(
                    spillover(lm, x * a + y * b).values, x * spillover(lm, a).values + y * spillover(lm, b).values
                )


def test_c04_threshold_bound(criterion, pipeline_runs):
    with criterion(4, "threshold bound"):
        rng = np.random.default_rng(404)
        for _ in range(200):
            n = int(rng.integers(2, 120))
            for w in shares(flows(rng, n, density=rng.uniform(0.05, 1.0))):
                lm = threshold_links(w, 0.05)
                assert lm.links.sum(axis=1).max(initial=0) <= 20
        for out, codes, _ in pipeline_runs:
            assert codes == (0, 0)
            counts = pd.read_csv(out / "spill" / "link_counts.csv")
            assert counts["max_links_per_row"].max() <= 20


def test_c05_network_statistics(criterion):
    with criterion(5, "network statistics"):
        rng = np.random.default_rng(505)
        done = 0
        while done < 30:
            n = int(rng.integers(3, 26))
            m = flows(rng, n)
            if not oracles.links(m):
                continue
            sizes = rng.exponential(1.0, n)
            got = network_stats(m, sizes=sizes).as_dict()
            want = oracles.network_stats(m, sizes=sizes)
            assert set(NetworkStats.FIELDS) == set(want) and len(want) == 9
            for k in NetworkStats.FIELDS:
                if math.isnan(want[k]):
                    assert math.isnan(got[k]), k
                else:
                    assert abs(got[k] - want[k]) <= 1e-9, k
            done += 1
        k3 = network_stats(np.ones((3, 3)) - np.eye(3))
        assert k3.density == 1 and k3.reciprocity == 1 and k3.transitivity == 1


def test_c06_cosine_similarity(criterion):
    with criterion(6, "cosine similarity"):
        rng = np.random.default_rng(606)
        for _ in range(30):
            m = flows(rng, int(rng.integers(2, 30)))
            m[0] = 0.0
            sim = cosine_similarity(m)
            assert np.abs(sim - oracles.cosine(m)).max() <= 1e-12
            assert (sim[0] == 0).all() and (sim[:, 0] == 0).all()


def _fe_design(rng, n, T, beta, noise):
    a = rng.normal(0, 2, n)[:, None]
    d = rng.normal(0, 2, T)[None, :]
    X = rng.normal(size=(len(beta), n, T)) + a + d
    y = np.tensordot(beta, X, axes=1) + a + d + noise * rng.normal(size=(n, T))
    cols = {"y": y.ravel(), "w": rng.uniform(0.2, 5.0, n * T)}
    cols.update({f"x{k}": X[k].ravel() for k in range(len(beta))})
    df = pd.DataFrame({"industry": np.repeat([f"g{i:03d}" for i in range(n)], T), "period": np.tile(np.arange(T), n), **cols})
    return PanelDataset(df)


def test_c07_fe_correctness(criterion):
    with criterion(7, "fe correctness"):
        rng = np.random.default_rng(707)
        for _ in range(20):
            beta = rng.normal(0, 3, int(rng.integers(1, 4)))
            names = tuple(f"x{k}" for k in range(len(beta)))
            n, T = int(rng.integers(5, 40)), int(rng.integers(3, 9))
            p = _fe_design(rng, n, T, beta, 0.0)
            res = fe_weighted(RegressionSpec("y", names, "fe_weighted", weights="w"), p)
            assert np.abs(res.params - beta).max() <= 1e-8
            p = _fe_design(rng, n, T, beta, 1.0)
            res = fe_weighted(RegressionSpec("y", names, "fe_weighted", weights="w"), p)
            d = p.data
            want = oracles.dummy_ols(
                d["y"].to_numpy(),
                d[list(names)].to_numpy(),
                d.index.get_level_values("industry").tolist(),
                d.index.get_level_values("period").tolist(),
                d["w"].to_numpy(),
            )
            assert np.abs(res.params - want).max() <= 1e-6


def _bb(panel):
    return bb_gmm(RegressionSpec("y", ("L1.y",)), panel)


def _fe_ldv(panel):
    return fe_weighted(RegressionSpec("y", ("L1.y",), "fe_weighted"), panel)


def _diagnostics(res):
    return {"sargan": res.sargan_p, "ar1": res.ar1_p, "ar2": res.ar2_p}


@pytest.mark.slow
def test_c08_gmm_recovery(criterion):
    with criterion(8, "gmm recovery"):
        t0 = time.perf_counter()
        dgp = DgpSpec(N=300, T=8, rho=0.8, fe_sd=1.0)
        bb = montecarlo(_bb, dgp, 200, master_seed=808)
        fe = montecarlo(_fe_ldv, dgp, 200, master_seed=808)
        print(f"  BB mean {bb.mean:.4f}  FE bias {fe.bias:.4f}  failures {bb.failures}")
        assert bb.n_failed == 0 and len(bb.estimates) == 200
        assert 0.73 <= bb.mean <= 0.87
        assert fe.bias < -0.05
        assert time.perf_counter() - t0 < 120.0


@pytest.mark.slow
def test_c09_test_calibration(criterion):
    with criterion(9, "test calibration"):
        dgp = DgpSpec(N=300, T=8, rho=0.5, fe_sd=1.0)
        mc = montecarlo(_bb, dgp, 500, master_seed=2024, extract=_diagnostics)
        assert mc.n_failed == 0
        sargan = mc.rate("sargan")
        first = np.array([[e["ar1"], e["ar2"]] for e in mc.extras[:200]])
        ar1_power = float((first[:, 0] < 0.05).mean())
        ar2_size = float((first[:, 1] < 0.05).mean())
        print(f"  Sargan size {sargan:.3f}  AR(2) size {ar2_size:.3f}  AR(1) power {ar1_power:.3f}")
        assert 0.02 <= sargan <= 0.09
        assert 0.01 <= ar2_size <= 0.09
        assert ar1_power > 0.80


def test_c10_instrument_combinatorics(criterion):
    with criterion(10, "instrument combinatorics"):
        pairs = oracles.level_instrument_pairs(8)
        assert len(pairs) == 21 and len({t - s for t, s in pairs}) == 6
        assert count_level_instruments(8) == 21
        assert count_level_instruments(8, collapsed=True) == 6
        y = np.arange(1.0, 17.0).reshape(2, 8)
        assert level_instruments(y).shape[2] == 21
        assert level_instruments(y, collapsed=True).shape[2] == 6
        panel = gen_ar1_panel(DgpSpec(N=40, T=8, seed=10))
        grid = to_grid(panel, ["y", "L1.y"])
        for collapsed, want in ((False, 21), (True, 6)):
            spec = RegressionSpec("y", ("L1.y",), gmm=GmmOptions(collapsed=collapsed))
            assert build_system(grid, spec, system=False).n_dep_instruments == want
            assert build_system(grid, spec, system=True).n_dep_instruments == want


def _iqr_panel(values, periods=4):
    n = len(values) // periods
    df = pd.DataFrame(
        {
            "industry": np.repeat([f"i{k:03d}" for k in range(n)], periods),
            "period": np.tile(np.arange(periods), n),
            "v": values,
        }
    )
    return PanelDataset(df)


def test_c11_transformation_ledger(criterion):
    with criterion(11, "transformation ledger"):
        rng = np.random.default_rng(1111)
        n, T = 60, 4
        df = pd.DataFrame(
            {
                "industry": np.repeat([f"i{k:03d}" for k in range(n)], T),
                "period": np.tile(np.arange(T), n),
                "u": rng.lognormal(2, 1.5, n * T),
                "v": rng.exponential(4.0, n * T),
            }
        )
        df.loc[7, "u"] = 1e7
        raw = PanelDataset(df)
        plan = TransformPlan(scale=["u", "v"], log=["u", "v"], outliers=["u", "v"], iqr_multiplier=5)
        first = transform(raw, plan)
        second = transform(raw, plan)
        assert first.data.equals(second.data)
        assert len(first.removals) >= 1
        for c in ("u", "v"):
            rep = replay(raw[c], first.provenance[c]).reindex(first.data.index)
            assert np.array_equal(rep.to_numpy(), first[c].to_numpy())

        for a in (5, 10, 30):
            # quartiles pinned at 1 and 2 by 200 values each, so IQR = 1
            lo, hi = 1.0 - a, 2.0 + a
            planted = [np.nextafter(lo, -np.inf), np.nextafter(hi, np.inf)]
            values = [1.0] * 200 + [2.0] * 200 + [lo, hi] + planted
            order = rng.permutation(len(values))
            p = _iqr_panel(np.array(values)[order])
            assert iqr_bounds(p["v"], a) == (lo, hi)
            out = remove_outliers_iqr(p, "v", a)
            removed = sorted(r.value for r in out.removals)
            assert removed == sorted(planted)
            assert len(out) == len(p) - 2
            assert lo in out["v"].to_numpy() and hi in out["v"].to_numpy()


def test_c12_end_to_end_determinism(criterion, pipeline_runs):
    with criterion(12, "end-to-end determinism"):
        (out_a, codes_a, t_a), (out_b, codes_b, t_b) = pipeline_runs
        print(f"  run times {t_a:.1f}s {t_b:.1f}s")
        assert codes_a == codes_b == (0, 0)
        ma = (out_a / "manifest.txt").read_bytes()
        mb = (out_b / "manifest.txt").read_bytes()
        assert ma == mb
        text = ma.decode()
        assert "stage.report=done" in text and "artifact.report/table.csv=sha256:" in text
        idx = pd.read_csv(out_a / "network" / "index.csv")
        assert len(idx) == 100
        assert len([line for line in text.splitlines() if "flows_" in line]) == 16
        assert t_a < 60.0 and t_b < 60.0
