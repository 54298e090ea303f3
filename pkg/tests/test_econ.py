import io

import numpy as np
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from duplexnet.econ import (
    GmmOptions,
    RegressionSpec,
    ab_gmm,
    ar_test,
    bb_gmm,
    count_level_instruments,
    estimate,
    fe_weighted,
    sargan_statistic,
    sargan_test,
    significance_code,
)
from duplexnet.econ.instruments import level_instruments
from duplexnet.errors import InsufficientPeriods, JustIdentified, NonPositiveWeight, RankDeficient
from duplexnet.panel import PanelDataset
from duplexnet.synthlab import DgpSpec, gen_ar1_panel


def fe_panel(seed, n=30, T=6, beta=(1.5, -0.7), noise=0.0):
    rng = np.random.default_rng(seed)
    a = rng.normal(0, 2, n)[:, None]
    d = rng.normal(0, 2, T)[None, :]
    x1 = rng.normal(size=(n, T)) + a
    x2 = rng.normal(size=(n, T)) + d
    y = beta[0] * x1 + beta[1] * x2 + a + d + noise * rng.normal(size=(n, T))
    return PanelDataset(
        pd.DataFrame(
            {
                "industry": np.repeat([f"g{i:03d}" for i in range(n)], T),
                "period": np.tile(np.arange(T), n),
                "y": y.ravel(),
                "x1": x1.ravel(),
                "x2": x2.ravel(),
                "w": rng.uniform(0.5, 3.0, n * T),
            }
        )
    )


class TestFixedEffects:
    @given(st.integers(0, 10_000), st.floats(-5, 5), st.floats(-5, 5))
    def test_exact_recovery(self, seed, b1, b2):
        p = fe_panel(seed, beta=(b1, b2))
        res = fe_weighted(RegressionSpec("y", ("x1", "x2"), "fe_weighted", weights="w"), p)
        np.testing.assert_allclose(res.params, [b1, b2], atol=1e-8)

    @given(st.integers(0, 10_000))
    def test_matches_dummy_ols(self, seed):
        p = fe_panel(seed, noise=1.0)
        res = fe_weighted(RegressionSpec("y", ("x1", "x2"), "fe_weighted", weights="w"), p)
        d = p.data
        want = oracles.dummy_ols(
            d["y"].to_numpy(),
            d[["x1", "x2"]].to_numpy(),
            d.index.get_level_values("industry").tolist(),
            d.index.get_level_values("period").tolist(),
            d["w"].to_numpy(),
        )
        np.testing.assert_allclose(res.params, want, atol=1e-6)

    def test_twoway_se_by_hand(self):
        p = fe_panel(3, noise=1.0)
        res = fe_weighted(RegressionSpec("y", ("x1", "x2"), "fe_weighted", weights="w", se="twoway"), p)
        d = p.data
        ind = d.index.get_level_values("industry").to_numpy()
        per = d.index.get_level_values("period").to_numpy()
        # dummy-variable regression gives the same residuals and within-scores
        Xfull = np.column_stack([d[["x1", "x2"]].to_numpy(), pd.get_dummies(ind).to_numpy(float), pd.get_dummies(per).to_numpy(float)[:, 1:]])
        w = d["w"].to_numpy()
        y = d["y"].to_numpy()
        coef, *_ = np.linalg.lstsq(Xfull * np.sqrt(w)[:, None], y * np.sqrt(w), rcond=None)
        e = y - Xfull @ coef
        # partial the dummies out of x to get the within regressors
        D = Xfull[:, 2:]
        g, *_ = np.linalg.lstsq(D * np.sqrt(w)[:, None], d[["x1", "x2"]].to_numpy() * np.sqrt(w)[:, None], rcond=None)
        xt = d[["x1", "x2"]].to_numpy() - D @ g
        s = xt * (w * e)[:, None]
        n = len(y)

        def meat(labels):
            G = np.unique(labels)
            m = sum(np.outer(s[labels == c].sum(0), s[labels == c].sum(0)) for c in G)
            return m * len(G) / (len(G) - 1)

        Binv = np.linalg.inv((xt * w[:, None]).T @ xt)
        V = Binv @ (meat(ind) + meat(per) - s.T @ s * n / (n - 1)) @ Binv
        vals, vecs = np.linalg.eigh(V)
        V = (vecs * np.clip(vals, 0, None)) @ vecs.T
        np.testing.assert_allclose(res.std_errors, np.sqrt(np.diag(V)), rtol=1e-8)

    def test_collinear(self):
        p = fe_panel(0)
        p.data["x3"] = 2 * p.data["x1"]
        with pytest.raises(RankDeficient):
            fe_weighted(RegressionSpec("y", ("x1", "x3"), "fe_weighted"), p)

    def test_nonpositive_weight(self):
        p = fe_panel(0)
        p.data.iloc[0, p.data.columns.get_loc("w")] = 0.0
        with pytest.raises(NonPositiveWeight):
            fe_weighted(RegressionSpec("y", ("x1",), "fe_weighted", weights="w"), p)


@pytest.mark.parametrize(
    "p,code",
    [(0.0009, "***"), (0.001, "**"), (0.0099, "**"), (0.01, "*"), (0.049, "*"), (0.05, "."), (0.099, "."), (0.1, ""), (np.nan, "")],
)
def test_significance_thresholds_strict(p, code):
    assert significance_code(p) == code


class TestInstruments:
    @pytest.mark.parametrize("T", [3, 4, 5, 8, 10])
    @pytest.mark.parametrize("max_lag", [None, 1, 2, 3])
    def test_count_matches_enumeration(self, T, max_lag):
        pairs = oracles.level_instrument_pairs(T, max_lag)
        assert count_level_instruments(T, max_lag) == len(pairs)
        z = level_instruments(np.arange(1.0, 3 * T + 1).reshape(3, T), max_lag)
        assert z.shape[2] == len(pairs)
        # each column holds y[s] on the row of equation period t, nothing else
        got = set()
        for c in range(z.shape[2]):
            (r,) = np.flatnonzero(z[0, :, c])
            got.add((r + 2, int(z[0, r, c]) - 1))
        assert got == set(pairs)
        assert count_level_instruments(T, max_lag, collapsed=True) == len({t - s for t, s in pairs})

    def test_reference_counts(self):
        assert count_level_instruments(8) == 21
        assert count_level_instruments(8, collapsed=True) == 6

    def test_built_systems(self):
        p = gen_ar1_panel(DgpSpec(N=50, T=8, seed=1))
        spec = RegressionSpec("y", ("L1.y",))
        R = 6
        assert ab_gmm(spec, p).n_instruments == 21 + R
        # system: level-equation Δy instruments, a constant and level time dummies
        assert bb_gmm(spec, p).n_instruments == 21 + R + R
        col = RegressionSpec("y", ("L1.y",), gmm=GmmOptions(collapsed=True))
        assert bb_gmm(col, p).n_instruments == 6 + 1 + R


@pytest.fixture(scope="module")
def big():
    return gen_ar1_panel(DgpSpec(N=2000, T=8, rho=0.5, beta=(1.0,), seed=11))


class TestGmm:
    @pytest.mark.parametrize("fn", [ab_gmm, bb_gmm])
    @pytest.mark.parametrize("steps", [1, 2])
    def test_recovery(self, big, fn, steps):
        spec = RegressionSpec("y", ("L1.y", "x1"), gmm=GmmOptions(steps=steps))
        res = fn(spec, big)
        assert res.coef("L1.y") == pytest.approx(0.5, abs=0.05)
        assert res.coef("x1") == pytest.approx(1.0, abs=0.05)
        assert res.ar1_p < 0.01
        assert res.ar2_p > 0.001
        assert 0 <= res.sargan_p <= 1

    def test_windmeijer_inflates(self, big):
        plain = bb_gmm(RegressionSpec("y", ("L1.y", "x1"), gmm=GmmOptions(steps=2)), big)
        corr = bb_gmm(RegressionSpec("y", ("L1.y", "x1"), gmm=GmmOptions(steps=2, windmeijer=True)), big)
        assert corr.se("L1.y") > plain.se("L1.y")
        assert corr.coef("L1.y") == plain.coef("L1.y")

    def test_sargan_forms(self, big):
        res = bb_gmm(RegressionSpec("y", ("L1.y", "x1")), big)
        j, df = sargan_statistic(res)
        s, df2 = sargan_statistic(res, "onestep")
        assert df == df2 == res.n_instruments - len(res.names)
        assert j > 0 and s > 0
        assert sargan_test(res) == res.sargan_p
        with pytest.raises(ValueError):
            sargan_statistic(res, "other")

    def test_just_identified(self):
        p = gen_ar1_panel(DgpSpec(N=100, T=3, seed=2))
        res = ab_gmm(RegressionSpec("y", ("L1.y",)), p)
        assert np.isnan(res.sargan_p)
        with pytest.raises(JustIdentified):
            sargan_statistic(res)

    def test_too_few_periods(self):
        with pytest.raises(InsufficientPeriods):
            bb_gmm(RegressionSpec("y", ("L1.y",)), gen_ar1_panel(DgpSpec(N=10, T=2)))

    def test_rank_deficient(self):
        p = gen_ar1_panel(DgpSpec(N=100, T=6, beta=(1.0,), seed=3))
        p.data["x2"] = p.data["x1"]
        with pytest.raises(RankDeficient):
            bb_gmm(RegressionSpec("y", ("L1.y", "x1", "x2")), p)

    def test_needs_lagged_dependent(self):
        with pytest.raises(ValueError):
            estimate(RegressionSpec("y", ("x1",)), gen_ar1_panel(DgpSpec(N=10, T=5, beta=(1.0,))))

    def test_ar_uses_stored_result(self, big):
        res = bb_gmm(RegressionSpec("y", ("L1.y", "x1")), big)
        assert ar_test(res, 1) == res.ar1_p


def test_csv_ten_significant_digits():
    res = fe_weighted(RegressionSpec("y", ("x1", "x2"), "fe_weighted"), fe_panel(1, noise=1.0))
    coef, diag = io.StringIO(), io.StringIO()
    res.write_csv(coef, diag)
    rows = [line.split(",") for line in coef.getvalue().splitlines()]
    assert rows[0] == ["regressor", "coef", "se", "code"]
    for r, b in zip(rows[1:], res.params):
        assert r[1] == format(b, ".10g")
        assert abs(float(r[1]) - b) <= 1e-9 * abs(b)
    head, vals = diag.getvalue().splitlines()
    assert head.split(",")[:3] == ["AR1", "AR2", "Sargan"]
    assert vals.split(",")[0] == "NA"
