import io

import numpy as np
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from duplexnet.errors import DomainError, EmptyCell, GridMismatch, TooFewObservations, UnknownClass, ZeroDispersion
from duplexnet.panel import (
    GroupSpec,
    PanelDataset,
    TransformPlan,
    add_lags,
    assemble,
    iqr_bounds,
    lag,
    log1p,
    median_split,
    read_class_file,
    remove_outliers_iqr,
    replay,
    scale_by_sd,
    subperiod_specs,
    subset,
    transform,
)


def frame(inds, periods, **cols):
    idx = pd.MultiIndex.from_product([inds, periods], names=["industry", "period"])
    return pd.DataFrame(cols, index=idx)


def random_panel(seed, n=20, periods=(1977, 1982, 1987, 1992)):
    rng = np.random.default_rng(seed)
    k = n * len(periods)
    return PanelDataset(
        frame(
            [f"i{i:02d}" for i in range(n)],
            list(periods),
            a=rng.lognormal(2, 1, k),
            b=rng.exponential(3, k),
            prod_labor_share=rng.uniform(0.3, 0.9, k),
        )
    )


class TestAssemble:
    def test_balanced_drops_incomplete(self):
        a = frame(["x", "y"], [1, 2], size_market=[1.0, 2.0, 3.0, np.nan])
        b = frame(["x", "y"], [1, 2], size_innovation=[1.0, 1.0, 1.0, 1.0])
        p = assemble([a, b])
        assert p.industries == ["x"]

    def test_positive_sizes(self):
        a = frame(["x", "y"], [1, 2], size_market=[1.0, 2.0, 3.0, 0.0])
        assert assemble([a]).industries == ["x"]
        assert assemble([a], balanced=False).industries == ["x", "y"]

    def test_grid_mismatch(self):
        with pytest.raises(GridMismatch):
            assemble([frame(["x"], [1, 2], a=[1.0, 2.0]), frame(["x"], [1, 3], b=[1.0, 2.0])])

    def test_required_subset(self):
        a = frame(["x", "y"], [1, 2], size_market=[1.0, 2.0, 3.0, 4.0], extra=[np.nan] * 4)
        assert assemble([a], required=["size_market"]).industries == ["x", "y"]


class TestTransforms:
    def test_scale_ddof1(self):
        s, sd = scale_by_sd(pd.Series([1.0, 2.0, 3.0, np.nan], name="v"))
        assert sd == pytest.approx(1.0)
        with pytest.raises(ZeroDispersion):
            scale_by_sd(pd.Series([2.0, 2.0]))

    def test_log1p_domain(self):
        with pytest.raises(DomainError):
            log1p(pd.Series([0.0, -1.0], name="v"))

    def test_iqr_bounds(self):
        lo, hi = iqr_bounds(np.array([1.0, 2.0, 3.0, 4.0, 5.0]), 1.5)
        assert (lo, hi) == (-1.0, 7.0)
        with pytest.raises(TooFewObservations):
            iqr_bounds(np.array([1.0, 2.0, 3.0]), 1.5)

    def test_plan_order_and_exemption(self):
        p = random_panel(0)
        out = transform(p, TransformPlan(scale=["a"], log=["a", "prod_labor_share"]))
        raw = p["a"]
        expected = np.log1p(raw / raw.std(ddof=1))
        np.testing.assert_array_equal(out["a"].to_numpy(), expected.to_numpy())
        np.testing.assert_array_equal(out["prod_labor_share"].to_numpy(), p["prod_labor_share"].to_numpy())
        assert [s["op"] for s in out.provenance["a"]] == ["scale_by_sd", "log1p"]
        assert out.provenance["prod_labor_share"] == []

    @pytest.mark.parametrize("a", [5, 10, 30])
    def test_outliers_rowwise_with_log(self, a):
        p = random_panel(1)
        # quartiles do not move once the planted value sits above Q3
        p.data.loc[("i03", 1982), "b"] = 1e12
        lo, hi = iqr_bounds(p["b"], a)
        p.data.loc[("i03", 1982), "b"] = hi + 1.0
        assert iqr_bounds(p["b"], a) == (lo, hi)
        out = remove_outliers_iqr(p, "b", a)
        assert ("i03", 1982) not in out.data.index
        assert len(out) == len(p) - 1
        assert out.removals[0].industry == "i03" and out.removals[0].column == "b"

    @given(st.integers(0, 10_000), st.sampled_from([5.0, 10.0, 30.0]))
    def test_replay_bit_exact(self, seed, a):
        p = random_panel(seed)
        p.data.loc[("i00", 1977), "a"] = 1e6  # forces a removal at small a
        out = transform(p, TransformPlan(scale=["a", "b"], log=["a", "b"], outliers=["a", "b"], iqr_multiplier=a))
        for c in ("a", "b"):
            rep = replay(p[c], out.provenance[c])
            # rows dropped because of another column are not part of this column's ledger
            rep = rep.reindex(out.data.index)
            assert np.array_equal(rep.to_numpy(), out[c].to_numpy())

    def test_csv_roundtrip(self, tmp_path):
        p = transform(random_panel(2), TransformPlan(scale=["a"], log=["a"], outliers=["a"], iqr_multiplier=5))
        p.write_csv(tmp_path / "panel.csv")
        back = PanelDataset.read_csv(tmp_path / "panel.csv")
        pd.testing.assert_frame_equal(back.data, p.data, check_exact=True)
        assert back.provenance == p.provenance
        assert len(back.removals) == len(p.removals)
        assert (tmp_path / "panel.provenance.json").exists()


class TestLags:
    def test_gap_gives_nan(self):
        x = frame(["x"], [1977, 1982, 1992], v=[1.0, 2.0, 3.0])["v"]
        out = lag(x, 1, grid=[1977, 1982, 1987, 1992])
        assert out.name == "L1.v"
        assert np.isnan(out.iloc[0]) and out.iloc[1] == 1.0 and np.isnan(out.iloc[2])

    def test_k2_and_add_lags(self):
        p = PanelDataset(frame(["x", "y"], [1, 2, 3], v=[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]))
        out = add_lags(p, ["v"], 2)
        assert out["L2.v"].tolist()[2] == 1.0 and out["L2.v"].tolist()[5] == 4.0
        assert np.isnan(out["L2.v"].tolist()[4])

    @given(arrays(np.float64, 12, elements=st.floats(-1e6, 1e6)))
    def test_lag_shifts_within_industry(self, v):
        p = frame(["a", "b", "c"], [0, 1, 2, 3], v=v)
        out = lag(p["v"], 1).to_numpy().reshape(3, 4)
        np.testing.assert_array_equal(out[:, 1:], v.reshape(3, 4)[:, :-1])
        assert np.isnan(out[:, 0]).all()


class TestGroups:
    def test_median_split_strict(self):
        p = PanelDataset(frame(["a", "b", "c", "d"], [1], v=[1.0, 2.0, 3.0, 4.0]))
        above, below = median_split(p, "v")
        assert above == ["c", "d"] and below == ["a", "b"]
        p = PanelDataset(frame(["a", "b", "c"], [1], v=[1.0, 2.0, 3.0]))
        above, below = median_split(p, "v")
        assert above == ["c"] and below == ["a", "b"]

    def test_prefix_class_periods(self):
        p = PanelDataset(frame(["311", "325", "334"], [1977, 1992, 2012], v=np.arange(9.0)))
        assert subset(p, GroupSpec("31", "prefix", prefix="31")).industries == ["311"]
        classes = read_class_file(io.StringIO("industry,class\n311,low\n325,high\n334,high\n"))
        hi = subset(p, GroupSpec("hi", "class", classes=classes, class_name="high"))
        assert hi.industries == ["325", "334"]
        with pytest.raises(UnknownClass):
            subset(p, GroupSpec("x", "class", classes=classes, class_name="medium"))
        with pytest.raises(EmptyCell):
            subset(p, GroupSpec("x", "prefix", prefix="9"))
        early, late = (subset(p, g) for g in subperiod_specs())
        assert early.periods == [1977, 1992] and late.periods == [1992, 2012]
