"""Panel estimators and their diagnostics."""

from duplexnet.econ.diagnostics import ar_statistic, ar_test, sargan_statistic, sargan_test
from duplexnet.econ.fe import fe_weighted
from duplexnet.econ.gmm import ab_gmm, bb_gmm
from duplexnet.econ.instruments import count_level_instruments
from duplexnet.econ.results import (
    EstimationResult,
    GmmOptions,
    RegressionSpec,
    significance_code,
    significance_codes,
)

ESTIMATORS = {"fe_weighted": fe_weighted, "ab_diff": ab_gmm, "bb_sys": bb_gmm}


def estimate(spec: RegressionSpec, panel) -> EstimationResult:
    return ESTIMATORS[spec.estimator](spec, panel)


__all__ = [
    "EstimationResult",
    "GmmOptions",
    "RegressionSpec",
    "ab_gmm",
    "ar_statistic",
    "ar_test",
    "bb_gmm",
    "count_level_instruments",
    "estimate",
    "fe_weighted",
    "sargan_statistic",
    "sargan_test",
    "significance_code",
    "significance_codes",
]
