import math

import numpy as np
import pytest

from boundgp.errors import SupportError, ValidationError
from boundgp.data import SynthConfig, synth_generate
from boundgp.hbp import BetaPrediction, beta_logpdf, hbp_log_density
from boundgp.metrics import (
    EvaluationReport,
    fsum,
    gaussian_log_density,
    joint_log_predictive_likelihood,
    nmse,
    write_results_csv,
)


class FixedGaussian:
    def __init__(self, mean=0.0, var=1.0):
        self.mean, self.var = mean, var

    def pointwise_log_predictive(self, x, y):
        return gaussian_log_density(y, self.mean, self.var)


class FixedBeta:
    def __init__(self, a, b):
        self.pred = BetaPrediction(a, b, a / (a + b), 0.025, 0.975)

    def pointwise_log_predictive(self, x, y):
        return np.array([hbp_log_density(self.pred, v) for v in y])


def test_nmse_examples():
    assert nmse([0, 1], [0, 1]) == 0.0
    assert nmse([0, 1], [0, 0]) == 200.0
    assert nmse([0, 1], [0.5, 0.5]) == pytest.approx(200 * math.sqrt(0.5), rel=1e-15)
    assert nmse([0, 1], [0.5, 0.5]) == pytest.approx(141.42, abs=5e-3)


def test_nmse_errors():
    with pytest.raises(ValidationError):
        nmse([1, 1, 1], [0, 1, 2])
    with pytest.raises(ValidationError):
        nmse([0, 1], [0, 1, 2])
    with pytest.raises(ValidationError):
        nmse([1], [1])


def test_nmse_permutation_invariant(rng):
    y, yh = rng.normal(size=100), rng.normal(size=100)
    perm = rng.permutation(100)
    assert nmse(y[perm], yh[perm]) == pytest.approx(nmse(y, yh), rel=1e-14)


def test_jll_examples():
    assert joint_log_predictive_likelihood(FixedGaussian(), [0.0], [0.0]) == pytest.approx(-0.91894, abs=1e-5)
    assert joint_log_predictive_likelihood(FixedGaussian(), [0.0, 1.0], [0.0, 0.0]) == pytest.approx(-1.83788, abs=1e-5)
    assert joint_log_predictive_likelihood(FixedBeta(1.0, 1.0), np.zeros(7), np.linspace(0.1, 0.9, 7)) == 0.0


def test_jll_support_violation_lists_indices():
    with pytest.raises(SupportError) as exc:
        joint_log_predictive_likelihood(FixedGaussian(), [0, 1, 2], [0.0, np.nan, np.inf])
    assert exc.value.indices == [1, 2]


def test_jll_additive_over_partitions(rng):
    y = rng.normal(size=1001)
    x = np.zeros_like(y)
    m = FixedGaussian(0.3, 2.0)
    whole = joint_log_predictive_likelihood(m, x, y)
    idx = rng.permutation(y.size)
    parts = [idx[:17], idx[17:400], idx[400:]]
    pieces = [joint_log_predictive_likelihood(m, x[p], y[p]) for p in parts]
    pointwise = np.concatenate([m.pointwise_log_predictive(x[p], y[p]) for p in parts])
    # correctly rounded summation: totals do not depend on order or partitioning
    assert fsum(pointwise) == whole
    assert fsum(pieces) == pytest.approx(whole, abs=1e-12)


class PerPointBeta:
    def __init__(self, a, b):
        self.a, self.b = a, b

    def pointwise_log_predictive(self, x, y):
        return beta_logpdf(y, self.a, self.b)


def test_true_beta_beats_moment_matched_gaussian():
    for seed in range(50):
        ds = synth_generate(SynthConfig(n=500, seed=seed))
        a, b = ds.truth["alpha"], ds.truth["beta"]
        mean = a / (a + b)
        var = a * b / ((a + b) ** 2 * (a + b + 1))
        x, y = ds.wind_speed, ds.power
        true_jll = joint_log_predictive_likelihood(PerPointBeta(a, b), x, y)
        gauss_jll = joint_log_predictive_likelihood(FixedGaussian(mean, var), x, y)
        assert true_jll >= gauss_jll, seed


def test_report_invariants_and_csv(tmp_path):
    with pytest.raises(ValidationError):
        EvaluationReport("hbp", 0.5, 1.0, "original", 0)
    with pytest.raises(ValidationError):
        EvaluationReport("hbp", -1.0, 1.0, "original", 3)
    r = EvaluationReport("warped", 0.4, -12.0, "warped", 3, clipped_fraction=0.1)
    r.write_json(tmp_path / "r.json")
    assert EvaluationReport.read_json(tmp_path / "r.json") == r
    write_results_csv([r], tmp_path / "results.csv")
    lines = (tmp_path / "results.csv").read_text().splitlines()
    assert lines == ["Model,NMSE,JLL,Space", "warped,0.4,-12.0,warped"]
