"""NMSE and joint log predictive likelihood, plus the per-model report row."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import SupportError, ValidationError


def nmse(y, y_hat) -> float:
    """100 / (N var(y)) * sqrt(sum (y - y_hat)^2), var the biased variance of y.

    The square root sits outside the sum exactly as in the published
    definition, so the value scales like 1/sqrt(N) rather than being a true
    mean squared error.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    y_hat = np.asarray(y_hat, dtype=float).reshape(-1)
    if y.size != y_hat.size:
        raise ValidationError(f"length mismatch: {y.size} targets vs {y_hat.size} predictions")
    if y.size < 2:
        raise ValidationError("nmse needs at least two points")
    var = float(np.var(y))
    if var == 0.0:
        raise ValidationError("degenerate variance: targets are constant")
    return 100.0 / (y.size * var) * math.sqrt(float(np.sum((y - y_hat) ** 2)))


def gaussian_log_density(y, mean, var):
    y, mean, var = (np.asarray(a, dtype=float) for a in (y, mean, var))
    return -0.5 * np.log(2.0 * np.pi * var) - 0.5 * (y - mean) ** 2 / var


def fsum(values) -> float:
    """Correctly rounded sum, so totals do not depend on accumulation order."""
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


def pointwise_log_predictive(model, test_x, test_y):
    test_x = np.atleast_1d(np.asarray(test_x, dtype=float))
    test_y = np.atleast_1d(np.asarray(test_y, dtype=float))
    if test_x.size == 0 or test_x.size != test_y.size:
        raise ValidationError("test set must be non-empty with matching x and y lengths")
    bad = ~np.isfinite(test_y)
    if np.any(bad):
        raise SupportError("non-finite test targets", np.flatnonzero(bad))
    return model.pointwise_log_predictive(test_x, test_y)


def joint_log_predictive_likelihood(model, test_x, test_y) -> float:
    """Sum over test points of log p(y_i | x_i) under the model's predictive."""
    return fsum(pointwise_log_predictive(model, test_x, test_y))


@dataclass
class EvaluationReport:
    model_name: str
    nmse: float
    jll: float
    space: str
    n_test: int
    clipped_fraction: float = 0.0
    jll_jacobian: float | None = None
    nmse_original: float | None = None

    def __post_init__(self):
        if self.n_test < 1:
            raise ValidationError("n_test must be >= 1")
        if not self.nmse >= 0:
            raise ValidationError("nmse must be non-negative")
        if self.space not in ("original", "warped"):
            raise ValidationError(f"space must be 'original' or 'warped', got {self.space!r}")

    def to_dict(self):
        return asdict(self)

    def write_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def read_json(cls, path):
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


def evaluate(model, test_x, test_y) -> EvaluationReport:
    """Score a fitted model on held-out normalised power in its own evaluation space."""
    test_y = np.asarray(test_y, dtype=float)
    targets = model.evaluation_targets(test_y)
    pred = model.predict_mean(test_x)
    jll = joint_log_predictive_likelihood(model, test_x, test_y)
    report = EvaluationReport(model.name, nmse(targets, pred), jll, model.space, int(test_y.size))
    if model.space == "warped":
        from .warped import clipped_fraction, inv_logit

        report.clipped_fraction = clipped_fraction(test_y, model.cfg)
        report.jll_jacobian = fsum(model.pointwise_log_predictive_original(test_x, test_y))
        report.nmse_original = nmse(test_y, inv_logit(pred))
    return report


RESULT_COLUMNS = ("Model", "NMSE", "JLL", "Space")


def write_results_csv(reports, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in reports:
            w.writerow([r.model_name, repr(float(r.nmse)), repr(float(r.jll)), r.space])
