"""SCADA ingestion, cleaning, normalisation, splitting and a synthetic generator.

The synthetic generator draws Beta-distributed power at uniform wind speeds
around a logistic power curve, with concentration lowest mid-curve, and
keeps the generating shapes as ground truth.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, InsufficientDataError, ValidationError

log = logging.getLogger(__name__)

SPLITS = ("train", "test", "validation")
INTERIOR_EPS = 1e-4


@dataclass(frozen=True)
class ScadaRecord:
    wind_speed: float
    power: float
    flags: frozenset = frozenset()


class RecordList(list):
    """Plain list of records that also remembers how many rows were dropped."""

    dropped = 0


@dataclass(frozen=True)
class Normalization:
    power_min: float
    power_max: float
    speed_min: float
    speed_max: float

    def __post_init__(self):
        if not (self.power_min < self.power_max and self.speed_min < self.speed_max):
            raise ValidationError(f"normalization bounds need min < max: {self}")

    def power(self, p):
        return (np.asarray(p, dtype=float) - self.power_min) / (self.power_max - self.power_min)

    def power_inverse(self, p):
        return np.asarray(p, dtype=float) * (self.power_max - self.power_min) + self.power_min

    def speed(self, x):
        return (np.asarray(x, dtype=float) - self.speed_min) / (self.speed_max - self.speed_min)

    def speed_inverse(self, x):
        return np.asarray(x, dtype=float) * (self.speed_max - self.speed_min) + self.speed_min

    def to_dict(self):
        return {k: float(getattr(self, k)) for k in ("power_min", "power_max", "speed_min", "speed_max")}


@dataclass
class ScadaDataset:
    wind_speed: np.ndarray
    power: np.ndarray
    normalization: Normalization
    flags: list = field(default_factory=list)
    split: np.ndarray | None = None
    truth: dict | None = None
    removed: dict = field(default_factory=dict)

    def __len__(self):
        return self.wind_speed.size

    @property
    def records(self):
        flags = self.flags or [frozenset()] * len(self)
        return [ScadaRecord(float(x), float(p), f) for x, p, f in zip(self.wind_speed, self.power, flags)]

    def mask(self, name):
        if self.split is None:
            raise ValidationError("dataset has not been split")
        if name not in SPLITS:
            raise ValidationError(f"unknown split {name!r}")
        return self.split == name

    def part(self, name, interior=False, eps=INTERIOR_EPS):
        """(wind_speed, power) for one split; ``interior`` maps power into (0, 1)."""
        m = self.mask(name)
        p = self.power[m]
        return self.wind_speed[m], interior_power(p, eps) if interior else p

    def sizes(self):
        return tuple(int(np.count_nonzero(self.split == s)) for s in SPLITS)


def interior_power(p, eps=INTERIOR_EPS):
    """max(eps, min(1 - eps, p)) elementwise."""
    return np.clip(np.asarray(p, dtype=float), eps, 1.0 - eps)


# ------------------------------------------------------------------ CSV I/O


def load_scada_csv(path) -> RecordList:
    """Read ``wind_speed`` and ``power`` columns (any case) from a CSV file.

    Rows with a missing or non-finite field are dropped; the count is kept
    on the returned list as ``.dropped``.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    out = RecordList()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected a header row") from None
        names = [h.strip().lower() for h in header]
        missing = [c for c in ("wind_speed", "power") if c not in names]
        if missing:
            raise DataError(f"{path}, row 1: missing column(s) {missing}; header was {header}")
        ix, ip = names.index("wind_speed"), names.index("power")
        for rowno, row in enumerate(reader, start=2):
            try:
                x = float(row[ix])
                p = float(row[ip])
            except (ValueError, IndexError):
                out.dropped += 1
                continue
            if not (math.isfinite(x) and math.isfinite(p)):
                out.dropped += 1
                continue
            out.append(ScadaRecord(x, p))
    if out.dropped:
        log.warning("%s: dropped %d row(s) with missing or non-finite fields", path, out.dropped)
    if not out:
        log.warning("%s: no data rows", path)
    return out


def _fmt(v):
    return repr(float(v))


def write_dataset_csv(dataset: ScadaDataset, path, with_split=False):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["wind_speed", "power"] + (["split"] if with_split else []))
        for i in range(len(dataset)):
            row = [_fmt(dataset.wind_speed[i]), _fmt(dataset.power[i])]
            if with_split:
                row.append(dataset.split[i])
            w.writerow(row)


def write_truth_csv(dataset: ScadaDataset, path):
    if dataset.truth is None:
        raise ValidationError("dataset carries no ground truth")
    t = dataset.truth
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "m", "alpha", "beta"])
        for row in zip(t["x"], t["m"], t["alpha"], t["beta"]):
            w.writerow([_fmt(v) for v in row])


# ------------------------------------------------------------ preprocessing


@dataclass
class CleaningRules:
    """Outlier and curtailment rules, in per-unit power.

    ``power_range`` is the raw-unit interval treated as [0, 1] for the
    tolerance band. ``normalization="minmax"`` rescales survivors to span
    exactly [0, 1]; ``"fixed"`` keeps ``power_range``/``speed_range`` as the
    map and clips the in-band overshoot.
    """

    power_range: tuple = (0.0, 1.0)
    tolerance: float = 0.01
    curtail_power: float = 0.15
    curtail_quantile: float = 0.6
    rated_power: float = 0.9
    normalization: str = "minmax"
    speed_range: tuple | None = None
    min_records: int = 10

    def __post_init__(self):
        if self.normalization not in ("minmax", "fixed"):
            raise ValidationError(f"normalization must be 'minmax' or 'fixed', got {self.normalization!r}")
        lo, hi = self.power_range
        if not lo < hi:
            raise ValidationError("power_range needs lo < hi")


def _arrays(records):
    if isinstance(records, ScadaDataset):
        return records.wind_speed.copy(), records.power.copy()
    x = np.array([r.wind_speed for r in records], dtype=float)
    p = np.array([r.power for r in records], dtype=float)
    return x, p


def preprocess(records, rules: CleaningRules | None = None) -> ScadaDataset:
    """Clean and normalise; returns an unsplit dataset.

    Removed: power outside the tolerance band around ``power_range``, and
    curtailment, i.e. per-unit power below ``curtail_power`` at wind speeds
    above the ``curtail_quantile`` quantile of speeds whose power exceeds
    ``rated_power``.
    """
    rules = rules or CleaningRules()
    x, p = _arrays(records)
    if x.size < rules.min_records:
        raise InsufficientDataError(f"need at least {rules.min_records} records, got {x.size}")
    truth = getattr(records, "truth", None)
    lo, hi = rules.power_range
    pu = (p - lo) / (hi - lo)
    outlier = (pu < -rules.tolerance) | (pu > 1.0 + rules.tolerance)
    ok = ~outlier
    rated = ok & (pu > rules.rated_power)
    curtailed = np.zeros_like(ok)
    if np.any(rated):
        threshold = np.quantile(x[rated], rules.curtail_quantile)
        curtailed = ok & (pu < rules.curtail_power) & (x > threshold)
    keep = ok & ~curtailed
    removed = {"outlier": int(outlier.sum()), "curtailed": int(curtailed.sum())}
    log.info("preprocess: removed %d outlier(s), %d curtailed record(s)", removed["outlier"], removed["curtailed"])
    if keep.sum() < rules.min_records:
        raise InsufficientDataError(f"only {int(keep.sum())} records survive cleaning (need {rules.min_records})")

    xs, ps = x[keep], p[keep]
    if rules.normalization == "minmax":
        smin, smax = (float(xs.min()), float(xs.max())) if rules.speed_range is None else rules.speed_range
        norm = Normalization(float(ps.min()), float(ps.max()), smin, smax)
    else:
        smin, smax = rules.speed_range if rules.speed_range is not None else (float(xs.min()), float(xs.max()))
        norm = Normalization(float(lo), float(hi), float(smin), float(smax))
    pn = norm.power(ps)
    xn = norm.speed(xs)
    flags = [frozenset()] * xs.size
    clipped = (pn < 0.0) | (pn > 1.0)
    if np.any(clipped):
        flags = [frozenset({"clipped"}) if c else frozenset() for c in clipped]
        pn = np.clip(pn, 0.0, 1.0)
    removed["clipped"] = int(clipped.sum())
    if truth is not None:
        truth = {k: np.asarray(v)[keep] for k, v in truth.items()}
    return ScadaDataset(xn, pn, norm, flags=flags, truth=truth, removed=removed)


def flag_records(records, rules: CleaningRules | None = None):
    """Per-record cleaning flags without removing anything (for inspection)."""
    rules = rules or CleaningRules()
    x, p = _arrays(records)
    lo, hi = rules.power_range
    pu = (p - lo) / (hi - lo)
    outlier = (pu < -rules.tolerance) | (pu > 1.0 + rules.tolerance)
    rated = ~outlier & (pu > rules.rated_power)
    curtailed = np.zeros_like(outlier)
    if np.any(rated):
        threshold = np.quantile(x[rated], rules.curtail_quantile)
        curtailed = ~outlier & (pu < rules.curtail_power) & (x > threshold)
    out = []
    for o, c in zip(outlier, curtailed):
        f = set()
        if o:
            f.add("outlier")
        if c:
            f.add("curtailed")
        out.append(frozenset(f))
    return out


def split_three(dataset: ScadaDataset, seed: int) -> ScadaDataset:
    """Seeded shuffle, then contiguous thirds to train/test/validation.

    Sizes differ by at most one; any remainder goes to train first.
    """
    n = len(dataset)
    if n < 3:
        raise InsufficientDataError(f"need at least 3 records to split, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    split = np.empty(n, dtype=object)
    for name, idx in zip(SPLITS, np.array_split(perm, 3)):
        split[idx] = name
    return ScadaDataset(dataset.wind_speed, dataset.power, dataset.normalization, list(dataset.flags),
                        split.astype(str), dataset.truth, dict(dataset.removed))


# ---------------------------------------------------------------- synthetic


@dataclass
class SynthConfig:
    n: int = 15_000
    cut_in: float = 0.1
    rated_onset: float = 0.7
    steepness: float = 8.0
    concentration_peak: float = 100.0
    concentration_floor: float = 10.0
    seed: int = 7

    def validate(self):
        problems = []
        if int(self.n) < 10:
            problems.append("n must be >= 10")
        if not self.cut_in < self.rated_onset:
            problems.append("cut_in must be < rated_onset")
        if not self.steepness > 0:
            problems.append("steepness must be > 0")
        if not (self.concentration_peak > 2 and self.concentration_floor > 2):
            problems.append("concentrations must exceed 2")
        if self.concentration_floor > self.concentration_peak:
            problems.append("concentration_floor must be <= concentration_peak")
        if problems:
            raise ValidationError("; ".join(problems))
        return self


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def synth_mean(cfg: SynthConfig, x):
    """Generating mean power at wind speed ``x``."""
    x = np.asarray(x, dtype=float)
    mid = 0.5 * (cfg.cut_in + cfg.rated_onset)
    lo = _sigmoid(cfg.steepness * (cfg.cut_in - mid))
    hi = _sigmoid(cfg.steepness * (cfg.rated_onset - mid))
    s = (_sigmoid(cfg.steepness * (x - mid)) - lo) / (hi - lo)
    return np.clip(0.01 + 0.98 * s, 0.001, 0.999)


def synth_concentration(cfg: SynthConfig, m):
    """Concentration, nu_max at the bounds falling to nu_min where m = 0.5."""
    q = 4.0 * m * (1.0 - m)
    return cfg.concentration_peak - (cfg.concentration_peak - cfg.concentration_floor) * q * q


def synth_shapes(cfg: SynthConfig, x):
    """(m, alpha, beta) of the generating Beta at wind speeds ``x``."""
    m = synth_mean(cfg, x)
    nu = synth_concentration(cfg, m)
    return m, nu * m, nu * (1.0 - m)


def synth_generate(cfg: SynthConfig | None = None) -> ScadaDataset:
    cfg = (cfg or SynthConfig()).validate()
    rng = np.random.default_rng(cfg.seed)
    x = rng.uniform(0.0, 1.0, int(cfg.n))
    m, a, b = synth_shapes(cfg, x)
    y = rng.beta(a, b)
    y = np.clip(y, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    truth = {"x": x, "m": m, "alpha": a, "beta": b}
    return ScadaDataset(x, y, Normalization(0.0, 1.0, 0.0, 1.0), flags=[frozenset()] * x.size, truth=truth)
