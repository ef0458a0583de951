"""Command-line entry point: synth, train, evaluate, predict, report.

Everything is driven by a JSON config (``--config``) with dotted
``--set key=value`` overrides; values are parsed as JSON when possible.
"""

from __future__ import annotations

import argparse
import copy
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .artifacts import load_model, save_model
from .data import CleaningRules, SynthConfig, load_scada_csv, preprocess, split_three, synth_generate
from .data import write_dataset_csv, write_truth_csv
from .errors import BoundGPError, ConfigError
from .hbp import hbp_fit, predictions_to_arrays
from .kernels import default_kernel, kernel_from_dict
from .metrics import EvaluationReport, evaluate, write_results_csv
from .standard import fit_standard
from .svgp import TrainConfig
from .warped import WarpConfig, warped_fit

log = logging.getLogger("boundgp")

COMMANDS = ("synth", "train", "evaluate", "predict", "report")
MODELS = ("standard", "warped", "hbp")
N_KERNELS = {"standard": 1, "warped": 2, "hbp": 2}
LIKELIHOOD_MODEL = {"gaussian": "standard", "hetero": "warped", "beta": "hbp"}

DEFAULTS = {
    "model": list(MODELS),
    "likelihood": None,
    "split_seed": 0,
    "noise_variance": 0.01,
    "paths": {"data": "data.csv", "truth": "truth.csv", "out_dir": "out"},
    "synth": {},
    "cleaning": {},
    "train": {},
    "warp": {},
    "hbp": {"mode": "sample", "samples": 1000, "seed": 0},
    "kernels": {},
    "predict": {"grid_points": 200, "grid": None},
}


# ------------------------------------------------------------------- config


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(cfg, item):
    if "=" not in item:
        raise ConfigError([f"--set {item!r}: expected key=value"])
    key, value = item.split("=", 1)
    parts = key.strip().split(".")
    node = cfg
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError([f"--set {key}: {p!r} is not a section"])
    node[parts[-1]] = _parse_value(value)
    return cfg


def _section(cls, raw, name, problems):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        problems.append(f"{name}: unknown field(s) {unknown}")
    try:
        obj = cls(**{k: v for k, v in raw.items() if k in known})
        if hasattr(obj, "validate"):
            obj.validate()
        return obj
    except (TypeError, ValueError) as exc:
        problems.append(f"{name}: {exc}")
        return None


@dataclasses.dataclass
class RunConfig:
    command: str
    models: list
    paths: dict
    split_seed: int
    noise_variance: float
    synth: SynthConfig
    cleaning: CleaningRules
    train: TrainConfig
    warp: WarpConfig
    hbp: dict
    kernels: dict
    predict: dict


def build_config(command, raw) -> RunConfig:
    """Validate a merged raw config; every problem is reported at once."""
    problems = []
    unknown = sorted(set(raw) - set(DEFAULTS))
    if unknown:
        problems.append(f"unknown top-level key(s) {unknown}")
    if command not in COMMANDS:
        problems.append(f"command must be one of {list(COMMANDS)}, got {command!r}")
    models = raw.get("model")
    models = [models] if isinstance(models, str) else list(models or [])
    lik = raw.get("likelihood")
    if lik is not None:
        if lik not in LIKELIHOOD_MODEL:
            problems.append(f"likelihood: expected one of {list(LIKELIHOOD_MODEL)}, got {lik!r}")
        else:
            models = [LIKELIHOOD_MODEL[lik]]
    bad = [m for m in models if m not in MODELS]
    if bad or not models:
        problems.append(f"model: expected one or more of {list(MODELS)}, got {raw.get('model')!r}")
    paths = raw.get("paths", {})
    need = {"synth": ("data", "truth"), "train": ("data", "out_dir"), "evaluate": ("data", "out_dir"),
            "predict": ("out_dir",), "report": ("out_dir",)}.get(command, ())
    for key in need:
        if not paths.get(key):
            problems.append(f"paths.{key} is required for {command}")
    for key in ("split_seed",):
        if not isinstance(raw.get(key), int) or isinstance(raw.get(key), bool):
            problems.append(f"{key} must be an integer")
    try:
        noise = float(raw.get("noise_variance"))
        if not noise > 0:
            raise ValueError
    except (TypeError, ValueError):
        problems.append("noise_variance must be a positive number")
        noise = None
    synth = _section(SynthConfig, raw.get("synth", {}), "synth", problems)
    cleaning = _section(CleaningRules, raw.get("cleaning", {}), "cleaning", problems)
    train = _section(TrainConfig, raw.get("train", {}), "train", problems)
    warp = _section(WarpConfig, raw.get("warp", {}), "warp", problems)
    hbp = raw.get("hbp", {})
    if hbp.get("mode") not in ("moment", "sample"):
        problems.append("hbp.mode must be 'moment' or 'sample'")
    for key in ("samples", "seed"):
        if not isinstance(hbp.get(key), int) or isinstance(hbp.get(key), bool):
            problems.append(f"hbp.{key} must be an integer")
    kernels = {}
    for name, specs in raw.get("kernels", {}).items():
        if name not in MODELS:
            problems.append(f"kernels: unknown model {name!r}")
            continue
        specs = specs if isinstance(specs, list) else [specs]
        if len(specs) != N_KERNELS[name]:
            problems.append(f"kernels.{name}: expected {N_KERNELS[name]} kernel spec(s), got {len(specs)}")
            continue
        try:
            kernels[name] = [kernel_from_dict(s) for s in specs]
        except (TypeError, ValueError, KeyError) as exc:
            problems.append(f"kernels.{name}: {exc}")
    pred = raw.get("predict", {})
    gp = pred.get("grid_points")
    if not isinstance(gp, int) or gp < 2:
        problems.append("predict.grid_points must be an integer >= 2")
    if pred.get("grid") is not None:
        g = np.asarray(pred["grid"], dtype=float) if isinstance(pred["grid"], list) else None
        if g is None or g.ndim != 1 or g.size == 0 or not np.all(np.isfinite(g)):
            problems.append("predict.grid must be a non-empty list of finite numbers")
    if problems:
        raise ConfigError(problems)
    return RunConfig(command, models, dict(paths), raw["split_seed"], noise, synth, cleaning, train, warp,
                     dict(hbp), kernels, dict(pred))


def load_config(path, overrides=(), command=None) -> RunConfig:
    raw = copy.deepcopy(DEFAULTS)
    if path:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError([f"config: cannot read {path}: {exc.strerror}"]) from None
        try:
            user = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config: {path} is not valid JSON ({exc})"]) from None
        if not isinstance(user, dict):
            raise ConfigError(["config: top level must be a JSON object"])
        raw = _merge(raw, user)
    for item in overrides:
        apply_override(raw, item)
    return build_config(command, raw)


# ------------------------------------------------------------------ helpers


def _out(cfg, name):
    return Path(cfg.paths["out_dir"]) / name


def artifact_path(cfg, model):
    explicit = cfg.paths.get("model")
    if explicit and len(cfg.models) == 1:
        return Path(explicit)
    return _out(cfg, f"{model}.json")


def load_split(cfg):
    records = load_scada_csv(cfg.paths["data"])
    return split_three(preprocess(records, cfg.cleaning), cfg.split_seed)


def fit_model(name, x, y, cfg):
    kernels = cfg.kernels.get(name)
    if name == "standard":
        return fit_standard(x, y, kernels[0] if kernels else default_kernel(), cfg.train, cfg.noise_variance)
    if name == "warped":
        return warped_fit(x, y, kernels, cfg.warp, cfg.train)
    return hbp_fit(x, y, kernels, cfg.train, mode=cfg.hbp["mode"], samples=cfg.hbp["samples"],
                   seed=cfg.hbp["seed"])


def write_trace_csv(trace, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "elbo"])
        for it, val in trace:
            w.writerow([int(it), repr(float(val))])


def prediction_grid(cfg, meta):
    if cfg.predict.get("grid") is not None:
        return np.asarray(cfg.predict["grid"], dtype=float)
    lo, hi = meta.get("train_range", (0.0, 1.0))
    return np.linspace(lo, hi, cfg.predict["grid_points"])


def prediction_columns(model, grid):
    """Ordered column dict for a model's prediction CSV."""
    if model.name == "hbp":
        cols = predictions_to_arrays(model.predict(grid))
        return {"x": grid, **{k: cols[k] for k in ("mean", "lower95", "upper95", "alpha", "beta")}}
    if model.name == "warped":
        p = model.predict(grid)
        return {"x": grid, "mean": p.mean, "lower": p.lower, "upper": p.upper,
                "warped_mean": p.warped_mean, "warped_sd": p.warped_sd}
    mean, lo, hi = model.predict_band(grid)
    return {"x": grid, "mean": mean, "lower95": lo, "upper95": hi}


def write_prediction_csv(cols, path, header_lines=()):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(cols))
        for row in zip(*cols.values()):
            w.writerow([repr(float(v)) for v in row])


def band_for_plot(cols):
    lo = cols.get("lower95", cols.get("lower"))
    hi = cols.get("upper95", cols.get("upper"))
    return cols["mean"], lo, hi


# ----------------------------------------------------------------- commands


def cmd_synth(cfg):
    ds = synth_generate(cfg.synth)
    write_dataset_csv(ds, cfg.paths["data"])
    write_truth_csv(ds, cfg.paths["truth"])
    return {"data": cfg.paths["data"], "truth": cfg.paths["truth"], "n": len(ds)}


def cmd_train(cfg):
    ds = load_split(cfg)
    x, y = ds.part("train")
    meta = {"train_range": [float(x.min()), float(x.max())], "split_seed": cfg.split_seed,
            "train_config": {k: v for k, v in dataclasses.asdict(cfg.train).items() if k != "jitter_levels"}}
    out = {}
    for name in cfg.models:
        model = fit_model(name, x, y, cfg)
        path = artifact_path(cfg, name)
        save_model(model, path, ds.normalization, meta)
        write_trace_csv(model.trace, _out(cfg, f"{name}_trace.csv"))
        out[name] = str(path)
    return {"artifacts": out}


def cmd_evaluate(cfg):
    ds = load_split(cfg)
    x, y = ds.part("test")
    reports = []
    for name in cfg.models:
        model, _ = load_model(artifact_path(cfg, name))
        rep = evaluate(model, x, y)
        rep.write_json(_out(cfg, f"{name}_report.json"))
        reports.append(rep)
    write_results_csv(reports, _out(cfg, "results.csv"))
    return {"results": str(_out(cfg, "results.csv")), "reports": [r.to_dict() for r in reports]}


def cmd_predict(cfg):
    written = {}
    for name in cfg.models:
        model, doc = load_model(artifact_path(cfg, name))
        grid = prediction_grid(cfg, doc.get("meta", {}))
        header = [f"clipped_fraction={doc.get('clipped_fraction', 0.0)!r}"] if name == "warped" else []
        path = _out(cfg, f"{name}_predictions.csv")
        write_prediction_csv(prediction_columns(model, grid), path, header)
        written[name] = str(path)
    return {"predictions": written}


def cmd_report(cfg):
    from .plotting import plot_power_curve, plot_traces

    reports = []
    for name in cfg.models:
        path = _out(cfg, f"{name}_report.json")
        if path.is_file():
            reports.append(EvaluationReport.read_json(path))
        else:
            log.warning("no report for %s at %s", name, path)
    if not reports:
        raise ConfigError([f"report: no per-model reports found under {cfg.paths['out_dir']}"])
    write_results_csv(reports, _out(cfg, "results.csv"))
    figures = []
    bands, traces, grid = {}, {}, None
    for name in [r.model_name for r in reports]:
        path = artifact_path(cfg, name)
        if not path.is_file():
            continue
        model, doc = load_model(path)
        grid = prediction_grid(cfg, doc.get("meta", {}))
        cols = prediction_columns(model, grid)
        bands[name] = band_for_plot(cols)
        traces[name] = model.trace
    if bands:
        data = cfg.paths.get("data")
        if data and Path(data).is_file():
            x, y = load_split(cfg).part("test")
        else:
            x, y = np.empty(0), np.empty(0)
        figures.append(str(plot_power_curve(x, y, grid, bands, _out(cfg, "figures/power_curves.png"))))
        figures.append(str(plot_traces(traces, _out(cfg, "figures/elbo_traces.png"))))
    return {"results": str(_out(cfg, "results.csv")), "figures": figures}


HANDLERS = {"synth": cmd_synth, "train": cmd_train, "evaluate": cmd_evaluate, "predict": cmd_predict,
            "report": cmd_report}


def run(cfg: RunConfig):
    return HANDLERS[cfg.command](cfg)


def build_parser():
    p = argparse.ArgumentParser(prog="boundgp", description="Bounded GP power-curve models.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry, dotted keys for sections (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config, args.overrides, args.command)
        summary = run(cfg)
    except BoundGPError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 2
    except OSError as exc:
        err = {"error": type(exc).__name__, "module": "io", "message": str(exc)}
        print(json.dumps(err), file=sys.stderr)
        return 1
    print(json.dumps(summary, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
