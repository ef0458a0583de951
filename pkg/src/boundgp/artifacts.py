"""JSON model artifacts: everything needed to rebuild a fitted model."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .hbp import HBPModel
from .kernels import kernel_from_dict
from .likelihoods import likelihood_from_dict
from .linalg import JITTER_LEVELS
from .standard import StandardModel
from .svgp import LatentGP, VariationalState
from .warped import WarpConfig, WarpedModel

FORMAT_VERSION = 1


def state_to_dict(state: VariationalState):
    r, c = np.tril_indices(state.M)
    return {
        "likelihood": state.likelihood.to_dict(),
        "jitter_levels": [float(v) for v in state.jitter_levels],
        "Z": state.Z.tolist(),
        "latents": [
            {"kernel": lat.kernel.to_dict(), "m": lat.m.tolist(), "L": lat.L[r, c].tolist()}
            for lat in state.latents
        ],
    }


def state_from_dict(d) -> VariationalState:
    Z = np.asarray(d["Z"], dtype=float)
    M = Z.size
    r, c = np.tril_indices(M)
    latents = []
    for lat in d["latents"]:
        L = np.zeros((M, M))
        L[r, c] = np.asarray(lat["L"], dtype=float)
        latents.append(LatentGP(kernel_from_dict(lat["kernel"]), np.asarray(lat["m"], dtype=float), L))
    levels = tuple(d.get("jitter_levels", JITTER_LEVELS))
    return VariationalState(Z, tuple(latents), likelihood_from_dict(d["likelihood"]), levels)


def model_to_dict(model, normalization=None, meta=None):
    out = {"format_version": FORMAT_VERSION, "model": model.name}
    out["state"] = state_to_dict(model.state)
    out["trace"] = [[int(i), float(v)] for i, v in model.trace]
    if isinstance(model, StandardModel):
        out["y_mean"] = model.y_mean
    elif isinstance(model, WarpedModel):
        out["warp"] = {"epsilon": model.cfg.epsilon}
        out["clipped_fraction"] = model.clipped_fraction
    elif isinstance(model, HBPModel):
        out["predict"] = {"mode": model.mode, "samples": model.samples, "seed": model.seed,
                          "epsilon": model.epsilon}
    if normalization is not None:
        out["normalization"] = normalization.to_dict()
    if meta:
        out["meta"] = meta
    return out


def model_from_dict(d):
    kind = d.get("model")
    if "state" not in d:
        raise ValidationError("artifact has no variational state")
    state = state_from_dict(d["state"])
    trace = [tuple(t) for t in d.get("trace", [])]
    if kind == "standard":
        return StandardModel(state, float(d.get("y_mean", 0.0)), trace)
    if kind == "warped":
        return WarpedModel(state, WarpConfig(**d.get("warp", {})), float(d.get("clipped_fraction", 0.0)), trace)
    if kind == "hbp":
        return HBPModel(state, trace, **d.get("predict", {}))
    raise ValidationError(f"unknown model kind {kind!r} in artifact")


def save_model(model, path, normalization=None, meta=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model_to_dict(model, normalization, meta), indent=1) + "\n", encoding="utf-8")


def load_model(path):
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    return model_from_dict(d), d
