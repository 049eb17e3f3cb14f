"""Versioned JSON persistence for trained pipelines."""

from __future__ import annotations

import datetime
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import neuralnet
from .classifiers import StandardizationStats, SvmModel
from .dsp import SpectrogramParams
from .fusion import FusionWeights

FORMAT_VERSION = 1


class BundleError(ValueError):
    pass


def _arrays_to_lists(arrays):
    return [a.tolist() for a in arrays]


def _load_model_params(model, param_lists):
    params = model.parameters()
    if len(params) != len(param_lists):
        raise BundleError(
            f"expected {len(params)} parameter tensors, found {len(param_lists)}"
        )
    for p, stored in zip(params, param_lists):
        arr = np.asarray(stored, dtype=np.float64)
        if arr.shape != p.shape:
            raise BundleError(f"parameter shape {arr.shape} does not match model {p.shape}")
        p[...] = arr


def save_bundle(
    path,
    method: str,
    components: dict,
    window_seconds: float,
    sample_rate_hz: float,
    feature_dim: int,
    spectrogram: SpectrogramParams,
    seed: int,
) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "method": method,
        "window_seconds": window_seconds,
        "sample_rate_hz": sample_rate_hz,
        "feature_dim": feature_dim,
        "spectrogram": asdict(spectrogram),
        "seed": seed,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    if "cnn1d" in components:
        m = components["cnn1d"]
        doc["cnn1d"] = {
            "input_len": m.input_shape[1],
            "params": _arrays_to_lists(m.parameters()),
        }
    if "cnn2d" in components:
        m = components["cnn2d"]
        doc["cnn2d"] = {
            "input_shape": list(m.input_shape[1:]),
            "params": _arrays_to_lists(m.parameters()),
        }
    if "cnn" in components:
        m = components["cnn"]
        key = "cnn1d" if len(m.input_shape) == 2 else "cnn2d"
        if key == "cnn1d":
            doc[key] = {"input_len": m.input_shape[1], "params": _arrays_to_lists(m.parameters())}
        else:
            doc[key] = {
                "input_shape": list(m.input_shape[1:]),
                "params": _arrays_to_lists(m.parameters()),
            }
    if components.get("fusion_weights") is not None:
        w = components["fusion_weights"]
        doc["fusion_weights"] = {
            "w1": w.w1.tolist(),
            "w2": w.w2.tolist(),
            "sign_convention": w.sign_convention,
        }
    if "stats" in components:
        s = components["stats"]
        doc["stats"] = {"mean": s.mean.tolist(), "std": s.std.tolist()}
    if "svm" in components:
        svm = components["svm"]
        doc["svm"] = {
            "weights": svm.weights.tolist(),
            "biases": svm.biases.tolist(),
            "lam": svm.lam,
        }
    if "train_X" in components:
        doc["knn"] = {
            "train_X": components["train_X"].tolist(),
            "train_y": components["train_y"].tolist(),
            "k": components["k"],
        }
    Path(path).write_text(json.dumps(doc))


def load_bundle(path) -> dict:
    """Load and validate a bundle; returns ready-to-use components plus metadata."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise BundleError(f"cannot read bundle {path}: {exc}") from exc
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise BundleError(f"unrecognized bundle format_version {version!r}")
    feature_dim = doc["feature_dim"]
    seed = doc["seed"]
    components = {}
    if "cnn1d" in doc:
        model = neuralnet.build_cnn1d(
            input_len=doc["cnn1d"]["input_len"], feature_dim=feature_dim, seed=seed
        )
        _load_model_params(model, doc["cnn1d"]["params"])
        components["cnn1d"] = model
    if "cnn2d" in doc:
        model = neuralnet.build_cnn2d(
            input_shape=tuple(doc["cnn2d"]["input_shape"]), feature_dim=feature_dim, seed=seed
        )
        _load_model_params(model, doc["cnn2d"]["params"])
        components["cnn2d"] = model
    if "fusion_weights" in doc:
        components["fusion_weights"] = FusionWeights(
            w1=np.asarray(doc["fusion_weights"]["w1"]),
            w2=np.asarray(doc["fusion_weights"]["w2"]),
            sign_convention=doc["fusion_weights"]["sign_convention"],
        )
    else:
        components["fusion_weights"] = None
    if "stats" in doc:
        components["stats"] = StandardizationStats(
            mean=np.asarray(doc["stats"]["mean"]), std=np.asarray(doc["stats"]["std"])
        )
    if "svm" in doc:
        svm = SvmModel(
            weights=np.asarray(doc["svm"]["weights"]),
            biases=np.asarray(doc["svm"]["biases"]),
            lam=doc["svm"]["lam"],
        )
        if "stats" in components and svm.weights.shape[1] != len(components["stats"].mean):
            raise BundleError("SVM feature dimension does not match standardization stats")
        components["svm"] = svm
    if "knn" in doc:
        components["train_X"] = np.asarray(doc["knn"]["train_X"])
        components["train_y"] = np.asarray(doc["knn"]["train_y"], dtype=np.int64)
        components["k"] = doc["knn"]["k"]
    return {
        "method": doc["method"],
        "window_seconds": doc["window_seconds"],
        "sample_rate_hz": doc["sample_rate_hz"],
        "feature_dim": feature_dim,
        "spectrogram": SpectrogramParams(**doc["spectrogram"]),
        "seed": seed,
        "created": doc.get("created"),
        "components": components,
    }
