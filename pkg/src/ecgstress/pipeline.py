"""Per-fold training and evaluation pipelines for every method tag."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, asdict

import numpy as np

from . import classifiers, fusion, neuralnet
from .dsp import SpectrogramParams, normalize_spectrogram, stft_spectrogram
from .evaluation import Fold, Metrics, RunResult, compute_metrics, loso_split, mean_metrics
from .hrv import hrv_vector
from .neuralnet import TrainConfig
from .signal_core import Dataset, Window


class PipelineError(RuntimeError):
    """Wraps a sub-module failure with the pipeline stage that raised it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}': {cause}")
        self.stage = stage


@dataclass
class PipelineConfig:
    method: str = "fusion_weighted"
    window_seconds: float = 1.0  # deep methods; HRV methods use hrv_window_seconds
    hrv_window_seconds: float = 4.0
    feature_dim: int = 32
    spectrogram: SpectrogramParams = field(default_factory=SpectrogramParams)
    cnn_train: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=30))
    svm_lambda_grid: tuple = (1e-3, 1e-2, 1e-1, 1.0)
    svm_epochs: int = 200
    knn_k_grid: tuple = (1, 3, 5, 7)
    seed: int = 0
    class_count: int = 3
    # Asymmetric-noise ablation: corrupt one modality with seeded noise
    corrupt_modality: str | None = None  # None, "raw" or "spectrogram"
    corrupt_noise_std: float = 0.0

    def snapshot(self) -> dict:
        d = asdict(self)
        d["spectrogram"] = asdict(self.spectrogram)
        d["cnn_train"] = asdict(self.cnn_train)
        d["svm_lambda_grid"] = list(self.svm_lambda_grid)
        d["knn_k_grid"] = list(self.knn_k_grid)
        return d


def fold_seed(global_seed: int, subject_id: str) -> int:
    """Deterministic per-fold seed derived from the global seed and subject."""
    return (global_seed ^ zlib.crc32(subject_id.encode())) & 0x7FFFFFFF


def windows_to_snippets(windows, cfg: PipelineConfig) -> np.ndarray:
    """Raw 1-second snippets shaped (N, 1, L) for the 1D CNN."""
    x = np.stack([w.samples for w in windows])[:, None, :]
    if cfg.corrupt_modality == "raw" and cfg.corrupt_noise_std > 0:
        for i, w in enumerate(windows):
            rng = np.random.default_rng(
                [cfg.seed & 0xFFFFFFFF, zlib.crc32(w.subject_id.encode()), w.start_sample, 0xA1]
            )
            x[i] += cfg.corrupt_noise_std * rng.standard_normal(x[i].shape)
    return x


def windows_to_images(windows, cfg: PipelineConfig) -> np.ndarray:
    """Normalized spectrogram images shaped (N, 1, bins, frames) for the 2D CNN."""
    imgs = []
    for w in windows:
        spec = stft_spectrogram(w.samples, cfg.spectrogram)
        img = normalize_spectrogram(spec)
        if cfg.corrupt_modality == "spectrogram" and cfg.corrupt_noise_std > 0:
            rng = np.random.default_rng(
                [cfg.seed & 0xFFFFFFFF, zlib.crc32(w.subject_id.encode()), w.start_sample, 0xA2]
            )
            img = img + cfg.corrupt_noise_std * rng.standard_normal(img.shape)
        imgs.append(img)
    return np.stack(imgs)[:, None, :, :]


def labels_of(windows) -> np.ndarray:
    return np.array([w.label for w in windows], dtype=np.int64)


def _inner_split(n: int, seed: int):
    """Seeded 80/20 split of training-fold indices for grid search."""
    rng = np.random.default_rng([seed & 0xFFFFFFFF, 0x6B1D])
    order = rng.permutation(n)
    cut = max(1, int(round(0.8 * n)))
    if cut >= n:
        cut = n - 1
    return order[:cut], order[cut:]


def _grid_search_svm(X, y, cfg: PipelineConfig, seed: int):
    """Pick the hinge regularizer from the grid on an inner 80/20 split."""
    tr, va = _inner_split(len(X), seed)
    best_lam, best_acc = cfg.svm_lambda_grid[0], -1.0
    if len(np.unique(y[tr])) >= 2 and len(va) > 0:
        for lam in cfg.svm_lambda_grid:
            model = classifiers.train_linear_svm(
                X[tr], y[tr], lam=lam, epochs=cfg.svm_epochs, seed=seed
            )
            acc = float(np.mean(classifiers.svm_predict(model, X[va]) == y[va]))
            if acc > best_acc:
                best_lam, best_acc = lam, acc
    model = classifiers.train_linear_svm(X, y, lam=best_lam, epochs=cfg.svm_epochs, seed=seed)
    return model, best_lam


def _grid_search_knn(X, y, cfg: PipelineConfig, seed: int) -> int:
    tr, va = _inner_split(len(X), seed)
    best_k, best_acc = cfg.knn_k_grid[0], -1.0
    for k in cfg.knn_k_grid:
        if k > len(tr):
            continue
        preds = classifiers.knn_predict_batch(X[tr], y[tr], X[va], k)
        acc = float(np.mean(preds == y[va]))
        if acc > best_acc:
            best_k, best_acc = k, acc
    return best_k


def train_fusion_components(train_windows, cfg: PipelineConfig, seed: int) -> dict:
    """Train both CNN extractors, fusion weights, stats and the SVM.

    Everything here sees training-fold windows only; the returned components
    are frozen for test-time application.
    """
    y = labels_of(train_windows)
    snippets = windows_to_snippets(train_windows, cfg)
    images = windows_to_images(train_windows, cfg)

    cnn1d = neuralnet.build_cnn1d(
        input_len=snippets.shape[2], feature_dim=cfg.feature_dim, seed=seed
    )
    cnn2d = neuralnet.build_cnn2d(
        input_shape=images.shape[2:], feature_dim=cfg.feature_dim, seed=seed
    )
    train_cfg = TrainConfig(**{**asdict(cfg.cnn_train), "seed": seed})
    try:
        neuralnet.train(cnn1d, snippets, y, train_cfg)
        neuralnet.train(cnn2d, images, y, train_cfg)
    except neuralnet.TrainingError as exc:
        raise PipelineError("cnn-training", exc) from exc

    f1 = neuralnet.extract_features(cnn1d, snippets)
    f2 = neuralnet.extract_features(cnn2d, images)
    if cfg.method == "fusion_weighted":
        weights = fusion.compute_fusion_weights(f1, f2)
        fused = fusion.weighted_fuse(f1, f2, weights)
    else:
        weights = None
        fused = fusion.average_fuse(f1, f2)
    fused_std, stats = classifiers.standardize_fit(fused)
    svm, lam = _grid_search_svm(fused_std, y, cfg, seed)
    return {
        "cnn1d": cnn1d,
        "cnn2d": cnn2d,
        "fusion_weights": weights,
        "stats": stats,
        "svm": svm,
        "svm_lambda": lam,
    }


def fusion_predict(components: dict, windows, cfg: PipelineConfig) -> np.ndarray:
    f1 = neuralnet.extract_features(components["cnn1d"], windows_to_snippets(windows, cfg))
    f2 = neuralnet.extract_features(components["cnn2d"], windows_to_images(windows, cfg))
    if components["fusion_weights"] is not None:
        fused = fusion.weighted_fuse(f1, f2, components["fusion_weights"])
    else:
        fused = fusion.average_fuse(f1, f2)
    return classifiers.svm_predict(components["svm"], components["stats"].transform(fused))


def hrv_matrix(windows, fs: float):
    """HRV feature matrix plus the labels of the windows that produced one."""
    rows, labels = [], []
    for w in windows:
        vec = hrv_vector(w, fs)
        if vec is not None:
            rows.append(vec)
            labels.append(w.label)
    if not rows:
        raise PipelineError("hrv-features", ValueError("no window yielded enough beats"))
    return np.stack(rows), np.array(labels, dtype=np.int64)


def train_fold_components(fold: Fold, cfg: PipelineConfig, fs: float) -> dict:
    """Train every component of the configured method on the training fold only."""
    seed = fold_seed(cfg.seed, fold.test_subject)
    method = cfg.method
    if method in ("fusion_weighted", "fusion_avg"):
        return train_fusion_components(fold.train_windows, cfg, seed)
    if method in ("cnn1d", "cnn2d"):
        y = labels_of(fold.train_windows)
        if method == "cnn1d":
            x = windows_to_snippets(fold.train_windows, cfg)
            model = neuralnet.build_cnn1d(
                input_len=x.shape[2], feature_dim=cfg.feature_dim, seed=seed
            )
        else:
            x = windows_to_images(fold.train_windows, cfg)
            model = neuralnet.build_cnn2d(
                input_shape=x.shape[2:], feature_dim=cfg.feature_dim, seed=seed
            )
        train_cfg = TrainConfig(**{**asdict(cfg.cnn_train), "seed": seed})
        neuralnet.train(model, x, y, train_cfg)
        return {"cnn": model}
    if method in ("svm_hrv", "knn_hrv"):
        X, y = hrv_matrix(fold.train_windows, fs)
        X_std, stats = classifiers.standardize_fit(X)
        if method == "svm_hrv":
            svm, lam = _grid_search_svm(X_std, y, cfg, seed)
            return {"stats": stats, "svm": svm, "svm_lambda": lam}
        k = _grid_search_knn(X_std, y, cfg, seed)
        return {"stats": stats, "train_X": X_std, "train_y": y, "k": k}
    raise ValueError(f"unknown method '{method}'")


def run_pipeline(fold: Fold, cfg: PipelineConfig, fs: float) -> Metrics:
    """Train on the fold's training windows; report metrics on the test subject."""
    components = train_fold_components(fold, cfg, fs)
    method = cfg.method
    if method in ("fusion_weighted", "fusion_avg"):
        preds = fusion_predict(components, fold.test_windows, cfg)
        truth = labels_of(fold.test_windows)
    elif method == "cnn1d":
        preds = neuralnet.predict(components["cnn"], windows_to_snippets(fold.test_windows, cfg))
        truth = labels_of(fold.test_windows)
    elif method == "cnn2d":
        preds = neuralnet.predict(components["cnn"], windows_to_images(fold.test_windows, cfg))
        truth = labels_of(fold.test_windows)
    else:
        X, truth = hrv_matrix(fold.test_windows, fs)
        X_std = components["stats"].transform(X)
        if method == "svm_hrv":
            preds = classifiers.svm_predict(components["svm"], X_std)
        else:
            preds = classifiers.knn_predict_batch(
                components["train_X"], components["train_y"], X_std, components["k"]
            )
    return compute_metrics(preds, truth, cfg.class_count)


def _run_fold(args):
    fold, cfg, fs = args
    return fold.test_subject, run_pipeline(fold, cfg, fs)


def evaluate_loso(data: Dataset, cfg: PipelineConfig, fs: float, jobs: int = 1) -> RunResult:
    """LOSO evaluation of the configured method over all subjects."""
    folds = loso_split(data)
    tasks = [(fold, cfg, fs) for fold in folds]
    if jobs > 1:
        import multiprocessing

        with multiprocessing.Pool(min(jobs, len(tasks))) as pool:
            per_fold = pool.map(_run_fold, tasks)
    else:
        per_fold = [_run_fold(t) for t in tasks]
    per_fold.sort(key=lambda sm: sm[0])
    return RunResult(
        method=cfg.method,
        per_fold=tuple(per_fold),
        mean=mean_metrics([m for _, m in per_fold]),
        seed=cfg.seed,
        config_snapshot=cfg.snapshot(),
    )
