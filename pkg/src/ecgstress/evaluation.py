"""LOSO fold construction, classification metrics, inter-rater agreement
and report rendering."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .signal_core import UNLABELED, Dataset, LabelTrack, Window


@dataclass(frozen=True)
class Fold:
    test_subject: str
    train_windows: tuple[Window, ...]
    test_windows: tuple[Window, ...]

    def __post_init__(self):
        object.__setattr__(self, "train_windows", tuple(self.train_windows))
        object.__setattr__(self, "test_windows", tuple(self.test_windows))
        if any(w.subject_id == self.test_subject for w in self.train_windows):
            raise ValueError(f"test subject '{self.test_subject}' leaked into training windows")


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision_macro: float
    recall_macro: float
    f1_macro: float
    confusion: np.ndarray

    def __post_init__(self):
        confusion = np.asarray(self.confusion, dtype=np.int64)
        confusion.setflags(write=False)
        object.__setattr__(self, "confusion", confusion)
        for name in ("accuracy", "precision_macro", "recall_macro", "f1_macro"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "precision_macro": self.precision_macro,
            "recall_macro": self.recall_macro,
            "f1_macro": self.f1_macro,
            "confusion": self.confusion.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            accuracy=d["accuracy"],
            precision_macro=d["precision_macro"],
            recall_macro=d["recall_macro"],
            f1_macro=d["f1_macro"],
            confusion=np.array(d["confusion"]),
        )


METHOD_TAGS = ("cnn1d", "cnn2d", "fusion_avg", "fusion_weighted", "svm_hrv", "knn_hrv")

METHOD_DISPLAY = {
    "cnn1d": "Raw ECG (1D CNN)",
    "cnn2d": "Spectrogram CNN",
    "fusion_avg": "Average Fusion",
    "fusion_weighted": "Weighted Fusion",
    "svm_hrv": "HRV + Linear SVM",
    "knn_hrv": "HRV + KNN",
}


@dataclass(frozen=True)
class RunResult:
    method: str
    per_fold: tuple  # (subject_id, Metrics) pairs, sorted by subject
    mean: Metrics
    seed: int
    config_snapshot: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHOD_TAGS:
            raise ValueError(f"unknown method tag '{self.method}'")
        object.__setattr__(self, "per_fold", tuple(self.per_fold))

    def to_dict(self):
        return {
            "method": self.method,
            "per_fold": [[s, m.to_dict()] for s, m in self.per_fold],
            "mean": self.mean.to_dict(),
            "seed": self.seed,
            "config_snapshot": self.config_snapshot,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            method=d["method"],
            per_fold=tuple((s, Metrics.from_dict(m)) for s, m in d["per_fold"]),
            mean=Metrics.from_dict(d["mean"]),
            seed=d["seed"],
            config_snapshot=d.get("config_snapshot", {}),
        )


def loso_split(data: Dataset) -> list[Fold]:
    """One fold per subject, ordered by subject id."""
    subjects = data.subjects
    if len(subjects) < 2:
        raise ValueError(f"LOSO needs at least 2 subjects, got {len(subjects)}")
    folds = []
    for subject in subjects:
        folds.append(
            Fold(
                test_subject=subject,
                train_windows=tuple(w for w in data.windows if w.subject_id != subject),
                test_windows=tuple(w for w in data.windows if w.subject_id == subject),
            )
        )
    return folds


def compute_metrics(preds, truth, class_count: int) -> Metrics:
    """Confusion matrix and macro-averaged precision/recall/F1.

    Classes never seen in truth or predictions contribute 0 to each macro
    mean; per-class F1 is 0 when precision + recall is 0.
    """
    preds = np.asarray(preds, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if len(preds) != len(truth):
        raise ValueError(f"length mismatch: {len(preds)} predictions vs {len(truth)} labels")
    if len(preds) == 0:
        raise ValueError("need at least one prediction")
    confusion = np.zeros((class_count, class_count), dtype=np.int64)
    for t, p in zip(truth, preds):
        confusion[t, p] += 1
    accuracy = float(np.trace(confusion) / confusion.sum())
    precisions, recalls, f1s = [], [], []
    for c in range(class_count):
        tp = confusion[c, c]
        fp = confusion[:, c].sum() - tp
        fn = confusion[c, :].sum() - tp
        p = tp / (tp + fp) if tp + fp > 0 else 0.0
        r = tp / (tp + fn) if tp + fn > 0 else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        precisions.append(p)
        recalls.append(r)
        f1s.append(f)
    return Metrics(
        accuracy=accuracy,
        precision_macro=float(np.mean(precisions)),
        recall_macro=float(np.mean(recalls)),
        f1_macro=float(np.mean(f1s)),
        confusion=confusion,
    )


def mean_metrics(metrics_list) -> Metrics:
    """Unweighted mean of the scalar metrics; confusion matrices are summed."""
    return Metrics(
        accuracy=float(np.mean([m.accuracy for m in metrics_list])),
        precision_macro=float(np.mean([m.precision_macro for m in metrics_list])),
        recall_macro=float(np.mean([m.recall_macro for m in metrics_list])),
        f1_macro=float(np.mean([m.f1_macro for m in metrics_list])),
        confusion=np.sum([m.confusion for m in metrics_list], axis=0),
    )


class UndefinedAlphaError(ValueError):
    pass


def krippendorff_alpha(
    tracks: list[LabelTrack], metric: str = "ordinal", missing: str = "category"
) -> float:
    """Krippendorff's alpha over aligned rater tracks.

    With missing="category" (default), unlabeled cells participate as their
    own lowest ordinal value: a rater declining to label is itself a codable
    judgment, and this treatment reproduces published agreement figures for
    partially labeled stress ratings. With missing="exclude", unlabeled cells
    are dropped and items with fewer than two remaining labels are excluded.
    The ordinal distance uses the cumulative-margin formulation over the
    coincidence matrix.
    """
    if metric not in ("ordinal", "nominal"):
        raise ValueError(f"unsupported metric '{metric}'")
    if missing not in ("category", "exclude"):
        raise ValueError(f"unsupported missing-data mode '{missing}'")
    if len(tracks) < 2:
        raise ValueError("need at least 2 rater tracks")
    n_items = len(tracks[0].segments)
    if any(len(t.segments) != n_items for t in tracks):
        raise ValueError("rater tracks must have equal segment counts")

    units = []
    for i in range(n_items):
        vals = [t.segments[i].level for t in tracks]
        if missing == "exclude":
            vals = [v for v in vals if v != UNLABELED]
        if len(vals) >= 2:
            units.append(vals)
    if not units:
        raise UndefinedAlphaError("no item has two or more labels")

    values = sorted({v for unit in units for v in unit})
    v_index = {v: i for i, v in enumerate(values)}
    k = len(values)

    coincidence = np.zeros((k, k))
    for unit in units:
        m = len(unit)
        counts = np.zeros(k)
        for v in unit:
            counts[v_index[v]] += 1
        pair = np.outer(counts, counts) - np.diag(counts)
        coincidence += pair / (m - 1)

    margins = coincidence.sum(axis=0)
    total = margins.sum()
    if total <= 1:
        raise UndefinedAlphaError("not enough pairable values")

    delta = np.zeros((k, k))
    for c in range(k):
        for g in range(c + 1, k):
            if metric == "nominal":
                delta[c, g] = delta[g, c] = 1.0
            else:
                cum = margins[c : g + 1].sum() - (margins[c] + margins[g]) / 2.0
                delta[c, g] = delta[g, c] = cum**2

    d_observed = sum(
        coincidence[c, g] * delta[c, g] for c in range(k) for g in range(c + 1, k)
    )
    d_expected = sum(
        margins[c] * margins[g] * delta[c, g] for c in range(k) for g in range(c + 1, k)
    )
    if d_expected == 0:
        return 1.0
    return float(1.0 - (total - 1.0) * d_observed / d_expected)


def _pct(v: float) -> str:
    return f"{100.0 * v:.1f}"


def render_report(results: list[RunResult]) -> str:
    """Markdown tables of per-method mean metrics; best accuracy bolded."""
    if not results:
        raise ValueError("need at least one result")
    best = max(range(len(results)), key=lambda i: results[i].mean.accuracy)
    lines = [
        "# Stress classification results",
        "",
        "| Method | Accuracy | Precision | Recall | F1-Score |",
        "| --- | --- | --- | --- | --- |",
    ]
    for i, res in enumerate(results):
        name = METHOD_DISPLAY.get(res.method, res.method)
        if i == best:
            name = f"**{name}**"
        m = res.mean
        lines.append(
            f"| {name} | {_pct(m.accuracy)} | {_pct(m.precision_macro)} "
            f"| {_pct(m.recall_macro)} | {_pct(m.f1_macro)} |"
        )
    lines += [
        "",
        "## Accuracy vs F1",
        "",
        "| Method | Accuracy | F1-Score |",
        "| --- | --- | --- |",
    ]
    for i, res in enumerate(results):
        name = METHOD_DISPLAY.get(res.method, res.method)
        if i == best:
            name = f"**{name}**"
        lines.append(f"| {name} | {_pct(res.mean.accuracy)} | {_pct(res.mean.f1_macro)} |")
    return "\n".join(lines) + "\n"
