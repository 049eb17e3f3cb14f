"""Command-line entry point: ingest, label, train, evaluate, predict, report."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import bundle as bundle_io
from . import classifiers, neuralnet, pipeline
from .dsp import SpectrogramParams, normalize_spectrogram, stft_spectrogram
from .evaluation import (
    Fold,
    RunResult,
    UndefinedAlphaError,
    krippendorff_alpha,
    render_report,
)
from .pipeline import PipelineConfig, PipelineError
from .signal_core import (
    AlignmentError,
    Dataset,
    IngestionError,
    consensus_labels,
    load_label_track,
    load_recording,
    save_label_track,
    segment_windows,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3

CONFIG_KEYS = {
    "method": str,
    "window_seconds": float,
    "hrv_window_seconds": float,
    "feature_dim": int,
    "epochs": int,
    "learning_rate": float,
    "momentum": float,
    "batch_size": int,
    "seed": int,
    "jobs": int,
    "svm_lambda_grid": str,
    "knn_k_grid": str,
    "spectrogram_window_len": int,
    "spectrogram_hop": int,
    "corrupt_modality": str,
    "corrupt_noise_std": float,
}


def load_config_file(path) -> dict:
    """Flat key=value config with '#' comments."""
    out = {}
    for line_num, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path} line {line_num}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ValueError(f"{path} line {line_num}: unknown key '{key}'")
        out[key] = CONFIG_KEYS[key](value)
    return out


def _parse_grid(text, conv):
    return tuple(conv(part) for part in text.split(",") if part.strip())


def build_pipeline_config(settings: dict) -> PipelineConfig:
    cfg = PipelineConfig()
    cfg.method = settings.get("method", cfg.method)
    cfg.window_seconds = settings.get("window_seconds", cfg.window_seconds)
    cfg.hrv_window_seconds = settings.get("hrv_window_seconds", cfg.hrv_window_seconds)
    cfg.feature_dim = settings.get("feature_dim", cfg.feature_dim)
    cfg.seed = settings.get("seed", cfg.seed)
    cfg.spectrogram = SpectrogramParams(
        window_len=settings.get("spectrogram_window_len", cfg.spectrogram.window_len),
        hop=settings.get("spectrogram_hop", cfg.spectrogram.hop),
    )
    cfg.cnn_train = neuralnet.TrainConfig(
        learning_rate=settings.get("learning_rate", cfg.cnn_train.learning_rate),
        momentum=settings.get("momentum", cfg.cnn_train.momentum),
        epochs=settings.get("epochs", cfg.cnn_train.epochs),
        batch_size=settings.get("batch_size", cfg.cnn_train.batch_size),
        seed=settings.get("seed", cfg.cnn_train.seed),
    )
    if "svm_lambda_grid" in settings:
        cfg.svm_lambda_grid = _parse_grid(settings["svm_lambda_grid"], float)
    if "knn_k_grid" in settings:
        cfg.knn_k_grid = _parse_grid(settings["knn_k_grid"], int)
    corrupt = settings.get("corrupt_modality")
    if corrupt:
        cfg.corrupt_modality = None if corrupt == "none" else corrupt
    cfg.corrupt_noise_std = settings.get("corrupt_noise_std", cfg.corrupt_noise_std)
    return cfg


def merge_settings(args) -> dict:
    settings = {}
    if getattr(args, "config", None):
        settings.update(load_config_file(args.config))
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def load_data_dir(data_dir, window_seconds: float):
    """Load every <name>.csv / <name>.meta.json / <name>.labels.csv triple."""
    data_dir = Path(data_dir)
    signal_files = sorted(p for p in data_dir.glob("*.csv") if not p.name.endswith(".labels.csv"))
    if not signal_files:
        raise IngestionError(f"no signal CSVs found in {data_dir}")
    windows = []
    fs = None
    for signal_path in signal_files:
        base = signal_path.with_suffix("")
        meta_path = Path(str(base) + ".meta.json")
        labels_path = Path(str(base) + ".labels.csv")
        if not meta_path.exists():
            raise IngestionError(f"missing metadata sidecar {meta_path}")
        if not labels_path.exists():
            raise IngestionError(f"missing label file {labels_path}")
        rec = load_recording(signal_path, meta_path)
        if fs is None:
            fs = rec.sample_rate_hz
        elif fs != rec.sample_rate_hz:
            raise IngestionError(
                f"{signal_path}: sample rate {rec.sample_rate_hz} differs from {fs}"
            )
        track = load_label_track(labels_path)
        windows.extend(segment_windows(rec, track, window_seconds))
    return Dataset(windows=tuple(windows)), fs


def cmd_ingest(args) -> int:
    rec = load_recording(args.signal, args.meta)
    summary = {
        "subject_id": rec.subject_id,
        "sample_rate_hz": rec.sample_rate_hz,
        "samples": len(rec.samples),
        "duration_s": rec.duration_s,
        "task": rec.task.value,
    }
    print(json.dumps(summary, indent=2))
    if args.spectrogram_out:
        params = SpectrogramParams()
        spec = stft_spectrogram(rec.samples, params)
        with open(args.spectrogram_out, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in spec.values:
                writer.writerow([repr(v) for v in row])
    return EXIT_OK


def cmd_label(args) -> int:
    tracks = [load_label_track(p) for p in args.raters]
    if len(tracks) < 2:
        print("error: need at least 2 rater files", file=sys.stderr)
        return EXIT_USAGE
    try:
        alpha = krippendorff_alpha(tracks)
        print(f"krippendorff_alpha_ordinal={alpha:.4f}")
    except UndefinedAlphaError as exc:
        print(f"warning: alpha undefined: {exc}", file=sys.stderr)
    consensus = consensus_labels(tracks)
    if not consensus.segments:
        print("warning: consensus track is empty (raters never fully agree)", file=sys.stderr)
    save_label_track(consensus, args.out)
    print(f"consensus segments: {len(consensus.segments)} -> {args.out}")
    return EXIT_OK


def _guard_overwrite(path, force: bool) -> None:
    if Path(path).exists() and not force:
        raise FileExistsError(f"{path} exists; pass --force to overwrite")


def cmd_train(args) -> int:
    settings = merge_settings(args)
    cfg = build_pipeline_config(settings)
    _guard_overwrite(args.out, args.force)
    window_s = cfg.hrv_window_seconds if cfg.method in ("svm_hrv", "knn_hrv") else cfg.window_seconds
    data, fs = load_data_dir(args.data, window_s)
    # Deployment mode: train on every provided subject (no held-out fold)
    fold = Fold(test_subject="", train_windows=data.windows, test_windows=())
    components = pipeline.train_fold_components(fold, cfg, fs)
    bundle_io.save_bundle(
        args.out,
        method=cfg.method,
        components=components,
        window_seconds=window_s,
        sample_rate_hz=fs,
        feature_dim=cfg.feature_dim,
        spectrogram=cfg.spectrogram,
        seed=cfg.seed,
    )
    print(f"bundle written to {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    settings = merge_settings(args)
    cfg = build_pipeline_config(settings)
    window_s = cfg.hrv_window_seconds if cfg.method in ("svm_hrv", "knn_hrv") else cfg.window_seconds
    data, fs = load_data_dir(args.data, window_s)
    result = pipeline.evaluate_loso(data, cfg, fs, jobs=settings.get("jobs", 1))
    if args.out:
        _guard_overwrite(args.out, args.force)
        Path(args.out).write_text(json.dumps(result.to_dict(), indent=2))
    report = render_report([result])
    if args.report_out:
        Path(args.report_out).write_text(report)
    else:
        print(report)
    return EXIT_OK


def predict_stream(loaded: dict, rec) -> list[tuple]:
    """Per-window predictions: (start_s, level, p0, p1, p2) rows."""
    window_s = loaded["window_seconds"]
    fs = loaded["sample_rate_hz"]
    if rec.sample_rate_hz != fs:
        raise ValueError(
            f"recording sample rate {rec.sample_rate_hz} does not match bundle rate {fs} "
            "(no implicit resampling)"
        )
    wlen = round(window_s * fs)
    n_windows = len(rec.samples) // wlen
    if n_windows == 0:
        raise ValueError(f"recording shorter than one {window_s} s window")
    from .signal_core import Window

    method = loaded["method"]
    cfg = PipelineConfig(
        method=method,
        window_seconds=window_s,
        feature_dim=loaded["feature_dim"],
        spectrogram=loaded["spectrogram"],
        seed=loaded["seed"],
    )
    windows = [
        Window(
            subject_id=rec.subject_id,
            start_sample=i * wlen,
            length_samples=wlen,
            label=0,  # placeholder; predictions ignore it
            samples=rec.samples[i * wlen : (i + 1) * wlen],
        )
        for i in range(n_windows)
    ]
    components = loaded["components"]
    rows = []
    if method in ("fusion_weighted", "fusion_avg"):
        preds = pipeline.fusion_predict(components, windows, cfg)
        for i, level in enumerate(preds):
            onehot = [1.0 if c == level else 0.0 for c in range(3)]
            rows.append((i * window_s, int(level), *onehot))
    elif method in ("cnn1d", "cnn2d"):
        model = components["cnn1d" if method == "cnn1d" else "cnn2d"]
        x = (
            pipeline.windows_to_snippets(windows, cfg)
            if method == "cnn1d"
            else pipeline.windows_to_images(windows, cfg)
        )
        probs = neuralnet.predict_proba(model, x)
        for i, p in enumerate(probs):
            rows.append((i * window_s, int(np.argmax(p)), *(float(v) for v in p)))
    else:
        X, _ = pipeline.hrv_matrix(windows, fs)
        X_std = components["stats"].transform(X)
        if method == "svm_hrv":
            preds = classifiers.svm_predict(components["svm"], X_std)
        else:
            preds = classifiers.knn_predict_batch(
                components["train_X"], components["train_y"], X_std, components["k"]
            )
        for i, level in enumerate(preds):
            onehot = [1.0 if c == level else 0.0 for c in range(3)]
            rows.append((i * window_s, int(level), *onehot))
    return rows


def cmd_predict(args) -> int:
    loaded = bundle_io.load_bundle(args.bundle)
    rec = load_recording(args.signal, args.meta)
    rows = predict_stream(loaded, rec)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(["start_s", "level", "prob0", "prob1", "prob2"])
        for row in rows:
            writer.writerow(row)
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def cmd_report(args) -> int:
    results = []
    for path in args.results:
        results.append(RunResult.from_dict(json.loads(Path(path).read_text())))
    report = render_report(results)
    if args.out:
        Path(args.out).write_text(report)
    else:
        print(report)
    return EXIT_OK


def _add_common(parser):
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--jobs", type=int, default=None)
    parser.add_argument("--method", default=None)
    parser.add_argument("--window-seconds", dest="window_seconds", type=float, default=None)
    parser.add_argument("--hrv-window-seconds", dest="hrv_window_seconds", type=float, default=None)
    parser.add_argument("--feature-dim", dest="feature_dim", type=int, default=None)
    parser.add_argument("--epochs", type=int, default=None)
    parser.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    parser.add_argument("--momentum", type=float, default=None)
    parser.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    parser.add_argument("--svm-lambda-grid", dest="svm_lambda_grid", default=None)
    parser.add_argument("--knn-k-grid", dest="knn_k_grid", default=None)
    parser.add_argument(
        "--spectrogram-window-len", dest="spectrogram_window_len", type=int, default=None
    )
    parser.add_argument("--spectrogram-hop", dest="spectrogram_hop", type=int, default=None)
    parser.add_argument("--corrupt-modality", dest="corrupt_modality", default=None)
    parser.add_argument("--corrupt-noise-std", dest="corrupt_noise_std", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecgstress", description="Multi-level ECG stress assessment toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a recording and print a summary")
    p.add_argument("signal")
    p.add_argument("meta")
    p.add_argument("--spectrogram-out", default=None, help="write whole-recording spectrogram CSV")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("label", help="build a consensus track from rater CSVs")
    p.add_argument("raters", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("train", help="train on all subjects and write a model bundle")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="LOSO evaluation with a markdown report")
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None, help="write RunResult JSON here")
    p.add_argument("--report-out", dest="report_out", default=None)
    p.add_argument("--force", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="per-window stress stream from a trained bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--signal", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("report", help="render a markdown report from RunResult files")
    p.add_argument("results", nargs="+")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        IngestionError,
        AlignmentError,
        FileNotFoundError,
        FileExistsError,
        bundle_io.BundleError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PipelineError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
