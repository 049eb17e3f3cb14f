"""Signal transforms: STFT spectrograms, Lomb-Scargle PSD and R-peak detection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal_core import EcgRecording


@dataclass(frozen=True)
class SpectrogramParams:
    window_len: int = 64
    hop: int = 16
    window_fn: str = "hanning"

    def __post_init__(self):
        if self.window_len <= 0 or self.hop <= 0:
            raise ValueError("window_len and hop must be positive")
        if self.hop > self.window_len:
            raise ValueError(f"hop ({self.hop}) must not exceed window_len ({self.window_len})")
        if self.window_fn != "hanning":
            raise ValueError(f"unsupported window function '{self.window_fn}'")

    def window(self) -> np.ndarray:
        return np.hanning(self.window_len)

    @property
    def freq_bins(self) -> int:
        return self.window_len // 2 + 1


@dataclass(frozen=True)
class Spectrogram:
    values: np.ndarray  # [freq_bins, frames], squared magnitudes
    params: SpectrogramParams
    source_id: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if values.ndim != 2 or values.shape[0] != self.params.freq_bins:
            raise ValueError(
                f"expected {self.params.freq_bins} frequency bins, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("spectrogram entries must be finite and nonnegative")


@dataclass(frozen=True)
class PsdEstimate:
    frequencies_hz: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.frequencies_hz, dtype=np.float64)
        p = np.asarray(self.power, dtype=np.float64)
        f.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "frequencies_hz", f)
        object.__setattr__(self, "power", p)
        if len(f) != len(p):
            raise ValueError("frequency and power vectors must have equal length")
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be strictly ascending")


def stft_spectrogram(samples, params: SpectrogramParams) -> Spectrogram:
    """One-sided power spectrogram: |DFT of the windowed frame|^2 per hop.

    Frame l covers samples [l*hop, l*hop + window_len); the frame count is
    floor((len - window_len) / hop) + 1.
    """
    x = np.asarray(samples, dtype=np.float64)
    M, hop = params.window_len, params.hop
    if len(x) < M:
        raise ValueError(f"input length {len(x)} is shorter than window_len {M}")
    n_frames = (len(x) - M) // hop + 1
    w = params.window()
    frames = np.stack([x[l * hop : l * hop + M] * w for l in range(n_frames)])
    spec = np.abs(np.fft.rfft(frames, axis=1)) ** 2
    return Spectrogram(values=spec.T, params=params)


def normalize_spectrogram(spec: Spectrogram) -> np.ndarray:
    """Log-compress and min-max scale to [0, 1] for CNN consumption."""
    img = np.log1p(spec.values)
    lo, hi = img.min(), img.max()
    if hi - lo < 1e-30:
        return np.zeros_like(img)
    return (img - lo) / (hi - lo)


def lomb_scargle(times_s, values, freqs_hz) -> PsdEstimate:
    """Classic normalized Lomb-Scargle periodogram of a mean-centered series."""
    t = np.asarray(times_s, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    f = np.asarray(freqs_hz, dtype=np.float64)
    if len(t) < 3:
        raise ValueError(f"need at least 3 samples, got {len(t)}")
    if len(t) != len(y):
        raise ValueError("times and values must have equal length")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly ascending (duplicates not allowed)")
    if np.any(f <= 0):
        raise ValueError("frequencies must be positive")

    yc = y - y.mean()
    var = np.sum(yc**2) / (len(y) - 1)
    # A (numerically) constant series has no spectral content; bail out
    # before the 1/var normalization can amplify centering roundoff.
    if var <= 1e-24 * max(1.0, float(np.mean(y**2))):
        return PsdEstimate(frequencies_hz=f, power=np.zeros(len(f)))
    omega = 2.0 * np.pi * f[:, None]  # [F, 1]
    # Time offset tau makes the estimator invariant to time shifts
    tau = np.arctan2(np.sum(np.sin(2 * omega * t), axis=1), np.sum(np.cos(2 * omega * t), axis=1)) / (
        2.0 * omega[:, 0]
    )
    arg = omega * (t - tau[:, None])
    c, s = np.cos(arg), np.sin(arg)
    cc = np.maximum(np.sum(c**2, axis=1), 1e-300)
    ss = np.maximum(np.sum(s**2, axis=1), 1e-300)
    power = 0.5 * (np.sum(yc * c, axis=1) ** 2 / cc + np.sum(yc * s, axis=1) ** 2 / ss)
    if var > 0:
        power = power / var
    return PsdEstimate(frequencies_hz=f, power=np.maximum(power, 0.0))


_INTEGRATION_S = 0.150
_REFRACTORY_S = 0.200


def detect_r_peaks(rec: EcgRecording) -> list[int]:
    """Detect R peaks via difference/square/integrate with an adaptive threshold.

    Returns ascending sample indices; an empty list for flat or sub-threshold
    signals. Consecutive peaks are at least 200 ms apart.
    """
    fs = rec.sample_rate_hz
    if rec.duration_s < 2.0:
        raise ValueError("recording must be at least 2 seconds long")
    x = rec.samples

    deriv = np.empty_like(x)
    deriv[1:] = np.diff(x)
    deriv[0] = 0.0
    energy = deriv**2
    win = max(1, int(round(_INTEGRATION_S * fs)))
    kernel = np.ones(win) / win
    integrated = np.convolve(energy, kernel, mode="same")

    if integrated.max() < 1e-12:
        return []

    refractory = int(round(_REFRACTORY_S * fs))
    # Adaptive threshold: a running fraction of recent peak energy
    running_peak = integrated[: int(2 * fs)].max()
    threshold = 0.45 * running_peak
    peaks = []
    i = 1
    n = len(integrated)
    while i < n - 1:
        if (
            integrated[i] > threshold
            and integrated[i] >= integrated[i - 1]
            and integrated[i] >= integrated[i + 1]
        ):
            lo = max(0, i - win)
            hi = min(n, i + win)
            peak_idx = lo + int(np.argmax(np.abs(x[lo:hi])))
            if not peaks or peak_idx - peaks[-1] >= refractory:
                peaks.append(peak_idx)
                local_max = integrated[lo:hi].max()
                running_peak = 0.875 * running_peak + 0.125 * local_max
                threshold = 0.45 * running_peak
                i = max(i, peak_idx) + refractory
                continue
        i += 1
    return peaks


def rr_intervals(peaks, fs: float):
    """RR intervals and their end-timestamps from peak sample indices."""
    peaks = np.asarray(peaks, dtype=np.int64)
    if len(peaks) < 2:
        raise ValueError(f"need at least 2 peaks for RR intervals, got {len(peaks)}")
    rr_s = np.diff(peaks) / fs
    times_s = peaks[1:] / fs
    return times_s, rr_s
