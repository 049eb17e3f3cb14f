"""Multi-level ECG stress assessment: HRV baselines, dual-CNN feature
extraction, eigenvector-weighted fusion and LOSO evaluation."""

__version__ = "0.1.0"
