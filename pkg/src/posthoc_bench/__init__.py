"""Post-hoc labeled benchmark datasets for oscillatory source decoding, and SPoC evaluation."""

__version__ = "0.1.0"
