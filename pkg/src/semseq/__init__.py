"""Sequence-based place recognition with semantically segmented normalization zones."""

__version__ = "0.1.0"
