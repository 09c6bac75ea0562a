"""Heterogeneous-block-size blockchain: stream-authenticated sub-blocks, per-height ledgers and a deterministic simulator."""

__version__ = "0.1.0"
