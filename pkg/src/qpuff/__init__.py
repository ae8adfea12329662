"""Quantum pufferfish privacy: divergences, verification, mechanisms and audits."""

__version__ = "0.1.0"
