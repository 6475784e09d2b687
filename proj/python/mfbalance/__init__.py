"""Load imbalance under multifractal traffic."""

from ._core import Error, fgn, generate, hurst_curve, imbalance, simulate, sweep

__all__ = ["Error", "fgn", "generate", "hurst_curve", "imbalance", "simulate", "sweep"]
