"""Exponential integrator weights for w' = -lambda w + F(t).

Over one step of length h with F interpolated linearly between its end values,

    w(h) = e^{-lambda h} w(0) + a0 F(0) + a1 F(h),

which is exact for piecewise-linear forcing.  Small ``lambda h`` uses Taylor
series to avoid cancellation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _phi1_h(lam: np.ndarray, h: float) -> np.ndarray:
    """integral_0^h e^{-lam (h - s)} ds."""
    x = lam * h
    out = np.empty_like(x)
    small = x < 1e-4
    out[~small] = -np.expm1(-x[~small]) / lam[~small]
    xs = x[small]
    out[small] = h * (1.0 - xs / 2.0 + xs ** 2 / 6.0 - xs ** 3 / 24.0)
    return out


def _phi2_h(lam: np.ndarray, h: float) -> np.ndarray:
    """(1/h) integral_0^h s e^{-lam (h - s)} ds."""
    x = lam * h
    out = np.empty_like(x)
    small = x < 1e-3
    xl = x[~small]
    out[~small] = (xl + np.expm1(-xl)) / (lam[~small] * xl)
    xs = x[small]
    out[small] = h * (0.5 - xs / 6.0 + xs ** 2 / 24.0 - xs ** 3 / 120.0 + xs ** 4 / 720.0)
    return out


@dataclass
class EtdStep:
    """Precomputed weights for one step size on a fixed set of rates."""

    decay: np.ndarray
    a0: np.ndarray
    a1: np.ndarray
    phi1: np.ndarray

    @classmethod
    def build(cls, lam: np.ndarray, h: float) -> "EtdStep":
        lam = np.asarray(lam, dtype=float)
        p1 = _phi1_h(lam, h)
        p2 = _phi2_h(lam, h)
        return cls(np.exp(-lam * h), p1 - p2, p2, p1)

    def linear(self, w, f0, f1):
        """Step with forcing interpolated linearly between f0 and f1."""
        return self.decay * w + self.a0 * f0 + self.a1 * f1

    def frozen(self, w, f0):
        """Step with forcing frozen at its left value."""
        return self.decay * w + self.phi1 * f0


class EtdCache:
    """EtdStep objects keyed by step length (time grids may be non-uniform)."""

    def __init__(self, lam: np.ndarray):
        self.lam = lam
        self._steps: dict[float, EtdStep] = {}

    def __call__(self, h: float) -> EtdStep:
        key = float(h)
        if key not in self._steps:
            self._steps[key] = EtdStep.build(self.lam, key)
        return self._steps[key]
