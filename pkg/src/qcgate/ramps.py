"""Control schedules lambda(t) and timekeeping errors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RAMP_KINDS = ("linear", "polynomial", "sinusoidal")


@dataclass(frozen=True)
class RampProfile:
    """Schedule taking the control parameter from 0 at t = 0 to 1 at t = tau.

    Past ``tau`` the analytic formula keeps being evaluated, unless
    ``clamp`` is set, in which case lambda stays at 1 with zero rate.
    """

    kind: str
    tau: float
    clamp: bool = False

    def __post_init__(self):
        if self.kind not in RAMP_KINDS:
            raise ValueError(f"unknown ramp {self.kind!r}; choose from {'|'.join(RAMP_KINDS)}")
        if not self.tau > 0:
            raise ValueError(f"ramp duration must be positive, got {self.tau}")

    def _s(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("ramp evaluated at negative time")
        return t / self.tau

    def lam(self, t):
        s = self._s(t)
        if self.kind == "linear":
            out = s
        elif self.kind == "polynomial":
            out = s**3 * (10 - 15 * s + 6 * s**2)
        else:
            out = np.sin(0.5 * np.pi * s)
        if self.clamp:
            out = np.where(s > 1, 1.0, out)
        return out[()] if np.ndim(out) == 0 else out

    def lam_dot(self, t):
        s = self._s(t)
        if self.kind == "linear":
            out = np.full_like(s, 1.0 / self.tau)
        elif self.kind == "polynomial":
            out = 30 * s**2 * (1 - s) ** 2 / self.tau
        else:
            out = 0.5 * np.pi / self.tau * np.cos(0.5 * np.pi * s)
        if self.clamp:
            out = np.where(s > 1, 0.0, out)
        return out[()] if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class TimingError:
    epsilon: float
    sign: int = 1  # +1 overshoot, -1 undershoot

    def __post_init__(self):
        if not 0 <= self.epsilon <= 0.5:
            raise ValueError(f"timing error must lie in [0, 0.5], got {self.epsilon}")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 (overshoot) or -1 (undershoot)")

    @property
    def signed(self) -> float:
        return self.sign * self.epsilon


def effective_duration(profile: RampProfile, err: TimingError) -> float:
    """Time for which the drive actually runs."""
    return profile.tau * (1 + err.sign * err.epsilon)
