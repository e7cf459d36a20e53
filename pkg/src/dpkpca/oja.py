"""Non-private Oja iteration with projection support, plus learning rates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datagen import SampleBatch
from .errors import DegenerateDirection, InvalidInput
from .linalg import Projector, project_unit


@dataclass(frozen=True)
class LrSchedule:
    """A positive, nonincreasing step-size schedule eta_t, t >= 1.

    kinds:
      harmonic              eta_t = 1 / (1 + t)
      kdppca_experimental   eta_t = 1 / (20 sigma lam + (lam - lam_next) t / ln n)
      theoretical           eta_t = alpha / (gap (beta + t))
    """

    kind: str
    sigma: float = 0.0
    lam: float = 0.0
    lam_next: float = 0.0
    n: int = 0
    alpha: float = 1.0
    beta: float = 0.0
    gap: float = 0.0

    @classmethod
    def harmonic(cls) -> "LrSchedule":
        return cls("harmonic")

    @classmethod
    def kdppca_experimental(cls, sigma: float, lam: float, lam_next: float, n: int) -> "LrSchedule":
        return cls("kdppca_experimental", sigma=sigma, lam=lam, lam_next=lam_next, n=max(int(n), 2))

    @classmethod
    def theoretical(cls, alpha: float, gap: float, beta: float = 0.0) -> "LrSchedule":
        return cls("theoretical", alpha=alpha, beta=beta, gap=gap)


def lr(schedule: LrSchedule, t: int) -> float:
    """Step size at step t (1-indexed)."""
    if t < 1:
        raise InvalidInput("t must be >= 1")
    if schedule.kind == "harmonic":
        return 1.0 / (1.0 + t)
    if schedule.kind == "kdppca_experimental":
        gap = schedule.lam - schedule.lam_next
        denom = 20.0 * schedule.sigma * schedule.lam + gap * t / math.log(schedule.n)
        if denom <= 0:
            raise InvalidInput("degenerate experimental schedule (zero denominator)")
        return 1.0 / denom
    if schedule.kind == "theoretical":
        if schedule.gap <= 0:
            raise InvalidInput("theoretical schedule needs a positive eigengap")
        return schedule.alpha / (schedule.gap * (schedule.beta + t))
    raise InvalidInput(f"unknown schedule kind {schedule.kind!r}")


def initial_direction(p: Projector, rng) -> np.ndarray:
    """Random unit start in Im(p), resampling once on a degenerate draw."""
    for attempt in range(2):
        try:
            return project_unit(p, rng.standard_normal(p.dim))
        except DegenerateDirection:
            if attempt == 1:
                raise
    raise AssertionError("unreachable")


def run_oja(samples: SampleBatch, p: Projector, schedule: LrSchedule, rng) -> np.ndarray:
    """Oja's algorithm on the projected stream {P A_t P}.

    omega'_t = omega_{t-1} + eta_t P A_t P omega_{t-1}, renormalized inside
    Im(p) every step.  Returns the final unit iterate.
    """
    if len(samples) == 0:
        raise InvalidInput("empty sample stream")
    if p.rank < 1:
        raise InvalidInput("projector must have rank >= 1")
    pm = p.matrix
    omega = initial_direction(p, rng)
    px = samples.x @ pm
    pbase = None if samples.base is None else pm @ samples.base @ pm
    for t in range(1, len(samples) + 1):
        xt = px[t - 1]
        grad = xt * float(xt @ omega)
        if pbase is not None:
            grad = grad + pbase @ omega
        omega = project_unit(p, omega + lr(schedule, t) * grad)
    return omega
