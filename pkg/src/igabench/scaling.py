"""Speedup, efficiency and Amdahl-law analysis of benchmark records."""

import math
from dataclasses import dataclass, field

import numpy as np

from .runtime import RunConfig


@dataclass(frozen=True)
class BenchRecord:
    """One benchmark observation: a configuration with its timing samples.

    The summary statistic is the minimum over repetitions (least noise for
    strong-scaling curves); mean and standard deviation are kept alongside.
    """

    config: RunConfig
    times: list[float] = field(default_factory=list)
    flops: int = 0

    def __post_init__(self):
        if not self.times or any(t <= 0 for t in self.times):
            raise ValueError("times must be non-empty and positive")

    @property
    def best(self) -> float:
        return min(self.times)

    @property
    def mean(self) -> float:
        return float(np.mean(self.times))

    @property
    def std(self) -> float:
        return float(np.std(self.times))


@dataclass(frozen=True)
class AmdahlEstimate:
    """Parallel fraction and asymptotic speedup inferred from one measurement."""

    nu: int
    S_nu: float
    P: float
    S_inf: float
    out_of_model: bool = False


def speedup(t1: float, t_nu: float) -> float:
    """Strong-scaling speedup ``t1 / t_nu``."""
    if t1 <= 0 or t_nu <= 0:
        raise ValueError("times must be positive")
    return t1 / t_nu


def efficiency(S: float, nu: int) -> float:
    """Parallel efficiency ``S / nu``; values above 1 indicate superlinear runs."""
    if nu < 1:
        raise ValueError("worker count must be >= 1")
    return S / nu


def amdahl_fraction(nu: int, S: float) -> float:
    """Parallel fraction ``P = (nu/S - nu) / (1 - nu)`` from a measured speedup.

    The formula is singular at one worker, so ``nu >= 2`` is required.
    Values outside ``[0, 1]`` (superlinear or degraded runs) are returned
    as computed; callers flag them as out-of-model.
    """
    if nu < 2:
        raise ValueError("Amdahl fraction requires nu >= 2")
    if S <= 0:
        raise ValueError("speedup must be positive")
    return (nu / S - nu) / (1 - nu)


def amdahl_limit(P: float) -> float:
    """Asymptotic speedup ``1 / (1 - P)``; a fully parallel program is unbounded."""
    if not 0.0 <= P <= 1.0:
        raise ValueError(f"parallel fraction {P} outside [0, 1]")
    if P == 1.0:
        return math.inf
    return 1.0 / (1.0 - P)


def estimate_amdahl(nu: int, S: float) -> AmdahlEstimate:
    """Full estimate from one ``(nu, S)`` pair.

    A single-worker observation with ``S = 1`` carries no parallel
    evidence and is reported as ``P = 0``.  Fractions outside ``[0, 1]``
    are flagged out-of-model and the limit is computed from the clamped
    value for reporting only.
    """
    if nu == 1:
        if not math.isclose(S, 1.0, rel_tol=1e-9):
            raise ValueError("a single-worker speedup must be 1")
        return AmdahlEstimate(nu=1, S_nu=S, P=0.0, S_inf=1.0)
    P = amdahl_fraction(nu, S)
    out = not 0.0 <= P <= 1.0
    S_inf = amdahl_limit(min(max(P, 0.0), 1.0)) if out else amdahl_limit(P)
    return AmdahlEstimate(nu=nu, S_nu=S, P=P, S_inf=S_inf, out_of_model=out)


def combined_limit(S_i_inf: float, S_e_inf: float) -> float:
    """Combined asymptotic speedup of two nested parallel layers (their product)."""
    if S_i_inf < 1 or S_e_inf < 1:
        raise ValueError("asymptotic speedups must be >= 1")
    return S_i_inf * S_e_inf


def fit_complexity_slope(records: list[BenchRecord], quantity: str = "flops") -> float:
    """Least-squares slope of ``log(quantity)`` against ``log(p + 1)``.

    ``quantity`` is ``"flops"`` (modelled operation count) or ``"time"``
    (best wall time).  At least four distinct degrees are required.
    """
    if quantity not in ("flops", "time"):
        raise ValueError("quantity must be 'flops' or 'time'")
    degrees = [r.config.degree for r in records]
    if len(set(degrees)) < 4:
        raise ValueError("need at least 4 distinct degrees for a slope fit")
    x = np.log([p + 1 for p in degrees])
    y = np.log([r.flops if quantity == "flops" else r.best for r in records])
    return float(np.polyfit(x, y, 1)[0])
