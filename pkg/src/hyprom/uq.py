"""Monte Carlo statistics of final-time fields over random parameters."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .hdm import TimeSchedule, evolve
from .models import Model, ParameterDomain

log = logging.getLogger(__name__)

VARIANCE_CLAMP = 1e-14


@dataclass(frozen=True)
class DistributionSpec:
    """Independent uniform laws ``U[lo, hi]`` per parameter dimension."""

    lows: tuple[float, ...]
    highs: tuple[float, ...]
    seed: int
    M: int

    def __post_init__(self) -> None:
        lows = tuple(float(v) for v in np.atleast_1d(self.lows))
        highs = tuple(float(v) for v in np.atleast_1d(self.highs))
        if len(lows) != len(highs):
            raise ValueError("lows and highs differ in length")
        if any(h < l for l, h in zip(lows, highs)):
            raise ValueError("each law needs lo <= hi")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError("M must be a positive integer")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "lows", lows)
        object.__setattr__(self, "highs", highs)

    @classmethod
    def uniform(cls, domain: ParameterDomain, seed: int, M: int) -> DistributionSpec:
        return cls(tuple(domain.lows), tuple(domain.highs), seed, M)

    @property
    def dim(self) -> int:
        return len(self.lows)


def sample_parameters(spec: DistributionSpec) -> np.ndarray:
    """``M`` i.i.d. draws, one row per sample, reproducible from the seed."""
    rng = np.random.default_rng(int(spec.seed))
    u = rng.random((spec.M, spec.dim))
    lows, highs = np.array(spec.lows), np.array(spec.highs)
    return lows + (highs - lows) * u


def _stack(fields) -> np.ndarray:
    try:
        A = np.asarray(fields, dtype=float)
    except ValueError as exc:
        raise ValueError("fields must all have the same shape") from exc
    if A.dtype == object or A.ndim < 1:
        raise ValueError("fields must all have the same shape")
    return A


def mc_mean(fields) -> np.ndarray:
    """Sample mean, summed in sample order as deviations from the first sample.

    The shift keeps identical samples exact and reduces cancellation.
    """
    A = _stack(fields)
    if A.shape[0] < 1:
        raise ValueError("need at least one sample")
    ref = A[0]
    acc = np.zeros(A.shape[1:])
    for a in A[1:]:
        acc += a - ref
    return ref + acc / A.shape[0]


def mc_variance(fields, mean=None) -> np.ndarray:
    """Unbiased sample variance ``sum (u_i - mean)^2 / (M - 1)``."""
    A = _stack(fields)
    M = A.shape[0]
    if M < 2:
        raise ValueError("unbiased variance needs at least two samples")
    mean = mc_mean(A) if mean is None else np.asarray(mean, dtype=float)
    if mean.shape != A.shape[1:]:
        raise ValueError("mean shape does not match the fields")
    acc = np.zeros(A.shape[1:])
    for a in A:
        d = a - mean
        acc += d * d
    var = acc / (M - 1)
    if np.any(var < -VARIANCE_CLAMP):
        raise FloatingPointError("negative variance beyond round-off")
    return np.maximum(var, 0.0)


@dataclass
class McStatistics:
    mean: np.ndarray  # (n_components, N_h)
    variance: np.ndarray
    M: int

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)

    @property
    def mean_plus_std(self) -> np.ndarray:
        return self.mean + self.std

    @property
    def mean_minus_std(self) -> np.ndarray:
        return self.mean - self.std

    @classmethod
    def from_fields(cls, fields) -> McStatistics:
        A = _stack(fields)
        mean = mc_mean(A)
        return cls(mean, mc_variance(A, mean), A.shape[0])


@dataclass
class CampaignResult:
    stats: McStatistics
    parameters: np.ndarray
    finals: np.ndarray  # (M, n_components, N_h)
    timings: np.ndarray  # seconds per solve
    flux_evaluations: np.ndarray  # per solve
    solver: str
    extra: dict = field(default_factory=dict)

    @property
    def mean_time(self) -> float:
        return float(self.timings.mean())


def run_uq_campaign(solver: str, model: Model, grid, schedule: TimeSchedule, spec: DistributionSpec,
                    online=None, bases=None, muscl: bool = False, parameters=None) -> CampaignResult:
    """Monte Carlo over ``spec`` with truth or reduced solves, timing each solve.

    ``online`` (an OnlineOperator) and ``bases`` are required for the reduced
    solver. ``parameters`` overrides sampling (e.g. to share samples).
    """
    if solver not in ("reduced", "truth"):
        raise ValueError(f"unknown solver {solver!r}")
    if solver == "reduced" and (online is None or bases is None):
        raise ValueError("reduced campaigns need the offline artifacts")
    mus = sample_parameters(spec) if parameters is None else np.atleast_2d(np.asarray(parameters, float))
    finals = np.empty((len(mus), model.n_components, grid.n_cells))
    timings = np.empty(len(mus))
    counts = np.empty(len(mus), dtype=np.int64)
    K = schedule.n_steps
    for i, mu in enumerate(mus):
        try:
            t0 = time.perf_counter()
            if solver == "truth":
                traj = evolve(model, grid, schedule, mu, muscl=muscl)
                timings[i] = time.perf_counter() - t0
                finals[i] = traj.final
                counts[i] = traj.flux_evaluations
            else:
                red = online.solve(mu, K)
                timings[i] = time.perf_counter() - t0
                finals[i] = red.reconstruct(bases, -1)
                counts[i] = K * red.flux_evaluations_per_step
        except Exception as exc:
            raise RuntimeError(f"{solver} solve failed for sample {i} (mu={mu.tolist()}): {exc}") from exc
        if not np.all(np.isfinite(finals[i])):
            raise RuntimeError(f"{solver} solve for sample {i} produced non-finite values")
    stats = McStatistics.from_fields(finals) if len(mus) >= 2 else McStatistics(mc_mean(finals), None, 1)
    log.info("%s campaign: M=%d, mean solve %.4fs", solver, len(mus), timings.mean())
    return CampaignResult(stats, mus, finals, timings, counts, solver)
