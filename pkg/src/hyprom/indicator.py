"""A-posteriori error indicator for reduced trajectories."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def lipschitz_constant(b: float, dt: float) -> float:
    """``C = 1 + b*dt`` from a bound ``b`` on the flux-Jacobian spectral radius."""
    if b < 0 or dt <= 0:
        raise ValueError("need b >= 0 and dt > 0")
    return 1.0 + b * dt


def step_residual_norm(alpha_prev, alpha_next, projected_flux, dt: float,
                       sigma=None, gram=None) -> float:
    """``||R^k||`` with ``dt R^k = u_RB^k - u_RB^{k-1} + dt I[L](u_RB^{k-1})``.

    Everything is evaluated in coefficient space. ``projected_flux`` holds the
    RB coefficients of ``Pi I[L]``. When the EIM coefficients ``sigma`` and the
    Gram matrix of the EIM functions are given, the part of ``I[L]`` outside
    the reduced space is included; without them only the in-space part is.
    """
    d = np.asarray(alpha_next, dtype=float) - np.asarray(alpha_prev, dtype=float)
    proj = np.asarray(projected_flux, dtype=float)
    if sigma is not None:
        sig = np.asarray(sigma, dtype=float)
        flux_sq = float(sig @ (gram @ sig))
    else:
        flux_sq = float(proj @ proj)
    sq = float(d @ d) + 2.0 * dt * float(d @ proj) + dt * dt * flux_sq
    return math.sqrt(max(sq, 0.0)) / dt


def error_indicator(theta, q_norms, residual_norms, dt: float, C: float, initial: float = 0.0) -> float:
    """Closed form ``eta^K = sum_k C^(K-k) (dt sum_m |theta_m^k| ||q'_m|| + dt ||R^k||)``.

    ``theta`` is (K, M'), ``residual_norms`` has length K. ``initial`` is an
    error already present at step 0 and is carried with weight ``C^K``.
    """
    res = np.asarray(residual_norms, dtype=float)
    K = res.size
    theta = np.asarray(theta, dtype=float).reshape(K, -1)
    q_norms = np.asarray(q_norms, dtype=float)
    terms = dt * (np.abs(theta) @ q_norms) + dt * res
    weights = C ** (K - np.arange(1, K + 1, dtype=float))
    return float(weights @ terms + C ** K * initial)


@dataclass
class IndicatorAccumulator:
    """Recursive form ``eta^k = C eta^{k-1} + term_k``."""

    C: float
    initial: float = 0.0
    eta: list[float] = field(default_factory=list)
    eim_terms: list[float] = field(default_factory=list)
    residual_terms: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.eta:
            self.eta.append(float(self.initial))

    def push(self, eim_term: float, residual_term: float) -> float:
        self.eim_terms.append(eim_term)
        self.residual_terms.append(residual_term)
        self.eta.append(self.C * self.eta[-1] + eim_term + residual_term)
        return self.eta[-1]

    @property
    def value(self) -> float:
        return self.eta[-1]


@dataclass
class BoundReport:
    mu: np.ndarray
    true_error: np.ndarray
    eta: np.ndarray
    mode: str

    @property
    def effectivity(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.true_error > 0, self.eta / self.true_error, np.inf)

    @property
    def slack(self) -> np.ndarray:
        return self.eta - self.true_error

    def violations(self, tol: float = 1e-12) -> np.ndarray:
        return np.flatnonzero(self.slack < -tol)

    def rows(self):
        for mu, e, eta, eff in zip(self.mu, self.true_error, self.eta, self.effectivity):
            yield list(np.atleast_1d(mu)), float(e), float(eta), float(eff)


def validate_bound(model, grid, schedule, bases, spaces, mu_set, mode: str = "full_second_level",
                   n_extra: int = 5, training=None, muscl: bool = False, C: float | None = None,
                   domain=None) -> BoundReport:
    """Compare ``eta^K`` with the true final-time error for each parameter.

    ``full_second_level`` completes every EIM space to all DoFs, so the
    interpolation of the operator is exact and ``eta`` is a guaranteed bound.
    ``fixed`` continues the EIM greedy on ``training`` (per component lists of
    operator snapshots) by ``n_extra`` functions.
    """
    from .eim import complete_space, eim_greedy
    from .hdm import evolve
    from .online import OnlineOperator, system_norm

    if mode == "full_second_level":
        extended = [complete_space(s) for s in spaces]
    elif mode == "fixed":
        if training is None:
            raise ValueError("fixed second-level mode needs training snapshots")
        extended = [eim_greedy(T, 0.0, s.size + n_extra, s.weight, space=s).space
                    for T, s in zip(training, spaces)]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if C is None:
        if domain is None:
            raise ValueError("give C or a parameter domain for the Lipschitz estimate")
        C = lipschitz_constant(model.spectral_radius_bound(domain), schedule.dt)
    op = OnlineOperator(model, grid, bases, spaces, schedule.dt, muscl=muscl, second_level=extended)
    mus, errs, etas = [], [], []
    for mu in mu_set:
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        truth = evolve(model, grid, schedule, mu, muscl=muscl)
        red = op.solve(mu, schedule.n_steps, indicator_C=C)
        uK = red.reconstruct(bases, -1)
        errs.append(system_norm(truth.final - uK, grid.dx))
        etas.append(red.indicator.value)
        mus.append(mu)
    return BoundReport(np.array(mus), np.array(errs), np.array(etas), mode)
