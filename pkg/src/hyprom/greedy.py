"""Offline basis construction: generic greedy, POD-Greedy and PODEIM-Greedy."""
from __future__ import annotations

import itertools
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .eim import EimSpace, EimStagnation, eim_greedy
from .grid import Grid
from .hdm import TimeSchedule, Trajectory, evolve
from .indicator import lipschitz_constant
from .models import Model, NonPhysicalStateError, ParameterDomain
from .online import OnlineOperator
from .pod import ReducedBasis, pod

log = logging.getLogger(__name__)

# error assigned to a training parameter whose reduced solve broke down
FAILED_SOLVE_ERROR = 1e30


@dataclass(frozen=True)
class TrainingSet:
    parameters: np.ndarray  # (n, dim)
    sampling: str
    counts: tuple[int, ...] | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        P = np.atleast_2d(np.asarray(self.parameters, dtype=float))
        if P.shape[0] == 0:
            raise ValueError("training set is empty")
        object.__setattr__(self, "parameters", P)

    def __len__(self) -> int:
        return self.parameters.shape[0]

    def __getitem__(self, i) -> np.ndarray:
        return self.parameters[i]

    @classmethod
    def uniform_grid(cls, domain: ParameterDomain, counts) -> TrainingSet:
        """Tensor grid, first dimension varying slowest; degenerate intervals give one value."""
        counts = tuple(int(c) for c in np.broadcast_to(counts, (domain.dim,)))
        axes = []
        for lo, hi, n in zip(domain.lows, domain.highs, counts):
            if n < 1:
                raise ValueError("grid counts must be positive")
            if lo == hi:
                axes.append(np.array([lo]))
            elif n == 1:
                axes.append(np.array([0.5 * (lo + hi)]))
            else:
                axes.append(np.linspace(lo, hi, n))
        pts = np.array(list(itertools.product(*axes)), dtype=float)
        return cls(pts, "uniform_grid", counts=counts)

    @classmethod
    def monte_carlo(cls, domain: ParameterDomain, M: int, seed: int) -> TrainingSet:
        if M < 1:
            raise ValueError("M must be positive")
        rng = np.random.default_rng(seed)
        lows, highs = np.asarray(domain.lows), np.asarray(domain.highs)
        pts = lows + (highs - lows) * rng.random((int(M), domain.dim))
        return cls(pts, "monte_carlo", seed=int(seed))


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    mu: tuple[float, ...] | None  # parameter whose snapshots drove this update
    max_error: float  # after the update
    n_rb: tuple[int, ...]
    n_eim: tuple[int, ...]
    discarded: bool = False


@dataclass
class OfflineState:
    bases: list[ReducedBasis]
    spaces: list[EimSpace]
    history: list[IterationRecord] = field(default_factory=list)
    converged: bool = False
    last_discarded: bool = False

    @property
    def n_rb(self) -> tuple[int, ...]:
        return tuple(b.size for b in self.bases)

    @property
    def n_eim(self) -> tuple[int, ...]:
        return tuple(s.size for s in self.spaces)


def _solve_one(args):
    model, grid, schedule, mu, muscl = args
    return evolve(model, grid, schedule, mu, muscl=muscl, record_operator=True)


class OfflineProblem:
    """Model, discretisation and training set, with the truth snapshots cached once."""

    def __init__(self, model: Model, grid: Grid, schedule: TimeSchedule, training: TrainingSet,
                 muscl: bool = False, stride: int = 1, workers: int = 1):
        if stride < 1:
            raise ValueError("stride must be >= 1")
        self.model, self.grid, self.schedule = model, grid, schedule
        self.training, self.muscl = training, bool(muscl)
        self.stride, self.workers = int(stride), max(1, int(workers))
        self._snapshots: list[Trajectory] | None = None

    @property
    def weight(self) -> float:
        return self.grid.dx

    @property
    def snapshots(self) -> list[Trajectory]:
        if self._snapshots is None:
            jobs = [(self.model, self.grid, self.schedule, mu, self.muscl) for mu in self.training.parameters]
            if self.workers > 1 and len(jobs) > 1:
                with ProcessPoolExecutor(self.workers) as pool:
                    self._snapshots = list(pool.map(_solve_one, jobs))
            else:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    self._snapshots = [_solve_one(j) for j in jobs]
            self._final_norms = np.array([_system_norm(t.final, self.weight) for t in self._snapshots])
        return self._snapshots

    @property
    def final_norms(self) -> np.ndarray:
        self.snapshots
        return self._final_norms

    def operator_fields(self, i: int, c: int) -> np.ndarray:
        """Operator snapshots of parameter ``i``, component ``c``, every ``stride``-th step."""
        return self.snapshots[i].operators[::self.stride, c, :]

    def eim_training(self, c: int) -> np.ndarray:
        return np.concatenate([self.operator_fields(i, c) for i in range(len(self.training))])

    def online_operator(self, bases, spaces, second_level=None) -> OnlineOperator:
        return OnlineOperator(self.model, self.grid, bases, spaces, self.schedule.dt,
                              muscl=self.muscl, second_level=second_level)


def _system_norm(U, weight) -> float:
    return float(np.sqrt(weight * np.sum(np.asarray(U) ** 2)))


def trajectory_errors(truth: np.ndarray, approx: np.ndarray, weight: float) -> np.ndarray:
    """Per-step system norm of ``truth - approx``, both (K+1, n_components, N_h)."""
    d = truth - approx
    return np.sqrt(weight * np.einsum("kcn,kcn->k", d, d))


def true_errors(problem: OfflineProblem, bases, spaces) -> np.ndarray:
    """``max_k ||u^k - u_RB^k|| / ||u^K||`` for every training parameter."""
    op = problem.online_operator(bases, spaces)
    K = problem.schedule.n_steps
    out = np.empty(len(problem.training))
    for i, (mu, traj) in enumerate(zip(problem.training.parameters, problem.snapshots)):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                red = op.solve(mu, K)
                U = red.reconstruct_all(bases)
                e = float(trajectory_errors(traj.states, U, problem.weight).max())
        except NonPhysicalStateError as exc:
            log.debug("reduced solve failed at training index %d: %s", i, exc)
            e = np.inf
        out[i] = e / problem.final_norms[i] if np.isfinite(e) else FAILED_SOLVE_ERROR
    return out


def projection_errors(problem: OfflineProblem, bases, spaces=None) -> np.ndarray:
    """``max_k ||u^k - Pi u^k|| / ||u^K||``; needs no reduced solve."""
    out = np.empty(len(problem.training))
    for i, traj in enumerate(problem.snapshots):
        sq = np.zeros(traj.states.shape[0])
        for c, b in enumerate(bases):
            r = b.projector_residual(traj.states[:, c, :].T)
            sq += problem.weight * np.einsum("nk,nk->k", r, r)
        out[i] = np.sqrt(sq.max()) / problem.final_norms[i]
    return out


def second_level_spaces(problem: OfflineProblem, spaces, n_extra: int) -> list[EimSpace]:
    """Continue each component's EIM greedy on the training fluxes by ``n_extra`` functions."""
    return [eim_greedy(problem.eim_training(c), 0.0, s.size + n_extra, problem.weight, space=s).space
            for c, s in enumerate(spaces)]


def indicator_errors(problem: OfflineProblem, bases, spaces, C: float, n_extra: int = 5) -> np.ndarray:
    """Error indicator at the final time, relative to the reduced final-state norm."""
    ext = second_level_spaces(problem, spaces, n_extra)
    op = problem.online_operator(bases, spaces, second_level=ext)
    K = problem.schedule.n_steps
    out = np.empty(len(problem.training))
    for i, mu in enumerate(problem.training.parameters):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                red = op.solve(mu, K, indicator_C=C)
            eta = red.indicator.value
            scale = _system_norm(red.reconstruct(bases, -1), problem.weight)
            out[i] = eta / scale if np.isfinite(eta) and scale > 0 else FAILED_SOLVE_ERROR
        except NonPhysicalStateError:
            out[i] = FAILED_SOLVE_ERROR
    return out


def estimate_lipschitz(model: Model, grid: Grid, domain: ParameterDomain, dt: float) -> float:
    """``1 + b*dt`` with ``b`` from the model's state box (a default box for Euler)."""
    box = model.state_box
    if box is None and hasattr(model, "default_state_box"):
        box = model.default_state_box(domain, grid.centers)
    return lipschitz_constant(model.spectral_radius_bound(domain, box), dt)


def make_error_estimate(problem: OfflineProblem, mode: str = "true", C: float | None = None,
                        n_extra: int = 5, domain: ParameterDomain | None = None) -> Callable:
    if mode == "true":
        return lambda st: true_errors(problem, st.bases, st.spaces)
    if mode == "projection":
        return lambda st: projection_errors(problem, st.bases)
    if mode == "indicator":
        if C is None:
            if domain is None:
                raise ValueError("indicator mode needs C or a parameter domain")
            C = estimate_lipschitz(problem.model, problem.grid, domain, problem.schedule.dt)
        return lambda st: indicator_errors(problem, st.bases, st.spaces, C, n_extra)
    raise ValueError(f"unknown error mode {mode!r}")


def run_greedy(state: OfflineState, error_estimate: Callable, update: Callable, training: TrainingSet,
               tol: float, n_max: int, max_iterations: int | None = None) -> OfflineState:
    """Generic greedy loop.

    ``update(state, index, errors)`` returns ``(new_state, new_errors)``;
    ``new_errors`` may be None, in which case they are re-estimated. The loop
    stops when the max error is at most ``tol``, when some component's RB size
    reaches ``n_max``, or when an update changes nothing.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if len(training) == 0:
        raise ValueError("empty training set")
    max_iterations = max_iterations if max_iterations is not None else 10 * n_max
    errors = np.asarray(error_estimate(state), dtype=float)
    _check_finite(errors)
    if not state.history:
        state.history.append(IterationRecord(0, None, float(errors.max()), state.n_rb, state.n_eim))
    it = state.history[-1].iteration
    while errors.max() > tol and max(state.n_rb, default=0) < n_max and it < max_iterations:
        i = int(np.argmax(errors))
        sizes = (state.n_rb, state.n_eim)
        state, new_errors = update(state, i, errors)
        errors = np.asarray(error_estimate(state) if new_errors is None else new_errors, dtype=float)
        _check_finite(errors)
        it += 1
        discarded = state.last_discarded
        state.history.append(IterationRecord(it, tuple(float(v) for v in training[i]), float(errors.max()),
                                             state.n_rb, state.n_eim, discarded))
        log.info("greedy it %d: mu=%s err=%.3e N=%s N_EIM=%s%s", it, training[i], errors.max(),
                 state.n_rb, state.n_eim, " (RB discarded)" if discarded else "")
        if (state.n_rb, state.n_eim) == sizes:
            log.warning("greedy stalled: update did not change the bases")
            break
    state.converged = bool(errors.max() <= tol)
    return state


def _check_finite(errors) -> None:
    if errors.size == 0:
        raise ValueError("error estimate returned nothing")
    if not np.all(np.isfinite(errors)):
        bad = np.flatnonzero(~np.isfinite(errors))
        raise FloatingPointError(f"non-finite error estimate at training indices {bad.tolist()}")


def pod_greedy_update(rb: ReducedBasis, states: np.ndarray, n_pod_add: int = 1,
                      compression_tol: float = 1e-10) -> ReducedBasis:
    """Extend ``rb`` with POD modes of the projection errors of ``states`` (K+1, N_h).

    The union is compressed by a second POD with energy tolerance ``compression_tol``.
    """
    V = np.asarray(states, dtype=float).T
    if V.shape[0] != rb.n_dofs:
        raise ValueError("trajectory and basis dimensions differ")
    E = rb.projector_residual(V)
    scale = float(np.abs(V).max()) if V.size else 0.0
    if not np.abs(E).max(initial=0.0) > 1e-13 * max(scale, 1e-300):
        return rb
    add = pod(E, rb.weight, n_modes=n_pod_add)
    if add.size == 0:
        return rb
    if rb.size:
        # re-orthogonalise against rb to remove round-off before compression
        add_vec = add.vectors - rb.reconstruct(rb.project(add.vectors))
        combined = np.column_stack([rb.vectors, add_vec])
    else:
        combined = add.vectors
    return pod(combined, rb.weight, tol=compression_tol)


def init_bases(problem: OfflineProblem, mu0_index: int = 0, n_pod_init: int = 3,
               eim_tol: float = 1e-6, eim_max: int | None = None) -> OfflineState:
    """RB from the POD of the ``mu0`` trajectory; EIM greedy over all training fluxes to ``eim_tol``."""
    if not 0 <= mu0_index < len(problem.training):
        raise ValueError("mu0 must belong to the training set")
    traj = problem.snapshots[mu0_index]
    w = problem.weight
    bases = [pod(traj.states[:, c, :].T, w, n_modes=n_pod_init) for c in range(problem.model.n_components)]
    eim_max = problem.grid.n_cells if eim_max is None else eim_max
    spaces = []
    for c in range(problem.model.n_components):
        res = eim_greedy(problem.eim_training(c), eim_tol, eim_max, w)
        log.info("EIM component %d: %d functions, error %.3e", c, res.space.size, res.history[-1])
        spaces.append(res.space)
    return OfflineState(bases, spaces)


def sequential_update(problem: OfflineProblem, n_pod_add: int = 1, compression_tol: float = 1e-10):
    """POD-Greedy step with frozen EIM spaces."""

    def update(state: OfflineState, i: int, errors):
        traj = problem.snapshots[i]
        bases = [pod_greedy_update(b, traj.states[:, c, :], n_pod_add, compression_tol)
                 for c, b in enumerate(state.bases)]
        return replace(state, bases=bases, last_discarded=False), None

    return update


def worst_flux_extension(problem: OfflineProblem, space: EimSpace, i: int, c: int) -> EimSpace:
    """Extend ``space`` with the operator snapshot of parameter ``i`` it interpolates worst."""
    F = problem.operator_fields(i, c)
    R = F.copy()
    if space.size:
        R -= (space.functions @ space.coefficients(F[:, space.magic].T)).T
    errs = np.einsum("kn,kn->k", R, R)
    k = int(np.argmax(errs))
    return space.update(F[k])


def podei_greedy_step(problem: OfflineProblem, error_estimate: Callable, n_pod_add: int = 1,
                      compression_tol: float = 1e-10):
    """Synchronised RB/EIM extension with the error-increase discard rule.

    Each step adds one EIM function per component, taken from the worst
    interpolated flux snapshot of the selected parameter, and tentatively
    extends the RB. If the previous error at the selected parameter (the
    previous maximum) is smaller than the new maximum over the training set,
    the RB extension is dropped and only the EIM extension kept.
    """

    def update(state: OfflineState, i: int, errors):
        spaces = []
        for c, s in enumerate(state.spaces):
            try:
                spaces.append(worst_flux_extension(problem, s, i, c))
            except EimStagnation:
                spaces.append(s)
        traj = problem.snapshots[i]
        bases = [pod_greedy_update(b, traj.states[:, c, :], n_pod_add, compression_tol)
                 for c, b in enumerate(state.bases)]
        trial = replace(state, bases=bases, spaces=spaces, last_discarded=False)
        new_errors = np.asarray(error_estimate(trial), dtype=float)
        if errors[i] < new_errors.max():
            return replace(state, spaces=spaces, last_discarded=True), None
        return trial, new_errors

    return update


@dataclass
class OfflineSettings:
    mode: str = "sequential"  # or "podei"
    error_mode: str = "true"
    greedy_tol: float = 1e-4
    n_max: int = 50
    max_iterations: int | None = None
    eim_tol: float = 1e-6
    eim_max: int | None = None
    eim_seed_tol: float = 1e-2
    eim_seed_max: int = 3
    n_pod_init: int = 3
    n_pod_add: int = 1
    compression_tol: float = 1e-10
    n_eim_extra: int = 5
    mu0_index: int = 0
    lipschitz: float | None = None


def run_offline(problem: OfflineProblem, settings: OfflineSettings,
                domain: ParameterDomain | None = None) -> OfflineState:
    """Full offline phase in ``sequential`` or ``podei`` mode."""
    s = settings
    estimate = make_error_estimate(problem, s.error_mode, s.lipschitz, s.n_eim_extra, domain)
    if s.mode == "sequential":
        state = init_bases(problem, s.mu0_index, s.n_pod_init, s.eim_tol, s.eim_max)
        update = sequential_update(problem, s.n_pod_add, s.compression_tol)
    elif s.mode == "podei":
        state = init_bases(problem, s.mu0_index, s.n_pod_init, s.eim_seed_tol, s.eim_seed_max)
        update = podei_greedy_step(problem, estimate, s.n_pod_add, s.compression_tol)
    else:
        raise ValueError(f"unknown offline mode {s.mode!r}")
    state = run_greedy(state, estimate, update, problem.training, s.greedy_tol, s.n_max, s.max_iterations)
    if not state.converged:
        warnings.warn(f"offline greedy stopped above tolerance (max error {state.history[-1].max_error:.3e})",
                      RuntimeWarning, stacklevel=2)
    return state
