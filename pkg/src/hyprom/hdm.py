"""High-fidelity finite-volume evolution in residual-distribution form.

The operator value at cell ``i`` is the assembled nodal residual
``(F[i+1/2] - F[i-1/2]) / dx``: each interface (the 1D "element" shared by
two cells) produces a total residual that is split entirely onto its two
neighbours with opposite signs. Face ``j`` is the right face of cell ``j``;
face ``-1`` is the left face of cell 0.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .grid import Grid, cfl_number, stencil_width
from .models import Euler, Model, NonPhysicalStateError, minmod

log = logging.getLogger(__name__)


class CFLViolationError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeSchedule:
    dt: float
    n_steps: int

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError("n_steps must be a positive integer")

    @property
    def t_final(self) -> float:
        return self.n_steps * self.dt


@dataclass
class Trajectory:
    """Truth states ``u^0..u^K`` with shape (K+1, n_components, N_h)."""

    states: np.ndarray
    mu: np.ndarray
    operators: np.ndarray | None = None  # L[u^k] for k = 0..K-1 when recorded
    flux_evaluations: int = 0

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.states)):
            raise ValueError("trajectory contains non-finite values")

    @property
    def n_steps(self) -> int:
        return self.states.shape[0] - 1

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def muscl_reconstruct(model: Model, block: np.ndarray, mu) -> tuple[np.ndarray, np.ndarray]:
    """Limited interface states at the faces between cells 1 and 2 of each block.

    ``block`` has shape (n_components, F, 4). Systems are limited on
    characteristic variables linearised at the arithmetic mean of the two
    cells adjacent to the face. Faces whose reconstruction is non-physical
    fall back to first order.
    """
    block = np.asarray(block, dtype=float)
    squeeze = block.ndim == 2
    if squeeze:
        block = block[:, None, :]
    if not isinstance(model, Euler):
        d = np.diff(block, axis=-1)
        sl = minmod(d[..., 0], d[..., 1])
        sr = minmod(d[..., 1], d[..., 2])
        uL = block[..., 1] + 0.5 * sl
        uR = block[..., 2] - 0.5 * sr
    else:
        g = model.gamma(mu)
        Ubar = 0.5 * (block[:, :, 1] + block[:, :, 2])
        L, R = model.eigenvectors(Ubar, g)
        b0, b1, b2 = block[0], block[1], block[2]
        w = [L[i][0][:, None] * b0 + L[i][1][:, None] * b1 + L[i][2][:, None] * b2 for i in range(3)]
        wL, wR = [], []
        for wi in w:
            d0 = wi[:, 1] - wi[:, 0]
            d1 = wi[:, 2] - wi[:, 1]
            d2 = wi[:, 3] - wi[:, 2]
            wL.append(wi[:, 1] + 0.5 * minmod(d0, d1))
            wR.append(wi[:, 2] - 0.5 * minmod(d1, d2))
        uL = np.array([R[i][0] * wL[0] + R[i][1] * wL[1] + R[i][2] * wL[2] for i in range(3)])
        uR = np.array([R[i][0] * wR[0] + R[i][1] * wR[1] + R[i][2] * wR[2] for i in range(3)])
        ok = _euler_admissible(uL, g) & _euler_admissible(uR, g)
        if not ok.all():
            uL = np.where(ok, uL, block[:, :, 1])
            uR = np.where(ok, uR, block[:, :, 2])
    if squeeze:
        return uL[:, 0], uR[:, 0]
    return uL, uR


def _euler_admissible(U, g):
    rho = U[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        p = (g - 1.0) * (U[2] - 0.5 * U[1] * U[1] / rho)
    return (rho > 0) & (p > 0)


class LocalOperator:
    """Discrete operator restricted to a set of target cells.

    Only the cells in ``self.cells`` (the stencil union of the targets) are
    read. Evaluating with all cells as targets is the full truth operator, so
    restricted and full evaluations share every floating-point operation.
    """

    def __init__(self, grid: Grid, targets, muscl: bool = False):
        self.grid = grid
        self.muscl = bool(muscl)
        self.width = stencil_width(self.muscl)
        n = grid.n_cells
        targets = np.unique(np.asarray(targets, dtype=int))
        if targets.size and (targets[0] < 0 or targets[-1] >= n):
            raise IndexError("target cell outside grid")
        self.targets = targets
        left = targets - 1
        if grid.boundary == "periodic":
            left = np.mod(left, n)
        faces = np.unique(np.concatenate([left, targets]))
        offsets = np.arange(-1, 3) if self.muscl else np.arange(0, 2)
        face_cells = grid.wrap(faces[:, None] + offsets[None, :])
        self.faces = faces
        self.cells = np.unique(face_cells)
        self._face_local = np.searchsorted(self.cells, face_cells)
        self._left = np.searchsorted(faces, left)
        self._right = np.searchsorted(faces, targets)
        self._inv_dx = 1.0 / grid.dx

    @property
    def n_targets(self) -> int:
        return self.targets.size

    def flux_evaluation_count(self) -> int:
        """Physical-flux point evaluations made by one call to ``evaluate``."""
        return 2 * self.faces.size if self.muscl else self.cells.size

    def face_fluxes(self, model: Model, U: np.ndarray, mu, kernels=None) -> np.ndarray:
        """Numerical fluxes at ``self.faces`` from states on ``self.cells``."""
        if U.shape[-1] != self.cells.size:
            raise ValueError(f"expected states on {self.cells.size} cells, got {U.shape[-1]}")
        point, riemann = kernels or model.kernels(mu)
        idx = self._face_local
        if self.muscl:
            if isinstance(model, Euler):
                model._primitives(U, model.gamma(mu), self.cells)
            uL, uR = muscl_reconstruct(model, U[:, idx], mu)
            fL, sL = point(uL)
            fR, sR = point(uR)
        else:
            f, s = point(U, self.cells)
            li, ri = idx[:, 0], idx[:, 1]
            uL, uR = U[:, li], U[:, ri]
            fL, fR = f[:, li], f[:, ri]
            sL, sR = s[li], s[ri]
        self.last_max_speed = float(max(sL.max(), sR.max())) if sL.size else 0.0
        return riemann(uL, uR, fL, fR, sL, sR)

    def evaluate(self, model: Model, U: np.ndarray, mu, kernels=None) -> np.ndarray:
        """Operator values at the targets from states on ``self.cells``."""
        F = self.face_fluxes(model, U, mu, kernels)
        return (F[:, self._right] - F[:, self._left]) * self._inv_dx

    def difference_matrix(self, targets) -> np.ndarray:
        """Dense (len(targets), n_faces) matrix mapping face fluxes to operator values."""
        pos = np.searchsorted(self.targets, targets)
        if not np.array_equal(self.targets[pos], targets):
            raise ValueError("difference rows requested for non-target cells")
        D = np.zeros((pos.size, self.faces.size))
        rows = np.arange(pos.size)
        D[rows, self._right[pos]] += self._inv_dx
        D[rows, self._left[pos]] -= self._inv_dx
        return D


@lru_cache(maxsize=32)
def full_operator(grid: Grid, muscl: bool) -> LocalOperator:
    return LocalOperator(grid, np.arange(grid.n_cells), muscl)


def apply_operator(model: Model, grid: Grid, state: np.ndarray, mu, muscl: bool = False) -> np.ndarray:
    """``L[u]`` at every cell for a state shaped (n_components, N_h)."""
    state = np.asarray(state, dtype=float)
    if state.shape != (model.n_components, grid.n_cells):
        raise ValueError(f"state shape {state.shape} does not match model/grid")
    return full_operator(grid, bool(muscl)).evaluate(model, state, mu)


def initial_state(model: Model, grid: Grid, mu) -> np.ndarray:
    return model.initial_condition(grid.centers, mu)


def evolve(model: Model, grid: Grid, schedule: TimeSchedule, mu, muscl: bool = False,
           record_operator: bool = False, allow_cfl_violation: bool = False) -> Trajectory:
    """Forward-Euler march ``u^{k+1} = u^k - dt L[u^k]`` from cell-centre initial data.

    The CFL number is checked each step against the largest wave speed seen
    in the flux evaluation; above 1 this is an error unless explicitly allowed.
    """
    if model.boundary != grid.boundary:
        raise ValueError(f"model boundary {model.boundary!r} differs from grid {grid.boundary!r}")
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    op = full_operator(grid, bool(muscl))
    K, dt = schedule.n_steps, schedule.dt
    states = np.empty((K + 1, model.n_components, grid.n_cells))
    states[0] = initial_state(model, grid, mu)
    ops = np.empty((K, model.n_components, grid.n_cells)) if record_operator else None
    warned = False
    kernels = model.kernels(mu)
    for k in range(K):
        Lu = op.evaluate(model, states[k], mu, kernels)
        nu = cfl_number(dt, grid.dx, op.last_max_speed)
        if nu > 1.0 and not allow_cfl_violation:
            raise CFLViolationError(f"CFL number {nu:.4f} > 1 at step {k}")
        if nu > 0.9 and not warned:
            warnings.warn(f"CFL number {nu:.4f} above 0.9 at step {k}", RuntimeWarning, stacklevel=2)
            warned = True
        if ops is not None:
            ops[k] = Lu
        np.subtract(states[k], dt * Lu, out=states[k + 1])
    return Trajectory(states, mu, ops, K * op.flux_evaluation_count())
