"""Empirical interpolation of discrete operator snapshots (magic DoFs)."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import solve_triangular

from .grid import Grid, stencil_union

STAGNATION = 1e-12
_CHUNK = 4096


class EimStagnation(RuntimeError):
    """The field is already interpolated exactly; no new magic DoF exists."""


def _stagnation_threshold(scale: float) -> float:
    return STAGNATION * max(1.0, scale)


@dataclass
class EimSpace:
    """Interpolation functions ``q_m`` (columns), magic DoFs and the matrix ``B_ij = q_j(tau_i)``.

    ``B`` is lower triangular with unit diagonal, so ``tau_m(q_n) = delta_mn``
    for ``m <= n``.
    """

    functions: np.ndarray
    magic: np.ndarray
    weight: float

    def __post_init__(self) -> None:
        self.functions = np.asarray(self.functions, dtype=float)
        self.magic = np.asarray(self.magic, dtype=int)
        if self.functions.ndim != 2 or self.functions.shape[1] != self.magic.size:
            raise ValueError("functions must be (N_h, M) with M magic DoFs")

    @classmethod
    def empty(cls, n_dofs: int, weight: float) -> EimSpace:
        return cls(np.zeros((n_dofs, 0)), np.zeros(0, dtype=int), weight)

    @property
    def size(self) -> int:
        return self.magic.size

    @property
    def n_dofs(self) -> int:
        return self.functions.shape[0]

    @cached_property
    def matrix(self) -> np.ndarray:
        return self.functions[self.magic, :]

    @cached_property
    def inverse_matrix(self) -> np.ndarray:
        M = self.size
        if M == 0:
            return np.zeros((0, 0))
        return solve_triangular(self.matrix, np.eye(M), lower=True, unit_diagonal=True)

    @cached_property
    def gram(self) -> np.ndarray:
        return self.weight * (self.functions.T @ self.functions)

    @cached_property
    def norms(self) -> np.ndarray:
        return np.sqrt(np.maximum(np.diag(self.gram), 0.0))

    def truncate(self, m: int) -> EimSpace:
        if not 0 <= m <= self.size:
            raise ValueError(f"cannot truncate {self.size} functions to {m}")
        return EimSpace(self.functions[:, :m].copy(), self.magic[:m].copy(), self.weight)

    def point_values(self, field) -> np.ndarray:
        return np.asarray(field)[self.magic]

    def coefficients(self, point_values) -> np.ndarray:
        pv = np.asarray(point_values, dtype=float)
        if pv.shape[0] != self.size:
            raise ValueError(f"expected {self.size} point values, got {pv.shape[0]}")
        if self.size == 0:
            return np.zeros_like(pv)
        return solve_triangular(self.matrix, pv, lower=True, unit_diagonal=True)

    def interpolate(self, point_values) -> np.ndarray:
        sigma = self.coefficients(point_values)
        return self.functions @ sigma

    def residual(self, field) -> np.ndarray:
        field = np.asarray(field, dtype=float)
        return field - self.interpolate(field[self.magic])

    def error(self, field) -> float:
        r = self.residual(field)
        return float(np.sqrt(self.weight * np.dot(r, r)))

    def update(self, field) -> EimSpace:
        """Add the normalised residual of ``field`` at its largest-magnitude DoF."""
        field = np.asarray(field, dtype=float)
        if field.shape != (self.n_dofs,):
            raise ValueError("field length mismatch")
        r = self.residual(field)
        return self._extend(r, np.abs(field).max())

    def _extend(self, r: np.ndarray, scale: float) -> EimSpace:
        tau = int(np.argmax(np.abs(r)))
        if abs(r[tau]) < _stagnation_threshold(scale):
            raise EimStagnation(f"residual max {abs(r[tau]):.3e} below stagnation threshold")
        q = r / r[tau]
        q[tau] = 1.0
        q[self.magic] = 0.0
        return EimSpace(np.column_stack([self.functions, q]), np.append(self.magic, tau), self.weight)

    def stencil_union(self, grid: Grid, width: int) -> np.ndarray:
        return stencil_union(grid, width, self.magic)

    def relaxed_kronecker_error(self) -> float:
        if self.size == 0:
            return 0.0
        B = self.matrix
        upper = np.triu(B)
        return float(np.abs(upper - np.eye(self.size)).max())


def eim_coefficients(space: EimSpace, point_values) -> np.ndarray:
    return space.coefficients(point_values)


def eim_interpolate(space: EimSpace, point_values) -> np.ndarray:
    return space.interpolate(point_values)


def eim_error(space: EimSpace, full_field) -> float:
    return space.error(full_field)


def eim_update(space: EimSpace, full_field) -> EimSpace:
    return space.update(full_field)


@dataclass
class EimGreedyResult:
    space: EimSpace
    history: list[float] = field(default_factory=list)
    picked: list[int] = field(default_factory=list)
    stagnated: bool = False


def _row_norms(R: np.ndarray, weight: float) -> np.ndarray:
    out = np.empty(R.shape[0])
    for s in range(0, R.shape[0], _CHUNK):
        blk = R[s:s + _CHUNK]
        out[s:s + _CHUNK] = np.einsum("ij,ij->i", blk, blk)
    return np.sqrt(weight * out)


def eim_greedy(training, tol: float, max_size: int, weight: float,
               space: EimSpace | None = None) -> EimGreedyResult:
    """Greedy EIM over training fields (rows of ``training``).

    Each step interpolates every training field, picks the worst one (lowest
    index on ties) and extends the space with its residual. Residuals are
    updated in place: adding ``q`` changes every interpolant by
    ``r(tau) * q`` because ``q`` vanishes at the earlier magic DoFs.
    ``history[m]`` is the max training error with ``m`` new functions.
    Passing ``space`` continues an existing run.
    """
    T = np.asarray(training, dtype=float)
    if T.ndim != 2 or T.shape[0] == 0:
        raise ValueError("training must be a non-empty (n_fields, N_h) array")
    if space is None:
        space = EimSpace.empty(T.shape[1], weight)
    R = np.array(T, copy=True)
    if space.size:
        sigma = solve_triangular(space.matrix, R[:, space.magic].T, lower=True, unit_diagonal=True)
        for s in range(0, R.shape[0], _CHUNK):
            R[s:s + _CHUNK] -= (space.functions @ sigma[:, s:s + _CHUNK]).T
    scale = float(np.abs(T).max())
    result = EimGreedyResult(space)
    errors = _row_norms(R, weight)
    while True:
        worst = int(np.argmax(errors))
        result.history.append(float(errors[worst]))
        if errors[worst] <= tol or result.space.size >= max_size:
            break
        try:
            result.space = result.space._extend(R[worst].copy(), scale)
        except EimStagnation:
            result.stagnated = True
            break
        result.picked.append(worst)
        q = result.space.functions[:, -1]
        tau = result.space.magic[-1]
        for s in range(0, R.shape[0], _CHUNK):
            blk = R[s:s + _CHUNK]
            blk -= blk[:, tau:tau + 1] * q[None, :]
            blk[:, result.space.magic] = 0.0
        errors = _row_norms(R, weight)
    return result


def complete_space(space: EimSpace) -> EimSpace:
    """Extend with unit vectors at every unselected DoF, making interpolation exact."""
    chosen = np.zeros(space.n_dofs, dtype=bool)
    chosen[space.magic] = True
    rest = np.flatnonzero(~chosen)
    if rest.size == 0:
        return space
    extra = np.zeros((space.n_dofs, rest.size))
    extra[rest, np.arange(rest.size)] = 1.0
    return EimSpace(np.column_stack([space.functions, extra]),
                    np.concatenate([space.magic, rest]), space.weight)
