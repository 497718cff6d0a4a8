"""Reduced solver: EIM-interpolated, RB-projected explicit evolution."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eim import EimSpace
from .grid import Grid, dependency_count
from .hdm import LocalOperator, muscl_reconstruct
from .indicator import IndicatorAccumulator, step_residual_norm
from .models import Model, NonPhysicalStateError
from .pod import ReducedBasis


def system_norm(fields: np.ndarray, weight: float) -> float:
    """Weighted L2 norm over all components of a (n_components, N_h) array."""
    fields = np.asarray(fields, dtype=float)
    return float(np.sqrt(weight * np.sum(fields * fields)))


@dataclass
class ReducedSolution:
    alphas: list[np.ndarray]  # per component, (K+1, N_c)
    mu: np.ndarray
    flux_evaluations_per_step: int
    ic_projection_error: float
    indicator: IndicatorAccumulator | None = None

    @property
    def n_steps(self) -> int:
        return self.alphas[0].shape[0] - 1

    def reconstruct(self, bases: list[ReducedBasis], k: int = -1) -> np.ndarray:
        return np.array([b.reconstruct(a[k]) for b, a in zip(bases, self.alphas)])

    def reconstruct_all(self, bases: list[ReducedBasis]) -> np.ndarray:
        """All reduced states as a (K+1, n_components, N_h) array."""
        return np.stack([a @ b.vectors.T for b, a in zip(bases, self.alphas)], axis=1)


class OnlineOperator:
    """Precomputed reduced operator for one (RB, EIM) pair per component.

    ``theta[c]`` holds the RB coefficients of ``Pi(q_m)``. The inverse
    interpolation matrix, the face differencing, ``1/dx`` and ``dt`` are all
    folded into one (N_c, n_faces) matrix, so a step is
    ``alpha <- alpha - W @ F`` with ``F`` the numerical fluxes on the faces
    around the magic DoFs. Per step only basis rows on the stencil union of
    the magic DoFs are touched.
    """

    def __init__(self, model: Model, grid: Grid, bases: list[ReducedBasis], spaces: list[EimSpace],
                 dt: float, muscl: bool = False, second_level: list[EimSpace] | None = None):
        nc = model.n_components
        if len(bases) != nc or len(spaces) != nc:
            raise ValueError(f"need {nc} bases and EIM spaces")
        for b, s in zip(bases, spaces):
            if b.n_dofs != grid.n_cells or s.n_dofs != grid.n_cells:
                raise ValueError("basis/EIM dimension does not match the grid")
            if b.orthonormality_error() > 1e-10:
                raise ValueError("reduced basis is not orthonormal")
        self.model, self.grid, self.dt, self.muscl = model, grid, float(dt), bool(muscl)
        self.bases, self.spaces = list(bases), list(spaces)
        self.second_level = None
        if second_level is not None:
            for s, ext in zip(spaces, second_level):
                if ext.size < s.size or not np.array_equal(ext.magic[:s.size], s.magic):
                    raise ValueError("second-level EIM must extend the first-level space")
            self.second_level = list(second_level)

        magic_sets = [s.magic for s in (self.second_level or spaces)]
        targets = np.unique(np.concatenate(magic_sets)) if magic_sets else np.zeros(0, int)
        self.local = LocalOperator(grid, targets, muscl)
        cells = self.local.cells
        idx = self.local._face_local
        self.rows = [b.vectors[cells, :] for b in bases]
        self._li, self._ri = idx[:, 0], idx[:, -1]
        self._block_rows = [r[idx] for r in self.rows] if self.muscl else None
        self.theta = [b.project(s.functions) for b, s in zip(bases, spaces)]
        self.inverses = [s.inverse_matrix for s in spaces]
        self.diffs = [self.local.difference_matrix(s.magic) for s in spaces]
        self.folded = [self.dt * (th @ binv) @ D for th, binv, D in zip(self.theta, self.inverses, self.diffs)]
        self.grams = [s.gram for s in spaces]
        for b, s, th in zip(bases, spaces, self.theta):
            if s.size:
                resid = b.reconstruct(th) - (s.functions - b.projector_residual(s.functions))
                if np.abs(resid).max() > 1e-10 * max(1.0, np.abs(s.functions).max()):
                    raise ValueError("theta does not reproduce the projected EIM functions")
        if self.second_level is not None:
            self.extra_diffs, self.extra_rows, self.extra_norms = [], [], []
            for s, ext in zip(spaces, self.second_level):
                self.extra_diffs.append(self.local.difference_matrix(ext.magic))
                self.extra_rows.append(ext.inverse_matrix[s.size:, :])
                self.extra_norms.append(ext.norms[s.size:])

    @property
    def sizes(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return tuple(b.size for b in self.bases), tuple(s.size for s in self.spaces)

    @property
    def dependency_count(self) -> int:
        return dependency_count(self.local.width)

    @property
    def flux_evaluations_per_step(self) -> int:
        return self.local.flux_evaluation_count()

    def project_initial(self, u0: np.ndarray) -> list[np.ndarray]:
        return [b.project(u) for b, u in zip(self.bases, u0)]

    def stencil_states(self, alphas) -> np.ndarray:
        U = np.empty((self.model.n_components, self.local.cells.size))
        for c, (rows, a) in enumerate(zip(self.rows, alphas)):
            U[c] = rows @ a
        return U

    def point_values(self, alphas, mu) -> np.ndarray:
        """Operator values at all target cells, via the generic local evaluation."""
        return self.local.evaluate(self.model, self.stencil_states(alphas), mu)

    def face_fluxes(self, alphas, kernels, mu=None) -> np.ndarray:
        point, riemann = kernels
        if self.muscl:
            block = np.stack([br @ a for br, a in zip(self._block_rows, alphas)])
            uL, uR = muscl_reconstruct(self.model, block, mu)
            try:
                fL, sL = point(uL)
                fR, sR = point(uR)
            except NonPhysicalStateError as exc:
                face = exc.dof
                cell = int(self.local.cells[self.local._face_local[face, 1]]) if face is not None else None
                raise NonPhysicalStateError(f"{exc} (interface right of cell {cell})", cell, exc.component) from exc
            return riemann(uL, uR, fL, fR, sL, sR)
        U = self.stencil_states(alphas)
        f, s = point(U, self.local.cells)
        li, ri = self._li, self._ri
        return riemann(U[:, li], U[:, ri], f[:, li], f[:, ri], s[li], s[ri])

    def step(self, alphas, mu) -> list[np.ndarray]:
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        F = self.face_fluxes(alphas, self.model.kernels(mu), mu)
        return [a - W @ F[c] for c, (a, W) in enumerate(zip(alphas, self.folded))]

    def solve(self, mu, n_steps: int, u0: np.ndarray | None = None,
              indicator_C: float | None = None) -> ReducedSolution:
        """Reduced trajectory from the projected initial data.

        With ``indicator_C`` set (requires a second-level EIM), the error
        indicator is accumulated alongside the solve.
        """
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        if u0 is None:
            u0 = self.model.initial_condition(self.grid.centers, mu)
        alphas = self.project_initial(u0)
        ic_err = system_norm(
            np.array([b.projector_residual(u) for b, u in zip(self.bases, u0)]), self.grid.dx)
        history = [np.empty((n_steps + 1, b.size)) for b in self.bases]
        for h, a in zip(history, alphas):
            h[0] = a
        acc = None
        if indicator_C is not None:
            if self.second_level is None:
                raise ValueError("indicator needs a second-level EIM space")
            acc = IndicatorAccumulator(indicator_C, ic_err)
        dt = self.dt
        nc = self.model.n_components
        kernels = self.model.kernels(mu)
        folded = self.folded
        for k in range(n_steps):
            try:
                F = self.face_fluxes(alphas, kernels, mu)
            except NonPhysicalStateError as exc:
                raise NonPhysicalStateError(f"reduced step {k}: {exc}", exc.dof, exc.component) from exc
            new = [alphas[c] - folded[c] @ F[c] for c in range(nc)]
            if acc is not None:
                eim_term, r_sq = 0.0, 0.0
                for c in range(nc):
                    P = self.extra_diffs[c] @ F[c]
                    sigma = self.inverses[c] @ P[:self.spaces[c].size]
                    r = step_residual_norm(alphas[c], new[c], self.theta[c] @ sigma, dt,
                                           sigma=sigma, gram=self.grams[c])
                    r_sq += r * r
                    eim_term += dt * float(np.abs(self.extra_rows[c] @ P) @ self.extra_norms[c])
                acc.push(eim_term, dt * np.sqrt(r_sq))
            alphas = new
            for h, a in zip(history, alphas):
                h[k + 1] = a
        return ReducedSolution(history, mu, self.local.flux_evaluation_count(), ic_err, acc)


def build_online_operator(model, grid, bases, spaces, dt, muscl=False, second_level=None) -> OnlineOperator:
    return OnlineOperator(model, grid, bases, spaces, dt, muscl, second_level)


def project_initial(op: OnlineOperator, u0) -> list[np.ndarray]:
    return op.project_initial(u0)


def reduced_step(op: OnlineOperator, alphas, mu) -> list[np.ndarray]:
    return op.step(alphas, mu)


def reduced_solve(op: OnlineOperator, mu, n_steps: int, indicator_C: float | None = None) -> ReducedSolution:
    return op.solve(mu, n_steps, indicator_C=indicator_C)
