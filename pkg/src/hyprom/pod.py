"""SVD-based proper orthogonal decomposition under the weighted L2 product."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RANK_CUTOFF = 1e-12


@dataclass(frozen=True)
class InnerProduct:
    """Discrete L2 product ``<u, v> = weight * sum(u*v)`` (weight = dx)."""

    weight: float

    def __post_init__(self) -> None:
        if not self.weight > 0:
            raise ValueError("inner-product weight must be positive")

    def dot(self, u, v) -> float:
        return float(self.weight * np.dot(u, v))

    def norm(self, u) -> float:
        u = np.asarray(u)
        return float(np.sqrt(self.weight * np.dot(u, u)))


@dataclass
class ReducedBasis:
    """Orthonormal basis stored column-wise in ``vectors`` (N_h x N)."""

    vectors: np.ndarray
    weight: float
    singular_values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self) -> None:
        self.vectors = np.asarray(self.vectors, dtype=float)
        if self.vectors.ndim != 2:
            raise ValueError("basis vectors must be a 2D array (N_h, N)")
        if self.vectors.shape[1] > self.vectors.shape[0]:
            raise ValueError("more basis vectors than DoFs")

    @classmethod
    def empty(cls, n_dofs: int, weight: float) -> ReducedBasis:
        return cls(np.zeros((n_dofs, 0)), weight)

    @classmethod
    def canonical(cls, n_dofs: int, weight: float) -> ReducedBasis:
        """Scaled unit vectors spanning the whole discrete space."""
        return cls(np.eye(n_dofs) / np.sqrt(weight), weight, np.ones(n_dofs))

    @property
    def size(self) -> int:
        return self.vectors.shape[1]

    @property
    def n_dofs(self) -> int:
        return self.vectors.shape[0]

    def project(self, field) -> np.ndarray:
        """Coefficients ``<field, phi_i>``; works column-wise on 2D input."""
        field = np.asarray(field, dtype=float)
        if field.shape[0] != self.n_dofs:
            raise ValueError(f"field length {field.shape[0]} != {self.n_dofs}")
        return self.weight * (self.vectors.T @ field)

    def reconstruct(self, coeffs) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[0] != self.size:
            raise ValueError(f"expected {self.size} coefficients, got {coeffs.shape[0]}")
        return self.vectors @ coeffs

    def projector_residual(self, field) -> np.ndarray:
        """``field - Pi[field]``."""
        return field - self.reconstruct(self.project(field))

    def gram(self) -> np.ndarray:
        return self.weight * (self.vectors.T @ self.vectors)

    def orthonormality_error(self) -> float:
        if self.size == 0:
            return 0.0
        return float(np.abs(self.gram() - np.eye(self.size)).max())

    def norm(self, field) -> float:
        return InnerProduct(self.weight).norm(field)


def pod(vectors, weight: float, n_modes: int | None = None, tol: float | None = None) -> ReducedBasis:
    """Leading POD modes of the columns of ``vectors`` (or a list of fields).

    Exactly one of ``n_modes`` (fixed count) or ``tol`` (keep the smallest N
    with discarded energy ``sum_{i>N} s_i^2 <= tol^2 * sum_i s_i^2``) is used.
    Singular values below ``1e-12 * s_1`` are treated as numerical zeros.
    """
    if (n_modes is None) == (tol is None):
        raise ValueError("give exactly one of n_modes or tol")
    if isinstance(vectors, (list, tuple)):
        if not vectors:
            raise ValueError("pod needs at least one vector")
        V = np.column_stack([np.asarray(v, dtype=float) for v in vectors])
    else:
        V = np.asarray(vectors, dtype=float)
        if V.ndim == 1:
            V = V[:, None]
    if V.shape[1] == 0:
        raise ValueError("pod needs at least one vector")
    if not weight > 0:
        raise ValueError("weight must be positive")
    sw = np.sqrt(weight)
    U, s, _ = np.linalg.svd(sw * V, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return ReducedBasis(np.zeros((V.shape[0], 0)), weight, np.zeros(0))
    rank = int(np.count_nonzero(s >= RANK_CUTOFF * s[0]))
    if n_modes is not None:
        if n_modes < 0:
            raise ValueError("n_modes must be non-negative")
        keep = min(int(n_modes), rank)
    else:
        energy = s[:rank] ** 2
        total = float(np.sum(s ** 2))
        tail = np.concatenate([np.cumsum(energy[::-1])[::-1], [0.0]])
        # tail[N] = energy discarded when keeping N modes
        keep = int(np.argmax(tail <= tol * tol * total))
    return ReducedBasis(U[:, :keep] / sw, weight, s[:keep].copy())


def project(basis: ReducedBasis, field) -> np.ndarray:
    return basis.project(field)


def reconstruct(basis: ReducedBasis, coeffs) -> np.ndarray:
    return basis.reconstruct(coeffs)
