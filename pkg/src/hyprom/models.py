"""Fluxes, initial data and parameter domains for 1D Burgers and Euler."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

MODEL_KINDS = ("burgers1d", "euler1d_smooth", "euler1d_sod")


class NonPhysicalStateError(ValueError):
    """Raised for Euler states with non-positive density or pressure."""

    def __init__(self, message: str, dof: int | None = None, component: int | None = None):
        super().__init__(message)
        self.dof = dof
        self.component = component


@dataclass(frozen=True)
class ParameterDomain:
    """Box of closed intervals; degenerate intervals pin a parameter."""

    lows: tuple[float, ...]
    highs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.lows) != len(self.highs) or not self.lows:
            raise ValueError("parameter domain needs matching non-empty bounds")
        for lo, hi in zip(self.lows, self.highs):
            if not (np.isfinite(lo) and np.isfinite(hi)) or hi < lo:
                raise ValueError(f"invalid interval [{lo}, {hi}]")

    @classmethod
    def from_intervals(cls, intervals) -> ParameterDomain:
        lows, highs = zip(*((float(a), float(b)) for a, b in intervals))
        return cls(tuple(lows), tuple(highs))

    @property
    def dim(self) -> int:
        return len(self.lows)

    def contains(self, values, rtol: float = 1e-12) -> bool:
        v = np.asarray(values, dtype=float)
        if v.shape != (self.dim,):
            return False
        lo, hi = np.array(self.lows), np.array(self.highs)
        slack = rtol * np.maximum(1.0, np.abs(hi))
        return bool(np.all(v >= lo - slack) and np.all(v <= hi + slack))

    def corners(self) -> np.ndarray:
        return np.array(list(itertools.product(*zip(self.lows, self.highs))))

    def intervals(self) -> list[list[float]]:
        return [[a, b] for a, b in zip(self.lows, self.highs)]


@dataclass(frozen=True)
class Parameter:
    values: tuple[float, ...]
    domain: ParameterDomain | None = None

    def __post_init__(self) -> None:
        if self.domain is not None and not self.domain.contains(self.values):
            raise ValueError(f"parameter {self.values} outside domain")

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def _as_mu(mu) -> np.ndarray:
    return np.atleast_1d(np.asarray(mu, dtype=float))


def minmod(a, b):
    """0.5*(sgn a + sgn b)*min(|a|, |b|)."""
    return 0.5 * (np.sign(a) + np.sign(b)) * np.minimum(np.abs(a), np.abs(b))


def rankine_hugoniot_speed(u_left, u_right, y3=1.0):
    """Shock speed of the scaled Burgers flux ``y3*u**2/2``."""
    u_left = np.asarray(u_left, dtype=float)
    u_right = np.asarray(u_right, dtype=float)
    jump = u_left - u_right
    same = jump == 0.0
    safe = np.where(same, 1.0, jump)
    dd = (0.5 * u_left * u_left - 0.5 * u_right * u_right) / safe
    out = y3 * np.where(same, 0.5 * (u_left + u_right), dd)
    return float(out) if out.ndim == 0 else out


def primitive_to_conservative(w, gamma: float) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    rho, u, p = w[0], w[1], w[2]
    if gamma <= 1.0:
        raise ValueError("gamma must exceed 1")
    if np.any(rho <= 0) or np.any(p <= 0):
        raise NonPhysicalStateError("primitive state needs rho > 0 and p > 0")
    return np.array([rho, rho * u, p / (gamma - 1.0) + 0.5 * rho * u * u])


def conservative_to_primitive(U, gamma: float) -> np.ndarray:
    U = np.asarray(U, dtype=float)
    rho, m, E = U[0], U[1], U[2]
    if np.any(rho <= 0):
        raise NonPhysicalStateError("density must be positive")
    u = m / rho
    p = (gamma - 1.0) * (E - 0.5 * rho * u * u)
    if np.any(p <= 0):
        raise NonPhysicalStateError("pressure must be positive")
    return np.array([rho, u, p])


class Model:
    """Base class; subclasses operate on arrays shaped (n_components, n)."""

    kind: str
    n_components: int
    component_names: tuple[str, ...]
    boundary: str

    def __init__(self, boundary: str, state_box: dict | None = None):
        self.boundary = boundary
        self.state_box = state_box

    def point_data(self, U: np.ndarray, mu, cells=None) -> tuple[np.ndarray, np.ndarray]:
        """Physical flux and local max wave speed at each state."""
        raise NotImplementedError

    def riemann(self, UL, UR, fL, fR, sL, sR, mu) -> np.ndarray:
        raise NotImplementedError

    def kernels(self, mu):
        """``(point, riemann)`` callables with the parameter already bound.

        ``point(U, cells=None)`` returns the physical flux and wave speed at
        each state; ``riemann(UL, UR, fL, fR, sL, sR)`` the interface flux.
        """
        return (lambda U, cells=None: self.point_data(U, mu, cells),
                lambda UL, UR, fL, fR, sL, sR: self.riemann(UL, UR, fL, fR, sL, sR, mu))

    def physical_flux(self, U, mu) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        flat = U.reshape(self.n_components, -1)
        return self.point_data(flat, mu)[0].reshape(U.shape)

    def numerical_flux(self, UL, UR, mu) -> np.ndarray:
        UL = np.asarray(UL, dtype=float)
        UR = np.asarray(UR, dtype=float)
        shape = UL.shape
        UL = UL.reshape(self.n_components, -1)
        UR = UR.reshape(self.n_components, -1)
        fL, sL = self.point_data(UL, mu)
        fR, sR = self.point_data(UR, mu)
        return self.riemann(UL, UR, fL, fR, sL, sR, mu).reshape(shape)

    def initial_condition(self, x, mu) -> np.ndarray:
        raise NotImplementedError

    def gamma(self, mu) -> float:
        raise NotImplementedError

    def spectral_radius_bound(self, domain: ParameterDomain, state_box: dict | None = None) -> float:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}(kind={self.kind!r}, boundary={self.boundary!r})"


class Burgers(Model):
    """``u_t + (y3 u^2/2)_x = 0`` with ``u0 = |sin(2x + y1)| + 0.1*y2``.

    The parameter vector is ``(y1, y2, y3)``.
    """

    kind = "burgers1d"
    n_components = 1
    component_names = ("u",)

    def __init__(self, boundary: str = "periodic", state_box: dict | None = None):
        super().__init__(boundary, state_box or {"u": (0.0, 2.5)})

    @staticmethod
    def _y3(mu) -> float:
        mu = _as_mu(mu)
        return float(mu[2]) if mu.size >= 3 else 1.0

    def point_data(self, U, mu, cells=None):
        return self.kernels(mu)[0](U, cells)

    def riemann(self, UL, UR, fL, fR, sL, sR, mu):
        return self.kernels(mu)[1](UL, UR, fL, fR, sL, sR)

    def kernels(self, mu):
        # the divided difference (f(uL) - f(uR)) / (uL - uR) is y3*(uL + uR)/2 exactly
        h = 0.5 * self._y3(mu)

        def point(U, cells=None):
            return h * (U * U), np.abs((2.0 * h) * U[0])

        def roe(UL, UR, fL, fR, sL, sR):
            return 0.5 * (fL + fR - np.abs(h * (UL + UR)) * (UR - UL))

        return point, roe

    def initial_condition(self, x, mu):
        mu = _as_mu(mu)
        y1 = mu[0]
        y2 = mu[1] if mu.size >= 2 else 1.0
        x = np.asarray(x, dtype=float)
        return (np.abs(np.sin(2.0 * x + y1)) + 0.1 * y2)[None, :]

    def gamma(self, mu) -> float:
        raise AttributeError("Burgers has no adiabatic exponent")

    def spectral_radius_bound(self, domain, state_box=None):
        box = state_box or self.state_box
        if not box or "u" not in box:
            raise ValueError("Burgers spectral bound needs a state box for 'u'")
        lo, hi = box["u"]
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValueError("state box must be finite")
        if domain.dim >= 3:
            y3max = max(abs(domain.lows[2]), abs(domain.highs[2]))
        else:
            y3max = 1.0
        return float(y3max * max(abs(lo), abs(hi)))


class Euler(Model):
    """1D Euler equations in conservative variables ``(rho, rho*u, E)``.

    ``variant`` selects the random initial data ("smooth" or "sod"). The
    adiabatic exponent is either fixed or read from ``mu[gamma_index]``.
    """

    n_components = 3
    component_names = ("rho", "momentum", "energy")

    def __init__(self, variant: str = "sod", boundary: str | None = None,
                 gamma: float | None = None, gamma_index: int = 1,
                 state_box: dict | None = None):
        if variant not in ("smooth", "sod"):
            raise ValueError(f"unknown Euler variant {variant!r}")
        if boundary is None:
            boundary = "periodic" if variant == "smooth" else "transmissive"
        super().__init__(boundary, state_box)
        if gamma is not None and gamma <= 1.0:
            raise ValueError("gamma must exceed 1")
        self.variant = variant
        self.fixed_gamma = gamma
        self.gamma_index = gamma_index
        self.kind = "euler1d_smooth" if variant == "smooth" else "euler1d_sod"

    def gamma(self, mu) -> float:
        if self.fixed_gamma is not None:
            return float(self.fixed_gamma)
        mu = _as_mu(mu)
        g = float(mu[self.gamma_index])
        if g <= 1.0:
            raise ValueError(f"gamma must exceed 1, got {g}")
        return g

    def _primitives(self, U, g, cells=None):
        rho, m, E = U[0], U[1], U[2]
        u = m / rho
        p = (g - 1.0) * (E - 0.5 * m * u)
        bad = ~((rho > 0) & (p > 0))
        if bad.any():
            j = int(np.flatnonzero(bad)[0])
            dof = int(cells[j]) if cells is not None else j
            comp = 0 if not rho[j] > 0 else 2
            raise NonPhysicalStateError(
                f"non-physical Euler state at DoF {dof}: rho={rho[j]:.6g}, p={p[j]:.6g}",
                dof=dof, component=comp)
        return rho, u, p

    def point_data(self, U, mu, cells=None):
        return self._point(U, self.gamma(mu), cells)

    def _point(self, U, g, cells=None):
        rho, u, p = self._primitives(U, g, cells)
        m, E = U[1], U[2]
        f = np.empty_like(U)
        f[0] = m
        f[1] = m * u + p
        f[2] = u * (E + p)
        c = np.sqrt(g * p / rho)
        return f, np.abs(u) + c

    @staticmethod
    def _rusanov(UL, UR, fL, fR, sL, sR):
        smax = np.maximum(sL, sR)
        return 0.5 * (fL + fR) - 0.5 * smax * (UR - UL)

    def riemann(self, UL, UR, fL, fR, sL, sR, mu):
        return self._rusanov(UL, UR, fL, fR, sL, sR)

    def kernels(self, mu):
        g = self.gamma(mu)
        return (lambda U, cells=None: self._point(U, g, cells)), self._rusanov

    def initial_condition(self, x, mu):
        mu = _as_mu(mu)
        g = self.gamma(mu)
        x = np.asarray(x, dtype=float)
        y1 = mu[0]
        if self.variant == "smooth":
            rho = 2.0 + np.sin(30.0 * y1) * np.sin(np.pi * (x - 1.0) + y1)
            return np.array([rho, np.zeros_like(x), rho ** g])
        left = x < 0.0
        rho = np.where(left, 1.0, 0.125 + y1)
        p = np.where(left, 1.0, 0.1)
        return primitive_to_conservative(np.array([rho, np.zeros_like(x), p]), g)

    def default_state_box(self, domain: ParameterDomain, x) -> dict:
        """Primitive-variable box from the initial data at the domain corners, widened by 50%."""
        rhos, ps, cs, us = [], [], [], []
        for corner in domain.corners():
            U = self.initial_condition(x, corner)
            g = self.gamma(corner)
            rho, u, p = conservative_to_primitive(U, g)
            rhos.append(rho)
            ps.append(p)
            us.append(np.abs(u))
            cs.append(np.sqrt(g * p / rho))
        rho = np.concatenate(rhos)
        p = np.concatenate(ps)
        umax = max(1.5 * np.concatenate(us).max(), np.concatenate(cs).max())
        return {"rho": (0.5 * rho.min(), 1.5 * rho.max()),
                "u": (-umax, umax),
                "p": (0.5 * p.min(), 1.5 * p.max())}

    def spectral_radius_bound(self, domain, state_box=None):
        box = state_box or self.state_box
        if not box or not all(k in box for k in ("rho", "u", "p")):
            raise ValueError("Euler spectral bound needs a state box with rho, u, p")
        vals = [np.asarray(box[k], dtype=float) for k in ("rho", "u", "p")]
        if not all(np.all(np.isfinite(v)) for v in vals) or vals[0][0] <= 0 or vals[2][0] <= 0:
            raise ValueError("Euler state box must be finite with positive rho and p")
        if self.fixed_gamma is not None:
            gammas = [self.fixed_gamma]
        else:
            i = self.gamma_index
            gammas = [domain.lows[i], domain.highs[i]]
        best = 0.0
        for rho, u, p, g in itertools.product(*vals, gammas):
            best = max(best, abs(u) + np.sqrt(g * p / rho))
        return float(best)

    # characteristic decomposition about a (physical) linearisation state
    def eigenvectors(self, Ubar, g):
        """Left and right eigenvector matrices, as nested lists of arrays."""
        rho, m, E = Ubar[0], Ubar[1], Ubar[2]
        u = m / rho
        p = (g - 1.0) * (E - 0.5 * m * u)
        c = np.sqrt(g * p / rho)
        H = (E + p) / rho
        one = np.ones_like(u)
        R = [[one, one, one],
             [u - c, u, u + c],
             [H - u * c, 0.5 * u * u, H + u * c]]
        b1 = (g - 1.0) / (c * c)
        b2 = 0.5 * b1 * u * u
        L = [[0.5 * (b2 + u / c), -0.5 * (b1 * u + 1.0 / c), 0.5 * b1],
             [1.0 - b2, b1 * u, -b1],
             [0.5 * (b2 - u / c), -0.5 * (b1 * u - 1.0 / c), 0.5 * b1]]
        return L, R


def make_model(kind: str, **options) -> Model:
    if kind == "burgers1d":
        return Burgers(**options)
    if kind == "euler1d_smooth":
        return Euler("smooth", **options)
    if kind == "euler1d_sod":
        return Euler("sod", **options)
    raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


def physical_flux(model: Model, state, mu):
    return model.physical_flux(np.asarray(state, dtype=float).reshape(model.n_components, -1), mu)[:, 0] \
        if np.ndim(state) == 1 else model.physical_flux(state, mu)


def numerical_flux(model: Model, left, right, mu):
    if np.ndim(left) == 1:
        L = np.asarray(left, dtype=float).reshape(model.n_components, 1)
        R = np.asarray(right, dtype=float).reshape(model.n_components, 1)
        return model.numerical_flux(L, R, mu)[:, 0]
    return model.numerical_flux(left, right, mu)


def initial_condition(model: Model, x, mu):
    return model.initial_condition(np.atleast_1d(x), mu)


def jacobian_spectral_radius_bound(model: Model, domain: ParameterDomain, state_box: dict | None = None) -> float:
    return model.spectral_radius_bound(domain, state_box)
