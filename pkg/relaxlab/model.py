# This file defines the physics of the chromatography model:
# the monotone flux f, the adsorption isotherm A, the relaxation term R(u,v)=A(u)-v
# and the equilibrium change of variables z = w + A(w).
# All specs are frozen dataclasses, so they are hashable and safe to share between threads.

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

from relaxlab.errors import DomainError
from relaxlab.tools.bisection import bisect_monotone

DOMAIN_TOL = 1e-12
INVERT_TOL = 1e-15


def check_interval(x, name: str = "u", upper: float = 1.0) -> np.ndarray:
    """Return `x` as a float array clamped to [0, upper].

    Values within DOMAIN_TOL outside the interval are clamped (drift at cell
    interfaces); anything further out is a DomainError.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    if np.any(arr < -DOMAIN_TOL) or np.any(arr > upper + DOMAIN_TOL):
        worst = float(arr.min()) if np.any(arr < -DOMAIN_TOL) else float(arr.max())
        raise DomainError(f"{name}={worst!r} lies outside [0, {upper:g}]")
    return np.clip(arr, 0.0, upper)


def _scalar_or_array(x: np.ndarray):
    return float(x) if np.ndim(x) == 0 else x


class FluxKind(str, Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"


@dataclass(frozen=True)
class FluxSpec:
    """Monotone flux: linear f(u)=c*u or quadratic f(u)=u^2/2 on [0,1]."""

    kind: FluxKind = FluxKind.LINEAR
    c: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", FluxKind(self.kind))
        if self.kind is FluxKind.LINEAR and not (np.isfinite(self.c) and self.c > 0):
            raise DomainError(f"linear flux speed must be positive, got c={self.c!r}")

    def f(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind is FluxKind.LINEAR:
            return self.c * u
        return 0.5 * u * u

    def df(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind is FluxKind.LINEAR:
            return np.full_like(u, self.c)
        return u.copy()

    def lip_bound(self) -> float:
        # sup of f' over [0,1]
        return self.c if self.kind is FluxKind.LINEAR else 1.0

    def entropy_flux(self, u):
        """q(u) = int_0^u xi f'(xi) dxi, the flux paired with u^2/2."""
        u = np.asarray(u, dtype=float)
        if self.kind is FluxKind.LINEAR:
            return 0.5 * self.c * u * u
        return u * u * u / 3.0

    @property
    def argmin(self) -> float:
        # f is nondecreasing on [0,1], its minimum sits at the left end
        return 0.0


class IsothermKind(str, Enum):
    LINEAR = "linear"
    LANGMUIR = "langmuir"


def _log_remainder(x):
    """(x - log1p(x)) / x**2, with a Taylor sum where the direct form cancels (|x| < 0.1)."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 0.1
    xs = np.where(small, x, 0.0)
    series = np.zeros_like(xs)
    for k in range(17, 1, -1):
        series = series * xs + (-1.0) ** k / k
    xl = np.where(small, 1.0, x)
    return np.where(small, series, (xl - np.log1p(xl)) / (xl * xl))


@dataclass(frozen=True)
class IsothermSpec:
    """Adsorption isotherm normalised so that A(0)=0 and A(1)=1.

    linear:   A(u) = u
    langmuir: A(u) = (1+beta) u / (1 + beta u)
    """

    kind: IsothermKind = IsothermKind.LINEAR
    beta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", IsothermKind(self.kind))
        if not (np.isfinite(self.beta) and self.beta >= 0):
            raise DomainError(f"Langmuir beta must be >= 0, got {self.beta!r}")

    @property
    def is_linear(self) -> bool:
        return self.kind is IsothermKind.LINEAR or self.beta == 0.0

    def A(self, u):
        u = np.asarray(u, dtype=float)
        if self.is_linear:
            return u.copy()
        b = self.beta
        return (1.0 + b) * u / (1.0 + b * u)

    def dA(self, u):
        u = np.asarray(u, dtype=float)
        if self.is_linear:
            return np.ones_like(u)
        b = self.beta
        return (1.0 + b) / (1.0 + b * u) ** 2

    def inverse(self, w):
        w = np.asarray(w, dtype=float)
        if self.is_linear:
            return w.copy()
        # written as 1 + beta(1-w) so that A^-1(1) = 1 exactly
        return w / (1.0 + self.beta * (1.0 - w))

    def dinverse(self, w):
        w = np.asarray(w, dtype=float)
        if self.is_linear:
            return np.ones_like(w)
        b = self.beta
        return (1.0 + b) / (1.0 + b * (1.0 - w)) ** 2

    def H(self, v):
        """Primitive of A^-1 vanishing at 0 (strictly convex)."""
        v = np.asarray(v, dtype=float)
        if self.is_linear:
            return 0.5 * v * v
        c = 1.0 + self.beta
        return v * v / c * _log_remainder(-self.beta * v / c)

    def primitive(self, u):
        """Primitive of A vanishing at 0; used for the quadratic relaxation mass."""
        u = np.asarray(u, dtype=float)
        if self.is_linear:
            return 0.5 * u * u
        b = self.beta
        return (1.0 + b) * u * u * _log_remainder(b * u)

    def lip_bound(self) -> float:
        # A' is largest at u=0
        return 1.0 if self.is_linear else 1.0 + self.beta

    def relax_residual(self, s, v):
        """g(v) = A(s - v) - v, strictly decreasing in v."""
        return self.A(np.asarray(s) - np.asarray(v)) - np.asarray(v)

    def layer_roots(self, s):
        """Both roots of the numerator of g for Langmuir (v* in the bracket, v2 beyond 1).

        g(v) = N(v)/D(v) with N(v) = beta v^2 - (2 + beta + beta s) v + (1+beta) s
        and D(v) = 1 + beta (s - v) > 0 on the bracket.
        """
        s = np.asarray(s, dtype=float)
        b = self.beta
        big = 2.0 + b + b * s
        c0 = (1.0 + b) * s
        disc = np.sqrt(np.maximum(big * big - 4.0 * b * c0, 0.0))
        v_star = 2.0 * c0 / (big + disc)
        v_two = (big + disc) / (2.0 * b)
        return v_star, v_two


@dataclass(frozen=True)
class Model:
    """The flux and isotherm of one simulation, passed around together."""

    flux: FluxSpec = field(default_factory=FluxSpec)
    isotherm: IsothermSpec = field(default_factory=IsothermSpec)


@lru_cache(maxsize=16)
def _inverse_table(isotherm: IsothermSpec):
    # w nodes every 1e-4 with their images Z(w); used to bracket the bisection
    w_nodes = np.linspace(0.0, 1.0, 10001)
    z_nodes = w_nodes + isotherm.A(w_nodes)
    z_nodes[-1] = 2.0
    return z_nodes, w_nodes


@dataclass(frozen=True)
class EquilibriumMap:
    """z = Z(w) = w + A(w), strictly increasing from [0,1] onto [0,2]."""

    isotherm: IsothermSpec = field(default_factory=IsothermSpec)

    def Z(self, w):
        w = np.asarray(w, dtype=float)
        return w + self.isotherm.A(w)

    def invert(self, z):
        z = np.asarray(z, dtype=float)
        z_nodes, w_nodes = _inverse_table(self.isotherm)
        idx = np.clip(np.searchsorted(z_nodes, z), 1, len(z_nodes) - 1)
        lo = w_nodes[idx - 1]
        hi = w_nodes[idx]
        return bisect_monotone(lambda w: self.Z(w) - z, lo, hi, increasing=True, xtol=INVERT_TOL, check_bracket=False)


def flux_eval(spec: FluxSpec, u):
    return _scalar_or_array(spec.f(check_interval(u, "u")))


def isotherm_eval(spec: IsothermSpec, u):
    return _scalar_or_array(spec.A(check_interval(u, "u")))


def isotherm_inverse(spec: IsothermSpec, w):
    return _scalar_or_array(spec.inverse(check_interval(w, "w")))


def entropy_pair_eval(flux: FluxSpec, iso: IsothermSpec, u, v):
    """Special entropy pair: eta(u,v) = u^2/2 + H(v), q(u) = int_0^u xi f'(xi) dxi."""
    u = check_interval(u, "u")
    v = check_interval(v, "v")
    eta = 0.5 * u * u + iso.H(v)
    q = flux.entropy_flux(u)
    return _scalar_or_array(eta), _scalar_or_array(q)


def equilibrium_invert(eq_map: EquilibriumMap, z):
    return _scalar_or_array(eq_map.invert(check_interval(z, "z", upper=2.0)))
