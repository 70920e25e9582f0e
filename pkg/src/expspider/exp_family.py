"""Normalized entire maps ``e^{lam z}`` (p = 0) and ``alpha z^p e^{lam z}`` (p >= 1).

The p >= 1 maps are normalized so that the free critical point ``-p/lam`` is
sent to 1.  Logarithms are principal (``arg`` in ``(-pi, pi]``) unless a lift
is passed explicitly; sheet indices ``m`` are counted relative to whichever
logarithm of the target value is used.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (
    InvalidParameterError,
    NonConvergenceError,
    NoPreimageError,
    PoleError,
)

TWO_PI_I = 2j * math.pi
ESCAPE_RADIUS = 1e12
NEWTON_MAX_ITER = 64
NEWTON_TOL = 1e-12
# exp overflows just above 709.78
_LOG_OVERFLOW = 700.0


def continue_log(z: complex, ref: complex) -> complex:
    """Return the logarithm of ``z`` whose imaginary part is closest to ``ref``."""
    base = cmath.log(z)
    k = round((ref.imag - base.imag) / (2 * math.pi))
    return base + TWO_PI_I * k


def alpha_from_lambda(p: int, lam: complex) -> complex:
    """Normalizing factor that sends the critical point ``-p/lam`` to 1.

    Computed as ``(-lam/p)**p * e**p`` with an integer power, so there is no
    branch ambiguity.  For p = 1 this is ``-lam * e``.
    """
    if p < 1:
        raise InvalidParameterError(f"alpha is only defined for p >= 1, got p={p}")
    lam = complex(lam)
    if lam == 0:
        raise InvalidParameterError("lambda must be nonzero")
    return (-lam / p) ** p * math.exp(p)


@dataclass(frozen=True)
class ExpParams:
    """A point of the normalized family.

    ``log_alpha`` fixes which logarithm of ``alpha`` is used when sheets of
    the inverse are labelled.  It defaults to ``p * (1 - Log(crit))``, which
    is a logarithm of ``alpha`` because ``alpha = e^p / crit^p``.
    """

    p: int
    lam: complex
    log_alpha: complex = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 0:
            raise InvalidParameterError(f"p must be a non-negative integer, got {self.p!r}")
        lam = complex(self.lam)
        if lam == 0 or not cmath.isfinite(lam):
            raise InvalidParameterError(f"lambda must be finite and nonzero, got {lam!r}")
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "lam", lam)
        if self.log_alpha is None:
            default = 0j if self.p == 0 else self.p * (1 - cmath.log(-self.p / lam))
            object.__setattr__(self, "log_alpha", complex(default))

    @property
    def alpha(self) -> complex:
        return 1 + 0j if self.p == 0 else alpha_from_lambda(self.p, self.lam)

    @property
    def crit(self) -> complex | None:
        return None if self.p == 0 else -self.p / self.lam


def evaluate(params: ExpParams, z):
    """``alpha z^p e^{lam z}``; overflow returns ``inf`` instead of raising.

    Accepts scalars or numpy arrays.
    """
    if np.ndim(z) == 0:
        return _evaluate_scalar(params, complex(z))
    z = np.asarray(z, dtype=complex)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        expo = params.lam * z
        if params.p:
            expo = expo + params.log_alpha + params.p * np.log(np.where(z == 0, 1, z))
        out = np.exp(expo)
    out = np.where(expo.real > _LOG_OVERFLOW, complex(math.inf, 0), out)
    if params.p:
        out = np.where(z == 0, 0j, out)
    return out


def _evaluate_scalar(params: ExpParams, z: complex) -> complex:
    if params.p and z == 0:
        return 0j
    if not cmath.isfinite(z):
        return complex(math.inf, 0)
    expo = params.lam * z
    if params.p:
        expo += params.log_alpha + params.p * cmath.log(z)
    if expo.real > _LOG_OVERFLOW:
        return complex(math.inf, 0)
    return cmath.exp(expo)


def log_derivative(params: ExpParams, z: complex) -> complex:
    """``E'(z)/E(z) = p/z + lam``."""
    z = complex(z)
    if z == 0:
        raise PoleError("log-derivative has a pole at z = 0")
    return params.p / z + params.lam


def critical_points(params: ExpParams) -> list[tuple[complex, int]]:
    """Finite critical points with multiplicities."""
    p = params.p
    if p == 0:
        return []
    pts = [] if p == 1 else [(0j, p - 1)]
    pts.append((-p / params.lam, 1))
    return pts


def solve_log_equation(
    p: int,
    lam: complex,
    rhs: complex,
    seed: complex,
    log_seed: complex | None = None,
    *,
    max_iter: int = NEWTON_MAX_ITER,
    tol: float = NEWTON_TOL,
) -> tuple[complex, complex]:
    """Solve ``p * log(z) + lam * z = rhs`` by damped Newton.

    The branch of ``log z`` is continued along the Newton path starting from
    ``log_seed`` (principal log of the seed by default).  Returns the root and
    the logarithm it was reached with.
    """
    z = complex(seed)
    if z == 0:
        raise InvalidParameterError("Newton seed must be nonzero for p >= 1")
    L = cmath.log(z) if log_seed is None else continue_log(z, complex(log_seed))
    scale = max(1.0, abs(rhs))
    G = p * L + lam * z - rhs
    for it in range(max_iter):
        if abs(G) <= tol * scale:
            return z, L
        dG = p / z + lam
        if dG == 0:
            raise NonConvergenceError("Newton hit a critical point", last=z, iterations=it)
        step = G / dG
        t = 1.0
        while True:
            zn = z - t * step
            if zn != 0:
                Ln = continue_log(zn, L)
                Gn = p * Ln + lam * zn - rhs
                if abs(Gn) < abs(G) or t < 1e-6:
                    break
            t *= 0.5
        z, L, G = zn, Ln, Gn
    if abs(G) <= tol * scale:
        return z, L
    raise NonConvergenceError(
        f"inverse branch Newton did not converge in {max_iter} iterations (|G|={abs(G):.3e})",
        last=z,
        iterations=max_iter,
    )


def inverse_branch(
    params: ExpParams,
    w: complex,
    m: int,
    seed: complex | None = None,
    *,
    log_w: complex | None = None,
) -> complex:
    """Preimage of ``w`` on sheet ``m``.

    For p = 0 this is ``(log_w + 2 pi i m) / lam``.  For p >= 1 it solves
    ``p Log z + lam z + log_alpha = log_w + 2 pi i m`` by Newton, seeded by
    the p = 0 formula applied to ``w / alpha`` unless ``seed`` is given.
    ``log_w`` defaults to the principal logarithm of ``w``.
    """
    w = complex(w)
    if w == 0:
        raise NoPreimageError("0 is the omitted/asymptotic value and has no addressed preimage")
    lw = cmath.log(w) if log_w is None else complex(log_w)
    rhs = lw + TWO_PI_I * m
    if params.p == 0:
        return rhs / params.lam
    rhs -= params.log_alpha
    if seed is None:
        seed = rhs / params.lam
        if seed == 0:
            seed = 1e-3 + 0j
    z, _ = solve_log_equation(params.p, params.lam, rhs, seed)
    return z


class Orbit(NamedTuple):
    points: list
    escaped: bool


def forward_orbit(
    params: ExpParams, z0: complex, n: int, escape_radius: float = ESCAPE_RADIUS
) -> Orbit:
    """``[z0, E(z0), ..., E^n(z0)]``, truncated at the first escaping point."""
    pts = [complex(z0)]
    z = complex(z0)
    for _ in range(n):
        if not cmath.isfinite(z) or abs(z) > escape_radius:
            return Orbit(pts, True)
        z = _evaluate_scalar(params, z)
        pts.append(z)
    escaped = not cmath.isfinite(z) or abs(z) > escape_radius
    return Orbit(pts, escaped)
