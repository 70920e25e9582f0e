"""Quadratic differentials on marked spheres and their pushforward.

A differential is stored by its residues, ``phi(z) = sum_j a_j / (z - p_j)``;
integrability at infinity needs ``sum a_j = 0`` and ``sum a_j p_j = 0``.  The
pushforward ``phi_hat(z) = sum over E(w) = z of phi(w) / E'(w)^2`` is not
rational for p >= 1, so it is handled through point values on a quadrature
grid.  For p = 0 the branch sum has a closed form,
``E_*(a/(w - p)) = a (z + v) / (2 lam z^2 (z - v))`` with ``v = E(p)``, which
``pushforward_rational`` returns and the tests use to check the truncated
sum.

Areas ``int |phi| dx dy`` are computed on a log-polar grid centred at 0,
blended by a smooth partition of unity with small polar patches around every
other singular point; see ``build_grid``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import lambertw

from .errors import InvalidParameterError, QuadratureError
from .exp_family import ExpParams, evaluate

TWO_PI = 2 * math.pi
DEFAULT_BRANCHES = 128
DEFAULT_GRID = 64
GL_ORDER = 8
_CHUNK = 4096


@dataclass(frozen=True)
class QuadDifferential:
    poles: tuple = ()
    residues: tuple = ()

    def __post_init__(self):
        poles = tuple(complex(p) for p in self.poles)
        res = tuple(complex(a) for a in self.residues)
        if len(poles) != len(res):
            raise InvalidParameterError("poles and residues must have the same length")
        if len(set(poles)) != len(poles):
            raise InvalidParameterError("poles must be distinct")
        object.__setattr__(self, "poles", poles)
        object.__setattr__(self, "residues", res)
        object.__setattr__(self, "_integrable", bool(poles) and self.is_integrable(1e-9))

    def __call__(self, z):
        """Evaluate ``phi``.

        For an integrable differential, poles with ``|p| < |z|/2`` are summed
        as ``a p^2 / (z^2 (z - p))`` and their zeroth and first moments are
        replaced by minus those of the remaining poles.  This is the same
        function when both moments vanish, and it avoids cancellation between
        large residues clustered near 0.
        """
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            if not self._integrable:
                for p, a in zip(self.poles, self.residues):
                    out = out + a / (z - p)
                return out if out.ndim else complex(out)
            s0 = np.zeros_like(z)
            s1 = np.zeros_like(z)
            any_near = np.zeros(z.shape, dtype=bool)
            for p, a in zip(self.poles, self.residues):
                near = abs(p) < 0.5 * np.abs(z)
                any_near |= near
                pz = p / z
                out = out + np.where(near, a * pz * pz / (z - p), a / (z - p))
                s0 = s0 - np.where(near, 0, a)
                s1 = s1 - np.where(near, 0, a * p)
            out = out + np.where(any_near, (s0 + s1 / z) / z, 0)
        return out if out.ndim else complex(out)

    def __mul__(self, c):
        return QuadDifferential(self.poles, tuple(complex(c) * a for a in self.residues))

    __rmul__ = __mul__

    def __add__(self, other):
        res = dict(zip(self.poles, self.residues))
        for p, a in zip(other.poles, other.residues):
            res[p] = res.get(p, 0j) + a
        return QuadDifferential(tuple(res), tuple(res.values()))

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        return self + (-other)

    @property
    def moments(self) -> tuple[complex, complex]:
        """``(sum a_j, sum a_j p_j)``; both vanish for an integrable differential."""
        a = np.array(self.residues, dtype=complex)
        p = np.array(self.poles, dtype=complex)
        return complex(a.sum()), complex((a * p).sum())

    def is_integrable(self, tol: float = 1e-12) -> bool:
        scale = max([1.0] + [abs(a) * max(1.0, abs(p)) for p, a in zip(self.poles, self.residues)])
        return all(abs(m) <= tol * scale for m in self.moments)

    @property
    def is_zero(self) -> bool:
        return all(a == 0 for a in self.residues)


def basis(marked) -> list[QuadDifferential]:
    """A basis of integrable differentials with simple poles at ``marked``.

    ``marked`` lists the finite marked points (infinity is implicit), so the
    dimension is ``len(marked) - 2``.  Element k puts residue 1 at
    ``marked[k]`` and solves the two moment conditions with the first two
    points.
    """
    pts = [complex(p) for p in marked]
    if len(set(pts)) != len(pts):
        raise InvalidParameterError("marked points must be distinct")
    if len(pts) < 3:
        return []
    p1, p2 = pts[0], pts[1]
    out = []
    for k in range(2, len(pts)):
        pk = pts[k]
        x = (p2 - pk) / (p1 - p2)
        y = (pk - p1) / (p1 - p2)
        res = [0j] * len(pts)
        res[0], res[1], res[k] = x, y, 1 + 0j
        out.append(QuadDifferential(tuple(pts), tuple(res)))
    mat = np.array([q.residues for q in out])
    if np.linalg.matrix_rank(mat) != len(out):
        raise QuadratureError("basis residue vectors are linearly dependent")
    return out


def merge_points(points, rtol: float = 1e-9, atol: float = 1e-200) -> list:
    """Distinct points, identifying those closer than ``rtol * max(|z|, |w|)`` or ``atol``."""
    out = []
    for z in points:
        z = complex(z)
        if not any(abs(z - w) <= max(rtol * max(abs(z), abs(w)), atol) for w in out):
            out.append(z)
    return out


# -- quadrature ---------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureConfig:
    """Grid resolution ``N`` and the radii of the log-polar grid.

    The grid covers ``r_min <= |z| <= R`` with ``r_min = inner * s_min`` and
    ``R = outer * s_max``, where ``s_min``/``s_max`` are the smallest
    nonzero and largest modulus among the singular points (and 1).
    """

    N: int = DEFAULT_GRID
    inner: float = 1e-6
    outer: float = 1e4

    def __post_init__(self):
        if self.N < 8 or self.N % 8:
            raise InvalidParameterError(f"grid resolution N must be a positive multiple of 8, got {self.N}")

    def halved(self) -> "QuadratureConfig":
        return QuadratureConfig(max(8, (self.N // 2) // 8 * 8), self.inner, self.outer)


@dataclass
class QuadratureGrid:
    nodes: np.ndarray
    weights: np.ndarray
    n_main: int
    n_ring: int
    r_min: float
    R: float
    singular: tuple
    rel_tail_error: float

    def integrate_abs(self, values) -> tuple[float, float]:
        """``int |f|`` from values at ``nodes``; returns ``(value, tail_error)``."""
        v = np.abs(np.asarray(values))
        if not np.all(np.isfinite(v)):
            raise QuadratureError("non-finite integrand value on the quadrature grid")
        main = float(np.dot(self.weights, v[: self.n_main]))
        inner_z = self.nodes[self.n_main: self.n_main + self.n_ring]
        outer_z = self.nodes[self.n_main + self.n_ring:]
        inner = TWO_PI * self.r_min * float(np.mean(v[self.n_main: self.n_main + self.n_ring] * np.abs(inner_z)))
        outer = TWO_PI * float(np.mean(v[self.n_main + self.n_ring:] * np.abs(outer_z) ** 3)) / self.R
        tails = inner + outer
        return main + tails, self.rel_tail_error * tails

    def weighted_sum(self, values) -> float:
        """``sum w_i values_i`` over the main nodes (for pointwise error bounds)."""
        return float(np.dot(self.weights, np.asarray(values)[: self.n_main]))


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        g0 = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        g1 = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return g0 / (g0 + g1)


def _bump(t):
    """1 on ``[0, 1/2]``, 0 on ``[1, inf)``, smooth in between."""
    return 1.0 - _smoothstep(2.0 * np.asarray(t) - 1.0)


def _gauss_panels(breaks, order=GL_ORDER):
    x, w = np.polynomial.legendre.leggauss(order)
    breaks = np.asarray(breaks, dtype=float)
    a, b = breaks[:-1, None], breaks[1:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


def _s_breaks(s_min, s_max, centers, h_near):
    """Panel breakpoints in ``s = ln r``, graded towards each ``ln|p|``."""
    breaks = [s_min]
    s = s_min
    while s < s_max:
        h = min([1.0] + [max(hc, 0.5 * abs(s - c)) for c, hc in zip(centers, h_near)])
        s = min(s + h, s_max)
        breaks.append(s)
    return breaks


def _patch_radii(pts):
    """Half the distance from each point to its nearest neighbour."""
    arr = np.array(pts)
    d = np.abs(arr[:, None] - arr[None, :])
    np.fill_diagonal(d, np.inf)
    return 0.5 * d.min(axis=1)


def build_grid(singular, quad: QuadratureConfig | None = None) -> QuadratureGrid:
    """Quadrature grid for integrands with simple poles at ``singular`` and at 0.

    Every nonzero singular point p gets a polar patch of radius ``r_p`` (half
    the distance to its nearest neighbour, 0 included) weighted by a smooth
    bump ``chi_p``; the rest of the plane is a log-polar grid weighted by
    ``1 - sum chi_p``, with Gauss-Legendre panels in ``ln r`` and the
    trapezoid rule in the angle.  The angular count on each circle follows
    the smallest feature ``max(r_p, |r - |p||)`` it crosses.  Two extra
    circles at ``r_min`` and ``R`` feed the analytic tails
    ``int_{|z|<r_min}`` and ``int_{|z|>R}``.
    """
    quad = quad or QuadratureConfig()
    N = quad.N
    pts = sorted(merge_points([0j] + list(singular)), key=lambda z: (abs(z), z.real, z.imag))
    nonzero = [p for p in pts if p != 0]
    radii = _patch_radii(pts)[1:] if nonzero else np.array([])
    mods = np.array([abs(p) for p in nonzero]) if nonzero else np.array([1.0])
    r_min = quad.inner * min(float(mods.min()), 1.0)
    R = quad.outer * max(float(mods.max()), 1.0)

    # global log-polar part
    centers = [math.log(abs(p)) for p in nonzero]
    h_near = [min(rp / m, 1.0) * 16.0 / N for rp, m in zip(radii, mods)]
    s_nodes, s_w = _gauss_panels(_s_breaks(math.log(r_min), math.log(R), centers, h_near))
    r = np.exp(s_nodes)
    zs, ws = [], []
    for rk, wk in zip(r, s_w):
        if nonzero:
            feature = np.maximum(radii, np.abs(rk - mods))
            n_theta = 2 * N * max(1, math.ceil(float(np.max(rk / feature))))
        else:
            n_theta = 2 * N
        theta = TWO_PI * np.arange(n_theta) / n_theta
        zs.append(rk * np.exp(1j * theta))
        ws.append(np.full(n_theta, rk * rk * wk * TWO_PI / n_theta))
    zg, wg = np.concatenate(zs), np.concatenate(ws)
    chi = np.zeros(zg.shape)
    for p, rp in zip(nonzero, radii):
        chi += _bump(np.abs(zg - p) / rp)
    wg = wg * (1.0 - chi)
    keep = wg != 0
    zg, wg = zg[keep], wg[keep]

    # polar patches around the nonzero singular points
    rho, rho_w = _gauss_panels(np.linspace(0.0, 1.0, 3), order=max(GL_ORDER, N // 8))
    n_loc = N
    phi = TWO_PI * (np.arange(n_loc) + 0.5) / n_loc
    unit_w = ((rho * rho_w * _bump(rho))[:, None] * np.full(n_loc, TWO_PI / n_loc)[None, :]).ravel()
    unit_z = (rho[:, None] * np.exp(1j * phi[None, :])).ravel()
    patch_z = [p + rp * unit_z for p, rp in zip(nonzero, radii)]
    patch_w = [rp * rp * unit_w for rp in radii]

    n_ring = 2 * N
    ring = np.exp(1j * TWO_PI * (np.arange(n_ring) + 0.5) / n_ring)
    nodes = np.concatenate([zg] + patch_z + [r_min * ring, R * ring])
    weights = np.concatenate([wg] + patch_w)
    # leading-order tails are accurate to relative order r_min/r_p and max|p|/R
    r0 = float(radii.min()) if nonzero else 1.0
    rel = 10.0 * max(r_min / r0, float(mods.max()) / R)
    return QuadratureGrid(nodes, weights, len(weights), n_ring, r_min, R, tuple(pts), rel)


@dataclass
class NormResult:
    value: float
    error: float

    def __float__(self):
        return self.value


def _norm_on(grid: QuadratureGrid, values) -> tuple[float, float]:
    return grid.integrate_abs(values)


def norm(q: QuadDifferential, quad: QuadratureConfig | None = None) -> NormResult:
    """``int |phi| dx dy`` with an error estimate from halving the grid."""
    quad = quad or QuadratureConfig()
    if q.is_zero or not q.poles:
        return NormResult(0.0, 0.0)
    fine = build_grid(q.poles, quad)
    coarse = build_grid(q.poles, quad.halved())
    v1, t1 = fine.integrate_abs(q(fine.nodes))
    v0, _ = coarse.integrate_abs(q(coarse.nodes))
    return NormResult(v1, abs(v1 - v0) + t1)


# -- pushforward --------------------------------------------------------------


def _log(z):
    return np.log(np.asarray(z, dtype=complex))


def _tail_bound_p0(lam, q: QuadDifferential, z, M):
    """Bound on the branches with ``|m| > M`` (p = 0).

    With both moments zero, ``phi(w) = sum a_j p_j^2 / (w^2 (w - p_j))``;
    ``|w_m| >= (2 pi |m| - |Log z|)/|lam|`` and the sum over ``m > M`` is
    bounded by the integral from M.
    """
    a = np.abs(np.array(q.residues))
    p = np.abs(np.array(q.poles))
    C = float(np.sum(a * p**2))
    P = float(p.max()) if len(p) else 0.0
    L = np.abs(_log(z))
    gap = TWO_PI * M - L - P * abs(lam)
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = 2.0 * C * abs(lam) ** 3 / (2.0 * TWO_PI * gap**2) / np.abs(lam * z) ** 2
    return np.where(gap > 0, tail, np.inf)


def _push_p0(params, q, z, M):
    lam = params.lam
    m = np.arange(-M, M + 1)
    out = np.empty(z.shape, dtype=complex)
    for s in range(0, z.size, _CHUNK):
        zc = z[s: s + _CHUNK]
        w = (_log(zc)[:, None] + 2j * math.pi * m[None, :]) / lam
        out[s: s + _CHUNK] = q(w).sum(axis=1) / (lam * zc) ** 2
    return out, _tail_bound_p0(lam, q, z, M)


def _push_pk(params, q, z, M):
    p, lam = params.p, params.lam
    ks = range(-M, M + 1)
    out = np.zeros(z.shape, dtype=complex)
    edge = np.zeros(z.shape)
    base = (_log(z) - params.log_alpha) / p
    for j in range(p):
        y = np.exp(base + 2j * math.pi * j / p)
        arg = lam * y / p
        for k in ks:
            w = (p / lam) * lambertw(arg, k)
            with np.errstate(divide="ignore", invalid="ignore"):
                term = q(w) / (z * (p / w + lam)) ** 2
            out += term
            if abs(k) == M:
                edge += np.abs(term)
    # terms decay like |k|^-3, so the tail past M is about M/2 times an edge term
    return out, 0.5 * M * edge


def pushforward_values(params: ExpParams, q: QuadDifferential, z, M: int = DEFAULT_BRANCHES):
    """Truncated branch sum ``sum_{|m|<=M} phi(w_m) / E'(w_m)^2`` at ``z``.

    For p = 0 the preimages are ``(Log z + 2 pi i m)/lam``; for p >= 1 they
    are ``(p/lam) W_k(lam y/p)`` over the p-th roots y of ``z/alpha`` and the
    Lambert-W branches ``|k| <= M``.  Returns ``(values, tail)`` where
    ``tail`` bounds (p = 0) or estimates (p >= 1) the omitted branches.
    """
    if M < 1:
        raise InvalidParameterError(f"branch truncation M must be >= 1, got {M}")
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(z == 0):
        raise InvalidParameterError("pushforward is not defined at the asymptotic value 0")
    if q.is_zero or not q.poles:
        vals, tail = np.zeros(z.shape, dtype=complex), np.zeros(z.shape)
    elif params.p == 0:
        vals, tail = _push_p0(params, q, z, M)
    else:
        vals, tail = _push_pk(params, q, z, M)
    if scalar:
        return complex(vals[0]), float(tail[0])
    return vals, tail


def pushforward_rational(params: ExpParams, q: QuadDifferential) -> QuadDifferential:
    """Exact pushforward for p = 0 as a rational differential.

    Residue ``a_j/(lam v_j)`` at ``v_j = E(p_j)`` and ``-sum a_j/(lam v_j)``
    at 0.
    """
    if params.p != 0:
        raise InvalidParameterError("closed-form pushforward exists only for p = 0")
    images = [evaluate(params, p) for p in q.poles]
    targets = merge_points(images + [0j])
    res = dict.fromkeys(targets, 0j)
    total = 0j
    for v, a in zip(images, q.residues):
        r = a / (params.lam * v)
        key = min(targets, key=lambda t: abs(t - v))
        res[key] += r
        total += r
    zero = min(targets, key=abs)
    res[zero] -= total
    return QuadDifferential(tuple(res), tuple(res.values()))


# -- contraction --------------------------------------------------------------


@dataclass
class RatioEntry:
    label: str
    ratio: float
    error: float
    norm: float
    push_norm: float


@dataclass
class ContractionReport:
    entries: list = field(default_factory=list)
    M: int = DEFAULT_BRANCHES
    N: int = DEFAULT_GRID

    @property
    def max_ratio(self) -> float:
        return max((e.ratio for e in self.entries), default=math.nan)

    @property
    def delta(self) -> float:
        return 1.0 - self.max_ratio

    @property
    def error_bound(self) -> float:
        return max((e.error for e in self.entries), default=0.0)

    def __float__(self):
        return self.max_ratio

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "N": self.N,
            "max_ratio": self.max_ratio,
            "delta": self.delta,
            "error_bound": self.error_bound,
            "entries": [vars(e) for e in self.entries],
        }


def _image_points(params, marked):
    out = set()
    for z in marked:
        v = evaluate(params, z)
        if np.isfinite(abs(v)):
            out.add(complex(v))
    return out


def contraction_estimate(
    params: ExpParams,
    marked,
    M: int = DEFAULT_BRANCHES,
    quad: QuadratureConfig | None = None,
    n_random: int = 20,
    seed: int = 0,
) -> ContractionReport:
    """``||E_* q|| / ||q||`` over a basis and ``n_random`` random combinations.

    Both norms come from the same grid machinery; every ratio carries an
    error bound adding the grid-halving difference, the truncated-branch
    bound and the tail errors of numerator and denominator.
    """
    quad = quad or QuadratureConfig()
    report = ContractionReport(M=M, N=quad.N)
    B = basis(marked)
    if not B:
        return report
    crit = [] if params.p == 0 else [1 + 0j]
    singular = merge_points([complex(z) for z in marked] + sorted(_image_points(params, marked), key=abs) + crit)

    grids = [build_grid(singular, quad), build_grid(singular, quad.halved())]
    vals, pvals, ptails = [], [], []
    for g in grids:
        vals.append(np.array([b(g.nodes) for b in B]))
        pv, pt = zip(*(pushforward_values(params, b, g.nodes, M) for b in B))
        pvals.append(np.array(pv))
        ptails.append(np.array(pt))

    rng = np.random.default_rng(seed)
    combos = [(f"basis[{i}]", np.eye(len(B))[i].astype(complex)) for i in range(len(B))]
    for i in range(n_random):
        c = rng.normal(size=len(B)) + 1j * rng.normal(size=len(B))
        combos.append((f"random[{i}]", c / np.linalg.norm(c)))

    for label, c in combos:
        (n1, t1), (n0, _) = (g.integrate_abs(c @ v) for g, v in zip(grids, vals))
        (m1, u1), (m0, _) = (g.integrate_abs(c @ v) for g, v in zip(grids, pvals))
        trunc = grids[0].weighted_sum(np.abs(c) @ ptails[0])
        e_den = abs(n1 - n0) + t1
        e_num = abs(m1 - m0) + u1 + trunc
        ratio = m1 / n1
        report.entries.append(RatioEntry(label, ratio, ratio * (e_num / m1 + e_den / n1), n1, m1))
    return report
