"""Spherical geometry, winding numbers and the compactness bounds on ``|lambda_n|``."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import BoundedGeometryError, BranchTrackingError
from .exp_family import ExpParams

DETOUR_RADIUS = 1e-6
DEFAULT_STEPS = 4096
MAX_STEPS = 2**20
_BIG = 1e100


def _is_inf(z) -> bool:
    return z is None or not cmath.isfinite(complex(z))


def spherical_distance(z, w) -> float:
    """Chordal distance ``|z-w| / (sqrt(1+|z|^2) sqrt(1+|w|^2))``.

    ``None`` or a non-finite value stands for infinity, with
    ``d(z, inf) = 1 / sqrt(1+|z|^2)``.  Computed as the square root of the
    squared ratio so that the closed-form values come out correctly rounded.
    """
    zi, wi = _is_inf(z), _is_inf(w)
    if zi and wi:
        return 0.0
    if zi or wi:
        a = abs(complex(w if zi else z))
        if a > _BIG:
            return 1.0 / a
        return math.sqrt(1.0 / (1.0 + a * a))
    z, w = complex(z), complex(w)
    az, aw, dz = abs(z), abs(w), abs(z - w)
    if max(az, aw) > _BIG:
        return dz / (math.hypot(1.0, az) * math.hypot(1.0, aw))
    return math.sqrt(dz * dz / ((1.0 + az * az) * (1.0 + aw * aw)))


def min_spherical_gap(points) -> float:
    """Smallest pairwise spherical distance among the points and infinity.

    ``points`` is a mapping (e.g. ``MarkedConfiguration.positions``), an object
    with a ``positions`` attribute, or a plain sequence of finite points.
    """
    if hasattr(points, "positions"):
        points = points.positions
    if hasattr(points, "values"):
        points = points.values()
    pts = [complex(z) for z in points] + [None]
    return min(spherical_distance(a, b) for a, b in combinations(pts, 2))


def _segment_pieces(a: complex, b: complex, p: int):
    """Split a segment into straight pieces and detour arcs around 0."""
    if p == 0 or a == b:
        return [("seg", a, b)]
    d_vec = b - a
    L = abs(d_vec)
    t_star = min(max(-((a.conjugate() * d_vec).real) / (L * L), 0.0), 1.0)
    closest = a + t_star * d_vec
    if abs(closest) >= DETOUR_RADIUS:
        return [("seg", a, b)]
    # chord of the detour circle cut by the line
    u = d_vec / L
    s_perp = (closest - (closest * u.conjugate()).real * u)
    half = math.sqrt(max(DETOUR_RADIUS**2 - abs(s_perp) ** 2, 0.0))
    s0 = (a * u.conjugate()).real
    t_in, t_out = (-half - s0) / L, (half - s0) / L
    if t_in <= 0 or t_out >= 1:
        raise BranchTrackingError("winding path endpoint lies inside the detour disk around 0")
    p_in, p_out = a + t_in * d_vec, a + t_out * d_vec
    th_in, th_out = cmath.phase(p_in), cmath.phase(p_out)
    # keep the side of 0 the segment was on; a segment through 0 passes on its left
    side = s_perp if abs(s_perp) > 0 else 1j * u
    target = cmath.phase(side)
    ccw = (th_out - th_in) % (2 * math.pi)
    sweep = min(
        (ccw, ccw - 2 * math.pi),
        key=lambda s: abs(cmath.phase(cmath.exp(1j * (th_in + s / 2 - target)))),
    )
    return [("seg", a, p_in), ("arc", th_in, sweep), ("seg", p_out, b)]


def _winding_raw(params: ExpParams, path, steps: int) -> complex:
    p, lam = params.p, params.lam
    total = 0j
    for a, b in zip(path[:-1], path[1:]):
        a, b = complex(a), complex(b)
        for piece in _segment_pieces(a, b, p):
            if piece[0] == "arc":
                _, th0, sweep = piece
                th = th0 + sweep * np.linspace(0.0, 1.0, steps + 1)
                z = DETOUR_RADIUS * np.exp(1j * th)
                dz = 1j * z * sweep
                f = (p / z + lam) * dz
                total += np.trapezoid(f, dx=1.0 / steps)
                continue
            _, a0, b0 = piece
            # lam dz is linear: the trapezoid rule is exact for it
            total += lam * (b0 - a0)
            if p == 0 or a0 == b0:
                continue
            # nodes graded like the distance to 0 (sinh map about the closest point)
            dv = b0 - a0
            L = abs(dv)
            t_star = -((a0.conjugate() * dv).real) / (L * L)
            dist = max(abs(a0 + t_star * dv), 1e-300)
            scale = dist / L
            u0, u1 = math.asinh((0.0 - t_star) / scale), math.asinh((1.0 - t_star) / scale)
            u = np.linspace(u0, u1, steps + 1)
            z = a0 + (t_star + scale * np.sinh(u)) * dv
            dzdu = dv * scale * np.cosh(u)
            total += np.trapezoid(p / z * dzdu, dx=(u1 - u0) / steps)
    return total / (2j * math.pi)


def compute_winding(params: ExpParams, path, steps: int = DEFAULT_STEPS) -> tuple[int, float]:
    """Winding number about 0 of the image of ``path`` under ``E``.

    Integrates ``p/z + lam`` along the polyline with the composite trapezoid
    rule; a segment passing within ``DETOUR_RADIUS`` of 0 follows the circle
    on its own side of 0 (a segment through 0 keeps 0 on its right).  The
    step count doubles while the result is more than 0.25 away from an
    integer.  Returns ``(eta, residual)``.
    """
    path = [complex(z) for z in path]
    if len(path) < 2 or all(z == path[0] for z in path):
        return 0, 0.0
    raw = _winding_raw(params, path, steps)
    while True:
        eta = int(round(raw.real))
        residual = abs(raw - eta)
        if residual <= 0.25 or steps >= MAX_STEPS:
            break
        steps *= 2
        raw = _winding_raw(params, path, steps)
    if residual > 0.25:
        raise BranchTrackingError(f"winding integral not near an integer (residual {residual:.3g})")
    return eta, residual


def check_eta_invariance(trace) -> bool:
    """True iff every recorded step has the same winding number."""
    etas = {rec.eta for rec in trace.records}
    return len(etas) <= 1


@dataclass
class LambdaBoundReport:
    applicable: bool
    kind: str
    holds: bool = True
    kappa: float = math.nan
    K: float = math.nan
    eta: int | None = None
    bounds: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    step_ratios: list = field(default_factory=list)

    @property
    def tightest_ratio(self) -> float:
        """Largest ``|lambda_n| / bound_n`` with step-wise kappa, K."""
        return max(self.step_ratios) if self.step_ratios else math.nan

    @property
    def max_ratio(self) -> float:
        """Largest ``|lambda_n| / bound`` with the run-wide kappa, K."""
        return max(self.ratios) if self.ratios else math.nan


def _p_bound(eta, kappa, K, p):
    if p == 0:
        return 2 * math.pi * abs(eta) / kappa
    return (2 * math.pi * abs(eta) + p * (math.log(K) - math.log(kappa) + 4 * math.pi)) / kappa


def check_lambda_bounds(trace, p: int | None = None, slack: float = 1e-9) -> LambdaBoundReport:
    """Verify the a-priori upper bounds on ``|lambda_n|`` along a run.

    p = 0: ``|lambda_n| <= 2 pi |eta| / kappa`` with kappa the smallest
    distance between the marked pair.  p >= 1 with a non-periodic critical
    point: ``|lambda_n| <= (2 pi |eta| + p (log K - log kappa + 4 pi)) / kappa``
    where kappa, K also bound the moduli of the pair.  A periodic critical
    point is itself marked, so ``|lambda_n| = p / |c_n| <= p / kappa``.
    """
    portrait = trace.portrait
    p = portrait.p if p is None else p
    recs = trace.records
    if portrait.is_degenerate:
        return LambdaBoundReport(applicable=False, kind="degenerate")
    if not recs:
        return LambdaBoundReport(applicable=False, kind="empty")

    if p >= 1 and portrait.crit_periodic:
        mags = [abs(r.positions[portrait.crit]) for r in recs]
        kappa = min(mags)
        if kappa == 0:
            raise BoundedGeometryError("critical point collided with 0")
        rep = LambdaBoundReport(applicable=True, kind="periodic-critical", kappa=kappa, K=max(mags))
        for r, m in zip(recs, mags):
            bound, step_bound = p / kappa, p / m
            rep.bounds.append(bound)
            rep.ratios.append(abs(r.lam) / bound)
            rep.step_ratios.append(abs(r.lam) / step_bound)
        rep.holds = all(x <= 1 + slack for x in rep.ratios)
        return rep

    dists, mags = [], []
    for r in recs:
        z1, z2 = r.pair
        dists.append(abs(z2 - z1))
        mags.append((abs(z1), abs(z2)))
    if p == 0:
        kappa, K = min(dists), max(dists)
    else:
        kappa = min(min(dists), min(min(m) for m in mags))
        K = max(max(dists), max(max(m) for m in mags))
    if kappa == 0:
        raise BoundedGeometryError("marked pair collided (kappa = 0)")
    etas = {r.eta for r in recs}
    rep = LambdaBoundReport(
        applicable=True,
        kind="p0" if p == 0 else "p>=1",
        kappa=kappa,
        K=K,
        eta=recs[-1].eta if len(etas) == 1 else None,
    )
    for r, dist, m in zip(recs, dists, mags):
        bound = _p_bound(r.eta, kappa, K, p)
        k_n = dist if p == 0 else min(dist, *m)
        K_n = dist if p == 0 else max(dist, *m)
        step_bound = _p_bound(r.eta, k_n, K_n, p)
        rep.bounds.append(bound)
        lam = abs(r.lam)
        rep.ratios.append(lam / bound if bound > 0 else math.inf)
        rep.step_ratios.append(lam / step_bound if step_bound > 0 else math.inf)
    rep.holds = all(x <= 1 + slack for x in rep.ratios)
    return rep


@dataclass
class GeometryReport:
    b_n: float
    kappa: float
    K: float
    eta_n: int
    lambda_bound: float
    ok: bool


def geometry_reports(trace, gap_floor: float = 0.0) -> list[GeometryReport]:
    """Per-step bounded-geometry summary with running kappa (min gap) and K."""
    bounds = check_lambda_bounds(trace)
    out = []
    kappa, K = math.inf, 0.0
    for i, r in enumerate(trace.records):
        kappa = min(kappa, r.b)
        K = max(K, max(abs(z) for z in r.positions.values()))
        lb = bounds.bounds[i] if bounds.applicable else math.nan
        ok = r.b > gap_floor and (not bounds.applicable or bounds.ratios[i] <= 1 + 1e-9)
        out.append(GeometryReport(r.b, kappa, K, r.eta, lb, ok))
    return out


def displacement_ratio(trace, window: int = 20) -> float:
    """Largest ``d_{n+1}/d_n`` over the last ``window`` steps (nan if too short)."""
    d = [r.d for r in trace.records if r.d > 0]
    d = d[-(window + 1):]
    if len(d) < 2:
        return math.nan
    return max(b / a for a, b in zip(d[:-1], d[1:]))
