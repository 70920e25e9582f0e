"""Independent checks on a solved parameter.

``verify_orbit`` follows the singular orbit forward and compares it with the
portrait.  ``newton_direct_solve`` finds a parameter by Newton on the orbit
closure equation alone, with no branch address; basins are selected by the
seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

from .diagnostics import spherical_distance
from .errors import InvalidParameterError, NonConvergenceError, WrongBasinError
from .exp_family import ESCAPE_RADIUS, ExpParams, forward_orbit
from .portrait import OrbitPortrait

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 200
FD_STEP = 1e-7


@dataclass
class OrbitReport:
    closure_ok: bool
    separation_ok: bool
    pattern_ok: bool
    closure_distance: float
    min_separation: float
    orbit: list = field(default_factory=list)
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.closure_ok and self.separation_ok and self.pattern_ok

    def __bool__(self):
        return self.passed


def _orbit(params: ExpParams, portrait: OrbitPortrait, n: int) -> list:
    start = 0j if portrait.p == 0 else params.crit
    return forward_orbit(params, start, n).points


def verify_orbit(params: ExpParams, portrait: OrbitPortrait, tol: float = 1e-9) -> OrbitReport:
    """Check that the singular orbit of ``params`` realizes ``portrait``.

    (a) closure: the orbit returns to the cycle entry after one period, to
    spherical distance ``tol``; (b) the portrait's distinct points (and 0,
    ``inf`` for p >= 1) are pairwise at least ``10 tol`` apart; (c) along a
    second pass around the cycle every point is nearest to the portrait point
    of the same name.
    """
    k1, l = portrait.preperiod, portrait.period
    n_steps = k1 + 2 * l + 1
    orb = _orbit(params, portrait, n_steps)
    if len(orb) < n_steps + 1 or any(not math.isfinite(abs(z)) or abs(z) > ESCAPE_RADIUS for z in orb):
        return OrbitReport(False, False, False, math.inf, 0.0, orb, "singular orbit escapes")

    entry = k1 + 1
    closure = spherical_distance(orb[entry + l], orb[entry])
    n_pts = len(portrait.orbit)
    ref = {portrait.orbit[k]: orb[k] for k in range(n_pts)}
    extra = [] if portrait.p == 0 else [0j]
    pts = list(ref.values()) + extra + [None]
    sep = min(spherical_distance(a, b) for a, b in combinations(pts, 2))

    pattern = True
    for k in range(n_pts, len(orb)):
        want = portrait.name_at(k)
        nearest = min(ref, key=lambda nm: spherical_distance(orb[k], ref[nm]))
        if nearest != want:
            pattern = False
            break
    msg = []
    closure_ok = closure <= tol
    sep_ok = sep >= 10 * tol
    if not closure_ok:
        msg.append(f"orbit does not close (distance {closure:.3e})")
    if not sep_ok:
        msg.append(f"distinct portrait points collide (gap {sep:.3e})")
    if not pattern:
        msg.append("collision pattern differs from the portrait")
    return OrbitReport(closure_ok, sep_ok, pattern, closure, sep, orb, "; ".join(msg))


def closure_function(portrait: OrbitPortrait, p: int | None = None):
    """``G(lam) = E^{k1+l}(s) - E^{k1}(s)`` with s the singular value.

    When the critical point is periodic this root is double (the
    normalization pins ``E(c) = 1`` for every ``lam``), so the cycle is closed
    at c instead: ``G(lam) = E^l(c) - c``, which has a simple root.
    """
    p = portrait.p if p is None else p
    k1, l = portrait.preperiod, portrait.period
    if p >= 1 and portrait.crit_periodic:
        lo, hi = 0, l
    else:
        lo, hi = k1 + 1, k1 + 1 + l

    def G(lam: complex) -> complex:
        params = ExpParams(p, lam)
        orb = forward_orbit(params, 0j if p == 0 else params.crit, hi).points
        if len(orb) < hi + 1:
            return complex(math.inf, 0)
        return orb[hi] - orb[lo]

    return G


def newton_direct_solve(
    portrait: OrbitPortrait,
    p: int,
    lambda_seed: complex,
    *,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
    verify_tol: float = 1e-9,
) -> complex:
    """Newton on the closure equation in ``lam``; derivative by central differences.

    Raises ``NonConvergenceError`` if ``|G| <= tol`` is not reached, and
    ``WrongBasinError`` if the root does not pass ``verify_orbit``.
    """
    lam = complex(lambda_seed)
    if lam == 0:
        raise InvalidParameterError("seed lambda must be nonzero")
    G = closure_function(portrait, p)
    g = G(lam)
    if not math.isfinite(abs(g)):
        raise NonConvergenceError("singular orbit escapes at the seed", last=lam, iterations=0)
    it = 0
    while abs(g) > tol:
        if it >= max_iter:
            raise NonConvergenceError(f"|G|={abs(g):.3e} after {max_iter} Newton steps", last=lam,
                                      iterations=it)
        h = FD_STEP * max(1.0, abs(lam))
        dg = (G(lam + h) - G(lam - h)) / (2 * h)
        if dg == 0 or not math.isfinite(abs(dg)):
            raise NonConvergenceError("vanishing or undefined derivative", last=lam, iterations=it)
        step = g / dg
        # mild damping: halve while the residual grows
        t = 1.0
        while True:
            cand = lam - t * step
            gc = G(cand) if cand != 0 else complex(math.inf, 0)
            if abs(gc) < abs(g) or t < 1e-3:
                break
            t *= 0.5
        if cand == 0 or not math.isfinite(abs(gc)):
            raise NonConvergenceError("Newton step left the domain", last=lam, iterations=it)
        lam, g = cand, gc
        it += 1
    report = verify_orbit(ExpParams(p, lam), portrait, verify_tol)
    if not report.passed:
        raise WrongBasinError(f"Newton root fails orbit verification: {report.message}", last=lam,
                              iterations=it)
    return lam
