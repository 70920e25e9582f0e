"""The pullback iteration on marked configurations.

Every marked point carries a continuous lift of its logarithm.  Lifts start
at the principal branch on the initial configuration and are afterwards
continued step to step (the branch nearest the previous lift is taken), so a
sheet index keeps its meaning while points move.  One step solves for
``lam_n`` from the closing equation ``E_n(1) = z_{succ(1)}`` and then pulls
every free point back along its addressed branch.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from typing import Mapping

from .diagnostics import compute_winding, min_spherical_gap, spherical_distance
from .errors import (
    ConfigurationError,
    InvalidParameterError,
    NonConvergenceError,
    SeedRejectedError,
    SpiderError,
    StepError,
)
from .exp_family import (
    NEWTON_MAX_ITER,
    TWO_PI_I,
    ExpParams,
    continue_log,
    evaluate,
    forward_orbit,
    solve_log_equation,
)
from .portrait import ZERO_NAME, BranchAddress, OrbitPortrait

COLLISION_RADIUS = 1e-6
PERTURBATION = 1e-4 * (1 + 1j)
SEMICONJUGACY_TOL = 1e-9

CONVERGED = "converged"
DIVERGED_LAMBDA = "diverged-lambda"
COLLISION = "collision"
ITERATION_CAP = "iteration-cap"


@dataclass(frozen=True)
class MarkedConfiguration:
    """Positions of the finite marked points (0 and 1 pinned, ``inf`` implicit).

    ``logs`` holds the continued logarithm of every nonzero position.
    """

    positions: Mapping[str, complex]
    logs: Mapping[str, complex]
    n: int = 0

    def __getitem__(self, name):
        return self.positions[name]


@dataclass(frozen=True)
class StepRecord:
    n: int
    lam: complex
    alpha: complex
    d: float
    b: float
    eta: int
    eta_residual: float
    residual: float
    pair: tuple
    positions: Mapping[str, complex]


@dataclass
class IterationTrace:
    portrait: OrbitPortrait
    records: list = field(default_factory=list)
    status: str | None = None
    message: str = ""

    def __len__(self):
        return len(self.records)


@dataclass(frozen=True)
class IterationOptions:
    tol: float = 1e-11
    lambda_max: float = 1e6
    gap_min: float = 1e-9
    max_iter: int = 10000

    @classmethod
    def from_tolerances(cls, tolerances: Mapping[str, float] | None = None, **overrides):
        vals = dict(tolerances or {})
        vals.update({k: v for k, v in overrides.items() if v is not None})
        if "max_iter" in vals:
            vals["max_iter"] = int(vals["max_iter"])
        return cls(**vals)


@dataclass
class IterationResult:
    trace: IterationTrace
    params: ExpParams | None
    config: MarkedConfiguration

    @property
    def status(self) -> str:
        return self.trace.status

    @property
    def converged(self) -> bool:
        return self.trace.status == CONVERGED


def _pinned(portrait: OrbitPortrait) -> dict:
    pins = {portrait.zero: 0j, portrait.one: 1 + 0j}
    return pins


def _make_logs(positions: Mapping[str, complex], ref: Mapping[str, complex] | None = None) -> dict:
    logs = {}
    for name, z in positions.items():
        if z == 0:
            continue
        if ref is not None and name in ref:
            logs[name] = continue_log(z, ref[name])
        else:
            logs[name] = cmath.log(z)
    return logs


def initial_configuration(portrait: OrbitPortrait, seed_lambda: complex) -> MarkedConfiguration:
    """Marked configuration read off the singular orbit of ``E_seed``.

    Points closer than ``COLLISION_RADIUS`` (spherically) to an earlier point
    are shifted by ``j * 1e-4 * (1 + i)`` for the j-th such point.
    """
    params = ExpParams(portrait.p, seed_lambda)
    start = 0j if portrait.p == 0 else params.crit
    orb = forward_orbit(params, start, len(portrait.orbit) - 1)
    if orb.escaped or len(orb.points) < len(portrait.orbit):
        raise SeedRejectedError(f"orbit of the singular value escapes under lambda={complex(seed_lambda)}")
    positions = _pinned(portrait)
    for name, z in zip(portrait.orbit, orb.points):
        positions.setdefault(name, z)

    pinned = set(_pinned(portrait))
    j = 0
    names = list(portrait.points)
    for _ in range(len(names) + 1):
        moved = False
        for i, name in enumerate(names):
            if name in pinned:
                continue
            if any(spherical_distance(positions[name], positions[o]) < COLLISION_RADIUS for o in names[:i]):
                j += 1
                positions[name] = positions[name] + j * PERTURBATION
                moved = True
        if not moved:
            break
    positions = {name: complex(positions[name]) for name in names}
    return MarkedConfiguration(positions, _make_logs(positions), 0)


def _lambda_log_seed(portrait: OrbitPortrait, config: MarkedConfiguration, prev: ExpParams | None):
    """Seed for ``lam`` and for the lift of ``log(-lam/p)``."""
    p = portrait.p
    c = config.positions[portrait.crit]
    if prev is not None:
        lam0 = prev.lam
        L0 = prev.log_alpha / p - 1
        return lam0, continue_log(-lam0 / p, L0)
    return -p / c, -config.logs[portrait.crit]


def solve_lambda(
    portrait: OrbitPortrait,
    address: BranchAddress,
    config: MarkedConfiguration,
    prev: ExpParams | None = None,
) -> ExpParams:
    """Parameters of ``E_n`` from the closing equation ``E_n(1) = z_{succ(1)}``.

    p = 0: ``lam = log z2 + 2 pi i m1``.  p >= 1: Newton on
    ``p L + p + lam = log z2 + 2 pi i m1`` with ``L`` a lift of
    ``log(-lam/p)`` continued from the current critical point (or from
    ``prev``).  The returned params carry the matching ``log_alpha``.
    """
    p = portrait.p
    target = portrait.successor(portrait.one)
    z2 = config.positions.get(target)
    if z2 is None or z2 == 0 or not cmath.isfinite(z2):
        raise ConfigurationError(f"successor of 1 ({target!r}) has no usable position: {z2!r}")
    m1 = address.lambda_sheet(portrait)
    rhs = config.logs.get(target, cmath.log(z2)) + TWO_PI_I * m1
    if p == 0:
        return ExpParams(0, rhs)

    lam, L = _lambda_log_seed(portrait, config, prev)
    scale = max(1.0, abs(rhs))
    F = p * L + p + lam - rhs
    for it in range(NEWTON_MAX_ITER):
        if abs(F) <= 1e-14 * scale:
            break
        dF = p / lam + 1
        if dF == 0:
            raise NonConvergenceError("lambda Newton hit lam = -p", last=lam, iterations=it)
        step = F / dF
        t = 1.0
        while True:
            lam_n = lam - t * step
            if lam_n != 0:
                L_n = continue_log(-lam_n / p, L)
                F_n = p * L_n + p + lam_n - rhs
                if abs(F_n) < abs(F) or t < 1e-6:
                    break
            t *= 0.5
        if abs(F_n) >= abs(F):
            break
        lam, L, F = lam_n, L_n, F_n
    if abs(F) > 1e-10 * scale:
        raise NonConvergenceError(f"lambda Newton failed (|F|={abs(F):.3e})", last=lam, iterations=NEWTON_MAX_ITER)
    return ExpParams(p, lam, log_alpha=p * (1 + L))


def _lift_of_crit_log(params: ExpParams) -> complex:
    # log c = -log(-lam/p) and log_alpha = p (1 + log(-lam/p))
    return -(params.log_alpha / params.p - 1)


def pullback_step(
    portrait: OrbitPortrait,
    address: BranchAddress,
    config: MarkedConfiguration,
    params: ExpParams,
) -> MarkedConfiguration:
    """Pull every free point back along its addressed inverse branch.

    The critical point (p >= 1) goes to ``-p/lam``.  Raises ``StepError``
    naming the offending point when a preimage does not exist or the
    semiconjugacy residual exceeds ``SEMICONJUGACY_TOL``.
    """
    p, lam = params.p, params.lam
    old, old_logs = config.positions, config.logs
    new = _pinned(portrait)
    logs = {portrait.one: 0j}
    if p >= 1:
        c = portrait.crit
        new[c] = -p / lam
        logs[c] = _lift_of_crit_log(params)
    for name in portrait.pulled_back():
        succ = portrait.successor(name)
        w = old[succ]
        if w == 0 or succ not in old_logs:
            raise StepError(f"no preimage of 0 for point {name!r}", index=name, step=config.n + 1)
        rhs = old_logs[succ] + TWO_PI_I * address[name]
        if p == 0:
            z = rhs / lam
            logs[name] = continue_log(z, old_logs[name])
        else:
            rhs = rhs - params.log_alpha
            L_old = old_logs[name]
            seed = (rhs - p * L_old) / lam
            try:
                z, _ = solve_log_equation(p, lam, rhs, seed if seed != 0 else old[name], L_old)
            except NonConvergenceError:
                try:
                    z, _ = solve_log_equation(p, lam, rhs, old[name], L_old)
                except NonConvergenceError as exc:
                    raise StepError(f"inverse branch failed for point {name!r}: {exc}", index=name,
                                    step=config.n + 1) from exc
            logs[name] = continue_log(z, L_old)
        new[name] = z
    if p >= 1:
        new[ZERO_NAME] = 0j
    new = {name: complex(new[name]) for name in portrait.points}

    for name in portrait.points:
        if name == portrait.zero:
            continue
        target = old[portrait.successor(name)]
        err = abs(evaluate(params, new[name]) - target)
        if not err <= SEMICONJUGACY_TOL * max(1.0, abs(target)):
            raise StepError(f"semiconjugacy residual {err:.3e} at point {name!r}", index=name,
                            step=config.n + 1)
    return MarkedConfiguration(new, logs, config.n + 1)


def semiconjugacy_residual(portrait, old: MarkedConfiguration, new: MarkedConfiguration, params) -> float:
    """``max_k |E(new_k) - old_{succ(k)}|`` over the non-zero marked points."""
    return max(
        abs(evaluate(params, new.positions[k]) - old.positions[portrait.successor(k)])
        for k in portrait.points
        if k != portrait.zero
    )


def _pair_names(portrait: OrbitPortrait) -> tuple[str, str]:
    k1, k2 = portrait.marked_pair()
    return portrait.name_at(k1), portrait.name_at(k2)


def iterate(
    portrait: OrbitPortrait,
    address: BranchAddress,
    init: MarkedConfiguration,
    opts: IterationOptions | None = None,
) -> IterationResult:
    """Run the pullback until the marked points stop moving or a stop rule fires.

    Stops with status ``converged`` (max spherical displacement <= tol),
    ``diverged-lambda`` (|lam| > lambda_max), ``collision`` (min spherical
    gap < gap_min) or ``iteration-cap``.  Step failures are re-raised as
    ``StepError`` carrying the step number.
    """
    opts = opts or IterationOptions()
    trace = IterationTrace(portrait)
    names = _pair_names(portrait)
    config, params = init, None
    while True:
        n = config.n + 1
        if n > opts.max_iter:
            trace.status = ITERATION_CAP
            trace.message = f"no convergence in {opts.max_iter} steps"
            break
        try:
            params = solve_lambda(portrait, address, config, params)
        except InvalidParameterError as exc:
            raise StepError(f"step {n}: {exc}", step=n) from exc
        except SpiderError as exc:
            raise StepError(f"step {n}: {exc}", step=n) from exc
        if abs(params.lam) > opts.lambda_max:
            trace.status = DIVERGED_LAMBDA
            trace.message = f"|lambda| = {abs(params.lam):.3e} exceeds {opts.lambda_max:g}"
            break
        try:
            new = pullback_step(portrait, address, config, params)
        except StepError as exc:
            exc.step = n
            raise
        except (SpiderError, ZeroDivisionError) as exc:
            raise StepError(f"step {n}: {exc}", step=n) from exc
        d = max(spherical_distance(new.positions[k], config.positions[k]) for k in portrait.points)
        b = min_spherical_gap(new.positions)
        pair = (new.positions[names[0]], new.positions[names[1]])
        eta, eta_res = compute_winding(params, list(pair))
        trace.records.append(
            StepRecord(
                n=n,
                lam=params.lam,
                alpha=params.alpha,
                d=d,
                b=b,
                eta=eta,
                eta_residual=eta_res,
                residual=semiconjugacy_residual(portrait, config, new, params),
                pair=pair,
                positions=dict(new.positions),
            )
        )
        config = new
        if b < opts.gap_min:
            trace.status = COLLISION
            trace.message = f"marked points collided (min spherical gap {b:.3e})"
            break
        if d <= opts.tol:
            trace.status = CONVERGED
            break
    return IterationResult(trace, params, config)


def run(
    portrait: OrbitPortrait,
    address: BranchAddress,
    seed_lambda: complex,
    opts: IterationOptions | None = None,
) -> IterationResult:
    """``initial_configuration`` followed by ``iterate``."""
    return iterate(portrait, address, initial_configuration(portrait, seed_lambda), opts)


def address_from_params(portrait: OrbitPortrait, params: ExpParams) -> BranchAddress:
    """Sheet indices of a realized map, in principal-log labels.

    Reads the marked points off the singular orbit of ``params`` and records
    which sheet each one lies on.  Running the pullback with this address
    from a nearby seed returns to ``params`` as long as no lift crosses a
    branch cut on the way.
    """
    p, lam = params.p, params.lam
    start = 0j if p == 0 else params.crit
    orb = forward_orbit(params, start, len(portrait.orbit) - 1).points
    pos = dict(zip(portrait.orbit, orb))
    pos[portrait.one] = 1 + 0j
    log_alpha = 0j if p == 0 else p * (1 - cmath.log(params.crit))
    addr = {}
    for name in (portrait.one,) + portrait.pulled_back():
        w = pos[portrait.successor(name)]
        lhs = lam * pos[name] + log_alpha + (p * cmath.log(pos[name]) if p else 0)
        addr[name] = int(round(((lhs - cmath.log(w)) / TWO_PI_I).real))
    return BranchAddress(addr)
