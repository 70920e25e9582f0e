"""Acceptance criteria, one test and one printed PASS/FAIL line each."""
import math
import time
from pathlib import Path

import numpy as np
import pytest

from expspider.diagnostics import check_eta_invariance, check_lambda_bounds, spherical_distance
from expspider.errors import SpiderError
from expspider.exp_family import evaluate
from expspider.oracle import newton_direct_solve, verify_orbit
from expspider.portrait import BranchAddress, OrbitPortrait, parse_config
from expspider.pullback import CONVERGED, IterationOptions, run
from expspider.qd_transfer import QuadratureConfig, contraction_estimate

PI_I = math.pi * 1j
CONFIGS = Path(__file__).resolve().parent.parent / "configs"

# (label, p, orbit, entry, address, seed, options)
CASES = [
    ("pi", 0, ("0", "1", "A"), "A", {"1": 0, "A": -1}, 0.8 * PI_I, IterationOptions(tol=1e-14)),
    ("degenerate", 0, ("0", "1"), "1", {"1": 1}, 5j, IterationOptions()),
    ("0-1-A-B-A #1", 0, ("0", "1", "A", "B"), "A", {"1": 1, "A": -2, "B": 0}, 1.87 + 3.5j, IterationOptions()),
    ("0-1-A-B-A #2", 0, ("0", "1", "A", "B"), "A", {"1": 1, "A": 0, "B": 2}, 4.39j, IterationOptions()),
    ("0-1-A-B-A #3", 0, ("0", "1", "A", "B"), "A", {"1": -1, "A": 1, "B": 1}, 0.46 - 3.43j, IterationOptions()),
    ("c-1-A-A", 1, ("c", "1", "A"), "A", {"1": 0, "A": -1}, -3.7 + 0j, IterationOptions()),
    ("c-1-A-B-c", 1, ("c", "1", "A", "B"), "c", {"1": 0, "A": 0, "B": 0}, -5.4 + 0j, IterationOptions()),
    ("c-1-c", 1, ("c", "1"), "c", {"1": 0}, -3.0 + 0j, IterationOptions()),
]


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}: {detail}")
        return ok
    return emit


@pytest.fixture(scope="module")
def runs():
    out = {}
    for label, p, orbit, entry, addr, seed, opts in CASES:
        portrait = OrbitPortrait(p, orbit, entry)
        out[label] = (portrait, run(portrait, BranchAddress(addr), seed, opts))
    return out


def test_c01_degenerate(runs, report):
    portrait, res = runs["degenerate"]
    err = abs(res.params.lam - 2 * PI_I)
    ok = res.status == CONVERGED and len(res.trace) == 1 and err <= 1e-14
    assert report(1, ok, f"steps={len(res.trace)} |lambda-2pi i|={err:.1e} (tol 1e-14)")


def test_c02_misiurewicz(runs, report):
    portrait, res = runs["pi"]
    err = abs(res.params.lam - PI_I)
    v = verify_orbit(res.params, portrait, 1e-12)
    ok = res.status == CONVERGED and err <= 1e-9 and len(res.trace) < 500 and v.passed
    assert report(2, ok, f"steps={len(res.trace)} |lambda-pi i|={err:.1e} (tol 1e-9), "
                         f"verify@1e-12={v.passed} closure={v.closure_distance:.1e}")


def test_c03_oracle_equivalence(runs, report):
    diffs = {}
    for label, (portrait, res) in runs.items():
        if res.status != CONVERGED:
            continue
        assert verify_orbit(res.params, portrait).passed, label
        lam = res.params.lam
        try:
            newton = newton_direct_solve(portrait, portrait.p, lam * (1 + 1e-3))
        except SpiderError:
            continue
        diffs[label] = abs(newton - lam)
    worst = max(diffs.values())
    ok = len(diffs) >= 5 and worst <= 1e-8
    assert report(3, ok, f"{len(diffs)} configs compared, max |lambda_pullback - lambda_newton|={worst:.1e} "
                         "(tol 1e-8)")


def test_c04_winding_invariance(runs, report):
    converged = [(lbl, r) for lbl, (_, r) in runs.items() if r.status == CONVERGED]
    constant = all(check_eta_invariance(r.trace) for _, r in converged)
    etas = {r.eta for r in runs["pi"][1].trace.records}
    ok = constant and etas == {-1}
    assert report(4, ok, f"eta constant on {len(converged)} converged runs: {constant}; pi run eta={sorted(etas)}")


def test_c05_compactness_bounds(runs, report):
    holds, kinds = True, []
    for _, (_, res) in runs.items():
        if res.status != CONVERGED:
            continue
        rep = check_lambda_bounds(res.trace)
        kinds.append(rep.kind)
        holds &= (not rep.applicable) or rep.holds
    tight = check_lambda_bounds(runs["pi"][1].trace)
    eq = abs(tight.tightest_ratio - 1) <= 1e-9
    ok = holds and eq
    assert report(5, ok, f"bounds hold on all runs ({', '.join(sorted(set(kinds)))}): {holds}; "
                         f"pi run |lambda|/bound={tight.tightest_ratio:.12f} (equality tol 1e-9)")


def test_c06_superattracting_p1(runs, report):
    portrait, res = runs["c-1-c"]
    lam = res.params.lam
    e1 = evaluate(res.params, 1)
    closure = abs(e1 + 1 / lam)
    v = verify_orbit(res.params, portrait).passed
    newton = newton_direct_solve(portrait, 1, lam * (1 + 1e-3))
    ok = res.status == CONVERGED and closure <= 1e-9 and v and abs(newton - lam) <= 1e-8
    assert report(6, ok, f"lambda={lam:.12g} |E(1)+1/lambda|={closure:.1e} (tol 1e-9), verify={v}, "
                         f"|lambda-newton|={abs(newton - lam):.1e} (tol 1e-8)")


def test_c07_transfer_contraction(runs, report):
    _, res = runs["pi"]
    t0 = time.time()
    marked = [0j, 1 + 0j, -1 + 0j]
    base = contraction_estimate(res.params, marked, 128, QuadratureConfig(64))
    fine = contraction_estimate(res.params, marked, 256, QuadratureConfig(128))
    elapsed = time.time() - t0
    delta, err = base.delta, base.error_bound
    change = abs(fine.max_ratio - base.max_ratio) / base.max_ratio
    ok = (len(base.entries) == 21 and all(e.ratio < 1 - delta + 1e-15 for e in base.entries)
          and delta > 0 and err < delta and change < 0.05 and elapsed <= 60)
    assert report(7, ok, f"max ratio={base.max_ratio:.9f} delta={delta:.4f} error bound={err:.1e}; "
                         f"doubled M,N ratio={fine.max_ratio:.9f} change={change:.1e} (tol 5%); {elapsed:.1f}s")


def test_c08_fixed_point_uniqueness(runs, report):
    portrait, _ = runs["pi"]
    addr = BranchAddress({"1": 0, "A": -1})
    seeds = [0.8 * PI_I, 0.5 * PI_I + 0.3, 0.95 * PI_I - 0.2]
    lams = []
    for s in seeds:
        res = run(portrait, addr, s, IterationOptions(tol=1e-14))
        assert res.status == CONVERGED
        lams.append(res.params.lam)
    spread = max(abs(a - b) for a in lams for b in lams)
    ok = spread <= 1e-8
    assert report(8, ok, f"3 seeds, max pairwise |lambda_i-lambda_j|={spread:.1e} (tol 1e-8)")


def test_c09_no_false_convergence(report):
    cfg = parse_config((CONFIGS / "inconsistent.spider.json").read_text())
    res = run(cfg.portrait, cfg.address, cfg.seed_lambda, IterationOptions.from_tolerances(cfg.tolerances))
    false_pass = res.status == CONVERGED and verify_orbit(res.params, cfg.portrait).passed
    ok = res.status != CONVERGED and not false_pass
    assert report(9, ok, f"address {dict(cfg.address.address)} -> status {res.status!r} after "
                         f"{len(res.trace)} steps")


def test_c10_spherical_metric(report):
    rng = np.random.default_rng(12345)

    def sample():
        kind = rng.integers(5)
        if kind == 0:
            return None
        scale = 10.0 ** rng.uniform(-8, 8) if kind == 1 else 1.0
        return complex(*(rng.normal(size=2) * scale))

    worst_sym, worst_tri = 0.0, -math.inf
    for _ in range(10_000):
        a, b, c = sample(), sample(), sample()
        dab, dba = spherical_distance(a, b), spherical_distance(b, a)
        worst_sym = max(worst_sym, abs(dab - dba))
        worst_tri = max(worst_tri, dab - spherical_distance(a, c) - spherical_distance(c, b))
    closed = (spherical_distance(0, None) == 1.0 and spherical_distance(0, 1) == math.sqrt(0.5)
              and spherical_distance(1, -1) == 1.0)
    ok = worst_sym == 0 and worst_tri <= 1e-12 and closed
    assert report(10, ok, f"10^4 triples: max asymmetry={worst_sym:.1e}, max triangle excess={worst_tri:.1e} "
                          f"(slack 1e-12); closed forms exact: {closed}")
