"""
=============================================
A superattracting two-cycle for p = 1
=============================================

For ``E(z) = alpha z exp(lambda z)`` the critical point ``c = -1/lambda``
is normalized to map to 1.  Asking for ``c -> 1 -> c`` makes c
superattracting.  The pullback answer is compared with a direct Newton
solve of the closure equation.
"""

# %%

from expspider import (
    BranchAddress,
    OrbitPortrait,
    SpiderError,
    evaluate,
    newton_direct_solve,
    run,
    verify_orbit,
)

portrait = OrbitPortrait(1, ("c", "1"), "c")
result = run(portrait, BranchAddress({"1": 0}), -3.0)
lam = result.params.lam
print(result.status, "after", len(result.trace), "steps, lambda =", lam)

# %%
# ``E(1)`` should land back on the critical point.

print("|E(1) + 1/lambda| =", abs(evaluate(result.params, 1) + 1 / lam))
print(verify_orbit(result.params, portrait))

# %%
# Newton on ``E(c) - c`` knows nothing about addresses; seeded close by it
# finds the same root.

newton = newton_direct_solve(portrait, 1, lam * (1 + 1e-3))
print("Newton:", newton, " difference", abs(newton - lam))

# %%
# A seed at lambda = -1 puts c on 1 itself, and Newton's root there is
# rejected by the orbit check.

try:
    newton_direct_solve(portrait, 1, -1)
except SpiderError as exc:
    print(type(exc).__name__ + ":", exc)
