"""
=============================================
Branch addresses select the realization
=============================================

The portrait ``0 -> 1 -> A -> B -> A`` has many realizations.  The address
chooses one by fixing the sheet of lambda (the entry for ``1``) and of each
pulled-back point.  Some addresses are not realizable and the iteration
stops with a collision or a divergence.
"""

# %%

from expspider import BranchAddress, OrbitPortrait, address_from_params, run, verify_orbit

portrait = OrbitPortrait(0, ("0", "1", "A", "B"), "A")
jobs = [
    ({"1": 1, "A": -2, "B": 0}, 1.87 + 3.5j),
    ({"1": 1, "A": 0, "B": 2}, 4.39j),
    ({"1": -1, "A": 1, "B": 1}, 0.46 - 3.43j),
    ({"1": 0, "A": 0, "B": 0}, 2j),
]
for addr, seed in jobs:
    res = run(portrait, BranchAddress(addr), seed)
    line = f"{addr!s:28s} seed {seed!s:14s} -> {res.status:10s} steps {len(res.trace):4d}"
    if res.converged:
        line += f"  lambda {res.params.lam:.10f}  verify {verify_orbit(res.params, portrait).passed}"
    print(line)

# %%
# From a solved map, the principal-branch labels of its orbit give back an
# address that reproduces it.

res = run(portrait, BranchAddress({"1": 1, "A": 0, "B": 2}), 4.39j)
addr = address_from_params(portrait, res.params)
again = run(portrait, addr, res.params.lam * 1.01)
print(addr.address, abs(again.params.lam - res.params.lam))
