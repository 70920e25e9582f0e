"""Combinatorial input: the post-singular orbit portrait and its branch address.

A run-config document is JSON (extension ``.spider.json``); the field
reference lives in ``docs/run_config_schema.md``.  Example::

    {
      "schema_version": 1,
      "p": 0,
      "orbit": ["0", "1", "A"],
      "cycle_entry": "A",
      "address": {"1": 0, "A": -1},
      "eta": -1,
      "seed_lambda": [0.0, 2.5132741228718345],
      "tolerances": {"tol": 1e-11}
    }

``orbit`` lists the free orbit in successor order, starting at the
asymptotic value 0 (p = 0) or at the free critical point (p >= 1); its second
entry is the point normalized to 1.  The last entry maps to ``cycle_entry``.
For p >= 1 the fixed point 0 is implicit and named ``"0"``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

from .errors import PortraitSyntaxError, PortraitValidationError

SCHEMA_VERSION = 1
ZERO_NAME = "0"
TOLERANCE_KEYS = ("tol", "lambda_max", "gap_min", "max_iter")
_CONFIG_KEYS = {
    "schema_version",
    "p",
    "orbit",
    "cycle_entry",
    "address",
    "eta",
    "seed_lambda",
    "tolerances",
}


@dataclass(frozen=True)
class OrbitPortrait:
    p: int
    orbit: tuple
    cycle_entry: str

    @property
    def start(self) -> str:
        return self.orbit[0]

    @property
    def one(self) -> str:
        return self.orbit[1]

    @property
    def zero(self) -> str:
        """Name of the point pinned at 0."""
        return self.orbit[0] if self.p == 0 else ZERO_NAME

    @property
    def crit(self) -> str | None:
        return self.orbit[0] if self.p >= 1 else None

    @property
    def entry_index(self) -> int:
        return self.orbit.index(self.cycle_entry)

    @property
    def period(self) -> int:
        return len(self.orbit) - self.entry_index

    @property
    def preperiod(self) -> int:
        # a purely periodic critical orbit enters the cycle "at" c_1
        return max(self.entry_index - 1, 0)

    @property
    def points(self) -> tuple:
        """All finite marked points; 0 first for p >= 1."""
        return self.orbit if self.p == 0 else (ZERO_NAME,) + self.orbit

    @property
    def is_degenerate(self) -> bool:
        """The three-point case ``0 -> 1 -> 1``."""
        return self.p == 0 and len(self.orbit) == 2 and self.cycle_entry == self.orbit[1]

    @property
    def crit_periodic(self) -> bool:
        return self.p >= 1 and self.entry_index == 0

    def successor(self, name: str) -> str:
        if self.p >= 1 and name == ZERO_NAME:
            return ZERO_NAME
        i = self.orbit.index(name)
        return self.orbit[i + 1] if i + 1 < len(self.orbit) else self.cycle_entry

    def name_at(self, k: int) -> str:
        """Name of the k-th orbit point ``c_k`` (k may exceed the orbit length)."""
        n = len(self.orbit)
        if k < n:
            return self.orbit[k]
        j = self.entry_index
        return self.orbit[j + (k - j) % (n - j)]

    def pulled_back(self) -> tuple:
        """Points whose new positions come from an addressed inverse branch."""
        return self.orbit[2:]

    def marked_pair(self) -> tuple[int, int]:
        k1 = self.preperiod
        return k1, k1 + self.period


@dataclass(frozen=True)
class BranchAddress:
    """Sheet index per pulled-back point.

    The entry keyed by the name of the point pinned at 1 is the sheet used
    for ``lambda`` itself (defaults to 0).
    """

    address: Mapping[str, int] = field(default_factory=dict)
    eta_claim: int | None = None

    def lambda_sheet(self, portrait: OrbitPortrait) -> int:
        return int(self.address.get(portrait.one, 0))

    def __getitem__(self, name):
        return int(self.address[name])

    def __eq__(self, other):
        if not isinstance(other, BranchAddress):
            return NotImplemented
        return dict(self.address) == dict(other.address) and self.eta_claim == other.eta_claim

    def __hash__(self):
        return hash((tuple(sorted(self.address.items())), self.eta_claim))


@dataclass(frozen=True)
class RunConfig:
    portrait: OrbitPortrait
    address: BranchAddress
    seed_lambda: complex | None = None
    tolerances: Mapping[str, float] = field(default_factory=dict)


@dataclass
class ValidationReport:
    ok: bool
    preperiod: int
    period: int
    marked_pair: tuple
    marked_pair_names: tuple
    degenerate: bool
    violations: list


def validate_portrait(portrait: OrbitPortrait, address: BranchAddress | None = None) -> ValidationReport:
    """Check every portrait/address invariant; raise listing all violations."""
    bad = []
    orbit = portrait.orbit
    if portrait.p < 0:
        bad.append(("p_nonnegative", f"p must be >= 0, got {portrait.p}"))
    if len(orbit) < 2:
        bad.append(("orbit_length", "orbit needs at least the start point and the point 1"))
    if len(set(orbit)) != len(orbit):
        bad.append(("distinct_names", "orbit point names must be distinct"))
    if any(not isinstance(n, str) or not n for n in orbit):
        bad.append(("distinct_names", "orbit point names must be non-empty strings"))
    if portrait.p >= 1 and ZERO_NAME in orbit:
        bad.append(("zero_reserved", f"{ZERO_NAME!r} is the implicit fixed point 0 when p >= 1"))
    if portrait.cycle_entry not in orbit:
        bad.append(("successor_total", f"cycle entry {portrait.cycle_entry!r} is not an orbit point"))
    if bad:
        raise PortraitValidationError(bad)

    j = portrait.entry_index
    if portrait.p == 0 and j == 0:
        bad.append(("zero_not_periodic", "0 is omitted and cannot lie on the cycle"))
    if portrait.p >= 1 and j == 1:
        bad.append(
            (
                "critical_orbit_hypothesis",
                "c is not periodic but f(c)=1 is; need c periodic or both c and f(c) non-periodic",
            )
        )
    if address is not None:
        need = set(portrait.pulled_back())
        allowed = need | {portrait.one}
        missing = sorted(need - set(address.address))
        extra = sorted(set(address.address) - allowed)
        if missing:
            bad.append(("address_complete", f"no sheet index for {missing}"))
        if extra:
            bad.append(("address_complete", f"sheet index given for pinned/unknown points {extra}"))
        for name, m in address.address.items():
            if isinstance(m, bool) or not isinstance(m, int):
                bad.append(("address_integer", f"sheet index for {name!r} must be an integer"))
    if bad:
        raise PortraitValidationError(bad)

    k1, k2 = portrait.marked_pair()
    names = (portrait.name_at(k1), portrait.name_at(k2))
    assert portrait.successor(names[0]) == portrait.successor(names[1])
    return ValidationReport(
        ok=True,
        preperiod=k1,
        period=portrait.period,
        marked_pair=(k1, k2),
        marked_pair_names=names,
        degenerate=portrait.is_degenerate,
        violations=[],
    )


def _field(doc, key, kind, line_of, required=True):
    if key not in doc:
        if required:
            raise PortraitSyntaxError("missing required field", line=line_of(key) or 1, field=key)
        return None
    val = doc[key]
    if kind is int and (isinstance(val, bool) or not isinstance(val, int)):
        raise PortraitSyntaxError(f"expected integer, got {val!r}", line=line_of(key), field=key)
    if kind is not int and not isinstance(val, kind):
        raise PortraitSyntaxError(
            f"expected {kind.__name__}, got {type(val).__name__}", line=line_of(key), field=key
        )
    return val


def parse_config(text: str) -> RunConfig:
    """Parse and validate a run-config document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PortraitSyntaxError(exc.msg, line=exc.lineno) from None
    lines = text.splitlines()

    def line_of(key):
        needle = f'"{key}"'
        for i, ln in enumerate(lines, 1):
            if needle in ln:
                return i
        return None

    if not isinstance(doc, dict):
        raise PortraitSyntaxError("top level must be an object", line=1)
    unknown = sorted(set(doc) - _CONFIG_KEYS)
    if unknown:
        raise PortraitSyntaxError(f"unknown field(s) {unknown}", line=line_of(unknown[0]), field=unknown[0])
    version = _field(doc, "schema_version", int, line_of, required=False)
    if version is not None and version != SCHEMA_VERSION:
        raise PortraitSyntaxError(f"unsupported schema_version {version}", line=line_of("schema_version"),
                                  field="schema_version")
    p = _field(doc, "p", int, line_of)
    orbit = _field(doc, "orbit", list, line_of)
    if not all(isinstance(n, str) for n in orbit):
        raise PortraitSyntaxError("orbit entries must be strings", line=line_of("orbit"), field="orbit")
    entry = _field(doc, "cycle_entry", str, line_of)
    addr = _field(doc, "address", dict, line_of, required=False) or {}
    for name, m in addr.items():
        if isinstance(m, bool) or not isinstance(m, int):
            raise PortraitSyntaxError(f"sheet index for {name!r} must be an integer",
                                      line=line_of("address"), field="address")
    eta = _field(doc, "eta", int, line_of, required=False)
    seed = None
    if "seed_lambda" in doc:
        raw = doc["seed_lambda"]
        if (not isinstance(raw, list) or len(raw) != 2
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in raw)):
            raise PortraitSyntaxError("expected [re, im]", line=line_of("seed_lambda"), field="seed_lambda")
        seed = complex(raw[0], raw[1])
    tols = _field(doc, "tolerances", dict, line_of, required=False) or {}
    for key, val in tols.items():
        if key not in TOLERANCE_KEYS:
            raise PortraitSyntaxError(f"unknown tolerance {key!r}", line=line_of(key), field="tolerances")
        if isinstance(val, bool) or not isinstance(val, (int, float)) or val <= 0:
            raise PortraitSyntaxError(f"tolerance {key!r} must be a positive number",
                                      line=line_of(key), field="tolerances")

    portrait = OrbitPortrait(p=p, orbit=tuple(orbit), cycle_entry=entry)
    address = BranchAddress(address=dict(addr), eta_claim=eta)
    validate_portrait(portrait, address)
    return RunConfig(portrait, address, seed, dict(tols))


def parse_portrait(text: str) -> tuple[OrbitPortrait, BranchAddress]:
    cfg = parse_config(text)
    return cfg.portrait, cfg.address


def serialize_config(
    portrait: OrbitPortrait,
    address: BranchAddress,
    seed_lambda: complex | None = None,
    tolerances: Mapping[str, float] | None = None,
) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "p": portrait.p,
        "orbit": list(portrait.orbit),
        "cycle_entry": portrait.cycle_entry,
        "address": {k: int(v) for k, v in address.address.items()},
    }
    if address.eta_claim is not None:
        doc["eta"] = int(address.eta_claim)
    if seed_lambda is not None:
        doc["seed_lambda"] = [complex(seed_lambda).real, complex(seed_lambda).imag]
    if tolerances:
        doc["tolerances"] = dict(tolerances)
    return json.dumps(doc, indent=2) + "\n"


def serialize_portrait(portrait: OrbitPortrait, address: BranchAddress) -> str:
    return serialize_config(portrait, address)
