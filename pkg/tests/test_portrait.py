import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expspider.errors import PortraitSyntaxError, PortraitValidationError
from expspider.portrait import (
    BranchAddress,
    OrbitPortrait,
    parse_config,
    parse_portrait,
    serialize_config,
    serialize_portrait,
    validate_portrait,
)


def doc(**kw):
    base = {"p": 0, "orbit": ["0", "1", "A"], "cycle_entry": "A", "address": {"A": 0}}
    base.update(kw)
    return json.dumps(base, indent=2)


def test_parse_pi_shape():
    portrait, address = parse_portrait(doc())
    assert portrait.preperiod == 1 and portrait.period == 1
    assert address["A"] == 0


def test_zero_in_cycle_rejected():
    with pytest.raises(PortraitValidationError) as info:
        parse_portrait(doc(cycle_entry="0"))
    assert "zero_not_periodic" in info.value.names


def test_two_cycle_p1():
    portrait, address = parse_portrait(doc(p=1, orbit=["c", "1"], cycle_entry="c", address={}))
    assert portrait.preperiod == 0 and portrait.period == 2
    assert portrait.crit == "c" and portrait.crit_periodic
    assert address.lambda_sheet(portrait) == 0


def test_marked_pairs():
    assert validate_portrait(OrbitPortrait(0, ("0", "1", "A"), "A")).marked_pair == (1, 2)
    rep = validate_portrait(OrbitPortrait(0, ("0", "1", "A", "B"), "A"))
    assert rep.marked_pair == (1, 3)
    assert rep.marked_pair_names == ("1", "B")


def test_critical_orbit_hypothesis_violation_named():
    # c not periodic but f(c) = 1 is
    with pytest.raises(PortraitValidationError) as info:
        validate_portrait(OrbitPortrait(1, ("c", "1", "A"), "1"))
    assert "critical_orbit_hypothesis" in info.value.names


def test_all_violations_reported_together():
    bad = OrbitPortrait(0, ("0", "1", "A"), "A")
    with pytest.raises(PortraitValidationError) as info:
        validate_portrait(bad, BranchAddress({"B": 1}))
    assert info.value.names.count("address_complete") == 2


def test_zero_name_reserved_for_p_ge_1():
    with pytest.raises(PortraitValidationError) as info:
        validate_portrait(OrbitPortrait(1, ("0", "1"), "0"))
    assert "zero_reserved" in info.value.names


def test_degenerate_accepted():
    rep = validate_portrait(OrbitPortrait(0, ("0", "1"), "1"), BranchAddress({"1": 1}))
    assert rep.degenerate


@pytest.mark.parametrize(
    "text, field",
    [
        ('{"p": 0, "orbit": ["0", "1"]}', "cycle_entry"),
        (doc(p="zero"), "p"),
        (doc(address={"A": 1.5}), "address"),
        (doc(seed_lambda=[1.0]), "seed_lambda"),
        (doc(tolerances={"tol": -1}), "tolerances"),
        (doc(tolerances={"speed": 1}), "tolerances"),
        (doc(colour="red"), "colour"),
    ],
)
def test_syntax_errors_name_field_and_line(text, field):
    with pytest.raises(PortraitSyntaxError) as info:
        parse_config(text)
    assert info.value.field == field
    assert info.value.line is not None


def test_json_syntax_error_has_line():
    with pytest.raises(PortraitSyntaxError) as info:
        parse_config('{\n  "p": 0,\n  "orbit": [\n}')
    assert info.value.line is not None


names = st.lists(st.text("ABCDEFGHxyz", min_size=1, max_size=3), min_size=0, max_size=5, unique=True)


@st.composite
def valid_configs(draw):
    p = draw(st.integers(0, 3))
    extra = [n for n in draw(names) if n not in ("0", "1", "c")]
    if p == 0:
        orbit = ["0", "1"] + extra
        entry = draw(st.sampled_from(orbit[1:]))
    else:
        orbit = ["c", "1"] + extra
        choices = ["c"] + orbit[2:]
        entry = draw(st.sampled_from(choices))
    portrait = OrbitPortrait(p, tuple(orbit), entry)
    addr = {n: draw(st.integers(-30, 30)) for n in portrait.pulled_back()}
    if draw(st.booleans()):
        addr["1"] = draw(st.integers(-5, 5))
    eta = draw(st.one_of(st.none(), st.integers(-5, 5)))
    seed = draw(st.one_of(st.none(), st.builds(complex, st.floats(-9, 9), st.floats(-9, 9))))
    tols = draw(st.dictionaries(st.sampled_from(["tol", "lambda_max", "gap_min"]),
                                st.floats(1e-15, 1e6), max_size=3))
    return portrait, BranchAddress(addr, eta), seed, tols


@settings(max_examples=200, deadline=None)
@given(valid_configs())
def test_round_trip(cfg):
    portrait, address, seed, tols = cfg
    parsed = parse_config(serialize_config(portrait, address, seed, tols))
    assert parsed.portrait == portrait
    assert parsed.address == address
    assert parsed.seed_lambda == seed
    assert parsed.tolerances == tols
    assert parse_portrait(serialize_portrait(portrait, address)) == (portrait, address)


@settings(max_examples=200, deadline=None)
@given(valid_configs())
def test_marked_pair_shares_successor(cfg):
    portrait = cfg[0]
    k1, k2 = validate_portrait(portrait).marked_pair
    a, b = portrait.name_at(k1), portrait.name_at(k2)
    assert portrait.successor(a) == portrait.successor(b)
    assert k1 != k2
