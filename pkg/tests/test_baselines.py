import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from road_inspect.baselines import (
    ObrienInputs,
    PciEstimate,
    age_curve_pci,
    area,
    dewan_smith_pci,
    diff,
    michles_pci,
    obrien_pci,
    park_pci,
)
from road_inspect.errors import (
    InvalidInput,
    InvalidTreatment,
    NegativeDeflection,
    NegativeIri,
    NonPositiveIri,
    ZeroCenterDeflection,
)


def test_diff_examples():
    assert diff(7, 7) == 0.0
    assert diff(20, 10) == 0.5
    with pytest.raises(ZeroCenterDeflection):
        diff(0, 0)


def test_area_examples():
    assert area(0, 0) == 0.0
    assert area(10, 5) == 180.0
    assert area(1, 0) == 12.0
    with pytest.raises(NegativeDeflection):
        area(-1, 2)


@given(st.floats(1e-3, 1e3), st.floats(0, 1e3))
def test_diff_bounded_above_by_one(d0, d12):
    assert diff(d0, d12) <= 1.0
    assert (diff(d0, d12) == 0.0) == (d12 == d0)


@given(st.floats(0, 1e3), st.floats(0, 1e3))
def test_area_symmetric(a, b):
    assert area(a, b) == area(b, a)


def _obrien_by_hand(age, agesol, agetot, lpmtot, d0, d12):
    # term-by-term in exact rationals; AGE powers 1/4 and 1/2 are exact for AGE = 1
    assert age == 1
    dif = Fraction(d0 - d12, d0)
    ar = 12 * (d0 + d12)
    t1 = Fraction("0.000572") * age ** 2 * lpmtot * dif * ar
    t2 = Fraction("0.3062") * 1 * agesol ** 2 * dif ** 2
    t3 = Fraction("0.00156") * 1 * agetot * lpmtot * dif * ar
    return Fraction("96.6") - (t1 + t2 + t3)


def test_obrien_hand_fixture():
    # DIFF = 0.5, AREA = 360: 0.10296 + 0.07655 + 0.2808 = 0.46031
    want = _obrien_by_hand(1, 1, 1, 1, 20, 10)
    assert want == Fraction("96.13969")
    est = obrien_pci(ObrienInputs(1, 1, 1, 1, 20, 10))
    assert est.raw == pytest.approx(float(want), abs=1e-12)
    assert est.clamped == est.raw


def test_obrien_new_pavement():
    assert obrien_pci(ObrienInputs(0, 3, 10, 4.2, 25, 12)).raw == 96.6


def test_obrien_flat_basin():
    assert obrien_pci(ObrienInputs(7, 3, 12, 5.0, 9, 9)).raw == 96.6


obrien_st = st.builds(
    lambda age, sol, extra, lpm, d0, frac: ObrienInputs(age, sol, sol + extra, lpm, d0, d0 * frac),
    st.floats(0, 40), st.floats(0, 40), st.floats(0, 40), st.floats(0, 10), st.floats(0.1, 100), st.floats(0, 1),
)


@given(obrien_st)
def test_obrien_never_exceeds_intercept(inputs):
    est = obrien_pci(inputs)
    assert est.raw <= 96.6
    assert 0.0 <= est.clamped <= 100.0


def test_obrien_input_validation():
    with pytest.raises(InvalidInput):
        ObrienInputs(-1, 0, 0, 1, 1, 1)
    with pytest.raises(InvalidInput):
        ObrienInputs(1, 5, 3, 1, 1, 1)


def test_park_examples():
    assert park_pci(1.0).raw == pytest.approx(100.0, abs=1e-12)
    assert park_pci(10.0).raw == pytest.approx(10 ** 1.564, rel=1e-12)
    assert park_pci(10.0).raw == pytest.approx(36.64, abs=0.005)
    with pytest.raises(NonPositiveIri):
        park_pci(0.0)


@given(st.floats(1e-3, 50), st.floats(1e-3, 50))
def test_park_strictly_decreasing(a, b):
    if a < b:
        assert park_pci(a).raw > park_pci(b).raw


def test_dewan_examples():
    e = dewan_smith_pci(0.0)
    assert (e.raw, e.clamped) == (153.0, 100.0)
    assert dewan_smith_pci(0.9063).raw == pytest.approx(100.0, abs=1e-3)
    assert dewan_smith_pci(2.6163).raw == pytest.approx(0.0, abs=1e-3)
    with pytest.raises(NegativeIri):
        dewan_smith_pci(-0.1)


@given(st.floats(0, 10), st.floats(0, 10))
def test_dewan_affine(a, b):
    slope = -1 / 0.0171
    assert dewan_smith_pci(b).raw - dewan_smith_pci(a).raw == pytest.approx(slope * (b - a), abs=1e-9)


def test_age_curve_examples():
    assert age_curve_pci(0, 100, -3, 1.5) == 100
    assert age_curve_pci(10, 100, -2, 1) == 80
    assert age_curve_pci(5, 100, -1, 2) == 75
    with pytest.raises(InvalidInput):
        age_curve_pci(-1, 100, -1, 1)


def test_michles_examples():
    assert michles_pci(0, 0).raw == pytest.approx(71.09)
    assert michles_pci(1, 0).raw == pytest.approx(98.51)
    assert michles_pci(1, 10).raw == pytest.approx(57.81)
    with pytest.raises(InvalidTreatment):
        michles_pci(2, 1)
    with pytest.raises(InvalidTreatment):
        michles_pci(True, 1)


def test_estimate_clamps_both_sides():
    assert PciEstimate.of(-5.0).clamped == 0.0
    assert PciEstimate.of(120.0).clamped == 100.0
    assert PciEstimate.of(42.0).to_dict() == {"raw": 42.0, "clamped": 42.0}
    assert math.isclose(PciEstimate.of(42.0).raw, 42.0)
