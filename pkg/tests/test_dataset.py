import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from road_inspect.dataset import (
    CSV_COLUMNS,
    Dataset,
    Scaler,
    Segment,
    SynthParams,
    fit_scaler,
    load_csv,
    split,
    synth_generate,
    write_csv,
    write_provenance,
)
from road_inspect.errors import (
    DegenerateFeature,
    InvalidParams,
    InvariantViolation,
    ParseError,
    SchemaMismatch,
    TooFewSegments,
)

HEADER = ",".join(CSV_COLUMNS)


def _write(tmp_path, lines, name="data.csv"):
    p = tmp_path / name
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return p


def test_load_three_rows_in_file_order(tmp_path):
    p = _write(tmp_path, [HEADER,
                          "B,300,250,200,150,100,80,60,55",
                          "A,400,300,220,160,110,90,70,40.5",
                          "C,200,180,160,140,120,100,80,90"])
    data = load_csv(p)
    assert data.ids == ["B", "A", "C"]
    assert data.X.shape == (3, 7)
    assert data.y.tolist() == [55.0, 40.5, 90.0]


def test_short_row_is_schema_mismatch(tmp_path):
    p = _write(tmp_path, [HEADER, "A,300,250,200,150,100,80,55"])
    with pytest.raises(SchemaMismatch):
        load_csv(p)


def test_wrong_header_is_schema_mismatch(tmp_path):
    p = _write(tmp_path, ["segment_id,d1,d2,d3,d4,d5,d6,d7,score", "A,1,1,1,1,1,1,1,50"])
    with pytest.raises(SchemaMismatch, match="missing pci"):
        load_csv(p)


def test_pci_out_of_range_reports_line_and_field(tmp_path):
    p = _write(tmp_path, [HEADER, "A,1,1,1,1,1,1,1,50", "B,1,1,1,1,1,1,1,120"])
    with pytest.raises(InvariantViolation) as info:
        load_csv(p)
    assert info.value.line == 3
    assert info.value.field == "pci"


def test_unparseable_cell_reports_line(tmp_path):
    p = _write(tmp_path, [HEADER, "A,1,1,x,1,1,1,1,50"])
    with pytest.raises(ParseError) as info:
        load_csv(p)
    assert info.value.line == 2


def test_duplicate_ids_rejected(tmp_path):
    p = _write(tmp_path, [HEADER, "A,1,1,1,1,1,1,1,50", "A,2,2,2,2,2,2,2,60"])
    with pytest.raises(InvariantViolation):
        load_csv(p)


def test_segment_invariants():
    with pytest.raises(InvariantViolation):
        Segment("x", (1, 2, 3), 50)
    with pytest.raises(InvariantViolation):
        Segment("x", (1, 2, 3, 4, 5, 6, -1), 50)
    with pytest.raises(InvariantViolation):
        Segment("x", (1,) * 7, -0.5)


def test_csv_round_trip_is_byte_identical(tmp_path):
    data = synth_generate(25, seed=3)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(data, a)
    write_csv(load_csv(a), b)
    assert a.read_bytes() == b.read_bytes()
    assert np.array_equal(load_csv(b).X, data.X)
    assert np.array_equal(load_csv(b).y, data.y)


def test_provenance_sidecar(tmp_path):
    data = synth_generate(5, seed=11, params=SynthParams(noise_sd=0.5))
    side = write_provenance(data, tmp_path / "d.csv")
    doc = json.loads(side.read_text())
    assert doc["seed"] == 11
    assert doc["params"]["noise_sd"] == 0.5
    assert SynthParams.from_dict(doc["params"]) == SynthParams(noise_sd=0.5)


# ---------------------------------------------------------------- split


def test_split_sizes_and_determinism():
    data = synth_generate(10, seed=0)
    tr1, te1 = split(data, 0.2, seed=5)
    tr2, te2 = split(data, 0.2, seed=5)
    assert (len(tr1), len(te1)) == (8, 2)
    assert tr1.ids == tr2.ids and te1.ids == te2.ids


def test_split_seed_sensitivity():
    data = synth_generate(50, seed=0)
    parts = {tuple(split(data, 0.2, seed=s)[1].ids) for s in range(5)}
    assert len(parts) > 1


def test_split_too_few():
    with pytest.raises(TooFewSegments):
        split(synth_generate(1, seed=0), 0.2, 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 80), st.floats(0.05, 0.95), st.integers(0, 2**31))
def test_split_is_order_stable_partition(n, frac, seed):
    data = synth_generate(n, seed=1)
    train, test = split(data, frac, seed)
    assert set(train.ids).isdisjoint(test.ids)
    assert sorted(train.ids + test.ids) == sorted(data.ids)
    pos = {sid: i for i, sid in enumerate(data.ids)}
    for part in (train, test):
        idx = [pos[s] for s in part.ids]
        assert idx == sorted(idx)
    assert len(test) == min(max(int(np.floor(frac * n + 0.5)), 1), n - 1)


# ---------------------------------------------------------------- scaling


def _two_point(lo, hi):
    X = np.array([[lo] * 7, [hi] * 7], dtype=float)
    return Dataset.from_arrays(X, np.array([lo, hi], dtype=float))


def test_scaler_examples():
    sc = fit_scaler(_two_point(0, 100))
    assert np.all(sc.transform_x(np.full((1, 7), 50.0)) == 0.0)
    assert np.all(sc.transform_x(np.full((1, 7), 100.0)) == 1.0)
    assert sc.transform_y(np.array([0.0]))[0] == -1.0


def test_constant_feature_is_degenerate():
    X = np.ones((4, 7))
    X[:, :6] = np.arange(24).reshape(4, 6)
    with pytest.raises(DegenerateFeature, match="d7"):
        fit_scaler(Dataset.from_arrays(X, np.arange(4.0)))
    with pytest.raises(DegenerateFeature, match="pci"):
        fit_scaler(Dataset.from_arrays(np.arange(28.0).reshape(4, 7), np.full(4, 5.0)))


def test_scaler_dict_round_trip():
    sc = fit_scaler(synth_generate(30, seed=2))
    assert Scaler.from_dict(json.loads(json.dumps(sc.to_dict()))) == sc


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 60), st.integers(0, 10_000))
def test_scaler_maps_train_into_unit_box_and_inverts(n, seed):
    data = synth_generate(n, seed=seed)
    sc = fit_scaler(data)
    Z = sc.transform_x(data.X)
    assert Z.min() >= -1.0 and Z.max() <= 1.0
    assert np.allclose(sc.inverse_x(Z), data.X, rtol=0, atol=1e-12 * max(1.0, data.X.max()))
    assert np.allclose(sc.inverse_y(sc.transform_y(data.y)), data.y, rtol=0, atol=1e-12 * 100)


# -------------------------------------------------------------- synthetic


def test_synth_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(synth_generate(236, seed=9), a)
    write_csv(synth_generate(236, seed=9), b)
    assert a.read_bytes() == b.read_bytes()


def test_noiseless_matches_plant_exactly():
    params = SynthParams(noise_sd=0.0)
    data = synth_generate(300, seed=4, params=params)
    assert np.array_equal(data.y, params.planted(data.X))


def test_basins_decay_monotonically():
    X = synth_generate(10_000, seed=12).X
    assert np.all(np.diff(X, axis=1) <= 0.0)
    assert np.all(X[:, 0] >= X[:, 6]) and np.all(X[:, 6] >= 0.0)


def test_plant_sign_structure():
    coef = np.array(SynthParams().coefficients)
    assert np.all(coef[:3] < 0) and np.all(coef[3:] > 0)
    assert np.argmax(np.abs(coef)) == 6


@pytest.mark.parametrize("seed", range(5))
def test_correlation_signs_at_default_noise(seed):
    data = synth_generate(200, seed=seed)
    r = [np.corrcoef(data.X[:, j], data.y)[0, 1] for j in (0, 6)]
    assert r[0] < 0 < r[1]


def test_synth_invalid_params():
    with pytest.raises(InvalidParams):
        synth_generate(0, seed=0)
    with pytest.raises(InvalidParams):
        synth_generate(5, seed=0, params=SynthParams(noise_sd=-1))
    with pytest.raises(InvalidParams):
        synth_generate(5, seed=0, params=SynthParams(d7_range=(5, 1)))
