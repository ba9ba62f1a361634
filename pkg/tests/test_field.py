import math
import struct

import numpy as np
import pytest

import lppgeo as L
from lppgeo import _kernels
from lppgeo.errors import CapacityError, DomainError
from lppgeo.field import FieldKey, Rect, WeightField, read_block_binary


def test_field_key_equality():
    assert FieldKey(1, 2) == FieldKey(1, 2)
    assert FieldKey(1, 2) != FieldKey(1, 3)
    assert FieldKey(1, 2) != FieldKey(2, 2)
    with pytest.raises(DomainError):
        FieldKey(-1)
    with pytest.raises(DomainError):
        FieldKey(2 ** 64)


def test_weight_at_deterministic():
    f = L.field(12345, 7)
    a = f.weight_at((10, -3))
    b = f.weight_at((10, -3))
    assert a == b  # bit identical
    g = L.field(12345, 7)
    assert g.weight_at((10, -3)) == a


def test_equal_keys_equal_environments():
    f = L.field(5, 9)
    g = WeightField(FieldKey(5, 9))
    cells = [(0, 0), (-5, 12), (1000, 2000), (2 ** 40, -2 ** 40)]
    for v in cells:
        assert f.weight_at(v) == g.weight_at(v)


def test_replicates_differ():
    f0 = L.field(5, 0)
    f1 = L.field(5, 1)
    vals0 = [f0.weight_at((i, 0)) for i in range(32)]
    vals1 = [f1.weight_at((i, 0)) for i in range(32)]
    assert vals0 != vals1


def test_uniform_to_weight_inverse_cdf():
    assert L.uniform_to_weight(0.5) == pytest.approx(math.log(2), rel=1e-12)
    assert L.uniform_to_weight(0.0) == pytest.approx(0.0, abs=1e-18)
    for u in (0.1, 0.25, 0.75, 0.9, 0.99):
        assert L.uniform_to_weight(u) == pytest.approx(-math.log1p(-u), rel=1e-12)
    with pytest.raises(DomainError):
        L.uniform_to_weight(1.0)


def test_weight_matches_uniform():
    f = L.field(2, 3)
    for v in [(0, 0), (17, -4), (123456, 654321)]:
        u = f.uniform_at(v)
        assert 0.0 < u < 1.0
        assert f.weight_at(v) == L.uniform_to_weight(u)


def test_log_kernel_accuracy_against_libm():
    # the hand-rolled polynomial log must track libm to ~1e-12 relative
    rs = np.random.default_rng(7)
    us = rs.integers(1, 2 ** 53, size=200_000, dtype=np.uint64)
    us = (us | 1).astype(np.float64) * 2.0 ** -53
    got = np.array([_kernels.uniform_to_weight(u) for u in us[:2000]])
    ref = -np.log1p(-us[:2000])
    rel = np.abs(got - ref) / ref
    assert rel.max() < 5e-12
    # extreme edges stay positive and finite
    lo = _kernels.uniform_to_weight(2.0 ** -53)
    hi = _kernels.uniform_to_weight(1.0 - 2.0 ** -53)
    assert 0.0 < lo < 1e-15
    assert 36.0 < hi < 37.5


def test_sample_mean_of_million_cells():
    f = L.field(31337, 0)
    blk = f.materialize_block(Rect(0, 999, 0, 999))
    assert blk.mean() == pytest.approx(1.0, abs=0.01)


def test_sample_variance():
    f = L.field(909, 4)
    blk = f.materialize_block(Rect(-500, 499, -500, 499))
    assert blk.var() == pytest.approx(1.0, abs=0.02)


def test_positivity_and_finiteness():
    f = L.field(8, 8)
    blk = f.materialize_block(Rect(0, 2047, 0, 511))
    assert blk.min() > 0.0
    assert np.isfinite(blk).all()


def test_lag1_autocorrelation():
    f = L.field(77, 0)
    blk = f.materialize_block(Rect(0, 2047, 0, 2047))
    x = blk[:, :-1].ravel() - blk.mean()
    y = blk[:, 1:].ravel() - blk.mean()
    rho_row = (x * y).mean() / blk.var()
    x = blk[:-1, :].ravel() - blk.mean()
    y = blk[1:, :].ravel() - blk.mean()
    rho_col = (x * y).mean() / blk.var()
    assert abs(rho_row) < 0.01
    assert abs(rho_col) < 0.01


def test_materialize_single_cell():
    f = L.field(3, 3)
    blk = f.materialize_block(Rect(5, 5, -2, -2))
    assert blk.shape == (1, 1)
    assert blk[0, 0] == f.weight_at((5, -2))


def test_materialize_matches_pointwise_queries(rng):
    f = L.field(10, 2)
    rect = Rect(-7, 25, 3, 40)
    blk = f.materialize_block(rect)
    for _ in range(200):
        x = int(rng.integers(rect.x_min, rect.x_max + 1))
        y = int(rng.integers(rect.y_min, rect.y_max + 1))
        assert blk[y - rect.y_min, x - rect.x_min] == f.weight_at((x, y))


def test_overlapping_blocks_agree():
    f = L.field(44, 0)
    a = f.materialize_block(Rect(0, 30, 0, 30))
    b = f.materialize_block(Rect(20, 50, 10, 45))
    # overlap: x in [20, 30], y in [10, 30]
    ov_a = a[10:31, 20:31]
    ov_b = b[0:21, 0:11]
    assert np.array_equal(ov_a, ov_b)


def test_domain_enforced():
    f = WeightField(FieldKey(1), domain=Rect(0, 10, 0, 10))
    f.weight_at((10, 10))
    with pytest.raises(DomainError):
        f.weight_at((11, 10))
    with pytest.raises(DomainError):
        f.materialize_block(Rect(0, 11, 0, 5))


def test_block_budget_capacity_error():
    f = WeightField(FieldKey(1), max_block_cells=100)
    with pytest.raises(CapacityError) as ei:
        f.materialize_block(Rect(0, 10, 0, 10))
    assert "100" in str(ei.value)  # names the limit


def test_binary_dump_roundtrip(tmp_path):
    f = L.field(21, 1)
    rect = Rect(-3, 12, 5, 20)
    path = tmp_path / "blk.bin"
    L.dump_block_binary(path, f, rect)
    raw = path.read_bytes()
    magic, x0, x1, y0, y1, bits, _ = struct.unpack("<8s4iII", raw[:32])
    assert magic == b"LPPBLK01"
    assert (x0, x1, y0, y1) == (-3, 12, 5, 20)
    assert bits == 64
    rect2, data = read_block_binary(path)
    assert rect2 == rect
    assert np.array_equal(data, f.materialize_block(rect))
    # row-major little-endian payload
    first = struct.unpack("<d", raw[32:40])[0]
    assert first == f.weight_at((-3, 5))


def test_csv_dump(tmp_path):
    f = L.field(9, 9)
    rect = Rect(0, 2, 0, 1)
    path = tmp_path / "blk.csv"
    L.dump_block_csv(path, f, rect)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "x,y,weight"
    assert len(lines) == 1 + rect.area
    x, y, w = lines[1].split(",")
    assert (int(x), int(y)) == (0, 0)
    assert float(w) == f.weight_at((0, 0))
