import numpy as np
import pytest

from voxelcut.errors import ShapeMismatchError
from voxelcut.volume import (
    EdgeLabelVolume,
    LabelVolume,
    ProbabilityVolume,
    ScalarVolume,
    argmax_labels,
    dilate6,
    edge_map,
    resample,
    validate_probability,
)

from oracles import dilate6_ref, edge_map_ref, resample_linear_ref, resample_nearest_ref

MM = (1.0, 1.0, 1.0)


def prob_volume(p1, pe=None, spacing=MM):
    p1 = np.asarray(p1, dtype=np.float64)
    if pe is None:
        pe = np.zeros_like(p1)
    return ProbabilityVolume(
        p0=(1.0 - p1).astype(np.float32),
        p1=p1.astype(np.float32),
        pe=np.asarray(pe, dtype=np.float32),
        spacing=spacing,
    )


# ---------------------------------------------------------------------------
# construction and validation
# ---------------------------------------------------------------------------

def test_label_volume_rejects_nonbinary():
    arr = np.zeros((2, 2, 2), dtype=np.int32)
    arr[1, 0, 1] = 2
    with pytest.raises(ValueError, match=r"value 2"):
        LabelVolume(arr, MM)


def test_spacing_must_be_positive_finite():
    with pytest.raises(ValueError):
        ScalarVolume(np.zeros((2, 2, 2)), (1.0, 0.0, 1.0))
    with pytest.raises(ValueError):
        ScalarVolume(np.zeros((2, 2, 2)), (1.0, np.inf, 1.0))


def test_channel_shape_mismatch_is_structural_error():
    with pytest.raises(ShapeMismatchError):
        ProbabilityVolume(
            p0=np.zeros((2, 2, 2), np.float32),
            p1=np.zeros((2, 2, 3), np.float32),
            pe=np.zeros((2, 2, 2), np.float32),
            spacing=MM,
        )


def test_validate_accepts_uniform_softmax():
    v = prob_volume(np.full((3, 3, 3), 0.7), pe=np.full((3, 3, 3), 0.2))
    assert validate_probability(v).ok


def test_validate_reports_softmax_violation_with_voxel():
    p0 = np.full((2, 2, 2), 0.5, np.float32)
    p1 = np.full((2, 2, 2), 0.5, np.float32)
    p1[1, 0, 1] = 0.6
    v = ProbabilityVolume(p0=p0, p1=p1, pe=np.zeros((2, 2, 2), np.float32), spacing=MM)
    res = validate_probability(v)
    assert not res.ok
    assert res.voxel == (1, 0, 1)
    # x-fastest linear index of (1, 0, 1) on a 2x2x2 grid
    assert res.linear_index == 1 + 0 * 2 + 1 * 4
    assert "p0 + p1" in res.reason


def test_validate_reports_pe_out_of_range():
    pe = np.zeros((2, 2, 2), np.float32)
    pe[0, 1, 0] = 1.5
    v = prob_volume(np.full((2, 2, 2), 0.5), pe=pe)
    res = validate_probability(v)
    assert not res.ok
    assert res.voxel == (0, 1, 0)
    assert "edge probability" in res.reason


def test_validate_rejects_nan():
    p1 = np.full((2, 2, 2), 0.5, np.float32)
    p1[0, 0, 0] = np.nan
    v = ProbabilityVolume(
        p0=(1.0 - p1), p1=p1, pe=np.zeros((2, 2, 2), np.float32), spacing=MM
    )
    res = validate_probability(v)
    assert not res.ok
    assert "non-finite" in res.reason


def test_softmax_tolerance_is_inclusive():
    p0 = np.full((1, 1, 1), 0.5, np.float32)
    p1 = np.full((1, 1, 1), 0.5 + 0.9e-4, np.float32)
    v = ProbabilityVolume(p0=p0, p1=p1, pe=np.zeros((1, 1, 1), np.float32), spacing=MM)
    assert validate_probability(v).ok


# ---------------------------------------------------------------------------
# argmax
# ---------------------------------------------------------------------------

def test_argmax_basic_and_tie_rule():
    p1 = np.array([0.9, 0.1, 0.5]).reshape(3, 1, 1)
    labels = argmax_labels(prob_volume(p1))
    assert labels.data.ravel().tolist() == [1, 0, 0]


def test_argmax_invariant_under_monotone_rescale():
    rng = np.random.default_rng(11)
    p1 = rng.uniform(0.01, 0.99, (5, 4, 3))
    base = argmax_labels(prob_volume(p1))
    for k in (0.5, 2.0, 3.0):
        p1k = p1**k
        p0k = (1.0 - p1) ** k
        z = p0k + p1k
        rescaled = ProbabilityVolume(
            p0=(p0k / z).astype(np.float32),
            p1=(p1k / z).astype(np.float32),
            pe=np.zeros_like(p1, dtype=np.float32),
            spacing=MM,
        )
        assert np.array_equal(argmax_labels(rescaled).data, base.data)


# ---------------------------------------------------------------------------
# dilation and edge maps
# ---------------------------------------------------------------------------

def center_voxel(n=3):
    arr = np.zeros((n, n, n), dtype=np.uint8)
    arr[n // 2, n // 2, n // 2] = 1
    return LabelVolume(arr, MM)


def test_dilate6_center_voxel():
    out = dilate6(center_voxel())
    assert out.count() == 7
    assert out.data[1, 1, 1] == 1 and out.data[0, 1, 1] == 1 and out.data[1, 2, 1] == 1
    assert out.data[0, 0, 1] == 0  # no diagonal growth


def test_dilate6_full_volume_unchanged():
    full = LabelVolume(np.ones((3, 4, 2), np.uint8), MM)
    assert np.array_equal(dilate6(full).data, full.data)


def test_dilate6_empty_stays_empty():
    empty = LabelVolume(np.zeros((3, 3, 3), np.uint8), MM)
    assert dilate6(empty).count() == 0


def test_edge_map_center_voxel_is_6_neighbors():
    edge = edge_map(center_voxel())
    assert isinstance(edge, EdgeLabelVolume)
    assert edge.count() == 6
    assert edge.data[1, 1, 1] == 0


def test_edge_map_full_volume_empty():
    full = LabelVolume(np.ones((4, 3, 3), np.uint8), MM)
    assert edge_map(full).count() == 0


def test_edge_map_block_in_5cube_is_54():
    arr = np.zeros((5, 5, 5), dtype=np.uint8)
    arr[1:4, 1:4, 1:4] = 1
    edge = edge_map(LabelVolume(arr, MM))
    assert edge.count() == 54
    assert np.array_equal(edge.data.astype(bool), edge_map_ref(arr.astype(bool)))


def test_dilate_extensive_monotone_and_edge_disjoint_random():
    rng = np.random.default_rng(5)
    for _ in range(25):
        dims = tuple(rng.integers(1, 7, 3))
        m1 = rng.random(dims) < 0.35
        m2 = m1 | (rng.random(dims) < 0.2)
        l1 = LabelVolume(m1.astype(np.uint8), MM)
        l2 = LabelVolume(m2.astype(np.uint8), MM)
        d1 = dilate6(l1).data.astype(bool)
        d2 = dilate6(l2).data.astype(bool)
        assert (d1 | m1).sum() == d1.sum()  # extensive
        assert not (d1 & ~d2).any()  # monotone
        e = edge_map(l1).data.astype(bool)
        assert not (e & m1).any()  # edge voxels are background
        assert np.array_equal(e, edge_map_ref(m1))
        # every edge voxel touches the object across a face
        touches = np.zeros(dims, dtype=bool)
        for axis in range(3):
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo[axis] = slice(None, -1)
            hi[axis] = slice(1, None)
            touches[tuple(lo)] |= m1[tuple(hi)]
            touches[tuple(hi)] |= m1[tuple(lo)]
        assert not (e & ~touches).any()


# ---------------------------------------------------------------------------
# resampling
# ---------------------------------------------------------------------------

def test_resample_identity_label_bitwise():
    rng = np.random.default_rng(3)
    l = LabelVolume((rng.random((4, 5, 3)) < 0.4).astype(np.uint8), (0.7, 1.1, 2.0))
    out = resample(l, l.spacing, mode="nearest")
    assert type(out) is LabelVolume
    assert np.array_equal(out.data, l.data)


def test_resample_identity_linear_close():
    rng = np.random.default_rng(4)
    v = ScalarVolume(rng.random((4, 5, 3)).astype(np.float32), (0.7, 1.1, 2.0))
    out = resample(v, v.spacing, mode="linear")
    assert out.dims == v.dims
    assert np.max(np.abs(out.data - v.data)) <= 1e-6


def test_resample_constant_any_spacing():
    v = ScalarVolume(np.full((4, 4, 4), 3.25, np.float32), (0.5, 0.5, 0.5))
    out = resample(v, (0.7, 1.3, 0.4), mode="linear")
    assert out.dims == (3, 2, 5)
    assert np.allclose(out.data, 3.25)


def test_resample_label_halving_matches_declared_rule():
    rng = np.random.default_rng(9)
    arr = (rng.random((4, 4, 4)) < 0.5).astype(np.uint8)
    l = LabelVolume(arr, (0.5, 0.5, 0.5))
    out = resample(l, (1.0, 1.0, 1.0), mode="nearest")
    assert out.dims == (2, 2, 2)
    ref = resample_nearest_ref(arr, (0.5, 0.5, 0.5), (1.0, 1.0, 1.0), (2, 2, 2))
    assert np.array_equal(out.data, ref)
    # the declared tie rule picks the higher index: output (i,j,k) = input (2i+1, ...)
    assert np.array_equal(out.data, arr[1::2, 1::2, 1::2])


def test_resample_linear_matches_direct_evaluation():
    rng = np.random.default_rng(10)
    data = rng.random((5, 3, 4)).astype(np.float32)
    v = ScalarVolume(data, (1.0, 2.0, 0.5))
    target = (0.65, 1.4, 0.9)
    out = resample(v, target, mode="linear")
    ref = resample_linear_ref(data.astype(np.float64), v.spacing, target, out.dims)
    assert np.max(np.abs(out.data - ref)) < 1e-6


def test_resample_clamps_out_of_range_samples():
    data = np.arange(8, dtype=np.float32).reshape(2, 2, 2)
    v = ScalarVolume(data, (1.0, 1.0, 1.0))
    out = resample(v, (4.0, 4.0, 4.0), mode="linear")
    assert out.dims == (1, 1, 1)
    # single output sample at physical center maps to u = 1.5 -> clamped mean region
    ref = resample_linear_ref(data.astype(np.float64), v.spacing, (4.0,) * 3, (1, 1, 1))
    assert np.allclose(out.data, ref)


def test_resample_min_dims_one():
    v = ScalarVolume(np.ones((2, 2, 2), np.float32), (1.0, 1.0, 1.0))
    out = resample(v, (10.0, 10.0, 10.0), mode="linear")
    assert out.dims == (1, 1, 1)


def test_resample_rejects_linear_on_labels():
    l = LabelVolume(np.zeros((2, 2, 2), np.uint8), MM)
    with pytest.raises(ValueError, match="nearest"):
        resample(l, (2.0, 2.0, 2.0), mode="linear")


def test_resample_rejects_bad_mode_and_spacing():
    v = ScalarVolume(np.zeros((2, 2, 2), np.float32), MM)
    with pytest.raises(ValueError):
        resample(v, (1.0, 1.0, 1.0), mode="cubic")
    with pytest.raises(ValueError):
        resample(v, (1.0, -1.0, 1.0), mode="linear")


def test_volumes_are_immutable():
    v = ScalarVolume(np.zeros((2, 2, 2), np.float32), MM)
    with pytest.raises(ValueError):
        v.data[0, 0, 0] = 1.0
