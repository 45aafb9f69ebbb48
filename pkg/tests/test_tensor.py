"""Kernel-level tests: every conv primitive against scalar-loop oracles,
counter exactness, and the raster/temporal causality masks."""

import numpy as np
import pytest

from convgen import (
    ConvWeights,
    EmptyInputError,
    InsufficientContextError,
    InvalidParameterError,
    OpCounter,
    ShapeError,
    as_tensor,
    conv1d_full,
    conv1d_point,
    masked_conv2d,
    strided_conv1d,
    strided_transposed_conv1d,
    transposed_point,
)
from oracles import (
    scalar_conv1d_full,
    scalar_conv1d_point,
    scalar_masked_conv2d,
    scalar_strided_conv1d,
    scalar_transposed_conv1d,
)

ORACLE_TOL = 1e-6


def rand_weights(rng, out_ch, in_ch, taps):
    kernel = rng.uniform(-1, 1, size=(out_ch, in_ch) + taps).astype(np.float32)
    bias = rng.uniform(-1, 1, size=(out_ch,)).astype(np.float32)
    return ConvWeights(kernel, bias)


# ---------------------------------------------------------------------------
# as_tensor / ConvWeights contracts
# ---------------------------------------------------------------------------


def test_as_tensor_pins_dtype_layout():
    t = as_tensor([[1, 2], [3, 4]])
    assert t.dtype == np.float32
    assert t.flags.c_contiguous
    assert t.shape == (2, 2)
    r = as_tensor([1, 2, 3, 4, 5, 6], shape=(2, 3))
    assert r.shape == (2, 3) and r.size == 6


def test_as_tensor_rejects_bad_reshape():
    with pytest.raises(ShapeError):
        as_tensor([1, 2, 3], shape=(2, 2))


def test_conv_weights_validation():
    with pytest.raises(ShapeError):
        ConvWeights(np.zeros((2, 2), np.float32), np.zeros(2, np.float32))
    with pytest.raises(ShapeError):
        ConvWeights(np.zeros((2, 2, 2), np.float32), np.zeros(3, np.float32))
    with pytest.raises(InvalidParameterError):
        ConvWeights(np.full((1, 1, 2), np.nan, np.float32), np.zeros(1, np.float32))


# ---------------------------------------------------------------------------
# conv1d_point
# ---------------------------------------------------------------------------


def test_point_identity_tap():
    # kernel (0, 1) on one channel passes the newest tap through
    w = ConvWeights(np.array([[[0.0, 1.0]]], np.float32), np.zeros(1, np.float32))
    a, b = np.array([5.0], np.float32), np.array([-2.5], np.float32)
    assert conv1d_point(w, [a, b])[0] == np.float32(-2.5)


def test_point_sum_tap():
    w = ConvWeights(np.array([[[1.0, 1.0]]], np.float32), np.zeros(1, np.float32))
    out = conv1d_point(w, [np.array([3.0], np.float32), np.array([4.0], np.float32)])
    assert out[0] == np.float32(7.0)


@pytest.mark.parametrize("case", range(100))
def test_point_matches_scalar_oracle(case):
    rng = np.random.default_rng(1000 + case)
    out_ch, in_ch, k = rng.integers(1, 6), rng.integers(1, 6), rng.integers(1, 4)
    w = rand_weights(rng, out_ch, in_ch, (int(k),))
    taps = [rng.uniform(-2, 2, in_ch).astype(np.float32) for _ in range(k)]
    got = conv1d_point(w, taps)
    want = scalar_conv1d_point(w.kernel, w.bias, taps)
    assert np.max(np.abs(got - want)) <= ORACLE_TOL


def test_point_batched_matches_per_element():
    rng = np.random.default_rng(7)
    w = rand_weights(rng, 3, 4, (2,))
    taps = [rng.uniform(-1, 1, (4, 5)).astype(np.float32) for _ in range(2)]
    batched = conv1d_point(w, taps)
    for j in range(5):
        single = conv1d_point(w, [t[:, j] for t in taps])
        assert np.max(np.abs(batched[:, j] - single)) <= ORACLE_TOL


def test_point_shape_errors():
    rng = np.random.default_rng(0)
    w = rand_weights(rng, 2, 3, (2,))
    with pytest.raises(ShapeError):
        conv1d_point(w, [np.zeros(3, np.float32)])  # missing a tap
    with pytest.raises(ShapeError):
        conv1d_point(w, [np.zeros(2, np.float32), np.zeros(3, np.float32)])


# ---------------------------------------------------------------------------
# conv1d_full
# ---------------------------------------------------------------------------


def test_full_identity_passthrough():
    w = ConvWeights(np.array([[[0.0, 1.0]]], np.float32), np.zeros(1, np.float32))
    x = np.arange(6, dtype=np.float32)[None, :]
    out = conv1d_full(w, x, dilation=3)
    assert np.array_equal(out, x)


def test_full_dilation2_frozen():
    # hand-evaluated: out[t] = x[t-2] + x[t], zeros on the left
    w = ConvWeights(np.array([[[1.0, 1.0]]], np.float32), np.zeros(1, np.float32))
    x = np.array([[1.0, 2.0, 3.0, 4.0]], np.float32)
    out = conv1d_full(w, x, dilation=2)
    assert np.array_equal(out[0], np.array([1.0, 2.0, 4.0, 6.0], np.float32))


@pytest.mark.parametrize("case", range(100))
def test_full_matches_scalar_oracle(case):
    rng = np.random.default_rng(2000 + case)
    in_ch, out_ch = rng.integers(1, 4), rng.integers(1, 4)
    d, T = int(rng.integers(1, 4)), int(rng.integers(1, 12))
    w = rand_weights(rng, out_ch, in_ch, (2,))
    x = rng.uniform(-2, 2, (in_ch, T)).astype(np.float32)
    got = conv1d_full(w, x, dilation=d)
    want = scalar_conv1d_full(w.kernel, w.bias, x, d)
    assert np.max(np.abs(got - want)) <= ORACLE_TOL


def test_full_valid_mode_and_errors():
    rng = np.random.default_rng(1)
    w = rand_weights(rng, 1, 1, (2,))
    x = rng.uniform(-1, 1, (1, 8)).astype(np.float32)
    out = conv1d_full(w, x, dilation=3, causal_pad=False)
    assert out.shape == (1, 5)
    want = scalar_conv1d_full(w.kernel, w.bias, x, 3, causal_pad=False)
    assert np.max(np.abs(out - want)) <= ORACLE_TOL
    with pytest.raises(EmptyInputError):
        conv1d_full(w, np.zeros((1, 0), np.float32), dilation=1)
    with pytest.raises(InsufficientContextError):
        conv1d_full(w, x[:, :3], dilation=3, causal_pad=False)
    with pytest.raises(InvalidParameterError):
        conv1d_full(w, x, dilation=0)


def test_stacked_dilations_receptive_field():
    # dilations (1, 2, 4): output t reads exactly inputs t-7..t
    rng = np.random.default_rng(5)
    ws = [rand_weights(rng, 1, 1, (2,)) for _ in range(3)]

    def forward(x):
        h = x[None, :].astype(np.float32)
        for w, d in zip(ws, (1, 2, 4)):
            h = conv1d_full(w, h, dilation=d)
        return h[0]

    x = rng.uniform(-1, 1, 16).astype(np.float32)
    base = forward(x)
    t = 15
    for i in range(16):
        xp = x.copy()
        xp[i] += 1.0
        changed = forward(xp)[t] != base[t]
        assert changed == (t - 7 <= i <= t), f"input {i} influence wrong"


# ---------------------------------------------------------------------------
# strided / transposed
# ---------------------------------------------------------------------------


def test_strided_stride1_reduces_to_full():
    rng = np.random.default_rng(3)
    w = rand_weights(rng, 2, 2, (2,))
    x = rng.uniform(-1, 1, (2, 7)).astype(np.float32)
    assert np.array_equal(strided_conv1d(w, x, 1), conv1d_full(w, x, dilation=1))


def test_strided_output_length_frozen():
    rng = np.random.default_rng(4)
    w = rand_weights(rng, 1, 1, (2,))
    x = rng.uniform(-1, 1, (1, 4)).astype(np.float32)
    assert strided_conv1d(w, x, 2).shape == (1, 2)


@pytest.mark.parametrize("case", range(100))
def test_strided_matches_scalar_oracle(case):
    rng = np.random.default_rng(3000 + case)
    in_ch, out_ch = rng.integers(1, 4), rng.integers(1, 4)
    s, T = int(rng.integers(1, 4)), int(rng.integers(1, 12))
    w = rand_weights(rng, out_ch, in_ch, (2,))
    x = rng.uniform(-2, 2, (in_ch, T)).astype(np.float32)
    got = strided_conv1d(w, x, s)
    want = scalar_strided_conv1d(w.kernel, w.bias, x, s)
    assert got.shape == want.shape
    assert np.max(np.abs(got - want)) <= ORACLE_TOL


@pytest.mark.parametrize("case", range(100))
def test_transposed_matches_scalar_oracle(case):
    rng = np.random.default_rng(4000 + case)
    in_ch, out_ch = rng.integers(1, 4), rng.integers(1, 4)
    s, T = int(rng.integers(1, 4)), int(rng.integers(1, 10))
    w = rand_weights(rng, out_ch, in_ch, (int(s),))
    x = rng.uniform(-2, 2, (in_ch, T)).astype(np.float32)
    got = strided_transposed_conv1d(w, x, s)
    want = scalar_transposed_conv1d(w.kernel, w.bias, x, s)
    assert got.shape == (out_ch, s * T)
    assert np.max(np.abs(got - want)) <= ORACLE_TOL


def test_transposed_then_strided_round_trip():
    # identity-like kernels: up copies x to both phases, down picks the newest tap
    up = ConvWeights(np.array([[[1.0, 1.0]]], np.float32), np.zeros(1, np.float32))
    down = ConvWeights(np.array([[[0.0, 1.0]]], np.float32), np.zeros(1, np.float32))
    x = np.array([[1.0, -2.0, 3.0, 0.5]], np.float32)
    wide = strided_transposed_conv1d(up, x, 2)
    assert wide.shape == (1, 8)
    back = strided_conv1d(down, wide, 2)
    assert back.shape == x.shape
    assert np.array_equal(back, x)


def test_stride_errors():
    rng = np.random.default_rng(6)
    w = rand_weights(rng, 1, 1, (2,))
    x = np.ones((1, 4), np.float32)
    with pytest.raises(InvalidParameterError):
        strided_conv1d(w, x, 0)
    with pytest.raises(InvalidParameterError):
        strided_transposed_conv1d(w, x, 3)  # kernel 2 != stride 3
    with pytest.raises(InvalidParameterError):
        transposed_point(w, 2, np.zeros(1, np.float32))


# ---------------------------------------------------------------------------
# masked 2D convs
# ---------------------------------------------------------------------------


def test_masked_zero_input_bias_only():
    rng = np.random.default_rng(8)
    w = rand_weights(rng, 3, 2, (2, 3))
    out = masked_conv2d(w, np.zeros((2, 5, 6), np.float32), "vertical")
    assert np.allclose(out, w.bias[:, None, None])
    wh = rand_weights(rng, 3, 2, (1, 2))
    out = masked_conv2d(wh, np.zeros((2, 5, 6), np.float32), "horizontal")
    assert np.allclose(out, wh.bias[:, None, None])


@pytest.mark.parametrize("kind,taps", [("vertical", (2, 3)), ("horizontal", (1, 2))])
@pytest.mark.parametrize("case", range(50))
def test_masked_matches_scalar_oracle(kind, taps, case):
    rng = np.random.default_rng(5000 + case)
    w = rand_weights(rng, 2, 2, taps)
    img = rng.uniform(-2, 2, (2, 5, 6)).astype(np.float32)
    got = masked_conv2d(w, img, kind)
    want = scalar_masked_conv2d(w.kernel, w.bias, img, kind)
    assert np.max(np.abs(got - want)) <= ORACLE_TOL


@pytest.mark.parametrize("kind", ["vertical", "horizontal"])
def test_masked_causality_all_pixel_pairs(kind):
    # perturbing pixel p2 must leave every output at or before p2 unchanged:
    # vertical sees only rows above, horizontal only strictly-left columns
    rng = np.random.default_rng(9)
    taps = (2, 3) if kind == "vertical" else (1, 2)
    w = rand_weights(rng, 2, 1, taps)
    img = rng.uniform(-1, 1, (1, 6, 6)).astype(np.float32)
    base = masked_conv2d(w, img, kind)
    for r2 in range(6):
        for c2 in range(6):
            pert = img.copy()
            pert[0, r2, c2] += 1.0
            out = masked_conv2d(w, pert, kind)
            if kind == "vertical":
                # rows <= r2 read nothing at or below row r2
                assert np.array_equal(out[:, : r2 + 1, :], base[:, : r2 + 1, :])
            else:
                # same row, columns <= c2 read only strictly-left pixels
                assert np.array_equal(out[:, r2, : c2 + 1], base[:, r2, : c2 + 1])
                assert np.array_equal(out[:, :r2, :], base[:, :r2, :])
                assert np.array_equal(out[:, r2 + 1 :, :], base[:, r2 + 1 :, :])


def test_masked_footprint_errors():
    rng = np.random.default_rng(10)
    w = rand_weights(rng, 1, 1, (4, 3))
    with pytest.raises(InsufficientContextError):
        masked_conv2d(w, np.zeros((1, 3, 8), np.float32), "vertical")
    with pytest.raises(InvalidParameterError):
        masked_conv2d(w, np.zeros((1, 8, 8), np.float32), "diagonal")
    wh = rand_weights(rng, 1, 1, (2, 2))
    with pytest.raises(ShapeError):
        masked_conv2d(wh, np.zeros((1, 8, 8), np.float32), "horizontal")


# ---------------------------------------------------------------------------
# counters
# ---------------------------------------------------------------------------


def test_counter_soundness_exact():
    rng = np.random.default_rng(11)
    out_ch, in_ch, k = 3, 4, 2
    w = rand_weights(rng, out_ch, in_ch, (k,))
    counter = OpCounter()
    calls = 17
    for _ in range(calls):
        conv1d_point(w, [rng.uniform(-1, 1, in_ch).astype(np.float32) for _ in range(k)], counter)
    assert counter.macs == out_ch * in_ch * k * calls
    assert counter.node_evals == calls
    counter.reset()
    assert counter.snapshot() == (0, 0)


def test_counter_full_and_masked_counts():
    rng = np.random.default_rng(12)
    w = rand_weights(rng, 2, 3, (2,))
    c = OpCounter()
    conv1d_full(w, rng.uniform(-1, 1, (3, 9)).astype(np.float32), dilation=2, counter=c)
    assert c.node_evals == 9 and c.macs == 2 * 3 * 2 * 9
    w2 = rand_weights(rng, 2, 1, (2, 3))
    c2 = OpCounter()
    masked_conv2d(w2, rng.uniform(-1, 1, (1, 4, 5)).astype(np.float32), "vertical", c2)
    assert c2.node_evals == 20 and c2.macs == 2 * 1 * 2 * 3 * 20


def test_counter_merge():
    a, b = OpCounter(), OpCounter()
    a.add(10, 2)
    b.add(5, 1)
    a.merge(b)
    assert a.snapshot() == (15, 3)
