import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from s2ml import ValidationError
from s2ml.harness.gradcheck import check_gradients, spatial_fusion_case
from s2ml.spatial_fusion import (
    SpatialFusion,
    SwinConvBlock,
    window_attention,
    window_merge,
    window_partition,
)
from s2ml.spectra import dft2


def zero_(m):
    with torch.no_grad():
        for p in m.parameters():
            p.zero_()
    return m


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(1, 5), st.integers(1, 4), st.integers(1, 4), st.sampled_from([1, 2, 4]))
def test_partition_merge_identity(B, C, nh, nw, w):
    x = torch.randn(B, C, nh * w, nw * w)
    win = window_partition(x, w)
    assert win.shape == (B * nh * nw, w * w, C)
    assert torch.equal(window_merge(win, w, B, nh * w, nw * w), x)


def test_partition_contents():
    x = torch.arange(16.0).view(1, 1, 4, 4)
    win = window_partition(x, 2)
    assert win[0, :, 0].tolist() == [0, 1, 4, 5]
    assert win[3, :, 0].tolist() == [10, 11, 14, 15]


def test_partition_rejects_non_multiple():
    with pytest.raises(ValidationError):
        window_partition(torch.zeros(1, 1, 5, 4), 2)


def test_constant_queries_give_uniform_attention():
    q = torch.ones(1, 16, 4)
    _, attn = window_attention(q, q, torch.randn(1, 16, 4), heads=2)
    assert torch.allclose(attn, torch.full_like(attn, 1 / 16))


def test_constant_keys_in_block_give_uniform_attention():
    blk = SwinConvBlock(4, window=4, heads=2)
    blk.keep_attn = True
    with torch.no_grad():
        blk.k_conv.weight.zero_()
        blk(torch.randn(1, 4, 8, 8))
    a = blk.last_attn
    assert a.shape == (4, 2, 16, 16)
    assert torch.allclose(a, torch.full_like(a, 1 / 16), atol=1e-7)


def test_attention_rows_sum_to_one():
    blk = SwinConvBlock(6, window=4, heads=3)
    blk.keep_attn = True
    with torch.no_grad():
        blk(torch.randn(2, 6, 8, 12))
    a = blk.last_attn
    assert torch.allclose(a.sum(-1), torch.ones_like(a.sum(-1)), atol=1e-6)
    assert (a >= 0).all()


def test_attention_matches_loop():
    q, k, v = torch.randn(3, 1, 5, 4, dtype=torch.float64).unbind(0)
    out, _ = window_attention(q, k, v, heads=2)
    for h in range(2):
        sl = slice(2 * h, 2 * h + 2)
        for i in range(5):
            s = torch.stack([q[0, i, sl] @ k[0, j, sl] for j in range(5)]) / np.sqrt(2)
            w = torch.exp(s - s.max())
            w = w / w.sum()
            ref = (w[:, None] * v[0, :, sl]).sum(0)
            assert torch.allclose(out[0, i, sl], ref, atol=1e-12)


def test_zero_block_is_identity():
    blk = zero_(SwinConvBlock(4))
    x = torch.randn(2, 4, 8, 8)
    assert torch.equal(blk(x), x)


def test_unbatched_input():
    blk = SwinConvBlock(4)
    x = torch.randn(4, 8, 8)
    assert torch.allclose(blk(x), blk(x[None])[0])


@pytest.mark.parametrize("shift", [False, True])
@pytest.mark.parametrize("hw", [(8, 8), (10, 13), (6, 7)])
def test_block_preserves_shape(hw, shift):
    blk = SwinConvBlock(4, window=4, heads=2, shift=shift)
    x = torch.randn(1, 4, *hw)
    assert blk(x).shape == x.shape


def test_heads_must_divide_channels():
    with pytest.raises(ValidationError):
        SwinConvBlock(5, heads=2)


def test_zero_spatial_fusion_outputs_zero():
    m = zero_(SpatialFusion(4))
    out = m(dft2(torch.randn(1, 4, 8, 8)), torch.randn(1, 4, 8, 8))
    assert torch.equal(out, torch.zeros_like(out))


def test_return_sf_is_inverse_transform():
    m = SpatialFusion(4).double()
    x = torch.randn(1, 4, 8, 12, dtype=torch.float64)
    out, f_sf = m(dft2(x), torch.randn_like(x), return_sf=True)
    assert out.shape == x.shape
    assert torch.allclose(f_sf, x, atol=1e-12)


def test_spatial_fusion_shape_mismatch():
    m = SpatialFusion(4)
    with pytest.raises(ValidationError):
        m(dft2(torch.randn(1, 4, 8, 8)), torch.randn(1, 4, 8, 12))


def test_spatial_fusion_gradcheck():
    loss, tensors = spatial_fusion_case(seed=0)
    rep = check_gradients(loss, tensors, n_samples=40)
    assert rep.ok, rep.failures
