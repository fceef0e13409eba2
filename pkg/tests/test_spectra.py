import math

import hypothesis.extra.numpy as hnp
import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_dft2
from s2ml import ValidationError
from s2ml.spectra import (
    ComplexSpectrum,
    PolarSpectrum,
    band_energy,
    decompose,
    dft2,
    idft2,
    make_lowfreq_mask,
    recompose,
    wrap_phase,
)

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)
maps = st.tuples(st.integers(2, 9), st.integers(2, 9)).flatmap(
    lambda hw: hnp.arrays(np.float64, hw, elements=finite)
)


def test_dft_constant():
    s = dft2(torch.full((2, 2), 3.0))
    assert s.real[0, 0] == 12.0
    assert torch.count_nonzero(s.real[1:]).item() == 0 and torch.count_nonzero(s.imag).item() == 0


def test_dft_impulse():
    x = torch.zeros(4, 5)
    x[0, 0] = 1
    s = dft2(x)
    assert torch.equal(s.real, torch.ones(4, 5))
    assert torch.equal(s.imag, torch.zeros(4, 5))


def test_dft_hand_2x2():
    s = dft2(torch.tensor([[1.0, 2.0], [3.0, 4.0]], dtype=torch.float64))
    assert s.real.tolist() == [[10.0, -2.0], [-4.0, 0.0]]
    # oracle agrees
    ref = brute_dft2(np.array([[1.0, 2.0], [3.0, 4.0]]))
    np.testing.assert_allclose(ref.real, s.real.numpy(), atol=1e-12)


@pytest.mark.parametrize("shape", [(3, 4), (5, 5), (6, 7)])
def test_dft_matches_double_sum(shape, rng):
    x = rng.normal(size=shape)
    s = dft2(torch.from_numpy(x))
    ref = brute_dft2(x)
    np.testing.assert_allclose(s.real.numpy(), ref.real, atol=1e-10)
    np.testing.assert_allclose(s.imag.numpy(), ref.imag, atol=1e-10)


def test_dft_per_channel(rng):
    x = torch.from_numpy(rng.normal(size=(2, 3, 4, 4)))
    s = dft2(x)
    s1 = dft2(x[1, 2])
    assert torch.allclose(s.real[1, 2], s1.real) and torch.allclose(s.imag[1, 2], s1.imag)


def test_dft_rejects_nonfinite():
    x = torch.zeros(4, 4)
    x[1, 1] = float("nan")
    with pytest.raises(ValidationError):
        dft2(x)


def test_idft_shape_mismatch():
    with pytest.raises(ValidationError):
        idft2(ComplexSpectrum(torch.zeros(4, 4), torch.zeros(4, 5)))


def test_idft_zero_and_dc():
    assert torch.equal(idft2(ComplexSpectrum(torch.zeros(3, 4), torch.zeros(3, 4))), torch.zeros(3, 4))
    re = torch.zeros(3, 4, dtype=torch.float64)
    re[0, 0] = 12 * 2.5
    out = idft2(ComplexSpectrum(re, torch.zeros_like(re)))
    assert torch.allclose(out, torch.full((3, 4), 2.5, dtype=torch.float64), atol=1e-14)


def test_round_trip_single(rng):
    x = torch.from_numpy(rng.normal(size=(8, 16, 24)).astype(np.float32))
    assert (idft2(dft2(x)) - x).abs().max() < 1e-5


@settings(max_examples=60, deadline=None)
@given(maps)
def test_round_trip_double(x):
    t = torch.from_numpy(x)
    assert (idft2(dft2(t)) - t).abs().max().item() < 1e-10


@settings(max_examples=60, deadline=None)
@given(maps)
def test_hermitian_symmetry(x):
    s = dft2(torch.from_numpy(x))
    H, W = x.shape
    scale = max(1.0, np.abs(x).sum())
    for u in range(H):
        for v in range(W):
            uu, vv = (H - u) % H, (W - v) % W
            assert abs(s.real[u, v] - s.real[uu, vv]) <= 1e-12 * scale
            assert abs(s.imag[u, v] + s.imag[uu, vv]) <= 1e-12 * scale


@settings(max_examples=60, deadline=None)
@given(maps)
def test_parseval(x):
    t = torch.from_numpy(x)
    p = decompose(dft2(t))
    lhs = (t * t).sum().item()
    rhs = (p.amplitude**2).sum().item() / t.numel()
    assert abs(lhs - rhs) <= 1e-4 * max(lhs, 1e-12)


def test_decompose_examples():
    s = ComplexSpectrum(torch.tensor([3.0, -1.0, 0.0]), torch.tensor([4.0, 0.0, 0.0]))
    p = decompose(s)
    assert p.amplitude.tolist() == [5.0, 1.0, 0.0]
    assert p.phase[0].item() == pytest.approx(0.92730, abs=1e-5)
    assert p.phase[1].item() == pytest.approx(math.pi)
    assert p.phase[2].item() == 0.0


def test_decompose_negative_zero_imag_maps_to_plus_pi():
    p = decompose(ComplexSpectrum(torch.tensor([-2.0]), torch.tensor([-0.0])))
    assert p.phase.item() == pytest.approx(math.pi)


def test_zero_bin_gradient_is_finite():
    re = torch.tensor([0.0, 1.0], requires_grad=True)
    im = torch.tensor([0.0, 1.0], requires_grad=True)
    p = decompose(ComplexSpectrum(re, im))
    (p.amplitude.sum() + p.phase.sum()).backward()
    assert torch.isfinite(re.grad).all() and torch.isfinite(im.grad).all()


def test_recompose_examples():
    s = recompose(PolarSpectrum(torch.tensor([5.0, 0.0]), torch.tensor([0.92730, 0.0])))
    assert s.real[0].item() == pytest.approx(3.0, abs=1e-4)
    assert s.imag[0].item() == pytest.approx(4.0, abs=1e-4)
    assert s.real[1].item() == 0.0 and s.imag[1].item() == 0.0


def test_recompose_negative_amplitude():
    with pytest.raises(ValidationError):
        recompose(PolarSpectrum(torch.tensor([-1.0]), torch.tensor([0.0])))


@settings(max_examples=60, deadline=None)
@given(maps)
def test_polar_round_trip(x):
    s = dft2(torch.from_numpy(x))
    p = decompose(s)
    assert (p.amplitude >= 0).all()
    assert (p.phase > -math.pi).all() and (p.phase <= math.pi).all()
    r = recompose(p)
    big = p.amplitude > 1e-8
    if big.any():
        assert (r.real - s.real)[big].abs().max().item() < 1e-5
        assert (r.imag - s.imag)[big].abs().max().item() < 1e-5


def test_polar_round_trip_keeps_hermitian(rng):
    x = torch.from_numpy(rng.normal(size=(6, 8)))
    r = recompose(decompose(dft2(x)))
    flip_re = torch.roll(torch.flip(r.real, (0, 1)), (1, 1), (0, 1))
    flip_im = torch.roll(torch.flip(r.imag, (0, 1)), (1, 1), (0, 1))
    assert torch.allclose(r.real, flip_re, atol=1e-10)
    assert torch.allclose(r.imag, -flip_im, atol=1e-10)


def test_wrap_phase():
    x = torch.tensor([0.0, math.pi, -math.pi, 1.5 * math.pi, -1.5 * math.pi, 7.0], dtype=torch.float64)
    w = wrap_phase(x)
    assert (w > -math.pi).all() and (w <= math.pi).all()
    assert torch.allclose(torch.cos(w), torch.cos(x)) and torch.allclose(torch.sin(w), torch.sin(x), atol=1e-12)
    inside = torch.linspace(-3.1, 3.1, 101, dtype=torch.float64)
    assert torch.equal(wrap_phase(inside), inside)


def _enumerate_mask(H, W, rho):
    r = rho * min(H, W) / 2
    out = np.zeros((H, W))
    for u in range(H):
        for v in range(W):
            du = min(u, H - u)
            dv = min(v, W - v)
            if math.sqrt(du * du + dv * dv) <= r + 1e-12:
                out[u, v] = 1
    return out


def test_mask_examples():
    m0 = make_lowfreq_mask(8, 8, rho=0.0)
    assert m0.mask.sum() == 1 and m0.mask[0, 0] == 1
    m = make_lowfreq_mask(8, 8, rho=0.25)
    assert m.mask.sum() == 5
    assert {tuple(i) for i in torch.nonzero(m.mask).tolist()} == {(0, 0), (0, 1), (1, 0), (0, 7), (7, 0)}


@pytest.mark.parametrize("H,W,rho", [(8, 8, 1.0), (6, 10, 0.5), (9, 7, 0.3), (16, 12, 0.25)])
def test_mask_matches_enumeration(H, W, rho):
    np.testing.assert_array_equal(make_lowfreq_mask(H, W, rho).mask.numpy(), _enumerate_mask(H, W, rho))


@pytest.mark.parametrize("rho", [-0.1, 1.5])
def test_mask_rejects_rho(rho):
    with pytest.raises(ValidationError):
        make_lowfreq_mask(8, 8, rho)


def test_band_energy_constant():
    p = decompose(dft2(torch.full((1, 8, 8), 2.0, dtype=torch.float64)))
    low, high = band_energy(p, make_lowfreq_mask(8, 8, 0.25))
    assert high == 0.0 and low == pytest.approx((2.0 * 64) ** 2)


@settings(max_examples=40, deadline=None)
@given(maps, st.floats(0, 1))
def test_band_energy_partition(x, rho):
    p = decompose(dft2(torch.from_numpy(x)))
    low, high = band_energy(p, make_lowfreq_mask(*x.shape, rho))
    total = (p.amplitude.double() ** 2).sum().item()
    assert low >= 0 and high >= 0
    assert low + high == pytest.approx(total, rel=1e-12, abs=1e-300)


def test_band_energy_ramp_with_hole():
    H, W = 32, 48
    ramp = 1.0 + torch.linspace(0, 1, W, dtype=torch.float64)[None].repeat(H, 1) + \
        torch.linspace(0, 0.5, H, dtype=torch.float64)[:, None]
    holed = ramp.clone()
    holed[8:24, 12:36] = 0  # 25% of the area
    mask = make_lowfreq_mask(H, W, 0.25)
    lo0, hi0 = band_energy(decompose(dft2(ramp)), mask)
    lo1, hi1 = band_energy(decompose(dft2(holed)), mask)
    assert hi1 / (lo1 + hi1) > hi0 / (lo0 + hi0)
    assert lo1 < lo0
