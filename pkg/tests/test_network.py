import pytest
import torch

from s2ml import ValidationError
from s2ml.harness.gradcheck import check_gradients, depth_head_case, network_case
from s2ml.network import (
    S2ML,
    S2MLConfig,
    apply_variant,
    count_parameters,
    load_checkpoint,
    save_checkpoint,
    wiring_holds,
    zero_fusion_params,
)
from s2ml.spectra import ComplexSpectrum

SMALL = dict(channels=8, pairs=2, blocks_per_pair=1)


def inputs(B=1, H=32, W=48, dtype=torch.float32):
    g = torch.Generator().manual_seed(3)
    rgb = torch.rand(B, 3, H, W, generator=g, dtype=dtype)
    raw = torch.rand(B, 1, H, W, generator=g, dtype=dtype) * 5
    raw[..., 8:16, 8:24] = 0
    return rgb, raw


def test_feature_shapes_full_size():
    m = S2ML(S2MLConfig(blocks_per_pair=1))
    rgb, raw = inputs(1, 192, 288)
    with torch.no_grad():
        f_rgb, f_depth = m.embed(rgb, raw)
        out = m(rgb, raw)
    assert f_rgb.shape == f_depth.shape == (1, 32, 48, 72)
    assert out.shape == (1, 1, 192, 288)


def test_deterministic_output():
    torch.manual_seed(5)
    a = S2ML(S2MLConfig(**SMALL))
    torch.manual_seed(5)
    b = S2ML(S2MLConfig(**SMALL))
    rgb, raw = inputs()
    with torch.no_grad():
        assert torch.equal(a(rgb, raw), b(rgb, raw))


def test_all_zero_depth_is_finite():
    m = S2ML(S2MLConfig(**SMALL))
    rgb, _ = inputs()
    with torch.no_grad():
        out = m(rgb, torch.zeros(1, 1, 32, 48))
    assert torch.isfinite(out).all()


def test_pair_parameter_count():
    one = S2ML(S2MLConfig(**{**SMALL, "pairs": 1}))
    two = S2ML(S2MLConfig(**SMALL))
    assert count_parameters(two) - count_parameters(one) == count_parameters(two.pair_list[1])


@pytest.mark.parametrize("bad", [
    dict(downsample=3), dict(variant="V7"), dict(alpha=0.0), dict(rho=1.5), dict(pairs=0),
])
def test_config_rejects(bad):
    with pytest.raises(ValidationError):
        S2MLConfig(**bad)


def test_config_unknown_key():
    with pytest.raises(ValidationError):
        S2MLConfig.from_dict({"chanels": 8})


def test_input_validation():
    m = S2ML(S2MLConfig(**SMALL))
    rgb, raw = inputs()
    with pytest.raises(ValidationError):
        m(rgb[:, :2], raw)
    with pytest.raises(ValidationError):
        m(rgb, raw[..., :40])
    with pytest.raises(ValidationError):
        m(rgb[..., :30, :], raw[..., :30, :])


def test_wiring_between_pairs():
    m = S2ML(S2MLConfig(**{**SMALL, "pairs": 3}))
    with torch.no_grad():
        f, rec = m.features(*inputs(), trace=True)
    assert len(rec) == 3 and wiring_holds(rec)
    assert f is rec[-1]["f_out"]
    assert isinstance(rec[1]["rgb_side_in"], ComplexSpectrum)
    assert not isinstance(rec[0]["rgb_side_in"], ComplexSpectrum)
    # a broken chain is detected
    rec[2]["depth_in"] = rec[0]["f_out"]
    assert not wiring_holds(rec)


def test_residual_maps():
    m = S2ML(S2MLConfig(**SMALL))
    rgb, raw = inputs()
    r_ff, r_fi = m.residual_maps(rgb, raw, 2)
    assert r_ff.shape == r_fi.shape == (1, 1, 32, 48)
    with pytest.raises(ValidationError):
        m.residual_maps(rgb, raw, 3)


@pytest.mark.parametrize("variant", ["full", "V1", "V2", "V3", "V4", "V5"])
def test_variants_same_output_shape(variant):
    m = apply_variant(S2ML(S2MLConfig(**SMALL)), variant, seed=0)
    with torch.no_grad():
        assert m(*inputs()).shape == (1, 1, 32, 48)


def test_apply_variant_keeps_other_weights():
    base = S2ML(S2MLConfig(**SMALL))
    v = apply_variant(base, "V3", seed=1)
    assert v.cfg.variant == "V3" and base.cfg.variant == "full"
    assert torch.equal(v.head.conv2.weight, base.head.conv2.weight)
    assert torch.equal(v.pair_list[0].spatial.agg_conv.weight, base.pair_list[0].spatial.agg_conv.weight)


def test_zero_fusion_params():
    m = zero_fusion_params(S2ML(S2MLConfig(**SMALL)))
    for name, p in m.named_parameters():
        if ".freq." in name:
            assert torch.count_nonzero(p) == 0


@pytest.mark.parametrize("dtype", [torch.float32, torch.float64])
def test_checkpoint_round_trip(tmp_path, dtype):
    m = S2ML(S2MLConfig(**{**SMALL, "variant": "V5"})).to(dtype)
    path = tmp_path / "m.npz"
    save_checkpoint(m, path, extra={"step": 7})
    m2, manifest = load_checkpoint(path)
    assert manifest["extra"] == {"step": 7} and manifest["config"]["variant"] == "V5"
    for (k, a), (k2, b) in zip(m.state_dict().items(), m2.state_dict().items()):
        assert k == k2 and torch.equal(a, b)
    rgb, raw = inputs(dtype=dtype)
    with torch.no_grad():
        assert torch.equal(m(rgb, raw), m2(rgb, raw))


def test_depth_head_gradcheck():
    loss, tensors = depth_head_case(seed=0)
    rep = check_gradients(loss, tensors, n_samples=30)
    assert rep.ok, rep.failures


@pytest.mark.slow
def test_network_gradcheck():
    loss, tensors = network_case(seed=0)
    rep = check_gradients(loss, tensors, n_samples=48)
    assert rep.ok, rep.failures
