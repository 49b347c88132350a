import numpy as np
import pytest
from scipy.special import expit

from pfnet import tensor as T
from pfnet.checkpoint import load_checkpoint, save_checkpoint
from pfnet.data import SeriesMatrix, build_samples, normalize
from pfnet.errors import ConfigError, DimensionError
from pfnet.model import LossWeights, PFNetConfig, PFNetModel, ifm_fuse, param_count, triple_loss, variant_forward
from pfnet.optim import Adam
from pfnet.tensor import Tensor

from oracles import conv1d_loops, numeric_grad, rel_error


def ref_highway_cnn(params, prefix, x, depth, hw):
    """Highway-CNN forward on one ``n x L`` window from raw parameter arrays."""
    h = x
    for i in range(depth):
        h = np.maximum(conv1d_loops(h, params[f"{prefix}.cnn.conv{i}.weight"], params[f"{prefix}.cnn.conv{i}.bias"]), 0)
    transform = h.ravel() @ params[f"{prefix}.cnn.head.weight"] + params[f"{prefix}.cnn.head.bias"]
    g = expit(x.ravel() @ params[f"{prefix}.highway.gate.weight"] + params[f"{prefix}.highway.gate.bias"])
    carry = x[:, -hw:] @ params[f"{prefix}.highway.carry.weight"][:, 0] + params[f"{prefix}.highway.carry.bias"][0]
    return transform * g + carry * (1 - g)


def ref_mlp(params, x):
    h = np.maximum(x @ params["sfpm.mlp.fc0.weight"] + params["sfpm.mlp.fc0.bias"], 0)
    return h @ params["sfpm.mlp.fc1.weight"] + params["sfpm.mlp.fc1.bias"]


def _randomize(model, rng, scale=0.5):
    for p in model.params.values():
        p.data = rng.normal(scale=scale, size=p.shape)


def _sample(rng, n, P):
    raw = rng.normal(size=(n, P))
    return raw, np.diff(raw, axis=1), raw[:, -1].copy()


@pytest.fixture
def cfg():
    return PFNetConfig(n=3, window=10, horizon=3, depth=2, channels=4, hw=4, mlp_hidden=5, seed=11)


def test_ltpm_shape_and_zero_propagation(cfg):
    model = PFNetModel(cfg)
    assert model.ltpm_forward(np.ones((3, 10))).shape == (3,)
    for p in model.params.values():
        if p.name.endswith("bias"):
            p.data[:] = 0.0
    model.params["ltpm.highway.gate.bias"].data[:] = -50.0
    np.testing.assert_allclose(model.ltpm_forward(np.zeros((3, 10))).data, 0.0, atol=1e-15)


def test_ltpm_matches_layer_oracles(cfg, rng):
    model = PFNetModel(cfg)
    _randomize(model, rng)
    raw, _, _ = _sample(rng, 3, 10)
    params = model.state()
    np.testing.assert_allclose(model.ltpm_forward(raw).data, ref_highway_cnn(params, "ltpm", raw, 2, 4), atol=1e-12)


def test_sfpm_branches(cfg, rng):
    model = PFNetModel(cfg)
    _randomize(model, rng)
    raw, diff, last = _sample(rng, 3, 10)
    params = model.state()
    expected = ref_highway_cnn(params, "sfpm.hcnn", diff, 2, 4) + ref_mlp(params, last)
    np.testing.assert_allclose(model.sfpm_forward(diff, last).data, expected, atol=1e-12)
    for k in ("sfpm.mlp.fc0.weight", "sfpm.mlp.fc0.bias", "sfpm.mlp.fc1.weight", "sfpm.mlp.fc1.bias"):
        model.params[k].data[:] = 0.0
    np.testing.assert_allclose(model.sfpm_forward(diff, last).data, ref_highway_cnn(params, "sfpm.hcnn", diff, 2, 4),
                               atol=1e-12)
    for p in model.params.values():
        if p.name.startswith("sfpm"):
            p.data[:] = 0.0
    np.testing.assert_array_equal(model.sfpm_forward(diff, last).data, 0.0)


def test_ifm_fuse():
    assert ifm_fuse(Tensor([1.0]), Tensor([0.5])).data.tolist() == [1.5]
    a = Tensor([0.3, -2.0])
    np.testing.assert_array_equal(ifm_fuse(a, Tensor([0.0, 0.0])).data, a.data)
    with pytest.raises(DimensionError):
        ifm_fuse(Tensor([1.0]), Tensor([1.0, 2.0]))


def test_ifm_fuse_exact_addition(rng):
    a, b = rng.normal(size=1000) * 10, rng.normal(size=1000)
    fused = ifm_fuse(Tensor(a), Tensor(b)).data
    assert fused.tobytes() == (a + b).tobytes()
    assert np.abs(fused - a - b).max() <= 2 * np.finfo(float).eps * np.abs(fused).max()


def test_triple_loss_cases():
    zero = (Tensor([1.0]), Tensor([2.0]), Tensor([3.0]))
    assert triple_loss(zero, zero).item() == 0.0
    preds = (Tensor([1.0]), Tensor([2.0]), Tensor([3.0]))
    targets = (Tensor([0.0]), Tensor([0.0]), Tensor([0.0]))
    assert triple_loss(preds, targets, LossWeights(0.5, 0.25)).item() == 2.75
    assert triple_loss(preds, targets, LossWeights(0.0, 0.0)).item() == T.l1_loss(preds[0], targets[0]).item()
    with pytest.raises(ConfigError):
        LossWeights(-1.0, 0.0)


def test_variant_structural_independence(rng):
    base = dict(n=2, window=8, horizon=3, depth=1, channels=3, hw=4, mlp_hidden=4, seed=2)
    raw, diff, last = _sample(rng, 2, 8)
    ltpm = PFNetModel(PFNetConfig(kind="ltpm_only", **base))
    _randomize(ltpm, rng)
    a = ltpm.forward(raw, diff, last)[0].data
    b = ltpm.forward(raw, rng.normal(size=diff.shape), rng.normal(size=last.shape))[0].data
    assert a.tobytes() == b.tobytes()

    xt = PFNetModel(PFNetConfig(kind="pfnet_xt", **base))
    _randomize(xt, rng)
    a = xt.forward(raw, diff, last)[0].data
    b = xt.forward(raw, diff, rng.normal(size=last.shape))[0].data
    assert a.tobytes() == b.tobytes()

    full = PFNetModel(PFNetConfig(kind="pfnet", **base))
    _randomize(full, rng)
    expected = ifm_fuse(full.ltpm_forward(raw), full.sfpm_forward(diff, last)).data
    np.testing.assert_array_equal(variant_forward("pfnet", full, _as_sample(raw, diff, last)).data, expected)
    with pytest.raises(ConfigError):
        variant_forward("pfnet_xt", full, _as_sample(raw, diff, last))


def _as_sample(raw, diff, last):
    from pfnet.data import WindowedSample

    z = np.zeros(raw.shape[0])
    return WindowedSample(raw, diff, last, z, z, z, 0)


def test_ltpm_and_sfpm_parameters_disjoint(cfg):
    model = PFNetModel(cfg)
    ltpm = {id(p) for p in model.ltpm.params.values()}
    sfpm = {id(p) for p in model.sfpm_cnn.params.values()} | {id(p) for p in model.sfpm_mlp.params.values()}
    assert not ltpm & sfpm
    assert len(model.params) == len(ltpm) + len(sfpm)


@pytest.mark.parametrize("kind", ["pfnet", "ltpm_only", "pfnet_xt"])
def test_param_count_closed_form(kind):
    c = PFNetConfig(n=4, window=16, horizon=3, kind=kind, depth=2, channels=6, hw=8, mlp_hidden=7)
    assert PFNetModel(c).num_parameters() == param_count(c)


def test_window_too_short_fails_at_build():
    with pytest.raises(ConfigError):
        PFNetModel(PFNetConfig(n=2, window=4, horizon=3, depth=2, hw=2))


def _batch(rng, n, P, B=6):
    from pfnet.data import SampleSet

    raw = rng.normal(size=(B, n, P))
    trend = rng.normal(size=(B, n))
    fluct = rng.normal(size=(B, n))
    return SampleSet(raw, np.diff(raw, axis=2), raw[:, :, -1].copy(), trend, fluct, trend + fluct, np.arange(B))


def test_end_to_end_triple_loss_gradient(rng):
    cfg = PFNetConfig(n=2, window=8, horizon=3, depth=1, channels=3, hw=4, mlp_hidden=4, c1=0.5, c2=0.7, seed=3)
    model = PFNetModel(cfg)
    batch = _batch(rng, 2, 8)
    names = list(model.params)
    model.loss(batch).backward()
    analytic = [model.params[k].grad for k in names]

    def f(*arrays):
        probe = PFNetModel(cfg)
        probe.load_state(dict(zip(names, arrays)))
        return probe.loss(batch).item()

    numeric = numeric_grad(f, [model.params[k].data.copy() for k in names])
    for name, a, num in zip(names, analytic, numeric):
        assert rel_error(a, num) < 1e-4, name


def test_zero_fluctuation_branch_reduces_to_ltpm(rng):
    """c1=c2=0 with a frozen all-zero SFPM trains exactly like LTPM on x[t+h]."""
    base = dict(n=2, window=8, horizon=3, depth=1, channels=3, hw=4, mlp_hidden=4, seed=9)
    pf = PFNetModel(PFNetConfig(kind="pfnet", c1=0.0, c2=0.0, **base))
    lt = PFNetModel(PFNetConfig(kind="ltpm_only", **base))
    for name, p in pf.params.items():
        if name.startswith("sfpm"):
            p.data[:] = 0.0
    opt_pf = Adam({k: v for k, v in pf.params.items() if k.startswith("ltpm")})
    opt_lt = Adam(lt.params)
    for step in range(15):
        batch = _batch(np.random.default_rng(step), 2, 8)
        loss_pf, loss_lt = pf.loss(batch), lt.loss(batch)
        assert abs(loss_pf.item() - loss_lt.item()) <= 1e-10
        loss_pf.backward()
        loss_lt.backward()
        opt_pf.step()
        opt_lt.step()
        for p in pf.params.values():
            p.grad = None


def test_checkpoint_round_trip_exact(tmp_path, cfg, rng):
    model = PFNetModel(cfg)
    _randomize(model, rng)
    scale = rng.uniform(0.1, 10, size=3)
    path = tmp_path / "ckpt.txt"
    save_checkpoint(path, {"model": "pfnet", "n": 3, "c1": 0.1, "seed": 4}, scale, model.state())
    config, scale2, params = load_checkpoint(path)
    assert config == {"model": "pfnet", "n": 3, "c1": 0.1, "seed": 4}
    assert scale2.tobytes() == scale.tobytes()
    for k, v in model.state().items():
        assert params[k].shape == v.shape and params[k].tobytes() == v.tobytes()
    header = path.read_text().splitlines()
    assert "ltpm.cnn.conv0.weight 3 4 3 3" in header


def test_predict_matches_forward(cfg, rng):
    s = normalize(SeriesMatrix(rng.normal(size=(3, 200)).cumsum(axis=1)))
    samples = build_samples(s, 10, 3)
    model = PFNetModel(cfg)
    preds = model.predict(samples.test, batch_size=7)
    np.testing.assert_allclose(preds[4], model.forward(*(samples.test.raw[4], samples.test.diff[4], samples.test.last[4]))[0].data,
                               atol=1e-12)
