import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from aigsat.circuit import AigBuilder
from aigsat.model import (
    CheckpointError,
    GraphBatch,
    ModelParams,
    NonFiniteLoss,
    TrainConfig,
    _Schedule,
    apply_mask,
    forward_prop,
    gate_one_hot,
    grad_check,
    gradcheck_circuit,
    gru_update,
    init_hidden,
    load_checkpoint,
    loss,
    predict,
    prediction_error,
    reverse_prop,
    run_model,
    save_checkpoint,
    train,
)
from aigsat.sim import DatasetRecord, SimProfile, exact_profile, po_mask
from helpers import and2, build_random, circuits, phi_aig

D = 16


def params(d: int = D, seed: int = 0) -> ModelParams:
    return ModelParams(d, seed)


def identity_point(p: ModelParams) -> ModelParams:
    """Zero every GRU weight and saturate the update gate, so h' = h."""
    with torch.no_grad():
        for layer in (p.fwd, p.rev):
            for t in (layer.gru.weight_ih, layer.gru.weight_hh, layer.gru.bias_ih, layer.gru.bias_hh):
                t.zero_()
            layer.gru.bias_ih[p.hidden_dim : 2 * p.hidden_dim] = 100.0
    return p


def not_of_pi():
    b = AigBuilder(1)
    return b.build(b.not_(b.pi(0)))


# --- masking and one-hot ----------------------------------------------------


def test_apply_mask_rows():
    h = torch.randn(3, D)
    out = apply_mask(h, [1, 0, -1])
    assert torch.equal(out[0], torch.ones(D))
    assert torch.equal(out[1], h[1])
    assert torch.equal(out[2], -torch.ones(D))


def test_gate_one_hot_exactly_one():
    c = phi_aig()
    f = gate_one_hot(c)
    assert (f.sum(axis=1) == 1).all()
    assert (f[: c.num_pis, 0] == 1).all()


def test_params_do_not_share_storage():
    p = params()
    fwd = {t.data_ptr() for t in p.fwd.parameters()}
    rev = {t.data_ptr() for t in p.rev.parameters()}
    assert not fwd & rev
    assert not torch.equal(p.fwd.w1, p.rev.w1)


def test_params_leave_global_rng_alone():
    torch.manual_seed(5)
    a = torch.rand(1)
    torch.manual_seed(5)
    params(seed=3)
    assert torch.equal(torch.rand(1), a)


# --- attention ----------------------------------------------------------------


def test_single_predecessor_weight_is_one():
    c = not_of_pi()
    att = []
    forward_prop(GraphBatch([c]), torch.randn(2, D), params().fwd, att)
    (_, _, alpha), = att
    assert alpha.tolist() == [1.0]


def test_identical_predecessors_split_evenly():
    c = and2()
    h = torch.randn(3, D)
    h[1] = h[0]
    att = []
    forward_prop(GraphBatch([c]), h, params().fwd, att)
    (_, _, alpha), = att
    assert torch.allclose(alpha, torch.tensor([0.5, 0.5]))


@settings(max_examples=30, deadline=None)
@given(circuits(max_pis=6, max_gates=25), st.integers(0, 2**16))
def test_attention_normalised(c, seed):
    p = params(seed=seed % 7)
    g = GraphBatch([c])
    h = init_hidden(c.num_nodes, D, seed)
    att = []
    h = forward_prop(g, h, p.fwd, att)
    reverse_prop(g, h, p.rev, att)
    for nodes, dst, alpha in att:
        sums = torch.zeros(len(nodes)).index_add(0, dst, alpha)
        assert torch.allclose(sums, torch.ones(len(nodes)), atol=1e-6)


# --- propagation ----------------------------------------------------------------


def test_identity_point_forward_and_reverse():
    p = identity_point(params())
    c = phi_aig()
    g = GraphBatch([c])
    h = apply_mask(init_hidden(c.num_nodes, D, 1), po_mask(c))
    assert torch.equal(forward_prop(g, h, p.fwd), h)
    assert torch.equal(reverse_prop(g, h, p.rev), h)


def test_gru_update_matches_torch_cell():
    cell = torch.nn.GRUCell(D + 3, D)
    x, h = torch.randn(5, D + 3), torch.randn(5, D)
    assert torch.allclose(gru_update(cell, x, h), cell(x, h), atol=1e-6)


def test_pis_keep_state_in_forward_pass():
    c = phi_aig()
    h = torch.randn(c.num_nodes, D)
    out = forward_prop(GraphBatch([c]), h, params().fwd)
    assert torch.equal(out[: c.num_pis], h[: c.num_pis])


def test_po_keeps_prototype_through_reverse():
    c = phi_aig()
    g = GraphBatch([c])
    m = po_mask(c)
    h = apply_mask(forward_prop(g, apply_mask(torch.randn(c.num_nodes, D), m), params().fwd), m)
    out = reverse_prop(g, h, params().rev)
    assert torch.equal(out[c.po], torch.ones(D))


def test_pi_feeding_po_sees_only_prototype():
    c = not_of_pi()
    p = params()
    g = GraphBatch([c])
    h = apply_mask(torch.randn(2, D), [0, 1])
    att = []
    out = reverse_prop(g, h, p.rev, att)
    (nodes, _, alpha), = att
    assert nodes.tolist() == [0] and alpha.tolist() == [1.0]
    x = torch.cat([torch.ones(1, D), torch.tensor([[1.0, 0.0, 0.0]])], dim=1)
    assert torch.allclose(out[0], gru_update(p.rev.gru, x, h[:1])[0])


def permute_within_levels(sched: _Schedule, rng) -> _Schedule:
    nodes, src, dst = [], [], []
    for n, s, d in zip(sched.nodes, sched.src, sched.dst):
        perm = torch.from_numpy(rng.permutation(len(n)))
        inv = torch.empty_like(perm)
        inv[perm] = torch.arange(len(n))
        edge_perm = torch.from_numpy(rng.permutation(len(s)))
        nodes.append(n[perm])
        src.append(s[edge_perm])
        dst.append(inv[d[edge_perm]])
    return _Schedule(nodes, src, dst)


@settings(max_examples=30, deadline=None)
@given(circuits(max_pis=6, max_gates=30), st.integers(0, 2**16))
def test_forward_invariant_to_order_within_level(c, seed):
    p = params()
    g = GraphBatch([c])
    h = init_hidden(c.num_nodes, D, seed)
    ref = forward_prop(g, h, p.fwd)
    g.forward = permute_within_levels(g.forward, np.random.default_rng(seed))
    assert torch.allclose(forward_prop(g, h, p.fwd), ref, atol=1e-6)


def test_reverse_parameters_never_touch_forward_output():
    c = build_random(np.random.default_rng(3), 5, 20)
    p = params()
    g = GraphBatch([c])
    h = init_hidden(c.num_nodes, D, 0)
    ref = forward_prop(g, h, p.fwd)
    with torch.no_grad():
        for t in p.rev.parameters():
            t.add_(torch.randn_like(t))
    assert torch.equal(forward_prop(g, h, p.fwd), ref)


@settings(max_examples=30, deadline=None)
@given(circuits(max_pis=5, max_gates=20), st.integers(0, 2**16))
def test_prototypes_pinned_after_every_mask(c, seed):
    rng = np.random.default_rng(seed)
    m = np.zeros(c.num_nodes, np.int8)
    m[: c.num_pis] = rng.integers(-1, 2, c.num_pis)
    m[c.po] = 1
    p = params()
    g = GraphBatch([c])
    pos, neg = m == 1, m == -1
    h = apply_mask(init_hidden(c.num_nodes, D, seed), m)
    for layer, step in ((p.fwd, forward_prop), (p.rev, reverse_prop)):
        assert (h[pos] == 1).all() and (h[neg] == -1).all()
        h = apply_mask(step(g, h, layer), m)
    assert (h[pos] == 1).all() and (h[neg] == -1).all()


# --- prediction ----------------------------------------------------------------


def test_predict_range_override_and_determinism():
    c = phi_aig()
    m = po_mask(c)
    m[0] = 1
    p = params()
    out = predict(c, m, p, seed=4)
    free = m == 0
    assert ((out[free] > 0) & (out[free] < 1)).all()
    assert out[0] == 1.0 and out[c.po] == 1.0
    assert np.array_equal(out, predict(c, m, p, seed=4))
    assert np.array_equal(out, predict(c, m, params(), seed=4))


def test_predict_depends_on_seed():
    c = phi_aig()
    p = params()
    assert not np.array_equal(predict(c, po_mask(c), p, 0), predict(c, po_mask(c), p, 1))


def test_predict_masked_negative():
    c = phi_aig()
    m = po_mask(c)
    m[1] = -1
    assert predict(c, m, params())[1] == 0.0


# --- loss ------------------------------------------------------------------------


def record(c, mask, theta):
    return DatasetRecord(c, np.asarray(mask, np.int8), SimProfile(np.asarray(theta, float), 100))


def test_loss_zero_at_labels():
    r = record(and2(), [0, 0, 1], [0.6, 0.6, 1.0])
    assert loss([0.6, 0.6, 0.2], r) == 0.0


def test_loss_single_free_node():
    r = record(and2(), [1, -1, 0], [1.0, 0.0, 0.8])
    assert loss([0.0, 1.0, 0.3], r) == pytest.approx(0.5)


def test_loss_all_masked():
    r = record(and2(), [1, 1, 1], [1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        loss([1.0, 1.0, 1.0], r)


# --- training --------------------------------------------------------------------


def phi_record():
    c = phi_aig()
    m = po_mask(c)
    return DatasetRecord(c, m, exact_profile(c, m))


def test_overfit_single_record():
    r = phi_record()
    cfg = TrainConfig(epochs=500, batch_size=1, learning_rate=1e-3, hidden_dim=D)
    p, curve = train([r], cfg, val=[r])
    assert len(curve) == 500
    assert min(row["val_pe"] for row in curve) <= 0.02


def test_train_writes_log(tmp_path):
    r = phi_record()
    _, curve = train([r], TrainConfig(epochs=3, hidden_dim=D), val=[r], log_path=tmp_path / "log.csv")
    lines = (tmp_path / "log.csv").read_text().splitlines()
    assert lines[0] == "epoch,train_pe,val_pe,wall_s"
    assert len(lines) == 4 and [row["epoch"] for row in curve] == [1, 2, 3]


def test_train_deterministic():
    r = phi_record()
    cfg = TrainConfig(epochs=5, hidden_dim=D, learning_rate=1e-3)
    a, _ = train([r], cfg, val=[r])
    b, _ = train([r], cfg, val=[r])
    for (n, x), (_, y) in zip(a.state_dict().items(), b.state_dict().items()):
        assert torch.equal(x, y), n


def test_non_finite_loss_reports_batch():
    p = params()
    with torch.no_grad():
        p.regressor[0].bias.fill_(float("nan"))
    with pytest.raises(NonFiniteLoss) as err:
        train([phi_record()], TrainConfig(epochs=1, hidden_dim=D), val=[], params=p)
    assert err.value.batch_id == 0


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)


def test_prediction_error_matches_loss():
    r = phi_record()
    p = params()
    assert prediction_error(p, [r], seed=3) == pytest.approx(loss(predict(r.circuit, r.mask, p, 3), r), abs=1e-6)


# --- gradient check ------------------------------------------------------------


@pytest.fixture(scope="module")
def gradcheck_report():
    return grad_check(params(64), gradcheck_circuit())


def test_gradcheck_circuit_shape():
    c = gradcheck_circuit()
    assert c.num_nodes == 6
    assert {n.kind.name for n in c.nodes} >= {"PI", "AND2", "NOT"}


def test_gradcheck_every_group(gradcheck_report):
    assert gradcheck_report.passed
    groups = {name.split(".")[0] for name in gradcheck_report.per_parameter}
    assert groups == {"fwd", "rev", "regressor"}
    assert all(v <= 1e-3 for v in gradcheck_report.per_parameter.values())


def test_gradcheck_negative_control():
    rep = grad_check(params(), gradcheck_circuit(), corrupt="fwd.gru.weight_hh")
    assert rep.per_parameter["fwd.gru.weight_hh"] > 1e-1
    assert not rep.passed


def test_gradcheck_lone_pi_zero_gradients():
    b = AigBuilder(1)
    c = b.build(b.pi(0))
    rep = grad_check(params(), c, mask=[0])
    assert rep.passed
    assert all(v == 0.0 for k, v in rep.per_parameter.items() if k.startswith("rev."))


def test_gradcheck_all_masked():
    with pytest.raises(ValueError):
        grad_check(params(), and2(), mask=[1, 1, 1])


# --- checkpoints ---------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path):
    p = params(32, seed=9)
    save_checkpoint(p, tmp_path / "m.ckpt")
    q = load_checkpoint(tmp_path / "m.ckpt")
    c = phi_aig()
    assert np.array_equal(predict(c, po_mask(c), p, 2), predict(c, po_mask(c), q, 2))


def test_checkpoint_truncated(tmp_path):
    path = tmp_path / "m.ckpt"
    save_checkpoint(params(), path)
    path.write_bytes(path.read_bytes()[:-10])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_corrupted(tmp_path):
    path = tmp_path / "m.ckpt"
    save_checkpoint(params(), path)
    raw = bytearray(path.read_bytes())
    raw[-1] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_dimension_mismatch(tmp_path):
    path = tmp_path / "m.ckpt"
    save_checkpoint(params(32), path)
    with pytest.raises(CheckpointError):
        load_checkpoint(path, hidden_dim=64)


def test_checkpoint_not_a_checkpoint(tmp_path):
    path = tmp_path / "m.ckpt"
    path.write_bytes(b"hello\n")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
