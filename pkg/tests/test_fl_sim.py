import numpy as np
import pytest

import fedgen.fl_sim as fl_mod
from fedgen.data_ingest import ClientData, LabeledSet, distribute_to_clients
from fedgen.errors import DimensionError
from fedgen.fl_sim import FLConfig, aggregate, run_fl
from fedgen.rng import Stream
from fedgen.trainer import TrainerConfig, train_round


def test_aggregate_of_identical_models():
    w = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(aggregate([w, w.copy(), w.copy()]), w)


def test_aggregate_two_models():
    out = aggregate([np.array([1.0, 0.0]), np.array([0.0, 1.0])])
    assert np.allclose(out, [0.5, 0.5], atol=1e-15)


def test_aggregate_zeros():
    out = aggregate([np.zeros(4)] * 3)
    assert np.array_equal(out, np.zeros(4))


def test_aggregate_errors():
    with pytest.raises(ValueError):
        aggregate([])
    with pytest.raises(DimensionError):
        aggregate([np.zeros(2), np.zeros(3)])


def _feature_clients(K, n, R, dim=6, seed=0):
    s = Stream(seed)
    pool = LabeledSet(
        s.normals(K * n * dim).reshape(K * n, dim),
        np.where(s.uniforms(K * n) > 0.5, 1.0, -1.0),
    )
    return distribute_to_clients(pool, K, n, R, seed=seed + 1)


def test_config_validation():
    with pytest.raises(ValueError):
        FLConfig(K=0, R=1, n=10, trainer=TrainerConfig())
    with pytest.raises(ValueError):
        FLConfig(K=1, R=3, n=10, trainer=TrainerConfig())


def test_run_fl_client_count_mismatch():
    clients = _feature_clients(2, 10, 2)
    cfg = FLConfig(K=3, R=2, n=10, trainer=TrainerConfig())
    with pytest.raises(ValueError):
        run_fl(clients, cfg)


def test_run_fl_chunk_shape_mismatch():
    clients = _feature_clients(2, 10, 2)
    cfg = FLConfig(K=2, R=5, n=10, trainer=TrainerConfig())
    with pytest.raises(ValueError):
        run_fl(clients, cfg)


def test_single_client_single_round_equals_train_round():
    clients = _feature_clients(1, 8, 1)
    tc = TrainerConfig(epochs=3, eta0=0.05)
    cfg = FLConfig(K=1, R=1, n=8, trainer=tc, seed=77)
    final, trace = run_fl(clients, cfg)
    from fedgen.rng import derive_seed

    expected = train_round(
        np.zeros(6), clients[0].rounds[0], tc, derive_seed(77, 11, 0, 0)
    ).model
    assert np.array_equal(final, expected)
    assert len(trace) == 1


def test_mirrored_clients_hand_average():
    cfg = TrainerConfig(epochs=1, batch_size=1, eta0=0.1, l2=0.0)
    clients = [
        ClientData(0, [LabeledSet(np.array([[1.0, 0.0]]), np.array([1.0]))]),
        ClientData(1, [LabeledSet(np.array([[0.0, 1.0]]), np.array([-1.0]))]),
    ]
    final, _ = run_fl(clients, FLConfig(K=2, R=1, n=1, trainer=cfg, seed=3))
    assert np.allclose(final, [0.05, -0.05], atol=1e-15)


def test_identity_round_keeps_aggregate():
    """If round-2 chunks are margin-satisfied by the round-1 aggregate, the
    aggregate does not move."""
    cfg = TrainerConfig(epochs=1, batch_size=1, eta0=2.0, l2=0.0)
    # round 1: single active sample pushes w to (2, 0); round 2 chunk has margin 2
    chunks = [
        LabeledSet(np.array([[1.0, 0.0]]), np.array([1.0])),
        LabeledSet(np.array([[1.0, 0.0]]), np.array([1.0])),
    ]
    clients = [ClientData(0, chunks)]
    final, trace = run_fl(clients, FLConfig(K=1, R=2, n=2, trainer=cfg, seed=1))
    assert np.array_equal(trace.aggregates[0], np.array([2.0, 0.0]))
    assert np.array_equal(final, trace.aggregates[0])


def test_trace_aggregates_match_local_means():
    clients = _feature_clients(4, 12, 3)
    cfg = FLConfig(K=4, R=3, n=12, trainer=TrainerConfig(epochs=2, eta0=0.05), seed=5)
    final, trace = run_fl(clients, cfg)
    assert len(trace) == 3
    for locals_r, agg in zip(trace.locals_per_round, trace.aggregates):
        recomputed = np.mean(np.stack(locals_r), axis=0)
        assert np.all(np.abs(recomputed - agg) <= 1e-12)
    assert np.array_equal(final, trace.aggregates[-1])


def test_determinism_bitwise():
    clients = _feature_clients(3, 10, 2)
    cfg = FLConfig(K=3, R=2, n=10, trainer=TrainerConfig(epochs=2), seed=9)
    f1, t1 = run_fl(clients, cfg)
    f2, t2 = run_fl(clients, cfg)
    assert np.array_equal(f1, f2)
    for a, b in zip(t1.aggregates, t2.aggregates):
        assert np.array_equal(a, b)


def test_permutation_symmetry_with_travelling_seeds():
    """Reordering the client list must not change any aggregate, because
    per-round seeds follow client_id, not list position."""
    clients = _feature_clients(5, 8, 2)
    cfg = FLConfig(K=5, R=2, n=8, trainer=TrainerConfig(epochs=2, eta0=0.05), seed=13)
    _, trace_fwd = run_fl(clients, cfg)
    _, trace_rev = run_fl(list(reversed(clients)), cfg)
    for a, b in zip(trace_fwd.aggregates, trace_rev.aggregates):
        assert np.allclose(a, b, atol=1e-12)


def test_data_use_discipline(monkeypatch):
    """Every chunk is passed to the trainer exactly once, in its own round."""
    clients = _feature_clients(3, 9, 3)
    calls = []
    original = fl_mod.train_round

    def recording(w_init, chunk, cfg, seed):
        calls.append(chunk)
        return original(w_init, chunk, cfg, seed)

    monkeypatch.setattr(fl_mod, "train_round", recording)
    cfg = FLConfig(K=3, R=3, n=9, trainer=TrainerConfig(epochs=1), seed=2)
    run_fl(clients, cfg)

    assert len(calls) == 9  # K * R calls, one per (client, round)
    for r in range(3):
        round_calls = calls[r * 3 : (r + 1) * 3]
        expected = [client.rounds[r] for client in clients]
        for got, want in zip(round_calls, expected):
            assert got is want
    assert len({id(c) for c in calls}) == 9  # no chunk trained twice
