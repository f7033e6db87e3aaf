import numpy as np
import pytest

from femmir.harg import HARG, construct_harg
from femmir.scorer import (ScorerConfig, ScorerModel, TrainConfig, grad_check, predict_pairs,
                           predict_similarity, train)
from femmir.retrieval import synth_corpus

from conftest import person


def graphs():
    return [construct_harg(r) for r in synth_corpus(5, 6, with_clothes=True)]


def permuted(g: HARG, seed: int) -> HARG:
    """Same graph with node ids shuffled."""
    perm = np.random.default_rng(seed).permutation(len(g.nodes))
    perm = [0] + [int(p) for p in perm if p != 0]  # keep the root first
    new_id = {old: new for new, old in enumerate(perm)}
    from femmir.harg import HargEdge, HargNode
    nodes = [HargNode(new_id[g.nodes[old].id], n.level, n.label, n.is_leaf, n.kind)
             for old in perm for n in [g.nodes[old]]]
    edges = [HargEdge(new_id[e.src], new_id[e.dst], e.label, e.relation, e.tree) for e in reversed(g.edges)]
    return HARG(g.sample_id, nodes, edges, {new_id[k]: new_id[v] for k, v in g.tree_parent.items()})


def test_gradients_match_finite_differences():
    g = graphs()
    m = ScorerModel.init(ScorerConfig(seed=3))
    errors = grad_check(m, [(g[0], g[1], 0.6), (g[2], g[2], 1.0), (g[3], g[4], 0.2)])
    assert set(errors) == set(m.names())
    assert max(errors.values()) < 1e-4, errors


def test_prediction_range_and_node_order_invariance():
    g = graphs()
    m = ScorerModel.init()
    s = predict_similarity(g[0], g[1], m)
    assert 0 < s < 1
    for seed in range(3):
        assert predict_similarity(permuted(g[0], seed), permuted(g[1], seed + 7), m) == pytest.approx(s, abs=1e-12)


def test_overfit_one_pair_monotone():
    a, b = construct_harg(person("a", gender="male")), construct_harg(person("b", gender="female"))
    m, rep = train([(a, b, 0.3)], TrainConfig(lr=0.01, epochs=500, seed=1, log_every=50))
    losses = [l for _, l in rep.history]
    assert all(x > y for x, y in zip(losses, losses[1:]))
    assert rep.final_loss < 1e-4
    assert predict_similarity(a, b, m) == pytest.approx(0.3, abs=1e-2)


def test_save_load_bit_identical(tmp_path):
    g = graphs()
    m, _ = train([(g[0], g[1], 0.4), (g[1], g[2], 0.9)], TrainConfig(epochs=5, seed=2))
    path = tmp_path / "m.json"
    m.save(path)
    back = ScorerModel.load(path)
    for name in m.names():
        assert np.array_equal(m.params[name], back.params[name])
    pairs = [(g[i], g[j]) for i in range(4) for j in range(4)]
    assert np.array_equal(predict_pairs(pairs, m), predict_pairs(pairs, back))
    assert back.to_json() == m.to_json()


def test_training_is_seed_deterministic():
    g = graphs()
    data = [(g[i], g[j], 0.1 * (i + j)) for i in range(4) for j in range(3)]
    m1, r1 = train(data, TrainConfig(epochs=10, batch_size=4, seed=9))
    m2, r2 = train(data, TrainConfig(epochs=10, batch_size=4, seed=9))
    assert m1.to_json() == m2.to_json() and r1 == r2


def test_bad_inputs():
    g = graphs()
    with pytest.raises(ValueError):
        TrainConfig(lr=0)
    with pytest.raises(ValueError):
        train([], TrainConfig())
    with pytest.raises(ValueError):
        train([(g[0], g[1], 1.5)])
    with pytest.raises(ValueError):
        ScorerModel.from_json('{"format": "other"}')
