"""Tests for the encoder, the graph transformer layers, the predictor and checkpoints"""
import numpy as np
import pytest

from conftest import TOY_EDGES, make_toy_graph, random_graph, toy_features, toy_table
from egpmda.explain.explain import incoming_bfs
from egpmda.graph.features import NodeFeatures
from egpmda.graph.store import build_graph, graph_variant
from egpmda.graph.types import NODE_TYPES, NodeTable, NodeType, edge_source
from egpmda.model.checkpoint import load_checkpoint, save_checkpoint
from egpmda.model.features import block_lengths, embed_sequence_1mer, sequence_tensor
from egpmda.model.network import (
    EgpmdaModel, ModelConfig, forward, loss_and_grads, loss_value, predict_pair, score_pairs
)
from egpmda.numerics.optim import check_gradients, make_rng
from egpmda.utils.config import load_run_config
from egpmda.utils.errors import CheckpointError, ConfigError, LoadError, NodeNotFound, ShapeError

TOY_CONFIG = ModelConfig(dim=8, layers=2, heads=2, kernel_size=2)
PAIRS = (np.array([0, 1, 2, 0]), np.array([0, 2, 1, 2]), np.array([1.0, 1.0, 0.0, 0.0]))


def test_embed_sequence_1mer_pads_with_placeholder():
    out = embed_sequence_1mer('AG', 4)
    np.testing.assert_array_equal(out[0], [1, 0, 0, 0])
    np.testing.assert_array_equal(out[1], [0, 0, 0, 1])
    np.testing.assert_array_equal(out[2:], np.full((2, 4), 0.25))
    with pytest.raises(ShapeError) as err:
        embed_sequence_1mer('AUCGA', 4)
    assert err.value.code == 'SEQUENCE_TOO_LONG'
    with pytest.raises(LoadError):
        embed_sequence_1mer('AX', 4)


def test_block_lengths():
    assert block_lengths((6, 4, 3), 2) == (6, 4, 3)
    assert block_lengths((0, 0, 0), 8) == (1, 1, 6)
    assert block_lengths((2, 1, 0), 3) == (2, 1, 1)


def test_sequence_tensor_concatenates_blocks():
    out = sequence_tensor((('A', 'U', ''),), (2, 1, 1))
    assert out.shape == (1, 4, 4)
    np.testing.assert_array_equal(out[0, 1], [0.25] * 4)
    np.testing.assert_array_equal(out[0, 3], [0.25] * 4)


def test_parameter_names_and_shapes(toy_graph):
    model = EgpmdaModel(TOY_CONFIG, toy_graph, seed=0)
    params = model.init_params()
    assert params['encoder.conv.kernel'].shape == (2, 4)
    assert params['encoder.me.weight'].shape == (sum(model.lengths) - 1, 8)
    key = 'miRNA__association__disease'
    assert params[f'layers.0.att.{key}'].shape == (2, 4, 4)
    np.testing.assert_array_equal(params[f'layers.1.mu.{key}'], np.ones(2))
    np.testing.assert_array_equal(params['layers.0.alpha.pcg'], np.zeros(1))
    assert params['predictor.p1.weight'].shape == (16, 8)
    assert params['predictor.p2.weight'].shape == (8, 1)


def test_dim_must_divide_by_heads(toy_graph):
    with pytest.raises(ConfigError):
        EgpmdaModel(ModelConfig(dim=10, heads=4), toy_graph)


def test_full_model_gradient_check(toy_graph):
    model = EgpmdaModel(TOY_CONFIG, toy_graph, seed=1)
    params = model.init_params()
    rng = make_rng(1, 'perturb')
    # move mu, alpha and biases off their initial values so every path is exercised
    params = {name: value + 0.1 * rng.standard_normal(value.shape) for name, value in params.items()}
    mirna, disease, labels = PAIRS
    loss, grads, _ = loss_and_grads(model, params, mirna, disease, labels)
    assert loss == pytest.approx(loss_value(model, params, mirna, disease, labels), abs=1e-12)

    report = check_gradients(lambda p: loss_value(model, p, mirna, disease, labels), params, grads, eps=1e-5)
    worst = max(report, key=report.get)
    assert report[worst] < 1e-4, worst
    assert set(report) == set(params)


def test_gradient_check_without_node_features(toy_graph):
    config = ModelConfig(dim=4, layers=1, heads=2, kernel_size=2, use_node_features=False)
    model = EgpmdaModel(config, toy_graph, seed=2)
    params = model.init_params()
    assert not any(name.startswith('encoder.conv') for name in params)
    mirna, disease, labels = PAIRS
    _, grads, _ = loss_and_grads(model, params, mirna, disease, labels)
    report = check_gradients(lambda p: loss_value(model, p, mirna, disease, labels), params, grads)
    assert max(report.values()) < 1e-4


def test_attention_normalized_on_random_graphs():
    rng = make_rng(5, 'graphs')
    config = ModelConfig(dim=4, layers=2, heads=2, kernel_size=2)
    for trial in range(100):
        graph = random_graph(rng, p=float(rng.uniform(0.1, 0.6)))
        model = EgpmdaModel(config, graph, seed=trial)
        result = forward(model, model.init_params())
        for layer, per_relation in result.attention.items():
            for key, att in per_relation.items():
                _, dst = graph.edge_index[key]
                sums = np.zeros((model.counts[graph.relation(key).target_type], 2))
                np.add.at(sums, dst, att)
                np.testing.assert_allclose(sums[np.unique(dst)], 1.0, atol=1e-9)


def test_predictor_matches_hand_computation():
    H = {NodeType.MIRNA: np.array([[1.0, 0.0]]), NodeType.DISEASE: np.array([[0.0, 2.0]])}
    P = {
        'predictor.p1.weight': np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.0, -1.0]]),
        'predictor.p1.bias': np.array([0.1, 0.2]),
        'predictor.p2.weight': np.array([[2.0], [1.0]]),
        'predictor.p2.bias': np.array([-1.0])
    }
    # z = [1, 0, 0, 2] -> hidden = [1.1, -1.8] -> logit = 2.2 - 1.8 - 1 = -0.6
    score = predict_pair(H, [0], [0], P)
    np.testing.assert_allclose(score, [1.0 / (1.0 + np.exp(0.6))], atol=1e-15)
    with pytest.raises(NodeNotFound) as err:
        predict_pair(H, [1], [0], P)
    assert err.value.code == 'ORDINAL_OUT_OF_RANGE'


def test_self_loops_give_every_node_an_incoming_edge():
    table = toy_table()
    graph = build_graph(table, TOY_EDGES, include_mda=False, features=toy_features(table),
                        use_intra_edges=True, use_pcg=False)
    model = EgpmdaModel(ModelConfig(dim=4, layers=1, heads=2, kernel_size=2), graph, seed=0)
    assert all(mask.all() for mask in model.has_incoming.values())
    assert 'PCG__self__PCG' in [rel.key for rel in graph.relations]


def _relabel(graph, perms):
    """Graph with every node type's ordinals permuted (new = perm[old])"""
    table = NodeTable()
    for t in NODE_TYPES:
        for old in np.argsort(perms[t]):
            table.add(graph.table.entry(t, int(old)))
    edges = {}
    for kind, pairs in graph.base_edges.items():
        source = edge_source(kind)
        edges[kind] = [(int(perms[source.source_type][s]), int(perms[source.target_type][d])) for s, d in pairs]
    features = graph.features
    order = {t: np.argsort(perms[t]) for t in NODE_TYPES}
    relabeled = NodeFeatures(
        d_b=features.d_b,
        sequences=tuple(features.sequences[int(o)] for o in order[NodeType.MIRNA]),
        text={t.value: features.text[t.value][order[t]] for t in (NodeType.DISEASE, NodeType.PCG)}
    )
    return build_graph(table, edges, features=relabeled, **graph.switches)


def test_scores_equivariant_under_relabeling(toy_graph):
    rng = make_rng(8, 'perm')
    perms = {t: rng.permutation(3) for t in NODE_TYPES}
    relabeled = _relabel(toy_graph, perms)
    model = EgpmdaModel(TOY_CONFIG, toy_graph, seed=4)
    other = EgpmdaModel(TOY_CONFIG, relabeled, seed=4)
    params = model.init_params()
    m, d = np.meshgrid(np.arange(3), np.arange(3), indexing='ij')
    m, d = m.ravel(), d.ravel()
    scores, _ = score_pairs(model, params, m, d)
    moved, _ = score_pairs(other, params, perms[NodeType.MIRNA][m], perms[NodeType.DISEASE][d])
    np.testing.assert_allclose(scores, moved, atol=1e-9, rtol=0)


def test_score_depends_only_on_receptive_field(toy_graph):
    config = ModelConfig(dim=8, layers=1, heads=2, kernel_size=2)
    model = EgpmdaModel(config, toy_graph, seed=6)
    params = model.init_params()
    before, _ = score_pairs(model, params, [2], [0])

    inside = incoming_bfs(toy_graph, [('miRNA', 2), ('disease', 0)], 1)
    outside = [(t, i) for t in ('disease', 'PCG') for i in range(3) if (t, i) not in inside]
    assert outside
    for t, i in outside:
        model.text[NodeType(t)][i] += 5.0
    after, _ = score_pairs(model, params, [2], [0])
    np.testing.assert_allclose(after, before, atol=1e-12)


def test_condition_zero_has_no_gnn_parameters(toy_graph):
    config = load_run_config(overrides={'condition': 0, 'dim': 8, 'heads': 2, 'kernel_size': 2})
    assert config.layers == 0 and not config.use_node_features
    graph = graph_variant(toy_graph, **config.graph_switches())
    model = EgpmdaModel(config.model_config(), graph, seed=0)
    params = model.init_params()
    assert model.gnn_parameter_names(params) == []
    scores, result = score_pairs(model, params, [0, 1], [1, 2])
    assert scores.shape == (2,) and result.attention == {}


def test_checkpoint_round_trip_and_header(tmp_path, toy_graph):
    for condition, has_mda in ((3, False), (4, True)):
        config = load_run_config(overrides={'condition': condition, 'dim': 8, 'heads': 2, 'kernel_size': 2})
        graph = graph_variant(toy_graph, **config.graph_switches())
        model = EgpmdaModel(config.model_config(), graph, seed=3)
        params = model.init_params()
        path = str(tmp_path / f'checkpoint_{condition}.bin')
        save_checkpoint(path, model, params, hyperparameters={'lr': 0.001})

        checkpoint = load_checkpoint(path)
        assert ('miRNA__association__disease' in checkpoint.relations) is has_mda
        assert checkpoint.hyperparameters == {'lr': 0.001}
        bound = checkpoint.bind(toy_graph)
        expected, _ = score_pairs(model, params, [0, 2], [1, 0])
        restored, _ = score_pairs(bound, checkpoint.params, [0, 2], [1, 0])
        np.testing.assert_array_equal(expected, restored)


def test_checkpoint_rejects_other_graph(tmp_path, toy_graph):
    model = EgpmdaModel(TOY_CONFIG, toy_graph, seed=0)
    path = str(tmp_path / 'checkpoint.bin')
    save_checkpoint(path, model, model.init_params())
    table = toy_table(n_mirna=4)
    other = build_graph(table, TOY_EDGES, include_mda=True, features=toy_features(table))
    with pytest.raises(CheckpointError) as err:
        load_checkpoint(path).bind(other)
    assert err.value.code == 'GRAPH_MISMATCH'
    with pytest.raises(CheckpointError) as err:
        load_checkpoint(str(tmp_path / 'missing.bin'))
    assert err.value.code == 'FILE_NOT_FOUND'


def test_checkpoint_keeps_training_mda_edges(tmp_path):
    graph = make_toy_graph(include_mda=True)
    model = EgpmdaModel(TOY_CONFIG, graph, seed=0)
    path = str(tmp_path / 'checkpoint.bin')
    save_checkpoint(path, model, model.init_params())
    # the graph handed to bind carries other association edges; the checkpoint's win
    leaky = graph_variant(graph, mda_pairs=[(2, 2), (1, 1)])
    bound = load_checkpoint(path).bind(leaky)
    np.testing.assert_array_equal(bound.graph.base_edges['mda'], graph.base_edges['mda'])
