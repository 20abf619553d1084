"""Tests for node tables, edge resolution and heterogeneous graph construction"""
import numpy as np
import pytest

from conftest import TOY_EDGES, make_toy_graph, toy_table
from egpmda.graph.features import hashed_text_embedding, load_embeddings, validate_sequence
from egpmda.graph.store import (
    build_graph, expand_groups, graph_summary, graph_variant, load_dataset, load_graph, load_nodes,
    neighbors, resolve_edges, save_graph, with_mda_edges
)
from egpmda.graph.types import MetaRelation, NodeEntry, NodeTable, NodeType, meta_relations
from egpmda.utils.errors import BuildError, LoadError, NodeNotFound, RelationLookupError


def _write(path, text):
    path.write_text(text)
    return str(path)


def test_load_nodes_and_alias_resolution(tmp_path):
    path = _write(tmp_path / 'nodes_mirna.tsv',
                  'id\tname\taliases\nMIMAT1\thsa-mir-1\tmiR-1|mir-1a\nMIMAT2\thsa-mir-2\t\n')
    table = load_nodes(path, NodeType.MIRNA)
    assert table.count(NodeType.MIRNA) == 2
    assert table.resolve('MIMAT2', NodeType.MIRNA) == 1
    assert table.resolve('mir-1a', NodeType.MIRNA) == 0
    assert table.resolve('mir-1a', NodeType.DISEASE) is None
    assert table.entry(NodeType.MIRNA, 0).note == ''


def test_duplicate_id_and_alias_collision():
    table = NodeTable()
    table.add(NodeEntry('A', NodeType.DISEASE, 'a', ('x',)))
    with pytest.raises(LoadError) as err:
        table.add(NodeEntry('A', NodeType.DISEASE, 'again'))
    assert err.value.code == 'DUPLICATE_ID'
    with pytest.raises(LoadError) as err:
        table.add(NodeEntry('B', NodeType.DISEASE, 'b', ('x',)))
    assert err.value.code == 'ALIAS_COLLISION'
    # same symbol under another type is fine
    table.add(NodeEntry('A', NodeType.PCG, 'gene a'))


def test_require_suggests_near_misses():
    table = toy_table()
    with pytest.raises(NodeNotFound) as err:
        table.require('disease9', NodeType.DISEASE)
    assert 'disease0' in err.value.details['near_misses']
    assert table.require('disease-alias-2', NodeType.DISEASE) == 2


def test_missing_node_file():
    with pytest.raises(LoadError) as err:
        load_nodes('/nonexistent/nodes_mirna.tsv', NodeType.MIRNA)
    assert err.value.code == 'FILE_NOT_FOUND'


def test_malformed_tables_raise_load_errors(tmp_path):
    ragged = _write(tmp_path / 'nodes_mirna.tsv', 'id\tname\taliases\nM1\tmir-1\t\nM2\tmir-2\tx\ty\tz\n')
    with pytest.raises(LoadError) as err:
        load_nodes(ragged, NodeType.MIRNA)
    assert err.value.code == 'BAD_TSV'
    assert 'line 3' in err.value.details['reason']

    binary = tmp_path / 'nodes_disease.tsv'
    binary.write_bytes(b'id\tname\taliases\nD1\t\xff\xfe\t\n')
    with pytest.raises(LoadError) as err:
        load_nodes(str(binary), NodeType.DISEASE)
    assert err.value.code == 'BAD_TSV'


def test_resolve_edges_drops_unknown_and_fixes_orientation():
    table = toy_table()
    raw = [('disease1', 'pcg0'), ('pcg2', 'disease0'), ('pcg9', 'disease0'), ('pcg2', 'disease0')]
    pairs, dropped = resolve_edges(raw, 'pcg-disease', table)
    assert pairs == [(0, 1), (2, 0)]
    assert dropped == 1


def test_expand_groups_builds_cliques(tmp_path):
    path = _write(tmp_path / 'groups_family.tsv',
                  'group\tmember_id\nf1\tmirna0\nf1\tmirna1\nf1\tmirna2\nf2\tmirna2\nf2\tunknown\n')
    assert expand_groups(path, 'family', toy_table()) == [(0, 1), (0, 2), (1, 2)]


def test_registry_order_and_switches():
    keys = [rel.key for rel in meta_relations(include_mda=True)]
    assert keys[:3] == ['miRNA__family__miRNA', 'disease__father-son__disease', 'PCG__group__PCG']
    assert 'miRNA__association__disease' in keys and 'disease__rev_association__miRNA' in keys
    assert keys[-3:] == ['miRNA__self__miRNA', 'disease__self__disease', 'PCG__self__PCG']

    bare = [rel.key for rel in meta_relations(use_intra_edges=False, use_pcg=False)]
    assert bare == ['miRNA__self__miRNA', 'disease__self__disease', 'PCG__self__PCG']
    no_mda = [rel.key for rel in meta_relations(include_mda=False)]
    assert not any(k.startswith('miRNA__association__disease') for k in no_mda)


def test_build_graph_reverse_edges_and_self_loops(toy_graph):
    assert neighbors(toy_graph, 1, 'miRNA__family__miRNA') == [0]
    assert neighbors(toy_graph, 0, 'miRNA__family__miRNA') == [1]
    assert neighbors(toy_graph, 0, 'PCG__rev_association__miRNA') == [0]
    assert neighbors(toy_graph, 2, 'disease__rev_association__miRNA') == []
    assert neighbors(toy_graph, 2, 'miRNA__association__disease') == [1]
    for t in (NodeType.MIRNA, NodeType.DISEASE, NodeType.PCG):
        key = MetaRelation(t, 'self', t).key
        assert all(neighbors(toy_graph, i, key) == [i] for i in range(3))


def test_edge_index_sorted_by_target(toy_graph):
    for key, (src, dst) in toy_graph.edge_index.items():
        assert np.all(np.diff(dst) >= 0)
        assert src.size == dst.size == toy_graph.edge_count(key)


def test_intra_self_pairs_dropped_and_duplicates_merged():
    edges = dict(TOY_EDGES, family=[(0, 0), (0, 1), (1, 0), (0, 1)])
    graph = make_toy_graph(edges=edges)
    assert graph.edge_count('miRNA__family__miRNA') == 2


def test_out_of_range_edge():
    with pytest.raises(BuildError) as err:
        make_toy_graph(edges=dict(TOY_EDGES, family=[(0, 3)]))
    assert err.value.code == 'EDGE_OUT_OF_RANGE'


def test_unknown_relation_and_ordinal(toy_graph):
    with pytest.raises(RelationLookupError):
        neighbors(toy_graph, 0, 'miRNA__bogus__disease')
    with pytest.raises(NodeNotFound) as err:
        neighbors(toy_graph, 5, 'miRNA__family__miRNA')
    assert err.value.code == 'ORDINAL_OUT_OF_RANGE'


def test_graph_variant_switches(toy_graph):
    bare = graph_variant(toy_graph, use_intra_edges=False, use_pcg=False, include_mda=False)
    assert [rel.key for rel in bare.relations] == ['miRNA__self__miRNA', 'disease__self__disease', 'PCG__self__PCG']
    # base edges survive so the full graph can be rebuilt
    full = graph_variant(bare, use_intra_edges=True, use_pcg=True, include_mda=True)
    assert [rel.key for rel in full.relations] == [rel.key for rel in toy_graph.relations]

    swapped = with_mda_edges(toy_graph, [(2, 2)])
    assert neighbors(swapped, 2, 'miRNA__association__disease') == [2]
    assert neighbors(swapped, 0, 'miRNA__association__disease') == []


def test_save_and_load_graph(tmp_path, toy_graph):
    path = str(tmp_path / 'graph.bin')
    save_graph(toy_graph, path)
    loaded = load_graph(path)
    assert graph_summary(loaded) == graph_summary(toy_graph)
    assert loaded.table.resolve('mirna-alias-1', NodeType.MIRNA) == 1
    for key, (offsets, indices) in toy_graph.adjacency.items():
        np.testing.assert_array_equal(loaded.adjacency[key][0], offsets)
        np.testing.assert_array_equal(loaded.adjacency[key][1], indices)
    np.testing.assert_array_equal(loaded.features.text['disease'], toy_graph.features.text['disease'])


def test_load_graph_missing_file(tmp_path):
    with pytest.raises(LoadError) as err:
        load_graph(str(tmp_path / 'missing.bin'))
    assert err.value.code == 'FILE_NOT_FOUND'


def test_validate_sequence():
    assert validate_sequence('AUCG') == 'AUCG'
    with pytest.raises(LoadError) as err:
        validate_sequence('AUTG')
    assert err.value.code == 'ILLEGAL_BASE'
    assert err.value.details == {'position': 2}


def test_hashed_text_embedding_halves_are_normalized():
    vector = hashed_text_embedding('lung carcinoma', 'a malignant tumor', d_b=16)
    assert vector.shape == (32,)
    assert np.linalg.norm(vector[:16]) == pytest.approx(1.0)
    assert np.linalg.norm(vector[16:]) == pytest.approx(1.0)
    np.testing.assert_array_equal(hashed_text_embedding('x', '', d_b=4)[4:], np.zeros(4))


def test_load_embeddings_rejects_ragged_rows(tmp_path):
    path = _write(tmp_path / 'embeddings_disease.tsv', 'disease0\t1,2,3,4\ndisease1\t1,2\n')
    with pytest.raises(LoadError) as err:
        load_embeddings(path, toy_table(), NodeType.DISEASE)
    assert err.value.code == 'BAD_EMBEDDING'


def test_load_dataset_from_sample_tables(sample_data):
    dataset = load_dataset(str(sample_data), d_b=8)
    assert dataset.table.count(NodeType.MIRNA) == 16
    assert dataset.table.count(NodeType.PCG) == 8
    assert dataset.features.text['disease'].shape == (12, 16)
    assert all(len(triple) == 3 for triple in dataset.features.sequences)
    # families of four members -> six clique pairs each
    assert len(dataset.edges['family']) == 4 * 6
    graph = build_graph(dataset.table, dataset.edges, features=dataset.features)
    assert graph.edge_count('miRNA__family__miRNA') == 2 * 4 * 6


def test_default_features_when_none_given():
    table = toy_table()
    graph = build_graph(table, {'family': [(0, 1)]})
    assert graph.features.seq_lengths == (0, 0, 0)
    assert graph.features.text['PCG'].shape == (3, 128)
