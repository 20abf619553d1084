"""Shared pytest fixtures: toy graphs, toy manifests and a Flask app with an in-memory run log"""
import numpy as np
import pytest

from app import create_app
from create_sample_data import create_sample_data
from egpmda.graph.features import NodeFeatures, build_text_matrix
from egpmda.graph.store import build_graph
from egpmda.graph.types import NodeEntry, NodeTable, NodeType
from egpmda.split.bench import MdaRecord, build_manifest

TOY_SEQUENCES = (('ACGUAC', 'ACGU', 'GU'), ('UUAG', 'CAG', ''), ('GGCAUA', 'AU', 'CCA'))


def toy_table(n_mirna=3, n_disease=3, n_pcg=3):
    table = NodeTable()
    for t, n in ((NodeType.MIRNA, n_mirna), (NodeType.DISEASE, n_disease), (NodeType.PCG, n_pcg)):
        for i in range(n):
            table.add(NodeEntry(f'{t.slug}{i}', t, f'{t.value} number {i}', (f'{t.slug}-alias-{i}',),
                                f'note {i}'))
    return table


def toy_features(table, d_b=4, sequences=TOY_SEQUENCES):
    return NodeFeatures(
        d_b=d_b,
        sequences=tuple(sequences[i % len(sequences)] for i in range(table.count(NodeType.MIRNA))),
        text={t.value: build_text_matrix(table, t, d_b) for t in (NodeType.DISEASE, NodeType.PCG)}
    )


# one pair per input kind, three nodes per type
TOY_EDGES = {
    'family': [(0, 1)],
    'father-son': [(1, 2)],
    'group': [(0, 2)],
    'mirna-pcg': [(0, 0), (2, 1)],
    'pcg-disease': [(1, 0), (2, 2)],
    'mda': [(0, 0), (1, 2)]
}


def make_toy_graph(include_mda=True, edges=None, **switches):
    table = toy_table()
    return build_graph(table, edges or TOY_EDGES, include_mda=include_mda, features=toy_features(table),
                       **switches)


def random_graph(rng, n=(4, 4, 3), p=0.3, include_mda=True):
    """Random edges of every kind over n = (miRNA, disease, PCG) nodes"""
    table = toy_table(*n)
    counts = {NodeType.MIRNA: n[0], NodeType.DISEASE: n[1], NodeType.PCG: n[2]}
    kinds = {
        'family': (NodeType.MIRNA, NodeType.MIRNA),
        'father-son': (NodeType.DISEASE, NodeType.DISEASE),
        'group': (NodeType.PCG, NodeType.PCG),
        'mirna-pcg': (NodeType.MIRNA, NodeType.PCG),
        'pcg-disease': (NodeType.PCG, NodeType.DISEASE),
        'mda': (NodeType.MIRNA, NodeType.DISEASE)
    }
    edges = {}
    for kind, (s, t) in kinds.items():
        mask = rng.random((counts[s], counts[t])) < p
        edges[kind] = [(int(a), int(b)) for a, b in zip(*np.nonzero(mask))]
    return build_graph(table, edges, include_mda=include_mda, features=toy_features(table))


def toy_records(n_mirna=6, n_disease=6):
    """Associations spread over 2015-2021 so every partition is populated"""
    records = []
    years = [2015, 2016, 2017, 2018, 2019, 2020, 2021]
    for m in range(n_mirna):
        for d in range(n_disease):
            if (m + d) % 3 == 0:
                records.append(MdaRecord(m, d, f'{m}{d}', years[(m * n_disease + d) % len(years)]))
    return records


@pytest.fixture
def toy_graph():
    return make_toy_graph()


@pytest.fixture
def toy_manifest():
    return build_manifest(toy_records(), 6, 6, seed=3, y1=2019, y2=2020, negative_ratio_test=2)


@pytest.fixture
def app(tmp_path):
    app = create_app({
        'TESTING': True,
        'SQLALCHEMY_DATABASE_URI': 'sqlite://',
        'EGP_OUT_DIR': str(tmp_path / 'runs'),
        'EGP_DATA_DIR': str(tmp_path / 'data')
    })
    yield app


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture
def sample_data(tmp_path):
    data_dir = tmp_path / 'data'
    create_sample_data(str(data_dir), n_mirna=16, n_disease=12, n_pcg=8, clusters=4, seed=1)
    return data_dir

