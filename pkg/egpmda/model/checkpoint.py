import logging
from dataclasses import dataclass, field

import numpy as np

from egpmda.graph.store import graph_variant
from egpmda.graph.types import NODE_TYPES
from egpmda.model.network import EgpmdaModel, ModelConfig
from egpmda.utils.bundle import read_bundle, write_bundle
from egpmda.utils.errors import CheckpointError

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b'EGPC'
CHECKPOINT_VERSION = 1
MDA_BLOB = 'graph.mda_edges'


@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict
    seed: int
    relations: list
    lengths: tuple
    d_b: int
    counts: dict
    switches: dict
    hyperparameters: dict = field(default_factory=dict)
    mda_edges: np.ndarray = None

    def bind(self, graph):
        """EgpmdaModel over `graph` rebuilt with this checkpoint's switches"""
        if graph.features.d_b != self.d_b:
            raise CheckpointError(f'graph d_B {graph.features.d_b} != checkpoint d_B {self.d_b}',
                                  code='GRAPH_MISMATCH')
        counts = {t.value: n for t, n in graph.counts.items()}
        if counts != self.counts:
            raise CheckpointError(f'graph node counts {counts} differ from checkpoint {self.counts}',
                                  code='GRAPH_MISMATCH')
        mda = self.mda_edges if self.switches.get('include_mda') else None
        bound = graph_variant(graph, mda_pairs=mda, **self.switches)
        keys = [rel.key for rel in bound.relations]
        if keys != self.relations:
            raise CheckpointError('meta-relation registry of the graph does not match the checkpoint',
                                  code='REGISTRY_MISMATCH', details={'graph': keys, 'checkpoint': self.relations})
        return EgpmdaModel(self.config, bound, seed=self.seed, lengths=self.lengths)


def save_checkpoint(path, model, params, hyperparameters=None):
    graph = model.graph
    header = {
        'kind': 'checkpoint',
        'model': model.config.to_dict(),
        'seed': model.seed,
        'relations': [rel.key for rel in model.relations],
        'seq_lengths': list(model.lengths),
        'd_b': model.d_b,
        'counts': {t.value: model.counts[t] for t in NODE_TYPES},
        'switches': dict(graph.switches),
        'hyperparameters': hyperparameters or {},
        'parameters': list(params)
    }
    arrays = dict(params)
    if graph.include_mda:
        arrays[MDA_BLOB] = graph.base_edges.get('mda', np.zeros((0, 2), dtype=np.int64))
    write_bundle(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, header, arrays)
    logger.info(f'checkpoint written to {path}')


def load_checkpoint(path):
    try:
        header, arrays = read_bundle(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)
    except FileNotFoundError:
        raise CheckpointError(f'{path}: checkpoint not found', code='FILE_NOT_FOUND')
    mda = arrays.pop(MDA_BLOB, None)
    params = {name: arrays[name] for name in header['parameters']}
    return Checkpoint(
        config=ModelConfig(**header['model']),
        params=params,
        seed=header['seed'],
        relations=header['relations'],
        lengths=tuple(header['seq_lengths']),
        d_b=header['d_b'],
        counts=header['counts'],
        switches=header['switches'],
        hyperparameters=header['hyperparameters'],
        mda_edges=mda.reshape(-1, 2) if mda is not None else None
    )
