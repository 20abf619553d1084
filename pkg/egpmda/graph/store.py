"""Typed miRNA / disease / PCG graph: loading, identifier resolution and build"""
import logging
import os
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import numpy as np

from egpmda.graph.features import (
    DEFAULT_D_B, NodeFeatures, build_text_matrix, load_embeddings, load_sequences, read_tsv
)
from egpmda.graph.types import (
    EDGE_SOURCES, GROUP_KINDS, MDA_SOURCE, NODE_TYPES, NodeEntry, NodeTable, NodeType,
    MetaRelation, edge_source, meta_relations, source_enabled
)
from egpmda.utils.bundle import read_bundle, write_bundle
from egpmda.utils.errors import BuildError, LoadError, NodeNotFound, RelationLookupError

logger = logging.getLogger(__name__)

GRAPH_MAGIC = b'EGPG'
GRAPH_VERSION = 1


def load_nodes(path, node_type):
    """Read nodes_<type>.tsv (id, name, aliases[, note]) into a one-type NodeTable"""
    frame = read_tsv(path, ['id', 'name', 'aliases'])
    has_note = 'note' in frame.columns
    table = NodeTable()
    for row in frame.itertuples(index=False):
        node_id = row.id.strip()
        if not node_id:
            raise LoadError(f'{path}: empty node id', code='EMPTY_ID')
        aliases = tuple(a.strip() for a in row.aliases.split('|') if a.strip())
        table.add(NodeEntry(
            node_id=node_id,
            type=node_type,
            name=row.name.strip(),
            aliases=aliases,
            note=row.note.strip() if has_note else ''
        ))
    logger.info(f'{path}: {table.count(node_type)} {node_type.value} nodes')
    return table


def resolve_edges(raw_pairs, kind, table):
    """Map (src_symbol, dst_symbol) pairs to ordinals; returns (pairs, dropped)

    Symbols resolve as primary ID first, alias second. Association tables may
    list either endpoint type first; the orientation is fixed by type.
    """
    source = edge_source(kind)
    resolved = set()
    dropped = 0
    for src, dst in raw_pairs:
        s = table.resolve(src, source.source_type)
        t = table.resolve(dst, source.target_type)
        if (s is None or t is None) and source.source_type != source.target_type:
            swapped_s = table.resolve(dst, source.source_type)
            swapped_t = table.resolve(src, source.target_type)
            if swapped_s is not None and swapped_t is not None:
                s, t = swapped_s, swapped_t
        if s is None or t is None:
            dropped += 1
            continue
        resolved.add((s, t))
    if dropped:
        logger.info(f'{kind}: dropped {dropped} pairs with unresolvable endpoints')
    return sorted(resolved), dropped


def expand_groups(path, kind, table):
    """groups_<kind>.tsv (group, member_id) -> clique pairs without self-pairs"""
    source = edge_source(kind)
    frame = read_tsv(path, ['group', 'member_id'])
    groups = {}
    dropped = 0
    for row in frame.itertuples(index=False):
        ordinal = table.resolve(row.member_id.strip(), source.source_type)
        if ordinal is None:
            dropped += 1
            continue
        groups.setdefault(row.group.strip(), set()).add(ordinal)
    if dropped:
        logger.info(f'{path}: {dropped} members could not be resolved')
    pairs = set()
    for members in groups.values():
        pairs.update(combinations(sorted(members), 2))
    return sorted(pairs)


def _edge_array(pairs):
    array = np.asarray(pairs, dtype=np.int64)
    return array.reshape(-1, 2)


def _csr(src, dst, n_target):
    """Incoming index sorted by target then source, duplicates removed"""
    if src.size:
        order = np.lexsort((src, dst))
        src, dst = src[order], dst[order]
        keep = np.r_[True, (src[1:] != src[:-1]) | (dst[1:] != dst[:-1])]
        src, dst = src[keep], dst[keep]
    offsets = np.zeros(n_target + 1, dtype=np.int64)
    np.cumsum(np.bincount(dst, minlength=n_target), out=offsets[1:])
    return offsets, src.astype(np.int64)


@dataclass(frozen=True, eq=False)
class HeteroGraph:
    table: NodeTable
    features: NodeFeatures
    relations: tuple
    # relation key -> (offsets, indices)
    adjacency: dict
    # input kind -> (n, 2) resolved pairs before reverse/self materialization
    base_edges: dict = field(default_factory=dict)
    switches: dict = field(default_factory=dict)

    @property
    def counts(self):
        return {t: self.table.count(t) for t in NODE_TYPES}

    @property
    def include_mda(self):
        return self.switches.get('include_mda', False)

    def relation(self, key):
        if isinstance(key, MetaRelation):
            key = key.key
        for rel in self.relations:
            if rel.key == key:
                return rel
        raise RelationLookupError(f'meta-relation {key} is not registered in this graph',
                                  details={'relation': key})

    @cached_property
    def edge_index(self):
        """relation key -> (src, dst) with dst sorted"""
        index = {}
        for rel in self.relations:
            offsets, indices = self.adjacency[rel.key]
            dst = np.repeat(np.arange(offsets.size - 1, dtype=np.int64), np.diff(offsets))
            index[rel.key] = (indices, dst)
        return index

    def edge_count(self, rel):
        return int(self.adjacency[self.relation(rel).key][1].size)

    def in_degree(self, node_type, ordinal):
        total = 0
        for rel in self.relations:
            if rel.target_type == node_type:
                offsets = self.adjacency[rel.key][0]
                total += int(offsets[ordinal + 1] - offsets[ordinal])
        return total


def _check_range(kind, pairs, n_source, n_target):
    if pairs.size == 0:
        return
    bad = (pairs[:, 0] < 0) | (pairs[:, 0] >= n_source) | (pairs[:, 1] < 0) | (pairs[:, 1] >= n_target)
    if np.any(bad):
        s, t = pairs[np.argmax(bad)]
        raise BuildError(f'{kind} edge ({s}, {t}) references an ordinal out of range',
                         code='EDGE_OUT_OF_RANGE', details={'kind': kind, 'edge': [int(s), int(t)]})


def build_graph(table, edges, include_mda=False, features=None, use_intra_edges=True, use_pcg=True):
    """Materialize reverse edges and self-loops and index every meta-relation

    `edges` maps an input kind (family, father-son, group, mirna-pcg,
    pcg-disease, mda) to ordinal pairs. Kinds switched off are kept in
    base_edges but produce no meta-relation.
    """
    if features is None:
        features = NodeFeatures(
            d_b=DEFAULT_D_B,
            sequences=tuple(('', '', '') for _ in range(table.count(NodeType.MIRNA))),
            text={t.value: build_text_matrix(table, t, DEFAULT_D_B) for t in (NodeType.DISEASE, NodeType.PCG)}
        )

    base = {}
    for kind, pairs in edges.items():
        source = edge_source(kind)
        array = _edge_array(pairs)
        _check_range(kind, array, table.count(source.source_type), table.count(source.target_type))
        base[kind] = array

    relations = meta_relations(include_mda, use_intra_edges, use_pcg)
    collected = {rel.key: ([], []) for rel in relations}
    for kind, array in base.items():
        source = edge_source(kind)
        if not source_enabled(source, include_mda, use_intra_edges, use_pcg) or array.size == 0:
            continue
        src, dst = array[:, 0], array[:, 1]
        if source.intra:
            keep = src != dst
            src, dst = src[keep], dst[keep]
            bucket = collected[source.forward.key]
            bucket[0].extend([src, dst])
            bucket[1].extend([dst, src])
        else:
            collected[source.forward.key][0].append(src)
            collected[source.forward.key][1].append(dst)
            collected[source.reverse.key][0].append(dst)
            collected[source.reverse.key][1].append(src)

    adjacency = {}
    for rel in relations:
        n_target = table.count(rel.target_type)
        if rel.is_self_loop:
            src = dst = np.arange(n_target, dtype=np.int64)
        else:
            srcs, dsts = collected[rel.key]
            src = np.concatenate(srcs) if srcs else np.zeros(0, dtype=np.int64)
            dst = np.concatenate(dsts) if dsts else np.zeros(0, dtype=np.int64)
        adjacency[rel.key] = _csr(src, dst, n_target)

    return HeteroGraph(
        table=table,
        features=features,
        relations=relations,
        adjacency=adjacency,
        base_edges=base,
        switches={'include_mda': bool(include_mda), 'use_intra_edges': bool(use_intra_edges),
                  'use_pcg': bool(use_pcg)}
    )


def neighbors(graph, target_ordinal, meta_relation):
    """Source ordinals of the incoming edges of one target under one meta-relation"""
    rel = graph.relation(meta_relation)
    offsets, indices = graph.adjacency[rel.key]
    if not 0 <= target_ordinal < offsets.size - 1:
        raise NodeNotFound(f'{rel.target_type.value} ordinal {target_ordinal} is out of range',
                           code='ORDINAL_OUT_OF_RANGE')
    return indices[offsets[target_ordinal]:offsets[target_ordinal + 1]].tolist()


def graph_variant(graph, use_intra_edges=None, use_pcg=None, include_mda=None, mda_pairs=None):
    """Rebuild from the stored base edges under other ablation switches"""
    switches = dict(graph.switches)
    for name, value in (('use_intra_edges', use_intra_edges), ('use_pcg', use_pcg),
                        ('include_mda', include_mda)):
        if value is not None:
            switches[name] = value
    edges = dict(graph.base_edges)
    if mda_pairs is not None:
        edges[MDA_SOURCE.kind] = _edge_array(mda_pairs)
    return build_graph(graph.table, edges, features=graph.features, **switches)


def with_mda_edges(graph, pairs):
    """The same graph with miRNA<->disease association edges added"""
    return graph_variant(graph, include_mda=True, mda_pairs=pairs)


def graph_summary(graph):
    return {
        'nodes': {t.value: graph.table.count(t) for t in NODE_TYPES},
        'edges': {rel.key: graph.edge_count(rel) for rel in graph.relations},
        'd_b': graph.features.d_b,
        'seq_lengths': list(graph.features.seq_lengths),
        'switches': dict(graph.switches)
    }


def save_graph(graph, path):
    header = {
        'kind': 'graph',
        'nodes': {t.value: graph.table.rows(t) for t in NODE_TYPES},
        'relations': [rel.key for rel in graph.relations],
        'sequences': [list(s) for s in graph.features.sequences],
        'd_b': graph.features.d_b,
        'switches': graph.switches
    }
    arrays = {}
    for rel in graph.relations:
        offsets, indices = graph.adjacency[rel.key]
        arrays[f'adj.{rel.key}.offsets'] = offsets
        arrays[f'adj.{rel.key}.indices'] = indices
    for type_value, matrix in sorted(graph.features.text.items()):
        arrays[f'text.{type_value}'] = matrix
    for kind, pairs in sorted(graph.base_edges.items()):
        arrays[f'base.{kind}'] = pairs
    write_bundle(path, GRAPH_MAGIC, GRAPH_VERSION, header, arrays)
    logger.info(f'graph written to {path}')


def load_graph(path):
    try:
        header, arrays = read_bundle(path, GRAPH_MAGIC, GRAPH_VERSION)
    except FileNotFoundError:
        raise LoadError(f'{path}: graph bundle not found', code='FILE_NOT_FOUND')
    table = NodeTable()
    for t in NODE_TYPES:
        for node_id, name, aliases, note in header['nodes'][t.value]:
            table.add(NodeEntry(node_id, t, name, tuple(aliases), note))
    features = NodeFeatures(
        d_b=header['d_b'],
        sequences=tuple(tuple(s) for s in header['sequences']),
        text={name[len('text.'):]: array for name, array in arrays.items() if name.startswith('text.')}
    )
    relations = tuple(MetaRelation.from_key(key) for key in header['relations'])
    adjacency = {rel.key: (arrays[f'adj.{rel.key}.offsets'], arrays[f'adj.{rel.key}.indices'])
                 for rel in relations}
    base = {name[len('base.'):]: array.reshape(-1, 2) for name, array in arrays.items()
            if name.startswith('base.')}
    return HeteroGraph(table, features, relations, adjacency, base, header['switches'])


@dataclass(frozen=True, eq=False)
class Dataset:
    table: NodeTable
    edges: dict
    features: NodeFeatures


def _optional(path):
    return path if os.path.exists(path) else None


def load_dataset(data_dir, d_b=DEFAULT_D_B):
    """Load every table present in data_dir: nodes, edges, groups, sequences, embeddings"""
    fragments = []
    for node_type in NODE_TYPES:
        path = os.path.join(data_dir, f'nodes_{node_type.slug}.tsv')
        if node_type == NodeType.PCG and not os.path.exists(path):
            logger.info('no PCG node table; PCG relations will be empty')
            continue
        fragments.append(load_nodes(path, node_type))
    table = NodeTable.merge(*fragments)

    edges = {}
    for kind, source in EDGE_SOURCES.items():
        pairs = set()
        path = _optional(os.path.join(data_dir, f'edges_{kind}.tsv'))
        if path:
            frame = read_tsv(path, ['src_id', 'dst_id'])
            resolved, _ = resolve_edges(zip(frame['src_id'].str.strip(), frame['dst_id'].str.strip()),
                                        kind, table)
            pairs.update(resolved)
        if kind in GROUP_KINDS:
            groups = _optional(os.path.join(data_dir, f'groups_{kind}.tsv'))
            if groups:
                pairs.update(expand_groups(groups, kind, table))
        edges[kind] = sorted(pairs)
        logger.info(f'{kind}: {len(edges[kind])} edges')

    texts = {}
    for node_type in (NodeType.DISEASE, NodeType.PCG):
        path = _optional(os.path.join(data_dir, f'embeddings_{node_type.slug}.tsv'))
        vectors, width = load_embeddings(path, table, node_type) if path else ({}, None)
        if width is not None:
            d_b = width // 2
        texts[node_type] = vectors
    if not any(texts.values()):
        logger.warning('no precomputed embeddings; hashed text features used for disease and PCG')

    seq_path = _optional(os.path.join(data_dir, 'mirna_seq.tsv'))
    if seq_path:
        sequences = load_sequences(seq_path, table)
    else:
        logger.warning('no mirna_seq.tsv; every miRNA gets placeholder sequence blocks')
        sequences = tuple(('', '', '') for _ in range(table.count(NodeType.MIRNA)))

    features = NodeFeatures(
        d_b=d_b,
        sequences=sequences,
        text={t.value: build_text_matrix(table, t, d_b, texts[t]) for t in texts}
    )
    return Dataset(table, edges, features)
