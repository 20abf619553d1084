"""Learned importance signals: per-relation mu hierarchy and per-pair attention subgraphs"""
import json
import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from marshmallow import Schema, fields, post_load

from egpmda.graph.types import NodeType
from egpmda.model.network import score_pairs
from egpmda.utils.errors import CheckpointError, ExportError

logger = logging.getLogger(__name__)

EXPORT_FORMATS = ('json', 'dot')


@dataclass
class ExplanationSubgraph:
    mirna_id: str
    disease_id: str
    score: float
    layers: int
    nodes: list = field(default_factory=list)
    edges: list = field(default_factory=list)

    def node_keys(self):
        return {(n['type'], n['ordinal']) for n in self.nodes}


def incoming_bfs(graph, seeds, depth):
    """(type, ordinal) -> hop distance for nodes reaching a seed within `depth` incoming hops"""
    dist = {seed: 0 for seed in seeds}
    queue = deque(seeds)
    while queue:
        node = queue.popleft()
        if dist[node] == depth:
            continue
        node_type, ordinal = node
        for rel in graph.relations:
            if rel.target_type.value != node_type:
                continue
            offsets, indices = graph.adjacency[rel.key]
            for s in indices[offsets[ordinal]:offsets[ordinal + 1]]:
                source = (rel.source_type.value, int(s))
                if source not in dist:
                    dist[source] = dist[node] + 1
                    queue.append(source)
    return dist


def explain_pair(model, params, mirna_id, disease_id):
    """Score one pair and annotate its L-hop incoming neighborhood from the same forward pass"""
    graph = model.graph
    table = graph.table
    m = table.require(mirna_id, NodeType.MIRNA)
    d = table.require(disease_id, NodeType.DISEASE)
    scores, result = score_pairs(model, params, [m], [d])
    layers = model.config.layers

    dist = incoming_bfs(graph, [(NodeType.MIRNA.value, m), (NodeType.DISEASE.value, d)], layers)
    nodes = []
    for (type_value, ordinal), hops in sorted(dist.items(), key=lambda item: (item[1], item[0])):
        entry = table.entry(NodeType(type_value), ordinal)
        nodes.append({
            'type': type_value,
            'ordinal': ordinal,
            'id': entry.node_id,
            'name': entry.name,
            'hops': hops,
            'gates': [result.gates[layer][type_value] for layer in range(layers)]
        })

    edges = []
    for rel in graph.relations:
        src, dst = graph.edge_index[rel.key]
        for e in range(src.size):
            target = (rel.target_type.value, int(dst[e]))
            # every incoming edge of a node that still feeds the next layer
            if target not in dist or dist[target] > layers - 1:
                continue
            attention = [result.attention[layer][rel.key][e].tolist() for layer in range(layers)]
            edges.append({
                'relation': rel.key,
                'source': [rel.source_type.value, int(src[e])],
                'target': [target[0], target[1]],
                'attention': attention,
                'mean_attention': [float(np.mean(heads)) for heads in attention]
            })

    return ExplanationSubgraph(
        mirna_id=table.id_of(NodeType.MIRNA, m),
        disease_id=table.id_of(NodeType.DISEASE, d),
        score=float(scores[0]),
        layers=layers,
        nodes=nodes,
        edges=edges
    )


class ExplanationNodeSchema(Schema):
    type = fields.Str(required=True)
    ordinal = fields.Int(required=True)
    id = fields.Str(required=True)
    name = fields.Str(required=True)
    hops = fields.Int(required=True)
    gates = fields.List(fields.Float(), required=True)


class ExplanationEdgeSchema(Schema):
    relation = fields.Str(required=True)
    source = fields.Tuple((fields.Str(), fields.Int()), required=True)
    target = fields.Tuple((fields.Str(), fields.Int()), required=True)
    attention = fields.List(fields.List(fields.Float()), required=True)
    mean_attention = fields.List(fields.Float(), required=True)


class ExplanationSchema(Schema):
    mirna_id = fields.Str(required=True)
    disease_id = fields.Str(required=True)
    score = fields.Float(required=True)
    layers = fields.Int(required=True)
    nodes = fields.List(fields.Nested(ExplanationNodeSchema), required=True)
    edges = fields.List(fields.Nested(ExplanationEdgeSchema), required=True)

    @post_load
    def make_subgraph(self, data, **kwargs):
        for edge in data['edges']:
            edge['source'] = list(edge['source'])
            edge['target'] = list(edge['target'])
        return ExplanationSubgraph(**data)


def _dot_id(node_type, ordinal):
    return f'"{node_type}:{ordinal}"'


def _dot_escape(text):
    return text.replace('\\', '\\\\').replace('"', '\\"')


def to_dot(subgraph):
    lines = ['digraph explanation {', '  rankdir=LR;']
    for node in subgraph.nodes:
        gates = '/'.join(f'{g:.3f}' for g in node['gates'])
        name = _dot_escape(node['name'] or node['id'])
        label = f'{name}\\ngate {gates}' if gates else name
        lines.append(f"  {_dot_id(node['type'], node['ordinal'])} [label=\"{label}\"];")
    for edge in subgraph.edges:
        kind = edge['relation'].split('__')[1]
        for layer, value in enumerate(edge['mean_attention']):
            lines.append(
                f"  {_dot_id(*edge['source'])} -> {_dot_id(*edge['target'])} "
                f"[label=\"{kind} L{layer + 1} {value:.9f}\", penwidth={0.5 + 4.0 * value:.3f}];"
            )
    lines.append('}')
    return '\n'.join(lines) + '\n'


def export_explanation(subgraph, fmt, path):
    if fmt not in EXPORT_FORMATS:
        raise ExportError(f"unknown export format {fmt!r} (expected {', '.join(EXPORT_FORMATS)})",
                          code='UNKNOWN_FORMAT')
    with open(path, 'w') as fh:
        if fmt == 'json':
            json.dump(ExplanationSchema().dump(subgraph), fh, sort_keys=True, indent=1)
            fh.write('\n')
        else:
            fh.write(to_dot(subgraph))
    logger.info(f'explanation written to {path}')


def load_explanation(path):
    with open(path) as fh:
        return ExplanationSchema().load(json.load(fh))


@dataclass
class MuReport:
    # layer -> relation key -> mean over heads and checkpoints
    means: list
    per_checkpoint: list
    checkpoints: int

    def highlighted(self, layer):
        return [key for key, value in self.means[layer].items() if value > 1.0]

    def to_dict(self):
        return {
            'checkpoints': self.checkpoints,
            'layers': [
                [{'relation': key, 'mean': value, 'highlight': value > 1.0,
                  'per_checkpoint': [run[layer][key] for run in self.per_checkpoint]}
                 for key, value in layer_means.items()]
                for layer, layer_means in enumerate(self.means)
            ],
            'top_paths': top_paths(self)
        }


def mu_hierarchy(checkpoints):
    """Mean mu per (layer, relation) over heads and over every checkpoint supplied"""
    if not checkpoints:
        raise CheckpointError('mu report needs at least one checkpoint', code='NO_CHECKPOINTS')
    first = checkpoints[0]
    for other in checkpoints[1:]:
        if other.relations != first.relations or other.config.layers != first.config.layers:
            raise CheckpointError('checkpoints have different meta-relation registries',
                                  code='REGISTRY_MISMATCH')

    per_checkpoint = []
    for checkpoint in checkpoints:
        per_checkpoint.append([
            {key: float(np.mean(checkpoint.params[f'layers.{layer}.mu.{key}'])) for key in first.relations}
            for layer in range(first.config.layers)
        ])
    means = [
        {key: float(np.mean([run[layer][key] for run in per_checkpoint])) for key in first.relations}
        for layer in range(first.config.layers)
    ]
    return MuReport(means=means, per_checkpoint=per_checkpoint, checkpoints=len(checkpoints))


def top_paths(report):
    """Consecutive-layer relation chains whose mean mu both exceed 1, by product"""
    paths = []
    for layer in range(len(report.means) - 1):
        for first in report.highlighted(layer):
            for second in report.highlighted(layer + 1):
                # the first hop must deliver into the node type the second hop reads from
                if first.split('__')[2] != second.split('__')[0]:
                    continue
                product = report.means[layer][first] * report.means[layer + 1][second]
                paths.append({'layers': [layer + 1, layer + 2], 'relations': [first, second], 'product': product})
    return sorted(paths, key=lambda p: (-p['product'], p['relations']))
