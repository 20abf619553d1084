"""Encoder, stacked heterogeneous graph transformer layers and pair predictor.

Parameters live in a flat ``name -> ndarray`` mapping. Every function below
accepts either plain arrays (inference) or tape tensors (training); the
numeric primitives return the matching kind.
"""
import logging
from dataclasses import asdict, dataclass

import numpy as np

from egpmda.graph.types import NODE_TYPES, NodeType
from egpmda.model.features import block_lengths, sequence_tensor
from egpmda.numerics.optim import glorot_uniform, make_rng
from egpmda.numerics.tensor import (
    Tape, add, backward, bce_loss, concat, conv1d_single_filter, gate_blend, gather_rows, gelu,
    head_dot, head_matmul, linear, mul, reshape, scale, scatter_sum, segmented_softmax, sigmoid,
    value
)
from egpmda.utils.errors import ConfigError, NodeNotFound

logger = logging.getLogger(__name__)

_TEXT_BRANCH = {NodeType.DISEASE: 'de', NodeType.PCG: 'ge'}


@dataclass(frozen=True)
class ModelConfig:
    dim: int = 64
    layers: int = 2
    heads: int = 4
    kernel_size: int = 8
    use_node_features: bool = True

    @property
    def head_dim(self):
        return self.dim // self.heads

    def to_dict(self):
        return asdict(self)


@dataclass
class ForwardResult:
    hidden: dict
    # layer -> relation key -> (E, h) attention, edges in graph.edge_index order
    attention: dict
    # layer -> node type value -> sigmoid(alpha)
    gates: dict


class EgpmdaModel:
    """Binds a ModelConfig to one graph: fixed inputs, edge indexes and registry"""

    def __init__(self, config, graph, seed=0, lengths=None):
        if config.dim % config.heads:
            raise ConfigError(f'dim {config.dim} is not divisible by heads {config.heads}')
        self.config = config
        self.graph = graph
        self.seed = seed
        self.relations = graph.relations
        self.counts = graph.counts
        self.d_b = graph.features.d_b
        self.lengths = tuple(lengths) if lengths else block_lengths(
            graph.features.seq_lengths, config.kernel_size)
        self.edges = graph.edge_index

        if config.use_node_features:
            self.sequences = sequence_tensor(graph.features.sequences, self.lengths)
            self.text = {}
            for t in _TEXT_BRANCH:
                matrix = graph.features.text.get(t.value)
                if matrix is None:
                    matrix = np.zeros((self.counts[t], 2 * self.d_b))
                self.text[t] = matrix
        else:
            self.random_features = {
                t: make_rng(seed, 'random-features', t.value).standard_normal((self.counts[t], 2 * self.d_b))
                for t in NODE_TYPES
            }

        self.has_incoming = {}
        for t in NODE_TYPES:
            mask = np.zeros(self.counts[t], dtype=bool)
            for rel in self.relations:
                if rel.target_type == t:
                    mask[self.edges[rel.key][1]] = True
            self.has_incoming[t] = mask

    def init_params(self):
        """Glorot-uniform weights, zero biases, mu = 1, alpha = 0"""
        cfg = self.config
        dim, h, d = cfg.dim, cfg.heads, cfg.head_dim
        rng = make_rng(self.seed, 'init')
        params = {}

        def dense(name, fan_in, fan_out, glorot_out=None):
            params[f'{name}.weight'] = glorot_uniform(rng, fan_in, glorot_out or fan_out, (fan_in, fan_out))
            params[f'{name}.bias'] = np.zeros(fan_out)

        if cfg.use_node_features:
            k = cfg.kernel_size
            params['encoder.conv.kernel'] = glorot_uniform(rng, 4 * k, 1, (k, 4))
            params['encoder.conv.bias'] = np.zeros(1)
            dense('encoder.me', sum(self.lengths) - k + 1, dim)
            dense('encoder.de', 2 * self.d_b, dim)
            dense('encoder.ge', 2 * self.d_b, dim)
        else:
            for t in NODE_TYPES:
                dense(f'encoder.re.{t.slug}', 2 * self.d_b, dim)

        for layer in range(cfg.layers):
            prefix = f'layers.{layer}'
            for t in NODE_TYPES:
                for proj in ('q', 'k', 'm'):
                    dense(f'{prefix}.{proj}.{t.slug}', dim, dim, glorot_out=d)
            for rel in self.relations:
                params[f'{prefix}.att.{rel.key}'] = glorot_uniform(rng, d, d, (h, d, d))
                params[f'{prefix}.msg.{rel.key}'] = glorot_uniform(rng, d, d, (h, d, d))
                params[f'{prefix}.mu.{rel.key}'] = np.ones(h)
            for t in NODE_TYPES:
                dense(f'{prefix}.a.{t.slug}', dim, dim)
                params[f'{prefix}.alpha.{t.slug}'] = np.zeros(1)

        dense('predictor.p1', 2 * dim, dim)
        dense('predictor.p2', dim, 1)
        return params

    def gnn_parameter_names(self, params):
        return [name for name in params if name.startswith('layers.')]


def encode_nodes(model, P):
    """H(0) per node type"""
    H = {}
    if model.config.use_node_features:
        conv = conv1d_single_filter(model.sequences, P['encoder.conv.kernel'], P['encoder.conv.bias'])
        H[NodeType.MIRNA] = linear(conv, P['encoder.me.weight'], P['encoder.me.bias'])
        for t, branch in _TEXT_BRANCH.items():
            H[t] = linear(model.text[t], P[f'encoder.{branch}.weight'], P[f'encoder.{branch}.bias'])
    else:
        for t in NODE_TYPES:
            H[t] = linear(model.random_features[t], P[f'encoder.re.{t.slug}.weight'],
                          P[f'encoder.re.{t.slug}.bias'])
    return H


def project(model, layer, H_prev, P):
    """Per-type Q, K and M projections (dim wide, head i = column block i)"""
    out = {}
    for proj in ('q', 'k', 'm'):
        out[proj] = {
            t: linear(H_prev[t], P[f'layers.{layer}.{proj}.{t.slug}.weight'],
                      P[f'layers.{layer}.{proj}.{t.slug}.bias'])
            for t in NODE_TYPES
        }
    return out


def _per_head(x, heads):
    n, dim = value(x).shape
    return reshape(x, (n, heads, dim // heads))


def hgt_attention(model, layer, H_prev, P, projections=None):
    """relation key -> (E, h) attention, softmax per (target, relation) segment"""
    projections = projections or project(model, layer, H_prev, P)
    heads = model.config.heads
    inv_sqrt_d = 1.0 / np.sqrt(model.config.head_dim)
    attention = {}
    for rel in model.relations:
        src, dst = model.edges[rel.key]
        if src.size == 0:
            continue
        k = _per_head(gather_rows(projections['k'][rel.source_type], src), heads)
        q = _per_head(gather_rows(projections['q'][rel.target_type], dst), heads)
        raw = head_dot(head_matmul(k, P[f'layers.{layer}.att.{rel.key}']), q)
        raw = scale(mul(raw, P[f'layers.{layer}.mu.{rel.key}']), inv_sqrt_d)
        attention[rel.key] = segmented_softmax(raw, dst)
    return attention


def hgt_message(model, layer, H_prev, P, projections=None):
    """relation key -> (E, h, d) messages"""
    projections = projections or project(model, layer, H_prev, P)
    heads = model.config.heads
    messages = {}
    for rel in model.relations:
        src, _ = model.edges[rel.key]
        if src.size == 0:
            continue
        m = _per_head(gather_rows(projections['m'][rel.source_type], src), heads)
        messages[rel.key] = head_matmul(m, P[f'layers.{layer}.msg.{rel.key}'])
    return messages


def hgt_aggregate(model, layer, attention, messages, H_prev, P):
    """Attention-weighted sums, summed over relations, then the gated residual"""
    dim, heads = model.config.dim, model.config.heads
    H = {}
    for t in NODE_TYPES:
        total = None
        for rel in model.relations:
            if rel.target_type != t or rel.key not in attention:
                continue
            _, dst = model.edges[rel.key]
            weighted = mul(messages[rel.key], reshape(attention[rel.key], (dst.size, heads, 1)))
            summed = scatter_sum(reshape(weighted, (dst.size, dim)), dst, model.counts[t])
            total = summed if total is None else add(total, summed)
        if total is None:
            H[t] = H_prev[t]
            continue
        update = linear(gelu(total), P[f'layers.{layer}.a.{t.slug}.weight'],
                        P[f'layers.{layer}.a.{t.slug}.bias'])
        H[t] = gate_blend(update, H_prev[t], P[f'layers.{layer}.alpha.{t.slug}'], model.has_incoming[t])
    return H


def forward(model, P):
    H = encode_nodes(model, P)
    attention = {}
    gates = {}
    for layer in range(model.config.layers):
        projections = project(model, layer, H, P)
        att = hgt_attention(model, layer, H, P, projections)
        msg = hgt_message(model, layer, H, P, projections)
        H = hgt_aggregate(model, layer, att, msg, H, P)
        attention[layer] = {key: value(a).copy() for key, a in att.items()}
        gates[layer] = {t.value: float(value(sigmoid(value(P[f'layers.{layer}.alpha.{t.slug}'])))[0])
                        for t in NODE_TYPES}
    return ForwardResult(hidden=H, attention=attention, gates=gates)


def predict_pair(H, mirna, disease, P):
    """Scores in (0, 1) for aligned arrays of miRNA and disease ordinals"""
    mirna = np.atleast_1d(np.asarray(mirna, dtype=np.int64))
    disease = np.atleast_1d(np.asarray(disease, dtype=np.int64))
    for ordinals, t in ((mirna, NodeType.MIRNA), (disease, NodeType.DISEASE)):
        n = value(H[t]).shape[0]
        if ordinals.size and (ordinals.min() < 0 or ordinals.max() >= n):
            raise NodeNotFound(f'{t.value} ordinal out of range (0..{n - 1})', code='ORDINAL_OUT_OF_RANGE')
    pair = concat([gather_rows(H[NodeType.MIRNA], mirna), gather_rows(H[NodeType.DISEASE], disease)])
    hidden = linear(pair, P['predictor.p1.weight'], P['predictor.p1.bias'])
    logit = linear(hidden, P['predictor.p2.weight'], P['predictor.p2.bias'])
    return sigmoid(reshape(logit, (mirna.size,)))


def score_pairs(model, params, mirna, disease):
    """Inference: one forward pass on plain arrays, scores as an ndarray"""
    result = forward(model, params)
    return value(predict_pair(result.hidden, mirna, disease, params)), result


def loss_and_grads(model, params, mirna, disease, labels):
    """Summed BCE over the batch and its gradient for every parameter"""
    tape = Tape()
    P = tape.bind(params)
    result = forward(model, P)
    scores = predict_pair(result.hidden, mirna, disease, P)
    loss = bce_loss(scores, labels)
    return float(value(loss)), backward(tape, loss), value(scores)


def loss_value(model, params, mirna, disease, labels):
    scores, _ = score_pairs(model, params, mirna, disease)
    return float(bce_loss(scores, labels))
