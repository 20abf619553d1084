"""Ranking and threshold metrics over scored miRNA-disease pairs.

Scored pairs travel as a DataFrame with columns mirna, disease, score, label
and (optionally) region.
"""
import numpy as np
import pandas as pd
from sklearn.metrics import average_precision_score, confusion_matrix, roc_auc_score

from egpmda.graph.types import NodeType
from egpmda.split.bench import REGION_TAGS
from egpmda.utils.errors import EvaluationError

THRESHOLD = 0.5
NEIGHBOR_TYPES = ('miRNA', 'disease', 'PCG', 'all')


def scored_frame(mirna, disease, scores, labels, regions=None):
    frame = pd.DataFrame({
        'mirna': np.asarray(mirna, dtype=np.int64),
        'disease': np.asarray(disease, dtype=np.int64),
        'score': np.asarray(scores, dtype=np.float64),
        'label': np.asarray(labels, dtype=np.int64)
    })
    if regions is not None:
        frame['region'] = list(regions)
    if not np.all(np.isfinite(frame['score'])):
        raise EvaluationError('scores must be finite', code='NON_FINITE_SCORE')
    return frame


def _classes(pairs):
    labels = pairs['label'].to_numpy()
    return int(np.sum(labels == 1)), int(np.sum(labels == 0))


def auc(pairs):
    positives, negatives = _classes(pairs)
    if positives == 0 or negatives == 0:
        raise EvaluationError('AUC needs at least one positive and one negative', code='SINGLE_CLASS')
    return float(roc_auc_score(pairs['label'], pairs['score']))


def aupr(pairs):
    positives, _ = _classes(pairs)
    if positives == 0:
        raise EvaluationError('AUPR needs at least one positive', code='NO_POSITIVES')
    return float(average_precision_score(pairs['label'], pairs['score']))


def threshold_metrics(pairs, threshold=THRESHOLD):
    """Accuracy, precision, recall and F1 with score >= threshold as positive"""
    if len(pairs) == 0:
        raise EvaluationError('no pairs to evaluate', code='EMPTY_PAIRS')
    predicted = (pairs['score'].to_numpy() >= threshold).astype(np.int64)
    tn, fp, fn, tp = confusion_matrix(pairs['label'], predicted, labels=[0, 1]).ravel()
    precision_undefined = bool(tp + fp == 0)
    precision = 0.0 if precision_undefined else tp / (tp + fp)
    recall = 0.0 if tp + fn == 0 else tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return {
        'acc': float((tp + tn) / len(pairs)),
        'precision': float(precision),
        'recall': float(recall),
        'f1': float(f1),
        'precision_undefined': precision_undefined
    }


def ranked(pairs):
    """Score descending, then (mirna, disease) ascending"""
    order = np.lexsort((pairs['disease'].to_numpy(), pairs['mirna'].to_numpy(), -pairs['score'].to_numpy()))
    return pairs.iloc[order]


def top_n(pairs, pct):
    if not 0 < pct <= 100:
        raise EvaluationError(f'percentage must be in (0, 100], got {pct}', code='BAD_PERCENT')
    n = int(pct * len(pairs) // 100)
    return ranked(pairs).iloc[:n]


def recall_at_percent(pairs, pct):
    positives, _ = _classes(pairs)
    top = top_n(pairs, pct)
    if positives == 0:
        return 0.0
    return float(top['label'].sum() / positives)


def subset_recall(pairs, threshold=THRESHOLD):
    """Region tag -> detected / positives in that region; tags without positives are omitted"""
    positives = pairs[pairs['label'] == 1]
    result = {}
    for tag in REGION_TAGS:
        group = positives[positives['region'] == tag]
        if len(group):
            result[tag] = float(np.mean(group['score'].to_numpy() >= threshold))
    return result


def region_counts(pairs):
    positives = pairs[pairs['label'] == 1]
    counts = positives['region'].value_counts()
    return {tag: int(counts[tag]) for tag in REGION_TAGS if tag in counts}


def top_region_distribution(pairs, pct):
    """Region tag counts among the top pct% ranked pairs"""
    counts = top_n(pairs, pct)['region'].value_counts()
    return {tag: int(counts.get(tag, 0)) for tag in REGION_TAGS}


def neighbor_sets(graph, node_type, ordinal, neighbor_type='all'):
    """(type, ordinal) neighbors over every non-self relation into the node"""
    found = set()
    for rel in graph.relations:
        if rel.is_self_loop or rel.target_type != node_type:
            continue
        if neighbor_type != 'all' and rel.source_type.value != neighbor_type:
            continue
        offsets, indices = graph.adjacency[rel.key]
        for s in indices[offsets[ordinal]:offsets[ordinal + 1]]:
            found.add((rel.source_type.value, int(s)))
    return found


def common_neighbor_stat(graph, pairs, neighbor_type='all'):
    """|N_m & N_d| / |N_m | N_d| per pair; NaN when the union is empty.

    `graph` should already carry every MDA as an edge; the query nodes
    themselves are never counted as neighbors.
    """
    if neighbor_type not in NEIGHBOR_TYPES:
        raise EvaluationError(f'unknown neighbor type {neighbor_type!r}', code='BAD_NEIGHBOR_TYPE')
    values = np.empty(len(pairs))
    for i, (m, d) in enumerate(pairs):
        query = {(NodeType.MIRNA.value, int(m)), (NodeType.DISEASE.value, int(d))}
        n_m = neighbor_sets(graph, NodeType.MIRNA, m, neighbor_type) - query
        n_d = neighbor_sets(graph, NodeType.DISEASE, d, neighbor_type) - query
        union = n_m | n_d
        values[i] = len(n_m & n_d) / len(union) if union else np.nan
    return values


def neighbor_histogram(values, bins=10):
    finite = values[~np.isnan(values)]
    counts, edges = np.histogram(finite, bins=bins, range=(0.0, 1.0))
    return {
        'pairs': int(values.size),
        'nan': int(values.size - finite.size),
        'zero_fraction': float(np.mean(finite == 0)) if finite.size else None,
        'bins': edges.tolist(),
        'counts': counts.tolist()
    }


def adjacency_heatmap(pairs, region_map, bins=10):
    """Pair counts per (miRNA degree bin, disease degree bin), nodes ranked by known degree"""
    def bin_of(degree):
        rank = np.empty(degree.size, dtype=np.int64)
        rank[np.argsort(-degree, kind='stable')] = np.arange(degree.size)
        return rank * bins // max(degree.size, 1)

    mirna_bin = bin_of(region_map.mirna_degree)
    disease_bin = bin_of(region_map.disease_degree)
    grid = np.zeros((bins, bins), dtype=np.int64)
    for m, d in pairs:
        grid[mirna_bin[m], disease_bin[d]] += 1
    rows = [{'mirna_bin': i, 'disease_bin': j, 'count': int(grid[i, j])}
            for i in range(bins) for j in range(bins)]
    return pd.DataFrame(rows, columns=['mirna_bin', 'disease_bin', 'count'])


def mean_reports(reports):
    """Element-wise mean of numeric leaves across repeat reports"""
    first = reports[0]
    if isinstance(first, dict):
        keys = [k for k in first if all(isinstance(r, dict) and k in r for r in reports)]
        return {k: mean_reports([r[k] for r in reports]) for k in keys}
    if isinstance(first, bool) or not isinstance(first, (int, float)):
        return first
    return float(np.mean(reports))

