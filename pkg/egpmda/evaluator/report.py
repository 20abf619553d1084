import json
import logging

import numpy as np
import pandas as pd

from egpmda.evaluator.metrics import (
    NEIGHBOR_TYPES, adjacency_heatmap, aupr, auc, common_neighbor_stat, neighbor_histogram, ranked,
    recall_at_percent, region_counts, scored_frame, subset_recall, threshold_metrics,
    top_region_distribution
)
from egpmda.graph.store import with_mda_edges
from egpmda.graph.types import NodeType
from egpmda.model.network import score_pairs
from egpmda.split.bench import PARTITIONS, sample_negatives
from egpmda.utils.errors import EvaluationError

logger = logging.getLogger(__name__)

RECALL_PERCENTS = (5, 10)


def score_rows(model, params, rows, regions=None):
    """Scored-pair frame for manifest rows [mirna, disease, label]"""
    rows = np.asarray(rows, dtype=np.int64).reshape(-1, 3)
    scores, _ = score_pairs(model, params, rows[:, 0], rows[:, 1])
    return scored_frame(rows[:, 0], rows[:, 1], scores, rows[:, 2], regions)


def evaluate_model(model, params, manifest):
    """Balanced and imbalanced test views plus the per-region table"""
    test_rows = manifest.partitions['test']
    if not test_rows:
        raise EvaluationError('manifest has no test partition', code='EMPTY_PAIRS')
    imbalanced = score_rows(model, params, test_rows, manifest.regions['test'])
    n_pos = int((imbalanced['label'] == 1).sum())
    positives = imbalanced[imbalanced['label'] == 1]
    negatives = imbalanced[imbalanced['label'] == 0]
    balanced = pd.concat([positives, negatives.iloc[:n_pos]])

    recall_by_region = subset_recall(imbalanced)
    counts = region_counts(imbalanced)
    report = {
        'balanced': {'auc': auc(balanced), 'aupr': aupr(balanced), **threshold_metrics(balanced)},
        'imbalanced': {
            'auc': auc(imbalanced),
            'aupr': aupr(imbalanced),
            'recall_at': {str(pct): recall_at_percent(imbalanced, pct) for pct in RECALL_PERCENTS}
        },
        'regions': {tag: {'positives': counts[tag], 'recall': recall_by_region[tag]} for tag in recall_by_region},
        'top_regions': {str(pct): top_region_distribution(imbalanced, pct) for pct in RECALL_PERCENTS},
        'counts': {
            'test_positives': n_pos,
            'balanced_pairs': int(len(balanced)),
            'imbalanced_pairs': int(len(imbalanced))
        },
        'medians': {'mirna': manifest.mirna_median, 'disease': manifest.disease_median}
    }
    logger.info(f"balanced AUC {report['balanced']['auc']:.4f}, AUPR {report['balanced']['aupr']:.4f}")
    return report, imbalanced


def evaluate_checkpoint(graph, manifest, checkpoint):
    model = checkpoint.bind(graph)
    return evaluate_model(model, checkpoint.params, manifest)


def predictions_table(frame, table):
    out = ranked(frame).copy()
    out.insert(0, 'mirna_id', [table.id_of(NodeType.MIRNA, m) for m in out['mirna']])
    out.insert(1, 'disease_id', [table.id_of(NodeType.DISEASE, d) for d in out['disease']])
    columns = ['mirna_id', 'disease_id', 'score', 'label'] + (['region'] if 'region' in out else [])
    return out[columns]


def write_predictions(frame, table, path):
    predictions_table(frame, table).to_csv(path, sep='\t', index=False, float_format='%.6f')


def write_json(payload, path):
    with open(path, 'w') as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write('\n')


def candidate_pairs(table, disease=None, mirna=None, pairs=None):
    """Ordinal pairs to score: explicit ID pairs, all miRNAs for a disease or all diseases for a miRNA"""
    if pairs is not None:
        return [(table.require(m, NodeType.MIRNA), table.require(d, NodeType.DISEASE)) for m, d in pairs]
    if disease is not None:
        d = table.require(disease, NodeType.DISEASE)
        return [(m, d) for m in range(table.count(NodeType.MIRNA))]
    if mirna is not None:
        m = table.require(mirna, NodeType.MIRNA)
        return [(m, d) for d in range(table.count(NodeType.DISEASE))]
    raise EvaluationError('nothing to predict: give pairs, a disease or a miRNA', code='NO_CANDIDATES')


def rank_candidates(model, params, table, candidates, verified=(), top=None):
    """Ranked table of candidate pairs with names and a verified flag"""
    if not candidates:
        raise EvaluationError('no candidate pairs', code='NO_CANDIDATES')
    mirna = np.array([m for m, _ in candidates], dtype=np.int64)
    disease = np.array([d for _, d in candidates], dtype=np.int64)
    scores, _ = score_pairs(model, params, mirna, disease)
    verified = set(verified)
    frame = scored_frame(mirna, disease, scores, [int((m, d) in verified) for m, d in candidates])
    frame = ranked(frame)
    if top:
        frame = frame.iloc[:top]
    return pd.DataFrame({
        'mirna_id': [table.id_of(NodeType.MIRNA, m) for m in frame['mirna']],
        'mirna_name': [table.entry(NodeType.MIRNA, m).name for m in frame['mirna']],
        'disease_id': [table.id_of(NodeType.DISEASE, d) for d in frame['disease']],
        'disease_name': [table.entry(NodeType.DISEASE, d).name for d in frame['disease']],
        'score': frame['score'].to_numpy(),
        'verified': frame['label'].to_numpy()
    })


def common_neighbor_summary(graph, manifest, seed=0, bins=10):
    """CM statistics for verified pairs and an equal number of unverified pairs"""
    verified = sorted(manifest.verified())
    full = with_mda_edges(graph, verified)
    random_pairs = sample_negatives(verified, manifest.n_mirna, manifest.n_disease, len(verified), seed,
                                    'common-neighbors')
    summary = {}
    for neighbor_type in NEIGHBOR_TYPES:
        summary[neighbor_type] = {
            'verified': neighbor_histogram(common_neighbor_stat(full, verified, neighbor_type), bins),
            'random': neighbor_histogram(common_neighbor_stat(full, random_pairs, neighbor_type), bins)
        }
    return summary


def dataset_stats(graph, manifest, seed=0, bins=10):
    """Everything the stats command writes: CM histograms, heatmap and partition sizes"""
    region_map = manifest.region_map()
    heatmap = adjacency_heatmap(sorted(manifest.verified()), region_map, bins)
    partitions = {name: {'positives': len(manifest.positives(name)), 'negatives': len(manifest.negatives(name))}
                  for name in PARTITIONS}
    return {
        'partitions': partitions,
        'medians': {'mirna': region_map.mirna_median, 'disease': region_map.disease_median},
        'common_neighbors': common_neighbor_summary(graph, manifest, seed, bins)
    }, heatmap
