import os

import click
from flask import Blueprint, current_app

from egpmda.evaluator.metrics import mean_reports
from egpmda.evaluator.report import (
    candidate_pairs, dataset_stats, evaluate_checkpoint, rank_candidates, write_json, write_predictions
)
from egpmda.graph.features import read_tsv
from egpmda.graph.routes import graph_options, load_graph_input
from egpmda.model.checkpoint import load_checkpoint
from egpmda.split.bench import load_manifest
from egpmda.utils.decorators import common_options, logged_action, output_dir, run_seed
from egpmda.utils.errors import EvaluationError

evaluator_bp = Blueprint('evaluator', __name__, cli_group=None)


def checkpoint_graph(checkpoint, graph_path, data_dir):
    return load_graph_input(graph_path, data_dir, checkpoint.d_b)


@evaluator_bp.cli.command('evaluate')
@graph_options
@click.option('--manifest', 'manifest_path', type=click.Path(dir_okay=False), required=True)
@click.option('--checkpoint', 'checkpoint_paths', type=click.Path(dir_okay=False), multiple=True, required=True,
              help='Repeat checkpoint; give several to average their reports')
@common_options
@logged_action('evaluate')
def evaluate_command(graph_path, data_dir, manifest_path, checkpoint_paths, seed, threads, out):
    """Score the test partition; writes report.json and predictions.tsv"""
    manifest = load_manifest(manifest_path)
    checkpoints = [load_checkpoint(path) for path in checkpoint_paths]
    graph = checkpoint_graph(checkpoints[0], graph_path, data_dir)

    reports = []
    first_frame = None
    for path, checkpoint in zip(checkpoint_paths, checkpoints):
        current_app.logger.info(f'evaluating {path}')
        report, frame = evaluate_checkpoint(graph, manifest, checkpoint)
        reports.append(report)
        if first_frame is None:
            first_frame = frame

    out_dir = output_dir(out)
    payload = {'mean': mean_reports(reports), 'runs': reports, 'checkpoints': list(checkpoint_paths)}
    write_json(payload, os.path.join(out_dir, 'report.json'))
    write_predictions(first_frame, graph.table, os.path.join(out_dir, 'predictions.tsv'))
    return {
        'out_dir': out_dir,
        'checkpoints': len(reports),
        'balanced_auc': payload['mean']['balanced']['auc'],
        'balanced_aupr': payload['mean']['balanced']['aupr']
    }


@evaluator_bp.cli.command('predict')
@graph_options
@click.option('--checkpoint', 'checkpoint_path', type=click.Path(dir_okay=False), required=True)
@click.option('--manifest', 'manifest_path', type=click.Path(dir_okay=False), default=None,
              help='Marks pairs already known as verified')
@click.option('--pairs', 'pairs_path', type=click.Path(dir_okay=False), default=None,
              help='TSV with mirna_id and disease_id columns')
@click.option('--disease', default=None, help='Rank every miRNA for this disease')
@click.option('--mirna', default=None, help='Rank every disease for this miRNA')
@click.option('--top', type=click.IntRange(min=1), default=None)
@common_options
@logged_action('predict')
def predict_command(graph_path, data_dir, checkpoint_path, manifest_path, pairs_path, disease, mirna, top,
                    seed, threads, out):
    """Rank candidate pairs with one checkpoint; writes ranked.tsv"""
    given = [name for name, value in (('--pairs', pairs_path), ('--disease', disease), ('--mirna', mirna))
             if value is not None]
    if len(given) != 1:
        raise EvaluationError('give exactly one of --pairs, --disease or --mirna', code='NO_CANDIDATES')

    checkpoint = load_checkpoint(checkpoint_path)
    graph = checkpoint_graph(checkpoint, graph_path, data_dir)
    model = checkpoint.bind(graph)
    pairs = None
    if pairs_path:
        frame = read_tsv(pairs_path, ['mirna_id', 'disease_id'])
        pairs = list(zip(frame['mirna_id'], frame['disease_id']))
    candidates = candidate_pairs(graph.table, disease=disease, mirna=mirna, pairs=pairs)
    verified = load_manifest(manifest_path).verified() if manifest_path else ()

    ranking = rank_candidates(model, checkpoint.params, graph.table, candidates, verified, top)
    out_dir = output_dir(out)
    ranking.to_csv(os.path.join(out_dir, 'ranked.tsv'), sep='\t', index=False, float_format='%.6f')
    return {
        'out_dir': out_dir,
        'candidates': len(candidates),
        'written': int(len(ranking)),
        'top': ranking.head(5).to_dict(orient='records')
    }


@evaluator_bp.cli.command('stats')
@graph_options
@click.option('--manifest', 'manifest_path', type=click.Path(dir_okay=False), required=True)
@click.option('--bins', type=click.IntRange(min=1), default=10)
@common_options
@logged_action('stats')
def stats_command(graph_path, data_dir, manifest_path, bins, seed, threads, out):
    """Common-neighbor histograms and the degree heatmap; writes stats.json and adjacency_heatmap.tsv"""
    graph = load_graph_input(graph_path, data_dir)
    manifest = load_manifest(manifest_path)
    stats, heatmap = dataset_stats(graph, manifest, run_seed(seed), bins)

    out_dir = output_dir(out)
    write_json(stats, os.path.join(out_dir, 'stats.json'))
    heatmap.to_csv(os.path.join(out_dir, 'adjacency_heatmap.tsv'), sep='\t', index=False)
    return {'out_dir': out_dir, 'partitions': stats['partitions'], 'medians': stats['medians']}
