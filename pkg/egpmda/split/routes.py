import os

import click
from flask import Blueprint, current_app

from egpmda.graph.routes import graph_options, load_graph_input
from egpmda.graph.types import NodeType
from egpmda.split.bench import build_manifest, load_mda_records, save_manifest
from egpmda.utils.decorators import command_config, common_options, logged_action, output_dir

split_bp = Blueprint('split', __name__, cli_group=None)


@split_bp.cli.command('split')
@graph_options
@click.option('--mda', 'mda_path', type=click.Path(dir_okay=False), default=None,
              help='mda.tsv (default: <data>/mda.tsv)')
@click.option('--y1', type=int, default=None, help='First validation year')
@click.option('--y2', type=int, default=None, help='Last validation year')
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None)
@common_options
@logged_action('split')
def split_command(graph_path, data_dir, mda_path, y1, y2, config_path, seed, threads, out):
    """Time-based split with sampled negatives; writes split_manifest.json"""
    config = command_config(config_path, seed, y1=y1, y2=y2)
    graph = load_graph_input(graph_path, data_dir, config.d_b)
    mda_path = mda_path or os.path.join(data_dir or current_app.config['EGP_DATA_DIR'], 'mda.tsv')

    records, dropped = load_mda_records(mda_path, graph.table)
    manifest = build_manifest(
        records,
        graph.table.count(NodeType.MIRNA),
        graph.table.count(NodeType.DISEASE),
        seed=config.seed,
        y1=config.y1,
        y2=config.y2,
        negative_ratio_train=config.negative_ratio_train,
        negative_ratio_test=config.negative_ratio_test,
        dropped=dropped
    )
    out_dir = output_dir(out)
    save_manifest(manifest, os.path.join(out_dir, 'split_manifest.json'))
    return {
        'out_dir': out_dir,
        'positives': {name: len(manifest.positives(name)) for name in manifest.partitions},
        'medians': {'mirna': manifest.mirna_median, 'disease': manifest.disease_median},
        'dropped': dropped
    }
