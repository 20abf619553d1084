import json
import os

import click
from flask import Blueprint, current_app

from egpmda.graph.features import DEFAULT_D_B
from egpmda.graph.store import build_graph, graph_summary, load_dataset, load_graph, save_graph
from egpmda.utils.decorators import common_options, logged_action, output_dir

graph_bp = Blueprint('graph', __name__, cli_group=None)


def graph_options(f):
    """--graph bundle or --data directory"""
    f = click.option('--data', 'data_dir', type=click.Path(file_okay=False), default=None,
                     help='Input table directory (default: EGP_DATA_DIR)')(f)
    f = click.option('--graph', 'graph_path', type=click.Path(dir_okay=False), default=None,
                     help='Graph bundle written by build-graph')(f)
    return f


def load_graph_input(graph_path=None, data_dir=None, d_b=DEFAULT_D_B):
    """A saved graph bundle if given, else a fresh build from the data directory"""
    if graph_path:
        return load_graph(graph_path)
    data_dir = data_dir or current_app.config['EGP_DATA_DIR']
    dataset = load_dataset(data_dir, d_b)
    return build_graph(dataset.table, dataset.edges, features=dataset.features)


@graph_bp.cli.command('build-graph')
@click.option('--data', 'data_dir', type=click.Path(file_okay=False), default=None,
              help='Input table directory (default: EGP_DATA_DIR)')
@click.option('--d-b', 'd_b', type=click.IntRange(min=1), default=DEFAULT_D_B,
              help='Hashed text half-width when no embeddings are supplied')
@common_options
@logged_action('build-graph')
def build_graph_command(data_dir, d_b, seed, threads, out):
    """Load the input tables and write graph.bin plus graph_summary.json"""
    graph = load_graph_input(data_dir=data_dir, d_b=d_b)
    out_dir = output_dir(out)
    save_graph(graph, os.path.join(out_dir, 'graph.bin'))
    summary = graph_summary(graph)
    with open(os.path.join(out_dir, 'graph_summary.json'), 'w') as fh:
        json.dump(summary, fh, sort_keys=True, indent=1)
        fh.write('\n')
    current_app.logger.info(f"graph: {summary['nodes']}")
    return {'out_dir': out_dir, 'nodes': summary['nodes'], 'relations': len(summary['edges'])}
