import os

import click
from flask import Blueprint

from egpmda.evaluator.report import write_json
from egpmda.explain.explain import EXPORT_FORMATS, explain_pair, export_explanation, mu_hierarchy
from egpmda.graph.routes import graph_options, load_graph_input
from egpmda.model.checkpoint import load_checkpoint
from egpmda.utils.decorators import common_options, logged_action, output_dir

explain_bp = Blueprint('explain', __name__, cli_group=None)


@explain_bp.cli.command('explain')
@graph_options
@click.option('--checkpoint', 'checkpoint_path', type=click.Path(dir_okay=False), required=True)
@click.option('--mirna', required=True, help='miRNA ID or alias')
@click.option('--disease', required=True, help='Disease ID or alias')
@click.option('--format', 'formats', type=click.Choice(EXPORT_FORMATS), multiple=True,
              help='Export format, repeatable (default: json and dot)')
@common_options
@logged_action('explain')
def explain_command(graph_path, data_dir, checkpoint_path, mirna, disease, formats, seed, threads, out):
    """Attention subgraph for one pair; writes explain.json and/or explain.dot"""
    checkpoint = load_checkpoint(checkpoint_path)
    graph = load_graph_input(graph_path, data_dir, checkpoint.d_b)
    model = checkpoint.bind(graph)
    subgraph = explain_pair(model, checkpoint.params, mirna, disease)

    out_dir = output_dir(out)
    written = []
    for fmt in formats or EXPORT_FORMATS:
        path = os.path.join(out_dir, f'explain.{fmt}')
        export_explanation(subgraph, fmt, path)
        written.append(path)
    return {
        'out_dir': out_dir,
        'mirna': subgraph.mirna_id,
        'disease': subgraph.disease_id,
        'score': subgraph.score,
        'nodes': len(subgraph.nodes),
        'edges': len(subgraph.edges),
        'files': written
    }


@explain_bp.cli.command('mu-report')
@click.option('--checkpoint', 'checkpoint_paths', type=click.Path(dir_okay=False), multiple=True, required=True)
@common_options
@logged_action('mu-report')
def mu_report_command(checkpoint_paths, seed, threads, out):
    """Mean mu per layer and meta-relation over the given checkpoints; writes mu_report.json"""
    report = mu_hierarchy([load_checkpoint(path) for path in checkpoint_paths])
    out_dir = output_dir(out)
    write_json(report.to_dict(), os.path.join(out_dir, 'mu_report.json'))
    return {
        'out_dir': out_dir,
        'checkpoints': report.checkpoints,
        'highlighted': [report.highlighted(layer) for layer in range(len(report.means))]
    }
