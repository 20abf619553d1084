import click
from flask import Blueprint, current_app

from egpmda.graph.routes import graph_options, load_graph_input
from egpmda.graph.store import graph_variant
from egpmda.split.bench import load_manifest
from egpmda.trainer.loop import PHASES, run_repeats
from egpmda.utils.decorators import command_config, common_options, logged_action, output_dir

trainer_bp = Blueprint('trainer', __name__, cli_group=None)


@trainer_bp.cli.command('train')
@graph_options
@click.option('--manifest', 'manifest_path', type=click.Path(dir_okay=False), required=True,
              help='split_manifest.json written by split')
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
              help='Run configuration JSON')
@click.option('--phase', type=click.Choice(PHASES), default=None)
@click.option('--repeats', type=click.IntRange(min=1), default=None)
@click.option('--condition', type=click.IntRange(0, 4), default=None, help='Ablation condition')
@common_options
@logged_action('train')
def train_command(graph_path, data_dir, manifest_path, config_path, phase, repeats, condition, seed, threads, out):
    """Train one or more repeats; writes repeat_<i>/checkpoint.bin, repeat_<i>/history.json and history.json"""
    config = command_config(config_path, seed, phase=phase, repeats=repeats, condition=condition)
    graph = load_graph_input(graph_path, data_dir, config.d_b)
    graph = graph_variant(graph, **config.graph_switches())
    manifest = load_manifest(manifest_path)

    out_dir = output_dir(out)
    current_app.logger.info(f'training {config.repeats} repeat(s), phase {config.phase}, seed {config.seed}')
    _, aggregate = run_repeats(graph, manifest, config.model_config(), config.train_config(), out_dir)
    return {
        'out_dir': out_dir,
        'phase': config.phase,
        'repeats': aggregate['repeats'],
        'seeds': aggregate['seeds'],
        'mean_final_train_loss': aggregate['mean_final_train_loss'],
        'mean_best_val_accuracy': aggregate['mean_best_val_accuracy']
    }
