from functools import wraps
import json
import os

import click
from flask import current_app
from sqlalchemy.exc import SQLAlchemyError
from threadpoolctl import threadpool_limits

from egpmda.database import db, RunLog
from egpmda.utils.config import load_run_config
from egpmda.utils.errors import EgpError


def common_options(f):
    """--seed, --threads and --out, shared by every command"""
    f = click.option('--out', 'out', type=click.Path(file_okay=False), default=None,
                     help='Output directory (default: EGP_OUT_DIR)')(f)
    f = click.option('--threads', type=click.IntRange(min=1), default=None,
                     help='Worker threads (default: EGP_THREADS)')(f)
    f = click.option('--seed', type=int, default=None, help='Random seed (default: EGP_SEED)')(f)
    return f


def output_dir(out):
    """Resolve and create the command's output directory"""
    path = out or current_app.config['EGP_OUT_DIR']
    os.makedirs(path, exist_ok=True)
    return path


def run_seed(seed):
    return current_app.config['EGP_SEED'] if seed is None else seed


def record_run(action, status, code=None, details=None, seed=None, out_dir=None):
    """Add a RunLog row; a registry failure never fails the command itself"""
    log = RunLog(
        action=action,
        status=status,
        code=code,
        details=json.dumps(details, sort_keys=True, default=str) if details is not None else None,
        seed=seed,
        out_dir=out_dir
    )
    try:
        db.session.add(log)
        db.session.commit()
    except SQLAlchemyError as e:
        db.session.rollback()
        current_app.logger.warning(f'could not record {action} run: {e}')


def success_output(data):
    """Print the success envelope for a command"""
    click.echo(json.dumps({'success': True, 'data': data}, sort_keys=True, default=str))


def logged_action(action):
    """Run a command body, log it in RunLog and map EgpError to a one-line diagnostic"""
    def decorator(f):
        @wraps(f)
        def decorated_function(*args, **kwargs):
            seed = kwargs.get('seed')
            out = kwargs.get('out')
            threads = kwargs.get('threads') or current_app.config['EGP_THREADS']
            try:
                # caps the BLAS and OpenMP pools numpy and scikit-learn run on
                with threadpool_limits(limits=threads):
                    summary = f(*args, **kwargs) or {}
            except EgpError as e:
                current_app.logger.error(e.one_line())
                record_run(action, 'failed', e.code, e.to_dict()['error'], seed, out)
                click.echo(e.one_line(), err=True)
                raise click.exceptions.Exit(1)

            record_run(action, 'ok', None, summary, run_seed(seed), summary.get('out_dir', out))
            success_output(summary)
            return summary
        return decorated_function
    return decorator


def command_config(config_path, seed=None, **overrides):
    """Run config for a command: file values, then flags; EGP_SEED when there is neither a file nor --seed"""
    if seed is None and not config_path:
        seed = current_app.config['EGP_SEED']
    return load_run_config(config_path, {'seed': seed, **overrides})
