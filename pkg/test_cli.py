"""End-to-end tests for the command-line surface on the synthetic sample tables"""
import contextlib
import json

import pandas as pd
import pytest

from app import dispatch
from egpmda.database import RunLog

RUN_CONFIG = {
    'dim': 8, 'heads': 2, 'layers': 1, 'kernel_size': 2, 'max_epochs': 2, 'patience': 1, 'repeats': 1,
    'negative_ratio_test': 2, 'y1': 2014, 'y2': 2016, 'seed': 5
}


def _payload(result):
    """The success envelope among whatever the command logged"""
    for line in result.output.splitlines():
        if line.startswith('{"data"') or line.startswith('{"success"'):
            envelope = json.loads(line)
            assert envelope['success'] is True
            return envelope['data']
    raise AssertionError(f'no success line in output:\n{result.output}')


def _invoke(runner, *args):
    result = runner.invoke(args=[str(a) for a in args])
    assert result.exit_code == 0, result.output
    return _payload(result)


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / 'train.json'
    path.write_text(json.dumps(RUN_CONFIG))
    return path


@pytest.fixture
def pipeline(tmp_path, runner, sample_data, config_file):
    """build-graph, split and train into one run directory"""
    out = tmp_path / 'out'
    _invoke(runner, 'build-graph', '--data', sample_data, '--out', out)
    _invoke(runner, 'split', '--graph', out / 'graph.bin', '--data', sample_data, '--config', config_file,
            '--out', out)
    _invoke(runner, 'train', '--graph', out / 'graph.bin', '--manifest', out / 'split_manifest.json',
            '--config', config_file, '--out', out / 'train')
    return out


def test_build_graph_and_split(tmp_path, runner, sample_data, config_file):
    out = tmp_path / 'out'
    data = _invoke(runner, 'build-graph', '--data', sample_data, '--out', out)
    assert data['nodes'] == {'miRNA': 16, 'disease': 12, 'PCG': 8}
    assert (out / 'graph.bin').exists()
    summary = json.loads((out / 'graph_summary.json').read_text())
    assert summary['nodes'] == data['nodes']

    data = _invoke(runner, 'split', '--graph', out / 'graph.bin', '--data', sample_data, '--config', config_file,
                   '--out', out)
    manifest = json.loads((out / 'split_manifest.json').read_text())
    assert manifest['seed'] == 5 and manifest['y1'] == 2014
    assert data['positives']['test'] == len([r for r in manifest['partitions']['test'] if r[2] == 1])


def test_seed_flag_overrides_config_file(tmp_path, runner, sample_data, config_file):
    out = tmp_path / 'out'
    _invoke(runner, 'split', '--data', sample_data, '--config', config_file, '--seed', 11, '--out', out)
    assert json.loads((out / 'split_manifest.json').read_text())['seed'] == 11


def test_train_evaluate_predict_explain(app, runner, pipeline, sample_data):
    train_dir = pipeline / 'train'
    history = json.loads((train_dir / 'history.json').read_text())
    assert history['seeds'] == [5]
    checkpoint = train_dir / 'repeat_0' / 'checkpoint.bin'
    assert checkpoint.exists()

    graph = pipeline / 'graph.bin'
    manifest = pipeline / 'split_manifest.json'
    data = _invoke(runner, 'evaluate', '--graph', graph, '--manifest', manifest, '--checkpoint', checkpoint,
                   '--checkpoint', checkpoint, '--out', pipeline / 'eval')
    assert data['checkpoints'] == 2
    report = json.loads((pipeline / 'eval' / 'report.json').read_text())
    assert report['mean']['balanced']['auc'] == pytest.approx(report['runs'][0]['balanced']['auc'])
    predictions = pd.read_csv(pipeline / 'eval' / 'predictions.tsv', sep='\t')
    assert len(predictions) == report['runs'][0]['counts']['imbalanced_pairs']

    data = _invoke(runner, 'predict', '--graph', graph, '--checkpoint', checkpoint, '--manifest', manifest,
                   '--disease', 'D000001', '--top', 5, '--out', pipeline / 'predict')
    assert data['candidates'] == 16 and data['written'] == 5
    ranked = pd.read_csv(pipeline / 'predict' / 'ranked.tsv', sep='\t')
    assert list(ranked['score']) == sorted(ranked['score'], reverse=True)

    _invoke(runner, 'stats', '--graph', graph, '--manifest', manifest, '--bins', 4, '--out', pipeline / 'stats')
    heatmap = pd.read_csv(pipeline / 'stats' / 'adjacency_heatmap.tsv', sep='\t')
    assert len(heatmap) == 16

    data = _invoke(runner, 'explain', '--graph', graph, '--checkpoint', checkpoint, '--mirna', 'mir-100',
                   '--disease', 'D000000', '--out', pipeline / 'explain')
    assert data['mirna'] == 'MIMAT0000000'
    assert (pipeline / 'explain' / 'explain.json').exists() and (pipeline / 'explain' / 'explain.dot').exists()

    _invoke(runner, 'mu-report', '--checkpoint', checkpoint, '--out', pipeline / 'mu')
    mu = json.loads((pipeline / 'mu' / 'mu_report.json').read_text())
    assert mu['checkpoints'] == 1 and len(mu['layers']) == 1

    with app.app_context():
        actions = {log.action for log in RunLog.query.filter_by(status='ok')}
    assert actions >= {'build-graph', 'split', 'train', 'evaluate', 'predict', 'stats', 'explain', 'mu-report'}


def test_failure_prints_one_line_and_logs_run(app, tmp_path, runner, sample_data):
    result = runner.invoke(args=['train', '--data', str(sample_data), '--manifest', str(tmp_path / 'missing.json'),
                                 '--out', str(tmp_path / 'out')])
    assert result.exit_code == 1
    assert 'error[FILE_NOT_FOUND]' in result.output
    with app.app_context():
        log = RunLog.query.filter_by(action='train').one()
    assert log.status == 'failed' and log.code == 'FILE_NOT_FOUND'
    assert log.created_at is not None
    assert log.to_dict()['createdAt'].startswith(str(log.created_at.year))


def test_threads_flag_limits_native_thread_pools(app, monkeypatch, tmp_path, runner, sample_data):
    seen = []

    def recording_limits(limits=None):
        seen.append(limits)
        return contextlib.nullcontext()

    monkeypatch.setattr('egpmda.utils.decorators.threadpool_limits', recording_limits)
    _invoke(runner, 'build-graph', '--data', sample_data, '--threads', 3, '--out', tmp_path / 'a')
    app.config['EGP_THREADS'] = 2
    _invoke(runner, 'build-graph', '--data', sample_data, '--out', tmp_path / 'b')
    assert seen == [3, 2]

    result = runner.invoke(args=['build-graph', '--data', str(sample_data), '--threads', '0'])
    assert result.exit_code == 2


def test_invalid_config_is_a_validation_error(tmp_path, runner, sample_data):
    config = tmp_path / 'bad.json'
    config.write_text(json.dumps({'dim': 10, 'heads': 4}))
    result = runner.invoke(args=['split', '--data', str(sample_data), '--config', str(config),
                                 '--out', str(tmp_path / 'out')])
    assert result.exit_code == 1
    assert 'error[VALIDATION_ERROR]' in result.output


def test_predict_needs_exactly_one_candidate_source(pipeline, runner):
    checkpoint = pipeline / 'train' / 'repeat_0' / 'checkpoint.bin'
    result = runner.invoke(args=['predict', '--graph', str(pipeline / 'graph.bin'), '--checkpoint', str(checkpoint),
                                 '--disease', 'D000001', '--mirna', 'mir-100'])
    assert result.exit_code == 1
    assert 'error[NO_CANDIDATES]' in result.output


def test_dispatch_exit_codes(monkeypatch, tmp_path, sample_data):
    monkeypatch.setenv('DATABASE_URL', 'sqlite://')
    monkeypatch.setenv('EGP_OUT_DIR', str(tmp_path / 'runs'))
    assert dispatch(['train', '--no-such-flag']) == 2
    assert dispatch(['no-such-command']) == 2
    assert dispatch(['build-graph', '--data', str(tmp_path / 'nowhere')]) == 1
    assert dispatch(['build-graph', '--data', str(sample_data)]) == 0
    assert (tmp_path / 'runs' / 'graph.bin').exists()
