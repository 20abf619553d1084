"""Optimization loop, stopping rules and multi-repeat orchestration"""
import json
import logging
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from marshmallow import Schema, fields

from egpmda.graph.store import with_mda_edges
from egpmda.model.checkpoint import save_checkpoint
from egpmda.model.network import EgpmdaModel, loss_and_grads, score_pairs
from egpmda.numerics.optim import AdamState, adam_step, make_rng
from egpmda.numerics.tensor import bce_loss
from egpmda.split.bench import sample_negatives
from egpmda.utils.errors import NumericsError, TrainingError

logger = logging.getLogger(__name__)

PHASES = ('select', 'final', 'all')
PHASE_PARTITIONS = {
    'select': ('train',),
    'final': ('train', 'val'),
    'all': ('train', 'val', 'test')
}
THRESHOLD = 0.5


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 50
    patience: int = 5
    lr: float = 0.001
    seed: int = 0
    repeats: int = 5
    phase: str = 'select'
    batch_size: int = None
    resample_negatives: bool = True
    early_stopping: bool = True
    negative_ratio: int = 1

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainHistory:
    phase: str
    seed: int
    epochs: list = field(default_factory=list)
    best_epoch: int = 0
    stop_reason: str = ''

    def train_losses(self):
        return [e['train_loss'] for e in self.epochs]


class EpochSchema(Schema):
    epoch = fields.Int(required=True)
    train_loss = fields.Float(required=True)
    train_accuracy = fields.Float(required=True)
    val_loss = fields.Float(allow_none=True)
    val_accuracy = fields.Float(allow_none=True)


class HistorySchema(Schema):
    phase = fields.Str(required=True)
    seed = fields.Int(required=True)
    epochs = fields.List(fields.Nested(EpochSchema), required=True)
    best_epoch = fields.Int(required=True)
    stop_reason = fields.Str(required=True)


@dataclass
class TrainResult:
    model: EgpmdaModel
    params: dict
    history: TrainHistory


def accuracy(scores, labels, threshold=THRESHOLD):
    predicted = (np.asarray(scores) >= threshold).astype(np.int64)
    return float(np.mean(predicted == np.asarray(labels, dtype=np.int64)))


def evaluate_epoch(model, params, mirna, disease, labels):
    """Summed BCE and accuracy (score >= 0.5 is positive) on labeled pairs"""
    if len(labels) == 0:
        raise TrainingError('cannot evaluate an empty pair list', code='EMPTY_PAIRS')
    scores, _ = score_pairs(model, params, mirna, disease)
    return float(bce_loss(scores, labels)), accuracy(scores, labels)


def _as_arrays(positives, negatives):
    pairs = np.asarray(list(positives) + list(negatives), dtype=np.int64).reshape(-1, 2)
    labels = np.r_[np.ones(len(positives)), np.zeros(len(negatives))]
    return pairs[:, 0], pairs[:, 1], labels


def _fixed_negatives(manifest, phase):
    if phase != 'all':
        return manifest.negatives(*PHASE_PARTITIONS[phase])
    balanced = [(m, d) for m, d, label in manifest.balanced_test() if label == 0]
    return manifest.negatives('train', 'val') + balanced


def loss_plateaued(losses):
    """loss(t) >= loss(t-1) >= loss(t-2)"""
    return len(losses) >= 3 and losses[-1] >= losses[-2] >= losses[-3]


def train(graph, manifest, model_config, config):
    """One run of the given phase; returns the kept weights and the history"""
    if config.phase not in PHASES:
        raise TrainingError(f'unknown phase {config.phase!r}', code='BAD_PHASE')
    partitions = PHASE_PARTITIONS[config.phase]
    positives = manifest.positives(*partitions)
    if not positives:
        raise TrainingError(f"no supervision positives in {'+'.join(partitions)}", code='PHASE_INCOMPATIBLE')
    if config.phase == 'select':
        val_m, val_d, val_y = manifest.arrays('val')
        if val_y.size == 0:
            raise TrainingError('select phase needs a validation partition', code='PHASE_INCOMPATIBLE')

    if graph.include_mda:
        graph = with_mda_edges(graph, positives)
    model = EgpmdaModel(model_config, graph, seed=config.seed)
    params = model.init_params()
    state = AdamState(lr=config.lr)
    verified = manifest.verified()
    fixed = _fixed_negatives(manifest, config.phase)
    history = TrainHistory(phase=config.phase, seed=config.seed)

    best_accuracy = -1.0
    best_params = params
    for epoch in range(1, config.max_epochs + 1):
        if config.resample_negatives:
            negatives = sample_negatives(verified, manifest.n_mirna, manifest.n_disease,
                                         config.negative_ratio * len(positives), config.seed, 'epoch', epoch)
        else:
            negatives = fixed
        mirna, disease, labels = _as_arrays(positives, negatives)

        if config.batch_size:
            order = make_rng(config.seed, 'batches', epoch).permutation(labels.size)
            batches = [order[i:i + config.batch_size] for i in range(0, labels.size, config.batch_size)]
        else:
            batches = [np.arange(labels.size)]

        train_loss = 0.0
        correct = 0
        for batch in batches:
            try:
                loss, grads, scores = loss_and_grads(model, params, mirna[batch], disease[batch], labels[batch])
            except NumericsError as err:
                raise TrainingError(f'epoch {epoch}: {err.message}', code='NON_FINITE_LOSS')
            if not np.isfinite(loss):
                raise TrainingError(f'epoch {epoch}: loss is not finite', code='NON_FINITE_LOSS')
            train_loss += loss
            correct += int(np.sum((scores >= THRESHOLD) == (labels[batch] == 1)))
            params = adam_step(params, grads, state)

        record = {'epoch': epoch, 'train_loss': train_loss, 'train_accuracy': correct / labels.size,
                  'val_loss': None, 'val_accuracy': None}
        if config.phase == 'select':
            record['val_loss'], record['val_accuracy'] = evaluate_epoch(model, params, val_m, val_d, val_y)
        history.epochs.append(record)
        logger.info(f"epoch {epoch}: train loss {train_loss:.6f}"
                    + (f", val acc {record['val_accuracy']:.4f}" if record['val_accuracy'] is not None else ''))

        if config.phase == 'select':
            if record['val_accuracy'] > best_accuracy:
                best_accuracy = record['val_accuracy']
                best_params = params
                history.best_epoch = epoch
            elif config.early_stopping and epoch - history.best_epoch >= config.patience:
                history.stop_reason = 'patience'
                break
        else:
            best_params = params
            history.best_epoch = epoch
            if config.early_stopping and loss_plateaued(history.train_losses()):
                history.stop_reason = 'loss_plateau'
                break
    else:
        history.stop_reason = 'max_epochs'

    logger.info(f'{config.phase} phase stopped ({history.stop_reason}) after {len(history.epochs)} epochs, '
                f'best epoch {history.best_epoch}')
    return TrainResult(model=model, params=best_params, history=history)


def save_history(history, path):
    with open(path, 'w') as fh:
        json.dump(HistorySchema().dump(history), fh, sort_keys=True, indent=1)
        fh.write('\n')


def aggregate_histories(histories):
    finals = [h.epochs[-1]['train_loss'] for h in histories]
    best_val = [h.epochs[h.best_epoch - 1]['val_accuracy'] for h in histories
                if h.epochs and h.epochs[h.best_epoch - 1]['val_accuracy'] is not None]
    return {
        'repeats': len(histories),
        'seeds': [h.seed for h in histories],
        'mean_final_train_loss': float(np.mean(finals)),
        'mean_best_val_accuracy': float(np.mean(best_val)) if best_val else None,
        'mean_epochs': float(np.mean([len(h.epochs) for h in histories])),
        'runs': [HistorySchema().dump(h) for h in histories]
    }


def run_repeats(graph, manifest, model_config, config, out_dir=None):
    """Repeat i trains with seed + i; outputs go to repeat_<i>/ under out_dir"""
    if config.repeats < 1:
        raise TrainingError('repeats must be at least 1', code='VALIDATION_ERROR')
    results = []
    for i in range(config.repeats):
        result = train(graph, manifest, model_config, replace(config, seed=config.seed + i))
        results.append(result)
        if out_dir:
            run_dir = os.path.join(out_dir, f'repeat_{i}')
            os.makedirs(run_dir, exist_ok=True)
            save_checkpoint(os.path.join(run_dir, 'checkpoint.bin'), result.model, result.params,
                            hyperparameters=replace(config, seed=config.seed + i).to_dict())
            save_history(result.history, os.path.join(run_dir, 'history.json'))

    aggregate = aggregate_histories([r.history for r in results])
    if out_dir:
        with open(os.path.join(out_dir, 'history.json'), 'w') as fh:
            json.dump(aggregate, fh, sort_keys=True, indent=1)
            fh.write('\n')
    return results, aggregate
