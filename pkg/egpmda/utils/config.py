"""Run configuration: train.json loading, the ablation ladder and validation"""
import json
import logging
from dataclasses import asdict, dataclass

from marshmallow import Schema, ValidationError, fields, post_load, pre_load, validate, validates_schema

from egpmda.model.network import ModelConfig
from egpmda.trainer.loop import PHASES, TrainConfig
from egpmda.utils.errors import ConfigError

logger = logging.getLogger(__name__)

GRID_DIMS = (32, 64, 96, 128)
GRID_LAYERS = (1, 2, 3, 4)
GRID_HEADS = (1, 2, 4, 8)

# condition -> switches and layer count, one rung per added input family
ABLATION_LADDER = {
    0: {'use_node_features': False, 'use_intra_edges': False, 'use_pcg': False, 'include_mda': False, 'layers': 0},
    1: {'use_node_features': True, 'use_intra_edges': False, 'use_pcg': False, 'include_mda': False, 'layers': 0},
    2: {'use_node_features': True, 'use_intra_edges': True, 'use_pcg': False, 'include_mda': False, 'layers': 2},
    3: {'use_node_features': True, 'use_intra_edges': True, 'use_pcg': True, 'include_mda': False, 'layers': 2},
    4: {'use_node_features': True, 'use_intra_edges': True, 'use_pcg': True, 'include_mda': True, 'layers': 2},
}


@dataclass(frozen=True)
class RunConfig:
    dim: int = 64
    layers: int = 2
    heads: int = 4
    kernel_size: int = 8
    d_b: int = 64
    condition: int = None
    use_node_features: bool = True
    use_intra_edges: bool = True
    use_pcg: bool = True
    include_mda: bool = False
    max_epochs: int = 50
    patience: int = 5
    lr: float = 0.001
    seed: int = 0
    repeats: int = 5
    phase: str = 'select'
    batch_size: int = None
    resample_negatives: bool = True
    early_stopping: bool = True
    negative_ratio_train: int = 1
    negative_ratio_test: int = 100
    y1: int = 2019
    y2: int = 2020

    def model_config(self):
        return ModelConfig(dim=self.dim, layers=self.layers, heads=self.heads,
                           kernel_size=self.kernel_size, use_node_features=self.use_node_features)

    def train_config(self):
        return TrainConfig(max_epochs=self.max_epochs, patience=self.patience, lr=self.lr, seed=self.seed,
                           repeats=self.repeats, phase=self.phase, batch_size=self.batch_size,
                           resample_negatives=self.resample_negatives, early_stopping=self.early_stopping,
                           negative_ratio=self.negative_ratio_train)

    def graph_switches(self):
        return {'use_intra_edges': self.use_intra_edges, 'use_pcg': self.use_pcg,
                'include_mda': self.include_mda}

    def to_dict(self):
        return asdict(self)


class RunConfigSchema(Schema):
    dim = fields.Int(validate=validate.Range(min=1))
    layers = fields.Int(validate=validate.Range(min=0, max=4))
    heads = fields.Int(validate=validate.OneOf(GRID_HEADS))
    kernel_size = fields.Int(validate=validate.Range(min=1))
    d_b = fields.Int(validate=validate.Range(min=1))
    condition = fields.Int(allow_none=True, validate=validate.OneOf(sorted(ABLATION_LADDER)))
    use_node_features = fields.Bool()
    use_intra_edges = fields.Bool()
    use_pcg = fields.Bool()
    include_mda = fields.Bool()
    max_epochs = fields.Int(validate=validate.Range(min=1))
    patience = fields.Int(validate=validate.Range(min=1))
    lr = fields.Float(validate=validate.Range(min=0))
    seed = fields.Int()
    repeats = fields.Int(validate=validate.Range(min=1))
    phase = fields.Str(validate=validate.OneOf(PHASES))
    batch_size = fields.Int(allow_none=True, validate=validate.Range(min=1))
    resample_negatives = fields.Bool()
    early_stopping = fields.Bool()
    negative_ratio_train = fields.Int(validate=validate.Range(min=0))
    negative_ratio_test = fields.Int(validate=validate.Range(min=0))
    y1 = fields.Int(validate=validate.Range(min=1))
    y2 = fields.Int(validate=validate.Range(min=1))

    @pre_load
    def expand_condition(self, data, **kwargs):
        """A condition fills in every switch the file does not set itself"""
        condition = data.get('condition')
        if condition in ABLATION_LADDER:
            data = {**ABLATION_LADDER[condition], **data}
        return data

    @validates_schema
    def check_combinations(self, data, **kwargs):
        defaults = RunConfig()

        def get(name):
            return data.get(name, getattr(defaults, name))

        errors = {}
        if get('dim') % get('heads'):
            errors['dim'] = [f"dim {get('dim')} is not divisible by heads {get('heads')}"]
        if get('patience') >= get('max_epochs'):
            errors['patience'] = ['patience must be smaller than max_epochs']
        if get('use_pcg') and not get('use_intra_edges'):
            errors['use_pcg'] = ['use_pcg requires use_intra_edges']
        if get('include_mda') and not get('use_pcg'):
            errors['include_mda'] = ['include_mda requires use_pcg']
        if get('layers') > 0 and not get('use_intra_edges'):
            errors['layers'] = ['GNN layers need graph structure (use_intra_edges)']
        if get('y1') > get('y2'):
            errors['y1'] = ['y1 must not be after y2']
        if errors:
            raise ValidationError(errors)

    @post_load
    def make_config(self, data, **kwargs):
        config = RunConfig(**data)
        in_grid = config.dim in GRID_DIMS and config.heads in GRID_HEADS and (
            config.layers in GRID_LAYERS or config.layers == 0)
        if not in_grid:
            logger.warning(f'dim={config.dim}, L={config.layers}, h={config.heads} is outside the '
                           f'searched grid {GRID_DIMS} x {GRID_LAYERS} x {GRID_HEADS}')
        return config


def load_run_config(path=None, overrides=None):
    """Merge the JSON file (if any) with flag overrides and validate"""
    data = {}
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f'{path}: config file not found', code='FILE_NOT_FOUND')
        except json.JSONDecodeError as err:
            raise ConfigError(f'{path}: invalid JSON ({err.msg} at line {err.lineno})', code='BAD_JSON')
        if not isinstance(data, dict):
            raise ConfigError(f'{path}: config must be a JSON object', code='BAD_JSON')
    for name, value in (overrides or {}).items():
        if value is not None:
            data[name] = value
    try:
        return RunConfigSchema().load(data)
    except ValidationError as err:
        fields_in_error = ', '.join(sorted(err.messages))
        raise ConfigError(f'invalid run config ({fields_in_error})', details=err.messages)
