class EgpError(Exception):
    """Base error carrying a machine-readable code"""
    code = 'INTERNAL_ERROR'

    def __init__(self, message, code=None, details=None):
        super().__init__(message)
        self.message = message
        if code:
            self.code = code
        self.details = details

    def to_dict(self):
        error = {
            'code': self.code,
            'message': self.message
        }
        if self.details:
            error['details'] = self.details
        return {'success': False, 'error': error}

    def one_line(self):
        return f'error[{self.code}]: {self.message}'


class LoadError(EgpError):
    code = 'LOAD_ERROR'


class BuildError(EgpError):
    code = 'BUILD_ERROR'


class RelationLookupError(EgpError):
    code = 'UNKNOWN_RELATION'


class ShapeError(EgpError):
    code = 'SHAPE_ERROR'


class NumericsError(EgpError):
    code = 'NUMERICS_ERROR'


class ConfigError(EgpError):
    code = 'VALIDATION_ERROR'


class SplitError(EgpError):
    code = 'SPLIT_ERROR'


class TrainingError(EgpError):
    code = 'TRAINING_ERROR'


class EvaluationError(EgpError):
    code = 'EVALUATION_ERROR'


class NodeNotFound(EgpError):
    code = 'NODE_NOT_FOUND'


class CheckpointError(EgpError):
    code = 'CHECKPOINT_ERROR'


class ExportError(EgpError):
    code = 'EXPORT_ERROR'
