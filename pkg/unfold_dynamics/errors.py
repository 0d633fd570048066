from typing import Dict, Optional


class UnfoldError(Exception):
    pass


class ConfigurationError(UnfoldError):
    pass


class SchemaError(ConfigurationError):
    """Problem file violates the schema; `location` is a dotted JSON path."""

    def __init__(self, message: str, location: str = '$'):
        super().__init__(f"{location}: {message}")
        self.location = location


class NumericalError(UnfoldError):
    """A computation failed to reach its tolerance.

    `diagnostics` holds JSON-serializable details (residuals, iteration
    counts, offending points) that the CLI writes to error.json.
    """

    def __init__(self, message: str, diagnostics: Optional[Dict] = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})

    def as_dict(self) -> Dict:
        return {'error': type(self).__name__, 'message': str(self), 'diagnostics': self.diagnostics}


class RootFindingError(NumericalError):
    pass


class ResidueError(NumericalError):
    pass


class SeriesError(NumericalError):
    pass


class SplittingError(NumericalError):
    pass


class LocateError(NumericalError):
    pass


class DirectionError(NumericalError):
    pass


class TangencyError(NumericalError):
    pass


class OrbitError(NumericalError):
    pass


class QuadratureError(NumericalError):
    pass


class InvariantError(NumericalError):
    pass
