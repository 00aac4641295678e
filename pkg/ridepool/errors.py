class RidepoolError(Exception):
    """Base class for every error raised by the simulator."""


class GraphError(RidepoolError):
    """Invalid road network input (parse, reference, length, connectivity)."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UnreachableError(GraphError):
    pass


class DemandError(RidepoolError):
    """Malformed trip record or an OD distribution that cannot produce trips."""

    def __init__(self, message: str, index: int | None = None):
        self.index = index
        super().__init__(f"record {index}: {message}" if index is not None else message)


class FleetInvariantError(RidepoolError):
    """A vehicle reached a state the dispatcher should never produce."""


class RoutingError(RidepoolError):
    pass


class ConfigError(RidepoolError):
    """Invalid configuration value; `field` is the dotted path in the document."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"invalid config field '{field}': {message}")


class MetricsError(RidepoolError):
    pass
