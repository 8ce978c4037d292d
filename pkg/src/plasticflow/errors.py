"""Exception types shared across the package."""


class PlasticFlowError(Exception):
    """Base class for all package errors."""


class ConstructionError(PlasticFlowError):
    """A topology could not be built from the given parameters."""


class ParseError(PlasticFlowError):
    """An input file is malformed."""

    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class RoutingError(PlasticFlowError):
    """No path exists between a flow's source and target."""

    def __init__(self, message, flow_id=None):
        self.flow_id = flow_id
        if flow_id is not None:
            message = f"flow {flow_id}: {message}"
        super().__init__(message)


class ConfigurationError(PlasticFlowError, ValueError):
    """Parameters outside their legal range."""


class ContractViolation(PlasticFlowError, ValueError):
    """Arguments that break a function's stated preconditions."""


class MetricError(PlasticFlowError):
    """A metric is undefined for the given report."""
