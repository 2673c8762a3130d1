"""Exception hierarchy

Configuration and input problems derive from `ValueError`, numerical failures
from `RuntimeError`, so callers that only know the builtin types still catch
them.
"""


class PromError(Exception):
    """Base class for all errors raised by grassmann_prom"""


class ConfigError(PromError, ValueError):
    """Invalid experiment configuration or invalid physical input"""


class OutOfDomainError(PromError, ValueError):
    """Parameter point outside the declared domain or outside every subdomain"""


class ArtifactError(PromError):
    """Persisted artifact missing, unreadable, or failing its hash check"""


class NumericalError(PromError, RuntimeError):
    """A numerical procedure could not produce a valid result"""


class ConvergenceError(NumericalError):
    def __init__(self, step: int, residual: float, iterations: int):
        self.step = step
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f'Newton iterations did not converge at step {step} '
            f'after {iterations} iterations (residual norm {residual:.3e})'
        )


class RankDeficiencyError(NumericalError):
    def __init__(self, requested: int, rank: int, label: str = ''):
        self.requested = requested
        self.rank = rank
        where = f' for {label}' if label else ''
        super().__init__(
            f'requested order {requested} exceeds numerical rank {rank}{where}'
        )


class IllConditionedError(NumericalError):
    def __init__(self, reference: str, other: str, condition: float):
        self.pair = (reference, other)
        self.condition = condition
        super().__init__(
            f'bases {reference!r} and {other!r} are too far apart '
            f'(cond(V0^T Vi) = {condition:.3e}); repartition the domain'
        )


class BasisMismatchError(PromError, ValueError):
    def __init__(self, expected: str, actual: str):
        self.expected = expected
        self.actual = actual
        super().__init__(
            f'hyper mesh was trained for basis {expected}, got basis {actual}'
        )
