"""Exception hierarchy shared by all modules."""


class FuncbandError(Exception):
    """Base class for all errors raised by funcband."""


class InvalidInputError(FuncbandError, ValueError):
    """Input data or parameters violate an operation's preconditions."""


class ContractViolationError(FuncbandError, ValueError):
    """An input does not satisfy a structural contract (e.g. not centered)."""


class DegenerateDataError(FuncbandError, ValueError):
    """Data carry no usable variation (e.g. an all-zero spectrum)."""


class FitError(FuncbandError):
    """A least-squares or eigen fit could not be carried out."""


class RankError(FitError):
    """Too few numerically nonzero eigenvalues for the requested components."""


class SelectionError(FitError):
    """No admissible candidate in an order-selection search."""


class InstabilityError(FuncbandError):
    """An autoregressive model is not stable (companion radius >= 1)."""

    def __init__(self, radius, message=None):
        self.radius = float(radius)
        super().__init__(message or f"unstable autoregression: spectral radius {self.radius:.6g} >= 1")


class ReplicateFailureError(FuncbandError):
    """Too many bootstrap replicates failed."""

    def __init__(self, n_failed, n_total, messages=()):
        self.n_failed = n_failed
        self.n_total = n_total
        self.messages = list(messages)
        detail = "; ".join(self.messages[:3])
        super().__init__(
            f"{n_failed} of {n_total} bootstrap replicates failed (limit 1%)" + (f": {detail}" if detail else "")
        )
