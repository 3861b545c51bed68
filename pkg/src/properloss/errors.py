"""Exception types shared across the package."""

from __future__ import annotations


class ProperLossError(Exception):
    """Base class for all errors raised by this package."""


class EmptyHistogramError(ProperLossError, ValueError):
    """A histogram with total zero was used where samples are required."""


class IndexOutOfRangeError(ProperLossError, IndexError):
    """A domain index outside 0..d-1 was supplied."""


class DegreeExceedsSampleError(ProperLossError, ValueError):
    """An estimator was asked for a power higher than the sample size supports."""


class TotalMismatchError(ProperLossError, ValueError):
    """A histogram's total does not match the declared sample size."""


class SampleTooSmallError(ProperLossError, ValueError):
    """Fewer observations than the operation's minimum."""


class OddExponentError(ProperLossError, ValueError):
    """Coordinate-wise power distances need an even exponent to stay proper."""


class DimensionMismatchError(ProperLossError, ValueError):
    """Vectors over different domains were combined."""


class DomainTooLargeError(ProperLossError, ValueError):
    """Grid enumeration over the simplex is only feasible for small domains."""


class EnumerationTooLargeError(ProperLossError, ValueError):
    """Histogram enumeration would exceed the configured cap."""


class DegreeGateError(ProperLossError, ValueError):
    """Sample sizes below the polynomial degrees of the divergence.

    No loss on histograms of these sizes can have the divergence as its
    expectation, so compilation refuses rather than silently biasing.
    """

    def __init__(self, n_required: int, m_required: int | None = None):
        self.n_required = n_required
        self.m_required = m_required
        if m_required is None:
            msg = f"requires a model sample of size >= {n_required} (polynomial degree in the model argument)"
        else:
            msg = (
                f"requires a model sample of size >= {n_required} and a target sample of size "
                f">= {m_required} (polynomial degrees in the two arguments)"
            )
        super().__init__(msg)


class SourceExhaustedError(ProperLossError, RuntimeError):
    """A file-backed sample source ran out of tokens."""


class TokenUnknownError(ProperLossError, ValueError):
    """A sample source emitted a token that is not a domain label."""


class SubprocessFailureError(ProperLossError, RuntimeError):
    """A subprocess generator violated the stream protocol or exited abnormally."""
