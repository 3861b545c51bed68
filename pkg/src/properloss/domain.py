"""Finite domains, distributions, histograms, and sampling-scheme descriptors.

All values here are immutable after construction and safe to share across
threads.  Probability math is index-based throughout the package; string
labels exist only at the boundary (sample files, subprocess tokens) and are
mapped to indices by :class:`Domain` at ingestion.

Two numeric modes are supported.  ``Mode.EXACT`` keeps every probability as
an arbitrary-precision rational so that expectation identities can be
asserted with zero tolerance; ``Mode.FLOAT`` uses 64-bit floats for Monte
Carlo throughput.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Iterator

from .errors import (
    EmptyHistogramError,
    IndexOutOfRangeError,
    TokenUnknownError,
)

#: Float-mode tolerance on |sum(probs) - 1| before construction fails.
#: In-tolerance vectors are renormalized so downstream code sees an exact unit sum.
FLOAT_SIMPLEX_TOL = 1e-12


class Mode(Enum):
    EXACT = "exact"
    FLOAT = "float"


@dataclass(frozen=True)
class Domain:
    """An ordered finite outcome space with pairwise-distinct string labels."""

    labels: tuple[str, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        if len(labels) == 0:
            raise ValueError("domain must have at least one label")
        index = {lab: i for i, lab in enumerate(labels)}
        if len(index) != len(labels):
            raise ValueError("domain labels must be pairwise distinct")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_index", index)

    @classmethod
    def of_size(cls, d: int) -> "Domain":
        """Anonymous domain with labels x0..x{d-1}."""
        if d < 1:
            raise ValueError("domain size must be >= 1")
        return cls(tuple(f"x{i}" for i in range(d)))

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise TokenUnknownError(f"token {label!r} is not a label of this domain") from None

    def label(self, i: int) -> str:
        if not 0 <= i < self.size:
            raise IndexOutOfRangeError(f"index {i} outside 0..{self.size - 1}")
        return self.labels[i]


def _as_exact(value) -> Fraction:
    if isinstance(value, float):
        # Floats convert to their exact binary value; callers that want a
        # decimal-looking rational should pass a string or Fraction.
        return Fraction(value)
    return Fraction(value)


@dataclass(frozen=True)
class Distribution:
    """A probability vector over a finite domain of size ``len(probs)``.

    Entries are Fractions in exact mode and floats in float mode.  Float
    vectors within :data:`FLOAT_SIMPLEX_TOL` of a unit sum are renormalized
    on construction; anything further off is rejected.
    """

    probs: tuple
    mode: Mode = Mode.EXACT

    def __post_init__(self):
        probs = tuple(self.probs)
        if len(probs) == 0:
            raise ValueError("distribution must have at least one entry")
        if self.mode is Mode.EXACT:
            probs = tuple(_as_exact(v) for v in probs)
            if any(v < 0 for v in probs):
                raise ValueError("probabilities must be non-negative")
            if sum(probs) != 1:
                raise ValueError(f"exact probabilities must sum to 1, got {sum(probs)}")
        else:
            probs = tuple(float(v) for v in probs)
            if any(not math.isfinite(v) for v in probs):
                raise ValueError("probabilities must be finite")
            if any(v < 0.0 for v in probs):
                raise ValueError("probabilities must be non-negative")
            total = sum(probs)
            if abs(total - 1.0) > FLOAT_SIMPLEX_TOL:
                raise ValueError(f"float probabilities must sum to 1 within {FLOAT_SIMPLEX_TOL}, got {total!r}")
            probs = tuple(v / total for v in probs)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def exact(cls, values: Iterable) -> "Distribution":
        return cls(tuple(values), Mode.EXACT)

    @classmethod
    def floating(cls, values: Iterable) -> "Distribution":
        return cls(tuple(values), Mode.FLOAT)

    @classmethod
    def uniform(cls, d: int, mode: Mode = Mode.EXACT) -> "Distribution":
        if mode is Mode.EXACT:
            return cls.exact([Fraction(1, d)] * d)
        return cls.floating([1.0 / d] * d)

    @property
    def dim(self) -> int:
        return len(self.probs)

    def as_floats(self) -> tuple[float, ...]:
        return tuple(float(v) for v in self.probs)

    def __getitem__(self, i: int):
        return self.probs[i]

    def __iter__(self) -> Iterator:
        return iter(self.probs)


@dataclass(frozen=True)
class Histogram:
    """Count vector of an i.i.d. sample; the sufficient statistic every loss consumes.

    ``total`` and ``support`` are derived from ``counts`` on construction, so
    the total-equals-sum invariant holds by construction.
    """

    counts: tuple[int, ...]
    total: int = field(init=False)
    support: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if len(counts) == 0:
            raise ValueError("histogram must have at least one coordinate")
        if any(c < 0 for c in counts):
            raise ValueError("histogram counts must be non-negative")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "total", sum(counts))
        object.__setattr__(self, "support", tuple(i for i, c in enumerate(counts) if c))

    @classmethod
    def zero(cls, d: int) -> "Histogram":
        return cls((0,) * d)

    @classmethod
    def from_indices(cls, indices: Iterable[int], d: int) -> "Histogram":
        counts = [0] * d
        for i in indices:
            if not 0 <= i < d:
                raise IndexOutOfRangeError(f"sample index {i} outside 0..{d - 1}")
            counts[i] += 1
        return cls(tuple(counts))

    @property
    def dim(self) -> int:
        return len(self.counts)

    def complement(self, x: int) -> int:
        """Number of observations of every outcome except ``x``."""
        if not 0 <= x < self.dim:
            raise IndexOutOfRangeError(f"index {x} outside 0..{self.dim - 1}")
        return self.total - self.counts[x]

    def __getitem__(self, i: int) -> int:
        return self.counts[i]


class SamplingScheme:
    """How many observations a loss consumes from one side (model or target)."""

    __slots__ = ()


@dataclass(frozen=True)
class FixedSize(SamplingScheme):
    """Draw exactly ``n`` observations."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("fixed sample size must be an integer >= 1")
        object.__setattr__(self, "n", int(self.n))


@dataclass(frozen=True)
class Poisson(SamplingScheme):
    """Draw a Poisson(rate) number of observations, then that many samples."""

    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("Poisson rate must be > 0")


def empirical(h: Histogram, mode: Mode = Mode.EXACT) -> Distribution:
    """Empirical distribution counts/total of a non-empty histogram."""
    if h.total == 0:
        raise EmptyHistogramError("cannot form an empirical distribution from zero samples")
    if mode is Mode.EXACT:
        return Distribution.exact([Fraction(c, h.total) for c in h.counts])
    return Distribution.floating([c / h.total for c in h.counts])


def indicator(x: int, d: int, mode: Mode = Mode.EXACT) -> Distribution:
    """Point mass at index ``x`` in a domain of size ``d``."""
    if not 0 <= x < d:
        raise IndexOutOfRangeError(f"index {x} outside 0..{d - 1}")
    one, zero = (Fraction(1), Fraction(0)) if mode is Mode.EXACT else (1.0, 0.0)
    return Distribution(tuple(one if i == x else zero for i in range(d)), mode)


def compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All ways to write ``total`` as an ordered sum of ``parts`` non-negative
    integers, in deterministic first-coordinate-descending order.

    This is the combinatorial substrate for both histogram enumeration and
    simplex grids.
    """
    if parts < 1:
        raise ValueError("need at least one part")
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest
