"""Minimum-variance unbiased building blocks for sample-only losses.

Every loss in this package is assembled from four estimators:

* ``binom_mvue(t, m, k)``  -- unbiased for ``alpha**k`` when ``T ~ Binomial(m, alpha)``,
* ``multinomial_monomial_mvue(h, n, j)`` -- unbiased for ``prod_x p_x**j_x`` when
  ``H ~ Multinomial(n, p)``,
* ``poisson_factorial(t, k)`` -- unbiased for ``theta**k`` when ``T ~ Poisson(theta)``,
* ``variance_mvue(alpha_hat, n)`` -- unbiased for the variance of a Binomial
  frequency ``alpha_hat = T/n``.

All are falling-factorial ratios, computed with integer arithmetic before the
final division so exact mode stays exact and float mode rounds only once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator

from .domain import Histogram, Mode
from .errors import (
    DegreeExceedsSampleError,
    DimensionMismatchError,
    SampleTooSmallError,
    TotalMismatchError,
)


def falling_factorial(t: int, k: int) -> int:
    """t(t-1)...(t-k+1); 1 when k == 0, and 0 whenever 0 <= t < k."""
    if k < 0:
        raise ValueError("falling factorial needs k >= 0")
    out = 1
    for i in range(k):
        out *= t - i
    return out


@dataclass(frozen=True)
class ExponentVector:
    """Per-coordinate non-negative integer exponents of one monomial."""

    exps: tuple[int, ...]
    degree: int = field(init=False)

    def __post_init__(self):
        exps = tuple(int(e) for e in self.exps)
        if any(e < 0 for e in exps):
            raise ValueError("exponents must be non-negative")
        object.__setattr__(self, "exps", exps)
        object.__setattr__(self, "degree", sum(exps))

    @classmethod
    def zero(cls, d: int) -> "ExponentVector":
        return cls((0,) * d)

    @classmethod
    def unit(cls, d: int, x: int, power: int = 1) -> "ExponentVector":
        exps = [0] * d
        exps[x] = power
        return cls(tuple(exps))

    @property
    def dim(self) -> int:
        return len(self.exps)

    def __iter__(self) -> Iterator[int]:
        return iter(self.exps)

    def __getitem__(self, i: int) -> int:
        return self.exps[i]


def binom_mvue(t: int, m: int, k: int, mode: Mode = Mode.EXACT):
    """Unbiased estimate of ``alpha**k`` from a single Binomial(m, alpha) count.

    Returns ``ff(t, k) / ff(m, k)``: zero when ``t < k`` and one when ``k == 0``.
    """
    if k < 0:
        raise ValueError("exponent k must be >= 0")
    if k > m:
        raise DegreeExceedsSampleError(f"power {k} is not estimable from {m} draws")
    if not 0 <= t <= m:
        raise ValueError(f"count t={t} outside 0..{m}")
    num = falling_factorial(t, k)
    den = falling_factorial(m, k)
    if mode is Mode.EXACT:
        return Fraction(num, den)
    return num / den


def multinomial_monomial_mvue(h: Histogram, n: int, j: ExponentVector, mode: Mode = Mode.EXACT):
    """Unbiased estimate of ``prod_x p_x**j_x`` from one Multinomial(n, p) histogram.

    The estimator is ``prod_x ff(h_x, j_x) / ff(n, deg(j))``.  It vanishes as
    soon as any coordinate count is below its exponent.
    """
    if h.dim != j.dim:
        raise DimensionMismatchError(f"histogram dimension {h.dim} != exponent dimension {j.dim}")
    if h.total != n:
        raise TotalMismatchError(f"histogram total {h.total} != declared sample size {n}")
    if j.degree > n:
        raise DegreeExceedsSampleError(f"monomial degree {j.degree} is not estimable from {n} draws")
    num = 1
    for c, e in zip(h.counts, j.exps):
        if e:
            num *= falling_factorial(c, e)
            if num == 0:
                break
    den = falling_factorial(n, j.degree)
    if mode is Mode.EXACT:
        return Fraction(num, den)
    return num / den


def poisson_factorial(t: int, k: int) -> int:
    """t(t-1)...(t-k+1): unbiased for ``theta**k`` under ``T ~ Poisson(theta)``."""
    if t < 0:
        raise ValueError("count t must be >= 0")
    return falling_factorial(t, k)


def variance_mvue(alpha_hat, n: int):
    """Unbiased variance estimate for a Binomial frequency, from the frequency itself.

    ``s2_n(a) = [a(1-a)^2 + (1-a)a^2] / (n-1)`` satisfies
    ``E s2_n(T/n) = a(1-a)/n`` for ``T ~ Binomial(n, a)``.  Works on Fractions
    and floats alike.
    """
    if n < 2:
        raise SampleTooSmallError("variance estimation needs n >= 2")
    if not 0 <= alpha_hat <= 1:
        raise ValueError(f"frequency {alpha_hat!r} outside [0, 1]")
    one = alpha_hat - alpha_hat + 1  # 1 in the operand's arithmetic
    return (alpha_hat * (one - alpha_hat) ** 2 + (one - alpha_hat) * alpha_hat**2) / (n - 1)


def poisson_power_series(t: int, coeffs: Callable[[int], object], rate):
    """Evaluate ``sum_{k=1..t} coeffs(k) * rate**-k * ff(t, k)``.

    This is the generic unbiased estimator of a power series in a Poisson
    parameter: substituting the falling factorial for ``theta**k`` term by
    term.  The sum self-truncates at ``k = t`` because the falling factorial
    kills every later term, so any series -- even one with infinitely many
    coefficients -- is finite on a finite count.

    Arithmetic follows the operand types: pass a Fraction rate and Fraction
    coefficients for an exact result, floats for speed.
    """
    if t < 0:
        raise ValueError("count t must be >= 0")
    if not rate > 0:
        raise ValueError("rate must be > 0")
    acc = 0
    ff = 1
    scale = 1
    for k in range(1, t + 1):
        ff *= t - k + 1  # ff == falling_factorial(t, k)
        scale = scale / rate
        acc = acc + coeffs(k) * scale * ff
    return acc
