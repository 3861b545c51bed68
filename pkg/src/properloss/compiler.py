"""Constructors that turn divergences into sample-only losses.

The central move is estimator substitution: write the divergence as a sum of
monomials, replace every monomial by its minimum-variance unbiased estimator
evaluated on the sample histogram, and the resulting loss has the divergence
as its exact expectation under the declared sampling scheme.

Two loss shapes exist.  A :class:`KnownTargetLoss` scores a model-sample
histogram against a fully known target distribution; a :class:`CompiledLoss`
scores a pair of histograms, one drawn from the model and one from the
target.  Fixed-size schemes admit polynomial divergences up to the sample
sizes' degrees; Poisson-size schemes additionally admit power series, which
is how the log family (cross-entropy, KL, Shannon entropy) becomes
implementable.

Compilation refuses sample sizes below the divergence's degrees
(:class:`~properloss.errors.DegreeGateError`): that boundary is tight, not a
convenience check.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .divergences import PolyDivergence, simplex_grid
from .domain import Distribution, FixedSize, Histogram, Mode, Poisson, SamplingScheme, empirical
from .errors import (
    DegreeGateError,
    DimensionMismatchError,
    DomainTooLargeError,
    SampleTooSmallError,
    TotalMismatchError,
)
from .estimators import (
    falling_factorial,
    multinomial_monomial_mvue,
    poisson_power_series,
    variance_mvue,
)


@dataclass(frozen=True)
class KnownTargetLoss:
    """A loss L(h, q): model-sample histogram against a known target distribution."""

    evaluator: Callable[[Histogram, Distribution], object]
    scheme: FixedSize
    provenance: str

    def evaluate(self, h: Histogram, q: Distribution):
        return self.evaluator(h, q)


@dataclass(frozen=True)
class CompiledLoss:
    """A loss L(h_p, h_q) over a pair of sample histograms.

    ``scheme_p`` is ``None`` for target-only losses (the evaluator ignores its
    first argument).  ``batch_evaluator``, when present, maps two (R, d) count
    matrices to R loss values for Monte Carlo throughput.  Evaluators are pure
    apart from internal memoization and safe to call concurrently.
    """

    evaluator: Callable[[Optional[Histogram], Histogram], object]
    scheme_p: Optional[SamplingScheme]
    scheme_q: SamplingScheme
    provenance: str
    batch_evaluator: Optional[Callable] = None

    def evaluate(self, h_p: Optional[Histogram], h_q: Histogram):
        return self.evaluator(h_p, h_q)


def _check_fixed_total(h: Histogram, n: int, side: str) -> None:
    if h.total != n:
        raise TotalMismatchError(f"{side} histogram has total {h.total}, scheme requires exactly {n}")


def compile_known_target(divergence: PolyDivergence, n: int, mode: Mode = Mode.EXACT) -> KnownTargetLoss:
    """Loss against a known target whose expectation over model samples equals
    the divergence.

    At call time the divergence is partially evaluated at the given target,
    and each model monomial is replaced by its unbiased estimator.  Requires
    ``n >= deg_p``; below that no unbiased loss exists at all.
    """
    if n < divergence.deg_p:
        raise DegreeGateError(divergence.deg_p)
    if n < 1:
        raise ValueError("sample size must be >= 1")
    d = divergence.dim

    def evaluator(h: Histogram, q) -> object:
        if h.dim != d:
            raise DimensionMismatchError(f"histogram dimension {h.dim}, divergence needs {d}")
        _check_fixed_total(h, n, "model")
        acc = 0
        for j, coeff in divergence.partial_q(q).items():
            acc = acc + coeff * multinomial_monomial_mvue(h, n, j, mode)
        return acc

    return KnownTargetLoss(
        evaluator=evaluator,
        scheme=FixedSize(n),
        provenance=f"estimator substitution, known target, degree {divergence.deg_p}, n={n}",
    )


def _batch_ff(cols: np.ndarray, exps: Sequence[int]) -> np.ndarray:
    out = np.ones(cols.shape[0])
    for x, e in enumerate(exps):
        if e:
            col = cols[:, x]
            for s in range(e):
                out = out * (col - s)
    return out


def compile_two_sample(divergence: PolyDivergence, n: int, m: int, mode: Mode = Mode.EXACT) -> CompiledLoss:
    """Loss over (model, target) histogram pairs implementing the divergence.

    ``L(h_p, h_q) = sum_k a_k * t(h_p; i_k) * t(h_q; j_k)`` where each ``t``
    is the unbiased monomial estimator for its side.  Unbiasedness of each
    factor plus independence of the two samples gives ``E L = divergence``.
    Requires ``n >= deg_p`` and ``m >= deg_q`` (both gates are tight).
    """
    if n < divergence.deg_p or m < divergence.deg_q:
        raise DegreeGateError(divergence.deg_p, divergence.deg_q)
    if n < 1 or m < 1:
        raise ValueError("sample sizes must be >= 1")
    d = divergence.dim
    monomials = divergence.monomials

    def evaluator(h_p: Histogram, h_q: Histogram) -> object:
        if h_p.dim != d or h_q.dim != d:
            raise DimensionMismatchError(f"histogram dimensions ({h_p.dim}, {h_q.dim}), divergence needs {d}")
        _check_fixed_total(h_p, n, "model")
        _check_fixed_total(h_q, m, "target")
        acc = 0
        for mono in monomials:
            tp = multinomial_monomial_mvue(h_p, n, mono.p_exps, mode)
            if tp == 0:
                continue
            tq = multinomial_monomial_mvue(h_q, m, mono.q_exps, mode)
            acc = acc + mono.coeff * tp * tq
        return acc

    terms = [
        (
            float(mono.coeff),
            mono.p_exps.exps,
            mono.q_exps.exps,
            float(falling_factorial(n, mono.p_exps.degree)),
            float(falling_factorial(m, mono.q_exps.degree)),
        )
        for mono in monomials
    ]

    def batch_evaluator(hp: np.ndarray, hq: np.ndarray) -> np.ndarray:
        hp = np.asarray(hp, dtype=float)
        hq = np.asarray(hq, dtype=float)
        out = np.zeros(hp.shape[0])
        for coeff, p_exps, q_exps, den_p, den_q in terms:
            out += coeff * (_batch_ff(hp, p_exps) / den_p) * (_batch_ff(hq, q_exps) / den_q)
        return out

    return CompiledLoss(
        evaluator=evaluator,
        scheme_p=FixedSize(n),
        scheme_q=FixedSize(m),
        provenance=(
            f"estimator substitution, two samples, degrees ({divergence.deg_p}, {divergence.deg_q}), "
            f"n={n}, m={m}"
        ),
        batch_evaluator=batch_evaluator,
    )


def squared_loss_known_target(n: int, mode: Mode = Mode.EXACT) -> KnownTargetLoss:
    """Closed-form unbiased squared-distance loss against a known target.

    ``L(h, q) = ||phat - q||^2 - sum_x s2_n(phat_x)``: the plug-in squared
    distance minus an unbiased estimate of its own sampling variance.  Equals
    the compiled squared loss pointwise; expectation is ``||p - q||^2``.
    """
    if n < 2:
        raise SampleTooSmallError("the variance correction needs n >= 2")

    def evaluator(h: Histogram, q) -> object:
        qv = q.probs if isinstance(q, Distribution) else tuple(q)
        if h.dim != len(qv):
            raise DimensionMismatchError(f"histogram dimension {h.dim}, target dimension {len(qv)}")
        _check_fixed_total(h, n, "model")
        phat = empirical(h, mode).probs
        acc = 0
        for a, b in zip(phat, qv):
            acc = acc + (a - b) ** 2 - variance_mvue(a, n)
        return acc

    return KnownTargetLoss(
        evaluator=evaluator,
        scheme=FixedSize(n),
        provenance=f"closed-form squared loss with variance correction, n={n}",
    )


def squared_loss_two_sample(n: int, m: int, mode: Mode = Mode.EXACT) -> CompiledLoss:
    """Closed-form unbiased squared-distance loss over two sample histograms.

    Per coordinate: ``ff(h_p, 2)/ff(n, 2) - 2 h_p h_q/(n m) + ff(h_q, 2)/ff(m, 2)``.
    Only coordinates observed in either sample contribute, so evaluation
    touches at most ``n + m`` coordinates however large the domain is.
    """
    if n < 2 or m < 2:
        raise SampleTooSmallError("the unbiased squared loss needs n >= 2 and m >= 2")
    den_p = n * (n - 1)
    den_q = m * (m - 1)
    den_cross = n * m

    def evaluator(h_p: Histogram, h_q: Histogram) -> object:
        if h_p.dim != h_q.dim:
            raise DimensionMismatchError(f"histogram dimensions {h_p.dim} != {h_q.dim}")
        _check_fixed_total(h_p, n, "model")
        _check_fixed_total(h_q, m, "target")
        acc = 0
        for x in set(h_p.support).union(h_q.support):
            a = h_p.counts[x]
            b = h_q.counts[x]
            if mode is Mode.EXACT:
                acc = (
                    acc
                    + Fraction(a * (a - 1), den_p)
                    - Fraction(2 * a * b, den_cross)
                    + Fraction(b * (b - 1), den_q)
                )
            else:
                acc = acc + a * (a - 1) / den_p - 2 * a * b / den_cross + b * (b - 1) / den_q
        return acc

    def batch_evaluator(hp: np.ndarray, hq: np.ndarray) -> np.ndarray:
        hp = np.asarray(hp, dtype=float)
        hq = np.asarray(hq, dtype=float)
        return (hp * (hp - 1) / den_p - 2 * hp * hq / den_cross + hq * (hq - 1) / den_q).sum(axis=1)

    return CompiledLoss(
        evaluator=evaluator,
        scheme_p=FixedSize(n),
        scheme_q=FixedSize(m),
        provenance=f"closed-form two-sample squared loss, n={n}, m={m}",
        batch_evaluator=batch_evaluator,
    )


def _log_series(rate, mode: Mode) -> Callable[[int], object]:
    """Memoized S(t) = sum_{k=1..t} (1/k) rate**-k ff(t, k).

    This is the unbiased estimator of ``-ln(theta / rate)``'s Taylor series
    evaluated on a Poisson(theta) count: ``E S(T) = -ln(1 - theta/rate)``
    whenever ``theta < rate``, extended by the estimator's own convergence.
    """
    if not rate > 0:
        raise ValueError("rate must be > 0")
    if mode is Mode.EXACT:
        r = Fraction(rate)
        coeffs = lambda k: Fraction(1, k)
    else:
        r = float(rate)
        coeffs = lambda k: 1.0 / k
    cache: dict[int, object] = {}

    def series(t: int):
        val = cache.get(t)
        if val is None:
            val = poisson_power_series(t, coeffs, r)
            cache[t] = val
        return val

    return series


def cross_entropy_poisson(alpha: float, beta: float, mode: Mode = Mode.FLOAT) -> CompiledLoss:
    """Poisson-size loss whose expectation is the cross-entropy -sum_x q_x ln p_x.

    ``L(h_p, h_q) = sum_x (h_q[x]/beta) * S_alpha(h_p minus x)``, where
    ``S_alpha`` is the log power-series estimator evaluated on the count of
    everything except ``x``.  The inner sum self-truncates, so the loss is
    finite on every histogram pair even when the divergence itself is +inf.
    """
    series = _log_series(alpha, mode)
    beta_val = Fraction(beta) if mode is Mode.EXACT else float(beta)

    def evaluator(h_p: Histogram, h_q: Histogram) -> object:
        if h_p.dim != h_q.dim:
            raise DimensionMismatchError(f"histogram dimensions {h_p.dim} != {h_q.dim}")
        acc = 0
        for x in h_q.support:
            acc = acc + (h_q.counts[x] / beta_val) * series(h_p.complement(x))
        return acc

    return CompiledLoss(
        evaluator=evaluator,
        scheme_p=Poisson(float(alpha)),
        scheme_q=Poisson(float(beta)),
        provenance=f"cross-entropy power-series loss, rates ({alpha}, {beta})",
    )


def cross_entropy_poisson_fixed_target(alpha: float, m: int, mode: Mode = Mode.FLOAT) -> CompiledLoss:
    """Cross-entropy loss with a Poisson model sample but a fixed-size target sample.

    The target side only needs the empirical frequency, so any ``m >= 1``
    works: ``L = sum_x qhat_x * S_alpha(h_p minus x)``.
    """
    if m < 1:
        raise ValueError("target sample size must be >= 1")
    series = _log_series(alpha, mode)

    def evaluator(h_p: Histogram, h_q: Histogram) -> object:
        if h_p.dim != h_q.dim:
            raise DimensionMismatchError(f"histogram dimensions {h_p.dim} != {h_q.dim}")
        _check_fixed_total(h_q, m, "target")
        qhat = empirical(h_q, mode).probs
        acc = 0
        for x in h_q.support:
            acc = acc + qhat[x] * series(h_p.complement(x))
        return acc

    return CompiledLoss(
        evaluator=evaluator,
        scheme_p=Poisson(float(alpha)),
        scheme_q=FixedSize(m),
        provenance=f"cross-entropy power-series loss, rate {alpha}, fixed target size {m}",
    )


def entropy_poisson(beta: float, mode: Mode = Mode.FLOAT) -> CompiledLoss:
    """Target-only Poisson loss whose expectation is the Shannon entropy -sum_x q_x ln q_x.

    Uses that under Poisson sampling the count at ``x`` and the count of
    everything else are independent: ``L(h_q) = sum_x (h_q[x]/beta) *
    S_beta(h_q minus x)`` has expectation ``sum_x q_x * (-ln q_x) >= 0``.
    The model histogram is ignored (``scheme_p`` is ``None``).
    """
    series = _log_series(beta, mode)
    beta_val = Fraction(beta) if mode is Mode.EXACT else float(beta)

    def evaluator(h_p, h_q: Histogram) -> object:
        acc = 0
        for x in h_q.support:
            acc = acc + (h_q.counts[x] / beta_val) * series(h_q.complement(x))
        return acc

    return CompiledLoss(
        evaluator=evaluator,
        scheme_p=None,
        scheme_q=Poisson(float(beta)),
        provenance=f"Shannon-entropy power-series loss, rate {beta}",
    )


def kl_poisson(alpha: float, beta: float, mode: Mode = Mode.FLOAT) -> CompiledLoss:
    """Poisson-size loss whose expectation is sum_x q_x ln(q_x / p_x).

    KL decomposes as cross-entropy minus Shannon entropy of the target, and
    both parts are implementable under Poisson sampling, so the loss is the
    difference of the two estimators on the same histogram pair.
    """
    ce = cross_entropy_poisson(alpha, beta, mode)
    ent = entropy_poisson(beta, mode)

    def evaluator(h_p: Histogram, h_q: Histogram) -> object:
        return ce.evaluator(h_p, h_q) - ent.evaluator(None, h_q)

    return CompiledLoss(
        evaluator=evaluator,
        scheme_p=Poisson(float(alpha)),
        scheme_q=Poisson(float(beta)),
        provenance=f"KL power-series loss, rates ({alpha}, {beta})",
    )


def convexity_audit(potential: PolyDivergence, denominator: int = 8) -> bool:
    """Midpoint-inequality check of a p-only polynomial on a simplex grid.

    Numerical evidence only, not a proof; exact arithmetic on grid midpoints.
    """
    d = potential.dim
    if d > 4:
        raise DomainTooLargeError(f"convexity audit supports d <= 4, got {d}")
    points = [g.probs for g in simplex_grid(d, denominator)]
    for i, a in enumerate(points):
        for b in points[i + 1 :]:
            mid = tuple((u + v) / 2 for u, v in zip(a, b))
            if potential.evaluate(mid, mid) * 2 > potential.evaluate(a, a) + potential.evaluate(b, b):
                return False
    return True


def bregman_known_target(
    potential: PolyDivergence,
    gradient: Sequence[PolyDivergence],
    n: int,
    mode: Mode = Mode.EXACT,
    audit_denominator: int | None = 8,
) -> KnownTargetLoss:
    """Known-target loss implementing the Bregman divergence of a convex polynomial.

    Given a potential ``G`` and its coordinate-wise derivative polynomials,
    the loss replaces ``G(p)`` by its unbiased estimate from the histogram and
    keeps the tangent part exact in the known target:

        ``L(h, q) = est_G(h) - [G(q) + <grad G(q), phat - q>]``

    Its expectation is ``G(p) - G(q) - <grad G(q), p - q>``.  Convexity of the
    potential is the caller's assertion; it is audited on a grid unless
    ``audit_denominator`` is ``None``.
    """
    d = potential.dim
    if potential.deg_q != 0:
        raise ValueError("the potential must be a polynomial in the model argument only")
    if len(gradient) != d:
        raise DimensionMismatchError(f"need {d} gradient polynomials, got {len(gradient)}")
    for g in gradient:
        if g.dim != d or g.deg_q != 0:
            raise ValueError("gradient entries must be p-only polynomials over the same domain")
    if n < potential.deg_p:
        raise DegreeGateError(potential.deg_p)
    if audit_denominator is not None and not convexity_audit(potential, audit_denominator):
        raise ValueError("potential failed the convexity audit; Bregman construction needs a convex potential")

    def evaluator(h: Histogram, q) -> object:
        qv = q.probs if isinstance(q, Distribution) else tuple(q)
        if h.dim != d or len(qv) != d:
            raise DimensionMismatchError(f"dimensions ({h.dim}, {len(qv)}), potential needs {d}")
        _check_fixed_total(h, n, "model")
        est = 0
        for mono in potential.monomials:
            est = est + mono.coeff * multinomial_monomial_mvue(h, n, mono.p_exps, mode)
        phat = empirical(h, mode).probs
        tangent = potential.evaluate(qv, qv)
        for x in range(d):
            tangent = tangent + gradient[x].evaluate(qv, qv) * (phat[x] - qv[x])
        return est - tangent

    return KnownTargetLoss(
        evaluator=evaluator,
        scheme=FixedSize(n),
        provenance=f"Bregman construction, potential degree {potential.deg_p}, n={n}",
    )
