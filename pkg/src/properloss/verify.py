"""Exact and tail-bounded expectation oracles.

Everything here computes expected losses the literal way: enumerate every
histogram the sampling scheme can produce, weight it by its probability, and
add up.  With exact-mode distributions the arithmetic is rational end to end,
so implementation claims ("the expectation of this loss IS that divergence")
are checked as literal equalities with zero tolerance.  Poisson schemes have
unbounded support, so their oracle truncates at a quantile and reports the
truncation honestly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .compiler import CompiledLoss, KnownTargetLoss
from .divergences import eval_divergence
from .domain import Distribution, FixedSize, Histogram, Mode, Poisson, compositions, empirical
from .errors import (
    DimensionMismatchError,
    EnumerationTooLargeError,
    SampleTooSmallError,
    TotalMismatchError,
)

#: Feasibility cap on the number of enumerated histograms per oracle call.
ENUMERATION_CAP = 10**6


def enumerate_histograms(d: int, n: int, cap: int = ENUMERATION_CAP) -> list[Histogram]:
    """All histograms over d outcomes with total n, each exactly once."""
    if d < 1 or n < 0:
        raise ValueError("need d >= 1 and n >= 0")
    count = math.comb(n + d - 1, d - 1)
    if count > cap:
        raise EnumerationTooLargeError(f"{count} histograms exceed the cap of {cap}")
    return [Histogram(c) for c in compositions(n, d)]


def multinomial_pmf(h: Histogram, n: int, p: Distribution):
    """P[H = h] for H ~ Multinomial(n, p); exact when p is exact."""
    if h.total != n:
        raise TotalMismatchError(f"histogram total {h.total} != sample size {n}")
    if h.dim != p.dim:
        raise DimensionMismatchError(f"histogram dimension {h.dim} != distribution dimension {p.dim}")
    coef = math.factorial(n)
    for c in h.counts:
        coef //= math.factorial(c)
    out = Fraction(coef) if p.mode is Mode.EXACT else float(coef)
    for prob, c in zip(p.probs, h.counts):
        if c:
            out = out * prob**c
            if out == 0:
                break
    return out


def _require_exact(dist: Distribution, name: str) -> None:
    if dist.mode is not Mode.EXACT:
        raise ValueError(f"exact verification requires an exact-mode {name} distribution")


def exact_expected_known_target(loss, p: Distribution, q, n: int | None = None):
    """E over model histograms of a known-target loss, by exact enumeration.

    ``loss`` is a :class:`~properloss.compiler.KnownTargetLoss` (sample size
    taken from its scheme) or a raw callable ``(h, q) -> value`` with ``n``
    given explicitly.
    """
    _require_exact(p, "model")
    if isinstance(loss, KnownTargetLoss):
        n = loss.scheme.n
        evaluator = loss.evaluator
    else:
        if n is None:
            raise ValueError("a raw callable loss needs an explicit sample size n")
        evaluator = loss
    acc = 0
    for h in enumerate_histograms(p.dim, n):
        w = multinomial_pmf(h, n, p)
        if w == 0:
            continue
        acc = acc + w * evaluator(h, q)
    return acc


def exact_expected_two_sample(loss, p: Distribution, q: Distribution, n: int | None = None, m: int | None = None):
    """E over independent (model, target) histogram pairs, by double enumeration."""
    _require_exact(p, "model")
    _require_exact(q, "target")
    if isinstance(loss, CompiledLoss):
        if not (isinstance(loss.scheme_p, FixedSize) and isinstance(loss.scheme_q, FixedSize)):
            raise ValueError("this oracle handles fixed-size schemes; use poisson_expected_loss otherwise")
        n = loss.scheme_p.n
        m = loss.scheme_q.n
        evaluator = loss.evaluator
    else:
        if n is None or m is None:
            raise ValueError("a raw callable loss needs explicit sample sizes n and m")
        evaluator = loss
    acc = 0
    model_side = [(h, multinomial_pmf(h, n, p)) for h in enumerate_histograms(p.dim, n)]
    target_side = [(g, multinomial_pmf(g, m, q)) for g in enumerate_histograms(q.dim, m)]
    for h, wp in model_side:
        if wp == 0:
            continue
        inner = 0
        for g, wq in target_side:
            if wq == 0:
                continue
            inner = inner + wq * evaluator(h, g)
        acc = acc + wp * inner
    return acc


def _poisson_mass_truncation(rate: float, eps: float) -> int:
    """Smallest T with P[N > T] <= eps, by direct pmf summation."""
    if not rate > 0:
        raise ValueError("rate must be > 0")
    if not eps > 0:
        raise ValueError("tail mass must be > 0")
    pmf = math.exp(-rate)
    cum = pmf
    t = 0
    limit = int(rate * 20 + 500)
    while 1.0 - cum > eps and t < limit:
        t += 1
        pmf *= rate / t
        cum += pmf
    return t


def _poisson_size_weight(rate: float, size: int) -> float:
    return math.exp(-rate + size * math.log(rate) - math.lgamma(size + 1))


@dataclass(frozen=True)
class PoissonExpectation:
    """Truncated expectation with an explicit error budget.

    ``tail_bound`` adds the omitted probability mass times the largest loss
    magnitude seen on the evaluated support to the last extension increment;
    it is reported, never folded into the value.
    """

    value: float
    tail_bound: float
    omitted_mass: float
    truncation_model: Optional[int]
    truncation_target: Optional[int]


def _poisson_items(dist: Distribution, rate: float, size_from: int, size_to: int) -> list:
    d = dist.dim
    total_hists = sum(math.comb(size + d - 1, d - 1) for size in range(size_from, size_to + 1))
    if total_hists > ENUMERATION_CAP:
        raise EnumerationTooLargeError(
            f"{total_hists} histograms needed below the Poisson truncation point exceed the cap"
        )
    items = []
    for size in range(size_from, size_to + 1):
        w_size = _poisson_size_weight(rate, size)
        for h in enumerate_histograms(d, size):
            w = w_size * float(multinomial_pmf(h, size, dist))
            if w > 0.0:
                items.append((h, w))
    return items


def _fixed_side(dist: Distribution, size: int) -> list:
    side = []
    for h in enumerate_histograms(dist.dim, size):
        w = float(multinomial_pmf(h, size, dist))
        if w > 0.0:
            side.append((h, w))
    return side


def poisson_expected_loss(
    loss: CompiledLoss,
    p: Distribution | None,
    q: Distribution,
    tail_eps: float = 1e-10,
    value_tol: float = 1e-7,
    max_items_per_side: int = 8000,
) -> PoissonExpectation:
    """Expected loss under the loss's own schemes, truncating Poisson sides.

    Each Poisson side starts at the smallest sample size whose omitted tail
    mass is below its share of ``tail_eps``, then keeps extending in blocks
    while its expectation increment exceeds ``value_tol * max(1, |value|)``.
    The extension matters because power-series losses grow with sample size,
    so omitted probability mass understates omitted expectation mass; a side
    whose increments have stabilized twice in a row stops growing.  Fixed-size
    sides are enumerated exactly.  Rates come from the loss's own schemes, so
    they cannot drift from the series baked into the evaluator.

    Divergent expectations never converge here; the item budget stops the
    chase and the large reported ``tail_bound`` flags the result as unusable.
    """
    if loss.scheme_p is not None and p is None:
        raise ValueError("the loss consumes a model sample, so a model distribution is required")
    poisson_sides = sum(1 for s in (loss.scheme_p, loss.scheme_q) if isinstance(s, Poisson))
    per_side = tail_eps / poisson_sides if poisson_sides else tail_eps
    evaluator = loss.evaluator
    sup_loss = 0.0

    def cross(left: list, right: list) -> float:
        nonlocal sup_loss
        acc = 0.0
        for h, wp in left:
            inner = 0.0
            for g, wq in right:
                v = float(evaluator(h, g))
                inner += wq * v
                a = abs(v)
                if a > sup_loss:
                    sup_loss = a
            acc += wp * inner
        return acc

    if loss.scheme_p is None:
        model_side, trunc_p, rate_p = [(None, 1.0)], None, None
    elif isinstance(loss.scheme_p, Poisson):
        rate_p = loss.scheme_p.rate
        trunc_p = _poisson_mass_truncation(rate_p, per_side)
        model_side = _poisson_items(p, rate_p, 0, trunc_p)
    else:
        model_side, trunc_p, rate_p = _fixed_side(p, loss.scheme_p.n), None, None

    if isinstance(loss.scheme_q, Poisson):
        rate_q = loss.scheme_q.rate
        trunc_q = _poisson_mass_truncation(rate_q, per_side)
        target_side = _poisson_items(q, rate_q, 0, trunc_q)
    else:
        target_side, trunc_q, rate_q = _fixed_side(q, loss.scheme_q.n), None, None

    value = cross(model_side, target_side)

    last_delta = 0.0
    step = 4
    calm_p = 0 if rate_p is not None else 2
    calm_q = 0 if rate_q is not None else 2
    while calm_p < 2 or calm_q < 2:
        grow_p = calm_p < 2 and len(model_side) < max_items_per_side
        grow_q = calm_q < 2 and len(target_side) < max_items_per_side
        if not grow_p and not grow_q:
            break
        new_p = _poisson_items(p, rate_p, trunc_p + 1, trunc_p + step) if grow_p else []
        new_q = _poisson_items(q, rate_q, trunc_q + 1, trunc_q + step) if grow_q else []
        if grow_p:
            trunc_p += step
        if grow_q:
            trunc_q += step
        delta_p = cross(new_p, target_side)
        delta_q = cross(model_side, new_q)
        delta_pq = cross(new_p, new_q)
        value += delta_p + delta_q + delta_pq
        model_side.extend(new_p)
        target_side.extend(new_q)
        last_delta = abs(delta_p) + abs(delta_q) + abs(delta_pq)
        threshold = value_tol * max(1.0, abs(value))
        if grow_p:
            calm_p = calm_p + 1 if abs(delta_p) + abs(delta_pq) <= threshold else 0
        if grow_q:
            calm_q = calm_q + 1 if abs(delta_q) + abs(delta_pq) <= threshold else 0

    omitted = 0.0
    if rate_p is not None:
        omitted += max(0.0, 1.0 - sum(w for _, w in model_side))
    if rate_q is not None:
        omitted += max(0.0, 1.0 - sum(w for _, w in target_side))
    return PoissonExpectation(
        value=value,
        tail_bound=omitted * sup_loss + last_delta,
        omitted_mass=omitted,
        truncation_model=trunc_p,
        truncation_target=trunc_q,
    )


@dataclass(frozen=True)
class VerificationReport:
    """One implementation check: target divergence value vs computed expectation."""

    target: object
    estimate: object
    gap: object
    mode: str  # "exact" or "truncated"
    tail_bound: Optional[float]
    passed: bool


def check_implements(loss, divergence, points: Sequence[tuple], tol=0, tail_eps: float = 1e-10) -> list[VerificationReport]:
    """Check E[loss] == divergence at every (p, q) pair.

    Exact-mode checks demand literal equality (``tol`` defaults to zero);
    truncated checks pass when the gap is within ``tail_bound + tol``.
    Histogram enumerations and loss tables are shared across points, so grid
    sweeps stay cheap.
    """
    if not points:
        raise ValueError("need at least one (model, target) point to check")
    reports: list[VerificationReport] = []

    if isinstance(loss, KnownTargetLoss):
        n = loss.scheme.n
        d = points[0][0].dim
        hists = enumerate_histograms(d, n)
        pmf_cache: dict[tuple, list] = {}
        loss_cache: dict[tuple, list] = {}
        for p, q in points:
            _require_exact(p, "model")
            if p.probs not in pmf_cache:
                pmf_cache[p.probs] = [multinomial_pmf(h, n, p) for h in hists]
            qkey = q.probs if isinstance(q, Distribution) else tuple(q)
            if qkey not in loss_cache:
                loss_cache[qkey] = [loss.evaluator(h, q) for h in hists]
            value = sum(w * v for w, v in zip(pmf_cache[p.probs], loss_cache[qkey]) if w != 0)
            target = eval_divergence(divergence, p, q)
            gap = abs(target - value)
            reports.append(VerificationReport(target, value, gap, "exact", None, gap <= tol))
        return reports

    if isinstance(loss, CompiledLoss) and isinstance(loss.scheme_p, FixedSize) and isinstance(loss.scheme_q, FixedSize):
        n, m = loss.scheme_p.n, loss.scheme_q.n
        d = points[0][0].dim
        hp_list = enumerate_histograms(d, n)
        hq_list = enumerate_histograms(d, m)
        table = [[loss.evaluator(h, g) for g in hq_list] for h in hp_list]
        pmf_p: dict[tuple, list] = {}
        pmf_q: dict[tuple, list] = {}
        for p, q in points:
            _require_exact(p, "model")
            _require_exact(q, "target")
            if p.probs not in pmf_p:
                pmf_p[p.probs] = [multinomial_pmf(h, n, p) for h in hp_list]
            if q.probs not in pmf_q:
                pmf_q[q.probs] = [multinomial_pmf(g, m, q) for g in hq_list]
            wp = pmf_p[p.probs]
            wq = pmf_q[q.probs]
            value = 0
            for i, w in enumerate(wp):
                if w == 0:
                    continue
                row = table[i]
                value = value + w * sum(u * v for u, v in zip(wq, row) if u != 0)
            target = eval_divergence(divergence, p, q)
            gap = abs(target - value)
            reports.append(VerificationReport(target, value, gap, "exact", None, gap <= tol))
        return reports

    # At least one Poisson (or absent) side: truncated oracle per point.
    for p, q in points:
        target = eval_divergence(divergence, p, q)
        if math.isinf(target):
            # a truncated sum can never witness an infinite expectation
            reports.append(VerificationReport(target, math.nan, math.inf, "truncated", None, False))
            continue
        est = poisson_expected_loss(loss, p, q, tail_eps)
        gap = abs(float(target) - est.value)
        reports.append(
            VerificationReport(target, est.value, gap, "truncated", est.tail_bound, gap <= est.tail_bound + tol)
        )
    return reports


def naive_plugin_loss(n: int, mode: Mode = Mode.EXACT) -> KnownTargetLoss:
    """The biased plug-in loss ||phat - q||^2, kept around as a counterexample.

    Its expectation is the squared distance plus the summed sampling variance
    of the empirical frequencies, so its minimizer is pulled toward lower
    variance models; the bias demo quantifies the pull.
    """
    if n < 1:
        raise SampleTooSmallError("need at least one draw")

    def evaluator(h: Histogram, q) -> object:
        qv = q.probs if isinstance(q, Distribution) else tuple(q)
        if h.dim != len(qv):
            raise DimensionMismatchError(f"histogram dimension {h.dim}, target dimension {len(qv)}")
        if h.total != n:
            raise TotalMismatchError(f"histogram total {h.total} != declared sample size {n}")
        phat = empirical(h, mode).probs
        return sum((a - b) ** 2 for a, b in zip(phat, qv))

    return KnownTargetLoss(evaluator=evaluator, scheme=FixedSize(n), provenance=f"plug-in squared loss (biased), n={n}")


@dataclass(frozen=True)
class NaivePluginBias:
    """Where the plug-in squared loss actually puts its optimum on a coin domain."""

    q1: object
    n: int
    closed_form: object  # clip((q1 - 1/(2n)) * n/(n-1), 0, 1)
    grid_argmin: float


def naive_plugin_bias_demo(q: Distribution, n: int, grid_step: float = 1e-4) -> NaivePluginBias:
    """Minimize the plug-in loss's expectation over two-outcome models.

    The expectation is ``2(p1 - q1)^2 + 2 p1 (1 - p1)/n``; the stationary
    point is ``(q1 - 1/(2n)) * n/(n-1)``, clipped to [0, 1].  Both the closed
    form and a dense grid minimum are returned so they can corroborate each
    other.
    """
    if q.dim != 2:
        raise DimensionMismatchError("the bias demo is defined on two-outcome domains")
    if n < 2:
        raise SampleTooSmallError("need n >= 2")
    q1 = q.probs[0]
    if q.mode is Mode.EXACT:
        stationary = (q1 - Fraction(1, 2 * n)) * Fraction(n, n - 1)
        closed = min(max(stationary, Fraction(0)), Fraction(1))
    else:
        stationary = (q1 - 1.0 / (2 * n)) * n / (n - 1)
        closed = min(max(stationary, 0.0), 1.0)
    grid = np.arange(0.0, 1.0 + grid_step / 2, grid_step)
    q1f = float(q1)
    values = 2.0 * (grid - q1f) ** 2 + 2.0 * grid * (1.0 - grid) / n
    return NaivePluginBias(q1=q1, n=n, closed_form=closed, grid_argmin=float(grid[int(np.argmin(values))]))


def _exact_system_consistent(rows: list[list[Fraction]]) -> bool:
    """Gaussian elimination over rationals; True iff the augmented system is solvable."""
    rows = [list(r) for r in rows]
    ncols = len(rows[0]) - 1
    rank_col = 0
    for col in range(ncols):
        pivot = next((i for i in range(rank_col, len(rows)) if rows[i][col] != 0), None)
        if pivot is None:
            continue
        rows[rank_col], rows[pivot] = rows[pivot], rows[rank_col]
        base = rows[rank_col]
        inv = base[col]
        rows[rank_col] = [v / inv for v in base]
        for i in range(len(rows)):
            if i != rank_col and rows[i][col] != 0:
                factor = rows[i][col]
                rows[i] = [a - factor * b for a, b in zip(rows[i], rows[rank_col])]
        rank_col += 1
    return all(not (all(v == 0 for v in r[:-1]) and r[-1] != 0) for r in rows)


def degree_gate_bypass_exists(divergence, q: Distribution, points: Sequence[Distribution]) -> bool:
    """Can ANY single-draw loss reproduce divergence(., q) at the given models?

    With one draw, the expected loss is ``sum_x p_x * L(e_x, q)``: affine in
    ``p`` with the d loss values as free coefficients.  This solves that
    linear system exactly; infeasibility certifies the degree gate cannot be
    bypassed for this divergence, not merely that our construction declines.
    """
    rows = []
    for p in points:
        _require_exact(p, "model")
        rows.append(list(p.probs) + [eval_divergence(divergence, p, q)])
    return _exact_system_consistent(rows)


def gradient_check(potential, gradient: Sequence, points: Sequence[Distribution], step: float = 1e-6) -> float:
    """Max discrepancy between supplied derivative polynomials and central differences.

    Differences are taken along simplex directions e_x - e_y, which is what
    the Bregman tangent term consumes.
    """
    worst = 0.0
    for point in points:
        pv = tuple(float(v) for v in point.probs)
        d = len(pv)
        for x in range(d):
            for y in range(x + 1, d):
                plus = list(pv)
                minus = list(pv)
                plus[x] += step
                plus[y] -= step
                minus[x] -= step
                minus[y] += step
                numeric = (potential.evaluate(plus, plus) - potential.evaluate(minus, minus)) / (2 * step)
                analytic = gradient[x].evaluate(pv, pv) - gradient[y].evaluate(pv, pv)
                worst = max(worst, abs(numeric - float(analytic)))
    return worst
