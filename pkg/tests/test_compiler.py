import math
import time
from fractions import Fraction

import numpy as np
import pytest

from properloss import (
    DegreeGateError,
    Distribution,
    FixedSize,
    Histogram,
    Mode,
    Poisson,
    SampleTooSmallError,
    TotalMismatchError,
    bregman_known_target,
    builtin_brier,
    builtin_l2,
    builtin_lk_even,
    compile_known_target,
    compile_two_sample,
    convexity_audit,
    cross_entropy_poisson,
    cross_entropy_poisson_fixed_target,
    entropy_poisson,
    enumerate_histograms,
    exact_expected_known_target,
    kl_poisson,
    simplex_grid,
    squared_loss_known_target,
    squared_loss_two_sample,
    squared_norm_gradient,
    squared_norm_polynomial,
)
from properloss.divergences import Monomial, PolyDivergence
from properloss.estimators import ExponentVector

HALF = Distribution.exact([Fraction(1, 2), Fraction(1, 2)])


class TestCompileTwoSample:
    def test_hand_values_for_squared_distance(self):
        loss = compile_two_sample(builtin_l2(2), 2, 2)
        assert loss.evaluator(Histogram((2, 0)), Histogram((0, 2))) == 2
        assert loss.evaluator(Histogram((1, 1)), Histogram((1, 1))) == -1

    def test_degree_gate_fires_below_the_boundary(self):
        with pytest.raises(DegreeGateError) as exc:
            compile_two_sample(builtin_l2(2), 1, 2)
        assert exc.value.n_required == 2
        assert exc.value.m_required == 2
        with pytest.raises(DegreeGateError):
            compile_two_sample(builtin_l2(2), 2, 1)

    def test_degree_gate_is_tight_for_every_builtin(self):
        for div in (builtin_l2(2), builtin_lk_even(2, 4), builtin_brier(2)):
            n, m = div.deg_p, div.deg_q
            loss = compile_two_sample(div, n, m)
            assert loss.scheme_p == FixedSize(n)
            assert loss.scheme_q == FixedSize(m)
            with pytest.raises(DegreeGateError):
                compile_two_sample(div, n - 1, m)
            with pytest.raises(DegreeGateError):
                compile_two_sample(div, n, m - 1)

    def test_totals_enforced(self):
        loss = compile_two_sample(builtin_l2(2), 2, 2)
        with pytest.raises(TotalMismatchError):
            loss.evaluator(Histogram((3, 0)), Histogram((1, 1)))

    def test_batch_matches_scalar(self):
        loss = compile_two_sample(builtin_lk_even(2, 4), 4, 4, Mode.FLOAT)
        rng = np.random.default_rng(1)
        hp = rng.multinomial(4, [0.3, 0.7], size=50)
        hq = rng.multinomial(4, [0.6, 0.4], size=50)
        batch = loss.batch_evaluator(hp, hq)
        scalar = [loss.evaluator(Histogram(tuple(a)), Histogram(tuple(b))) for a, b in zip(hp, hq)]
        assert batch == pytest.approx(scalar, abs=1e-12)


class TestCompileKnownTarget:
    def test_matches_closed_form_values(self):
        loss = compile_known_target(builtin_l2(2), 2)
        assert loss.evaluator(Histogram((1, 1)), HALF) == Fraction(-1, 2)
        assert loss.evaluator(Histogram((2, 0)), HALF) == Fraction(1, 2)

    def test_exact_expectation_at_identity(self):
        loss = compile_known_target(builtin_l2(2), 2)
        assert exact_expected_known_target(loss, HALF, HALF) == 0

    def test_degree_gate(self):
        with pytest.raises(DegreeGateError) as exc:
            compile_known_target(builtin_l2(2), 1)
        assert exc.value.n_required == 2
        assert exc.value.m_required is None


class TestSquaredLossKnownTarget:
    def test_hand_values(self):
        loss = squared_loss_known_target(2)
        assert loss.evaluator(Histogram((1, 1)), HALF) == Fraction(-1, 2)
        assert loss.evaluator(Histogram((2, 0)), Distribution.exact([1, 0])) == 0
        assert loss.evaluator(Histogram((2, 0)), HALF) == Fraction(1, 2)

    def test_needs_two_draws(self):
        with pytest.raises(SampleTooSmallError):
            squared_loss_known_target(1)

    def test_agrees_with_the_compiler_everywhere(self):
        # closed form vs estimator substitution: pointwise equality over every
        # histogram and a rational grid of targets, d <= 3, n <= 5
        for d in (2, 3):
            div = builtin_l2(d)
            targets = simplex_grid(d, 4)
            for n in range(2, 6):
                closed = squared_loss_known_target(n)
                compiled = compile_known_target(div, n)
                for h in enumerate_histograms(d, n):
                    for q in targets:
                        assert closed.evaluator(h, q) == compiled.evaluator(h, q)


class TestSquaredLossTwoSample:
    def test_hand_values(self):
        loss = squared_loss_two_sample(2, 2)
        assert loss.evaluator(Histogram((2, 0)), Histogram((0, 2))) == 2
        assert loss.evaluator(Histogram((1, 1)), Histogram((1, 1))) == -1

    def test_needs_two_draws_each(self):
        with pytest.raises(SampleTooSmallError):
            squared_loss_two_sample(1, 2)
        with pytest.raises(SampleTooSmallError):
            squared_loss_two_sample(2, 1)

    def test_agrees_with_the_compiler_everywhere(self):
        for d in (2, 3):
            div = builtin_l2(d)
            for n in (2, 3):
                for m in (2, 3):
                    closed = squared_loss_two_sample(n, m)
                    compiled = compile_two_sample(div, n, m)
                    for h in enumerate_histograms(d, n):
                        for g in enumerate_histograms(d, m):
                            assert closed.evaluator(h, g) == compiled.evaluator(h, g)

    def test_sparse_evaluation_cost_is_domain_free(self):
        # a domain of 10^5 outcomes with 4 observed ones evaluates instantly
        # and matches the same counts embedded in a 2-outcome domain
        d = 10**5
        hp = [0] * d
        hq = [0] * d
        hp[17] = 2
        hq[90000] = 2
        big = (Histogram(tuple(hp)), Histogram(tuple(hq)))
        small = (Histogram((2, 0)), Histogram((0, 2)))
        loss = squared_loss_two_sample(2, 2)
        t0 = time.perf_counter()
        value = loss.evaluator(*big)
        elapsed = time.perf_counter() - t0
        assert value == loss.evaluator(*small) == 2
        assert elapsed < 0.01

    def test_support_union_is_at_most_n_plus_m(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            hp = Histogram(tuple(rng.multinomial(3, [0.2] * 5)))
            hq = Histogram(tuple(rng.multinomial(4, [0.2] * 5)))
            assert len(set(hp.support) | set(hq.support)) <= 3 + 4

    def test_batch_matches_scalar(self):
        loss = squared_loss_two_sample(2, 2, Mode.FLOAT)
        rng = np.random.default_rng(2)
        hp = rng.multinomial(2, [0.25, 0.75], size=100)
        hq = rng.multinomial(2, [0.5, 0.5], size=100)
        batch = loss.batch_evaluator(hp, hq)
        scalar = [loss.evaluator(Histogram(tuple(a)), Histogram(tuple(b))) for a, b in zip(hp, hq)]
        assert batch == pytest.approx(scalar, abs=1e-12)

    def test_float_mode_tracks_exact_mode(self):
        exact = squared_loss_two_sample(3, 2)
        floating = squared_loss_two_sample(3, 2, Mode.FLOAT)
        for h in enumerate_histograms(2, 3):
            for g in enumerate_histograms(2, 2):
                assert floating.evaluator(h, g) == pytest.approx(float(exact.evaluator(h, g)), abs=1e-14)


class TestCrossEntropyLosses:
    def test_hand_value(self):
        loss = cross_entropy_poisson(4.0, 2.0)
        assert loss.evaluator(Histogram((3, 1)), Histogram((1, 1))) == pytest.approx(0.609375, abs=1e-15)

    def test_zero_target_histogram_gives_zero(self):
        loss = cross_entropy_poisson(4.0, 2.0)
        assert loss.evaluator(Histogram((5, 2)), Histogram((0, 0))) == 0

    def test_finite_even_where_the_divergence_is_infinite(self):
        # model sample never hits outcome 0, target sample only hits it
        loss = cross_entropy_poisson(4.0, 2.0)
        value = loss.evaluator(Histogram((0, 4)), Histogram((3, 0)))
        assert math.isfinite(float(value))

    def test_schemes_recorded(self):
        loss = cross_entropy_poisson(4.0, 2.0)
        assert loss.scheme_p == Poisson(4.0)
        assert loss.scheme_q == Poisson(2.0)

    def test_fixed_target_variant_matches_hand_value(self):
        loss = cross_entropy_poisson_fixed_target(4.0, 2)
        assert loss.evaluator(Histogram((3, 1)), Histogram((1, 1))) == pytest.approx(0.609375, abs=1e-15)
        assert loss.scheme_q == FixedSize(2)

    def test_fixed_target_enforces_total(self):
        loss = cross_entropy_poisson_fixed_target(4.0, 2)
        with pytest.raises(TotalMismatchError):
            loss.evaluator(Histogram((3, 1)), Histogram((2, 1)))

    def test_fixed_target_point_mass_empty_inner_sum(self):
        # target mass all on one outcome the model also concentrates on
        loss = cross_entropy_poisson_fixed_target(4.0, 2)
        assert loss.evaluator(Histogram((4, 0)), Histogram((2, 0))) == 0

    def test_exact_mode_is_rational(self):
        loss = cross_entropy_poisson(Fraction(4), Fraction(2), Mode.EXACT)
        value = loss.evaluator(Histogram((3, 1)), Histogram((1, 1)))
        assert value == Fraction(39, 64)


class TestEntropyAndKl:
    def test_point_mass_target_gives_zero(self):
        loss = entropy_poisson(6.0)
        assert loss.evaluator(None, Histogram((5, 0))) == 0

    def test_model_histogram_ignored(self):
        loss = entropy_poisson(6.0)
        hq = Histogram((2, 3))
        assert loss.evaluator(None, hq) == loss.evaluator(Histogram((9, 9)), hq)
        assert loss.scheme_p is None

    def test_kl_is_cross_entropy_minus_entropy_pointwise(self):
        alpha, beta = 5.0, 3.0
        kl = kl_poisson(alpha, beta)
        ce = cross_entropy_poisson(alpha, beta)
        ent = entropy_poisson(beta)
        for hp, hq in ((Histogram((3, 1)), Histogram((1, 2))), (Histogram((0, 2)), Histogram((4, 4)))):
            assert kl.evaluator(hp, hq) == pytest.approx(
                ce.evaluator(hp, hq) - ent.evaluator(None, hq), abs=1e-14
            )


class TestBregman:
    def test_recovers_the_squared_loss_pointwise(self):
        for n in (2, 3):
            bloss = bregman_known_target(squared_norm_polynomial(2), squared_norm_gradient(2), n)
            closed = squared_loss_known_target(n)
            for h in enumerate_histograms(2, n):
                for q in simplex_grid(2, 4):
                    assert bloss.evaluator(h, q) == closed.evaluator(h, q)

    def test_identity_expectation_is_zero(self):
        bloss = bregman_known_target(squared_norm_polynomial(2), squared_norm_gradient(2), 2)
        assert exact_expected_known_target(bloss, HALF, HALF) == 0

    def test_degree_gate(self):
        with pytest.raises(DegreeGateError):
            bregman_known_target(squared_norm_polynomial(2), squared_norm_gradient(2), 1)

    def test_concave_potential_rejected(self):
        d = 2
        concave = PolyDivergence(
            tuple(Monomial(-1, ExponentVector.unit(d, x, 2), ExponentVector.zero(d)) for x in range(d))
        )
        grad = tuple(
            PolyDivergence((Monomial(-2, ExponentVector.unit(d, x), ExponentVector.zero(d)),))
            for x in range(d)
        )
        assert not convexity_audit(concave)
        with pytest.raises(ValueError):
            bregman_known_target(concave, grad, 2)

    def test_convexity_audit_accepts_the_squared_norm(self):
        assert convexity_audit(squared_norm_polynomial(3))


def random_divergence(rng, d=2, max_deg=3, terms=4) -> PolyDivergence:
    """Random sparse polynomial with small rational coefficients."""
    monomials = {}
    while len(monomials) < terms:
        p_exps = ExponentVector(tuple(int(e) for e in rng.integers(0, max_deg + 1, d)))
        q_exps = ExponentVector(tuple(int(e) for e in rng.integers(0, max_deg + 1, d)))
        if p_exps.degree > max_deg or q_exps.degree > max_deg:
            continue
        coeff = Fraction(int(rng.integers(-6, 7)), int(rng.integers(1, 5)))
        if coeff != 0:
            monomials[(p_exps, q_exps)] = Monomial(coeff, p_exps, q_exps)
    return PolyDivergence(tuple(monomials.values()))


class TestCompilerOnArbitraryPolynomials:
    def test_random_divergences_are_exactly_implemented_at_their_degrees(self):
        # the compiler contract is not specific to the builtins: any sparse
        # polynomial compiles at its degree pair and matches exactly
        import numpy as np

        from properloss import check_implements

        rng = np.random.default_rng(1234)
        points = [
            (Distribution.exact([Fraction(1, 3), Fraction(2, 3)]), Distribution.exact([Fraction(1, 4), Fraction(3, 4)])),
            (Distribution.exact([1, 0]), HALF),
            (HALF, Distribution.exact([0, 1])),
            (HALF, HALF),
        ]
        for _ in range(25):
            div = random_divergence(rng)
            n, m = max(1, div.deg_p), max(1, div.deg_q)  # schemes need >= 1 draw
            loss = compile_two_sample(div, n, m)
            reports = check_implements(loss, div, points)
            assert all(r.passed and r.gap == 0 for r in reports)
            known = compile_known_target(div, n)
            for p, q in points:
                assert exact_expected_known_target(known, p, q) == div.evaluate(p, q)


class TestImplementationEquality:
    # expectation equals the divergence, as exact rationals, across a sample
    # of compiled losses and grid points
    @pytest.mark.parametrize(
        "div_builder,n,m",
        [
            (lambda: builtin_l2(2), 2, 2),
            (lambda: builtin_l2(2), 3, 4),
            (lambda: builtin_brier(2), 2, 1),
            (lambda: builtin_brier(2), 3, 2),
            (lambda: builtin_lk_even(2, 4), 4, 4),
            (lambda: builtin_l2(3), 2, 2),
        ],
    )
    def test_compiled_expectation_equals_divergence(self, div_builder, n, m):
        from properloss import check_implements

        div = div_builder()
        loss = compile_two_sample(div, n, m)
        points = [(p, q) for p in simplex_grid(div.dim, 2) for q in simplex_grid(div.dim, 2)]
        reports = check_implements(loss, div, points)
        assert all(r.passed for r in reports)
        assert all(r.gap == 0 for r in reports)
