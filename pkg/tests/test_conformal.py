"""Patterson-Sullivan masses, conformal derivatives and shadow-lemma bands."""

import math
from fractions import Fraction

import pytest

from treeboundary import (
    TreeModel,
    compose,
    critical_exponent,
    growth_base,
    inverse,
    orbit_measure,
    ps_mass,
    ps_mass_at,
    ray,
    rn_derivative,
    shadow_lemma_check,
    sphere_enumerate,
    sphere_size,
)
from treeboundary.conformal import ball_regularity_ratio, busemann_on_cylinder

from conftest import random_word


class TestCriticalExponent:
    @pytest.mark.parametrize("k", [2, 3])
    def test_slope_of_log_sphere_counts(self, k):
        # oracle: the exponent is the limit slope of (1/n) log |S(n)|
        model = TreeModel(k)
        delta = critical_exponent(model)
        slopes = [math.log(sphere_size(model, n)) / n for n in (10, 20, 40)]
        assert abs(slopes[-1] - delta) < 0.05
        assert abs(slopes[2] - delta) < abs(slopes[1] - delta) < abs(slopes[0] - delta)
        assert math.isclose(
            math.log(sphere_size(model, 41)) - math.log(sphere_size(model, 40)),
            critical_exponent(model),
            rel_tol=1e-12,
        )

    @pytest.mark.parametrize("k", [2, 3])
    def test_exp_delta_exact(self, k):
        model = TreeModel(k)
        assert growth_base(model) == 2 * k - 1
        assert math.isclose(math.exp(critical_exponent(model)), 2 * k - 1, rel_tol=1e-12)


class TestMass:
    def test_depth_one_symmetry(self, model2):
        assert ps_mass(model2, (1,)) == Fraction(1, 4)

    @pytest.mark.parametrize("k,w,val", [(2, (1, 2), Fraction(1, 12)), (3, (1, 2), Fraction(1, 30))])
    def test_derived_masses(self, k, w, val):
        assert ps_mass(TreeModel(k), w) == val

    @pytest.mark.parametrize("k", [2, 3])
    def test_conformality_of_candidate_on_small_cylinders(self, k):
        # oracle for the closed-form mass: additivity plus delta-conformality
        # (pushforward by generators) on every cylinder of depth <= 4
        model = TreeModel(k)
        total = Fraction(0)
        for depth in range(1, 5):
            for w in sphere_enumerate(model, depth):
                children = sum(
                    (ps_mass(model, w + (a,)) for a in model.letters if a != -w[-1]),
                    start=Fraction(0),
                )
                assert ps_mass(model, w) == children
        total = sum((ps_mass(model, (a,)) for a in model.letters), start=Fraction(0))
        assert total == 1
        for g in [(1,), (2,), (-1,)]:
            for w in sphere_enumerate(model, 3):
                # mu_{g.o}(g [w]) = mu_o([w]) with the derivative formula
                assert ps_mass_at(model, g, compose(g, w)) == ps_mass(model, w)


class TestDerivative:
    def test_examples(self, model2):
        assert rn_derivative(model2, (1,), (1,), ()) == 3
        assert rn_derivative(model2, (2, 1), (1, 2), (1, 2)) == 1
        assert rn_derivative(model2, (2,), (1,), ()) == Fraction(1, 3)

    def test_boundary_point_argument(self, model2):
        assert rn_derivative(model2, ray((1,)), (1,), ()) == 3

    def test_cocycle_consistency(self, model2, rng):
        for _ in range(100):
            x = random_word(rng, model2, 4)
            y = random_word(rng, model2, 4)
            z = random_word(rng, model2, 4)
            w = random_word(rng, model2, 4)
            depth = max(len(x), len(y), len(z), 1)
            if len(w) < depth:
                continue
            lhs = rn_derivative(model2, w, x, y) * rn_derivative(model2, w, y, z)
            assert lhs == rn_derivative(model2, w, x, z)

    def test_coarse_cylinder_rejected(self, model2):
        with pytest.raises(ValueError, match="too coarse"):
            rn_derivative(model2, (1,), (1, 2), ())

    def test_pushforward_cross_check(self, model2):
        # derivative on [a] times mass of [a] equals the translated mass
        for w in sphere_enumerate(model2, 2):
            got = rn_derivative(model2, w, (1,), ()) * ps_mass(model2, w)
            assert got == ps_mass_at(model2, (1,), w)


class TestTranslatedMass:
    def test_examples(self, model2):
        assert ps_mass_at(model2, (1,), (1,)) == Fraction(3, 4)
        assert ps_mass_at(model2, (), (2, 1)) == ps_mass(model2, (2, 1))
        assert ps_mass_at(model2, (1,), (2,)) == Fraction(1, 12)

    def test_probability_and_equivariance(self, model2, rng):
        from treeboundary.geometry import common_prefix_len

        checked = 0
        for _ in range(60):
            x = random_word(rng, model2, 5)
            total = sum(
                (ps_mass_at(model2, x, (a,)) for a in model2.letters), start=Fraction(0)
            )
            assert total == 1
            w = random_word(rng, model2, 3)
            # x.[w] is the single cylinder [xw] only when the reduction does
            # not swallow w entirely
            if not w or common_prefix_len(inverse(x), w) == len(w):
                continue
            assert ps_mass_at(model2, x, compose(x, w)) == ps_mass(model2, w)
            checked += 1
        assert checked > 10

    def test_coarse_cylinder_split(self, model2):
        # direct refinement oracle for |w| < |x|
        x = (1, 2, -1)
        for w in [(1,), (1, 2)]:
            refined = sum(
                (
                    ps_mass(model2, v) * rn_derivative(model2, v, x, ())
                    for v in sphere_enumerate(model2, 3)
                    if v[: len(w)] == w
                ),
                start=Fraction(0),
            )
            assert ps_mass_at(model2, x, w) == refined


class TestOrbitMeasure:
    def test_weight_ratio_per_unit_length(self, model2):
        mu = orbit_measure(model2, 1.2, 10)
        assert math.isclose(mu.atom_weight((1, 2, 1, 2, 1)) / mu.atom_weight((2,) * 4), math.exp(-1.2))
        assert mu.atom_weight((1, 2) * 6) == 0.0
        total = math.fsum(
            sphere_size(model2, n) * mu.length_weights[n] for n in range(11)
        )
        assert total == pytest.approx(1.0)

    def test_tail_bound_by_direct_summation(self, model2):
        # oracle: direct sphere-count sums for mass beyond radius 8
        mu = orbit_measure(model2, 1.2, 12)
        beyond = math.fsum(
            sphere_size(model2, n) * mu.length_weights[n] for n in range(9, 13)
        )
        delta = critical_exponent(model2)
        model_tail = math.exp(-(1.2 - delta) * 8) * 2 * model2.k / (1 - 3 * math.exp(-1.2))
        assert beyond <= model_tail

    def test_concentration_at_identity(self, model2):
        mu = orbit_measure(model2, 25.0, 10)
        assert mu.length_weights[0] > 0.999

    def test_divergent_exponent_rejected(self, model2):
        with pytest.raises(ValueError, match="divergent Poincare exponent"):
            orbit_measure(model2, 1.0, 5)


class TestShadowLemma:
    def test_ball_regularity_exact(self, model2):
        for m in range(1, 8):
            assert ball_regularity_ratio(model2, m) == Fraction(3, 4)

    def test_whole_space_case(self, model2):
        mu = orbit_measure(model2, critical_exponent(model2) + 0.1, 60)
        x = (1, 2)
        rho = 5
        delta = critical_exponent(model2)
        ratio = mu.shadow_set_mass(x, rho) * math.exp(delta * len(x) - delta * rho)
        assert ratio <= 1.0

    def test_band_over_sweep(self, model2, rng):
        delta = critical_exponent(model2)
        samples = [random_word(rng, model2, 8) for _ in range(25)]
        samples = [w for w in samples if 1 <= len(w) <= 8]
        stats = shadow_lemma_check(model2, delta + 0.1, range(1, 6), samples)
        assert stats.lo > 0
        assert stats.width <= 10

    def test_busemann_on_cylinder_guard(self):
        with pytest.raises(ValueError, match="coarse"):
            busemann_on_cylinder((1, 2), (), (1,))
