"""Cylinder functions: indexing, refinement, the pairing Q and pi_s."""

from fractions import Fraction

import numpy as np
import pytest

from treeboundary import CylinderFunction, compose, inverse, pair_Q, pi_apply
from treeboundary.cylfun import cylinder_index, index_to_word, n_cylinders, words_array



class TestIndexing:
    @pytest.mark.parametrize("k,depth", [(2, 1), (2, 4), (3, 3)])
    def test_bijection(self, k, depth):
        from treeboundary import TreeModel

        model = TreeModel(k)
        seen = set()
        for i in range(n_cylinders(model, depth)):
            w = index_to_word(model, depth, i)
            assert cylinder_index(model, w) == i
            seen.add(w)
        assert len(seen) == n_cylinders(model, depth)

    def test_children_are_contiguous(self, model2):
        words = words_array(model2.k, 3)
        for i in range(words.shape[0]):
            w = tuple(int(a) for a in words[i])
            parent = cylinder_index(model2, w[:2])
            assert i // model2.branching == parent


class TestRefine:
    def test_constant_refines_to_constant(self, model2):
        one = CylinderFunction.constant(model2, 1, 1.0)
        assert np.all(one.refine(3).values == 1.0)

    def test_indicator_support(self, model2):
        f = CylinderFunction.indicator(model2, (1,)).refine(2)
        support = {
            index_to_word(model2, 2, i) for i in np.flatnonzero(f.values)
        }
        assert support == {(1, 1), (1, 2), (1, -2)}

    def test_integral_invariant(self, model2, rng):
        vals = rng.normal(size=n_cylinders(model2, 2))
        f = CylinderFunction(model2, 2, vals)
        assert abs(f.integral() - f.refine(5).integral()) < 1e-14

    def test_shallower_depth_rejected(self, model2):
        f = CylinderFunction.constant(model2, 3, 1.0)
        with pytest.raises(ValueError, match="refine"):
            f.refine(2)


class TestPairing:
    def test_probability_normalization(self, model2):
        one = CylinderFunction.constant(model2, 1, 1.0)
        assert pair_Q(one, one) == 1.0

    def test_centred_indicator(self, model2):
        f = CylinderFunction.indicator(model2, (1,)) - CylinderFunction.constant(model2, 1, 0.25)
        assert pair_Q(f, f) == pytest.approx(3 / 16, abs=0)

    def test_disjoint_supports(self, model2):
        fa = CylinderFunction.indicator(model2, (1,))
        fb = CylinderFunction.indicator(model2, (2,))
        assert pair_Q(fa, fb) == 0.0

    def test_exact_fraction_path(self, model2):
        f = CylinderFunction.indicator(model2, (1,), exact=True)
        assert pair_Q(f, f) == Fraction(1, 4)

    def test_cauchy_schwarz(self, model2, rng):
        f = CylinderFunction(model2, 2, rng.normal(size=12))
        g = CylinderFunction(model2, 3, rng.normal(size=36))
        assert abs(pair_Q(f, g)) ** 2 <= pair_Q(f, f) * pair_Q(g, g) + 1e-12

    def test_refinement_invariance(self, model2, rng):
        f = CylinderFunction(model2, 2, rng.normal(size=12))
        g = CylinderFunction(model2, 2, rng.normal(size=12))
        assert pair_Q(f, g) == pytest.approx(pair_Q(f.refine(4), g.refine(5)), rel=1e-14)


class TestPiS:
    def test_identity_element(self, model2):
        f = CylinderFunction.indicator(model2, (1,))
        assert pi_apply((), f, 0.7) is f

    def test_pi1_of_one_is_translated_density(self, model2):
        one = CylinderFunction.constant(model2, 1, 1.0)
        out = pi_apply((1,), one, 1)
        assert out.integral() == pytest.approx(1.0, abs=1e-14)
        assert out.value_at((1, 1)) == pytest.approx(3.0)
        assert out.value_at((2, 1)) == pytest.approx(1 / 3)

    def test_composition_after_refinement(self, model2, rng):
        f = CylinderFunction(model2, 1, rng.normal(size=4))
        g, h = (1, 2), (2, -1)
        lhs = pi_apply(g, pi_apply(h, f, 0.5), 0.5)
        rhs = pi_apply(compose(g, h), f, 0.5).refine(lhs.depth)
        assert np.allclose(lhs.values.astype(float), rhs.values.astype(float), atol=1e-13)

    @pytest.mark.parametrize("s", [0.0, 0.5, 1.0])
    def test_adjoint_relation(self, model2, rng, s):
        f = CylinderFunction(model2, 1, rng.normal(size=4))
        h = CylinderFunction(model2, 2, rng.normal(size=12))
        g = (1, 2)
        lhs = pair_Q(pi_apply(g, f, s), h)
        rhs = pair_Q(f, pi_apply(inverse(g), h, 1 - s))
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_exact_fraction_multiplier(self, model2):
        f = CylinderFunction.indicator(model2, (2,), exact=True)
        out = pi_apply((1,), f, 1)
        assert out.values.dtype == object
        # pi_1 acts on densities, so total mass is preserved exactly
        assert out.subtree_integral(()) == Fraction(1, 4)
        # the support moves to a.[b] = [ab], carrying the derivative 3 there
        assert out.value_at((1, 2)) == 3 and out.value_at((2, 2)) == 0

    def test_depth_cap(self):
        from treeboundary import TreeModel

        model = TreeModel(2, max_cells=40)
        f = CylinderFunction.constant(model, 2, 1.0)
        with pytest.raises(ValueError, match="too large"):
            pi_apply((1, 2), f, 1)
