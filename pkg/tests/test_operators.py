"""Kernel forms: Galerkin entries, hierarchical apply, spectra, degeneration,
the intertwining identities and the conditional-negativity checker."""

import math
from fractions import Fraction

import numpy as np
import pytest

from treeboundary import (
    CylinderFunction,
    KnappStein,
    LogGromov,
    degeneration_check,
    fast_apply,
    galerkin,
    intertwine_residual,
    inverse,
    negative_type_check,
    pair_Q,
    pi_apply,
    quadratic_form,
    zero_mean_spectrum,
)
from treeboundary.conformal import depth_mass, growth_base
from treeboundary.cylfun import n_cylinders
from treeboundary.operators import galerkin_entry_exact

from conftest import random_word


def spectrum_oracle(model, kernel, depth):
    """Closed-form eigenvalues of the kernel operator on zero-mean functions.

    Functions that are zero-sum across the children of a fixed tree node and
    constant below are eigenfunctions; the eigenvalue at node depth j is
    sum_{m > j} [kappa(m) - kappa(m-1)] mu(depth-m cylinder), with
    multiplicity (#nodes at depth j) x (#children - 1).
    """
    b = growth_base(model)
    if isinstance(kernel, LogGromov):
        def lam(j):
            return float(b) / (2 * model.k * (b - 1)) * float(b) ** (-j)
    else:
        q = float(b) ** (2 * (1 - kernel.s))
        def lam(j):
            return (q - 1) * q**j * float(b) ** (-j) * b / (2 * model.k * (b - q)) if q != 1 else 0.0
    out = []
    for j in range(depth):
        count = 2 * model.k - 1 if j == 0 else (2 * model.k) * (2 * model.k - 1) ** (j - 1) * (2 * model.k - 2)
        out.extend([lam(j)] * count)
    return np.sort(np.array(out))


class TestGalerkinEntries:
    def test_knapp_stein_at_one_is_rank_one(self, model2):
        form = galerkin(model2, KnappStein(1.0), 2)
        mass = float(depth_mass(model2, 2))
        assert np.allclose(form.matrix, np.full_like(form.matrix, mass * mass))

    def test_log_gromov_depth1(self, model2):
        form = galerkin(model2, LogGromov(), 1)
        off = form.matrix[0, 1]
        assert off == 0.0
        assert form.matrix[0, 0] == pytest.approx(3 / 32, abs=0)

    def test_diagonal_by_truncated_series_oracle(self, model2):
        # oracle 1: E<xi,eta> over [a] x [a] via the overlap distribution,
        # summed far past machine precision
        n = 1
        exp_overlap = sum(3.0 ** (-m) for m in range(1, 60))
        want = (n + exp_overlap) * (1 / 4) ** 2
        assert float(galerkin_entry_exact(model2, LogGromov(), (1,), (1,))) == pytest.approx(want, rel=1e-14)

    def test_diagonal_by_monte_carlo_oracle(self, model2, rng):
        # oracle 2: sample boundary pairs in [a] from mu_o and average <xi,eta>
        n_samples = 200_000
        def sample_tail():
            # uniform non-backtracking continuation below the cylinder [a]
            prev, depth = 1, 0
            while True:
                step = int(rng.integers(0, 3))
                letters = [a for a in model2.letters if a != -prev]
                prev = letters[step]
                depth += 1
                yield prev

        total = 0
        for _ in range(n_samples):
            g1, g2 = sample_tail(), sample_tail()
            overlap = 1
            for a, b in zip(g1, g2):
                if a != b:
                    break
                overlap += 1
            total += overlap
        mc = total / n_samples * float(depth_mass(model2, 1)) ** 2
        exact = float(galerkin_entry_exact(model2, LogGromov(), (1,), (1,)))
        assert mc == pytest.approx(exact, rel=0.02)

    def test_below_critical_line_rejected(self, model2):
        with pytest.raises(ValueError, match="critical line"):
            galerkin(model2, KnappStein(0.5), 2)
        with pytest.raises(ValueError, match="critical line"):
            fast_apply(model2, KnappStein(0.3), CylinderFunction.constant(model2, 1, 1.0))


class TestFastApply:
    def test_constant_gives_mean_gromov(self, model2):
        one = CylinderFunction.constant(model2, 2, 1.0)
        out = fast_apply(model2, LogGromov(), one)
        assert np.allclose(out.values, 3 / 8)

    def test_zero(self, model2):
        zero = CylinderFunction.constant(model2, 3, 0.0)
        assert np.all(fast_apply(model2, LogGromov(), zero).values == 0)

    @pytest.mark.parametrize("kernel", [LogGromov(), KnappStein(0.75), KnappStein(0.9)])
    @pytest.mark.parametrize("depth", [1, 3, 6])
    def test_matches_dense_apply(self, model2, rng, kernel, depth):
        f = CylinderFunction(model2, depth, rng.normal(size=n_cylinders(model2, depth)))
        dense = galerkin(model2, kernel, depth).apply(f)
        fast = fast_apply(model2, kernel, f)
        scale = np.max(np.abs(dense.values))
        assert np.max(np.abs(dense.values - fast.values)) <= 1e-12 * scale

    def test_exact_fraction_path(self, model2):
        f = CylinderFunction.indicator(model2, (1,), depth=2, exact=True)
        out = fast_apply(model2, LogGromov(), f)
        assert out.values.dtype == object
        assert out.value_at((1, 1)) == Fraction(1, 4) + Fraction(1, 12) * Fraction(5, 2) - Fraction(1, 12)

    def test_form_refinement_invariance(self, model2, rng):
        f = CylinderFunction(model2, 2, rng.normal(size=12))
        h = CylinderFunction(model2, 2, rng.normal(size=12))
        for kernel in (LogGromov(), KnappStein(0.8)):
            v2 = quadratic_form(model2, kernel, f, h)
            v4 = quadratic_form(model2, kernel, f.refine(4), h.refine(4))
            assert v2 == pytest.approx(v4, rel=1e-12)


class TestSpectra:
    def test_rank_one_form_vanishes_on_zero_mean(self, model2):
        eigs = zero_mean_spectrum(galerkin(model2, KnappStein(1.0), 3))
        assert np.max(np.abs(eigs)) < 1e-14

    @pytest.mark.parametrize("kernel", [LogGromov(), KnappStein(0.6), KnappStein(0.75), KnappStein(0.9)])
    @pytest.mark.parametrize("depth", [2, 4])
    def test_matches_closed_form_oracle(self, model2, kernel, depth):
        eigs = zero_mean_spectrum(galerkin(model2, kernel, depth))
        want = spectrum_oracle(model2, kernel, depth)
        assert eigs.shape == want.shape
        assert np.max(np.abs(eigs - want)) < 1e-12

    def test_eigenvalues_reappear_under_refinement(self, model2):
        lo = zero_mean_spectrum(galerkin(model2, LogGromov(), 2))
        hi = zero_mean_spectrum(galerkin(model2, LogGromov(), 3))
        for val in lo:
            assert np.min(np.abs(hi - val)) < 1e-12

    def test_positive_for_k3(self, model3):
        eigs = zero_mean_spectrum(galerkin(model3, LogGromov(), 3))
        assert eigs[0] >= -1e-10


class TestDegeneration:
    def test_zero_function(self, model2):
        zero = CylinderFunction.constant(model2, 2, 0.0)
        rows, _ = degeneration_check(model2, zero, [1 - 10.0**-j for j in range(1, 4)])
        assert all(r == 0 for _, r in rows)

    def test_monotone_decay_on_centred_indicator(self, model2):
        f = CylinderFunction.indicator(model2, (1,)) - CylinderFunction.constant(model2, 1, 0.25)
        s_list = [1 - 10.0**-j for j in range(1, 7)]
        rows, slope = degeneration_check(model2, f, s_list)
        residuals = [r for _, r in rows]
        assert all(residuals[i + 1] < residuals[i] for i in range(len(residuals) - 1))
        assert residuals[-1] <= 1e-4 * residuals[0]
        assert slope == pytest.approx(1.0, abs=0.1)  # empirical O(1-s) rate

    def test_nonzero_mean_rejected(self, model2):
        with pytest.raises(ValueError, match="zero-mean"):
            degeneration_check(model2, CylinderFunction.constant(model2, 1, 1.0), [0.9])


class TestIntertwining:
    def test_identity_element(self, model2):
        f = CylinderFunction.indicator(model2, (2,)) - CylinderFunction.constant(model2, 1, 0.25)
        assert intertwine_residual(model2, (), f) == 0.0

    def test_derived_example(self, model2):
        f = CylinderFunction.indicator(model2, (2,)) - CylinderFunction.constant(model2, 1, 0.25)
        assert intertwine_residual(model2, (1,), f) <= 1e-10

    def test_random_words(self, model2, rng):
        f = CylinderFunction(model2, 2, rng.normal(size=12))
        f = f - CylinderFunction.constant(model2, 2, f.integral())
        for _ in range(5):
            g = random_word(rng, model2, 3)
            assert intertwine_residual(model2, g, f) <= 1e-10

    def test_nonzero_mean_rejected(self, model2):
        with pytest.raises(ValueError, match="zero-mean"):
            intertwine_residual(model2, (1,), CylinderFunction.constant(model2, 1, 1.0))

    @pytest.mark.parametrize("s", [0.6, 0.75, 0.9])
    def test_knapp_stein_form_invariance(self, model2, rng, s):
        # I_s pi_s(g) = pi_{1-s}(g) I_s; at the level of the Q-pairing this
        # reads (I_s pi_s(g) f, h) = (I_s f, pi_s(g^-1) h) for real s
        f = CylinderFunction(model2, 1, rng.normal(size=4))
        h = CylinderFunction(model2, 2, rng.normal(size=12))
        g = (1, 2)
        lhs = quadratic_form(model2, KnappStein(s), pi_apply(g, f, s), h)
        rhs = quadratic_form(model2, KnappStein(s), f, pi_apply(inverse(g), h, s))
        assert lhs == pytest.approx(rhs, rel=1e-10)

    @pytest.mark.parametrize("s", [0.6, 0.9])
    def test_operator_intertwining(self, model2, rng, s):
        f = CylinderFunction(model2, 1, rng.normal(size=4))
        g = (2, 1)
        lhs = fast_apply(model2, KnappStein(s), pi_apply(g, f, s))
        rhs = pi_apply(g, fast_apply(model2, KnappStein(s), f), 1 - s).refine(lhs.depth)
        assert np.max(np.abs(lhs.values - rhs.values)) < 1e-10

    def test_coupling_bound(self, model2, rng):
        # |Q(f, I' h)| <= sqrt(Q'_1(f)) sqrt(Q'_1(h)) for zero-mean f, h
        for _ in range(20):
            f = CylinderFunction(model2, 2, rng.normal(size=12))
            f = f - CylinderFunction.constant(model2, 2, f.integral())
            h = CylinderFunction(model2, 3, rng.normal(size=36))
            h = h - CylinderFunction.constant(model2, 3, h.integral())
            lhs = abs(pair_Q(f, fast_apply(model2, LogGromov(), h.refine(3))))
            bound = math.sqrt(quadratic_form(model2, LogGromov(), f, f)) * math.sqrt(
                quadratic_form(model2, LogGromov(), h, h)
            )
            assert lhs <= bound + 1e-12


K23 = np.array(
    [
        [0, 2, 1, 1, 1],
        [2, 0, 1, 1, 1],
        [1, 1, 0, 2, 2],
        [1, 1, 2, 0, 2],
        [1, 1, 2, 2, 0],
    ],
    dtype=float,
)


class TestNegativeType:
    def test_two_points(self):
        assert negative_type_check([(1,), (2, 1)]).passed

    def test_random_orbit_points(self, model2, rng):
        pts = {random_word(rng, model2, 8) for _ in range(120)}
        res = negative_type_check(sorted(pts)[:50])
        assert res.passed and res.worst_rayleigh <= 1e-10

    def test_bipartite_metric_fails_with_certificate(self):
        res = negative_type_check(K23)
        assert not res.passed
        w = res.certificate
        assert abs(w.sum()) < 1e-9
        assert w @ K23 @ w > 1e-10

    def test_randomized_search_finds_failing_metric(self, rng):
        # brute-force oracle: random integer metrics (metric closure of random
        # symmetric weights); at least one must fail negative type
        found = 0
        for _ in range(120):
            raw = rng.integers(1, 5, size=(5, 5)).astype(float)
            d = np.minimum(raw, raw.T)
            np.fill_diagonal(d, 0.0)
            for _ in range(3):  # Floyd-Warshall closure
                for k in range(5):
                    d = np.minimum(d, d[:, k, None] + d[None, k, :])
            res = negative_type_check(d)
            if not res.passed:
                found += 1
                w = res.certificate
                assert w @ d @ w > 1e-10 and abs(w.sum()) < 1e-9
        assert found > 0

    def test_non_symmetric_rejected(self):
        bad = np.array([[0.0, 1.0], [2.0, 0.0]])
        with pytest.raises(ValueError, match="symmetric"):
            negative_type_check(bad)
