"""Patterson-Sullivan theory on the tree boundary.

The conformal density at the basepoint gives every depth-n cylinder the same
mass (2k)^{-1} (2k-1)^{1-n}; all masses, Radon-Nikodym derivatives and
translated masses are exact rationals.  The truncated orbit measures mu_{o,t}
used by the shadow-lemma diagnostics are kept as closed-form sums over sphere
sizes, so no enumeration is needed there either.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .geometry import (
    BoundaryPoint,
    TreeModel,
    Word,
    common_prefix_len,
    horofunction,
    sphere_size,
)


def growth_base(model: TreeModel) -> int:
    """e^delta: each sphere is (2k-1) times larger than the previous one."""
    return 2 * model.k - 1


def critical_exponent(model: TreeModel) -> float:
    """Exponential growth rate of orbit spheres, delta = log(2k - 1)."""
    return math.log(sphere_size(model, 2) // sphere_size(model, 1))


def depth_mass(model: TreeModel, n: int) -> Fraction:
    """mu_o-mass of a single depth-n cylinder (uniform across the sphere)."""
    if n < 1:
        return Fraction(1)
    b = growth_base(model)
    return Fraction(1, 2 * model.k) * Fraction(1, b) ** (n - 1)


def ps_mass(model: TreeModel, w: Word) -> Fraction:
    """mu_o([w]) for a cylinder word w (the empty word means the whole boundary)."""
    return depth_mass(model, len(w))


def rn_derivative(model: TreeModel, xi, x: Word, y: Word) -> Fraction:
    """d mu_x / d mu_y at xi, equal to (2k-1)^{-b_xi(x,y)}.

    `xi` may be a BoundaryPoint or a cylinder word on which the Busemann
    cocycle b_(.)(x, y) is constant (depth >= max(|x|, |y|)); otherwise the
    cylinder is too coarse and must be refined first.
    """
    if isinstance(xi, BoundaryPoint):
        b = horofunction(xi, x) - horofunction(xi, y)
    else:
        w = tuple(xi)
        if len(w) < max(len(x), len(y)):
            raise ValueError(
                f"cylinder too coarse: depth {len(w)} < max(|x|,|y|) = {max(len(x), len(y))}"
            )
        b = (len(x) - 2 * common_prefix_len(x, w)) - (len(y) - 2 * common_prefix_len(y, w))
    return Fraction(growth_base(model)) ** (-b)


def ps_mass_at(model: TreeModel, x: Word, w: Word) -> Fraction:
    """mu_{x.o}([w]), exact for every x and every cylinder depth.

    For depth >= |x| the derivative is constant on [w]; for coarser cylinders
    the cylinder is split by the length of the common prefix with x.
    """
    b = growth_base(model)
    n, m = len(x), len(w)
    if m >= n or common_prefix_len(x, w) < m:
        bus = (n - 2 * common_prefix_len(x, w))
        return Fraction(b) ** (-bus) * ps_mass(model, w)
    # w is a proper prefix of x: split [w] by c = <x, xi>_o in {m, ..., n}
    total = Fraction(0)
    for c in range(m, n + 1):
        mass_ge = depth_mass(model, c)  # mu(<x,.>_o >= c) = mu([x_c])
        mass_eq = mass_ge - depth_mass(model, c + 1) if c < n else mass_ge
        total += Fraction(b) ** (2 * c - n) * mass_eq
    return total


def translated_cylinder_mass(model: TreeModel, g: Word, w: Word) -> Fraction:
    """mu_o(g^{-1} [w]) = (g_* mu_o)([w]); used to test equivariance."""
    return ps_mass_at(model, g, w)


@dataclass(frozen=True)
class TruncatedOrbitMeasure:
    """The normalized e^{-t d(o, .)} weights on the orbit ball of radius N.

    Weights depend only on word length, so the measure is stored per length.
    `tail_fraction` is the exact mass the truncation discards from the full
    (untruncated) normalizing series.
    """

    model: TreeModel
    t: float
    radius: int
    length_weights: tuple  # weight of a single orbit point of each length
    normalizer: float
    tail_fraction: float

    def atom_weight(self, g: Word) -> float:
        """Weight of the orbit point g.o (zero outside the truncation ball)."""
        if len(g) > self.radius:
            return 0.0
        return self.length_weights[len(g)]

    def mass_of_lengths(self, counts) -> float:
        """Total mass of a set described by #points per length."""
        return math.fsum(c * self.length_weights[n] for n, c in enumerate(counts))

    def shadow_set_mass(self, x: Word, rho: float) -> float:
        """Mass of U(o, x, rho) = {z : <z, x>_o >= d(o,x) - rho} in the ball."""
        c = max(0, math.ceil(len(x) - rho))
        counts = [self._count_with_prefix(n, x, c) for n in range(self.radius + 1)]
        return self.mass_of_lengths(counts)

    def _count_with_prefix(self, n: int, x: Word, c: int) -> int:
        """#{|z| = n with <z, x>_o >= c} via sphere combinatorics."""
        if c == 0:
            return sphere_size(self.model, n)
        if n < c:
            return 0
        return growth_base(self.model) ** (n - c)


def orbit_measure(model: TreeModel, t: float, radius: int) -> TruncatedOrbitMeasure:
    """The measure mu_{o,t} truncated to the orbit ball of the given radius."""
    delta = critical_exponent(model)
    if t <= delta:
        raise ValueError(f"divergent Poincare exponent: t = {t} <= delta = {delta:.6f}")
    weights = [math.exp(-t * n) for n in range(radius + 1)]
    w_trunc = math.fsum(sphere_size(model, n) * weights[n] for n in range(radius + 1))
    # full series in closed form: 1 + 2k e^-t / (1 - (2k-1) e^-t)
    x = growth_base(model) * math.exp(-t)
    w_full = 1.0 + 2 * model.k * math.exp(-t) / (1.0 - x)
    tail = (w_full - w_trunc) / w_full
    return TruncatedOrbitMeasure(
        model, t, radius, tuple(w / w_trunc for w in weights), w_trunc, tail
    )


@dataclass(frozen=True)
class BandStats:
    """min/max of a compared quantity over a sweep, with the witness inputs."""

    lo: float
    hi: float
    argmin: object
    argmax: object

    @property
    def width(self) -> float:
        return self.hi / self.lo if self.lo > 0 else math.inf


def shadow_lemma_check(model: TreeModel, t: float, rho_list, sample_words, radius=200) -> BandStats:
    """Ratios mu_{o,t}(U(o,x,rho)) e^{delta d(o,x)} e^{-delta rho} over a sweep.

    The shadow lemma asserts these stay in a band [1/C, C]; the achieved band
    is returned (the model realizes the lemma with T = delta + 1, r0 = 1).
    Pairs with rho > d(o, x) are skipped: there U is the whole space with mass
    one, so only the trivial upper bound ratio <= 1 holds (checked separately).
    """
    mu = orbit_measure(model, t, radius)
    delta = critical_exponent(model)
    lo, hi, amin, amax = math.inf, -math.inf, None, None
    for x in sample_words:
        for rho in rho_list:
            if rho > len(x):
                continue
            ratio = mu.shadow_set_mass(x, rho) * math.exp(delta * len(x) - delta * rho)
            if ratio < lo:
                lo, amin = ratio, (x, rho)
            if ratio > hi:
                hi, amax = ratio, (x, rho)
    return BandStats(lo, hi, amin, amax)


def ball_regularity_ratio(model: TreeModel, m: int) -> Fraction:
    """e^{delta m} mu_o(visual ball of radius e^-m): constant (2k-1)/2k."""
    return Fraction(growth_base(model)) ** m * depth_mass(model, m)


def orbit_mass_on_cylinder(model: TreeModel, x: Word, w: Word) -> Fraction:
    """Signed cocycle mass c(x)([w]) = mu_{x.o}([w]) - mu_o([w])."""
    return ps_mass_at(model, x, w) - ps_mass(model, w)


def busemann_on_cylinder(x: Word, y: Word, w: Word) -> int:
    """b_xi(x, y) for every xi in [w]; requires depth >= max(|x|, |y|)."""
    if len(w) < max(len(x), len(y)):
        raise ValueError("cylinder too coarse for a constant Busemann value")
    return (len(x) - 2 * common_prefix_len(x, w)) - (len(y) - 2 * common_prefix_len(y, w))
