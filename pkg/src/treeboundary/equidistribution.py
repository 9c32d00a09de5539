"""Sphere covers, orbit equidistribution and the cocycle von Neumann averages.

On the tree the Vitali cover of Lemma-2.6 type is exact set algebra: the
product sets attached to selected sphere elements are genuine cylinder
rectangles [front prefix] x [back prefix] that partition the double boundary.
The atomic measures nu_{o,t} built from them therefore have total mass one and
all averages are finite sums with closed-form integrands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .conformal import critical_exponent, growth_base, ps_mass, ps_mass_at
from .cylfun import CylinderFunction, cylinder_index, n_cylinders, pair_Q
from .geometry import TreeModel, Word, inverse, sphere_enumerate, sphere_size
from .operators import LogGromov, fast_apply, quadratic_form
from .cocycle import resolved_theta


# -- annuli and cones ---------------------------------------------------------

def annulus(model: TreeModel, t: int):
    """All g with tR <= d(g.o, o) < (t+1)R."""
    out = []
    for n in range(t * model.R, (t + 1) * model.R):
        out.extend(sphere_enumerate(model, n))
    return out


def annulus_size(model: TreeModel, t: int) -> int:
    return sum(sphere_size(model, n) for n in range(t * model.R, (t + 1) * model.R))


def cone_count(model: TreeModel, xi, rho: float, t: int, radius: float = 1.0) -> int:
    """#(straight cone of xi at visual radius e^-rho, width `radius`) in the annulus.

    A sphere element g belongs to the cone iff its shadow cylinder meets the
    visual ball [xi_ceil(rho)], i.e. iff one of the two prefixes extends the
    other; the count per length is then a closed-form sphere count.
    """
    b_depth = max(0, math.ceil(rho))
    total = 0
    for n in range(t * model.R, (t + 1) * model.R):
        s_depth = max(0, math.ceil(n - radius))
        c = min(s_depth, b_depth)
        if c == 0:
            total += sphere_size(model, n)
        else:
            total += growth_base(model) ** (n - c) if n >= c else 0
    return total


def cone_members(model: TreeModel, xi, rho: float, t: int, radius: float = 1.0):
    """Explicit cone members (enumeration oracle for small t)."""
    b_depth = max(0, math.ceil(rho))
    ball_prefix = xi.head(b_depth)
    out = []
    for g in annulus(model, t):
        s_depth = max(0, math.ceil(len(g) - radius))
        shadow_prefix = g[:s_depth]
        c = min(len(shadow_prefix), len(ball_prefix))
        if shadow_prefix[:c] == ball_prefix[:c]:
            out.append(g)
    return out


def cone_count_ratio(model: TreeModel, xi, rho: float, t: int, radius: float = 1.0) -> float:
    delta = critical_exponent(model)
    return cone_count(model, xi, rho, t, radius) * math.exp(-delta * t * model.R + delta * rho)


# -- Vitali covers and the measures nu_{o,t} ----------------------------------

@dataclass(frozen=True)
class SphereCover:
    """Selected sphere elements with disjoint product rectangles on the double
    boundary.

    Each entry is (g, u, v): u is the length-p front prefix of g, v the
    length-p front prefix of g^{-1}, and the attached product set is the
    rectangle [u] x [v] (empty words mean the whole boundary).  The rectangles
    are pairwise disjoint and cover the double boundary exactly.
    """

    model: TreeModel
    t: int
    r: int
    r_prime: int
    prefix_depth: int
    sphere_length: int
    entries: tuple

    def size_ratio(self) -> float:
        delta = critical_exponent(self.model)
        return len(self.entries) * math.exp(-delta * self.t * self.model.R)

    def radii(self):
        """Shadow radii R(t) = tR/2 + r and R'(t) = tR/2 + r' of the sandwich."""
        half = self.t * self.model.R / 2.0
        return half + self.r, half + self.r_prime

    def verify(self) -> None:
        """Assert the four cover properties exactly; hard error on failure."""
        model, p, n = self.model, self.prefix_depth, self.sphere_length
        lo, hi = self.radii()
        seen = set()
        total = Fraction(0)
        for g, u, v in self.entries:
            if len(g) != n or not (self.t * model.R <= len(g) < (self.t + 1) * model.R):
                raise ValueError("cover entry outside the annulus")
            if g[:p] != u or inverse(g)[:p] != v:
                raise ValueError("cover entry prefixes do not match its rectangle")
            # sandwich: shadow at radius R(t) inside the rectangle, rectangle
            # inside the shadow at radius R'(t) -- prefix-depth comparisons
            if math.ceil(n - lo) < p:
                raise ValueError("lower sandwich violated: shadow coarser than rectangle")
            if math.ceil(n - hi) > p:
                raise ValueError("upper sandwich violated: rectangle coarser than shadow")
            if (u, v) in seen:
                raise ValueError("rectangles not disjoint")
            seen.add((u, v))
            total += ps_mass(model, u) * ps_mass(model, v)
        want = (sphere_size(model, p) if p else 1) ** 2
        if len(seen) != want or total != 1:
            raise ValueError("rectangles do not partition the double boundary")


def _middle_block(model: TreeModel, u: Word, v: Word, length: int) -> Word:
    """Lexicographically least reduced junction between u and inverse(v)."""
    mid = []
    prev = u[-1] if u else None
    for i in range(length):
        lastpos = i == length - 1
        for a in model.letters:
            if prev is not None and a == -prev:
                continue
            if lastpos and v and a == v[-1]:
                continue
            mid.append(a)
            prev = a
            break
        else:
            raise AssertionError("no junction letter available (needs k >= 2)")
    return tuple(mid)


def vitali_cover(model: TreeModel, t: int, r: int = 1, r_prime: int = 3) -> SphereCover:
    """Greedy maximal rectangle packing over the sphere of length tR.

    On the tree the greedy packing of shadow products (words ordered by length
    then lexicographically) selects exactly one g per pair of depth-p prefixes
    (p = ceil(tR/2) - r), namely the one with the lexicographically least
    junction block; the construction below produces that outcome directly and
    `verify` asserts every cover property.
    """
    if t < 1:
        raise ValueError("cover scale t must be >= 1")
    if r_prime <= r:
        raise ValueError("outer radius constant must exceed the inner one")
    n = t * model.R
    p = max(math.ceil(n / 2) - r, 0)
    if n - 2 * p < 1 and p > 0:
        raise ValueError("no room for a junction block; decrease r")
    entries = []
    if p == 0:
        g = _middle_block(model, (), (), n)
        entries.append((g, (), ()))
    else:
        if sphere_size(model, p) ** 2 > model.max_cells:
            raise ValueError(
                f"enumeration too large: cover would hold {sphere_size(model, p)**2} rectangles"
            )
        fronts = list(sphere_enumerate(model, p))
        for u in fronts:
            for v in fronts:
                mid = _middle_block(model, u, v, n - 2 * p)
                g = u + mid + inverse(v)
                entries.append((g, u, v))
    cover = SphereCover(model, t, r, r_prime, p, n, tuple(entries))
    cover.verify()
    return cover


@dataclass(frozen=True)
class AtomicOrbitMeasure:
    """nu_{o,t}: the Dirac mass at each selected g weighted by its rectangle."""

    cover: SphereCover
    atoms: tuple  # (g, Fraction weight)

    @property
    def total_mass(self) -> Fraction:
        return sum((w for _, w in self.atoms), start=Fraction(0))

    def integrate(self, func) -> float:
        return math.fsum(float(w) * func(g) for g, w in self.atoms)


def nu_measure(cover: SphereCover) -> AtomicOrbitMeasure:
    atoms = tuple(
        (g, ps_mass(cover.model, u) * ps_mass(cover.model, v)) for g, u, v in cover.entries
    )
    return AtomicOrbitMeasure(cover, atoms)


def marginal_first_letter_masses(nu: AtomicOrbitMeasure):
    """Pushforward of nu to depth-1 cylinders through g -> front rectangle."""
    model = nu.cover.model
    out = {(a,): Fraction(0) for a in model.letters}
    for g, w in nu.atoms:
        out[g[:1]] += w
    return out


# -- test functions on the compactification ------------------------------------

@dataclass
class TestFunction:
    """A zero-mean cylinder function with its canonical extension to the tree.

    At an orbit point the value is the conditional mu_o-average of the
    boundary function over the cylinder below the point (the value itself once
    the point is deeper than the cylinder depth), which is continuous on the
    compactification and restricts to the cylinder function on the boundary.
    """

    __test__ = False  # despite the name, not a pytest case

    phi: CylinderFunction

    def __post_init__(self):
        if not self.phi.is_zero_mean():
            raise ValueError("test functions must have zero mu_o-mean")

    def at_point(self, x: Word):
        if len(x) >= self.phi.depth:
            return self.phi.value_at(x)
        val = self.phi.subtree_integral(x)
        return float(val) / float(ps_mass(self.phi.model, x))

    def at_boundary(self, xi) -> complex:
        return self.phi.value_at(xi.head(self.phi.depth))


@dataclass
class PairFunction:
    """A function on the double boundary given by a cylinder-pair table."""

    model: TreeModel
    depth1: int
    depth2: int
    table: np.ndarray

    def __post_init__(self):
        shape = (n_cylinders(self.model, self.depth1), n_cylinders(self.model, self.depth2))
        self.table = np.asarray(self.table, dtype=float)
        if self.table.shape != shape:
            raise ValueError(f"table must have shape {shape}")
        pad = np.zeros((shape[0] + 1, shape[1] + 1))
        pad[1:, 1:] = self.table
        self._cumsum = pad.cumsum(axis=0).cumsum(axis=1)

    @classmethod
    def from_product(cls, f1: CylinderFunction, f2: CylinderFunction):
        return cls(
            f1.model,
            f1.depth,
            f2.depth,
            np.outer(f1.astype_float().values, f2.astype_float().values),
        )

    def _block(self, depth: int, w: Word):
        if len(w) >= depth:
            i = cylinder_index(self.model, w[:depth])
            return i, i + 1
        if not w:
            return 0, n_cylinders(self.model, depth)
        i = cylinder_index(self.model, w)
        span = self.model.branching ** (depth - len(w))
        return i * span, (i + 1) * span

    def at_pair(self, x: Word, y: Word) -> float:
        """Value at (x.o, y.o) through the conditional-average extension."""
        r0, r1 = self._block(self.depth1, x)
        c0, c1 = self._block(self.depth2, y)
        s = self._cumsum
        acc = s[r1, c1] - s[r0, c1] - s[r1, c0] + s[r0, c0]
        return acc / ((r1 - r0) * (c1 - c0))

    def product_integral(self) -> float:
        """iint Psi d mu_o d mu_o (masses are uniform at fixed depth)."""
        return float(self.table.mean())


def roblin_average(nu: AtomicOrbitMeasure, psi: PairFunction) -> float:
    """nu_{o,t}-average of Psi(g.o, g^{-1}.o)."""
    return nu.integrate(lambda g: psi.at_pair(g, inverse(g)))


# -- pairings against translated cylinder functions ----------------------------

def _cconj(x):
    return x.conjugate() if isinstance(x, complex) else x


def _continuations(model: TreeModel, prev, banned, length: int):
    """Reduced blocks of the given length, first letter != banned/previous inverse."""
    if length == 0:
        yield ()
        return
    for a in model.letters:
        if (prev is not None and a == -prev) or a == banned:
            continue
        for rest in _continuations(model, a, None, length - 1):
            yield (a,) + rest


def translated_pairing(model: TreeModel, s, g: Word, v: CylinderFunction, u: CylinderFunction):
    """Q(pi_s(g) v, u) for cylinder functions, exact partition by overlap with g.

    The boundary splits by c = <eta, g.o>_o into the sets [g_c] minus [g_{c+1}];
    on each, the multiplier is constant and v(g^{-1} eta) is constant once
    |g| - c >= depth(v), so only the last few slabs need refinement.  Cost is
    O(|g| + (2k-1)^{depth(v)}) per call, independent of any global depth cap.
    """
    if not g:
        return pair_Q(v, u)
    base = growth_base(model)
    nv = v.depth
    total = 0.0
    for c in range(len(g) + 1):
        mult = base ** (-complex(s) * (len(g) - 2 * c))
        mult = mult.real if complex(s).imag == 0 else mult
        ginv_c = inverse(g[c:])
        if len(g) - c >= nv:
            seg = u.subtree_integral(g[:c]) - u.subtree_integral(g[: c + 1])
            total += mult * float(v.value_at(ginv_c)) * _cconj(_tofloat(seg))
        else:
            banned = g[c] if c < len(g) else None
            prev = g[c - 1] if c else None
            ell = nv - (len(g) - c)
            for block in _continuations(model, prev, banned, ell):
                eta_prefix = g[:c] + block
                val = v.value_at(ginv_c + block)
                total += mult * float(val) * _cconj(_tofloat(u.subtree_integral(eta_prefix)))
    return total


def _tofloat(x):
    return complex(x) if isinstance(x, complex) else float(x)


def mixing_decay(model: TreeModel, phi: CylinderFunction, psi: CylinderFunction, ray_words):
    """|Q(pi_0(g) phi, psi)| along a ray; must decay to zero for zero means."""
    for f in (phi, psi):
        if not f.is_zero_mean():
            raise ValueError("mixing decay requires zero-mean functions")
    return [abs(translated_pairing(model, 0, tuple(g), phi, psi)) for g in ray_words]


# -- cocycle pairings and the von Neumann averages -----------------------------

def cocycle_pairing(model: TreeModel, g: Word, u: CylinderFunction, theta=None) -> float:
    """Q'_1(c(g), u) for zero-mean u through the Busemann + dF identity.

    The log-Gromov image of c(g) is theta b_.(o, g.o) + dF(g.o, o) modulo
    constants; paired with zero-mean u, the dF field (constant on the
    boundary) drops and the Busemann part telescopes along the prefixes of g.
    """
    theta = resolved_theta(model) if theta is None else theta
    acc = 0.0
    for c in range(1, len(g) + 1):
        acc += _cconj(_tofloat(u.subtree_integral(g[:c])))
    return 2.0 * theta * acc


def coboundary_pairing(model: TreeModel, g: Word, w: CylinderFunction, u: CylinderFunction) -> float:
    """Q'_1(pi_1(g) w, u) via the intertwiner: Q(pi_0(g) I'[w], u) + const-term."""
    return translated_pairing(model, 0, g, fast_apply(model, LogGromov(), w), u)


@dataclass(frozen=True)
class AffineResult:
    estimate: float
    target: float
    rel_err: float
    empirical_prefactor: float


def _q1_form(model, f: CylinderFunction, u: CylinderFunction) -> float:
    val = quadratic_form(model, LogGromov(), f, u)
    return val.real if isinstance(val, complex) else val


def affine_average(model: TreeModel, nu: AtomicOrbitMeasure, f_list, u_list, w_list, theta=None) -> AffineResult:
    """von Neumann averages of f(g.o) Q'_1(c(g) + d_w(g), u) against nu_{o,t}.

    Arity 1 takes one entry per list; arity 2 pairs g with g^{-1} on the
    second entry and the target is the product of the two Galerkin pairings.
    The estimate is the raw nu-average (no prefactor); `empirical_prefactor`
    reports estimate/target.
    """
    arity = len(f_list)
    if arity not in (1, 2) or len(u_list) != arity or len(w_list) != arity:
        raise ValueError("affine averages take 1 or 2 test functions per slot")
    for f in f_list:
        if not f.phi.is_zero_mean():
            raise ValueError("test functions must have zero mu_o-mean")
    for fn in list(u_list) + list(w_list):
        if fn is not None and not fn.is_zero_mean():
            raise ValueError("cocycle arguments must have zero mu_o-mean")
    theta = resolved_theta(model) if theta is None else theta

    def factor(g, f, u, w):
        q = cocycle_pairing(model, g, u, theta)
        if w is not None:
            q += _q1_form(model, w, u) - coboundary_pairing(model, g, w, u)
        return f.at_point(g) * q

    if arity == 1:
        est = nu.integrate(lambda g: factor(g, f_list[0], u_list[0], w_list[0]))
        target = _q1_form(model, f_list[0].phi, u_list[0])
    else:
        est = nu.integrate(
            lambda g: factor(g, f_list[0], u_list[0], w_list[0])
            * factor(inverse(g), f_list[1], u_list[1], w_list[1])
        )
        target = _q1_form(model, f_list[0].phi, u_list[0]) * _q1_form(model, f_list[1].phi, u_list[1])
    rel = abs(est - target) / abs(target) if target else abs(est)
    pref = est / target if target else math.nan
    return AffineResult(est, target, rel, pref)


def boundedness_monitor(model: TreeModel, h_list, alpha: float, t_range, r: int = 1, r_prime: int = 3):
    """sup_h of the nu_{o,t}-integral of |Q(b(g), c(h))|^alpha per scale t.

    Q(b(g), c(h)) pairs the Busemann field of g against the cocycle density of
    h; it telescopes into translated-measure masses along prefixes of g, all
    exact.  Returns (table, passed): the table maps t to the sup over h, and
    the monitor passes when the sup does not grow along t_range.
    """
    if alpha < 1:
        raise ValueError("the monitor needs alpha >= 1")
    h_list = [tuple(h) for h in h_list]
    from functools import lru_cache

    @lru_cache(maxsize=None)
    def signed_mass(h, prefix):  # atoms share prefixes, so cache across them
        return float(ps_mass_at(model, h, prefix) - ps_mass(model, prefix))

    table = []
    for t in t_range:
        nu = nu_measure(vitali_cover(model, t, r, r_prime))
        sup = 0.0
        for h in h_list:

            def qb(g, h=h):
                acc = 0.0
                for c in range(1, len(g) + 1):
                    acc += signed_mass(h, g[:c])
                return abs(2.0 * acc) ** alpha

            sup = max(sup, nu.integrate(qb))
        table.append((t, sup))
    values = [v for _, v in table]
    half = values[: max(1, len(values) // 2)]
    passed = max(values) <= 1.1 * max(half) + 1e-12
    return table, passed
