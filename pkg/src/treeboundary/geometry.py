"""Exact geometry of the free group F_k acting on its (2k)-regular Cayley tree.

Group elements are reduced words over the alphabet {1..k, -1..-k} stored as
plain tuples of ints (negation = formal inverse).  The empty tuple is the
identity and doubles as the basepoint of the tree.  Boundary points are
eventually periodic infinite reduced words.  Everything here is integer or
half-integer arithmetic, so all identities hold exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Union

Word = tuple  # reduced word; alias kept for signatures
Letter = int

INFINITY = math.inf


@dataclass(frozen=True)
class TreeModel:
    """Parameters of the model: rank k, annulus width R and resource caps.

    ``depth_default`` is the cylinder depth used when callers do not pass one.
    ``max_cells`` caps the number of same-depth cylinders any enumeration or
    cylinder-function constructor may produce; ``dense_cap`` caps the size of
    dense kernel matrices.
    """

    k: int
    R: int = 2
    depth_default: int = 4
    max_cells: int = 2_000_000
    dense_cap: int = 4000

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("rank k must be >= 2 (non-elementary group)")
        if self.k > 26:
            raise ValueError("rank k above 26 not supported by letter naming")
        if self.R < 1:
            raise ValueError("annulus width R must be a positive integer")

    @property
    def n_letters(self) -> int:
        return 2 * self.k

    @property
    def branching(self) -> int:
        """Number of reduced continuations of a nonempty word: 2k - 1."""
        return 2 * self.k - 1

    @property
    def letters(self) -> tuple:
        """Canonical letter order: a_1..a_k then their inverses."""
        return tuple(range(1, self.k + 1)) + tuple(range(-1, -self.k - 1, -1))


def reduce_word(letters) -> Word:
    """Freely reduce a sequence of letters (cancel adjacent x, -x pairs)."""
    out = []
    for a in letters:
        if a == 0:
            raise ValueError("0 is not a letter")
        if out and out[-1] == -a:
            out.pop()
        else:
            out.append(a)
    return tuple(out)


def compose(g: Word, h: Word) -> Word:
    """Group product with free reduction."""
    out = list(g)
    for a in h:
        if out and out[-1] == -a:
            out.pop()
        else:
            out.append(a)
    return tuple(out)


def inverse(g: Word) -> Word:
    return tuple(-a for a in reversed(g))


def is_reduced(g) -> bool:
    return all(g[i] != -g[i + 1] for i in range(len(g) - 1)) and 0 not in g


def distance(x: Word, y: Word) -> int:
    """Word metric d(x, y) = |x^{-1} y|."""
    c = common_prefix_len(x, y)
    return (len(x) - c) + (len(y) - c)


def common_prefix_len(x, y) -> int:
    """Length of the longest common prefix of two finite words."""
    c = 0
    for a, b in zip(x, y):
        if a != b:
            break
        c += 1
    return c


def word_from_str(s: str) -> Word:
    """Parse words like ``"abA"`` (uppercase = inverse letter)."""
    out = []
    for ch in s.strip():
        if ch.islower():
            out.append(ord(ch) - ord("a") + 1)
        elif ch.isupper():
            out.append(-(ord(ch) - ord("A") + 1))
        else:
            raise ValueError(f"bad letter {ch!r}")
    w = tuple(out)
    if not is_reduced(w):
        raise ValueError(f"word {s!r} is not reduced")
    return w


def word_to_str(g: Word) -> str:
    if not g:
        return "e"
    return "".join(chr(ord("a") + a - 1) if a > 0 else chr(ord("A") - a - 1) for a in g)


@dataclass(frozen=True)
class BoundaryPoint:
    """Eventually periodic infinite reduced word ``prefix . cycle cycle ...``.

    The representation is canonicalized (primitive cycle, shortest prefix), so
    two boundary points are equal iff their dataclass fields are equal.
    """

    prefix: Word = ()
    cycle: Word = ()

    def __post_init__(self):
        prefix, cycle = tuple(self.prefix), tuple(self.cycle)
        if not cycle:
            raise ValueError("cycle must be nonempty")
        if not is_reduced(prefix + cycle + cycle):
            raise ValueError("prefix.cycle.cycle must be a reduced word")
        # primitive cycle
        n = len(cycle)
        for p in range(1, n):
            if n % p == 0 and cycle == cycle[p:] + cycle[:p]:
                cycle = cycle[:p]
                break
        # absorb the prefix tail into the cycle phase
        prefix = list(prefix)
        while prefix and prefix[-1] == cycle[-1]:
            prefix.pop()
            cycle = (cycle[-1],) + cycle[:-1]
        object.__setattr__(self, "prefix", tuple(prefix))
        object.__setattr__(self, "cycle", tuple(cycle))

    def letter(self, i: int) -> Letter:
        if i < len(self.prefix):
            return self.prefix[i]
        return self.cycle[(i - len(self.prefix)) % len(self.cycle)]

    def head(self, n: int) -> Word:
        """The first n letters (a finite reduced word on the ray)."""
        return tuple(self.letter(i) for i in range(n))

    def __str__(self):
        return f"{word_to_str(self.prefix)}({word_to_str(self.cycle)})^inf"


def ray(g: Word) -> BoundaryPoint:
    """The boundary point obtained by repeating a nontrivial reduced word.

    Requires g cyclically reduced (first letter != inverse of last).
    """
    if not g:
        raise ValueError("identity has no ray")
    return BoundaryPoint((), g)


Point = Union[Word, BoundaryPoint]


def translate_boundary(g: Word, xi: BoundaryPoint) -> BoundaryPoint:
    """The action g.xi on the boundary (left concatenation + reduction)."""
    # expand enough whole periods that cancellation cannot reach the tail
    reps = (len(g) + 1) // len(xi.cycle) + 1
    head = xi.prefix + xi.cycle * reps
    return BoundaryPoint(compose(g, head), xi.cycle)


def cp_word_boundary(x: Word, xi: BoundaryPoint) -> int:
    c = 0
    for i, a in enumerate(x):
        if xi.letter(i) != a:
            break
        c += 1
    return c


def cp_boundary_boundary(xi: BoundaryPoint, eta: BoundaryPoint):
    if xi == eta:
        return INFINITY
    n = len(xi.prefix) + len(eta.prefix) + len(xi.cycle) * len(eta.cycle) + 1
    c = 0
    for i in range(n):
        if xi.letter(i) != eta.letter(i):
            return c
        c += 1
    raise AssertionError("distinct periodic words must diverge")


def gromov_product(x: Point, y: Point, base: Word = ()):
    """Gromov product <x,y>_base, exact as a Fraction (or +inf).

    At the basepoint this is the common-prefix length; at a general base it is
    computed from common prefixes with the base word (exact half-integers).
    """
    xb, yb = isinstance(x, BoundaryPoint), isinstance(y, BoundaryPoint)
    if xb and yb:
        c = cp_boundary_boundary(x, y)
        if c is INFINITY:
            return INFINITY
        return Fraction(len(base)) - cp_word_boundary(base, x) - cp_word_boundary(base, y) + c
    if xb or yb:
        xi, w = (x, y) if xb else (y, x)
        return (
            Fraction(distance(w, base) + len(base) - len(w), 2)
            + cp_word_boundary(w, xi)
            - cp_word_boundary(base, xi)
        )
    return Fraction(distance(x, base) + distance(y, base) - distance(x, y), 2)


def visual_distance(xi: Point, eta: Point, base: Word = ()) -> float:
    """Visual metric e^{-<xi,eta>_base} on the boundary."""
    p = gromov_product(xi, eta, base)
    return 0.0 if p is INFINITY else math.exp(-float(p))


def horofunction(xi: BoundaryPoint, x: Word) -> int:
    """b_xi(x, basepoint) = |x| - 2 (prefix of x along xi)."""
    return len(x) - 2 * cp_word_boundary(x, xi)


def busemann(xi: BoundaryPoint, x: Word, y: Word) -> int:
    """Busemann cocycle b_xi(x, y) = lim_t d(x, xi_t) - d(y, xi_t)."""
    return horofunction(xi, x) - horofunction(xi, y)


def shadow(model: TreeModel, g: Word, rho, base: Word = ()) -> tuple:
    """The shadow of g.o of radius rho seen from `base`, as cylinder words.

    At the basepoint this is the single cylinder of the length-ceil(d-rho)
    prefix of g (the whole boundary, returned as all depth-1 cylinders, once
    rho >= d).  At another base the cylinders are translated.
    """
    if rho < 0:
        raise ValueError("shadow radius must be nonnegative")
    if base:
        inner = shadow(model, compose(inverse(base), g), rho)
        out = []
        for w in inner:
            if len(w) > len(base):
                out.append(compose(base, w))
            else:
                for v in _extensions(model, w, len(base) + 1):
                    out.append(compose(base, v))
        return tuple(sorted(set(out)))
    depth = math.ceil(distance((), g) - rho)
    if depth <= 0:
        return tuple((a,) for a in model.letters)
    return (g[:depth],)


def _extensions(model: TreeModel, w: Word, depth: int) -> Iterator[Word]:
    """All reduced words of the given depth extending w."""
    if len(w) >= depth:
        yield w
        return
    for a in model.letters:
        if w and a == -w[-1]:
            continue
        yield from _extensions(model, w + (a,), depth)


def sphere_size(model: TreeModel, n: int) -> int:
    if n == 0:
        return 1
    return 2 * model.k * (2 * model.k - 1) ** (n - 1)


def sphere_enumerate(model: TreeModel, n: int) -> Iterator[Word]:
    """All reduced words of length n, in the canonical cylinder order."""
    if sphere_size(model, n) > model.max_cells:
        raise ValueError(
            f"enumeration too large: sphere of radius {n} has "
            f"{sphere_size(model, n)} words (cap {model.max_cells})"
        )
    if n == 0:
        yield ()
        return
    yield from _extensions(model, (), n)


def ball_enumerate(model: TreeModel, n: int) -> Iterator[Word]:
    for m in range(n + 1):
        yield from sphere_enumerate(model, m)


def check_product_constant(model: TreeModel, g: Word, h: Word) -> Word:
    """Witness g' for the annulus-width property of R.

    Returns g' with d(g.o, g'.o) <= R and d(g'h.o, o) >= |g'| + |h| - 2R.
    """
    if not g or not h or g[-1] != -h[0]:
        return g
    banned = {-h[0]}
    if len(g) >= 2:
        banned.add(-g[-2])
    for a in model.letters:
        if a not in banned and a != g[-1]:
            return g[:-1] + (a,)
    raise AssertionError("k >= 2 always leaves a free letter")
