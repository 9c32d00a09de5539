"""Functions on the boundary that are constant on depth-n cylinders.

Depth-n cylinders are indexed 0..2k(2k-1)^{n-1}-1 in a fixed odometer order
(first letter in canonical order, then allowed continuations in canonical
order), so the children of cylinder i at the next depth occupy the contiguous
block [i(2k-1), (i+1)(2k-1)).  Values live in a numpy array; an object-dtype
array of Fractions gives exact arithmetic where tests need it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .conformal import depth_mass, growth_base
from .geometry import TreeModel, Word, compose, inverse, sphere_size


def n_cylinders(model: TreeModel, depth: int) -> int:
    return sphere_size(model, depth)


@lru_cache(maxsize=None)
def _letter_rank(k: int):
    letters = tuple(range(1, k + 1)) + tuple(range(-1, -k - 1, -1))
    return letters, {a: i for i, a in enumerate(letters)}


@lru_cache(maxsize=None)
def _child_rank(k: int):
    """rank[prev][letter] among the 2k-1 allowed continuations of prev."""
    letters, _ = _letter_rank(k)
    table = {}
    for prev in letters:
        allowed = [a for a in letters if a != -prev]
        table[prev] = {a: i for i, a in enumerate(allowed)}
    return table


def cylinder_index(model: TreeModel, w: Word) -> int:
    letters, first = _letter_rank(model.k)
    ranks = _child_rank(model.k)
    idx = first[w[0]]
    for i in range(1, len(w)):
        idx = idx * model.branching + ranks[w[i - 1]][w[i]]
    return idx


def index_to_word(model: TreeModel, depth: int, idx: int) -> Word:
    letters, _ = _letter_rank(model.k)
    ranks = _child_rank(model.k)
    digits = []
    for _ in range(depth - 1):
        idx, r = divmod(idx, model.branching)
        digits.append(r)
    out = [letters[idx]]
    for r in reversed(digits):
        allowed = [a for a in letters if a != -out[-1]]
        out.append(allowed[r])
    return tuple(out)


@lru_cache(maxsize=None)
def words_array(k: int, depth: int) -> np.ndarray:
    """All depth-n cylinder words as an (N, depth) int8 array, index order."""
    letters, _ = _letter_rank(k)
    if depth == 1:
        return np.array(letters, dtype=np.int8).reshape(-1, 1)
    prev = words_array(k, depth - 1)
    br = 2 * k - 1
    out = np.empty((prev.shape[0] * br, depth), dtype=np.int8)
    out[:, :-1] = np.repeat(prev, br, axis=0)
    last = prev[:, -1]
    ext = np.empty((prev.shape[0], br), dtype=np.int8)
    letter_row = np.array(letters, dtype=np.int8)
    for r, row_prev in enumerate(last):
        ext[r] = letter_row[letter_row != -row_prev]
    out[:, -1] = ext.reshape(-1)
    return out


@dataclass
class CylinderFunction:
    """A boundary function constant on depth-n cylinders."""

    model: TreeModel
    depth: int
    values: np.ndarray

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("cylinder functions live at depth >= 1")
        n = n_cylinders(self.model, self.depth)
        if n > self.model.max_cells:
            raise ValueError(f"enumeration too large: {n} cylinders at depth {self.depth}")
        self.values = np.asarray(self.values)
        if self.values.shape != (n,):
            raise ValueError(f"expected {n} values at depth {self.depth}")

    # -- constructors ------------------------------------------------------
    @classmethod
    def constant(cls, model, depth, value=1.0):
        return cls(model, depth, np.full(n_cylinders(model, depth), value))

    @classmethod
    def indicator(cls, model, w: Word, depth=None, exact=False):
        """1_[w], refined to `depth` (default |w|)."""
        depth = len(w) if depth is None else depth
        if depth < len(w):
            raise ValueError("depth below cylinder depth")
        vals = np.zeros(n_cylinders(model, depth), dtype=object if exact else float)
        if exact:
            vals[:] = Fraction(0)
        i = cylinder_index(model, w)
        span = model.branching ** (depth - len(w))
        vals[i * span : (i + 1) * span] = Fraction(1) if exact else 1.0
        return cls(model, depth, vals)

    @classmethod
    def from_values(cls, model, depth, pairs, fill=0.0):
        """Build from {word: value} items."""
        vals = np.full(n_cylinders(model, depth), fill, dtype=object if _any_exact(pairs.values(), fill) else float)
        for w, v in pairs.items():
            i = cylinder_index(model, tuple(w))
            span = model.branching ** (depth - len(w))
            vals[i * span : (i + 1) * span] = v
        return cls(model, depth, vals)

    # -- basic operations --------------------------------------------------
    def cell_mass(self):
        return depth_mass(self.model, self.depth)

    def refine(self, depth: int) -> "CylinderFunction":
        if depth < self.depth:
            raise ValueError(f"cannot refine to shallower depth {depth} < {self.depth}")
        if depth == self.depth:
            return self
        reps = self.model.branching ** (depth - self.depth)
        return CylinderFunction(self.model, depth, np.repeat(self.values, reps))

    def integral(self):
        """integral against mu_o; exact when values are Fractions."""
        if self.values.dtype == object:
            return sum(self.values.tolist(), start=Fraction(0)) * self.cell_mass()
        return float(self.values.sum()) * float(self.cell_mass())

    def value_at(self, w: Word):
        """Value on the cylinder containing [w] (|w| >= depth)."""
        if len(w) < self.depth:
            raise ValueError("word shorter than cylinder depth")
        return self.values[cylinder_index(self.model, w[: self.depth])]

    def subtree_integral(self, w: Word):
        """integral of the function over the cylinder [w]."""
        exact = self.values.dtype == object
        if len(w) >= self.depth:
            hit = self.value_at(w)
            mass = depth_mass(self.model, len(w))
            return hit * mass if exact else float(hit) * float(mass)
        if w:
            i = cylinder_index(self.model, w)
            span = self.model.branching ** (self.depth - len(w))
            block = self.values[i * span : (i + 1) * span]
        else:
            block = self.values
        if exact:
            return sum(block.tolist(), start=Fraction(0)) * self.cell_mass()
        return float(block.sum()) * float(self.cell_mass())

    def is_zero_mean(self, tol=1e-12) -> bool:
        v = self.integral()
        return v == 0 if isinstance(v, Fraction) else abs(v) <= tol

    def __add__(self, other):
        a, b = match_depth(self, other)
        return CylinderFunction(a.model, a.depth, a.values + b.values)

    def __sub__(self, other):
        a, b = match_depth(self, other)
        return CylinderFunction(a.model, a.depth, a.values - b.values)

    def __mul__(self, scalar):
        return CylinderFunction(self.model, self.depth, self.values * scalar)

    __rmul__ = __mul__

    def astype_float(self) -> "CylinderFunction":
        if self.values.dtype == object:
            return CylinderFunction(self.model, self.depth, self.values.astype(float))
        return self


def _any_exact(values, fill) -> bool:
    return isinstance(fill, Fraction) or any(isinstance(v, Fraction) for v in values)


def match_depth(f: CylinderFunction, g: CylinderFunction):
    d = max(f.depth, g.depth)
    return f.refine(d), g.refine(d)


def _conj(values: np.ndarray) -> np.ndarray:
    if values.dtype == object or not np.iscomplexobj(values):
        return values
    return np.conj(values)


def pair_Q(f: CylinderFunction, g: CylinderFunction):
    """Q(f, g) = integral of f conj(g) d mu_o (exact on Fraction values)."""
    a, b = match_depth(f, g)
    prods = a.values * _conj(b.values)
    if prods.dtype == object:
        return sum(prods.tolist(), start=Fraction(0)) * a.cell_mass()
    return complex(prods.sum()) * float(a.cell_mass()) if np.iscomplexobj(prods) else float(prods.sum()) * float(a.cell_mass())


def q_norm(f: CylinderFunction) -> float:
    v = pair_Q(f, f)
    return math.sqrt(float(abs(v)))


def pi_apply(g: Word, f: CylinderFunction, s) -> CylinderFunction:
    """(pi_s(g) f)(xi) = e^{-s delta b_xi(g.o, o)} f(g^{-1} xi).

    The output depth is depth(f) + |g| so that both the cocycle multiplier and
    the pullback are constant on every output cylinder.  Integer s on exact
    values stays exact.
    """
    model = f.model
    if not g:
        return f
    depth = f.depth + len(g)
    words = words_array(model.k, depth)
    # Busemann value |g| - 2 <g, w>_o per output cylinder, vectorized
    agree = np.ones(words.shape[0], dtype=bool)
    cp = np.zeros(words.shape[0], dtype=np.int64)
    for j, a in enumerate(g):
        agree = agree & (words[:, j] == a)
        cp += agree
    bus = len(g) - 2 * cp
    exact = f.values.dtype == object and s in (0, 1)
    base = growth_base(model)
    ginv = inverse(g)
    src = np.empty(words.shape[0], dtype=np.int64)
    for i in range(words.shape[0]):
        w = tuple(int(a) for a in words[i])
        src[i] = cylinder_index(model, compose(ginv, w)[: f.depth])
    pulled = f.values[src]
    if exact:
        mult = np.array([Fraction(base) ** int(-s * b) for b in bus], dtype=object)
        vals = mult * pulled
    else:
        mult = np.exp(-complex(s) * math.log(base) * bus)
        if complex(s).imag == 0:
            mult = mult.real
        vals = mult * pulled.astype(complex if np.iscomplexobj(pulled) or complex(s).imag != 0 else float)
    return CylinderFunction(model, depth, vals)


def level_sums(f: CylinderFunction):
    """Subtree integrals of f at every depth 0..n (index order per level)."""
    model = f.model
    mass = f.cell_mass() if f.values.dtype == object else float(f.cell_mass())
    levels = [f.values * mass]
    br = model.branching
    for depth in range(f.depth, 1, -1):
        levels.append(levels[-1].reshape(-1, br).sum(axis=1))
    if f.depth >= 1:
        levels.append(np.array([levels[-1].sum()]))
    levels.reverse()
    return levels  # levels[j] has N(j) entries, levels[0] = [total]
