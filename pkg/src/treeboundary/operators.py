"""Boundary kernel operators: Knapp-Stein family and its s=1 log-derivative.

Both kernels depend on a boundary pair only through the Gromov product (the
common-prefix length), so every Galerkin entry over depth-n cylinders has a
closed form: off-diagonal entries are kappa(prefix length) mu^2 and the
diagonal is the exact conditional expectation over pairs in one cylinder
(geometric series in the overlap).  Depth-n cylinder functions are therefore
an exactly invariant subspace and the Galerkin matrix *is* the operator there:
no quadrature error anywhere.

The hierarchical apply walks prefix-tree partial sums instead of the dense
matrix (O(N depth) versus O(N^2)); `benchmarks/bench_apply.py` compares both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .conformal import critical_exponent, depth_mass, growth_base
from .cylfun import CylinderFunction, _conj, level_sums, match_depth, n_cylinders, pair_Q, words_array
from .geometry import TreeModel, Word, distance


@dataclass(frozen=True)
class KnappStein:
    """Kernel e^{2 delta (1-s) <xi,eta>_o}; integrable only for Re s > 1/2."""

    s: complex

    def label(self) -> str:
        return f"knapp_stein[s={self.s}]"


@dataclass(frozen=True)
class LogGromov:
    """Kernel <xi,eta>_o, the s -> 1 derivative of the Knapp-Stein family."""

    def label(self) -> str:
        return "log_gromov"


Kernel = object


def _check_admissible(model: TreeModel, kernel) -> None:
    if isinstance(kernel, KnappStein) and complex(kernel.s).real <= 0.5:
        raise ValueError(f"kernel below critical line s = 1/2: s = {kernel.s}")


def kernel_value(model: TreeModel, kernel, m: int):
    """Kernel value at a boundary pair with Gromov product m (off-diagonal)."""
    if isinstance(kernel, LogGromov):
        return m
    _check_admissible(model, kernel)
    s = complex(kernel.s)
    v = growth_base(model) ** (2 * (1 - s) * m)
    return v.real if s.imag == 0 else v


def kernel_diag(model: TreeModel, kernel, n: int):
    """Exact average kernel value over independent mu_o-pairs in one depth-n cylinder.

    The overlap beyond depth n is geometric: P(T >= m) = (2k-1)^{-m}.
    """
    b = growth_base(model)
    if isinstance(kernel, LogGromov):
        return n + Fraction(1, 2 * model.k - 2)
    _check_admissible(model, kernel)
    s = complex(kernel.s)
    q = b ** (2 * (1 - s))
    val = q**n * (b - 1) / (b - q)
    return val.real if s.imag == 0 else val


def _kernel_value_exact(model: TreeModel, kernel, m: int):
    if isinstance(kernel, LogGromov):
        return Fraction(m)
    raise TypeError("exact entries only available for the log-Gromov kernel")


def galerkin_entry_exact(model: TreeModel, kernel, v: Word, w: Word) -> Fraction:
    """Exact rational Galerkin entry for same-depth cylinders (LogGromov)."""
    if len(v) != len(w):
        raise ValueError("entries are defined for same-depth cylinders")
    mass = depth_mass(model, len(v))
    if v == w:
        return kernel_diag(model, kernel, len(v)) * mass * mass
    m = 0
    while m < len(v) and v[m] == w[m]:
        m += 1
    return _kernel_value_exact(model, kernel, m) * mass * mass


@dataclass
class GalerkinForm:
    """Dense matrix M_vw = \\iint_{[v]x[w]} K d mu_o d mu_o over depth-n cylinders."""

    model: TreeModel
    kernel: Kernel
    depth: int
    matrix: np.ndarray

    def pair(self, f: CylinderFunction, h: CylinderFunction):
        """Sesquilinear form value sum_vw f_v conj(h_w) M_vw."""
        fv = f.astype_float().refine(self.depth).values
        hv = h.astype_float().refine(self.depth).values
        out = fv @ (self.matrix @ _conj(hv))
        return complex(out) if np.iscomplexobj(out) else float(out)

    def quadratic(self, f: CylinderFunction):
        return self.pair(f, f)

    def apply(self, f: CylinderFunction) -> CylinderFunction:
        """Mass-weighted apply: the operator itself on depth-n functions."""
        fv = f.astype_float().refine(self.depth).values
        mass = float(depth_mass(self.model, self.depth))
        return CylinderFunction(self.model, self.depth, (self.matrix @ fv) / mass)


def prefix_length_matrix(model: TreeModel, depth: int) -> np.ndarray:
    """Pairwise common-prefix lengths of all depth-n cylinders (int16)."""
    words = words_array(model.k, depth)
    n = words.shape[0]
    cp = np.zeros((n, n), dtype=np.int16)
    alive = np.ones((n, n), dtype=bool)
    for j in range(depth):
        col = words[:, j]
        alive &= col[:, None] == col[None, :]
        cp += alive
    return cp


def galerkin(model: TreeModel, kernel, depth: int) -> GalerkinForm:
    _check_admissible(model, kernel)
    n = n_cylinders(model, depth)
    if n > model.dense_cap:
        raise ValueError(f"dense matrix too large: {n} cells > cap {model.dense_cap}")
    cp = prefix_length_matrix(model, depth)
    table = np.array([kernel_value(model, kernel, m) for m in range(depth + 1)])
    mat = table[cp].astype(complex if np.iscomplexobj(table) else float)
    diag = kernel_diag(model, kernel, depth)
    np.fill_diagonal(mat, complex(diag) if np.iscomplexobj(mat) else float(diag))
    mass = float(depth_mass(model, depth))
    return GalerkinForm(model, kernel, depth, mat * mass * mass)


def fast_apply(model: TreeModel, kernel, f: CylinderFunction) -> CylinderFunction:
    """Hierarchical apply of the kernel operator via prefix-tree partial sums.

    Agrees with the dense Galerkin apply to machine precision and stays exact
    on Fraction input for the log-Gromov kernel.
    """
    _check_admissible(model, kernel)
    n = f.depth
    exact = f.values.dtype == object and isinstance(kernel, LogGromov)
    levels = level_sums(f if exact else f.astype_float())
    br = model.branching
    if exact:
        out = np.array([Fraction(0)] * len(f.values), dtype=object)
        kappa = [_kernel_value_exact(model, kernel, m) for m in range(n)]
        diag = kernel_diag(model, kernel, n)
        mass = f.cell_mass()
    else:
        kappa = [kernel_value(model, kernel, m) for m in range(n)]
        diag = kernel_diag(model, kernel, n)
        cplx = np.iscomplexobj(levels[-1]) or any(isinstance(v, complex) for v in kappa)
        out = np.zeros(len(f.values), dtype=complex if cplx else float)
        diag = complex(diag) if cplx else float(diag)
        mass = float(f.cell_mass())
    for m in range(n):
        upper = np.repeat(levels[m], br ** (n - m)) if m else levels[0][0]
        lower = np.repeat(levels[m + 1], br ** (n - m - 1)) if m + 1 < n else levels[n]
        out = out + kappa[m] * (upper - lower)
    out = out + diag * levels[n]
    return CylinderFunction(model, n, out)


def quadratic_form(model: TreeModel, kernel, f: CylinderFunction, h: CylinderFunction):
    """Form value (K f, h)_Q computed through the hierarchical apply."""
    a, b = match_depth(f, h)
    return pair_Q(fast_apply(model, kernel, a), b)


def zero_mean_spectrum(form: GalerkinForm) -> np.ndarray:
    """Eigenvalues (ascending) of the form on zero-mean depth-n functions,
    in the mu_o-weighted inner product.

    Masses are uniform at a fixed depth, so this is the spectrum of M/mass
    restricted to the orthogonal complement of the constants.
    """
    mass = float(depth_mass(form.model, form.depth))
    s = np.asarray(form.matrix, dtype=float) / mass
    n = s.shape[0]
    # Householder reflection sending e_0 to the normalized constant vector
    v = -np.ones(n) / math.sqrt(n)
    v[0] += 1.0
    v /= np.linalg.norm(v)
    b = s - 2.0 * np.outer(v, v @ s)
    b = b - 2.0 * np.outer(b @ v, v)
    return np.linalg.eigvalsh(b[1:, 1:])


def degeneration_check(model: TreeModel, f: CylinderFunction, s_list):
    """Residuals |(I_s f, f)/(2(1-s)delta) - (I' f, f)| for zero-mean f.

    The Knapp-Stein quadratic forms, renormalized by 2(1-s)delta, degenerate
    onto the log-Gromov form as s -> 1; the empirical decay rate (slope of
    log residual against log(1-s)) is reported alongside.
    """
    if not f.is_zero_mean():
        raise ValueError("degeneration check requires a zero-mean function")
    delta = critical_exponent(model)
    target = quadratic_form(model, LogGromov(), f, f)
    rows = []
    for s in s_list:
        if complex(s).real <= 0.5:
            raise ValueError(f"kernel below critical line s = 1/2: s = {s}")
        ks = quadratic_form(model, KnappStein(s), f, f)
        rows.append((s, abs(ks / (2 * (1 - s) * delta) - target)))
    slope = None
    pts = [(math.log(abs(1 - complex(s).real)), math.log(r)) for s, r in rows if r > 0]
    if len(pts) >= 2:
        xs, ys = zip(*pts)
        xbar, ybar = math.fsum(xs) / len(xs), math.fsum(ys) / len(ys)
        slope = math.fsum((x - xbar) * (y - ybar) for x, y in pts) / math.fsum(
            (x - xbar) ** 2 for x in xs
        )
    return rows, slope


def intertwine_residual(model: TreeModel, g: Word, f: CylinderFunction) -> float:
    """Residual of I'[pi_1(g) f] = pi_0(g) I'[f] modulo constants (zero-mean f)."""
    from .cylfun import pi_apply  # local import to keep module deps one-way

    if not f.is_zero_mean():
        raise ValueError("intertwiner identity requires a zero-mean function")
    lhs = fast_apply(model, LogGromov(), pi_apply(g, f, 1))
    rhs = pi_apply(g, fast_apply(model, LogGromov(), f), 0)
    diff = (lhs - rhs).astype_float()
    centered = diff - CylinderFunction.constant(model, diff.depth, diff.integral())
    return math.sqrt(abs(pair_Q(centered, centered)))


@dataclass
class NegativeTypeResult:
    passed: bool
    worst_rayleigh: float
    certificate: np.ndarray | None

    def __bool__(self):
        return self.passed


def negative_type_check(points_or_matrix, tol: float = 1e-10) -> NegativeTypeResult:
    """Conditional negativity test: sum w_i w_j N(x_i, x_j) <= 0 for zero-sum w.

    Accepts a list of group words (word metric is used) or an explicit
    symmetric zero-diagonal matrix.  Implemented as an eigenvalue problem on
    the zero-sum subspace; on failure the top eigenvector is returned as a
    certificate of positivity.
    """
    if isinstance(points_or_matrix, np.ndarray) and points_or_matrix.ndim == 2:
        d = np.asarray(points_or_matrix, dtype=float)
    else:
        pts = [tuple(p) for p in points_or_matrix]
        d = np.array([[distance(x, y) for y in pts] for x in pts], dtype=float)
    if d.shape[0] != d.shape[1] or not np.allclose(d, d.T, atol=0):
        raise ValueError("negative-type check needs a symmetric matrix")
    if np.any(np.diag(d) != 0):
        raise ValueError("negative-type check needs a zero diagonal")
    n = d.shape[0]
    p = np.eye(n) - np.full((n, n), 1.0 / n)
    compressed = p @ d @ p
    vals, vecs = np.linalg.eigh(compressed)
    worst = float(vals[-1])
    if worst <= tol:
        return NegativeTypeResult(True, worst, None)
    w = p @ vecs[:, -1]
    w /= np.linalg.norm(w)
    return NegativeTypeResult(False, worst, w)
