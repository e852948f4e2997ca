"""Exact multivariate polynomials over Q, grid sign scans and root isolation."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .core import as_fraction


class VariableMismatch(ValueError):
    pass


class Polynomial:
    """Sparse polynomial: ``{exponent tuple: Fraction}`` over named variables."""

    __slots__ = ("vars", "terms")

    def __init__(self, vars: Sequence[str], terms: Mapping[tuple, Fraction] | None = None):
        self.vars = tuple(vars)
        clean = {}
        for e, c in (terms or {}).items():
            e = tuple(e)
            if len(e) != len(self.vars):
                raise ValueError("exponent length does not match variables")
            c = as_fraction(c)
            if c:
                clean[e] = clean.get(e, Fraction(0)) + c
                if not clean[e]:
                    del clean[e]
        self.terms = clean

    # constructors
    @classmethod
    def constant(cls, vars: Sequence[str], c) -> "Polynomial":
        return cls(vars, {(0,) * len(vars): c})

    @classmethod
    def variables(cls, *names: str) -> tuple["Polynomial", ...]:
        n = len(names)
        return tuple(cls(names, {tuple(int(i == j) for i in range(n)): 1}) for j in range(n))

    @classmethod
    def from_coeffs(cls, coeffs: Sequence, var: str = "x") -> "Polynomial":
        """Univariate polynomial from ascending coefficients."""
        return cls((var,), {(i,): c for i, c in enumerate(coeffs)})

    # helpers
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.vars != self.vars:
                if not other.terms or other.is_constant():
                    return Polynomial.constant(self.vars, other.constant_term())
                raise VariableMismatch(f"variables {self.vars} vs {other.vars}")
            return other
        return Polynomial.constant(self.vars, as_fraction(other))

    def _binary_vars(self, other):
        # a constant polynomial adopts the other operand's variables
        if isinstance(other, Polynomial) and other.vars != self.vars and self.is_constant():
            return Polynomial.constant(other.vars, self.constant_term()), other
        return self, self._coerce(other)

    def is_constant(self) -> bool:
        return all(not any(e) for e in self.terms)

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * len(self.vars), Fraction(0))

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    # ring operations
    def __add__(self, other):
        a, b = self._binary_vars(other)
        t = dict(a.terms)
        for e, c in b.terms.items():
            t[e] = t.get(e, Fraction(0)) + c
        return Polynomial(a.vars, t)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.vars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        a, b = self._binary_vars(other)
        return a + (-b)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        a, b = self._binary_vars(other)
        t: dict[tuple, Fraction] = {}
        for e1, c1 in a.terms.items():
            for e2, c2 in b.terms.items():
                e = tuple(x + y for x, y in zip(e1, e2))
                t[e] = t.get(e, Fraction(0)) + c1 * c2
        return Polynomial(a.vars, t)

    __rmul__ = __mul__

    def __truediv__(self, other):
        c = as_fraction(other)
        return Polynomial(self.vars, {e: v / c for e, v in self.terms.items()})

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative power")
        out = Polynomial.constant(self.vars, 1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            try:
                d = self - other
            except VariableMismatch:
                return False
            return d.is_zero()
        if isinstance(other, (int, Fraction)):
            return (self - other).is_zero()
        return NotImplemented

    def __hash__(self):
        return hash((self.vars, frozenset(self.terms.items())))

    def __repr__(self):
        return f"Polynomial({self.vars}, {self.pretty()})"

    def pretty(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for e in sorted(self.terms, key=lambda e: (sum(e), tuple(-x for x in e))):
            c = self.terms[e]
            mono = "*".join(f"{v}^{k}" if k > 1 else v for v, k in zip(self.vars, e) if k)
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append("-" + mono)
            else:
                parts.append(f"{c}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")

    # evaluation
    def _values(self, point) -> list[Fraction]:
        if isinstance(point, Mapping):
            try:
                return [as_fraction(point[v]) for v in self.vars]
            except KeyError as exc:
                raise VariableMismatch(f"no value for variable {exc.args[0]}") from None
        vals = list(point)
        if len(vals) != len(self.vars):
            raise VariableMismatch(f"expected {len(self.vars)} values, got {len(vals)}")
        return [as_fraction(v) for v in vals]

    def eval(self, point) -> Fraction:
        vals = self._values(point)
        total = Fraction(0)
        cache: dict[tuple[int, int], Fraction] = {}
        for e, c in self.terms.items():
            m = c
            for i, k in enumerate(e):
                if k:
                    key = (i, k)
                    if key not in cache:
                        cache[key] = vals[i] ** k
                    m *= cache[key]
            total += m
        return total

    __call__ = eval

    def eval_float(self, arrays: Mapping[str, np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised float value and the sum of |terms| (for error bounds)."""
        shape = np.broadcast(*[np.asarray(arrays[v], dtype=float) for v in self.vars]).shape if self.vars else ()
        val = np.zeros(shape)
        mag = np.zeros(shape)
        for e, c in self.terms.items():
            m = np.full(shape, float(c))
            for v, k in zip(self.vars, e):
                if k:
                    m = m * np.asarray(arrays[v], dtype=float) ** k
            val += m
            mag += np.abs(m)
        return val, mag

    def compose(self, substitutions: Mapping[str, "Polynomial"]) -> "Polynomial":
        """Substitute polynomials (sharing one variable set) for variables.

        Unsubstituted variables must also belong to that variable set.
        """
        polys = [s for s in substitutions.values() if isinstance(s, Polynomial) and not s.is_constant()]
        if not polys:
            raise ValueError("no non-constant polynomial substitutions given")
        target = polys[0].vars
        if any(s.vars != target for s in polys):
            raise VariableMismatch("substitutions use different variable sets")
        gens = dict(zip(target, Polynomial.variables(*target)))
        images = []
        for v in self.vars:
            s = substitutions.get(v)
            if s is None:
                if v not in gens:
                    raise VariableMismatch(f"variable {v} is neither substituted nor in {target}")
                images.append(gens[v])
            elif isinstance(s, Polynomial):
                images.append(s if s.vars == target else Polynomial.constant(target, s.constant_term()))
            else:
                images.append(Polynomial.constant(target, s))
        out = Polynomial(target)
        for e, c in self.terms.items():
            m = Polynomial.constant(target, c)
            for img, k in zip(images, e):
                if k:
                    m = m * img ** k
            out = out + m
        return out

    def substitute(self, values: Mapping[str, object]) -> "Polynomial":
        """Partially evaluate: fix some variables to rationals."""
        keep = [v for v in self.vars if v not in values]
        idx = [self.vars.index(v) for v in keep]
        out: dict[tuple, Fraction] = {}
        for e, c in self.terms.items():
            m = c
            for v, k in zip(self.vars, e):
                if k and v in values:
                    m *= as_fraction(values[v]) ** k
            ne = tuple(e[i] for i in idx)
            out[ne] = out.get(ne, Fraction(0)) + m
        return Polynomial(keep, out)

    def univariate_coeffs(self) -> list[Fraction]:
        if len(self.vars) != 1:
            raise VariableMismatch("not univariate")
        d = max(self.degree(), 0)
        return [self.terms.get((i,), Fraction(0)) for i in range(d + 1)]


def sign(x) -> int:
    return (x > 0) - (x < 0)


# ------------------------------------------------------------ exact signs on grids

_EPS = 2.0 ** -52


def exact_signs(poly: Polynomial, grid: Mapping[str, Sequence[Fraction]],
                mask: np.ndarray | None = None) -> np.ndarray:
    """Exact sign of ``poly`` at every node of a tensor grid.

    Floats decide the sign wherever the value clears a forward error bound;
    the remaining nodes are re-evaluated in rationals.
    """
    axes = [list(grid[v]) for v in poly.vars]
    shape = tuple(len(a) for a in axes)
    if not poly.vars:
        return np.full((), sign(poly.constant_term()), dtype=np.int8)
    mesh = np.meshgrid(*[np.array([float(x) for x in a]) for a in axes], indexing="ij")
    val, mag = poly.eval_float(dict(zip(poly.vars, mesh)))
    # generous bound: each node value carries < (deg + #terms + 4) eps relative error in mag
    bound = mag * _EPS * (poly.degree() + len(poly.terms) + 4) * 4
    out = np.sign(val).astype(np.int8)
    unsure = np.abs(val) <= bound
    if mask is not None:
        unsure &= mask
    for idx in zip(*np.nonzero(unsure)):
        pt = [axes[i][j] for i, j in enumerate(idx)]
        out[idx] = sign(poly.eval(pt))
    return out.reshape(shape)


@dataclass
class SignReport:
    all_nonneg: bool
    all_nonpos: bool
    all_pos: bool
    all_neg: bool
    mixed: bool
    n_points: int
    witnesses: dict = field(default_factory=dict)
    extremes: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "all_nonneg": self.all_nonneg, "all_nonpos": self.all_nonpos,
            "all_pos": self.all_pos, "all_neg": self.all_neg, "mixed": self.mixed,
            "n_points": self.n_points,
            "witnesses": {k: [str(x) for x in v] for k, v in self.witnesses.items()},
        }


def grid_axes(box: Mapping[str, tuple], resolution) -> dict[str, list[Fraction]]:
    """Rational grid: ``resolution`` equally spaced nodes per axis, endpoints included."""
    axes = {}
    for i, (v, (lo, hi)) in enumerate(box.items()):
        n = resolution[v] if isinstance(resolution, Mapping) else resolution
        lo, hi = as_fraction(lo), as_fraction(hi)
        if hi < lo:
            raise ValueError(f"empty box on {v}")
        if n < 1 or (n == 1 and hi != lo):
            raise ValueError("resolution must be >= 2 on a non-degenerate axis")
        axes[v] = [lo] if n == 1 else [lo + (hi - lo) * k / (n - 1) for k in range(n)]
    return axes


def grid_sign_scan(poly: Polynomial, box: Mapping[str, tuple], resolution,
                   constraint: Callable[[dict], np.ndarray] | None = None) -> SignReport:
    """Classify the sign of ``poly`` on a rational grid over ``box``.

    ``constraint`` receives the exact-sign helper context ``{"axes", "shape"}``
    and returns a boolean mask of admissible nodes.
    """
    if not box:
        raise ValueError("empty box")
    for v in poly.vars:
        if v not in box:
            raise VariableMismatch(f"box has no range for {v}")
    axes = grid_axes(box, resolution)
    names = list(box)
    shape = tuple(len(axes[v]) for v in names)
    mask = np.ones(shape, dtype=bool) if constraint is None else np.asarray(constraint({"axes": axes, "names": names, "shape": shape}))
    # broadcast the poly's signs (over its own vars) onto the full box grid
    s = exact_signs(poly, axes)
    view = [slice(None) if v in poly.vars else None for v in names]
    order = [poly.vars.index(v) for v in names if v in poly.vars]
    s = np.transpose(s, order) if s.ndim > 1 else s
    full = np.broadcast_to(s[tuple(view)] if s.ndim else s, shape)
    sel = full[mask]
    n = int(sel.size)
    if n == 0:
        raise ValueError("no admissible grid nodes")
    rep = SignReport(
        all_nonneg=bool((sel >= 0).all()), all_nonpos=bool((sel <= 0).all()),
        all_pos=bool((sel > 0).all()), all_neg=bool((sel < 0).all()),
        mixed=bool((sel > 0).any() and (sel < 0).any()), n_points=n)
    for label, cond in (("pos", full > 0), ("neg", full < 0), ("zero", full == 0)):
        hit = np.argwhere(cond & mask)
        if len(hit):
            rep.witnesses[label] = [axes[v][i] for v, i in zip(names, hit[0])]
    return rep


# ------------------------------------------------------------ root isolation


@dataclass(frozen=True)
class RootBracket:
    lo: Fraction
    hi: Fraction
    poly: Polynomial

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def contains(self, x) -> bool:
        return self.lo <= as_fraction(x) <= self.hi

    def valid(self) -> bool:
        a, b = sign(self.poly.eval([self.lo])), sign(self.poly.eval([self.hi]))
        return a == 0 or b == 0 or a != b


class NoSignChange(ValueError):
    pass


def isolate_root(poly: Polynomial, interval: tuple, tol=Fraction(1, 10**6)) -> RootBracket:
    """Bisection with exact rational sign evaluation."""
    if len(poly.vars) != 1:
        raise VariableMismatch("isolate_root needs a univariate polynomial")
    lo, hi = as_fraction(interval[0]), as_fraction(interval[1])
    tol = as_fraction(tol)
    if tol <= 0:
        raise ValueError("tol > 0")
    slo, shi = sign(poly.eval([lo])), sign(poly.eval([hi]))
    if slo == 0:
        return RootBracket(lo, lo, poly)
    if shi == 0:
        return RootBracket(hi, hi, poly)
    if slo == shi:
        raise NoSignChange(f"no sign change on [{float(lo)}, {float(hi)}]")
    while hi - lo > tol:
        mid = (lo + hi) / 2
        sm = sign(poly.eval([mid]))
        if sm == 0:
            return RootBracket(mid, mid, poly)
        if sm == slo:
            lo = mid
        else:
            hi = mid
    return RootBracket(lo, hi, poly)


# ------------------------------------------------------------ named polynomials

X, = Polynomial.variables("x")


def _u(coeffs) -> Polynomial:
    return Polynomial.from_coeffs(coeffs, "x")


@dataclass(frozen=True)
class Threshold:
    poly_id: str
    poly: Polynomial
    constant: Fraction
    search: tuple[Fraction, Fraction]
    claim: str


def _thresholds() -> list[Threshold]:
    one_m = 1 - X
    F = Fraction
    # each entry: id, polynomial, printed constant, search interval, what is claimed
    rows = [
        ("gamma_poly_LD_low", X * _u([2, -16, 21, 4, -39, 50, -35, 7, 13, -14, 6, -1]), "0.157175", ("0.1", "0.2"), "negative above"),
        ("B3_LWD_coeff", _u([1, -10, 7, 0, 64, -292, 583, -663, 447, -168, 28]), "0.10883", ("0.05", "0.2"), "negative above"),
        ("w0_LD_coeff_q0", _u([0, 2, -4, 0, 1]), "0.53918", ("0.3", "0.7"), "positive below"),
        ("wt_ineq_1_LD_coeff", _u([0, 2, -6, 4, -1]), "0.4564", ("0.3", "0.6"), "negative above"),
        ("wt_ineq_2_LD_coeff", _u([0, 2, -14, 23, -14, 0, 3, -1]), "0.201383", ("0.1", "0.3"), "negative above"),
        ("wt_ineq_2_LDL_factor", _u([1, -1, -3, 3, -1]), "0.52779", ("0.4", "0.6"), "positive below"),
        ("alpha_1", one_m ** 2 * _u([1, -1, -3, -3, 10, -8, 0, 9, -10, 5, -1]), "0.435029", ("0.3", "0.5"), "positive below"),
        ("alpha_2", X * one_m ** 2 * _u([1, -1, -9, 14, -9, 0, 9, -10, 5, -1]), "0.35678", ("0.3", "0.4"), "positive below"),
        ("alpha_3", X * one_m ** 4 * (1 + X) * _u([1, -2, -3, 7, -7, 4, -1]), "0.410819", ("0.3", "0.5"), "positive below"),
        ("beta_1", X * one_m ** 4 * _u([2, -5, 2, 1, -3, 3, -1]), "0.505225", ("0.4", "0.6"), "positive below"),
        ("beta_2", X * one_m ** 4 * _u([1, -3, 1, 1, -3, 3, -1]), "0.387969", ("0.3", "0.45"), "positive below"),
        ("beta_3", X * one_m ** 2 * _u([1, -6, 9, -1, -7, 11, -10, 5, -1]), "0.265137", ("0.2", "0.4"), "positive below"),
        ("gamma_1", _u([1, -3, -1, 2, 13, -31, 26, 1, -28, 34, -21, 7, -1]), "0.345627", ("0.3", "0.4"), "positive below"),
        ("gamma_2", X * _u([1, -4, -6, 31, -46, 32, 0, -28, 34, -21, 7, -1]), "0.238556", ("0.2", "0.3"), "positive below"),
        ("gamma_4", _u([1, -3, -2, 12, -31, 81, -156, 197, -168, 98, -38, 9, -1]), "0.345094", ("0.3", "0.4"), "positive below"),
        ("gamma_3", X ** 3 * one_m ** 6 * _u([1, -3, 0, 1, -2, 0, 2, -1]), "0.338338", ("0.3", "0.4"), "positive below"),
    ]
    return [Threshold(pid, poly, F(c), (F(a), F(b)), claim) for pid, poly, c, (a, b), claim in rows]


THRESHOLDS: list[Threshold] = _thresholds()


def threshold(poly_id: str) -> Threshold:
    for t in THRESHOLDS:
        if t.poly_id == poly_id:
            return t
    raise KeyError(poly_id)


@dataclass(frozen=True)
class RootCheck:
    poly_id: str
    constant: Fraction
    bracket: RootBracket
    tolerance: Fraction

    @property
    def error(self) -> Fraction:
        return abs(self.bracket.mid - self.constant)

    @property
    def passed(self) -> bool:
        return self.bracket.valid() and self.error <= self.tolerance


def reproduce_thresholds(tol=Fraction(1, 10**7), accept=Fraction(1, 10**5)) -> list[RootCheck]:
    return [RootCheck(t.poly_id, t.constant, isolate_root(t.poly, t.search, tol), accept) for t in THRESHOLDS]
