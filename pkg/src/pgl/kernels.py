"""Update kernels of the envelope automata, the bond-to-generalized map and
the classical ergodicity criteria."""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np

from .core import (ALPHABET, RESTRICTED, BondParams, GenParams, ParameterError,
                   as_fraction, make_gen_params)

ROWS = tuple((a, b) for a in ALPHABET for b in ALPHABET)
INDEX = {a: i for i, a in enumerate(ALPHABET)}


@dataclass(frozen=True)
class UpdateKernel:
    """Nine-row table ``(a0, a1) -> {symbol: probability}``.

    Entries may be Fractions or Polynomials; both support the same arithmetic.
    """

    alphabet: str
    table: Mapping[tuple[str, str], Mapping[str, object]]
    name: str = ""

    def row(self, a0: str, a1: str) -> Mapping[str, object]:
        return self.table[a0, a1]

    def prob(self, a0: str, a1: str, b: str):
        return self.table[a0, a1].get(b, 0)

    def symbols(self) -> tuple[str, ...]:
        return ALPHABET if self.alphabet == "full" else RESTRICTED

    def to_array(self) -> np.ndarray:
        """Float cube ``K[a0, a1, b]`` in W, L, D order."""
        K = np.zeros((3, 3, 3))
        for (a0, a1), row in self.table.items():
            for b, v in row.items():
                K[INDEX[a0], INDEX[a1], INDEX[b]] = float(v)
        return K

    def to_json(self) -> str:
        out = {}
        for (a0, a1) in sorted(self.table, key=lambda k: (INDEX[k[0]], INDEX[k[1]])):
            row = self.table[a0, a1]
            out[a0 + a1] = {b: decimal_string(row.get(b, Fraction(0))) for b in ALPHABET}
        return json.dumps(out, indent=2)


def decimal_string(x, digits: int = 20) -> str:
    """Exact decimal when the denominator allows it, else ``digits`` significant figures."""
    x = as_fraction(x)
    d = x.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d == 1:
        k = max(twos, fives)
        n = abs(x.numerator) * (10**k // x.denominator)
        s = str(n).rjust(k + 1, "0")
        body = s if k == 0 else s[:-k] + "." + s[-k:]
        return ("-" if x < 0 else "") + body
    return format(float(x), f".{digits - 1}g") if digits <= 17 else _sig_digits(x, digits)


def _sig_digits(x: Fraction, digits: int) -> str:
    from decimal import Decimal, localcontext
    with localcontext() as ctx:
        ctx.prec = digits
        return str(Decimal(x.numerator) / Decimal(x.denominator))


def _sym_table(rows: dict) -> dict:
    table = {}
    for (a0, a1), row in rows.items():
        table[a0, a1] = row
        table[a1, a0] = row
    return table


def generalized_rows(p, q, r) -> dict:
    """Rows of the generalized envelope kernel for any ring-typed p, q, r."""
    o = 1 - p - q
    return _sym_table({
        ("W", "W"): {"W": p, "L": 1 - p},
        ("W", "L"): {"W": p + o * (1 - r), "L": q + o * r},
        ("L", "L"): {"W": p + o * (1 - r * r), "L": q + o * r * r},
        ("W", "D"): {"W": p, "L": q + o * r, "D": o * (1 - r)},
        ("L", "D"): {"W": p + o * (1 - r), "L": q + o * r * r, "D": o * r * (1 - r)},
        ("D", "D"): {"W": p, "L": q + o * r * r, "D": o * (1 - r * r)},
    })


def bond_rows(rp, sp) -> dict:
    t = 2 * sp - sp * sp
    u = 1 - rp - sp
    return _sym_table({
        ("W", "W"): {"W": t, "L": (1 - sp) * (1 - sp)},
        ("W", "L"): {"W": 1 - rp + rp * sp, "L": rp - rp * sp},
        ("L", "L"): {"W": 1 - rp * rp, "L": rp * rp},
        ("W", "D"): {"W": t, "L": rp * (1 - sp), "D": (1 - sp) * u},
        ("L", "D"): {"W": 1 - rp + rp * sp, "L": rp * rp, "D": rp * u},
        ("D", "D"): {"W": t, "L": rp * rp, "D": u * (1 + rp - sp)},
    })


def _drop_zero(table: dict) -> dict:
    out = {}
    for k, row in table.items():
        out[k] = {b: v for b, v in row.items() if not (isinstance(v, (int, Fraction)) and v == 0)}
    return out


def generalized_envelope_kernel(params: GenParams) -> UpdateKernel:
    return UpdateKernel("full", _drop_zero(generalized_rows(params.p, params.q, params.r)),
                        f"generalized({params.p},{params.q},{params.r})")


def bond_envelope_kernel(params: BondParams) -> UpdateKernel:
    return UpdateKernel("full", _drop_zero(bond_rows(params.rp, params.sp)),
                        f"bond({params.rp},{params.sp})")


def symbolic_generalized_kernel() -> UpdateKernel:
    from .polynomials import Polynomial
    p, q, r = Polynomial.variables("p", "q", "r")
    return UpdateKernel("full", generalized_rows(p, q, r), "generalized(p,q,r)")


def symbolic_bond_kernel() -> UpdateKernel:
    from .polynomials import Polynomial
    rp, sp = Polynomial.variables("rp", "sp")
    return UpdateKernel("full", bond_rows(rp, sp), "bond(rp,sp)")


def restrict_kernel(kernel: UpdateKernel) -> UpdateKernel:
    table = {(a0, a1): dict(kernel.table[a0, a1]) for a0 in RESTRICTED for a1 in RESTRICTED}
    for row in table.values():
        if row.get("D", 0) != 0:
            raise ValueError("restricted rows must not emit D")
        row.pop("D", None)
    return UpdateKernel("restricted", table, kernel.name + "|WL")


def row_sums(kernel: UpdateKernel) -> dict:
    return {k: sum(row.values(), Fraction(0) * 0) for k, row in kernel.table.items()}


def bond_to_generalized(params: BondParams) -> GenParams:
    if params.sp == 1:
        raise ParameterError("s'=1 is outside the domain of the transform")
    return make_gen_params(2 * params.sp - params.sp ** 2, 0, params.rp / (1 - params.sp))


def kernel_equivalence_check(params: BondParams) -> Fraction:
    gk = generalized_envelope_kernel(bond_to_generalized(params))
    bk = bond_envelope_kernel(params)
    worst = Fraction(0)
    for key in ROWS:
        for b in ALPHABET:
            worst = max(worst, abs(as_fraction(gk.prob(*key, b)) - as_fraction(bk.prob(*key, b))))
    return worst


@dataclass(frozen=True)
class ThetaTriple:
    theta_WW: Fraction
    theta_WL: Fraction
    theta_LL: Fraction

    def as_tuple(self):
        return self.theta_WW, self.theta_WL, self.theta_LL


def theta_of(kernel: UpdateKernel) -> ThetaTriple:
    """L-emission probabilities of a symmetric {W,L} kernel."""
    if kernel.alphabet != "restricted":
        kernel = restrict_kernel(kernel)
    if kernel.prob("W", "L", "L") != kernel.prob("L", "W", "L"):
        raise ValueError("kernel is not symmetric")
    return ThetaTriple(*(as_fraction(kernel.prob(a, b, "L")) for a, b in (("W", "W"), ("W", "L"), ("L", "L"))))


def classical_criteria(theta: ThetaTriple) -> dict[str, bool]:
    """Criterion (a): strict interior plus two linear inequalities.
    Criterion (b): a bound on the spread of the thetas."""
    ww, wl, ll = theta.as_tuple()
    interior = all(0 < t < 1 for t in (ww, wl, ll))
    a = interior and ll > ww - 2 * wl and ll > ww - 2 * (1 - wl)
    ts = (ww, wl, ll)
    spread = max(abs(x - y) for x in ts for y in ts)
    b = spread + 2 * max(abs(ll - wl), abs(ww - wl)) < 2
    return {"criterion_a": bool(a), "criterion_b": bool(b)}


def bond_theta(rp, sp) -> ThetaTriple:
    rp, sp = as_fraction(rp), as_fraction(sp)
    return ThetaTriple((1 - sp) ** 2, rp * (1 - sp), rp * rp)


def diagonal_flip(criterion: str, lo, hi, tol=Fraction(1, 10**9)) -> tuple[Fraction, Fraction]:
    """Bracket where a classical criterion changes value along r' = s'."""
    lo, hi, tol = as_fraction(lo), as_fraction(hi), as_fraction(tol)

    def holds(x):
        return classical_criteria(bond_theta(x, x))[criterion]

    a = holds(lo)
    if holds(hi) == a:
        raise ValueError(f"{criterion} does not change on [{lo}, {hi}]")
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if holds(mid) == a:
            lo = mid
        else:
            hi = mid
    return lo, hi
