"""Regime predicates for the generalized and bond games, and region sampling."""

from __future__ import annotations

from dataclasses import dataclass, asdict
from fractions import Fraction
from typing import Mapping

import numpy as np

from .core import SMALLNESS, BondParams, GenParams, as_fraction
from .polynomials import Polynomial, exact_signs, grid_axes

B2_THRESHOLD = Fraction("0.157175")
B3_THRESHOLD = Fraction("0.10883")

P, Q, R = Polynomial.variables("p", "q", "r")
RP, SP = Polynomial.variables("rp", "sp")


def _gen_polys() -> dict[str, Polynomial]:
    p, q, r = P, Q, R
    o = 1 - p - q
    A = q * (1 - q - r * o)              # q{1-q-r(1-p-q)}
    B = (q + r * o) * (1 - q - r * o)
    pp = p * (1 - p)
    return {
        # each polynomial f encodes "f >= 0" or "f > 0"; the relation lives at the use site
        "universal": 2 * (p + q) + 6 * r**2 + 3 * r * (p + 2 * q) - 4 * r - (p + q) ** 2,
        "c1": A - pp,
        "c23_lower": pp - A,
        "c23_upper": B - pp,
        "c2_extra": -(p - 2 * q + p * q + q * r - 3 * p * r - 2 * p**2 + 3 * q**2),
        "c3_extra": p + 4 * q + 9 * p * r + 5 * q * r + 6 * r**2 - 4 * r - p**2 - 4 * q**2 - 5 * p * q,
        "c4_first": p - q - r * o,
        "c4_second": 6 * q + 10 * p * r + 4 * q * r + p**2 + 6 * r**2 - 4 * r - 6 * p * q - 7 * q**2,
        "s1_a": q / 2 - p,
        "s1_b": p + q - 2 * r,
        "s4_a": p - q - r,
        "s4_b": 5 * q - 4 * r,
    }


GEN_POLYS = _gen_polys()


def two_regime_poly() -> Polynomial:
    """The B1 inequality multiplied through by 2(1-s')^3 > 0, as ``f >= 0``."""
    rp, sp = RP, SP
    t = 2 * sp - sp**2
    u = 1 - sp
    lhs = 3 * t**2 * u**3 + 16 * t * rp * u**2 + 11 * rp**2 * u
    rhs = 4 * rp * u**2 + 9 * t**3 * u**3 + 32 * t**2 * rp * u**2 + 43 * t * rp**2 * u + 10 * rp**3
    return lhs - rhs


B1_POLY = two_regime_poly()


def two_regime_exact(rp: Fraction, sp: Fraction) -> bool:
    """Direct evaluation of the B1 inequality in its printed fractional form."""
    if sp >= 1:
        return False
    t = 2 * sp - sp**2
    u = 1 - sp
    lhs = Fraction(3, 2) * t**2 + 8 * t * rp / u + Fraction(11, 2) * rp**2 / u**2
    rhs = 2 * rp / u + Fraction(9, 2) * t**3 + 16 * t**2 * rp / u + Fraction(43, 2) * t * rp**2 / u**2 + 5 * rp**3 / u**3
    return lhs >= rhs


class RegimeOverlap(RuntimeError):
    pass


@dataclass(frozen=True)
class GenRegimeVerdict:
    universal: bool
    universal_boundary: bool
    cond: str  # "1".."4" or "none"
    small: bool
    in_theta: bool
    member: bool
    conds: tuple[bool, bool, bool, bool]

    def as_dict(self) -> dict:
        d = asdict(self)
        d["conds"] = list(self.conds)
        return d


def _conditions(p: Fraction, q: Fraction, r: Fraction) -> tuple[bool, bool, bool, bool, Fraction]:
    o = 1 - p - q
    A = q * (1 - q - r * o)
    B = (q + r * o) * (1 - q - r * o)
    pp = p * (1 - p)
    e2 = p - 2 * q + p * q + q * r - 3 * p * r - 2 * p**2 + 3 * q**2
    c1 = pp <= A
    first = A < pp <= B
    c2 = first and e2 <= 0
    c3 = first and e2 > 0 and p + 4 * q + 9 * p * r + 5 * q * r + 6 * r**2 >= 4 * r + p**2 + 4 * q**2 + 5 * p * q
    c4 = q + r * o < p and 6 * q + 10 * p * r + 4 * q * r + p**2 + 6 * r**2 >= 4 * r + 6 * p * q + 7 * q**2
    uni = 2 * (p + q) + 6 * r**2 + 3 * r * (p + 2 * q) - 4 * r - (p + q) ** 2
    return c1, c2, c3, c4, uni


def check_generalized(params: GenParams, strict: bool = True) -> GenRegimeVerdict:
    """Exact verdict; with ``strict`` an overlap among small parameters raises."""
    c1, c2, c3, c4, uni = _conditions(params.p, params.q, params.r)
    conds = (c1, c2, c3, c4)
    hits = [str(i + 1) for i, c in enumerate(conds) if c]
    if len(hits) > 1 and params.small and strict:
        raise RegimeOverlap(f"conditions {hits} hold simultaneously at {params.as_dict()}")
    cond = hits[0] if hits else "none"
    universal = uni >= 0
    member = params.in_theta and universal and cond != "none" and params.small
    return GenRegimeVerdict(universal, uni == 0, cond, params.small, params.in_theta, member, conds)


def check_simplified(params: GenParams) -> dict[str, bool]:
    p, q, r = params.p, params.q, params.r
    return {"s1": p <= q / 2 and p + q >= 2 * r, "s4": q + r <= p and 5 * q >= 4 * r}


@dataclass(frozen=True)
class BondRegimeVerdict:
    b1: bool
    b2: bool
    b3: bool
    in_theta_prime: bool
    member: bool

    def as_dict(self) -> dict:
        return asdict(self)


def check_bond(params: BondParams, smallness=None) -> BondRegimeVerdict:
    eps = params.smallness if smallness is None else as_fraction(smallness)
    rp, sp = params.rp, params.sp
    small = max(rp, sp) <= eps
    b1 = small and params.in_theta_prime and two_regime_exact(rp, sp)
    b2 = sp == 0 and rp > B2_THRESHOLD
    b3 = rp == sp and rp >= B3_THRESHOLD
    member = params.in_theta_prime and (b1 or b2 or b3)
    return BondRegimeVerdict(b1, b2, b3, params.in_theta_prime, member)


# ------------------------------------------------------------ grid classification


def _signs(name: str, axes) -> np.ndarray:
    poly = GEN_POLYS[name]
    s = exact_signs(poly, {v: axes[v] for v in poly.vars})
    # lift onto the full (p, q, r) grid
    shape = tuple(len(axes[v]) for v in ("p", "q", "r"))
    view = tuple(slice(None) if v in poly.vars else None for v in ("p", "q", "r"))
    return np.broadcast_to(s[view], shape)


def classify_generalized_grid(axes: Mapping[str, list], smallness=SMALLNESS) -> dict[str, np.ndarray]:
    """Vectorised exact classification over a (p, q, r) tensor grid."""
    S = {k: _signs(k, axes) for k in GEN_POLYS}
    pa, qa, ra = (np.array(axes[v], dtype=object) for v in ("p", "q", "r"))
    P_, Q_, R_ = np.meshgrid(pa, qa, ra, indexing="ij")
    valid = (P_ + Q_ <= 1)
    in_theta = valid & ((P_ + Q_ + R_) > 0)
    eps = as_fraction(smallness)
    small = (P_ <= eps) & (Q_ <= eps) & (R_ <= eps)
    c1 = S["c1"] >= 0
    first = (S["c23_lower"] > 0) & (S["c23_upper"] >= 0)
    c2 = first & (S["c2_extra"] >= 0)
    c3 = first & (S["c2_extra"] < 0) & (S["c3_extra"] >= 0)
    c4 = (S["c4_first"] > 0) & (S["c4_second"] >= 0)
    universal = S["universal"] >= 0
    cond = np.where(c1, 1, np.where(c2, 2, np.where(c3, 3, np.where(c4, 4, 0))))
    return {
        "valid": valid, "in_theta": in_theta, "small": small, "universal": universal,
        "universal_boundary": S["universal"] == 0,
        "c1": c1 & valid, "c2": c2 & valid, "c3": c3 & valid, "c4": c4 & valid,
        "cond": np.where(valid, cond, 0),
        "member": in_theta & universal & (cond > 0) & small,
        "s1": (S["s1_a"] >= 0) & (S["s1_b"] >= 0) & valid,
        "s4": (S["s4_a"] >= 0) & (S["s4_b"] >= 0) & valid,
    }


def classify_bond_grid(axes: Mapping[str, list], smallness=SMALLNESS) -> dict[str, np.ndarray]:
    rpa, spa = (np.array(axes[v], dtype=object) for v in ("rp", "sp"))
    RP_, SP_ = np.meshgrid(rpa, spa, indexing="ij")
    valid = RP_ + SP_ <= 1
    in_tp = valid & (RP_ + SP_ > 0)
    eps = as_fraction(smallness)
    small = (RP_ <= eps) & (SP_ <= eps) & (SP_ < 1)
    b1 = small & in_tp & (exact_signs(B1_POLY, {"rp": axes["rp"], "sp": axes["sp"]}) >= 0)
    b2 = (SP_ == 0) & (RP_ > B2_THRESHOLD)
    b3 = (RP_ == SP_) & (RP_ >= B3_THRESHOLD)
    return {"valid": valid, "in_theta_prime": in_tp, "b1": b1, "b2": b2 & valid, "b3": b3 & valid,
            "member": in_tp & (b1 | b2 | b3)}


# ------------------------------------------------------------ region sampling


@dataclass
class PointSet:
    columns: list[str]
    rows: list[list]
    shape: tuple[int, ...]

    def __len__(self):
        return len(self.rows)


def _parse_grid(fixed_vars: Mapping[str, object], grid_spec: Mapping[str, tuple], names: tuple[str, ...]):
    box, res = {}, {}
    for v in names:
        if v in fixed_vars:
            x = as_fraction(fixed_vars[v])
            box[v], res[v] = (x, x), 1
        elif v in grid_spec:
            spec = grid_spec[v]
            if len(spec) != 3 or int(spec[2]) < 2:
                raise ValueError(f"malformed grid for {v}: expected (lo, hi, n>=2)")
            box[v], res[v] = (as_fraction(spec[0]), as_fraction(spec[1])), int(spec[2])
        else:
            raise ValueError(f"variable {v} neither fixed nor gridded")
    extra = set(fixed_vars) | set(grid_spec)
    if extra - set(names):
        raise ValueError(f"unknown variables {sorted(extra - set(names))}")
    return grid_axes(box, res)


PREDICATES = ("generalized", "simplified", "bond")


def sample_region(fixed_vars: Mapping[str, object], grid_spec: Mapping[str, tuple],
                  predicate_id: str = "generalized", smallness=SMALLNESS) -> PointSet:
    """Rows in C order over the grid; columns follow the CSV schemas."""
    if predicate_id in ("generalized", "simplified"):
        names = ("p", "q", "r")
        axes = _parse_grid(fixed_vars, grid_spec, names)
        g = classify_generalized_grid(axes, smallness)
        shape = g["member"].shape
        if predicate_id == "generalized":
            cols = ["p", "q", "r", "universal", "cond", "member"]
            fields = [g["universal"] & g["valid"], g["cond"], g["member"]]
        else:
            cols = ["p", "q", "r", "s1", "s4", "member"]
            fields = [g["s1"], g["s4"], g["member"]]
    elif predicate_id == "bond":
        names = ("rp", "sp")
        axes = _parse_grid(fixed_vars, grid_spec, names)
        g = classify_bond_grid(axes, smallness)
        shape = g["member"].shape
        cols = ["rp", "sp", "b1", "b2", "b3", "member"]
        fields = [g["b1"], g["b2"], g["b3"], g["member"]]
    else:
        raise ValueError(f"unknown predicate {predicate_id!r}; choose from {PREDICATES}")
    rows = []
    for idx in np.ndindex(*shape):
        coords = [axes[v][i] for v, i in zip(names, idx)]
        vals = [f[idx].item() if hasattr(f[idx], "item") else f[idx] for f in fields]
        rows.append(coords + vals)
    return PointSet(cols, rows, shape)
