"""Alphabet, words, parameter spaces, invariant test measures and seeding."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import product
from typing import Mapping, Sequence

import numpy as np

SMALLNESS = Fraction(1, 50)


class Symbol(str, Enum):
    W = "W"
    L = "L"
    D = "D"


ALPHABET = ("W", "L", "D")
RESTRICTED = ("W", "L")


class ParameterError(ValueError):
    pass


def as_fraction(x) -> Fraction:
    """Exact rational from int/Fraction/str, and from float via its shortest repr.

    Going through ``repr`` makes ``0.01`` mean 1/100 rather than the binary
    double closest to it.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("boolean is not a probability")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not np.isfinite(x):
            raise ParameterError(f"non-finite value {x!r}")
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, np.floating):
        return as_fraction(float(x))
    if isinstance(x, np.integer):
        return Fraction(int(x))
    raise TypeError(f"cannot convert {type(x).__name__} to Fraction")


def check_word(word: str, alphabet: Sequence[str] = ALPHABET) -> str:
    if not isinstance(word, str) or len(word) == 0:
        raise ValueError("a word has length >= 1")
    bad = set(word) - set(alphabet)
    if bad:
        raise ValueError(f"symbols {sorted(bad)} not in alphabet {alphabet}")
    return word


def reflect(word: str) -> str:
    return check_word(word)[::-1]


def words_of_length(k: int, alphabet: Sequence[str] = ALPHABET) -> list[str]:
    return ["".join(t) for t in product(alphabet, repeat=k)]


def _in_unit(x: Fraction) -> bool:
    return 0 <= x <= 1


@dataclass(frozen=True)
class GenParams:
    """Vertex trap p, vertex target q, edge trap r."""

    p: Fraction
    q: Fraction
    r: Fraction
    in_theta: bool
    small: bool
    smallness: Fraction = SMALLNESS

    def as_dict(self) -> dict[str, Fraction]:
        return {"p": self.p, "q": self.q, "r": self.r}

    def floats(self) -> tuple[float, float, float]:
        return float(self.p), float(self.q), float(self.r)


@dataclass(frozen=True)
class BondParams:
    """Edge trap r' and edge target s'."""

    rp: Fraction
    sp: Fraction
    in_theta_prime: bool
    small: bool
    smallness: Fraction = SMALLNESS

    def as_dict(self) -> dict[str, Fraction]:
        return {"rp": self.rp, "sp": self.sp}

    def floats(self) -> tuple[float, float]:
        return float(self.rp), float(self.sp)


def make_gen_params(p, q, r, smallness=SMALLNESS) -> GenParams:
    p, q, r = as_fraction(p), as_fraction(q), as_fraction(r)
    smallness = as_fraction(smallness)
    for name, v in (("p", p), ("q", q), ("r", r)):
        if not _in_unit(v):
            raise ParameterError(f"{name}={v} outside [0,1]")
    if p + q > 1:
        raise ParameterError(f"p+q={p + q} exceeds 1")
    # p=q=r=0 is kept as a valid object (the all-draw game) but flagged.
    in_theta = p + q + r > 0
    small = max(p, q, r) <= smallness
    return GenParams(p, q, r, in_theta, small, smallness)


def make_bond_params(rp, sp, smallness=SMALLNESS) -> BondParams:
    rp, sp = as_fraction(rp), as_fraction(sp)
    smallness = as_fraction(smallness)
    for name, v in (("rp", rp), ("sp", sp)):
        if not _in_unit(v):
            raise ParameterError(f"{name}={v} outside [0,1]")
    if rp + sp > 1:
        raise ParameterError(f"r'+s'={rp + sp} exceeds 1")
    in_theta_prime = rp + sp > 0
    small = max(rp, sp) <= smallness
    return BondParams(rp, sp, in_theta_prime, small, smallness)


# ---------------------------------------------------------------- measures


@dataclass(frozen=True)
class CylinderMeasure:
    """Probabilities of every word of length <= max_len.

    ``chain`` holds ``(pi, T)`` when the measure is a stationary Markov
    chain; the pushforward code uses it for a transfer-matrix route.
    """

    max_len: int
    table: Mapping[str, Fraction]
    translation_invariant: bool
    reflection_invariant: bool
    chain: tuple | None = field(default=None, compare=False)
    label: str = field(default="", compare=False)

    def __call__(self, word: str) -> Fraction:
        if len(word) > self.max_len:
            raise ValueError(f"word {word} longer than measure depth {self.max_len}")
        return self.table[word]

    def prob(self, word: str) -> Fraction:
        if self.chain is not None:
            return chain_prob(self.chain, word)
        return self(word)


def chain_prob(chain, word: str) -> Fraction:
    pi, T = chain
    v = pi[word[0]]
    for a, b in zip(word, word[1:]):
        if not v:
            return v
        v *= T[a, b]
    return v


def _table_from_chain(chain, max_len: int) -> dict[str, Fraction]:
    pi, T = chain
    table = {a: pi[a] for a in ALPHABET}
    frontier = list(ALPHABET)
    for _ in range(max_len - 1):
        nxt = []
        for w in frontier:
            pw = table[w]
            last = w[-1]
            for b in ALPHABET:
                table[w + b] = pw * T[last, b]
                nxt.append(w + b)
        frontier = nxt
    return table


def measure_iid(aW, aL, aD, max_len: int = 8) -> CylinderMeasure:
    weights = dict(zip(ALPHABET, map(as_fraction, (aW, aL, aD))))
    if any(v < 0 for v in weights.values()):
        raise ValueError("weights must be non-negative")
    if sum(weights.values()) != 1:
        raise ValueError(f"weights sum to {sum(weights.values())}, not 1")
    if max_len < 1:
        raise ValueError("max_len >= 1")
    T = {(a, b): weights[b] for a in ALPHABET for b in ALPHABET}
    chain = (weights, T)
    label = "iid(" + ",".join(str(weights[a]) for a in ALPHABET) + ")"
    return CylinderMeasure(max_len, _table_from_chain(chain, max_len), True, True, chain, label)


def measure_reversible_chain(S, max_len: int = 8) -> CylinderMeasure:
    """Stationary chain with transitions S(i,j)/rowsum(i).

    S is a symmetric 3x3 array (rows/cols in W, L, D order), indexable as
    ``S[i][j]``. Reversibility of the chain gives reflection invariance.
    """
    if max_len < 1:
        raise ValueError("max_len >= 1")
    M = [[as_fraction(S[i][j]) for j in range(3)] for i in range(3)]
    for i in range(3):
        for j in range(3):
            if M[i][j] < 0:
                raise ValueError("entries must be non-negative")
            if M[i][j] != M[j][i]:
                raise ValueError("S must be symmetric")
    rows = [sum(M[i]) for i in range(3)]
    if any(rs == 0 for rs in rows):
        raise ValueError("zero row sum")
    total = sum(rows)
    pi = {a: rows[i] / total for i, a in enumerate(ALPHABET)}
    T = {(a, b): M[i][j] / rows[i] for i, a in enumerate(ALPHABET) for j, b in enumerate(ALPHABET)}
    chain = (pi, T)
    label = "chain(" + ";".join(",".join(str(x) for x in row) for row in M) + ")"
    return CylinderMeasure(max_len, _table_from_chain(chain, max_len), True, True, chain, label)


def measure_from_table(table: Mapping[str, Fraction], max_len: int, label: str = "table",
                       translation_invariant: bool = True,
                       reflection_invariant: bool = True) -> CylinderMeasure:
    """Wrap an explicit table; flags are taken on trust (``check_measure`` audits them)."""
    return CylinderMeasure(max_len, dict(table), translation_invariant, reflection_invariant, None, label)


@dataclass(frozen=True)
class ConsistencyReport:
    normalization: Fraction
    left_consistency: Fraction
    right_consistency: Fraction
    reflection: Fraction
    range_violation: Fraction

    @property
    def ok(self) -> bool:
        return not (self.normalization or self.left_consistency or self.right_consistency
                    or self.reflection or self.range_violation)


def check_measure(measure: CylinderMeasure) -> ConsistencyReport:
    t = measure.table
    zero = Fraction(0)
    norm = left = right = refl = rng = zero
    for k in range(1, measure.max_len + 1):
        ws = words_of_length(k)
        norm = max(norm, abs(sum(t[w] for w in ws) - 1))
        for w in ws:
            v = t[w]
            rng = max(rng, -v if v < 0 else zero, v - 1 if v > 1 else zero)
            refl = max(refl, abs(v - t[w[::-1]]))
            if k < measure.max_len:
                left = max(left, abs(v - sum(t[a + w] for a in ALPHABET)))
                right = max(right, abs(v - sum(t[w + a] for a in ALPHABET)))
    return ConsistencyReport(norm, left, right, refl, rng)


def random_symmetric_weights(rng: np.random.Generator, high: int = 9, zero_prob: float = 0.15):
    """Small-integer symmetric matrix with positive row sums."""
    while True:
        M = [[0] * 3 for _ in range(3)]
        for i in range(3):
            for j in range(i, 3):
                v = 0 if rng.random() < zero_prob else int(rng.integers(1, high + 1))
                M[i][j] = M[j][i] = v
        if all(sum(row) > 0 for row in M):
            return M


def sample_invariant_measures(n: int, seed: int = 0, max_len: int = 6) -> list[CylinderMeasure]:
    """A reproducible mix of product and reversible-chain measures.

    The first few are fixed corner cases (all-D, uniform, D-heavy) so that
    every sample contains measures that load the D-inclusive words.
    """
    fixed = [
        measure_iid(0, 0, 1, max_len),
        measure_iid(Fraction(1, 3), Fraction(1, 3), Fraction(1, 3), max_len),
        measure_iid(Fraction(2, 5), Fraction(2, 5), Fraction(1, 5), max_len),
        measure_reversible_chain([[1, 3, 1], [3, 1, 2], [1, 2, 6]], max_len),
    ]
    out = fixed[:n]
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x6D65]))
    while len(out) < n:
        if len(out) % 3 == 0:
            a = rng.integers(0, 10, size=3)
            if a.sum() == 0:
                continue
            s = int(a.sum())
            out.append(measure_iid(Fraction(int(a[0]), s), Fraction(int(a[1]), s), Fraction(int(a[2]), s), max_len))
        else:
            out.append(measure_reversible_chain(random_symmetric_weights(rng), max_len))
    return out


# ------------------------------------------------------------------ seeds


@dataclass(frozen=True)
class SeedSpec:
    """Counter-based stream keyed by (master_seed, stream_id)."""

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must fit in 64 unsigned bits")
        if self.stream_id < 0:
            raise ValueError("stream_id must be non-negative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence([self.master_seed, self.stream_id])
        return np.random.Generator(np.random.Philox(ss))

    def child(self, offset: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, self.stream_id + offset)
