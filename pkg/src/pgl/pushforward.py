"""Exact pushforward of cylinder measures and the closed-form pushforward lemmas."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterable, Mapping

import numpy as np

from .core import (ALPHABET, CylinderMeasure, GenParams, make_gen_params, measure_from_table,
                   words_of_length)
from .kernels import UpdateKernel, generalized_envelope_kernel, generalized_rows
from .polynomials import Polynomial

SMALL_BOX = Fraction(1, 50)


class LinearFunctional:
    """``sum coef * mu(word)`` with Fraction or Polynomial coefficients."""

    def __init__(self, terms: Iterable[tuple[object, str]] | Mapping[str, object] = ()):
        items = terms.items() if isinstance(terms, Mapping) else ((w, c) for c, w in terms)
        merged: dict[str, object] = {}
        for w, c in items:
            merged[w] = merged[w] + c if w in merged else c
        self.terms = merged

    def words(self) -> list[str]:
        return list(self.terms)

    def max_len(self) -> int:
        return max((len(w) for w in self.terms), default=0)

    def coefficients_at(self, point: Mapping[str, Fraction] | None) -> dict[str, Fraction]:
        out = {}
        for w, c in self.terms.items():
            out[w] = c.eval(point) if isinstance(c, Polynomial) else Fraction(c)
        return out

    def evaluate(self, measure_or_values, point=None) -> Fraction:
        """Evaluate against a measure (or a ``word -> value`` callable/mapping)."""
        get = _getter(measure_or_values)
        return sum((c * get(w) for w, c in self.coefficients_at(point).items()), Fraction(0))

    def __add__(self, other: "LinearFunctional") -> "LinearFunctional":
        out = dict(self.terms)
        for w, c in other.terms.items():
            out[w] = out[w] + c if w in out else c
        return LinearFunctional(out)

    def __neg__(self):
        return LinearFunctional({w: -c for w, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scaled(self, k) -> "LinearFunctional":
        return LinearFunctional({w: k * c for w, c in self.terms.items()})

    def with_coefficient(self, word: str, coef) -> "LinearFunctional":
        out = dict(self.terms)
        out[word] = coef
        return LinearFunctional(out)

    def __repr__(self):
        return "LinearFunctional(" + ", ".join(f"{w}" for w in self.terms) + ")"


def _getter(m):
    if isinstance(m, CylinderMeasure):
        return m.prob
    if isinstance(m, Mapping):
        return m.__getitem__
    return m


# ------------------------------------------------------------------ pushforward


def conditional_prob(kernel: UpdateKernel, out_word: str, in_word: str):
    """Probability that one update maps ``in_word`` (length k+1) onto ``out_word``."""
    if len(in_word) != len(out_word) + 1:
        raise ValueError("input word must be one symbol longer than the output word")
    v = Fraction(1)
    for j, c in enumerate(out_word):
        v = v * kernel.prob(in_word[j], in_word[j + 1], c)
        if isinstance(v, (int, Fraction)) and v == 0:
            return Fraction(0)
    return v


def _preimage_terms(kernel: UpdateKernel, out_word: str) -> list[tuple[str, Fraction]]:
    """All input words with non-zero conditional probability, built left to right."""
    partial = [(a, Fraction(1)) for a in ALPHABET]
    for c in out_word:
        nxt = []
        for w, v in partial:
            last = w[-1]
            for b in ALPHABET:
                k = kernel.prob(last, b, c)
                if k:
                    nxt.append((w + b, v * k))
        partial = nxt
    return partial


def pushforward_word_enumerate(kernel: UpdateKernel, measure, word: str) -> Fraction:
    get = _getter(measure)
    return sum((v * get(w) for w, v in _preimage_terms(kernel, word)), Fraction(0))


def pushforward_word_transfer(kernel: UpdateKernel, chain, word: str) -> Fraction:
    """Transfer-matrix route for a stationary Markov-chain measure."""
    pi, T = chain
    vec = dict(pi)
    for c in word:
        nxt = {b: Fraction(0) for b in ALPHABET}
        for a, va in vec.items():
            if not va:
                continue
            for b in ALPHABET:
                k = kernel.prob(a, b, c)
                t = T[a, b]
                if k and t:
                    nxt[b] += va * t * k
        vec = nxt
    return sum(vec.values(), Fraction(0))


def pushforward_word(kernel: UpdateKernel, measure: CylinderMeasure, word: str,
                     method: str = "auto") -> Fraction:
    if method == "auto":
        method = "transfer" if measure.chain is not None else "enumerate"
    if method == "transfer":
        if measure.chain is None:
            raise ValueError("transfer route needs a chain measure")
        return pushforward_word_transfer(kernel, measure.chain, word)
    if len(word) + 1 > measure.max_len:
        raise ValueError(f"measure depth {measure.max_len} too small for |C|={len(word)}")
    return pushforward_word_enumerate(kernel, measure, word)


def pushforward(kernel: UpdateKernel, measure: CylinderMeasure, method: str = "auto") -> CylinderMeasure:
    """Law after one update, on all words of length <= depth-1."""
    if measure.max_len < 2:
        raise ValueError("pushforward needs depth >= 2")
    table = {}
    for k in range(1, measure.max_len):
        for w in words_of_length(k):
            table[w] = pushforward_word(kernel, measure, w, method)
    both = measure.translation_invariant and measure.reflection_invariant
    return measure_from_table(table, measure.max_len - 1, f"push[{measure.label}]",
                              translation_invariant=both, reflection_invariant=both)


class PushforwardView:
    """Lazy ``word -> (F mu)(word)`` with caching."""

    def __init__(self, kernel: UpdateKernel, measure: CylinderMeasure, method: str = "auto"):
        self.kernel, self.measure, self.method = kernel, measure, method
        self._cache: dict[str, Fraction] = {}

    def __call__(self, word: str) -> Fraction:
        if word not in self._cache:
            self._cache[word] = pushforward_word(self.kernel, self.measure, word, self.method)
        return self._cache[word]


# ------------------------------------------------------------------ closed forms

P, Q, R = Polynomial.variables("p", "q", "r")
O = 1 - P - Q


def lemma_D() -> LinearFunctional:
    return LinearFunctional([
        (2 * O * (1 - R), "WD"),
        (2 * O * R * (1 - R), "LD"),
        (O * (1 - R * R), "DD"),
    ])


def lemma_WD() -> LinearFunctional:
    p, q, r, o = P, Q, R, O
    ld = (1 - p - q + r + p * r - q * r - r**2 + p * r**2 + q * r**2 - r**3 + p * r**3 + q * r**3) * o * (1 - r)
    return LinearFunctional([
        (2 * p * o * (1 - r), "WD"),
        (p * o * (1 - r) * (1 + r), "DD"),
        (ld, "LD"),
        (-r * o**2 * (1 - r) ** 2, "LDW"),
        (-(1 - r) ** 2 * o**2, "LDL"),
        (o**2 * (1 - r) ** 2, "LWD"),
        (-(r**2) * (1 - r) ** 2 * o**2, "WLD"),
        (-(r**2) * (1 - r) ** 2 * o**2, "DLD"),
    ])


IDENTITY_LEMMAS = {"D": ("D", lemma_D), "WD": ("WD", lemma_WD)}


@dataclass(frozen=True)
class LemmaResult:
    lemma_id: str
    params: GenParams
    measure_id: str
    value: Fraction  # residual (identities) or margin (bounds)
    kind: str

    @property
    def passed(self) -> bool:
        return self.value == 0 if self.kind == "residual" else self.value <= 0


def _require_invariant(measure: CylinderMeasure, depth: int):
    if measure.max_len < depth:
        raise ValueError(f"measure depth {measure.max_len} < {depth}")
    if not (measure.translation_invariant and measure.reflection_invariant):
        raise ValueError("measure must be translation- and reflection-invariant")


def verify_identity_lemmas(params: GenParams, measure: CylinderMeasure,
                           overrides: Mapping[str, LinearFunctional] | None = None,
                           method: str = "enumerate") -> list[LemmaResult]:
    """Closed forms for the pushforward of D and WD against explicit enumeration."""
    _require_invariant(measure, 4)
    kernel = generalized_envelope_kernel(params)
    point = params.as_dict()
    out = []
    for lemma_id, (word, build) in IDENTITY_LEMMAS.items():
        form = (overrides or {}).get(lemma_id) or build()
        exact = pushforward_word(kernel, measure, word, method)
        out.append(LemmaResult(lemma_id, params, measure.label, exact - form.evaluate(measure, point), "residual"))
    return out


# A_1..A_9: the case split of the 4-letter preimages of LWD.  Each piece is a
# union of products of letter sets.
WLD, WD_ = "WLD", "WD"
A_PARTITION: dict[str, list[tuple[str, ...]]] = {
    "A1": [(WLD, WLD, "L", "D")],
    "A2": [(WLD, "D", "D", WLD)],
    "A3": [(WLD, "L", "W", "D"), ("L", "W", "D", WLD)],
    "A4": [(WLD, "L", "D", "L")],
    "A5": [(WD_, "W", "D", "L")],
    "A6": [(WLD, "L", "D", "W"), (WD_, "W", "D", "W")],
    "A7": [(WLD, WD_, "W", "D")],
    "A8": [(WLD, "L", "D", "D")],
    "A9": [(WD_, "W", "D", "D")],
}


def partition_words(piece: list[tuple[str, ...]]) -> list[str]:
    out = []
    for sets in piece:
        out.extend("".join(t) for t in product(*sets))
    return out


def bound_forms() -> dict[str, LinearFunctional]:
    p, q, r, o = P, Q, R, O
    a = q + o * r                      # L-emission of a WL pair
    b = p + o * (1 - r)                # W-emission of a WL pair
    c = q + r - p * r - q * r          # same as a, expanded
    d = 1 - q - r + p * r + q * r      # 1 - c
    return {
        "A1": LinearFunctional([((1 - p) * b * o * r * (1 - r), "LD")]),
        "A2": LinearFunctional([(a * p * o * (1 - r) * (1 + r), "DD")]),
        "A3": LinearFunctional([(a * o * (1 - r) * (1 + p - q - r + 2 * p * r + q * r), "LWD")]),
        "A4": LinearFunctional([(a * b * o * r * (1 - r), "LDL")]),
        "A5": LinearFunctional([((1 - p) * p * o * r * (1 - r), "WDL")]),
        "A6": LinearFunctional([(a * b * o * (1 - r), "DW"),
                                ((p * (1 - p) - c * d) * o * (1 - r), "WWDW")]),
        "A7": LinearFunctional([(p * o**2 * (1 - r) ** 2, "WWWD"), (a * p * o * (1 - r), "WD")]),
        "A8": LinearFunctional([(c * d * o * (1 - r) * (1 + r), "LDD")]),
        "A9": LinearFunctional([(q * d * o * (1 - r) * (1 + r), "WDD"),
                                ((p * (1 - p) - q * d) * o * (1 - r) * (1 + r), "WWDD"),
                                ((p * r + q * r - q) * o**2 * (1 - r) * (1 + r), "DWDD")]),
    }


def inequality_forms() -> dict[str, tuple[str, LinearFunctional]]:
    """Lower bounds on pushforward probabilities: id -> (word, lower bound)."""
    p, q, r, o = P, Q, R, O
    k = (1 - p) * o * (1 - r)
    return {
        "i": ("LD", LinearFunctional([(k, "WWD")])),
        "ii": ("LDW", LinearFunctional([(k * p, "WWDW"), (k * p, "WWDD")])),
        "iii": ("LDL", LinearFunctional([(k * (q + o * r), "WWDW"), (k * (q + o * r * r), "WWDD")])),
        "iv": ("LWD", LinearFunctional([(k * p, "WWDW"), (k * p * (1 + r), "WWDD"), (k * p, "WWWD")])),
    }


def in_small_box(params: GenParams, bound: Fraction = SMALL_BOX) -> bool:
    return params.in_theta and max(params.p, params.q, params.r) <= bound


def verify_bound_lemmas(params: GenParams, measure: CylinderMeasure,
                        box: Fraction = SMALL_BOX, enforce_box: bool = True) -> list[LemmaResult]:
    """Exact A_i minus bound, and lower bound minus exact pushforward, for (i)-(iv).

    Also reports ``partition`` = (sum of A_i) - (F mu)(LWD), which must be 0.
    """
    if enforce_box and not in_small_box(params, box):
        raise ValueError(f"parameters {params.as_dict()} outside the small box [0,{box}]^3")
    _require_invariant(measure, 4)
    kernel = generalized_envelope_kernel(params)
    point = params.as_dict()
    get = measure.prob
    out = []
    total = Fraction(0)
    bounds = bound_forms()
    for aid, piece in A_PARTITION.items():
        a_val = sum((conditional_prob(kernel, "LWD", w) * get(w) for w in partition_words(piece)), Fraction(0))
        total += a_val
        bound = bounds[aid].evaluate(measure, point)
        out.append(LemmaResult(aid, params, measure.label, a_val - bound, "margin"))
    exact_lwd = pushforward_word(kernel, measure, "LWD", "enumerate")
    out.append(LemmaResult("partition", params, measure.label, total - exact_lwd, "residual"))
    for iid, (word, lower) in inequality_forms().items():
        exact = pushforward_word(kernel, measure, word, "enumerate")
        out.append(LemmaResult(iid, params, measure.label, lower.evaluate(measure, point) - exact, "margin"))
    return out


def symbolic_rows():
    return generalized_rows(P, Q, R)


def sample_gen_points(n: int, seed: int = 0, bound: Fraction = Fraction(1), denominator: int = 10**4) -> list[GenParams]:
    """Rational (p, q, r) in Theta with each coordinate at most ``bound``."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x4C45]))
    top = int(bound * denominator)
    out = []
    while len(out) < n:
        p, q, r = (Fraction(int(x), denominator) for x in rng.integers(0, top + 1, size=3))
        if p + q <= 1 and p + q + r > 0:
            out.append(make_gen_params(p, q, r))
    return out
