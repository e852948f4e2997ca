"""Random boards, the backward-induction solver, Monte Carlo draw estimates and
the envelope automaton on a ring.

States are coded W=0, L=1, D=2 (the order of ``ALPHABET``). Each replica owns
one counter-based stream; on triangle(N) it is consumed diagonal by diagonal,
from S_{N-1} down to S_0, each site taking ``[vertex, edge_up, edge_right]``
uniforms (generalized) or ``[edge_up, edge_right]`` (bond).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from .core import ALPHABET, BondParams, GenParams, SeedSpec
from .kernels import bond_envelope_kernel, bond_to_generalized, generalized_envelope_kernel

W, L, D = 0, 1, 2
TRAP, TARGET, OPEN = 0, 1, 2
LOSE, DRAW, WIN = 0, 1, 2

DEFAULT_HORIZON = 256
DEFAULT_REPLICAS = 10_000
TRANSFORM_STREAM_OFFSET = 1 << 40


# ------------------------------------------------------------ geometry, labels


@dataclass(frozen=True)
class Triangle:
    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("triangle size must be >= 1")


@dataclass(frozen=True)
class Ring:
    n: int
    steps: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("ring size must be >= 2")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")


def model_of(params) -> str:
    if isinstance(params, GenParams):
        return "generalized"
    if isinstance(params, BondParams):
        return "bond"
    raise TypeError("params must be GenParams or BondParams")


def draws_per_site(model: str) -> int:
    return 3 if model == "generalized" else 2


def code_labels(params, u: np.ndarray) -> tuple[np.ndarray | None, np.ndarray]:
    """Uniforms ``(..., m)`` to (vertex codes or None, edge codes ``(..., 2)``)."""
    if isinstance(params, GenParams):
        p, q, r = params.floats()
        uv = u[..., 0]
        vertex = np.where(uv < p, TRAP, np.where(uv < p + q, TARGET, OPEN)).astype(np.int8)
        edges = np.where(u[..., 1:] < r, TRAP, OPEN).astype(np.int8)
        return vertex, edges
    rp, sp = params.floats()
    ue = u[..., :2]
    return None, np.where(ue < rp, TRAP, np.where(ue < rp + sp, TARGET, OPEN)).astype(np.int8)


def _move_value(edge: np.ndarray, neighbour: np.ndarray) -> np.ndarray:
    # open edge: opponent-to-move at the neighbour, so W there is a loss here
    via = np.where(neighbour == L, WIN, np.where(neighbour == D, DRAW, LOSE))
    via = np.where(edge == TRAP, LOSE, via)
    return np.where(edge == TARGET, WIN, via)


def label_update(vertex, edges, a0: np.ndarray, a1: np.ndarray) -> np.ndarray:
    """Vectorised game rule; ``a0`` is the up neighbour, ``a1`` the right one."""
    best = np.maximum(_move_value(edges[..., 0], a0), _move_value(edges[..., 1], a1))
    state = np.where(best == WIN, W, np.where(best == DRAW, D, L))
    if vertex is not None:
        state = np.where(vertex == TRAP, W, np.where(vertex == TARGET, L, state))
    return state.astype(np.int8)


@dataclass
class Board:
    model: str
    geometry: object
    vertex_labels: list | None
    edge_labels: list
    seed: SeedSpec
    params: object = None


def generate_board(params, geometry, seed: SeedSpec) -> Board:
    model = model_of(params)
    m = draws_per_site(model)
    g = seed.generator()
    vlabels, elabels = [], []
    if isinstance(geometry, Triangle):
        # stored by diagonal index k = 0..N-1, drawn from k = N-1 downwards
        vl, el = [None] * geometry.N, [None] * geometry.N
        for k in range(geometry.N - 1, -1, -1):
            v, e = code_labels(params, g.random((k + 1, m)))
            vl[k], el[k] = v, e
        vlabels, elabels = vl, el
    elif isinstance(geometry, Ring):
        for _ in range(geometry.steps):
            v, e = code_labels(params, g.random((geometry.n, m)))
            vlabels.append(v)
            elabels.append(e)
    else:
        raise TypeError("geometry must be Triangle or Ring")
    return Board(model, geometry, vlabels if model == "generalized" else None, elabels, seed, params)


# ------------------------------------------------------------ solver


def solve_vertex(model: str, vertex_label, edge_up: int, edge_right: int, up: int, right: int) -> int:
    """Scalar game rule at one vertex, written out case by case."""
    if model == "generalized":
        if vertex_label == TRAP:
            return W
        if vertex_label == TARGET:
            return L
    outcomes = []
    for edge, nb in ((edge_up, up), (edge_right, right)):
        if edge == TARGET:
            outcomes.append("win")
        elif edge == TRAP:
            outcomes.append("lose")
        elif nb == L:
            outcomes.append("win")
        elif nb == D:
            outcomes.append("draw")
        else:
            outcomes.append("lose")
    if "win" in outcomes:
        return W
    if "draw" in outcomes:
        return D
    return L


@dataclass
class Classification:
    diagonals: list[np.ndarray]   # diagonals[k][x] is the state of (x, k-x)

    def state(self, x: int, y: int) -> int:
        return int(self.diagonals[x + y][x])

    def apex(self) -> int:
        return int(self.diagonals[0][0])


def solve_board(board: Board, boundary: np.ndarray | None = None) -> Classification:
    """Backward induction on triangle(N) by memoised recursion over (x, y)."""
    if not isinstance(board.geometry, Triangle):
        raise TypeError("solve_board needs a triangle board")
    N = board.geometry.N
    if len(board.edge_labels) != N or any(e is None for e in board.edge_labels):
        raise ValueError("board is missing edge labels")
    if board.model == "generalized" and (board.vertex_labels is None or any(v is None for v in board.vertex_labels)):
        raise ValueError("board is missing vertex labels")
    top = np.full(N + 1, D, dtype=np.int8) if boundary is None else np.asarray(boundary, dtype=np.int8)
    if top.shape != (N + 1,):
        raise ValueError(f"boundary must have {N + 1} entries")
    memo: dict[tuple[int, int], int] = {}

    def value(x: int, y: int) -> int:
        key = (x, y)
        if key in memo:
            return memo[key]
        k = x + y
        if k == N:
            out = int(top[x])
        else:
            vl = board.vertex_labels[k][x] if board.model == "generalized" else None
            e_up, e_right = board.edge_labels[k][x]
            out = solve_vertex(board.model, vl, int(e_up), int(e_right), value(x, y + 1), value(x + 1, y))
        memo[key] = out
        return out

    # fill from the boundary inwards so recursion depth stays at one
    for k in range(N, -1, -1):
        for x in range(k + 1):
            value(x, k - x)
    return Classification([np.array([memo[(x, k - x)] for x in range(k + 1)], dtype=np.int8) for k in range(N + 1)])


def pca_on_board(board: Board, boundary: np.ndarray | None = None) -> Classification:
    """Label-driven envelope automaton on the shrinking segment S_N -> S_0."""
    N = board.geometry.N
    s = np.full(N + 1, D, dtype=np.int8) if boundary is None else np.asarray(boundary, dtype=np.int8)
    diags = [None] * (N + 1)
    diags[N] = s
    for k in range(N - 1, -1, -1):
        v = board.vertex_labels[k] if board.model == "generalized" else None
        s = label_update(v, board.edge_labels[k], s[:-1], s[1:])
        diags[k] = s
    return Classification(diags)


def duality_check(params, N: int, seed: SeedSpec) -> bool:
    board = generate_board(params, Triangle(N), seed)
    a, b = solve_board(board), pca_on_board(board)
    return all(np.array_equal(x, y) for x, y in zip(a.diagonals, b.diagonals))


# ------------------------------------------------------------ Monte Carlo


@dataclass(frozen=True)
class DrawEstimate:
    point_estimate: float
    draws: int
    replicas: int
    wilson_interval: tuple[float, float]
    horizon: int

    @property
    def sigma(self) -> float:
        p = self.point_estimate
        return math.sqrt(p * (1 - p) / self.replicas)

    def as_dict(self) -> dict:
        return {"point_estimate": self.point_estimate, "draws": self.draws, "replicas": self.replicas,
                "wilson_lo": self.wilson_interval[0], "wilson_hi": self.wilson_interval[1],
                "horizon": self.horizon, "sigma": self.sigma}


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("PGL_THREADS")
        threads = int(env) if env else 1
    if threads < 1:
        raise ValueError("threads must be >= 1")
    return threads


def _batch_draw_count(params, N: int, seed: SeedSpec, start: int, stop: int) -> int:
    """Number of replicas in ``[start, stop)`` whose apex is a draw."""
    m = draws_per_site(model_of(params))
    gens = [seed.child(i).generator() for i in range(start, stop)]
    s = np.full((len(gens), N + 1), D, dtype=np.int8)
    for k in range(N - 1, -1, -1):
        u = np.stack([g.random((k + 1, m)) for g in gens])
        v, e = code_labels(params, u)
        s = label_update(v, e, s[:, :-1], s[:, 1:])
        # W/L rows never emit D, so a replica without D cannot end in a draw
        alive = (s == D).any(axis=1)
        if not alive.all():
            if not alive.any():
                return 0
            s = s[alive]
            gens = [g for g, a in zip(gens, alive) if a]
    return int((s[:, 0] == D).sum())


def estimate_draw_probability(params, horizon: int = DEFAULT_HORIZON, replicas: int = DEFAULT_REPLICAS,
                              seed: SeedSpec | int = 0, threads: int | None = None,
                              batch: int = 256) -> DrawEstimate:
    if horizon < 1 or replicas < 1:
        raise ValueError("horizon and replicas must be >= 1")
    seed = seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))
    threads = resolve_threads(threads)
    spans = [(a, min(a + batch, replicas)) for a in range(0, replicas, batch)]
    if threads == 1:
        counts = [_batch_draw_count(params, horizon, seed, a, b) for a, b in spans]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            counts = list(ex.map(lambda ab: _batch_draw_count(params, horizon, seed, *ab), spans))
    draws = sum(counts)
    ci = binomtest(draws, replicas).proportion_ci(0.95, method="wilson")
    lo, hi = float(ci.low), float(ci.high)
    point = draws / replicas
    return DrawEstimate(point, draws, replicas, (min(lo, point), max(hi, point)), horizon)


@dataclass(frozen=True)
class TransformComparison:
    bond: DrawEstimate
    generalized: DrawEstimate
    image: dict
    difference: float
    pooled_sigma: float

    @property
    def within_3sigma(self) -> bool:
        return self.difference <= 3 * self.pooled_sigma

    def as_dict(self) -> dict:
        return {"bond": self.bond.as_dict(), "generalized": self.generalized.as_dict(),
                "image": {k: str(v) for k, v in self.image.items()},
                "difference": self.difference, "pooled_sigma": self.pooled_sigma,
                "within_3sigma": self.within_3sigma}


def transform_equivalence_mc(bond_params: BondParams, horizon: int, replicas: int,
                             seed: SeedSpec | int = 0, threads: int | None = None) -> TransformComparison:
    image = bond_to_generalized(bond_params)
    seed = seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))
    a = estimate_draw_probability(bond_params, horizon, replicas, seed, threads)
    b = estimate_draw_probability(image, horizon, replicas, seed.child(TRANSFORM_STREAM_OFFSET), threads)
    pooled = math.sqrt(a.sigma**2 + b.sigma**2)
    return TransformComparison(a, b, image.as_dict(), abs(a.point_estimate - b.point_estimate), pooled)


# ------------------------------------------------------------ ring automaton


@dataclass
class DensityTrajectory:
    densities: np.ndarray   # (steps+1, 3) columns W, L, D

    def rows(self):
        for t, (w, l, d) in enumerate(self.densities):
            yield t, float(w), float(l), float(d)


INITS = {"allD": D, "allW": W, "allL": L}


def _densities(s: np.ndarray) -> np.ndarray:
    return np.bincount(s, minlength=3)[:3] / s.size


def run_envelope_pca(params, init_config, steps: int, seed: SeedSpec | int = 0,
                     driver: str = "labels", size: int | None = None) -> DensityTrajectory:
    """Evolve a ring; site x reads (x, x+1) and the update is synchronous."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if isinstance(init_config, str):
        if size is None:
            raise ValueError("size is required with a named initial configuration")
        s = np.full(size, INITS[init_config], dtype=np.int8)
    else:
        s = np.asarray(init_config, dtype=np.int8).copy()
    if s.size < 2:
        raise ValueError("ring size must be >= 2")
    seed = seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))
    g = seed.generator()
    if driver == "kernel":
        kernel = generalized_envelope_kernel(params) if isinstance(params, GenParams) else bond_envelope_kernel(params)
        cum = np.cumsum(kernel.to_array(), axis=2)
    elif driver != "labels":
        raise ValueError("driver must be 'labels' or 'kernel'")
    m = draws_per_site(model_of(params))
    out = [_densities(s)]
    for _ in range(steps):
        a0, a1 = s, np.roll(s, -1)
        if driver == "labels":
            v, e = code_labels(params, g.random((s.size, m)))
            s = label_update(v, e, a0, a1)
        else:
            u = g.random(s.size)
            c = cum[a0, a1]
            s = np.where(u < c[:, 0], W, np.where(u < c[:, 1], L, D)).astype(np.int8)
        out.append(_densities(s))
    return DensityTrajectory(np.array(out))


def symbol_names(states: np.ndarray) -> str:
    return "".join(ALPHABET[int(x)] for x in states)
