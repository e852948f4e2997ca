import math

import numpy as np
import pytest

from pgl.core import ParameterError, SeedSpec, make_bond_params, make_gen_params
from pgl.kernels import bond_envelope_kernel, generalized_envelope_kernel
from pgl.simulator import (D, L, OPEN, TARGET, TRAP, W, Board, Ring, Triangle, code_labels, draws_per_site,
                           duality_check, estimate_draw_probability, generate_board, label_update, model_of,
                           pca_on_board, run_envelope_pca, solve_board, solve_vertex, transform_equivalence_mc)

GEN = make_gen_params("0.1", "0.05", "0.3")
BOND = make_bond_params("0.2", "0.1")


def test_board_label_extremes():
    b = generate_board(make_gen_params(1, 0, 0), Triangle(12), SeedSpec(1))
    assert all((v == TRAP).all() for v in b.vertex_labels)
    b = generate_board(make_bond_params(0, 1), Triangle(12), SeedSpec(1))
    assert b.vertex_labels is None and all((e == TARGET).all() for e in b.edge_labels)


def test_vertex_trap_frequency():
    b = generate_board(make_gen_params("0.01", "0.02", "0.01"), Triangle(10_000), SeedSpec(5))
    n = sum(v.size for v in b.vertex_labels)
    traps = sum(int((v == TRAP).sum()) for v in b.vertex_labels)
    assert abs(traps / n - 0.01) < 4 * math.sqrt(0.01 * 0.99 / n)


def test_geometry_errors():
    with pytest.raises(ValueError):
        Triangle(0)
    with pytest.raises(ValueError):
        Ring(1, 3)
    with pytest.raises(ValueError):
        run_envelope_pca(GEN, "allD", -1, size=8)


def test_vertex_rules():
    assert solve_vertex("generalized", OPEN, OPEN, OPEN, W, W) == L
    assert solve_vertex("generalized", TRAP, OPEN, OPEN, L, L) == W
    assert solve_vertex("generalized", TARGET, OPEN, OPEN, L, L) == L
    assert solve_vertex("generalized", OPEN, TRAP, OPEN, L, D) == D
    for up in (W, L, D):
        for right in (W, L, D):
            assert solve_vertex("bond", None, TARGET, TRAP, up, right) == W
    assert solve_vertex("bond", None, TRAP, TRAP, L, L) == L


def test_label_update_matches_scalar_rule():
    states = (W, L, D)
    for model, vertex_codes in (("generalized", (TRAP, TARGET, OPEN)), ("bond", (None,))):
        edge_codes = (TRAP, OPEN) if model == "generalized" else (TRAP, TARGET, OPEN)
        for v in vertex_codes:
            for e0 in edge_codes:
                for e1 in edge_codes:
                    for a0 in states:
                        for a1 in states:
                            vec = label_update(None if v is None else np.array([v]), np.array([[e0, e1]]),
                                               np.array([a0]), np.array([a1]))
                            assert vec[0] == solve_vertex(model, v, e0, e1, a0, a1)


def _mirror(board):
    """Swap the two move directions: (x, y) -> (y, x)."""
    vl = None if board.vertex_labels is None else [v[::-1].copy() for v in board.vertex_labels]
    el = [e[::-1, ::-1].copy() for e in board.edge_labels]
    return Board(board.model, board.geometry, vl, el, board.seed)


@pytest.mark.parametrize("params", [GEN, BOND])
def test_solver_symmetry(params):
    b = generate_board(params, Triangle(30), SeedSpec(9))
    a, m = solve_board(b), solve_board(_mirror(b))
    for x in range(31):
        for y in range(31 - x):
            assert a.state(x, y) == m.state(y, x)


def test_custom_boundary():
    b = generate_board(make_gen_params(0, 0, 0), Triangle(3), SeedSpec(0))
    # all-open board: a W horizon makes every S_2 vertex L, then S_1 W, apex L
    c = solve_board(b, boundary=np.full(4, W))
    assert c.apex() == L and (c.diagonals[1] == W).all()
    assert (pca_on_board(b, boundary=np.full(4, W)).diagonals[0] == c.diagonals[0]).all()
    with pytest.raises(ValueError):
        solve_board(b, boundary=np.full(3, W))


@pytest.mark.parametrize("params,seed", [(make_gen_params("0.01", "0.02", "0.01"), 7),
                                         (make_bond_params("0.1", "0.1"), 3), (make_gen_params(1, 0, 0), 1)])
def test_duality_examples(params, seed):
    assert duality_check(params, 64, SeedSpec(seed))


def test_all_trap_board_is_all_w():
    c = solve_board(generate_board(make_gen_params(1, 0, 0), Triangle(16), SeedSpec(2)))
    assert all((d == W).all() for d in c.diagonals[:-1])


def test_single_replica_matches_its_board():
    seed = SeedSpec(21)
    for params in (make_bond_params("0.12", "0.01"), make_gen_params("0.02", "0.01", "0.05")):
        for i in range(6):
            apex = solve_board(generate_board(params, Triangle(40), seed.child(i))).apex()
            est = estimate_draw_probability(params, 40, 1, seed.child(i), batch=1)
            assert est.draws == int(apex == D)


def test_trivial_estimates():
    assert estimate_draw_probability(make_bond_params(0, 0), 50, 100, SeedSpec(1)).point_estimate == 1.0
    assert estimate_draw_probability(make_bond_params(1, 0), 50, 100, SeedSpec(1)).point_estimate == 0.0


def test_estimate_independent_of_threads_and_batches():
    params = make_bond_params("0.15", "0.02")
    ref = estimate_draw_probability(params, 60, 600, SeedSpec(4), threads=1)
    assert ref.draws > 0
    for threads, batch in ((4, 256), (3, 17), (1, 1000)):
        assert estimate_draw_probability(params, 60, 600, SeedSpec(4), threads, batch) == ref


def test_threads_env_fallback(monkeypatch):
    monkeypatch.setenv("PGL_THREADS", "2")
    from pgl.simulator import resolve_threads
    assert resolve_threads(None) == 2
    with pytest.raises(ValueError):
        resolve_threads(0)


def test_wilson_interval_brackets_estimate():
    e = estimate_draw_probability(make_bond_params("0.12", 0), 80, 500, SeedSpec(2))
    lo, hi = e.wilson_interval
    assert 0 <= lo <= e.point_estimate <= hi <= 1


def test_horizon_monotone():
    params = make_bond_params("0.2", 0)
    a = estimate_draw_probability(params, 30, 2000, SeedSpec(6))
    b = estimate_draw_probability(params, 60, 2000, SeedSpec(6))
    assert b.point_estimate <= a.point_estimate + 3 * math.hypot(a.sigma, b.sigma)


@pytest.mark.parametrize("rp,sp,image", [("0", "0.1", {"p": "19/100", "q": "0", "r": "0"}),
                                         ("0.2", "0", {"p": "0", "q": "0", "r": "1/5"}),
                                         ("0.05", "0.05", None)])
def test_transform_equivalence(rp, sp, image):
    cmp = transform_equivalence_mc(make_bond_params(rp, sp), 64, 2000, SeedSpec(8))
    if image:
        assert {k: str(v) for k, v in cmp.image.items()} == image
    assert cmp.within_3sigma


def test_transform_rejects_sp_one():
    with pytest.raises(ParameterError):
        transform_equivalence_mc(make_bond_params(0, 1), 10, 10)


def test_ring_trivial_cases():
    t = run_envelope_pca(make_gen_params(0, 0, 0), "allD", 20, SeedSpec(0), size=64)
    assert (t.densities[:, 2] == 1).all()
    t = run_envelope_pca(make_bond_params("0.3", 0), "allW", 5, SeedSpec(0), size=64)
    assert (t.densities[1:, 2] == 0).all()


def test_ring_bond_decay():
    t = run_envelope_pca(make_bond_params("0.2", 0), "allD", 300, SeedSpec(3), size=4096)
    assert t.densities[-1, 2] < 1e-3


def test_ring_drivers_agree_in_distribution():
    params = make_gen_params("0.1", "0.05", "0.3")
    a = run_envelope_pca(params, "allD", 30, SeedSpec(1), "labels", 20_000).densities[10:].mean(axis=0)
    b = run_envelope_pca(params, "allD", 30, SeedSpec(2), "kernel", 20_000).densities[10:].mean(axis=0)
    assert np.abs(a - b).max() < 0.01


def test_ring_explicit_config_and_errors():
    t = run_envelope_pca(GEN, np.array([W, L, D, D]), 3, SeedSpec(0))
    assert t.densities.shape == (4, 3)
    assert np.allclose(t.densities.sum(axis=1), 1)
    with pytest.raises(ValueError):
        run_envelope_pca(GEN, "allD", 3)
    with pytest.raises(ValueError):
        run_envelope_pca(GEN, "allD", 3, driver="other", size=4)


@pytest.mark.parametrize("params", [GEN, BOND])
def test_kernel_empirics(params):
    kernel = (generalized_envelope_kernel(params) if model_of(params) == "generalized"
              else bond_envelope_kernel(params)).to_array()
    g = np.random.default_rng(0)
    n = 10**6
    for a0 in range(3):
        for a1 in range(3):
            v, e = code_labels(params, g.random((n, draws_per_site(model_of(params)))))
            freq = np.bincount(label_update(v, e, np.full(n, a0), np.full(n, a1)), minlength=3) / n
            sd = np.sqrt(kernel[a0, a1] * (1 - kernel[a0, a1]) / n)
            assert (np.abs(freq - kernel[a0, a1]) <= 5 * sd + 1e-12).all()
