import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ladderwalk.environment import Vertex, build_transfer_matrix, from_slabs, fully_open, sample_environment_chain
from ladderwalk.environment.model import H0, H1, ModelParams, V
from ladderwalk.walker import (
    Trajectory, agile_and_backbone_projections, c_lambda, density_ratio, kernel_tables, load_trajectory,
    martingale_path, nu, pattern_array, run_walk, save_trajectory, second_log_terms, simulate_batch,
    simulate_replica, step_distribution, write_trajectory_csv,
)
from ladderwalk.walker.kernel import LEFT, RIGHT, STAY, VERT, move_between
from ladderwalk.walker.walk import pack_moves, unpack_moves

from oracles import enumerate_paths, step_probabilities, window_edges

LAMBDAS = [0.0, 0.05, 0.3, 0.7, 1.0, 2.5]


def _pattern_edges(pat):
    """Edge set around the vertex (1, 0) realising an incident-edge pattern."""
    edges = set()
    if pat & 1:
        edges.add(((1, 0), (2, 0)))
    if pat & 2:
        edges.add(((0, 0), (1, 0)))
    if pat & 4:
        edges.add(((1, 0), (1, 1)))
    return edges


_NEIGHBOUR = {RIGHT: (2, 0), LEFT: (0, 0), VERT: (1, 1), STAY: (1, 0)}


@pytest.mark.parametrize("lam", LAMBDAS)
def test_kernel_matches_definition(lam):
    tab = kernel_tables(lam)
    for pat in range(8):
        law = step_probabilities(_pattern_edges(pat), (1, 0), lam)
        for mv, w in _NEIGHBOUR.items():
            assert tab.prob[pat, mv] == pytest.approx(law.get(w, 0.0), abs=1e-15)


@pytest.mark.parametrize("lam", LAMBDAS)
def test_martingale_increments_have_mean_zero(lam):
    tab = kernel_tables(lam)
    assert np.allclose(tab.prob.sum(axis=1), 1.0, atol=1e-15)
    assert np.all(np.abs((tab.prob * tab.nu).sum(axis=1)) < 1e-12)
    # sum of second derivatives of a probability vector vanishes
    assert np.all(np.abs((tab.prob * tab.d2).sum(axis=1)) < 1e-12)


@pytest.mark.parametrize("lam", [0.1, 0.4, 1.3])
def test_derivatives_match_finite_differences(lam):
    h = 1e-4
    lo, mid, hi = kernel_tables(lam - h), kernel_tables(lam), kernel_tables(lam + h)
    ok = mid.prob > 0
    d1 = (hi.prob - lo.prob) / (2 * h)
    d2 = (hi.prob - 2 * mid.prob + lo.prob) / h**2
    assert np.allclose((mid.nu * mid.prob)[ok], d1[ok], atol=1e-7)
    assert np.allclose((mid.d2 * mid.prob)[ok], d2[ok], atol=1e-5)


@pytest.mark.parametrize("lam", LAMBDAS)
def test_c_lambda_bounds_every_increment(lam):
    tab = kernel_tables(lam)
    enumerated = max(abs(tab.nu[pat, mv]) for pat in range(8) for mv in range(4) if tab.prob[pat, mv] > 0)
    assert c_lambda(lam) == pytest.approx(enumerated)
    # the bound is attained by a left step and is below 2 for every bias
    assert c_lambda(lam) < 2


def test_step_distribution_on_window():
    cfg = fully_open(6)
    d = step_distribution(cfg, 0.5, Vertex(3, 0))
    assert d.targets[0] == Vertex(3, 0)
    assert sum(d.probs) == pytest.approx(1.0)
    law = step_probabilities(window_edges(cfg.slabs), (3, 0), 0.5)
    for v, q in d.as_dict().items():
        assert q == pytest.approx(law[(v.x, v.y)])
    # the boundary column has no left edge and no vertical inside the window
    d0 = step_distribution(cfg, 0.5, Vertex(0, 0))
    assert set(d0.targets) == {Vertex(0, 0), Vertex(1, 0)}


def test_nu_and_second_terms_lookup():
    cfg = fully_open(6)
    v = Vertex(3, 0)
    tab = kernel_tables(0.4)
    pat = pattern_array(cfg)[3, 0]
    assert nu(cfg, 0.4, v, Vertex(4, 0)) == tab.nu[pat, RIGHT]
    d2, nu2 = second_log_terms(cfg, 0.4, v, Vertex(3, 1))
    assert nu2 == pytest.approx(tab.nu[pat, VERT] ** 2)
    with pytest.raises(ValueError):
        nu(cfg, 0.4, v, Vertex(5, 0))


def test_move_codes():
    v = Vertex(2, 1)
    assert move_between(v, Vertex(3, 1)) == RIGHT
    assert move_between(v, Vertex(2, 0)) == VERT
    assert move_between(v, v) == STAY


# exhaustive change of measure -----------------------------------------------------

def _path_trajectory(path, lam, p=0.5):
    verts = [Vertex(*u) for u in path]
    moves = np.array([move_between(a, b) for a, b in zip(verts, verts[1:])], np.uint8)
    return Trajectory(ModelParams(p, lam), verts[0], moves, np.zeros(moves.size + 1))


@pytest.mark.parametrize("slabs", [[7, 7, 7], [H0 | V, H0 | H1, H1 | V], [H0, H0 | H1 | V, H0]])
def test_measure_change_exhaustive(slabs):
    cfg = from_slabs(slabs)
    edges = window_edges(slabs)
    start = (1, 0)
    lam_star, lam = 0.3, 0.55
    ref = enumerate_paths(edges, start, lam_star, 3)
    alt = dict(enumerate_paths(edges, start, lam, 3))
    total = 0.0
    for path, pr in ref:
        dr = density_ratio(cfg, _path_trajectory(path, lam_star), lam_star, lam)
        assert pr * math.exp(dr.log_ratio) == pytest.approx(alt[path], abs=1e-12)
        assert dr.reconstruct() == pytest.approx(dr.log_ratio, abs=1e-12)
        total += pr * math.exp(dr.log_ratio)
    assert total == pytest.approx(1.0, abs=1e-12)


def test_density_ratio_taylor_remainder_is_third_order():
    cfg = sample_environment_chain(build_transfer_matrix(0.5), 400, 3)
    start = Vertex(200, int(np.argmax(cfg.cluster[200])))
    traj = run_walk(cfg, 0.3, start, 150, 4)
    r1 = abs(density_ratio(cfg, traj, 0.3, 0.3 + 1e-2).remainder)
    r2 = abs(density_ratio(cfg, traj, 0.3, 0.3 + 5e-3).remainder)
    assert r2 < r1 / 6  # cubic: ratio 8


# simulation --------------------------------------------------------------------

def _window(n=600, seed=5):
    cfg = sample_environment_chain(build_transfer_matrix(0.5), n, seed)
    k = n // 3
    y = int(np.argmax(cfg.backbone[k]))
    return cfg, Vertex(cfg.x_min + k, y)


def test_run_walk_stays_on_open_edges():
    cfg, start = _window()
    traj = run_walk(cfg, 0.4, start, 2000, 1)
    verts = traj.vertices()
    for a, b in zip(verts, verts[1:]):
        assert a == b or cfg.is_open(a, b)
    assert np.allclose(martingale_path(traj), martingale_path(traj, cfg))


def test_run_walk_rejects_start_off_cluster():
    cfg = from_slabs([7, H0, H0, 7, 7])
    with pytest.raises(ValueError):
        run_walk(cfg, 0.4, Vertex(2, 1), 10, 0)


def test_run_walk_flags_window_exit():
    cfg = fully_open(10)
    traj = run_walk(cfg, 2.0, Vertex(5, 0), 1000, 0)
    assert traj.exit == "right" and traj.flagged
    assert traj.x_path[-1] == cfg.x_max


def test_martingale_mean_zero_and_bounded_increments():
    cfg, start = _window(3000, 8)
    lam = 0.4
    ends = []
    bound = c_lambda(lam)
    for s in range(400):
        traj = run_walk(cfg, lam, start, 300, s)
        assert np.all(np.abs(np.diff(traj.m_path)) <= bound + 1e-12)
        ends.append(traj.m_path[-1])
    ends = np.array(ends)
    assert abs(ends.mean()) < 3 * ends.std(ddof=1) / math.sqrt(ends.size)


def test_projections():
    cfg, start = _window(800, 12)
    traj = run_walk(cfg, 0.5, start, 3000, 3)
    pr = agile_and_backbone_projections(traj, cfg)
    assert pr.time_backbone + pr.time_traps == traj.n_steps
    assert np.all(np.diff(pr.agile, axis=0).any(axis=1))
    bb = pr.backbone_walk
    assert np.all(cfg.backbone[bb[:, 0] - cfg.x_min, bb[:, 1]])
    assert pr.time_traps > 0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 3), max_size=300))
def test_move_packing_roundtrip(moves):
    arr = np.array(moves, np.uint8)
    assert np.array_equal(unpack_moves(pack_moves(arr), arr.size), arr)


def test_trajectory_export_roundtrip(tmp_path):
    cfg, start = _window()
    traj = run_walk(cfg, 0.4, start, 777, 2)
    path = save_trajectory(traj, tmp_path / "t.ladt")
    back = load_trajectory(path, cfg)
    assert np.array_equal(back.moves, traj.moves)
    assert back.start == traj.start and back.params == traj.params
    assert np.allclose(back.m_path, traj.m_path)
    with pytest.raises(FileExistsError):
        save_trajectory(traj, path)
    csv_path = write_trajectory_csv(traj, tmp_path / "t.csv")
    rows = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    assert rows.shape == (traj.n_steps + 1, 4)
    assert np.array_equal(rows[:, 1], traj.x_path)


# batch engine ----------------------------------------------------------------------

def test_batch_is_reproducible_and_order_free():
    a = simulate_batch(0.5, 0.4, 5000, 6, 17, "t", checkpoints=[1000, 5000])
    b = simulate_batch(0.5, 0.4, 5000, 3, 17, "t", checkpoints=[1000, 5000], first_replica=3)
    assert [r.seed for r in a.replicas[3:]] == [r.seed for r in b.replicas]
    assert np.array_equal(a.at("cp_x")[3:], b.at("cp_x"))
    assert a.at("cp_x")[:, -1].tolist() == [r.x_final for r in a.replicas]


def test_recorded_replica_is_consistent():
    rep = simulate_replica(0.5, 0.4, 4000, 99, checkpoints=[4000], record_path=True)
    env = rep.environment
    x = rep.path
    assert x[0] == 0 and x[-1] == rep.x_final == rep.cp_x[0]
    assert np.all(np.abs(np.diff(x)) <= 1)
    assert env.in_cluster(Vertex(0, 0))
    assert 0 in env.pre_regeneration_points()
    assert x.max() < env.x_max


def test_batch_importance_weights_have_unit_mean():
    b = simulate_batch(0.5, 0.3, 200, 4000, 5, "is", checkpoints=[200], alt_lambdas=[0.35])
    w = np.exp(b.at("cp_lr")[:, 0, 0])
    assert abs(w.mean() - 1) < 3 * w.std(ddof=1) / math.sqrt(w.size)
