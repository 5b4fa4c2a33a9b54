import math

import mpmath
import numpy as np
import pytest

from ladderwalk.analysis import (
    BoundViolation, DisconnectedError, TrapChainSpec, clt_suite, covariance_estimate, derivative_importance_sampled,
    derivative_via_covariance, effective_resistance, escape_probability_bound, expected_trap_return_time,
    finite_difference, geometric_moment_bound, geometric_moment_sum, hitting_probability, moment_bounds,
    nash_williams_bound, return_probability_bound, richardson, ruin_probability, series_resistance, simulate_ruin,
    simulate_trap_excursions, taylor_A_limit, trap_return_time_exact, trap_sojourn_moments, trap_sojourn_times,
    variance_growth,
)
from ladderwalk.environment import Vertex, build_transfer_matrix, from_slabs, fully_open, sample_environment_chain
from ladderwalk.environment.model import H0, H1, ModelParams, V
from ladderwalk.regeneration import EstimateReport, InsufficientSampleError
from ladderwalk.walker import Trajectory, run_walk
from ladderwalk.walker.kernel import LEFT, RIGHT, STAY, VERT

from oracles import effective_resistance_dense, hitting_probability_dense, window_edges

GRID_LAM = np.linspace(0.05, 1.0, 10)
GRID_M = range(1, 11)


# trap excursions ---------------------------------------------------------------

def test_trap_time_closed_form_matches_linear_solve_on_grid():
    for lam in GRID_LAM:
        for m in GRID_M:
            exact = trap_return_time_exact(TrapChainSpec(m, float(lam)))
            assert expected_trap_return_time(float(lam), m) == pytest.approx(exact, rel=1e-10)


def test_trap_time_special_values():
    assert expected_trap_return_time(0.7, 1) == 2.0
    assert trap_return_time_exact(TrapChainSpec(1, 0.7)) == 2.0
    for m in (1, 4, 9):
        assert expected_trap_return_time(1e-6, m) == pytest.approx(2 * m, rel=1e-4)
    assert expected_trap_return_time(0.5, 3) == pytest.approx(22.2147, abs=1e-4)


@pytest.mark.parametrize("args", [(0.0, 3), (-1.0, 3), (0.5, 0), (0.5, 2.5)])
def test_trap_time_domain_errors(args):
    with pytest.raises(ValueError):
        expected_trap_return_time(*args)


def test_trap_excursions_monte_carlo():
    spec = TrapChainSpec(3, 0.5)
    t = simulate_trap_excursions(spec, 50_000, np.random.default_rng(0))
    assert t.min() >= 2 and np.all(t % 2 == 0)
    se = t.std(ddof=1) / math.sqrt(t.size)
    assert abs(t.mean() - expected_trap_return_time(0.5, 3)) < 3 * se


@pytest.mark.parametrize("kappa", [1.5, 2.0])
def test_moment_bounds_bracket_empirical_moments(kappa):
    for lam, m in [(0.3, 4), (0.5, 3), (0.8, 2)]:
        t = simulate_trap_excursions(TrapChainSpec(m, lam), 50_000, np.random.default_rng(1)).astype(float)
        lo, hi = moment_bounds(lam, m, kappa)
        assert lo <= np.mean(t**kappa) <= hi


def _ruin_oracle(lam, m, i):
    # first-step analysis for P_j(hit i before 0), j = 0..m, then one step from i;
    # solved at 50 digits because the float system is badly conditioned for large bias
    with mpmath.workdps(50):
        up = 1 / (1 + mpmath.exp(-2 * mpmath.mpf(lam)))
        A = mpmath.eye(m + 1)
        b = mpmath.matrix(m + 1, 1)
        for j in range(m + 1):
            if j in (0, i):
                b[j] = 1 if j == i else 0
            elif j == m:
                A[j, j - 1] -= 1
            else:
                A[j, j + 1] -= up
                A[j, j - 1] -= 1 - up
        h = mpmath.lu_solve(A, b)
        r = h[m - 1] if i == m else up * h[i + 1] + (1 - up) * h[i - 1]
        return float(r)


def test_ruin_probability_matches_first_step_oracle():
    for lam in (0.1, 0.5, 1.3, 2.5):
        for m in (1, 2, 5, 8, 15):
            for i in range(1, m + 1):
                assert ruin_probability(lam, m, i) == pytest.approx(_ruin_oracle(lam, m, i), abs=1e-12)


def test_ruin_probability_shape():
    assert ruin_probability(0.8, 1, 1) == pytest.approx(0.0, abs=1e-15)
    for lam in np.linspace(0.1, 2.0, 8):
        for m in range(3, 12):
            r = [ruin_probability(float(lam), m, i) for i in range(1, m + 1)]
            assert all(a <= b + 1e-15 for a, b in zip(r[:m - 2], r[1:m - 1]))
            assert r[0] <= r[-1] <= r[-2] + 1e-15
    with pytest.raises(ValueError):
        ruin_probability(0.5, 3, 4)


def test_ruin_probability_monte_carlo():
    n = 10**6
    est = simulate_ruin(0.5, 5, 2, n, np.random.default_rng(3))
    r = ruin_probability(0.5, 5, 2)
    assert abs(est - r) < 3 * math.sqrt(r * (1 - r) / n)


def test_escape_probability_bound_values():
    assert escape_probability_bound(1.0) == pytest.approx(0.154698, abs=1e-6)
    assert escape_probability_bound(1e-9) < 1e-9
    with pytest.raises(ValueError):
        escape_probability_bound(0.0)


def test_escape_bound_is_below_empirical_no_return_frequency():
    lam, p = 1.0, 0.7
    cfg = sample_environment_chain(build_transfer_matrix(p), 6000, 11)
    starts = [Vertex(cfg.x_min + k, y) for k in range(200, 2200, 10) for y in (0, 1) if cfg.backbone[k, y]]
    escaped = []
    for s, v in enumerate(starts):
        traj = run_walk(cfg, lam, v, 1500, s)
        verts = traj.vertices()
        escaped.append(all(u != v for u in verts[1:]))
    escaped = np.array(escaped, float)
    se = escaped.std(ddof=1) / math.sqrt(escaped.size)
    assert escaped.mean() >= escape_probability_bound(lam) - 3 * se


# resistance -------------------------------------------------------------------

def _backbone_edges(cfg):
    verts = {(cfg.x_min + k, y) for k in range(cfg.n_columns) for y in (0, 1) if cfg.backbone[k, y]}
    return {e for e in window_edges(cfg.slabs, cfg.x_min) if e[0] in verts and e[1] in verts}


@pytest.mark.parametrize("lam", [0.1, 0.6, 2.0])
def test_staircase_path_resistance_is_full_series_sum(lam):
    # vertical at 3, top horizontal 3-4, vertical at 4, bottom 4-5, vertical at 5, top 5-6
    cfg = from_slabs([7, 7, H0 | V, H1 | V, H0 | V, H1, 7, 7])
    r = effective_resistance(cfg, lam, Vertex(3, 0), [Vertex(6, 1)])
    assert r == pytest.approx(series_resistance(lam, 3, 6), rel=1e-12)


def test_straight_path_resistance_uses_odd_terms_only():
    lam = 0.4
    cfg = from_slabs([7, 7, H0, H0, H0, 7, 7])
    r = effective_resistance(cfg, lam, Vertex(2, 0), [Vertex(5, 0)])
    assert r == pytest.approx(sum(math.exp(-(2 * x + 1) * lam) for x in range(2, 5)), rel=1e-12)


def test_series_resistance_values():
    lam = 0.3
    assert series_resistance(lam, 2, 5) == pytest.approx(sum(math.exp(-j * lam) for j in range(4, 10)), rel=1e-14)
    assert series_resistance(lam, 4, 4) == 0.0


@pytest.mark.parametrize("seed", range(6))
def test_elimination_matches_dense_solve(seed):
    lam = 0.15
    cfg = sample_environment_chain(build_transfer_matrix(0.5), 30, seed)
    edges = _backbone_edges(cfg)
    bb = [(cfg.x_min + k, y) for k in range(cfg.n_columns) for y in (0, 1) if cfg.backbone[k, y]]
    left = [Vertex(x, y) for x, y in bb if x == cfg.x_min]
    right = [Vertex(x, y) for x, y in bb if x == cfg.x_max]
    mids = [Vertex(x, y) for x, y in bb if cfg.x_min < x < cfg.x_max]
    for v in mids[::5]:
        h = hitting_probability(cfg, lam, v, left, right)
        h_ref = hitting_probability_dense(edges, lam, (v.x, v.y), {(u.x, u.y) for u in left},
                                          {(u.x, u.y) for u in right})
        assert h == pytest.approx(h_ref, abs=1e-10)
        r = effective_resistance(cfg, lam, v, right)
        assert r == pytest.approx(effective_resistance_dense(edges, lam, (v.x, v.y), [(u.x, u.y) for u in right]),
                                  rel=1e-9)


def test_hitting_probability_trivial_cases():
    cfg = fully_open(10)
    assert hitting_probability(cfg, 0.5, Vertex(0, 0), [Vertex(0, 0)], [Vertex(9, 0)]) == 1.0
    assert hitting_probability(cfg, 0.5, Vertex(9, 0), [Vertex(0, 0)], [Vertex(9, 0)]) == 0.0
    # unbiased walk on a symmetric ladder: gambler's ruin with linear harmonic function
    cols = lambda x: [Vertex(x, 0), Vertex(x, 1)]
    assert hitting_probability(cfg, 0.0, Vertex(3, 0), cols(0), cols(9)) == pytest.approx(2 / 3, abs=1e-12)
    with pytest.raises(DisconnectedError):
        hitting_probability(cfg, 0.5, Vertex(3, 0), [], cols(9))


def test_nash_williams_bound_on_fully_open_ladder():
    cfg = fully_open(40)
    origin = [Vertex(0, 0), Vertex(0, 1)]
    for lam in (0.2, 0.6, 1.5):
        for m in (1, 5, 20, 39):
            r = effective_resistance(cfg, lam, Vertex(m, 0), origin)
            assert r >= nash_williams_bound(lam, m) * (1 - 1e-12)


def test_return_probability_bound_on_fully_open_ladder():
    cfg = fully_open(40)
    for lam in (0.3, 0.6):
        for m in (2, 10):
            k = 30
            h = hitting_probability(cfg, lam, Vertex(m, 0), [Vertex(0, 0), Vertex(0, 1)],
                                    [Vertex(k, 0), Vertex(k, 1)], x_range=(0, k))
            assert 0 < h <= return_probability_bound(lam, m, k)


def test_elimination_does_not_underflow_far_from_target():
    # conductances near the origin are ~exp(-470) relative to the start
    cfg = fully_open(400)
    r = effective_resistance(cfg, 0.6, Vertex(390, 0), [Vertex(0, 0), Vertex(0, 1)])
    assert r == pytest.approx(nash_williams_bound(0.6, 390), rel=1e-9)
    h = hitting_probability(cfg, 0.6, Vertex(390, 0), [Vertex(0, 0)], [Vertex(399, 0)])
    assert 0 < h < 1e-150


def test_strongly_biased_network_is_stable():
    cfg = sample_environment_chain(build_transfer_matrix(0.5), 120, 4)
    bb = [(cfg.x_min + k, y) for k in range(cfg.n_columns) for y in (0, 1) if cfg.backbone[k, y]]
    v = Vertex(*[u for u in bb if u[0] == cfg.x_min + 60][0])
    r = effective_resistance(cfg, 2.5, v, [Vertex(x, y) for x, y in bb if x == cfg.x_min])
    assert math.isfinite(r) and r > 0


# geometric moment sums ----------------------------------------------------------

def test_geometric_moment_sum_closed_forms():
    for r in (0.1, 0.5, 0.9, 0.99):
        assert geometric_moment_sum(r, 1.0) == pytest.approx(r / (1 - r) ** 2, rel=1e-12)
        assert geometric_moment_sum(r, 2.0) == pytest.approx(r * (1 + r) / (1 - r) ** 3, rel=1e-12)


def test_geometric_moment_bound_example():
    b = geometric_moment_bound(0.5, 1.0)
    assert b == pytest.approx((2 / math.e + 1 / math.log(2)) / math.log(2), rel=1e-14)
    assert b == pytest.approx(3.143, abs=1e-3)
    assert b >= 2.0


def test_geometric_moment_bound_small_kappa_limit():
    for r in np.linspace(0.05, 0.6, 12):
        b = geometric_moment_bound(float(r), 1e-9, check=False)
        assert b == pytest.approx(2 + 1 / abs(math.log(r)), rel=1e-6)
        assert b >= 1 / (1 - r)


def test_geometric_moment_bound_random_pairs():
    rng = np.random.default_rng(13)
    for r, kappa in zip(rng.uniform(0.01, 0.99, 100), rng.uniform(0.05, 6.0, 100)):
        assert geometric_moment_bound(float(r), float(kappa)) >= geometric_moment_sum(float(r), float(kappa))


def test_geometric_moment_domain():
    for args in [(0.0, 1.0), (1.0, 1.0), (0.5, 0.0)]:
        with pytest.raises(ValueError):
            geometric_moment_bound(*args)
    assert issubclass(BoundViolation, AssertionError)


# covariance and derivative estimators ------------------------------------------------

def _gaussian_pair(n, reps, s11, s22, s12, seed):
    rng = np.random.default_rng(seed)
    cov = np.array([[s11, s12], [s12, s22]]) * n / 2
    first = rng.multivariate_normal([0, 0], cov, reps)
    second = rng.multivariate_normal([0, 0], cov, reps)
    return first, first + second


def test_clt_suite_recovers_covariance_and_normality():
    n, v = 10_000, 0.2
    half, full = _gaussian_pair(n, 5000, 2.0, 1.0, 0.6, 0)
    cov, rep = clt_suite(half[:, 0] + v * n / 2, full[:, 0] + v * n, half[:, 1], full[:, 1], n, 0.3, v)
    assert abs(cov.sigma11 - 2.0) < 3 * cov.se11
    assert abs(cov.sigma22 - 1.0) < 3 * cov.se22
    assert abs(cov.sigma12 - 0.6) < 3 * cov.se12
    assert np.array_equal(cov.matrix, cov.matrix.T)
    assert cov.cauchy_schwarz_ok()
    assert rep.passes(0.01)


def test_clt_suite_flags_non_gaussian_marginals():
    rng = np.random.default_rng(1)
    n = 1000
    x = rng.pareto(1.5, 5000) * 50
    m = rng.normal(size=5000) * math.sqrt(n)
    _, rep = clt_suite(x / 2, x, m / 2, m, n, 0.7, 0.0)
    assert not rep.passes(0.01)


def test_covariance_needs_enough_replicas():
    with pytest.raises(InsufficientSampleError):
        covariance_estimate(np.zeros(10), np.zeros(10), 100, 0.0)
    with pytest.raises(InsufficientSampleError):
        derivative_via_covariance(np.zeros(999), np.zeros(999), 100, 0.0)


def test_variance_growth_diagnostic():
    rng = np.random.default_rng(2)
    levels = [10**4, 10**5, 10**6]
    diffusive = [rng.normal(size=4000) * math.sqrt(n) for n in levels]
    g = variance_growth(diffusive, levels)
    assert g.stable and not g.diverges
    assert np.allclose(g.scaled_var, 1.0, atol=5 * g.se.max())
    superdiffusive = [rng.normal(size=4000) * n**0.7 for n in levels]
    assert variance_growth(superdiffusive, levels).diverges


def test_derivative_estimators_on_synthetic_data():
    n, v = 1000, 0.1
    half, full = _gaussian_pair(n, 20_000, 1.5, 1.0, 0.4, 5)
    x = full[:, 0] + n * v
    rep = derivative_via_covariance(x, full[:, 1], n, v)
    assert abs(rep.estimate - 0.4) < 3 * rep.se
    # zero log ratio: the reweighted estimator reduces to a mean displacement
    is_rep = derivative_importance_sampled(x, np.zeros(x.size), n, v, 0.05)
    assert is_rep.estimate == pytest.approx(np.mean(x - n * v) / (0.05 * n))
    assert is_rep.params["mean_weight"] == 1.0


def test_finite_difference_and_richardson():
    f = lambda t: t**3
    x0, h = 0.3, 0.05

    def fd(step):
        return finite_difference(EstimateReport(f(x0 + step), 0.1, 10, "x"), EstimateReport(f(x0 - step), 0.1, 10, "x"),
                                 step)

    a, b = fd(h), fd(h / 2)
    assert a.estimate == pytest.approx(3 * x0**2 + h**2, rel=1e-12)
    assert a.se == pytest.approx(math.hypot(0.1, 0.1) / (2 * h))
    assert richardson(a, b).estimate == pytest.approx(3 * x0**2, rel=1e-12)


def test_taylor_limit_report_arithmetic():
    n = np.array([100, 400])
    d = 1 / np.sqrt(n)
    a = np.tile([50.0, 200.0], (10, 1))
    m = np.tile([1.0, 2.0], (10, 1))
    lr = d * m - d**2 * a
    rep = taylor_A_limit(a, lr, m, n, d, target=0.5, target_se=0.01)
    assert np.allclose(rep.scaled_a, 0.5)
    assert np.allclose(rep.remainder_ratio, 0.0)
    assert rep.converged()


# sojourns -----------------------------------------------------------------------

def test_trap_sojourn_times_on_hand_built_trap():
    # trap of depth 2 entered at the top level: vertical open at 2, columns 3..4 dead at level 1
    cfg = from_slabs([7, 7, H0 | H1, H0 | H1, H0, 7, 7, 7, H0 | H1, H0, 7, 7])
    assert len(cfg.traps) == 2
    tp = cfg.traps[0]
    dead_y = 1 - tp.exit_level
    moves = [RIGHT, RIGHT]
    if dead_y == 1:
        moves += [VERT]
    moves += [RIGHT, STAY, RIGHT, LEFT, LEFT]
    traj = Trajectory(ModelParams(0.5, 0.5), Vertex(0, 0), np.array(moves, np.uint8), np.zeros(len(moves) + 1))
    verts = traj.vertices()
    assert all(a == b or cfg.is_open(a, b) for a, b in zip(verts, verts[1:]))
    t = trap_sojourn_times(traj, cfg)
    inside = sum(1 for u in verts[:-1] if tp.a < u.x <= tp.b and u.y == dead_y)
    assert t[0] == inside == 4
    assert t[1] == 0


def test_sojourn_moment_report_constant_data():
    rep = trap_sojourn_moments(np.full(5000, 2.0), 2.0, levels=4, start=100)
    assert np.allclose(rep.moments, 4.0)
    assert rep.growth() == pytest.approx(1.0)
