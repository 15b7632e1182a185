"""Measure flows and distances.

Closed-form oracle used throughout: under the reference law x_T ~ N(xi, T),
and a constant drift u reweights it to N(xi + uT, T).  In the factor-2
convention the total variation between two Gaussians with common variance
T and means uT apart is

    TV = 2 erf(|u| sqrt(T) / (2 sqrt(2))),

and because the constant-drift density L_T = exp(u W_T - u^2 T / 2) is a
function of W_T alone (the discrete Doleans sum telescopes to exactly that),
the path-space TV coincides with the terminal-marginal TV, so one number
checks both estimators.  The Hellinger exponent for two constant drifts u, v
with sigma = 1 is Gamma = (T / 8) (u - v)^2, deterministic along every path.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfcontrol import (
    BrownianEnsemble,
    DiffusionSpec,
    EnsembleMismatchError,
    MeasureFlow,
    StatisticSpec,
    density_process,
    drift_evaluator,
    hellinger_bound,
    make_time_grid,
    reference_flow,
    simulate_reference,
    tv_marginal,
    tv_pathspace,
    weighted_statistic,
)

STATS = {"mean": StatisticSpec("identity")}


def gaussian_tv(u: float, horizon: float) -> float:
    return 2.0 * math.erf(abs(u) * math.sqrt(horizon) / (2.0 * math.sqrt(2.0)))


def two_particle_ensemble():
    # two one-step paths: 0 -> 0 and 0 -> 2
    grid = make_time_grid(1.0, 1)
    inc = np.array([[[0.0]], [[2.0]]])
    brownian = BrownianEnsemble(grid=grid, increments=inc)
    sigma = DiffusionSpec(kind="constant", base=1.0)
    return simulate_reference(grid, brownian, sigma, [0.0])


def drifted_flow(paths, u: float):
    """Constant-drift reweighting of the reference ensemble."""
    def drift_at(k):
        return np.full((paths.particles, 1), u)

    density = density_process(paths, drift_at, DiffusionSpec())
    return MeasureFlow(paths, density.weights, STATS)


# ---------------------------------------------------------------------------
# flows and statistics


def test_weighted_statistic_by_hand():
    paths = two_particle_ensemble()
    weights = np.array([[1.0, 0.5], [1.0, 1.5]])
    flow = MeasureFlow(paths, weights, STATS)
    est, se = weighted_statistic(flow, 1, "mean")
    assert est == 1.5
    assert se == pytest.approx(np.std([0.0, 3.0]) / np.sqrt(2))


def test_statistic_series_matches_pointwise(paths4k):
    flow = reference_flow(paths4k, STATS)
    series = flow.statistic_series("mean")
    assert series.shape == (paths4k.grid.steps + 1,)
    for k in (0, 7, paths4k.grid.steps):
        est, _ = weighted_statistic(flow, k, "mean")
        assert series[k] == pytest.approx(est)
    assert flow.stats_at(0)["mean"] == pytest.approx(0.0)


def test_unregistered_statistic_raises(paths4k):
    flow = reference_flow(paths4k, STATS)
    with pytest.raises(KeyError):
        weighted_statistic(flow, 0, "skew")
    with pytest.raises(KeyError):
        flow.statistic_series("skew")


def test_measure_flow_rejects_bad_weights(paths4k):
    n = paths4k.grid.steps
    with pytest.raises(ValueError):
        MeasureFlow(paths4k, np.ones((paths4k.particles, n)), STATS)
    bad = np.ones((paths4k.particles, n + 1))
    bad[0, 0] = -0.1
    with pytest.raises(ValueError):
        MeasureFlow(paths4k, bad, STATS)
    bad[0, 0] = np.inf
    with pytest.raises(ValueError):
        MeasureFlow(paths4k, bad, STATS)


# ---------------------------------------------------------------------------
# path-space total variation


def test_tv_pathspace_identical_flows_is_zero(paths4k):
    flow = reference_flow(paths4k, STATS)
    est = tv_pathspace(flow, flow, paths4k.grid.steps)
    assert est.value == 0.0
    assert est.stderr == 0.0


def test_tv_pathspace_by_hand():
    paths = two_particle_ensemble()
    a = MeasureFlow(paths, np.array([[1.0, 0.5], [1.0, 1.5]]))
    b = MeasureFlow(paths, np.array([[1.0, 1.5], [1.0, 0.5]]))
    est = tv_pathspace(a, b, 1)
    assert est.value == 1.0
    assert est.kind == "pathspace"


def test_tv_pathspace_demands_common_ensemble(paths4k, paths1k):
    a = reference_flow(paths4k)
    b = reference_flow(paths1k)
    with pytest.raises(EnsembleMismatchError):
        tv_pathspace(a, b, 0)


def test_tv_pathspace_matches_gaussian_oracle(paths4k, lq):
    ref = reference_flow(paths4k, STATS)
    for u in (0.5, 1.0, 2.0):
        flow = drifted_flow(paths4k, u)
        est = tv_pathspace(ref, flow, paths4k.grid.steps)
        oracle = gaussian_tv(u, lq.horizon)
        assert abs(est.value - oracle) <= 3.0 * est.stderr, (u, est.value, oracle)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=20, deadline=None)
def test_tv_pathspace_is_a_metric(seed):
    paths = two_particle_ensemble()
    rng = np.random.default_rng(seed)
    flows = [MeasureFlow(paths, rng.lognormal(size=(2, 2))) for _ in range(3)]
    a, b, c = flows
    ab = tv_pathspace(a, b, 1).value
    ba = tv_pathspace(b, a, 1).value
    ac = tv_pathspace(a, c, 1).value
    cb = tv_pathspace(c, b, 1).value
    assert 0.0 <= ab <= 2.0
    assert ab == ba
    assert ab <= ac + cb + 1e-12


# ---------------------------------------------------------------------------
# marginal total variation


def test_tv_marginal_identical_flows_is_zero(paths4k):
    flow = reference_flow(paths4k, STATS)
    est = tv_marginal(flow, flow, paths4k.grid.steps)
    assert est.value == 0.0
    assert est.bin_width is not None


def test_tv_marginal_disjoint_supports(lq):
    from mfcontrol import simulate_for_scenario

    from mfcontrol import get_builtin

    near = simulate_for_scenario(lq, particles=500, steps=4, seed=21)
    far_scenario = get_builtin("linear-quadratic", initial=100.0)
    far = simulate_for_scenario(far_scenario, particles=500, steps=4, seed=22)
    est = tv_marginal(reference_flow(near), reference_flow(far), 4)
    assert est.value == pytest.approx(2.0, abs=1e-12)


def test_tv_marginal_matches_gaussian_oracle(paths4k, lq):
    ref = reference_flow(paths4k, STATS)
    flow = drifted_flow(paths4k, 1.0)
    est = tv_marginal(ref, flow, paths4k.grid.steps, bins=64)
    oracle = gaussian_tv(1.0, lq.horizon)
    assert abs(est.value - oracle) <= 3.0 * est.stderr + est.bin_width


def test_tv_marginal_dominated_by_pathspace(paths4k):
    # coarsening by bins can only lower TV; on a common ensemble this holds
    # pathwise, not merely in expectation
    ref = reference_flow(paths4k, STATS)
    flow = drifted_flow(paths4k, 1.0)
    for k in (1, paths4k.grid.steps // 2, paths4k.grid.steps):
        marg = tv_marginal(ref, flow, k)
        path = tv_pathspace(ref, flow, k)
        assert marg.value <= path.value + 1e-12


def test_tv_marginal_rejects_bad_requests(paths4k):
    flow = reference_flow(paths4k, STATS)
    with pytest.raises(ValueError):
        tv_marginal(flow, flow, 0, bins=1)

    grid = make_time_grid(1.0, 2)
    from mfcontrol import sample_brownian

    brownian = sample_brownian(grid, 16, 2, seed=0)
    wide = simulate_reference(grid, brownian, DiffusionSpec(), [0.0, 0.0])
    with pytest.raises(ValueError):
        tv_marginal(reference_flow(wide), reference_flow(wide), 0)


# ---------------------------------------------------------------------------
# Hellinger bound


def test_hellinger_equal_drifts_vanish(paths4k):
    flow = reference_flow(paths4k, STATS)
    drift = lambda k: np.zeros((paths4k.particles, 1))
    gam, bound, se = hellinger_bound(flow, drift, drift, DiffusionSpec(),
                                     paths4k.grid)
    assert gam == 0.0 and bound == 0.0 and se == 0.0


def test_hellinger_constant_drifts_reference_weights(paths4k):
    # with weights one the weighted trapezoid of a deterministic integrand is
    # exact: Gamma = T (u - v)^2 / 8
    flow = reference_flow(paths4k, STATS)
    u, v = 1.0, -0.5
    fa = lambda k: np.full((paths4k.particles, 1), u)
    fb = lambda k: np.full((paths4k.particles, 1), v)
    gam, bound, se = hellinger_bound(flow, fa, fb, DiffusionSpec(), paths4k.grid)
    analytic = paths4k.grid.horizon / 8.0 * (u - v) ** 2
    assert gam == pytest.approx(analytic, rel=1e-12)
    assert bound == pytest.approx(8.0 * math.sqrt(analytic), rel=1e-12)
    assert se == pytest.approx(0.0, abs=1e-12)


def test_hellinger_constant_drifts_controlled_weights(paths4k):
    # under the controlled flow's weights the same deterministic Gamma is
    # recovered up to the Monte Carlo error of E[L_T] = 1
    u, v = 1.0, 0.0
    flow = drifted_flow(paths4k, u)
    fa = lambda k: np.full((paths4k.particles, 1), u)
    fb = lambda k: np.full((paths4k.particles, 1), v)
    gam, bound, se = hellinger_bound(flow, fa, fb, DiffusionSpec(), paths4k.grid)
    analytic = paths4k.grid.horizon / 8.0 * (u - v) ** 2
    assert abs(gam - analytic) <= 3.0 * se + 1e-12


def test_hellinger_dominates_tv(paths4k):
    ref = reference_flow(paths4k, STATS)
    u = 0.5
    flow = drifted_flow(paths4k, u)
    tv = tv_pathspace(ref, flow, paths4k.grid.steps)
    fa = lambda k: np.zeros((paths4k.particles, 1))
    fb = lambda k: np.full((paths4k.particles, 1), u)
    _, bound, _ = hellinger_bound(ref, fa, fb, DiffusionSpec(), paths4k.grid)
    assert tv.value <= bound + 5.0 * tv.stderr
