"""Density processes and the measure fixed point.

For a constant drift u with unit sigma the discrete Doleans sum telescopes
exactly: log L_T = u W_T - u^2 T / 2, with W_T the summed increments, so the
log weights can be compared bit-for-bit against a hand computation.  The
martingale property E[L_t] = 1 and the reweighted mean E^u[x_T] = xi + uT
are then Monte Carlo facts with explicit standard errors.

Fixed-point iteration counts are structural: a drift that never reads the
flow moves the weights once (one productive update, then a sub-tolerance
verification pass), and a zero drift never moves them at all.
"""

import numpy as np
import pytest

from mfcontrol import (
    DensityProcess,
    DiffusionSpec,
    FixpointConvergenceError,
    constant_control,
    contraction_report,
    density_process,
    drift_evaluator,
    fixpoint_measure_flow,
    reweighted_expectation,
    simulate_for_scenario,
    weighted_statistic,
)

SIGMA = DiffusionSpec()


def constant_drift(paths, u):
    def drift_at(k):
        return np.full((paths.particles, 1), u)

    return drift_at


# ---------------------------------------------------------------------------
# density process


def test_zero_drift_gives_unit_weights(paths1k):
    density = density_process(paths1k, constant_drift(paths1k, 0.0), SIGMA)
    np.testing.assert_array_equal(density.log_weights,
                                  np.zeros_like(density.log_weights))
    np.testing.assert_array_equal(density.weights,
                                  np.ones_like(density.weights))


def test_constant_drift_log_weight_closed_form(paths4k):
    # log L_T = u W_T - u^2 T / 2 exactly: the quadratic term is
    # -u^2/2 * dt summed over N steps and the linear term telescopes
    u = 0.7
    density = density_process(paths4k, constant_drift(paths4k, u), SIGMA)
    w_t = np.cumsum(paths4k.driver.increments[:, :, 0], axis=1)
    times = paths4k.grid.times[1:]
    expected = u * w_t - 0.5 * u * u * times
    np.testing.assert_allclose(density.log_weights[:, 1:], expected,
                               rtol=0, atol=1e-12)
    np.testing.assert_array_equal(density.log_weights[:, 0],
                                  np.zeros(paths4k.particles))


def test_density_is_a_positive_martingale(paths4k):
    density = density_process(paths4k, constant_drift(paths4k, 1.0), SIGMA)
    assert np.all(density.weights > 0)
    mean, se = density.normalization()
    assert mean.shape == (paths4k.grid.steps + 1,)
    assert mean[0] == 1.0
    for k in range(paths4k.grid.steps + 1):
        assert abs(mean[k] - 1.0) <= 4.0 * se[k] + 1e-12, k


def test_density_moments_stable_across_seeds(lq):
    vals = []
    for seed in (3, 4):
        paths = simulate_for_scenario(lq, particles=10_000, steps=20, seed=seed)
        density = density_process(paths, constant_drift(paths, 1.0), SIGMA)
        vals.append(density.moments()["second"][-1])
    # E[L_T^2] = exp(u^2 T); two seeds agree within 20%
    assert abs(vals[0] - vals[1]) <= 0.2 * max(vals)
    assert vals[0] == pytest.approx(np.exp(1.0), rel=0.2)


def test_reweighted_mean_shifts_by_drift(paths4k):
    u = 0.5
    density = density_process(paths4k, constant_drift(paths4k, u), SIGMA)
    x_t = paths4k.values[:, -1, 0]
    est, se = reweighted_expectation(density.weights[:, -1], x_t)
    assert abs(est - u * paths4k.grid.horizon) <= 3.0 * se


def test_reweighted_expectation_by_hand():
    est, se = reweighted_expectation(np.ones(4), np.array([1.0, 2.0, 3.0, 4.0]))
    assert est == 2.5
    est, _ = reweighted_expectation(np.array([0.5, 1.5]), np.array([2.0, 2.0]))
    assert est == 2.0
    with pytest.raises(ValueError):
        reweighted_expectation(np.ones(3), np.ones(4))


def test_non_finite_drift_ratio_aborts(paths1k):
    def bad(k):
        out = np.zeros((paths1k.particles, 1))
        out[0, 0] = np.inf
        return out

    with pytest.raises(FloatingPointError):
        density_process(paths1k, bad, SIGMA)


def test_density_needs_attached_increments(paths1k):
    from mfcontrol import PathEnsemble

    orphan = PathEnsemble(grid=paths1k.grid, values=paths1k.values,
                          initial=paths1k.initial,
                          running_sup=paths1k.running_sup, driver=None)
    with pytest.raises(ValueError):
        density_process(orphan, constant_drift(paths1k, 1.0), SIGMA)


# ---------------------------------------------------------------------------
# fixed point


def test_measure_independent_drift_converges_in_one_iteration(lq, paths4k):
    control = constant_control([1.0], lq.actions)
    result = fixpoint_measure_flow(lq, control, paths4k)
    diag = result.diagnostics
    assert diag.converged
    assert diag.iterations == 1
    assert diag.applications == 2
    assert diag.final_distance < diag.tol
    # the converged weights are the plain constant-drift reweighting
    direct = density_process(paths4k, constant_drift(paths4k, 1.0), SIGMA)
    np.testing.assert_allclose(result.flow.weights, direct.weights, rtol=1e-12)


def test_zero_drift_converges_in_zero_iterations(zero_drift, paths4k):
    control = constant_control([1.0], zero_drift.actions)
    result = fixpoint_measure_flow(zero_drift, control, paths4k)
    assert result.diagnostics.iterations == 0
    assert result.diagnostics.applications == 1
    np.testing.assert_array_equal(result.flow.weights,
                                  np.ones_like(result.flow.weights))


def test_mean_field_fixed_point_mean_ode(mean_field, paths4k):
    # at the fixed point the coupling -0.5 m + 0.5 m cancels, so the
    # controlled mean solves dm/dt = u from m_0 = 0
    u = 1.0
    control = constant_control([u], mean_field.actions)
    result = fixpoint_measure_flow(mean_field, control, paths4k)
    assert result.diagnostics.converged
    assert result.diagnostics.iterations >= 1
    series = result.flow.statistic_series("mean")
    times = paths4k.grid.times
    for k in (0, paths4k.grid.steps // 2, paths4k.grid.steps):
        est, se = weighted_statistic(result.flow, k, "mean")
        assert abs(est - u * times[k]) <= 3.0 * se + 1e-12, k
    assert series.shape == times.shape


def test_fixed_point_is_self_consistent(mean_field, paths4k):
    control = constant_control([0.5], mean_field.actions)
    result = fixpoint_measure_flow(mean_field, control, paths4k)
    # one more application of the Picard map must not move the weights
    drift_at = drift_evaluator(mean_field, result.flow, control)
    density = density_process(paths4k, drift_at, SIGMA)
    moved = np.mean(np.abs(density.weights[:, -1] - result.flow.weights[:, -1]))
    assert moved < result.diagnostics.tol


def test_unattainable_tolerance_raises_with_diagnostics(mean_field, paths1k):
    control = constant_control([1.0], mean_field.actions)
    with pytest.raises(FixpointConvergenceError) as err:
        fixpoint_measure_flow(mean_field, control, paths1k, tol=1e-15, max_iter=3)
    diag = err.value.diagnostics
    assert diag.applications == 3
    assert not diag.converged
    assert len(diag.distances) == len(diag.stderrs) == 3


def test_fixpoint_rejects_bad_parameters(lq, paths1k):
    control = constant_control([1.0], lq.actions)
    with pytest.raises(ValueError):
        fixpoint_measure_flow(lq, control, paths1k, tol=0.0)
    with pytest.raises(ValueError):
        fixpoint_measure_flow(lq, control, paths1k, max_iter=0)


def test_fixpoint_determinism(mean_field):
    runs = []
    for _ in range(2):
        paths = simulate_for_scenario(mean_field, particles=1000, steps=10, seed=9)
        control = constant_control([1.0], mean_field.actions)
        result = fixpoint_measure_flow(mean_field, control, paths)
        runs.append(result.flow.weights)
    np.testing.assert_array_equal(runs[0], runs[1])


# ---------------------------------------------------------------------------
# contraction diagnostics


def test_contraction_report_single_productive_row(lq, paths4k):
    control = constant_control([1.0], lq.actions)
    diag = fixpoint_measure_flow(lq, control, paths4k).diagnostics
    report = contraction_report(diag)
    assert len(report.rows) == 1
    it, dist, se, ratio = report.rows[0]
    assert it == 1
    assert dist >= diag.tol
    assert ratio is None  # single retained row, no successive ratio
    assert report.fit_rate is None
    assert report.flagged == ()


def test_contraction_report_needs_two_applications():
    from mfcontrol import FixpointDiagnostics

    diag = FixpointDiagnostics(distances=(0.5,), stderrs=(0.01,), tol=1e-3,
                               converged=False)
    with pytest.raises(ValueError):
        contraction_report(diag)


def test_contraction_ratios_below_one_for_mean_field(mean_field, paths4k):
    # the Picard map is a contraction here; observed ratios stay below one
    # once distances are clear of their Monte Carlo noise
    control = constant_control([1.0], mean_field.actions)
    diag = fixpoint_measure_flow(mean_field, control, paths4k,
                                 tol=1e-4).diagnostics
    report = contraction_report(diag)
    assert report.flagged == ()
    assert len(report.rows) >= 2
    if report.fit_rate is not None:
        assert report.fit_rate < 1.0


def test_contraction_consistent_across_seeds(mean_field):
    rates = []
    for seed in (17, 18):
        paths = simulate_for_scenario(mean_field, particles=4000, steps=20,
                                      seed=seed)
        control = constant_control([1.0], mean_field.actions)
        diag = fixpoint_measure_flow(mean_field, control, paths,
                                     tol=1e-4).diagnostics
        report = contraction_report(diag)
        if report.fit_rate is not None:
            rates.append(report.fit_rate)
    if len(rates) == 2:
        assert abs(rates[0] - rates[1]) <= 0.3
