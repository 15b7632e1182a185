"""Change of measure along the reference ensemble.

A controlled law never gets its own simulation.  Instead its density against
the reference law is accumulated in log space along each path,

    l[i, k+1] = l[i, k] + theta_k[i] . dW[i, k] - 0.5 |theta_k[i]|^2 dt,
    theta_k[i] = sigma^{-1}(t_k, path_i) f(t_k, path_i, mu_k, actions),

with everything evaluated at the left endpoint.  exp(l) is the discrete
Doleans exponential of the reweighting; its expectation stays at one up to
Monte Carlo error, which the diagnostics record at every grid time.

The measure flow entering f is itself the unknown of a fixed-point problem:
flow -> density -> reweighted flow.  fixpoint_measure_flow iterates that map
from the reference flow, monitoring the exact-on-the-ensemble TV distance
between successive weight columns at the horizon.  Because consecutive
iterates share paths, the distance estimate is pathwise coupled and decays to
zero with no Monte Carlo floor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BrownianEnsemble, PathEnsemble
from .measure import MeasureFlow, reference_flow, tv_pathspace
from .scenario import GameScenario, Scenario


class FixpointConvergenceError(RuntimeError):
    """Picard iteration failed to reach tolerance within max_iter updates."""

    def __init__(self, diagnostics: "FixpointDiagnostics"):
        self.diagnostics = diagnostics
        dists = ", ".join(f"{d:.3g}" for d in diagnostics.distances[-5:])
        super().__init__(
            f"fixed-point iteration did not converge: {diagnostics.applications} "
            f"applications, tol {diagnostics.tol:g}, last distances [{dists}]")


@dataclass(frozen=True)
class DensityProcess:
    """Log-space density of a reweighted law against the reference law."""

    log_weights: np.ndarray  # (particles, steps + 1), first column zero

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def normalization(self) -> tuple[np.ndarray, np.ndarray]:
        """(E[L_t], stderr) at every grid time; should straddle one."""
        w = self.weights
        m = w.shape[0]
        return np.mean(w, axis=0), np.std(w, axis=0) / np.sqrt(m)

    def moments(self) -> dict[str, np.ndarray]:
        w = self.weights
        return {
            "mean": np.mean(w, axis=0),
            "second": np.mean(w * w, axis=0),
            "fourth": np.mean(w ** 4, axis=0),
        }


def drift_evaluator(scenario: Scenario | GameScenario, flow: MeasureFlow, control):
    """Closure t_index -> (particles, dim) drift values along the flow's ensemble.

    control is a single control for Scenario or a pair for GameScenario
    (either a (u, v) tuple or an object with actions_pair).  Statistic
    trajectories are read off the flow once, so repeated evaluation during the
    Picard loop stays cheap.
    """
    paths = flow.paths
    names = scenario.drift.stat_names()
    series = {name: flow.statistic_series(name) for name in names}
    dim = paths.dim

    def row(k: int) -> dict[str, float]:
        return {name: series[name][k] for name in names}

    if scenario.kind == "game":
        def drift_at(k: int) -> np.ndarray:
            if hasattr(control, "actions_pair"):
                u, v = control.actions_pair(paths, k)
            else:
                u, v = control[0].actions(paths, k), control[1].actions(paths, k)
            f0 = scenario.drift.evaluate(paths.values[:, k, 0], row(k), u[:, 0], v[:, 0])
            out = np.zeros((paths.particles, dim))
            out[:, 0] = f0
            return out
        return drift_at

    def drift_at(k: int) -> np.ndarray:
        u = control.actions(paths, k)
        f0 = scenario.drift.evaluate(paths.values[:, k, 0], row(k), u[:, 0])
        out = np.zeros((paths.particles, dim))
        out[:, 0] = f0
        return out

    return drift_at


def density_process(paths: PathEnsemble, drift_at,
                    sigma, brownian: BrownianEnsemble | None = None) -> DensityProcess:
    """Accumulate the log density of the drift_at reweighting.

    drift_at: callable t_index -> (particles, dim).  The increments default to
    the ones the ensemble was simulated from.
    """
    if brownian is None:
        brownian = paths.driver
    if brownian is None:
        raise ValueError("no Brownian increments attached to the ensemble")
    dw = brownian.increments
    m, n, _ = dw.shape
    if paths.values.shape[0] != m or paths.grid.steps != n:
        raise ValueError("paths and increments disagree on ensemble shape")
    dt = paths.grid.dt
    times = paths.grid.times
    log_w = np.zeros((m, n + 1))
    for k in range(n):
        f = np.asarray(drift_at(k), dtype=float)
        theta = sigma.inv_apply(times[k], paths.state(k), paths.sup(k), f)
        if not np.all(np.isfinite(theta)):
            raise FloatingPointError(f"non-finite drift-to-noise ratio at t_index {k}")
        incr = np.sum(theta * dw[:, k, :], axis=1) - 0.5 * dt * np.sum(theta * theta, axis=1)
        log_w[:, k + 1] = log_w[:, k] + incr
    return DensityProcess(log_weights=log_w)


def reweighted_expectation(weights: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """(estimate, stderr) of E[L * value] over the ensemble."""
    weights = np.asarray(weights, dtype=float)
    values = np.asarray(values, dtype=float)
    if weights.shape != values.shape:
        raise ValueError("weights and values must have matching shapes")
    prod = weights * values
    m = prod.shape[0]
    return float(np.mean(prod)), float(np.std(prod) / np.sqrt(m))


@dataclass(frozen=True)
class FixpointDiagnostics:
    """Trace of one Picard run.

    distances[j] is the horizon TV distance between the weights produced by
    application j+1 and the previous ones.  iterations counts productive
    updates (distance >= tol); the final sub-tolerance verification pass is
    recorded but not counted, so a measure-independent drift converges in
    exactly one iteration and zero drift in zero.
    """

    distances: tuple[float, ...]
    stderrs: tuple[float, ...]
    tol: float
    converged: bool

    @property
    def applications(self) -> int:
        return len(self.distances)

    @property
    def iterations(self) -> int:
        return sum(1 for d in self.distances if d >= self.tol)

    @property
    def final_distance(self) -> float:
        return self.distances[-1]

    def to_dict(self) -> dict:
        return {
            "distances": list(self.distances),
            "stderrs": list(self.stderrs),
            "tol": self.tol,
            "converged": self.converged,
            "iterations": self.iterations,
            "applications": self.applications,
        }


@dataclass(frozen=True)
class FixpointResult:
    flow: MeasureFlow
    density: DensityProcess
    diagnostics: FixpointDiagnostics


def fixpoint_measure_flow(scenario: Scenario | GameScenario, control,
                          paths: PathEnsemble, tol: float = 1e-3,
                          max_iter: int = 50) -> FixpointResult:
    """Iterate flow -> reweighted flow until the weights stop moving.

    Starts from the reference flow (weights one).  Raises
    FixpointConvergenceError with full diagnostics if max_iter applications
    do not bring the horizon TV update below tol; partial results are on the
    exception's diagnostics for inspection.
    """
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be positive and max_iter >= 1")
    stats = scenario.statistic_map
    flow = reference_flow(paths, stats)
    density = DensityProcess(log_weights=np.zeros_like(flow.weights))
    distances: list[float] = []
    stderrs: list[float] = []
    for _ in range(max_iter):
        drift_at = drift_evaluator(scenario, flow, control)
        density = density_process(paths, drift_at, scenario.sigma)
        new_flow = MeasureFlow(paths, density.weights, stats)
        est = tv_pathspace(flow, new_flow, paths.grid.steps)
        distances.append(est.value)
        stderrs.append(est.stderr)
        flow = new_flow
        if est.value < tol:
            diag = FixpointDiagnostics(tuple(distances), tuple(stderrs), tol, True)
            return FixpointResult(flow=flow, density=density, diagnostics=diag)
    diag = FixpointDiagnostics(tuple(distances), tuple(stderrs), tol, False)
    raise FixpointConvergenceError(diag)


@dataclass(frozen=True)
class ContractionReport:
    """Productive-iteration distances with successive ratios.

    Rows carry (iteration, distance, stderr, ratio to the next retained
    distance or None).  Trailing sub-tolerance verification distances are
    dropped, so a measure-independent run shows a single row with an
    undefined ratio.  flagged lists row indices whose ratio is >= 1 while
    both distances sit clear of their Monte Carlo noise (5 stderr).
    """

    rows: tuple[tuple[int, float, float, float | None], ...]
    fit_rate: float | None
    flagged: tuple[int, ...]
    tol: float

    def to_dict(self) -> dict:
        return {
            "rows": [
                {"iteration": it, "distance": d, "stderr": se, "ratio": r}
                for it, d, se, r in self.rows
            ],
            "fit_rate": self.fit_rate,
            "flagged": list(self.flagged),
            "tol": self.tol,
        }


def contraction_report(diag: FixpointDiagnostics) -> ContractionReport:
    """Summarize geometric decay of the Picard distances."""
    if diag.applications < 2:
        raise ValueError("need at least 2 recorded applications to assess contraction")
    retained = [(i + 1, d, s) for i, (d, s) in enumerate(zip(diag.distances, diag.stderrs))
                if d >= diag.tol]
    rows = []
    flagged = []
    for j, (it, d, se) in enumerate(retained):
        ratio = None
        if j + 1 < len(retained):
            ratio = retained[j + 1][1] / d if d > 0 else None
        rows.append((it, d, se, ratio))
        if ratio is not None and ratio >= 1.0:
            next_d, next_se = retained[j + 1][1], retained[j + 1][2]
            if d > 5 * se and next_d > 5 * next_se:
                flagged.append(j)
    fit_rate = None
    positive = [d for _, d, _ in retained if d > 0]
    if len(positive) >= 2:
        logs = np.log(positive)
        slope = np.polyfit(np.arange(len(logs)), logs, 1)[0]
        fit_rate = float(np.exp(slope))
    return ContractionReport(rows=tuple(rows), fit_rate=fit_rate,
                             flagged=tuple(flagged), tol=diag.tol)
