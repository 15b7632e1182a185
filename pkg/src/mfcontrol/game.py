"""Two-player zero-sum extension: envelopes, saddle synthesis, verification.

Player u minimizes and player v maximizes the same payoff.  The candidate
saddle point comes from the pointwise Hamiltonian envelopes over the two
finite action grids,

    lower(z) = max_v min_u H(z, u, v),    upper(z) = min_u max_v H(z, u, v).

When the two envelopes agree on a sampled z grid (the Isaacs condition) the
game has a value and the backward equation driven by the envelope yields it;
when they disagree beyond tolerance the solver refuses to certify a value
rather than returning a number that means nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bsde import BasisSpec, BsdeSolution, features_at, solve_driver_bsde, terminal_values
from .control import _particle_column, constant_control, evaluate_payoff
from .core import PathEnsemble
from .girsanov import DensityProcess, FixpointResult, fixpoint_measure_flow
from .measure import MeasureFlow, reference_flow, tv_pathspace
from .scenario import ActionGrid, GameScenario


class IsaacsError(RuntimeError):
    """Envelope order fails on the sampled grid; no saddle value exists."""

    def __init__(self, report: "IsaacsReport"):
        super().__init__(
            f"upper and lower Hamiltonian envelopes differ by up to "
            f"{report.max_gap:.6g} on the sampled grid; the game value is "
            f"not certified")
        self.report = report


def game_hamiltonian(scenario: GameScenario, t: float, state, sup,
                     stats_row: dict, z, actions_u, actions_v) -> np.ndarray:
    """Per-particle H = h(u, v) + z . sigma^{-1} f(u, v)."""
    if scenario.kind != "game":
        raise TypeError("game_hamiltonian needs a two-player scenario")
    x0 = _particle_column(state)
    z0 = _particle_column(z)
    u0 = _particle_column(actions_u)
    v0 = _particle_column(actions_v)
    sup = np.asarray(sup, dtype=float)
    f = scenario.drift.evaluate(x0, stats_row, u0, v0)
    inv = scenario.sigma.inv_scalar_values(t, x0, sup)
    h = scenario.running_cost.evaluate(x0, stats_row, u0, v0)
    return h + z0 * inv * f


@dataclass(frozen=True)
class EnvelopeValues:
    """Pointwise envelopes and their achieving actions, one row per particle.

    lower_u / lower_v achieve max_v min_u (v's choice with u's best reply);
    upper_u / upper_v achieve min_u max_v.  The candidate saddle pair is
    (upper_u, lower_v): each side plays its own guaranteed-value strategy.
    """

    lower: np.ndarray
    upper: np.ndarray
    lower_u: np.ndarray
    lower_v: np.ndarray
    upper_u: np.ndarray
    upper_v: np.ndarray

    @property
    def gap(self) -> np.ndarray:
        return self.upper - self.lower


def envelopes(scenario: GameScenario, t: float, state, sup, stats_row: dict,
              z) -> EnvelopeValues:
    """max_v min_u and min_u max_v of H over the two grids, vectorized.

    Ties resolve to the lexicographically smallest action on both axes (the
    grids are sorted and argmin / argmax take the first extremizer).
    """
    x0 = _particle_column(state)
    z0 = _particle_column(z)
    sup = np.asarray(sup, dtype=float)
    u_arr = scenario.actions_u.array()
    v_arr = scenario.actions_v.array()
    u_axis = u_arr[:, 0][:, None, None]   # (nu, 1, 1)
    v_axis = v_arr[:, 0][None, :, None]   # (1, nv, 1)
    xb = x0[None, None, :]
    f = scenario.drift.evaluate(xb, stats_row, u_axis, v_axis)
    h = scenario.running_cost.evaluate(xb, stats_row, u_axis, v_axis)
    inv = scenario.sigma.inv_scalar_values(t, x0, sup)
    hams = h + (z0 * inv)[None, None, :] * f  # (nu, nv, particles)

    m = hams.shape[2]
    cols = np.arange(m)

    min_u = np.min(hams, axis=0)            # (nv, m)
    argmin_u = np.argmin(hams, axis=0)
    idx_v_lower = np.argmax(min_u, axis=0)  # (m,)
    lower = min_u[idx_v_lower, cols]
    lower_v = v_arr[idx_v_lower]
    lower_u = u_arr[argmin_u[idx_v_lower, cols]]

    max_v = np.max(hams, axis=1)            # (nu, m)
    argmax_v = np.argmax(hams, axis=1)
    idx_u_upper = np.argmin(max_v, axis=0)  # (m,)
    upper = max_v[idx_u_upper, cols]
    upper_u = u_arr[idx_u_upper]
    upper_v = v_arr[argmax_v[idx_u_upper, cols]]

    return EnvelopeValues(lower=lower, upper=upper, lower_u=lower_u,
                          lower_v=lower_v, upper_u=upper_u, upper_v=upper_v)


# ---------------------------------------------------------------------------
# Isaacs pre-check


@dataclass(frozen=True)
class IsaacsReport:
    """Envelope gap sampled over (state, z) points; max_gap <= tol certifies
    that the two envelopes coincide where the backward solve will read them."""

    max_gap: float
    tol: float
    z_points: tuple[float, ...]
    gap_by_z: tuple[float, ...]

    @property
    def holds(self) -> bool:
        return self.max_gap <= self.tol

    def to_dict(self) -> dict:
        return {
            "max_gap": self.max_gap, "tol": self.tol, "holds": self.holds,
            "z_points": list(self.z_points), "gap_by_z": list(self.gap_by_z),
        }


def isaacs_gap(scenario: GameScenario, z_points=None, x_points=None,
               stats_row: dict | None = None, t: float = 0.0,
               tol: float = 1e-9) -> IsaacsReport:
    """Sample upper - lower over a (state, z) grid.

    Defaults: z on [-3, 3], states around the initial point at the diffusive
    scale, statistics at their initial-condition values.  The gap is always
    >= 0; a positive max beyond tol means min and max do not commute for this
    Hamiltonian and no saddle certificate is possible on these grids.
    """
    if z_points is None:
        z_points = np.linspace(-3.0, 3.0, 25)
    z_points = np.asarray(z_points, dtype=float)
    if x_points is None:
        spread = np.sqrt(scenario.horizon)
        x_points = scenario.initial_array[0] + spread * np.linspace(-3.0, 3.0, 13)
    x_points = np.asarray(x_points, dtype=float)
    if stats_row is None:
        init = scenario.initial_array[None, :]
        stats_row = {name: float(spec.evaluate(init)[0])
                     for name, spec in scenario.statistic_map.items()}
    sup = np.abs(x_points)
    gaps = []
    for zv in z_points:
        z = np.full(x_points.shape, float(zv))
        env = envelopes(scenario, t, x_points, sup, stats_row, z)
        gaps.append(float(np.max(env.gap)))
    max_gap = max(gaps)
    return IsaacsReport(max_gap=max_gap, tol=tol,
                        z_points=tuple(float(z) for z in z_points),
                        gap_by_z=tuple(gaps))


# ---------------------------------------------------------------------------
# saddle feedback


class PairSideControl:
    """One side of a feedback pair, usable wherever a single control is."""

    def __init__(self, pair: "PairFeedbackControl", side: int, label: str):
        self._pair = pair
        self._side = side
        self.label = label

    def actions(self, paths: PathEnsemble, t_index: int) -> np.ndarray:
        return self._pair.actions_pair(paths, t_index)[self._side]


class PairFeedbackControl:
    """Saddle candidate synthesized from a backward solution.

    u plays the upper-envelope minimizer, v the lower-envelope maximizer, both
    read at the regression estimate z(t, x).  Statistic trajectories are
    frozen at synthesis time.
    """

    kind = "pair-feedback"

    def __init__(self, scenario: GameScenario, basis: BasisSpec,
                 z_coefficients: np.ndarray, stat_series: dict[str, np.ndarray],
                 label: str = "saddle-feedback"):
        self.scenario = scenario
        self.basis = basis
        self.z_coefficients = np.asarray(z_coefficients, dtype=float)
        self.stat_series = {k: np.asarray(v, dtype=float) for k, v in stat_series.items()}
        self.label = label

    def z_at(self, paths: PathEnsemble, t_index: int) -> np.ndarray:
        k = min(t_index, self.z_coefficients.shape[0] - 1)
        feats = features_at(paths, t_index, self.basis)
        return feats @ self.z_coefficients[k]

    def stats_at(self, t_index: int) -> dict[str, float]:
        return {name: float(series[t_index]) for name, series in self.stat_series.items()}

    def actions_pair(self, paths: PathEnsemble, t_index: int) -> tuple[np.ndarray, np.ndarray]:
        z = self.z_at(paths, t_index)
        t = paths.grid.times[t_index]
        env = envelopes(self.scenario, t, paths.state(t_index), paths.sup(t_index),
                        self.stats_at(t_index), z[:, 0])
        return env.upper_u, env.lower_v

    @property
    def u_control(self) -> PairSideControl:
        return PairSideControl(self, 0, f"{self.label}|u")

    @property
    def v_control(self) -> PairSideControl:
        return PairSideControl(self, 1, f"{self.label}|v")


# ---------------------------------------------------------------------------
# saddle synthesis


@dataclass(frozen=True)
class SaddleReport:
    """Outcome of the game synthesis loop.

    value is the backward envelope value at the matched flow; j_hat the
    reweighted payoff of the synthesized pair.  Their gap should vanish up to
    Monte Carlo noise when the Isaacs condition holds.
    """

    pair: PairFeedbackControl
    flow: MeasureFlow
    density: DensityProcess
    value: float
    value_stderr: float
    j_hat: float
    j_stderr: float
    matching_residual: float
    isaacs: IsaacsReport
    trace: tuple[tuple[int, float, float], ...]
    tol: float
    converged: bool
    solution: BsdeSolution

    @property
    def value_gap(self) -> float:
        return self.j_hat - self.value

    @property
    def value_gap_stderr(self) -> float:
        return float(np.hypot(self.j_stderr, self.value_stderr))

    @property
    def outer_iterations(self) -> int:
        return sum(1 for _, d, _ in self.trace if d >= self.tol)

    def to_dict(self) -> dict:
        return {
            "value": self.value, "value_stderr": self.value_stderr,
            "j_hat": self.j_hat, "j_stderr": self.j_stderr,
            "value_gap": self.value_gap, "value_gap_stderr": self.value_gap_stderr,
            "matching_residual": self.matching_residual,
            "isaacs_max_gap": self.isaacs.max_gap,
            "outer_iterations": self.outer_iterations,
            "converged": self.converged,
            "trace": [{"iteration": i, "distance": d, "stderr": s} for i, d, s in self.trace],
        }


def _envelope_driver(scenario: GameScenario, flow: MeasureFlow):
    paths = flow.paths
    names = tuple(dict.fromkeys((*scenario.running_cost.stat_names(),
                                 *scenario.drift.stat_names())))
    series = {name: flow.statistic_series(name) for name in names}
    times = paths.grid.times

    def driver_at(k: int, z: np.ndarray) -> np.ndarray:
        row = {name: series[name][k] for name in names}
        env = envelopes(scenario, times[k], paths.state(k), paths.sup(k), row, z[:, 0])
        return env.lower
    return driver_at


def _stat_snapshot(scenario: GameScenario, flow: MeasureFlow) -> dict[str, np.ndarray]:
    names = tuple(dict.fromkeys((*scenario.running_cost.stat_names(),
                                 *scenario.drift.stat_names())))
    return {name: flow.statistic_series(name).copy() for name in names}


def solve_game(scenario: GameScenario, paths: PathEnsemble,
               basis: BasisSpec | None = None, tol: float = 1e-3,
               max_outer: int = 20, fixpoint_tol: float = 1e-3,
               fixpoint_max_iter: int = 50, isaacs_tol: float = 1e-9) -> SaddleReport:
    """Synthesize a saddle candidate and certify the game value.

    Aborts with IsaacsError before any heavy work when the sampled envelope
    gap exceeds isaacs_tol.  Otherwise runs the same alternation as the
    single-controller synthesis with the lower envelope as backward driver,
    and prices the resulting pair on its matched flow.
    """
    if scenario.kind != "game":
        raise TypeError("solve_game needs a two-player scenario")
    if max_outer < 1:
        raise ValueError("max_outer must be >= 1")
    if basis is None:
        basis = BasisSpec()

    isaacs = isaacs_gap(scenario, tol=isaacs_tol)
    if not isaacs.holds:
        raise IsaacsError(isaacs)

    flow = reference_flow(paths, scenario.statistic_map)
    trace: list[tuple[int, float, float]] = []
    converged = False
    pair: PairFeedbackControl | None = None
    fixres: FixpointResult | None = None
    for it in range(1, max_outer + 1):
        terminal = terminal_values(scenario, flow)
        sol = solve_driver_bsde(paths, terminal, _envelope_driver(scenario, flow), basis)
        pair = PairFeedbackControl(scenario, basis, sol.z_coefficients,
                                   _stat_snapshot(scenario, flow))
        fixres = fixpoint_measure_flow(scenario, pair, paths,
                                       tol=fixpoint_tol, max_iter=fixpoint_max_iter)
        est = tv_pathspace(flow, fixres.flow, paths.grid.steps)
        trace.append((it, est.value, est.stderr))
        flow = fixres.flow
        if est.value < tol:
            converged = True
            break

    terminal = terminal_values(scenario, flow)
    final_sol = solve_driver_bsde(paths, terminal, _envelope_driver(scenario, flow), basis)
    payoff = evaluate_payoff(scenario, pair, paths, fixpoint=fixres)
    return SaddleReport(
        pair=pair, flow=flow, density=fixres.density,
        value=final_sol.y0, value_stderr=final_sol.y0_stderr,
        j_hat=payoff.value, j_stderr=payoff.stderr,
        matching_residual=trace[-1][1], isaacs=isaacs,
        trace=tuple(trace), tol=tol, converged=converged, solution=final_sol)


# ---------------------------------------------------------------------------
# saddle verification


@dataclass(frozen=True)
class SaddleCheckReport:
    """Unilateral-deviation slacks around the synthesized pair.

    u rows: J(u~, v_bar) - J(pair), which a saddle keeps >= -3 stderr (the
    minimizer cannot improve by deviating).  v rows: J(pair) - J(u_bar, v~),
    same sign convention (the maximizer cannot improve).
    """

    u_rows: tuple[dict, ...]
    v_rows: tuple[dict, ...]
    j_pair: float
    j_pair_stderr: float
    passed: bool

    def to_dict(self) -> dict:
        return {"u_rows": list(self.u_rows), "v_rows": list(self.v_rows),
                "j_pair": self.j_pair, "j_pair_stderr": self.j_pair_stderr,
                "passed": self.passed}


def _grid_constants(grid: ActionGrid):
    return [constant_control(p, grid) for p in grid.points]


def verify_saddle(scenario: GameScenario, paths: PathEnsemble,
                  report: SaddleReport, u_deviations=None, v_deviations=None) -> SaddleCheckReport:
    """Price unilateral deviations against the synthesized pair.

    Defaults to every constant control on each grid.  Each deviation fixes
    the opponent's feedback side and replaces one side only; all payoffs are
    reweightings of the same ensemble.
    """
    if u_deviations is None:
        u_deviations = _grid_constants(scenario.actions_u)
    if v_deviations is None:
        v_deviations = _grid_constants(scenario.actions_v)
    pair = report.pair
    j0, se0 = report.j_hat, report.j_stderr
    u_rows, v_rows = [], []
    passed = True
    for c in u_deviations:
        res = evaluate_payoff(scenario, (c, pair.v_control), paths)
        slack = res.value - j0
        tol3 = 3.0 * float(np.hypot(res.stderr, se0))
        ok = bool(slack >= -tol3)
        passed = passed and ok
        u_rows.append({"label": getattr(c, "label", "u-dev"), "payoff": res.value,
                       "stderr": res.stderr, "slack": slack, "tol": tol3, "ok": ok})
    for c in v_deviations:
        res = evaluate_payoff(scenario, (pair.u_control, c), paths)
        slack = j0 - res.value
        tol3 = 3.0 * float(np.hypot(res.stderr, se0))
        ok = bool(slack >= -tol3)
        passed = passed and ok
        v_rows.append({"label": getattr(c, "label", "v-dev"), "payoff": res.value,
                       "stderr": res.stderr, "slack": slack, "tol": tol3, "ok": ok})
    return SaddleCheckReport(u_rows=tuple(u_rows), v_rows=tuple(v_rows),
                             j_pair=j0, j_pair_stderr=se0, passed=passed)
