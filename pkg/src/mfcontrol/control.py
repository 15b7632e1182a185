"""Controls, Hamiltonians, payoffs, and the synthesis loop.

A control is a rule for reading an action off the reference ensemble at each
grid time.  Because controlled laws are reweightings of one ensemble, a
feedback rule evaluated along the reference paths is simultaneously a control
under every candidate law; comparing controls never requires resimulation.

The candidate optimum comes from pointwise minimization of the Hamiltonian

    H(t, x, mu, z, u) = h(t, x, mu, u) + z . sigma^{-1}(t, x) f(t, x, mu, u)

over the finite action grid inside a backward equation, alternating with a
measure fixed point for the synthesized feedback (policy iteration).  The
report carries the payoff of the synthesized control next to the backward
value, their gap being the optimality certificate.

Pointwise minimization freezes the law at one flow, so its value is the
infimum over controls only when costs and dynamics never read the law.  The
comparison baseline Y* therefore comes from the family lower envelope
(envelope_bsde): the backward equation whose terminal and driver are the
pointwise minima over explicit candidate controls, each candidate priced
under its own matched flow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bsde import BasisSpec, BsdeSolution, features_at, solve_driver_bsde, solve_linear_bsde, terminal_values
from .core import PathEnsemble
from .girsanov import DensityProcess, FixpointDiagnostics, FixpointResult, fixpoint_measure_flow
from .measure import MeasureFlow, reference_flow, tv_pathspace
from .scenario import ActionGrid, GameScenario, Scenario


# ---------------------------------------------------------------------------
# control representations


@dataclass(frozen=True)
class Control:
    """Deterministic control rule on the ensemble.

    kinds:
      constant    a fixed action,
      parametric  u(t, x) = clip(a + b x + c sup, box), scalar actions,
      table       u(t_k, x) from a per-step lookup over state bins.

    Values are clamped into the closed box hull of the admissible grid, so a
    control never acts outside the action set.
    """

    kind: str
    value: tuple[float, ...] = ()
    coeffs: tuple[float, float, float] = (0.0, 0.0, 0.0)
    table_edges: tuple[float, ...] = ()
    table_values: tuple[tuple[float, ...], ...] = ()
    box_lo: tuple[float, ...] = ()
    box_hi: tuple[float, ...] = ()
    label: str = ""

    @property
    def dim(self) -> int:
        if self.kind == "constant":
            return len(self.value)
        return 1

    def actions(self, paths: PathEnsemble, t_index: int) -> np.ndarray:
        m = paths.particles
        if self.kind == "constant":
            return np.tile(np.asarray(self.value, dtype=float), (m, 1))
        x0 = paths.values[:, t_index, 0]
        if self.kind == "parametric":
            a, b, c = self.coeffs
            raw = a + b * x0 + c * paths.running_sup[:, t_index]
        elif self.kind == "table":
            vals = np.asarray(self.table_values, dtype=float)
            row = vals[min(t_index, vals.shape[0] - 1)]
            idx = np.clip(np.searchsorted(self.table_edges, x0, side="right") - 1,
                          0, len(row) - 1)
            raw = row[idx]
        else:
            raise ValueError(f"unknown control kind {self.kind!r}")
        if self.box_lo:
            raw = np.clip(raw, self.box_lo[0], self.box_hi[0])
        return raw[:, None]


def _grid_box(grid: ActionGrid | None) -> tuple[tuple[float, ...], tuple[float, ...]]:
    if grid is None:
        return (), ()
    lo, hi = grid.bounds()
    return tuple(float(v) for v in lo), tuple(float(v) for v in hi)


def constant_control(value, grid: ActionGrid | None = None, label: str = "") -> Control:
    value = tuple(float(v) for v in np.atleast_1d(value))
    lo, hi = _grid_box(grid)
    if lo:
        value = tuple(float(np.clip(v, l, h)) for v, l, h in zip(value, lo, hi))
    return Control(kind="constant", value=value, box_lo=lo, box_hi=hi,
                   label=label or f"const[{', '.join(f'{v:g}' for v in value)}]")


def parametric_control(a: float, b: float, c: float, grid: ActionGrid | None = None,
                       label: str = "") -> Control:
    lo, hi = _grid_box(grid)
    return Control(kind="parametric", coeffs=(float(a), float(b), float(c)),
                   box_lo=lo, box_hi=hi,
                   label=label or f"affine[{a:g},{b:g},{c:g}]")


def table_control(edges, values, grid: ActionGrid | None = None, label: str = "") -> Control:
    lo, hi = _grid_box(grid)
    return Control(kind="table",
                   table_edges=tuple(float(e) for e in edges),
                   table_values=tuple(tuple(float(v) for v in row) for row in values),
                   box_lo=lo, box_hi=hi, label=label or "table")


def parse_control(spec: dict | str, grid: ActionGrid) -> Control:
    """Decode a control from a config entry like "constant:-0.5" or a mapping."""
    if isinstance(spec, str):
        kind, _, rest = spec.partition(":")
        if kind == "constant":
            return constant_control([float(v) for v in rest.split(",")], grid)
        if kind == "parametric":
            vals = [float(v) for v in rest.split(",")]
            if len(vals) != 3:
                raise ValueError("parametric control needs three coefficients a,b,c")
            return parametric_control(*vals, grid=grid)
        raise ValueError(f"cannot parse control spec {spec!r}")
    kind = spec.get("kind")
    if kind == "constant":
        return constant_control(spec["value"], grid, label=spec.get("label", ""))
    if kind == "parametric":
        a, b, c = spec["coeffs"]
        return parametric_control(a, b, c, grid, label=spec.get("label", ""))
    if kind == "table":
        return table_control(spec["edges"], spec["values"], grid,
                             label=spec.get("label", ""))
    raise ValueError(f"unknown control kind {kind!r}")


# ---------------------------------------------------------------------------
# hamiltonian


def _particle_column(arr) -> np.ndarray:
    """Coerce (m,) or (m, d) input to the scalar column read by the registry."""
    out = np.asarray(arr, dtype=float)
    return out[:, 0] if out.ndim == 2 else out


def hamiltonian(scenario: Scenario, t: float, state, sup, stats_row: dict,
                z, actions) -> np.ndarray:
    """Per-particle H = h + z . sigma^{-1} f, one value per particle.

    state, z, actions may come as (m, d) arrays; the registry reads
    coordinate 0 of each.  stats_row maps statistic names to their values at
    time t under the measure flow being priced.
    """
    if scenario.kind == "game":
        raise TypeError("use game_hamiltonian for two-player scenarios")
    x0 = _particle_column(state)
    z0 = _particle_column(z)
    u0 = _particle_column(actions)
    sup = np.asarray(sup, dtype=float)
    f = scenario.drift.evaluate(x0, stats_row, u0)
    inv = scenario.sigma.inv_scalar_values(t, x0, sup)
    h = scenario.running_cost.evaluate(x0, stats_row, u0)
    return h + z0 * inv * f


def minimized_hamiltonian(scenario: Scenario, t: float, state, sup,
                          stats_row: dict, z, grid: ActionGrid) -> tuple[np.ndarray, np.ndarray]:
    """(min_u H, argmin actions) over the admissible grid, vectorized.

    Ties resolve to the lexicographically smallest action because the grid is
    sorted and argmin takes the first minimizer.
    """
    if scenario.kind == "game":
        raise TypeError("use game envelopes for two-player scenarios")
    x0 = _particle_column(state)
    z0 = _particle_column(z)
    sup = np.asarray(sup, dtype=float)
    arr = grid.array()  # (n, d_u), sorted
    u_axis = arr[:, 0][:, None]  # dynamics and costs read action coordinate 0
    f = scenario.drift.evaluate(x0[None, :], stats_row, u_axis)
    inv = scenario.sigma.inv_scalar_values(t, x0, sup)
    h = scenario.running_cost.evaluate(x0[None, :], stats_row, u_axis)
    hams = h + (z0 * inv)[None, :] * f  # (n, particles)
    idx = np.argmin(hams, axis=0)
    values = hams[idx, np.arange(hams.shape[1])]
    return values, arr[idx]


class BsdeFeedbackControl:
    """Feedback synthesized from a backward solution.

    Actions are the pointwise Hamiltonian minimizers at the regression
    estimate z(t, x) rebuilt from the stored per-step coefficients; the
    statistic trajectories are frozen at synthesis time, so the rule is a
    plain deterministic function of (t, current state, running sup).
    """

    kind = "bsde-feedback"

    def __init__(self, scenario: Scenario, grid: ActionGrid, basis: BasisSpec,
                 z_coefficients: np.ndarray, stat_series: dict[str, np.ndarray],
                 label: str = "bsde-feedback"):
        self.scenario = scenario
        self.grid = grid
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

    def actions(self, paths: PathEnsemble, t_index: int) -> np.ndarray:
        z = self.z_at(paths, t_index)
        t = paths.grid.times[t_index]
        _, acts = minimized_hamiltonian(
            self.scenario, t, paths.state(t_index), paths.sup(t_index),
            self.stats_at(t_index), z[:, 0], self.grid)
        return acts


# ---------------------------------------------------------------------------
# payoff


@dataclass(frozen=True)
class PayoffResult:
    value: float
    stderr: float
    flow: MeasureFlow
    density: DensityProcess
    diagnostics: FixpointDiagnostics
    per_particle: np.ndarray

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr,
                "fixpoint_iterations": self.diagnostics.iterations}


def evaluate_payoff(scenario: Scenario | GameScenario, control, paths: PathEnsemble,
                    tol: float = 1e-3, max_iter: int = 50,
                    fixpoint: FixpointResult | None = None) -> PayoffResult:
    """Reweighted payoff J(control) on the control's matched measure flow.

    J = E[ int_0^T L_t h(t) dt + L_T g ], the time integral by the trapezoid
    rule with the density at time t weighting the cost at time t.  For a
    GameScenario pass a (u, v) pair or a pair feedback.  A precomputed
    FixpointResult skips the Picard loop (it must belong to this control).
    """
    if fixpoint is None:
        fixpoint = fixpoint_measure_flow(scenario, control, paths, tol=tol, max_iter=max_iter)
    flow, density = fixpoint.flow, fixpoint.density
    n = paths.grid.steps
    names = tuple(dict.fromkeys((*scenario.running_cost.stat_names(),
                                 *scenario.terminal_cost.stat_names())))
    series = {name: flow.statistic_series(name) for name in names}

    h_mat = np.empty((paths.particles, n + 1))
    for k in range(n + 1):
        row = {name: series[name][k] for name in names}
        x0 = paths.values[:, k, 0]
        if scenario.kind == "game":
            if hasattr(control, "actions_pair"):
                u, v = control.actions_pair(paths, k)
            else:
                u, v = control[0].actions(paths, k), control[1].actions(paths, k)
            h_mat[:, k] = scenario.running_cost.evaluate(x0, row, u[:, 0], v[:, 0])
        else:
            u = control.actions(paths, k)
            h_mat[:, k] = scenario.running_cost.evaluate(x0, row, u[:, 0])

    running = np.trapezoid(flow.weights * h_mat, dx=paths.grid.dt, axis=1)
    terminal = flow.weights[:, n] * terminal_values(scenario, flow)
    per_particle = running + terminal
    value = float(np.mean(per_particle))
    stderr = float(np.std(per_particle) / np.sqrt(paths.particles))
    return PayoffResult(value=value, stderr=stderr, flow=flow, density=density,
                        diagnostics=fixpoint.diagnostics, per_particle=per_particle)


# ---------------------------------------------------------------------------
# synthesis


@dataclass(frozen=True)
class OptimizationReport:
    """Outcome of the policy iteration.

    eps_hat = j_hat - y0 is the optimality certificate: the payoff of the
    synthesized control minus the backward value at the matched flow.  A
    negative value beyond noise (flagged_negative) signals that the backward
    value is not a lower bound for this scenario; it is reported, never
    silently clipped.
    """

    control: BsdeFeedbackControl
    flow: MeasureFlow
    density: DensityProcess
    y0: float
    y0_stderr: float
    j_hat: float
    j_stderr: float
    matching_residual: float
    h_residual: float
    trace: tuple[tuple[int, float, float], ...]
    tol: float
    converged: bool
    solution: BsdeSolution

    @property
    def eps_hat(self) -> float:
        return self.j_hat - self.y0

    @property
    def eps_stderr(self) -> float:
        return float(np.hypot(self.j_stderr, self.y0_stderr))

    @property
    def flagged_negative(self) -> bool:
        return self.eps_hat < -3.0 * self.eps_stderr

    @property
    def outer_iterations(self) -> int:
        return sum(1 for _, d, _ in self.trace if d >= self.tol)

    def to_dict(self) -> dict:
        return {
            "y0": self.y0, "y0_stderr": self.y0_stderr,
            "j_hat": self.j_hat, "j_stderr": self.j_stderr,
            "eps_hat": self.eps_hat, "eps_stderr": self.eps_stderr,
            "matching_residual": self.matching_residual,
            "h_residual": self.h_residual,
            "outer_iterations": self.outer_iterations,
            "converged": self.converged,
            "flagged_negative": self.flagged_negative,
            "trace": [{"iteration": i, "distance": d, "stderr": s} for i, d, s in self.trace],
        }


def _minimized_driver(scenario: Scenario, flow: MeasureFlow, grid: ActionGrid):
    paths = flow.paths
    names = tuple(dict.fromkeys((*scenario.running_cost.stat_names(),
                                 *scenario.drift.stat_names())))
    series = {name: flow.statistic_series(name) for name in names}
    times = paths.grid.times

    def driver_at(k: int, z: np.ndarray) -> np.ndarray:
        row = {name: series[name][k] for name in names}
        values, _ = minimized_hamiltonian(
            scenario, times[k], paths.state(k), paths.sup(k), row, z[:, 0], grid)
        return values

    return driver_at


def _stat_snapshot(scenario: Scenario, flow: MeasureFlow) -> dict[str, np.ndarray]:
    names = tuple(dict.fromkeys((*scenario.running_cost.stat_names(),
                                 *scenario.drift.stat_names())))
    return {name: flow.statistic_series(name).copy() for name in names}


def policy_iteration(scenario: Scenario, paths: PathEnsemble,
                     grid: ActionGrid | None = None, basis: BasisSpec | None = None,
                     tol: float = 1e-3, max_outer: int = 20,
                     fixpoint_tol: float = 1e-3, fixpoint_max_iter: int = 50,
                     residual_samples: int = 200, seed: int = 7) -> OptimizationReport:
    """Alternate minimized-Hamiltonian backward solves with measure matching.

    Starting from the reference flow: synthesize the argmin feedback from the
    backward solution on the current flow, rematch the flow to that feedback,
    and stop once the horizon TV between successive flows drops below tol.
    Non-convergence is reported through converged=False with the full trace,
    not raised, so the partial certificate remains inspectable.
    """
    if scenario.kind == "game":
        raise TypeError("policy_iteration takes a single-controller scenario")
    if max_outer < 1:
        raise ValueError("max_outer must be >= 1")
    if grid is None:
        grid = scenario.actions
    if basis is None:
        basis = BasisSpec()

    flow = reference_flow(paths, scenario.statistic_map)
    trace: list[tuple[int, float, float]] = []
    converged = False
    control: BsdeFeedbackControl | None = None
    fixres: FixpointResult | None = None
    for it in range(1, max_outer + 1):
        terminal = terminal_values(scenario, flow)
        sol = solve_driver_bsde(paths, terminal, _minimized_driver(scenario, flow, grid), basis)
        control = BsdeFeedbackControl(scenario, grid, basis, sol.z_coefficients,
                                      _stat_snapshot(scenario, flow))
        fixres = fixpoint_measure_flow(scenario, control, paths,
                                       tol=fixpoint_tol, max_iter=fixpoint_max_iter)
        est = tv_pathspace(flow, fixres.flow, paths.grid.steps)
        trace.append((it, est.value, est.stderr))
        flow = fixres.flow
        if est.value < tol:
            converged = True
            break

    # report the backward value on the matched flow
    terminal = terminal_values(scenario, flow)
    final_sol = solve_driver_bsde(paths, terminal, _minimized_driver(scenario, flow, grid), basis)

    payoff = evaluate_payoff(scenario, control, paths, fixpoint=fixres)
    h_res = _argmin_residual(scenario, control, final_sol, flow, grid,
                             residual_samples, seed)
    return OptimizationReport(
        control=control, flow=flow, density=fixres.density,
        y0=final_sol.y0, y0_stderr=final_sol.y0_stderr,
        j_hat=payoff.value, j_stderr=payoff.stderr,
        matching_residual=trace[-1][1], h_residual=h_res,
        trace=tuple(trace), tol=tol, converged=converged, solution=final_sol)


def _argmin_residual(scenario: Scenario, control, sol: BsdeSolution,
                     flow: MeasureFlow, grid: ActionGrid,
                     samples: int, seed: int) -> float:
    """max over a sampled (t, particle) set of H(., u_hat) - min_u H at the
    matched flow; zero means the feedback is pointwise optimal there."""
    paths = flow.paths
    n = paths.grid.steps
    rng = np.random.default_rng(seed)
    m = paths.particles
    take = min(samples, m)
    names = tuple(dict.fromkeys((*scenario.running_cost.stat_names(),
                                 *scenario.drift.stat_names())))
    series = {name: flow.statistic_series(name) for name in names}
    worst = 0.0
    for k in sorted({0, n // 4, n // 2, (3 * n) // 4, n - 1}):
        idx = rng.choice(m, size=take, replace=False)
        row = {name: float(series[name][k]) for name in names}
        t = paths.grid.times[k]
        x0 = paths.values[idx, k, 0]
        sup = paths.running_sup[idx, k]
        z = sol.z[idx, k, 0]
        acts = control.actions(paths, k)[idx, 0]
        h_at = hamiltonian(scenario, t, x0, sup, row, z, acts)
        h_min, _ = minimized_hamiltonian(scenario, t, x0, sup, row, z, grid)
        worst = max(worst, float(np.max(h_at - h_min)))
    return worst


# ---------------------------------------------------------------------------
# search and verification


@dataclass(frozen=True)
class SearchReport:
    rows: tuple[tuple[str, float, float], ...]
    best_index: int
    best_value: float
    best_stderr: float
    y0: float
    y0_stderr: float
    eps_target: float

    @property
    def eps_hat(self) -> float:
        return self.best_value - self.y0

    @property
    def eps_stderr(self) -> float:
        return float(np.hypot(self.best_stderr, self.y0_stderr))

    @property
    def achieved(self) -> bool:
        return self.eps_hat <= self.eps_target + 3.0 * self.eps_stderr

    def to_dict(self) -> dict:
        return {
            "rows": [{"label": l, "value": v, "stderr": s} for l, v, s in self.rows],
            "best_index": self.best_index,
            "best_value": self.best_value,
            "best_stderr": self.best_stderr,
            "y0": self.y0, "y0_stderr": self.y0_stderr,
            "eps_hat": self.eps_hat, "eps_stderr": self.eps_stderr,
            "eps_target": self.eps_target, "achieved": self.achieved,
        }


def near_optimal_search(scenario: Scenario, paths: PathEnsemble, family,
                        eps_target: float, baseline: OptimizationReport | None = None,
                        basis: BasisSpec | None = None) -> SearchReport:
    """Score a finite control family against the policy-iteration value.

    eps_hat = best payoff - baseline y0; achieved when within eps_target up
    to noise.  The baseline policy iteration runs on demand when not
    supplied.
    """
    if baseline is None:
        baseline = policy_iteration(scenario, paths, basis=basis)
    rows = []
    best_idx, best_val, best_se = 0, np.inf, 0.0
    for i, c in enumerate(family):
        res = evaluate_payoff(scenario, c, paths)
        label = getattr(c, "label", f"control-{i}")
        rows.append((label, res.value, res.stderr))
        if res.value < best_val:
            best_idx, best_val, best_se = i, res.value, res.stderr
    return SearchReport(rows=tuple(rows), best_index=best_idx, best_value=best_val,
                        best_stderr=best_se, y0=baseline.y0,
                        y0_stderr=baseline.y0_stderr, eps_target=eps_target)


def ekeland_distance(a, b, paths: PathEnsemble) -> float:
    """Product-measure distance between two controls along the ensemble:
    the time mass (out of the horizon) on which their actions differ,
    averaged over particles.  A metric with values in [0, horizon]."""
    n = paths.grid.steps
    dt = paths.grid.dt
    total = 0
    for k in range(n):
        ua = a.actions(paths, k)
        ub = b.actions(paths, k)
        width = max(ua.shape[1], ub.shape[1])
        pa = np.zeros((paths.particles, width))
        pb = np.zeros((paths.particles, width))
        pa[:, :ua.shape[1]] = ua
        pb[:, :ub.shape[1]] = ub
        total += int(np.count_nonzero(np.linalg.norm(pa - pb, axis=1) > 0))
    return dt * total / paths.particles


def envelope_bsde(scenario: Scenario, paths: PathEnsemble, controls,
                  flows=None, basis: BasisSpec | None = None,
                  fixpoint_tol: float = 1e-3,
                  fixpoint_max_iter: int = 50) -> BsdeSolution:
    """Backward solve of the lower-envelope equation of a control family.

    Terminal and driver are the pointwise minima over the family, each
    member read together with its own matched flow:

        g*(x)     = min_i g(x_T, mu^i_T),
        H*(t,x,z) = min_i [h(t, x, mu^i_t, u_i) + z . sigma^{-1} f(t, x, mu^i_t, u_i)],

    so Y*_0 sits below every member's Y^u_0 up to Monte Carlo and regression
    noise.  The law argument moves with the candidate instead of staying
    frozen at one flow, which is what makes the value a lower bound even when
    costs or dynamics read the law.  Enlarging the family can only lower the
    value.  flows, when given, must be the members' matched flows
    (MeasureFlow or FixpointResult, ordered like controls); otherwise each
    member's fixed point is computed here.
    """
    if scenario.kind == "game":
        raise TypeError("envelope_bsde takes a single-controller scenario")
    controls = list(controls)
    if not controls:
        raise ValueError("envelope needs at least one control")
    if flows is None:
        flows = [fixpoint_measure_flow(scenario, c, paths, tol=fixpoint_tol,
                                       max_iter=fixpoint_max_iter)
                 for c in controls]
    flows = [f.flow if hasattr(f, "flow") else f for f in flows]
    if len(flows) != len(controls):
        raise ValueError("flows must pair up with controls")

    terminal = np.min([terminal_values(scenario, f) for f in flows], axis=0)
    names = tuple(dict.fromkeys((*scenario.running_cost.stat_names(),
                                 *scenario.drift.stat_names())))
    series = [{name: f.statistic_series(name) for name in names} for f in flows]
    times = paths.grid.times

    def driver_at(k: int, z: np.ndarray) -> np.ndarray:
        state, sup = paths.state(k), paths.sup(k)
        values = None
        for control, ser in zip(controls, series):
            row = {name: ser[name][k] for name in names}
            h = hamiltonian(scenario, times[k], state, sup, row, z[:, 0],
                            control.actions(paths, k))
            values = h if values is None else np.minimum(values, h)
        return values

    return solve_driver_bsde(paths, terminal, driver_at, basis)


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[dict, ...]
    y_star: float
    y_star_stderr: float
    passed: bool

    def to_dict(self) -> dict:
        return {"rows": list(self.rows), "y_star": self.y_star,
                "y_star_stderr": self.y_star_stderr, "passed": self.passed}


def verify_comparison(scenario: Scenario, paths: PathEnsemble, controls,
                      basis: BasisSpec | None = None) -> ComparisonReport:
    """Payoff identity and lower-bound comparison over a control family.

    For each control: |Y^u_0 - J(u)| within 3 combined stderr, and
    Y*_0 <= Y^u_0 + 3 combined stderr, where Y*_0 is the family's
    lower-envelope backward value.
    """
    controls = list(controls)
    scored = []
    for i, c in enumerate(controls):
        payoff = evaluate_payoff(scenario, c, paths)
        sol = solve_linear_bsde(scenario, c, payoff.flow, basis)
        scored.append((c, payoff, sol))
    env = envelope_bsde(scenario, paths, controls,
                        flows=[p.flow for _, p, _ in scored], basis=basis)
    rows = []
    ok = True
    for i, (c, payoff, sol) in enumerate(scored):
        gap = sol.y0 - payoff.value
        gap_tol = 3.0 * float(np.hypot(sol.y0_stderr, payoff.stderr))
        slack = sol.y0 - env.y0
        slack_tol = 3.0 * float(np.hypot(sol.y0_stderr, env.y0_stderr))
        row = {
            "label": getattr(c, "label", f"control-{i}"),
            "y_u0": sol.y0, "y_u0_stderr": sol.y0_stderr,
            "payoff": payoff.value, "payoff_stderr": payoff.stderr,
            "identity_gap": gap, "identity_tol": gap_tol,
            "identity_ok": bool(abs(gap) <= gap_tol),
            "slack": slack, "slack_tol": slack_tol,
            "slack_ok": bool(slack >= -slack_tol),
        }
        ok = ok and row["identity_ok"] and row["slack_ok"]
        rows.append(row)
    return ComparisonReport(rows=tuple(rows), y_star=env.y0,
                            y_star_stderr=env.y0_stderr, passed=ok)
