"""Backward SDEs by least-squares Monte Carlo on the reference ensemble.

The terminal condition and driver are rolled back step by step:

    Y_N = g,
    Z_k = E[(Y_{k+1} - E[Y_{k+1}|F_k]) dW_k | F_k] / dt   (regression),
    Y_k = E[Y_{k+1}|F_k] + driver(t_k, Z_k) dt,

with conditional expectations replaced by ridge-regularized projections on a
polynomial basis in (x_t, running sup |x|).  Centering the increment before
the Z regression removes the 1/dt variance blowup of the plain estimator
without changing the estimand (the projection of E[Y|F_k] dW vanishes).

The reported Y_0 stderr comes from the pathwise representation
Y_0 = E[g + sum_k driver dt - sum_k Z dW]: the Z increments act as a
martingale control variate, so the stderr is comparable to (and correlated
with) a direct reweighted payoff estimate on the same paths.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import PathEnsemble
from .girsanov import drift_evaluator
from .measure import MeasureFlow
from .scenario import GameScenario, Scenario


class RankDeficientError(np.linalg.LinAlgError):
    """Unregularized regression on a rank-deficient design."""


@dataclass(frozen=True)
class BasisSpec:
    """Regression basis: all monomials in (state coords, running sup) of total
    degree <= degree, optionally a tanh(x0 / tanh_scale) feature, ridge >= 0.

    The constant feature is always present.  The tanh scale is a fixed basis
    parameter rather than a data-driven standardization so that a synthesized
    feedback can rebuild identical features anywhere.
    """

    degree: int = 2
    tanh_scale: float | None = None
    ridge: float = 1e-8

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        if self.ridge < 0:
            raise ValueError("ridge must be >= 0")
        if self.tanh_scale is not None and self.tanh_scale <= 0:
            raise ValueError("tanh_scale must be positive")

    def width(self, dim: int) -> int:
        from math import comb
        q = comb(dim + 1 + self.degree, self.degree)
        return q + (1 if self.tanh_scale is not None else 0)


def build_features(coords: np.ndarray, sup: np.ndarray, spec: BasisSpec) -> np.ndarray:
    """Design matrix, shape (particles, width).

    coords has shape (particles, dim); sup is the running supremum column.
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    if coords.shape[0] == 1 and np.ndim(sup) == 1 and len(sup) > 1:
        coords = coords.T
    variables = [coords[:, j] for j in range(coords.shape[1])] + [np.asarray(sup, dtype=float)]
    m = variables[0].shape[0]
    cols = [np.ones(m)]
    for deg in range(1, spec.degree + 1):
        for combo in itertools.combinations_with_replacement(range(len(variables)), deg):
            col = np.ones(m)
            for idx in combo:
                col = col * variables[idx]
            cols.append(col)
    if spec.tanh_scale is not None:
        cols.append(np.tanh(variables[0] / spec.tanh_scale))
    return np.column_stack(cols)


def features_at(paths: PathEnsemble, t_index: int, spec: BasisSpec) -> np.ndarray:
    return build_features(paths.state(t_index), paths.sup(t_index), spec)


def regress_conditional(values: np.ndarray, features: np.ndarray,
                        ridge: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Least-squares projection of values on the feature columns.

    Returns (coefficients, fitted values, rms residual).  With ridge == 0 a
    rank-deficient design raises RankDeficientError telling the caller to set
    ridge > 0; with ridge > 0 the augmented system is always full rank.
    """
    values = np.asarray(values, dtype=float)
    features = np.asarray(features, dtype=float)
    m, q = features.shape
    if values.ndim == 1:
        values = values[:, None]
        squeeze = True
    else:
        squeeze = False
    if ridge == 0.0:
        coef, _, rank, _ = np.linalg.lstsq(features, values, rcond=None)
        if rank < q:
            raise RankDeficientError(
                f"design matrix has rank {rank} < {q}; set ridge > 0 to regularize")
    else:
        aug = np.vstack([features, np.sqrt(ridge) * np.eye(q)])
        rhs = np.vstack([values, np.zeros((q, values.shape[1]))])
        coef = np.linalg.lstsq(aug, rhs, rcond=None)[0]
    fitted = features @ coef
    resid = float(np.sqrt(np.mean((values - fitted) ** 2)))
    if squeeze:
        return coef[:, 0], fitted[:, 0], resid
    return coef, fitted, resid


@dataclass(frozen=True)
class BsdeSolution:
    """Backward solution along the ensemble.

    y has shape (particles, steps + 1) and matches the terminal values
    exactly in the last column; z has shape (particles, steps, dim).
    z_coefficients holds the per-step regression coefficients of Z so a
    feedback rule can re-evaluate z at states that are not ensemble points;
    z_gram_inv and z_resid_rms carry the matching (X'X + ridge I)^{-1} and
    residual scales so the pointwise sampling noise of that estimate is
    quantifiable wherever the feedback is questioned.
    """

    y: np.ndarray
    z: np.ndarray
    y0: float
    y0_stderr: float
    y_residuals: np.ndarray
    z_coefficients: np.ndarray
    z_gram_inv: np.ndarray
    z_resid_rms: np.ndarray
    basis: BasisSpec

    def z_stderr(self, paths: PathEnsemble, t_index: int) -> np.ndarray:
        """Prediction standard error of the regressed z at the ensemble's
        time-t_index states, shape (particles, dim): s_d sqrt(phi' G^{-1} phi)."""
        k = min(t_index, self.z_coefficients.shape[0] - 1)
        feats = features_at(paths, t_index, self.basis)
        lev = np.sqrt(np.maximum(np.einsum("mq,qr,mr->m", feats,
                                           self.z_gram_inv[k], feats), 0.0))
        return lev[:, None] * self.z_resid_rms[k][None, :]

    def to_dict(self) -> dict:
        return {
            "y0": self.y0,
            "y0_stderr": self.y0_stderr,
            "mean_abs_z": float(np.mean(np.abs(self.z))),
            "max_y_residual": float(np.max(self.y_residuals)) if len(self.y_residuals) else 0.0,
            "basis_degree": self.basis.degree,
            "ridge": self.basis.ridge,
        }


def _backward(paths: PathEnsemble, terminal: np.ndarray, driver_at,
              basis: BasisSpec) -> BsdeSolution:
    dw = paths.driver.increments
    m, n, d = dw.shape
    dt = paths.grid.dt
    q = basis.width(paths.dim)
    y = np.empty((m, n + 1))
    z = np.empty((m, n, d))
    z_coef = np.empty((n, q, d))
    z_ginv = np.empty((n, q, q))
    z_rms = np.empty((n, d))
    resid = np.empty(n)
    y[:, n] = np.asarray(terminal, dtype=float)
    value_paths = y[:, n].copy()  # pathwise Y_0 representation for the stderr
    for k in range(n - 1, -1, -1):
        feats = features_at(paths, k, basis)
        _, fitted, r = regress_conditional(y[:, k + 1], feats, basis.ridge)
        resid[k] = r
        centered = y[:, k + 1] - fitted
        rhs = centered[:, None] * dw[:, k, :] / dt
        coef, zk, _ = regress_conditional(rhs, feats, basis.ridge)
        z[:, k, :] = zk
        z_coef[k] = coef
        z_ginv[k] = np.linalg.inv(feats.T @ feats + basis.ridge * np.eye(q))
        z_rms[k] = np.sqrt(np.mean((rhs - zk) ** 2, axis=0))
        hvals = np.asarray(driver_at(k, zk), dtype=float)
        if not np.all(np.isfinite(hvals)):
            raise FloatingPointError(f"non-finite driver value at t_index {k}")
        y[:, k] = fitted + hvals * dt
        value_paths += hvals * dt - np.sum(zk * dw[:, k, :], axis=1)
    y0 = float(np.mean(y[:, 0]))
    y0_se = float(np.std(value_paths) / np.sqrt(m))
    return BsdeSolution(y=y, z=z, y0=y0, y0_stderr=y0_se, y_residuals=resid,
                        z_coefficients=z_coef, z_gram_inv=z_ginv,
                        z_resid_rms=z_rms, basis=basis)


def solve_driver_bsde(paths: PathEnsemble, terminal: np.ndarray, driver_at,
                      basis: BasisSpec | None = None) -> BsdeSolution:
    """Backward solve with an explicit driver callable (t_index, z) -> values.

    z is passed with shape (particles, dim); the driver must return one value
    per particle and is evaluated once per step, after the Z regression.
    """
    if basis is None:
        basis = BasisSpec()
    terminal = np.asarray(terminal, dtype=float)
    if terminal.shape != (paths.particles,):
        raise ValueError("terminal values must be one scalar per particle")
    return _backward(paths, terminal, driver_at, basis)


def linear_driver(scenario: Scenario | GameScenario, flow: MeasureFlow, control):
    """Driver (t_index, z) -> h + z . sigma^{-1} f for a fixed control (or pair)."""
    paths = flow.paths
    drift_at = drift_evaluator(scenario, flow, control)
    names = tuple(dict.fromkeys((*scenario.running_cost.stat_names(),
                                 *scenario.drift.stat_names())))
    series = {name: flow.statistic_series(name) for name in names}
    times = paths.grid.times

    def row(k: int) -> dict[str, float]:
        return {name: series[name][k] for name in names}

    if scenario.kind == "game":
        def driver_at(k: int, z: np.ndarray) -> np.ndarray:
            if hasattr(control, "actions_pair"):
                u, v = control.actions_pair(paths, k)
            else:
                u, v = control[0].actions(paths, k), control[1].actions(paths, k)
            h = scenario.running_cost.evaluate(paths.values[:, k, 0], row(k), u[:, 0], v[:, 0])
            theta = scenario.sigma.inv_apply(times[k], paths.state(k), paths.sup(k), drift_at(k))
            return h + np.sum(z * theta, axis=1)
        return driver_at

    def driver_at(k: int, z: np.ndarray) -> np.ndarray:
        u = control.actions(paths, k)
        h = scenario.running_cost.evaluate(paths.values[:, k, 0], row(k), u[:, 0])
        theta = scenario.sigma.inv_apply(times[k], paths.state(k), paths.sup(k), drift_at(k))
        return h + np.sum(z * theta, axis=1)

    return driver_at


def terminal_values(scenario: Scenario | GameScenario, flow: MeasureFlow) -> np.ndarray:
    """g(x_T, mu_T) per particle, with the law argument read off the flow."""
    paths = flow.paths
    n = paths.grid.steps
    names = scenario.terminal_cost.stat_names()
    row = {name: float(flow.statistic_series(name)[n]) for name in names}
    return scenario.terminal_cost.evaluate(paths.state(n), row, scenario.statistic_map)


def solve_linear_bsde(scenario: Scenario | GameScenario, control, flow: MeasureFlow,
                      basis: BasisSpec | None = None) -> BsdeSolution:
    """Backward solve of the payoff equation for a fixed control.

    The measure flow supplies every law argument (drift statistics, cost
    statistics, terminal marginal).  With the flow matched to the control this
    yields Y_0 equal to the reweighted payoff J(control) up to Monte Carlo
    and regression error.
    """
    if basis is None:
        basis = BasisSpec()
    terminal = terminal_values(scenario, flow)
    return _backward(flow.paths, terminal, linear_driver(scenario, flow, control), basis)
