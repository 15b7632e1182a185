"""Reference ensemble simulation.

Everything downstream works on one driftless reference ensemble

    x[i, k+1] = x[i, k] + sigma(t_k, path_i up to k) dW[i, k],   x[i, 0] = xi,

simulated once per (scenario, particles, steps, seed).  Controlled laws are
obtained later by reweighting this ensemble, never by resimulating, so a
single stored Brownian increment array serves every control and both game
players.  All randomness flows through one seeded generator; reductions are
plain numpy sums over fixed axis order, which keeps runs bit-reproducible for
a given numpy version.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scenario import DiffusionSpec, Scenario, GameScenario


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < ... < t_N = horizon."""

    horizon: float
    steps: int

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.steps < 1:
            raise ValueError("need at least one step")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)


def make_time_grid(horizon: float, steps: int) -> TimeGrid:
    return TimeGrid(horizon=float(horizon), steps=int(steps))


@dataclass(frozen=True)
class BrownianEnsemble:
    """Increments dW with shape (particles, steps, dim), reproducible from seed."""

    grid: TimeGrid
    increments: np.ndarray
    seed: int | None = None

    @property
    def particles(self) -> int:
        return self.increments.shape[0]

    @property
    def dim(self) -> int:
        return self.increments.shape[2]


def sample_brownian(grid: TimeGrid, particles: int, dim: int, seed: int) -> BrownianEnsemble:
    """Draw iid N(0, dt) increments from a PCG64 stream."""
    if particles < 1 or dim < 1:
        raise ValueError("particles and dim must be positive")
    rng = np.random.default_rng(seed)
    dw = rng.standard_normal((particles, grid.steps, dim)) * np.sqrt(grid.dt)
    return BrownianEnsemble(grid=grid, increments=dw, seed=seed)


@dataclass(frozen=True)
class PathEnsemble:
    """Simulated reference paths.

    values has shape (particles, steps + 1, dim).  running_sup[i, k] is the
    running supremum of |x_i| (Euclidean norm) up to t_k; it is the one path
    functional the coefficient registries may read besides the current state.
    """

    grid: TimeGrid
    values: np.ndarray
    initial: np.ndarray
    running_sup: np.ndarray
    driver: BrownianEnsemble = field(repr=False, compare=False, default=None)

    @property
    def particles(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    def state(self, t_index: int) -> np.ndarray:
        return self.values[:, t_index, :]

    def sup(self, t_index: int) -> np.ndarray:
        return self.running_sup[:, t_index]


def simulate_reference(grid: TimeGrid, brownian: BrownianEnsemble,
                       sigma: DiffusionSpec, initial) -> PathEnsemble:
    """Euler scheme for the driftless reference dynamics.

    sigma is evaluated at the left endpoint of each interval.  A singular
    sigma value at any evaluation point aborts (SingularDiffusionError); the
    density process later needs sigma^{-1} along every path.
    """
    if brownian.grid != grid:
        raise ValueError("brownian increments were sampled on a different grid")
    m, n, d = brownian.increments.shape
    xi = np.broadcast_to(np.asarray(initial, dtype=float).reshape(-1), (d,))
    x = np.empty((m, n + 1, d))
    sup = np.empty((m, n + 1))
    x[:, 0, :] = xi
    sup[:, 0] = np.linalg.norm(xi)
    times = grid.times
    for k in range(n):
        step = sigma.apply(times[k], x[:, k, :], sup[:, k], brownian.increments[:, k, :])
        x[:, k + 1, :] = x[:, k, :] + step
        sup[:, k + 1] = np.maximum(sup[:, k], np.linalg.norm(x[:, k + 1, :], axis=1))
    return PathEnsemble(grid=grid, values=x, initial=xi.copy(), running_sup=sup,
                        driver=brownian)


def simulate_for_scenario(scenario: Scenario | GameScenario, particles: int,
                          steps: int, seed: int) -> PathEnsemble:
    """Grid + increments + reference paths in one call, horizon and initial
    state taken from the scenario."""
    grid = make_time_grid(scenario.horizon, steps)
    brownian = sample_brownian(grid, particles, scenario.dim, seed)
    return simulate_reference(grid, brownian, scenario.sigma, scenario.initial_array)


def path_statistic(paths: PathEnsemble, t_index: int, kind: str) -> np.ndarray:
    """Per-particle path functional at a grid time.

    kind "current_value" returns the state, shape (particles, dim);
    kind "running_sup" returns the running supremum of |x|, shape (particles,).
    """
    n = paths.grid.steps
    if not 0 <= t_index <= n:
        raise IndexError(f"t_index {t_index} outside 0..{n}")
    if kind == "current_value":
        return paths.values[:, t_index, :]
    if kind == "running_sup":
        return paths.running_sup[:, t_index]
    raise ValueError(f"unknown path statistic {kind!r}")


def ensemble_moments(paths: PathEnsemble, orders=(1, 2, 4)) -> dict[int, float]:
    """Empirical E[|x_T|^p] at the horizon, a cheap stability diagnostic."""
    norms = np.linalg.norm(paths.values[:, -1, :], axis=1)
    return {int(p): float(np.mean(norms ** p)) for p in orders}
