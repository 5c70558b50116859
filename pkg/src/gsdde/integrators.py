"""Euler-Maruyama schemes for the delay equation and its auxiliary equation.

The discrete delay scheme advances

    X_{n+1} = X_n + f(X_n, X_{n-m}) delta
                  + g(X_n, X_{n-m}) dQV_n
                  + h(X_n, X_{n-m}) dB_n,

with X_n = xi(n delta) for -m <= n <= 0; the auxiliary (delay-free) scheme
feeds the current state into both coefficient arguments.  The continuous
extensions of both schemes agree with the discrete iterates at grid points,
so all moments are evaluated on the grid.

Reference ("exact") solutions are produced by running the same scheme on a
bridge-refined copy of the scenario and restricting to the coarse grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CoefficientSystem, DelayGrid, InitialSegment
from .scenarios import NoiseScenario, VolatilityControl, refine

__all__ = [
    "Trajectory",
    "IntegrationError",
    "EXPLOSION_CAP",
    "integrate_paths",
    "em_sdde",
    "em_sde",
    "reference_solution",
    "flow_restart",
]

# Default magnitude cap: a state beyond this aborts the path with a
# diagnostic instead of propagating infinities.
EXPLOSION_CAP = 1e12

TRAJECTORY_KINDS = ("SDDE-EM", "SDE-EM", "SDDE-reference", "SDE-reference")


class IntegrationError(RuntimeError):
    """A path left the finite range; names the step and scenario."""

    def __init__(self, message: str, step: int, scenario_id: int, path_id: int):
        super().__init__(message)
        self.step = step
        self.scenario_id = scenario_id
        self.path_id = path_id


@dataclass(frozen=True)
class Trajectory:
    """States on the time grid, including the initial segment for delay runs.

    For delay kinds, index i corresponds to grid step n = i - m (the first
    m + 1 rows are the initial segment); for non-delay kinds m == 0 and
    index i is grid step i.
    """

    times: np.ndarray
    states: np.ndarray
    kind: str
    scenario_id: int
    path_id: int
    m: int

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=float)
        if self.kind not in TRAJECTORY_KINDS:
            raise ValueError(f"kind must be one of {TRAJECTORY_KINDS}")
        if states.ndim != 2 or times.shape != (states.shape[0],):
            raise ValueError("times and states must align, states shaped (points, n)")
        times.setflags(write=False)
        states.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def delta(self) -> float:
        return float(self.times[1] - self.times[0])

    def state_at_step(self, n: int) -> np.ndarray:
        """State at grid step n (n may be negative down to -m)."""
        return self.states[n + self.m]


def integrate_paths(
    sys: CoefficientSystem,
    init: np.ndarray,
    delta: float,
    db: np.ndarray,
    dqv: np.ndarray,
    m_lag: int = 0,
    explosion_cap: float = EXPLOSION_CAP,
    scenario_id: int = -1,
) -> np.ndarray:
    """Advance a batch of paths under shared initial data.

    This is the shared stepping core: the delay scheme with lag ``m_lag``
    steps, which degenerates to the delay-free scheme when ``m_lag == 0``
    (the lagged index then equals the current one, so both coefficient
    arguments receive the current state).

    Parameters
    ----------
    sys : CoefficientSystem
    init : ndarray, shape (m_lag + 1, n)
        Initial block: segment values (delay) or a single row (no delay).
    delta : float
        Step size.
    db, dqv : ndarray, shape (R, N)
        Per-path Brownian and quadratic-variation increments.
    m_lag : int
        Delay in steps (0 for the auxiliary scheme).
    explosion_cap : float
        Magnitude bound; exceeding it aborts with a diagnostic.
    scenario_id : int
        Used in diagnostics only.

    Returns
    -------
    ndarray, shape (R, m_lag + N + 1, n)
        All states; rows 0..m_lag of axis 1 repeat the initial block.

    Raises
    ------
    IntegrationError
        On a non-finite or capped state, naming step, scenario, and path.
    """
    init = np.atleast_2d(np.asarray(init, dtype=float))
    if init.shape != (m_lag + 1, sys.dimension):
        raise ValueError(
            f"init must have shape ({m_lag + 1}, {sys.dimension}), got {init.shape}"
        )
    db = np.asarray(db, dtype=float)
    dqv = np.asarray(dqv, dtype=float)
    if db.ndim != 2 or db.shape != dqv.shape:
        raise ValueError("db and dqv must share shape (paths, steps)")
    n_paths, n_steps = db.shape
    states = np.empty((n_paths, m_lag + n_steps + 1, sys.dimension))
    states[:, : m_lag + 1, :] = init
    for k in range(n_steps):
        cur = states[:, m_lag + k, :]
        lag = states[:, k, :]
        nxt = (
            cur
            + sys.f(cur, lag) * delta
            + sys.g(cur, lag) * dqv[:, k, None]
            + sys.h(cur, lag) * db[:, k, None]
        )
        bad = ~np.all(np.isfinite(nxt) & (np.abs(nxt) <= explosion_cap), axis=-1)
        if np.any(bad):
            path = int(np.argmax(bad))
            raise IntegrationError(
                f"state exceeded cap {explosion_cap:g} or became non-finite at "
                f"step {k + 1} (scenario {scenario_id}, path {path})",
                step=k + 1,
                scenario_id=scenario_id,
                path_id=path,
            )
        states[:, m_lag + k + 1, :] = nxt
    return states


def _check_scenario(grid: DelayGrid, scenario: NoiseScenario) -> None:
    if scenario.steps < grid.n_steps:
        raise ValueError(
            f"scenario provides {scenario.steps} steps, grid needs {grid.n_steps}"
        )
    if abs(scenario.delta - grid.delta) > 1e-12 * grid.delta:
        raise ValueError(
            f"scenario step {scenario.delta} does not match grid step {grid.delta}"
        )


def em_sdde(
    sys: CoefficientSystem,
    xi: InitialSegment,
    grid: DelayGrid,
    scenario: NoiseScenario,
    explosion_cap: float = EXPLOSION_CAP,
) -> Trajectory:
    """Run the discrete delay scheme for one scenario path.

    Grid-point values of the continuous scheme extension coincide with the
    discrete iterates, so the returned grid samples serve both.
    """
    if xi.m != grid.m:
        raise ValueError(f"segment has {xi.m} steps, grid delay spans {grid.m}")
    if abs(xi.tau - grid.tau) > 1e-12 * grid.tau:
        raise ValueError("segment and grid disagree on tau")
    if xi.dimension != sys.dimension:
        raise ValueError("segment dimension does not match the system")
    _check_scenario(grid, scenario)
    n = grid.n_steps
    states = integrate_paths(
        sys,
        xi.values,
        grid.delta,
        scenario.db[None, :n],
        scenario.dqv[None, :n],
        m_lag=grid.m,
        explosion_cap=explosion_cap,
        scenario_id=scenario.rng_key[1],
    )
    return Trajectory(
        times=grid.times(include_segment=True),
        states=states[0],
        kind="SDDE-EM",
        scenario_id=scenario.rng_key[1],
        path_id=scenario.rng_key[2],
        m=grid.m,
    )


def em_sde(
    sys: CoefficientSystem,
    y0: np.ndarray,
    grid: DelayGrid,
    scenario: NoiseScenario,
    explosion_cap: float = EXPLOSION_CAP,
) -> Trajectory:
    """Run the auxiliary (delay-free) scheme for one scenario path.

    Both coefficient arguments receive the current state; by convention the
    initial value matches the delay problem's segment endpoint xi(0).
    """
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    if y0.shape != (sys.dimension,):
        raise ValueError(f"y0 must have shape ({sys.dimension},), got {y0.shape}")
    _check_scenario(grid, scenario)
    n = grid.n_steps
    states = integrate_paths(
        sys,
        y0[None, :],
        grid.delta,
        scenario.db[None, :n],
        scenario.dqv[None, :n],
        m_lag=0,
        explosion_cap=explosion_cap,
        scenario_id=scenario.rng_key[1],
    )
    return Trajectory(
        times=grid.times(),
        states=states[0],
        kind="SDE-EM",
        scenario_id=scenario.rng_key[1],
        path_id=scenario.rng_key[2],
        m=0,
    )


def reference_solution(
    sys: CoefficientSystem,
    init,
    grid: DelayGrid,
    scenario: NoiseScenario,
    refine_factor: int = 8,
    explosion_cap: float = EXPLOSION_CAP,
) -> Trajectory:
    """Fine-step proxy for the exact solution, restricted to the coarse grid.

    Runs the same scheme on a bridge-refined copy of the scenario (factor
    ``refine_factor`` substeps per step; >= 4 recommended) and keeps every
    ``refine_factor``-th state.  Because refinement preserves the coarse
    increment sums, the result is coupled to the coarse scheme pathwise.

    Parameters
    ----------
    init : InitialSegment or ndarray
        Segment for the delay equation, point value for the auxiliary one.
    """
    r = int(refine_factor)
    if r < 1:
        raise ValueError("refine_factor must be >= 1")
    _check_scenario(grid, scenario)
    n = grid.n_steps
    if scenario.steps > n:
        scenario = NoiseScenario(
            VolatilityControl(scenario.control.sigmas[:n], scenario.control.kind),
            scenario.db[:n],
            scenario.dqv[:n],
            scenario.delta,
            scenario.rng_key,
        )
    fine = refine(scenario, r)
    if isinstance(init, InitialSegment):
        fine_m = grid.m * r
        fine_delta = grid.delta / r
        theta = (np.arange(fine_m + 1) - fine_m) * fine_delta
        fine_init = np.stack([init.at(t) for t in theta])
        states = integrate_paths(
            sys,
            fine_init,
            fine_delta,
            fine.db[None, :],
            fine.dqv[None, :],
            m_lag=fine_m,
            explosion_cap=explosion_cap,
            scenario_id=scenario.rng_key[1],
        )
        return Trajectory(
            times=grid.times(include_segment=True),
            states=states[0, ::r],
            kind="SDDE-reference",
            scenario_id=scenario.rng_key[1],
            path_id=scenario.rng_key[2],
            m=grid.m,
        )
    y0 = np.atleast_1d(np.asarray(init, dtype=float))
    states = integrate_paths(
        sys,
        y0[None, :],
        grid.delta / r,
        fine.db[None, :],
        fine.dqv[None, :],
        m_lag=0,
        explosion_cap=explosion_cap,
        scenario_id=scenario.rng_key[1],
    )
    return Trajectory(
        times=grid.times(),
        states=states[0, ::r],
        kind="SDE-reference",
        scenario_id=scenario.rng_key[1],
        path_id=scenario.rng_key[2],
        m=0,
    )


def flow_restart(traj: Trajectory, s: float):
    """Extract restart data at grid time s.

    For delay trajectories (s >= tau required) this is the segment
    {traj(s + theta) : theta in [-tau, 0]} as an :class:`InitialSegment`;
    for non-delay trajectories it is the state vector at s.  Integration
    restarted from the result under the same scenario tail reproduces the
    original trajectory bitwise, because the stepping arithmetic is
    identical.

    Raises
    ------
    ValueError
        If s is not a grid time, or s < tau for a delay trajectory.
    """
    delta = traj.delta
    n_s = round(s / delta)
    if abs(n_s * delta - s) > 1e-9 * max(1.0, abs(s)) or n_s < 0:
        raise ValueError(f"s={s} is not a grid time (step {delta})")
    if traj.m > 0:
        if n_s < traj.m:
            raise ValueError(
                f"delay restart needs s >= tau ({traj.m * delta}), got {s}"
            )
        i = n_s + traj.m
        if i >= traj.states.shape[0]:
            raise ValueError(f"s={s} is beyond the trajectory horizon")
        return InitialSegment(
            traj.states[i - traj.m : i + 1].copy(), traj.m * delta
        )
    if n_s >= traj.states.shape[0]:
        raise ValueError(f"s={s} is beyond the trajectory horizon")
    return traj.states[n_s].copy()
