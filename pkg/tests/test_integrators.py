"""Integrator tests: frozen one-step examples, coupling, restart, errors."""

import math

import numpy as np
import pytest

from gsdde.model import (
    CoefficientSystem,
    DelayGrid,
    GParams,
    InitialSegment,
    LinearSystem,
)
from gsdde.scenarios import constant_control, sample_increments
from gsdde.integrators import (
    IntegrationError,
    em_sdde,
    em_sde,
    flow_restart,
    integrate_paths,
    reference_solution,
)


def scalar_system(a_f=0.0, b_f=0.0, c_f=0.0, a_g=0.0, b_g=0.0, c_g=0.0,
                  a_h=0.0, b_h=0.0, c_h=0.0):
    return LinearSystem.from_matrices(
        a_f=a_f, b_f=b_f, c_f=c_f, a_g=a_g, b_g=b_g, c_g=c_g,
        a_h=a_h, b_h=b_h, c_h=c_h,
    )


def scenario_for(grid, sigma=1.0, key=(0, 0, 0)):
    return sample_increments(constant_control(sigma, grid.n_steps), grid, key)


class TestFrozenSteps:
    def test_pure_drift_integrates_time(self):
        # dx = 1 dt: X_n = n * delta exactly in binary arithmetic.
        sys = scalar_system(c_f=1.0)
        grid = DelayGrid(0.5, 5, 1.0)  # delta = 0.1
        traj = em_sde(sys, [0.0], grid, scenario_for(grid))
        assert traj.state_at_step(1)[0] == pytest.approx(0.1, abs=0)
        assert traj.state_at_step(10)[0] == pytest.approx(1.0, rel=1e-15)

    def test_pure_qv_drift(self):
        # dx = 1 d<B>: X_1 = sigma^2 delta = 4 * 0.25 = 1 exactly.
        sys = scalar_system(c_g=1.0)
        grid = DelayGrid(0.25, 1, 1.0)
        traj = em_sde(sys, [0.0], grid, scenario_for(grid, sigma=2.0))
        assert traj.state_at_step(1)[0] == 1.0

    def test_linear_decay(self):
        # dx = -x dt: X_n = (1 - delta)^n X_0 = 0.9^n exactly.
        sys = scalar_system(a_f=-1.0)
        grid = DelayGrid(0.5, 5, 1.0)
        traj = em_sde(sys, [1.0], grid, scenario_for(grid))
        for n in range(11):
            assert traj.state_at_step(n)[0] == pytest.approx(0.9**n, rel=1e-14)

    def test_pure_noise_sums_increments(self):
        # dx = 1 dB: X_N = sum of dB exactly (compensated against fsum).
        sys = scalar_system(c_h=1.0)
        grid = DelayGrid(0.5, 4, 2.0)
        scen = scenario_for(grid)
        traj = em_sde(sys, [0.0], grid, scen)
        total = math.fsum(scen.db.tolist())
        assert traj.state_at_step(grid.n_steps)[0] == pytest.approx(total, rel=1e-12)

    def test_delay_term_reads_lagged_state(self):
        # dx = y dt with segment ramp: first step uses xi(-tau).
        sys = scalar_system(b_f=1.0)
        grid = DelayGrid(0.5, 2, 0.5)
        xi = InitialSegment.ramp([0.0], [1.0], 0.5, 2)
        traj = em_sdde(sys, xi, grid, scenario_for(grid))
        # X_1 = xi(0) + xi(-tau) * delta = 1 + 0 * 0.25 = 1
        assert traj.state_at_step(1)[0] == 1.0
        # X_2 = X_1 + xi(-tau + delta) * delta = 1 + 0.5 * 0.25
        assert traj.state_at_step(2)[0] == 1.125


class TestDelayFreeEquivalence:
    def test_sdde_of_nondelayed_system_matches_sde(self):
        sys = scalar_system(a_f=-1.0, a_h=0.5)
        grid = DelayGrid(0.5, 4, 2.0)
        scen = scenario_for(grid)
        xi = InitialSegment.constant([1.0], 0.5, 4)
        delay = em_sdde(sys, xi, grid, scen)
        plain = em_sde(sys, [1.0], grid, scen)
        for n in range(grid.n_steps + 1):
            np.testing.assert_array_equal(
                delay.state_at_step(n), plain.state_at_step(n)
            )


class TestLinearity:
    def test_superposition_for_linear_zero_offset(self):
        sys = scalar_system(a_f=-0.5, b_f=0.25, a_h=0.3)
        grid = DelayGrid(0.5, 4, 2.0)
        scen = scenario_for(grid)
        one = em_sdde(sys, InitialSegment.constant([1.0], 0.5, 4), grid, scen)
        three = em_sdde(sys, InitialSegment.constant([3.0], 0.5, 4), grid, scen)
        np.testing.assert_allclose(3.0 * one.states, three.states, rtol=1e-10)


class TestBatchCore:
    def test_batch_matches_single(self):
        sys = scalar_system(a_f=-1.0, b_f=0.2, a_h=0.5)
        grid = DelayGrid(0.5, 4, 1.0)
        xi = InitialSegment.constant([1.0], 0.5, 4)
        scens = [scenario_for(grid, key=(0, 0, i)) for i in range(3)]
        db = np.stack([s.db for s in scens])
        dqv = np.stack([s.dqv for s in scens])
        init = np.repeat(xi.values[None, :, :], 3, axis=0)[0]
        batch = integrate_paths(sys, xi.values, grid.delta, db, dqv, m_lag=grid.m)
        for i, scen in enumerate(scens):
            single = em_sdde(sys, xi, grid, scen)
            np.testing.assert_array_equal(batch[i], single.states)

    def test_dimension_broadcast(self):
        sys = LinearSystem.from_matrices(
            a_f=[[-1.0, 0.0], [0.0, -2.0]], a_h=0.1, dimension=2
        )
        grid = DelayGrid(0.5, 2, 0.5)
        scen = scenario_for(grid)
        traj = em_sde(sys, [1.0, 1.0], grid, scen)
        assert traj.states.shape == (grid.n_steps + 1, 2)


class TestExplosion:
    def test_explosion_raises_with_location(self):
        sys = scalar_system(a_f=5.0, c_f=10.0)  # strongly expanding drift
        grid = DelayGrid(0.5, 1, 50.0)
        scen = scenario_for(grid)
        with pytest.raises(IntegrationError) as err:
            em_sde(sys, [1.0], grid, scen, explosion_cap=1e6)
        assert err.value.step >= 0
        assert "1e+06" in str(err.value) or "exceeded" in str(err.value)

    def test_cap_not_triggered_for_stable(self):
        sys = scalar_system(a_f=-1.0)
        grid = DelayGrid(0.5, 4, 2.0)
        em_sde(sys, [1.0], grid, scenario_for(grid), explosion_cap=10.0)


class TestReferenceSolution:
    def test_factor_one_equals_em(self):
        sys = scalar_system(a_f=-1.0, b_f=0.2, a_h=0.5)
        grid = DelayGrid(0.5, 4, 2.0)
        scen = scenario_for(grid)
        xi = InitialSegment.constant([1.0], 0.5, 4)
        ref = reference_solution(sys, xi, grid, scen, refine_factor=1)
        em = em_sdde(sys, xi, grid, scen)
        np.testing.assert_array_equal(ref.states, em.states)

    def test_reference_converges_to_em_limit(self):
        # For dx = -x dt the reference approaches e^{-t}; EM stays at
        # (1 - delta)^n; both must land near the exact flow.
        sys = scalar_system(a_f=-1.0)
        grid = DelayGrid(0.5, 2, 1.0)
        scen = scenario_for(grid)
        ref = reference_solution(sys, [1.0], grid, scen, refine_factor=64)
        exact = math.exp(-1.0)
        assert ref.state_at_step(grid.n_steps)[0] == pytest.approx(exact, rel=5e-3)

    def test_grid_restriction_shape(self):
        sys = scalar_system(a_f=-1.0)
        grid = DelayGrid(0.5, 4, 2.0)
        xi = InitialSegment.constant([1.0], 0.5, 4)
        ref = reference_solution(sys, xi, grid, scenario_for(grid), refine_factor=8)
        em = em_sdde(sys, xi, grid, scenario_for(grid))
        assert ref.states.shape == em.states.shape
        np.testing.assert_array_equal(ref.times, em.times)


class TestFlowRestart:
    def test_delay_restart_continues_bitwise(self):
        sys = scalar_system(a_f=-1.0, b_f=0.25, a_h=0.4)
        grid = DelayGrid(0.5, 4, 2.0)
        scen = scenario_for(grid)
        xi = InitialSegment.constant([1.0], 0.5, 4)
        full = em_sdde(sys, xi, grid, scen)

        s = 1.0
        n_s = round(s / grid.delta)
        seg = flow_restart(full, s)
        rest_grid = DelayGrid(0.5, 4, grid.horizon - s)
        rest = em_sdde(sys, seg, rest_grid, scen.tail(n_s))
        for k in range(rest_grid.n_steps + 1):
            np.testing.assert_array_equal(
                rest.state_at_step(k), full.state_at_step(n_s + k)
            )

    def test_plain_restart_continues_bitwise(self):
        sys = scalar_system(a_f=-1.0, a_h=0.4)
        grid = DelayGrid(0.5, 4, 2.0)
        scen = scenario_for(grid)
        full = em_sde(sys, [1.0], grid, scen)
        s = 0.5
        n_s = round(s / grid.delta)
        y_s = flow_restart(full, s)
        rest = em_sde(sys, y_s, DelayGrid(0.5, 4, grid.horizon - s), scen.tail(n_s))
        for k in range(rest.states.shape[0]):
            np.testing.assert_array_equal(
                rest.state_at_step(k), full.state_at_step(n_s + k)
            )

    def test_restart_before_tau_rejected_for_delay(self):
        sys = scalar_system(a_f=-1.0)
        grid = DelayGrid(0.5, 4, 2.0)
        xi = InitialSegment.constant([1.0], 0.5, 4)
        traj = em_sdde(sys, xi, grid, scenario_for(grid))
        with pytest.raises(ValueError):
            flow_restart(traj, 0.25)

    def test_off_grid_time_rejected(self):
        sys = scalar_system(a_f=-1.0)
        grid = DelayGrid(0.5, 4, 2.0)
        traj = em_sde(sys, [1.0], grid, scenario_for(grid))
        with pytest.raises(ValueError):
            flow_restart(traj, 0.3)
