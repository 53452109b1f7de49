import math
from dataclasses import replace

import numpy as np
import pytest
import scipy.linalg

from flatplan.dynsim import (
    SimConfig,
    free_mode_frequency,
    planned_vs_simulated,
    simulate,
)
from flatplan.errors import SimulationInstabilityError
from flatplan.flatmodel import TABLE_I, JointState, assemble_matrices, joint_state_from_flat
from flatplan.scenarios import scenario_config, run_scenario, torque_profile
from flatplan.varplanner import STRATEGIES, StrategySpec, plan_motion

UNDAMPED = replace(TABLE_I, damping=0.0)
SHORT = SimConfig(dt=1e-4, t_free=0.5)


def zero(t):
    return np.zeros_like(t)


def test_equilibrium_stays_at_rest():
    traj = simulate(TABLE_I, zero, JointState(), (0.0, 1.0), SHORT)
    for arr in (traj.q1, traj.q2, traj.q1_dot, traj.q2_dot, traj.tau1):
        assert not arr.any()
    assert traj.times.size == 15001
    assert traj.end_index == 10000
    assert traj.t_end == pytest.approx(1.0)


def test_free_oscillation_matches_modal_solution():
    m = assemble_matrices(UNDAMPED)
    w2 = scipy.linalg.eigh(m.stiffness, m.mass, eigvals_only=True)
    omega = math.sqrt(max(w2))
    assert omega == pytest.approx(9.79, abs=5e-3)
    assert free_mode_frequency(UNDAMPED) == pytest.approx(omega, rel=1e-12)
    q20 = 0.05
    traj = simulate(UNDAMPED, zero, JointState(q2=q20), (0.0, 1.0), SHORT)
    # the rigid mode has no q2 component, so q2 oscillates purely at omega
    np.testing.assert_allclose(traj.q2, q20 * np.cos(omega * traj.times), atol=1e-10)


def test_first_sample_is_initial_state():
    init = JointState(0.1, -0.02, 0.3, 0.0)
    traj = simulate(TABLE_I, zero, init, (0.0, 0.5), SHORT)
    assert traj.state(0) == init


def test_torque_zero_after_motion_and_scalar_profile():
    calls = []

    def scalar_tau(t):
        calls.append(t)
        return 1e-3 * math.sin(t)

    traj = simulate(TABLE_I, scalar_tau, JointState(), (0.0, 0.2), SimConfig(dt=1e-3, t_free=0.1))
    assert np.all(traj.tau1[traj.end_index + 1:] == 0)
    assert traj.tau1[traj.end_index] == pytest.approx(1e-3 * math.sin(0.2))
    assert len(calls) > 0


def test_energy_conserved_without_damping():
    m = assemble_matrices(UNDAMPED)
    init = JointState(0.2, 0.05, 1.0, -0.5)
    traj = simulate(UNDAMPED, zero, init, (0.0, 1.0), SimConfig(dt=1e-4, t_free=1.0))
    v = np.stack([traj.q1_dot, traj.q2_dot])
    energy = 0.5 * np.einsum("it,ij,jt->t", v, m.mass, v) + 0.5 * UNDAMPED.stiffness * traj.q2**2
    drift = np.abs(energy - energy[0]).max() / energy[0]
    duration = traj.times[-1] - traj.times[0]
    assert drift / duration < 1e-9


def test_linearity_in_torque():
    def tau(t):
        return 2e-3 * np.sin(7 * t) * (t <= 1)

    a = simulate(TABLE_I, tau, JointState(), (0.0, 1.0), SHORT)
    b = simulate(TABLE_I, lambda t: 2 * tau(t), JointState(), (0.0, 1.0), SHORT)
    for name in ("q1", "q2", "q1_dot", "q2_dot"):
        np.testing.assert_allclose(getattr(b, name), 2 * getattr(a, name), rtol=1e-12, atol=1e-18)


def test_halving_dt_converges():
    cfg = scenario_config(2, "polynomial")
    law = plan_motion(cfg.strategy, cfg.robot, _bounds())
    tau = torque_profile(law, cfg.robot)
    a = simulate(cfg.robot, tau, JointState(), (0.0, 1.0), SimConfig(dt=1e-4, t_free=0))
    b = simulate(cfg.robot, tau, JointState(), (0.0, 1.0), SimConfig(dt=5e-5, t_free=0))
    assert abs(a.q2[a.end_index] - b.q2[b.end_index]) < 1e-8


@pytest.mark.parametrize("kind", STRATEGIES)
def test_undamped_plant_tracks_plan(kind):
    law = plan_motion(StrategySpec(kind), UNDAMPED, _bounds())
    traj = simulate(UNDAMPED, torque_profile(law, UNDAMPED), JointState(), (0.0, 1.0), SHORT)
    planned = joint_state_from_flat(UNDAMPED, law.evaluate(traj.times))
    e1, e2 = planned_vs_simulated(planned, traj)
    assert e1 < 1e-4 and e2 < 1e-4
    assert traj.q1[traj.end_index] == pytest.approx(math.pi, abs=1e-6)
    assert abs(traj.q2[traj.end_index]) < 1e-4


def test_perturbation_scales_plant():
    init = JointState(q2=0.05)
    cfg = SimConfig(dt=1e-4, t_free=0.0, k_scale=1.21, c_scale=0.0)
    traj = simulate(TABLE_I, zero, init, (0.0, 1.0), cfg)
    omega = free_mode_frequency(replace(TABLE_I, stiffness=1.21 * TABLE_I.stiffness))
    np.testing.assert_allclose(traj.q2, 0.05 * np.cos(omega * traj.times), atol=1e-10)


def test_mismatch_amplifies_tracking_error():
    e2 = run_scenario(scenario_config(2, "polynomial", t_free=0.0)).metrics.tracking_error_q2
    e3 = run_scenario(scenario_config(3, "polynomial", t_free=0.0)).metrics.tracking_error_q2
    assert e3 > 5 * e2


def test_identical_series_zero_error():
    traj = simulate(TABLE_I, lambda t: 1e-3 * np.cos(t), JointState(), (0.0, 0.5), SHORT)
    assert planned_vs_simulated(JointState(traj.q1, traj.q2), traj) == (0.0, 0.0)


def test_grid_mismatch_rejected():
    traj = simulate(TABLE_I, zero, JointState(), (0.0, 0.5), SHORT)
    with pytest.raises(ValueError):
        planned_vs_simulated(JointState(np.zeros(3), np.zeros(3)), traj)


def test_instability_reported():
    stiff = replace(TABLE_I, stiffness=1e12)
    with pytest.raises(SimulationInstabilityError) as exc:
        simulate(stiff, zero, JointState(q2=1e-3), (0.0, 1.0), SimConfig(dt=1e-3, t_free=0))
    assert 0 < exc.value.time < 1.0
    assert exc.value.code == 4


def test_non_grid_horizon_rejected():
    with pytest.raises(ValueError):
        simulate(TABLE_I, zero, JointState(), (0.0, 1.00005), SimConfig(dt=1e-4))


@pytest.mark.parametrize("kw", [dict(dt=0), dict(t_free=-1), dict(k_scale=0), dict(c_scale=-0.1)])
def test_sim_config_validation(kw):
    with pytest.raises(ValueError):
        SimConfig(**kw)


def _bounds():
    from flatplan.flatmodel import flat_boundaries_from_joint

    return flat_boundaries_from_joint(0.0, 0.0, math.pi, 0.0, 0.0, 1.0)
