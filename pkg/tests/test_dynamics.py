import numpy as np
import pytest

from biasedsplines import builtin, integrate
from biasedsplines.dynamics import (RESIDUAL_TRIM, CurveSample, Trajectory, biased_ode_residual, cost_densities,
                                    covariant_acceleration, fd_derivative, riemannian_spline_residual, rms,
                                    trajectory_cost)
from biasedsplines.errors import DimensionError


def test_fd_derivative_exact_on_quartics():
    t = np.linspace(0, 1, 21)
    y = t**4 - 2 * t**3 + t
    assert np.allclose(fd_derivative(y, t[1], 1), 4 * t**3 - 6 * t**2 + 1, atol=1e-11)
    assert np.allclose(fd_derivative(y, t[1], 2), 12 * t**2 - 12 * t, atol=1e-9)
    with pytest.raises(ValueError):
        fd_derivative(y[:5], t[1], 2)


def test_trajectory_validation():
    t = np.linspace(0, 1, 5)
    with pytest.raises(DimensionError):
        Trajectory(t, np.zeros((5, 2)), np.zeros((5, 2)), np.zeros((5, 3)))
    with pytest.raises(ValueError):
        Trajectory(t[::-1], t, t, t)
    with pytest.raises(ValueError):
        Trajectory(t, t * np.nan, t, t)


def test_reparameterization_scales_velocity_and_acceleration():
    t = np.linspace(0, 1, 11)
    traj = Trajectory(t, t**2, 2 * t, 2 + 0 * t).reparameterized(2.0)
    assert np.allclose(traj.t[-1], 2.0)
    assert np.allclose(traj.v[:, 0], t) and np.allclose(traj.qdd[:, 0], 0.5)


def test_covariant_acceleration_vanishes_on_equator():
    sphere = builtin("sphere_torque")
    sample = CurveSample(0.0, np.array([0.3, 0.0]), np.array([1.0, 0.0]), np.zeros(2))
    assert np.allclose(covariant_acceleration(sphere, sample), 0.0)
    # a latitude circle accelerates toward the equator
    sample = CurveSample(0.0, np.array([0.3, 0.5]), np.array([1.0, 0.0]), np.zeros(2))
    assert covariant_acceleration(sphere, sample)[1] > 0


def test_cost_densities_agree():
    sphere = builtin("sphere_torque", {"k1": 0.5, "k2": 2.0})
    traj = integrate(sphere, np.array([0.0, 0.2, 1.0, 0.1, 0.3, -0.2, 0.1, 0.4]), 1.0, 200)
    via_force, via_accel = cost_densities(sphere, traj)
    assert np.allclose(via_force, via_accel)
    assert np.allclose(via_accel, traj.cost_density)
    assert np.isclose(trajectory_cost(sphere, traj), traj.cost, rtol=1e-12)


def test_cubic_satisfies_flat_spline_equations():
    flat = builtin("flat", {"dim": 1})
    t = np.linspace(0, 1, 401)
    traj = Trajectory(t, 3 * t**2 - 2 * t**3, 6 * t - 6 * t**2, 6 - 12 * t)
    times, r = riemannian_spline_residual(flat, traj)
    assert times.size == t.size - 2 * RESIDUAL_TRIM
    assert rms(r) < 1e-6
    assert rms(biased_ode_residual(flat, traj)[1]) < 1e-6
    # a quintic is not a cubic spline
    bad = Trajectory(t, t**5, 5 * t**4, 20 * t**3)
    assert rms(riemannian_spline_residual(flat, bad)[1]) > 10


def test_from_positions_residual_is_small():
    flat = builtin("flat", {"dim": 1})
    t = np.linspace(0, 1, 1001)
    traj = Trajectory.from_positions(t, 3 * t**2 - 2 * t**3)
    assert traj.differenced
    assert rms(riemannian_spline_residual(flat, traj)[1]) < 1e-4


def test_hamiltonian_flows_satisfy_biased_equation():
    for name in ("sphere_torque", "torus_torque", "twolink_parallel"):
        s = builtin(name)
        q0 = np.array([0.2, 1.8]) if name == "twolink_parallel" else np.array([0.2, 0.3])
        traj = integrate(s, np.concatenate([q0, [0.5, 0.2, 0.2, -0.1, 0.1, 0.05]]), 1.0, 1000)
        _, r = biased_ode_residual(s, traj)
        assert rms(r) < 1e-5, name


def test_dual_system_flows_are_riemannian_splines():
    s = builtin("sphere_dual")
    traj = integrate(s, np.array([0.1, 0.2, 0.6, 0.3, 0.5, -0.4, 0.2, 0.3]), 1.0, 1000)
    assert rms(riemannian_spline_residual(s, traj)[1]) < 1e-5
    # the torque cometric flow with the same data is biased away from the spline equation
    torque = builtin("sphere_torque")
    other = integrate(torque, np.array([0.1, 0.2, 0.6, 0.3, 0.5, -0.4, 0.2, 0.3]), 1.0, 1000)
    assert rms(riemannian_spline_residual(torque, other)[1]) > 1e-3


def test_residual_needs_enough_samples():
    t = np.linspace(0, 1, 10)
    with pytest.raises(ValueError):
        riemannian_spline_residual(builtin("flat", {"dim": 1}), Trajectory(t, t, 1 + 0 * t, 0 * t))
