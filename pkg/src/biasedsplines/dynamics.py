"""Kinematic and force quantities along curves, plus residual checks of the
optimality equations on sampled trajectories."""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import Optional

import numpy as np
from scipy.integrate import simpson

from .errors import DimensionError
from .geometry import christoffel, local_geometry


@dataclass(frozen=True)
class CurveSample:
    t: float
    q: np.ndarray
    v: np.ndarray
    qdd: np.ndarray


@dataclass(frozen=True)
class ForceData:
    """Covariant acceleration, force, effort and cost density at one or more samples."""

    a: np.ndarray
    force: np.ndarray
    effort: np.ndarray
    cost_density: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    """Time samples of a curve with coordinate velocity and second derivative."""

    t: np.ndarray
    q: np.ndarray
    v: np.ndarray
    qdd: np.ndarray
    # v and qdd were finite-differenced from q, so residual checks use a coarser stride
    differenced: bool = False

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if t.ndim != 1:
            raise DimensionError("trajectory times must be one-dimensional")
        arrays = [_as_samples(x, t.size) for x in (self.q, self.v, self.qdd)]
        if len({a.shape for a in arrays}) != 1:
            raise DimensionError("q, v and qdd must have the same shape")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        for name, val in zip(("t", "q", "v", "qdd"), [t] + arrays):
            if not np.all(np.isfinite(val)):
                raise ValueError(f"trajectory {name} has nonfinite entries")
            object.__setattr__(self, name, val)

    @classmethod
    def from_positions(cls, t, q):
        """Estimate velocity and acceleration by 4th-order finite differences."""
        t = np.asarray(t, dtype=float)
        q = _as_samples(q, t.size)
        h = _uniform_step(t)
        return cls(t, q, fd_derivative(q, h, 1), fd_derivative(q, h, 2), differenced=True)

    def reparameterized(self, scale: float) -> "Trajectory":
        """Same path traversed on times ``scale * t``."""
        return Trajectory(self.t * scale, self.q, self.v / scale, self.qdd / scale**2, self.differenced)


def _as_samples(q, n):
    q = np.asarray(q, dtype=float)
    if q.ndim == 1:
        q = q[:, None]
    if q.shape[0] != n:
        raise DimensionError("sample count does not match the time grid")
    return q


def _uniform_step(t):
    if t.size < 2:
        raise ValueError("need at least two samples")
    dt = np.diff(t)
    h = (t[-1] - t[0]) / (t.size - 1)
    if h <= 0 or np.max(np.abs(dt - h)) > 1e-9 * max(abs(h), 1.0):
        raise ValueError("finite-difference stencils need a uniform time grid")
    return h


def _stencil_weights(offsets, order):
    offsets = np.asarray(offsets, dtype=float)
    n = offsets.size
    A = np.array([offsets**m / factorial(m) for m in range(n)])
    rhs = np.zeros(n)
    rhs[order] = 1.0
    return np.linalg.solve(A, rhs)


def fd_derivative(y, h, order):
    """First or second time derivative on a uniform grid, 4th-order accurate.

    Interior points use 5-point central stencils; points near the ends use
    one-sided stencils of the same order.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    width = 4 + order
    if n < width:
        raise ValueError(f"need at least {width} samples for derivative order {order}")
    out = np.empty_like(y)
    central = _stencil_weights(np.arange(-2, 3), order)
    out[2:n - 2] = sum(w * y[2 + k: n - 2 + k] for k, w in zip(range(-2, 3), central))
    for i in list(range(2)) + list(range(n - 2, n)):
        start = min(max(i - width // 2, 0), n - width)
        offs = np.arange(start, start + width) - i
        w = _stencil_weights(offs, order)
        out[i] = np.tensordot(w, y[start:start + width], axes=1)
    return out / h**order


def covariant_acceleration(system, sample) -> np.ndarray:
    """``a^k = qdd^k + Gamma^k_ij v^i v^j``; works on single samples or batches."""
    q, v, qdd = (np.asarray(x, dtype=float) for x in (sample.q, sample.v, sample.qdd))
    gamma = christoffel(system.metric, q)
    return qdd + np.einsum("...kij,...i,...j->...k", gamma, v, v)


def force_and_effort(system, sample) -> ForceData:
    a = covariant_acceleration(system, sample)
    return forces_from_acceleration(system, sample.q, a)


def forces_from_acceleration(system, q, a) -> ForceData:
    q = np.asarray(q, dtype=float)
    M = system.metric.value(q)
    Nt = system.cometric.value(q)
    F = np.einsum("...ij,...j->...i", M, a)
    E = np.einsum("...ij,...j->...i", M @ Nt @ M, a)
    c = np.einsum("...i,...i->...", E, a)
    return ForceData(a, F, E, c)


def cost_densities(system, trajectory):
    """Both cost integrands, ``Nt(F, F)`` and ``h(a, a)``, at every sample."""
    data = force_and_effort(system, trajectory)
    Nt = system.cometric.value(trajectory.q)
    via_force = np.einsum("...i,...ij,...j->...", data.force, Nt, data.force)
    return via_force, data.cost_density


def trajectory_cost(system, trajectory) -> float:
    """Integrated actuation cost by composite Simpson quadrature over the samples."""
    t = np.asarray(trajectory.t, dtype=float)
    if t.size < 2:
        raise ValueError("need at least two samples to integrate a cost")
    _, density = cost_densities(system, trajectory)
    return float(simpson(density, x=t))


# Jerk and snap nest two 5-point stencils; the samples within 2 points of an
# end at either level use one-sided stencils whose error dominates the residual.
# Residual series are reported only where both levels are central.
RESIDUAL_TRIM = 4


def _default_stride(n, differenced):
    # roughly 1000 intervals with exact v and qdd, 100 when they are differenced
    return max(1, (n - 1) // (100 if differenced else 1000))


def _residual_grid(trajectory, stride):
    t = np.asarray(trajectory.t, dtype=float)
    if stride is None:
        stride = _default_stride(t.size, getattr(trajectory, "differenced", False))
    stride = int(stride)
    if stride < 1:
        raise ValueError("stride must be positive")
    q, v, qdd = (_as_samples(x, t.size)[::stride] for x in (trajectory.q, trajectory.v, trajectory.qdd))
    t = t[::stride]
    if t.size < 2 * RESIDUAL_TRIM + 5:
        raise ValueError(f"residual checks need at least {2 * RESIDUAL_TRIM + 5} samples after striding")
    return t, q, v, qdd, _uniform_step(t)


def _kinematics(system, q, v, qdd):
    geo = local_geometry(system.metric, system.cometric, q)
    # A[k, i] = Gamma^k_ij v^j
    A = np.einsum("...kij,...j->...ki", geo.gamma, v)
    a = qdd + np.einsum("...ki,...i->...k", A, v)
    return a, A, geo


def riemannian_spline_residual(system, trajectory, stride: Optional[int] = None):
    """``s + R(a, v) v`` along a sampled curve, for the dual-metric spline check.

    Returns ``(t, residual)`` on the (strided) sample grid minus the
    ``RESIDUAL_TRIM`` samples nearest each end. The covariant acceleration
    comes from the sampled ``v`` and ``qdd``; jerk and snap are obtained by
    differencing it in time and adding the connection terms.
    """
    t, q, v, qdd, h = _residual_grid(trajectory, stride)
    a, A, geo = _kinematics(system, q, v, qdd)
    jerk = fd_derivative(a, h, 1) + np.einsum("...ki,...i->...k", A, a)
    snap = fd_derivative(jerk, h, 1) + np.einsum("...ki,...i->...k", A, jerk)
    curv = np.einsum("...lijk,...i,...j,...k->...l", geo.curvature, a, v, v)
    return _trimmed(t, snap + curv)


def biased_ode_residual(system, trajectory, stride: Optional[int] = None):
    """Residual of the 4th-order equation for general cometrics, as covectors.

    With effort ``E = N a`` and the dual connection ``D``::

        D D E - 1/2 tau(E, E) + <E, R(., v) v>

    which vanishes along optimal trajectories.
    """
    t, q, v, qdd, h = _residual_grid(trajectory, stride)
    a, A, geo = _kinematics(system, q, v, qdd)
    E = np.einsum("...ij,...j->...i", geo.induced, a)
    yank = fd_derivative(E, h, 1) - np.einsum("...ji,...j->...i", A, E)
    tug = fd_derivative(yank, h, 1) - np.einsum("...ji,...j->...i", A, yank)
    bias = 0.5 * np.einsum("...ijk,...j,...k->...i", geo.tau, E, E)
    curv = np.einsum("...lijk,...j,...k,...l->...i", geo.curvature, v, v, E)
    return _trimmed(t, tug - bias + curv)


def _trimmed(t, r):
    k = RESIDUAL_TRIM
    return t[k:-k], r[k:-k]


def rms(residual) -> float:
    r = np.asarray(residual, dtype=float)
    return float(np.sqrt(np.mean(np.sum(r * r, axis=-1))))
