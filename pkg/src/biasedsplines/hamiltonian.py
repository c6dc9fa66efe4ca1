"""The first-order optimality system in the extended state (q, v, alpha, p).

In chart coordinates, with ``H`` the dual of the induced metric::

    q'       = v
    v'^i     = 1/2 H^ij alpha_j - Gamma^i_jk v^j v^k
    alpha'_i = Gamma^j_ki v^k alpha_j - p_i
    p'_i     = Gamma^j_ki v^k p_j - 1/4 tau_i^jk alpha_j alpha_k + R^l_ijk v^j v^k alpha_l

and the conserved quantity is ``1/4 H(alpha, alpha) + <p, v>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import simpson

from .dynamics import ForceData, forces_from_acceleration
from ._kernels import builtin_rhs, builtin_rk4, extended_rhs
from .errors import (DegenerateInducedMetricError, DimensionError, GeometryError, IntegrationDivergence,
                     NonInvertibleMetricError)
from .geometry import local_geometry, spd_inverse

DEFAULT_STEPS = 1000


@dataclass(frozen=True)
class ExtendedState:
    q: np.ndarray
    v: np.ndarray
    alpha: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        parts = [np.atleast_1d(np.asarray(x, dtype=float)) for x in (self.q, self.v, self.alpha, self.p)]
        if len({x.shape for x in parts}) != 1:
            raise DimensionError("q, v, alpha and p must have the same shape")
        for name, x in zip(("q", "v", "alpha", "p"), parts):
            object.__setattr__(self, name, x)

    @property
    def dim(self):
        return self.q.shape[-1]

    def to_array(self):
        return np.concatenate([self.q, self.v, self.alpha, self.p], axis=-1)

    @classmethod
    def from_array(cls, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] % 4:
            raise DimensionError("extended state length must be a multiple of 4")
        return cls(*np.split(x, 4, axis=-1))


def _as_array(state):
    if isinstance(state, ExtendedState):
        return state.to_array()
    return np.asarray(state, dtype=float)


def _split(X, d):
    return X[..., :d], X[..., d:2 * d], X[..., 2 * d:3 * d], X[..., 3 * d:]


def rhs_reference(system, X):
    """Numpy evaluation of the right-hand side; slow but easy to audit."""
    d = system.dim
    q, v, alpha, p = _split(X, d)
    geo = local_geometry(system.metric, system.cometric, q)
    A = np.einsum("...kij,...j->...ki", geo.gamma, v)
    vdot = 0.5 * np.einsum("...ij,...j->...i", geo.hstar, alpha) - np.einsum("...ki,...i->...k", A, v)
    adot = np.einsum("...ji,...j->...i", A, alpha) - p
    pdot = (np.einsum("...ji,...j->...i", A, p)
            - 0.25 * np.einsum("...ijk,...j,...k->...i", geo.tau, alpha, alpha)
            + np.einsum("...lijk,...j,...k,...l->...i", geo.curvature, v, v, alpha))
    return np.concatenate([v, vdot, adot, pdot], axis=-1)


def _zeros(n, d, rank):
    return np.zeros((n,) + (d,) * rank)


def rhs_array(system, X):
    """Time derivative of stacked extended states ``X[..., 4d]``."""
    d = system.dim
    X = np.asarray(X, dtype=float)
    Xb = np.ascontiguousarray(X.reshape(-1, 4 * d))
    n = Xb.shape[0]
    q = Xb[:, :d]
    spec = getattr(system, "compiled", None)
    if spec is not None:
        out = np.empty_like(Xb)
        status = builtin_rhs(*spec, Xb, out)
        _raise_for_status(status, q)
        return out.reshape(X.shape)
    metric, cometric = system.metric, system.cometric
    if metric.constant and cometric.constant:
        M = metric.value(q[:1])[0]
        N = M @ cometric.value(q[:1])[0] @ M
        H = spd_inverse(N, what="induced metric", point=q[0], error=DegenerateInducedMetricError)
        v, alpha, p = Xb[:, d:2 * d], Xb[:, 2 * d:3 * d], Xb[:, 3 * d:]
        out = np.concatenate([v, 0.5 * alpha @ H, -p, np.zeros_like(p)], axis=1)
        return out.reshape(X.shape)
    if metric.constant:
        M, dM, ddM = metric.value(q), _zeros(n, d, 3), _zeros(n, d, 4)
    else:
        M, dM, ddM = metric.jet(q, 2)
    if cometric.constant:
        Nt, dNt = cometric.value(q), _zeros(n, d, 3)
    else:
        Nt, dNt = cometric.jet(q, 1)
    out = np.empty_like(Xb)
    arrays = [np.ascontiguousarray(a, dtype=float) for a in (M, dM, ddM, Nt, dNt)]
    status = extended_rhs(Xb, *arrays, metric.constant, out)
    _raise_for_status(status, q)
    return out.reshape(X.shape)


def _raise_for_status(status, q):
    if status >= 0:
        raise NonInvertibleMetricError("metric is not positive definite", q[status])
    if status < -1:
        raise DegenerateInducedMetricError("induced metric is not positive definite", q[-2 - status])


def rhs(system, state):
    """Derivative of an extended state; returns the same type that was passed in."""
    X = _as_array(state)
    if X.shape[-1] != 4 * system.dim:
        raise DimensionError(f"expected extended states of length {4 * system.dim}")
    out = rhs_array(system, X)
    return ExtendedState.from_array(out) if isinstance(state, ExtendedState) else out


def hamiltonian_value(system, state):
    X = _as_array(state)
    q, v, alpha, p = _split(X, system.dim)
    geo_H = system.hstar.value(q)
    return 0.25 * np.einsum("...i,...ij,...j->...", alpha, geo_H, alpha) + np.einsum("...i,...i->...", p, v)


def rk4(system, X0, horizon, steps, keep_path=True, fn=None):
    """Classical fixed-step Runge-Kutta over stacked states ``X0[..., n]``.

    Returns the node array ``(steps + 1, ...)`` or only the final state.
    Raises :class:`IntegrationDivergence` on the first nonfinite stage.
    """
    if steps < 2:
        raise ValueError("need at least two integration steps")
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    h = horizon / steps
    X = np.array(X0, dtype=float)
    spec = getattr(system, "compiled", None)
    if fn is None and spec is not None:
        return _rk4_compiled(spec, X, h, steps, keep_path)
    f = fn or (lambda X: rhs_array(system, X))
    path = np.empty((steps + 1,) + X.shape) if keep_path else None
    if keep_path:
        path[0] = X
    for n in range(steps):
        try:
            k1 = f(X)
            k2 = f(X + 0.5 * h * k1)
            k3 = f(X + 0.5 * h * k2)
            k4 = f(X + h * k3)
        except (GeometryError, FloatingPointError) as exc:
            raise IntegrationDivergence(f"geometry failed during integration: {exc}", n * h, X) from exc
        Xn = X + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(Xn)):
            raise IntegrationDivergence("state became nonfinite", n * h, X)
        X = Xn
        if keep_path:
            path[n + 1] = X
    return path if keep_path else X


_FAILURES = {1: "metric is not positive definite",
             2: "induced metric is not positive definite",
             3: "state became nonfinite"}


def _rk4_compiled(spec, X, h, steps, keep_path):
    shape = X.shape
    Xb = np.ascontiguousarray(X.reshape(-1, shape[-1]))
    path = np.empty((steps + 1 if keep_path else 1,) + Xb.shape)
    code, n = builtin_rk4(*spec, Xb, h, steps, path)
    if code:
        last = path[n] if keep_path else None
        raise IntegrationDivergence(_FAILURES[code], n * h, None if last is None else last.reshape(shape))
    if keep_path:
        return path.reshape((steps + 1,) + shape)
    return path[0].reshape(shape)


@dataclass(frozen=True, eq=False)
class HamiltonianTrajectory:
    """Uniform-grid solution of the extended system with derived quantities."""

    system: object
    t: np.ndarray
    states: np.ndarray

    @property
    def dim(self):
        return self.system.dim

    @property
    def q(self):
        return self.states[:, : self.dim]

    @property
    def v(self):
        return self.states[:, self.dim: 2 * self.dim]

    @property
    def alpha(self):
        return self.states[:, 2 * self.dim: 3 * self.dim]

    @property
    def p(self):
        return self.states[:, 3 * self.dim:]

    @cached_property
    def qdd(self):
        return rhs_array(self.system, self.states)[:, self.dim: 2 * self.dim]

    @cached_property
    def forces(self) -> ForceData:
        # the maximizing control: a = 1/2 H(alpha, .)
        H = self.system.hstar.value(self.q)
        a = 0.5 * np.einsum("nij,nj->ni", H, self.alpha)
        return forces_from_acceleration(self.system, self.q, a)

    @cached_property
    def hamiltonian(self):
        return hamiltonian_value(self.system, self.states)

    @property
    def cost_density(self):
        return self.forces.cost_density

    @property
    def cost(self):
        return float(simpson(self.cost_density, x=self.t))

    def hamiltonian_drift(self):
        H = self.hamiltonian
        return float(np.max(np.abs(H - H[0])) / (1.0 + abs(H[0])))

    def state(self, index) -> ExtendedState:
        return ExtendedState.from_array(self.states[index])


def integrate(system, initial, horizon: float, steps: int = DEFAULT_STEPS) -> HamiltonianTrajectory:
    X0 = _as_array(initial)
    if X0.shape != (4 * system.dim,):
        raise DimensionError(f"expected an extended state of length {4 * system.dim}")
    path = rk4(system, X0, horizon, steps)
    t = np.linspace(0.0, horizon, steps + 1)
    return HamiltonianTrajectory(system, t, path)
