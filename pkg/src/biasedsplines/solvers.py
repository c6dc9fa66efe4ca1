"""Two-point boundary-value solvers.

Biased splines are found by shooting on the initial costates ``(alpha0, p0)``,
geodesics by shooting on the initial velocity with zero costates. A direct
collocation minimizer of the discretized cost serves as an independent check.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import DimensionError, GeometryError, IntegrationDivergence
from .hamiltonian import DEFAULT_STEPS, HamiltonianTrajectory, rk4
from .geometry import christoffel

log = logging.getLogger(__name__)

FREE = None
DEFAULT_TOLERANCE = 1e-10
DEFAULT_MAX_ITER = 50
HOMOTOPY_STEPS = 5
GEODESIC_SEEDS = 8
DEFAULT_NODES = 200


@dataclass(frozen=True, eq=False)
class BoundaryProblem:
    """Endpoint data on ``[0, horizon]``; velocities are either both given or both ``FREE``."""

    system: object
    q0: np.ndarray
    qf: np.ndarray
    v0: Optional[np.ndarray] = FREE
    vf: Optional[np.ndarray] = FREE
    horizon: float = 1.0
    steps: int = DEFAULT_STEPS
    tolerance: float = DEFAULT_TOLERANCE
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        d = self.system.dim
        for name in ("q0", "qf", "v0", "vf"):
            val = getattr(self, name)
            if val is None:
                continue
            arr = np.atleast_1d(np.asarray(val, dtype=float))
            if arr.shape != (d,):
                raise DimensionError(f"{name} must have {d} components, got {arr.size}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, arr)
        if self.q0 is None or self.qf is None:
            raise ValueError("both endpoint positions are required")
        if (self.v0 is None) != (self.vf is None):
            raise ValueError("endpoint velocities must be both given or both FREE")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.steps < 2:
            raise ValueError("need at least two integration steps")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        for name in ("q0", "qf"):
            if not self.system.in_domain(getattr(self, name)):
                raise GeometryError(f"{name} lies outside the chart domain of {self.system.name}")

    @property
    def is_geodesic(self) -> bool:
        return self.v0 is None

    @property
    def dim(self) -> int:
        return self.system.dim

    def with_system(self, system) -> "BoundaryProblem":
        return BoundaryProblem(system, self.q0, self.qf, self.v0, self.vf, self.horizon,
                               self.steps, self.tolerance, self.max_iter)

    def rescaled(self, horizon: float) -> "BoundaryProblem":
        """Same path on ``[0, horizon]``: velocities scale by ``self.horizon / horizon``."""
        k = self.horizon / horizon
        v0 = None if self.v0 is None else self.v0 * k
        vf = None if self.vf is None else self.vf * k
        return BoundaryProblem(self.system, self.q0, self.qf, v0, vf, horizon,
                               self.steps, self.tolerance, self.max_iter)


@dataclass(frozen=True, eq=False)
class SolverReport:
    converged: bool
    method: str
    iterations: int
    residual_norm: float
    cost: float
    shooting_parameters: Optional[np.ndarray]
    trajectory: Optional[HamiltonianTrajectory]
    message: str = ""
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.converged and not self.residual_norm < self.details.get("tolerance", np.inf):
            raise ValueError("a converged report needs a residual below tolerance")


# ---------------------------------------------------------------- Newton


class NewtonStep(NamedTuple):
    x: np.ndarray
    residual: np.ndarray
    norm: float
    accepted: bool


def _fd_jacobian(residual_fn, x, r, fd_step, batch_fn):
    n = x.size
    steps = fd_step * np.maximum(1.0, np.abs(x))
    shifted = x[None, :] + np.diag(steps)
    if batch_fn is not None:
        rows = batch_fn(shifted)
    else:
        rows = np.array([residual_fn(xs) for xs in shifted])
    J = (rows - r[None, :]).T / steps[None, :]
    if not np.all(np.isfinite(J)):
        raise FloatingPointError("nonfinite Jacobian")
    return J.reshape(r.size, n)


def _safe_norm(residual_fn, x):
    try:
        r = np.asarray(residual_fn(x), dtype=float)
    except (IntegrationDivergence, GeometryError, FloatingPointError):
        return None, np.inf
    n = float(np.linalg.norm(r))
    return (r, n) if np.isfinite(n) else (None, np.inf)


def newton_step(residual_fn: Callable, x, fd_step: float = 1.5e-8, tolerance: float = 0.0,
                residual=None, batch_fn: Optional[Callable] = None, max_halvings: int = 12) -> NewtonStep:
    """One damped Newton step with a forward-difference Jacobian.

    The full step is tried first, then halved until the residual norm drops.
    If no step length helps (or the Jacobian is singular), Levenberg-damped
    directions are tried with growing damping. A rejected step returns the
    input unchanged with ``accepted=False``, which callers treat as stagnation.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    r = np.atleast_1d(np.asarray(residual_fn(x) if residual is None else residual, dtype=float))
    if r.shape != x.shape:
        raise DimensionError("residual and guess must have the same length")
    norm = float(np.linalg.norm(r))
    if norm <= tolerance:
        return NewtonStep(x, r, norm, True)
    try:
        J = _fd_jacobian(residual_fn, x, r, fd_step, batch_fn)
    except (IntegrationDivergence, GeometryError, FloatingPointError):
        return NewtonStep(x, r, norm, False)
    directions = []
    if np.linalg.cond(J) < 1e12:
        directions.append(np.linalg.solve(J, -r))
    JtJ, g = J.T @ J, J.T @ r
    scale = max(float(np.max(np.diag(JtJ))), 1e-300)
    for mu in (1e-8, 1e-5, 1e-2, 1.0):
        directions.append(np.linalg.solve(JtJ + mu * scale * np.eye(x.size), -g))
    for dx in directions:
        t = 1.0
        for _ in range(max_halvings + 1):
            xn = x + t * dx
            rn, nn = _safe_norm(residual_fn, xn)
            if nn < norm:
                return NewtonStep(xn, rn, nn, True)
            t *= 0.5
    return NewtonStep(x, r, norm, False)


def newton_solve(residual_fn, x0, tolerance, max_iter, batch_fn=None, fd_step=1.5e-8):
    """Iterate :func:`newton_step`; returns ``(x, residual, norm, iterations, converged, message)``."""
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    r, norm = _safe_norm(residual_fn, x)
    if r is None:
        return x, None, np.inf, 0, False, "initial guess diverges"
    for it in range(1, max_iter + 1):
        if norm < tolerance:
            return x, r, norm, it - 1, True, "converged"
        step = newton_step(residual_fn, x, fd_step, tolerance, residual=r, batch_fn=batch_fn)
        if not step.accepted:
            return x, r, norm, it, False, "Newton stagnated"
        x, r, norm = step.x, step.residual, step.norm
    if norm < tolerance:
        return x, r, norm, max_iter, True, "converged"
    return x, r, norm, max_iter, False, "maximum iterations reached"


# ---------------------------------------------------------------- shooting


def hermite_coefficients(problem):
    """``(c2, c3)`` of the chart cubic with the problem's endpoint data."""
    T = problem.horizon
    delta = problem.qf - problem.q0 - problem.v0 * T
    dv = problem.vf - problem.v0
    c2 = (3 * delta - dv * T) / T**2
    c3 = (-2 * delta + dv * T) / T**3
    return c2, c3


def hermite_seed(problem, system=None):
    """Costates of the chart Hermite cubic with the induced metric frozen at ``q0``."""
    system = system or problem.system
    M = system.metric.value(problem.q0)
    N = M @ system.cometric.value(problem.q0) @ M
    c2, c3 = hermite_coefficients(problem)
    return np.concatenate([2 * N @ (2 * c2), -2 * N @ (6 * c3)])


def _endpoint_fn(system, problem, head):
    """Residual maps for shooting: ``head(params)`` builds the initial extended states."""
    target = np.concatenate([problem.qf, problem.vf]) if not problem.is_geodesic else problem.qf
    width = target.size

    def batch(P):
        P = np.atleast_2d(P)
        X0 = head(P)
        XT = rk4(system, X0, problem.horizon, problem.steps, keep_path=False)
        return XT[:, :width] - target

    def single(p):
        return batch(p[None, :])[0]

    def robust_batch(P):
        try:
            return batch(P)
        except (IntegrationDivergence, GeometryError):
            out = np.full((len(P), width), np.inf)
            for i, p in enumerate(P):
                try:
                    out[i] = single(p)
                except (IntegrationDivergence, GeometryError):
                    pass
            return out

    return single, robust_batch


def _spline_heads(problem):
    q0, v0 = problem.q0, problem.v0

    def head(P):
        n = len(P)
        return np.concatenate([np.tile(q0, (n, 1)), np.tile(v0, (n, 1)), P], axis=1)

    return head


def _shoot(problem, system, seed):
    single, batch = _endpoint_fn(system, problem, _spline_heads(problem))
    return newton_solve(single, seed, problem.tolerance, problem.max_iter, batch_fn=batch)


def _continuation(problem, seed, max_stages=64, stage_tolerance=1e-6):
    """Walk the target endpoint from where ``seed`` lands to the requested one.

    The seed is first shrunk towards zero costates until its flow stays finite.
    Stages are halved when Newton fails and doubled again after successes.
    Returns the same tuple as :func:`newton_solve`.
    """
    single, batch = _endpoint_fn(problem.system, problem, _spline_heads(problem))
    x = np.asarray(seed, dtype=float)
    target = np.concatenate([problem.qf, problem.vf])
    start = None
    for k in range(12):
        trial = x * 0.5**k if k < 11 else np.zeros_like(x)
        r, norm = _safe_norm(single, trial)
        if r is not None:
            x, start = trial, r + target
            break
    if start is None:
        return x, None, np.inf, 0, False, "continuation found no finite starting flow"
    lam, step, total, stages = 0.0, 0.25, 0, 0
    while lam < 1.0 and stages < max_stages:
        nxt = min(1.0, lam + step)
        goal = (1.0 - nxt) * start + nxt * target
        tol = problem.tolerance if nxt == 1.0 else stage_tolerance

        def shifted(p, goal=goal):
            return single(p) + target - goal

        def shifted_batch(P, goal=goal):
            return batch(P) + target - goal

        xn, _, norm, its, ok, _ = newton_solve(shifted, x, tol, problem.max_iter, shifted_batch)
        total += its
        stages += 1
        if ok:
            x, lam = xn, nxt
            step = min(2.0 * step, 1.0)
        else:
            step *= 0.5
            if step < 1e-4:
                break
    r, norm = _safe_norm(single, x)
    ok = lam == 1.0 and norm < problem.tolerance
    return x, r, norm, total, ok, "converged by continuation" if ok else "continuation failed"


def _report(problem, method, x, norm, iterations, converged, message, X0, elapsed, **details):
    traj = None
    cost = np.nan
    try:
        path = rk4(problem.system, X0, problem.horizon, problem.steps)
        t = np.linspace(0.0, problem.horizon, problem.steps + 1)
        traj = HamiltonianTrajectory(problem.system, t, path)
        cost = traj.cost
    except (IntegrationDivergence, GeometryError) as exc:
        converged = False
        message = f"{message}; final integration failed: {exc}"
    details.update(tolerance=problem.tolerance, wall_time_ms=1000.0 * elapsed)
    return SolverReport(bool(converged), method, int(iterations), float(norm), float(cost),
                        np.asarray(x, dtype=float), traj, message, details)


def solve_spline_shooting(problem: BoundaryProblem, seed=None, homotopy: bool = True) -> SolverReport:
    """Shoot on ``(alpha0, p0)`` so that the flow hits ``(qf, vf)`` at the horizon.

    ``seed`` defaults to :func:`hermite_seed`. If Newton stalls and ``homotopy``
    is set, the cometric is deformed from ``M^-1`` to the target in
    ``HOMOTOPY_STEPS`` stages, each seeded by the previous solution. If that
    fails too, the boundary data are deformed from wherever the seed's flow
    lands to the requested endpoint.
    """
    if problem.is_geodesic:
        raise ValueError("shooting on costates needs both endpoint velocities; use solve_geodesic")
    start = time.perf_counter()
    system = problem.system
    d = system.dim
    x0 = hermite_seed(problem) if seed is None else np.asarray(seed, dtype=float)
    if x0.shape != (2 * d,):
        raise DimensionError(f"shooting seed must have {2 * d} components")
    x, r, norm, its, ok, msg = _shoot(problem, system, x0)
    total = its
    stages = []
    if not ok and homotopy:
        log.info("shooting stalled (%s, residual %.3g); starting homotopy", msg, norm)
        hx = hermite_seed(problem, system.blended(0.0))
        hnorm = np.inf
        for s in np.linspace(0.0, 1.0, HOMOTOPY_STEPS + 1):
            stage_system = system.blended(float(s))
            hx, _, hnorm, its, hok, hmsg = _shoot(problem, stage_system, hx)
            total += its
            stages.append((float(s), float(hnorm), hok))
            if not hok:
                break
        if hnorm < norm:
            x, norm, ok, msg = hx, hnorm, hok, "converged by homotopy" if hok else f"homotopy: {hmsg}"
    if not ok and homotopy:
        log.info("homotopy failed; continuing in the boundary data")
        cx, _, cnorm, its, cok, cmsg = _continuation(problem, x0)
        total += its
        if cok or cnorm < norm:
            x, norm, ok, msg = cx, cnorm, cok, cmsg
    X0 = np.concatenate([problem.q0, problem.v0, x])
    return _report(problem, "shooting", x, norm, total, ok and norm < problem.tolerance, msg, X0,
                   time.perf_counter() - start, homotopy_stages=stages)


# ---------------------------------------------------------------- geodesics


def geodesic_seeds(problem, count=GEODESIC_SEEDS):
    """Initial velocities: the chart straight line, then deterministic perturbations of it."""
    d = problem.dim
    base = (problem.qf - problem.q0) / problem.horizon
    radius = 0.5 * max(float(np.linalg.norm(base)), 1.0 / problem.horizon)
    seeds = [base]
    for k in range(1, count):
        u = np.random.default_rng(k).standard_normal(d)
        seeds.append(base + radius * u / np.linalg.norm(u))
    return seeds


def _pathlength(traj):
    speed2 = np.einsum("ni,nij,nj->n", traj.v, traj.system.metric.value(traj.q), traj.v)
    return float(np.trapezoid(np.sqrt(np.maximum(speed2, 0.0)), traj.t))


def solve_geodesic(problem: BoundaryProblem, seeds: Optional[Sequence] = None) -> SolverReport:
    """Shoot on ``v0`` with zero costates from several seeds; keep the shortest converged path.

    Ties are broken lexicographically on ``(pathlength, seed index)``.
    """
    if not problem.is_geodesic:
        raise ValueError("geodesic shooting needs FREE endpoint velocities")
    start = time.perf_counter()
    d = problem.dim
    q0 = problem.q0
    zeros = np.zeros(2 * d)

    def head(P):
        n = len(P)
        return np.concatenate([np.tile(q0, (n, 1)), P, np.tile(zeros, (n, 1))], axis=1)

    single, batch = _endpoint_fn(problem.system, problem, head)
    seeds = geodesic_seeds(problem) if seeds is None else [np.asarray(s, dtype=float) for s in seeds]
    candidates = []
    best_fail = None
    total = 0
    for index, seed in enumerate(seeds):
        x, r, norm, its, ok, msg = newton_solve(single, seed, problem.tolerance, problem.max_iter, batch)
        total += its
        if not ok:
            if best_fail is None or norm < best_fail[1]:
                best_fail = (x, norm, msg)
            continue
        X0 = np.concatenate([q0, x, zeros])
        path = rk4(problem.system, X0, problem.horizon, problem.steps)
        t = np.linspace(0.0, problem.horizon, problem.steps + 1)
        length = _pathlength(HamiltonianTrajectory(problem.system, t, path))
        candidates.append((length, index, x, norm))
    elapsed = time.perf_counter() - start
    lengths = [(c[0], c[1]) for c in candidates]
    if candidates:
        length, index, x, norm = min(candidates, key=lambda c: (c[0], c[1]))
        X0 = np.concatenate([q0, x, zeros])
        return _report(problem, "geodesic", x, norm, total, True, "converged", X0, elapsed,
                       seed_index=index, pathlength=length, candidates=lengths)
    x, norm, msg = best_fail
    X0 = np.concatenate([q0, x, zeros])
    return _report(problem, "geodesic", x, norm, total, False, f"no seed converged ({msg})", X0, elapsed,
                   candidates=lengths)


def solve(problem: BoundaryProblem, **kwargs) -> SolverReport:
    """Dispatch to geodesic or spline shooting according to the boundary data."""
    if problem.is_geodesic:
        return solve_geodesic(problem, **kwargs)
    return solve_spline_shooting(problem, **kwargs)


# ---------------------------------------------------------------- collocation


class _Collocation:
    """Discretized cost on ``n`` uniform nodes with the interior nodes as unknowns.

    Given endpoint velocities, ghost nodes ``q_{-1} = q_1 - 2h v0`` and
    ``q_n = q_{n-2} + 2h vf`` make central differences available at the
    endpoints too, and the cost is the trapezoid sum over all nodes. With FREE
    velocities only interior nodes carry cost.
    """

    def __init__(self, problem, nodes):
        self.problem = problem
        self.system = problem.system
        self.n = nodes
        self.d = problem.dim
        self.h = problem.horizon / (nodes - 1)
        self.t = np.linspace(0.0, problem.horizon, nodes)
        w = np.full(nodes, self.h)
        if problem.is_geodesic:
            w[[0, -1]] = 0.0
            w[[1, -2]] = 0.5 * self.h
        else:
            w[[0, -1]] = 0.5 * self.h
        self.weights = w
        self.active = slice(None) if not problem.is_geodesic else slice(1, -1)

    def nodes_from(self, z):
        Q = np.empty((self.n, self.d))
        Q[0], Q[-1] = self.problem.q0, self.problem.qf
        Q[1:-1] = z.reshape(self.n - 2, self.d)
        return Q

    def kinematics(self, Q):
        h = self.h
        if self.problem.is_geodesic:
            ext = Q
        else:
            ghost0 = Q[1] - 2 * h * self.problem.v0
            ghostf = Q[-2] + 2 * h * self.problem.vf
            ext = np.vstack([ghost0, Q, ghostf])
        v = (ext[2:] - ext[:-2]) / (2 * h)
        qdd = (ext[2:] - 2 * ext[1:-1] + ext[:-2]) / h**2
        if self.problem.is_geodesic:
            # pad with zeros at the endpoints; their weight is zero
            pad = np.zeros((1, self.d))
            v = np.vstack([pad, v, pad])
            qdd = np.vstack([pad, qdd, pad])
        return v, qdd

    def accelerations(self, Q):
        v, qdd = self.kinematics(Q)
        gamma = christoffel(self.system.metric, Q)
        a = qdd + np.einsum("nkij,ni,nj->nk", gamma, v, v)
        return v, a

    def residuals(self, z):
        Q = self.nodes_from(z)
        if not self.system.in_domain(Q):
            return np.full(self.n * self.d, 1e150)
        _, a = self.accelerations(Q)
        M = self.system.metric.value(Q)
        N = M @ self.system.cometric.value(Q) @ M
        L = np.linalg.cholesky(N)
        r = np.einsum("nji,nj->ni", L, a) * np.sqrt(self.weights)[:, None]
        return r.ravel()

    def cost(self, z):
        r = self.residuals(z)
        return float(r @ r)

    def jacobian(self, z, rel=1e-6):
        """Central-difference Jacobian of :meth:`residuals`, dense.

        Node ``k`` only moves the residuals of nodes ``k-1, k, k+1`` (ghost
        nodes keep that true at the ends), so unknowns with equal ``k mod 3``
        and equal component are perturbed together.
        """
        n, d = self.n, self.d
        J = np.zeros((n * d, (n - 2) * d))
        nodes = np.arange(1, n - 1)
        steps = rel * np.maximum(1.0, np.abs(z))
        for phase in range(3):
            group_nodes = nodes[nodes % 3 == phase]
            if group_nodes.size == 0:
                continue
            for c in range(d):
                cols = (group_nodes - 1) * d + c
                zp, zm = z.copy(), z.copy()
                zp[cols] += steps[cols]
                zm[cols] -= steps[cols]
                diff = (self.residuals(zp) - self.residuals(zm)).reshape(n, d)
                for k, col in zip(group_nodes, cols):
                    for j in (k - 1, k, k + 1):
                        J[j * d:(j + 1) * d, col] = diff[j] / (2 * steps[col])
        return J

    def initial(self):
        p = self.problem
        if p.is_geodesic:
            s = (self.t / p.horizon)[:, None]
            Q = p.q0 + s * (p.qf - p.q0)
        else:
            c2, c3 = hermite_coefficients(p)
            t = self.t[:, None]
            Q = p.q0 + p.v0 * t + c2 * t**2 + c3 * t**3
        return Q[1:-1].ravel()


def _levenberg_marquardt(col, z, gradient_tolerance, max_iter):
    """Minimize ``|r(z)|^2``; returns ``(z, r, J, iterations, converged)``."""
    r = col.residuals(z)
    cost = float(r @ r)
    mu = 1e-3
    J = col.jacobian(z)
    for it in range(1, max_iter + 1):
        g = 2.0 * (J.T @ r)
        if np.max(np.abs(g)) < gradient_tolerance * (1.0 + cost):
            return z, r, J, it - 1, True
        A = J.T @ J
        diag = np.maximum(np.diag(A), 1e-300)
        improved = False
        while mu < 1e12:
            try:
                dz = np.linalg.solve(A + mu * np.diag(diag), -0.5 * g)
            except np.linalg.LinAlgError:
                mu *= 10.0
                continue
            zn = z + dz
            rn = col.residuals(zn)
            cn = float(rn @ rn)
            if cn < cost:
                z, r, cost = zn, rn, cn
                mu = max(mu / 5.0, 1e-12)
                improved = True
                break
            mu *= 10.0
        if not improved:
            return z, r, J, it, False
        J = col.jacobian(z)
    g = 2.0 * (J.T @ r)
    return z, r, J, max_iter, bool(np.max(np.abs(g)) < gradient_tolerance * (1.0 + cost))


def solve_collocation(problem: BoundaryProblem, nodes: int = DEFAULT_NODES, initial=None,
                      gradient_tolerance: float = 1e-6, max_iter: int = 200) -> SolverReport:
    """Minimize the node-discretized cost over interior nodes.

    The cost is a sum of squares ``sum_k w_k a_k^T N_k a_k`` and is minimized by
    Levenberg-Marquardt on a finite-difference Jacobian. Endpoint positions are
    pinned and endpoint velocities enter through ghost nodes. The result is
    certified by the gradient ``2 J^T r``: ``|g|_inf < gradient_tolerance * (1 + cost)``.
    """
    if nodes < 8:
        raise ValueError("collocation needs at least 8 nodes")
    start = time.perf_counter()
    col = _Collocation(problem, nodes)
    z0 = col.initial() if initial is None else np.asarray(initial, dtype=float)[1:-1].ravel()
    if z0.size != (nodes - 2) * problem.dim:
        raise DimensionError("initial nodes do not match the node count")
    z, r, J, its, ok = _levenberg_marquardt(col, z0, gradient_tolerance, max_iter)
    cost = float(r @ r)
    gnorm = float(np.max(np.abs(2.0 * (J.T @ r))))
    ok = bool(ok and np.isfinite(cost))
    traj = _collocation_trajectory(col, col.nodes_from(z))
    details = dict(tolerance=gradient_tolerance * (1.0 + cost), nodes=nodes, gradient_inf_norm=gnorm,
                   wall_time_ms=1000.0 * (time.perf_counter() - start))
    msg = "converged" if ok else f"gradient {gnorm:.3g} above tolerance after {its} iterations"
    return SolverReport(ok, "collocation", its, gnorm, cost, None, traj, msg, details)


def _collocation_trajectory(col, Q):
    """Extended states at the nodes: ``alpha = 2 N a`` and ``p = Gamma^T(v) alpha - alpha'``."""
    system = col.system
    v, a = col.accelerations(Q)
    if col.problem.is_geodesic:
        # endpoints have no stencil; use one-sided second-order differences for v
        h = col.h
        v[0] = (-3 * Q[0] + 4 * Q[1] - Q[2]) / (2 * h)
        v[-1] = (3 * Q[-1] - 4 * Q[-2] + Q[-3]) / (2 * h)
        a[0], a[-1] = a[1], a[-2]
    M = system.metric.value(Q)
    N = M @ system.cometric.value(Q) @ M
    alpha = 2.0 * np.einsum("nij,nj->ni", N, a)
    gamma = christoffel(system.metric, Q)
    A = np.einsum("nkij,nj->nki", gamma, v)
    p = np.einsum("nji,nj->ni", A, alpha) - np.gradient(alpha, col.h, axis=0, edge_order=2)
    states = np.concatenate([Q, v, alpha, p], axis=1)
    return HamiltonianTrajectory(system, col.t, states)


def sup_distance(report_a: SolverReport, report_b: SolverReport) -> float:
    """Max chart distance between two solutions, comparing ``b`` at the nodes of ``a``.

    ``b`` is evaluated by piecewise cubic Hermite interpolation of its samples.
    """
    from scipy.interpolate import CubicHermiteSpline

    ta, qa = report_a.trajectory.t, report_a.trajectory.q
    tb = report_b.trajectory
    spline = CubicHermiteSpline(tb.t, tb.q, tb.v, axis=0)
    return float(np.max(np.abs(spline(ta) - qa)))
