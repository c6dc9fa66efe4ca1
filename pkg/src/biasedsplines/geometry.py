"""Pointwise tensor data of a configuration chart with a metric and a cometric.

Array conventions (all functions accept a single point ``q`` of shape ``(d,)``
or a batch of shape ``(..., d)``; outputs carry the same leading axes):

* matrix fields: ``T[..., i, j]``
* first partials: ``dT[..., k, i, j] = d/dq^k T_ij``
* second partials: ``ddT[..., k, l, i, j] = d^2/dq^k dq^l T_ij``
* Christoffel symbols: ``gamma[..., k, i, j] = Gamma^k_ij``
* curvature: ``R[..., l, i, j, k] = R^l_ijk`` with
  ``<alpha, R(X, Y) Z> = R^l_ijk X^i Y^j Z^k alpha_l``
* compatibility tensor: ``tau[..., i, j, k] = tau_i^{jk}`` (lower index first)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import (
    DegenerateInducedMetricError,
    DimensionError,
    EvaluationError,
    GeometryError,
    NonInvertibleMetricError,
)

FD_RELATIVE_STEP = 1e-5
FD_ABSOLUTE_STEP = 1e-7
# nested differences lose roughly twice the digits; use a wider step there
FD_SECOND_STEP = 1e-4


def _fd_steps(q, rel, floor):
    return np.maximum(rel * np.abs(q), floor)


@dataclass(frozen=True, eq=False)
class TensorField:
    """A symmetric d x d matrix field on a chart, with optional analytic partials.

    ``evaluator`` maps points of shape ``(..., d)`` to ``(..., d, d)``.
    ``first`` and ``second`` return the partial-derivative arrays described in
    the module docstring. Missing partials fall back to central differences.
    ``jet`` may return ``(T, dT, ddT)`` in a single pass; entries beyond the
    requested order may be ``None``.
    """

    dim: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    first: Optional[Callable[[np.ndarray], np.ndarray]] = None
    second: Optional[Callable[[np.ndarray], np.ndarray]] = None
    positive: bool = True
    constant: bool = False
    jet_fn: Optional[Callable[[np.ndarray, int], tuple]] = None

    def _point(self, q):
        q = np.asarray(q, dtype=float)
        if q.shape[-1:] != (self.dim,):
            raise DimensionError(f"expected points with {self.dim} coordinates, got shape {q.shape}")
        return q

    def value(self, q):
        q = self._point(q)
        try:
            out = np.asarray(self.evaluator(q), dtype=float)
        except (ArithmeticError, ValueError) as exc:
            raise EvaluationError(f"field evaluation failed at {q.tolist()}: {exc}") from exc
        if out.shape != q.shape[:-1] + (self.dim, self.dim):
            raise EvaluationError(f"evaluator returned shape {out.shape} for point shape {q.shape}")
        if not np.all(np.isfinite(out)):
            raise EvaluationError(f"nonfinite field value at {q.tolist()}")
        return out

    def partials(self, q):
        q = self._point(q)
        if self.constant:
            return np.zeros(q.shape[:-1] + (self.dim,) * 3)
        if self.first is not None:
            return np.asarray(self.first(q), dtype=float)
        if self.jet_fn is not None:
            return self.jet_fn(q, 1)[1]
        return _central_difference(self.value, q, FD_RELATIVE_STEP, FD_ABSOLUTE_STEP)

    def second_partials(self, q):
        q = self._point(q)
        if self.constant:
            return np.zeros(q.shape[:-1] + (self.dim,) * 4)
        if self.second is not None:
            return np.asarray(self.second(q), dtype=float)
        if self.jet_fn is not None:
            out = self.jet_fn(q, 2)[2]
            if out is not None:
                return out
        if self.first is not None or self.jet_fn is not None:
            return _central_difference(self.partials, q, FD_RELATIVE_STEP, FD_ABSOLUTE_STEP)
        return _second_difference(self.value, q, FD_SECOND_STEP)

    def jet(self, q, order=2):
        """Value and partials up to ``order`` (0, 1 or 2) as a tuple."""
        q = self._point(q)
        if self.jet_fn is not None and not self.constant:
            out = self.jet_fn(q, order)
            if order < 2 or out[2] is not None:
                return tuple(out[: order + 1])
        parts = [self.value(q)]
        if order >= 1:
            parts.append(self.partials(q))
        if order >= 2:
            parts.append(self.second_partials(q))
        return tuple(parts)

    def check(self, q, symmetry_tol=1e-12):
        """Validate symmetry (and positivity if flagged) at ``q``; returns the matrix."""
        q = self._point(q)
        T = self.value(q)
        asym = np.max(np.abs(T - np.swapaxes(T, -1, -2)), initial=0.0)
        if asym > symmetry_tol:
            raise GeometryError(f"field is not symmetric at {q.tolist()} (max asymmetry {asym:.3g})")
        if self.positive:
            spd_inverse(T, point=q)
        return T


def _central_difference(fn, q, rel, floor):
    h = _fd_steps(q, rel, floor)
    cols = []
    for k in range(q.shape[-1]):
        e = np.zeros_like(q)
        e[..., k] = h[..., k]
        diff = fn(q + e) - fn(q - e)
        step = h[..., k].reshape(h.shape[:-1] + (1,) * (diff.ndim - h.ndim + 1))
        cols.append(diff / (2 * step))
    return np.stack(cols, axis=q.ndim - 1)


def _second_difference(fn, q, step):
    d = q.shape[-1]
    h = _fd_steps(q, step, step)
    f0 = fn(q)
    out = np.empty(q.shape[:-1] + (d, d) + f0.shape[q.ndim - 1:])

    def shifted(a, sa, b, sb):
        e = np.zeros_like(q)
        e[..., a] += sa * h[..., a]
        e[..., b] += sb * h[..., b]
        return fn(q + e)

    for k in range(d):
        for l in range(k, d):
            hk = h[..., k].reshape(h.shape[:-1] + (1,) * (f0.ndim - q.ndim + 1))
            hl = h[..., l].reshape(hk.shape)
            if k == l:
                e = np.zeros_like(q)
                e[..., k] = h[..., k]
                val = (fn(q + e) - 2 * f0 + fn(q - e)) / hk**2
            else:
                val = (shifted(k, 1, l, 1) - shifted(k, 1, l, -1)
                       - shifted(k, -1, l, 1) + shifted(k, -1, l, -1)) / (4 * hk * hl)
            out[..., k, l, :, :] = val
            out[..., l, k, :, :] = val
    return out


def spd_inverse(A, what="metric", point=None, error=NonInvertibleMetricError):
    """Inverse of a (batch of) symmetric positive definite matrices via Cholesky."""
    A = np.asarray(A, dtype=float)
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        where = "" if point is None else f" at {np.asarray(point).tolist()}"
        raise error(f"{what} is not positive definite{where}", point) from None
    Linv = np.linalg.inv(L)
    return np.swapaxes(Linv, -1, -2) @ Linv


class Connection(NamedTuple):
    metric: np.ndarray
    metric_inv: np.ndarray
    gamma: np.ndarray
    curvature: Optional[np.ndarray]


def connection_from_jet(G, dG, ddG=None, point=None):
    """Levi-Civita connection data from metric values and partials."""
    Ginv = spd_inverse(G, point=point)
    # Christoffel symbols of the first kind, Gamma_{l,ij}
    lower = 0.5 * (np.swapaxes(dG, -3, -2)
                   + np.einsum("...jli->...lij", dG)
                   - dG)
    gamma = np.einsum("...kl,...lij->...kij", Ginv, lower)
    R = None
    if ddG is not None:
        dGinv = -np.einsum("...ka,...mab,...bl->...mkl", Ginv, dG, Ginv)
        # d_m Gamma_{l,ij}, from ddG[m, n, a, b] = d_m d_n G_ab
        dlower = 0.5 * (np.einsum("...milj->...mlij", ddG)
                        + np.einsum("...mjli->...mlij", ddG)
                        - ddG)
        dgamma = (np.einsum("...mkl,...lij->...mkij", dGinv, lower)
                  + np.einsum("...kl,...mlij->...mkij", Ginv, dlower))
        R = (np.einsum("...iljk->...lijk", dgamma)
             - np.einsum("...jlik->...lijk", dgamma)
             + np.einsum("...njk,...lin->...lijk", gamma, gamma)
             - np.einsum("...nik,...ljn->...lijk", gamma, gamma))
    return Connection(G, Ginv, gamma, R)


def christoffel(metric: TensorField, q) -> np.ndarray:
    """Christoffel symbols ``Gamma^k_ij`` of the Levi-Civita connection, indexed [k, i, j]."""
    G, dG = metric.jet(q, 1)
    return connection_from_jet(G, dG, point=q).gamma


def curvature(metric: TensorField, q) -> np.ndarray:
    """Riemann tensor ``R^l_ijk`` indexed [l, i, j, k]."""
    G, dG, ddG = metric.jet(q, 2)
    return connection_from_jet(G, dG, ddG, point=q).curvature


def sectional_curvature(metric: TensorField, q) -> float:
    """Gaussian curvature of a 2-D chart, g(R(e1,e2)e2, e1) / det g."""
    if metric.dim != 2:
        raise DimensionError("sectional curvature is only defined here for 2-D charts")
    G, dG, ddG = metric.jet(q, 2)
    R = connection_from_jet(G, dG, ddG, point=q).curvature
    num = np.einsum("...l,...l->...", R[..., :, 0, 1, 1], G[..., :, 0])
    return num / np.linalg.det(G)


def induced_metric(metric: TensorField, cometric: TensorField, q) -> np.ndarray:
    """Anti-dual ``N = M Nt M`` measuring the actuation cost of accelerations."""
    M = metric.value(q)
    return M @ cometric.value(q) @ M


def dual_cometric(N) -> np.ndarray:
    """Inverse of an induced metric matrix."""
    return spd_inverse(N, what="induced metric", error=DegenerateInducedMetricError)


def compatibility_tensor(cometric: TensorField, metric: TensorField, q) -> np.ndarray:
    """Covariant derivative of a cometric under the dual Levi-Civita connection.

    Returns ``tau[i, j, k] = d_i H^jk + Gamma^j_il H^lk + Gamma^k_il H^jl``.
    """
    H, dH = cometric.jet(q, 1)
    gamma = christoffel(metric, q)
    return compatibility_from_arrays(H, dH, gamma)


def compatibility_from_arrays(H, dH, gamma):
    t = np.einsum("...jil,...lk->...ijk", gamma, H)
    return dH + t + np.swapaxes(t, -1, -2)


def hstar_jet(M, dM, Nt, dNt, point=None):
    """Dual of the induced metric and its first partials."""
    N = M @ Nt @ M
    H = spd_inverse(N, what="induced metric", point=point, error=DegenerateInducedMetricError)
    Mx = M[..., None, :, :]
    dN = dM @ (Nt @ M)[..., None, :, :] + Mx @ dNt @ Mx + (M @ Nt)[..., None, :, :] @ dM
    Hx = H[..., None, :, :]
    dH = -(Hx @ dN @ Hx)
    return N, H, dH


def hstar_field(metric: TensorField, cometric: TensorField) -> TensorField:
    """The field ``(M Nt M)^-1`` with analytic first partials built from both inputs."""

    def jet(q, order):
        M, dM = metric.jet(q, 1)
        Nt, dNt = cometric.jet(q, 1)
        _, H, dH = hstar_jet(M, dM, Nt, dNt, point=q)
        return H, dH, None

    return TensorField(
        dim=metric.dim,
        evaluator=lambda q: jet(q, 0)[0],
        first=lambda q: jet(q, 1)[1],
        positive=True,
        constant=metric.constant and cometric.constant,
        jet_fn=jet,
    )


def inverse_field(field: TensorField) -> TensorField:
    """Pointwise matrix inverse of an SPD field, with analytic partials."""

    def jet(q, order):
        parts = field.jet(q, order)
        Ti = spd_inverse(parts[0], point=q)
        out = [Ti, None, None]
        if order >= 1:
            Tx = Ti[..., None, :, :]
            out[1] = -(Tx @ parts[1] @ Tx)
        if order >= 2:
            dT = parts[1]
            # d_k d_l T^-1 = Ti (dk T Ti dl T + dl T Ti dk T - dk dl T) Ti
            TidT = Ti[..., None, :, :] @ dT
            term = (dT[..., :, None, :, :] @ TidT[..., None, :, :, :]
                    + dT[..., None, :, :, :] @ TidT[..., :, None, :, :]
                    - parts[2])
            out[2] = Ti[..., None, None, :, :] @ term @ Ti[..., None, None, :, :]
        return tuple(out)

    return TensorField(
        dim=field.dim,
        evaluator=lambda q: jet(q, 0)[0],
        first=lambda q: jet(q, 1)[1],
        second=lambda q: jet(q, 2)[2],
        positive=True,
        constant=field.constant,
        jet_fn=jet,
    )


def mass_matrix_from_jacobians(jacobians: Sequence, masses: Optional[Sequence[float]] = None):
    """``M = sum_i m_i J_i^T J_i`` for point masses with embedding Jacobians ``J_i``."""
    jacobians = [np.atleast_2d(np.asarray(J, dtype=float)) for J in jacobians]
    if not jacobians:
        raise DimensionError("at least one Jacobian is required")
    d = jacobians[0].shape[1]
    if any(J.shape[1] != d for J in jacobians):
        raise DimensionError("all Jacobians must share the same column count")
    if masses is None:
        masses = [1.0] * len(jacobians)
    if len(masses) != len(jacobians):
        raise DimensionError("one mass per Jacobian is required")
    M = sum(m * J.T @ J for m, J in zip(masses, jacobians))
    return 0.5 * (M + M.T)


def torque_cometric(weights: Sequence[float]) -> TensorField:
    """Constant diagonal cometric ``diag(k_1, ..., k_n)`` in actuator coordinates."""
    k = np.asarray(weights, dtype=float)
    if k.ndim != 1 or k.size == 0:
        raise DimensionError("weights must be a nonempty list")
    if np.any(~np.isfinite(k)) or np.any(k <= 0):
        raise GeometryError(f"actuator weights must be positive, got {k.tolist()}")
    D = np.diag(k)
    n = k.size
    return TensorField(
        dim=n,
        evaluator=lambda q: np.broadcast_to(D, np.shape(q)[:-1] + (n, n)).copy(),
        positive=True,
        constant=True,
    )


def pullback_cometric(cometric_matrix, jacobian):
    """Re-express a cometric matrix in another chart: ``J^T Nt J``.

    ``jacobian`` maps covector components of the new chart to those of the old
    one, i.e. ``F_old = J F_new``.
    """
    Nt = np.asarray(cometric_matrix, dtype=float)
    J = np.asarray(jacobian, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1] or J.shape[0] != Nt.shape[0]:
        raise DimensionError(f"incompatible shapes {Nt.shape} and {J.shape}")
    s = np.linalg.svd(J, compute_uv=False)
    if s[-1] <= 1e-14 * max(s[0], 1.0):
        raise GeometryError("change-of-chart Jacobian is singular")
    out = J.T @ Nt @ J
    return 0.5 * (out + out.T)


def indicatrix_samples(matrix, count: int):
    """``count`` points on the unit ellipse ``u^T A u = 1``, equally spaced in angle."""
    A = np.asarray(matrix, dtype=float)
    if A.shape != (2, 2):
        raise DimensionError("indicatrices are only drawn for 2x2 forms")
    if count < 1:
        raise ValueError("count must be positive")
    if np.max(np.abs(A - A.T)) > 1e-12:
        raise GeometryError("indicatrix matrix must be symmetric")
    spd_inverse(A, what="indicatrix form")
    theta = 2 * np.pi * np.arange(count) / count
    dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    # snap exact axis directions so (1, 0), (0, 1), ... come out clean
    dirs[np.abs(dirs) < 1e-15] = 0.0
    scale = np.sqrt(np.einsum("ni,ij,nj->n", dirs, A, dirs))
    return dirs / scale[:, None]


class LocalGeometry(NamedTuple):
    metric: np.ndarray
    gamma: np.ndarray
    curvature: Optional[np.ndarray]
    cometric: np.ndarray
    induced: np.ndarray
    hstar: np.ndarray
    tau: np.ndarray


def local_geometry(metric: TensorField, cometric: TensorField, q, with_curvature=True) -> LocalGeometry:
    """Everything the spline equations need at ``q`` in one pass."""
    q = np.asarray(q, dtype=float)
    d = metric.dim
    if metric.constant:
        M = metric.value(q)
        dM = np.zeros(q.shape[:-1] + (d, d, d))
        spd_inverse(M, point=q)
        gamma = np.zeros(q.shape[:-1] + (d, d, d))
        R = np.zeros(q.shape[:-1] + (d,) * 4) if with_curvature else None
    else:
        jet = metric.jet(q, 2 if with_curvature else 1)
        M, dM = jet[0], jet[1]
        conn = connection_from_jet(*jet, point=q)
        gamma, R = conn.gamma, conn.curvature
    Nt, dNt = cometric.jet(q, 1)
    N, H, dH = hstar_jet(M, dM, Nt, dNt, point=q)
    tau = compatibility_from_arrays(H, dH, gamma)
    return LocalGeometry(M, gamma, R, Nt, N, H, tau)
