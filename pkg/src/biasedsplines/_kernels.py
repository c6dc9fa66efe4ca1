"""Compiled inner loop of the extended-state right-hand side.

Takes metric/cometric jets already evaluated at the batch of points and does
all the tensor contractions per batch element. ``geometry.local_geometry``
plus ``hamiltonian.rhs_reference`` compute the same thing with numpy.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _spd_inv(A, out):
    """Cholesky-based inverse; returns False if A is not positive definite."""
    n = A.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not s > 0.0:
            return False
        L[j, j] = np.sqrt(s)
        for i in range(j + 1, n):
            s = A[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / L[j, j]
    # invert the lower-triangular factor
    Li = np.zeros((n, n))
    for i in range(n):
        Li[i, i] = 1.0 / L[i, i]
        for j in range(i):
            s = 0.0
            for k in range(j, i):
                s -= L[i, k] * Li[k, j]
            Li[i, j] = s / L[i, i]
    for i in range(n):
        for j in range(i, n):
            s = 0.0
            for k in range(j, n):
                s += Li[k, i] * Li[k, j]
            out[i, j] = s
            out[j, i] = s
    return True


@njit(cache=True)
def extended_rhs(X, M, dM, ddM, Nt, dNt, flat_metric, out):
    """Fill ``out`` with the derivative of each extended state in ``X``.

    Returns -1 on success, otherwise the batch index where the metric (or the
    induced metric) failed to factor; negative values below -1 flag the
    induced metric as ``-2 - index``.
    """
    B = X.shape[0]
    d = M.shape[1]
    Minv = np.empty((d, d))
    H = np.empty((d, d))
    gamma = np.zeros((d, d, d))
    lower = np.empty((d, d, d))
    dMinv = np.empty((d, d, d))
    dgamma = np.zeros((d, d, d, d))
    N = np.empty((d, d))
    NtM = np.empty((d, d))
    dN = np.empty((d, d, d))
    dH = np.empty((d, d, d))
    tmp = np.empty((d, d))
    A = np.empty((d, d))
    for b in range(B):
        v = X[b, d:2 * d]
        al = X[b, 2 * d:3 * d]
        p = X[b, 3 * d:4 * d]
        Mb = M[b]
        if not _spd_inv(Mb, Minv):
            return b
        if not flat_metric:
            for l in range(d):
                for i in range(d):
                    for j in range(d):
                        lower[l, i, j] = 0.5 * (dM[b, i, l, j] + dM[b, j, l, i] - dM[b, l, i, j])
            for k in range(d):
                for i in range(d):
                    for j in range(d):
                        s = 0.0
                        for l in range(d):
                            s += Minv[k, l] * lower[l, i, j]
                        gamma[k, i, j] = s
            for m in range(d):
                for k in range(d):
                    for l in range(d):
                        s = 0.0
                        for a in range(d):
                            for c in range(d):
                                s -= Minv[k, a] * dM[b, m, a, c] * Minv[c, l]
                        dMinv[m, k, l] = s
            for m in range(d):
                for k in range(d):
                    for i in range(d):
                        for j in range(d):
                            s = 0.0
                            for l in range(d):
                                dl = 0.5 * (ddM[b, m, i, l, j] + ddM[b, m, j, l, i] - ddM[b, m, l, i, j])
                                s += dMinv[m, k, l] * lower[l, i, j] + Minv[k, l] * dl
                            dgamma[m, k, i, j] = s
        # induced metric N = M Nt M and its inverse H
        for i in range(d):
            for j in range(d):
                s = 0.0
                for k in range(d):
                    s += Nt[b, i, k] * Mb[k, j]
                NtM[i, j] = s
        for i in range(d):
            for j in range(d):
                s = 0.0
                for k in range(d):
                    s += Mb[i, k] * NtM[k, j]
                N[i, j] = s
        if not _spd_inv(N, H):
            return -2 - b
        for m in range(d):
            for i in range(d):
                for j in range(d):
                    s = 0.0
                    for k in range(d):
                        # dM Nt M + M Nt dM
                        s += dM[b, m, i, k] * NtM[k, j] + NtM[k, i] * dM[b, m, k, j]
                        for l in range(d):
                            s += Mb[i, k] * dNt[b, m, k, l] * Mb[l, j]
                    dN[m, i, j] = s
            for i in range(d):
                for j in range(d):
                    s = 0.0
                    for k in range(d):
                        s += H[i, k] * dN[m, k, j]
                    tmp[i, j] = s
            for i in range(d):
                for j in range(d):
                    s = 0.0
                    for k in range(d):
                        s -= tmp[i, k] * H[k, j]
                    dH[m, i, j] = s
        # A[k, i] = Gamma^k_ij v^j
        for k in range(d):
            for i in range(d):
                s = 0.0
                for j in range(d):
                    s += gamma[k, i, j] * v[j]
                A[k, i] = s
        for i in range(d):
            out[b, i] = v[i]
            s = 0.0
            for j in range(d):
                s += 0.5 * H[i, j] * al[j] - A[i, j] * v[j]
            out[b, d + i] = s
            s = -p[i]
            for j in range(d):
                s += A[j, i] * al[j]
            out[b, 2 * d + i] = s
            s = 0.0
            for j in range(d):
                s += A[j, i] * p[j]
            # -1/4 tau_i^jk alpha_j alpha_k
            for j in range(d):
                for k in range(d):
                    t = dH[i, j, k]
                    for l in range(d):
                        t += gamma[j, i, l] * H[l, k] + gamma[k, i, l] * H[j, l]
                    s -= 0.25 * t * al[j] * al[k]
            if not flat_metric:
                # R^l_ijk v^j v^k alpha_l
                for l in range(d):
                    for j in range(d):
                        for k in range(d):
                            r = dgamma[i, l, j, k] - dgamma[j, l, i, k]
                            for n in range(d):
                                r += gamma[n, j, k] * gamma[l, i, n] - gamma[n, i, k] * gamma[l, j, n]
                            s += r * v[j] * v[k] * al[l]
            out[b, 3 * d + i] = s
    return -1


# Builtin field kinds understood by the compiled integrator.
METRIC_IDENTITY = 0
METRIC_SPHERE = 1
METRIC_TORUS = 2
METRIC_SERIAL = 3
METRIC_PARALLEL = 4

COMETRIC_DIAGONAL = 0
COMETRIC_DUAL = 1
COMETRIC_QUADRATIC = 2


@njit(cache=True)
def _metric_jet(kind, prm, q, M, dM, ddM):
    d = M.shape[0]
    M[:] = 0.0
    dM[:] = 0.0
    ddM[:] = 0.0
    if kind == METRIC_IDENTITY:
        for i in range(d):
            M[i, i] = 1.0
    elif kind == METRIC_SPHERE or kind == METRIC_TORUS:
        s, c = np.sin(q[1]), np.cos(q[1])
        r = c if kind == METRIC_SPHERE else prm[0] + c
        M[0, 0] = r * r
        M[1, 1] = 1.0
        dM[1, 0, 0] = -2.0 * r * s
        ddM[1, 1, 0, 0] = 2.0 * s * s - 2.0 * r * c
    elif kind == METRIC_SERIAL:
        L1, L2, m = prm[0], prm[1], prm[2]
        k = m * L1 * L2
        c2, s2 = np.cos(q[1]), np.sin(q[1])
        M[0, 0] = m * (L1 * L1 + L2 * L2) + 2.0 * k * c2
        M[0, 1] = m * L2 * L2 + k * c2
        M[1, 0] = M[0, 1]
        M[1, 1] = m * L2 * L2
        dM[1, 0, 0] = -2.0 * k * s2
        dM[1, 0, 1] = -k * s2
        dM[1, 1, 0] = -k * s2
        ddM[1, 1, 0, 0] = -2.0 * k * c2
        ddM[1, 1, 0, 1] = -k * c2
        ddM[1, 1, 1, 0] = -k * c2
    else:
        L1, L2, m = prm[0], prm[1], prm[2]
        k = m * L1 * L2
        cu, su = np.cos(q[0] - q[1]), np.sin(q[0] - q[1])
        M[0, 0] = m * L1 * L1
        M[1, 1] = m * L2 * L2
        M[0, 1] = k * cu
        M[1, 0] = k * cu
        for a in range(2):
            sign = -1.0 if a == 0 else 1.0
            dM[a, 0, 1] = sign * k * su
            dM[a, 1, 0] = sign * k * su
            for b in range(2):
                sb = -1.0 if a == b else 1.0
                ddM[a, b, 0, 1] = sb * k * cu
                ddM[a, b, 1, 0] = sb * k * cu


@njit(cache=True)
def _cometric_jet(kind, prm, blend, q, M, dM, Nt, dNt, Minv):
    """Fill the cometric jet, blended as ``blend * target + (1 - blend) * M^-1``.

    Returns False when the metric cannot be inverted.
    """
    d = M.shape[0]
    Nt[:] = 0.0
    dNt[:] = 0.0
    if kind == COMETRIC_DIAGONAL:
        for i in range(d):
            Nt[i, i] = prm[i]
    elif kind == COMETRIC_QUADRATIC:
        y = q[1]
        Nt[0, 0] = 1.0 + prm[0] * y * y
        Nt[1, 1] = 1.0
        dNt[1, 0, 0] = 2.0 * prm[0] * y
    dual_weight = 1.0 if kind == COMETRIC_DUAL else 1.0 - blend
    if kind != COMETRIC_DUAL:
        for i in range(d):
            for j in range(d):
                Nt[i, j] *= blend
                for m in range(d):
                    dNt[m, i, j] *= blend
    if dual_weight == 0.0:
        return True
    if not _spd_inv(M, Minv):
        return False
    for i in range(d):
        for j in range(d):
            Nt[i, j] += dual_weight * Minv[i, j]
    for m in range(d):
        for i in range(d):
            for j in range(d):
                s = 0.0
                for a in range(d):
                    for b in range(d):
                        s -= Minv[i, a] * dM[m, a, b] * Minv[b, j]
                dNt[m, i, j] += dual_weight * s
    return True


@njit(cache=True)
def builtin_jets(mk, mp, ck, cp, blend, Q, M, dM, ddM, Nt, dNt):
    """Metric and cometric jets at every row of ``Q``; returns -1 or a failing row."""
    d = Q.shape[1]
    Minv = np.empty((d, d))
    for b in range(Q.shape[0]):
        _metric_jet(mk, mp, Q[b], M[b], dM[b], ddM[b])
        if not _cometric_jet(ck, cp, blend, Q[b], M[b], dM[b], Nt[b], dNt[b], Minv):
            return b
    return -1


@njit(cache=True)
def builtin_rhs(mk, mp, ck, cp, blend, X, out):
    B = X.shape[0]
    d = X.shape[1] // 4
    M = np.empty((B, d, d))
    dM = np.empty((B, d, d, d))
    ddM = np.empty((B, d, d, d, d))
    Nt = np.empty((B, d, d))
    dNt = np.empty((B, d, d, d))
    status = builtin_jets(mk, mp, ck, cp, blend, X[:, :d], M, dM, ddM, Nt, dNt)
    if status >= 0:
        return status
    return extended_rhs(X, M, dM, ddM, Nt, dNt, mk == METRIC_IDENTITY, out)


@njit(cache=True)
def builtin_rk4(mk, mp, ck, cp, blend, X0, h, steps, path):
    """Classical RK4 from ``X0[B, 4d]``; ``path`` is ``(steps + 1, B, 4d)`` or ``(1, B, 4d)``.

    Returns ``(code, step)`` with code 0 on success, 1 for a metric failure,
    2 for an induced-metric failure and 3 for a nonfinite state.
    """
    keep = path.shape[0] == steps + 1
    X = X0.copy()
    path[0] = X
    k1 = np.empty_like(X)
    k2 = np.empty_like(X)
    k3 = np.empty_like(X)
    k4 = np.empty_like(X)
    for n in range(steps):
        for stage in range(4):
            if stage == 0:
                Y = X
                k = k1
            elif stage == 1:
                Y = X + 0.5 * h * k1
                k = k2
            elif stage == 2:
                Y = X + 0.5 * h * k2
                k = k3
            else:
                Y = X + h * k3
                k = k4
            status = builtin_rhs(mk, mp, ck, cp, blend, Y, k)
            if status >= 0:
                return 1, n
            if status < -1:
                return 2, n
        Xn = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(Xn)):
            return 3, n
        X = Xn
        if keep:
            path[n + 1] = X
    if not keep:
        path[0] = X
    return 0, steps
