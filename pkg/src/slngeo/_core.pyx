# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Dormand-Prince loop for the built-in geodesic systems.

Mirrors ``_stepper.dopri5`` step for step; the right-hand sides and
projections are the C counterparts of the ``*_flat`` functions in
``integrate`` and ``blockdiag``. Kinds: 0 phase, 1 reduced, 2 jacobi, 3 block.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, pow, isfinite, INFINITY, NAN
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy

from ._stepper import A as _A, B as _B, C as _C, E as _E, P as _P, output_grid

cnp.import_array()

cdef double TC[7]
cdef double TA[7][6]
cdef double TB[7]
cdef double TE[7]
cdef double TP[7][4]

cdef int _i, _j
for _i in range(7):
    TC[_i] = _C[_i]
    TB[_i] = _B[_i]
    TE[_i] = _E[_i]
    for _j in range(6):
        TA[_i][_j] = _A[_i, _j]
    for _j in range(4):
        TP[_i][_j] = _P[_i, _j]

cdef double SAFETY = 0.9
cdef double MIN_FACTOR = 0.2
cdef double MAX_FACTOR = 10.0
cdef double H_MIN = 1e-14

cdef enum:
    PHASE = 0
    REDUCED = 1
    JACOBI = 2
    BLOCK = 3


cdef struct Sys:
    int kind
    int n
    int m
    int odd
    int dim
    double* z
    double* ws
    int* piv


# ---------------------------------------------------------------------------
# small dense kernels (row-major n x n)


cdef int lu_inverse(const double* M, double* inv, double* lu, int* piv, int n, double* det) noexcept nogil:
    """LU with partial pivoting; writes det and (if inv != NULL) the inverse."""
    cdef int i, j, k, p
    cdef double amax, f, d = 1.0, tmp
    memcpy(lu, M, n * n * sizeof(double))
    for k in range(n):
        p = k
        amax = fabs(lu[k * n + k])
        for i in range(k + 1, n):
            if fabs(lu[i * n + k]) > amax:
                amax = fabs(lu[i * n + k])
                p = i
        if not (amax > 0.0) or not isfinite(amax):
            return -1
        piv[k] = p
        if p != k:
            d = -d
            for j in range(n):
                tmp = lu[k * n + j]
                lu[k * n + j] = lu[p * n + j]
                lu[p * n + j] = tmp
        d *= lu[k * n + k]
        for i in range(k + 1, n):
            f = lu[i * n + k] / lu[k * n + k]
            lu[i * n + k] = f
            for j in range(k + 1, n):
                lu[i * n + j] -= f * lu[k * n + j]
    det[0] = d
    if inv == NULL:
        return 0
    for i in range(n * n):
        inv[i] = 0.0
    for i in range(n):
        inv[i * n + i] = 1.0
    for k in range(n):
        p = piv[k]
        if p != k:
            for j in range(n):
                tmp = inv[k * n + j]
                inv[k * n + j] = inv[p * n + j]
                inv[p * n + j] = tmp
    for i in range(n):
        for k in range(i):
            f = lu[i * n + k]
            for j in range(n):
                inv[i * n + j] -= f * inv[k * n + j]
    for i in range(n - 1, -1, -1):
        for k in range(i + 1, n):
            f = lu[i * n + k]
            for j in range(n):
                inv[i * n + j] -= f * inv[k * n + j]
        f = lu[i * n + i]
        for j in range(n):
            inv[i * n + j] /= f
    return 0


cdef void mm(const double* X, const double* Y, double* Z, int n) noexcept nogil:
    cdef int i, j, k
    cdef double a
    for i in range(n * n):
        Z[i] = 0.0
    for i in range(n):
        for k in range(n):
            a = X[i * n + k]
            for j in range(n):
                Z[i * n + j] += a * Y[k * n + j]


cdef double tr_prod(const double* X, const double* Y, int n) noexcept nogil:
    """tr(X Y)."""
    cdef int i, j
    cdef double s = 0.0
    for i in range(n):
        for j in range(n):
            s += X[i * n + j] * Y[j * n + i]
    return s


cdef double dot(const double* X, const double* Y, int n) noexcept nogil:
    """tr(X Y^T)."""
    cdef int i
    cdef double s = 0.0
    for i in range(n * n):
        s += X[i] * Y[i]
    return s


# ---------------------------------------------------------------------------
# right-hand sides


cdef int rhs_phase(Sys* S, const double* y, double* out) noexcept nogil:
    cdef int n = S.n, k = n * n, i, j
    cdef double* Ai = S.ws
    cdef double* lu = S.ws + k
    cdef double* P = S.ws + 2 * k
    cdef double d, q, s
    if lu_inverse(y, Ai, lu, S.piv, n, &d) < 0:
        return -1
    mm(y + k, Ai, P, n)
    q = tr_prod(P, P, n)
    s = dot(Ai, Ai, n)
    memcpy(out, y + k, k * sizeof(double))
    for i in range(n):
        for j in range(n):
            out[k + i * n + j] = q / s * Ai[j * n + i]
    return 0


cdef int rhs_reduced(Sys* S, const double* y, double* out) noexcept nogil:
    cdef int n = S.n, k = n * n, i, j
    cdef const double* b = y
    cdef const double* w = y + k
    cdef const double* z = y + 2 * k
    cdef double* wb = S.ws
    cdef double* zb = S.ws + k
    cdef double* wm = S.ws + 2 * k
    cdef double* wp = S.ws + 3 * k
    cdef double* tmp = S.ws + 4 * k
    cdef double T, trb = 0.0
    mm(w, b, wb, n)
    mm(z, b, zb, n)
    T = tr_prod(wb, wb, n) + tr_prod(zb, zb, n)
    for i in range(n):
        trb += b[i * n + i]
    mm(b, wb, out, n)
    for i in range(k):
        out[i] = -out[i]
        wm[i] = w[i] - z[i]
        wp[i] = w[i] + z[i]
        out[2 * k + i] = 0.0
    mm(wm, b, tmp, n)
    mm(tmp, wp, out + k, n)
    for i in range(k):
        out[k + i] *= 0.5
    for i in range(n):
        out[k + i * n + i] += 0.5 * T / trb
    return 0


cdef int rhs_jacobi(Sys* S, const double* y, double* out) noexcept nogil:
    cdef int n = S.n, k = n * n, i, j
    cdef const double* V = y + k
    cdef const double* J = y + 2 * k
    cdef const double* W = y + 3 * k
    cdef double* Ai = S.ws
    cdef double* lu = S.ws + k
    cdef double* P = S.ws + 2 * k
    cdef double* R = S.ws + 3 * k
    cdef double* G = S.ws + 4 * k
    cdef double* WA = S.ws + 5 * k
    cdef double* PR = S.ws + 6 * k
    cdef double d, q, s, dq, coef
    if lu_inverse(y, Ai, lu, S.piv, n, &d) < 0:
        return -1
    mm(V, Ai, P, n)
    mm(J, Ai, R, n)
    mm(Ai, R, G, n)
    mm(W, Ai, WA, n)
    mm(P, R, PR, n)
    q = tr_prod(P, P, n)
    s = dot(Ai, Ai, n)
    dq = 2.0 * tr_prod(WA, P, n) - 2.0 * tr_prod(PR, P, n)
    coef = dq / s + 2.0 * q * dot(G, Ai, n) / (s * s)
    memcpy(out, V, k * sizeof(double))
    memcpy(out + 2 * k, W, k * sizeof(double))
    for i in range(n):
        for j in range(n):
            out[k + i * n + j] = q / s * Ai[j * n + i]
            out[3 * k + i * n + j] = coef * Ai[j * n + i] - (q / s) * G[j * n + i]
    return 0


cdef int rhs_block(Sys* S, const double* y, double* out) noexcept nogil:
    cdef int m = S.m, i
    cdef const double* b0 = y
    cdef const double* b1 = y + m
    cdef const double* b2 = y + 2 * m
    cdef const double* w0 = y + 3 * m
    cdef const double* w1 = y + 4 * m
    cdef const double* w2 = y + 5 * m
    cdef double T = 0.0, trb = 0.0, z, z2, wb, det2, binf = 0.0, winf = 0.0, half
    for i in range(m):
        z = S.z[i]
        det2 = b0[i] * b0[i] - b1[i] * b1[i] - b2[i] * b2[i]
        wb = w0[i] * b0[i] + w1[i] * b1[i] + w2[i] * b2[i]
        T += 4.0 * wb * wb + 2.0 * (w1[i] * w1[i] + w2[i] * w2[i] - w0[i] * w0[i]) * det2
        T += -2.0 * z * z * det2
        trb += 2.0 * b0[i]
    if S.odd:
        binf = y[6 * m]
        winf = y[6 * m + 1]
        T += winf * winf * binf * binf
        trb += binf
    half = 0.5 * T / trb
    for i in range(m):
        z = S.z[i]
        z2 = z * z
        out[i] = -(w0[i] * (b0[i] * b0[i] + b1[i] * b1[i] + b2[i] * b2[i])
                   + 2.0 * b0[i] * b1[i] * w1[i] + 2.0 * b0[i] * b2[i] * w2[i])
        out[m + i] = -(b0[i] * b0[i] * w1[i] + 2.0 * b0[i] * b1[i] * w0[i] + b1[i] * b1[i] * w1[i]
                       + 2.0 * b1[i] * b2[i] * w2[i] - b2[i] * b2[i] * w1[i])
        out[2 * m + i] = -(b0[i] * b0[i] * w2[i] + 2.0 * b0[i] * b2[i] * w0[i] - b1[i] * b1[i] * w2[i]
                           + 2.0 * b1[i] * b2[i] * w1[i] + b2[i] * b2[i] * w2[i])
        out[3 * m + i] = 0.5 * (b0[i] * (w0[i] * w0[i] + w1[i] * w1[i] + w2[i] * w2[i])
                                + 2.0 * b1[i] * w0[i] * w1[i] + 2.0 * b2[i] * w0[i] * w2[i]
                                + 2.0 * z * (b2[i] * w1[i] - b1[i] * w2[i])
                                + z2 * b0[i]) + half
        out[4 * m + i] = 0.5 * (2.0 * b0[i] * w0[i] * w1[i]
                                + b1[i] * (w0[i] * w0[i] + w1[i] * w1[i] - w2[i] * w2[i])
                                + 2.0 * b2[i] * w1[i] * w2[i]
                                + 2.0 * z * (b0[i] * w2[i] + b2[i] * w0[i])
                                - z2 * b1[i])
        out[5 * m + i] = 0.5 * (2.0 * b0[i] * w0[i] * w2[i] + 2.0 * b1[i] * w1[i] * w2[i]
                                + b2[i] * (w0[i] * w0[i] - w1[i] * w1[i] + w2[i] * w2[i])
                                - 2.0 * z * (b0[i] * w1[i] + b1[i] * w0[i])
                                - z2 * b2[i])
    if S.odd:
        out[6 * m] = -binf * binf * winf
        out[6 * m + 1] = 0.5 * winf * winf * binf + half
    return 0


cdef int rhs(Sys* S, const double* y, double* out) noexcept nogil:
    cdef int r
    if S.kind == PHASE:
        r = rhs_phase(S, y, out)
    elif S.kind == REDUCED:
        r = rhs_reduced(S, y, out)
    elif S.kind == JACOBI:
        r = rhs_jacobi(S, y, out)
    else:
        r = rhs_block(S, y, out)
    if r < 0:
        return -1
    for r in range(S.dim):
        if not isfinite(out[r]):
            return -1
    return 0


# ---------------------------------------------------------------------------
# projections (out may not alias y)


cdef int project_group(Sys* S, double* M, int n) noexcept nogil:
    cdef double d, c
    cdef int i
    if lu_inverse(M, NULL, S.ws + n * n, S.piv, n, &d) < 0:
        return -1
    if not (d > 0.0) or not isfinite(d):
        return -1
    c = pow(d, -1.0 / n)
    for i in range(n * n):
        M[i] *= c
    return 0


cdef void project_tangent(const double* Ai, double* X, int n) noexcept nogil:
    cdef int i, j
    cdef double s = dot(Ai, Ai, n), t = tr_prod(Ai, X, n)
    for i in range(n):
        for j in range(n):
            X[i * n + j] -= t / s * Ai[j * n + i]


cdef int proj_phase(Sys* S, const double* y, double* out) noexcept nogil:
    cdef int n = S.n, k = n * n
    cdef double d
    memcpy(out, y, S.dim * sizeof(double))
    if project_group(S, out, n) < 0:
        return -1
    if lu_inverse(out, S.ws, S.ws + k, S.piv, n, &d) < 0:
        return -1
    project_tangent(S.ws, out + k, n)
    return 0


cdef int proj_reduced(Sys* S, const double* y, double* out) noexcept nogil:
    cdef int n = S.n, k = n * n, i, j
    cdef double* b = out
    cdef double* w = out + k
    cdef double* z = out + 2 * k
    cdef double c, trb = 0.0
    for i in range(n):
        for j in range(n):
            b[i * n + j] = 0.5 * (y[i * n + j] + y[j * n + i])
            w[i * n + j] = 0.5 * (y[k + i * n + j] + y[k + j * n + i])
            z[i * n + j] = 0.5 * (y[2 * k + i * n + j] - y[2 * k + j * n + i])
    if project_group(S, b, n) < 0:
        return -1
    for i in range(n):
        trb += b[i * n + i]
    c = dot(b, w, n) / trb
    for i in range(n):
        w[i * n + i] -= c
    return 0


cdef int proj_jacobi(Sys* S, const double* y, double* out) noexcept nogil:
    cdef int n = S.n, k = n * n, i, j
    cdef double* Ai = S.ws
    cdef double* G = S.ws + 2 * k
    cdef double* H = S.ws + 3 * k
    cdef double d, s, target, t
    memcpy(out, y, S.dim * sizeof(double))
    if project_group(S, out, n) < 0:
        return -1
    if lu_inverse(out, Ai, S.ws + k, S.piv, n, &d) < 0:
        return -1
    project_tangent(Ai, out + k, n)
    project_tangent(Ai, out + 2 * k, n)
    s = dot(Ai, Ai, n)
    mm(Ai, out + k, G, n)
    mm(G, Ai, H, n)
    target = tr_prod(H, out + 2 * k, n)
    t = (tr_prod(Ai, out + 3 * k, n) - target) / s
    for i in range(n):
        for j in range(n):
            out[3 * k + i * n + j] -= t * Ai[j * n + i]
    return 0


cdef int proj_block(Sys* S, const double* y, double* out) noexcept nogil:
    cdef int m = S.m, i, n
    cdef double det = 1.0, c, num = 0.0, den = 0.0
    memcpy(out, y, S.dim * sizeof(double))
    n = 2 * m + S.odd
    for i in range(m):
        if not (out[i] > 0.0):
            return -1
        det *= out[i] * out[i] - out[m + i] * out[m + i] - out[2 * m + i] * out[2 * m + i]
    if S.odd:
        det *= out[6 * m]
    if not (det > 0.0) or not isfinite(det):
        return -1
    c = pow(det, -1.0 / n)
    for i in range(3 * m):
        out[i] *= c
    if S.odd:
        out[6 * m] *= c
    for i in range(m):
        num += 2.0 * (out[i] * out[3 * m + i] + out[m + i] * out[4 * m + i] + out[2 * m + i] * out[5 * m + i])
        den += 2.0 * out[i]
    if S.odd:
        num += out[6 * m] * out[6 * m + 1]
        den += out[6 * m]
    c = num / den
    for i in range(m):
        out[3 * m + i] -= c
    if S.odd:
        out[6 * m + 1] -= c
    return 0


cdef int project(Sys* S, const double* y, double* out) noexcept nogil:
    cdef int r, i
    if S.kind == PHASE:
        r = proj_phase(S, y, out)
    elif S.kind == REDUCED:
        r = proj_reduced(S, y, out)
    elif S.kind == JACOBI:
        r = proj_jacobi(S, y, out)
    else:
        r = proj_block(S, y, out)
    if r < 0:
        return -1
    for i in range(S.dim):
        if not isfinite(out[i]):
            return -1
    return 0


# ---------------------------------------------------------------------------
# the Dormand-Prince loop


cdef double rms_scaled(const double* x, const double* y, int dim, double rtol, double atol) noexcept nogil:
    cdef int i
    cdef double s = 0.0, v
    for i in range(dim):
        v = x[i] / (atol + rtol * fabs(y[i]))
        s += v * v
    return sqrt(s / dim)


cdef int dopri5_loop(Sys* S, double* y, double t0, double t_end, const double* grid, int ng,
                     double rtol, double atol, long max_steps, double* out, int* n_out_ptr) noexcept nogil:
    cdef int dim = S.dim
    cdef double* K = <double*> malloc(7 * dim * sizeof(double))
    cdef double* yt = <double*> malloc(dim * sizeof(double))
    cdef double* ynew = <double*> malloc(dim * sizeof(double))
    cdef double* yproj = <double*> malloc(dim * sizeof(double))
    cdef double* Q = <double*> malloc(4 * dim * sizeof(double))
    cdef double* diff = <double*> malloc(dim * sizeof(double))
    cdef int i, j, l, stage_fail, status = 0, n_out = 1
    cdef long steps = 0
    cdef double direction = 1.0 if t_end > t0 else -1.0
    cdef double span = fabs(t_end - t0), t = t0, h, hs, remaining, t_new, err_norm, e, sc
    cdef double d0, d1, d2, h0, h1, th, tau, factor, acc, th2, th3, th4
    if K == NULL or yt == NULL or ynew == NULL or yproj == NULL or Q == NULL or diff == NULL:
        status = -2
        n_out_ptr[0] = 0
        free(K); free(yt); free(ynew); free(yproj); free(Q); free(diff)
        return status

    if rhs(S, y, K) < 0:
        status = 3
    else:
        # initial step heuristic, identical to the Python loop
        d0 = rms_scaled(y, y, dim, rtol, atol)
        d1 = rms_scaled(K, y, dim, rtol, atol)
        if d0 < 1e-5 or d1 < 1e-5:
            h0 = 1e-6
        else:
            h0 = 0.01 * d0 / d1
        if h0 > span:
            h0 = span
        for i in range(dim):
            yt[i] = y[i] + direction * h0 * K[i]
        if rhs(S, yt, K + dim) < 0:
            status = 3
        else:
            for i in range(dim):
                diff[i] = K[dim + i] - K[i]
            d2 = rms_scaled(diff, y, dim, rtol, atol) / h0
            if d1 <= 1e-15 and d2 <= 1e-15:
                h1 = h0 * 1e-3
                if h1 < 1e-6:
                    h1 = 1e-6
            else:
                h1 = pow(0.01 / (d1 if d1 > d2 else d2), 0.2)
            h = 100.0 * h0
            if h1 < h:
                h = h1
            if span < h:
                h = span

    while status == 0 and n_out < ng:
        if steps >= max_steps:
            status = 2
            break
        remaining = fabs(t_end - t)
        if h >= remaining:
            h = remaining
        hs = direction * h
        stage_fail = 0
        for l in range(1, 7):
            for i in range(dim):
                acc = 0.0
                for j in range(l):
                    acc += TA[l][j] * K[j * dim + i]
                yt[i] = y[i] + hs * acc
            if rhs(S, yt, K + l * dim) < 0:
                stage_fail = 1
                break
        steps += 1
        err_norm = 0.0
        if stage_fail:
            err_norm = INFINITY
        else:
            for i in range(dim):
                acc = 0.0
                e = 0.0
                for j in range(7):
                    acc += TB[j] * K[j * dim + i]
                    e += TE[j] * K[j * dim + i]
                ynew[i] = y[i] + hs * acc
                if not isfinite(ynew[i]):
                    err_norm = INFINITY
                    break
                sc = atol + rtol * (fabs(y[i]) if fabs(y[i]) > fabs(ynew[i]) else fabs(ynew[i]))
                e = fabs(hs * e) / sc
                if e > err_norm:
                    err_norm = e
        if err_norm <= 1.0:
            t_new = t + hs if h < remaining else t_end
            for i in range(dim):
                for l in range(4):
                    acc = 0.0
                    for j in range(7):
                        acc += K[j * dim + i] * TP[j][l]
                    Q[i * 4 + l] = acc
            if project(S, ynew, yproj) < 0:
                status = 3
                break
            while n_out < ng and direction * (grid[n_out] - t_new) <= 0.0:
                tau = grid[n_out]
                if tau == t_new:
                    memcpy(out + n_out * dim, yproj, dim * sizeof(double))
                else:
                    th = (tau - t) / hs
                    th2 = th * th
                    th3 = th2 * th
                    th4 = th3 * th
                    for i in range(dim):
                        yt[i] = y[i] + hs * (Q[i * 4] * th + Q[i * 4 + 1] * th2
                                             + Q[i * 4 + 2] * th3 + Q[i * 4 + 3] * th4)
                    if project(S, yt, out + n_out * dim) < 0:
                        status = 3
                        break
                n_out += 1
            if status != 0:
                break
            t = t_new
            memcpy(y, yproj, dim * sizeof(double))
            if n_out >= ng:
                break
            if err_norm == 0.0:
                factor = MAX_FACTOR
            else:
                factor = SAFETY * pow(err_norm, -0.2)
                if factor > MAX_FACTOR:
                    factor = MAX_FACTOR
            h *= factor
            if rhs(S, y, K) < 0:
                status = 3
                break
        else:
            if not isfinite(err_norm):
                factor = MIN_FACTOR
            else:
                factor = SAFETY * pow(err_norm, -0.2)
                if factor < MIN_FACTOR:
                    factor = MIN_FACTOR
            h *= factor
            if h < H_MIN * (fabs(t) if fabs(t) > 1.0 else 1.0):
                status = 1
                break
    n_out_ptr[0] = n_out
    free(K); free(yt); free(ynew); free(yproj); free(Q); free(diff)
    return status


# ---------------------------------------------------------------------------
# Python entry points


cdef class _System:
    cdef Sys S
    cdef object _z
    cdef object _ws
    cdef object _piv

    def __init__(self, int kind, int n, int m=0, int odd=0, z=None):
        cdef cnp.ndarray[cnp.float64_t, ndim=1] zz
        cdef cnp.ndarray[cnp.float64_t, ndim=1] ws
        cdef cnp.ndarray[cnp.int32_t, ndim=1] piv
        if kind not in (PHASE, REDUCED, JACOBI, BLOCK):
            raise ValueError(f"unknown system kind {kind}")
        self.S.kind = kind
        self.S.n = n
        self.S.m = m
        self.S.odd = odd
        if kind == PHASE:
            self.S.dim = 2 * n * n
        elif kind == REDUCED:
            self.S.dim = 3 * n * n
        elif kind == JACOBI:
            self.S.dim = 4 * n * n
        else:
            self.S.dim = 6 * m + 2 * odd
        zz = np.ascontiguousarray(z if z is not None else np.zeros(max(m, 1)), dtype=np.float64)
        if kind == BLOCK and zz.shape[0] < m:
            raise ValueError("need one angular momentum per block")
        ws = np.zeros(12 * max(n, 1) * max(n, 1) + 8, dtype=np.float64)
        piv = np.zeros(max(n, 1), dtype=np.int32)
        self._z, self._ws, self._piv = zz, ws, piv
        self.S.z = &zz[0]
        self.S.ws = &ws[0]
        self.S.piv = <int*> &piv[0]

    def _check(self, y):
        arr = np.ascontiguousarray(y, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] != self.S.dim:
            raise ValueError(f"state must have length {self.S.dim}")
        return arr


def rhs_eval(int kind, y, int n, int m=0, int odd=0, z=None):
    """Evaluate the compiled right-hand side once (for equivalence tests)."""
    cdef _System sysobj = _System(kind, n, m, odd, z)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] yy = sysobj._check(y).copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(sysobj.S.dim)
    if rhs(&sysobj.S, &yy[0], &out[0]) < 0:
        raise ArithmeticError("right-hand side undefined at this state")
    return out


def project_eval(int kind, y, int n, int m=0, int odd=0, z=None):
    """Apply the compiled constraint projection once."""
    cdef _System sysobj = _System(kind, n, m, odd, z)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] yy = sysobj._check(y).copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(sysobj.S.dim)
    if project(&sysobj.S, &yy[0], &out[0]) < 0:
        raise ArithmeticError("state cannot be projected (singular or non-finite)")
    return out


def integrate(int kind, y0, double t0, double t_end, double rtol, double atol, double dt_out,
              int n, int m, int odd, z, long max_steps):
    """Run the compiled loop; returns (times, states, status) like ``_stepper.dopri5``."""
    cdef _System sysobj = _System(kind, n, m, odd, z)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y_in = sysobj._check(y0).copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.empty(sysobj.S.dim)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] grid = np.ascontiguousarray(output_grid(t0, t_end, dt_out))
    cdef int ng = grid.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((ng, sysobj.S.dim))
    cdef int n_out = 1, status = 0
    if project(&sysobj.S, &y_in[0], &y[0]) < 0:
        raise ArithmeticError("initial state cannot be projected (singular or non-finite)")
    out[0, :] = y
    if ng > 1:
        with nogil:
            status = dopri5_loop(&sysobj.S, &y[0], t0, t_end, &grid[0], ng, rtol, atol,
                                 max_steps, &out[0, 0], &n_out)
    if status == -2:
        raise MemoryError("could not allocate integrator workspace")
    return grid[:n_out].copy(), out[:n_out].copy(), status
