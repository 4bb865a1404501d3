# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled per-cell reductions; see ``_kernels_py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, fabs, INFINITY

cnp.import_array()

DEF MAXK = 32
DEF MAXM = 16

cdef double VALUE_FLOOR = 1e-26  # on the normalized mean-square residual
cdef double T_FLOOR = 1e-100


cdef inline double _pow_abs(double x, double p) nogil:
    x = fabs(x)
    if p == 1.0:
        return x
    if p == 2.0:
        return x * x
    if p == 3.0:
        return x * x * x
    return pow(x, p)


cdef inline double _pow_from_sq(double d2, double p) nogil:
    """|v|^p from |v|^2 without a pow call for the common exponents."""
    if p == 2.0:
        return d2
    if p == 1.0:
        return sqrt(d2)
    if p == 3.0:
        return d2 * sqrt(d2)
    return pow(sqrt(d2), p)


def mean_oscillation(const double[:, :, ::1] U, const double[:, ::1] W, double p):
    cdef Py_ssize_t C = U.shape[0], Q = U.shape[1], m = U.shape[2]
    cdef Py_ssize_t c, q, i
    cdef double acc, d2, mean[MAXM]
    if m > MAXM:
        raise ValueError("m too large for compiled kernel")
    out = np.empty(C)
    cdef double[::1] o = out
    with nogil:
        for c in range(C):
            for i in range(m):
                mean[i] = 0.0
            for q in range(Q):
                for i in range(m):
                    mean[i] += W[c, q] * U[c, q, i]
            acc = 0.0
            for q in range(Q):
                d2 = 0.0
                for i in range(m):
                    d2 += (U[c, q, i] - mean[i]) * (U[c, q, i] - mean[i])
                acc += W[c, q] * _pow_from_sq(d2, p)
            o[c] = acc
    return out


def directional_oscillation(const double[:, :, ::1] U, const double[:, ::1] W,
                            const double[:, ::1] S, double p):
    cdef Py_ssize_t C = U.shape[0], Q = U.shape[1], m = U.shape[2], ns = S.shape[0]
    cdef Py_ssize_t c, q, i, s
    cdef double acc, best, pr, mean[MAXM]
    if m > MAXM:
        raise ValueError("m too large for compiled kernel")
    out = np.empty(C)
    cdef double[::1] o = out
    with nogil:
        for c in range(C):
            for i in range(m):
                mean[i] = 0.0
            for q in range(Q):
                for i in range(m):
                    mean[i] += W[c, q] * U[c, q, i]
            best = -INFINITY
            for s in range(ns):
                acc = 0.0
                for q in range(Q):
                    pr = 0.0
                    for i in range(m):
                        pr += (U[c, q, i] - mean[i]) * S[s, i]
                    acc += W[c, q] * _pow_abs(pr, p)
                if acc > best:
                    best = acc
            o[c] = best
    return out


def pair_oscillation(const double[:, :, ::1] U, const double[:, ::1] W, double p):
    cdef Py_ssize_t C = U.shape[0], Q = U.shape[1], m = U.shape[2]
    cdef Py_ssize_t c, q, r, i
    cdef double acc, row, d2, diff
    out = np.empty(C)
    cdef double[::1] o = out
    with nogil:
        for c in range(C):
            acc = 0.0
            for q in range(Q):
                row = 0.0
                for r in range(Q):
                    d2 = 0.0
                    for i in range(m):
                        diff = U[c, q, i] - U[c, r, i]
                        d2 += diff * diff
                    row += W[c, r] * _pow_from_sq(d2, p)
                acc += W[c, q] * row
            o[c] = acc
    return out


cdef int _cholesky_solve(double* H, double* rhs, double* x, int k) nogil:
    """Solve H x = rhs for SPD H (k x k, row-major); H is overwritten."""
    cdef int i, j, l
    cdef double s
    for j in range(k):
        s = H[j * k + j]
        for l in range(j):
            s -= H[j * k + l] * H[j * k + l]
        if s <= 0.0:
            return 1
        H[j * k + j] = sqrt(s)
        for i in range(j + 1, k):
            s = H[i * k + j]
            for l in range(j):
                s -= H[i * k + l] * H[j * k + l]
            H[i * k + j] = s / H[j * k + j]
    for i in range(k):
        s = rhs[i]
        for l in range(i):
            s -= H[i * k + l] * x[l]
        x[i] = s / H[i * k + i]
    for i in range(k - 1, -1, -1):
        s = x[i]
        for l in range(i + 1, k):
            s -= H[l * k + i] * x[l]
        x[i] = s / H[i * k + i]
    return 0


cdef int _ridge_solve(double* H, double* rhs, double* x, int k, double rel) nogil:
    cdef double Hc[MAXK * MAXK]
    cdef double tr = 0.0, ridge
    cdef int i, attempt
    for i in range(k):
        tr += H[i * k + i]
    ridge = rel * (tr / k if tr > 0 else 1e-300)
    for attempt in range(8):
        for i in range(k * k):
            Hc[i] = H[i]
        for i in range(k):
            Hc[i * k + i] += ridge
        if _cholesky_solve(Hc, rhs, x, k) == 0:
            return 0
        ridge *= 1e3
    return 1


cdef double _objective(const double[:, :, :, ::1] M, const double[:, ::1] W, double* v,
                       Py_ssize_t c, double* th, int Q, int m, int k,
                       double p, double mu, bint huber, bint true_value) nogil:
    cdef int q, i, j
    cdef double acc = 0.0, t2, ri, t
    for q in range(Q):
        t2 = 0.0
        for i in range(m):
            ri = v[q * m + i]
            for j in range(k):
                ri -= M[c, q, i, j] * th[j]
            t2 += ri * ri
        t = sqrt(t2)
        if huber and not true_value:
            if t <= mu:
                acc += W[c, q] * t2 / (2.0 * mu)
            else:
                acc += W[c, q] * (t - mu / 2.0)
        else:
            acc += W[c, q] * pow(t, p)
    return acc


cdef void _newton_cell(const double[:, :, :, ::1] M, const double[:, ::1] W, double* v,
                       Py_ssize_t c, double* th, int Q, int m, int k,
                       double p, double mu, double tol, long max_iters,
                       long* iters, double* gnorm_out) nogil:
    cdef double H[MAXK * MAXK]
    cdef double g[MAXK]
    cdef double d[MAXK]
    cdef double trial[MAXK]
    cdef double negg[MAXK]
    cdef double Mtr[MAXK]
    cdef double Mth[MAXK]
    cdef double r[MAXM]
    cdef double f, ft, t, ts, a, b, gn, slope, step, ms
    cdef int q, i, j, l, ls
    cdef bint huber = p == 1.0, accepted
    gnorm_out[0] = INFINITY
    while True:
        for j in range(k * k):
            H[j] = 0.0
        for j in range(k):
            g[j] = 0.0
        f = 0.0
        ms = 0.0
        for q in range(Q):
            t = 0.0
            for i in range(m):
                r[i] = v[q * m + i]
                for j in range(k):
                    r[i] -= M[c, q, i, j] * th[j]
                t += r[i] * r[i]
            t = sqrt(t)
            ts = t if t > T_FLOOR else T_FLOOR
            ms += W[c, q] * t * t
            if huber:
                if t <= mu:
                    f += W[c, q] * t * t / (2.0 * mu)
                    a = 1.0 / mu
                    b = 0.0
                else:
                    f += W[c, q] * (t - mu / 2.0)
                    a = 1.0 / ts
                    b = -1.0 / ts
            else:
                f += W[c, q] * pow(t, p)
                a = p * pow(ts, p - 2.0)
                b = (p - 2.0) * a
            for j in range(k):
                Mtr[j] = 0.0
                for i in range(m):
                    Mtr[j] += M[c, q, i, j] * r[i]
                g[j] -= W[c, q] * a * Mtr[j]
            for j in range(k):
                for l in range(j, k):
                    Mth[0] = 0.0
                    for i in range(m):
                        Mth[0] += M[c, q, i, j] * M[c, q, i, l]
                    H[j * k + l] += W[c, q] * (a * Mth[0] + b * Mtr[j] * Mtr[l] / (ts * ts))
        for j in range(k):
            for l in range(j):
                H[j * k + l] = H[l * k + j]
        gn = 0.0
        for j in range(k):
            gn += g[j] * g[j]
        gn = sqrt(gn)
        gnorm_out[0] = gn
        if gn <= tol or ms <= VALUE_FLOOR or iters[0] >= max_iters:
            return
        for j in range(k):
            negg[j] = -g[j]
        if _ridge_solve(H, negg, d, k, 1e-12) != 0:
            return
        slope = 0.0
        for j in range(k):
            slope += g[j] * d[j]
        step = 1.0
        accepted = False
        for ls in range(60):
            for j in range(k):
                trial[j] = th[j] + step * d[j]
            ft = _objective(M, W, v, c, trial, Q, m, k, p, mu, huber, False)
            if ft <= f + 1e-4 * step * slope + 1e-15 * fabs(f):
                accepted = True
                break
            step *= 0.5
        iters[0] += 1
        if not accepted:
            return
        for j in range(k):
            th[j] = trial[j]


def linear_inf(V, M, W, double p, double mu, double tol, long max_iters):
    cdef const double[:, :, ::1] Vv = np.ascontiguousarray(V, dtype=np.float64)
    cdef const double[:, :, :, ::1] Mv = np.ascontiguousarray(M, dtype=np.float64)
    cdef const double[:, ::1] Wv = np.ascontiguousarray(W, dtype=np.float64)
    cdef Py_ssize_t C = Mv.shape[0]
    cdef int Q = Mv.shape[1], m = Mv.shape[2], k = Mv.shape[3]
    if k > MAXK or m > MAXM:
        raise ValueError("problem too large for compiled kernel")
    theta = np.zeros((C, k))
    value = np.zeros(C)
    grad = np.zeros(C)
    iters = np.zeros(C, dtype=np.int64)
    cdef double[:, ::1] th = theta
    cdef double[::1] val = value
    cdef double[::1] gr = grad
    cdef long[::1] it = iters
    vbuf = np.empty(Q * m)
    cdef double[::1] vb = vbuf
    cdef double G[MAXK * MAXK]
    cdef double bvec[MAXK]
    cdef double x[MAXK]
    cdef double scale, s, gm, mu_j, tol_j
    cdef Py_ssize_t c
    cdef int q, i, j, l
    cdef long n_stage, stage
    with nogil:
        for c in range(C):
            scale = 0.0
            for q in range(Q):
                for i in range(m):
                    scale += Wv[c, q] * Vv[c, q, i] * Vv[c, q, i]
            scale = sqrt(scale)
            if scale == 0.0:
                for j in range(k):
                    th[c, j] = 0.0
                val[c] = 0.0
                gr[c] = 0.0
                continue
            for q in range(Q):
                for i in range(m):
                    vb[q * m + i] = Vv[c, q, i] / scale
            for j in range(k * k):
                G[j] = 0.0
            for j in range(k):
                bvec[j] = 0.0
            for q in range(Q):
                for j in range(k):
                    s = 0.0
                    for i in range(m):
                        s += Mv[c, q, i, j] * vb[q * m + i]
                    bvec[j] += Wv[c, q] * s
                    for l in range(j, k):
                        s = 0.0
                        for i in range(m):
                            s += Mv[c, q, i, j] * Mv[c, q, i, l]
                        G[j * k + l] += Wv[c, q] * s
            for j in range(k):
                for l in range(j):
                    G[j * k + l] = G[l * k + j]
            _ridge_solve(G, bvec, x, k, 1e-14)
            for j in range(k):
                th[c, j] = x[j]
            if p == 2.0:
                # gradient of the quadratic at the normal-equation solution
                for j in range(k):
                    bvec[j] = 0.0
                for q in range(Q):
                    for i in range(m):
                        s = vb[q * m + i]
                        for l in range(k):
                            s -= Mv[c, q, i, l] * x[l]
                        for j in range(k):
                            bvec[j] -= 2.0 * Wv[c, q] * Mv[c, q, i, j] * s
                gm = 0.0
                for j in range(k):
                    gm += bvec[j] * bvec[j]
                gr[c] = sqrt(gm)
            elif p == 1.0:
                n_stage = 0
                mu_j = 1e-1
                while mu_j > mu * 1.000001:
                    n_stage += 1
                    mu_j /= 10.0
                mu_j = 1e-1
                for stage in range(n_stage + 1):
                    if stage == n_stage:
                        mu_j = mu
                        tol_j = tol
                    else:
                        tol_j = tol if tol > 1e-8 else 1e-8
                    _newton_cell(Mv, Wv, &vb[0], c, &th[c, 0], Q, m, k, p, mu_j,
                                 tol_j, max_iters, &it[c], &gr[c])
                    mu_j /= 10.0
            else:
                _newton_cell(Mv, Wv, &vb[0], c, &th[c, 0], Q, m, k, p, mu,
                             tol, max_iters, &it[c], &gr[c])
            val[c] = _objective(Mv, Wv, &vb[0], c, &th[c, 0], Q, m, k, p, mu, False, True)
            if _objective(Mv, Wv, &vb[0], c, &th[c, 0], Q, m, k, 2.0, mu, False, True) <= VALUE_FLOOR:
                gr[c] = 0.0
            for j in range(k):
                th[c, j] *= scale
            val[c] *= pow(scale, p)
    return theta, value, grad, iters
