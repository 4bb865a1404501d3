"""Pure-numpy implementations of the hot per-cell reductions.

Every function here has a compiled twin in ``_kernels.pyx`` with the same
signature; ``gbmo.kernels`` picks one at import time.

Array conventions (all float64):
    U, V : (C, Q, m)  field samples per cell and node
    W    : (C, Q)     normalized quadrature weights (rows sum to 1)
    M    : (C, Q, m, k) linear parametrization of the residual, r = V - M @ theta
"""

import numpy as np

# A normalized mean-square residual below this is an exact fit up to
# round-off; the objective is nonnegative so this certifies optimality.
VALUE_FLOOR = 1e-26
_T_FLOOR = 1e-100


def mean_oscillation(U, W, p):
    mean = np.einsum("cq,cqm->cm", W, U)
    dev = np.sqrt(np.sum((U - mean[:, None, :]) ** 2, axis=2))
    return np.einsum("cq,cq->c", W, dev**p)


def directional_oscillation(U, W, S, p):
    mean = np.einsum("cq,cqm->cm", W, U)
    proj = np.einsum("cqm,sm->csq", U - mean[:, None, :], S)
    vals = np.einsum("cq,csq->cs", W, np.abs(proj) ** p)
    return vals.max(axis=1)


def pair_oscillation(U, W, p):
    C = U.shape[0]
    out = np.empty(C)
    for c in range(C):
        diff = U[c][:, None, :] - U[c][None, :, :]
        d = np.sqrt(np.sum(diff**2, axis=2))
        out[c] = W[c] @ (d**p) @ W[c]
    return out


def _objective(r, W, p, mu):
    t = np.sqrt(np.sum(r**2, axis=-1))
    if p == 1.0:
        phi = np.where(t <= mu, t**2 / (2 * mu), t - mu / 2)
    else:
        phi = t**p
    return np.sum(W * phi, axis=-1)


def _true_value(r, W, p):
    t = np.sqrt(np.sum(r**2, axis=-1))
    return np.sum(W * t**p, axis=-1)


def _newton(v, M, W, theta, p, mu, tol, max_iters, iters):
    """Damped Newton on the active cells, in place on theta/iters."""
    C, Q, m, k = M.shape
    grad_norm = np.full(C, np.inf)
    active = np.ones(C, dtype=bool)
    eye = np.eye(k)
    while active.any():
        idx = np.nonzero(active)[0]
        Ma, Wa, va, th = M[idx], W[idx], v[idx], theta[idx]
        r = va - np.einsum("cqmk,ck->cqm", Ma, th)
        f = _objective(r, Wa, p, mu)
        t = np.sqrt(np.sum(r**2, axis=2))
        ts = np.maximum(t, _T_FLOOR)
        rhat = r / ts[:, :, None]
        if p == 1.0:
            inner = t <= mu
            a = np.where(inner, 1.0 / mu, 1.0 / ts)
            b = np.where(inner, 0.0, -1.0 / ts)
        else:
            a = p * ts ** (p - 2)
            b = (p - 2) * a
        Mtr = np.einsum("cqmk,cqm->cqk", Ma, r)
        Mtrhat = np.einsum("cqmk,cqm->cqk", Ma, rhat)
        g = -np.einsum("cq,cqk->ck", Wa * a, Mtr)
        H = np.einsum("cq,cqmk,cqml->ckl", Wa * a, Ma, Ma) + np.einsum(
            "cq,cqk,cql->ckl", Wa * b, Mtrhat, Mtrhat
        )
        gn = np.sqrt(np.sum(g**2, axis=1))
        grad_norm[idx] = gn
        done = (gn <= tol) | (_true_value(r, Wa, 2.0) <= VALUE_FLOOR) | (iters[idx] >= max_iters)
        if done.all():
            active[idx] = False
            break
        keep = ~done
        active[idx[done]] = False
        idx, Ma, Wa, va, th = idx[keep], Ma[keep], Wa[keep], va[keep], th[keep]
        H, g, f = H[keep], g[keep], f[keep]
        ridge = 1e-12 * np.maximum(np.trace(H, axis1=1, axis2=2) / k, 1e-300)
        d = np.linalg.solve(H + ridge[:, None, None] * eye, -g[:, :, None])[:, :, 0]
        slope = np.sum(g * d, axis=1)
        step = np.ones(len(idx))
        pending = np.ones(len(idx), dtype=bool)
        new_th = th.copy()
        for _ in range(60):
            if not pending.any():
                break
            pi = np.nonzero(pending)[0]
            trial = th[pi] + step[pi, None] * d[pi]
            rt = va[pi] - np.einsum("cqmk,ck->cqm", Ma[pi], trial)
            ft = _objective(rt, Wa[pi], p, mu)
            ok = ft <= f[pi] + 1e-4 * step[pi] * slope[pi] + 1e-15 * np.abs(f[pi])
            new_th[pi[ok]] = trial[ok]
            pending[pi[ok]] = False
            step[pi[~ok]] *= 0.5
        stalled = pending
        theta[idx] = new_th
        iters[idx] += 1
        # a failed line search means no further progress is possible
        active[idx[stalled]] = False
    return grad_norm


def linear_inf(V, M, W, p, mu, tol, max_iters):
    """Minimize sum_q W_q |V_q - M_q theta|^p per cell.

    Returns (theta, value, grad_norm, iters). ``grad_norm`` is measured on the
    RMS-normalized problem. For p == 1 the objective is Huber-smoothed with
    parameter ``mu`` (normalized units) and ``value`` is the unsmoothed
    objective at the smoothed minimizer.
    """
    V = np.ascontiguousarray(V, dtype=float)
    M = np.ascontiguousarray(M, dtype=float)
    W = np.ascontiguousarray(W, dtype=float)
    C, Q, m, k = M.shape
    scale = np.sqrt(np.einsum("cq,cqm->c", W, V**2))
    safe = np.where(scale > 0, scale, 1.0)
    v = V / safe[:, None, None]
    G = np.einsum("cq,cqmk,cqml->ckl", W, M, M)
    b = np.einsum("cq,cqmk,cqm->ck", W, M, v)
    ridge = 1e-14 * np.maximum(np.trace(G, axis1=1, axis2=2) / k, 1e-300)
    theta = np.linalg.solve(G + ridge[:, None, None] * np.eye(k), b[:, :, None])[:, :, 0]
    iters = np.zeros(C, dtype=np.int64)
    if p == 2.0:
        r = v - np.einsum("cqmk,ck->cqm", M, theta)
        g = -2 * np.einsum("cq,cqmk,cqm->ck", W, M, r)
        grad_norm = np.sqrt(np.sum(g**2, axis=1))
    elif p == 1.0:
        mus = []
        cur = 1e-1
        while cur > mu * 1.000001:
            mus.append(cur)
            cur /= 10.0
        mus.append(mu)
        for j, mu_j in enumerate(mus):
            t_j = tol if j == len(mus) - 1 else max(tol, 1e-8)
            grad_norm = _newton(v, M, W, theta, p, mu_j, t_j, max_iters, iters)
    else:
        grad_norm = _newton(v, M, W, theta, p, mu, tol, max_iters, iters)
    r = v - np.einsum("cqmk,ck->cqm", M, theta)
    value = _true_value(r, W, p)
    exact = _true_value(r, W, 2.0) <= VALUE_FLOOR
    zero = scale == 0
    theta = theta * safe[:, None]
    theta[zero] = 0.0
    value = value * safe**p
    value[zero] = 0.0
    grad_norm = np.where(zero | exact, 0.0, grad_norm)
    return theta, value, grad_norm, iters
