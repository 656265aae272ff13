"""Numba coordinate-descent kernels shared by all fitters.

Every estimator in the package is an instance of

    minimize_b  0.5*||y - X b||^2 + (ridge/2)*||b||^2 + pen(b) - shift' b

with pen either lam*||b||_1 (family 0) or the minimax concave penalty with
parameters (lam, gamma, n_pen) summed over coordinates (family 1). The
kernels use actual column norms, so they remain correct on data that is not
exactly standardized (cross-validation folds, stacked artificial designs).

Convergence: cyclic sweeps until the largest coefficient change in a full
sweep is <= tol AND the stationarity residual is <= kkt_target. After each
full sweep the nonzero set is iterated on its own until stable (the usual
active-set speedup); determinism is preserved because the visit order is a
fixed function of the iterate.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True)
def _sweep(X, r, beta, shift, colsq, lam, gamma, knot, n_pen, ridge, family, idx):
    """One pass of coordinate minimization over `idx`; returns max |change|."""
    n = X.shape[0]
    delta = 0.0
    for k in range(idx.shape[0]):
        j = idx[k]
        bj = beta[j]
        zj = shift[j] + colsq[j] * bj
        for i in range(n):
            zj += X[i, j] * r[i]
        if family == 0:
            bnew = _soft(zj, lam) / (colsq[j] + ridge)
        else:
            s1 = _soft(zj, lam) / (colsq[j] + ridge - n_pen / gamma)
            if abs(s1) <= knot:
                bnew = s1
            else:
                bnew = zj / (colsq[j] + ridge)
        ch = bnew - bj
        if ch != 0.0:
            for i in range(n):
                r[i] -= ch * X[i, j]
            beta[j] = bnew
            a = abs(ch)
            if a > delta:
                delta = a
    return delta


@njit(cache=True)
def _stationarity_violation(X, r, beta, shift, lam, gamma, n_pen, ridge, family):
    """Max KKT residual: c_j = X_j'r - ridge*b_j + shift_j against the
    subgradient of the active penalty."""
    n, p = X.shape
    worst = 0.0
    for j in range(p):
        cj = shift[j] - ridge * beta[j]
        for i in range(n):
            cj += X[i, j] * r[i]
        bj = beta[j]
        if bj != 0.0:
            if family == 0:
                level = lam
            else:
                level = lam - n_pen * abs(bj) / gamma
                if level < 0.0:
                    level = 0.0
            v = abs(cj - (level if bj > 0.0 else -level))
        else:
            v = abs(cj) - lam
            if v < 0.0:
                v = 0.0
        if v > worst:
            worst = v
    return worst


@njit(cache=True)
def _objective(r, beta, shift, lam, gamma, n_pen, ridge, family):
    n = r.shape[0]
    p = beta.shape[0]
    val = 0.0
    for i in range(n):
        val += r[i] * r[i]
    val *= 0.5
    for j in range(p):
        bj = beta[j]
        val += 0.5 * ridge * bj * bj - shift[j] * bj
        if family == 0:
            val += lam * abs(bj)
        elif lam > 0.0:
            t = abs(bj)
            if t <= gamma * lam / n_pen:
                val += lam * t - n_pen * t * t / (2.0 * gamma)
            else:
                val += gamma * lam * lam / (2.0 * n_pen)
    return val


@njit(cache=True)
def cd_solve(X, y, beta, shift, lam, gamma, n_pen, ridge, family,
             tol, max_sweeps, kkt_target, obj_trace):
    """Run coordinate descent in place on `beta`.

    obj_trace: preallocated scratch; when its length is >= max_sweeps the
    objective after every sweep is recorded there (testing hook), otherwise
    it is ignored.

    Returns (sweeps, converged, violation, n_traced).
    """
    n, p = X.shape
    colsq = np.empty(p)
    for j in range(p):
        s = 0.0
        for i in range(n):
            s += X[i, j] * X[i, j]
        colsq[j] = s

    r = y.copy()
    for j in range(p):
        bj = beta[j]
        if bj != 0.0:
            for i in range(n):
                r[i] -= X[i, j] * bj

    knot = 0.0
    if family == 1 and lam > 0.0:
        knot = gamma * lam / n_pen

    track = obj_trace.shape[0] >= max_sweeps
    all_idx = np.arange(p)
    sweeps = 0
    traced = 0
    converged = False
    viol = np.inf

    while sweeps < max_sweeps:
        delta = _sweep(X, r, beta, shift, colsq, lam, gamma, knot, n_pen,
                       ridge, family, all_idx)
        sweeps += 1
        if track:
            obj_trace[traced] = _objective(r, beta, shift, lam, gamma, n_pen,
                                           ridge, family)
            traced += 1
        if delta <= tol:
            viol = _stationarity_violation(X, r, beta, shift, lam, gamma,
                                           n_pen, ridge, family)
            if viol <= kkt_target:
                converged = True
                break
            if delta == 0.0:
                break  # exact CD fixed point; no further progress possible
            continue
        # iterate the current nonzero set until it stabilizes
        nz = 0
        for j in range(p):
            if beta[j] != 0.0:
                all_idx[nz] = j
                nz += 1
        active = all_idx[:nz]
        while sweeps < max_sweeps:
            delta_a = _sweep(X, r, beta, shift, colsq, lam, gamma, knot,
                             n_pen, ridge, family, active)
            sweeps += 1
            if track:
                obj_trace[traced] = _objective(r, beta, shift, lam, gamma,
                                               n_pen, ridge, family)
                traced += 1
            if delta_a <= tol:
                break
        # restore the identity ordering before the next full sweep
        for j in range(p):
            all_idx[j] = j

    if not np.isfinite(viol):
        viol = _stationarity_violation(X, r, beta, shift, lam, gamma, n_pen,
                                       ridge, family)
    return sweeps, converged, viol, traced
