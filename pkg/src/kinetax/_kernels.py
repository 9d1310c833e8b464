"""Compiled inner loops: RHS evaluation and fixed-step RK4."""
import numpy as np
from numba import njit

CONVERGED, HORIZON, BLOWUP = 0, 1, 2


@njit(cache=True)
def rhs(x, down, up, leave, ptheta, inv_gap, out):
    n = x.shape[0]
    sx = 0.0
    for i in range(n):
        sx += x[i]
    below_top = sx - x[n - 1]
    d = np.empty(n)
    u = np.empty(n)
    lv = np.empty(n)
    tax = np.empty(n)
    for h in range(n):
        a = 0.0
        b = 0.0
        c = 0.0
        e = 0.0
        for k in range(n):
            xk = x[k]
            a += down[h, k] * xk
            b += up[h, k] * xk
            c += leave[h, k] * xk
            e += ptheta[h, k] * xk
        d[h] = a
        u[h] = b
        lv[h] = c
        tax[h] = e
    w = 0.0
    for h in range(1, n):
        w += x[h] * tax[h]
    spread = w / sx
    share = below_top / sx
    for i in range(n):
        v = -x[i] * lv[i]
        if i + 1 < n:
            v += x[i + 1] * d[i + 1]
            v -= spread * x[i] * inv_gap[i]
            v += share * x[i + 1] * tax[i + 1] * inv_gap[i]
        if i >= 1:
            v += x[i - 1] * u[i - 1]
            v += spread * x[i - 1] * inv_gap[i - 1]
            v -= share * x[i] * tax[i] * inv_gap[i - 1]
        out[i] = v


@njit(cache=True)
def rk4_step(x, k1, dt, down, up, leave, ptheta, inv_gap, out):
    n = x.shape[0]
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    y = np.empty(n)
    for i in range(n):
        y[i] = x[i] + 0.5 * dt * k1[i]
    rhs(y, down, up, leave, ptheta, inv_gap, k2)
    for i in range(n):
        y[i] = x[i] + 0.5 * dt * k2[i]
    rhs(y, down, up, leave, ptheta, inv_gap, k3)
    for i in range(n):
        y[i] = x[i] + dt * k3[i]
    rhs(y, down, up, leave, ptheta, inv_gap, k4)
    for i in range(n):
        out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i])


@njit(cache=True)
def integrate(x0, r, dt, max_steps, record_every, tol, blow_tol, renormalize,
              down, up, leave, ptheta, inv_gap):
    """RK4 from x0 until max|rhs| <= tol or max_steps.

    Returns (steps, states, diag, count, status) where rows [:count] are the
    stored samples and diag columns are (sum - 1, mu - mu0, max|rhs|).
    """
    n = x0.shape[0]
    cap = max_steps // record_every + 2
    steps = np.empty(cap, dtype=np.int64)
    states = np.empty((cap, n))
    diag = np.empty((cap, 3))
    mu0 = 0.0
    for i in range(n):
        mu0 += r[i] * x0[i]
    x = x0.copy()
    xn = np.empty(n)
    k1 = np.empty(n)
    count = 0
    s = 0
    status = HORIZON
    pre_sum = 0.0
    for i in range(n):
        pre_sum += x0[i]
    while True:
        rhs(x, down, up, leave, ptheta, inv_gap, k1)
        nrm = 0.0
        for i in range(n):
            a = abs(k1[i])
            if a > nrm or a != a:
                nrm = a
        done = nrm <= tol or s >= max_steps
        if s % record_every == 0 or done:
            sm = 0.0
            mu = 0.0
            for i in range(n):
                sm += x[i]
                mu += r[i] * x[i]
            steps[count] = s
            states[count] = x
            # drift is reported before any renormalization
            diag[count, 0] = (pre_sum if renormalize else sm) - 1.0
            diag[count, 1] = mu - mu0
            diag[count, 2] = nrm
            count += 1
        if nrm <= tol:
            status = CONVERGED
            break
        if s >= max_steps:
            status = HORIZON
            break
        rk4_step(x, k1, dt, down, up, leave, ptheta, inv_gap, xn)
        s += 1
        bad = False
        for i in range(n):
            v = xn[i]
            if not (v >= -blow_tol and v <= 1.0 + blow_tol):
                bad = True
        if bad:
            steps[count] = s
            states[count] = xn
            diag[count, 0] = np.sum(xn) - 1.0
            diag[count, 1] = np.dot(r, xn) - mu0
            diag[count, 2] = np.inf
            count += 1
            status = BLOWUP
            break
        if renormalize:
            pre_sum = 0.0
            for i in range(n):
                pre_sum += xn[i]
            for i in range(n):
                xn[i] /= pre_sum
        x[:] = xn
    return steps, states, diag, count, status
