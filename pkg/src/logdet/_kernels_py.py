"""Pure-Python twin of the compiled eigensolver kernels.

Same algorithms and return conventions as ``_kernels.pyx``. The Householder
reduction is vectorised with numpy; the QL sweep runs as a scalar Python
loop, which is what makes the compiled version worth having.
"""

import math

import numpy as np

_EPS = np.finfo(np.float64).eps
_TINY = np.finfo(np.float64).tiny


def tridiagonalize(a, want_q=False):
    a = np.asarray(a, dtype=np.float64)
    m = a.shape[0]
    d = np.zeros(m)
    e = np.zeros(m)
    vs = []
    taus = []
    for k in range(m - 2):
        x = a[k + 1 :, k]
        amax = np.max(np.abs(x))
        up = 1.0
        if 0.0 < amax < _TINY:
            # lift subnormals by an exact power of two; beta is scaled back below
            up = 2.0**600
            x = x * up
        alpha0 = x[0]
        tail = x[1:]
        tmax = np.max(np.abs(tail))
        # scaled norm, as BLAS dnrm2 computes it; squares of tiny entries would underflow
        xnorm = tmax * np.linalg.norm(tail / tmax) if tmax > 0.0 else 0.0
        if xnorm == 0.0:
            e[k] = alpha0 / up
            vs.append(None)
            taus.append(0.0)
            continue
        beta = -math.copysign(math.hypot(alpha0, xnorm), alpha0)
        tau = (beta - alpha0) / beta
        v = x / (alpha0 - beta)
        v[0] = 1.0
        e[k] = beta / up
        a22 = a[k + 1 :, k + 1 :]
        p = tau * (a22 @ v)
        w = p - (0.5 * tau * (p @ v)) * v
        a22 -= np.outer(v, w)
        a22 -= np.outer(w, v)
        vs.append(v)
        taus.append(tau)
    d[:] = np.diagonal(a)
    if m >= 2:
        e[m - 2] = a[m - 1, m - 2]
    if not want_q:
        return d, e, None
    q = np.eye(m)
    for k in range(m - 3, -1, -1):
        if taus[k] == 0.0:
            continue
        v = vs[k]
        sub = q[k + 1 :, k + 1 :]
        sub -= taus[k] * np.outer(v, v @ sub)
    return d, e, q


def tridiagonal_ql(d, e, z=None, max_iter=60):
    m = len(d)
    dl = [float(x) for x in d]
    el = [float(x) for x in e]
    if m > 0:
        el[m - 1] = 0.0
    # absolute floor: a split at eps * ||T|| moves eigenvalues by at most that much
    floor = _EPS * max((abs(dl[i]) + abs(el[i]) + (abs(el[i - 1]) if i else 0.0) for i in range(m)), default=0.0)
    status = (0, -1, 0.0)
    for l in range(m):
        it = 0
        while True:
            mm = l
            while mm < m - 1:
                dd = abs(dl[mm]) + abs(dl[mm + 1])
                if abs(el[mm]) <= _EPS * dd or abs(el[mm]) <= floor:
                    break
                mm += 1
            if mm == l:
                break
            if it == max_iter:
                status = (1, l, abs(el[l]))
                break
            it += 1
            g = (dl[l + 1] - dl[l]) / (2.0 * el[l])
            r = math.hypot(g, 1.0)
            g = dl[mm] - dl[l] + el[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            i = mm - 1
            while i >= l:
                f = s * el[i]
                b = c * el[i]
                r = math.hypot(f, g)
                el[i + 1] = r
                if r == 0.0:
                    dl[i + 1] -= p
                    el[mm] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = dl[i + 1] - p
                r = (dl[i] - g) * s + 2.0 * c * b
                p = s * r
                dl[i + 1] = g + p
                g = c * r - b
                if z is not None:
                    left = z[:, i].copy()
                    right = z[:, i + 1]
                    z[:, i] = c * left - s * right
                    z[:, i + 1] = s * left + c * right
                i -= 1
            if underflow:
                continue
            dl[l] -= p
            el[l] = g
            el[mm] = 0.0
        if status[0]:
            break
    d[:] = dl
    e[:] = el
    return status
