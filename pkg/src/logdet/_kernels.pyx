"""Compiled symmetric eigensolver kernels.

Householder reduction to tridiagonal form followed by implicit-shift QL.
The reduction works on the lower triangle of the Fortran view of a
C-contiguous symmetric array (the same memory, since the matrix is
symmetric) so that every trailing update is a single BLAS call.

The pure-Python twin lives in ``_kernels_py``; both expose the same
functions with the same return conventions.
"""

from libc.math cimport fabs, hypot, copysign, ldexp
from libc.float cimport DBL_EPSILON, DBL_MIN
from scipy.linalg.cython_blas cimport dsymv, dsyr2, ddot, daxpy, dnrm2

import numpy as np


def tridiagonalize(double[:, ::1] a, bint want_q=False):
    """Reduce symmetric ``a`` (overwritten) to tridiagonal ``(diag, off, q)``.

    ``off[i]`` couples rows ``i`` and ``i + 1``; ``off[m - 1]`` is zero.
    ``q`` is the accumulated orthogonal transform with ``a = q T q^T``,
    or ``None`` when ``want_q`` is false.
    """
    cdef int m = a.shape[0]
    cdef int k, i, j, length, inc = 1, lda = m
    cdef double alpha0, xnorm, beta, tau, scal, dotpv, amax, up, one = 1.0, zero = 0.0
    cdef double minus_one = -1.0
    cdef double[::1] d = np.zeros(m)
    cdef double[::1] e = np.zeros(m)
    cdef double[::1] taus = np.zeros(max(m, 1))
    cdef double[::1] p = np.zeros(max(m, 1))
    cdef double[:, ::1] q
    cdef double s
    cdef char uplo = b'L'

    with nogil:
        for k in range(m - 2):
            length = m - k - 1
            i = length - 1
            # a column of subnormals is lifted by an exact power of two so the
            # reflector keeps full precision; beta is scaled back afterwards
            amax = 0.0
            for j in range(k + 1, m):
                if fabs(a[k, j]) > amax:
                    amax = fabs(a[k, j])
            up = 1.0
            if amax > 0.0 and amax < DBL_MIN:
                up = ldexp(1.0, 600)
                for j in range(k + 1, m):
                    a[k, j] = a[k, j] * up
            alpha0 = a[k, k + 1]
            xnorm = dnrm2(&i, &a[k, k + 2], &inc)
            if xnorm == 0.0:
                taus[k] = 0.0
                e[k] = alpha0 / up
                continue
            beta = -copysign(hypot(alpha0, xnorm), alpha0)
            tau = (beta - alpha0) / beta
            # divide rather than multiply by the reciprocal, which overflows for subnormal beta
            scal = alpha0 - beta
            for j in range(k + 2, m):
                a[k, j] = a[k, j] / scal
            a[k, k + 1] = 1.0
            e[k] = beta / up
            taus[k] = tau
            # p = tau * A22 v
            dsymv(&uplo, &length, &tau, &a[k + 1, k + 1], &lda,
                  &a[k, k + 1], &inc, &zero, &p[0], &inc)
            # w = p - (tau / 2) (p . v) v, stored in p
            dotpv = -0.5 * tau * ddot(&length, &p[0], &inc, &a[k, k + 1], &inc)
            daxpy(&length, &dotpv, &a[k, k + 1], &inc, &p[0], &inc)
            # A22 -= v w^T + w v^T
            dsyr2(&uplo, &length, &minus_one, &a[k, k + 1], &inc,
                  &p[0], &inc, &a[k + 1, k + 1], &lda)
        for k in range(m):
            d[k] = a[k, k]
        if m >= 2:
            e[m - 2] = a[m - 2, m - 1]
            taus[m - 2] = 0.0

    if not want_q:
        return np.asarray(d), np.asarray(e), None

    q = np.eye(m)
    with nogil:
        # q = H_0 H_1 ... H_{m-3}, accumulated right to left
        for k in range(m - 3, -1, -1):
            tau = taus[k]
            if tau == 0.0:
                continue
            for j in range(k + 1, m):
                s = 0.0
                for i in range(k + 1, m):
                    s = s + a[k, i] * q[i, j]
                s = s * tau
                for i in range(k + 1, m):
                    q[i, j] = q[i, j] - s * a[k, i]
    return np.asarray(d), np.asarray(e), np.asarray(q)


def tridiagonal_ql(double[::1] d, double[::1] e, z=None, int max_iter=60):
    """Implicit-shift QL on a symmetric tridiagonal matrix, in place.

    On return ``d`` holds the (unsorted) eigenvalues. When ``z`` is given
    (a C-contiguous ``m x m`` array) the plane rotations are applied to its
    columns, so passing the Householder ``q`` yields eigenvectors of the
    original matrix.

    Returns ``(status, index, residual)``: status 0 on success, otherwise
    the eigenvalue index that failed to converge and its remaining
    off-diagonal magnitude.
    """
    cdef int m = d.shape[0]
    cdef int l, mm, i, it, r_i
    cdef double g, r, s, c, p, f, b, dd, tmp, floor = 0.0
    cdef bint underflow, have_z = z is not None
    cdef double[:, ::1] zz
    if have_z:
        zz = z
    if m > 0:
        e[m - 1] = 0.0

    with nogil:
        # absolute floor: a split at eps * ||T|| moves eigenvalues by at most that much
        for i in range(m):
            tmp = fabs(d[i]) + fabs(e[i])
            if i > 0:
                tmp = tmp + fabs(e[i - 1])
            if tmp > floor:
                floor = tmp
        floor = DBL_EPSILON * floor
        for l in range(m):
            it = 0
            while True:
                mm = l
                while mm < m - 1:
                    dd = fabs(d[mm]) + fabs(d[mm + 1])
                    if fabs(e[mm]) <= DBL_EPSILON * dd or fabs(e[mm]) <= floor:
                        break
                    mm = mm + 1
                if mm == l:
                    break
                if it == max_iter:
                    with gil:
                        return 1, l, fabs(e[l])
                it = it + 1
                g = (d[l + 1] - d[l]) / (2.0 * e[l])
                r = hypot(g, 1.0)
                g = d[mm] - d[l] + e[l] / (g + copysign(r, g))
                s = 1.0
                c = 1.0
                p = 0.0
                underflow = False
                i = mm - 1
                while i >= l:
                    f = s * e[i]
                    b = c * e[i]
                    r = hypot(f, g)
                    e[i + 1] = r
                    if r == 0.0:
                        d[i + 1] = d[i + 1] - p
                        e[mm] = 0.0
                        underflow = True
                        break
                    s = f / r
                    c = g / r
                    g = d[i + 1] - p
                    r = (d[i] - g) * s + 2.0 * c * b
                    p = s * r
                    d[i + 1] = g + p
                    g = c * r - b
                    if have_z:
                        for r_i in range(m):
                            tmp = zz[r_i, i + 1]
                            zz[r_i, i + 1] = s * zz[r_i, i] + c * tmp
                            zz[r_i, i] = c * zz[r_i, i] - s * tmp
                    i = i - 1
                if underflow:
                    continue
                d[l] = d[l] - p
                e[l] = g
                e[mm] = 0.0
    return 0, -1, 0.0
