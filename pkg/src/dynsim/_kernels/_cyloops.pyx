# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled alignment loops: same contracts as ``_pyloops``.

All matrices are square n-by-n float64, C-contiguous.  BLAS/LAPACK calls
interpret the buffers as column-major (transposed), which the helpers below
account for, so the Python-visible semantics match the numpy backend.
"""

import numpy as np
from time import perf_counter

cimport numpy as cnp
from libc.math cimport isfinite
from scipy.linalg.cython_blas cimport dgemm, ddot
from scipy.linalg.cython_lapack cimport dgesdd, dgelqf, dorglq, dgetrf, dgetrs

from ..errors import Divergence
from ._params import (
    DIVERGENCE_LIMIT,
    ESCAPE_STEPS,
    ETA_MAX_FACTOR,
    ETA_MIN_FACTOR,
    GROWTH,
    STOP_GRAD,
    STOP_MAX_ITERS,
    STOP_STEP_UNDERFLOW,
    STOP_TIME,
    RETRACT_POLAR,
    RETRACT_QR,
    RETRACT_CAYLEY,
)

cdef double _GROWTH = GROWTH
cdef double _ETA_MAX_FACTOR = ETA_MAX_FACTOR
cdef double _ETA_MIN_FACTOR = ETA_MIN_FACTOR
cdef double _DIVERGENCE_LIMIT = DIVERGENCE_LIMIT
cdef int _ESCAPE_STEPS = ESCAPE_STEPS
cdef int _RETRACT_POLAR = RETRACT_POLAR
cdef int _RETRACT_QR = RETRACT_QR
cdef int _RETRACT_CAYLEY = RETRACT_CAYLEY

cdef int METHOD_BASELINE = 0
cdef int METHOD_RO = 1
cdef int METHOD_RIM = 2
cdef int METHOD_LANDING = 3


cdef inline void _mm(double* out, double* x, double* y, bint tx, bint ty,
                     double alpha, double beta, int n) nogil:
    # Row-major semantics: out = alpha * op(x) @ op(y) + beta * out.
    # Column-major equivalence: out^T = alpha * op(y)^T op(x)^T + beta*out^T.
    cdef char ta = b'T' if ty else b'N'
    cdef char tb = b'T' if tx else b'N'
    dgemm(&ta, &tb, &n, &n, &n, &alpha, y, &n, x, &n, &beta, out, &n)


cdef inline double _dot2(double* x, int n2) nogil:
    cdef int one = 1
    return ddot(&n2, x, &one, x, &one)


cdef class _Work:
    cdef int n, n2, lwork, lwork_lq
    cdef double[::1] c, cand, e, g, d, t1, t2, t3, u, vt, sv, work, tau, bt
    cdef int[::1] iwork, ipiv

    def __init__(self, int n):
        self.n = n
        self.n2 = n * n
        self.c = np.empty(n * n, dtype=np.float64)
        self.cand = np.empty(n * n, dtype=np.float64)
        self.e = np.empty(n * n, dtype=np.float64)
        self.g = np.empty(n * n, dtype=np.float64)
        self.d = np.empty(n * n, dtype=np.float64)
        self.t1 = np.empty(n * n, dtype=np.float64)
        self.t2 = np.empty(n * n, dtype=np.float64)
        self.t3 = np.empty(n * n, dtype=np.float64)
        self.u = np.empty(n * n, dtype=np.float64)
        self.vt = np.empty(n * n, dtype=np.float64)
        self.bt = np.empty(n * n, dtype=np.float64)
        self.sv = np.empty(n, dtype=np.float64)
        self.tau = np.empty(n, dtype=np.float64)
        self.iwork = np.empty(8 * n, dtype=np.intc)
        self.ipiv = np.empty(n, dtype=np.intc)
        self.lwork = self._query_svd()
        self.lwork_lq = self._query_lq()
        self.work = np.empty(max(self.lwork, self.lwork_lq), dtype=np.float64)

    cdef int _query_svd(self):
        cdef char jobz = b'A'
        cdef int n = self.n, info = 0, lwork = -1
        cdef double wopt = 0.0
        dgesdd(&jobz, &n, &n, &self.t1[0], &n, &self.sv[0], &self.u[0], &n,
               &self.vt[0], &n, &wopt, &lwork, &self.iwork[0], &info)
        return <int>wopt + 8

    cdef int _query_lq(self):
        cdef int n = self.n, info = 0, lwork = -1
        cdef double w1 = 0.0, w2 = 0.0
        dgelqf(&n, &n, &self.t1[0], &n, &self.tau[0], &w1, &lwork, &info)
        dorglq(&n, &n, &n, &self.t1[0], &n, &self.tau[0], &w2, &lwork, &info)
        return <int>(w1 if w1 > w2 else w2) + 8


cdef int _orth_project(_Work w, double* m, double* out) nogil:
    # out (row-major) = U V^T from the SVD of m (row-major). Returns info.
    cdef char jobz = b'A'
    cdef int n = w.n, info = 0, i
    for i in range(w.n2):
        w.t3[i] = m[i]
    dgesdd(&jobz, &n, &n, &w.t3[0], &n, &w.sv[0], &w.u[0], &n, &w.vt[0], &n,
           &w.work[0], &w.lwork, &w.iwork[0], &info)
    if info != 0:
        return info
    # LAPACK saw m^T = u s vt, so the row-major polar factor is (u @ vt)^T,
    # i.e. plain column-major u @ vt written into out.
    cdef char nt = b'N'
    cdef double one = 1.0, zero = 0.0
    dgemm(&nt, &nt, &n, &n, &n, &one, &w.u[0], &n, &w.vt[0], &n, &zero, out, &n)
    return 0


cdef int _qr_retract(_Work w, double* m, double* out) nogil:
    # out = Q from the (row-major) QR of m with positive R diagonal.
    # Row-major QR of m == LQ of the column-major view of the same buffer.
    cdef int n = w.n, info = 0, i, j
    for i in range(w.n2):
        out[i] = m[i]
    dgelqf(&n, &n, out, &n, &w.tau[0], &w.work[0], &w.lwork_lq, &info)
    if info != 0:
        return info
    for i in range(n):
        w.sv[i] = 1.0 if out[i * n + i] >= 0.0 else -1.0
    dorglq(&n, &n, &n, out, &n, &w.tau[0], &w.work[0], &w.lwork_lq, &info)
    if info != 0:
        return info
    for i in range(n):
        for j in range(n):
            out[i * n + j] *= w.sv[j]
    return 0


cdef int _cayley_retract(_Work w, double* c, double* d, double eta,
                         double* out) nogil:
    # out = (I - S/2)^{-1} (I + S/2) c  with  S = skew(step c^T), step = -eta*d.
    cdef int n = w.n, info = 0, i, j
    cdef double half
    _mm(&w.t2[0], d, c, False, True, 1.0, 0.0, n)      # t2 = d c^T
    # t3 = -eta * skew(t2); build P = I - S/2 into t1, M = (I + S/2) c.
    for i in range(n):
        for j in range(n):
            half = -eta * 0.25 * (w.t2[i * n + j] - w.t2[j * n + i])
            w.t3[i * n + j] = half                     # S/2 entries
    for i in range(w.n2):
        w.t1[i] = -w.t3[i]
    for i in range(n):
        w.t1[i * n + i] += 1.0                         # P = I - S/2
        w.t3[i * n + i] += 1.0                         # I + S/2
    _mm(&w.u[0], &w.t3[0], c, False, False, 1.0, 0.0, n)   # M = (I + S/2) c
    # Solve P X = M.  LAPACK sees P^T in t1; dgetrs with trans='T' applies P.
    dgetrf(&n, &n, &w.t1[0], &n, &w.ipiv[0], &info)
    if info != 0:
        return info
    for i in range(n):
        for j in range(n):
            w.bt[j * n + i] = w.u[i * n + j]           # column-major copy of M
    cdef char tr = b'T'
    dgetrs(&tr, &n, &n, &w.t1[0], &n, &w.ipiv[0], &w.bt[0], &n, &info)
    if info != 0:
        return info
    for i in range(n):
        for j in range(n):
            out[i * n + j] = w.bt[j * n + i]
    return 0


cdef double _merit(_Work w, int method, double* a, double* b, double* c,
                   double lam) nogil:
    # Alignment loss plus the method's own orthogonality term.
    cdef int n = w.n, i
    cdef double loss, pen
    _mm(&w.t1[0], c, b, False, False, 1.0, 0.0, n)
    _mm(&w.e[0], &w.t1[0], c, False, True, 1.0, 0.0, n)
    for i in range(w.n2):
        w.e[i] = a[i] - w.e[i]
    loss = _dot2(&w.e[0], w.n2)
    if method == METHOD_RO:
        _mm(&w.t1[0], c, c, True, False, 1.0, 0.0, n)
        for i in range(n):
            w.t1[i * n + i] -= 1.0
        loss += lam * _dot2(&w.t1[0], w.n2)
    elif method == METHOD_LANDING:
        _mm(&w.t1[0], c, c, False, True, 1.0, 0.0, n)
        for i in range(n):
            w.t1[i * n + i] -= 1.0
        loss += 0.5 * lam * _dot2(&w.t1[0], w.n2)
    return loss


cdef void _direction(_Work w, int method, double* a, double* b, double* c,
                     double lam) nogil:
    # Expects w.e to hold a - c b c^T for the current iterate (set by _merit).
    cdef int n = w.n, i, j
    # g = -2 (e c b^T + e^T c b)
    _mm(&w.t1[0], &w.e[0], c, False, False, 1.0, 0.0, n)
    _mm(&w.g[0], &w.t1[0], b, False, True, -2.0, 0.0, n)
    _mm(&w.t1[0], &w.e[0], c, True, False, 1.0, 0.0, n)
    _mm(&w.g[0], &w.t1[0], b, False, False, -2.0, 1.0, n)
    if method == METHOD_BASELINE:
        for i in range(w.n2):
            w.d[i] = w.g[i]
        return
    if method == METHOD_RO:
        _mm(&w.t1[0], c, c, True, False, 1.0, 0.0, n)
        for i in range(n):
            w.t1[i * n + i] -= 1.0
        for i in range(w.n2):
            w.d[i] = w.g[i]
        _mm(&w.d[0], c, &w.t1[0], False, False, 4.0 * lam, 1.0, n)
        return
    # Riemannian / landing tangent part: skew(g c^T) c.
    _mm(&w.t1[0], &w.g[0], c, False, True, 1.0, 0.0, n)
    for i in range(n):
        for j in range(n):
            w.t2[i * n + j] = 0.5 * (w.t1[i * n + j] - w.t1[j * n + i])
    _mm(&w.d[0], &w.t2[0], c, False, False, 1.0, 0.0, n)
    if method == METHOD_LANDING:
        _mm(&w.t1[0], c, c, False, True, 1.0, 0.0, n)
        for i in range(n):
            w.t1[i * n + i] -= 1.0
        _mm(&w.d[0], &w.t1[0], c, False, False, lam, 1.0, n)


cdef int _advance(_Work w, int method, int retraction, double* c, double eta,
                  double* out) nogil:
    cdef int i, info
    if method == METHOD_BASELINE:
        for i in range(w.n2):
            w.t2[i] = c[i] - eta * w.d[i]
        return _orth_project(w, &w.t2[0], out)
    if method == METHOD_RIM:
        if retraction == _RETRACT_CAYLEY:
            info = _cayley_retract(w, c, &w.d[0], eta, out)
            if info == 0:
                return 0
            # singular Cayley system: fall back to the polar retraction
        for i in range(w.n2):
            w.t2[i] = c[i] - eta * w.d[i]
        if retraction == _RETRACT_QR:
            return _qr_retract(w, &w.t2[0], out)
        return _orth_project(w, &w.t2[0], out)
    for i in range(w.n2):
        out[i] = c[i] - eta * w.d[i]
    return 0


cdef double _ortho_residual(_Work w, double* c) nogil:
    cdef int n = w.n, i
    _mm(&w.t1[0], c, c, True, False, 1.0, 0.0, n)
    for i in range(n):
        w.t1[i * n + i] -= 1.0
    return _dot2(&w.t1[0], w.n2) ** 0.5


def _drive(int method, int retraction, cnp.ndarray a_in, cnp.ndarray b_in,
           cnp.ndarray c0_in, double eta0, double lam, long max_iters,
           double grad_tol, double time_limit, bint track_ortho):
    a_arr = np.ascontiguousarray(a_in, dtype=np.float64)
    b_arr = np.ascontiguousarray(b_in, dtype=np.float64)
    c_arr = np.array(c0_in, dtype=np.float64, order="C", copy=True)
    cdef int n = c_arr.shape[0]
    cdef _Work w = _Work(n)
    cdef double[:, ::1] av = a_arr, bv = b_arr, cv = c_arr
    cdef double* a = &av[0, 0]
    cdef double* b = &bv[0, 0]
    cdef int i
    for i in range(w.n2):
        w.c[i] = (&cv[0, 0])[i]

    cdef double eta = eta0
    cdef double eta_max = eta0 * _ETA_MAX_FACTOR
    cdef double eta_min = eta0 * _ETA_MIN_FACTOR
    cdef double m = _merit(w, method, a, b, &w.c[0], lam)
    if not isfinite(m) or m > _DIVERGENCE_LIMIT:
        raise Divergence(f"initial loss {m!r} beyond the divergence guard")

    trace_arr = np.empty(max_iters + 1, dtype=np.float64)
    cdef double[::1] trace = trace_arr
    trace[0] = m
    cdef double max_ortho = -1.0
    if track_ortho:
        max_ortho = _ortho_residual(w, &w.c[0])

    cdef int stop = STOP_MAX_ITERS
    cdef long iterations = 0, it, esc
    cdef double deadline = perf_counter() + time_limit if time_limit > 0 else 0.0
    cdef double mc, gn, r
    cdef bint accepted
    cdef int info

    for it in range(max_iters):
        if time_limit > 0 and perf_counter() >= deadline:
            stop = STOP_TIME
            break
        # _merit left w.e = a - c b c^T for the current iterate
        _direction(w, method, a, b, &w.c[0], lam)
        gn = _dot2(&w.d[0], w.n2) ** 0.5
        if gn < grad_tol:
            stop = STOP_GRAD
            break
        accepted = False
        while True:
            info = _advance(w, method, retraction, &w.c[0], eta, &w.cand[0])
            if info == 0:
                mc = _merit(w, method, a, b, &w.cand[0], lam)
                if mc < m and isfinite(mc):
                    accepted = True
                    break
            eta *= 0.5
            if eta < eta_min:
                break
        if not accepted:
            # No single step decreases the merit.  Off-manifold iterates can
            # stall where the orthogonality pull drowns a tiny tangent
            # component; hard reorthogonalization or a bounded stretch of
            # plain fixed-step updates (for the landing field, which is not
            # a descent direction of the merit everywhere) recovers.
            info = _orth_project(w, &w.c[0], &w.cand[0])
            if info == 0:
                mc = _merit(w, method, a, b, &w.cand[0], lam)
                if mc < m and isfinite(mc):
                    accepted = True
                    eta = eta0
            if not accepted and method == METHOD_LANDING:
                _merit(w, method, a, b, &w.c[0], lam)   # refresh w.e
                for i in range(w.n2):
                    w.cand[i] = w.c[i]
                for esc in range(_ESCAPE_STEPS):
                    _direction(w, method, a, b, &w.cand[0], lam)
                    for i in range(w.n2):
                        w.cand[i] -= eta0 * w.d[i]
                    mc = _merit(w, method, a, b, &w.cand[0], lam)
                    if not isfinite(mc) or mc > _DIVERGENCE_LIMIT:
                        break
                    if mc < m:
                        accepted = True
                        eta = eta0
                        break
            if not accepted:
                stop = STOP_STEP_UNDERFLOW
                break
        for i in range(w.n2):
            w.c[i] = w.cand[i]
        m = mc
        iterations += 1
        trace[iterations] = m
        if track_ortho:
            r = _ortho_residual(w, &w.c[0])
            if r > max_ortho:
                max_ortho = r
        eta = eta * _GROWTH
        if eta > eta_max:
            eta = eta_max
        # w.e already holds a - c b c^T for the accepted iterate

    out = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] ov = out
    for i in range(w.n2):
        (&ov[0, 0])[i] = w.c[i]
    return out, trace_arr[: iterations + 1].copy(), int(iterations), max_ortho, stop


def baseline_loop(a, b, c0, double eta0, long max_iters, double grad_tol,
                  double time_limit=0.0, bint track_ortho=False):
    return _drive(METHOD_BASELINE, _RETRACT_POLAR, a, b, c0, eta0, 0.0,
                  max_iters, grad_tol, time_limit, track_ortho)


def ro_loop(a, b, c0, double eta0, double lam, long max_iters, double grad_tol,
            double time_limit=0.0, bint track_ortho=False):
    return _drive(METHOD_RO, _RETRACT_POLAR, a, b, c0, eta0, lam,
                  max_iters, grad_tol, time_limit, track_ortho)


def rim_loop(a, b, c0, double eta0, int retraction, long max_iters,
             double grad_tol, double time_limit=0.0, bint track_ortho=False):
    return _drive(METHOD_RIM, retraction, a, b, c0, eta0, 0.0,
                  max_iters, grad_tol, time_limit, track_ortho)


def landing_loop(a, b, c0, double eta0, double lam, long max_iters,
                 double grad_tol, double time_limit=0.0, bint track_ortho=False):
    return _drive(METHOD_LANDING, _RETRACT_POLAR, a, b, c0, eta0, lam,
                  max_iters, grad_tol, time_limit, track_ortho)
