"""Pure-numpy alignment loops (fallback for the compiled kernels).

Each loop minimizes its method's objective over square transforms ``C``
by damped gradient iterations: a candidate step is accepted only if the
method's merit strictly decreases, the step size halves on rejection and
grows by a fixed factor after acceptance.  All loops share the stopping
rules: direction norm below ``grad_tol``, ``max_iters`` accepted steps,
step-size underflow, or an optional wall-clock limit.

Returns from every loop: ``(c_raw, trace, iterations, max_ortho, stop_code)``
where ``c_raw`` is the final iterate *before* any projection, ``trace`` holds
the merit at the start and after each accepted step, and ``max_ortho`` is the
largest iterate orthogonality residual seen (-1.0 when not tracked).
"""

from __future__ import annotations

import time

import numpy as np

from ._params import (
    DIVERGENCE_LIMIT,
    ESCAPE_STEPS,
    ETA_MAX_FACTOR,
    ETA_MIN_FACTOR,
    GROWTH,
    RETRACT_CAYLEY,
    RETRACT_POLAR,
    RETRACT_QR,
    STOP_GRAD,
    STOP_MAX_ITERS,
    STOP_STEP_UNDERFLOW,
    STOP_TIME,
)
from ..errors import Divergence


def _skew(m):
    return 0.5 * (m - m.T)


def _fnorm2(m):
    return float(np.sum(m * m))


def euclidean_gradient(a, b, c):
    """Gradient of ||a - c b c^T||_F^2 in the general (non-symmetric) form."""
    e = a - c @ b @ c.T
    return -2.0 * (e @ c @ b.T + e.T @ c @ b)


def alignment_loss(a, b, c):
    e = a - c @ b @ c.T
    return _fnorm2(e)


def _project_orthogonal(m):
    u, _, vt = np.linalg.svd(m)
    return u @ vt

def _qr_positive(m):
    q, r = np.linalg.qr(m)
    sign = np.sign(np.diag(r))
    sign[sign == 0.0] = 1.0
    return q * sign


def _retract(c, step, retraction):
    if retraction == RETRACT_QR:
        return _qr_positive(c + step)
    if retraction == RETRACT_CAYLEY:
        s = _skew(step @ c.T)
        n = c.shape[0]
        eye = np.eye(n)
        try:
            return np.linalg.solve(eye - 0.5 * s, (eye + 0.5 * s) @ c)
        except np.linalg.LinAlgError:
            return _project_orthogonal(c + step)
    return _project_orthogonal(c + step)


def _drive(c0, merit, direction, advance, eta0, max_iters, grad_tol,
           time_limit, track_ortho, escape=False):
    """Shared backtracking/growth driver; see module docstring."""
    c = np.array(c0, dtype=np.float64, copy=True)
    n = c.shape[0]
    eye = np.eye(n)
    eta = float(eta0)
    eta_max = eta * ETA_MAX_FACTOR
    eta_min = eta * ETA_MIN_FACTOR
    m = merit(c)
    if not np.isfinite(m) or m > DIVERGENCE_LIMIT:
        raise Divergence(f"initial loss {m!r} beyond the divergence guard")
    trace = [m]
    max_ortho = -1.0
    if track_ortho:
        max_ortho = float(np.linalg.norm(c.T @ c - eye))
    stop = STOP_MAX_ITERS
    deadline = time.perf_counter() + time_limit if time_limit > 0 else None
    iterations = 0
    for _ in range(max_iters):
        if deadline is not None and time.perf_counter() >= deadline:
            stop = STOP_TIME
            break
        d = direction(c)
        if float(np.linalg.norm(d)) < grad_tol:
            stop = STOP_GRAD
            break
        accepted = None
        while True:
            cand = advance(c, eta, d)
            mc = merit(cand)
            if mc < m and np.isfinite(mc):
                accepted = (cand, mc)
                break
            eta *= 0.5
            if eta < eta_min:
                break
        if accepted is None:
            # No single step decreases the merit.  Off-manifold iterates can
            # stall where the orthogonality pull drowns a tiny tangent
            # component; hard reorthogonalization or a bounded stretch of
            # plain fixed-step updates (for non-gradient fields, which are
            # not descent directions of the merit everywhere) recovers.
            cand = _project_orthogonal(c)
            mc = merit(cand)
            if mc < m and np.isfinite(mc):
                accepted = (cand, mc)
                eta = float(eta0)
            elif escape:
                esc = c
                for _ in range(ESCAPE_STEPS):
                    esc = esc - eta0 * direction(esc)
                    mc = merit(esc)
                    if not np.isfinite(mc) or mc > DIVERGENCE_LIMIT:
                        break
                    if mc < m:
                        accepted = (esc, mc)
                        eta = float(eta0)
                        break
            if accepted is None:
                stop = STOP_STEP_UNDERFLOW
                break
        c, m = accepted
        iterations += 1
        trace.append(m)
        if track_ortho:
            r = float(np.linalg.norm(c.T @ c - eye))
            if r > max_ortho:
                max_ortho = r
        eta = min(eta * GROWTH, eta_max)
    return c, np.asarray(trace), iterations, max_ortho, stop


def baseline_loop(a, b, c0, eta0, max_iters, grad_tol, time_limit=0.0,
                  track_ortho=False):
    """Euclidean gradient step followed by SVD projection every iteration."""

    def merit(c):
        return alignment_loss(a, b, c)

    def direction(c):
        return euclidean_gradient(a, b, c)

    def advance(c, eta, d):
        return _project_orthogonal(c - eta * d)

    return _drive(c0, merit, direction, advance, eta0, max_iters, grad_tol,
                  time_limit, track_ortho)


def ro_loop(a, b, c0, eta0, lam, max_iters, grad_tol, time_limit=0.0,
            track_ortho=False):
    """Descent on the orthogonality-penalized loss; no per-step projection."""
    eye = np.eye(c0.shape[0])

    def merit(c):
        return alignment_loss(a, b, c) + lam * _fnorm2(c.T @ c - eye)

    def direction(c):
        return euclidean_gradient(a, b, c) + 4.0 * lam * (c @ (c.T @ c) - c)

    def advance(c, eta, d):
        return c - eta * d

    return _drive(c0, merit, direction, advance, eta0, max_iters, grad_tol,
                  time_limit, track_ortho)


def rim_loop(a, b, c0, eta0, retraction, max_iters, grad_tol, time_limit=0.0,
             track_ortho=False):
    """Riemannian descent: tangent gradient plus the configured retraction."""

    def merit(c):
        return alignment_loss(a, b, c)

    def direction(c):
        return _skew(euclidean_gradient(a, b, c) @ c.T) @ c

    def advance(c, eta, d):
        return _retract(c, -eta * d, retraction)

    return _drive(c0, merit, direction, advance, eta0, max_iters, grad_tol,
                  time_limit, track_ortho)


def landing_loop(a, b, c0, eta0, lam, max_iters, grad_tol, time_limit=0.0,
                 track_ortho=False):
    """Ambient-space updates along the tangent field plus orthogonality pull."""
    eye = np.eye(c0.shape[0])

    def merit(c):
        return alignment_loss(a, b, c) + 0.5 * lam * _fnorm2(c @ c.T - eye)

    def direction(c):
        g = euclidean_gradient(a, b, c)
        return _skew(g @ c.T) @ c + lam * (c @ c.T - eye) @ c

    def advance(c, eta, d):
        return c - eta * d

    return _drive(c0, merit, direction, advance, eta0, max_iters, grad_tol,
                  time_limit, track_ortho, escape=True)
