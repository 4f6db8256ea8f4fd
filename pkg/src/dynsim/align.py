"""Alignment of linear operators over the orthogonal group.

Solves ``min_{C in O(n)} ||A - C B C^T||_F`` with four optimizers: projected
gradient descent (the reference method), penalty-regularized descent,
on-manifold Riemannian descent with retractions, and ambient-space landing
updates.  Also computes the Euclidean/angular similarity metrics of the
aligned operators.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._kernels import _pyloops
from .errors import NonFinite, ShapeMismatch, SvdFailure, ZeroMatrix

METHODS = ("baseline", "ro", "rim", "landing")
RETRACTIONS = ("polar", "qr", "cayley")
_RETRACT_CODE = {
    "polar": _kernels.RETRACT_POLAR,
    "qr": _kernels.RETRACT_QR,
    "cayley": _kernels.RETRACT_CAYLEY,
}

# Distances below this count as numerically zero.
ZERO_DISTANCE_THRESHOLD = 1e-3


@dataclass
class OptimizerConfig:
    """Hyperparameters shared by the alignment optimizers.

    ``method`` is one of ``baseline`` (projected gradient descent), ``ro``
    (orthogonality-penalized descent), ``rim`` (Riemannian descent with the
    configured retraction), or ``landing`` (tangent field plus soft
    orthogonality pull).  ``time_limit`` (seconds) optionally bounds the
    wall-clock of each run; zero disables it.
    """

    method: str = "landing"
    learning_rate: float = 0.01
    ortho_penalty: float = 1.0
    landing_weight: float = 1.0
    retraction: str = "polar"
    max_iters: int = 2000
    grad_tolerance: float = 1e-8
    restarts: int = 1
    seed: int = 0
    special_orthogonal: bool = False
    time_limit: float = 0.0
    track_iterate_ortho: bool = False

    def validate(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.retraction not in RETRACTIONS:
            raise ValueError(f"unknown retraction {self.retraction!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.method == "ro" and self.ortho_penalty <= 0:
            raise ValueError("ro requires a positive ortho_penalty")
        if self.method == "landing" and self.landing_weight <= 0:
            raise ValueError("landing requires a positive landing_weight")


@dataclass
class AlignmentResult:
    """Outcome of one alignment optimization (best restart)."""

    transform_c: np.ndarray
    distance_euclidean: float
    distance_angular: float
    loss_trace: np.ndarray = field(repr=False)
    ortho_residual: float
    iterations_run: int
    stop_iteration: int
    wall_time: float
    method: str
    converged: bool
    max_iterate_ortho: float = -1.0


def _as_square(m, name):
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ShapeMismatch(f"{name} must be square, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"{name} contains non-finite entries")
    return arr


def _check_pair(a, b):
    a = _as_square(a, "a")
    b = _as_square(b, "b")
    if a.shape != b.shape:
        raise ShapeMismatch(f"operands differ in size: {a.shape} vs {b.shape}")
    return a, b


def loss_and_gradient(a, b, c, lam: float = 0.0):
    """Regularized alignment loss and its gradient at ``c``.

    loss = ||a - c b c^T||_F^2 + lam * ||c^T c - I||_F^2.  The alignment term
    uses the general form valid for non-symmetric operands,
    ``-2 [(a - c b c^T) c b^T + (a - c b c^T)^T c b]``; the penalty gradient is
    ``4 lam (c c^T c - c)``.
    """
    a, b = _check_pair(a, b)
    c = _as_square(c, "c")
    if c.shape != a.shape:
        raise ShapeMismatch(f"c has size {c.shape}, expected {a.shape}")
    e = a - c @ b @ c.T
    loss = float(np.sum(e * e))
    grad = -2.0 * (e @ c @ b.T + e.T @ c @ b)
    if lam:
        p = c.T @ c - np.eye(c.shape[0])
        loss += lam * float(np.sum(p * p))
        grad = grad + 4.0 * lam * (c @ p)
    return loss, grad


def alignment_loss(a, b, c):
    """||a - c b c^T||_F^2."""
    return _pyloops.alignment_loss(a, b, c)


def euclidean_gradient(a, b, c):
    """Gradient of the unpenalized alignment loss (general form)."""
    return _pyloops.euclidean_gradient(a, b, c)


def riemannian_gradient(a, b, c):
    """Projection of the Euclidean gradient onto the tangent space at ``c``."""
    g = _pyloops.euclidean_gradient(a, b, c)
    return _pyloops._skew(g @ c.T) @ c


def landing_field(a, b, c, lam: float = 1.0):
    """Tangent descent direction plus the soft orthogonality pull."""
    g = _pyloops.euclidean_gradient(a, b, c)
    eye = np.eye(c.shape[0])
    return _pyloops._skew(g @ c.T) @ c + lam * (c @ c.T - eye) @ c


def retract(c, step, kind: str = "polar"):
    """Map a tangent step at ``c`` back to the orthogonal group."""
    return _pyloops._retract(np.asarray(c, float), np.asarray(step, float),
                             _RETRACT_CODE[kind])


def project_orthogonal(m, special: bool = False):
    """Nearest orthogonal matrix; optionally flip onto SO(n)."""
    try:
        u, _, vt = np.linalg.svd(np.asarray(m, dtype=np.float64))
    except np.linalg.LinAlgError as exc:
        raise SvdFailure(str(exc)) from exc
    c = u @ vt
    if special and np.linalg.det(c) < 0:
        u = u.copy()
        u[:, -1] = -u[:, -1]
        c = u @ vt
    return c


def distance_euclidean(a, b, c_opt):
    """||a - c b c^T||_F for an aligned (orthogonal) transform."""
    a, b = _check_pair(a, b)
    c = _as_square(c_opt, "c_opt")
    return float(np.linalg.norm(a - c @ b @ c.T))


def distance_angular(a, b, c_opt):
    """arccos of the normalized Frobenius inner product of a and c b c^T."""
    a, b = _check_pair(a, b)
    c = _as_square(c_opt, "c_opt")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroMatrix("angular distance is undefined for zero operators")
    inner = float(np.sum(a * (c @ b @ c.T)))
    return float(np.arccos(np.clip(inner / (na * nb), -1.0, 1.0)))


def is_zero_distance(d: float) -> bool:
    """Whether a dissimilarity counts as numerically zero (d < 1e-3)."""
    return d < ZERO_DISTANCE_THRESHOLD


def pad_to_common_size(a, b):
    """Zero-pad two square operators block-diagonally to a common size."""
    a = _as_square(a, "a")
    b = _as_square(b, "b")
    n = max(a.shape[0], b.shape[0])

    def pad(m):
        if m.shape[0] == n:
            return m
        out = np.zeros((n, n), dtype=np.float64)
        out[: m.shape[0], : m.shape[0]] = m
        return out

    return pad(a), pad(b)


def loss_flatten_iteration(trace, threshold: float = 0.005) -> int:
    """First index whose loss change falls below ``threshold`` (else argmin)."""
    trace = np.asarray(trace, dtype=np.float64)
    if trace.size < 2:
        return 0
    diffs = np.abs(np.diff(trace))
    below = np.nonzero(diffs < threshold)[0]
    if below.size:
        return int(below[0]) + 1
    return int(np.argmin(diffs)) + 1


def _haar_orthogonal(n, rng):
    m = rng.standard_normal((n, n))
    q, r = np.linalg.qr(m)
    sign = np.sign(np.diag(r))
    sign[sign == 0.0] = 1.0
    return q * sign


def _run_kernel(a, b, c0, config: OptimizerConfig):
    args = dict(
        max_iters=config.max_iters,
        grad_tol=config.grad_tolerance,
        time_limit=config.time_limit,
        track_ortho=config.track_iterate_ortho,
    )
    eta = config.learning_rate
    try:
        if config.method == "baseline":
            return _kernels.baseline_loop(a, b, c0, eta, **args)
        if config.method == "ro":
            return _kernels.ro_loop(a, b, c0, eta, config.ortho_penalty, **args)
        if config.method == "rim":
            return _kernels.rim_loop(a, b, c0, eta,
                                     _RETRACT_CODE[config.retraction], **args)
        return _kernels.landing_loop(a, b, c0, eta, config.landing_weight,
                                     **args)
    except np.linalg.LinAlgError as exc:
        raise SvdFailure(str(exc)) from exc


def optimize(a, b, config: OptimizerConfig) -> AlignmentResult:
    """Align ``b`` to ``a`` with the configured optimizer.

    Runs ``config.restarts`` independent starts (identity first, then
    Haar-random orthogonal draws from ``config.seed``) and keeps the restart
    with the smallest post-projection Euclidean distance.
    """
    config.validate()
    a, b = _check_pair(a, b)
    n = a.shape[0]
    rng = np.random.default_rng(config.seed)
    t0 = time.perf_counter()
    best = None
    for restart in range(config.restarts):
        c0 = np.eye(n) if restart == 0 else _haar_orthogonal(n, rng)
        c_raw, trace, iters, max_ortho, stop = _run_kernel(a, b, c0, config)
        c = project_orthogonal(c_raw, special=config.special_orthogonal)
        d = distance_euclidean(a, b, c)
        if best is None or d < best[0]:
            best = (d, c, trace, iters, max_ortho, stop)
    wall = time.perf_counter() - t0
    d, c, trace, iters, max_ortho, stop = best
    eye = np.eye(n)
    return AlignmentResult(
        transform_c=c,
        distance_euclidean=d,
        distance_angular=distance_angular(a, b, c),
        loss_trace=np.asarray(trace),
        ortho_residual=float(np.linalg.norm(c.T @ c - eye)),
        iterations_run=int(iters),
        stop_iteration=loss_flatten_iteration(trace),
        wall_time=wall,
        method=config.method,
        converged=stop == _kernels.STOP_GRAD,
        max_iterate_ortho=float(max_ortho),
    )


def _method_wrapper(name):
    def run(a, b, config: OptimizerConfig) -> AlignmentResult:
        if config.method != name:
            raise ValueError(f"config.method must be {name!r}")
        return optimize(a, b, config)

    run.__name__ = f"optimize_{name}"
    run.__doc__ = f"Run the {name!r} optimizer; see :func:`optimize`."
    return run


optimize_baseline_projected = _method_wrapper("baseline")
optimize_ro = _method_wrapper("ro")
optimize_rim = _method_wrapper("rim")
optimize_landing = _method_wrapper("landing")
