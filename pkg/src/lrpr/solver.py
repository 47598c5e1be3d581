"""Regularized anchored regression.

Solves

    minimize   -Re<X0, X> + lam * ||X||_*
    subject to |<Phi_m, X>|^2 <= y_m                      (noiseless)
           or  (1/M) sum_m (|<Phi_m, X>|^2 - y_m)_+ <= eta  (noisy)

with a first-order primal-dual splitting (Chambolle-Pock). The primal
step is singular value thresholding of ``X - tau K^* w + tau X0``; the
dual step projects the scaled measurement variable onto the constraint
set, which is a product of complex disks in the noiseless case and the
average-hinge ball in the noisy case. Both projections are exact.
"""

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from .anchor import Anchor
from .model import Observations, adjoint_map, forward_map, opnorm_estimate
from .rng import RngSpec

__all__ = [
    "Mode",
    "Status",
    "SolverConfig",
    "SolveReport",
    "disk_project",
    "project_disks",
    "project_hinge_ball",
    "objective",
    "hinge_residual",
    "solve",
    "default_lambda",
    "DEFAULT_LAMBDA",
]

DEFAULT_LAMBDA = 0.7
CONVERGENCE_WINDOW = 10
OPNORM_ITERS = 50


class Mode(str, enum.Enum):
    DISK_PROJECTION = "DiskProjection"
    HINGE_BALL = "HingeBall"


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class SolverConfig:
    lam: float = DEFAULT_LAMBDA
    eta: float = 0.0
    mode: Mode = Mode.DISK_PROJECTION
    max_iter: int = 20000
    tol_rel_change: float = 1e-7
    tol_feas: float = 1e-8
    step_safety: float = 1.05
    # iterate norm beyond this multiple of the problem scale is declared unbounded
    divergence_factor: float = 1e3
    seed: int = 0
    record_history: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.lam < 0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")
        if self.eta < 0:
            raise ValueError(f"eta must be nonnegative, got {self.eta}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.step_safety < 1:
            raise ValueError(f"step_safety must be >= 1, got {self.step_safety}")
        if self.tol_rel_change <= 0 or self.tol_feas < 0:
            raise ValueError("tolerances must be positive")

    @classmethod
    def noisy(cls, xi, eps=0.0, **kwargs):
        """Config for the hinge-ball program with ``eta = mean((-xi)_+) + eps``."""
        eta = float(np.mean(np.maximum(-np.asarray(xi, dtype=float), 0.0)) + eps)
        return cls(eta=eta, mode=Mode.HINGE_BALL, **kwargs)

    def to_dict(self):
        d = dict(self.__dict__)
        d["mode"] = self.mode.value
        return d


@dataclass(eq=False)
class SolveReport:
    Xhat: np.ndarray
    iterations: int
    objective: float
    hinge: float
    status: Status
    best_feasible_objective: float = float("inf")
    history: list = field(default_factory=list)
    runtime_s: float = 0.0

    @property
    def converged(self):
        return self.status is Status.CONVERGED

    def to_dict(self, include_matrix=True):
        from .serialize import encode_array

        doc = {
            "status": self.status.value,
            "iterations": self.iterations,
            "objective": _finite_or_none(self.objective),
            "hinge": _finite_or_none(self.hinge),
            "best_feasible_objective": _finite_or_none(self.best_feasible_objective),
        }
        if include_matrix:
            doc["Xhat"] = encode_array(self.Xhat)
        return doc


def _finite_or_none(v):
    v = float(v)
    return v if np.isfinite(v) else None


def disk_project(z, radius):
    """Project a complex scalar onto the disk ``|z| <= radius``."""
    if radius < 0:
        raise ValueError(f"radius must be nonnegative, got {radius}")
    mag = abs(z)
    if mag <= radius:
        return z
    return z * (radius / mag)


def project_disks(p, radii):
    """Componentwise :func:`disk_project`."""
    mag = np.abs(p)
    over = mag > radii
    out = p.copy()
    out[over] = p[over] * (radii[over] / mag[over])
    return out


def _hinge(z, y):
    return float(np.mean(np.maximum(np.abs(z) ** 2 - y, 0.0)))


def hinge_feasible(y, eta):
    """The hinge ball is nonempty iff ``mean((-y)_+) <= eta``."""
    return float(np.mean(np.maximum(-np.asarray(y), 0.0))) <= eta


def project_hinge_ball(p, y, eta):
    """Euclidean projection onto ``{z : (1/M) sum (|z_m|^2 - y_m)_+ <= eta}``.

    The projection scales every coordinate radially. With multiplier
    ``mu`` the minimizer shrinks ``|p_m|`` to ``max(t |p_m|, sqrt(y_m)_+)``
    where ``t = 1 / (1 + 2 mu / M)``; the hinge is increasing in ``t``, so
    the active set is found by sorting breakpoints and ``t`` solved in
    closed form on the right piece.
    """
    y = np.asarray(y, dtype=np.float64)
    M = y.size
    rho = np.abs(p)
    if np.mean(np.maximum(rho**2 - y, 0.0)) <= eta:
        return p.copy()
    if not hinge_feasible(y, eta):
        raise ValueError("hinge ball is empty: mean((-y)_+) exceeds eta")
    sq = np.sqrt(np.maximum(y, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(rho > 0, sq / rho, np.inf)
    # coordinates with rho == 0 stay at zero and contribute (-y)_+ regardless
    order = np.argsort(s, kind="stable")
    s_sorted = s[order]
    rho2 = (rho**2)[order]
    ys = y[order]
    base = float(np.sum(np.maximum(-y[rho == 0], 0.0)))
    target = M * eta - base
    cum_r = np.cumsum(rho2)
    cum_y = np.cumsum(ys)
    n_fin = int(np.sum(np.isfinite(s_sorted)))
    t = 0.0
    if n_fin:
        # active set = first k coordinates, valid for t in [s[k-1], s[k]]
        lo = s_sorted[:n_fin]
        hi = np.append(s_sorted[1:n_fin], np.inf)
        with np.errstate(divide="ignore", invalid="ignore"):
            cand2 = (target + cum_y[:n_fin]) / cum_r[:n_fin]
        cand = np.sqrt(np.maximum(cand2, 0.0))
        ok = (cand2 >= 0) & (lo <= cand) & (cand <= np.minimum(hi, 1.0)) & (lo < 1.0)
        hits = np.flatnonzero(ok)
        if hits.size:
            t = float(cand[hits[0]])
    radius = np.maximum(t * rho, sq)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(rho > 0, np.minimum(radius / rho, 1.0), 0.0)
    return p * scale


def objective(X, X0, lam):
    """``-Re<X0, X> + lam * ||X||_*``."""
    X = np.asarray(X)
    X0 = np.asarray(X0)
    if X.shape != X0.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs {X0.shape}")
    nuc = float(np.sum(np.linalg.svd(X, compute_uv=False)))
    return float(-np.real(np.vdot(X0, X)) + lam * nuc)


def hinge_residual(ens, y, X):
    """``(1/M) sum_m (|<Phi_m, X>|^2 - y_m)_+``."""
    y = _obs_vector(y)
    if y.shape != (ens.M,):
        raise ValueError(f"y has shape {y.shape}, expected ({ens.M},)")
    return _hinge(forward_map(ens, X), y)


def default_lambda(delta_estimate):
    """Regularization weight ``0.9 - delta`` for anchor quality ``delta``."""
    if not 0 <= delta_estimate < 0.9:
        raise ValueError(f"delta estimate must lie in [0, 0.9), got {delta_estimate}")
    return 0.9 - delta_estimate


def _obs_vector(y):
    if isinstance(y, Observations):
        return y.y
    return np.asarray(y, dtype=np.float64)


def _prox_primal(V, tau, lam):
    U, s, Vh = np.linalg.svd(V, full_matrices=False)
    s = np.maximum(s - tau * lam, 0.0)
    keep = s > 0
    return (U[:, keep] * s[keep]) @ Vh[keep], float(np.sum(s))


def solve(ens, y, anchor, cfg=None):
    """Run anchored regression from the anchor ``X0`` and report the result.

    The iterate starts at ``X0``. Convergence requires the relative
    iterate change to stay below ``cfg.tol_rel_change`` over the last
    ten iterations and the hinge residual to be within
    ``eta + tol_feas * (1 + mean(y))``.
    """
    cfg = cfg or SolverConfig()
    t_start = time.perf_counter()
    yv = _obs_vector(y)
    if yv.shape != (ens.M,):
        raise ValueError(f"y has shape {yv.shape}, expected ({ens.M},)")
    X0 = anchor.X0 if isinstance(anchor, Anchor) else np.asarray(anchor)
    if X0.shape != (ens.d1, ens.d2):
        raise ValueError(f"anchor shape {X0.shape} does not match ensemble {(ens.d1, ens.d2)}")

    mean_y = float(np.mean(yv))
    feas_tol = cfg.eta + cfg.tol_feas * (1.0 + abs(mean_y))
    if cfg.mode is Mode.DISK_PROJECTION:
        if np.any(yv < 0):
            raise ValueError("DiskProjection mode requires y >= 0; use HingeBall for noisy data")
        radii = np.sqrt(yv)

        def project(p):
            return project_disks(p, radii)
    else:
        if not hinge_feasible(yv, cfg.eta):
            X = np.zeros_like(X0)
            return SolveReport(X, 0, objective(X, X0, cfg.lam), hinge_residual(ens, yv, X),
                               Status.INFEASIBLE, runtime_s=time.perf_counter() - t_start)

        def project(p):
            return project_hinge_ball(p, yv, cfg.eta)

    dtype = np.complex128 if (np.iscomplexobj(X0) or not ens.is_real) else np.float64
    X = X0.astype(dtype, copy=True)
    X0 = X0.astype(dtype, copy=False)

    L = opnorm_estimate(ens, OPNORM_ITERS, RngSpec(cfg.seed).derive("opnorm"))
    if L == 0:
        X = np.zeros_like(X0)
        return SolveReport(X, 0, 0.0, hinge_residual(ens, yv, X), Status.CONVERGED,
                           best_feasible_objective=0.0, runtime_s=time.perf_counter() - t_start)
    step = 1.0 / (L * cfg.step_safety)
    tau = sigma = step
    scale = max(np.linalg.norm(X0), np.sqrt(abs(mean_y) * ens.M) / L, 1e-300)
    blowup = cfg.divergence_factor * scale

    zX = forward_map(ens, X)
    zbar = zX.copy()
    w = np.zeros(ens.M, dtype=np.result_type(zX, np.complex128 if dtype == np.complex128 else np.float64))
    changes = []
    best = float("inf")
    history = []
    status = Status.MAX_ITER
    nuc = float(np.sum(np.linalg.svd(X, compute_uv=False)))
    it = 0
    for it in range(1, cfg.max_iter + 1):
        q = w + sigma * zbar
        w = q - sigma * project(q / sigma)
        Xn, nuc = _prox_primal(X - tau * adjoint_map(ens, w) + tau * X0, tau, cfg.lam)
        zn = forward_map(ens, Xn)
        nrm = np.linalg.norm(Xn)
        changes.append(np.linalg.norm(Xn - X) / max(nrm, 1e-300))
        zbar = 2.0 * zn - zX
        X, zX = Xn, zn

        h = _hinge(zX, yv)
        obj = float(-np.real(np.vdot(X0, X)) + cfg.lam * nuc)
        if h <= feas_tol and obj < best:
            best = obj
        if cfg.record_history:
            history.append((obj, h, best))
        if not np.isfinite(nrm) or nrm > blowup:
            status = Status.UNBOUNDED
            break
        if (
            len(changes) >= CONVERGENCE_WINDOW
            and max(changes[-CONVERGENCE_WINDOW:]) <= cfg.tol_rel_change
            and h <= feas_tol
        ):
            status = Status.CONVERGED
            break
        if len(changes) > CONVERGENCE_WINDOW:
            changes.pop(0)

    h = _hinge(zX, yv)
    obj = float(-np.real(np.vdot(X0, X)) + cfg.lam * nuc)
    return SolveReport(
        Xhat=X,
        iterations=it,
        objective=obj,
        hinge=h,
        status=status,
        best_feasible_objective=best,
        history=history,
        runtime_s=time.perf_counter() - t_start,
    )
