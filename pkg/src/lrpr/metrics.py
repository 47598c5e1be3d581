"""Error measures and condition checks for recovered matrices."""

from dataclasses import dataclass

import numpy as np

from .numlin import is_orthonormal

__all__ = [
    "RADICAND_CLAMP",
    "RANK_TOL",
    "phase_dist",
    "relative_phase_dist",
    "sign_dist",
    "vec_sin_angle",
    "Theorem2Check",
    "check_theorem2",
    "psd_anchor_error",
]

RADICAND_CLAMP = 1e-12
RANK_TOL = 1e-10


def _sqrt_clamped(x, scale=1.0):
    if x < -RADICAND_CLAMP * max(scale, 1.0):
        raise ArithmeticError(f"negative radicand {x:.3e}")
    return float(np.sqrt(max(x, 0.0)))


def _same_shape(A, B):
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    return A, B


def phase_dist(A, B):
    """``min_theta ||A - e^{i theta} B||_F``.

    The minimizing phase is that of ``<B, A>``, so the value equals
    ``sqrt(||A||^2 + ||B||^2 - 2 |<B, A>|)``. The norm is evaluated at the
    minimizer directly; the expanded form loses half the digits to
    cancellation near zero.
    """
    A, B = _same_shape(A, B)
    inner = np.vdot(B, A)
    mag = abs(inner)
    phase = inner / mag if mag > 0 else 1.0
    if not (np.iscomplexobj(A) or np.iscomplexobj(B)):
        phase = float(np.real(phase))
    return float(np.linalg.norm(A - phase * B))


def relative_phase_dist(Xhat, Xsharp):
    return phase_dist(Xhat, Xsharp) / float(np.linalg.norm(Xsharp))


def sign_dist(A, B):
    """``min(||A - B||_F, ||A + B||_F)`` for real matrices."""
    A, B = _same_shape(A, B)
    if np.iscomplexobj(A) or np.iscomplexobj(B):
        raise TypeError("sign_dist is defined for real matrices only")
    return float(min(np.linalg.norm(A - B), np.linalg.norm(A + B)))


def vec_sin_angle(u, v):
    """Sine of the angle between the complex lines through ``u`` and ``v``."""
    u, v = _same_shape(np.ravel(u), np.ravel(v))
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("angle undefined for a zero vector")
    c2 = min(abs(np.vdot(u, v)) ** 2 / (nu**2 * nv**2), 1.0)
    return float(np.sqrt(1.0 - c2))


@dataclass(frozen=True)
class Theorem2Check:
    """Anchor/regularization condition ``delta / (1 - lam) <= 0.45 (2.8 - kappa)``."""

    kappa: float
    delta: float
    lam: float
    satisfied: bool
    margin: float

    @property
    def lhs(self):
        return self.delta / (1.0 - self.lam)

    @property
    def rhs(self):
        return 0.45 * (2.8 - self.kappa)


def check_theorem2(Xsharp, delta, lam, rank_tol=RANK_TOL):
    """Evaluate the flatness condition for a real rank-r target.

    ``kappa = s_1 / s_r`` where r counts singular values above
    ``rank_tol * s_1``.
    """
    if not 0 <= lam < 1:
        raise ValueError(f"lam must lie in [0, 1), got {lam}")
    s = np.linalg.svd(np.asarray(Xsharp), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        raise ValueError("target matrix is zero")
    s = s[s > rank_tol * s[0]]
    kappa = float(s[0] / s[-1])
    lhs = delta / (1.0 - lam)
    rhs = 0.45 * (2.8 - kappa)
    satisfied = kappa < 2.8 and lhs <= rhs
    return Theorem2Check(kappa, float(delta), float(lam), bool(satisfied), float(rhs - lhs))


def psd_anchor_error(U0, Usharp):
    """``||U0 U0^* - U U^*||_F`` via ``sqrt(2r - 2 ||U0^* U||_F^2)``."""
    U0 = np.atleast_2d(np.asarray(U0).T).T
    Usharp = np.atleast_2d(np.asarray(Usharp).T).T
    if U0.shape != Usharp.shape:
        raise ValueError(f"shape mismatch: {U0.shape} vs {Usharp.shape}")
    if not (is_orthonormal(U0) and is_orthonormal(Usharp)):
        raise ValueError("inputs must have orthonormal columns")
    r = U0.shape[1]
    return _sqrt_clamped(2 * r - 2 * np.linalg.norm(U0.conj().T @ Usharp) ** 2, 2 * r)
