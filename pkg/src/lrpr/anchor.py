"""Anchor construction by spectral initialization with partial traces.

The anchor is always a unit-singular-value product ``X0 = U0 V0^*``.
Column and row spaces are estimated separately from the compressed
moment matrices

    Upsilon  = (1/M) sum_m y_m Phi_m Psi_m Psi_m^* Phi_m^*
    Upsilon' = (1/M) sum_m y_m Phi_m^* Psi'_m Psi'_m^* Phi_m

For rank-one measurements ``Phi_m = a_m b_m^*`` the choice
``Psi_m = b_m / ||b_m||^2`` collapses these to ``(1/M) sum y_m a_m a_m^*``
and ``(1/M) sum y_m b_m b_m^*``. For Gaussian measurements a given
row-space estimate ``Vhat`` is used as the compression matrix.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .model import EnsembleKind
from .numlin import is_orthonormal, leading_eigvecs, svd

__all__ = [
    "AnchorMethod",
    "Anchor",
    "DegenerateObservations",
    "upsilon_rank1",
    "upsilon_compressed",
    "anchor_rank1",
    "anchor_col_from_row",
    "anchor_row_from_col",
    "anchor_psd",
    "anchor_naive_vectorized",
    "anchor_oracle",
    "anchor_quality",
    "NAIVE_MAX_ENTRIES",
]

NAIVE_MAX_ENTRIES = 4096


class DegenerateObservations(ValueError):
    """Observations carry no information (all zero) or there are none."""


class AnchorMethod(str, enum.Enum):
    RANK1 = "Rank1"
    ROW_TO_COL = "RowToCol"
    PSD = "PSD"
    NAIVE_VECTORIZED = "NaiveVectorized"
    ORACLE = "Oracle"


@dataclass(frozen=True, eq=False)
class Anchor:
    U0: np.ndarray
    V0: np.ndarray
    method: AnchorMethod

    def __post_init__(self):
        U0 = np.atleast_2d(np.asarray(self.U0).T).T
        V0 = np.atleast_2d(np.asarray(self.V0).T).T
        if U0.shape[1] != V0.shape[1]:
            raise ValueError(f"factor ranks differ: {U0.shape[1]} vs {V0.shape[1]}")
        for name, Q in (("U0", U0), ("V0", V0)):
            if not is_orthonormal(Q):
                raise ValueError(f"{name} does not have orthonormal columns")
        object.__setattr__(self, "U0", U0)
        object.__setattr__(self, "V0", V0)
        object.__setattr__(self, "method", AnchorMethod(self.method))

    @property
    def rank(self):
        return self.U0.shape[1]

    @property
    def shape(self):
        return (self.U0.shape[0], self.V0.shape[0])

    @property
    def X0(self):
        return self.U0 @ self.V0.conj().T

    def rotated(self, theta):
        """Anchor for ``e^{i theta} X0``."""
        return Anchor(np.exp(1j * theta) * self.U0, self.V0, self.method)

    def to_dict(self):
        from .serialize import encode_array

        return {
            "method": self.method.value,
            "U0": encode_array(self.U0),
            "V0": encode_array(self.V0),
        }

    @classmethod
    def from_dict(cls, doc):
        from .serialize import decode_array

        return cls(decode_array(doc["U0"]), decode_array(doc["V0"]), doc["method"])


def _check_obs(ens, y):
    y = np.asarray(y, dtype=np.float64)
    if ens.M == 0 or y.size == 0:
        raise DegenerateObservations("no measurements")
    if y.shape != (ens.M,):
        raise ValueError(f"y has shape {y.shape}, expected ({ens.M},)")
    if not np.any(y):
        raise DegenerateObservations("degenerate observations: y is identically zero")
    return y


def _require_rank_one(ens):
    if not ens.kind.is_rank_one:
        raise ValueError(f"rank-one initialization needs a rank-one ensemble, got {ens.kind.value}")


def upsilon_rank1(ens, y):
    """``((1/M) sum y_m a_m a_m^*, (1/M) sum y_m b_m b_m^*)``."""
    _require_rank_one(ens)
    y = np.asarray(y, dtype=np.float64)
    U = (ens.a.T * y) @ ens.a.conj() / ens.M
    V = (ens.b.T * y) @ ens.b.conj() / ens.M
    return U, V


def upsilon_compressed(ens, y, Psi):
    """``(1/M) sum_m y_m Phi_m Psi Psi^* Phi_m^*`` with a shared d2 x q ``Psi``."""
    y = np.asarray(y, dtype=np.float64)
    Psi = np.atleast_2d(np.asarray(Psi).T).T
    if Psi.shape[0] != ens.d2:
        raise ValueError(f"compression matrix has {Psi.shape[0]} rows, expected {ens.d2}")
    if ens.kind is EnsembleKind.GAUSSIAN_IID:
        P = ens.phis @ Psi  # M x d1 x q
    else:
        P = ens.a[:, :, None] * (ens.b.conj() @ Psi)[:, None, :]
    return np.einsum("m,miq,mjq->ij", y, P, P.conj()) / ens.M


def anchor_rank1(ens, y):
    """Leading eigenvectors of the two rank-one partial-trace matrices."""
    _require_rank_one(ens)
    y = _check_obs(ens, y)
    Ups, Ups_p = upsilon_rank1(ens, y)
    u0 = leading_eigvecs(Ups, 1)
    v0 = leading_eigvecs(Ups_p, 1)
    return Anchor(u0, v0, AnchorMethod.RANK1)


def anchor_col_from_row(ens, y, Vhat):
    """Column-space estimate U0 (d1 x r) from a row-space estimate ``Vhat``."""
    y = _check_obs(ens, y)
    Vhat = np.atleast_2d(np.asarray(Vhat).T).T
    r = Vhat.shape[1]
    if r > min(ens.d1, ens.d2):
        raise ValueError(f"rank {r} exceeds min(d1, d2) = {min(ens.d1, ens.d2)}")
    if not is_orthonormal(Vhat):
        raise ValueError("Vhat does not have orthonormal columns")
    return leading_eigvecs(upsilon_compressed(ens, y, Vhat), r)


def anchor_row_from_col(ens, y, Uhat):
    """Row-space estimate V0 (d2 x r) from a column-space estimate ``Uhat``."""
    return anchor_col_from_row(ens.transpose(), y, np.conj(Uhat))


def anchor_psd(ens, y, Uhat):
    """Anchor ``U0 U0^*`` for a Hermitian PSD target from a rough ``Uhat``."""
    if ens.d1 != ens.d2:
        raise ValueError("PSD anchor needs a square ensemble")
    U0 = anchor_col_from_row(ens, y, Uhat)
    return Anchor(U0, U0, AnchorMethod.PSD)


def anchor_naive_vectorized(ens, y, r):
    """Vectorized baseline: leading eigvec of ``(1/M) sum y_m vec(Phi_m) vec(Phi_m)^*``,
    reshaped to d1 x d2 and truncated to rank ``r``."""
    n = ens.d1 * ens.d2
    if n > NAIVE_MAX_ENTRIES:
        raise ValueError(
            f"vectorized baseline disabled at this size (d1*d2 = {n} > {NAIVE_MAX_ENTRIES})"
        )
    if not 1 <= r <= min(ens.d1, ens.d2):
        raise ValueError(f"rank {r} outside [1, {min(ens.d1, ens.d2)}]")
    y = _check_obs(ens, y)
    if ens.kind is EnsembleKind.GAUSSIAN_IID:
        vecs = ens.phis.reshape(ens.M, n)
    else:
        vecs = (ens.a[:, :, None] * ens.b.conj()[:, None, :]).reshape(ens.M, n)
    R = (vecs.T * y) @ vecs.conj() / ens.M
    lead = leading_eigvecs(R, 1)[:, 0].reshape(ens.d1, ens.d2)
    U, _, V = svd(lead)
    return Anchor(U[:, :r], V[:, :r], AnchorMethod.NAIVE_VECTORIZED)


def _truth_factors(Xsharp, r=None, rank_tol=1e-10):
    U, s, V = svd(Xsharp)
    if s.size == 0 or s[0] == 0:
        raise ValueError("target matrix is zero")
    rank = int(np.sum(s > rank_tol * s[0]))
    if r is not None and r != rank:
        raise ValueError(f"rank mismatch: anchor rank {r}, target rank {rank}")
    return U[:, :rank], V[:, :rank]


def anchor_oracle(Xsharp, rank_tol=1e-10):
    """Anchor built from the target's own singular vectors."""
    U, V = _truth_factors(np.asarray(Xsharp), rank_tol=rank_tol)
    return Anchor(U, V, AnchorMethod.ORACLE)


def anchor_quality(anchor, Xsharp, rank_tol=1e-10):
    """Relative distance from ``X0`` to the phase orbit of ``U V^*``.

    Complex targets minimize over unit-modulus ``z``; real targets over
    ``z in {-1, +1}``.
    """
    Xsharp = np.asarray(Xsharp)
    if anchor.shape != Xsharp.shape:
        raise ValueError(f"anchor shape {anchor.shape} does not match target {Xsharp.shape}")
    U, V = _truth_factors(Xsharp, anchor.rank, rank_tol)
    T = U @ V.conj().T
    X0 = anchor.X0
    r = anchor.rank
    if not np.iscomplexobj(Xsharp) and not np.iscomplexobj(X0):
        d = min(np.linalg.norm(X0 - T), np.linalg.norm(X0 + T))
        return float(d / np.sqrt(r))
    inner = abs(np.vdot(T, X0))
    return float(np.sqrt(max(2 * r - 2 * inner, 0.0)) / np.sqrt(r))
