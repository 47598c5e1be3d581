"""Measurement ensembles, observations and the linear measurement map.

The inner linear map is ``z_m = <Phi_m, X> = trace(Phi_m^* X)``; the
observations are ``y_m = |z_m|^2 + xi_m``. Rank-one ensembles keep their
factors ``a_m, b_m`` (``Phi_m = a_m b_m^*``) and never materialize the
d1 x d2 matrices.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from .rng import RngSpec, as_rng_spec, complex_normal

__all__ = [
    "EnsembleKind",
    "Ensemble",
    "Observations",
    "sample_gaussian_iid",
    "sample_rank1_complex",
    "forward_map",
    "adjoint_map",
    "measure",
    "opnorm_estimate",
    "make_noise",
    "noise_budget",
]


class EnsembleKind(str, enum.Enum):
    GAUSSIAN_IID = "GaussianIID"
    RANK_ONE_COMPLEX = "RankOneComplex"
    STRUCTURED = "Structured"

    @property
    def is_rank_one(self):
        return self is not EnsembleKind.GAUSSIAN_IID


@dataclass(frozen=True, eq=False)
class Ensemble:
    """A family of M measurement matrices of size d1 x d2.

    ``phis`` (M x d1 x d2, real) is set for Gaussian ensembles; ``a``
    (M x d1) and ``b`` (M x d2) for the rank-one kinds.
    """

    kind: EnsembleKind
    d1: int
    d2: int
    M: int
    phis: np.ndarray = None
    a: np.ndarray = None
    b: np.ndarray = None
    seed: RngSpec = None

    def __post_init__(self):
        object.__setattr__(self, "kind", EnsembleKind(self.kind))
        if min(self.d1, self.d2, self.M) < 1:
            raise ValueError(
                f"dimensions must be positive, got d1={self.d1}, d2={self.d2}, M={self.M}"
            )
        if self.kind is EnsembleKind.GAUSSIAN_IID:
            phis = np.asarray(self.phis)
            if phis.shape != (self.M, self.d1, self.d2):
                raise ValueError(f"phis has shape {phis.shape}, expected {(self.M, self.d1, self.d2)}")
            if np.iscomplexobj(phis):
                if np.any(phis.imag != 0):
                    raise ValueError("GaussianIID ensembles must be real")
                phis = phis.real
            _check_finite(phis, "phis")
            phis = phis.astype(np.float64)
            phis.setflags(write=False)
            object.__setattr__(self, "phis", phis)
        else:
            a = np.asarray(self.a, dtype=np.complex128)
            b = np.asarray(self.b, dtype=np.complex128)
            if a.shape != (self.M, self.d1) or b.shape != (self.M, self.d2):
                raise ValueError(
                    f"factor shapes {a.shape}, {b.shape} do not match M={self.M}, "
                    f"d1={self.d1}, d2={self.d2}"
                )
            _check_finite(a, "a")
            _check_finite(b, "b")
            a.setflags(write=False)
            b.setflags(write=False)
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)

    @property
    def shape(self):
        return (self.d1, self.d2)

    @property
    def is_real(self):
        return self.kind is EnsembleKind.GAUSSIAN_IID

    def matrix(self, m):
        """The m-th measurement matrix, materialized."""
        if self.kind is EnsembleKind.GAUSSIAN_IID:
            return self.phis[m].copy()
        return np.outer(self.a[m], self.b[m].conj())

    def transpose(self):
        """Ensemble of ``Phi_m^T``; measures ``X^T`` exactly like ``self`` measures ``X``."""
        if self.kind is EnsembleKind.GAUSSIAN_IID:
            return Ensemble(self.kind, self.d2, self.d1, self.M,
                            phis=np.ascontiguousarray(self.phis.transpose(0, 2, 1)), seed=self.seed)
        return Ensemble(self.kind, self.d2, self.d1, self.M,
                        a=self.b.conj(), b=self.a.conj(), seed=self.seed)

    def to_dict(self):
        from .serialize import encode_array

        data = {}
        if self.kind is EnsembleKind.GAUSSIAN_IID:
            data["phis"] = encode_array(self.phis)
        else:
            data["a"] = encode_array(self.a)
            data["b"] = encode_array(self.b)
        return {
            "kind": self.kind.value,
            "d1": self.d1,
            "d2": self.d2,
            "M": self.M,
            "seed": None if self.seed is None else self.seed.to_dict(),
            "data": data,
        }

    @classmethod
    def from_dict(cls, doc):
        from .serialize import decode_array

        kind = EnsembleKind(doc["kind"])
        seed = None if doc.get("seed") is None else RngSpec.from_dict(doc["seed"])
        arrays = {k: decode_array(v) for k, v in doc["data"].items()}
        return cls(kind, int(doc["d1"]), int(doc["d2"]), int(doc["M"]), seed=seed, **arrays)


@dataclass(frozen=True, eq=False)
class Observations:
    """``y = clean + xi``; ``xi`` and ``clean`` are known only to the simulator."""

    y: np.ndarray
    xi: np.ndarray = None
    clean: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64).copy()
        if y.ndim != 1:
            raise ValueError("y must be a vector")
        _check_finite(y, "y")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)
        for name in ("xi", "clean"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=np.float64).copy()
                if v.shape != y.shape:
                    raise ValueError(f"{name} has shape {v.shape}, expected {y.shape}")
                v.setflags(write=False)
                object.__setattr__(self, name, v)

    @property
    def M(self):
        return self.y.size

    def scaled(self, c):
        """Observations of ``sqrt(c) X`` with noise scaled alike."""
        return Observations(
            c * self.y,
            None if self.xi is None else c * self.xi,
            None if self.clean is None else c * self.clean,
        )

    def to_dict(self):
        from .serialize import encode_array

        data = {"y": encode_array(self.y)}
        if self.xi is not None:
            data["xi"] = encode_array(self.xi)
        if self.clean is not None:
            data["clean"] = encode_array(self.clean)
        return {"M": self.M, "meta": dict(self.meta), "data": data}

    @classmethod
    def from_dict(cls, doc):
        from .serialize import decode_array

        data = {k: decode_array(v) for k, v in doc["data"].items()}
        return cls(data["y"], data.get("xi"), data.get("clean"), meta=dict(doc.get("meta", {})))


def _check_finite(arr, name):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")


def sample_gaussian_iid(d1, d2, M, rng):
    """M real matrices with iid N(0, 1) entries."""
    spec = as_rng_spec(rng)
    phis = spec.generator().standard_normal((M, d1, d2))
    return Ensemble(EnsembleKind.GAUSSIAN_IID, d1, d2, M, phis=phis, seed=spec)


def sample_rank1_complex(d1, d2, M, rng):
    """Factors ``a_m ~ CN(0, I_d1)``, ``b_m ~ CN(0, I_d2)``."""
    spec = as_rng_spec(rng)
    gen = spec.generator()
    a = complex_normal(gen, (M, d1))
    b = complex_normal(gen, (M, d2))
    return Ensemble(EnsembleKind.RANK_ONE_COMPLEX, d1, d2, M, a=a, b=b, seed=spec)


def _check_shape(ens, X):
    X = np.asarray(X)
    if X.shape != (ens.d1, ens.d2):
        raise ValueError(f"X has shape {X.shape}, ensemble expects {(ens.d1, ens.d2)}")
    return X


def forward_map(ens, X):
    """``z_m = trace(Phi_m^* X)``; for rank-one kinds ``a_m^* X b_m``."""
    X = _check_shape(ens, X)
    if ens.kind is EnsembleKind.GAUSSIAN_IID:
        return ens.phis.reshape(ens.M, -1) @ X.reshape(-1)
    return np.sum((ens.a.conj() @ X) * ens.b, axis=1)


def adjoint_map(ens, z):
    """``sum_m z_m Phi_m``, the adjoint of :func:`forward_map`."""
    z = np.asarray(z)
    if z.shape != (ens.M,):
        raise ValueError(f"z has shape {z.shape}, expected ({ens.M},)")
    if ens.kind is EnsembleKind.GAUSSIAN_IID:
        return (z @ ens.phis.reshape(ens.M, -1)).reshape(ens.d1, ens.d2)
    return (ens.a.T * z) @ ens.b.conj()


def measure(ens, X, noise=None):
    """Phaseless observations ``y_m = |<Phi_m, X>|^2 + xi_m``."""
    z = forward_map(ens, X)
    clean = np.abs(z) ** 2
    if noise is None:
        xi = np.zeros(ens.M)
    else:
        xi = np.asarray(noise, dtype=np.float64)
        if xi.shape != (ens.M,):
            raise ValueError(f"noise has shape {xi.shape}, expected ({ens.M},)")
    return Observations(clean + xi, xi, clean)


def opnorm_estimate(ens, iters, rng):
    """Power-iteration lower estimate of the operator norm of the forward map.

    Runs ``iters`` steps on ``A^* A`` from a random start and returns the
    square root of the final Rayleigh quotient, which never exceeds the
    true norm and is nondecreasing in ``iters``.
    """
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    gen = as_rng_spec(rng).generator()
    if ens.is_real:
        x = gen.standard_normal((ens.d1, ens.d2))
    else:
        x = complex_normal(gen, (ens.d1, ens.d2))
    x /= np.linalg.norm(x)
    rq = 0.0
    for _ in range(iters):
        w = adjoint_map(ens, forward_map(ens, x))
        rq = float(np.real(np.vdot(x, w)))
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        x = w / nw
    return float(np.sqrt(max(rq, 0.0)))


def make_noise(kind, M, rng, level=0.0, low=None, high=None):
    """Noise vector drawn on its own stream.

    ``kind`` is one of ``zero``, ``constant`` (every entry ``level``),
    ``gaussian`` (iid N(0, level^2)) or ``uniform`` (iid on
    ``[low, high]``, default ``[-level, level]``).
    """
    if kind == "zero":
        return np.zeros(M)
    if kind == "constant":
        return np.full(M, float(level))
    gen = as_rng_spec(rng).derive("noise").generator()
    if kind == "gaussian":
        return float(level) * gen.standard_normal(M)
    if kind == "uniform":
        lo = -float(level) if low is None else float(low)
        hi = float(level) if high is None else float(high)
        return gen.uniform(lo, hi, M)
    raise ValueError(f"unknown noise kind {kind!r}")


def noise_budget(xi, eps=0.0):
    """Hinge budget ``eta = mean((-xi)_+) + eps`` for known noise."""
    xi = np.asarray(xi, dtype=np.float64)
    return float(np.mean(np.maximum(-xi, 0.0)) + eps)
