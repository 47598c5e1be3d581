"""Monte Carlo checks of closed-form Gaussian expectations and bounds.

Each check draws samples in fixed-size chunks, each chunk from its own
derived stream, and sums the chunks in index order. Results are therefore
identical for a given seed regardless of how the work is split.

Order-4 tensors are stored flat with multi-index ``(i1, i2, i3, i4)`` at
position ``i1 + d*i2 + d**2*i3 + d**3*i4`` (column-major ravel).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .numlin import is_orthonormal, leading_eigvecs, subspace_sin
from .rng import RngSpec, as_rng_spec, complex_normal

__all__ = [
    "MomentReport",
    "BoundReport",
    "flat_index",
    "fourth_moment_tensor",
    "octa_moment_tensor",
    "fourth_moment_check",
    "quad_form_check",
    "octa_moment_check",
    "complex_moment_check",
    "expected_upsilon_rank1_check",
    "expected_upsilon_rankr_check",
    "gauss_product_tail_bound",
    "gauss_product_tail_check",
    "davis_kahan_check",
    "run_battery",
    "FOURTH_TOL",
    "QUAD_TOL",
    "OCTA_TOL",
    "COMPLEX_REL_TOL",
    "UPSILON_REL_TOL",
]

CHUNK = 100_000
SYM_TOL = 1e-12

# CLT-scale tolerances, pinned by pilot runs at the default sample sizes
FOURTH_TOL = 0.05  # d=2, N=5e5; worst entry has sd ~ 0.014
QUAD_TOL = 0.05  # d=4, N=2e5; worst entry has sd ~ 0.022
OCTA_TOL = 0.6  # d=2, see OCTA_SAMPLES
OCTA_SAMPLES = 40_000_000  # sd of the (1,1,1,1) entry is ~1424/sqrt(N)
COMPLEX_REL_TOL = (0.01, 0.03, 0.05, 0.10)
COMPLEX_MOMENTS = (1.0, 2.0, 6.0, 24.0)
UPSILON_REL_TOL = 0.05
TAIL_SIGMAS = 3.0
DK_SHRINK = 5.0


@dataclass(frozen=True)
class MomentReport:
    name: str
    analytic: np.ndarray
    empirical: np.ndarray
    max_abs_err: float
    samples: int
    seed: RngSpec
    tol: float = None
    rel_fro_err: float = None

    def __post_init__(self):
        if np.shape(self.analytic) != np.shape(self.empirical):
            raise ValueError("analytic and empirical shapes differ")

    @property
    def passed(self):
        if self.tol is None:
            return True
        err = self.rel_fro_err if self.rel_fro_err is not None else self.max_abs_err
        return bool(err <= self.tol)

    def to_dict(self):
        return {
            "name": self.name,
            "kind": "moment",
            "max_abs_err": self.max_abs_err,
            "rel_fro_err": self.rel_fro_err,
            "tol": self.tol,
            "samples": self.samples,
            "seed": self.seed.to_dict(),
            "passed": self.passed,
        }


@dataclass(frozen=True)
class BoundReport:
    """Outcome of an inequality check; ``skipped`` when the hypothesis fails."""

    name: str
    passed: bool
    lhs: float
    rhs: float
    skipped: bool = False
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {"name": self.name, "kind": "bound", "passed": self.passed, "lhs": self.lhs,
                "rhs": self.rhs, "skipped": self.skipped, "details": self.details}


def flat_index(idx, d):
    return sum(int(i) * d**k for k, i in enumerate(idx))


def _flat(T):
    return np.ravel(T, order="F")


def _chunks(N, chunk=CHUNK):
    k = 0
    while N > 0:
        n = min(chunk, N)
        yield k, n
        N -= n
        k += 1


def _accumulate(spec, N, draw, stat):
    """Sum ``stat(draw(gen, n))`` over chunks, then divide by ``N``."""
    total = None
    for k, n in _chunks(N):
        gen = spec.derive("chunk", k).generator()
        s = stat(draw(gen, n))
        total = s if total is None else total + s
    return total / N


def _assert_symmetric(T):
    for perm in ((1, 0, 2, 3), (0, 2, 1, 3), (0, 1, 3, 2)):
        if np.max(np.abs(T - np.transpose(T, perm))) > SYM_TOL:
            raise AssertionError("analytic tensor is not symmetric")


def fourth_moment_tensor(d):
    """``E g(x)g(x)g(x)g`` for ``g ~ N(0, I_d)``, shape ``(d, d, d, d)``."""
    eye = np.eye(d)
    return (np.einsum("ij,kl->ijkl", eye, eye) + np.einsum("ik,jl->ijkl", eye, eye)
            + np.einsum("il,jk->ijkl", eye, eye))


def octa_moment_tensor(x):
    """``E (x^T g)^4 g(x)g(x)g(x)g`` for unit ``x``.

    Terms: 24 x^4, 12 times the six placements of ``x x`` with a
    Kronecker pair, and 3 times the three pure Kronecker patterns.
    """
    x = np.asarray(x, dtype=float)
    d = x.size
    eye = np.eye(d)
    xx = np.outer(x, x)
    mixed = sum(np.einsum(spec, xx, eye) for spec in (
        "ij,kl->ijkl", "ik,jl->ijkl", "il,jk->ijkl",
        "kl,ij->ijkl", "jl,ik->ijkl", "jk,il->ijkl",
    ))
    return 24 * np.einsum("i,j,k,l->ijkl", x, x, x, x) + 12 * mixed + 3 * fourth_moment_tensor(d)


def _weighted_fourth(g, w=None):
    """``sum_n w_n g_n(x)g_n(x)g_n(x)g_n`` as a ``(d, d, d, d)`` array via one matmul."""
    n, d = g.shape
    G2 = (g[:, :, None] * g[:, None, :]).reshape(n, d * d)
    L = G2 if w is None else G2 * w[:, None]
    return (L.T @ G2).reshape(d, d, d, d)


def _gauss(d):
    return lambda gen, n: gen.standard_normal((n, d))


def fourth_moment_check(d, N=500_000, rng=0, tol=FOURTH_TOL):
    if not 1 <= d <= 6:
        raise ValueError(f"d must be in [1, 6], got {d}")
    spec = as_rng_spec(rng).derive("fourth-moment", d)
    analytic = fourth_moment_tensor(d)
    _assert_symmetric(analytic)
    emp = _accumulate(spec, N, _gauss(d), _weighted_fourth)
    return MomentReport("fourth_moment", _flat(analytic), _flat(emp),
                        float(np.max(np.abs(analytic - emp))), N, spec, tol)


def quad_form_check(x, y, N=200_000, rng=0, tol=QUAD_TOL):
    """``E (x^T g)(g^T y) g g^T = (x^T y) I + x y^T + y x^T``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size > 64:
        raise ValueError("x, y must be real vectors of equal length <= 64")
    d = x.size
    analytic = (x @ y) * np.eye(d) + np.outer(x, y) + np.outer(y, x)
    assert np.allclose(analytic, analytic.T, atol=SYM_TOL)
    spec = as_rng_spec(rng).derive("quad-form", d)

    def stat(g):
        w = (g @ x) * (g @ y)
        return (g.T * w) @ g

    emp = _accumulate(spec, N, _gauss(d), stat)
    return MomentReport("quad_form", analytic, emp, float(np.max(np.abs(analytic - emp))),
                        N, spec, tol)


def octa_moment_check(x, N=OCTA_SAMPLES, rng=0, tol=OCTA_TOL):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or not 1 <= x.size <= 4:
        raise ValueError("x must be a vector of length 1..4")
    if abs(np.linalg.norm(x) - 1.0) > 1e-12:
        raise ValueError("x must have unit norm")
    d = x.size
    analytic = octa_moment_tensor(x)
    _assert_symmetric(analytic)
    spec = as_rng_spec(rng).derive("octa-moment", d)

    def stat(g):
        return _weighted_fourth(g, (g @ x) ** 4)

    emp = _accumulate(spec, N, _gauss(d), stat)
    return MomentReport("octa_moment", _flat(analytic), _flat(emp),
                        float(np.max(np.abs(analytic - emp))), N, spec, tol)


def complex_moment_check(N=1_000_000, rng=0, rel_tol=COMPLEX_REL_TOL):
    """``E|g|^{2k}`` for ``g ~ CN(0, 1)``, k = 1..4, against ``k!``."""
    spec = as_rng_spec(rng).derive("complex-moment")

    def stat(g):
        a = np.abs(g) ** 2
        return np.array([a.sum(), (a**2).sum(), (a**3).sum(), (a**4).sum()])

    emp = _accumulate(spec, N, lambda gen, n: complex_normal(gen, (n,)), stat)
    analytic = np.array(COMPLEX_MOMENTS)
    rel = np.abs(emp - analytic) / analytic
    rep = MomentReport("complex_moment", analytic, emp, float(np.max(np.abs(emp - analytic))),
                       N, spec, None)
    return rep, bool(np.all(rel <= np.asarray(rel_tol))), rel


def _rel_fro(analytic, emp):
    return float(np.linalg.norm(emp - analytic) / np.linalg.norm(analytic))


def expected_upsilon_rank1_check(u, v, sigma, xi_mean, d1, M=200_000, rng=0,
                                 tol=UPSILON_REL_TOL):
    """Partial-trace matrix of rank-one complex measurements against
    ``sigma^2 u u^* + (sigma^2 + mean xi) I``.

    The noise is the constant ``xi_mean``; only its average enters.
    """
    u = np.asarray(u, dtype=complex).ravel()
    v = np.asarray(v, dtype=complex).ravel()
    if u.size != d1:
        raise ValueError("u must have length d1")
    for name, w in (("u", u), ("v", v)):
        if abs(np.linalg.norm(w) - 1) > 1e-10:
            raise ValueError(f"{name} must be a unit vector")
    d2 = v.size
    analytic = sigma**2 * np.outer(u, u.conj()) + (sigma**2 + xi_mean) * np.eye(d1)
    assert np.allclose(analytic, analytic.conj().T, atol=SYM_TOL)
    spec = as_rng_spec(rng).derive("upsilon-rank1", d1, d2)

    def draw(gen, n):
        return complex_normal(gen, (n, d1)), complex_normal(gen, (n, d2))

    def stat(ab):
        a, b = ab
        z = sigma * (a.conj() @ u) * (b @ v.conj())
        y = np.abs(z) ** 2 + xi_mean
        return (a.T * y) @ a.conj()

    emp = _accumulate(spec, M, draw, stat)
    return MomentReport("upsilon_rank1", analytic, emp, float(np.max(np.abs(emp - analytic))),
                        M, spec, tol, _rel_fro(analytic, emp))


def expected_upsilon_rankr_check(Xsharp, Vhat, xi_mean, M=200_000, rng=0,
                                 tol=UPSILON_REL_TOL):
    """Real Gaussian ensemble: ``E (1/M) sum y Phi V V^T Phi^T`` against
    ``2 X V V^T X^T + (r ||X||_F^2 + r mean xi) I``."""
    X = np.asarray(Xsharp, dtype=float)
    V = np.atleast_2d(np.asarray(Vhat, dtype=float).T).T
    d1, d2 = X.shape
    if V.shape[0] != d2 or not is_orthonormal(V):
        raise ValueError("Vhat must be an orthonormal d2 x r matrix")
    r = V.shape[1]
    XV = X @ V
    analytic = 2 * XV @ XV.T + (r * np.linalg.norm(X) ** 2 + r * xi_mean) * np.eye(d1)
    assert np.allclose(analytic, analytic.T, atol=SYM_TOL)
    spec = as_rng_spec(rng).derive("upsilon-rankr", d1, d2, r)

    def stat(phis):
        y = np.einsum("nij,ij->n", phis, X) ** 2 + xi_mean
        P = phis @ V
        return np.einsum("n,nir,njr->ij", y, P, P)

    emp = _accumulate(spec, M, lambda gen, n: gen.standard_normal((n, d1, d2)), stat)
    return MomentReport("upsilon_rankr", analytic, emp, float(np.max(np.abs(emp - analytic))),
                        M, spec, tol, _rel_fro(analytic, emp))


def gauss_product_tail_bound(rho, t):
    """Lower bound on ``P(g1 g2 > t)`` for unit-variance pairs with correlation ``rho``."""
    return (2 / math.pi) * math.acos(math.sqrt(3 - rho) / 2) * math.exp(-2 * t / (1 + rho))


def gauss_product_tail_check(rho, t, N=1_000_000, rng=0, sigmas=TAIL_SIGMAS):
    if not -1 < rho <= 1:
        raise ValueError(f"rho must lie in (-1, 1], got {rho}")
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    spec = as_rng_spec(rng).derive("product-tail")
    c = math.sqrt(max(1 - rho * rho, 0.0))

    def stat(g):
        prod = g[:, 0] * (rho * g[:, 0] + c * g[:, 1])
        return float(np.count_nonzero(prod > t))

    p = _accumulate(spec, N, _gauss(2), stat)
    se = math.sqrt(max(p * (1 - p), 1.0 / N) / N)
    bound = gauss_product_tail_bound(rho, t)
    return BoundReport("gauss_product_tail", bool(p >= bound - sigmas * se), p, bound,
                       details={"rho": rho, "t": t, "samples": N, "se": se})


def davis_kahan_check(A, Delta, r):
    """Check ``||Delta|| <= gap/5  =>  sin angle <= 4 ||Delta|| / gap``.

    Both matrices are shifted by a common multiple of the identity when
    needed to make them PSD; eigenvectors are unchanged by the shift.
    """
    A = np.asarray(A)
    Delta = np.asarray(Delta)
    for name, H in (("A", A), ("Delta", Delta)):
        if np.max(np.abs(H - H.conj().T), initial=0.0) > 1e-10 * max(1.0, np.abs(H).max()):
            raise ValueError(f"{name} is not Hermitian")
    B = A + Delta
    shift = max(0.0, -min(np.linalg.eigvalsh(A)[0], np.linalg.eigvalsh(B)[0]))
    eye = np.eye(A.shape[0])
    U, lam = leading_eigvecs(A + shift * eye, r + 1 if r < A.shape[0] else r,
                             return_values=True)
    gap = float(lam[r - 1] - lam[r]) if r < A.shape[0] else math.inf
    norm = float(np.linalg.norm(Delta, 2))
    if not gap > 0:
        return BoundReport("davis_kahan", True, math.nan, math.nan, skipped=True,
                           details={"gap": gap})
    W = leading_eigvecs(B + shift * eye, r)
    s = subspace_sin(U[:, :r], W)
    if norm > gap / DK_SHRINK:
        return BoundReport("davis_kahan", True, s, math.nan, skipped=True,
                           details={"gap": gap, "norm": norm})
    bound = 4 * norm / gap
    return BoundReport("davis_kahan", bool(s <= bound + 1e-12), s, bound,
                       details={"gap": gap, "norm": norm})


def random_dk_instance(gen, d, r, ratio=6.0, complex_=False):
    """PSD ``A`` with spectral gap after index ``r`` and ``||Delta|| = gap / ratio``."""
    Q, _ = np.linalg.qr(gen.standard_normal((d, d)) + (1j * gen.standard_normal((d, d))
                                                       if complex_ else 0))
    top = 1.0 + gen.uniform(0.5, 2.0, r)
    rest = gen.uniform(0.0, 1.0, d - r)
    lam = np.concatenate([top, rest])
    A = (Q * lam) @ Q.conj().T
    A = (A + A.conj().T) / 2
    gap = np.sort(lam)[::-1][r - 1] - np.sort(lam)[::-1][r]
    H = gen.standard_normal((d, d)) + (1j * gen.standard_normal((d, d)) if complex_ else 0)
    H = (H + H.conj().T) / 2
    Delta = H * (gap / ratio / np.linalg.norm(H, 2))
    return A, Delta


def run_battery(seed=0, instances=100):
    """Default battery. Returns ``(all_passed, list of report dicts)``."""
    spec = RngSpec(int(seed))
    out = []
    out.append(fourth_moment_check(2, rng=spec).to_dict())
    out.append(quad_form_check(*_unit_pair(spec, 4), rng=spec).to_dict())
    out.append(octa_moment_check(np.array([1.0, 0.0]), rng=spec).to_dict())
    rep, ok, rel = complex_moment_check(rng=spec)
    d = rep.to_dict()
    d.update(passed=ok, rel_err=[float(v) for v in rel], tol=list(COMPLEX_REL_TOL))
    out.append(d)
    gen = spec.derive("battery-vectors").generator()
    u = complex_normal(gen, (8,))
    v = complex_normal(gen, (8,))
    out.append(expected_upsilon_rank1_check(u / np.linalg.norm(u), v / np.linalg.norm(v),
                                            1.0, 0.0, 8, rng=spec).to_dict())
    X = gen.standard_normal((6, 2)) @ gen.standard_normal((2, 6))
    X /= np.linalg.norm(X)
    Vhat = np.linalg.svd(X)[2][:2].T
    out.append(expected_upsilon_rankr_check(X, Vhat, 0.0, M=100_000, rng=spec).to_dict())
    out.append(_tail_sweep(spec, instances))
    out.append(_dk_sweep(spec, instances))
    return all(r["passed"] for r in out), out


def _unit_pair(spec, d):
    gen = spec.derive("quad-vectors", d).generator()
    x, y = gen.standard_normal((2, d))
    return x / np.linalg.norm(x), y / np.linalg.norm(y)


def tail_sweep(spec, instances, N=200_000):
    gen = spec.derive("tail-params").generator()
    reports = []
    for k in range(instances):
        rho = float(gen.uniform(-0.95, 1.0))
        t = float(gen.uniform(0.05, 3.0))
        reports.append(gauss_product_tail_check(rho, t, N, spec.derive("tail", k)))
    return reports


def dk_sweep(spec, instances):
    gen = spec.derive("dk-params").generator()
    reports = []
    for k in range(instances):
        d = int(gen.integers(3, 12))
        r = int(gen.integers(1, d))
        A, Delta = random_dk_instance(gen, d, r, complex_=bool(k % 2))
        reports.append(davis_kahan_check(A, Delta, r))
    return reports


def _summarize(name, reports):
    return {
        "name": name,
        "kind": "sweep",
        "instances": len(reports),
        "failures": sum(not r.passed for r in reports),
        "skipped": sum(r.skipped for r in reports),
        "passed": all(r.passed for r in reports) and not any(r.skipped for r in reports),
    }


def _tail_sweep(spec, instances):
    return _summarize("gauss_product_tail_sweep", tail_sweep(spec, instances))


def _dk_sweep(spec, instances):
    return _summarize("davis_kahan_sweep", dk_sweep(spec, instances))
