"""Dense linear algebra kernel.

Matrices are plain 2-D numpy arrays (real or complex). Decompositions are
backed by LAPACK through ``numpy.linalg``; this module adds the contracts
the rest of the package relies on: sorted spectra, a deterministic phase
convention for eigenvectors, and tolerance checks.
"""

import numpy as np

__all__ = [
    "ORTHO_TOL",
    "RECON_TOL",
    "HERMITIAN_TOL",
    "SvdResult",
    "svd",
    "svt",
    "nuclear_norm",
    "leading_eigvecs",
    "fix_phase",
    "subspace_sin",
    "dft_matrix",
    "circular_convolve",
    "is_orthonormal",
]

ORTHO_TOL = 1e-10
RECON_TOL = 1e-8
HERMITIAN_TOL = 1e-10


class SvdResult:
    """Compact SVD ``A = U @ diag(sigma) @ V^*``.

    ``U`` is d1 x k, ``V`` is d2 x k, ``sigma`` is nonincreasing with
    k = min(d1, d2).
    """

    __slots__ = ("U", "sigma", "V")

    def __init__(self, U, sigma, V):
        self.U = U
        self.sigma = sigma
        self.V = V

    def __iter__(self):
        return iter((self.U, self.sigma, self.V))

    def reconstruct(self):
        return (self.U * self.sigma) @ self.V.conj().T


def _as_matrix(A, name="A"):
    A = np.asarray(A)
    if A.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def svd(A):
    """Compact SVD of a finite dense matrix."""
    A = _as_matrix(A)
    try:
        U, s, Vh = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"SVD did not converge for a {A.shape[0]}x{A.shape[1]} matrix"
        ) from exc
    return SvdResult(U, s, Vh.conj().T)


def svt(A, tau):
    """Singular value soft-thresholding, the prox of ``tau * ||.||_*``."""
    if tau < 0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    A = np.asarray(A)
    if tau == 0:
        return A.copy()
    U, s, V = svd(A)
    s = np.maximum(s - tau, 0.0)
    keep = s > 0
    return (U[:, keep] * s[keep]) @ V[:, keep].conj().T


def nuclear_norm(A):
    A = _as_matrix(A)
    return float(np.sum(np.linalg.svd(A, compute_uv=False)))


def fix_phase(Q):
    """Rotate each column so its largest-magnitude entry is real positive.

    Ties go to the lowest index (``argmax`` semantics). Real inputs get a
    sign flip; zero columns are left alone.
    """
    Q = np.array(Q, copy=True)
    for j in range(Q.shape[1]):
        col = Q[:, j]
        k = int(np.argmax(np.abs(col)))
        mag = abs(col[k])
        if mag == 0:
            continue
        Q[:, j] = col * (np.conj(col[k]) / mag)
    if np.iscomplexobj(Q):
        # the pivot entries are real by construction; drop rounding residue
        for j in range(Q.shape[1]):
            k = int(np.argmax(np.abs(Q[:, j])))
            Q[k, j] = abs(Q[k, j])
    return Q


def leading_eigvecs(A, r, return_values=False):
    """Eigenvectors of the ``r`` algebraically largest eigenvalues.

    ``A`` must be Hermitian to within ``HERMITIAN_TOL`` relative; the
    decomposition runs on the symmetrized ``(A + A^*)/2``. Columns are
    ordered by decreasing eigenvalue and phase-normalized with
    :func:`fix_phase`.
    """
    A = _as_matrix(A)
    d = A.shape[0]
    if A.shape[1] != d:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not 1 <= r <= d:
        raise ValueError(f"r must be in [1, {d}], got {r}")
    scale = np.linalg.norm(A)
    asym = np.linalg.norm(A - A.conj().T)
    if asym > HERMITIAN_TOL * max(scale, np.finfo(float).tiny):
        raise ValueError(f"matrix is not Hermitian (||A - A*||_F = {asym:.3e})")
    H = 0.5 * (A + A.conj().T)
    try:
        w, Q = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"eigendecomposition did not converge for a {d}x{d} matrix"
        ) from exc
    order = np.arange(d - 1, d - 1 - r, -1)
    Q = fix_phase(Q[:, order])
    if return_values:
        return Q, w[order]
    return Q


def is_orthonormal(Q, tol=1e-8):
    Q = np.asarray(Q)
    k = Q.shape[1]
    return np.linalg.norm(Q.conj().T @ Q - np.eye(k)) <= tol * max(k, 1)


def subspace_sin(U1, U2):
    """Spectral norm of ``(I - U1 U1^*) U2 U2^*``.

    For orthonormal bases this is the sine of the largest principal angle
    between the column spaces.
    """
    U1 = np.atleast_2d(np.asarray(U1).T).T
    U2 = np.atleast_2d(np.asarray(U2).T).T
    if U1.shape[0] != U2.shape[0]:
        raise ValueError(
            f"ambient dimensions differ: {U1.shape[0]} vs {U2.shape[0]}"
        )
    for name, Q in (("U1", U1), ("U2", U2)):
        if not is_orthonormal(Q):
            raise ValueError(f"{name} does not have orthonormal columns")
    R = U2 - U1 @ (U1.conj().T @ U2)
    s = np.linalg.svd(R, compute_uv=False)
    return float(min(max(s[0], 0.0), 1.0)) if s.size else 0.0


def dft_matrix(M):
    """Unitary DFT matrix, ``F[j, k] = exp(-2 pi i j k / M) / sqrt(M)``."""
    if M < 1:
        raise ValueError(f"DFT size must be positive, got {M}")
    jk = np.outer(np.arange(M), np.arange(M)) % M
    return np.exp(-2j * np.pi * jk / M) / np.sqrt(M)


def circular_convolve(x, h):
    """Direct-sum circular convolution ``sum_k x[k] h[(n - k) mod M]``."""
    x = np.asarray(x)
    h = np.asarray(h)
    if x.ndim != 1 or x.shape != h.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {h.shape}")
    M = x.size
    idx = (np.arange(M)[:, None] - np.arange(M)[None, :]) % M
    return h[idx] @ x
