"""Joint sparse decomposition of attribute pairs.

Two equal-length signals a1, a2 are split into a shared component u that is
sparse in an orthonormal Haar basis (u = Psi v) plus private residuals
d1, d2, by solving the equality-constrained l1 problem

    minimize ||(v, d1, d2)||_1   subject to   a1 = Psi v + d1,
                                              a2 = Psi v + d2.

This is basis pursuit with the stacked operator H = (Psi I 0; Psi 0 I),
solved here by ADMM with soft-thresholding. Because Psi is square and
orthonormal, H H^T = ((2I, I), (I, 2I)) and the projection onto the
constraint set is closed-form, so each iteration is a handful of
matrix-vector products. The stop rule is the duality gap of the l1 program.

The decomposition is a correlation diagnostic: the recovery solvers never
consume its output.
"""

from dataclasses import dataclass

import numpy as np

from .matrices import as_matrix

DEFAULT_MAX_ITERS = 20000
DEFAULT_GAP_TOL = 1e-6
_GAP_CHECK_EVERY = 25


@dataclass(frozen=True)
class WaveletBasis:
    """Orthonormal Haar basis, padded to a power-of-two size.

    Column 0 is the scaling (mean) function; later columns are wavelets from
    coarse to fine, each constant-on-support with a single sign change.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = as_matrix(self.matrix, "wavelet basis")
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"basis must be square, got {m.shape}")
        object.__setattr__(self, "matrix", m)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def haar_basis(t: int) -> WaveletBasis:
    """Build the orthonormal Haar basis of size t padded up to a power of two."""
    if t < 1:
        raise ValueError(f"basis length must be >= 1, got {t}")
    p = 1
    while p < t:
        p *= 2
    H = np.array([[1.0]])
    while H.shape[0] < p:
        n = H.shape[0]
        H = np.hstack([np.kron(H, [[1.0], [1.0]]), np.kron(np.eye(n), [[1.0], [-1.0]])])
    H = H / np.linalg.norm(H, axis=0, keepdims=True)
    return WaveletBasis(matrix=H)


@dataclass
class JsdSplit:
    """One joint sparse split: shared component, two privates, coefficients.

    shared/private vectors have the original input length; coefficients live
    in the (possibly padded) basis domain. objective is the full l1 value of
    the solved variable, gap the duality gap at the final iterate.
    """

    coefficients: np.ndarray
    shared: np.ndarray
    private_1: np.ndarray
    private_2: np.ndarray
    objective: float
    gap: float
    iterations: int


class JsdConvergenceError(RuntimeError):
    """Raised when the l1 solver hits its iteration cap; carries the best split."""

    def __init__(self, message: str, best_split: JsdSplit):
        super().__init__(message)
        self.best_split = best_split


def _basis_pursuit(Psi: np.ndarray, b: np.ndarray, max_iters: int, gap_tol: float,
                   rho: float = 1.0):
    """ADMM for min ||theta||_1 s.t. H theta = b, H = (Psi I 0; Psi 0 I).

    Returns (theta, gap, iterations, converged); theta is feasible for b to
    machine precision because the final step projects onto the constraint.
    """
    p = Psi.shape[0]

    def h_apply(theta):
        shared = Psi @ theta[:p]
        return np.concatenate([shared + theta[p:2 * p], shared + theta[2 * p:]])

    def ht_apply(y):
        return np.concatenate([Psi.T @ (y[:p] + y[p:]), y[:p], y[p:]])

    def gram_solve(w):
        # (H H^T)^{-1} w for H H^T = ((2I, I), (I, 2I))
        return np.concatenate([(2.0 * w[:p] - w[p:]) / 3.0, (2.0 * w[p:] - w[:p]) / 3.0])

    def project(theta):
        return theta - ht_apply(gram_solve(h_apply(theta) - b))

    z = np.zeros(3 * p)
    u = np.zeros(3 * p)
    x = project(z)
    gap = np.inf
    thresh = 1.0 / rho
    for it in range(1, max_iters + 1):
        w = x + u
        z = np.sign(w) * np.maximum(np.abs(w) - thresh, 0.0)
        u = w - z
        x = project(z - u)
        if it % _GAP_CHECK_EVERY == 0 or it == max_iters:
            # rho*u is a subgradient of ||z||_1; its least-squares preimage
            # under H^T, rescaled into the dual feasible set, gives a lower
            # bound and hence the duality gap at the feasible iterate x.
            nu = rho * u
            y = gram_solve(h_apply(nu))
            denom = max(1.0, float(np.abs(ht_apply(y)).max()))
            dual_value = float(b @ y) / denom
            primal = float(np.abs(x).sum())
            gap = primal - dual_value
            if gap <= gap_tol * max(1.0, primal):
                return x, gap, it, True
    return x, gap, max_iters, False


def jsd_decompose(a1, a2, basis: WaveletBasis, *, max_iters: int = DEFAULT_MAX_ITERS,
                  gap_tol: float = DEFAULT_GAP_TOL) -> JsdSplit:
    """Split two equal-length vectors into shared-sparse plus private parts.

    Inputs shorter than the (power-of-two) basis are zero-padded for the
    solve; the returned shared/private components are truncated back to the
    input length. Raises JsdConvergenceError carrying the best feasible
    split if the iteration cap is hit before the duality gap closes.
    """
    a1 = np.asarray(a1, dtype=np.float64).ravel()
    a2 = np.asarray(a2, dtype=np.float64).ravel()
    if a1.shape != a2.shape:
        raise ValueError(f"vector lengths differ: {a1.size} vs {a2.size}")
    if not (np.all(np.isfinite(a1)) and np.all(np.isfinite(a2))):
        raise ValueError("inputs contain non-finite entries")
    m = a1.size
    p = basis.size
    if m > p:
        raise ValueError(f"input length {m} exceeds basis size {p}")

    b = np.zeros(2 * p)
    b[:m] = a1
    b[p:p + m] = a2
    scale = float(np.abs(b).max())
    if scale == 0.0:
        zero = np.zeros(m)
        return JsdSplit(np.zeros(p), zero, zero.copy(), zero.copy(), 0.0, 0.0, 0)

    theta, gap, iters, converged = _basis_pursuit(
        basis.matrix, b / scale, max_iters, gap_tol
    )
    theta = theta * scale
    v = theta[:p]
    split = JsdSplit(
        coefficients=v,
        shared=(basis.matrix @ v)[:m],
        private_1=theta[p:2 * p][:m],
        private_2=theta[2 * p:][:m],
        objective=float(np.abs(theta).sum()),
        gap=gap * scale,
        iterations=iters,
    )
    if not converged:
        raise JsdConvergenceError(
            f"l1 solver hit {max_iters} iterations with duality gap {split.gap:.3e}",
            best_split=split,
        )
    return split


def jsd_matrix(A1, A2, basis: WaveletBasis | None = None,
               **solver_kwargs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Column-by-column joint sparse decomposition of two matrices.

    Each column (length n) is split with a Haar basis of size n; results are
    restacked so A_k = U + Delta_k within solver tolerance.
    """
    A1 = as_matrix(A1, "attribute 1")
    A2 = as_matrix(A2, "attribute 2")
    if A1.shape != A2.shape:
        raise ValueError(f"attribute shapes differ: {A1.shape} vs {A2.shape}")
    n, t = A1.shape
    if basis is None:
        basis = haar_basis(n)
    U = np.empty((n, t))
    D1 = np.empty((n, t))
    D2 = np.empty((n, t))
    for j in range(t):
        try:
            split = jsd_decompose(A1[:, j], A2[:, j], basis, **solver_kwargs)
        except JsdConvergenceError as exc:
            raise JsdConvergenceError(f"column {j}: {exc}", exc.best_split) from exc
        U[:, j] = split.shared
        D1[:, j] = split.private_1
        D2[:, j] = split.private_2
    return U, D1, D2


def correlation_report(A1, A2) -> float:
    """Shared-energy ratio ||U||^2 / (||U||^2 + ||D1||^2 + ||D2||^2).

    A [0, 1] diagnostic of how much of the pair's energy the joint sparse
    decomposition assigns to the common component.
    """
    A1 = as_matrix(A1, "attribute 1")
    A2 = as_matrix(A2, "attribute 2")
    if np.linalg.norm(A1) == 0.0 or np.linalg.norm(A2) == 0.0:
        raise ValueError("correlation report needs nonzero inputs")
    U, D1, D2 = jsd_matrix(A1, A2)
    shared = float(np.linalg.norm(U) ** 2)
    total = shared + float(np.linalg.norm(D1) ** 2) + float(np.linalg.norm(D2) ** 2)
    return shared / total


def format_correlation_record(dataset: str, attr_pair: tuple[str, str], ratio: float) -> str:
    """One-line machine-readable correlation record consumed by the sweep CLI."""
    return f"correlation dataset={dataset} attributes={attr_pair[0]},{attr_pair[1]} ratio={ratio:.6f}"
