"""Low-rank completion solvers and the encrypted recovery pipelines.

Three layers live here:

* the per-column ridge least-squares kernels (single_inverse /
  cross_inverse) that every factor update reduces to;
* the alternating solvers: cs_complete for one attribute, and
  maa_complete / maa_complete_k which jointly factor several attributes as
  a shared low-rank component plus per-attribute private components;
* the end-to-end encrypted pipelines ppcs_recover and ppcs_maa_recover
  (encrypt, complete the ciphertext, decrypt).

Every factor update is the exact minimizer of the joint objective in that
block, so the objective trace is nonincreasing across sweeps; convergence
is declared when its relative change drops below rel_tol.

Each column solve uses the stacked design [Diag(B(:,i)) L ; sqrt(lam) I_r]
via QR rather than forming normal equations, for conditioning. The column
solves within one update are independent; they are executed as one batched
QR over all columns.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .kvp import PrivateKey, PublicVectorSet, decrypt, encrypt
from .matrices import SensedMatrix, apply_mask, as_mask, as_matrix, denormalize, normalize


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for the alternating solvers.

    r is the factor rank, lam the ridge tradeoff between rank approximation
    and data fit, rel_tol the relative objective change that counts as
    converged. The seed drives factor initialization only.
    """

    r: int
    lam: float = 0.1
    max_iters: int = 200
    rel_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.r < 1:
            raise ValueError(f"rank r must be >= 1, got {self.r}")
        if self.lam < 0.0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.rel_tol > 0.0:
            raise ValueError(f"rel_tol must be > 0, got {self.rel_tol}")


def default_rank(n: int, t: int) -> int:
    """Default factor rank: a tenth of the short side, at least 1."""
    return max(1, round(min(n, t) / 10))


@dataclass
class SolveReport:
    """Objective trace of one solve.

    objective_trace[0] is the objective at initialization (before any
    update); one entry follows per full sweep. The trace is nonincreasing
    up to float round-off.
    """

    objective_trace: list[float] = field(default_factory=list)
    iterations_used: int = 0
    converged: bool = False

    def write_trace(self, path) -> None:
        """Write (iteration, objective) lines for convergence plots."""
        with open(path, "w", encoding="utf-8") as fh:
            for i, obj in enumerate(self.objective_trace):
                fh.write(f"{i} {obj!r}\n")


@dataclass(frozen=True)
class FactorPair:
    """A rank-r factorization L @ R.T of an n x t matrix."""

    L: np.ndarray  # (n, r)
    R: np.ndarray  # (t, r)

    def __post_init__(self):
        L = as_matrix(self.L, "left factor")
        R = as_matrix(self.R, "right factor")
        if L.shape[1] != R.shape[1]:
            raise ValueError(f"factor ranks differ: L is {L.shape}, R is {R.shape}")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "R", R)

    @property
    def rank(self) -> int:
        return self.L.shape[1]

    def product(self) -> np.ndarray:
        return self.L @ self.R.T


@dataclass
class JointEstimate:
    """Joint completion output: shared component plus per-attribute privates."""

    shared: np.ndarray
    private: list[np.ndarray]

    @property
    def estimates(self) -> list[np.ndarray]:
        return [self.shared + d for d in self.private]


def _stacked_solve(masks: list[np.ndarray], L: np.ndarray, lam: float,
                   targets: list[np.ndarray]) -> np.ndarray:
    """Solve the per-column ridge least squares for every column at once.

    For column i the design stacks Diag(B_k(:,i)) @ L over all mask/target
    blocks plus sqrt(lam) * I ridge rows, the target stacks X_k(:,i) plus
    zeros. Returns Y with Y[i] the column-i solution, shape (c, r).
    """
    m, r = L.shape
    c = targets[0].shape[1]
    if lam == 0.0:
        # Rare path (tests and explicit requests): per-column solve with an
        # explicit rank check, since nothing regularizes the system.
        Y = np.empty((c, r))
        for i in range(c):
            design = np.concatenate([mask[:, i, None] * L for mask in masks])
            rhs = np.concatenate([X[:, i] for X in targets])
            sol, _, rank, _ = np.linalg.lstsq(design, rhs, rcond=None)
            if rank < r:
                raise ValueError(f"rank-deficient column solve at column {i}")
            Y[i] = sol
        return Y

    # Augmented-matrix QR: factor [P q] in one pass (R only, Q never formed);
    # the solution solves the leading r x r block of R against its last column.
    total = len(masks) * m + r
    PQ = np.zeros((c, total, r + 1))
    for blk, (mask, X) in enumerate(zip(masks, targets)):
        rows = slice(blk * m, (blk + 1) * m)
        np.multiply(mask.T[:, :, None], L[None, :, :], out=PQ[:, rows, :r])
        PQ[:, rows, r] = X.T
    diag = np.arange(r)
    PQ[:, len(masks) * m + diag, diag] = np.sqrt(lam)
    R_aug = np.linalg.qr(PQ, mode="r")
    return np.linalg.solve(R_aug[:, :r, :r], R_aug[:, :r, r:])[:, :, 0]


def single_inverse(B, L, lam: float, r: int, X) -> np.ndarray:
    """Per-column ridge least squares against one masked block.

    Y[i] minimizes ||Diag(B(:,i)) @ L @ y - X(:,i)||^2 + lam * ||y||^2.
    """
    B = as_mask(B)
    L = as_matrix(L, "factor")
    X = np.asarray(X, dtype=np.float64)
    if L.shape[1] != r:
        raise ValueError(f"factor has rank {L.shape[1]}, expected r={r}")
    if B.shape != X.shape or B.shape[0] != L.shape[0]:
        raise ValueError(f"shape mismatch: mask {B.shape}, factor {L.shape}, target {X.shape}")
    return _stacked_solve([B], L, lam, [X])


def cross_inverse(B1, B2, L, lam: float, r: int, X1, X2) -> np.ndarray:
    """Per-column ridge least squares against two stacked masked blocks.

    Used for the shared factors: column i solves the design
    [Diag(B1(:,i)) L ; Diag(B2(:,i)) L ; sqrt(lam) I_r] against
    [X1(:,i) ; X2(:,i) ; 0].
    """
    B1, B2 = as_mask(B1, "mask 1"), as_mask(B2, "mask 2")
    L = as_matrix(L, "factor")
    X1 = np.asarray(X1, dtype=np.float64)
    X2 = np.asarray(X2, dtype=np.float64)
    if L.shape[1] != r:
        raise ValueError(f"factor has rank {L.shape[1]}, expected r={r}")
    for name, B, X in (("block 1", B1, X1), ("block 2", B2, X2)):
        if B.shape != X.shape or B.shape[0] != L.shape[0]:
            raise ValueError(f"shape mismatch in {name}: mask {B.shape}, target {X.shape}")
    if B1.shape != B2.shape:
        raise ValueError(f"mask shapes differ: {B1.shape} vs {B2.shape}")
    return _stacked_solve([B1, B2], L, lam, [X1, X2])


def _init_factor(rng: np.random.Generator, rows: int, r: int) -> np.ndarray:
    # i.i.d. Uniform(-0.5, 0.5)/sqrt(r) keeps the initial product O(1).
    return rng.uniform(-0.5, 0.5, size=(rows, r)) / np.sqrt(r)


def _check_solve_inputs(S_list, B_list, cfg: SolverConfig):
    mats, masks = [], []
    for idx, (S, B) in enumerate(zip(S_list, B_list)):
        S = as_matrix(S, f"matrix {idx}")
        B = as_mask(B, f"mask {idx}")
        if S.shape != B.shape:
            raise ValueError(f"matrix {idx} shape {S.shape} != mask shape {B.shape}")
        if mats and S.shape != mats[0].shape:
            raise ValueError(f"attribute shapes differ: {mats[0].shape} vs {S.shape}")
        if B.sum() == 0.0:
            raise ValueError(f"nothing observed in attribute {idx}")
        mats.append(S * B)  # enforce stored zeros at missing entries
        masks.append(B)
    n, t = mats[0].shape
    if cfg.r > min(n, t):
        raise ValueError(f"rank r={cfg.r} exceeds min(n, t)={min(n, t)}")
    return mats, masks


def _relative_drop(prev: float, cur: float) -> float:
    return abs(prev - cur) / max(prev, 1e-300)


def cs_complete(S, B, cfg: SolverConfig) -> tuple[np.ndarray, SolveReport]:
    """Complete one masked matrix by alternating ridge least squares.

    Minimizes ||B . (L R^T) - S||_F^2 + lam (||L||_F^2 + ||R||_F^2) over the
    rank-cfg.r factors; returns the dense estimate L @ R.T. Non-convergence
    within max_iters is reported, not raised.
    """
    (S,), (B,) = _check_solve_inputs([S], [B], cfg)
    n, t = S.shape
    rng = np.random.default_rng(cfg.seed)
    L = _init_factor(rng, n, cfg.r)
    R = np.zeros((t, cfg.r))

    def objective(L, R):
        fit = float(np.linalg.norm(B * (L @ R.T) - S) ** 2)
        return fit + cfg.lam * float(np.linalg.norm(L) ** 2 + np.linalg.norm(R) ** 2)

    report = SolveReport(objective_trace=[objective(L, R)])
    for sweep in range(1, cfg.max_iters + 1):
        R = _stacked_solve([B], L, cfg.lam, [S])
        L = _stacked_solve([B.T], R, cfg.lam, [S.T])
        obj = objective(L, R)
        report.objective_trace.append(obj)
        report.iterations_used = sweep
        if _relative_drop(report.objective_trace[-2], obj) < cfg.rel_tol:
            report.converged = True
            break
    return L @ R.T, report


def maa_complete_k(S_list, B_list, cfg: SolverConfig,
                   shared_r: int | None = None) -> tuple[JointEstimate, SolveReport]:
    """Jointly complete k >= 2 masked matrices sharing a common component.

    Each attribute is modeled as (L_U R_U^T) + (L_k R_k^T); the shared pair
    is updated against all attributes' residuals stacked (the k-block
    cross inverse), the private pairs against their own attribute. All
    factors use rank cfg.r unless shared_r widens the shared pair (the
    encrypted pipeline does this because the perturbation is common to all
    attributes). Returns the component estimates and the objective trace.
    """
    if len(S_list) < 2:
        raise ValueError(f"joint completion needs k >= 2 attributes, got {len(S_list)}")
    if len(S_list) != len(B_list):
        raise ValueError(f"{len(S_list)} matrices but {len(B_list)} masks")
    S_list, B_list = _check_solve_inputs(S_list, B_list, cfg)
    k = len(S_list)
    n, t = S_list[0].shape
    r, lam = cfg.r, cfg.lam
    r_u = r if shared_r is None else shared_r
    if not r <= r_u <= min(n, t):
        raise ValueError(f"shared rank {r_u} must lie in [{r}, {min(n, t)}]")

    rng = np.random.default_rng(cfg.seed)
    L_U = _init_factor(rng, n, r_u)
    Ls = [_init_factor(rng, n, r) for _ in range(k)]
    Rs = [_init_factor(rng, t, r) for _ in range(k)]
    R_U = np.zeros((t, r_u))  # computed by the first shared update

    def objective():
        shared = L_U @ R_U.T
        fit = sum(
            float(np.linalg.norm(B_list[i] * (shared + Ls[i] @ Rs[i].T) - S_list[i]) ** 2)
            for i in range(k)
        )
        reg = float(np.linalg.norm(L_U) ** 2 + np.linalg.norm(R_U) ** 2)
        reg += sum(
            float(np.linalg.norm(Ls[i]) ** 2 + np.linalg.norm(Rs[i]) ** 2) for i in range(k)
        )
        return fit + lam * reg

    report = SolveReport(objective_trace=[objective()])
    for sweep in range(1, cfg.max_iters + 1):
        X_list = [S_list[i] - B_list[i] * (Ls[i] @ Rs[i].T) for i in range(k)]
        R_U = _stacked_solve(B_list, L_U, lam, X_list)
        L_U = _stacked_solve([Bm.T for Bm in B_list], R_U, lam, [X.T for X in X_list])
        shared = L_U @ R_U.T
        for i in range(k):
            Z = S_list[i] - B_list[i] * shared
            Rs[i] = _stacked_solve([B_list[i]], Ls[i], lam, [Z])
            Ls[i] = _stacked_solve([B_list[i].T], Rs[i], lam, [Z.T])
        obj = objective()
        report.objective_trace.append(obj)
        report.iterations_used = sweep
        if _relative_drop(report.objective_trace[-2], obj) < cfg.rel_tol:
            report.converged = True
            break

    estimate = JointEstimate(shared=L_U @ R_U.T, private=[Li @ Ri.T for Li, Ri in zip(Ls, Rs)])
    return estimate, report


def maa_complete(S1, S2, B1, B2, cfg: SolverConfig) -> tuple[JointEstimate, SolveReport]:
    """Two-attribute joint completion; the k=2 case of maa_complete_k."""
    return maa_complete_k([S1, S2], [B1, B2], cfg)


def _encrypted_rank(cfg: SolverConfig, K: int, n: int, t: int) -> int:
    # The perturbation adds up to K to the rank of the ciphertext, so the
    # recovery budget grows by K (clamped to the representable maximum).
    return min(cfg.r + K, min(n, t))


def ppcs_recover(S: SensedMatrix, D: PublicVectorSet, psi: PrivateKey,
                 cfg: SolverConfig) -> tuple[np.ndarray, SolveReport]:
    """Privacy-preserving single-attribute recovery: encrypt, complete, decrypt."""
    enc = encrypt(S, D, psi)
    n, t = enc.shape
    enc_cfg = replace(cfg, r=_encrypted_rank(cfg, D.K, n, t))
    Ahat_enc, report = cs_complete(enc.data, enc.mask, enc_cfg)
    return decrypt(Ahat_enc, D, psi), report


def ppcs_maa_recover_k(S_list, B_list, D: PublicVectorSet, psi: PrivateKey,
                       cfg: SolverConfig) -> tuple[list[np.ndarray], SolveReport]:
    """Joint privacy-preserving recovery of k >= 2 attributes.

    Normalizes each attribute by its max observed magnitude, encrypts all of
    them with the one shared key ring, jointly completes the ciphertexts,
    then decrypts and rescales. Returns the recovered matrices in input
    order.
    """
    sensed = [apply_mask(S, B) for S, B in zip(S_list, B_list)]
    normalized, records = zip(*(normalize(sm) for sm in sensed))
    encrypted = [encrypt(sm, D, psi) for sm in normalized]
    n, t = encrypted[0].shape
    # Only the shared pair needs the +K budget: one key ring encrypts every
    # attribute, so the perturbation lands entirely in the common component.
    estimate, report = maa_complete_k(
        [e.data for e in encrypted], [e.mask for e in encrypted], cfg,
        shared_r=_encrypted_rank(cfg, D.K, n, t),
    )
    recovered = [
        denormalize(decrypt(est, D, psi), rec)
        for est, rec in zip(estimate.estimates, records)
    ]
    return recovered, report


def ppcs_maa_recover(S1, S2, B1, B2, D: PublicVectorSet, psi: PrivateKey,
                     cfg: SolverConfig) -> tuple[np.ndarray, np.ndarray, SolveReport]:
    """Two-attribute joint privacy-preserving recovery (encrypt, solve, decrypt)."""
    recovered, report = ppcs_maa_recover_k([S1, S2], [B1, B2], D, psi, cfg)
    return recovered[0], recovered[1], report
