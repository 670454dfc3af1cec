"""Dense matrix foundations: masks, norms, the NSE metric, singular-value
spectrum analysis, and per-attribute max-scaling normalization.

Conventions used throughout the package:

* an environment matrix is an n x t float64 array (n sensor nodes, t time
  slots) with every entry finite;
* a binary index mask is an n x t array whose entries are exactly 0 or 1,
  with 0 marking a missing entry;
* missing entries are stored as zeros alongside the mask, never as NaN, so
  elementwise kernels stay branch-free.

All functions here are pure; nothing mutates its inputs.
"""

from dataclasses import dataclass

import numpy as np

# Relative threshold on singular values when counting numerical rank.
RANK_EPS = 1e-10


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array, raising on bad input."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must be a 2-D matrix with n >= 1, t >= 1, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def as_mask(x, name: str = "mask") -> np.ndarray:
    """Coerce to a float64 0/1 mask, raising if any entry is not exactly 0 or 1."""
    m = np.asarray(x, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got shape {m.shape}")
    if not np.all((m == 0.0) | (m == 1.0)):
        raise ValueError(f"{name} entries must be exactly 0 or 1")
    return m


@dataclass(frozen=True)
class SensedMatrix:
    """An incomplete observation matrix together with the mask that produced it.

    data(i,j) is zero wherever mask(i,j) is zero; this is enforced at
    construction (via apply_mask) so downstream kernels can rely on it.
    """

    data: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        data = as_matrix(self.data, "sensed data")
        mask = as_mask(self.mask)
        if data.shape != mask.shape:
            raise ValueError(f"data shape {data.shape} != mask shape {mask.shape}")
        if np.any(data[mask == 0.0] != 0.0):
            raise ValueError("sensed data must be zero at masked entries")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "mask", mask)

    @property
    def shape(self) -> tuple:
        return self.data.shape


def apply_mask(A, B) -> SensedMatrix:
    """Elementwise product S = B . A packaged with its mask."""
    A = as_matrix(A, "environment matrix")
    B = as_mask(B)
    if A.shape != B.shape:
        raise ValueError(f"matrix shape {A.shape} does not match mask shape {B.shape}")
    return SensedMatrix(data=A * B, mask=B)


def frobenius(X) -> float:
    """Frobenius norm."""
    return float(np.linalg.norm(np.asarray(X, dtype=np.float64)))


def l1_norm(X) -> float:
    """Entrywise l1 matrix norm, sum of absolute values.

    Kept for completeness of the norm toolkit; no recovery operation
    consumes it.
    """
    return float(np.abs(np.asarray(X, dtype=np.float64)).sum())


def nse(A, Ahat) -> float:
    """Normalized square error ||A - Ahat||_F / ||A||_F.

    The standard recovery-accuracy metric: 0 means exact recovery, 1 is the
    error of the all-zero estimate.
    """
    A = as_matrix(A, "ground truth")
    Ahat = as_matrix(Ahat, "estimate")
    if A.shape != Ahat.shape:
        raise ValueError(f"ground truth shape {A.shape} != estimate shape {Ahat.shape}")
    denom = frobenius(A)
    if denom == 0.0:
        raise ValueError("zero-norm ground truth")
    return frobenius(A - Ahat) / denom


@dataclass(frozen=True)
class SpectrumReport:
    """Singular-value spectrum of a matrix.

    singular_values is nonincreasing with min(n,t) entries; numerical_rank
    counts values above RANK_EPS relative to the largest.
    """

    singular_values: np.ndarray
    numerical_rank: int

    def energy_fraction(self, r_hat: int) -> float:
        """Fraction of the total singular-value sum carried by the top r_hat values."""
        if r_hat < 0:
            raise ValueError("r_hat must be nonnegative")
        s = self.singular_values
        total = float(s.sum())
        if total == 0.0:
            # zero matrix carries all of its (zero) energy in any prefix
            return 0.0 if r_hat == 0 else 1.0
        return float(s[: min(r_hat, s.size)].sum()) / total


def svd_spectrum(X) -> SpectrumReport:
    """Singular values of X, sorted nonincreasing, with numerical rank."""
    X = as_matrix(X, "matrix")
    s = np.linalg.svd(X, compute_uv=False)
    s = np.sort(s)[::-1]
    if s[0] == 0.0:
        rank = 0
    else:
        rank = int(np.count_nonzero(s > RANK_EPS * s[0]))
    return SpectrumReport(singular_values=s, numerical_rank=rank)


@dataclass(frozen=True)
class NormalizationRecord:
    """Scale factor applied to one attribute: the max absolute observed value."""

    scale: float

    def __post_init__(self):
        if not (self.scale > 0.0 and np.isfinite(self.scale)):
            raise ValueError(f"normalization scale must be positive, got {self.scale}")


def normalize(S: SensedMatrix) -> tuple[SensedMatrix, NormalizationRecord]:
    """Scale a sensed matrix by its maximum absolute observed value.

    Masked entries stay zero and are ignored when finding the scale. Raises
    if no observed entry is nonzero (nothing to scale by).
    """
    observed = np.abs(S.data) * S.mask
    alpha = float(observed.max())
    if alpha == 0.0:
        raise ValueError("degenerate attribute: all observed entries are zero")
    return SensedMatrix(data=S.data / alpha, mask=S.mask), NormalizationRecord(scale=alpha)


def denormalize(Ahat, rec: NormalizationRecord) -> np.ndarray:
    """Undo normalize: multiply every entry by the recorded scale."""
    Ahat = as_matrix(Ahat, "estimate")
    return Ahat * rec.scale


def write_matrix_csv(path, X, header: str | None = None) -> None:
    """Write a matrix as CSV: one row per sensor node, columns = time slots.

    Values use shortest round-trip decimal formatting ('.' decimal
    separator), so read_matrix_csv reproduces the array bit-exactly.
    """
    X = as_matrix(X, "matrix")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header is not None:
            fh.write(header + "\n")
        for row in X:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_matrix_csv(path, has_header: bool = False) -> np.ndarray:
    """Read a matrix written by write_matrix_csv (header skipped when flagged)."""
    X = np.loadtxt(path, delimiter=",", skiprows=1 if has_header else 0, ndmin=2)
    return as_matrix(X, f"matrix from {path}")


def write_mask_csv(path, B) -> None:
    """Write a 0/1 mask as integer CSV."""
    B = as_mask(B)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for row in B:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


def read_mask_csv(path) -> np.ndarray:
    """Read a 0/1 mask CSV."""
    return as_mask(np.loadtxt(path, delimiter=",", ndmin=2), f"mask from {path}")
