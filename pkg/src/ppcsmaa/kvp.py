"""K-vector perturbation (KVP) encryption of sensed matrices.

Each row of the data matrix is mixed with K shared public vectors under a
secret per-row weight vector: row i of the ciphertext is

    (psi[i,0] * S_i + sum_k psi[i,k] * D_k) . B_i

where D_1..D_K are public, psi is the private key, and B_i re-applies the
observation mask. Decryption subtracts the full perturbation sum and divides
by psi[i,0] -- the exact algebraic inverse on unmasked data.

The public vectors are sums of a few random sinusoids rather than white
noise: the recovery step has to complete the *encrypted* matrix, so the
perturbation must itself stay low-rank/compressible. Gaussian noise vectors
would make the ciphertext incompressible and destroy recoverability.
"""

import json
from dataclasses import dataclass

import numpy as np

from .matrices import SensedMatrix, as_mask, as_matrix

# Number of sinusoids summed into each public vector, and their parameter
# ranges: frequency in periods per window, amplitude, uniform random phase.
_SINUSOIDS_PER_VECTOR = 3
_FREQ_RANGE = (1.0, 5.0)
_AMP_RANGE = (0.2, 1.0)

# psi[i,0] range: large enough that the data weight survives recovery noise,
# small enough that the ciphertext is not trivially the plaintext.
PSI0_RANGE = (0.2, 0.8)
# Open-interval (0,1) bound for the perturbation weights; the lower edge
# avoids degenerate near-zero perturbation.
PSI_PERTURB_RANGE = (0.01, 0.99)


@dataclass(frozen=True)
class PublicVectorSet:
    """K shared perturbation vectors of length t, plus the seed that made them."""

    vectors: np.ndarray  # shape (K, t)
    seed: int

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"public vectors must be a (K, t) array, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("public vectors contain non-finite entries")
        object.__setattr__(self, "vectors", v)

    @property
    def K(self) -> int:
        return self.vectors.shape[0]

    @property
    def t(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class PrivateKey:
    """Per-row secret weights, one length-(K+1) vector per matrix row."""

    psi: np.ndarray  # shape (n, K+1); column 0 scales the data row

    def __post_init__(self):
        p = np.asarray(self.psi, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] < 1:
            raise ValueError(f"private key must be an (n, K+1) array, got shape {p.shape}")
        if np.any(p <= 0.0) or np.any(p >= 1.0):
            raise ValueError("private key weights must lie in the open interval (0, 1)")
        object.__setattr__(self, "psi", p)

    @property
    def n_rows(self) -> int:
        return self.psi.shape[0]

    @property
    def K(self) -> int:
        return self.psi.shape[1] - 1


@dataclass(frozen=True)
class KvpKeyRing:
    """The full key material for one dataset: shared public vectors + private key.

    One ring is shared across all attributes of a dataset so that their
    common structure survives encryption.
    """

    public: PublicVectorSet
    private: PrivateKey

    def __post_init__(self):
        if self.private.K != self.public.K:
            raise ValueError(
                f"private key K={self.private.K} does not match public set K={self.public.K}"
            )


@dataclass(frozen=True)
class EncryptedMatrix:
    """Ciphertext matrix with the observation mask applied during encryption."""

    data: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", as_matrix(self.data, "encrypted data"))
        object.__setattr__(self, "mask", as_mask(self.mask))

    @property
    def shape(self) -> tuple:
        return self.data.shape


def gen_public_vectors(t: int, K: int, seed: int) -> PublicVectorSet:
    """Generate K smooth public vectors of length t, deterministically from seed.

    Each vector is the sum of three sinusoids with uniform random frequency
    (1..5 periods per window), phase, and amplitude (0.2..1.0).
    """
    if t < 1:
        raise ValueError(f"vector length t must be >= 1, got {t}")
    if K < 0:
        raise ValueError(f"K must be >= 0, got {K}")
    rng = np.random.default_rng(seed)
    tau = np.arange(t, dtype=np.float64)
    vectors = np.zeros((K, t))
    for k in range(K):
        amps = rng.uniform(*_AMP_RANGE, size=_SINUSOIDS_PER_VECTOR)
        freqs = rng.uniform(*_FREQ_RANGE, size=_SINUSOIDS_PER_VECTOR)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=_SINUSOIDS_PER_VECTOR)
        for a, f, ph in zip(amps, freqs, phases):
            vectors[k] += a * np.sin(2.0 * np.pi * f * tau / t + ph)
    return PublicVectorSet(vectors=vectors, seed=seed)


def gen_private_key(n: int, K: int, seed: int) -> PrivateKey:
    """Generate the per-row key: psi[:,0] ~ U[0.2, 0.8], psi[:,1:] ~ U(0.01, 0.99)."""
    if n < 1:
        raise ValueError(f"row count n must be >= 1, got {n}")
    if K < 0:
        raise ValueError(f"K must be >= 0, got {K}")
    rng = np.random.default_rng(seed)
    psi = np.empty((n, K + 1))
    psi[:, 0] = rng.uniform(*PSI0_RANGE, size=n)
    if K > 0:
        psi[:, 1:] = rng.uniform(*PSI_PERTURB_RANGE, size=(n, K))
    return PrivateKey(psi=psi)


def _check_shapes(shape, D: PublicVectorSet, psi: PrivateKey) -> None:
    n, t = shape
    if psi.n_rows != n:
        raise ValueError(f"private key has {psi.n_rows} rows, matrix has {n}")
    if psi.K != D.K:
        raise ValueError(f"private key K={psi.K} does not match public set K={D.K}")
    if D.K > 0 and D.t != t:
        raise ValueError(f"public vectors have length {D.t}, matrix has {t} columns")


def encrypt(S: SensedMatrix, D: PublicVectorSet, psi: PrivateKey) -> EncryptedMatrix:
    """Row-wise KVP encryption of a sensed matrix; the mask carries through."""
    _check_shapes(S.shape, D, psi)
    perturbation = psi.psi[:, 1:] @ D.vectors if D.K > 0 else 0.0
    data = (psi.psi[:, :1] * S.data + perturbation) * S.mask
    return EncryptedMatrix(data=data, mask=S.mask)


def decrypt(Ahat_enc, D: PublicVectorSet, psi: PrivateKey) -> np.ndarray:
    """Invert encrypt on a complete (recovered) matrix.

    Accepts either a plain array or an EncryptedMatrix; the input is assumed
    complete, i.e. recovery already filled the missing entries.
    """
    X = Ahat_enc.data if isinstance(Ahat_enc, EncryptedMatrix) else Ahat_enc
    X = as_matrix(X, "recovered encrypted matrix")
    _check_shapes(X.shape, D, psi)
    psi0 = psi.psi[:, :1]
    if np.any(psi0 < 1e-12):
        raise ValueError("private key has a data weight below 1e-12; cannot decrypt")
    perturbation = psi.psi[:, 1:] @ D.vectors if D.K > 0 else 0.0
    return (X - perturbation) / psi0


def save_key_ring(path, ring: KvpKeyRing) -> None:
    """Serialize a key ring to JSON so a sweep can be replayed bit-identically.

    Floats round-trip exactly through JSON's repr-based encoding.
    """
    payload = {
        "K": ring.public.K,
        "t": ring.public.t,
        "n": ring.private.n_rows,
        "seed": ring.public.seed,
        "public_vectors": ring.public.vectors.tolist(),
        "private_key": ring.private.psi.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_key_ring(path) -> KvpKeyRing:
    """Load a key ring written by save_key_ring."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    public = PublicVectorSet(
        vectors=np.asarray(payload["public_vectors"], dtype=np.float64).reshape(
            payload["K"], payload["t"]
        ),
        seed=int(payload["seed"]),
    )
    private = PrivateKey(psi=np.asarray(payload["private_key"], dtype=np.float64))
    return KvpKeyRing(public=public, private=private)
