"""Small dense complex linear algebra on finite tensor-product spaces.

Kets, density operators and POVMs are immutable value objects backed by
read-only numpy arrays. Subsystem dimensions are carried alongside the data so
that tensor products, partial traces and Schmidt decompositions can check their
inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache, reduce
from typing import Sequence, Union

import numpy as np

ZERO_TOL = 1e-9
NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-10


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex)
    array.setflags(write=False)
    return array


def _dims(dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 1 for d in dims):
        raise ValueError(f"dims must be positive integers, got {dims}")
    return dims


def canonical_phase(vector: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the largest-magnitude entry is real and >= 0."""
    vector = np.asarray(vector, dtype=complex)
    if vector.size == 0:
        return vector.copy()
    k = int(np.argmax(np.abs(vector)))
    if abs(vector[k]) == 0:
        return vector.copy()
    return vector * (abs(vector[k]) / vector[k])


@dataclass(frozen=True, eq=False)
class Ket:
    """Pure state vector with explicit subsystem dimensions."""

    dims: tuple[int, ...]
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        dims = _dims(self.dims)
        amps = _frozen(np.ravel(self.amplitudes))
        if amps.size != int(np.prod(dims)):
            raise ValueError(f"amplitude length {amps.size} does not match dims {dims}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalize(cls, amplitudes, dims: Sequence[int] | None = None) -> "Ket":
        amps = np.ravel(np.asarray(amplitudes, dtype=complex))
        norm = np.linalg.norm(amps)
        if norm < NORM_TOL:
            raise ValueError("cannot normalize the zero vector")
        return cls(tuple(dims) if dims is not None else (amps.size,), amps / norm)

    @classmethod
    def basis(cls, index: int, dims: Sequence[int]) -> "Ket":
        dims = _dims(dims)
        amps = np.zeros(int(np.prod(dims)), dtype=complex)
        amps[index] = 1.0
        return cls(dims, amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def canonical(self) -> "Ket":
        return Ket(self.dims, canonical_phase(self.amplitudes))

    def inner(self, other: "Ket") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: "Ket") -> float:
        """|<self|other>|^2 for normalized kets (phase-insensitive comparison)."""
        return abs(self.inner(other)) ** 2 / (self.norm**2 * other.norm**2)

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def density(self) -> "DensityOperator":
        return DensityOperator(self.dims, self.projector() / self.norm**2)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Positive unit-trace operator; validated on construction."""

    dims: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        dims = _dims(self.dims)
        mat = _frozen(self.matrix)
        n = int(np.prod(dims))
        if mat.shape != (n, n):
            raise ValueError(f"matrix shape {mat.shape} does not match dims {dims}")
        if np.max(np.abs(mat - mat.conj().T)) > HERMITIAN_TOL:
            raise ValueError("density operator is not Hermitian")
        if abs(np.trace(mat) - 1) > HERMITIAN_TOL:
            raise ValueError(f"density operator trace {np.trace(mat).real:.3e} != 1")
        if np.linalg.eigvalsh(mat)[0] < -HERMITIAN_TOL:
            raise ValueError("density operator has a negative eigenvalue")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def from_ket(cls, ket: Ket) -> "DensityOperator":
        return ket.density()

    @classmethod
    def mixture(cls, weights: Sequence[float], states: Sequence["DensityOperator"]) -> "DensityOperator":
        if len(weights) != len(states) or not states:
            raise ValueError("weights and states must be non-empty and of equal length")
        matrix = sum(w * s.matrix for w, s in zip(weights, states))
        return cls(states[0].dims, matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linalg.eigh(self.matrix)

    def rank(self, tol: float = ZERO_TOL) -> int:
        return int(np.sum(np.linalg.eigvalsh(self.matrix) > tol))


@dataclass(frozen=True, eq=False)
class SchmidtDecomposition:
    coefficients: np.ndarray
    left_vectors: tuple[Ket, ...]
    right_vectors: tuple[Ket, ...]
    rank: int
    truncation_tol: float

    def reconstruct(self) -> Ket:
        dims = self.left_vectors[0].dims + self.right_vectors[0].dims
        amps = sum(
            c * np.kron(u.amplitudes, v.amplitudes)
            for c, u, v in zip(self.coefficients, self.left_vectors, self.right_vectors)
        )
        return Ket(dims, amps)


@dataclass(frozen=True, eq=False)
class PovmSet:
    """Complete set of positive effects for one measurement setting.

    ``effects[k]`` is the effect for outcome label ``k``.
    """

    dim: int
    effects: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        dim = int(self.dim)
        effects = tuple(_frozen(e) for e in self.effects)
        if len(effects) < 1:
            raise ValueError("a POVM needs at least one effect")
        total = np.zeros((dim, dim), dtype=complex)
        for k, e in enumerate(effects):
            if e.shape != (dim, dim):
                raise ValueError(f"effect {k} has shape {e.shape}, expected {(dim, dim)}")
            if np.max(np.abs(e - e.conj().T)) > HERMITIAN_TOL:
                raise ValueError(f"effect {k} is not Hermitian")
            if np.linalg.eigvalsh(e)[0] < -HERMITIAN_TOL:
                raise ValueError(f"effect {k} is not positive semidefinite")
            total = total + e
        if np.max(np.abs(total - np.eye(dim))) > HERMITIAN_TOL:
            raise ValueError("effects do not sum to the identity")
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "effects", effects)

    @classmethod
    def from_vectors(cls, vectors: Sequence[np.ndarray]) -> "PovmSet":
        """Rank-one effects |v><v| from unnormalized vectors (weights in the norms)."""
        vectors = [np.asarray(v, dtype=complex) for v in vectors]
        return cls(vectors[0].size, tuple(np.outer(v, v.conj()) for v in vectors))

    @classmethod
    def from_basis(cls, unitary: np.ndarray) -> "PovmSet":
        """Projective measurement onto the columns of ``unitary``."""
        unitary = np.asarray(unitary, dtype=complex)
        return cls.from_vectors([unitary[:, k] for k in range(unitary.shape[1])])

    @property
    def outcomes(self) -> int:
        return len(self.effects)

    def ranks(self, tol: float = ZERO_TOL) -> list[int]:
        return [int(np.sum(np.linalg.eigvalsh(e) > tol)) for e in self.effects]

    def relabeled(self, order: Sequence[int]) -> "PovmSet":
        """New POVM whose outcome ``k`` is this POVM's outcome ``order[k]``."""
        return PovmSet(self.dim, tuple(self.effects[k] for k in order))


Operand = Union[Ket, DensityOperator, np.ndarray]


def tensor_product(a: Operand, b: Operand) -> Operand:
    """Kronecker product; ``a`` indexes the slow axis and dims are concatenated."""
    if isinstance(a, Ket) and isinstance(b, Ket):
        return Ket(a.dims + b.dims, np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, DensityOperator) and isinstance(b, DensityOperator):
        return DensityOperator(a.dims + b.dims, np.kron(a.matrix, b.matrix))
    if isinstance(a, (Ket, DensityOperator)) or isinstance(b, (Ket, DensityOperator)):
        raise TypeError("tensor_product operands must be of the same kind")
    return np.kron(np.asarray(a), np.asarray(b))


def kron_all(*operands: Operand) -> Operand:
    return reduce(tensor_product, operands)


def schmidt_decompose(psi: Ket, cut: int = 1, tol: float = ZERO_TOL) -> SchmidtDecomposition:
    """Schmidt decomposition across ``dims[:cut] | dims[cut:]``.

    Coefficients come out in descending order. Each left vector is phase
    canonicalized (largest entry real positive) and the matching right vector
    absorbs the conjugate phase, so the output is reproducible.
    """
    if not 0 < cut < len(psi.dims):
        raise ValueError(f"cut {cut} does not split dims {psi.dims} into two factors")
    if abs(psi.norm - 1) > 1e-9:
        raise ValueError("schmidt_decompose expects a normalized ket")
    left_dims, right_dims = psi.dims[:cut], psi.dims[cut:]
    d1, d2 = int(np.prod(left_dims)), int(np.prod(right_dims))
    u, s, vh = np.linalg.svd(psi.amplitudes.reshape(d1, d2))
    lefts, rights = [], []
    for k in range(s.size):
        left = canonical_phase(u[:, k])
        # left = c * u_k with |c| = 1; the right vector takes conj(c)
        c = np.vdot(u[:, k], left)
        lefts.append(Ket(left_dims, left))
        rights.append(Ket(right_dims, vh[k, :] * np.conj(c)))
    return SchmidtDecomposition(
        coefficients=s,
        left_vectors=tuple(lefts),
        right_vectors=tuple(rights),
        rank=int(np.sum(s > tol)),
        truncation_tol=tol,
    )


def schmidt_rank(psi: Ket, cut: int = 1, tol: float = ZERO_TOL) -> int:
    return schmidt_decompose(Ket.normalize(psi.amplitudes, psi.dims), cut, tol).rank


def second_schmidt_coefficient(amplitudes: np.ndarray, d1: int, d2: int) -> float:
    s = np.linalg.svd(np.asarray(amplitudes).reshape(d1, d2) / np.linalg.norm(amplitudes), compute_uv=False)
    return float(s[1]) if s.size > 1 else 0.0


def partial_trace(rho: DensityOperator, keep: Sequence[int]) -> DensityOperator:
    """Reduced operator on the subsystems listed in ``keep`` (kept in index order)."""
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValueError("keep must name at least one subsystem")
    n = len(rho.dims)
    if keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"keep {keep} out of range for {n} subsystems")
    traced = [k for k in range(n) if k not in keep]
    tensor = rho.matrix.reshape(rho.dims + rho.dims)
    # trace out from the highest index so axis numbers stay valid
    for k in reversed(traced):
        m = tensor.ndim // 2
        tensor = np.trace(tensor, axis1=k, axis2=k + m)
    kept_dims = tuple(rho.dims[k] for k in keep)
    size = int(np.prod(kept_dims))
    return DensityOperator(kept_dims, tensor.reshape(size, size))


def permute_subsystems(ket: Ket, order: Sequence[int]) -> Ket:
    """Reorder tensor factors: new subsystem ``k`` is old subsystem ``order[k]``."""
    tensor = ket.amplitudes.reshape(ket.dims).transpose(order)
    return Ket(tuple(ket.dims[k] for k in order), tensor.ravel())


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a Ginibre matrix with phase fix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def random_pure_state(d: int, seed: int | np.random.Generator) -> Ket:
    if d < 2:
        raise ValueError("dimension must be at least 2")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return Ket.normalize(z)


def random_rank1_povm(d: int, k: int, seed: int | np.random.Generator) -> PovmSet:
    """k rank-one effects from a Haar unitary on the k-dim dilation.

    The first ``d`` rows of a k x k unitary form a d x k matrix with orthonormal
    rows; its columns ``v_m`` give effects ``|v_m><v_m|`` summing to the identity.
    """
    if k < 2:
        raise ValueError("a POVM needs at least two outcomes")
    if d < 1 or k < d:
        raise ValueError(f"need k >= d for a rank-one dilation, got d={d}, k={k}")
    rng = np.random.default_rng(seed)
    rows = random_unitary(k, rng)[:d, :]
    return PovmSet.from_vectors([rows[:, m] for m in range(k)])


def isometry_rows(x: np.ndarray) -> np.ndarray:
    """Polar factor (X X^dag)^{-1/2} X: the nearest matrix with orthonormal rows."""
    w, v = np.linalg.eigh(x @ x.conj().T)
    return (v * (1 / np.sqrt(w))) @ v.conj().T @ x


@lru_cache(maxsize=None)
def _upper(d: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(d, k)


def unitary_from_params(params: np.ndarray, d: int) -> np.ndarray:
    """exp(iH) for H built from d*d real parameters in the standard Hermitian basis."""
    params = np.asarray(params, dtype=float)
    if params.size != d * d:
        raise ValueError(f"expected {d * d} parameters, got {params.size}")
    iu = _upper(d, 1)
    n_off = iu[0].size
    h = np.zeros((d, d), dtype=complex)
    h[iu] = params[:n_off] + 1j * params[n_off : 2 * n_off]
    h = h + h.conj().T
    h.flat[:: d + 1] = params[2 * n_off :]
    w, v = np.linalg.eigh(h)
    return (v * np.exp(1j * w)) @ v.conj().T


def support_basis(matrix: np.ndarray, tol: float = ZERO_TOL) -> np.ndarray:
    """Orthonormal columns spanning the range of a PSD matrix (relative threshold)."""
    w, v = np.linalg.eigh(matrix)
    scale = max(float(np.max(np.abs(w))), 1.0) if w.size else 1.0
    return v[:, w > tol * scale]


def numerical_rank(matrix: np.ndarray, tol: float = ZERO_TOL) -> int:
    """Rank with singular values below ``tol * s_max`` counted as zero."""
    s = np.linalg.svd(matrix, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def orthogonal_complement(rows: np.ndarray, dim: int, tol: float = ZERO_TOL) -> tuple[int, np.ndarray]:
    """(span dimension, orthonormal complement columns) for the row vectors ``rows``.

    A vector x is in the complement iff <r|x> = 0 for every row r.
    """
    rows = np.asarray(rows, dtype=complex).reshape(-1, dim)
    if rows.shape[0] == 0:
        return 0, np.eye(dim, dtype=complex)
    # <r|x> = conj(r) . x, so the complement is the null space of conj(rows)
    _, s, vh = np.linalg.svd(rows.conj())
    rank = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
    return rank, vh[rank:].conj().T


# Complex matrices on the wire: {"shape": [r, c], "data": [[re, im], ...]} row-major.


def complex_to_pairs(matrix: np.ndarray) -> dict:
    matrix = np.atleast_1d(np.asarray(matrix, dtype=complex))
    return {
        "shape": list(matrix.shape),
        "data": [[float(z.real), float(z.imag)] for z in matrix.ravel()],
    }


def pairs_to_complex(record: dict) -> np.ndarray:
    shape = tuple(int(n) for n in record["shape"])
    data = np.asarray(record["data"], dtype=float)
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] != int(np.prod(shape)):
        raise ValueError(f"complex record data does not match shape {shape}")
    return (data[:, 0] + 1j * data[:, 1]).reshape(shape)
