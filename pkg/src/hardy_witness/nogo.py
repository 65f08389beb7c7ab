"""Linear-algebra certificates that small systems cannot show the 3-outcome argument.

A pure state meets the three zero conditions exactly when it is orthogonal to
the support of every product operator ``E_i^m (x) F_j^n`` named by a vanishing
cell. For rank-one effects these supports are nine product vectors V1..V9; for
higher-rank effects they are product subspaces. If the supports span the whole
space nothing is left; if what is left holds only product states, the success
probability is zero there as well.

Coordinates follow the usual hand calculation: Alice's rays are expanded in the
(generally non-orthogonal) basis {psi_1^0, psi_1^1} of her first setting, Bob's
in {phi_1^0, phi_1^1[, phi_1^2]}, and product vectors in the induced product
basis. Because that basis is not orthonormal, a coordinate null vector of the
constraints describes a Hilbert-space state only when read in the dual basis;
:func:`expected_product_witness` does exactly that.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .hardy import zero_condition_cells
from .linalg import (
    ZERO_TOL,
    Ket,
    PovmSet,
    canonical_phase,
    orthogonal_complement,
    random_pure_state,
    random_rank1_povm,
    random_unitary,
    second_schmidt_coefficient,
    support_basis,
)

SUPPORTED_DIMS = ((2, 2), (2, 3))
PRODUCT_TOL = 1e-8
RANDOM_COMPLEMENT_PROBES = 200


class Classification(str, enum.Enum):
    NO_HARDY_STATE = "NoHardyState"
    PRODUCT_ONLY = "ProductOnly"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True, eq=False)
class ConstraintVectorSet:
    """Supports the Hardy state must avoid, one entry per vanishing cell.

    ``provenance[k] = (i, m, j, n)`` names entry k's cell with 0-based settings,
    i.e. E_{i+1}^m (x) F_{j+1}^n. ``vectors[k]`` is an orthonormal basis of that
    operator's support (a single product ket for rank-one effects).
    """

    dims: tuple[int, int]
    vectors: tuple[tuple[Ket, ...], ...]
    provenance: tuple[tuple[int, int, int, int], ...]
    alice: tuple[PovmSet, PovmSet]
    bob: tuple[PovmSet, PovmSet]

    @property
    def rank_one(self) -> bool:
        return all(len(entry) == 1 for entry in self.vectors)

    def stacked(self) -> np.ndarray:
        rows = [k.amplitudes for entry in self.vectors for k in entry]
        n = self.dims[0] * self.dims[1]
        return np.array(rows, dtype=complex).reshape(-1, n)

    def vector(self, k: int) -> Ket:
        """V_k (1-based, as in the hand calculation); rank-one entries only."""
        entry = self.vectors[k - 1]
        if len(entry) != 1:
            raise ValueError(f"entry V{k} is a {len(entry)}-dimensional support")
        return entry[0]


def effect_ray(effect: np.ndarray, tol: float = ZERO_TOL) -> np.ndarray:
    """Unit ray of a rank-one effect, phase canonicalized."""
    basis = support_basis(effect, tol)
    if basis.shape[1] != 1:
        raise ValueError(f"effect has rank {basis.shape[1]}, expected a rank-one effect")
    return canonical_phase(basis[:, 0])


def constraint_supports(
    alice: Sequence[PovmSet], bob: Sequence[PovmSet], tol: float = ZERO_TOL
) -> ConstraintVectorSet:
    """Support bases for every zero-condition cell, for any dims and outcome count."""
    d = alice[0].outcomes
    d_a, d_b = alice[0].dim, bob[0].dim
    vectors = []
    provenance = []
    for i, m, j, n in zero_condition_cells(d):
        e, f = alice[i].effects[m], bob[j].effects[n]
        ue, uf = support_basis(e, tol), support_basis(f, tol)
        if ue.shape[1] == 1 and uf.shape[1] == 1:
            ue = canonical_phase(ue[:, 0])[:, None]
            uf = canonical_phase(uf[:, 0])[:, None]
        entry = tuple(
            Ket((d_a, d_b), np.kron(ue[:, a], uf[:, b]))
            for a in range(ue.shape[1])
            for b in range(uf.shape[1])
        )
        vectors.append(entry)
        provenance.append((i, m, j, n))
    return ConstraintVectorSet((d_a, d_b), tuple(vectors), tuple(provenance), tuple(alice), tuple(bob))


def build_constraints(
    alice: Sequence[PovmSet], bob: Sequence[PovmSet], d_a: int, d_b: int, tol: float = ZERO_TOL
) -> ConstraintVectorSet:
    if (d_a, d_b) not in SUPPORTED_DIMS:
        raise ValueError(f"unsupported dims {(d_a, d_b)}; expected one of {SUPPORTED_DIMS}")
    if len(alice) != 2 or len(bob) != 2:
        raise ValueError("need two settings per party")
    for povm, dim in ((alice[0], d_a), (alice[1], d_a), (bob[0], d_b), (bob[1], d_b)):
        if povm.outcomes != 3:
            raise ValueError(f"expected three outcomes per setting, got {povm.outcomes}")
        if povm.dim != dim:
            raise ValueError(f"measurement acts on dimension {povm.dim}, expected {dim}")
    return constraint_supports(alice, bob, tol)


@dataclass(frozen=True, eq=False)
class BasisExpansion:
    """Expansion coefficients of every measurement ray in the first-setting bases.

    ``alice_coords[(i, m)]`` holds (alpha_i^m, beta_i^m) with
    psi_i^m = alpha psi_1^0 + beta psi_1^1. ``bob_coords[(j, n)]`` holds
    (delta_j^n, gamma_j^n[, eta_j^n]) in the basis {phi_1^0, phi_1^1[, phi_1^2]}.
    Rays are the unit, phase-canonical kets used for the constraint vectors.
    """

    alice_basis: np.ndarray  # columns
    bob_basis: np.ndarray  # columns
    alice_rays: dict[tuple[int, int], np.ndarray]
    bob_rays: dict[tuple[int, int], np.ndarray]
    alice_coords: dict[tuple[int, int], np.ndarray]
    bob_coords: dict[tuple[int, int], np.ndarray]

    def alpha(self, i: int, m: int) -> complex:
        return complex(self.alice_coords[(i, m)][0])

    def beta(self, i: int, m: int) -> complex:
        return complex(self.alice_coords[(i, m)][1])

    def delta(self, j: int, n: int) -> complex:
        return complex(self.bob_coords[(j, n)][0])

    def gamma(self, j: int, n: int) -> complex:
        return complex(self.bob_coords[(j, n)][1])

    def eta(self, j: int, n: int) -> complex:
        coords = self.bob_coords[(j, n)]
        return complex(coords[2]) if coords.size > 2 else 0j

    def reconstruct_alice(self, i: int, m: int) -> np.ndarray:
        return self.alice_basis @ self.alice_coords[(i, m)]

    def reconstruct_bob(self, j: int, n: int) -> np.ndarray:
        return self.bob_basis @ self.bob_coords[(j, n)]

    def normalized_rows(self) -> dict[str, np.ndarray]:
        """Coordinate rows rescaled to unit length (ray coordinates)."""
        rows = {f"A{i + 1}^{m}": c for (i, m), c in self.alice_coords.items()}
        rows.update({f"B{j + 1}^{n}": c for (j, n), c in self.bob_coords.items()})
        return {k: v / np.linalg.norm(v) for k, v in rows.items()}

    def product_basis(self) -> np.ndarray:
        """Columns psi_1^a (x) phi_1^b in (a slow, b fast) order."""
        cols = [
            np.kron(self.alice_basis[:, a], self.bob_basis[:, b])
            for a in range(self.alice_basis.shape[1])
            for b in range(self.bob_basis.shape[1])
        ]
        return np.array(cols).T

    def coordinates(self, ket: Ket | np.ndarray) -> np.ndarray:
        """Coordinates of a vector in the product basis."""
        amps = ket.amplitudes if isinstance(ket, Ket) else np.asarray(ket)
        return np.linalg.solve(self.product_basis(), amps)

    def dual_basis(self, side: str) -> np.ndarray:
        """Columns b~_k with <b~_k|b_l> = delta_kl."""
        basis = self.alice_basis if side == "alice" else self.bob_basis
        return np.linalg.inv(basis).conj().T


def basis_expansion(alice: Sequence[PovmSet], bob: Sequence[PovmSet]) -> BasisExpansion:
    """Expand all rank-one measurement rays in the first-setting bases."""
    d_b = bob[0].dim
    alice_rays = {(i, m): effect_ray(alice[i].effects[m]) for i in range(2) for m in range(3)}
    bob_rays = {(j, n): effect_ray(bob[j].effects[n]) for j in range(2) for n in range(3)}
    alice_basis = np.array([alice_rays[(0, 0)], alice_rays[(0, 1)]]).T
    bob_basis = np.array([bob_rays[(0, n)] for n in range(d_b)]).T
    if abs(np.linalg.det(alice_basis)) < 1e-12 or abs(np.linalg.det(bob_basis)) < 1e-12:
        raise ValueError("first-setting rays do not form a basis")
    alice_coords = {k: np.linalg.solve(alice_basis, v) for k, v in alice_rays.items()}
    bob_coords = {k: np.linalg.solve(bob_basis, v) for k, v in bob_rays.items()}
    return BasisExpansion(alice_basis, bob_basis, alice_rays, bob_rays, alice_coords, bob_coords)


DETERMINANT_INDICES = (1, 2, 3, 7, 8, 9)


def determinant_closed_form(x: BasisExpansion, k: int) -> complex:
    """Det[V4, V5, V6, Vk] as a polynomial in the expansion coefficients (2 x 2)."""
    a, b = x.alpha(0, 2), x.beta(0, 2)
    forms: dict[int, Callable[[], complex]] = {
        1: lambda: a * (a * x.beta(1, 0) - x.alpha(1, 0) * b),
        2: lambda: a * x.gamma(0, 2) * (a * x.beta(1, 0) - x.alpha(1, 0) * b),
        3: lambda: a * x.gamma(0, 2) * (a * x.beta(1, 1) - x.alpha(1, 1) * b),
        7: lambda: -a * b * x.gamma(1, 1),
        8: lambda: -a * b * x.gamma(1, 2),
        9: lambda: a * a * x.gamma(1, 2),
    }
    return forms[k]()


def determinant_condition(c: ConstraintVectorSet, k: int) -> tuple[complex, complex]:
    """(numeric, closed form) for Det[V4, V5, V6, Vk] in the product-basis coordinates.

    The numeric value is det of the four Hilbert-space vectors divided by the
    determinant of the product basis, so it does not reuse the expansion
    coefficients that the closed form is built from.
    """
    if k not in DETERMINANT_INDICES:
        raise ValueError(f"k must be one of {DETERMINANT_INDICES}, got {k}")
    if c.dims != (2, 2) or not c.rank_one:
        raise ValueError("determinant conditions are defined for rank-one 2 x 2 instances")
    x = basis_expansion(c.alice, c.bob)
    rows = np.array([c.vector(4).amplitudes, c.vector(5).amplitudes, c.vector(6).amplitudes, c.vector(k).amplitudes])
    numeric = np.linalg.det(rows) / np.linalg.det(x.product_basis().T)
    return complex(numeric), complex(determinant_closed_form(x, k))


@dataclass(frozen=True, eq=False)
class CertificateResult:
    span_dim: int
    complement_dim: int
    complement_basis: tuple[Ket, ...]
    classification: Classification | None = None
    witness_state: Ket | None = None
    # largest second Schmidt coefficient seen among checked complement states
    max_schmidt_coeff_gap: float = 0.0
    dims: tuple[int, int] = field(default=(2, 2))

    def as_dict(self) -> dict:
        return {
            "span_dim": self.span_dim,
            "complement_dim": self.complement_dim,
            "classification": None if self.classification is None else self.classification.value,
            "max_schmidt_coeff_gap": self.max_schmidt_coeff_gap,
        }


def span_and_complement(c: ConstraintVectorSet, tol: float = ZERO_TOL) -> CertificateResult:
    n = c.dims[0] * c.dims[1]
    span, comp = orthogonal_complement(c.stacked(), n, tol)
    basis = tuple(Ket(c.dims, canonical_phase(comp[:, k])) for k in range(comp.shape[1]))
    return CertificateResult(span, n - span, basis, dims=c.dims)


def classify(c: ConstraintVectorSet, tol: float = ZERO_TOL, seed: int = 0) -> CertificateResult:
    partial = span_and_complement(c, tol)
    if partial.complement_dim == 0:
        return CertificateResult(
            partial.span_dim, 0, (), Classification.NO_HARDY_STATE, None, 0.0, c.dims
        )
    d_a, d_b = c.dims
    comp = np.array([k.amplitudes for k in partial.complement_basis]).T
    rng = np.random.default_rng(seed)
    probes = [comp[:, k] for k in range(comp.shape[1])]
    if comp.shape[1] > 1:
        z = rng.standard_normal((comp.shape[1], RANDOM_COMPLEMENT_PROBES)) + 1j * rng.standard_normal(
            (comp.shape[1], RANDOM_COMPLEMENT_PROBES)
        )
        probes.extend((comp @ z).T)
    gap = max(second_schmidt_coefficient(v, d_a, d_b) for v in probes)
    if gap <= PRODUCT_TOL:
        verdict, witness = Classification.PRODUCT_ONLY, partial.complement_basis[0]
    else:
        verdict, witness = Classification.INCONCLUSIVE, None
    return CertificateResult(
        partial.span_dim, partial.complement_dim, partial.complement_basis, verdict, witness, gap, c.dims
    )


def expected_product_witness(x: BasisExpansion) -> Ket:
    """The product state left over by the crafted families.

    In coordinates it is (beta_1^2, -alpha_1^2) on Alice's side times the second
    basis ray on Bob's side; read in the dual bases this is the state orthogonal
    to psi_1^2 on Alice's side and to phi_1^0 (and phi_1^2 for a qutrit) on
    Bob's side.
    """
    a, b = x.alpha(0, 2), x.beta(0, 2)
    alice_dual = x.dual_basis("alice")
    bob_dual = x.dual_basis("bob")
    alice = np.conj(b) * alice_dual[:, 0] - np.conj(a) * alice_dual[:, 1]
    bob = bob_dual[:, 1]
    return Ket.normalize(np.kron(alice, bob), (x.alice_basis.shape[0], x.bob_basis.shape[0]))


# ---------------------------------------------------------------------------
# instance families


def _bloch(ray: np.ndarray) -> np.ndarray:
    rho = np.outer(ray, ray.conj())
    return np.array([2 * rho[0, 1].real, 2 * rho[1, 0].imag, (rho[0, 0] - rho[1, 1]).real])


def _ray_from_bloch(n: np.ndarray) -> np.ndarray:
    n = n / np.linalg.norm(n)
    theta = np.arccos(np.clip(n[2], -1, 1))
    phi = np.arctan2(n[1], n[0])
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


def coplanar_qubit_povm(first: np.ndarray, second: np.ndarray, rng: np.random.Generator) -> PovmSet:
    """Three-outcome rank-one qubit POVM whose first two rays are given.

    The third Bloch direction is drawn in the plane of the first two; weights
    solve sum_k w_k = 2, sum_k w_k n_k = 0 (a 3 x 3 system in plane coordinates).
    Draws with a non-positive weight are rejected.
    """
    n0, n1 = _bloch(first), _bloch(second)
    e1 = n0 / np.linalg.norm(n0)
    e2 = n1 - (n1 @ e1) * e1
    if np.linalg.norm(e2) < 1e-6:
        raise ValueError("first two rays are (anti)parallel on the Bloch sphere")
    e2 /= np.linalg.norm(e2)
    angles = [0.0, float(np.arctan2(n1 @ e2, n1 @ e1))]
    for _ in range(1000):
        theta = rng.uniform(0, 2 * np.pi)
        system = np.array([[np.cos(t) for t in angles + [theta]], [np.sin(t) for t in angles + [theta]], [1.0, 1.0, 1.0]])
        if abs(np.linalg.det(system)) < 1e-9:
            continue
        w = np.linalg.solve(system, [0.0, 0.0, 2.0])
        if np.all(w > 0.05):
            n2 = np.cos(theta) * e1 + np.sin(theta) * e2
            rays = [first, second, _ray_from_bloch(n2)]
            return PovmSet.from_vectors([np.sqrt(wk) * r for wk, r in zip(w, rays)])
    raise RuntimeError("could not complete the qubit POVM with positive weights")


def _split_projector(ray: np.ndarray, weight: float) -> tuple[np.ndarray, np.ndarray]:
    p = np.outer(ray, ray.conj())
    return weight * p, (1 - weight) * p


def generic_instance(dims: tuple[int, int], seed: int) -> tuple[tuple[PovmSet, PovmSet], tuple[PovmSet, PovmSet]]:
    """Haar-dilation rank-one three-outcome POVMs on both sides."""
    rng = np.random.default_rng(seed)
    d_a, d_b = dims
    alice = (random_rank1_povm(d_a, 3, rng), random_rank1_povm(d_a, 3, rng))
    bob = (random_rank1_povm(d_b, 3, rng), random_rank1_povm(d_b, 3, rng))
    return alice, bob


def eq5_crafted_instance(seed: int) -> tuple[tuple[PovmSet, PovmSet], tuple[PovmSet, PovmSet]]:
    """2 x 2 rank-one instance whose nine vectors span only three dimensions.

    gamma_1^2 = gamma_2^1 = gamma_2^2 = 0 (Bob's phi_1^2, phi_2^1, phi_2^2 lie
    along phi_1^0) and psi_2^0, psi_2^1 are both proportional to psi_1^2.
    """
    rng = np.random.default_rng(seed)
    alice1 = random_rank1_povm(2, 3, rng)
    r2 = effect_ray(alice1.effects[2])
    r2_perp = np.array([-np.conj(r2[1]), np.conj(r2[0])])
    e0, e1 = _split_projector(r2, rng.uniform(0.2, 0.8))
    alice2 = PovmSet(2, (e0, e1, np.outer(r2_perp, r2_perp.conj())))
    a = random_pure_state(2, rng).amplitudes
    a_perp = np.array([-np.conj(a[1]), np.conj(a[0])])
    p_perp = np.outer(a_perp, a_perp.conj())
    f0, f2 = _split_projector(a, rng.uniform(0.2, 0.8))
    bob1 = PovmSet(2, (f0, p_perp, f2))
    g1, g2 = _split_projector(a, rng.uniform(0.2, 0.8))
    bob2 = PovmSet(2, (p_perp, g1, g2))
    return (alice1, alice2), (bob1, bob2)


def appendix_crafted_instance(seed: int) -> tuple[tuple[PovmSet, PovmSet], tuple[PovmSet, PovmSet]]:
    """2 x 3 rank-one instance whose nine vectors span five dimensions.

    Bob measures orthonormal bases with phi_2^1 = phi_1^0 and phi_2^2 = phi_1^2
    (eta_2^1 = gamma_2^1 = gamma_2^2 = 0); Alice's psi_2^0 is parallel to psi_1^2.
    """
    rng = np.random.default_rng(seed)
    alice1 = random_rank1_povm(2, 3, rng)
    r2 = effect_ray(alice1.effects[2])
    alice2 = coplanar_qubit_povm(r2, random_pure_state(2, rng).amplitudes, rng)
    u = random_unitary(3, rng)
    bob1 = PovmSet.from_basis(u)
    phases = np.exp(2j * np.pi * rng.uniform(size=3))
    bob2 = PovmSet.from_basis(u[:, [1, 0, 2]] * phases)
    return (alice1, alice2), (bob1, bob2)


RANK2_SLOTS = tuple((party, s, k) for party in ("alice", "bob") for s in range(2) for k in range(3))


def rank2_instance(
    dims: tuple[int, int], seed: int, slot: int | None = None
) -> tuple[tuple[PovmSet, PovmSet], tuple[PovmSet, PovmSet]]:
    """Generic instance where one effect (slot ``seed % 12`` unless given) has rank two.

    The rank-two effect is the coarse-graining of two rank-one effects of a
    four-outcome Haar-dilation POVM.
    """
    rng = np.random.default_rng(seed)
    alice, bob = [list(p) for p in generic_instance(dims, int(rng.integers(2**31)))]
    party, setting, outcome = RANK2_SLOTS[(seed if slot is None else slot) % len(RANK2_SLOTS)]
    dim = dims[0] if party == "alice" else dims[1]
    fine = random_rank1_povm(dim, 4, rng).effects
    merged = [fine[0], fine[1]]
    merged.insert(outcome, fine[2] + fine[3])
    target = alice if party == "alice" else bob
    target[setting] = PovmSet(dim, tuple(merged))
    return tuple(alice), tuple(bob)


FAMILIES = ("generic", "eq5-crafted", "appendix-crafted", "rank2-case")


def family_instance(family: str, dims: tuple[int, int], seed: int):
    if family == "generic":
        return generic_instance(dims, seed)
    if family == "eq5-crafted":
        if dims != (2, 2):
            raise ValueError("eq5-crafted instances are 2 x 2")
        return eq5_crafted_instance(seed)
    if family == "appendix-crafted":
        if dims != (2, 3):
            raise ValueError("appendix-crafted instances are 2 x 3")
        return appendix_crafted_instance(seed)
    if family == "rank2-case":
        return rank2_instance(dims, seed)
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


@dataclass(frozen=True)
class SweepEntry:
    seed: int
    result: CertificateResult

    @property
    def entangled_complement(self) -> bool:
        return self.result.classification is Classification.INCONCLUSIVE


def sweep(family: str, dims: tuple[int, int], count: int, seed: int = 0, tol: float = ZERO_TOL) -> list[SweepEntry]:
    """Classify ``count`` instances with seeds seed, seed+1, ..."""
    entries = []
    for k in range(count):
        s = seed + k
        alice, bob = family_instance(family, dims, s)
        entries.append(SweepEntry(s, classify(build_constraints(alice, bob, *dims, tol=tol), tol)))
    return entries
