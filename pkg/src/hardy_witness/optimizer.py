"""Maximize the Hardy success probability over quantum realizations.

For fixed measurements the pure states meeting the zero conditions form the
orthogonal complement of the constraint supports, and the best of them is the
top eigenvector of the success operator compressed to that complement. Only the
measurements need a nonlinear (Nelder-Mead) search.

Outer parametrizations:

* ``unitary``: projective measurements as columns of exp(iH), d*d parameters
  each. Used when generic measurements leave a non-empty complement.
* ``completion``: projective measurements with d_A = d_B = d where the d*(d-1)/2
  cells per condition already fill the space (d >= 3). Up to local unitaries the
  first settings are computational bases; a seed state with upper-triangular
  coefficient matrix C then satisfies P(B1 < A1) = 0, and the second-setting
  bases are completed by Gram-Schmidt so that P(A2 < B1) = P(A1 < B2) = 0. The
  outer search runs over C.
* ``dilation``: POVMs from isometries (polar factor of a free d x K matrix);
  consecutive column groups form the effects, so each effect has a prescribed
  rank. General POVMs draw a rank profile per restart (zero effects allowed).
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .hardy import (
    HardyReport,
    ProbabilityTable,
    Realization,
    condition_cells,
    hardy_evaluate,
    statistics_from_realization,
    zero_condition_cells,
)
from .linalg import (
    ZERO_TOL,
    Ket,
    PovmSet,
    canonical_phase,
    _upper,
    isometry_rows,
    orthogonal_complement,
    pairs_to_complex,
    support_basis,
    unitary_from_params,
)

MEASUREMENT_CLASSES = ("projective", "rank-one-povm", "general-povm")
FEASIBILITY_TOL = 1e-8
PLATEAU_ITERS = 30
PLATEAU_FLOOR = 1e-12
P_HARDY_2 = (5 * np.sqrt(5) - 11) / 2


@dataclass(frozen=True)
class OptimizationConfig:
    d_a: int
    d_b: int
    outcomes: int
    restarts: int = 64
    seed: int = 0
    max_outer_iters: int = 2000
    convergence_tol: float = 1e-10
    measurement_class: str = "projective"
    restrict_to_complement: bool = True
    workers: int = 1

    def __post_init__(self) -> None:
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be positive")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be at least 1")
        if self.measurement_class not in MEASUREMENT_CLASSES:
            raise ValueError(f"measurement_class must be one of {MEASUREMENT_CLASSES}")
        if min(self.d_a, self.d_b) < 1 or self.outcomes < 2:
            raise ValueError("need positive local dimensions and at least two outcomes")
        if not self.restrict_to_complement:
            # feasibility comes only from the complement construction
            raise ValueError("only restrict_to_complement=True is supported")
        if self.measurement_class == "projective" and not (self.d_a == self.d_b == self.outcomes):
            raise ValueError("projective class needs d_A = d_B = outcomes")
        if self.measurement_class == "rank-one-povm" and self.outcomes < max(self.d_a, self.d_b):
            raise ValueError("rank-one POVMs need at least as many outcomes as the dimension")

    @property
    def parametrization(self) -> str:
        if self.measurement_class != "projective":
            return "dilation"
        constraints = len(zero_condition_cells(self.outcomes))
        return "unitary" if constraints < self.d_a * self.d_b else "completion"


@dataclass(frozen=True)
class RestartRecord:
    restart: int
    seed: int
    success: float
    iterations: int


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    best_success: float
    realization: Realization
    report: HardyReport
    per_restart: tuple[RestartRecord, ...]
    residual_norm: float
    state: Ket
    config: OptimizationConfig
    best_params: np.ndarray = field(repr=False)

    def as_dict(self) -> dict:
        return {
            "best_success": self.best_success,
            "residual_norm": self.residual_norm,
            "report": self.report.as_dict(),
            "per_restart": [
                {"restart": r.restart, "seed": r.seed, "success": r.success, "iterations": r.iterations}
                for r in self.per_restart
            ],
        }


def success_operator(alice2: PovmSet, bob2: PovmSet) -> np.ndarray:
    """Sum over m < n of E_2^m (x) F_2^n."""
    d = alice2.outcomes
    n = alice2.dim * bob2.dim
    op = np.zeros((n, n), dtype=complex)
    for m, k in condition_cells("lt", d):
        op += np.kron(alice2.effects[m], bob2.effects[k])
    return op


def _constraint_rows(alice: Sequence[PovmSet], bob: Sequence[PovmSet], tol: float) -> np.ndarray:
    supports_a = [[support_basis(e, tol) for e in povm.effects] for povm in alice]
    supports_b = [[support_basis(f, tol) for f in povm.effects] for povm in bob]
    rows = []
    for i, m, j, n in zero_condition_cells(alice[0].outcomes):
        ua, ub = supports_a[i][m], supports_b[j][n]
        if ua.shape[1] and ub.shape[1]:
            rows.append(np.einsum("ia,jb->abij", ua, ub).reshape(ua.shape[1] * ub.shape[1], -1))
    n_total = alice[0].dim * bob[0].dim
    return np.concatenate(rows) if rows else np.zeros((0, n_total), dtype=complex)


def search_complement(
    complement_basis: Sequence[Ket] | np.ndarray, alice: Sequence[PovmSet], bob: Sequence[PovmSet]
) -> tuple[Ket, HardyReport]:
    """Best state inside a given feasible subspace, with its Hardy report."""
    if isinstance(complement_basis, np.ndarray):
        q = complement_basis
    else:
        q = np.array([k.amplitudes for k in complement_basis]).T
    if q.size == 0 or q.shape[1] == 0:
        raise ValueError("complement basis is empty; there is no feasible state")
    dims = (alice[0].dim, bob[0].dim)
    state = _top_state(q, success_operator(alice[1], bob[1]), dims)[0]
    r = Realization(state.density(), tuple(alice), tuple(bob))
    return state, hardy_evaluate(statistics_from_realization(r), eps=FEASIBILITY_TOL)


def _top_state(q: np.ndarray, op: np.ndarray, dims: tuple[int, int]) -> tuple[Ket, float]:
    w, v = np.linalg.eigh(q.conj().T @ op @ q)
    return Ket(dims, canonical_phase(q @ v[:, -1])), float(max(w[-1], 0.0))


def inner_solve(
    alice: Sequence[PovmSet], bob: Sequence[PovmSet], tol: float = ZERO_TOL
) -> tuple[Ket | None, float]:
    """Top-success feasible pure state for fixed measurements.

    Returns ``(None, 0.0)`` when the constraint supports fill the space.
    """
    dims = (alice[0].dim, bob[0].dim)
    _, q = orthogonal_complement(_constraint_rows(alice, bob, tol), dims[0] * dims[1], tol)
    if q.shape[1] == 0:
        return None, 0.0
    return _top_state(q, success_operator(alice[1], bob[1]), dims)


# ---------------------------------------------------------------------------
# outer parametrizations


def gram_schmidt(vectors: Sequence[np.ndarray], d: int) -> np.ndarray:
    """Orthonormalize in order, skip dependent vectors, complete with e_k; columns."""
    out: list[np.ndarray] = []
    for v in list(vectors) + list(np.eye(d)):
        if len(out) == d:
            break
        w = np.asarray(v, dtype=complex).copy()
        for u in out:
            w -= u * np.vdot(u, w)
        norm = np.linalg.norm(w)
        if norm > 1e-8 * max(1.0, np.linalg.norm(v)):
            out.append(w / norm)
    return np.array(out).T


def triangular_seed(params: np.ndarray, d: int) -> np.ndarray:
    """Upper-triangular coefficient matrix with unit Frobenius norm."""
    iu = _upper(d, 0)
    n = iu[0].size
    c = np.zeros((d, d), dtype=complex)
    c[iu] = params[:n] + 1j * params[n : 2 * n]
    norm = np.linalg.norm(c)
    return c / norm if norm > 0 else np.eye(d) / np.sqrt(d)


def _second_bases(coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = coeffs.shape[0]
    a2 = gram_schmidt([coeffs[:, n] for n in range(d - 1, -1, -1)], d)[:, ::-1]
    b2 = gram_schmidt([coeffs[m, :] for m in range(d)], d)
    return a2, b2


def complete_measurements(coeffs: np.ndarray) -> tuple[tuple[PovmSet, PovmSet], tuple[PovmSet, PovmSet]]:
    """Measurements that make the upper-triangular seed state meet the zero conditions.

    Alice's second basis: a_2^m orthogonal to Alice's conditional states for Bob
    outcomes n > m (Gram-Schmidt over the columns of C from the last).
    Bob's second basis: b_2^n orthogonal to Bob's conditional states for Alice
    outcomes m < n (Gram-Schmidt over the rows of C from the first).
    """
    d = coeffs.shape[0]
    a2, b2 = _second_bases(coeffs)
    eye = PovmSet.from_basis(np.eye(d))
    return (eye, PovmSet.from_basis(a2)), (eye, PovmSet.from_basis(b2))


def seed_state(coeffs: np.ndarray) -> Ket:
    d = coeffs.shape[0]
    return Ket((d, d), coeffs.ravel())


def _rank_profile(dim: int, outcomes: int, rng: np.random.Generator) -> tuple[int, ...]:
    weights = np.array([0.3, 0.5] + [0.2 / dim] * dim)[: dim + 1]
    weights /= weights.sum()
    while True:
        ranks = tuple(int(r) for r in rng.choice(dim + 1, size=outcomes, p=weights))
        if sum(ranks) >= dim:
            return ranks


def _rank_one_profile(dim: int, outcomes: int) -> tuple[int, ...]:
    if outcomes >= dim:
        return (1,) * outcomes
    # fewer outcomes than dimensions: spread the rank as evenly as possible
    return tuple(dim // outcomes + (1 if k < dim % outcomes else 0) for k in range(outcomes))


# In the search loop a POVM is a list of factors K_m with E_m = K_m K_m^dag.
Factors = list


def _split_columns(v: np.ndarray, ranks: Sequence[int]) -> Factors:
    bounds = np.cumsum((0,) + tuple(ranks))
    return [v[:, bounds[k] : bounds[k + 1]] for k in range(len(ranks))]


def _factor_support(k: np.ndarray, tol: float) -> np.ndarray:
    if k.shape[1] == 0:
        return k
    if k.shape[1] == 1:
        norm = np.sqrt(np.sum(k.real**2 + k.imag**2))
        return k / norm if norm > np.sqrt(tol) else k[:, :0]
    u, s, _ = np.linalg.svd(k, full_matrices=False)
    return u[:, s > np.sqrt(tol) * max(s[0], 1.0)]


@lru_cache(maxsize=None)
def _cells(d: int) -> tuple:
    return tuple(zero_condition_cells(d))


@lru_cache(maxsize=None)
def _success_cells(d: int) -> tuple:
    return tuple(condition_cells("lt", d))


def _inner_from_factors(alice: Sequence[Factors], bob: Sequence[Factors], d: int, tol: float = ZERO_TOL) -> float:
    dim_a, dim_b = alice[0][0].shape[0], bob[0][0].shape[0]
    sup_a = [[_factor_support(k, tol) for k in povm] for povm in alice]
    sup_b = [[_factor_support(k, tol) for k in povm] for povm in bob]
    rows = []
    for i, m, j, n in _cells(d):
        ua, ub = sup_a[i][m], sup_b[j][n]
        if ua.shape[1] == 1 and ub.shape[1] == 1:
            rows.append(np.kron(ua[:, 0], ub[:, 0])[None, :])
        elif ua.shape[1] and ub.shape[1]:
            rows.append(np.einsum("ia,jb->abij", ua, ub).reshape(-1, dim_a * dim_b))
    if rows:
        _, q = orthogonal_complement(np.concatenate(rows), dim_a * dim_b, tol)
    else:
        q = np.eye(dim_a * dim_b, dtype=complex)
    if q.shape[1] == 0:
        return 0.0
    # q^dag S q = sum_{m<n} M^dag M with M = (K_m (x) K_n)^dag q
    total = np.zeros((q.shape[1], q.shape[1]), dtype=complex)
    qt = q.reshape(dim_a, dim_b, -1)
    for m, n in _success_cells(d):
        ka, kb = alice[1][m], bob[1][n]
        if ka.shape[1] and kb.shape[1]:
            mm = np.einsum("ia,jb,ijc->abc", ka.conj(), kb.conj(), qt).reshape(-1, q.shape[1])
            total += mm.conj().T @ mm
    return float(max(np.linalg.eigvalsh(total)[-1], 0.0))


@dataclass(frozen=True)
class _Layout:
    """How a flat parameter vector maps onto the four measurements."""

    kind: str
    dims: tuple[int, int]
    outcomes: int
    profiles: tuple[tuple[int, ...], ...] = ()

    @property
    def size(self) -> int:
        d = self.outcomes
        if self.kind == "unitary":
            return 2 * (self.dims[0] ** 2 + self.dims[1] ** 2)
        if self.kind == "completion":
            return d * (d + 1)
        local = (self.dims[0], self.dims[0], self.dims[1], self.dims[1])
        return sum(2 * dim * sum(p) for dim, p in zip(local, self.profiles))

    def factors(self, x: np.ndarray) -> tuple[list[Factors], list[Factors]]:
        d = self.outcomes
        if self.kind == "completion":
            a2, b2 = _second_bases(triangular_seed(x, d))
            eye = _split_columns(np.eye(d, dtype=complex), (1,) * d)
            return [eye, _split_columns(a2, (1,) * d)], [eye, _split_columns(b2, (1,) * d)]
        local = (self.dims[0], self.dims[0], self.dims[1], self.dims[1])
        povms = []
        start = 0
        for k, dim in enumerate(local):
            if self.kind == "unitary":
                n = dim * dim
                povms.append(_split_columns(unitary_from_params(x[start : start + n], dim), (1,) * dim))
            else:
                cols = sum(self.profiles[k])
                n = 2 * dim * cols
                z = x[start : start + n]
                v = isometry_rows((z[: n // 2] + 1j * z[n // 2 :]).reshape(dim, cols))
                povms.append(_split_columns(v, self.profiles[k]))
            start += n
        return povms[:2], povms[2:]

    def measurements(self, x: np.ndarray) -> tuple[tuple[PovmSet, PovmSet], tuple[PovmSet, PovmSet]]:
        alice, bob = self.factors(x)

        def povm(factors: Factors) -> PovmSet:
            dim = factors[0].shape[0]
            return PovmSet(dim, tuple(k @ k.conj().T for k in factors))

        return (povm(alice[0]), povm(alice[1])), (povm(bob[0]), povm(bob[1]))


def _layout(cfg: OptimizationConfig, rng: np.random.Generator, restart: int) -> _Layout:
    kind = cfg.parametrization
    dims = (cfg.d_a, cfg.d_b)
    if kind != "dilation":
        return _Layout(kind, dims, cfg.outcomes)
    local = (cfg.d_a, cfg.d_a, cfg.d_b, cfg.d_b)
    if cfg.measurement_class == "rank-one-povm" or restart == 0:
        profiles = tuple(_rank_one_profile(dim, cfg.outcomes) for dim in local)
    else:
        profiles = tuple(_rank_profile(dim, cfg.outcomes, rng) for dim in local)
    return _Layout(kind, dims, cfg.outcomes, profiles)


def _objective(x: np.ndarray, layout: _Layout) -> float:
    try:
        alice, bob = layout.factors(x)
        return -_inner_from_factors(alice, bob, layout.outcomes)
    except np.linalg.LinAlgError:
        return 0.0


def restart_seed(seed: int, restart: int) -> int:
    return int(np.random.SeedSequence([seed, restart]).generate_state(1)[0])


def _run_restart(cfg: OptimizationConfig, restart: int) -> tuple[RestartRecord, _Layout, np.ndarray]:
    seed = restart_seed(cfg.seed, restart)
    rng = np.random.default_rng(seed)
    layout = _layout(cfg, rng, restart)
    x0 = rng.standard_normal(layout.size)
    flat = [0]

    def plateau_stop(intermediate_result):
        # nothing feasible for a long stretch: the landscape is flat zero here
        flat[0] = flat[0] + 1 if intermediate_result.fun > -PLATEAU_FLOOR else 0
        if flat[0] >= PLATEAU_ITERS:
            raise StopIteration

    res = minimize(
        _objective,
        x0,
        args=(layout,),
        method="Nelder-Mead",
        callback=plateau_stop,
        options={
            "maxiter": cfg.max_outer_iters,
            "maxfev": 4 * cfg.max_outer_iters,
            "xatol": float(np.sqrt(cfg.convergence_tol)),
            "fatol": cfg.convergence_tol,
            "adaptive": layout.size > 10,
        },
    )
    best = float(-res.fun) if -res.fun > 0 else 0.0
    return RestartRecord(restart, seed, best, int(res.nit)), layout, np.asarray(res.x)


def _run_restart_star(args):
    return _run_restart(*args)


def maximize_hardy(cfg: OptimizationConfig) -> OptimizationResult:
    jobs = [(cfg, r) for r in range(cfg.restarts)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            runs = list(pool.map(_run_restart_star, jobs, chunksize=max(1, len(jobs) // (4 * cfg.workers))))
    else:
        runs = [_run_restart(*job) for job in jobs]
    # highest success wins; ties go to the lower restart index
    best_index = max(range(len(runs)), key=lambda k: (runs[k][0].success, -k))
    record, layout, x = runs[best_index]
    alice, bob = layout.measurements(x)
    state, success = inner_solve(alice, bob)
    if state is None:
        # no feasible state anywhere along the search: report the trivial strategy
        state = Ket.basis(0, layout.dims)
        alice, bob = _trivial_measurements(layout.dims, cfg.outcomes)
    realization = Realization(state.density(), alice, bob)
    report = hardy_evaluate(statistics_from_realization(realization), eps=FEASIBILITY_TOL)
    return OptimizationResult(
        best_success=record.success,
        realization=realization,
        report=report,
        per_restart=tuple(r[0] for r in runs),
        residual_norm=float(np.linalg.norm(report.zero_residuals)),
        state=state,
        config=cfg,
        best_params=x,
    )


def _trivial_measurements(dims: tuple[int, int], outcomes: int):
    def povm(dim):
        return PovmSet(dim, (np.eye(dim),) + tuple(np.zeros((dim, dim)) for _ in range(outcomes - 1)))

    return (povm(dims[0]), povm(dims[0])), (povm(dims[1]), povm(dims[1]))


# ---------------------------------------------------------------------------
# recorded optima


def _fixture(name: str) -> dict:
    return json.loads(resources.files("hardy_witness.data").joinpath(name).read_text())


def optimal_realization(d: int) -> tuple[Realization, float]:
    """Recorded best d-outcome projective realization on d x d (d = 2, 3).

    Returns the realization (in the P(X < Y) labeling) and its recorded success.
    """
    if d not in (2, 3):
        raise ValueError("recorded optima exist for d = 2 and d = 3")
    data = _fixture(f"optimum_d{d}.json")
    coeffs = pairs_to_complex(data["seed_coefficients"])
    alice, bob = complete_measurements(coeffs)
    state, _ = inner_solve(alice, bob)
    return Realization(state.density(), alice, bob), float(data["success"])


def optimal_table(d: int) -> ProbabilityTable:
    return statistics_from_realization(optimal_realization(d)[0])
