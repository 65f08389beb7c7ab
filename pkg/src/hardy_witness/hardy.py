"""Hardy conditions on two-setting, d-outcome joint statistics.

Settings are 0-based throughout: setting 0 is A1/B1 and setting 1 is A2/B2.
A table ``p[i, j, m, n]`` holds P(A_{i+1} = m, B_{j+1} = n).

For d outcomes the three zero conditions are P(A2 < B1), P(B1 < A1) and
P(A1 < B2), and the success probability is P(A2 < B2), where ``X < Y`` sums the
cells whose X outcome is strictly smaller than the Y outcome. At d = 3 this is
term for term the usual three-outcome argument. At d = 2 it is the textbook
Hardy argument

    P(A1=1, B2=1) = 0,  P(A2=1, B1=1) = 0,  P(A1=0, B1=0) = 0,  P(A2=1, B2=1) > 0

after flipping Alice's outcome labels (m -> 1 - m) on both settings; see
:func:`standard_two_outcome_conditions`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import DensityOperator, Ket, PovmSet

NEGATIVE_CLAMP = 1e-10
INGEST_CLAMP = 1e-12
EXACT_EPS = 1e-9

# (alice setting, bob setting, relation) for the zero conditions, in order;
# "lt" sums cells m < n, "gt" sums cells m > n.
ZERO_CONDITIONS = ((1, 0, "lt"), (0, 0, "gt"), (0, 1, "lt"))
SUCCESS_CONDITION = (1, 1, "lt")


def condition_cells(relation: str, d: int) -> list[tuple[int, int]]:
    """Cells (m, n) summed by one condition, in the order they are written out.

    ``lt``: (0,1), (0,2), (1,2), ...  ``gt``: (1,0), (2,0), (2,1), ...
    """
    if relation == "lt":
        return [(m, n) for m in range(d) for n in range(m + 1, d)]
    if relation == "gt":
        return [(m, n) for n in range(d) for m in range(n + 1, d)]
    raise ValueError(f"unknown relation {relation!r}")


def zero_condition_cells(d: int) -> list[tuple[int, int, int, int]]:
    """All (i, m, j, n) cells that the zero conditions force to vanish.

    For d = 3 the order is exactly the nine product vectors V1..V9 of the
    three-outcome orthogonality argument.
    """
    return [
        (i, m, j, n)
        for i, j, relation in ZERO_CONDITIONS
        for m, n in condition_cells(relation, d)
    ]


@dataclass(frozen=True, eq=False)
class Realization:
    state: DensityOperator
    alice: tuple[PovmSet, PovmSet]
    bob: tuple[PovmSet, PovmSet]

    def __post_init__(self) -> None:
        if len(self.alice) != 2 or len(self.bob) != 2:
            raise ValueError("a realization needs exactly two settings per party")
        if isinstance(self.state, Ket):
            object.__setattr__(self, "state", self.state.density())
        d = self.alice[0].outcomes
        for povm in (*self.alice, *self.bob):
            if povm.outcomes != d:
                raise ValueError("all four measurements must have the same number of outcomes")
        d_a, d_b = self.alice[0].dim, self.bob[0].dim
        if self.alice[1].dim != d_a or self.bob[1].dim != d_b:
            raise ValueError("settings of one party must act on the same space")
        if self.state.dim != d_a * d_b:
            raise ValueError(f"state dimension {self.state.dim} != {d_a} x {d_b}")
        object.__setattr__(self, "alice", tuple(self.alice))
        object.__setattr__(self, "bob", tuple(self.bob))

    @property
    def outcomes(self) -> int:
        return self.alice[0].outcomes

    @property
    def local_dims(self) -> tuple[int, int]:
        return self.alice[0].dim, self.bob[0].dim


@dataclass(frozen=True, eq=False)
class ProbabilityTable:
    d: int
    p: np.ndarray

    def __post_init__(self) -> None:
        d = int(self.d)
        p = np.array(self.p, dtype=float)
        if p.shape != (2, 2, d, d):
            raise ValueError(f"table shape {p.shape} != (2, 2, {d}, {d})")
        if not np.all(np.isfinite(p)):
            raise ValueError("table contains non-finite entries")
        if np.min(p) < -INGEST_CLAMP:
            raise ValueError(f"negative probability {np.min(p):.3e}")
        p = np.clip(p, 0.0, None)
        p.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "p", p)

    def check_normalized(self, tol: float = 1e-9) -> None:
        sums = self.p.sum(axis=(2, 3))
        worst = float(np.max(np.abs(sums - 1)))
        if worst > tol:
            raise ValueError(f"setting-pair sums deviate from 1 by {worst:.3e}")

    def signaling_gap(self) -> float:
        """Largest change of one party's marginal under the other's setting choice."""
        alice = self.p.sum(axis=3)  # [i, j, m]
        bob = self.p.sum(axis=2)  # [i, j, n]
        return float(max(np.max(np.abs(alice[:, 0] - alice[:, 1])), np.max(np.abs(bob[0] - bob[1]))))

    def embed(self, d: int) -> "ProbabilityTable":
        """Same statistics with extra never-occurring outcomes appended."""
        if d < self.d:
            raise ValueError("can only embed into more outcomes")
        p = np.zeros((2, 2, d, d))
        p[:, :, : self.d, : self.d] = self.p
        return ProbabilityTable(d, p)

    @staticmethod
    def mixture(weights: Sequence[float], tables: Sequence["ProbabilityTable"]) -> "ProbabilityTable":
        return ProbabilityTable(tables[0].d, sum(w * t.p for w, t in zip(weights, tables)))


@dataclass(frozen=True)
class HardyReport:
    d: int
    zero_residuals: tuple[float, float, float]
    success: float
    success_terms: tuple[float, ...]
    conditions_met: bool
    stringent_met: bool
    eps: float

    def as_dict(self) -> dict:
        return {
            "d": self.d,
            "zero_residuals": list(self.zero_residuals),
            "success": self.success,
            "success_terms": list(self.success_terms),
            "conditions_met": self.conditions_met,
            "stringent_met": self.stringent_met,
            "eps": self.eps,
        }


def joint_probability(state: DensityOperator, effect_a: np.ndarray, effect_b: np.ndarray) -> float:
    """Tr((E (x) F) rho); roundoff negatives are clamped, real negatives raise."""
    effect_a = np.asarray(effect_a)
    effect_b = np.asarray(effect_b)
    if effect_a.shape[0] * effect_b.shape[0] != state.dim:
        raise ValueError("effect dimensions do not match the state")
    value = float(np.real(np.trace(np.kron(effect_a, effect_b) @ state.matrix)))
    if value < -NEGATIVE_CLAMP:
        raise ValueError(f"joint probability {value:.3e} is negative")
    return min(max(value, 0.0), 1.0)


def statistics_from_realization(r: Realization) -> ProbabilityTable:
    d = r.outcomes
    d_a, d_b = r.local_dims
    # Tr((E x F) rho) = sum E[a,a'] F[b,b'] rho[a'b', ab]
    rho = r.state.matrix.reshape(d_a, d_b, d_a, d_b)
    p = np.zeros((2, 2, d, d))
    for i, j in itertools.product(range(2), range(2)):
        e = np.array(r.alice[i].effects)
        f = np.array(r.bob[j].effects)
        p[i, j] = np.real(np.einsum("mxy,nuv,yvxu->mn", e, f, rho))
    if np.min(p) < -NEGATIVE_CLAMP:
        raise ValueError(f"joint probability {np.min(p):.3e} is negative")
    return ProbabilityTable(d, np.clip(p, 0.0, 1.0))


def _condition_sum(p: np.ndarray, i: int, j: int, relation: str, d: int) -> list[float]:
    return [float(p[i, j, m, n]) for m, n in condition_cells(relation, d)]


def hardy_evaluate(t: ProbabilityTable, eps: float = EXACT_EPS) -> HardyReport:
    d = t.d
    residuals = tuple(
        float(sum(_condition_sum(t.p, i, j, rel, d))) for i, j, rel in ZERO_CONDITIONS
    )
    terms = tuple(_condition_sum(t.p, *SUCCESS_CONDITION, d))
    met = all(r <= eps for r in residuals)
    return HardyReport(
        d=d,
        zero_residuals=residuals,
        success=float(sum(terms)),
        success_terms=terms,
        conditions_met=met,
        stringent_met=met and all(x > 0 for x in terms),
        eps=eps,
    )


def standard_two_outcome_conditions(t: ProbabilityTable) -> tuple[tuple[float, float, float], float]:
    """The textbook two-outcome Hardy sums read directly off a d = 2 table.

    Returns ``((P(A1=1,B2=1), P(A2=1,B1=1), P(A1=0,B1=0)), P(A2=1,B2=1))``.
    """
    if t.d != 2:
        raise ValueError("two-outcome conditions need a d = 2 table")
    p = t.p
    return (float(p[0, 1, 1, 1]), float(p[1, 0, 1, 1]), float(p[0, 0, 0, 0])), float(p[1, 1, 1, 1])


def flip_alice_labels(t: ProbabilityTable) -> ProbabilityTable:
    """Map between the textbook two-outcome labels and the P(X < Y) form."""
    if t.d != 2:
        raise ValueError("label flip is defined for d = 2")
    return ProbabilityTable(2, t.p[:, :, ::-1, :])


def flip_alice_realization(r: Realization) -> Realization:
    """Realization counterpart of :func:`flip_alice_labels`."""
    if r.outcomes != 2:
        raise ValueError("label flip is defined for two outcomes")
    return Realization(r.state, tuple(a.relabeled([1, 0]) for a in r.alice), r.bob)


def deterministic_table(strategy: Sequence[int], d: int) -> ProbabilityTable:
    """Table of the deterministic assignment (A1, A2, B1, B2) -> outcomes."""
    a1, a2, b1, b2 = (int(x) for x in strategy)
    if not all(0 <= x < d for x in (a1, a2, b1, b2)):
        raise ValueError(f"strategy {tuple(strategy)} has outcomes outside 0..{d - 1}")
    p = np.zeros((2, 2, d, d))
    for i, a in enumerate((a1, a2)):
        for j, b in enumerate((b1, b2)):
            p[i, j, a, b] = 1.0
    return ProbabilityTable(d, p)


def lhv_enumerate(d: int) -> list[tuple[tuple[int, int, int, int], HardyReport]]:
    """Every deterministic local strategy with its Hardy report (d**4 of them)."""
    if d < 2:
        raise ValueError("need at least two outcomes")
    if d > 4:
        raise ValueError(f"d = {d} exceeds the enumeration guard (d <= 4)")
    return [
        (strategy, hardy_evaluate(deterministic_table(strategy, d), eps=0.0))
        for strategy in itertools.product(range(d), repeat=4)
    ]
