"""Stabilizer states as generator lists, with Pauli measurement.

Only the stabilizer generators are stored (no destabilizers).  The
deterministic-outcome case is resolved by GF(2) elimination, which is
``O(n^3)`` but irrelevant at the sizes used here.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Optional

import numpy as np

from qcorr.quantumlab.pauli import PauliString, all_paulis, commutes, pauli_mul

MAX_ENUMERATION_QUBITS = 3


def _vec(p: PauliString) -> tuple:
    return p.x + p.z


def _rref(rows: Iterable[PauliString]) -> tuple[list[PauliString], list[int]]:
    """Row-reduce over GF(2) on (x | z); phases follow the Pauli products."""
    rows = list(rows)
    if not rows:
        return [], []
    width = 2 * rows[0].n
    pivots = []
    r = 0
    for col in range(width):
        piv = next((i for i in range(r, len(rows)) if _vec(rows[i])[col]), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        for i in range(len(rows)):
            if i != r and _vec(rows[i])[col]:
                rows[i] = pauli_mul(rows[i], rows[r])
        pivots.append(col)
        r += 1
        if r == len(rows):
            break
    return rows[:r], pivots


@dataclass(frozen=True)
class StabTableau:
    generators: tuple

    def __post_init__(self):
        gens = tuple(self.generators)
        if not gens:
            raise ValueError("need at least one generator")
        n = gens[0].n
        if len(gens) != n or any(g.n != n for g in gens):
            raise ValueError("need exactly n generators on n qubits")
        if any(not g.is_hermitian for g in gens):
            raise ValueError("generators must have sign +1 or -1")
        for i in range(n):
            for j in range(i + 1, n):
                if not commutes(gens[i], gens[j]):
                    raise ValueError(f"generators {i} and {j} anticommute")
        if len(_rref(gens)[0]) != n:
            raise ValueError("generators are not independent")
        object.__setattr__(self, "generators", gens)

    @property
    def n(self) -> int:
        return len(self.generators)

    @classmethod
    def from_labels(cls, labels) -> "StabTableau":
        return cls(tuple(PauliString.from_label(s) for s in labels))

    @classmethod
    def zero(cls, n: int) -> "StabTableau":
        return cls.basis((0,) * n)

    @classmethod
    def basis(cls, bits) -> "StabTableau":
        """Computational basis state ``|bits>``: generators ``(-1)^b_j Z_j``."""
        n = len(bits)
        return cls(tuple(
            PauliString.single(n, j, "Z") if not b else PauliString.single(n, j, "Z").negate()
            for j, b in enumerate(bits)
        ))

    @classmethod
    def graph(cls, n: int, edges) -> "StabTableau":
        """Graph state: ``K_a = X_a prod_{b ~ a} Z_b``."""
        z = [[0] * n for _ in range(n)]
        for a, b in edges:
            if a == b:
                raise ValueError("self-loops are not allowed")
            z[a][b] = z[b][a] = 1
        x = [[int(i == a) for i in range(n)] for a in range(n)]
        return cls(tuple(PauliString(tuple(x[a]), tuple(z[a])) for a in range(n)))

    def group(self) -> list[PauliString]:
        """All ``2^n`` signed elements of the stabilizer group."""
        out = []
        ident = PauliString.identity(self.n)
        for mask in range(1 << self.n):
            chosen = [g for j, g in enumerate(self.generators) if mask >> j & 1]
            out.append(reduce(pauli_mul, chosen, ident))
        return out

    def sign_of(self, p: PauliString) -> int:
        """``s`` with ``s * p`` in the group, or 0 when neither sign is."""
        if p.n != self.n:
            raise ValueError("qubit counts differ")
        rows, pivots = _rref(self.generators)
        acc = PauliString.identity(self.n)
        residual = list(_vec(p))
        for row, col in zip(rows, pivots):
            if residual[col]:
                rv = _vec(row)
                residual = [a ^ b for a, b in zip(residual, rv)]
                acc = pauli_mul(acc, row)
        if any(residual):
            return 0
        diff = (acc.phase - p.phase) % 4
        if diff % 2:
            raise ValueError("Pauli has imaginary phase")
        return 1 if diff == 0 else -1

    def canonical(self) -> "StabTableau":
        """Reduced row-echelon generators; equal states give equal tableaux."""
        rows, _ = _rref(self.generators)
        return StabTableau(tuple(rows))

    def key(self) -> tuple:
        return tuple((g.x, g.z, g.phase) for g in self.canonical().generators)

    def to_statevector(self) -> np.ndarray:
        """Dense amplitudes, global phase fixed so the first nonzero one is positive."""
        dim = 1 << self.n
        proj = np.eye(dim, dtype=np.complex128)
        for g in self.generators:
            proj = proj @ (np.eye(dim) + g.to_matrix()) / 2
        col = int(np.argmax(np.linalg.norm(proj, axis=0)))
        psi = proj[:, col]
        psi = psi / np.linalg.norm(psi)
        lead = psi[np.argmax(np.abs(psi) > 1e-12)]
        return psi * (abs(lead) / lead)

    def labels(self) -> list[str]:
        return [g.label for g in self.generators]


def _check_observable(state: StabTableau, p: PauliString) -> None:
    if p.n != state.n:
        raise ValueError("qubit counts differ")
    if not p.is_hermitian:
        raise ValueError("measured Pauli must have phase +1 or -1")
    if p.is_identity:
        raise ValueError("measuring the identity is meaningless")


def _collapse(state: StabTableau, p: PauliString, outcome: int, anti: list[int]) -> StabTableau:
    gens = list(state.generators)
    first = anti[0]
    for i in anti[1:]:
        gens[i] = pauli_mul(gens[i], gens[first])
    gens[first] = p if outcome == 1 else p.negate()
    return StabTableau(tuple(gens))


def measure_pauli(state: StabTableau, p: PauliString, rng: np.random.Generator):
    """Measure Hermitian ``p``; returns ``(outcome, post-measurement state)``.

    If ``p`` commutes with every generator then ``+p`` or ``-p`` is in the
    group and the outcome is fixed.  Otherwise the outcome is a fair coin:
    one anticommuting generator is replaced by ``+-p`` and the others are
    multiplied by it so they commute with ``p``.
    """
    _check_observable(state, p)
    anti = [i for i, g in enumerate(state.generators) if not commutes(g, p)]
    if not anti:
        return state.sign_of(p), state
    outcome = 1 if rng.integers(2) == 0 else -1
    return outcome, _collapse(state, p, outcome, anti)


def project(state: StabTableau, p: PauliString, outcome: int) -> tuple[float, Optional[StabTableau]]:
    """Forced outcome: ``(probability, post-state)``, post-state ``None`` if impossible."""
    _check_observable(state, p)
    if outcome not in (1, -1):
        raise ValueError("outcome must be +1 or -1")
    anti = [i for i, g in enumerate(state.generators) if not commutes(g, p)]
    if not anti:
        return (1.0, state) if state.sign_of(p) == outcome else (0.0, None)
    return 0.5, _collapse(state, p, outcome, anti)


def enumerate_stabilizer_states(n: int) -> tuple[int, list[StabTableau]]:
    """All ``n``-qubit stabilizer states, found by closing ``|0...0>`` under
    every Pauli measurement with every possible outcome.

    Returns the count and the states in canonical form, sorted by key.
    """
    if not 1 <= n <= MAX_ENUMERATION_QUBITS:
        raise ValueError(f"enumeration supports 1 <= n <= {MAX_ENUMERATION_QUBITS}")
    paulis = list(all_paulis(n))
    start = StabTableau.zero(n).canonical()
    seen = {start.key(): start}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        for p in paulis:
            anti = [i for i, g in enumerate(state.generators) if not commutes(g, p)]
            if not anti:
                continue
            for outcome in (1, -1):
                nxt = _collapse(state, p, outcome, anti).canonical()
                key = nxt.key()
                if key not in seen:
                    seen[key] = nxt
                    queue.append(nxt)
    states = [seen[k] for k in sorted(seen)]
    return len(states), states
