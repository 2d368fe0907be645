"""Mermin-Peres squares among stabilizer groups, and support counting.

A grid is laid out as::

    A    a    Aa
    B    b    Bb
    AB   ab   ABab

with every row multiplying to ``+I``, the first two columns to ``+I`` and
the last column to ``-I``.  No assignment of fixed ``+-1`` values can meet
all six constraints, which is the contextuality witness.
"""

from __future__ import annotations

import math
from typing import Iterator, Optional, Sequence

import numpy as np

from qcorr.quantumlab.pauli import PauliString, commutes, pauli_mul, product
from qcorr.quantumlab.stabilizer import StabTableau

Grid = Sequence[Sequence[PauliString]]
MAX_SEARCH_QUBITS = 4
ROW_SIGNS = (1, 1, 1)
COLUMN_SIGNS = (1, 1, -1)


def _sign_of_identity(p: PauliString) -> Optional[int]:
    if not p.is_identity:
        return None
    return {0: 1, 2: -1}.get(p.phase)


def _check_grid_shape(grid: Grid) -> list[list[PauliString]]:
    rows = [list(r) for r in grid]
    if len(rows) != 3 or any(len(r) != 3 for r in rows):
        raise ValueError("grid must be 3x3")
    n = rows[0][0].n
    if any(p.n != n for r in rows for p in r):
        raise ValueError("all grid entries must act on the same number of qubits")
    return rows


def magic_square_check(grid: Grid) -> bool:
    rows = _check_grid_shape(grid)
    if any(not p.is_hermitian for r in rows for p in r):
        return False
    cols = [[rows[i][j] for i in range(3)] for j in range(3)]
    for line in rows + cols:
        for i in range(3):
            for j in range(i + 1, 3):
                if not commutes(line[i], line[j]):
                    return False
    for line, want in zip(rows + cols, ROW_SIGNS + COLUMN_SIGNS):
        if _sign_of_identity(product(line)) != want:
            return False
    return True


def dense_square_check(grid: Grid) -> bool:
    """Same identities verified on explicit ``2^n x 2^n`` matrices."""
    rows = _check_grid_shape(grid)
    mats = [[p.to_matrix() for p in r] for r in rows]
    dim = mats[0][0].shape[0]
    eye = np.eye(dim)
    for r in mats + [[mats[i][j] for i in range(3)] for j in range(3)]:
        for i in range(3):
            for j in range(i + 1, 3):
                if not np.allclose(r[i] @ r[j], r[j] @ r[i], atol=1e-12):
                    return False
    for i, want in enumerate(ROW_SIGNS):
        if not np.allclose(mats[i][0] @ mats[i][1] @ mats[i][2], want * eye, atol=1e-12):
            return False
    for j, want in enumerate(COLUMN_SIGNS):
        if not np.allclose(mats[0][j] @ mats[1][j] @ mats[2][j], want * eye, atol=1e-12):
            return False
    return all(np.allclose(m, m.conj().T) for r in mats for m in r)


def _nontrivial(state: StabTableau) -> list[PauliString]:
    return [g for g in state.group() if not g.is_identity]


def iter_magic_squares(s1: StabTableau, s2: StabTableau, s3: StabTableau) -> Iterator[list]:
    """Every square with row ``i`` taken from the stabilizer group of ``s_i``.

    ``A, a`` range over the first group and ``B, b`` over the second,
    subject to ``[A,B] = [a,b] = 0`` and ``{A,b} = {a,B} = 0``; the bottom
    row ``AB, ab`` must then lie in the third group.
    """
    n = s1.n
    if s2.n != n or s3.n != n:
        raise ValueError("states must have the same number of qubits")
    if n > MAX_SEARCH_QUBITS:
        raise ValueError(f"exhaustive search supports at most {MAX_SEARCH_QUBITS} qubits")
    g1, g2 = _nontrivial(s1), _nontrivial(s2)
    g3 = set(s3.group())
    for A in g1:
        for a in g1:
            if a == A:
                continue
            Aa = pauli_mul(A, a)
            for B in g2:
                if not commutes(A, B) or commutes(a, B):
                    continue
                AB = pauli_mul(A, B)
                if AB not in g3:
                    continue
                for b in g2:
                    if b == B or commutes(A, b) or not commutes(a, b):
                        continue
                    ab = pauli_mul(a, b)
                    if ab not in g3:
                        continue
                    grid = [[A, a, Aa], [B, b, pauli_mul(B, b)], [AB, ab, pauli_mul(AB, ab)]]
                    if magic_square_check(grid):
                        yield grid


def find_magic_square(s1: StabTableau, s2: StabTableau, s3: StabTableau) -> Optional[list]:
    return next(iter_magic_squares(s1, s2, s3), None)


def grid_labels(grid: Grid) -> list[list[str]]:
    return [[p.label for p in row] for row in grid]


def support_lower_bound(num_states: int, m: int) -> int:
    """Fewest hidden variables able to cover ``num_states`` supports when no
    variable lies in more than ``m`` of them: ``ceil(num_states / m)``."""
    if m < 1:
        raise ValueError("m must be at least 1")
    if num_states < 0:
        raise ValueError("num_states must be non-negative")
    return -(-num_states // m)


def stabilizer_bound_exponents(n: int) -> dict:
    """Exponents (base 2) of the stabilizer counting argument on ``n`` qubits.

    ``|S| ~ 2^(n^2/2)`` states, at most ``m = 2^(n^2/4 + 7n/2)`` sharing a
    hidden variable, hence ``V >= 2^(n^2/4 - 7n/2)``; below exponent 0 the
    bound is the trivial ``V >= 1``.
    """
    states = n * n / 2
    overlap = n * n / 4 + 7 * n / 2
    bound = states - overlap
    return {
        "states": states,
        "overlap": overlap,
        "bound": bound,
        "clamped_bound": max(1, math.ceil(2.0**bound)),
    }
