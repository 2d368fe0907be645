"""Exact distribution of the measured cluster-state circuit.

Each pair ``j`` owns two qubits: a basis qubit ``2j`` prepared by ``H|0>``
whose readout is the random bit ``b_j``, and a chain qubit ``2j+1`` in
``|+>``.  Neighbouring chain qubits are joined by CZ, each basis qubit
controls an ``S`` on its chain qubit, and every chain qubit then gets an
``H`` before all qubits are read in the computational basis.  The chain
outcome ``s_j`` is therefore an ``X`` measurement when ``b_j = 0`` and a
``S^dag X S = -Y`` measurement when ``b_j = 1``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from qcorr.quantumlab.ghz import ghz_constraint
from qcorr.quantumlab.statevector import MAX_QUBITS, H, S, StateVector

SUPPORT_THRESHOLD = 1e-12


@dataclass(frozen=True, eq=False)
class ClusterDistribution:
    """``conditional`` has shape ``(2,)*6`` over ``(b1,s1,b2,s2,b3,s3)``;
    ``joint`` has shape ``(2,)*(2*pairs)`` over all pairs, unconditioned."""

    pairs: int
    signal_positions: tuple
    ancilla_outcome: int
    conditional: np.ndarray
    joint: np.ndarray


def cluster_circuit_state(pairs: int) -> StateVector:
    if pairs < 1:
        raise ValueError("need at least one pair")
    if 2 * pairs > MAX_QUBITS:
        raise ValueError(f"{2 * pairs} qubits exceeds the {MAX_QUBITS}-qubit simulator limit")
    psi = StateVector.zero(2 * pairs)
    for q in range(2 * pairs):
        psi = psi.apply(H, q)
    for j in range(pairs - 1):
        psi = psi.apply_cz(2 * j + 1, 2 * j + 3)
    for j in range(pairs):
        psi = psi.apply_controlled(S, 2 * j, 2 * j + 1)
        psi = psi.apply(H, 2 * j + 1)
    return psi


def check_signal_positions(pairs: int, signal_positions) -> tuple:
    pos = tuple(int(p) for p in signal_positions)
    if len(pos) != 3 or len(set(pos)) != 3:
        raise ValueError("need exactly three distinct signal positions")
    if list(pos) != sorted(pos):
        raise ValueError("signal positions must be increasing")
    if pos[0] < 0 or pos[-1] >= pairs:
        raise ValueError(f"signal positions must lie in [0, {pairs})")
    if (pos[1] - pos[0]) % 2 or (pos[2] - pos[1]) % 2:
        raise ValueError("signal positions must differ by even amounts (odd gap)")
    if pos[0] % 2 or (pairs - 1 - pos[2]) % 2:
        raise ValueError("ancilla runs before the first and after the last signal must have even length")
    return pos


def cluster_distribution(pairs: int, signal_positions=(0, 2, 4), ancilla_outcome: int = 0) -> ClusterDistribution:
    """Signal distribution with every ancilla pair postselected on
    ``b = 0`` and ``s = ancilla_outcome``.

    Consecutive signal positions must differ by an even amount, and the
    ancilla runs at both ends must have even length; only then does the
    outcome-0 postselection leave the signal sites in the GHZ-type frame.
    Postselecting on outcome 1 applies Pauli byproducts, so the support then
    obeys a sign-flipped relation for some contexts.
    """
    pos = check_signal_positions(pairs, signal_positions)
    if ancilla_outcome not in (0, 1):
        raise ValueError("ancilla_outcome must be 0 or 1")
    joint = cluster_circuit_state(pairs).probabilities()
    index = []
    for j in range(pairs):
        if j in pos:
            index.extend([slice(None), slice(None)])
        else:
            index.extend([0, ancilla_outcome])
    cond = joint[tuple(index)]
    total = cond.sum()
    if total <= 0:
        raise ValueError("postselected event has zero probability")
    return ClusterDistribution(pairs, pos, ancilla_outcome, cond / total, joint)


def ghz_support_violations(conditional: np.ndarray, threshold: float = SUPPORT_THRESHOLD) -> list:
    """Even-parity contexts where support and the GHZ constraint disagree.

    Returns ``(b, s)`` tuples for which ``q > threshold`` differs from the
    constraint; an empty list means the support is exactly the allowed set.
    """
    bad = []
    for b in itertools.product((0, 1), repeat=3):
        if sum(b) % 2:
            continue
        for s in itertools.product((0, 1), repeat=3):
            q = conditional[b[0], s[0], b[1], s[1], b[2], s[2]]
            if (q > threshold) != ghz_constraint(b, s):
                bad.append((b, s))
    return bad


def valid_layouts(pairs: int) -> list[tuple]:
    """Every admissible signal placement in ``pairs`` pairs."""
    out = []
    for p in itertools.combinations(range(pairs), 3):
        try:
            out.append(check_signal_positions(pairs, p))
        except ValueError:
            pass
    return out
