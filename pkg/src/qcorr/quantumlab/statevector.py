"""Dense statevector simulation for small exact oracles.

Amplitudes are stored as a ``(2,)*n`` tensor; axis ``j`` is qubit ``j``,
so flattening gives the usual big-endian ordering (qubit 0 most
significant), matching :meth:`PauliString.to_matrix`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_QUBITS = 14
NORM_TOL = 1e-12

H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2.0)
S = np.diag([1.0, 1j]).astype(np.complex128)
X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
Z = np.diag([1.0, -1.0]).astype(np.complex128)


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=np.complex128)
        n = int(round(np.log2(a.size))) if a.size else 0
        if a.size != 1 << n or n < 1:
            raise ValueError("amplitude count must be a positive power of two")
        if n > MAX_QUBITS:
            raise ValueError(f"at most {MAX_QUBITS} qubits are supported")
        if abs(np.linalg.norm(a) - 1.0) > NORM_TOL:
            raise ValueError("state is not normalised")
        a = a.reshape((2,) * n)
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def n(self) -> int:
        return self.amplitudes.ndim

    @classmethod
    def zero(cls, n: int) -> "StateVector":
        if not 1 <= n <= MAX_QUBITS:
            raise ValueError(f"need 1 <= n <= {MAX_QUBITS}")
        a = np.zeros(1 << n, dtype=np.complex128)
        a[0] = 1.0
        return cls(a)

    def flat(self) -> np.ndarray:
        return self.amplitudes.reshape(-1)

    def apply(self, gate: np.ndarray, qubit: int) -> "StateVector":
        out = np.tensordot(gate, self.amplitudes, axes=([1], [qubit]))
        return StateVector(np.moveaxis(out, 0, qubit))

    def apply_controlled(self, gate: np.ndarray, control: int, target: int) -> "StateVector":
        if control == target:
            raise ValueError("control and target must differ")
        a = np.array(self.amplitudes)
        idx = [slice(None)] * self.n
        idx[control] = 1
        sub = a[tuple(idx)]
        t = target if target < control else target - 1
        sub = np.moveaxis(np.tensordot(gate, sub, axes=([1], [t])), 0, t)
        a[tuple(idx)] = sub
        return StateVector(a)

    def apply_cz(self, a: int, b: int) -> "StateVector":
        return self.apply_controlled(Z, a, b)

    def probabilities(self) -> np.ndarray:
        """Computational-basis Born probabilities, shape ``(2,)*n``."""
        return np.abs(self.amplitudes) ** 2

    def expectation(self, matrix: np.ndarray) -> complex:
        psi = self.flat()
        return complex(np.vdot(psi, matrix @ psi))

    def project(self, matrix: np.ndarray) -> tuple[float, "StateVector | None"]:
        """Apply a projector; returns its probability and the renormalised state."""
        phi = matrix @ self.flat()
        p = float(np.vdot(phi, phi).real)
        if p < 1e-14:
            return 0.0, None
        return p, StateVector(phi / np.sqrt(p))
