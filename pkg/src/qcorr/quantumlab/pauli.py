"""Signed Pauli strings with exact phase bookkeeping.

A string is ``i**phase * P_1 (x) ... (x) P_n`` where qubit ``j`` carries
``X`` for ``(x, z) = (1, 0)``, ``Z`` for ``(0, 1)`` and ``Y`` for ``(1, 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

_LETTER = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}
_BITS = {v: k for k, v in _LETTER.items()}
_PHASE_PREFIX = {0: "+", 1: "+i", 2: "-", 3: "-i"}
_DENSE = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


@dataclass(frozen=True)
class PauliString:
    x: tuple
    z: tuple
    phase: int = 0

    def __post_init__(self):
        x = tuple(int(v) & 1 for v in self.x)
        z = tuple(int(v) & 1 for v in self.z)
        if len(x) != len(z):
            raise ValueError("x and z bit vectors differ in length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "phase", int(self.phase) % 4)

    @property
    def n(self) -> int:
        return len(self.x)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Parse labels like ``"XZI"``, ``"-YY"`` or ``"+iZX"``."""
        s = label.strip()
        phase = 0
        if s.startswith("-"):
            phase, s = 2, s[1:]
        elif s.startswith("+"):
            s = s[1:]
        if s.startswith("i"):
            phase, s = phase + 1, s[1:]
        try:
            bits = [_BITS[c] for c in s.upper()]
        except KeyError:
            raise ValueError(f"bad Pauli label {label!r}") from None
        return cls(tuple(b[0] for b in bits), tuple(b[1] for b in bits), phase)

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls((0,) * n, (0,) * n)

    @classmethod
    def single(cls, n: int, qubit: int, letter: str) -> "PauliString":
        x = [0] * n
        z = [0] * n
        x[qubit], z[qubit] = _BITS[letter.upper()]
        return cls(tuple(x), tuple(z))

    @property
    def letters(self) -> str:
        return "".join(_LETTER[b] for b in zip(self.x, self.z))

    @property
    def label(self) -> str:
        return _PHASE_PREFIX[self.phase] + self.letters

    def __str__(self) -> str:
        return self.label

    @property
    def is_hermitian(self) -> bool:
        return self.phase % 2 == 0

    @property
    def is_identity(self) -> bool:
        return not any(self.x) and not any(self.z)

    def negate(self) -> "PauliString":
        return PauliString(self.x, self.z, self.phase + 2)

    def unsigned(self) -> "PauliString":
        return PauliString(self.x, self.z, 0)

    def symplectic(self) -> np.ndarray:
        return np.array(self.x + self.z, dtype=np.uint8)

    def to_matrix(self) -> np.ndarray:
        """Dense ``2^n x 2^n`` matrix; qubit 0 is the most significant factor."""
        mats = [_DENSE[c] for c in self.letters] or [np.eye(1, dtype=np.complex128)]
        return (1j ** self.phase) * reduce(np.kron, mats)

    def __mul__(self, other: "PauliString") -> "PauliString":
        return pauli_mul(self, other)


def _check_sizes(a: PauliString, b: PauliString) -> None:
    if a.n != b.n:
        raise ValueError(f"qubit counts differ: {a.n} vs {b.n}")


def _g(x1: int, z1: int, x2: int, z2: int) -> int:
    """Exponent of ``i`` in ``P(x1,z1) P(x2,z2) = i^g P(x1^x2, z1^z2)``."""
    if x1 == 0 and z1 == 0:
        return 0
    if x1 == 1 and z1 == 1:
        return z2 - x2
    if x1 == 1:
        return z2 * (2 * x2 - 1)
    return x2 * (1 - 2 * z2)


def pauli_mul(a: PauliString, b: PauliString) -> PauliString:
    _check_sizes(a, b)
    phase = a.phase + b.phase
    for x1, z1, x2, z2 in zip(a.x, a.z, b.x, b.z):
        phase += _g(x1, z1, x2, z2)
    x = tuple(p ^ q for p, q in zip(a.x, b.x))
    z = tuple(p ^ q for p, q in zip(a.z, b.z))
    return PauliString(x, z, phase)


def commutes(a: PauliString, b: PauliString) -> bool:
    _check_sizes(a, b)
    s = sum(xa * zb + za * xb for xa, za, xb, zb in zip(a.x, a.z, b.x, b.z))
    return s % 2 == 0


def product(paulis) -> PauliString:
    """Ordered product, left to right."""
    paulis = list(paulis)
    if not paulis:
        raise ValueError("empty product")
    return reduce(pauli_mul, paulis)


def all_paulis(n: int):
    """Every unsigned non-identity string on ``n`` qubits (phase ``+1``)."""
    for code in range(1, 4**n):
        x = tuple((code >> (2 * j)) & 1 for j in range(n))
        z = tuple((code >> (2 * j + 1)) & 1 for j in range(n))
        yield PauliString(x, z)
