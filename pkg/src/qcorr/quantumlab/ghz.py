"""GHZ-type constraint, local-hidden-variable brute force and the S3 walk."""

from __future__ import annotations

import itertools

import numpy as np


def ghz_constraint(b, s) -> bool:
    """``i^(b1+b2+b3) (-1)^(s1+s2+s3) == 1`` with the ``b`` sum taken over the integers."""
    b = [int(v) for v in b]
    s = [int(v) for v in s]
    if len(b) != 3 or len(s) != 3 or any(v not in (0, 1) for v in b + s):
        raise ValueError("b and s must be three bits each")
    value = (1j ** (sum(b) % 4)) * (-1) ** sum(s)
    return value == 1


def contexts() -> list[tuple]:
    """The four input triples with ``b1 ^ b2 ^ b3 = 0``."""
    return [b for b in itertools.product((0, 1), repeat=3) if sum(b) % 2 == 0]


def lhv_scores(signed: bool = True) -> dict:
    """Contexts won by each deterministic local strategy.

    A strategy is three local response functions ``s_i = f_i(b_i)``, each
    a pair ``(f_i(0), f_i(1))``, so there are ``4^3 = 64`` of them.  With
    ``signed=False`` every context only asks for even output parity.
    """
    scores = {}
    funcs = list(itertools.product((0, 1), repeat=2))
    for strategy in itertools.product(funcs, repeat=3):
        won = 0
        for b in contexts():
            s = [strategy[i][b[i]] for i in range(3)]
            ok = ghz_constraint(b, s) if signed else sum(s) % 2 == 0
            won += ok
        scores[strategy] = won
    return scores


def lhv_bruteforce(signed: bool = True) -> int:
    """Largest number of the four contexts any local strategy satisfies."""
    return max(lhv_scores(signed).values())


# random walk on S3 induced by H S^a H S^b; rows are "from", row-vector convention
S3_TRANSFER = np.array(
    [
        [1, 1, 1, 0, 1, 0],
        [1, 1, 1, 0, 1, 0],
        [1, 0, 1, 1, 0, 1],
        [1, 0, 1, 1, 0, 1],
        [0, 1, 0, 1, 1, 1],
        [0, 1, 0, 1, 1, 1],
    ],
    dtype=np.float64,
) / 4.0
S3_TARGETS = (0, 1)


def s3_walk_prob(k: int) -> float:
    """Mass on the identity and ``(12)`` after ``k`` steps from the identity."""
    if k < 0:
        raise ValueError("k must be non-negative")
    v = np.zeros(6)
    v[0] = 1.0
    for _ in range(k):
        v = v @ S3_TRANSFER
    return float(v[list(S3_TARGETS)].sum())


def s3_walk_closed_form(k: int) -> float:
    return 1.0 / 3.0 + (2.0 / 3.0) * 4.0**-k
