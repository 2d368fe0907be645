"""Classical baselines: stationary HMMs, input-driven HMMs and k-gram models.

Conventions are row-stochastic throughout: ``trans[i, j] = P(next=j | cur=i)``
and ``emis[i, m] = P(symbol=m | state=i)``.  The first symbol is emitted
from the prior, so ``p(x) = sum prior[z1] emis[z1,x1] trans[z1,z2] ...``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from qcorr.data import as_sequences

STOCHASTIC_TOL = 1e-10
MAX_KGRAM_STATES = 1 << 16


def _validate_stochastic(name: str, a: np.ndarray, tol: float = STOCHASTIC_TOL) -> None:
    if not np.all(np.isfinite(a)) or np.any(a < 0):
        raise ValueError(f"{name} has negative or non-finite entries")
    if not np.all(np.abs(a.sum(axis=-1) - 1.0) <= tol):
        raise ValueError(f"{name} rows do not sum to 1")


def _frozen(a, dtype=np.float64) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Hmm:
    prior: np.ndarray
    trans: np.ndarray
    emis: np.ndarray

    def __post_init__(self):
        prior, trans, emis = _frozen(self.prior), _frozen(self.trans), _frozen(self.emis)
        h = prior.shape[0]
        if prior.ndim != 1 or trans.shape != (h, h) or emis.ndim != 2 or emis.shape[0] != h:
            raise ValueError("inconsistent HMM shapes")
        if emis.shape[1] < 1:
            raise ValueError("alphabet must be nonempty")
        for name, a in (("prior", prior), ("trans", trans), ("emis", emis)):
            _validate_stochastic(name, a)
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "trans", trans)
        object.__setattr__(self, "emis", emis)

    @property
    def h(self) -> int:
        return self.prior.shape[0]

    @property
    def M(self) -> int:
        return self.emis.shape[1]

    def to_json(self) -> dict:
        return {
            "h": self.h,
            "M": self.M,
            "prior": self.prior.tolist(),
            "trans": self.trans.tolist(),
            "emis": self.emis.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Hmm":
        model = cls(doc["prior"], doc["trans"], doc["emis"])
        if model.h != doc.get("h", model.h) or model.M != doc.get("M", model.M):
            raise ValueError("declared sizes do not match the arrays")
        return model


def random_hmm(h: int, M: int, rng: np.random.Generator) -> Hmm:
    """Every row drawn from a flat Dirichlet."""
    return Hmm(
        rng.dirichlet(np.ones(h)),
        rng.dirichlet(np.ones(h), size=h),
        rng.dirichlet(np.ones(M), size=h),
    )


def uniform_hmm(h: int, M: int) -> Hmm:
    return Hmm(np.full(h, 1.0 / h), np.full((h, h), 1.0 / h), np.full((h, M), 1.0 / M))


def _check_symbols(seqs: np.ndarray, M: int) -> None:
    if seqs.size and (seqs.min() < 0 or seqs.max() >= M):
        raise ValueError(f"symbols must lie in [0, {M})")


def _forward(model: Hmm, seqs: np.ndarray):
    """Scaled forward pass over a batch; returns (alphas, scales)."""
    K, n = seqs.shape
    E = model.emis.T  # (M, h)
    alphas = np.empty((K, n, model.h))
    scales = np.empty((K, n))
    a = model.prior * E[seqs[:, 0]]
    for t in range(n):
        if t:
            a = (a @ model.trans) * E[seqs[:, t]]
        c = a.sum(axis=1)
        scales[:, t] = c
        c = np.where(c > 0, c, 1.0)
        a = a / c[:, None]
        alphas[:, t] = a
    return alphas, scales


def loglik_batch(model: Hmm, seqs) -> np.ndarray:
    """Per-sequence log-likelihoods (nats); ``-inf`` for impossible sequences."""
    seqs = as_sequences(seqs)
    _check_symbols(seqs, model.M)
    _, scales = _forward(model, seqs)
    with np.errstate(divide="ignore"):
        return np.log(scales).sum(axis=1)


def forward_loglik(model: Hmm, seq) -> float:
    return float(loglik_batch(model, np.asarray(seq)[None, :])[0])


def nll_per_symbol(model: Hmm, data) -> float:
    seqs = as_sequences(data)
    return float(-np.mean(loglik_batch(model, seqs)) / seqs.shape[1])


def _expected_counts(model: Hmm, seqs: np.ndarray):
    K, n = seqs.shape
    alphas, scales = _forward(model, seqs)
    if np.any(scales <= 0):
        raise ValueError("a sequence in the batch has zero probability")
    E = model.emis.T
    betas = np.empty_like(alphas)
    b = np.ones((K, model.h))
    for t in range(n - 1, -1, -1):
        betas[:, t] = b
        b = ((b * E[seqs[:, t]]) @ model.trans.T) / scales[:, t, None]
    gamma = alphas * betas  # (K, n, h), each row sums to 1
    xi = np.zeros((model.h, model.h))
    for t in range(n - 1):
        w = betas[:, t + 1] * E[seqs[:, t + 1]] / scales[:, t + 1, None]
        xi += alphas[:, t].T @ w
    xi *= model.trans
    emit = np.zeros((model.h, model.M))
    for m in range(model.M):
        emit[:, m] = gamma[seqs == m].sum(axis=0)
    return gamma[:, 0].sum(axis=0), xi, emit


def _normalize_rows(counts: np.ndarray, old: np.ndarray) -> np.ndarray:
    tot = counts.sum(axis=-1, keepdims=True)
    out = np.where(tot > 0, counts / np.where(tot > 0, tot, 1.0), old)
    return out


def baum_welch_step(model: Hmm, batch) -> Hmm:
    """One EM update with expected counts summed over every time position.

    A state with zero expected occupancy keeps its previous rows, so the
    update stays well defined and the likelihood still cannot decrease.
    """
    seqs = as_sequences(batch)
    if seqs.shape[0] == 0:
        raise ValueError("empty batch")
    _check_symbols(seqs, model.M)
    first, xi, emit = _expected_counts(model, seqs)
    prior = first / first.sum()
    return Hmm(prior, _normalize_rows(xi, model.trans), _normalize_rows(emit, model.emis))


def train_hmm(init: Hmm, data, epochs: int) -> tuple[Hmm, np.ndarray]:
    """Full-batch Baum-Welch; ``history[e]`` is the total log-likelihood after epoch ``e``."""
    if epochs < 1:
        raise ValueError("epochs must be at least 1")
    seqs = as_sequences(data)
    model = init
    history = np.empty(epochs)
    for e in range(epochs):
        model = baum_welch_step(model, seqs)
        history[e] = loglik_batch(model, seqs).sum()
    return model, history


def _draw(cdf_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    idx = (cdf_rows < u[:, None] * cdf_rows[:, -1:]).sum(axis=1)
    return np.minimum(idx, cdf_rows.shape[1] - 1)


def sample_hmm_batch(model: Hmm, count: int, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be at least 1")
    tcdf = np.cumsum(model.trans, axis=1)
    ecdf = np.cumsum(model.emis, axis=1)
    out = np.empty((count, n), dtype=np.int64)
    z = _draw(np.broadcast_to(np.cumsum(model.prior), (count, model.h)), rng.random(count))
    for t in range(n):
        if t:
            z = _draw(tcdf[z], rng.random(count))
        out[:, t] = _draw(ecdf[z], rng.random(count))
    return out


def sample_hmm(model: Hmm, n: int, rng: np.random.Generator) -> np.ndarray:
    """Ancestral sample of length ``n``."""
    return sample_hmm_batch(model, 1, n, rng)[0]


def exact_distribution(model: Hmm, n: int) -> np.ndarray:
    """All ``M**n`` sequence probabilities, shape ``(M,)*n``."""
    seqs = np.array(list(itertools.product(range(model.M), repeat=n)), dtype=np.int64)
    return np.exp(loglik_batch(model, seqs)).reshape((model.M,) * n)


# ----------------------------------------------------------------- k-grams


@dataclass(frozen=True, eq=False)
class KGram:
    """Order-``k`` model: each symbol conditions on the previous ``k-1``.

    ``initial`` is the joint law of the first ``k-1`` symbols, shape
    ``(L,)*(k-1)``; ``cond[c_1..c_{k-1}, x]`` is ``p(x | c_1..c_{k-1})``,
    shape ``(L,)*k``, with the context in chronological order.
    """

    initial: np.ndarray
    cond: np.ndarray

    def __post_init__(self):
        initial, cond = _frozen(self.initial), _frozen(self.cond)
        k = cond.ndim
        if k < 2:
            raise ValueError("k must be at least 2")
        L = cond.shape[0]
        if cond.shape != (L,) * k or initial.shape != (L,) * (k - 1):
            raise ValueError("inconsistent k-gram shapes")
        _validate_stochastic("initial", initial.reshape(1, -1))
        _validate_stochastic("cond", cond)
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "cond", cond)

    @property
    def k(self) -> int:
        return self.cond.ndim

    @property
    def L(self) -> int:
        return self.cond.shape[0]


def random_kgram(k: int, L: int, rng: np.random.Generator) -> KGram:
    initial = rng.dirichlet(np.ones(L ** (k - 1))).reshape((L,) * (k - 1))
    cond = rng.dirichlet(np.ones(L), size=L ** (k - 1)).reshape((L,) * k)
    return KGram(initial, cond)


def uniform_kgram(k: int, L: int) -> KGram:
    return KGram(np.full((L,) * (k - 1), float(L) ** (1 - k)), np.full((L,) * k, 1.0 / L))


def kgram_prob(model: KGram, seq) -> float:
    seq = tuple(int(s) for s in seq)
    k = model.k
    if len(seq) < k:
        raise ValueError(f"sequence must have length at least k = {k}")
    if min(seq) < 0 or max(seq) >= model.L:
        raise ValueError("symbol out of range")
    p = float(model.initial[seq[: k - 1]])
    for t in range(k - 1, len(seq)):
        p *= float(model.cond[seq[t - k + 1 : t + 1]])
    return p


def kgram_to_hmm(model: KGram) -> Hmm:
    """Exact HMM with one hidden state per window of ``k-1`` consecutive symbols.

    At site ``t`` the hidden state is ``(x_t, ..., x_{t+k-2})`` and it emits
    ``x_t`` deterministically; a transition appends ``x_{t+k-1}`` drawn from
    the conditional and drops the oldest symbol.  Windows are flattened in
    row-major order, so for ``k = 2`` the transition matrix is ``cond``.
    """
    k, L = model.k, model.L
    h = L ** (k - 1)
    if h > MAX_KGRAM_STATES:
        raise ValueError(f"L^(k-1) = {h} hidden states exceeds the limit {MAX_KGRAM_STATES}")
    cond = model.cond.reshape(h, L)
    trans = np.zeros((h, h))
    states = np.arange(h)
    shifted = (states % (h // L)) * L  # drop the oldest symbol
    for x in range(L):
        trans[states, shifted + x] = cond[:, x]
    emis = np.zeros((h, L))
    emis[states, states // (h // L)] = 1.0
    return Hmm(model.initial.reshape(h), trans, emis)


# ------------------------------------------------------- input-driven HMMs


@dataclass(frozen=True, eq=False)
class IoHmm:
    """Input-driven HMM: ``out_prob[l, x, y]`` and ``trans[x, y, i, j]``.

    At each site the hidden state ``l`` answers input ``x`` with output
    ``y`` and then moves according to ``trans[x, y]``.  ``final_out_prob``,
    when given, replaces ``out_prob`` at the last site: a process whose
    answers depend on how many sites follow cannot be written with one
    shared emission table.
    """

    prior: np.ndarray
    out_prob: np.ndarray
    trans: np.ndarray
    final_out_prob: Optional[np.ndarray] = None
    labels: Optional[tuple] = None

    def __post_init__(self):
        prior, out, trans = _frozen(self.prior), _frozen(self.out_prob), _frozen(self.trans)
        h = prior.shape[0]
        if out.ndim != 3 or out.shape[0] != h:
            raise ValueError("out_prob must have shape (h, X, Y)")
        X, Y = out.shape[1:]
        if trans.shape != (X, Y, h, h):
            raise ValueError("trans must have shape (X, Y, h, h)")
        _validate_stochastic("prior", prior)
        _validate_stochastic("out_prob", out)
        _validate_stochastic("trans", trans)
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "out_prob", out)
        object.__setattr__(self, "trans", trans)
        if self.final_out_prob is not None:
            fin = _frozen(self.final_out_prob)
            if fin.shape != out.shape:
                raise ValueError("final_out_prob must match out_prob in shape")
            _validate_stochastic("final_out_prob", fin)
            object.__setattr__(self, "final_out_prob", fin)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != h:
                raise ValueError("one label per hidden state")
            object.__setattr__(self, "labels", labels)

    @property
    def h(self) -> int:
        return self.prior.shape[0]

    @property
    def X(self) -> int:
        return self.out_prob.shape[1]

    @property
    def Y(self) -> int:
        return self.out_prob.shape[2]


def io_hmm_prob(model: IoHmm, inputs: Sequence[int], outputs: Sequence[int]) -> float:
    """``p(outputs | inputs)`` by forward recursion over hidden paths."""
    xs = [int(v) for v in inputs]
    ys = [int(v) for v in outputs]
    if len(xs) != len(ys):
        raise ValueError("inputs and outputs must have equal length")
    if not xs:
        return 1.0
    if min(xs) < 0 or max(xs) >= model.X or min(ys) < 0 or max(ys) >= model.Y:
        raise ValueError("input or output symbol out of range")
    a = model.prior.copy()
    last = len(xs) - 1
    for t, (x, y) in enumerate(zip(xs, ys)):
        table = model.final_out_prob if (t == last and model.final_out_prob is not None) else model.out_prob
        a = a * table[:, x, y]
        if t < last:
            a = a @ model.trans[x, y]
    return float(a.sum())


# single-qubit stabilizer states, the hidden alphabet of the cluster machine
_R = 1.0 / np.sqrt(2.0)
CLUSTER_LABELS = ("0", "1", "+", "-", "+i", "-i")
_CLUSTER_VECTORS = np.array(
    [[1, 0], [0, 1], [_R, _R], [_R, -_R], [_R, 1j * _R], [_R, -1j * _R]], dtype=np.complex128
)
_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) * _R
_S = np.diag([1.0, 1j])


def _identify(psi: np.ndarray) -> int:
    psi = psi / np.linalg.norm(psi)
    overlaps = np.abs(_CLUSTER_VECTORS.conj() @ psi) ** 2
    j = int(np.argmax(overlaps))
    if abs(overlaps[j] - 1.0) > 1e-12:
        raise AssertionError("carrier left the stabilizer-state alphabet")
    return j


def cluster_io_hmm() -> IoHmm:
    """Six-state input-driven HMM for the measured CZ-chain cluster state.

    The hidden state is the carrier qubit's single-qubit stabilizer state.
    Input ``x`` picks the X (``x = 0``) or Y-type (``x = 1``) measurement
    ``S^dag^x X S^x`` on the current site, realised as ``S^x`` then ``H``
    then a Z readout with result ``y``.  Before the readout the site is
    entangled with the next one by CZ; measuring it teleports
    ``H Z^y S^x psi`` onto the next carrier.  Every bulk outcome is
    therefore uniform, while the last site has no successor and answers
    with the Born rule of ``psi`` itself (``final_out_prob``).

    All tables are computed from the 2x2 matrices above, not typed in.
    """
    h = len(CLUSTER_LABELS)
    out = np.zeros((h, 2, 2))
    fin = np.zeros((h, 2, 2))
    trans = np.zeros((2, 2, h, h))
    zero_one = np.eye(2, dtype=np.complex128)
    for i, psi in enumerate(_CLUSTER_VECTORS):
        for x in range(2):
            frame = _H @ np.linalg.matrix_power(_S, x)
            for y in range(2):
                # terminal: plain projective measurement of psi
                fin[i, x, y] = abs(np.vdot(zero_one[y], frame @ psi)) ** 2
                # bulk: the CZ-entangled pair |psi>|+> -> CZ, measure site, keep carrier
                pair = np.kron(psi, np.array([_R, _R]))
                pair = np.diag([1, 1, 1, -1]).astype(np.complex128) @ pair
                pair = np.kron(frame, np.eye(2)) @ pair
                carrier = pair.reshape(2, 2)[y]
                pr = float(np.vdot(carrier, carrier).real)
                out[i, x, y] = pr
                nxt = _identify(carrier)
                trans[x, y, i, nxt] = 1.0
    prior = np.zeros(h)
    prior[CLUSTER_LABELS.index("+")] = 1.0
    return IoHmm(prior, out, trans, final_out_prob=fin, labels=CLUSTER_LABELS)
