"""Basis-enhanced 2-gram model as a unitary-sliced matrix product state.

The model is two unitaries.  ``U_p`` (``k x k``) prepares the bond register
from ``|0>``; its first column is the boundary vector ``b``.  ``U_t``
(``kM x kM``) acts on (visible, bond) with joint index ``m*k + i``; the
visible register enters in symbol 0, so only the first ``k`` columns matter
and they define the slices::

    A[m][i, j] = U_t[m*k + i, j]

Those columns form an isometry, ``sum_m A[m]^dag A[m] = I``, so the MPS is
left-canonical.  The bond register left over after the last site is traced
out, which makes the distribution normalised for every sequence length.

Gradients follow the steepest-ascent convention ``dL/dRe(U) + i dL/dIm(U)``
(twice the Wirtinger derivative with respect to the conjugate).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from qcorr import linalg
from qcorr.data import as_sequences, minibatches

POLISH_EVERY = 100
TRAINED_UNITARY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class BbqcModel:
    k: int
    M: int
    U_p: np.ndarray
    U_t: np.ndarray

    def __post_init__(self):
        k, M = int(self.k), int(self.M)
        if k < 1 or M < 1:
            raise ValueError("k and M must be positive")
        U_p = np.array(self.U_p, dtype=np.complex128)
        U_t = np.array(self.U_t, dtype=np.complex128)
        if U_p.shape != (k, k):
            raise ValueError(f"U_p must be {k}x{k}, got {U_p.shape}")
        if U_t.shape != (k * M, k * M):
            raise ValueError(f"U_t must be {k * M}x{k * M}, got {U_t.shape}")
        for name, u in (("U_p", U_p), ("U_t", U_t)):
            err = linalg.unitarity_error(u)
            if not err < linalg.UNITARY_TOL:
                raise ValueError(f"{name} is not unitary (error {err:.3g})")
        U_p.setflags(write=False)
        U_t.setflags(write=False)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "U_p", U_p)
        object.__setattr__(self, "U_t", U_t)

    @property
    def boundary(self) -> np.ndarray:
        return self.U_p[:, 0]

    @property
    def slices(self) -> np.ndarray:
        """``(M, k, k)`` array of the site matrices ``A[m]``."""
        return self.U_t[:, : self.k].reshape(self.M, self.k, self.k)

    @classmethod
    def from_isometry(cls, w, boundary) -> "BbqcModel":
        """Build a model from a ``kM x k`` isometry and a unit boundary vector."""
        w = linalg.as_matrix(w)
        N, k = w.shape
        b = np.asarray(boundary, dtype=np.complex128).reshape(k, 1)
        return cls(k, N // k, linalg.complete_isometry(b), linalg.complete_isometry(w))

    def to_json(self) -> dict:
        def pairs(u):
            return [[[float(z.real), float(z.imag)] for z in row] for row in u]

        return {"k": self.k, "M": self.M, "U_p": pairs(self.U_p), "U_t": pairs(self.U_t)}

    @classmethod
    def from_json(cls, doc: dict) -> "BbqcModel":
        def mat(rows):
            a = np.asarray(rows, dtype=np.float64)
            return a[..., 0] + 1j * a[..., 1]

        return cls(int(doc["k"]), int(doc["M"]), mat(doc["U_p"]), mat(doc["U_t"]))

    def checkpoint_hash(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def random_bbqc(k: int, M: int, rng: np.random.Generator) -> BbqcModel:
    """Model with independent Haar-random ``U_p`` and ``U_t``."""
    U_p = linalg.haar_random_unitary(k, rng)
    U_t = linalg.haar_random_unitary(k * M, rng)
    return BbqcModel(k, M, U_p, U_t)


def _check_symbols(seqs: np.ndarray, M: int) -> None:
    if seqs.size and (seqs.min() < 0 or seqs.max() >= M):
        raise ValueError(f"symbols must lie in [0, {M})")


def _dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def _trace(a: np.ndarray) -> np.ndarray:
    return np.einsum("...ii->...", a)


def _log_s(b: np.ndarray, A: np.ndarray, seqs: np.ndarray) -> np.ndarray:
    """Log of ``b^dag A^dag...A b`` per row of ``seqs``, with rescaling."""
    K, n = seqs.shape
    k = b.shape[0]
    rho = np.broadcast_to(np.outer(b, b.conj()), (K, k, k)).copy()
    norm0 = float(np.vdot(b, b).real)
    rho /= norm0
    with np.errstate(divide="ignore"):
        logs = np.full(K, np.log(norm0))
        for t in range(n):
            a = A[seqs[:, t]]
            rho = a @ rho @ _dagger(a)
            c = _trace(rho).real
            logs += np.log(c)
            zero = c <= 0.0
            c[zero] = 1.0
            rho /= c[:, None, None]
    return logs


def log_prob_batch(model: BbqcModel, seqs) -> np.ndarray:
    seqs = as_sequences(seqs)
    _check_symbols(seqs, model.M)
    return _log_s(model.boundary, model.slices, seqs)


def log_prob(model: BbqcModel, seq) -> float:
    """Log-probability in nats; ``-inf`` when the sequence has zero probability."""
    return float(log_prob_batch(model, np.asarray(seq)[None, :])[0])


def prob(model: BbqcModel, seq) -> float:
    """Exact ``p(seq)`` by density-matrix propagation, ``O(n k^3)``."""
    seq = np.asarray(seq, dtype=np.int64)
    _check_symbols(seq, model.M)
    b = model.boundary
    A = model.slices
    rho = np.outer(b, b.conj())
    for m in seq:
        rho = A[m] @ rho @ A[m].conj().T
    return float(np.trace(rho).real)


def nll_per_symbol(model: BbqcModel, data) -> float:
    seqs = as_sequences(data)
    return float(-np.mean(log_prob_batch(model, seqs)) / seqs.shape[1])


def unnormalized_loss(U_p: np.ndarray, U_t: np.ndarray, k: int, seqs) -> float:
    """``-(1/K) sum log S(seq)`` for arbitrary (not necessarily unitary) tensors.

    ``S`` is the same contraction as :func:`prob` without any normalisation,
    which is what finite-difference checks of :func:`grad_loss` need.
    """
    seqs = as_sequences(seqs)
    U_t = np.asarray(U_t, dtype=np.complex128)
    M = U_t.shape[0] // k
    A = U_t[:, :k].reshape(M, k, k)
    return float(-np.mean(_log_s(np.asarray(U_p, dtype=np.complex128)[:, 0], A, seqs)))


def _grad_raw(U_p: np.ndarray, U_t: np.ndarray, k: int, seqs: np.ndarray):
    K, n = seqs.shape
    M = U_t.shape[0] // k
    A = U_t[:, :k].reshape(M, k, k)
    b = U_p[:, 0]
    As = A[seqs]  # (K, n, k, k)
    Ad = _dagger(As)

    # normalised left densities: lefts[:, t] is the state entering site t
    lefts = np.empty((K, n, k, k), dtype=np.complex128)
    rho = np.broadcast_to(np.outer(b, b.conj()), (K, k, k)).copy()
    rho /= _trace(rho).real[:, None, None]
    for t in range(n):
        lefts[:, t] = rho
        rho = As[:, t] @ rho @ Ad[:, t]
        c = _trace(rho).real
        if np.any(c <= 0.0):
            raise ValueError("a sequence in the batch has zero probability")
        rho /= c[:, None, None]

    # normalised right environments: rights[:, t] is everything after site t
    rights = np.empty((K, n, k, k), dtype=np.complex128)
    env = np.broadcast_to(np.eye(k, dtype=np.complex128), (K, k, k)).copy()
    for t in range(n - 1, -1, -1):
        rights[:, t] = env
        env = Ad[:, t] @ env @ As[:, t]
        env /= _trace(env).real[:, None, None]

    r = rights @ As @ lefts
    s = np.einsum("ktij,ktij->kt", r, As.conj()).real
    contrib = r / s[:, :, None, None]
    g_A = np.zeros((M, k, k), dtype=np.complex128)
    np.add.at(g_A, seqs.reshape(-1), contrib.reshape(-1, k, k))

    eb = env @ b
    g_b = (eb / np.einsum("i,ki->k", b.conj(), eb).real[:, None]).sum(axis=0)

    g_Ut = np.zeros_like(U_t)
    g_Ut[:, :k] = (-2.0 / K) * g_A.reshape(M * k, k)
    g_Up = np.zeros_like(U_p)
    g_Up[:, 0] = (-2.0 / K) * g_b
    return g_Up, g_Ut


def grad_loss(model: BbqcModel, batch) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of ``L = -(1/K) sum log p(seq)`` for both unitaries.

    Each site's contribution is the environment contraction
    ``F_t A rho_{t-1} / p`` (left densities and right environments are
    cached, rescaled to unit trace); contributions are summed over every
    site holding the same tensor.  The normalisation term is absent since
    ``Z = 1`` identically for unitary parameters.  Columns of ``U_t`` beyond
    the first ``k`` get zero gradient, as only ``U_p``'s first column does.
    """
    seqs = as_sequences(batch)
    if seqs.shape[0] == 0:
        raise ValueError("empty batch")
    _check_symbols(seqs, model.M)
    return _grad_raw(model.U_p, model.U_t, model.k, seqs)


def partition_function(U_p: np.ndarray, U_t: np.ndarray, k: int, n: int) -> float:
    """``Z = sum_seq S(seq)`` via the transfer channel; equals 1 on the manifold."""
    U_t = np.asarray(U_t, dtype=np.complex128)
    M = U_t.shape[0] // k
    A = U_t[:, :k].reshape(M, k, k)
    b = np.asarray(U_p, dtype=np.complex128)[:, 0]
    rho = np.outer(b, b.conj())
    for _ in range(n):
        rho = np.einsum("mij,jl,mkl->ik", A, rho, A.conj())
    return float(np.trace(rho).real)


def partition_gradient(U_p: np.ndarray, U_t: np.ndarray, k: int, n: int):
    """Euclidean gradient of ``Z`` (steepest-ascent convention).

    Debug path for off-manifold parameters: on the unitary manifold its
    Riemannian projection vanishes, which is why :func:`grad_loss` drops it.
    """
    U_p = np.asarray(U_p, dtype=np.complex128)
    U_t = np.asarray(U_t, dtype=np.complex128)
    M = U_t.shape[0] // k
    A = U_t[:, :k].reshape(M, k, k)
    b = U_p[:, 0]

    def forward(rho):
        return np.einsum("mij,jl,mkl->ik", A, rho, A.conj())

    def backward(env):
        return np.einsum("mji,jl,mlk->ik", A.conj(), env, A)

    lefts = [np.outer(b, b.conj())]
    for _ in range(n - 1):
        lefts.append(forward(lefts[-1]))
    envs = [np.eye(k, dtype=np.complex128)]
    for _ in range(n):
        envs.append(backward(envs[-1]))
    # envs[j] = adjoint channel applied j times to the identity
    g_A = np.zeros((M, k, k), dtype=np.complex128)
    for t in range(n):
        g_A += np.einsum("ij,mjl,lk->mik", envs[n - 1 - t], A, lefts[t])
    g_Ut = np.zeros_like(U_t)
    g_Ut[:, :k] = 2.0 * g_A.reshape(M * k, k)
    g_Up = np.zeros_like(U_p)
    g_Up[:, 0] = 2.0 * envs[n] @ b
    return g_Up, g_Ut


def off_manifold_grad(U_p, U_t, k: int, batch):
    """Gradient of ``log Z - (1/K) sum log S`` including the ``Z`` term."""
    seqs = as_sequences(batch)
    n = seqs.shape[1]
    U_p = np.asarray(U_p, dtype=np.complex128)
    U_t = np.asarray(U_t, dtype=np.complex128)
    z = partition_function(U_p, U_t, k, n)
    zp, zt = partition_gradient(U_p, U_t, k, n)
    sp, st = _grad_raw(U_p, U_t, k, seqs)
    return zp / z + sp, zt / z + st


def riemannian_projection(u: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Skew-Hermitian part ``U g^dag - g U^dag`` seen by a unitary update."""
    return u @ g.conj().T - g @ u.conj().T


@dataclass(frozen=True, eq=False)
class OptState:
    v_Up: np.ndarray
    v_Ut: np.ndarray
    alpha: float
    beta: float
    step: int = 0

    @classmethod
    def zeros(cls, model: BbqcModel, alpha: float, beta: float) -> "OptState":
        return cls(np.zeros_like(model.U_p), np.zeros_like(model.U_t), float(alpha), float(beta))


def _rotate(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    # descent along -v on the unitary group: exp(U v^dag - v U^dag) U
    return linalg.expm_skew(u @ v.conj().T - v @ u.conj().T) @ u


def riemann_step(model: BbqcModel, grads, state: OptState) -> tuple[BbqcModel, OptState]:
    """One momentum step on the unitary manifold.

    ``v <- beta v + alpha g`` for each unitary, then
    ``U <- exp(U v^dag - v U^dag) U``.  Every ``POLISH_EVERY`` steps the
    unitaries are re-orthonormalised to stop rounding drift.
    """
    g_p, g_t = (np.asarray(g, dtype=np.complex128) for g in grads)
    if g_p.shape != model.U_p.shape or g_t.shape != model.U_t.shape:
        raise ValueError("gradient shapes do not match the model")
    if state.v_Up.shape != model.U_p.shape or state.v_Ut.shape != model.U_t.shape:
        raise ValueError("optimizer state does not match the model")
    if not (np.all(np.isfinite(g_p)) and np.all(np.isfinite(g_t))):
        raise ValueError("non-finite gradient; aborting training step")
    v_p = state.beta * state.v_Up + state.alpha * g_p
    v_t = state.beta * state.v_Ut + state.alpha * g_t
    U_p = _rotate(model.U_p, v_p)
    U_t = _rotate(model.U_t, v_t)
    step = state.step + 1
    if step % POLISH_EVERY == 0:
        U_p = linalg.polish_unitary(U_p)
        U_t = linalg.polish_unitary(U_t)
    new_state = OptState(v_p, v_t, state.alpha, state.beta, step)
    return BbqcModel(model.k, model.M, U_p, U_t), new_state


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 1e-2
    beta: float = 0.5
    epochs: int = 150
    batch_size: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if not 0 <= self.beta < 1:
            raise ValueError("beta must lie in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")


def train_bbqc(
    init: BbqcModel,
    data,
    config: TrainConfig,
    callback: Optional[Callable[[int, BbqcModel], None]] = None,
) -> tuple[BbqcModel, np.ndarray]:
    """Mini-batch Riemannian descent; returns the model and per-epoch train NLL.

    The history holds the per-symbol stochastic KL estimate on the full
    training set after each epoch.  ``callback(epoch, model)`` runs after
    the history entry is recorded.
    """
    model = init
    state = OptState.zeros(init, config.alpha, config.beta)
    seqs = as_sequences(data)
    _check_symbols(seqs, model.M)
    history = np.empty(config.epochs)
    for epoch in range(config.epochs):
        for batch in minibatches(seqs, config.batch_size, config.seed, epoch):
            model, state = riemann_step(model, grad_loss(model, batch), state)
        history[epoch] = nll_per_symbol(model, seqs)
        if callback is not None:
            callback(epoch, model)
    drift = max(linalg.unitarity_error(model.U_p), linalg.unitarity_error(model.U_t))
    if drift >= TRAINED_UNITARY_TOL:
        raise RuntimeError(f"unitarity drifted to {drift:.3g} during training")
    return model, history


def sample_bbqc_batch(model: BbqcModel, count: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` independent ancestral samples of length ``n``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    A = model.slices
    psi = np.broadcast_to(model.boundary, (count, model.k)).copy()
    out = np.empty((count, n), dtype=np.int64)
    for t in range(n):
        amps = np.einsum("mij,cj->cmi", A, psi)
        p = np.sum(np.abs(amps) ** 2, axis=2)
        cdf = np.cumsum(p, axis=1)
        u = rng.random(count) * cdf[:, -1]
        m = np.minimum((cdf < u[:, None]).sum(axis=1), model.M - 1)
        out[:, t] = m
        nxt = amps[np.arange(count), m]
        psi = nxt / np.linalg.norm(nxt, axis=1, keepdims=True)
    return out


def sample_bbqc(model: BbqcModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """One ancestral sample; exact because the slices are left-canonical."""
    return sample_bbqc_batch(model, 1, n, rng)[0]


def exact_distribution(model: BbqcModel, n: int) -> np.ndarray:
    """All ``M**n`` probabilities, shape ``(M,)*n``, by density propagation."""
    A = model.slices
    b = model.boundary
    rho = np.outer(b, b.conj())[None]
    for _ in range(n):
        rho = np.einsum("mij,sjl,mkl->smik", A, rho, A.conj()).reshape(-1, model.k, model.k)
    return _trace(rho).real.reshape((model.M,) * n)


def circuit_distribution(model: BbqcModel, n: int) -> np.ndarray:
    """Born probabilities from a full statevector run of the circuit.

    The bond register starts in ``|0>`` and receives ``U_p``; each site
    appends a visible register in ``|0>`` and applies the whole ``U_t`` to
    (visible, bond).  Visible registers are read in the computational basis
    and the final bond register is summed over.
    """
    k, M = model.k, model.M
    psi = model.U_p @ np.eye(k, dtype=np.complex128)[:, 0]
    for _ in range(n):
        padded = np.zeros(psi.shape[:-1] + (M * k,), dtype=np.complex128)
        padded[..., :k] = psi
        psi = (padded @ model.U_t.T).reshape(psi.shape[:-1] + (M, k))
    return np.sum(np.abs(psi) ** 2, axis=-1)


def bigram_marginals(model: BbqcModel, n: int) -> np.ndarray:
    """Exact ``p(x_t = a, x_{t+1} = b)`` for ``t = 0..n-2``; shape ``(n-1, M, M)``."""
    A = model.slices
    b = model.boundary

    def channel(rho):
        return np.einsum("mij,jl,mkl->ik", A, rho, A.conj())

    rho = np.outer(b, b.conj())
    out = np.empty((n - 1, model.M, model.M))
    for t in range(n - 1):
        first = np.einsum("mij,jl,mkl->mik", A, rho, A.conj())
        second = np.einsum("bij,ajl,bkl->abik", A, first, A.conj())
        out[t] = _trace(second).real
        rho = channel(rho)
    return out
