import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcorr import hmm
from qcorr.quantumlab import cluster_circuit_state


def path_sum(model, seq):
    total = 0.0
    for path in itertools.product(range(model.h), repeat=len(seq)):
        p = model.prior[path[0]] * model.emis[path[0], seq[0]]
        for t in range(1, len(seq)):
            p *= model.trans[path[t - 1], path[t]] * model.emis[path[t], seq[t]]
        total += p
    return total


def all_seqs(M, n):
    return np.array(list(itertools.product(range(M), repeat=n)))


class TestForward:
    def test_single_state(self):
        m = hmm.Hmm([1.0], [[1.0]], [[0.25, 0.75]])
        assert hmm.forward_loglik(m, [0, 1]) == pytest.approx(np.log(0.25 * 0.75), abs=1e-15)

    def test_uniform(self):
        m = hmm.uniform_hmm(3, 4)
        seq = [0, 3, 2, 2, 1]
        assert hmm.forward_loglik(m, seq) == pytest.approx(-5 * np.log(4), abs=1e-12)

    def test_path_sum_oracle(self):
        rng = np.random.default_rng(0)
        m = hmm.random_hmm(3, 2, rng)
        for seq in rng.integers(0, 2, (5, 6)):
            assert abs(np.exp(hmm.forward_loglik(m, seq)) - path_sum(m, seq)) < 1e-12

    def test_long_sequence_finite(self):
        m = hmm.random_hmm(2, 3, np.random.default_rng(1))
        seq = hmm.sample_hmm(m, 2000, np.random.default_rng(2))
        assert np.isfinite(hmm.forward_loglik(m, seq))

    def test_impossible_sequence(self):
        m = hmm.Hmm([1.0], [[1.0]], [[1.0, 0.0]])
        assert hmm.forward_loglik(m, [0, 1]) == -np.inf

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            hmm.forward_loglik(hmm.uniform_hmm(2, 2), [0, 2])

    def test_normalization(self):
        m = hmm.random_hmm(3, 3, np.random.default_rng(4))
        assert abs(hmm.exact_distribution(m, 5).sum() - 1) < 1e-12


def explicit_counts(model, seq):
    """Unscaled forward-backward with explicit loops."""
    n, h = len(seq), model.h
    a = np.zeros((n, h))
    b = np.zeros((n, h))
    for i in range(h):
        a[0, i] = model.prior[i] * model.emis[i, seq[0]]
    for t in range(1, n):
        for j in range(h):
            a[t, j] = sum(a[t - 1, i] * model.trans[i, j] for i in range(h)) * model.emis[j, seq[t]]
    b[n - 1] = 1.0
    for t in range(n - 2, -1, -1):
        for i in range(h):
            b[t, i] = sum(model.trans[i, j] * model.emis[j, seq[t + 1]] * b[t + 1, j] for j in range(h))
    z = a[-1].sum()
    gamma = a * b / z
    xi = np.zeros((h, h))
    for t in range(n - 1):
        for i in range(h):
            for j in range(h):
                xi[i, j] += a[t, i] * model.trans[i, j] * model.emis[j, seq[t + 1]] * b[t + 1, j] / z
    emit = np.zeros((h, model.M))
    for t in range(n):
        emit[:, seq[t]] += gamma[t]
    prior = gamma[0]
    return prior, xi / xi.sum(axis=1, keepdims=True), emit / emit.sum(axis=1, keepdims=True)


class TestBaumWelch:
    def test_matches_explicit_oracle(self):
        m = hmm.Hmm([0.6, 0.4], [[0.7, 0.3], [0.2, 0.8]], [[0.9, 0.1], [0.3, 0.7]])
        seq = [0, 1, 0, 1]
        new = hmm.baum_welch_step(m, np.array([seq]))
        prior, trans, emis = explicit_counts(m, seq)
        assert np.max(np.abs(new.prior - prior)) < 1e-12
        assert np.max(np.abs(new.trans - trans)) < 1e-12
        assert np.max(np.abs(new.emis - emis)) < 1e-12

    def test_fixed_point(self):
        seq = np.array([[0, 1, 1, 0, 1]])
        m = hmm.Hmm([1.0], [[1.0]], [[0.4, 0.6]])
        new = hmm.baum_welch_step(m, seq)
        assert np.max(np.abs(new.emis - m.emis)) < 1e-9
        # uninformative emissions at the empirical frequencies, stationary chain
        m2 = hmm.Hmm([6 / 13, 7 / 13], [[0.3, 0.7], [0.6, 0.4]], [[0.4, 0.6], [0.4, 0.6]])
        new2 = hmm.baum_welch_step(m2, seq)
        for a, b in ((new2.prior, m2.prior), (new2.trans, m2.trans), (new2.emis, m2.emis)):
            assert np.max(np.abs(a - b)) < 1e-9

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 4), st.integers(2, 4), st.integers(1, 9), st.integers(0, 2**32 - 1))
    def test_monotone_and_stochastic(self, h, M, n, seed):
        rng = np.random.default_rng(seed)
        m = hmm.random_hmm(h, M, rng)
        batch = rng.integers(0, M, (int(rng.integers(1, 12)), n))
        before = hmm.loglik_batch(m, batch).sum()
        new = hmm.baum_welch_step(m, batch)
        assert hmm.loglik_batch(new, batch).sum() - before >= -1e-9
        for a in (new.prior[None], new.trans, new.emis):
            assert np.all(np.abs(a.sum(axis=1) - 1) < 1e-10)

    def test_unused_state_keeps_rows(self):
        m = hmm.Hmm([1.0, 0.0], [[1.0, 0.0], [0.5, 0.5]], [[0.5, 0.5], [0.1, 0.9]])
        new = hmm.baum_welch_step(m, np.array([[0, 1, 1]]))
        assert np.array_equal(new.trans[1], m.trans[1])
        assert np.array_equal(new.emis[1], m.emis[1])

    def test_empty_batch(self):
        with pytest.raises(ValueError):
            hmm.baum_welch_step(hmm.uniform_hmm(2, 2), np.zeros((0, 3), dtype=int))


class TestTrain:
    def test_one_epoch_is_one_step(self):
        rng = np.random.default_rng(5)
        m = hmm.random_hmm(3, 2, rng)
        data = rng.integers(0, 2, (20, 7))
        trained, hist = hmm.train_hmm(m, data, 1)
        step = hmm.baum_welch_step(m, data)
        assert np.array_equal(trained.trans, step.trans)
        assert np.array_equal(trained.emis, step.emis)
        assert len(hist) == 1

    def test_history_monotone(self):
        rng = np.random.default_rng(6)
        data = rng.integers(0, 3, (50, 10))
        _, hist = hmm.train_hmm(hmm.random_hmm(3, 3, rng), data, 40)
        assert len(hist) == 40
        assert np.all(np.diff(hist) >= -1e-9)

    def test_rejects_zero_epochs(self):
        with pytest.raises(ValueError):
            hmm.train_hmm(hmm.uniform_hmm(2, 2), np.zeros((1, 2), dtype=int), 0)

    def test_recovers_generator_entropy_rate(self):
        gen = hmm.Hmm([0.5, 0.5], [[0.9, 0.1], [0.2, 0.8]], [[0.85, 0.15], [0.1, 0.9]])
        rng = np.random.default_rng(7)
        data = hmm.sample_hmm_batch(gen, 10_000, 16, rng)
        # entropy rate from one long Monte Carlo path
        long = hmm.sample_hmm(gen, 400_000, np.random.default_rng(8))
        rate = -hmm.forward_loglik(gen, long) / len(long)
        best = min(
            hmm.nll_per_symbol(hmm.train_hmm(hmm.random_hmm(2, 2, np.random.default_rng(s)), data, 80)[0], data)
            for s in range(3)
        )
        assert abs(best - rate) < 0.02


class TestSampling:
    def test_deterministic_chain(self):
        m = hmm.Hmm([0, 1.0, 0], [[0, 1.0, 0], [0, 0, 1.0], [1.0, 0, 0]], np.eye(3))
        assert hmm.sample_hmm(m, 7, np.random.default_rng(0)).tolist() == [1, 2, 0, 1, 2, 0, 1]

    def test_empirical_matches_exact(self):
        m = hmm.random_hmm(3, 3, np.random.default_rng(9))
        s = hmm.sample_hmm_batch(m, 1_000_000, 2, np.random.default_rng(10))
        emp = np.bincount(s[:, 0] * 3 + s[:, 1], minlength=9) / len(s)
        assert np.abs(emp - hmm.exact_distribution(m, 2).reshape(-1)).sum() < 0.01

    def test_same_seed(self):
        m = hmm.random_hmm(2, 4, np.random.default_rng(1))
        a = hmm.sample_hmm(m, 30, np.random.default_rng(3))
        b = hmm.sample_hmm(m, 30, np.random.default_rng(3))
        assert np.array_equal(a, b)


class TestKGram:
    def test_k2_identification(self):
        km = hmm.random_kgram(2, 3, np.random.default_rng(0))
        h = hmm.kgram_to_hmm(km)
        assert h.h == 3
        assert np.array_equal(h.trans, km.cond)
        assert np.array_equal(h.prior, km.initial)

    def test_k3_exhaustive(self):
        km = hmm.random_kgram(3, 2, np.random.default_rng(1))
        h = hmm.kgram_to_hmm(km)
        for seq in all_seqs(2, 5):
            assert abs(np.exp(hmm.forward_loglik(h, seq)) - hmm.kgram_prob(km, seq)) < 1e-12

    @pytest.mark.parametrize("k", [2, 3, 4])
    def test_distribution_preserved(self, k):
        rng = np.random.default_rng(k)
        km = hmm.random_kgram(k, 2, rng)
        h = hmm.kgram_to_hmm(km)
        for n in range(k, 9):
            seqs = all_seqs(2, n)
            hp = np.exp(hmm.loglik_batch(h, seqs))
            kp = np.array([hmm.kgram_prob(km, s) for s in seqs])
            assert np.max(np.abs(hp - kp)) < 1e-12

    def test_uniform(self):
        h = hmm.kgram_to_hmm(hmm.uniform_kgram(3, 2))
        assert np.allclose(hmm.exact_distribution(h, 6), 1 / 64, atol=1e-15)
        assert hmm.kgram_prob(hmm.uniform_kgram(2, 2), [0, 1, 1, 0]) == pytest.approx(1 / 16)

    def test_normalization(self):
        km = hmm.random_kgram(3, 2, np.random.default_rng(3))
        total = sum(hmm.kgram_prob(km, s) for s in all_seqs(2, 8))
        assert abs(total - 1) < 1e-10

    def test_short_sequence(self):
        with pytest.raises(ValueError):
            hmm.kgram_prob(hmm.uniform_kgram(3, 2), [0, 1])

    def test_state_overflow(self):
        with pytest.raises(ValueError):
            hmm.kgram_to_hmm(hmm.uniform_kgram(9, 5))

    def test_validation(self):
        with pytest.raises(ValueError):
            hmm.KGram(np.array([0.5, 0.5]), np.array([[0.5, 0.6], [0.5, 0.5]]))


def random_iohmm(h, X, Y, rng):
    out = rng.dirichlet(np.ones(Y), size=(h, X))
    trans = rng.dirichlet(np.ones(h), size=(X, Y, h))
    return hmm.IoHmm(rng.dirichlet(np.ones(h)), out, trans)


class TestIoHmm:
    def test_single_site(self):
        m = hmm.IoHmm([1.0], [[[0.3, 0.7], [0.9, 0.1]]], np.ones((2, 2, 1, 1)))
        assert hmm.io_hmm_prob(m, [1], [0]) == pytest.approx(0.9)

    def test_normalization(self):
        m = random_iohmm(3, 2, 3, np.random.default_rng(0))
        xs = [1, 0, 1, 1]
        total = sum(hmm.io_hmm_prob(m, xs, ys) for ys in itertools.product(range(3), repeat=4))
        assert abs(total - 1) < 1e-12

    def test_path_sum(self):
        rng = np.random.default_rng(1)
        m = random_iohmm(2, 2, 2, rng)
        xs, ys = [0, 1, 1, 0], [1, 1, 0, 0]
        total = 0.0
        for path in itertools.product(range(2), repeat=4):
            p = m.prior[path[0]]
            for t in range(4):
                p *= m.out_prob[path[t], xs[t], ys[t]]
                if t < 3:
                    p *= m.trans[xs[t], ys[t], path[t], path[t + 1]]
            total += p
        assert abs(hmm.io_hmm_prob(m, xs, ys) - total) < 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            hmm.io_hmm_prob(random_iohmm(2, 2, 2, np.random.default_rng(0)), [0, 1], [0])


class TestClusterMachine:
    def setup_method(self):
        self.m = hmm.cluster_io_hmm()
        self.idx = {lab: i for i, lab in enumerate(self.m.labels)}

    def test_six_states(self):
        assert self.m.h == 6
        assert set(self.m.labels) == {"0", "1", "+", "-", "+i", "-i"}

    def test_eigenstate_measurement(self):
        assert self.m.final_out_prob[self.idx["+"], 0, 0] == pytest.approx(1.0, abs=1e-15)

    def test_unbiased_basis(self):
        assert self.m.final_out_prob[self.idx["0"], 0] == pytest.approx([0.5, 0.5], abs=1e-15)

    def test_bulk_outcomes_uniform(self):
        assert np.allclose(self.m.out_prob, 0.5, atol=1e-15)

    def test_transitions_deterministic(self):
        assert np.all((self.m.trans == 0) | (self.m.trans == 1))

    @pytest.mark.parametrize("pairs", [1, 2, 3, 4, 5])
    def test_joint_matches_statevector(self, pairs):
        exact = cluster_circuit_state(pairs).probabilities()
        model = np.zeros_like(exact)
        for bits in itertools.product((0, 1), repeat=2 * pairs):
            b, s = bits[0::2], bits[1::2]
            model[bits] = 2.0**-pairs * hmm.io_hmm_prob(self.m, b, s)
        assert 0.5 * np.abs(model - exact).sum() < 1e-12


def test_json_round_trip():
    m = hmm.random_hmm(3, 4, np.random.default_rng(0))
    back = hmm.Hmm.from_json(json.loads(json.dumps(m.to_json())))
    assert np.array_equal(back.trans, m.trans)
    assert np.array_equal(back.emis, m.emis)
    assert np.array_equal(back.prior, m.prior)


def test_rejects_non_stochastic():
    with pytest.raises(ValueError):
        hmm.Hmm([0.5, 0.5], [[0.5, 0.5], [0.5, 0.4]], [[1.0], [1.0]])
    with pytest.raises(ValueError):
        hmm.Hmm([1.5, -0.5], [[0.5, 0.5], [0.5, 0.5]], [[1.0], [1.0]])
