import numpy as np
import pytest

from ampvbic.amp import (AmpState, Posterior, amp_decouple, amp_init,
                         flatten_obs, obs_slice, unflatten_obs)
from ampvbic.errors import DimensionMismatch, NonPositiveNoise
from ampvbic.model import build_alphabet


class TestInit:

    def test_flat_prior(self):
        state, post = amp_init(2, 2, 1, 1.0)
        assert np.array_equal(post.That, [[1.0], [1.0]])
        assert not post.Xhat.any()
        for arr in (state.S_mat, state.P_mat, state.Tp, state.Ts, state.Tau):
            assert not arr.any()

    def test_zero_energy(self):
        _, post = amp_init(3, 2, 4, 0.0)
        assert not post.That.any()

    def test_bad_dims(self):
        with pytest.raises(DimensionMismatch):
            amp_init(0, 2, 1, 1.0)


class TestDecouple:

    def test_scalar_hand_example(self):
        # One user, one chip, one slot: A=1, xhat=0, that=1, s=0, y=2,
        # noise 1.  Hand evaluation of the six update lines gives
        # tp=1, p=0, ts=0.5, s=1, tau=2, r=2.
        a = np.array([[1.0 + 0.0j]])
        y = np.array([[2.0 + 0.0j]])
        state, post = amp_init(1, 1, 1, 1.0)
        pseudo, new_state = amp_decouple(a, y, post, state, 1.0)
        assert new_state.Tp[0, 0] == pytest.approx(1.0, rel=1e-9)
        assert new_state.P_mat[0, 0] == pytest.approx(0.0, abs=1e-12)
        assert new_state.Ts[0, 0] == pytest.approx(0.5, rel=1e-9)
        assert new_state.S_mat[0, 0] == pytest.approx(1.0, rel=1e-9)
        assert pseudo.Tau[0, 0] == pytest.approx(2.0, rel=1e-9)
        assert pseudo.R[0, 0] == pytest.approx(2.0, rel=1e-9)

    def test_variance_sum(self):
        # |A|^2 of a row of ones sums the incoming variances.
        a = np.array([[1.0, 1.0]], dtype=complex)
        y = np.zeros((1, 1), dtype=complex)
        state, post = amp_init(2, 1, 1, 1.0)
        _, new_state = amp_decouple(a, y, post, state, 1.0)
        assert new_state.Tp[0, 0] == pytest.approx(2.0, rel=1e-9)

    def test_noiseless_identity_fixed_point(self):
        # Square identity mixing, vanishing noise, correct posterior means:
        # the pseudo observations equal the truth and stay there (zero
        # residual, so the scaled-residual memory never builds up).
        rng = np.random.default_rng(11)
        alph = build_alphabet("qpsk")
        n = 8
        j = 4
        x = (alph.active_symbols[rng.integers(0, 4, (n, j))]
             * (rng.standard_normal((n, 1)) + 1j * rng.standard_normal((n, 1))))
        a = np.eye(n, dtype=complex)
        state, post = amp_init(n, n, j, alph.E_sym)
        post = Posterior(Xhat=x.copy(), That=post.That)
        for _ in range(10):
            pseudo, state = amp_decouple(a, x.copy(), post, state, 1e-12)
            assert np.max(np.abs(pseudo.R - x)) < 1e-6

    def test_positive_tau(self):
        rng = np.random.default_rng(12)
        a = rng.standard_normal((6, 9)) + 1j * rng.standard_normal((6, 9))
        a[rng.random((6, 9)) < 0.3] = 0.0  # sparse but no all-zero column
        assert np.all(np.abs(a).sum(axis=0) > 0)
        y = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
        state, post = amp_init(9, 6, 3, 1.0)
        pseudo, _ = amp_decouple(a, y, post, state, 0.5)
        assert np.all(pseudo.Tau > 0)
        assert np.all(np.isfinite(pseudo.Tau))

    def test_determinism(self):
        rng = np.random.default_rng(13)
        a = rng.standard_normal((5, 8)) + 1j * rng.standard_normal((5, 8))
        y = rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2))
        out = []
        for _ in range(2):
            state, post = amp_init(8, 5, 2, 1.0)
            pseudo, state = amp_decouple(a, y, post, state, 0.3)
            pseudo, state = amp_decouple(a, y, post, state, 0.3)
            out.append(pseudo)
        assert np.array_equal(out[0].R, out[1].R)
        assert np.array_equal(out[0].Tau, out[1].Tau)

    def test_damping_blends_residual(self):
        rng = np.random.default_rng(14)
        a = rng.standard_normal((4, 4)) + 0j
        y = rng.standard_normal((4, 2)) + 0j
        state, post = amp_init(4, 4, 2, 1.0)
        _, s_full = amp_decouple(a, y, post, state, 1.0, damping=1.0)
        _, s_half = amp_decouple(a, y, post, state, 1.0, damping=0.5)
        assert np.allclose(s_half.S_mat, 0.5 * s_full.S_mat)

    def test_shape_errors(self):
        state, post = amp_init(3, 2, 2, 1.0)
        a = np.zeros((2, 3), dtype=complex)
        with pytest.raises(DimensionMismatch):
            amp_decouple(a, np.zeros((4, 2), dtype=complex), post, state, 1.0)
        with pytest.raises(DimensionMismatch):
            amp_decouple(a, np.zeros((2, 5), dtype=complex), post, state, 1.0)
        with pytest.raises(NonPositiveNoise):
            amp_decouple(a, np.zeros((2, 2), dtype=complex), post, state, 0.0)


class TestFlattening:

    def test_round_trip(self):
        rng = np.random.default_rng(15)
        mat = rng.standard_normal((7, 5)) + 1j * rng.standard_normal((7, 5))
        flat = flatten_obs(mat)
        assert np.array_equal(unflatten_obs(flat, 7, 5), mat)

    def test_index_rule(self):
        # s = j + (m-1)*J in 1-based indexing: user m's block is contiguous.
        m, j = 4, 3
        mat = np.arange(m * j).reshape(m, j)
        flat = flatten_obs(mat)
        for mi in range(m):
            for ji in range(j):
                assert flat[mi * j + ji] == mat[mi, ji]
            assert np.array_equal(flat[obs_slice(mi, j)], mat[mi])

    def test_size_mismatch(self):
        with pytest.raises(DimensionMismatch):
            unflatten_obs(np.zeros(5), 2, 3)
