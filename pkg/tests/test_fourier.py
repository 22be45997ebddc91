"""Transform conventions, the tensorized operator, and the cumulative-sum
kernel against quadratic-cost and direct-summation oracles."""

import numpy as np
import pytest

from qttagg.errors import InvalidArgumentError
from qttagg.fourier import (apply_fourier, dense_dft, dirichlet_kernel_qtt,
                            modulation_qtt, project_lower_half, qft_operator)
from qttagg.grids import FrequencyGrid, GridSpec, qtt_exponential, qtt_one_hot
from qttagg.tt import (tt_from_dense, tt_hadamard, tt_norm, tt_to_dense)

from conftest import naive_dft, random_tt


class TestDenseDft:
    def test_delta_forward_is_flat(self):
        v = np.zeros(16)
        v[0] = 1.0
        assert np.allclose(dense_dft(v, "forward"), 1.0)

    def test_constant_inverse_is_delta(self):
        out = dense_dft(np.ones(16), "inverse")
        want = np.zeros(16)
        want[0] = 1.0
        assert np.allclose(out, want, atol=1e-14)

    def test_matches_naive_oracle(self, rng):
        v = rng.normal(size=256) + 1j * rng.normal(size=256)
        for direction in ("forward", "inverse"):
            got = dense_dft(v, direction)
            assert np.max(np.abs(got - naive_dft(v, direction))) < 1e-10

    def test_roundtrip_identity(self, rng):
        v = rng.normal(size=2**10) + 1j * rng.normal(size=2**10)
        back = dense_dft(dense_dft(v, "forward"), "inverse")
        assert np.max(np.abs(back - v)) < 1e-12 * np.linalg.norm(v)

    def test_non_power_of_two_rejected(self):
        with pytest.raises(InvalidArgumentError):
            dense_dft(np.ones(12), "forward")


class TestQftOperator:
    def test_matches_dft_matrix_n3(self):
        g = GridSpec(0, 8, 3)
        for direction in ("forward", "inverse"):
            cols = [tt_to_dense(apply_fourier(qtt_one_hot(g, j), direction, 1e-13))
                    for j in range(8)]
            got = np.array(cols).T
            want = np.array([naive_dft(np.eye(8)[j], direction)
                             for j in range(8)]).T
            assert np.max(np.abs(got - want)) < 1e-10

    def test_constant_forward_is_delta_at_zero(self):
        from qttagg.grids import qtt_constant
        tt = qtt_constant(GridSpec(0, 1, 6), 1.0)
        out = tt_to_dense(apply_fourier(tt, "forward", 1e-12))
        want = np.zeros(64)
        want[0] = 64.0
        assert np.max(np.abs(out - want)) < 1e-10

    def test_operator_bond_stays_small(self):
        assert qft_operator(10, "forward").max_bond <= 16
        assert qft_operator(14, "inverse").max_bond <= 16


class TestApplyFourier:
    def test_pure_tone_inverse_is_one_hot(self):
        n, m = 8, 37
        g = GridSpec(0.0, 2.0**n, n)   # integer index grid
        tone = qtt_exponential(g, 1.0, 2j * np.pi * m / 2**n)
        out = tt_to_dense(apply_fourier(tone, "inverse", 1e-12))
        want = np.zeros(2**n)
        want[m] = 1.0
        assert np.max(np.abs(out - want)) < 1e-11

    def test_parseval(self, rng):
        tt = random_tt(rng, 8, max_bond=3)
        fwd = apply_fourier(tt, "forward", 1e-12)
        assert tt_norm(fwd) ** 2 == pytest.approx(2**8 * tt_norm(tt) ** 2, rel=1e-10)

    def test_random_tt_matches_dense_pipeline(self, rng):
        tt = random_tt(rng, 10, max_bond=4)
        dense = tt_to_dense(tt)
        for direction in ("forward", "inverse"):
            got = tt_to_dense(apply_fourier(tt, direction, 1e-12))
            want = dense_dft(dense, direction)
            assert np.max(np.abs(got - want)) < 1e-9 * max(1.0, np.max(np.abs(want)))

    def test_forward_then_inverse_identity(self, rng):
        tt = random_tt(rng, 7, max_bond=3)
        back = apply_fourier(apply_fourier(tt, "forward", 1e-12), "inverse", 1e-12)
        err = np.max(np.abs(tt_to_dense(back) - tt_to_dense(tt)))
        assert err < 1e-10 * max(1.0, np.max(np.abs(tt_to_dense(tt))))


class TestDirichletKernel:
    def test_value_at_zero_frequency(self):
        freq = FrequencyGrid.for_spatial(1.0, 6)
        kernel = tt_to_dense(dirichlet_kernel_qtt(freq))
        assert kernel[freq.num_modes] == pytest.approx(64.0, rel=1e-12)

    def test_matches_direct_summation(self):
        freq = FrequencyGrid.for_spatial(1.0, 5)
        N = freq.num_modes
        dx = 1.0 / N
        direct = np.array([np.sum(np.exp(1j * w * np.arange(N) * dx))
                           for w in freq.omegas()])
        got = tt_to_dense(dirichlet_kernel_qtt(freq))
        assert np.max(np.abs(got - direct)) < 1e-10 * N

    def test_inverse_transform_recovers_indicator(self):
        freq = FrequencyGrid.for_spatial(1.0, 6)
        kernel = dirichlet_kernel_qtt(freq)
        back = apply_fourier(kernel, "inverse", 1e-12)
        back = tt_hadamard(back, modulation_qtt(freq.n_pad))
        got = tt_to_dense(back).real
        want = np.zeros(2 * freq.num_modes)
        want[: freq.num_modes] = 1.0
        assert np.max(np.abs(got - want)) < 1e-10

    def test_prefix_sum_property(self, rng):
        """Kernel multiplication in frequency is cumulative summation for a
        mass vector supported on the first half of the padded grid."""
        n = 9
        freq = FrequencyGrid.for_spatial(1.0, n)
        half = freq.num_modes
        pmf = np.zeros(2 * half)
        pmf[:half] = rng.random(half)
        pmf /= pmf.sum()
        mod = (-1.0) ** np.arange(2 * half)
        phi = dense_dft(mod * pmf, "forward")
        kernel = tt_to_dense(dirichlet_kernel_qtt(freq))
        reconstructed = (mod * dense_dft(phi * kernel, "inverse"))[:half].real
        assert np.max(np.abs(reconstructed - np.cumsum(pmf[:half]))) < 1e-10


class TestProjectLowerHalf:
    def test_padded_constant(self):
        from qttagg.grids import qtt_constant
        tt = qtt_constant(GridSpec(0, 1, 7), 2.0)
        out = project_lower_half(tt)
        assert out.n_cores == 6
        assert np.allclose(tt_to_dense(out), 2.0)

    def test_step_at_midpoint_becomes_ones(self):
        from qttagg.grids import qtt_step
        g = GridSpec(0, 1, 7)
        tt = qtt_step(g, 64, "below")
        out = project_lower_half(tt)
        assert np.allclose(tt_to_dense(out).real, 1.0)

    def test_random_tt_first_half(self, rng):
        tt = random_tt(rng, 6)
        got = tt_to_dense(project_lower_half(tt))
        assert np.max(np.abs(got - tt_to_dense(tt)[:32])) < 1e-13
