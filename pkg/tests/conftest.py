"""Shared fixtures and independent oracles for the test suite."""

import numpy as np
import pytest

from qttagg.tt import TensorTrain


def dense_contract(tt: TensorTrain) -> np.ndarray:
    """Independent full contraction used as the oracle for TT operations."""
    full = tt.cores[0]
    for core in tt.cores[1:]:
        full = np.einsum("...a,apb->...pb", full, core)
    return full.reshape(-1)


def naive_dft(values, direction: str) -> np.ndarray:
    """Quadratic-cost reference transform under the pinned convention."""
    values = np.asarray(values, dtype=np.complex128)
    m = values.size
    j = np.arange(m)
    sign = +1.0 if direction == "forward" else -1.0
    kernel = np.exp(sign * 2j * np.pi * np.outer(j, j) / m)
    out = kernel @ values
    return out if direction == "forward" else out / m


def random_tt(rng, n, max_bond=3, complex_valued=True) -> TensorTrain:
    """Random strict TT with valid boundary bonds."""
    bonds = [1] + [int(rng.integers(1, max_bond + 1)) for _ in range(n - 1)] + [1]
    cores = []
    for k in range(n):
        shape = (bonds[k], 2, bonds[k + 1])
        core = rng.normal(size=shape)
        if complex_valued:
            core = core + 1j * rng.normal(size=shape)
        cores.append(core)
    return TensorTrain(cores)


def binomial_cdf(D, p, xs, weight=None):
    """Closed-form CDF of a binomial scaled by the per-component weight."""
    from math import comb
    weight = 1.0 / D if weight is None else weight
    atoms = np.arange(D + 1) * weight
    pmf = np.array([comb(D, m) * p**m * (1 - p) ** (D - m) for m in range(D + 1)])
    xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    out = np.zeros(xs.shape)
    for a, q in zip(atoms, pmf):
        out += np.where(xs >= a - 1e-12, q, 0.0)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
