"""Dense and tensorized discrete Fourier transforms with pinned conventions.

Convention: the forward transform uses kernel exp(+2*pi*i*j*k/M) and no
normalization (matching the characteristic-function sign), the inverse uses
kernel exp(-2*pi*i*j*k/M) with a 1/M factor.  Centered grids are realized
through the modulation identity (multiply by (-1)^j), never by rolling.
"""

from __future__ import annotations

import math
import threading

import numpy as np

from .errors import ConvergenceFailureError, InvalidArgumentError
from .grids import FrequencyGrid, GridSpec, qtt_step
from .tt import TensorTrain, TtOperator, apply_operator, tt_truncate

_DIRECTIONS = ("forward", "inverse")


def _check_direction(direction):
    if direction not in _DIRECTIONS:
        raise InvalidArgumentError(f"direction must be one of {_DIRECTIONS}")


def dense_dft(values, direction: str) -> np.ndarray:
    """Radix-2 DFT under the pinned convention (power-of-two lengths only)."""
    _check_direction(direction)
    values = np.asarray(values, dtype=np.complex128)
    m = values.shape[-1]
    if m < 1 or m & (m - 1):
        raise InvalidArgumentError(f"length {m} is not a power of two")
    if direction == "forward":
        return np.fft.ifft(values) * m
    return np.fft.fft(values) / m


def modulation_qtt(n: int) -> TensorTrain:
    """Rank-1 QTT of (-1)^j; only the least-significant digit contributes."""
    cores = [np.ones((1, 2, 1), dtype=np.complex128) for _ in range(n)]
    cores[-1][0, 1, 0] = -1.0
    return TensorTrain(cores)


# ---------------------------------------------------------------------------
# tensorized transform

def _phase_column_qtt(n: int, i: int, sign: float) -> TensorTrain:
    """Rank-2 diagonal phase over digits: exp(sign*1j*pi*s_i*0.s_{i+1}...s_n).

    Combines the controlled-phase gates between qubit i and all later
    qubits, which commute and can be applied as one factor.
    """
    if not 1 <= i < n:
        raise InvalidArgumentError("phase column needs a later control qubit")
    cores = []
    for k in range(1, n + 1):
        if k < i:
            core = np.zeros((1, 2, 1), dtype=np.complex128)
            core[0, :, 0] = 1.0
        elif k == i:
            # branch on the target digit
            core = np.zeros((1, 2, 2), dtype=np.complex128)
            core[0, 0, 0] = 1.0
            core[0, 1, 1] = 1.0
        else:
            phase = np.exp(sign * 1j * math.pi * 2.0 ** (i - k))
            core = np.zeros((2, 2, 2), dtype=np.complex128)
            core[0, 0, 0] = 1.0
            core[0, 1, 0] = 1.0
            core[1, 0, 1] = 1.0
            core[1, 1, 1] = phase
        cores.append(core)
    # the branch never mixes, so close the final bond with a plain sum
    cores[-1] = cores[-1].sum(axis=2, keepdims=True)
    return TensorTrain(cores)


def _apply_output_phase(op_cores, phase: TensorTrain):
    """Hadamard-multiply an MPO's output index by a diagonal phase TT."""
    out = []
    for w, p in zip(op_cores, phase.cores):
        a, so, si, b = w.shape
        l, _, r = p.shape
        core = np.einsum("lsr,asib->lasirb", p, w)
        out.append(core.reshape(l * a, so, si, r * b))
    return out


_HADAMARD_GATE = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=np.complex128)


def _qft_circuit_mpo(n: int, tol: float = 1e-12) -> TtOperator:
    """MPO of the textbook transform circuit (H plus controlled phases,
    +i kernel, no normalization, output digits bit-reversed)."""
    cores = [np.eye(2, dtype=np.complex128).reshape(1, 2, 2, 1) for _ in range(n)]
    for i in range(1, n + 1):
        cores[i - 1] = np.einsum("st,atib->asib", _HADAMARD_GATE, cores[i - 1])
        if i < n:
            phase = _phase_column_qtt(n, i, +1.0)
            cores = _apply_output_phase(cores, phase)
            cores = _compress_mpo(cores, tol)
    op = TtOperator(cores)
    if op.max_bond > 64:
        raise ConvergenceFailureError(
            f"transform operator did not compress (bond {op.max_bond})")
    return op


def _compress_mpo(cores, tol):
    fused = TensorTrain([c.reshape(c.shape[0], 4, c.shape[3]) for c in cores])
    fused = tt_truncate(fused, tol)
    return [c.reshape(c.shape[0], 2, 2, c.shape[2]) for c in fused.cores]


_operator_cache: dict = {}
_cache_lock = threading.Lock()


def qft_operator(n: int, direction: str, tol: float = 1e-12) -> TtOperator:
    """Transform operator in MPO form, cached per (n, direction).

    Its dense matrix equals the DFT matrix of the pinned convention composed
    with digit-order reversal of the output; callers undo the reversal by
    reversing the core order of the result (see :func:`apply_fourier`).
    """
    _check_direction(direction)
    if n < 1:
        raise InvalidArgumentError("need at least one core")
    key = (n, direction)
    with _cache_lock:
        hit = _operator_cache.get(key)
    if hit is not None:
        return hit
    circuit = _qft_circuit_mpo(n, tol)
    if direction == "forward":
        op = circuit
    else:
        op = circuit.conj().scale(2.0 ** -n)
    with _cache_lock:
        _operator_cache[key] = op
    return op


def apply_fourier(tt: TensorTrain, direction: str, eps: float = 0.0,
                  max_bond: int | None = None) -> TensorTrain:
    """Tensorized DFT matching ``dense_dft`` on the materialized vector.

    The bit reversal built into the circuit operator is undone here by
    reversing the core order, so callers always see natural index order.
    """
    _check_direction(direction)
    if tt.physical_dims != (2,) * tt.n_cores:
        raise InvalidArgumentError("transform requires binary physical dims")
    op = qft_operator(tt.n_cores, direction)
    out = apply_operator(op, tt, eps, max_bond=max_bond)
    return out.reverse()


def dirichlet_kernel_qtt(freq: FrequencyGrid, eps: float = 1e-12) -> TensorTrain:
    """QTT of the cumulative-sum kernel on the padded centered frequency
    grid: the forward transform of the indicator of the first N of 2N
    spatial points, with phases pinned to physical coordinates."""
    n_pad = freq.n_pad
    half = freq.num_modes
    index_grid = GridSpec(0.0, float(2 * half), n_pad)
    step = qtt_step(index_grid, half, "below")
    mod = modulation_qtt(n_pad)
    from .tt import tt_hadamard
    kernel = apply_fourier(tt_hadamard(step, mod), "forward", eps)
    return kernel


def project_lower_half(tt: TensorTrain) -> TensorTrain:
    """Drop the leading digit, keeping the first half of the vector."""
    if tt.n_cores < 2:
        raise InvalidArgumentError("need at least two cores to project")
    head = tt.cores[0][:, 0, :]
    merged = np.tensordot(head, tt.cores[1], axes=(1, 0))
    return TensorTrain([merged] + list(tt.cores[2:]))
