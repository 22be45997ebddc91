"""Binary grid encodings and exact/spectral QTT constructors.

Grids are half-open: n cores encode the 2^n points a + (b-a) * sum_i s_i 2^-i
with s_1 the most significant digit, covering [a, b - dx].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailureError, InvalidArgumentError, ResourceLimitError
from .tt import (TensorTrain, digits_of_index, tt_add, tt_hadamard,
                 tt_scale, tt_truncate)


@dataclass(frozen=True)
class GridSpec:
    """Equispaced binary grid on [a, b) with 2^n points, big-endian digits."""

    a: float
    b: float
    n: int

    def __post_init__(self):
        if not self.b > self.a:
            raise InvalidArgumentError(f"need b > a, got [{self.a}, {self.b})")
        if self.n < 1:
            raise InvalidArgumentError("need at least one core")

    @property
    def num_points(self) -> int:
        return 2**self.n

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def dx(self) -> float:
        return (self.b - self.a) / self.num_points

    def point(self, j: int) -> float:
        if not 0 <= j < self.num_points:
            raise InvalidArgumentError(f"index {j} out of range")
        return self.a + j * self.dx

    def points(self, cap: int = 2**24) -> np.ndarray:
        if self.num_points > cap:
            raise ResourceLimitError(f"{self.num_points} points exceed cap {cap}")
        return self.a + self.dx * np.arange(self.num_points)

    def lower_half(self) -> "GridSpec":
        return GridSpec(self.a, 0.5 * (self.a + self.b), self.n - 1)

    def upper_half(self) -> "GridSpec":
        return GridSpec(0.5 * (self.a + self.b), self.b, self.n - 1)


def index_to_point(grid: GridSpec, digits) -> float:
    """Grid point of a big-endian digit string."""
    if len(digits) != grid.n:
        raise InvalidArgumentError(f"expected {grid.n} digits")
    acc = 0.0
    for i, s in enumerate(digits, start=1):
        s = int(s)
        if s not in (0, 1):
            raise InvalidArgumentError(f"digit {s} is not binary")
        acc += s * 2.0**-i
    return grid.a + (grid.b - grid.a) * acc


@dataclass(frozen=True)
class FrequencyGrid:
    """Zero-padded centered frequency grid [-omega_max, omega_max) with
    2^n_pad points; the midpoint index maps to frequency zero."""

    omega_max: float
    n_pad: int

    def __post_init__(self):
        if self.omega_max <= 0:
            raise InvalidArgumentError("cutoff must be positive")
        if self.n_pad < 2:
            raise InvalidArgumentError("padded grid needs at least two cores")

    @classmethod
    def for_spatial(cls, length: float, n: int) -> "FrequencyGrid":
        """Padded grid matching a spatial interval of the given length with
        2^n points: cutoff pi/dx and twice the mode count."""
        if length <= 0:
            raise InvalidArgumentError("length must be positive")
        dx = length / 2**n
        return cls(math.pi / dx, n + 1)

    @property
    def num_modes(self) -> int:
        """Unpadded mode count N; the padded grid holds 2N samples."""
        return 2**(self.n_pad - 1)

    @property
    def delta_omega(self) -> float:
        return self.omega_max / self.num_modes

    @property
    def grid(self) -> GridSpec:
        return GridSpec(-self.omega_max, self.omega_max, self.n_pad)

    def omegas(self, cap: int = 2**24) -> np.ndarray:
        return self.grid.points(cap)


# ---------------------------------------------------------------------------
# exact constructors

def _exponential_factors(grid: GridSpec, lam: complex):
    """Per-digit factors for exp(lam * x) anchored to avoid overflow.

    Anchoring at ``a`` gives digit factors exp(lam*(b-a)*2^-i) which blow up
    when Re(lam*(b-a)) > 0; in that case the product is anchored at the top
    grid point instead, making every factor a decay.
    """
    lam = complex(lam)
    span = grid.b - grid.a
    if (lam * span).real <= 0:
        prefactor = np.exp(lam * grid.a)
        factors = [np.array([1.0, np.exp(lam * span * 2.0**-i)])
                   for i in range(1, grid.n + 1)]
    else:
        top = grid.b - grid.dx
        prefactor = np.exp(lam * top)
        factors = [np.array([np.exp(-lam * span * 2.0**-i), 1.0])
                   for i in range(1, grid.n + 1)]
    return prefactor, factors


def qtt_exponential(grid: GridSpec, c: complex, lam: complex) -> TensorTrain:
    """Rank-1 QTT with entries c * exp(lam * x) on the grid points."""
    prefactor, factors = _exponential_factors(grid, lam)
    cores = [f.reshape(1, 2, 1).astype(np.complex128) for f in factors]
    cores[0] = cores[0] * (complex(c) * prefactor)
    return TensorTrain(cores)


def qtt_constant(grid: GridSpec, c: complex) -> TensorTrain:
    return qtt_exponential(grid, c, 0.0)


def qtt_sum_of_exponentials(grid: GridSpec, coeffs, rates) -> TensorTrain:
    """QTT with entries sum_k c_k exp(lam_k x); raw bond equals the number
    of terms (diagonal construction), truncation is the caller's call."""
    coeffs = np.asarray(coeffs, dtype=np.complex128).reshape(-1)
    rates = np.asarray(rates, dtype=np.complex128).reshape(-1)
    if coeffs.size != rates.size or coeffs.size == 0:
        raise InvalidArgumentError("need matching, nonempty coeffs and rates")
    K = coeffs.size
    if K == 1:
        return qtt_exponential(grid, coeffs[0], rates[0])
    n = grid.n
    per_term = []
    for c, lam in zip(coeffs, rates):
        prefactor, factors = _exponential_factors(grid, lam)
        factors[0] = factors[0] * (c * prefactor)
        per_term.append(factors)
    cores = []
    first = np.zeros((1, 2, K), dtype=np.complex128)
    for k in range(K):
        first[0, :, k] = per_term[k][0]
    cores.append(first)
    for i in range(1, n - 1):
        mid = np.zeros((K, 2, K), dtype=np.complex128)
        for k in range(K):
            mid[k, :, k] = per_term[k][i]
        cores.append(mid)
    if n > 1:
        last = np.zeros((K, 2, 1), dtype=np.complex128)
        for k in range(K):
            last[k, :, 0] = per_term[k][n - 1]
        cores.append(last)
    else:
        # single-core grid: collapse the sum outright
        vals = np.zeros((1, 2, 1), dtype=np.complex128)
        for k in range(K):
            vals[0, :, 0] += per_term[k][0]
        return TensorTrain([vals])
    return TensorTrain(cores)


def qtt_step(grid: GridSpec, j0: int, sense: str = "at_or_above") -> TensorTrain:
    """Indicator of grid indices j >= j0 ("at_or_above") or j < j0 ("below").

    Exact rank-2 comparator construction; j0 may equal 2^n (all-zeros /
    all-ones indicator).
    """
    n = grid.n
    N = grid.num_points
    if not 0 <= j0 <= N:
        raise InvalidArgumentError(f"threshold index {j0} out of [0, {N}]")
    if sense not in ("at_or_above", "below"):
        raise InvalidArgumentError(f"unknown sense {sense!r}")
    if j0 == 0:
        value = 1.0 if sense == "at_or_above" else 0.0
        return qtt_constant(grid, value)
    if j0 == N:
        value = 0.0 if sense == "at_or_above" else 1.0
        return qtt_constant(grid, value)
    target = digits_of_index(j0, n)
    # two automaton states: "equal so far" and "already decided"
    cores = []
    for k in range(n):
        t = target[k]
        core = np.zeros((2, 2, 2), dtype=np.complex128)
        for s in (0, 1):
            if sense == "at_or_above":
                decided = s > t
            else:
                decided = s < t
            if s == t:
                core[0, s, 0] = 1.0  # stay undecided
            elif decided:
                core[0, s, 1] = 1.0
            core[1, s, 1] = 1.0  # decided stays decided
        cores.append(core)
    cores[0] = cores[0][:1]
    closer = np.array([1.0, 1.0]) if sense == "at_or_above" else np.array([0.0, 1.0])
    cores[-1] = np.einsum("lsr,r->ls", cores[-1], closer).reshape(-1, 2, 1)
    return TensorTrain(cores)


def qtt_one_hot(grid: GridSpec, j: int) -> TensorTrain:
    """Rank-1 indicator of the single grid index j."""
    digits = digits_of_index(j, grid.n)
    cores = []
    for d in digits:
        core = np.zeros((1, 2, 1), dtype=np.complex128)
        core[0, d, 0] = 1.0
        cores.append(core)
    return TensorTrain(cores)


def qtt_linear(grid: GridSpec) -> TensorTrain:
    """Rank-2 QTT of the coordinate itself, entries x_j."""
    n = grid.n
    span = grid.b - grid.a

    def contrib(i):
        return np.array([0.0, span * 2.0**-i])

    if n == 1:
        core = (grid.a + contrib(1)).reshape(1, 2, 1)
        return TensorTrain([core.astype(np.complex128)])
    cores = []
    first = np.zeros((1, 2, 2), dtype=np.complex128)
    first[0, :, 0] = 1.0
    first[0, :, 1] = grid.a + contrib(1)
    cores.append(first)
    for i in range(2, n):
        mid = np.zeros((2, 2, 2), dtype=np.complex128)
        mid[0, :, 0] = 1.0
        mid[0, :, 1] = contrib(i)
        mid[1, :, 1] = 1.0
        cores.append(mid)
    last = np.zeros((2, 2, 1), dtype=np.complex128)
    last[0, :, 0] = contrib(n)
    last[1, :, 0] = 1.0
    cores.append(last)
    return TensorTrain(cores)


# ---------------------------------------------------------------------------
# Chebyshev construction for smooth functions

def chebyshev_coefficients(f, a: float, b: float, order: int) -> np.ndarray:
    """Coefficients of the Chebyshev interpolant of degree ``order`` on
    [a, b], via first-kind nodes.  ``f`` must accept an ndarray."""
    m = order + 1
    theta = (np.arange(m) + 0.5) * math.pi / m
    nodes = np.cos(theta)
    x = 0.5 * (a + b) + 0.5 * (b - a) * nodes
    vals = np.asarray(f(x), dtype=np.complex128)
    k = np.arange(m)
    # c_j = (2 - delta_j0)/m * sum_k f(x_k) cos(j theta_k)
    coeffs = (2.0 / m) * (np.cos(np.outer(k, theta)) @ vals)
    coeffs[0] *= 0.5
    return coeffs


def qtt_chebyshev(grid: GridSpec, f, max_order: int = 128,
                  eps: float = 1e-12) -> TensorTrain:
    """QTT of a smooth black-box function via an adaptive Chebyshev
    expansion evaluated with Clenshaw recurrences on the coordinate QTT.

    ``f`` is called on ndarrays of Chebyshev nodes (a single call per trial
    order, so no concurrency demands are placed on it).  Raises
    :class:`ConvergenceFailureError` when the trailing coefficients have not
    decayed below eps by ``max_order``.
    """
    if max_order < 1:
        raise InvalidArgumentError("max_order must be at least 1")
    order = min(16, max_order)
    coeffs = None
    while True:
        cand = chebyshev_coefficients(f, grid.a, grid.b, order)
        scale = np.max(np.abs(cand))
        if scale == 0.0:
            coeffs = cand[:1]
            break
        tail = np.abs(cand[-2:]) if cand.size >= 2 else np.abs(cand)
        if np.all(tail <= eps * scale):
            coeffs = cand
            break
        if order >= max_order:
            raise ConvergenceFailureError(
                f"Chebyshev coefficients not below {eps:g} by order {max_order}",
                achieved=float(np.max(tail) / scale))
        order = min(2 * order, max_order)

    # drop negligible trailing coefficients before the Clenshaw pass
    scale = float(np.max(np.abs(coeffs)))
    keep = len(coeffs)
    while keep > 1 and abs(coeffs[keep - 1]) <= 0.25 * eps * scale:
        keep -= 1
    coeffs = coeffs[:keep]

    # Clenshaw on the affine coordinate t(x), grid points -1 + 2j/N
    t = qtt_linear(GridSpec(-1.0, 1.0, grid.n))
    step_eps = eps / 10.0
    ones = qtt_constant(grid, 1.0)
    b1 = None
    b2 = None
    for c in coeffs[:0:-1]:
        term = tt_scale(ones, c)
        if b1 is not None:
            prod = tt_scale(tt_hadamard(t, b1), 2.0)
            term = tt_add(term, prod)
        if b2 is not None:
            term = tt_add(term, tt_scale(b2, -1.0))
        b2 = b1
        b1 = tt_truncate(term, step_eps)
    result = tt_scale(ones, coeffs[0])
    if b1 is not None:
        result = tt_add(result, tt_hadamard(t, b1))
    if b2 is not None:
        result = tt_add(result, tt_scale(b2, -1.0))
    return tt_truncate(result, step_eps)


def qtt_piecewise_halves(neg: TensorTrain, pos: TensorTrain) -> TensorTrain:
    """Assemble an n-core QTT whose leading digit selects between two
    (n-1)-core halves; entries match each branch exactly."""
    if neg.n_cores != pos.n_cores:
        raise InvalidArgumentError(
            f"halves disagree on core count: {neg.n_cores} vs {pos.n_cores}")
    if neg.physical_dims != pos.physical_dims:
        raise InvalidArgumentError("halves disagree on physical dims")
    first = np.zeros((1, 2, 2), dtype=np.complex128)
    first[0, 0, 0] = 1.0
    first[0, 1, 1] = 1.0
    cores = [first]
    n_half = neg.n_cores
    for k in range(n_half):
        ca, cb = neg.cores[k], pos.cores[k]
        la, p, ra = ca.shape
        lb, _, rb = cb.shape
        if k == n_half - 1:
            core = np.concatenate([ca, cb], axis=0)
        else:
            core = np.zeros((la + lb, p, ra + rb), dtype=np.complex128)
            core[:la, :, :ra] = ca
            core[la:, :, ra:] = cb
        cores.append(core)
    return TensorTrain(cores)
