"""Model descriptors, characteristic functions, spectral filters, and
support-bound estimation for weighted sums of independent components."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import erfc

from .errors import InvalidArgumentError, NumericFailureError
from .grids import (FrequencyGrid, GridSpec, qtt_chebyshev, qtt_constant,
                    qtt_piecewise_halves, qtt_sum_of_exponentials)
from .tt import TensorTrain, tt_truncate

MACHINE_EPS = float(np.finfo(np.float64).eps)

#: Gaussian filter decay so the cutoff value sits at machine precision.
EXP_FILTER_ALPHA = -math.log(MACHINE_EPS)

#: Gauss-Hermite node count that resolves the lognormal integral.
LOGNORMAL_QUAD_NODES = 45


# ---------------------------------------------------------------------------
# component descriptors

@dataclass(frozen=True)
class Categorical:
    """Discrete component on a finite support with matching probabilities."""

    values: tuple
    probs: tuple

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)
        if len(values) != len(probs) or not values:
            raise InvalidArgumentError("values and probs must match and be nonempty")
        if any(p < 0 for p in probs):
            raise InvalidArgumentError("probabilities must be nonnegative")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise InvalidArgumentError(f"probabilities sum to {sum(probs)!r}, not 1")

    @property
    def kind(self):
        return "categorical"


def Bernoulli(p: float) -> Categorical:
    """Indicator component on {0, 1}."""
    if not 0.0 <= p <= 1.0:
        raise InvalidArgumentError(f"Bernoulli probability {p} outside [0, 1]")
    return Categorical(values=(0.0, 1.0), probs=(1.0 - p, p))


@dataclass(frozen=True)
class Lognormal:
    """Heavy-tailed positive component exp(mu + sigma * Z)."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidArgumentError(f"sigma must be positive, got {self.sigma}")

    @property
    def kind(self):
        return "lognormal"


@dataclass(frozen=True)
class WeightedSumModel:
    """Weighted sum of independent components.

    Zero-weight components are dropped during validation (they contribute a
    unit factor to the characteristic function); lognormal components
    require strictly positive weights.
    """

    components: tuple = field()
    weights: tuple = field()
    normalize_weights: bool = False

    def __post_init__(self):
        comps = tuple(self.components)
        weights = tuple(float(w) for w in self.weights)
        if len(comps) != len(weights) or not comps:
            raise InvalidArgumentError("need matching, nonempty components and weights")
        if any(not math.isfinite(w) for w in weights):
            raise InvalidArgumentError("weights must be finite")
        if self.normalize_weights:
            total = sum(weights)
            if total == 0:
                raise InvalidArgumentError("cannot normalize zero-sum weights")
            weights = tuple(w / total for w in weights)
        kept = [(c, w) for c, w in zip(comps, weights) if w != 0.0]
        if not kept:
            raise InvalidArgumentError("all components have zero weight")
        for idx, (c, w) in enumerate(kept):
            if isinstance(c, Lognormal) and w <= 0:
                raise InvalidArgumentError(
                    f"component {idx}: lognormal components need positive weight")
        object.__setattr__(self, "components", tuple(c for c, _ in kept))
        object.__setattr__(self, "weights", tuple(w for _, w in kept))
        object.__setattr__(self, "normalize_weights", False)

    @property
    def size(self) -> int:
        return len(self.components)

    def is_discrete(self) -> bool:
        return all(isinstance(c, Categorical) for c in self.components)

    def max_value(self) -> float:
        """Largest attainable value for all-categorical models."""
        if not self.is_discrete():
            raise InvalidArgumentError("max_value needs all-categorical components")
        return sum(w * (max(c.values) if w >= 0 else min(c.values))
                   for c, w in zip(self.components, self.weights))


def model_from_json(text: str) -> WeightedSumModel:
    """Parse the model JSON schema; errors name the offending component."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict) or "weights" not in obj or "components" not in obj:
        raise InvalidArgumentError('model JSON needs "weights" and "components"')
    comps = []
    for idx, spec in enumerate(obj["components"]):
        try:
            kind = spec.get("type")
            if kind == "bernoulli":
                comps.append(Bernoulli(spec["p"]))
            elif kind == "categorical":
                comps.append(Categorical(tuple(spec["values"]), tuple(spec["probs"])))
            elif kind == "lognormal":
                comps.append(Lognormal(spec["mu"], spec["sigma"]))
            else:
                raise InvalidArgumentError(f"unknown component type {kind!r}")
        except (KeyError, TypeError, InvalidArgumentError) as exc:
            raise InvalidArgumentError(f"component {idx}: {exc}") from exc
    try:
        return WeightedSumModel(tuple(comps), tuple(obj["weights"]),
                                bool(obj.get("normalize_weights", False)))
    except (TypeError, InvalidArgumentError) as exc:
        raise InvalidArgumentError(str(exc)) from exc


def model_to_json(model: WeightedSumModel) -> str:
    comps = []
    for c in model.components:
        if isinstance(c, Categorical):
            comps.append({"type": "categorical", "values": list(c.values),
                          "probs": list(c.probs)})
        else:
            comps.append({"type": "lognormal", "mu": c.mu, "sigma": c.sigma})
    return json.dumps({"weights": list(model.weights),
                       "normalize_weights": False, "components": comps}, indent=2)


# ---------------------------------------------------------------------------
# characteristic functions

def categorical_cf_dense(comp: Categorical, weight: float, omegas) -> np.ndarray:
    """phi(w) = sum_k p_k exp(i * w * weight * x_k)."""
    omegas = np.asarray(omegas, dtype=np.float64)
    out = np.zeros(omegas.shape, dtype=np.complex128)
    for x, p in zip(comp.values, comp.probs):
        out += p * np.exp(1j * omegas * (weight * x))
    return out


def categorical_cf_qtt(comp: Categorical, weight: float, freq: FrequencyGrid,
                       eps: float = 0.0) -> TensorTrain:
    """Exact sum-of-exponentials construction (raw bond = support size),
    truncated at the requested tolerance."""
    rates = [1j * weight * x for x in comp.values]
    tt = qtt_sum_of_exponentials(freq.grid, comp.probs, rates)
    return tt_truncate(tt, eps) if eps > 0 else tt


def gauss_hermite(K: int):
    """Nodes and weights for integral of exp(-z^2) g(z) dz.

    Computed from the symmetric tridiagonal Jacobi matrix of the Hermite
    recurrence; weights are sqrt(pi) times the squared first eigenvector
    components.  Nodes are symmetrized about zero.
    """
    if not 1 <= K <= 200:
        raise InvalidArgumentError("node count must be within [1, 200]")
    if K == 1:
        return np.array([0.0]), np.array([math.sqrt(math.pi)])
    off = np.sqrt(np.arange(1, K) / 2.0)
    try:
        nodes, vecs = scipy.linalg.eigh_tridiagonal(np.zeros(K), off)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericFailureError(f"Hermite eigenproblem failed: {exc}") from exc
    weights = math.sqrt(math.pi) * vecs[0] ** 2
    order = np.argsort(nodes)
    nodes, weights = nodes[order], weights[order]
    nodes = 0.5 * (nodes - nodes[::-1])           # enforce symmetry
    weights = 0.5 * (weights + weights[::-1])
    if K % 2 == 1:
        nodes[K // 2] = 0.0
    return nodes, weights


def _gubner_terms(mu: float, sigma: float, weight: float, K: int):
    """Coefficients and decay rates of the quadrature representation of the
    lognormal characteristic function for nonnegative frequencies.

    The contour-deformed integrand is sampled with K Gauss-Hermite nodes;
    the result is normalized by its value at frequency zero so the unit-mass
    identity holds exactly for every K.
    """
    if sigma <= 0:
        raise InvalidArgumentError("sigma must be positive")
    if weight <= 0:
        raise InvalidArgumentError("lognormal components need positive weight")
    z, v = gauss_hermite(K)
    phases = np.exp(-1j * math.pi * z / (math.sqrt(2.0) * sigma))
    coeffs = v * phases
    coeffs = coeffs / np.sum(coeffs)
    # frequency is scaled by exp(mu) to reintroduce the location parameter
    rates = -weight * math.exp(mu) * np.exp(math.sqrt(2.0) * sigma * z)
    return coeffs, rates


def lognormal_cf(mu: float, sigma: float, weight: float, omegas,
                 K: int = LOGNORMAL_QUAD_NODES, eps: float = 0.0):
    """Characteristic function of weight * Lognormal(mu, sigma).

    With an ndarray of frequencies this returns dense values; with a
    :class:`FrequencyGrid` it returns the QTT built from the positive-half
    sum of exponentials and its reflected negative half.
    """
    if isinstance(omegas, FrequencyGrid):
        return _lognormal_cf_qtt(mu, sigma, weight, omegas, K, eps)
    coeffs, rates = _gubner_terms(mu, sigma, weight, K)
    omegas = np.asarray(omegas, dtype=np.float64)
    out = np.empty(omegas.shape, dtype=np.complex128)
    mag = np.abs(omegas)
    with np.errstate(under="ignore"):
        vals = np.exp(np.multiply.outer(mag, rates)) @ coeffs
    out[...] = np.where(omegas >= 0, vals, np.conj(vals))
    return out


def _lognormal_cf_qtt(mu, sigma, weight, freq: FrequencyGrid, K, eps):
    coeffs, rates = _gubner_terms(mu, sigma, weight, K)
    omega = freq.omega_max
    half_n = freq.n_pad - 1
    with np.errstate(under="ignore"):
        pos = qtt_sum_of_exponentials(GridSpec(0.0, omega, half_n), coeffs, rates)
        neg = qtt_sum_of_exponentials(GridSpec(-omega, 0.0, half_n),
                                      np.conj(coeffs), -rates)
    tt = qtt_piecewise_halves(neg, pos)
    return tt_truncate(tt, eps) if eps > 0 else tt


def component_cf_dense(comp, weight: float, omegas,
                       K: int = LOGNORMAL_QUAD_NODES) -> np.ndarray:
    if isinstance(comp, Categorical):
        return categorical_cf_dense(comp, weight, omegas)
    return lognormal_cf(comp.mu, comp.sigma, weight, omegas, K)


def component_cf_qtt(comp, weight: float, freq: FrequencyGrid,
                     eps: float = 0.0, K: int = LOGNORMAL_QUAD_NODES) -> TensorTrain:
    if isinstance(comp, Categorical):
        return categorical_cf_qtt(comp, weight, freq, eps)
    return lognormal_cf(comp.mu, comp.sigma, weight, freq, K, eps)


def gaussian_cf(mu: float, sigma2: float, omegas) -> np.ndarray:
    """exp(i*mu*w - sigma^2 w^2 / 2); the large-D reference."""
    if sigma2 < 0:
        raise InvalidArgumentError("variance must be nonnegative")
    omegas = np.asarray(omegas, dtype=np.float64)
    return np.exp(1j * mu * omegas - 0.5 * sigma2 * omegas**2)


# ---------------------------------------------------------------------------
# spectral filters

_FILTER_KINDS = ("none", "raised_cosine", "sharpened_raised_cosine", "exponential")
_FILTER_ALIASES = {"rc": "raised_cosine", "src": "sharpened_raised_cosine",
                   "exp": "exponential", "none": "none"}


@dataclass(frozen=True)
class FilterSpec:
    """Spectral filter identity: kind, order, and Gaussian decay rate."""

    kind: str
    alpha: float = EXP_FILTER_ALPHA

    def __post_init__(self):
        kind = _FILTER_ALIASES.get(self.kind, self.kind)
        if kind not in _FILTER_KINDS:
            raise InvalidArgumentError(f"unknown filter kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if self.alpha <= 0:
            raise InvalidArgumentError("alpha must be positive")

    @property
    def order(self):
        """Convergence order q away from jumps (None for none/exponential)."""
        return {"raised_cosine": 2, "sharpened_raised_cosine": 8}.get(self.kind)

    @property
    def label(self):
        return {"none": "none", "raised_cosine": "rc",
                "sharpened_raised_cosine": "src", "exponential": "exp"}[self.kind]


def _src_polynomial(rc):
    return rc**4 * (35.0 - 84.0 * rc + 70.0 * rc**2 - 20.0 * rc**3)


def filter_eval(spec: FilterSpec, eta) -> np.ndarray:
    """Filter values at normalized frequencies eta = omega / cutoff."""
    eta = np.asarray(eta, dtype=np.float64)
    if spec.kind == "none":
        return np.ones(eta.shape)
    if spec.kind == "raised_cosine":
        return 0.5 * (1.0 + np.cos(math.pi * eta))
    if spec.kind == "sharpened_raised_cosine":
        return _src_polynomial(0.5 * (1.0 + np.cos(math.pi * eta)))
    with np.errstate(under="ignore"):
        return np.exp(-spec.alpha * eta**2)


def filter_qtt(spec: FilterSpec, freq: FrequencyGrid, eps: float = 1e-12) -> TensorTrain:
    """QTT of the filter on the padded frequency grid.

    The raised cosine is three exponentials exactly; its sharpened variant
    is assembled from Hadamard powers with per-step truncation; the
    Gaussian goes through the Chebyshev constructor.
    """
    grid = freq.grid
    if spec.kind == "none":
        return qtt_constant(grid, 1.0)
    if spec.kind in ("raised_cosine", "sharpened_raised_cosine"):
        rate = 1j * math.pi / freq.omega_max
        rc = qtt_sum_of_exponentials(grid, [0.5, 0.25, 0.25], [0.0, rate, -rate])
        if spec.kind == "raised_cosine":
            return tt_truncate(rc, eps)
        from .tt import tt_add, tt_hadamard, tt_scale
        step = 1e-12
        # Horner evaluation of 35 - 84 rc + 70 rc^2 - 20 rc^3, then * rc^4
        poly = tt_add(tt_scale(rc, -20.0), qtt_constant(grid, 70.0))
        poly = tt_truncate(tt_add(tt_hadamard(poly, rc), qtt_constant(grid, -84.0)), step)
        poly = tt_truncate(tt_add(tt_hadamard(poly, rc), qtt_constant(grid, 35.0)), step)
        rc2 = tt_truncate(tt_hadamard(rc, rc), step)
        rc4 = tt_truncate(tt_hadamard(rc2, rc2), step)
        return tt_truncate(tt_hadamard(rc4, poly), step)
    alpha = spec.alpha
    omega = freq.omega_max

    def gauss(w):
        with np.errstate(under="ignore"):
            return np.exp(-alpha * (w / omega) ** 2)

    return qtt_chebyshev(grid, gauss, max_order=256, eps=max(eps, 1e-13))


# ---------------------------------------------------------------------------
# inverse normal CDF and support bounds

# Acklam's rational approximation, refined below by Newton steps on erfc.
_ACKLAM_A = [-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
             1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00]
_ACKLAM_B = [-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
             6.680131188771972e+01, -1.328068155288572e+01]
_ACKLAM_C = [-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
             -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00]
_ACKLAM_D = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
             3.754408661907416e+00]


def _acklam(p):
    p = np.asarray(p, dtype=np.float64)
    out = np.empty_like(p)
    lo = p < 0.02425
    hi = p > 1 - 0.02425
    mid = ~(lo | hi)
    if np.any(mid):
        q = p[mid] - 0.5
        r = q * q
        num = ((((_ACKLAM_A[0] * r + _ACKLAM_A[1]) * r + _ACKLAM_A[2]) * r
                + _ACKLAM_A[3]) * r + _ACKLAM_A[4]) * r + _ACKLAM_A[5]
        den = ((((_ACKLAM_B[0] * r + _ACKLAM_B[1]) * r + _ACKLAM_B[2]) * r
                + _ACKLAM_B[3]) * r + _ACKLAM_B[4]) * r + 1.0
        out[mid] = num * q / den
    for mask, sign in ((lo, 1.0), (hi, -1.0)):
        if np.any(mask):
            q = np.sqrt(-2.0 * np.log(np.where(sign > 0, p[mask], 1 - p[mask])))
            num = ((((_ACKLAM_C[0] * q + _ACKLAM_C[1]) * q + _ACKLAM_C[2]) * q
                    + _ACKLAM_C[3]) * q + _ACKLAM_C[4]) * q + _ACKLAM_C[5]
            den = (((_ACKLAM_D[0] * q + _ACKLAM_D[1]) * q + _ACKLAM_D[2]) * q
                   + _ACKLAM_D[3]) * q + 1.0
            out[mask] = sign * num / den
    return out


def normal_cdf(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * erfc(-x / math.sqrt(2.0))


def inv_normal_cdf(p):
    """Standard normal quantile to better than 1e-12 absolute error.

    Rational initial guess refined by Newton iterations on the
    complementary error function (evaluated on the accurate tail).
    """
    scalar = np.isscalar(p)
    p = np.atleast_1d(np.asarray(p, dtype=np.float64))
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise InvalidArgumentError("quantile level must lie strictly in (0, 1)")
    x = _acklam(p)
    flip = p > 0.5
    q = np.where(flip, 1.0 - p, p)          # tail mass, <= 0.5
    y = np.where(flip, x, -x)               # positive tail coordinate
    inv_sqrt2pi = 1.0 / math.sqrt(2.0 * math.pi)
    for _ in range(3):
        tail = 0.5 * erfc(y / math.sqrt(2.0))
        pdf = inv_sqrt2pi * np.exp(-0.5 * y * y)
        y = y + (tail - q) / np.maximum(pdf, 1e-300)
    x = np.where(flip, y, -y)
    return float(x[0]) if scalar else x


def support_bound_single(mu: float, sigma: float, delta: float) -> float:
    """Right-tail cut point: the lognormal mass beyond it is exactly delta."""
    if not 0.0 < delta < 1.0:
        raise InvalidArgumentError("tail tolerance must lie in (0, 1)")
    return math.exp(mu + sigma * inv_normal_cdf(1.0 - delta))


def support_bound_sum(model: WeightedSumModel, delta: float,
                      rel_tol: float = 1e-10) -> float:
    """Largest-component tail bound for all-lognormal sums, solved by
    bisection of the aggregated survival equation."""
    if not 0.0 < delta < 1.0:
        raise InvalidArgumentError("tail tolerance must lie in (0, 1)")
    comps = model.components
    if not all(isinstance(c, Lognormal) for c in comps):
        raise InvalidArgumentError("support bound needs all-lognormal components")
    mus = np.array([c.mu + math.log(w) for c, w in zip(comps, model.weights)])
    sigmas = np.array([c.sigma for c in comps])

    def excess(b):
        # sum of component survival probabilities minus delta
        z = (math.log(b) - mus) / sigmas
        return float(np.sum(0.5 * erfc(z / math.sqrt(2.0)))) - delta

    lo = float(np.exp(np.max(mus)))
    while excess(lo) < 0:
        lo *= 0.5
        if lo < 1e-300:
            return lo
    hi = lo * 2.0
    while excess(hi) > 0:
        hi *= 2.0
        if hi > 1e300:
            raise NumericFailureError("support bound bracket expansion diverged")
    while (hi - lo) > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# moments (Berry-Esseen ingredients)

def component_moments(comp):
    """(mean, variance, third absolute central moment) of a component."""
    if isinstance(comp, Categorical):
        x = np.asarray(comp.values)
        p = np.asarray(comp.probs)
        mean = float(np.dot(p, x))
        var = float(np.dot(p, (x - mean) ** 2))
        rho = float(np.dot(p, np.abs(x - mean) ** 3))
        return mean, var, rho
    mu, sigma = comp.mu, comp.sigma
    mean = math.exp(mu + 0.5 * sigma**2)
    var = (math.exp(sigma**2) - 1.0) * math.exp(2.0 * mu + sigma**2)
    # E|Y - m|^3 from partial moments: E[Y^k; Y <= m] has a closed form,
    # and the absolute value splits at the mean
    zstar = 0.5 * sigma  # (log(mean) - mu) / sigma
    full_m = [math.exp(k * mu + 0.5 * k * k * sigma * sigma) for k in range(4)]
    part_m = [full_m[k] * float(normal_cdf(zstar - k * sigma)) for k in range(4)]
    m = mean
    signed = full_m[3] - 3 * m * full_m[2] + 3 * m * m * full_m[1] - m**3
    below = part_m[3] - 3 * m * part_m[2] + 3 * m * m * part_m[1] - m**3 * part_m[0]
    rho = signed - 2.0 * below
    return mean, var, rho
