"""Reference methods: Monte Carlo sampling with empirical estimators and
exact recursive convolution for discrete models."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, ResourceLimitError
from .models import Categorical, Lognormal, WeightedSumModel, inv_normal_cdf
from .risk import RiskReport

SUPPORT_CAP = 2**24


@dataclass(frozen=True)
class DiscreteDistribution:
    """Sorted finite support with matching probability masses."""

    support: np.ndarray
    pmf: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.float64)
        pmf = np.asarray(self.pmf, dtype=np.float64)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "pmf", pmf)
        if support.ndim != 1 or support.shape != pmf.shape:
            raise InvalidArgumentError("support and pmf must be 1-D and matching")
        if np.any(np.diff(support) <= 0):
            raise InvalidArgumentError("support must be strictly increasing")
        if np.any(pmf < 0):
            raise InvalidArgumentError("probability masses must be nonnegative")
        if abs(pmf.sum() - 1.0) > 1e-10:
            raise InvalidArgumentError(f"masses sum to {pmf.sum()!r}, not 1")

    @property
    def size(self) -> int:
        return self.support.size

    def to_csv(self) -> str:
        lines = ["support,pmf"]
        lines += [f"{x!r},{p!r}" for x, p in zip(self.support, self.pmf)]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SampleSet:
    """Reproducible draws: (seed, model, size) regenerate the samples."""

    samples: np.ndarray
    seed: int

    @property
    def size(self) -> int:
        return self.samples.size


def _rng(seed: int) -> np.random.Generator:
    # counter-based generator: disjoint counter ranges stay reproducible
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def mc_sample(model: WeightedSumModel, size: int, seed: int) -> SampleSet:
    """Independent draws of the weighted sum.

    Categorical components are inverted from uniforms through their
    cumulative masses; lognormal components map uniforms through the normal
    quantile function.
    """
    if size < 1:
        raise InvalidArgumentError("need at least one sample")
    rng = _rng(seed)
    total = np.zeros(size)
    for comp, w in zip(model.components, model.weights):
        u = rng.random(size)
        if isinstance(comp, Categorical):
            cum = np.cumsum(comp.probs)
            idx = np.searchsorted(cum, u, side="right")
            idx = np.minimum(idx, len(comp.values) - 1)
            total += w * np.asarray(comp.values)[idx]
        else:
            z = inv_normal_cdf(np.clip(u, 1e-16, 1.0 - 1e-16))
            total += w * np.exp(comp.mu + comp.sigma * z)
    return SampleSet(samples=total, seed=seed)


def mc_cdf(samples: SampleSet | np.ndarray, xs, return_variance: bool = False):
    """Empirical CDF at the given points; the optional variance estimate is
    F(1-F)/S per point."""
    values = samples.samples if isinstance(samples, SampleSet) else np.asarray(samples)
    xs = np.asarray(xs, dtype=np.float64)
    ordered = np.sort(values)
    counts = np.searchsorted(ordered, xs, side="right")
    fhat = counts / values.size
    if return_variance:
        return fhat, fhat * (1.0 - fhat) / values.size
    return fhat


def mc_var_es(samples: SampleSet | np.ndarray, alpha: float) -> RiskReport:
    """Order-statistic VaR and tail-average ES with atom splitting at the
    quantile order statistic."""
    values = samples.samples if isinstance(samples, SampleSet) else np.asarray(samples)
    if not 0.0 < alpha < 1.0:
        raise InvalidArgumentError("risk level must lie in (0, 1)")
    S = values.size
    if S < 10:
        raise InvalidArgumentError("need at least 10 samples")
    t0 = time.perf_counter()
    ordered = np.sort(values)
    k = math.ceil(alpha * S)
    var_x = float(ordered[k - 1])
    tail = ordered[k:]
    degenerate = tail.size == 0
    mass = (1.0 - alpha) * S
    es = float((tail.sum() + var_x * (k - alpha * S)) / mass)
    return RiskReport(
        alpha=alpha, var=var_x, var_index=k - 1, es=es, representation="mc",
        wall_time_s=time.perf_counter() - t0,
        diagnostics={"degenerate_tail": bool(degenerate), "samples": int(S)},
    )


# ---------------------------------------------------------------------------
# recursive convolution

def recursive_convolution(model: WeightedSumModel,
                          support_cap: int = SUPPORT_CAP) -> DiscreteDistribution:
    """Exact aggregate distribution of an all-categorical model.

    Components are folded in one at a time, shifting and weighting the
    running mass function.  Support positions are quantized to 1e-12 of the
    model scale so floating-point drift of repeated shifts cannot split
    atoms.
    """
    if not model.is_discrete():
        raise InvalidArgumentError("recursive convolution needs categorical components")
    scale = max(sum(abs(w) * max(abs(v) for v in c.values)
                    for c, w in zip(model.components, model.weights)), 1.0)
    quantum = 1e-12 * scale

    def key_of(x: float) -> int:
        return int(round(x / quantum))

    masses: dict[int, float] = {0: 1.0}
    positions: dict[int, float] = {0: 0.0}
    for idx, (comp, w) in enumerate(zip(model.components, model.weights)):
        nxt_m: dict[int, float] = {}
        nxt_p: dict[int, float] = {}
        shifts = [(w * v, p) for v, p in zip(comp.values, comp.probs) if p > 0]
        for k, mass in masses.items():
            x = positions[k]
            for dxv, p in shifts:
                y = x + dxv
                ky = key_of(y)
                if ky in nxt_m:
                    nxt_m[ky] += mass * p
                else:
                    nxt_m[ky] = mass * p
                    nxt_p[ky] = y
        if len(nxt_m) > support_cap:
            raise ResourceLimitError(
                f"support of {len(nxt_m)} atoms exceeds cap {support_cap}",
                step=idx)
        masses, positions = nxt_m, nxt_p
    keys = sorted(masses)
    support = np.array([positions[k] for k in keys])
    pmf = np.array([masses[k] for k in keys])
    return DiscreteDistribution(support=support, pmf=pmf)


def exact_cdf(dist: DiscreteDistribution, xs) -> np.ndarray:
    """Right-continuous step CDF of a finite distribution."""
    xs = np.asarray(xs, dtype=np.float64)
    cum = np.cumsum(dist.pmf)
    idx = np.searchsorted(dist.support, xs, side="right")
    out = np.zeros(xs.shape)
    inside = idx > 0
    out[inside] = cum[idx[inside] - 1]
    return out


def exact_var_es(dist: DiscreteDistribution, alpha: float):
    """Quantile and tail expectation straight from the mass function."""
    if not 0.0 < alpha < 1.0:
        raise InvalidArgumentError("risk level must lie in (0, 1)")
    cum = np.cumsum(dist.pmf)
    k = int(np.searchsorted(cum, alpha, side="left"))
    k = min(k, dist.size - 1)
    var_x = float(dist.support[k])
    tail_mass = float(dist.pmf[k + 1:].sum())
    tail_sum = float((dist.support[k + 1:] * dist.pmf[k + 1:]).sum())
    f_v = float(cum[k])
    es = (tail_sum + var_x * (f_v - alpha)) / (1.0 - alpha)
    return var_x, es
