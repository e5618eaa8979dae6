"""Truncated discrete Laplace noise for cardinalities, Laplace noise for outputs."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CENTER_GUARD = 2**62


@dataclass(frozen=True)
class RngSeed:
    """A 64-bit seed plus a stream id; each operator draws from its own stream."""

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(self.stream,)))

    def child(self, stream: int) -> RngSeed:
        return RngSeed(self.seed, stream)


@dataclass(frozen=True)
class TruncLaplace:
    """Two-sided geometric noise ``Pr[eta = x] = p * exp(-a |x - center|)``.

    ``a`` is ``epsilon / sensitivity``.  Build it with :func:`tlap_new`, which
    derives ``weight`` and an integer ``center``; direct construction is for
    synthetic distributions in tests.
    """

    epsilon: float
    delta: float
    sensitivity: int
    center: int
    weight: float
    center_real: float = math.nan

    @property
    def scale_ratio(self) -> float:
        return self.epsilon / self.sensitivity

    @property
    def ratio(self) -> float:
        """Geometric ratio ``r = exp(-a)`` of the tails."""
        return math.exp(-self.scale_ratio)

    def pmf(self, x):
        x = np.asarray(x)
        return self.weight * np.exp(-self.scale_ratio * np.abs(x - self.center))


def tlap_new(epsilon: float, delta: float, sensitivity: int) -> TruncLaplace:
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if int(sensitivity) != sensitivity or sensitivity < 1:
        raise ValueError(f"sensitivity must be a positive integer, got {sensitivity}")
    sensitivity = int(sensitivity)
    a = epsilon / sensitivity
    # tanh(a/2) == (e^a - 1) / (e^a + 1) without overflow for large a
    weight = math.tanh(a / 2)
    log1pexp = a + math.log1p(math.exp(-a))
    center_real = -sensitivity * (log1pexp + math.log(delta)) / epsilon + sensitivity
    if not math.isfinite(center_real) or center_real > CENTER_GUARD:
        raise OverflowError(
            f"noise center {center_real:.3g} overflows; epsilon={epsilon} is too small for delta={delta}"
        )
    center = max(math.ceil(center_real), sensitivity)
    d = TruncLaplace(epsilon, delta, sensitivity, center, weight, center_real)
    tail = tlap_tail_below(d, sensitivity)
    if tail > delta * (1 + 1e-12):
        raise ArithmeticError(f"tail mass {tail} below sensitivity exceeds delta {delta}")
    return d


def tlap_tail_below(d: TruncLaplace, threshold: int) -> float:
    """Exact ``Pr[eta < threshold]`` from the geometric series."""
    r = d.ratio
    k = d.center - (threshold - 1)  # distance from the center to threshold - 1
    if k >= 0:
        # sum_{j >= k} p r^j = r^k / (1 + r)
        return math.exp(-d.scale_ratio * k) / (1 + r)
    # 1 - Pr[eta >= threshold] = 1 - r^{threshold - center} / (1 + r)
    return 1.0 - math.exp(-d.scale_ratio * (threshold - d.center)) / (1 + r)


def tlap_mean(d: TruncLaplace, method: str = "closed") -> float:
    """``E[max(eta, 0)]``.

    The closed form is ``center + p * r^center * r / (1 - r)^2`` (the
    symmetric mean plus the mass clipped below zero).  ``method="series"``
    sums the pmf over a window wide enough that the neglected mass is below
    1e-12; it is the fallback for ``center < 0``.
    """
    if method == "closed" and d.center >= 0:
        a = d.scale_ratio
        r = d.ratio
        return d.center + d.weight * math.exp(-a * (d.center + 1)) / (-math.expm1(-a)) ** 2
    if method not in ("closed", "series"):
        raise ValueError(f"unknown method {method!r}")
    return _series_mean(d)


def _series_mean(d: TruncLaplace) -> float:
    a = d.scale_ratio
    # tail beyond w carries ~ r^w / (1 - r) * w mass; 1e-12 is ample margin
    w = int(math.ceil((30 * math.log(10) + 2 * math.log1p(1 / a)) / a)) + 2
    xs = np.arange(d.center - w, d.center + w + 1, dtype=np.float64)
    return float(np.sum(np.maximum(xs, 0) * d.pmf(xs)))


def _two_sided_quantile(u: np.ndarray, a: float) -> np.ndarray:
    """Inverse CDF of the zero-centered two-sided geometric with ratio e^-a."""
    log_r = -a
    log1pr = math.log1p(math.exp(-a))
    u = np.clip(np.asarray(u, dtype=np.float64), np.finfo(np.float64).tiny, None)
    out = np.empty(u.shape, dtype=np.int64)
    # Pr[D <= -k] = r^k / (1 + r)
    low = u <= math.exp(log_r - log1pr)
    with np.errstate(divide="ignore"):
        k = np.floor((np.log(u[low]) + log1pr) / log_r)
        out[low] = -k.astype(np.int64)
        # Pr[D <= x] = 1 - r^{x+1} / (1 + r), x >= 0
        x = np.ceil((np.log1p(-u[~low]) + log1pr) / log_r) - 1
    out[~low] = np.maximum(x, 0).astype(np.int64)
    return out


def tlap_sample(d: TruncLaplace, rng: np.random.Generator | RngSeed, size: int | None = None):
    """Draw ``max(eta, 0)``.

    Sampling inverts the closed-form CDF of one uniform draw, so runs that
    share a stream but differ in epsilon see coupled noise.
    """
    gen = rng.generator() if isinstance(rng, RngSeed) else rng
    u = gen.random(1 if size is None else size)
    eta = d.center + _two_sided_quantile(u, d.scale_ratio)
    out = np.maximum(eta, 0)
    return int(out[0]) if size is None else out


def laplace_output(value: float, epsilon0: float, sensitivity: int, rng: np.random.Generator | RngSeed) -> float:
    """Continuous Laplace mechanism; noise is drawn centrally in this simulation."""
    if not epsilon0 > 0:
        raise ValueError(f"epsilon0 must be positive, got {epsilon0}")
    gen = rng.generator() if isinstance(rng, RngSeed) else rng
    return float(value + gen.laplace(0.0, sensitivity / epsilon0))
