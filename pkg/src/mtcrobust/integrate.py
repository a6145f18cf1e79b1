"""Tensor-product Gauss-Legendre quadrature and seeded Monte Carlo means.

Both kernels return *normalized* means over the hypercube ``[-a, a]^d``,
i.e. the integral divided by ``(2a)^d``. Integrands are vectorized: they
receive coordinate arrays and return an array of the same shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .model import InvalidParameter

DEFAULT_ORDER_2D = 32
DEFAULT_ORDER_4D = 16
_MC_CHUNK_VALUES = 1 << 21


def stream(seed: int, *path: int) -> np.random.Generator:
    """Independent counter-based generator for ``(seed, *path)``.

    Philox keyed through SeedSequence, so any node in the (seed, path) tree
    can be reconstructed without touching its siblings.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, path)])))


@dataclass(frozen=True)
class QuadratureSpec:
    order: int
    domain_half_width: float

    def __post_init__(self):
        if not isinstance(self.order, (int, np.integer)) or self.order < 2:
            raise InvalidParameter("order", f"quadrature order must be an integer >= 2, got {self.order!r}")
        if not (math.isfinite(self.domain_half_width) and self.domain_half_width > 0):
            raise InvalidParameter("domain_half_width", f"must be > 0, got {self.domain_half_width!r}")

    def doubled(self) -> "QuadratureSpec":
        return QuadratureSpec(2 * self.order, self.domain_half_width)


@dataclass(frozen=True)
class McIntegrationResult:
    estimate: float
    std_error: float
    samples: int
    seed: int


@lru_cache(maxsize=32)
def _unit_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    # Nodes on [-1, 1]; weights rescaled to sum to 1 so the rule is a mean.
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w / math.fsum(w)


def _scaled_rule(spec: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
    x, w = _unit_rule(int(spec.order))
    return spec.domain_half_width * x, w


def integrate_mean_2d(f: Callable[[np.ndarray, np.ndarray], np.ndarray], spec: QuadratureSpec) -> float:
    """Mean of ``f(x, y)`` over the square ``[-a, a]^2``."""
    x, w = _scaled_rule(spec)
    X, Y = np.meshgrid(x, x, indexing="ij")
    values = np.broadcast_to(np.asarray(f(X, Y), dtype=float), X.shape)
    # positive weights: the mean is a convex combination, keep it in range
    return float(np.clip(w @ values @ w, values.min(), values.max()))


def integrate_mean_4d(
    f: Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    spec: QuadratureSpec,
) -> float:
    """Mean of ``f(x, y, x1, y1)`` over ``[-a, a]^4``.

    Evaluated one ``x`` slab at a time, so memory stays at ``order^3``.
    """
    x, w = _scaled_rule(spec)
    Y, X1, Y1 = np.meshgrid(x, x, x, indexing="ij")
    W3 = w[:, None, None] * w[None, :, None] * w[None, None, :]
    total, lo, hi = 0.0, math.inf, -math.inf
    for wi, xi in zip(w, x):
        vals = np.broadcast_to(np.asarray(f(xi, Y, X1, Y1), dtype=float), Y.shape)
        total += wi * float(np.sum(W3 * vals))
        lo, hi = min(lo, float(vals.min())), max(hi, float(vals.max()))
    return float(np.clip(total, lo, hi))


def mc_mean(
    f: Callable[[np.ndarray], np.ndarray],
    dim: int,
    samples: int,
    seed: int,
    half_width: float = 1.0,
) -> McIntegrationResult:
    """Monte Carlo mean of ``f`` under the uniform law on ``[-a, a]^dim``.

    ``f`` receives an ``(m, dim)`` array of points and returns ``m`` values.
    Points are drawn in fixed-size blocks from one Philox stream, so the
    result depends only on ``(seed, samples, dim)``.
    """
    if not isinstance(samples, (int, np.integer)) or samples < 2:
        raise InvalidParameter("samples", f"need at least 2 samples, got {samples!r}")
    if dim < 1:
        raise InvalidParameter("dim", f"must be >= 1, got {dim!r}")
    rng = stream(seed)
    block = max(1, _MC_CHUNK_VALUES // dim)
    values = np.empty(samples)
    for start in range(0, samples, block):
        m = min(block, samples - start)
        pts = rng.uniform(-half_width, half_width, size=(m, dim))
        values[start : start + m] = f(pts)
    mean = float(values.mean())
    std_error = float(values.std(ddof=1) / math.sqrt(samples))
    return McIntegrationResult(mean, std_error, int(samples), int(seed))
