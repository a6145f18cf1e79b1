"""Scenario configuration, unit conversions and grid geometry.

All power arithmetic downstream of this module is in linear milliwatts;
dBm only appears in :class:`NetworkConfig` and in config files.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, fields, replace
from importlib import resources
from typing import Optional

DEFAULT_ALPHA = 3.0
CONFIG_ENV_VAR = "MTCROBUST_CONFIG"


class InvalidParameter(ValueError):
    """A parameter is outside its admissible range."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class Role(enum.Enum):
    CH = "CH"
    NCH = "NCH"


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def norm(self) -> float:
        return math.hypot(self.x, self.y)


@dataclass(frozen=True)
class LinearPowers:
    """Transmit powers and threshold in mW plus the path-loss exponent."""

    p_t: float
    p_b: float
    p_th: float
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        for name in ("p_t", "p_b"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidParameter(name, f"must be finite and > 0, got {value!r}")
        if not (self.p_th >= 0 and not math.isnan(self.p_th)):
            raise InvalidParameter("p_th", f"must be >= 0, got {self.p_th!r}")
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise InvalidParameter("alpha", f"must be finite and > 0, got {self.alpha!r}")


def dbm_to_linear(level: float) -> float:
    """Convert a power level in dBm to milliwatts."""
    if not math.isfinite(level):
        raise InvalidParameter("level", f"non-finite dBm value {level!r}")
    return 10.0 ** (level / 10.0)


def linear_to_dbm(power_mw: float) -> float:
    if not (math.isfinite(power_mw) and power_mw > 0):
        raise InvalidParameter("power_mw", f"must be finite and > 0, got {power_mw!r}")
    return 10.0 * math.log10(power_mw)


def grid_half_width_from_density(n: int, density: float) -> float:
    """Half-width ``a`` of the square ``[-a, a]^2`` holding ``n`` nodes at ``density``."""
    if n < 1:
        raise InvalidParameter("n_nodes", f"must be >= 1, got {n!r}")
    if not (math.isfinite(density) and density > 0):
        raise InvalidParameter("node_density", f"must be finite and > 0, got {density!r}")
    return math.sqrt(n / density) / 2.0


def density_from_grid_half_width(n: int, half_width: float) -> float:
    return n / (4.0 * half_width * half_width)


def floor_count(x: float) -> int:
    """Greatest integer <= x, tolerant of float noise (150 * 0.3 -> 45)."""
    return math.floor(x + 1e-9)


@dataclass(frozen=True)
class NetworkConfig:
    n_nodes: int
    ch_probability: float
    p_tx_node_dbm: float = 23.0
    p_tx_bs_dbm: float = 46.0
    p_threshold_dbm: float = -111.0
    path_loss_exponent: float = DEFAULT_ALPHA
    grid_half_width: Optional[float] = None
    node_density: Optional[float] = None

    def linear_powers(self) -> LinearPowers:
        return LinearPowers(
            p_t=dbm_to_linear(self.p_tx_node_dbm),
            p_b=dbm_to_linear(self.p_tx_bs_dbm),
            p_th=dbm_to_linear(self.p_threshold_dbm),
            alpha=self.path_loss_exponent,
        )

    @property
    def half_width(self) -> float:
        if self.grid_half_width is not None:
            return self.grid_half_width
        if self.node_density is None:
            raise InvalidParameter("grid_half_width", "neither grid_half_width nor node_density given")
        return grid_half_width_from_density(self.n_nodes, self.node_density)

    @property
    def n_ch_expected(self) -> int:
        return floor_count(self.n_nodes * self.ch_probability)

    @property
    def n_nch_expected(self) -> int:
        return floor_count(self.n_nodes * (1.0 - self.ch_probability))

    def with_nodes(self, n_nodes: int) -> "NetworkConfig":
        """Same scenario at a different size; density is held and the grid rescales."""
        density = self.node_density
        if density is None:
            density = density_from_grid_half_width(self.n_nodes, self.half_width)
        return validate(replace(self, n_nodes=n_nodes, node_density=density, grid_half_width=None))

    def with_(self, **changes) -> "NetworkConfig":
        n = changes.pop("n_nodes", None)
        cfg = validate(replace(self, **changes)) if changes else self
        return cfg.with_nodes(n) if n is not None else cfg

    def describe(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def validate(config: NetworkConfig) -> NetworkConfig:
    """Check every invariant and return a config with both half-width and density set."""
    n = config.n_nodes
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise InvalidParameter("n_nodes", f"must be an integer >= 1, got {n!r}")
    p = config.ch_probability
    if not (isinstance(p, (int, float)) and 0.0 <= p <= 1.0):
        raise InvalidParameter("ch_probability", f"must lie in [0, 1], got {p!r}")
    alpha = config.path_loss_exponent
    if not (math.isfinite(alpha) and alpha > 0):
        raise InvalidParameter("path_loss_exponent", f"must be finite and > 0, got {alpha!r}")
    for name in ("p_tx_node_dbm", "p_tx_bs_dbm", "p_threshold_dbm"):
        if not math.isfinite(getattr(config, name)):
            raise InvalidParameter(name, "must be finite")

    a, lam = config.grid_half_width, config.node_density
    if a is not None and not (math.isfinite(a) and a > 0):
        raise InvalidParameter("grid_half_width", f"must be finite and > 0, got {a!r}")
    if lam is not None and not (math.isfinite(lam) and lam > 0):
        raise InvalidParameter("node_density", f"must be finite and > 0, got {lam!r}")
    if a is None and lam is None:
        raise InvalidParameter("grid_half_width", "one of grid_half_width or node_density is required")
    if a is None:
        a = grid_half_width_from_density(n, lam)
    elif lam is None:
        lam = density_from_grid_half_width(n, a)
    elif not math.isclose(a, grid_half_width_from_density(n, lam), rel_tol=1e-9):
        raise InvalidParameter(
            "grid_half_width",
            f"{a!r} inconsistent with node_density={lam!r} for n_nodes={n} "
            f"(expected {grid_half_width_from_density(n, lam)!r})",
        )
    return replace(config, grid_half_width=a, node_density=lam)


_INT_FIELDS = {"n_nodes"}
_FLOAT_FIELDS = {f.name for f in fields(NetworkConfig)} - _INT_FIELDS


def parse_config_text(text: str) -> NetworkConfig:
    """Parse the flat ``key = value`` format (``#`` starts a comment)."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParameter(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in _INT_FIELDS:
            try:
                values[key] = int(value)
            except ValueError:
                raise InvalidParameter(key, f"expected an integer, got {value!r}") from None
        elif key in _FLOAT_FIELDS:
            try:
                values[key] = float(value)
            except ValueError:
                raise InvalidParameter(key, f"expected a number, got {value!r}") from None
        else:
            raise InvalidParameter(key, "unknown config key")
    for required in ("n_nodes", "ch_probability"):
        if required not in values:
            raise InvalidParameter(required, "missing from config")
    return validate(NetworkConfig(**values))


def format_config(config: NetworkConfig) -> str:
    return "".join(f"{k} = {v!r}\n" for k, v in config.describe().items() if v is not None)


def load_config(path: Optional[str] = None) -> NetworkConfig:
    """Load a scenario file; falls back to $MTCROBUST_CONFIG, then the bundled default scenario."""
    path = path or os.environ.get(CONFIG_ENV_VAR)
    if path:
        with open(path, encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    return default_config()


def default_config() -> NetworkConfig:
    text = resources.files("mtcrobust").joinpath("data/default.cfg").read_text(encoding="utf-8")
    return parse_config_text(text)


class NoSuccessBaseline(ArithmeticError):
    """The pre-disruption success count is zero, so robustness is undefined."""


class DegenerateDegree(ArithmeticError):
    """The pre-disruption mean degree is zero, so the degree ratio is undefined."""


# Disruption policies. Each exposes the PMF of the removed-node count K over
# 0..N; given K, the removed set is a uniform K-subset in every case.


@dataclass(frozen=True)
class UniformCount:
    """K uniform on {1..N}."""

    def k_pmf(self, n: int) -> list[float]:
        return [0.0] + [1.0 / n] * n

    def label(self) -> str:
        return "uniform"


@dataclass(frozen=True)
class BernoulliPerNode:
    """Each node fails independently with probability q."""

    q: float

    def __post_init__(self):
        if not (0.0 <= self.q <= 1.0):
            raise InvalidParameter("q", f"failure probability must lie in [0, 1], got {self.q!r}")

    def k_pmf(self, n: int) -> list[float]:
        return [binom_pmf(k, n, self.q) for k in range(n + 1)]

    def label(self) -> str:
        return f"bernoulli(q={self.q:g})"


@dataclass(frozen=True)
class FixedCount:
    k: int

    def __post_init__(self):
        if self.k < 0:
            raise InvalidParameter("k", f"must be >= 0, got {self.k!r}")

    def k_pmf(self, n: int) -> list[float]:
        if self.k > n:
            raise InvalidParameter("k", f"cannot remove {self.k} of {n} nodes")
        return [1.0 if k == self.k else 0.0 for k in range(n + 1)]

    def label(self) -> str:
        return f"fixed(k={self.k})"


DisruptionPolicy = UniformCount | BernoulliPerNode | FixedCount


def log_binom(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def binom_pmf(n_ch: int, n: int, p: float) -> float:
    """``C(n, n_ch) p^n_ch (1-p)^(n-n_ch)``, evaluated in log space."""
    if not 0 <= n_ch <= n:
        raise InvalidParameter("n_ch", f"must lie in [0, {n}], got {n_ch!r}")
    if not 0.0 <= p <= 1.0:
        raise InvalidParameter("p", f"must lie in [0, 1], got {p!r}")
    if p == 0.0:
        return 1.0 if n_ch == 0 else 0.0
    if p == 1.0:
        return 1.0 if n_ch == n else 0.0
    return math.exp(log_binom(n, n_ch) + n_ch * math.log(p) + (n - n_ch) * math.log1p(-p))


@dataclass(frozen=True)
class RobustnessEstimate:
    """A robustness value with the settings that produced it."""

    mean: float
    std_error: float
    ci95: tuple[float, float]
    iterations: int
    engine: str
    settings: dict

    def __post_init__(self):
        lo, hi = self.ci95
        if not lo <= self.mean <= hi:
            raise ValueError(f"confidence interval {self.ci95} does not contain {self.mean}")
