"""Fitness and threshold laws on [support_lower, inf).

Each law exposes its survival function, the inverse survival function
(inf-convention generalized inverse), the cumulative hazard
``-log(survival)``, and inverse-survival-transform sampling, including
draws conditioned to exceed a level.  Survival values below
``SURVIVAL_FLOOR`` are treated as an explicit error rather than silent
zeros so that conditional sampling never divides garbage.
"""

from __future__ import annotations

import csv
import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .streams import open_uniform

SURVIVAL_FLOOR = 1e-300


class DistributionError(ValueError):
    """Invalid parameters, malformed input, or out-of-domain arguments."""


class SurvivalUnderflowError(DistributionError):
    """Survival mass below SURVIVAL_FLOOR where a positive value is required."""


def _as_float(value, name: str) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError) as exc:
        raise DistributionError(f"{name} must be a real number, got {value!r}") from exc
    if math.isnan(x):
        raise DistributionError(f"{name} must not be NaN")
    return x


def _check_level(x, lower: float) -> float:
    x = _as_float(x, "x")
    if math.isinf(x):
        raise DistributionError("x must be finite")
    if x < lower:
        raise DistributionError(f"x={x} below support lower bound {lower}")
    return x


def _check_survival_prob(u) -> float:
    u = _as_float(u, "u")
    if not 0.0 < u <= 1.0:
        raise DistributionError(f"survival probability must lie in (0, 1], got {u}")
    return u


class DistributionSpec(ABC):
    """Continuous law with unbounded upper support and positive survival.

    Subclasses guarantee survival(support_lower) == 1 and survival(x) > 0
    for every finite x, which keeps record ladders well defined at any
    finite height.
    """

    @property
    @abstractmethod
    def support_lower(self) -> float:
        """Left edge of the support."""

    @abstractmethod
    def survival(self, x) -> float:
        """P(X > x) for x >= support_lower (clamped to 1 below it)."""

    @abstractmethod
    def inverse_survival(self, u) -> float:
        """inf{x : survival(x) <= u} for u in (0, 1]; u == 1 gives support_lower."""

    @abstractmethod
    def hazard_transform(self, x) -> float:
        """Cumulative hazard -log(survival(x)), evaluated in closed form."""

    @abstractmethod
    def hazard_density(self, x) -> float:
        """d/dx of the cumulative hazard (density / survival)."""

    @abstractmethod
    def to_json(self) -> dict:
        """JSON-serializable description of this law."""

    def sample(self, rng: np.random.Generator) -> float:
        """One inverse-survival-transform draw."""
        return self.inverse_survival(open_uniform(rng))

    def sample_conditional_above(self, lower, rng: np.random.Generator) -> float:
        """Draw conditioned on strictly exceeding ``lower``.

        Uses inverse_survival(U * survival(lower)); the redraw guards the
        measure-zero floating-point tie at the conditioning level.
        """
        lower = _as_float(lower, "lower")
        s = self.survival(lower)
        if s < SURVIVAL_FLOOR:
            raise SurvivalUnderflowError(
                f"survival({lower}) = {s} is below {SURVIVAL_FLOOR}; cannot condition"
            )
        while True:
            value = self.inverse_survival(open_uniform(rng) * s)
            if value > lower:
                return value


@dataclass(frozen=True)
class Exponential(DistributionSpec):
    """Exponential law with the given rate."""

    rate: float

    def __post_init__(self) -> None:
        rate = _as_float(self.rate, "rate")
        if not 0.0 < rate < math.inf:
            raise DistributionError(f"rate must be positive and finite, got {rate}")
        object.__setattr__(self, "rate", rate)

    @property
    def support_lower(self) -> float:
        return 0.0

    def survival(self, x) -> float:
        x = _check_level(x, 0.0)
        return math.exp(-self.rate * x) if x > 0.0 else 1.0

    def inverse_survival(self, u) -> float:
        u = _check_survival_prob(u)
        return -math.log(u) / self.rate

    def hazard_transform(self, x) -> float:
        x = _check_level(x, 0.0)
        return self.rate * x

    def hazard_density(self, x) -> float:
        _check_level(x, 0.0)
        return self.rate

    def to_json(self) -> dict:
        return {"family": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class Weibull(DistributionSpec):
    """Weibull law with shape k and scale s: survival(x) = exp(-(x/s)^k)."""

    shape: float
    scale: float

    def __post_init__(self) -> None:
        shape = _as_float(self.shape, "shape")
        scale = _as_float(self.scale, "scale")
        if not 0.0 < shape < math.inf:
            raise DistributionError(f"shape must be positive and finite, got {shape}")
        if not 0.0 < scale < math.inf:
            raise DistributionError(f"scale must be positive and finite, got {scale}")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "scale", scale)

    @property
    def support_lower(self) -> float:
        return 0.0

    def survival(self, x) -> float:
        x = _check_level(x, 0.0)
        return math.exp(-((x / self.scale) ** self.shape)) if x > 0.0 else 1.0

    def inverse_survival(self, u) -> float:
        u = _check_survival_prob(u)
        return self.scale * (-math.log(u)) ** (1.0 / self.shape)

    def hazard_transform(self, x) -> float:
        x = _check_level(x, 0.0)
        return (x / self.scale) ** self.shape

    def hazard_density(self, x) -> float:
        x = _check_level(x, 0.0)
        if x == 0.0:
            if self.shape < 1.0:
                raise DistributionError("hazard density diverges at 0 for shape < 1")
            return 0.0 if self.shape > 1.0 else 1.0 / self.scale
        return (self.shape / self.scale) * (x / self.scale) ** (self.shape - 1.0)

    def to_json(self) -> dict:
        return {"family": "weibull", "shape": self.shape, "scale": self.scale}


@dataclass(frozen=True)
class Pareto(DistributionSpec):
    """Pareto law: survival(x) = (minimum / x)^index for x >= minimum."""

    minimum: float
    index: float

    def __post_init__(self) -> None:
        minimum = _as_float(self.minimum, "minimum")
        index = _as_float(self.index, "index")
        # minimum == 0 would force survival(x) == 0 everywhere above the
        # support edge, violating the positive-survival contract.
        if not 0.0 < minimum < math.inf:
            raise DistributionError(f"minimum must be positive and finite, got {minimum}")
        if not 0.0 < index < math.inf:
            raise DistributionError(f"index must be positive and finite, got {index}")
        object.__setattr__(self, "minimum", minimum)
        object.__setattr__(self, "index", index)

    @property
    def support_lower(self) -> float:
        return self.minimum

    def survival(self, x) -> float:
        x = _as_float(x, "x")
        if math.isinf(x):
            raise DistributionError("x must be finite")
        if x < 0.0:
            raise DistributionError(f"x must be non-negative, got {x}")
        if x <= self.minimum:
            return 1.0
        return (self.minimum / x) ** self.index

    def inverse_survival(self, u) -> float:
        u = _check_survival_prob(u)
        value = self.minimum * u ** (-1.0 / self.index)
        if math.isinf(value):
            raise SurvivalUnderflowError(f"quantile overflow at survival level {u}")
        return value

    def hazard_transform(self, x) -> float:
        x = _as_float(x, "x")
        if math.isinf(x) or x < 0.0:
            raise DistributionError(f"x must be finite and non-negative, got {x}")
        if x <= self.minimum:
            return 0.0
        return self.index * math.log(x / self.minimum)

    def hazard_density(self, x) -> float:
        x = _as_float(x, "x")
        if math.isinf(x) or x < 0.0:
            raise DistributionError(f"x must be finite and non-negative, got {x}")
        if x <= self.minimum:
            return 0.0
        return self.index / x

    def to_json(self) -> dict:
        return {"family": "pareto", "minimum": self.minimum, "index": self.index}


@dataclass(frozen=True)
class TabulatedQuantile(DistributionSpec):
    """Law given by a monotone (survival, level) grid.

    Linear interpolation joins the grid nodes in (level, survival)
    coordinates.  Beyond the last node the survival tail is extrapolated
    log-linearly, which keeps it positive on the whole half-line; the
    extrapolation is flagged in to_json() output.  The grid must start at
    survival 1 so that survival(support_lower) == 1 holds exactly.
    """

    grid: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        rows = []
        for i, pair in enumerate(self.grid):
            if len(pair) != 2:
                raise DistributionError(f"grid row {i} must be a (survival, level) pair")
            u = _as_float(pair[0], f"grid[{i}].survival")
            x = _as_float(pair[1], f"grid[{i}].level")
            if not 0.0 < u <= 1.0:
                raise DistributionError(f"grid survival values must lie in (0, 1], got {u}")
            if math.isinf(x) or x < 0.0:
                raise DistributionError(f"grid levels must be finite and >= 0, got {x}")
            rows.append((u, x))
        if len(rows) < 2:
            raise DistributionError("tabulated grid needs at least two rows")
        if rows[0][0] != 1.0:
            raise DistributionError("tabulated grid must start at survival 1.0")
        us = np.array([r[0] for r in rows], dtype=float)
        xs = np.array([r[1] for r in rows], dtype=float)
        if not np.all(np.diff(us) < 0.0):
            raise DistributionError("grid survival values must be strictly decreasing")
        if not np.all(np.diff(xs) > 0.0):
            raise DistributionError("grid levels must be strictly increasing")
        object.__setattr__(self, "grid", tuple(rows))
        object.__setattr__(self, "_xs", xs)
        object.__setattr__(self, "_us", us)
        object.__setattr__(self, "_log_us", np.log(us))
        # Tail slope of log-survival per unit level, taken from the last segment.
        slope = (self._log_us[-1] - self._log_us[-2]) / (xs[-1] - xs[-2])
        object.__setattr__(self, "_tail_slope", float(slope))

    @property
    def support_lower(self) -> float:
        return float(self._xs[0])

    def survival(self, x) -> float:
        x = _as_float(x, "x")
        if math.isinf(x):
            raise DistributionError("x must be finite")
        if x < 0.0:
            raise DistributionError(f"x must be non-negative, got {x}")
        xs = self._xs
        if x <= xs[0]:
            return 1.0
        if x <= xs[-1]:
            return float(np.interp(x, xs, self._us))
        return math.exp(self._log_us[-1] + self._tail_slope * (x - xs[-1]))

    def inverse_survival(self, u) -> float:
        u = _check_survival_prob(u)
        us = self._us
        if u >= us[0]:
            return float(self._xs[0])
        if u >= us[-1]:
            return float(np.interp(u, us[::-1], self._xs[::-1]))
        return float(self._xs[-1] + (math.log(u) - self._log_us[-1]) / self._tail_slope)

    def hazard_transform(self, x) -> float:
        x = _as_float(x, "x")
        if math.isinf(x) or x < 0.0:
            raise DistributionError(f"x must be finite and non-negative, got {x}")
        xs = self._xs
        if x <= xs[0]:
            return 0.0
        if x <= xs[-1]:
            return -math.log(float(np.interp(x, xs, self._us)))
        return -(self._log_us[-1] + self._tail_slope * (x - xs[-1]))

    def hazard_density(self, x) -> float:
        x = _as_float(x, "x")
        if math.isinf(x) or x < 0.0:
            raise DistributionError(f"x must be finite and non-negative, got {x}")
        xs, us = self._xs, self._us
        if x < xs[0]:
            return 0.0
        if x >= xs[-1]:
            return -self._tail_slope
        i = int(np.searchsorted(xs, x, side="right")) - 1
        i = max(i, 0)
        drop = (us[i] - us[i + 1]) / (xs[i + 1] - xs[i])
        return float(drop / self.survival(x))

    def to_json(self) -> dict:
        return {
            "family": "tabulated",
            "grid": [[u, x] for u, x in self.grid],
            "tail": "log-linear",
        }

    @classmethod
    def from_csv(cls, path) -> "TabulatedQuantile":
        """Load a (survival, level) grid from a two-column CSV file.

        A non-numeric first row is treated as a header and skipped.
        """
        rows: list[tuple[float, float]] = []
        with open(path, newline="") as handle:
            for lineno, rec in enumerate(csv.reader(handle)):
                if not rec or all(not cell.strip() for cell in rec):
                    continue
                if len(rec) < 2:
                    raise DistributionError(f"{path}: line {lineno + 1} needs two columns")
                try:
                    u, x = float(rec[0]), float(rec[1])
                except ValueError:
                    if lineno == 0:
                        continue
                    raise DistributionError(
                        f"{path}: line {lineno + 1} is not numeric"
                    ) from None
                rows.append((u, x))
        return cls(grid=tuple(rows))


_FAMILIES = {"exponential", "weibull", "pareto", "tabulated"}


def distribution_from_json(obj) -> DistributionSpec:
    """Build a distribution from its JSON description."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    if not isinstance(obj, dict):
        raise DistributionError(f"distribution spec must be an object, got {type(obj)}")
    family = obj.get("family")
    if family not in _FAMILIES:
        raise DistributionError(f"unknown family {family!r}; expected one of {sorted(_FAMILIES)}")
    if family == "exponential":
        if "rate" not in obj:
            raise DistributionError("exponential spec requires 'rate'")
        return Exponential(rate=obj["rate"])
    if family == "weibull":
        for key in ("shape", "scale"):
            if key not in obj:
                raise DistributionError(f"weibull spec requires {key!r}")
        return Weibull(shape=obj["shape"], scale=obj["scale"])
    if family == "pareto":
        for key in ("minimum", "index"):
            if key not in obj:
                raise DistributionError(f"pareto spec requires {key!r}")
        return Pareto(minimum=obj["minimum"], index=obj["index"])
    if "csv" in obj:
        return TabulatedQuantile.from_csv(obj["csv"])
    if "grid" not in obj:
        raise DistributionError("tabulated spec requires 'grid' or 'csv'")
    return TabulatedQuantile(grid=tuple(tuple(row) for row in obj["grid"]))


@dataclass(frozen=True)
class ModelParams:
    """Birth/extinction rates and the two mark laws of the species process."""

    lambda_birth: float
    lambda_extinct: float
    fitness_dist: DistributionSpec
    threshold_dist: DistributionSpec

    def __post_init__(self) -> None:
        lb = _as_float(self.lambda_birth, "lambda_birth")
        le = _as_float(self.lambda_extinct, "lambda_extinct")
        if not 0.0 < lb < math.inf:
            raise DistributionError(f"lambda_birth must be positive and finite, got {lb}")
        if not 0.0 < le < math.inf:
            raise DistributionError(f"lambda_extinct must be positive and finite, got {le}")
        if not isinstance(self.fitness_dist, DistributionSpec):
            raise DistributionError("fitness_dist must be a DistributionSpec")
        if not isinstance(self.threshold_dist, DistributionSpec):
            raise DistributionError("threshold_dist must be a DistributionSpec")
        object.__setattr__(self, "lambda_birth", lb)
        object.__setattr__(self, "lambda_extinct", le)

    def swapped(self) -> "ModelParams":
        """Role-swapped parameters: births and extinctions trade places."""
        return ModelParams(
            lambda_birth=self.lambda_extinct,
            lambda_extinct=self.lambda_birth,
            fitness_dist=self.threshold_dist,
            threshold_dist=self.fitness_dist,
        )

    def to_json(self) -> dict:
        return {
            "lambda_birth": self.lambda_birth,
            "lambda_extinct": self.lambda_extinct,
            "fitness_dist": self.fitness_dist.to_json(),
            "threshold_dist": self.threshold_dist.to_json(),
        }


def model_params_from_json(obj) -> ModelParams:
    """Build ModelParams from a JSON object or string."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    if not isinstance(obj, dict):
        raise DistributionError(f"params must be an object, got {type(obj)}")
    for key in ("lambda_birth", "lambda_extinct", "fitness_dist", "threshold_dist"):
        if key not in obj:
            raise DistributionError(f"params object requires {key!r}")
    return ModelParams(
        lambda_birth=obj["lambda_birth"],
        lambda_extinct=obj["lambda_extinct"],
        fitness_dist=distribution_from_json(obj["fitness_dist"]),
        threshold_dist=distribution_from_json(obj["threshold_dist"]),
    )


def sample_many(dist: DistributionSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """n independent draws as a float array."""
    if n < 0:
        raise DistributionError("n must be non-negative")
    return np.array([dist.sample(rng) for _ in range(n)], dtype=float)
