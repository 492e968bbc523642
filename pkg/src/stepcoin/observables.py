"""Position-space diagnostics: probability field, support, return probability, Shannon entropies."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from stepcoin.errors import ValidationError
from stepcoin.walk import Wavefunction

__all__ = [
    "DEFAULT_SUPPORT_THRESHOLD",
    "ProbabilityField",
    "TimeSeries",
    "probability_field",
    "support_count",
    "return_probability",
    "shannon_position",
    "shannon_coin",
]

DEFAULT_SUPPORT_THRESHOLD = 1e-12


@dataclass(frozen=True)
class ProbabilityField:
    step: int
    sites: np.ndarray
    values: np.ndarray

    def total(self) -> float:
        return float(np.sum(self.values))

    def value_at(self, site) -> float:
        m, n = site
        hit = np.nonzero((self.sites[:, 0] == m) & (self.sites[:, 1] == n))[0]
        return float(self.values[hit[0]]) if len(hit) else 0.0

    def as_mapping(self) -> dict[tuple[int, int], float]:
        return {(int(m), int(n)): float(p) for (m, n), p in zip(self.sites, self.values)}


@dataclass(frozen=True)
class TimeSeries:
    """A labelled scalar diagnostic sampled at strictly increasing steps.

    Values must be finite unless ``allow_nonfinite`` is set; the relative
    entropy series uses that for the +inf / NaN support-violation sentinels.
    """

    label: str
    steps: np.ndarray
    values: np.ndarray
    allow_nonfinite: bool = False

    def __post_init__(self):
        t = np.asarray(self.steps, dtype=np.int64).reshape(-1)
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if t.shape != v.shape:
            raise ValidationError("steps and values differ in length")
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise ValidationError("steps must be strictly increasing")
        if not self.allow_nonfinite and not np.all(np.isfinite(v)):
            raise ValidationError(f"non-finite value in series {self.label!r}")
        object.__setattr__(self, "steps", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_points(cls, label: str, points, allow_nonfinite: bool = False) -> "TimeSeries":
        points = list(points)
        return cls(label, [p[0] for p in points], [p[1] for p in points], allow_nonfinite)

    @property
    def points(self) -> list[tuple[int, float]]:
        return [(int(t), float(v)) for t, v in zip(self.steps, self.values)]

    def __len__(self):
        return len(self.steps)


def probability_field(psi: Wavefunction) -> ProbabilityField:
    """P(t, x) = sum_i |A_x^(i)|^2 at every stored site."""
    return ProbabilityField(psi.step, psi.sites, psi.site_probabilities())


def support_count(field: ProbabilityField, threshold: float = DEFAULT_SUPPORT_THRESHOLD) -> int:
    """Number of sites with probability strictly above ``threshold``."""
    if threshold < 0:
        raise ValidationError("threshold must be non-negative")
    return int(np.count_nonzero(field.values > threshold))


def return_probability(field: ProbabilityField, origin=(0, 0)) -> float:
    return field.value_at(origin)


def _entropy(p: np.ndarray, base: float) -> float:
    p = p[p > 0]
    h = -float(np.sum(p * np.log(p)))
    if base != math.e:
        h /= math.log(base)
    # p = 1 + ulp gives a tiny negative value
    return max(h, 0.0)


def shannon_position(field: ProbabilityField, base: float = math.e) -> float:
    """S_P = -sum_x P log P over occupied sites (0 log 0 = 0)."""
    return _entropy(np.asarray(field.values), base)


def shannon_coin(psi: Wavefunction, base: float = math.e) -> float:
    """S_C = -sum_i P_i log P_i with P_i the total weight of coin component i."""
    weights = np.sum(np.abs(psi.amplitudes) ** 2, axis=0)
    return _entropy(weights, base)
