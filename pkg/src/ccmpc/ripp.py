"""Regions of increased probability of presence (RIPP).

An agent's RIPP at one timestep is the axis-aligned box ``|x - mu| <= alpha``
around its mean position.  Whittle's bivariate Chebyshev-type inequality
bounds the probability mass outside the box using only the 2x2 position
covariance, for any distribution; :func:`size_region` inverts that bound so
that a prescribed mass ``gamma`` lies outside.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class CovMatrix2:
    c11: float
    c22: float
    c12: float = 0.0

    def __post_init__(self):
        scale = max(abs(self.c11), abs(self.c22), 1e-300)
        if self.c11 < 0 or self.c22 < 0 or self.c11 * self.c22 - self.c12**2 < -1e-12 * scale**2:
            raise ValueError(f"covariance {self} is not positive semidefinite")

    @classmethod
    def from_array(cls, C) -> CovMatrix2:
        C = np.asarray(C, dtype=float)
        return cls(float(C[0, 0]), float(C[1, 1]), float(0.5 * (C[0, 1] + C[1, 0])))

    def as_array(self) -> np.ndarray:
        return np.array([[self.c11, self.c12], [self.c12, self.c22]])


@dataclass(frozen=True)
class RippRegion:
    """Half-widths of the box; the center is the (decision-dependent) mean."""

    alpha_x: float
    alpha_y: float
    gamma: float = math.nan

    def contains(self, center, points) -> np.ndarray:
        d = np.abs(np.asarray(points, dtype=float) - np.asarray(center, dtype=float))
        return (d[..., 0] <= self.alpha_x) & (d[..., 1] <= self.alpha_y)


def whittle_bound(C: CovMatrix2, alpha_x: float, alpha_y: float) -> float:
    """Upper bound on Pr(|x - mu| > alpha in some coordinate)."""
    if alpha_x <= 0 or alpha_y <= 0:
        raise ValueError("half-widths must be positive")
    ax2, ay2 = alpha_x**2, alpha_y**2
    s = C.c11 * ay2 + C.c22 * ax2
    disc = max(s * s - 4.0 * C.c12**2 * ax2 * ay2, 0.0)
    return max((s + math.sqrt(disc)) / (2.0 * ax2 * ay2), 0.0)


def size_region(C: CovMatrix2, gamma: float) -> RippRegion:
    """Half-widths with ``whittle_bound == gamma`` and alpha_x / alpha_y = sqrt(c11 / c22).

    Zero variances are floored at ``VARIANCE_FLOOR`` so the box stays nonempty.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    c11 = max(C.c11, VARIANCE_FLOOR)
    c22 = max(C.c22, VARIANCE_FLOOR)
    det = max(c11 * c22 - C.c12**2, 0.0)
    ax = math.sqrt(c11 / gamma + math.sqrt(c11 * c22 * det * gamma**2) / (c22 * gamma**2))
    return RippRegion(ax, math.sqrt(c22 / c11) * ax, gamma)


def split_delta(delta: float, d: float) -> tuple[float, float]:
    """Split a pairwise budget into ``delta / d`` and ``(d - 1) delta / d``."""
    if d <= 1.0:
        raise ValueError(f"delta_split must exceed 1, got {d}")
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    g1 = delta / d
    return g1, delta - g1


def position_cov(C) -> CovMatrix2:
    """Position block (first two state components) of a state covariance."""
    return CovMatrix2.from_array(np.asarray(C, dtype=float)[:2, :2])


@dataclass(frozen=True)
class PairRegions:
    """RIPP regions of agents ``i < j`` at timestep ``t`` (1-based)."""

    i: int
    j: int
    t: int
    region_i: RippRegion
    region_j: RippRegion

    def threshold(self, halving: bool = False) -> tuple[float, float]:
        """Required mean separation in x and y, excluding the clearance epsilon."""
        k = 0.5 if halving else 1.0
        return (
            k * (self.region_i.alpha_x + self.region_j.alpha_x),
            k * (self.region_i.alpha_y + self.region_j.alpha_y),
        )


def _zero_budget_region() -> RippRegion:
    return RippRegion(math.inf, math.inf, 0.0)


def build_regions(covariances, delta_pair, d: float) -> dict[tuple[int, int, int], PairRegions]:
    """Regions for every unordered agent pair and every t = 1..H.

    ``covariances[i]`` is agent i's state covariance sequence C_0..C_H and
    ``delta_pair[t - 1]`` the pairwise collision budget at t.  A zero budget
    gives unbounded regions (the pair can never be certified).
    """
    M = len(covariances)
    H = len(covariances[0]) - 1 if M else 0
    out = {}
    for t in range(1, H + 1):
        g1, g2 = split_delta(float(delta_pair[t - 1]), d)
        for i in range(M):
            for j in range(i + 1, M):
                ri = size_region(position_cov(covariances[i][t]), g1) if g1 > 0 else _zero_budget_region()
                rj = size_region(position_cov(covariances[j][t]), g2) if g2 > 0 else _zero_budget_region()
                out[(i, j, t)] = PairRegions(i, j, t, ri, rj)
    return out
