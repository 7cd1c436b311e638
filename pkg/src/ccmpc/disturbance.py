"""Disturbance samplers: discrete Dryden low-altitude turbulence and Gaussian noise.

All randomness comes from numpy's PCG64 generator.  Streams are keyed by
``(seed, agent, purpose[, chunk])`` through :class:`numpy.random.SeedSequence`
spawn keys, so the draws for one agent never depend on how many other agents
were sampled or in which order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

# Stream purposes; part of the spawn key so planning and validation never share draws.
PLAN_INITIAL = 0
PLAN_NOISE = 1
MC_INITIAL = 2
MC_NOISE = 3
COV_ESTIMATE = 4

KNOT_FT_PER_S = 1.6878098571011957


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))))


@dataclass(frozen=True)
class DrydenParams:
    altitude: float
    w20: float
    airspeed: float
    dt: float
    sigma_u: float
    sigma_v: float
    length_u: float
    length_v: float

    @property
    def sigma_w(self) -> float:
        return 0.1 * self.w20


def dryden_params(altitude: float, w20: float, airspeed: float, dt: float = 1.0) -> DrydenParams:
    """Low-altitude (10 to 1000 ft) Dryden intensities and scale lengths, in feet.

    sigma_w = 0.1 W20, sigma_u = sigma_v = sigma_w / (0.177 + 0.000823 h)^0.4,
    L_u = L_v = h / (0.177 + 0.000823 h)^1.2.
    """
    if not 10.0 <= altitude <= 1000.0:
        raise ValueError(f"altitude {altitude} ft outside the low-altitude range [10, 1000]")
    if airspeed <= 0 or dt <= 0:
        raise ValueError("airspeed and dt must be positive")
    if w20 < 0:
        raise ValueError("w20 must be non-negative")
    base = 0.177 + 0.000823 * altitude
    sigma = 0.1 * w20 / base**0.4
    length = altitude / base**1.2
    return DrydenParams(altitude, w20, airspeed, dt, sigma, sigma, length, length)


@dataclass(frozen=True)
class NoiseDraws:
    """Disturbance samples for one agent, ``values`` of shape (N, H, 4)."""

    agent: int
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 3 or self.values.shape[2] != 4:
            raise ValueError(f"noise draws must be (N, H, 4), got {self.values.shape}")


def gust_filter(params: DrydenParams, eta: np.ndarray, axis: str = "u") -> np.ndarray:
    """Run the first-order gust filter over white noise ``eta`` along its last axis.

    Returns the gust velocities g_1..g_K for g_0 = 0 and
    g_{k+1} = (1 - V dt / L) g_k + sqrt(2 V dt / L) sigma eta_k.
    """
    sigma, length = (params.sigma_u, params.length_u) if axis == "u" else (params.sigma_v, params.length_v)
    phi = params.airspeed * params.dt / length
    if phi >= 1.0:
        raise ValueError(f"V*dt/L = {phi:.3f} >= 1, the discrete gust filter is unstable")
    return lfilter([np.sqrt(2.0 * phi) * sigma], [1.0, -(1.0 - phi)], eta, axis=-1)


def draw_dryden(params: DrydenParams, H: int, N: int, seed: int, agent: int = 0, purpose: int = PLAN_NOISE, chunk: int | None = None) -> NoiseDraws:
    """Gust-velocity increments injected into the velocity components.

    Longitudinal (x) and lateral (y) gusts are independent filters with the
    same parameters.  Position components of the disturbance are zero.
    """
    rng = rng_stream(seed, agent, purpose, *(() if chunk is None else (chunk,)))
    eta = rng.standard_normal((2, N, H))
    gusts = np.zeros((2, N, H + 1))
    gusts[0, :, 1:] = gust_filter(params, eta[0], "u")
    gusts[1, :, 1:] = gust_filter(params, eta[1], "v")
    values = np.zeros((N, H, 4))
    values[:, :, 2] = np.diff(gusts[0], axis=1)
    values[:, :, 3] = np.diff(gusts[1], axis=1)
    return NoiseDraws(agent, values)


def psd_factor(Q) -> np.ndarray:
    """A matrix L with L L^T = Q for symmetric PSD Q (singular Q allowed)."""
    Q = np.asarray(Q, dtype=float)
    if not np.allclose(Q, Q.T, atol=1e-12 * max(1.0, np.abs(Q).max())):
        raise ValueError("covariance is not symmetric")
    w, V = np.linalg.eigh(Q)
    if w.min() < -1e-10 * max(1.0, np.abs(w).max()):
        raise ValueError("covariance is not positive semidefinite")
    return V * np.sqrt(np.clip(w, 0.0, None))


def draw_gaussian(Q, H: int, N: int, seed: int, agent: int = 0, purpose: int = PLAN_NOISE, chunk: int | None = None) -> NoiseDraws:
    """I.i.d. zero-mean Gaussian disturbances with covariance Q."""
    L = psd_factor(Q)
    rng = rng_stream(seed, agent, purpose, *(() if chunk is None else (chunk,)))
    z = rng.standard_normal((N, H, L.shape[0]))
    return NoiseDraws(agent, z @ L.T)


def empirical_cov(draws: NoiseDraws | np.ndarray, t: int) -> np.ndarray:
    """Unbiased sample covariance of the disturbances at step index ``t``."""
    values = draws.values if isinstance(draws, NoiseDraws) else np.asarray(draws)
    x = values[:, t, :]
    if x.shape[0] < 2:
        raise ValueError("need at least two draws for a sample covariance")
    return np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
