"""Linear stochastic state propagation.

Conventions (0-based arrays): ``controls[k]`` and ``noise[:, k]`` drive the
transition from state ``k`` to state ``k + 1``, so a horizon of ``H`` steps
uses ``H`` controls and produces ``H + 1`` states per sample.  In the 1-based
notation of the docstrings, ``x_t = A x_{t-1} + B u_t + nu_t``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Planar double integrator with unit time step: state [x, y, vx, vy], input [ax, ay].
UAV_A = np.array(
    [
        [1.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 1.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
)
UAV_B = np.array(
    [
        [0.0, 0.0],
        [0.0, 0.0],
        [1.0, 0.0],
        [0.0, 1.0],
    ]
)


def step(A, B, x, u, nu):
    """One transition ``A x + B u + nu``."""
    return np.asarray(A) @ np.asarray(x) + np.asarray(B) @ np.asarray(u) + np.asarray(nu)


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """``N`` sample trajectories of one agent.

    ``samples`` has shape (N, H+1, n), ``noise_draws`` (N, H, n) and
    ``initial_draws`` (N, n).
    """

    agent: int
    samples: np.ndarray
    noise_draws: np.ndarray
    initial_draws: np.ndarray

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def horizon(self) -> int:
        return self.samples.shape[1] - 1


def _check_draws(initial_draws, noise_draws):
    x0 = np.atleast_2d(np.asarray(initial_draws, dtype=float))
    nu = np.asarray(noise_draws, dtype=float)
    if nu.ndim != 3:
        raise ValueError(f"noise_draws must be (N, H, n), got shape {nu.shape}")
    if nu.shape[0] != x0.shape[0] or nu.shape[2] != x0.shape[1]:
        raise ValueError(
            f"dimension mismatch: initial draws {x0.shape} vs noise draws {nu.shape}"
        )
    return x0, nu


def propagate_ensemble(A, B, initial_draws, noise_draws, controls, agent: int = 0):
    """Propagate every sample through the recursion with shared open-loop controls."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    x0, nu = _check_draws(initial_draws, noise_draws)
    H = nu.shape[1]
    u = np.asarray(controls, dtype=float).reshape(H, B.shape[1])
    if A.shape != (x0.shape[1], x0.shape[1]) or B.shape[0] != x0.shape[1]:
        raise ValueError(f"dimension mismatch: A {A.shape}, B {B.shape}, state {x0.shape[1]}")

    samples = np.empty((x0.shape[0], H + 1, x0.shape[1]))
    samples[:, 0] = x0
    for k in range(H):
        samples[:, k + 1] = samples[:, k] @ A.T + B @ u[k] + nu[:, k]
    return TrajectoryEnsemble(agent, samples, nu, x0)


@dataclass(frozen=True)
class AffineCoeffs:
    """Affine dependence of every sample state on the control sequence.

    ``x[j, t] = const[j, t] + sum_{s < t} gain[t, s] @ u[s]`` where ``gain`` has
    shape (H+1, H, n, m) and is zero for ``s >= t``; ``const`` has shape
    (N, H+1, n).
    """

    gain: np.ndarray
    const: np.ndarray

    @property
    def horizon(self) -> int:
        return self.gain.shape[1]

    def evaluate(self, controls) -> np.ndarray:
        """States of all samples, shape (N, H+1, n), for the given controls."""
        u = np.asarray(controls, dtype=float).reshape(self.horizon, self.gain.shape[3])
        drift = np.einsum("tsnm,sm->tn", self.gain, u)
        return self.const + drift[None]


def control_gains(A, B, H: int) -> np.ndarray:
    """Gain tensor (H+1, H, n, m) obtained by unrolling the recursion.

    Built step by step (``gain[t+1] = A gain[t]`` plus ``B`` in slot ``t``)
    rather than from a closed-form power expression.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n, m = B.shape
    gain = np.zeros((H + 1, H, n, m))
    for t in range(H):
        gain[t + 1] = np.einsum("ij,sjm->sim", A, gain[t])
        gain[t + 1, t] += B
    return gain


def affine_coefficients(A, B, H: int, initial_draws, noise_draws) -> AffineCoeffs:
    """Control gains plus per-sample constants absorbing initial state and noise."""
    x0, nu = _check_draws(initial_draws, noise_draws)
    if nu.shape[1] != H:
        raise ValueError(f"noise draws cover {nu.shape[1]} steps, horizon is {H}")
    zero_u = np.zeros((H, np.asarray(B).shape[1]))
    const = propagate_ensemble(A, B, x0, nu, zero_u).samples
    return AffineCoeffs(control_gains(A, B, H), const)


@dataclass(frozen=True)
class MomentTrajectory:
    """Means (affine in controls) and covariances for t = 0..H.

    ``mean_base`` has shape (H+1, n) and ``mean_gain`` (H+1, H, n, m);
    ``covariances`` has shape (H+1, n, n).
    """

    mean_base: np.ndarray
    mean_gain: np.ndarray
    covariances: np.ndarray | None = None

    def mean(self, controls) -> np.ndarray:
        H = self.mean_gain.shape[1]
        u = np.asarray(controls, dtype=float).reshape(H, self.mean_gain.shape[3])
        return self.mean_base + np.einsum("tsnm,sm->tn", self.mean_gain, u)


def mean_trajectory(A, B, mu0, H: int) -> MomentTrajectory:
    """Exact expectation ``E[x_t] = A E[x_{t-1}] + B u_t`` for zero-mean noise."""
    A = np.asarray(A, dtype=float)
    mu0 = np.asarray(mu0, dtype=float)
    base = np.empty((H + 1, mu0.size))
    base[0] = mu0
    for t in range(H):
        base[t + 1] = A @ base[t]
    return MomentTrajectory(base, control_gains(A, B, H))


def _check_psd(C, what, tol=1e-10):
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError(f"{what} must be square, got shape {C.shape}")
    scale = max(1.0, float(np.max(np.abs(C))) if C.size else 1.0)
    if not np.allclose(C, C.T, atol=tol * scale):
        raise ValueError(f"{what} is not symmetric")
    if C.size and np.linalg.eigvalsh(C).min() < -tol * scale:
        raise ValueError(f"{what} is not positive semidefinite")
    return C


def covariance_trajectory(C0, noise_covariances, A, cross=None) -> np.ndarray:
    """State covariances C_0..C_H from the recursion.

    ``C_t = A C_{t-1} A^T + Q_t + A X_t + X_t^T A^T`` where ``X_t`` is the
    optional cross-covariance Cov(x_{t-1}, nu_t); it defaults to zero, which
    is exact for noise independent of the past state.
    """
    A = np.asarray(A, dtype=float)
    C0 = _check_psd(C0, "initial covariance")
    Q = [_check_psd(q, f"noise covariance {k}") for k, q in enumerate(noise_covariances)]
    covs = [C0]
    for k, q in enumerate(Q):
        C = A @ covs[-1] @ A.T + q
        if cross is not None:
            X = np.asarray(cross[k], dtype=float)
            C = C + A @ X + X.T @ A.T
        covs.append(0.5 * (C + C.T))
    return np.array(covs)
