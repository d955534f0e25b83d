"""CRLB floor, predicted RMSE and Monte-Carlo error statistics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import MultibandError, RankDeficientError


def crlb_phase_variance(A, D, cluster_powers, noise_power, effective_snapshots) -> np.ndarray:
    """Deterministic CRB on each phase with ``T`` effective observations.

    ``var(phi_p) = sigma^2 / (2T) * [Re{(D^H P^perp D) * R_alpha^T}]^{-1}_pp``.
    """
    A = np.asarray(A)
    D = np.asarray(D)
    Pp = np.eye(A.shape[0]) - A @ np.linalg.pinv(A)
    fim = np.real((D.conj().T @ Pp @ D) * np.diag(np.asarray(cluster_powers, float)).T)
    if np.linalg.cond(fim) > 1e14:
        raise RankDeficientError("Fisher information matrix is singular")
    return noise_power / (2.0 * effective_snapshots) * np.diag(np.linalg.inv(fim))


def predicted_rmse(bias, variance):
    """``sqrt(var + bias^2)``, elementwise."""
    bias = np.asarray(bias, dtype=float)
    variance = np.asarray(variance, dtype=float)
    if np.any(variance < 0):
        raise ValueError("variance must be nonnegative")
    return np.sqrt(variance + bias ** 2)


def associate(estimates, truth) -> np.ndarray:
    """Greedy nearest-match of estimates to truth.

    Repeatedly pairs the globally closest remaining (estimate, truth) pair.
    Returns, for each truth entry, the matched estimate (NaN if none left).
    """
    est = np.asarray(estimates, dtype=float)
    truth = np.asarray(truth, dtype=float)
    dist = np.abs(est[:, None] - truth[None, :])
    out = np.full(truth.size, np.nan)
    for _ in range(min(est.size, truth.size)):
        i, j = np.unravel_index(np.argmin(dist), dist.shape)
        out[j] = est[i]
        dist[i, :] = np.inf
        dist[:, j] = np.inf
    return out


class RmseSummary(NamedTuple):
    rmse: float
    excluded: int
    exclusion_rate: float


def empirical_rmse(estimates: Sequence, truth, component: int = 0,
                   converged: Sequence[bool] | None = None) -> RmseSummary:
    """RMSE of one component over trials, after per-trial association.

    Trials whose fit did not converge are dropped and counted.
    """
    n = len(estimates)
    if n == 0:
        raise ValueError("no trials")
    if converged is None:
        converged = [True] * n
    errors = []
    for est, ok in zip(estimates, converged):
        if ok:
            errors.append(associate(est, truth)[component] - truth[component])
    if not errors:
        raise MultibandError("all trials failed to converge")
    errors = np.asarray(errors)
    excluded = n - errors.size
    return RmseSummary(float(np.sqrt(np.mean(errors ** 2))), excluded, excluded / n)


@dataclass(frozen=True)
class MetricSeries:
    """Per-sweep-point error figures, delays in seconds."""

    snr_db: np.ndarray
    rmse_empirical: np.ndarray
    rmse_predicted: np.ndarray
    bias_predicted: np.ndarray
    crlb_std: np.ndarray
    trials: int
