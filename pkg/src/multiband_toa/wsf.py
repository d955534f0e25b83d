"""Weighted subspace fitting delay estimator.

The cost is ``J(phi) = tr{P_A^perp(phi) U W U^H}`` over the reduced
(``M`` rows per band) steering matrix ``A(phi)``. :func:`wsf_gradient` and
:func:`wsf_hessian_limit` return the true derivatives of ``J``, so the
Hessian is positive semidefinite at a minimum.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import RankDeficientError, SubspaceError
from .hankel import BlockHankelConfig, SubspaceDecomposition, eigendecompose, sample_covariance
from .model import TWO_PI, BandPlan, SnapshotSet, steering_derivative_matrix, steering_matrix

RANK_RTOL = 1e-10
MAX_ITER = 100
STEP_TOL = 1e-12


class WeightingMode(enum.Enum):
    IDENTITY = "identity"
    EIGEN = "eigen"


def realize_weights(mode, decomp: SubspaceDecomposition, noise_power: float | None = None):
    """Diagonal of W for ``mode``.

    EIGEN gives ``Lambda_s + sigma^2 I`` where ``Lambda_s`` are the signal
    eigenvalues with the estimated noise floor removed. ``noise_power``
    defaults to that floor, in which case W is the raw signal eigenvalues.
    """
    mode = WeightingMode(mode)
    P = decomp.dimension
    if mode is WeightingMode.IDENTITY:
        return np.ones(P)
    floor = decomp.noise_power
    sigma2 = floor if noise_power is None else noise_power
    w = decomp.signal_values - floor + sigma2
    if np.any(w <= 0):
        raise SubspaceError(f"eigen weighting is not positive definite: {w}")
    return w


@dataclass(frozen=True)
class FitResult:
    phases: np.ndarray
    delays: np.ndarray
    cost: float
    initial_cost: float
    iterations: int
    converged: bool
    gradient_norm: float
    weights: np.ndarray


def reduced_steering_matrix(phases, exponents):
    """Steering matrix and its phase derivative on the block-Hankel rows."""
    phases = np.atleast_1d(np.asarray(phases, dtype=float))
    if np.unique(phases).size != phases.size:
        raise RankDeficientError(f"duplicate phases {phases}")
    return steering_matrix(phases, exponents), steering_derivative_matrix(phases, exponents)


def _pinv_full_rank(A):
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] <= RANK_RTOL * s[0]:
        raise RankDeficientError(
            f"steering matrix is rank deficient (singular value ratio {s[-1] / s[0]:.3g})"
        )
    return np.linalg.solve(A.conj().T @ A, A.conj().T)


def projector_complement(A: np.ndarray) -> np.ndarray:
    """``I - A (A^H A)^{-1} A^H``."""
    P = np.eye(A.shape[0]) - A @ _pinv_full_rank(A)
    return (P + P.conj().T) / 2


def _parts(phases, U, W, exponents):
    A, D = reduced_steering_matrix(phases, exponents)
    A_pinv = _pinv_full_rank(A)
    Pp = np.eye(A.shape[0]) - A @ A_pinv
    X = (U * np.asarray(W)) @ U.conj().T
    return A, D, A_pinv, Pp, X


def wsf_cost(phases, U, W, exponents) -> float:
    A, _ = reduced_steering_matrix(phases, exponents)
    resid = U - A @ (_pinv_full_rank(A) @ U)
    return float(np.sum(np.asarray(W) * np.sum(np.abs(resid) ** 2, axis=0)))


def wsf_gradient(phases, U, W, exponents) -> np.ndarray:
    """``dJ/dphi = -2 Re diag(A^+ U W U^H P_A^perp D)``."""
    _, D, A_pinv, Pp, X = _parts(phases, U, W, exponents)
    return -2.0 * np.real(np.einsum("ij,ji->i", A_pinv @ X @ Pp, D))


def wsf_hessian_limit(phases, U, W, exponents) -> np.ndarray:
    """Asymptotic Hessian ``2 Re{(D^H P^perp D) * (A^+ U W U^H A^+^H)^T}``.

    The product is elementwise. Terms that vanish when ``U`` spans
    ``A(phi)`` are dropped, so this is exact only at a noiseless minimum.
    """
    _, D, A_pinv, Pp, X = _parts(phases, U, W, exponents)
    H = 2.0 * np.real((D.conj().T @ Pp @ D) * (A_pinv @ X @ A_pinv.conj().T).T)
    return (H + H.T) / 2


def esprit_phases(Us: np.ndarray, cfg: BlockHankelConfig, num_bands: int):
    """Coarse, unambiguous phases from the one-subcarrier shift inside each band.

    Uses the multiband signal subspace: the rows ``m < M-1`` and ``m > 0`` of
    every band are stacked into the two shifted selections of least-squares
    ESPRIT.
    """
    M = cfg.rows
    P = Us.shape[1]
    if Us.shape[0] != M * num_bands:
        raise ValueError(f"subspace has {Us.shape[0]} rows, expected {M * num_bands}")
    if P >= M * num_bands - num_bands:
        raise SubspaceError(f"too many sources ({P}) for the shift selections")
    m = np.tile(np.arange(M), num_bands)
    psi, *_ = np.linalg.lstsq(Us[m < M - 1], Us[m > 0], rcond=None)
    z = np.linalg.eigvals(psi)
    phases = np.mod(-np.angle(z), TWO_PI)
    if not np.all(np.isfinite(phases)):
        raise SubspaceError("ESPRIT initializer produced non-finite phases")
    return np.sort(phases)


def refine_phases(coarse, decomp: SubspaceDecomposition, exponents, num_subcarriers):
    """Local multiband null-spectrum search around each coarse phase.

    Large band offsets make the fitting cost oscillate on a scale of
    ``2*pi/max(exponent)``; the coarse shift-invariance estimate alone can
    land in the wrong basin.
    """
    coarse = np.sort(np.asarray(coarse, dtype=float))
    step = TWO_PI / (16 * np.max(exponents))
    width = np.full(coarse.size, np.pi / num_subcarriers)
    if coarse.size > 1:
        gaps = np.diff(coarse) / 2
        width[:-1] = np.minimum(width[:-1], gaps)
        width[1:] = np.minimum(width[1:], gaps)
    Us = decomp.signal_vectors
    out = np.empty_like(coarse)
    for p, (c, w) in enumerate(zip(coarse, width)):
        grid = c + np.arange(-w, w + step / 2, step)
        a = steering_matrix(grid, exponents)
        captured = np.sum(np.abs(Us.conj().T @ a) ** 2, axis=0)
        out[p] = grid[np.argmax(captured)]
    return out


def initial_phases(decomp: SubspaceDecomposition, plan: BandPlan, cfg: BlockHankelConfig):
    coarse = esprit_phases(decomp.signal_vectors, cfg, plan.num_bands)
    phases = refine_phases(coarse, decomp, cfg.exponents(plan), plan.num_subcarriers)
    if np.unique(phases).size != phases.size:
        raise SubspaceError(f"initializer collapsed distinct sources: {phases}")
    return phases


def _minimize(phases, U, W, exponents, max_iter, tol):
    J = wsf_cost(phases, U, W, exponents)
    J0 = J
    iterations = 0
    converged = False
    for _ in range(max_iter + 1):
        g = wsf_gradient(phases, U, W, exponents)
        H = wsf_hessian_limit(phases, U, W, exponents)
        scale = abs(np.trace(H)) or 1.0
        mu = 0.0
        if np.min(np.linalg.eigvalsh(H)) <= 0:
            mu = 1e-6 * scale
        while True:
            step = np.linalg.solve(H + mu * np.eye(H.shape[0]), -g)
            if not np.all(np.isfinite(step)) or mu > 1e12 * scale:
                return phases, J, J0, iterations, False, float(np.linalg.norm(g))
            if np.max(np.abs(step)) < tol:
                converged = True
                break
            trial = phases + step
            try:
                J_new = wsf_cost(trial, U, W, exponents)
            except RankDeficientError:
                J_new = np.inf
            if J_new <= J:
                break
            mu = max(10.0 * mu, 1e-6 * scale)
        if converged or iterations == max_iter:
            break
        phases, J = trial, J_new
        iterations += 1
    g = wsf_gradient(phases, U, W, exponents)
    return phases, J, J0, iterations, converged, float(np.linalg.norm(g))


def fit_subspace(
    decomp: SubspaceDecomposition,
    plan: BandPlan,
    cfg: BlockHankelConfig,
    mode=WeightingMode.IDENTITY,
    init=None,
    noise_power: float | None = None,
    max_iter: int = MAX_ITER,
    tol: float = STEP_TOL,
) -> FitResult:
    """Minimize the WSF cost for the signal subspace in ``decomp``.

    Damped Gauss-Newton on the asymptotic Hessian; a step is only taken
    when it does not increase the cost.
    """
    exponents = cfg.exponents(plan)
    W = realize_weights(mode, decomp, noise_power)
    if init is None:
        init = initial_phases(decomp, plan, cfg)
    init = np.asarray(init, dtype=float)
    phases, J, J0, its, conv, gnorm = _minimize(
        init, decomp.signal_vectors, W, exponents, max_iter, tol
    )
    # integer exponents make the cost 2*pi periodic in every phase
    phases = np.sort(np.mod(np.asarray(phases), TWO_PI))
    return FitResult(
        phases=phases,
        delays=phases / plan.subcarrier_spacing,
        cost=J,
        initial_cost=J0,
        iterations=its,
        converged=conv,
        gradient_norm=gnorm,
        weights=W,
    )


def estimate_from_covariance(R, plan: BandPlan, cfg: BlockHankelConfig,
                             mode=WeightingMode.IDENTITY, init=None,
                             noise_power: float | None = None) -> FitResult:
    decomp = eigendecompose(R, cfg.num_clusters)
    return fit_subspace(decomp, plan, cfg, mode, init, noise_power)


def estimate_delays(snapshots: SnapshotSet, cfg: BlockHankelConfig,
                    mode=WeightingMode.IDENTITY, init=None) -> FitResult:
    """Delay estimates (seconds, ascending) from raw multiband snapshots."""
    R = sample_covariance(snapshots, cfg)
    return estimate_from_covariance(R, snapshots.band_plan, cfg, mode, init)
