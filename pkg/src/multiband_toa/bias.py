"""First-order bias of the WSF delay estimate caused by unresolved paths.

Intra-cluster spread enters the covariance as a Hermitian perturbation
``E = A diag(e) D^H + D diag(e) A^H``. Propagating ``E`` through first-order
eigenvector perturbation and one Newton step of the fitting cost gives the
anchor-phase bias ``|H^{-1} g|``.

Gradients and Hessians here use the opposite overall sign to
:mod:`multiband_toa.wsf` (``g = 2 Re diag(...)``, ``H`` negative definite).
The ratio ``H^{-1} g``, and so the bias, is the same under either
convention; ``-wsf.wsf_gradient`` and ``-wsf.wsf_hessian_limit`` are the
matching true-derivative quantities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RankDeficientError, SubspaceError
from .hankel import BlockHankelConfig, SubspaceDecomposition, eigendecompose
from .model import BandPlan, ClusterApprox
from .wsf import WeightingMode, reduced_steering_matrix, realize_weights

GAP_RTOL = 1e-12


@dataclass(frozen=True)
class PerturbationModel:
    anchor_phases: np.ndarray
    exponents: np.ndarray
    A: np.ndarray
    D: np.ndarray
    e: np.ndarray
    cluster_powers: np.ndarray
    noise_power: float
    E: np.ndarray
    subcarrier_spacing: float

    @property
    def num_clusters(self) -> int:
        return self.e.size

    @property
    def projector(self) -> np.ndarray:
        A = self.A
        return np.eye(A.shape[0]) - A @ np.linalg.solve(A.conj().T @ A, A.conj().T)

    @property
    def gram_inverse(self) -> np.ndarray:
        return np.linalg.inv(self.A.conj().T @ self.A)

    def derivative_gram(self) -> np.ndarray:
        """``D^H P_A^perp D``."""
        return self.D.conj().T @ self.projector @ self.D


@dataclass(frozen=True)
class BiasReport:
    bias_phase: np.ndarray
    bias_delay: np.ndarray
    signed_phase: np.ndarray
    signed_delay: np.ndarray
    gradient: np.ndarray
    gradient_used: str
    hessian: np.ndarray
    weighting: WeightingMode


def perturbation_matrix(A, D, e) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    AeD = (A * e) @ D.conj().T
    return AeD + AeD.conj().T


def build_perturbation(approx: ClusterApprox, plan: BandPlan, cfg: BlockHankelConfig,
                       noise_power: float = 0.0) -> PerturbationModel:
    """Assemble ``A``, ``D`` and ``E`` on the block-Hankel rows at the cluster anchors."""
    exponents = cfg.exponents(plan)
    A, D = reduced_steering_matrix(approx.anchor_phases, exponents)
    e = np.array(approx.e_vector, dtype=float)
    return PerturbationModel(
        anchor_phases=np.array(approx.anchor_phases),
        exponents=exponents,
        A=A,
        D=D,
        e=e,
        cluster_powers=np.array(approx.cluster_powers, dtype=float),
        noise_power=float(noise_power),
        E=perturbation_matrix(A, D, e),
        subcarrier_spacing=plan.subcarrier_spacing,
    )


def model_covariance(model: PerturbationModel, include_perturbation: bool = True) -> np.ndarray:
    """``A diag(sigma_alpha) A^H + E + sigma_n^2 I`` with no sampling error."""
    A = model.A
    R = (A * model.cluster_powers) @ A.conj().T + model.noise_power * np.eye(A.shape[0])
    if include_perturbation:
        R = R + model.E
    return (R + R.conj().T) / 2


def unperturbed_decomposition(model: PerturbationModel) -> SubspaceDecomposition:
    """Eigendecomposition of the noiseless, spread-free covariance."""
    R0 = model_covariance(model, include_perturbation=False) - model.noise_power * np.eye(model.A.shape[0])
    return eigendecompose(R0, model.num_clusters)


def subspace_perturbation(decomp: SubspaceDecomposition, E: np.ndarray) -> np.ndarray:
    """First-order change ``U_e`` of the signal eigenvectors under ``E``.

    Signal-signal coupling divides by eigenvalue gaps, signal-noise coupling by
    the signal eigenvalue above the noise floor.
    """
    Us, Un = decomp.signal_vectors, decomp.noise_vectors
    lam = decomp.signal_values
    above_floor = lam - decomp.noise_power
    gaps = lam[None, :] - lam[:, None]  # [p, i] = lam_i - lam_p
    off = ~np.eye(lam.size, dtype=bool)
    tol = GAP_RTOL * abs(lam[0])
    if np.any(np.abs(gaps[off]) < tol) or np.any(above_floor < tol):
        raise SubspaceError(f"eigenvalues too close for first-order perturbation: {lam}")
    EUs = E @ Us
    rho = np.zeros_like(gaps, dtype=complex)
    rho[off] = (Us.conj().T @ EUs)[off] / gaps[off]
    beta = (Un.conj().T @ EUs) / above_floor  # [m, i]
    return Us @ rho + Un @ beta


def perturbed_subspace_first_order(decomp: SubspaceDecomposition, E: np.ndarray) -> np.ndarray:
    return decomp.signal_vectors + subspace_perturbation(decomp, E)


def _require_powers(model):
    if np.any(model.cluster_powers <= 0):
        raise ValueError(f"cluster powers must be positive, got {model.cluster_powers}")


def bias_gradient_general(model: PerturbationModel, decomp: SubspaceDecomposition, W) -> np.ndarray:
    """``2 Re diag[A^+ (U_s W Lambda_s^-1 U_s^H A diag(e) D^H) P^perp D]``."""
    A, D = model.A, model.D
    Us = decomp.signal_vectors
    lam = decomp.signal_values - decomp.noise_power
    if np.any(lam <= 0):
        raise SubspaceError(f"signal eigenvalues must be positive, got {lam}")
    A_pinv = np.linalg.solve(A.conj().T @ A, A.conj().T)
    inner = (Us * (np.asarray(W) / lam)) @ (Us.conj().T @ A)
    M = A_pinv @ (inner * model.e) @ D.conj().T @ model.projector @ D
    return 2.0 * np.real(np.diag(M))


def bias_gradient_identity(model: PerturbationModel) -> np.ndarray:
    """Closed form for ``W = I``: ``2 Re diag[(A^H A)^-1 diag(e / sigma) D^H P^perp D]``."""
    _require_powers(model)
    scaled = model.gram_inverse * (model.e / model.cluster_powers)
    return 2.0 * np.real(np.diag(scaled @ model.derivative_gram()))


def bias_gradient_eigweight(model: PerturbationModel) -> np.ndarray:
    """Closed form for ``W = Lambda_s + sigma_n^2 I``."""
    _require_powers(model)
    P = model.num_clusters
    factor = np.eye(P) + model.noise_power * model.gram_inverse / model.cluster_powers
    return 2.0 * np.real(np.diag((factor * model.e) @ model.derivative_gram()))


def hessian_identity(model: PerturbationModel) -> np.ndarray:
    """``-2 Re{(D^H P^perp D) * ((A^H A)^-1)^T}``, elementwise product."""
    H = -2.0 * np.real(model.derivative_gram() * model.gram_inverse.T)
    return (H + H.T) / 2


def hessian_general(model: PerturbationModel, decomp: SubspaceDecomposition, W) -> np.ndarray:
    """Asymptotic Hessian for weighting ``W`` at the unperturbed subspace."""
    A = model.A
    A_pinv = np.linalg.solve(A.conj().T @ A, A.conj().T)
    B = A_pinv @ decomp.signal_vectors
    H = -2.0 * np.real(model.derivative_gram() * ((B * np.asarray(W)) @ B.conj().T).T)
    return (H + H.T) / 2


def predict_bias(model: PerturbationModel, mode=WeightingMode.IDENTITY,
                 decomp: SubspaceDecomposition | None = None) -> BiasReport:
    """First-order bias of every cluster-anchor phase and delay."""
    mode = WeightingMode(mode)
    if mode is WeightingMode.IDENTITY:
        g = bias_gradient_identity(model)
        H = hessian_identity(model)
        label = "identity-closed-form"
    else:
        if decomp is None:
            decomp = unperturbed_decomposition(model)
        W = realize_weights(mode, decomp, model.noise_power)
        g = bias_gradient_eigweight(model)
        H = hessian_general(model, decomp, W)
        label = "eigen-closed-form"
    if np.linalg.cond(H) > 1e12:
        raise RankDeficientError("bias Hessian is singular")
    signed = -np.linalg.solve(H, g)
    ws = model.subcarrier_spacing
    return BiasReport(
        bias_phase=np.abs(signed),
        bias_delay=np.abs(signed) / ws,
        signed_phase=signed,
        signed_delay=signed / ws,
        gradient=g,
        gradient_used=label,
        hessian=H,
        weighting=mode,
    )


@dataclass(frozen=True)
class ChainCheck:
    """Residual norms along the gradient simplification.

    ``full_gradient`` uses ``U_s + U_e`` in the exact gradient expression and
    ``cross_gradient`` keeps only the terms linear in ``U_e``.
    """

    full_gradient: np.ndarray
    cross_gradient: np.ndarray
    reduced_gradient: np.ndarray
    second_order_residual: float
    cross_vs_reduced_residual: float
    noise_reduction_residual: float
    annihilation_residual: float

    @property
    def expansion_residual(self) -> float:
        return float(np.linalg.norm(self.full_gradient - self.reduced_gradient))


def expansion_chain_check(model: PerturbationModel, decomp: SubspaceDecomposition, W) -> ChainCheck:
    A, D, E, Pp = model.A, model.D, model.E, model.projector
    W = np.asarray(W)
    Us = decomp.signal_vectors
    Ue = subspace_perturbation(decomp, E)
    A_pinv = np.linalg.solve(A.conj().T @ A, A.conj().T)

    def grad(X):
        return 2.0 * np.real(np.diag(A_pinv @ X @ Pp @ D))

    UE = Us + Ue
    cross = (Us * W) @ Ue.conj().T + (Ue * W) @ Us.conj().T
    full = grad((UE * W) @ UE.conj().T)
    crossg = grad(cross)
    reduced = bias_gradient_general(model, decomp, W)

    lam = decomp.signal_values - decomp.noise_power
    via_E = A_pinv @ (Us * (W / lam)) @ Us.conj().T @ E @ Pp @ D
    lhs = A_pinv @ cross @ Pp @ D
    second_term = (D * model.e) @ A.conj().T @ Pp
    return ChainCheck(
        full_gradient=full,
        cross_gradient=crossg,
        reduced_gradient=reduced,
        second_order_residual=float(np.linalg.norm(full - crossg)),
        cross_vs_reduced_residual=float(np.linalg.norm(crossg - reduced)),
        noise_reduction_residual=float(np.linalg.norm(lhs - via_E)),
        annihilation_residual=float(np.linalg.norm(second_term)),
    )
