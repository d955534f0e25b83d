"""Block-Hankel data matrix, covariance estimates and eigendecomposition."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import SubspaceError
from .model import BandPlan, ClusteredChannel, SnapshotSet, check_channel, steering_matrix

log = logging.getLogger(__name__)

ILL_SEPARATED_RTOL = 1e-12


@dataclass(frozen=True)
class BlockHankelConfig:
    """Per-band Hankel geometry.

    ``rows`` is the design parameter M, ``num_subcarriers`` N, ``num_components``
    K the assumed total path count and ``num_clusters`` P the subspace
    dimension.

    A single snapshot's Hankel matrix has full rank K only when ``Q >= K``.
    With several snapshots pooled into one covariance that condition can be
    waived, so only ``Q >= 1`` is enforced here.
    """

    rows: int
    num_subcarriers: int
    num_components: int
    num_clusters: int

    def __post_init__(self):
        M, K, P = self.rows, self.num_components, self.num_clusters
        if not M > K:
            raise ValueError(f"need rows M > K, got M={M}, K={K}")
        if self.columns < 1:
            raise ValueError(f"need Q = N - M + 1 >= 1, got Q={self.columns}")
        if not 1 <= P <= K:
            raise ValueError(f"need 1 <= P <= K, got P={P}, K={K}")

    @property
    def columns(self) -> int:
        return self.num_subcarriers - self.rows + 1

    @property
    def single_snapshot_identifiable(self) -> bool:
        return self.columns >= self.num_components

    @classmethod
    def default(cls, num_subcarriers: int, num_components: int, num_clusters: int):
        """``M = K + 1``: the smallest M with ``M > K``.

        This also maximizes Q. When ``N < 2K`` the result has ``Q < K`` and
        relies on snapshot pooling for rank.
        """
        M = num_components + 1
        if M > num_subcarriers:
            raise ValueError(f"no valid M for N={num_subcarriers}, K={num_components}: need N > K")
        cfg = cls(M, num_subcarriers, num_components, num_clusters)
        if not cfg.single_snapshot_identifiable:
            log.info("Q=%d < K=%d; rank comes from pooling snapshots", cfg.columns, num_components)
        return cfg

    @classmethod
    def for_channel(cls, channel: ClusteredChannel, plan: BandPlan, rows: int | None = None):
        K, P = channel.num_components, channel.num_clusters
        if rows is None:
            return cls.default(plan.num_subcarriers, K, P)
        return cls(rows, plan.num_subcarriers, K, P)

    def exponents(self, plan: BandPlan) -> np.ndarray:
        """Row exponents ``m + n_i`` of the block-Hankel matrix."""
        return plan.exponents(self.rows)


def block_hankel(h: np.ndarray, cfg: BlockHankelConfig, num_bands: int) -> np.ndarray:
    """Stack the ``M x Q`` Hankel matrix of every band vertically.

    Entry ``(i*M + m, q)`` is ``h_i[m + q]``.
    """
    h = np.asarray(h)
    N, M, Q = cfg.num_subcarriers, cfg.rows, cfg.columns
    if h.shape[0] != N * num_bands:
        raise ValueError(f"expected length {N * num_bands}, got {h.shape[0]}")
    idx = np.arange(M)[:, None] + np.arange(Q)[None, :]
    bands = h.reshape((num_bands, N) + h.shape[1:])
    return bands[:, idx].reshape((num_bands * M, Q) + h.shape[1:])


def sample_covariance(snapshots: SnapshotSet, cfg: BlockHankelConfig) -> np.ndarray:
    """``1/(S*Q) * sum_s H_s H_s^H`` pooled over all snapshots."""
    L = snapshots.band_plan.num_bands
    H = block_hankel(snapshots.data, cfg, L)  # (LM, Q, S)
    LM = H.shape[0]
    H = H.reshape(LM, -1)
    R = H @ H.conj().T / H.shape[1]
    return (R + R.conj().T) / 2


def expected_covariance(
    channel: ClusteredChannel,
    plan: BandPlan,
    cfg: BlockHankelConfig,
    noise_power: float = 0.0,
) -> np.ndarray:
    """Exact covariance for uncorrelated path gains, with no sampling error.

    Equals ``sum_k |alpha_k|^2 a_M(phi_k) a_M(phi_k)^H + sigma^2 I``, the
    expectation of :func:`sample_covariance` over independent uniform gain
    phases and noise.
    """
    check_channel(channel, plan)
    A = steering_matrix(plan.phase(channel.all_delays), cfg.exponents(plan))
    R = (A * np.abs(channel.all_gains) ** 2) @ A.conj().T
    R += noise_power * np.eye(R.shape[0])
    return (R + R.conj().T) / 2


def normalize_phase(V: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real positive."""
    V = np.array(V, dtype=complex)
    k = np.argmax(np.abs(V), axis=0)
    pivot = V[k, np.arange(V.shape[1])]
    return V * (np.abs(pivot) / pivot)


@dataclass(frozen=True)
class SubspaceDecomposition:
    signal_vectors: np.ndarray
    signal_values: np.ndarray
    noise_vectors: np.ndarray
    noise_power: float
    eigenvalues: np.ndarray
    ill_separated: bool = False

    @property
    def dimension(self) -> int:
        return self.signal_values.size

    def reconstruct(self) -> np.ndarray:
        """Recompose the full matrix from all eigenpairs."""
        V = np.hstack([self.signal_vectors, self.noise_vectors])
        return (V * self.eigenvalues) @ V.conj().T


def eigendecompose(R: np.ndarray, num_signal: int) -> SubspaceDecomposition:
    """Split ``R`` into its top ``num_signal`` eigenpairs and the remainder.

    The noise power estimate is the mean of the discarded eigenvalues.
    Eigenvectors follow :func:`normalize_phase`.
    """
    R = np.asarray(R)
    n = R.shape[0]
    if not 1 <= num_signal < n:
        raise SubspaceError(f"signal dimension {num_signal} invalid for a {n}x{n} matrix")
    try:
        lam, V = np.linalg.eigh((R + R.conj().T) / 2)
    except np.linalg.LinAlgError as exc:
        raise SubspaceError(f"eigendecomposition failed: {exc}") from exc
    order = np.argsort(lam)[::-1]
    lam, V = lam[order], normalize_phase(V[:, order])
    P = num_signal
    gap = lam[P - 1] - lam[P]
    ill = bool(gap < ILL_SEPARATED_RTOL * abs(lam[0]))
    return SubspaceDecomposition(
        signal_vectors=V[:, :P],
        signal_values=lam[:P],
        noise_vectors=V[:, P:],
        noise_power=float(np.mean(lam[P:])),
        eigenvalues=lam,
        ill_separated=ill,
    )
