"""Multiband frequency grid, clustered channel and snapshot synthesis.

All phases are measured relative to the lowest probed frequency ``omega_0``:
subcarrier ``n`` of band ``i`` sits at ``omega_0 + (n + n_i) * omega_s`` and a
path with delay ``tau`` contributes ``exp(-1j * (n + n_i) * omega_s * tau)``.
The carrier term ``exp(-1j * omega_0 * tau)`` is absorbed into the gains.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AliasingError

TWO_PI = 2.0 * np.pi


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BandPlan:
    """Frequency sampling grid of ``num_bands`` bands with ``num_subcarriers`` each.

    ``subcarrier_spacing`` and ``base_frequency`` are angular (rad/s).
    ``band_offsets`` are the integer grid offsets ``n_i`` of each band, with
    ``n_0 = 0``.
    """

    num_subcarriers: int
    subcarrier_spacing: float
    band_offsets: tuple[int, ...]
    base_frequency: float = 0.0

    def __post_init__(self):
        offsets = tuple(int(n) for n in self.band_offsets)
        if any(int(n) != n for n in self.band_offsets):
            raise ValueError(f"band offsets must be integers, got {self.band_offsets}")
        object.__setattr__(self, "band_offsets", offsets)
        if self.num_subcarriers < 1:
            raise ValueError("num_subcarriers must be positive")
        if self.subcarrier_spacing <= 0:
            raise ValueError("subcarrier_spacing must be positive")
        if not offsets or offsets[0] != 0:
            raise ValueError("band offsets must start at 0")
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise ValueError(f"band offsets must be strictly increasing, got {offsets}")

    @classmethod
    def from_mhz(cls, centers_mhz: Sequence[float], num_subcarriers: int, bandwidth_mhz: float):
        """Build a plan from band centers and per-band bandwidth in MHz.

        The spacing is ``bandwidth / num_subcarriers``; every center must be
        an integer multiple of it.
        """
        spacing_mhz = bandwidth_mhz / num_subcarriers
        grid = []
        for c in centers_mhz:
            n = c / spacing_mhz
            if abs(n - round(n)) > 1e-9 * max(1.0, abs(n)):
                raise ValueError(f"band center {c} MHz is not on the {spacing_mhz:g} MHz subcarrier grid")
            grid.append(int(round(n)))
        offsets = [n - grid[0] for n in grid]
        return cls(
            num_subcarriers=int(num_subcarriers),
            subcarrier_spacing=TWO_PI * spacing_mhz * 1e6,
            band_offsets=tuple(offsets),
            base_frequency=TWO_PI * centers_mhz[0] * 1e6,
        )

    @property
    def num_bands(self) -> int:
        return len(self.band_offsets)

    @property
    def bandwidth(self) -> float:
        """Per-band bandwidth ``B = N * omega_s`` in rad/s."""
        return self.num_subcarriers * self.subcarrier_spacing

    @property
    def band_centers(self) -> np.ndarray:
        return self.base_frequency + np.asarray(self.band_offsets) * self.subcarrier_spacing

    @property
    def spanned_bandwidth(self) -> float:
        """Angular width from the lowest to one past the highest probed subcarrier."""
        return (self.band_offsets[-1] + self.num_subcarriers) * self.subcarrier_spacing

    def exponents(self, rows: int | None = None) -> np.ndarray:
        """Grid exponents ``n + n_i`` stacked band by band.

        ``rows`` truncates each band to its first ``rows`` subcarriers, which
        gives the row layout of the block-Hankel matrix.
        """
        rows = self.num_subcarriers if rows is None else rows
        if not 1 <= rows <= self.num_subcarriers:
            raise ValueError(f"rows must be in [1, {self.num_subcarriers}], got {rows}")
        n = np.arange(rows)
        return (np.asarray(self.band_offsets)[:, None] + n[None, :]).ravel()

    def phase(self, delay):
        """Phase ``omega_s * tau`` for delays in seconds."""
        return self.subcarrier_spacing * np.asarray(delay, dtype=float)


@dataclass(frozen=True)
class ClusteredChannel:
    """Clusters of multipath components, one gain/delay array per cluster.

    Gains are complex linear amplitudes, delays are in seconds. The first
    component of each cluster is its anchor; component ``(0, 0)`` is the LOS.
    """

    gains: tuple[np.ndarray, ...]
    delays: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.gains) != len(self.delays) or not self.gains:
            raise ValueError("need the same, nonzero number of gain and delay clusters")
        gains = tuple(_frozen(np.atleast_1d(g), complex) for g in self.gains)
        delays = tuple(_frozen(np.atleast_1d(d), float) for d in self.delays)
        for p, (g, d) in enumerate(zip(gains, delays)):
            if g.ndim != 1 or g.shape != d.shape or g.size == 0:
                raise ValueError(f"cluster {p}: gains and delays must be equal-length 1-D")
            if np.any(np.diff(d) < 0):
                raise ValueError(f"cluster {p}: delays must be nondecreasing, got {d}")
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "delays", delays)

    @classmethod
    def from_powers(cls, powers, delays_ns, phases=None):
        """Channel with ``|alpha|^2 = powers`` and delays in nanoseconds.

        ``phases`` (radians, same nesting) defaults to zero.
        """
        if phases is None:
            phases = [np.zeros(len(p)) for p in powers]
        gains = [np.sqrt(np.asarray(p, float)) * np.exp(1j * np.asarray(ph, float))
                 for p, ph in zip(powers, phases)]
        return cls(tuple(gains), tuple(np.asarray(d, float) * 1e-9 for d in delays_ns))

    @property
    def num_clusters(self) -> int:
        return len(self.gains)

    @property
    def cluster_sizes(self) -> tuple[int, ...]:
        return tuple(g.size for g in self.gains)

    @property
    def num_components(self) -> int:
        return sum(self.cluster_sizes)

    @property
    def all_gains(self) -> np.ndarray:
        return np.concatenate(self.gains)

    @property
    def all_delays(self) -> np.ndarray:
        return np.concatenate(self.delays)

    @property
    def anchor_delays(self) -> np.ndarray:
        return np.array([d[0] for d in self.delays])

    @property
    def cluster_powers(self) -> np.ndarray:
        return np.array([np.sum(np.abs(g) ** 2) for g in self.gains])

    def with_gains(self, gains) -> "ClusteredChannel":
        """Same delays, new flat gain vector (cluster order)."""
        gains = np.asarray(gains, complex)
        splits = np.cumsum(self.cluster_sizes)[:-1]
        return ClusteredChannel(tuple(np.split(gains, splits)), self.delays)


def check_channel(channel: ClusteredChannel, plan: BandPlan) -> None:
    """Raise on aliasing, warn when consecutive clusters are not resolvable.

    Resolvability is judged against the total spanned bandwidth of the plan,
    the resolution the multiband estimator actually has.
    """
    for tau in channel.all_delays:
        phi = float(plan.phase(tau))
        if not 0.0 <= phi < TWO_PI:
            raise AliasingError(float(tau), phi)
    resolution = TWO_PI / plan.spanned_bandwidth
    for p in range(channel.num_clusters - 1):
        gap = channel.delays[p + 1][0] - channel.delays[p][-1]
        if gap < resolution:
            warnings.warn(
                f"clusters {p} and {p + 1} are {gap * 1e9:.3g} ns apart, below the "
                f"{resolution * 1e9:.3g} ns resolution of the band plan",
                stacklevel=2,
            )


def steering_matrix(phases, exponents) -> np.ndarray:
    """Columns ``exp(-1j * phi * exponents)``, one per phase."""
    return np.exp(-1j * np.outer(exponents, np.atleast_1d(phases)))


def steering_derivative_matrix(phases, exponents) -> np.ndarray:
    exponents = np.asarray(exponents)
    return -1j * exponents[:, None] * steering_matrix(phases, exponents)


def steering_vector(phi: float, plan: BandPlan, rows: int | None = None) -> np.ndarray:
    """Multiband steering vector ``a(phi)`` with entries ``exp(-1j*phi*(n + n_i))``."""
    return steering_matrix(phi, plan.exponents(rows))[:, 0]


def steering_derivative(phi: float, plan: BandPlan, rows: int | None = None) -> np.ndarray:
    """``d a / d phi``, entries ``-1j*(n + n_i)*exp(-1j*phi*(n + n_i))``."""
    return steering_derivative_matrix(phi, plan.exponents(rows))[:, 0]


def exact_frequency_response(channel: ClusteredChannel, plan: BandPlan) -> np.ndarray:
    """Noiseless multiband channel vector of length ``N * L``."""
    check_channel(channel, plan)
    A = steering_matrix(plan.phase(channel.all_delays), plan.exponents())
    return A @ channel.all_gains


@dataclass(frozen=True)
class ClusterApprox:
    """Per-cluster quantities of the first-order intra-cluster expansion.

    ``anchor_phases``: phase of each cluster's first component.
    ``lumped_gains``: sum of the cluster gains.
    ``gamma``: gain-weighted phase offset, normalised by the lumped gain.
    ``e_vector``: power-weighted phase offset, ``sum_k |alpha_k|^2 dphi_k``.
    ``cluster_powers``: ``sum_k |alpha_k|^2``.
    """

    anchor_phases: np.ndarray
    lumped_gains: np.ndarray
    gamma: np.ndarray
    e_vector: np.ndarray
    cluster_powers: np.ndarray

    @property
    def num_clusters(self) -> int:
        return self.anchor_phases.size


def cluster_approx(channel: ClusteredChannel, plan: BandPlan) -> ClusterApprox:
    anchors, lumped, gamma, e, power = [], [], [], [], []
    for g, d in zip(channel.gains, channel.delays):
        dphi = plan.phase(d - d[0])
        alpha = g.sum()
        anchors.append(float(plan.phase(d[0])))
        lumped.append(alpha)
        e.append(float(np.sum(np.abs(g[1:]) ** 2 * dphi[1:])))
        power.append(float(np.sum(np.abs(g) ** 2)))
        spread = np.sum(g[1:] * dphi[1:])
        gamma.append(spread / alpha if g.size > 1 else 0j)
    return ClusterApprox(
        anchor_phases=_frozen(anchors, float),
        lumped_gains=_frozen(lumped, complex),
        gamma=_frozen(gamma, complex),
        e_vector=_frozen(e, float),
        cluster_powers=_frozen(power, float),
    )


def first_order_response(approx: ClusterApprox, plan: BandPlan) -> np.ndarray:
    """``[A(phi) + D diag(gamma)] alpha`` evaluated at the cluster anchors."""
    ex = plan.exponents()
    A = steering_matrix(approx.anchor_phases, ex)
    D = steering_derivative_matrix(approx.anchor_phases, ex)
    return (A + D * approx.gamma) @ approx.lumped_gains


def noise_power_for_snr(channel: ClusteredChannel, snr_db: float) -> float:
    """Noise power giving ``snr_db`` relative to the LOS-cluster power."""
    return float(channel.cluster_powers[0] / 10.0 ** (snr_db / 10.0))


@dataclass(frozen=True)
class SnapshotSet:
    """``NL x S`` matrix of noisy multiband measurements, bands stacked by rows."""

    data: np.ndarray
    noise_power: float
    band_plan: BandPlan
    seed: int | None = None
    random_phases: bool = field(default=False)

    @property
    def num_snapshots(self) -> int:
        return self.data.shape[1]

    def band(self, i: int) -> np.ndarray:
        N = self.band_plan.num_subcarriers
        return self.data[i * N:(i + 1) * N]


def synthesize_snapshots(
    channel: ClusteredChannel,
    plan: BandPlan,
    num_snapshots: int,
    noise_power: float,
    seed: int | np.random.SeedSequence | None = None,
    random_phases: bool = False,
) -> SnapshotSet:
    """Draw ``num_snapshots`` noisy channel measurements.

    The noise is circularly-symmetric complex Gaussian with total variance
    ``noise_power`` per entry. With ``random_phases`` every snapshot rotates
    each path gain by an independent uniform phase, so the gain covariance
    averages to ``diag(|alpha|^2)``.
    """
    if num_snapshots < 1:
        raise ValueError("num_snapshots must be at least 1")
    if noise_power < 0:
        raise ValueError("noise_power must be nonnegative")
    check_channel(channel, plan)
    rng = np.random.default_rng(seed)
    A = steering_matrix(plan.phase(channel.all_delays), plan.exponents())
    gains = channel.all_gains
    K = gains.size
    if random_phases:
        rot = np.exp(1j * rng.uniform(0.0, TWO_PI, size=(K, num_snapshots)))
        signal = A @ (gains[:, None] * rot)
    else:
        signal = np.repeat((A @ gains)[:, None], num_snapshots, axis=1)
    shape = signal.shape
    noise = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    data = signal + np.sqrt(noise_power / 2.0) * noise
    data.setflags(write=False)
    seed_value = int(seed) if isinstance(seed, (int, np.integer)) else None
    return SnapshotSet(data, float(noise_power), plan, seed_value, random_phases)
