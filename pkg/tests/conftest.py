import numpy as np
import pytest

from multiband_toa import BandPlan, BlockHankelConfig, ClusteredChannel


@pytest.fixture
def plan():
    return BandPlan.from_mhz([10, 50, 80, 150], 12, 12)


@pytest.fixture
def scenario1_channel():
    return ClusteredChannel.from_powers(
        [[1.0, 0.5], [0.85, 0.55, 0.35], [0.55]],
        [[5.0, 6.0], [33.0, 33.5, 34.0], [95.0]],
    )


@pytest.fixture
def singleton_channel():
    return ClusteredChannel.from_powers([[1.0], [0.8], [0.5]], [[5.0], [33.0], [95.0]])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_instance(rng, plan, num_clusters=3, spread_ns=0.5):
    """Random well-separated clustered channel with two paths in the first cluster."""
    while True:
        anchors = np.sort(rng.uniform(2.0, 400.0, num_clusters))
        if np.min(np.diff(anchors)) > 15.0:
            break
    powers, delays = [], []
    for p, a in enumerate(anchors):
        k = 2 if p == 0 else int(rng.integers(1, 3))
        offs = np.concatenate([[0.0], np.sort(rng.uniform(0.05, spread_ns, k - 1))])
        powers.append(list(rng.uniform(0.3, 1.0, k)))
        delays.append(list(a + offs))
    phases = [list(rng.uniform(0, 2 * np.pi, len(p))) for p in powers]
    ch = ClusteredChannel.from_powers(powers, delays, phases)
    return ch, BlockHankelConfig.for_channel(ch, plan)
