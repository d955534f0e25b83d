"""Band plan, steering vectors and the clustered channel.

Four 12 MHz bands at 10, 50, 80 and 150 MHz, probed on a 1 MHz subcarrier
grid. Each path contributes a column exp(-j*phi*(n + n_i)) with phi the
delay times the subcarrier spacing.

Run: python3 demos/01_band_plan_and_channel.py
"""
import numpy as np

from multiband_toa import (
    BandPlan,
    ClusteredChannel,
    cluster_approx,
    exact_frequency_response,
    first_order_response,
    steering_vector,
)

plan = BandPlan.from_mhz([10, 50, 80, 150], num_subcarriers=12, bandwidth_mhz=12)
print("band offsets (subcarriers):", plan.band_offsets)
print(f"spanned bandwidth: {plan.spanned_bandwidth / (2 * np.pi) / 1e6:.0f} MHz")

# A 5 ns path: phase 2*pi*1MHz*5ns
phi = plan.phase(5e-9)
a = steering_vector(phi, plan)
print(f"phi(5 ns) = {phi:.5f} rad, steering vector length {a.size}")
print("first entry of each band:", np.round(a.reshape(4, 12)[:, 0], 4))

# The scenario-1 channel: LOS cluster with one unresolved path 1 ns later
channel = ClusteredChannel.from_powers(
    [[1.0, 0.5], [0.85, 0.55, 0.35], [0.55]],
    [[5.0, 6.0], [33.0, 33.5, 34.0], [95.0]],
)
approx = cluster_approx(channel, plan)
print("\ncluster powers:", approx.cluster_powers)
print("power-weighted offsets e_p (rad):", np.round(approx.e_vector, 6))

# How good is the first-order lumped model? Error grows with the spread
# and with the largest band exponent.
for spread in (0.1, 0.5, 1.0, 3.0):
    ch = ClusteredChannel.from_powers([[1.0, 0.5], [0.8]], [[5.0, 5.0 + spread], [60.0]])
    h = exact_frequency_response(ch, plan)
    h1 = first_order_response(cluster_approx(ch, plan), plan)
    print(f"spread {spread:3.1f} ns: relative model error {np.linalg.norm(h - h1) / np.linalg.norm(h):.4f}")
