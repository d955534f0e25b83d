"""Analytic first-order bias versus the noiseless estimator.

The perturbation E captures the intra-cluster spread. A single Newton step
of the fitting cost, evaluated with the first-order perturbed subspace,
predicts how far each cluster anchor moves.

Run: python3 demos/03_bias_prediction.py
"""
import numpy as np

from multiband_toa import (
    BandPlan,
    BlockHankelConfig,
    ClusteredChannel,
    build_perturbation,
    cluster_approx,
    estimate_from_covariance,
    expected_covariance,
    model_covariance,
    predict_bias,
)

plan = BandPlan.from_mhz([10, 50, 80, 150], 12, 12)

print(" dtau  predicted  fit(model cov)  fit(exact cov)   [LOS bias, ns]")
for dtau in (0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0):
    ch = ClusteredChannel.from_powers(
        [[1.0, 0.5], [0.85, 0.55, 0.35], [0.55]],
        [[5.0, 5.0 + dtau], [33.0, 33.5, 34.0], [95.0]],
    )
    cfg = BlockHankelConfig.for_channel(ch, plan)
    model = build_perturbation(cluster_approx(ch, plan), plan, cfg)
    pred = predict_bias(model).bias_delay[0]
    fit_model = estimate_from_covariance(model_covariance(model), plan, cfg).delays[0]
    fit_exact = estimate_from_covariance(expected_covariance(ch, plan, cfg), plan, cfg).delays[0]
    los = ch.anchor_delays[0]
    print(f"{dtau:5.2f}  {pred * 1e9:9.4f}  {(fit_model - los) * 1e9:14.4f}  {(fit_exact - los) * 1e9:14.4f}")

# With identity weighting the prediction is the power-weighted centroid
# offset of each cluster, e_p / sigma_p^2.
print("\nAt small spreads both fits sit about 0.011 ns either side of the prediction:")
print("the second cluster's own 1 ns spread leaks into the LOS estimate at second order.")
print("The fits part ways from the prediction once the phase spread times the")
print("largest band exponent (146) nears 1 rad.")
