"""Monte-Carlo RMSE of the LOS delay against the analytic prediction.

Runs the three preset scenarios with a reduced trial count and prints the
result tables. With matplotlib installed, also saves rmse_sweeps.png.

Run: python3 demos/04_rmse_sweeps.py [trials]
"""
import sys

import numpy as np

from multiband_toa.simulation import PRESETS, emit_csv, load_preset, run_scenario

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 100
tables = {}
for name in PRESETS:
    cfg = load_preset(name).replace(trials=trials)
    print(f"\n{name}: sweep {cfg.sweep_variable}, SNR {cfg.snr_db:g} dB, {trials} trials")
    tables[name] = run_scenario(cfg, serial=False)
    emit_csv(tables[name], sys.stdout)

# SNR sweep for scenario 1 at a 1 ns spread
cfg = load_preset("scenario1").replace(
    sweep_variable="snr_db", sweep_values=tuple(np.arange(0.0, 45.0, 5.0)), trials=trials)
print(f"\nscenario1 SNR sweep, dtau = 1 ns, {trials} trials")
tables["snr"] = run_scenario(cfg, serial=False)
emit_csv(tables["snr"], sys.stdout)

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit(0)

fig, axes = plt.subplots(1, 4, figsize=(16, 3.6))
labels = {"delta_tau_ns": "delay offset (ns)", "interferer_power": "interferer power",
          "snr_db": "SNR (dB)"}
for ax, (name, t) in zip(axes, tables.items()):
    x = t.column("sweep")
    ax.semilogy(x, t.column("rmse_emp_ns"), "o-", label="empirical RMSE")
    ax.semilogy(x, t.column("rmse_pred_ns"), "s--", label="predicted RMSE")
    ax.semilogy(x, t.column("bias_pred_ns"), ":", label="predicted bias")
    ax.semilogy(x, t.column("crlb_std_ns"), "-.", label="CRLB std")
    ax.set_xlabel(labels[t.sweep_variable])
    ax.set_title(name)
axes[0].set_ylabel("LOS delay error (ns)")
axes[0].legend(fontsize=8)
fig.tight_layout()
fig.savefig("rmse_sweeps.png", dpi=120)
print("\nsaved rmse_sweeps.png")
