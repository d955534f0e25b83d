"""Scenario configuration, Monte-Carlo sweeps and result serialization.

Config files are TOML with ``schema_version = 1``; see ``docs/config.md``.
Delays in configs and outputs are nanoseconds, everything internal is SI.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .bias import build_perturbation, predict_bias
from .errors import ConfigError, MultibandError, TrialError
from .hankel import BlockHankelConfig
from .metrics import MetricSeries, crlb_phase_variance, empirical_rmse, predicted_rmse
from .model import (
    BandPlan,
    ClusteredChannel,
    check_channel,
    cluster_approx,
    noise_power_for_snr,
    synthesize_snapshots,
)
from .wsf import WeightingMode, estimate_delays

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SWEEP_VARIABLES = ("snr_db", "delta_tau_ns", "interferer_power")
GAIN_PHASE_MODES = ("random", "fixed")
PRESETS = ("scenario1", "scenario2", "scenario3")
CSV_HEADER = ("sweep", "rmse_emp_ns", "rmse_pred_ns", "bias_pred_ns", "crlb_std_ns", "excluded")

_SCHEMA = {
    "schema_version": None,
    "name": None,
    "band": {"centers_mhz", "num_subcarriers", "bandwidth_mhz", "num_bands"},
    "channel": {"powers", "delays_ns", "gain_phase"},
    "sweep": {"variable", "values", "target", "snr_db"},
    "run": {"snapshots", "trials", "seed", "weighting", "rows"},
}


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    centers_mhz: tuple[float, ...]
    num_subcarriers: int
    bandwidth_mhz: float
    powers: tuple[tuple[float, ...], ...]
    delays_ns: tuple[tuple[float, ...], ...]
    sweep_variable: str
    sweep_values: tuple[float, ...]
    snr_db: float = 30.0
    sweep_target: tuple[int, int] = (0, 1)
    snapshots: int = 32
    trials: int = 1000
    seed: int = 0
    weighting: str = "identity"
    gain_phase: str = "random"
    rows: int | None = None

    def band_plan(self) -> BandPlan:
        return BandPlan.from_mhz(self.centers_mhz, self.num_subcarriers, self.bandwidth_mhz)

    def point(self, index: int) -> tuple[ClusteredChannel, float]:
        """Channel and SNR at sweep point ``index``."""
        value = self.sweep_values[index]
        powers = [list(p) for p in self.powers]
        delays = [list(d) for d in self.delays_ns]
        snr = self.snr_db
        p, k = self.sweep_target
        if self.sweep_variable == "snr_db":
            snr = value
        elif self.sweep_variable == "delta_tau_ns":
            delays[p][k] = delays[p][0] + value
        else:
            powers[p][k] = value * powers[p][0]
        return ClusteredChannel.from_powers(powers, delays), snr

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


def _line_of(text: str, section: str | None, key: str) -> int | None:
    current = None
    for n, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        m = re.match(r"\[([^\]]+)\]", stripped)
        if m:
            current = m.group(1).strip()
            continue
        if current == section and re.match(rf"{re.escape(key)}\s*=", stripped):
            return n
    return None


def parse_config(text: str) -> ScenarioConfig:
    """Validate TOML text into a :class:`ScenarioConfig`."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"not valid TOML: {exc}") from exc

    def fail(msg, section, key):
        name = key if section is None else f"{section}.{key}"
        raise ConfigError(msg, field=name, line=_line_of(text, section, key))

    for key, value in raw.items():
        if key not in _SCHEMA:
            fail("unknown key", None, key)
        allowed = _SCHEMA[key]
        if allowed is not None:
            if not isinstance(value, dict):
                fail("expected a table", None, key)
            for sub in value:
                if sub not in allowed:
                    fail("unknown key", key, sub)

    def get(section, key, default=dataclasses.MISSING):
        table = raw if section is None else raw.get(section, {})
        if key in table:
            return table[key]
        if default is dataclasses.MISSING:
            name = key if section is None else f"{section}.{key}"
            raise ConfigError("missing required field", field=name)
        return default

    version = get(None, "schema_version")
    if version != SCHEMA_VERSION:
        fail(f"unsupported schema_version {version!r}, expected {SCHEMA_VERSION}",
             None, "schema_version")

    centers = tuple(float(c) for c in get("band", "centers_mhz"))
    n_sub = int(get("band", "num_subcarriers"))
    bw = float(get("band", "bandwidth_mhz"))
    n_bands = get("band", "num_bands", None)
    if n_bands is not None and n_bands != len(centers):
        fail(f"num_bands={n_bands} but {len(centers)} centers given", "band", "num_bands")
    try:
        BandPlan.from_mhz(centers, n_sub, bw)
    except ValueError as exc:
        fail(str(exc), "band", "centers_mhz")

    powers = tuple(tuple(float(x) for x in c) for c in get("channel", "powers"))
    delays = tuple(tuple(float(x) for x in c) for c in get("channel", "delays_ns"))
    if [len(c) for c in powers] != [len(c) for c in delays]:
        fail("cluster sizes of powers and delays_ns differ", "channel", "delays_ns")
    gain_phase = get("channel", "gain_phase", "random")
    if gain_phase not in GAIN_PHASE_MODES:
        fail(f"must be one of {GAIN_PHASE_MODES}", "channel", "gain_phase")

    variable = get("sweep", "variable")
    if variable not in SWEEP_VARIABLES:
        fail(f"must be one of {SWEEP_VARIABLES}", "sweep", "variable")
    values = tuple(float(v) for v in get("sweep", "values"))
    if not values:
        fail("sweep needs at least one value", "sweep", "values")
    target = tuple(int(t) for t in get("sweep", "target", (0, 1)))
    if variable != "snr_db":
        if len(target) != 2 or not (0 <= target[0] < len(delays)
                                    and 1 <= target[1] < len(delays[target[0]])):
            fail(f"target {list(target)} is not a non-anchor path", "sweep", "target")

    weighting = get("run", "weighting", "identity")
    if weighting not in ("identity", "eigen"):
        fail("must be 'identity' or 'eigen'", "run", "weighting")
    rows = get("run", "rows", None)

    cfg = ScenarioConfig(
        name=str(get(None, "name", "custom")),
        centers_mhz=centers,
        num_subcarriers=n_sub,
        bandwidth_mhz=bw,
        powers=powers,
        delays_ns=delays,
        sweep_variable=variable,
        sweep_values=values,
        snr_db=float(get("sweep", "snr_db", 30.0)),
        sweep_target=target if len(target) == 2 else (0, 1),
        snapshots=int(get("run", "snapshots", 32)),
        trials=int(get("run", "trials", 1000)),
        seed=int(get("run", "seed", 0)),
        weighting=weighting,
        gain_phase=gain_phase,
        rows=None if rows is None else int(rows),
    )
    if cfg.snapshots < 1:
        fail("must be >= 1", "run", "snapshots")
    if cfg.trials < 0:
        fail("must be >= 0", "run", "trials")
    if not 0 <= cfg.seed < 2 ** 64:
        fail("must fit in an unsigned 64-bit integer", "run", "seed")
    for j in range(len(values)):
        try:
            channel, _ = cfg.point(j)
            plan = cfg.band_plan()
            check_channel(channel, plan)
            BlockHankelConfig.for_channel(channel, plan, cfg.rows)
        except ValueError as exc:
            section, key = {
                "delta_tau_ns": ("sweep", "values"),
                "interferer_power": ("sweep", "values"),
            }.get(variable, ("channel", "delays_ns"))
            fail(f"sweep point {j}: {exc}", section, key)
    return cfg


def load_config(path) -> ScenarioConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def load_preset(name: str) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}, choose from {PRESETS}")
    text = resources.files(__package__).joinpath("presets", f"{name}.toml").read_text("utf-8")
    return parse_config(text)


def dump_config(cfg: ScenarioConfig) -> str:
    """Serialize to the same TOML schema that :func:`parse_config` reads."""
    run = {
        "snapshots": cfg.snapshots,
        "trials": cfg.trials,
        "seed": cfg.seed,
        "weighting": cfg.weighting,
    }
    if cfg.rows is not None:
        run["rows"] = cfg.rows
    doc = {
        "schema_version": SCHEMA_VERSION,
        "name": cfg.name,
        "band": {
            "centers_mhz": list(cfg.centers_mhz),
            "num_subcarriers": cfg.num_subcarriers,
            "bandwidth_mhz": cfg.bandwidth_mhz,
        },
        "channel": {
            "powers": [list(c) for c in cfg.powers],
            "delays_ns": [list(c) for c in cfg.delays_ns],
            "gain_phase": cfg.gain_phase,
        },
        "sweep": {
            "variable": cfg.sweep_variable,
            "values": list(cfg.sweep_values),
            "target": list(cfg.sweep_target),
            "snr_db": cfg.snr_db,
        },
        "run": run,
    }
    return tomli_w.dumps(doc)


def trial_seed(master_seed: int, sweep_index: int, trial_index: int) -> int:
    """64-bit seed, a pure function of the three indices."""
    ss = np.random.SeedSequence([int(master_seed), int(sweep_index), int(trial_index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class ResultRow:
    sweep: float
    rmse_emp_ns: float
    rmse_pred_ns: float
    bias_pred_ns: float
    crlb_std_ns: float
    excluded: float
    snr_db: float = math.nan

    def csv_values(self):
        return (self.sweep, self.rmse_emp_ns, self.rmse_pred_ns,
                self.bias_pred_ns, self.crlb_std_ns, self.excluded)


@dataclass(frozen=True)
class ResultTable:
    sweep_variable: str
    rows: tuple[ResultRow, ...]
    name: str = ""
    trials: int = 0
    errors_ns: tuple[np.ndarray, ...] = field(default=(), compare=False, repr=False)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def metric_series(self) -> MetricSeries:
        """Same numbers in seconds, keyed by SNR."""
        ns = 1e-9
        return MetricSeries(
            snr_db=self.column("snr_db"),
            rmse_empirical=self.column("rmse_emp_ns") * ns,
            rmse_predicted=self.column("rmse_pred_ns") * ns,
            bias_predicted=self.column("bias_pred_ns") * ns,
            crlb_std=self.column("crlb_std_ns") * ns,
            trials=self.trials,
        )


def analytic_point(cfg: ScenarioConfig, index: int):
    """Predicted LOS bias and CRLB at one sweep point, in seconds.

    Returns ``(bias, crlb_std, noise_power, channel, plan, hankel_cfg)``.
    """
    channel, snr = cfg.point(index)
    plan = cfg.band_plan()
    hcfg = BlockHankelConfig.for_channel(channel, plan, cfg.rows)
    noise_power = noise_power_for_snr(channel, snr)
    approx = cluster_approx(channel, plan)
    model = build_perturbation(approx, plan, hcfg, noise_power)
    report = predict_bias(model, WeightingMode(cfg.weighting))
    var = crlb_phase_variance(model.A, model.D, approx.cluster_powers, noise_power,
                              cfg.snapshots * hcfg.columns)
    ws = plan.subcarrier_spacing
    return (float(report.bias_delay[0]), float(np.sqrt(var[0]) / ws),
            noise_power, channel, plan, hcfg)


def _run_trials(args):
    cfg, index, trial_indices = args
    _, _, noise_power, channel, plan, hcfg = analytic_point(cfg, index)
    mode = WeightingMode(cfg.weighting)
    out = []
    for t in trial_indices:
        try:
            snaps = synthesize_snapshots(
                channel, plan, cfg.snapshots, noise_power,
                seed=trial_seed(cfg.seed, index, t),
                random_phases=cfg.gain_phase == "random",
            )
            fit = estimate_delays(snaps, hcfg, mode)
        except MultibandError as exc:
            raise TrialError(index, t, exc) from exc
        out.append((fit.delays, fit.converged))
    return out


def _chunks(n, k):
    bounds = np.linspace(0, n, k + 1).astype(int)
    return [range(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def run_scenario(cfg: ScenarioConfig, serial: bool = True, workers: int | None = None) -> ResultTable:
    """Analytic prediction and Monte-Carlo RMSE of the LOS delay at every sweep point.

    Trial ``t`` of sweep point ``j`` always uses ``trial_seed(seed, j, t)`` and
    results are merged in trial order, so serial and parallel runs agree.
    """
    if workers is None:
        workers = os.cpu_count() or 1
    parallel = not serial and workers > 1 and cfg.trials > 1
    rows, errors = [], []
    pool = ProcessPoolExecutor(max_workers=workers) if parallel else None
    try:
        for j, value in enumerate(cfg.sweep_values):
            bias, crlb_std, _, channel, _, _ = analytic_point(cfg, j)
            rmse_pred = float(predicted_rmse(bias, crlb_std ** 2))
            _, snr = cfg.point(j)
            rmse_emp, excluded = math.nan, 0.0
            if cfg.trials > 0:
                if pool is None:
                    results = _run_trials((cfg, j, range(cfg.trials)))
                else:
                    parts = pool.map(_run_trials,
                                     [(cfg, j, c) for c in _chunks(cfg.trials, workers)])
                    results = [r for part in parts for r in part]
                estimates = [r[0] for r in results]
                converged = [r[1] for r in results]
                truth = channel.anchor_delays
                summary = empirical_rmse(estimates, truth, 0, converged)
                rmse_emp = summary.rmse * 1e9
                excluded = summary.exclusion_rate
                errors.append(np.array([e[0] for e in estimates]) * 1e9 - truth[0] * 1e9)
                log.info("%s point %d (%g): rmse %.4g ns, predicted %.4g ns",
                         cfg.name, j, value, rmse_emp, rmse_pred * 1e9)
            rows.append(ResultRow(
                sweep=float(value),
                rmse_emp_ns=rmse_emp,
                rmse_pred_ns=rmse_pred * 1e9,
                bias_pred_ns=bias * 1e9,
                crlb_std_ns=crlb_std * 1e9,
                excluded=float(excluded),
                snr_db=float(snr),
            ))
    finally:
        if pool is not None:
            pool.shutdown()
    return ResultTable(cfg.sweep_variable, tuple(rows), cfg.name, cfg.trials, tuple(errors))


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.6g}"


def emit_csv(table: ResultTable, path) -> None:
    """Write the table as CSV, every number with 6 significant digits.

    ``path`` may also be an open text stream.
    """
    if not table.rows:
        raise ValueError("empty result table")
    if hasattr(path, "write"):
        _write_csv(table, path)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        _write_csv(table, fh)


def _write_csv(table, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in table.rows:
        writer.writerow([_fmt(v) for v in row.csv_values()])


def read_csv(path, sweep_variable: str = "") -> ResultTable:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        rows = tuple(ResultRow(*(float(v) for v in line)) for line in reader)
    return ResultTable(sweep_variable, rows)


def emit_plotdata(table: ResultTable, path) -> None:
    """JSON with one array per series at full precision; NaN becomes null."""
    if not table.rows:
        raise ValueError("empty result table")

    def series(name):
        return [None if math.isnan(v) else float(v) for v in table.column(name)]

    doc = {
        "scenario": table.name,
        "sweep_variable": table.sweep_variable,
        "trials": table.trials,
        "x": series("sweep"),
        "series": {
            "rmse_empirical_ns": series("rmse_emp_ns"),
            "rmse_predicted_ns": series("rmse_pred_ns"),
            "bias_predicted_ns": series("bias_pred_ns"),
            "crlb_std_ns": series("crlb_std_ns"),
            "excluded": series("excluded"),
        },
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
