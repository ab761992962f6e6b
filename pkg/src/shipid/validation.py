"""Prediction validation: n-step horizon errors and model comparison tables.

``predict_n_steps`` partitions a log into windows of n steps, re-anchors the
whole-ship model at the measured state at each window start and accumulates
per-channel RMSE over every predicted sample. Horizon 1 therefore coincides
with the equation-error residual view of the data; the full-length horizon
is the output-error rollout.

Relative errors are reported as 100 * RMSE(pred - meas) / RMS(meas), pooled
over the dataset; channels whose measured RMS is zero are not applicable.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import model
from .actuation import ThrusterModel, default_thruster
from .dataio import (Dataset, ManeuverLog, finite_difference_pose,
                     thread_count)
from .errors import InsufficientDataError, IntegrationBlowupError, ShipIdError
from .params import ShipParams6, ShipParams22

__all__ = [
    "CHANNELS",
    "COMPARISON_VARIABLES",
    "PredictionReport",
    "ComparisonReport",
    "rmse",
    "predict_n_steps",
    "full_rollout",
    "relative_error_table",
    "validation_suite",
]

CHANNELS = ("x", "y", "psi", "u", "v", "r", "alpha1", "alpha2")
_CHANNEL_IDX = {"alpha1": 0, "alpha2": 1, "x": 2, "y": 3, "psi": 4,
                "u": 5, "v": 6, "r": 7}

COMPARISON_VARIABLES = (
    "surge_vel", "sway_vel", "yaw_vel",
    "surge_acc", "sway_acc", "yaw_acc",
    "surge_dist", "sway_dist", "yaw_dist",
)


@dataclass
class PredictionReport:
    maneuver: str
    horizon: int
    rmse: dict                      # channel -> value
    predicted: np.ndarray           # (N, 8), anchors carried over
    measured: np.ndarray            # (N, 8)

    def to_dict(self) -> dict:
        return {"maneuver": self.maneuver, "horizon": self.horizon,
                "rmse": {k: float(v) for k, v in self.rmse.items()}}


@dataclass
class ComparisonReport:
    """Per-variable relative errors of two models; None marks a channel
    whose measured RMS vanishes."""

    entries: dict = field(default_factory=dict)   # var -> {"full": x, "baseline": y}
    metric: str = "100 * RMSE(pred - meas) / RMS(meas), pooled over maneuvers"

    def to_dict(self) -> dict:
        return {"metric": self.metric, "entries": self.entries}


def rmse(predicted, measured) -> np.ndarray:
    """Per-channel root-mean-square difference of two equally long series.

    Heading channels are expected unwrapped; no angle reduction happens here.
    """
    p = np.asarray(predicted, dtype=float)
    m = np.asarray(measured, dtype=float)
    if p.shape != m.shape:
        raise ShipIdError(f"series shapes differ: {p.shape} vs {m.shape}")
    if p.shape[0] < 1:
        raise ShipIdError("series must contain at least one sample")
    d = p - m
    return np.sqrt(np.mean(d * d, axis=0))


def predict_n_steps(p: ShipParams22, thr: Optional[ThrusterModel],
                    log: ManeuverLog, n: int) -> PredictionReport:
    """n-step horizon prediction with re-anchoring at measured states."""
    if n < 1:
        raise ShipIdError(f"horizon must be at least 1, got {n}")
    thr = thr or default_thruster()
    steps_total = len(log) - 1
    if steps_total < n:
        raise InsufficientDataError(
            f"maneuver '{log.label}' has {steps_total} steps, shorter than horizon {n}")
    states = log.measured_states()

    starts = np.arange(0, steps_total, n)
    lengths = np.minimum(n, steps_total - starts)
    w = len(starts)
    cmds_w = np.zeros((w, n, 4))
    for i, (s, ln) in enumerate(zip(starts, lengths)):
        cmds_w[i, :ln] = log.cmds[s:s + ln]
        cmds_w[i, ln:] = log.cmds[s + ln - 1]
    traj = model.rollout_batch(p.as_array(), thr, states[starts], cmds_w, log.dt)

    predicted = states.copy()
    for i, (s, ln) in enumerate(zip(starts, lengths)):
        predicted[s + 1:s + ln + 1] = traj[i, 1:ln + 1]
    if not np.all(np.isfinite(predicted)):
        raise IntegrationBlowupError(
            f"prediction blew up on maneuver '{log.label}' at horizon {n}")

    mask = np.ones(len(log), dtype=bool)
    mask[starts] = False
    mask[0] = False
    vals = rmse(predicted[mask], states[mask])
    per_channel = {name: float(vals[_CHANNEL_IDX[name]]) for name in CHANNELS}
    return PredictionReport(log.label, int(n), per_channel, predicted, states)


def full_rollout(p: ShipParams22, thr: Optional[ThrusterModel],
                 log: ManeuverLog) -> np.ndarray:
    """Whole-maneuver rollout from the measured initial state: (N, 8)."""
    thr = thr or default_thruster()
    states = log.measured_states()
    steps = len(log) - 1
    traj = model.simulate(p, thr, states[0], log.cmds[:steps], log.dt)
    return traj


def _comparison_accumulate(p: ShipParams22, thr, dataset: Dataset):
    """Pooled sums of squared differences / measurements per variable."""
    ss_diff = dict.fromkeys(COMPARISON_VARIABLES, 0.0)
    ss_meas = dict.fromkeys(COMPARISON_VARIABLES, 0.0)
    groups = (("surge", 0), ("sway", 1), ("yaw", 2))
    for log in dataset:
        states = log.measured_states()
        traj = full_rollout(p, thr, log)
        meas_v = states[:, 5:8]
        pred_v = traj[:, 5:8]
        meas_a = finite_difference_pose(meas_v, log.dt)
        pred_a = finite_difference_pose(pred_v, log.dt)
        meas_d = states[:, 2:5]
        pred_d = traj[:, 2:5]
        # Sample 0 is the shared anchor; compare from sample 1 on.
        for (name, col), kind in (
            *(((g, c), "vel") for g, c in groups),
            *(((g, c), "acc") for g, c in groups),
            *(((g, c), "dist") for g, c in groups),
        ):
            key = f"{name}_{kind}"
            mm = {"vel": meas_v, "acc": meas_a, "dist": meas_d}[kind][1:, col]
            pp = {"vel": pred_v, "acc": pred_a, "dist": pred_d}[kind][1:, col]
            ss_diff[key] += float(np.sum((pp - mm) ** 2))
            ss_meas[key] += float(np.sum(mm * mm))
    return ss_diff, ss_meas


def relative_error_table(p22: ShipParams22, p6: ShipParams6,
                         thr: Optional[ThrusterModel],
                         dataset: Dataset) -> ComparisonReport:
    """Nine-variable relative-error comparison of the full vs baseline model."""
    thr = thr or default_thruster()
    entries = {}
    acc = {
        "full": _comparison_accumulate(p22, thr, dataset),
        "baseline": _comparison_accumulate(p6.embed(), thr, dataset),
    }
    for var in COMPARISON_VARIABLES:
        row = {}
        for tag in ("full", "baseline"):
            ss_diff, ss_meas = acc[tag]
            if ss_meas[var] <= 0.0:
                row[tag] = None
            else:
                row[tag] = float(100.0 * np.sqrt(ss_diff[var] / ss_meas[var]))
        entries[var] = row
    return ComparisonReport(entries=entries)


def validation_suite(p: ShipParams22, thr: Optional[ThrusterModel],
                     dataset: Dataset, horizons: Sequence[int],
                     out_dir=None, p6: Optional[ShipParams6] = None) -> dict:
    """Run the prediction program over every (maneuver, horizon) pair.

    With ``out_dir`` set, writes ``rmse_table.csv``, ``summary.json``, one
    trajectory-overlay SVG per maneuver and an RMSE-vs-horizon chart. The
    figures carry no timestamps, so reruns are byte identical.
    """
    horizons = [int(h) for h in horizons]
    if not horizons:
        raise ShipIdError("horizon list must not be empty")
    if any(h < 1 for h in horizons):
        raise ShipIdError("horizons must be positive")
    thr = thr or default_thruster()

    jobs = [(log, h) for log in dataset for h in horizons
            if len(log) - 1 >= h]
    skipped = [(log.label, h) for log in dataset for h in horizons
               if len(log) - 1 < h]

    def run(job):
        log, h = job
        return predict_n_steps(p, thr, log, h)

    workers = min(thread_count(), max(1, len(jobs)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run, jobs))
    else:
        reports = [run(j) for j in jobs]

    comparison = None
    if p6 is not None:
        comparison = relative_error_table(p, p6, thr, dataset)

    suite = {
        "horizons": horizons,
        "reports": reports,
        "comparison": comparison,
        "skipped": skipped,
    }
    if out_dir is not None:
        _write_outputs(suite, p, thr, dataset, Path(out_dir))
    return suite


def _mean_rmse_by_horizon(reports, horizons, channels=("u", "v", "r")):
    table = {ch: [] for ch in channels}
    for h in horizons:
        rows = [r for r in reports if r.horizon == h]
        for ch in channels:
            table[ch].append(float(np.mean([r.rmse[ch] for r in rows])) if rows else np.nan)
    return table


def _write_outputs(suite, p, thr, dataset, out: Path):
    from . import plots

    out.mkdir(parents=True, exist_ok=True)
    reports = suite["reports"]

    with open(out / "rmse_table.csv", "w", encoding="utf-8") as fh:
        fh.write("maneuver,horizon,channel,rmse\n")
        for rep in reports:
            for ch in CHANNELS:
                fh.write(f"{rep.maneuver},{rep.horizon},{ch},{rep.rmse[ch]!r}\n")

    summary = {
        "horizons": suite["horizons"],
        "reports": [rep.to_dict() for rep in reports],
        "skipped": suite["skipped"],
    }
    if suite["comparison"] is not None:
        summary["comparison"] = suite["comparison"].to_dict()
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")

    for log in dataset:
        traj = full_rollout(p, thr, log)
        plots.plot_trajectory_overlay(log, traj, out / f"overlay_{log.label}.svg")
    table = _mean_rmse_by_horizon(reports, suite["horizons"])
    plots.plot_rmse_horizons(suite["horizons"], table, out / "rmse_vs_horizon.svg")
