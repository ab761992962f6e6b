"""Matplotlib rendering for validation outputs.

Figures are written as SVG with a fixed hash salt and no embedded date so
identical inputs produce byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

plt.rcParams["svg.hashsalt"] = "shipid"

__all__ = ["plot_trajectory_overlay", "plot_rmse_horizons", "plot_series"]


def _save(fig, path):
    path = str(path)
    kwargs = {}
    if path.endswith(".svg"):
        kwargs["metadata"] = {"Date": None}
    fig.savefig(path, **kwargs)
    plt.close(fig)


def plot_trajectory_overlay(log, predicted, path):
    """Measured vs predicted maneuver: track, heading and body velocities."""
    pred = np.asarray(predicted, dtype=float)
    meas = log.measured_states()
    t = log.t

    fig, axes = plt.subplots(2, 2, figsize=(10, 7))
    ax = axes[0, 0]
    ax.plot(meas[:, 3], meas[:, 2], "k-", label="measured")
    ax.plot(pred[:, 3], pred[:, 2], "r--", label="model")
    ax.set_xlabel("east y (m)")
    ax.set_ylabel("north x (m)")
    ax.set_title(f"{log.label}: track")
    ax.axis("equal")
    ax.legend()

    ax = axes[0, 1]
    ax.plot(t, meas[:, 4], "k-", label="measured")
    ax.plot(t, pred[:, 4], "r--", label="model")
    ax.set_xlabel("t (s)")
    ax.set_ylabel("psi (rad)")
    ax.set_title("heading")
    ax.legend()

    ax = axes[1, 0]
    ax.plot(t, meas[:, 5], "k-", label="u measured")
    ax.plot(t, pred[:, 5], "r--", label="u model")
    ax.plot(t, meas[:, 6], "b-", label="v measured")
    ax.plot(t, pred[:, 6], "c--", label="v model")
    ax.set_xlabel("t (s)")
    ax.set_ylabel("m/s")
    ax.set_title("surge / sway speed")
    ax.legend()

    ax = axes[1, 1]
    ax.plot(t, meas[:, 7], "k-", label="measured")
    ax.plot(t, pred[:, 7], "r--", label="model")
    ax.set_xlabel("t (s)")
    ax.set_ylabel("r (rad/s)")
    ax.set_title("yaw rate")
    ax.legend()

    fig.tight_layout()
    _save(fig, path)


def plot_rmse_horizons(horizons, table, path):
    """Grouped bars of per-channel RMSE against the prediction horizon."""
    horizons = list(horizons)
    channels = list(table)
    x = np.arange(len(horizons), dtype=float)
    width = 0.8 / max(1, len(channels))

    fig, ax = plt.subplots(figsize=(9, 4.5))
    for i, ch in enumerate(channels):
        ax.bar(x + (i - (len(channels) - 1) / 2.0) * width, table[ch],
               width=width, label=ch)
    ax.set_xticks(x)
    ax.set_xticklabels([str(h) for h in horizons])
    ax.set_xlabel("prediction horizon (steps)")
    ax.set_ylabel("RMSE")
    ax.set_title("prediction error vs horizon")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def plot_series(t, series, labels, path, ylabel=""):
    """Small helper for ad-hoc line plots of named series."""
    fig, ax = plt.subplots(figsize=(9, 4))
    for values, label in zip(series, labels):
        ax.plot(t, values, label=label)
    ax.set_xlabel("t (s)")
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)
