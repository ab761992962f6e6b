"""Maneuver logs: CSV ingestion/export, manifests and velocity derivation.

Maneuver CSV schema (comma separated, header required, UTF-8):

    t,n1,n2,alpha1_cmd,alpha2_cmd,alpha1,alpha2,x,y,psi[,u,v,r]

Angles in radians, positions in metres, speeds in m/s and rad/s. The
velocity columns are optional; body velocities can be derived from the pose
track afterwards. Floats are written with ``repr`` so a save/load round
trip is bit exact.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import InsufficientDataError, ParseError, ShipIdError

__all__ = [
    "ManeuverLog",
    "Dataset",
    "load_maneuver_csv",
    "save_maneuver_csv",
    "load_dataset",
    "save_dataset",
    "finite_difference_pose",
    "derive_body_velocities",
    "export_trajectory_csv",
    "export_report_json",
    "thread_count",
]

CSV_COLUMNS = ("t", "n1", "n2", "alpha1_cmd", "alpha2_cmd",
               "alpha1", "alpha2", "x", "y", "psi")
CSV_VELOCITY_COLUMNS = ("u", "v", "r")
_T_TOL = 1e-6


def thread_count() -> int:
    """Worker cap honoring the SHIPID_THREADS environment variable."""
    raw = os.environ.get("SHIPID_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return max(1, n)


@dataclass(frozen=True)
class ManeuverLog:
    """One recorded maneuver: commands plus measured states on a uniform grid.

    ``weight`` is the diagonal of the 3x3 velocity weighting used by the
    estimators (identity by default).
    """

    label: str
    dt: float
    t: np.ndarray            # (N,)
    cmds: np.ndarray         # (N, 4): n1, n2, alpha1_cmd, alpha2_cmd
    alphas: np.ndarray       # (N, 2): measured pod angles
    poses: np.ndarray        # (N, 3): x, y, psi (psi unwrapped)
    vels: Optional[np.ndarray] = None   # (N, 3): u, v, r
    weight: np.ndarray = field(default_factory=lambda: np.ones(3))

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        cmds = np.asarray(self.cmds, dtype=float)
        alphas = np.asarray(self.alphas, dtype=float)
        poses = np.asarray(self.poses, dtype=float)
        vels = None if self.vels is None else np.asarray(self.vels, dtype=float)
        weight = np.asarray(self.weight, dtype=float)

        n = t.shape[0]
        if n < 2:
            raise ShipIdError(f"maneuver '{self.label}' needs at least 2 samples")
        if self.dt <= 0:
            raise ShipIdError(f"maneuver '{self.label}': dt must be positive")
        shapes = {"cmds": (n, 4), "alphas": (n, 2), "poses": (n, 3)}
        for name, want in shapes.items():
            got = {"cmds": cmds, "alphas": alphas, "poses": poses}[name].shape
            if got != want:
                raise ShipIdError(
                    f"maneuver '{self.label}': {name} has shape {got}, expected {want}")
        if vels is not None and vels.shape != (n, 3):
            raise ShipIdError(
                f"maneuver '{self.label}': vels has shape {vels.shape}, expected {(n, 3)}")
        if weight.shape != (3,) or np.any(weight < 0) or not np.all(np.isfinite(weight)):
            raise ShipIdError(f"maneuver '{self.label}': weight must be 3 non-negative values")
        gaps = np.diff(t)
        bad = np.nonzero(np.abs(gaps - self.dt) > _T_TOL)[0]
        if bad.size:
            k = int(bad[0])
            raise ShipIdError(
                f"maneuver '{self.label}': non-uniform timestamps at sample {k + 1} "
                f"(gap {gaps[k]!r} vs dt {self.dt!r})")
        for name, arr in (("t", t), ("cmds", cmds), ("alphas", alphas),
                          ("poses", poses), ("vels", vels)):
            if arr is not None and not np.all(np.isfinite(arr)):
                raise ShipIdError(f"maneuver '{self.label}': non-finite values in {name}")

        object.__setattr__(self, "t", t)
        object.__setattr__(self, "cmds", cmds)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "poses", poses)
        object.__setattr__(self, "vels", vels)
        object.__setattr__(self, "weight", weight)

    def __len__(self) -> int:
        return self.t.shape[0]

    @property
    def has_velocities(self) -> bool:
        return self.vels is not None

    def measured_states(self) -> np.ndarray:
        """(N, 8) array in whole-ship state order; requires velocities."""
        if self.vels is None:
            raise ShipIdError(f"maneuver '{self.label}' has no velocity channels")
        return np.hstack([self.alphas, self.poses, self.vels])

    def with_derived_velocities(self, force: bool = False) -> "ManeuverLog":
        """Return a log whose velocities come from differencing the poses."""
        if self.vels is not None and not force:
            return self
        vels = derive_body_velocities(self.poses, self.dt)
        return replace(self, vels=vels)

    def with_weight(self, weight) -> "ManeuverLog":
        return replace(self, weight=np.asarray(weight, dtype=float))


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of maneuvers sharing one sampling period."""

    maneuvers: tuple

    def __post_init__(self):
        logs = tuple(self.maneuvers)
        if not logs:
            raise ShipIdError("dataset must contain at least one maneuver")
        dt0 = logs[0].dt
        for log in logs[1:]:
            if abs(log.dt - dt0) > 1e-9:
                raise ShipIdError(
                    f"inconsistent dt across maneuvers: {log.dt} vs {dt0}")
        object.__setattr__(self, "maneuvers", logs)

    def __len__(self):
        return len(self.maneuvers)

    def __iter__(self):
        return iter(self.maneuvers)

    def __getitem__(self, i):
        return self.maneuvers[i]

    @property
    def dt(self) -> float:
        return self.maneuvers[0].dt

    @property
    def sample_count(self) -> int:
        return sum(len(m) for m in self.maneuvers)

    def with_derived_velocities(self) -> "Dataset":
        return Dataset(tuple(m.with_derived_velocities() for m in self.maneuvers))

    def subset(self, n: int) -> "Dataset":
        return Dataset(self.maneuvers[:n])


def _parse_float(text, path, line_no, column):
    try:
        val = float(text)
    except (TypeError, ValueError):
        raise ParseError(f"{path}: row {line_no}: column '{column}' is not a number: {text!r}",
                         path=path, row=line_no) from None
    if not np.isfinite(val):
        raise ParseError(f"{path}: row {line_no}: non-finite value in column '{column}'",
                         path=path, row=line_no)
    return val


def load_maneuver_csv(path, label: Optional[str] = None, weight=None) -> ManeuverLog:
    """Parse one maneuver CSV. Velocity columns are optional.

    Raises ParseError (with the offending row) for schema violations,
    non-uniform timestamps or non-finite values.
    """
    path = str(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file", path=path) from None
        if tuple(header[:10]) != CSV_COLUMNS:
            raise ParseError(
                f"{path}: header must start with {','.join(CSV_COLUMNS)}, got {','.join(header)}",
                path=path, row=1)
        has_vel = tuple(header[10:13]) == CSV_VELOCITY_COLUMNS
        if len(header) > 10 and not has_vel:
            raise ParseError(
                f"{path}: optional velocity columns must be exactly {','.join(CSV_VELOCITY_COLUMNS)}",
                path=path, row=1)
        ncols = 13 if has_vel else 10
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != ncols:
                raise ParseError(
                    f"{path}: row {line_no}: expected {ncols} columns, got {len(row)}",
                    path=path, row=line_no)
            rows.append([_parse_float(cell, path, line_no, header[i])
                         for i, cell in enumerate(row)])
    if len(rows) < 2:
        raise ParseError(f"{path}: need at least 2 data rows, got {len(rows)}", path=path)
    data = np.asarray(rows, dtype=float)
    t = data[:, 0]
    gaps = np.diff(t)
    dt = float(gaps[0])
    bad = np.nonzero(np.abs(gaps - dt) > _T_TOL)[0]
    if bad.size:
        k = int(bad[0])
        raise ParseError(
            f"{path}: row {k + 3}: non-uniform timestamp (gap {gaps[k]!r}, expected {dt!r})",
            path=path, row=k + 3)
    name = label if label is not None else Path(path).stem
    poses = data[:, 7:10].copy()
    poses[:, 2] = np.unwrap(poses[:, 2])
    return ManeuverLog(
        label=name,
        dt=dt,
        t=t,
        cmds=data[:, 1:5],
        alphas=data[:, 5:7],
        poses=poses,
        vels=data[:, 10:13] if has_vel else None,
        weight=np.ones(3) if weight is None else np.asarray(weight, dtype=float),
    )


def save_maneuver_csv(log: ManeuverLog, path) -> None:
    """Write a maneuver CSV (velocity columns included when present)."""
    cols = CSV_COLUMNS + (CSV_VELOCITY_COLUMNS if log.has_velocities else ())
    blocks = [log.t[:, None], log.cmds, log.alphas, log.poses]
    if log.has_velocities:
        blocks.append(log.vels)
    data = np.hstack(blocks)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in data:
            writer.writerow([repr(float(x)) for x in row])


def load_dataset(manifest_path) -> Dataset:
    """Load a dataset manifest: JSON listing maneuver files, labels, weights.

    Schema: {"dt": 0.2, "maneuvers": [{"path": ..., "label": ...,
    "weight": [wu, wv, wr]}, ...]} with paths relative to the manifest.
    """
    manifest_path = Path(manifest_path)
    with open(manifest_path, "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    entries = spec.get("maneuvers", [])
    if not entries:
        raise ParseError(f"{manifest_path}: manifest lists no maneuvers", path=str(manifest_path))
    base = manifest_path.parent

    def _load(entry):
        p = base / entry["path"]
        w = entry.get("weight")
        return load_maneuver_csv(p, label=entry.get("label"), weight=w)

    workers = min(thread_count(), len(entries))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            logs = list(pool.map(_load, entries))
    else:
        logs = [_load(e) for e in entries]
    ds = Dataset(tuple(logs))
    want_dt = spec.get("dt")
    if want_dt is not None and abs(ds.dt - float(want_dt)) > _T_TOL:
        raise ParseError(
            f"{manifest_path}: manifest dt {want_dt} does not match data dt {ds.dt}",
            path=str(manifest_path))
    return ds


def save_dataset(dataset: Dataset, out_dir, manifest_name: str = "manifest.json") -> Path:
    """Write each maneuver CSV plus a manifest into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, log in enumerate(dataset):
        fname = f"maneuver_{i:02d}_{log.label}.csv"
        save_maneuver_csv(log, out / fname)
        entries.append({
            "path": fname,
            "label": log.label,
            "weight": log.weight.tolist(),
        })
    manifest = {"dt": dataset.dt, "maneuvers": entries}
    mpath = out / manifest_name
    with open(mpath, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return mpath


def finite_difference_pose(poses, dt) -> np.ndarray:
    """Differentiate a pose track: central interior, 2nd-order one-sided ends.

    Exact for polynomial tracks up to degree 2.
    """
    poses = np.asarray(poses, dtype=float)
    if poses.ndim == 1:
        poses = poses[:, None]
    n = poses.shape[0]
    if n < 3:
        raise InsufficientDataError(f"need at least 3 samples to difference, got {n}")
    if dt <= 0:
        raise ShipIdError(f"dt must be positive, got {dt}")
    out = np.empty_like(poses)
    out[1:-1] = (poses[2:] - poses[:-2]) / (2.0 * dt)
    out[0] = (-3.0 * poses[0] + 4.0 * poses[1] - poses[2]) / (2.0 * dt)
    out[-1] = (3.0 * poses[-1] - 4.0 * poses[-2] + poses[-3]) / (2.0 * dt)
    return out


def derive_body_velocities(poses, dt) -> np.ndarray:
    """Body velocities from an earth-frame pose track.

    Rotates the differenced track into the body frame with J(psi)^T (the
    kinematic inverse of etadot = J(psi) v); the yaw rate is taken directly
    from the differenced heading. The heading is unwrapped first.
    """
    poses = np.asarray(poses, dtype=float)
    if poses.ndim != 2 or poses.shape[1] != 3:
        raise ShipIdError(f"poses must be (N, 3), got {poses.shape}")
    work = poses.copy()
    work[:, 2] = np.unwrap(work[:, 2])
    eta_dot = finite_difference_pose(work, dt)
    psi = work[:, 2]
    c, s = np.cos(psi), np.sin(psi)
    u = c * eta_dot[:, 0] + s * eta_dot[:, 1]
    v = -s * eta_dot[:, 0] + c * eta_dot[:, 1]
    return np.stack([u, v, eta_dot[:, 2]], axis=1)


def export_trajectory_csv(trajectory, path, dt: float = None, t=None) -> None:
    """Write a simulated state trajectory: t plus the 8 state channels."""
    traj = np.asarray(trajectory, dtype=float)
    if traj.size == 0:
        raise ShipIdError("refusing to export an empty trajectory")
    if traj.ndim != 2 or traj.shape[1] != 8:
        raise ShipIdError(f"trajectory must be (N, 8), got {traj.shape}")
    if t is None:
        if dt is None:
            raise ShipIdError("provide either dt or an explicit time vector")
        t = np.arange(traj.shape[0]) * float(dt)
    t = np.asarray(t, dtype=float)
    if t.shape[0] != traj.shape[0]:
        raise ShipIdError("time vector length must match the trajectory")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("t", "alpha1", "alpha2", "x", "y", "psi", "u", "v", "r"))
        for ti, row in zip(t, traj):
            writer.writerow([repr(float(ti))] + [repr(float(x)) for x in row])


def export_report_json(report, path) -> None:
    """Serialize a report object (anything with to_dict, or a plain dict)."""
    payload = report.to_dict() if hasattr(report, "to_dict") else report
    try:
        text = json.dumps(payload, indent=2, allow_nan=False)
    except (TypeError, ValueError) as exc:
        raise ShipIdError(f"report is not JSON-serializable: {exc}") from exc
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.write("\n")
    except OSError as exc:
        raise ShipIdError(f"cannot write report to {path}: {exc}") from exc
