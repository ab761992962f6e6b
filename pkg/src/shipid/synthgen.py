"""Synthetic maneuver generation: straight lines, zigzags, turning circles.

Plans use degrees for angles (matching how such tests are specified);
everything written into logs is radians. The command schedule is closed
loop: the zigzag flips its azimuth command when the simulated heading
deviation crosses the threshold on the side the current command is pushing
toward. Measurement noise is Gaussian, applied to the logged pose/velocity
channels only; commands and pod angles stay exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import model
from .actuation import ThrusterModel, default_thruster
from .dataio import Dataset, ManeuverLog
from .errors import IntegrationBlowupError, ShipIdError
from .params import REFERENCE_TUG_PARAMS, ShipParams22

__all__ = [
    "ManeuverPlan",
    "NoiseSpec",
    "generate_maneuver",
    "generate_scenario",
    "standard_12_plans",
    "standard_12_maneuvers",
    "load_scenario",
    "save_scenario",
]

KINDS = ("straight", "zigzag", "circle")


@dataclass(frozen=True)
class ManeuverPlan:
    """Recipe for one synthetic maneuver. Angles in degrees."""

    kind: str
    rps: float = 5.0
    zigzag_deviation: float = 20.0       # heading-switch threshold
    zigzag_initial_angle: float = 20.0   # signed initial azimuth command
    circle_angle: float = 20.0           # signed held azimuth command
    duration: float = 73.0
    dt: float = 0.2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ShipIdError(f"unknown maneuver kind {self.kind!r}, expected one of {KINDS}")
        if self.rps < 0 or not np.isfinite(self.rps):
            raise ShipIdError(f"rps must be non-negative, got {self.rps}")
        if self.kind == "zigzag" and (self.zigzag_deviation <= 0 or self.zigzag_initial_angle == 0):
            raise ShipIdError("zigzag needs a positive deviation and a nonzero initial angle")
        if self.dt <= 0 or self.duration < 10 * self.dt:
            raise ShipIdError("duration must cover at least 10 steps")

    @property
    def label(self) -> str:
        rps = f"{self.rps:g}rps"
        if self.kind == "straight":
            return f"straight_{rps}"
        if self.kind == "zigzag":
            dev = f"{self.zigzag_deviation:g}"
            ini = f"{self.zigzag_initial_angle:+g}".replace("+", "p").replace("-", "m")
            return f"zigzag_{dev}_{ini}_{rps}"
        return f"circle_{self.circle_angle:g}deg_{rps}"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "rps": self.rps,
            "zigzag_deviation": self.zigzag_deviation,
            "zigzag_initial_angle": self.zigzag_initial_angle,
            "circle_angle": self.circle_angle,
            "duration": self.duration, "dt": self.dt,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ManeuverPlan":
        allowed = {"kind", "rps", "zigzag_deviation", "zigzag_initial_angle",
                   "circle_angle", "duration", "dt"}
        unknown = set(d) - allowed
        if unknown:
            raise ShipIdError(f"unknown plan keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class NoiseSpec:
    """Measurement-noise levels (standard deviations) and RNG seed."""

    pose_std: tuple = (0.0, 0.0, 0.0)    # x (m), y (m), psi (rad)
    vel_std: tuple = (0.0, 0.0, 0.0)     # u (m/s), v (m/s), r (rad/s)
    seed: int = 0

    def __post_init__(self):
        ps = tuple(float(x) for x in self.pose_std)
        vs = tuple(float(x) for x in self.vel_std)
        if len(ps) != 3 or len(vs) != 3 or any(x < 0 for x in ps + vs):
            raise ShipIdError("noise standard deviations must be 3 non-negative values each")
        object.__setattr__(self, "pose_std", ps)
        object.__setattr__(self, "vel_std", vs)

    @property
    def is_zero(self) -> bool:
        return all(x == 0.0 for x in self.pose_std + self.vel_std)

    def to_dict(self) -> dict:
        return {"pose_std": list(self.pose_std), "vel_std": list(self.vel_std),
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSpec":
        return cls(pose_std=tuple(d.get("pose_std", (0, 0, 0))),
                   vel_std=tuple(d.get("vel_std", (0, 0, 0))),
                   seed=int(d.get("seed", 0)))


def _yaw_side(alpha_cmd_rad: float, thr: ThrusterModel) -> float:
    """Sign of the heading push produced by holding both pods at this angle."""
    g = thr.geometry
    tau_r = (g.lx1 * math.sin(alpha_cmd_rad) + g.ly1 * math.cos(alpha_cmd_rad)
             + g.lx2 * math.sin(alpha_cmd_rad) + g.ly2 * math.cos(alpha_cmd_rad))
    return math.copysign(1.0, tau_r) if tau_r != 0.0 else 0.0


def generate_maneuver(plan: ManeuverPlan, true_p: ShipParams22,
                      thr: Optional[ThrusterModel] = None,
                      x0=None, noise: Optional[NoiseSpec] = None,
                      stream: int = 0) -> ManeuverLog:
    """Simulate one maneuver of the given plan and package it as a log.

    ``stream`` separates the noise draws of maneuvers sharing one seed.
    The command at the final sample repeats the previous one (it drives no
    further transition but keeps the CSV rows uniform).
    """
    thr = thr or default_thruster()
    noise = noise or NoiseSpec()
    x = (x0.as_array() if isinstance(x0, model.ShipState)
         else np.zeros(8) if x0 is None else np.asarray(x0, dtype=float).copy())
    if x.shape != (8,):
        raise ShipIdError("x0 must have 8 entries")

    n_steps = int(round(plan.duration / plan.dt))
    theta = true_p.as_array()
    tc = model._thruster_consts(thr)
    dt = plan.dt

    dev = math.radians(plan.zigzag_deviation)
    zz_cmd = math.radians(plan.zigzag_initial_angle)
    circle_cmd = math.radians(plan.circle_angle)
    psi0 = x[4]

    states = np.empty((n_steps + 1, 8))
    cmds = np.empty((n_steps + 1, 4))
    states[0] = x

    for k in range(n_steps):
        if plan.kind == "straight":
            alpha_d = 0.0
        elif plan.kind == "circle":
            alpha_d = circle_cmd
        else:
            side = _yaw_side(zz_cmd, thr)
            if side != 0.0 and (x[4] - psi0) * side >= dev:
                zz_cmd = -zz_cmd
            alpha_d = zz_cmd
        cmds[k] = (plan.rps, plan.rps, alpha_d, alpha_d)
        x = model._rk4_arrays(theta, tc, x, cmds[k], dt)
        if not np.all(np.isfinite(x)):
            raise IntegrationBlowupError(
                f"maneuver '{plan.label}' blew up at step {k + 1}", step=k + 1)
        states[k + 1] = x
    cmds[n_steps] = cmds[n_steps - 1]

    poses = states[:, 2:5].copy()
    vels = states[:, 5:8].copy()
    if not noise.is_zero:
        rng = np.random.default_rng([noise.seed, stream])
        poses += rng.normal(0.0, noise.pose_std, size=poses.shape)
        vels += rng.normal(0.0, noise.vel_std, size=vels.shape)

    return ManeuverLog(
        label=plan.label,
        dt=dt,
        t=np.arange(n_steps + 1) * dt,
        cmds=cmds,
        alphas=states[:, 0:2].copy(),
        poses=poses,
        vels=vels,
    )


def standard_12_plans(rps_list: Sequence[float] = (3.0, 5.0, 7.0, 10.0),
                      zigzag: tuple = (20.0, 20.0),
                      circles: Sequence[tuple] = ((10.0, 5.0), (20.0, 5.0),
                                                  (30.0, 5.0), (30.0, 7.0)),
                      duration: float = 73.0, dt: float = 0.2):
    """The default 12-maneuver schedule: 4 straight lines, 4 zigzags at the
    same shaft speeds, and 4 turning circles (angle, rps) pairs."""
    plans = [ManeuverPlan("straight", rps=r, duration=duration, dt=dt) for r in rps_list]
    plans += [ManeuverPlan("zigzag", rps=r, zigzag_deviation=zigzag[0],
                           zigzag_initial_angle=zigzag[1], duration=duration, dt=dt)
              for r in rps_list]
    plans += [ManeuverPlan("circle", rps=r, circle_angle=ang, duration=duration, dt=dt)
              for ang, r in circles]
    return plans


def generate_scenario(plans, true_p: ShipParams22,
                      thr: Optional[ThrusterModel] = None,
                      noise: Optional[NoiseSpec] = None, x0=None) -> Dataset:
    """Generate every plan in order; noise streams follow the plan index."""
    logs = tuple(
        generate_maneuver(plan, true_p, thr=thr, x0=x0, noise=noise, stream=i)
        for i, plan in enumerate(plans)
    )
    return Dataset(logs)


def standard_12_maneuvers(true_p: Optional[ShipParams22] = None,
                          thr: Optional[ThrusterModel] = None,
                          noise: Optional[NoiseSpec] = None,
                          duration: float = 73.0, dt: float = 0.2) -> Dataset:
    """The stock estimation dataset, generated from the reference tug by
    default. 73 s at 0.2 s sampling gives 366 samples per maneuver."""
    p = true_p or REFERENCE_TUG_PARAMS
    return generate_scenario(standard_12_plans(duration=duration, dt=dt),
                             p, thr=thr, noise=noise)


def load_scenario(path):
    """Read a scenario file: {"plans": [...], "noise": {...}}."""
    with open(path, "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    if isinstance(spec, list):
        plans = [ManeuverPlan.from_dict(d) for d in spec]
        return plans, NoiseSpec()
    plans = [ManeuverPlan.from_dict(d) for d in spec.get("plans", [])]
    if not plans:
        raise ShipIdError(f"{path}: scenario lists no plans")
    noise = NoiseSpec.from_dict(spec.get("noise", {}))
    return plans, noise


def save_scenario(plans, noise: NoiseSpec, path) -> None:
    payload = {"plans": [p.to_dict() for p in plans], "noise": noise.to_dict()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
