"""Parameter vectors and hull geometry for the surge-decoupled vessel model.

The 22-entry parameter vector covers the inertia block (m11..m33) and the
surge/sway/yaw damping coefficients. Field names mirror the hydrodynamic
symbols, with ``_abs`` marking coefficients that multiply an absolute
velocity (``Y_rv_abs`` multiplies ``|r|*v`` and so on); the same names are
used as JSON keys.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import ShipIdError

__all__ = [
    "PARAM22_KEYS",
    "PARAM6_KEYS",
    "ShipParams22",
    "ShipParams6",
    "HullSpecs",
    "REFERENCE_TUG_PARAMS",
    "REFERENCE_TUG_PARAMS6",
    "REFERENCE_TUG_HULL",
    "load_params22",
    "save_params22",
]

PARAM22_KEYS = (
    "m11", "m22", "m23", "m32", "m33",
    "X_u", "X_uu_abs", "X_uuu",
    "Y_v", "Y_vv_abs", "Y_vvv", "Y_rv_abs", "Y_r", "Y_vr_abs", "Y_rr_abs",
    "N_v", "N_vv_abs", "N_rv_abs", "N_r", "N_rr_abs", "N_rrr", "N_vr_abs",
)

PARAM6_KEYS = ("m11", "m22", "m33", "d11", "d22", "d33")


@dataclass(frozen=True)
class ShipParams22:
    """Inertia and damping coefficients of the surge-decoupled 3-DOF model.

    Serializes to/from a 22-element array in the fixed key order of
    ``PARAM22_KEYS``. Masses on the inertia diagonal must be positive.
    """

    m11: float
    m22: float
    m23: float
    m32: float
    m33: float
    X_u: float
    X_uu_abs: float
    X_uuu: float
    Y_v: float
    Y_vv_abs: float
    Y_vvv: float
    Y_rv_abs: float
    Y_r: float
    Y_vr_abs: float
    Y_rr_abs: float
    N_v: float
    N_vv_abs: float
    N_rv_abs: float
    N_r: float
    N_rr_abs: float
    N_rrr: float
    N_vr_abs: float

    def __post_init__(self):
        arr = self.as_array()
        if not np.all(np.isfinite(arr)):
            raise ShipIdError("ship parameters must be finite")
        if self.m11 <= 0 or self.m22 <= 0 or self.m33 <= 0:
            raise ShipIdError(
                "inertia diagonal must be positive: "
                f"m11={self.m11}, m22={self.m22}, m33={self.m33}"
            )

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in PARAM22_KEYS], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "ShipParams22":
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (22,):
            raise ShipIdError(f"expected 22 parameters, got shape {arr.shape}")
        return cls(**dict(zip(PARAM22_KEYS, arr.tolist())))

    def to_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in PARAM22_KEYS}

    @classmethod
    def from_dict(cls, d: dict) -> "ShipParams22":
        missing = [k for k in PARAM22_KEYS if k not in d]
        if missing:
            raise ShipIdError(f"parameter dict is missing keys: {missing}")
        return cls(**{k: float(d[k]) for k in PARAM22_KEYS})

    def replace(self, **kw) -> "ShipParams22":
        return replace(self, **kw)


@dataclass(frozen=True)
class ShipParams6:
    """Diagonal-only baseline model: three masses, three linear dampers."""

    m11: float
    m22: float
    m33: float
    d11: float
    d22: float
    d33: float

    def __post_init__(self):
        arr = self.as_array()
        if not np.all(np.isfinite(arr)):
            raise ShipIdError("ship parameters must be finite")
        if self.m11 <= 0 or self.m22 <= 0 or self.m33 <= 0:
            raise ShipIdError("masses must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in PARAM6_KEYS], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "ShipParams6":
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (6,):
            raise ShipIdError(f"expected 6 parameters, got shape {arr.shape}")
        return cls(**dict(zip(PARAM6_KEYS, arr.tolist())))

    def to_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in PARAM6_KEYS}

    @classmethod
    def from_dict(cls, d: dict) -> "ShipParams6":
        missing = [k for k in PARAM6_KEYS if k not in d]
        if missing:
            raise ShipIdError(f"parameter dict is missing keys: {missing}")
        return cls(**{k: float(d[k]) for k in PARAM6_KEYS})

    def embed(self) -> ShipParams22:
        """Exact embedding into the 22-parameter model.

        Linear damping only (X_u = -d11 etc.), no inertia off-diagonals and
        no velocity cross terms, so the full model restricted to these values
        reproduces the baseline dynamics identically.
        """
        zeros = {k: 0.0 for k in PARAM22_KEYS}
        zeros.update(
            m11=self.m11, m22=self.m22, m33=self.m33,
            X_u=-self.d11, Y_v=-self.d22, N_r=-self.d33,
        )
        return ShipParams22(**zeros)


@dataclass(frozen=True)
class HullSpecs:
    """Main hull particulars used by the empirical initialization.

    ``dispv`` is the displaced volume; ``a = L/2`` and ``b = B/2`` are the
    half length/beam used in the yaw-inertia formula.
    """

    m: float
    L: float
    B: float
    D: float
    rho: float = 1000.0
    dispv: float = 0.0
    x_g: float = 0.0

    def __post_init__(self):
        for name in ("m", "L", "B", "D", "rho"):
            val = getattr(self, name)
            if not np.isfinite(val) or val <= 0:
                raise ShipIdError(f"hull spec {name} must be positive, got {val}")
        if not np.isfinite(self.dispv) or self.dispv < 0:
            raise ShipIdError(f"hull spec dispv must be non-negative, got {self.dispv}")
        if not np.isfinite(self.x_g):
            raise ShipIdError("hull spec x_g must be finite")

    @property
    def a(self) -> float:
        return self.L / 2.0

    @property
    def b(self) -> float:
        return self.B / 2.0


# Identified parameter set of the 1:20 reference tug (twin azimuth thrusters).
REFERENCE_TUG_PARAMS = ShipParams22(
    m11=138.0574, m22=106.6003, m23=1.1254, m32=-16.0598, m33=15.6476,
    X_u=-8.9859, X_uu_abs=-31.4285, X_uuu=-6.8953,
    Y_v=-71.9041, Y_vv_abs=-77.6429, Y_vvv=-27.1394, Y_rv_abs=-43.2207,
    Y_r=-26.0498, Y_vr_abs=26.7652, Y_rr_abs=7.7996,
    N_v=-14.8953, N_vv_abs=-1.6306, N_rv_abs=8.7911,
    N_r=-26.7122, N_rr_abs=-9.8284, N_rrr=-9.2320, N_vr_abs=-2.3474,
)

# Baseline 6-parameter fit of the same tug.
REFERENCE_TUG_PARAMS6 = ShipParams6(
    m11=216.4727, m22=183.4906, m33=0.0632,
    d11=44.1878, d22=152.9380, d33=0.2629,
)

# Hull particulars of the reference tug.
REFERENCE_TUG_HULL = HullSpecs(
    m=187.600, L=2.152, B=0.6952, D=0.2485, rho=1000.0, dispv=0.1876,
)


def load_params22(path) -> ShipParams22:
    """Read a 22-parameter file: JSON object keyed by PARAM22_KEYS, or a
    plain 22-element JSON array in the same order."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        return ShipParams22.from_dict(data)
    if isinstance(data, list):
        return ShipParams22.from_array(np.asarray(data, dtype=float))
    raise ShipIdError(f"{path}: expected a JSON object or array of parameters")


def save_params22(p: ShipParams22, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(p.to_dict(), fh, indent=2)
        fh.write("\n")
