"""Twin azimuth-thruster actuation: thrust curve, force allocation geometry
and the saturating rotation dynamics of the pods.

Everything here works in radians and newtons. All functions broadcast over
numpy arrays so the estimation code can evaluate batches of states at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InsufficientDataError, ShipIdError, UnidentifiableError

__all__ = [
    "ThrusterGeometry",
    "ThrustPolynomial",
    "AzimuthModel",
    "InputCommand",
    "ThrusterModel",
    "DEFAULT_THRUST_POLY",
    "default_thruster",
    "thruster_to_dict",
    "thruster_from_dict",
    "thrust_from_rps",
    "config_matrix",
    "torques",
    "azimuth_rate",
    "fit_thrust_polynomial",
    "estimate_azimuth_params",
]


class InputCommand(NamedTuple):
    """Shaft speeds (RPS) and commanded azimuth angles (rad)."""

    n1: float
    n2: float
    alpha1_d: float
    alpha2_d: float


@dataclass(frozen=True)
class ThrusterGeometry:
    """Pod positions relative to the body origin, metres.

    Both pods sit aft of the origin; positive ``ly`` is the starboard side.
    """

    lx1: float = -0.8
    ly1: float = 0.163
    lx2: float = -0.8
    ly2: float = -0.163

    def __post_init__(self):
        if not np.all(np.isfinite([self.lx1, self.ly1, self.lx2, self.ly2])):
            raise ShipIdError("thruster geometry must be finite")


@dataclass(frozen=True)
class ThrustPolynomial:
    """Shaft speed (RPS) to force (N) map: polynomial over a fixed divisor.

    ``coeffs`` are in descending powers. The divisor splits a total
    bollard-pull curve between the two identical pods (default 2).
    """

    coeffs: tuple = (-0.0001773, 0.001187, 0.04978, 0.151, 1.974, 0.0722)
    divisor: float = 2.0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size < 1 or c.size > 6:
            raise ShipIdError("thrust polynomial degree must be at most 5")
        if not np.all(np.isfinite(c)) or not np.isfinite(self.divisor) or self.divisor == 0:
            raise ShipIdError("thrust polynomial coefficients/divisor must be finite and nonzero")
        object.__setattr__(self, "coeffs", tuple(float(x) for x in c))

    def __call__(self, n):
        return thrust_from_rps(self, n)


DEFAULT_THRUST_POLY = ThrustPolynomial()


@dataclass(frozen=True)
class AzimuthModel:
    """Saturating first-order rotation model of one pod.

    ``K_alpha`` is the slew rate (rad/s); ``epsilon`` smooths the switching
    around the setpoint. ``epsilon = 0`` gives pure sign dynamics.
    """

    K_alpha: float
    epsilon: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.K_alpha) or self.K_alpha <= 0:
            raise ShipIdError(f"K_alpha must be positive, got {self.K_alpha}")
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ShipIdError(f"epsilon must be non-negative, got {self.epsilon}")


@dataclass(frozen=True)
class ThrusterModel:
    """Complete actuation model: one thrust curve, two pods."""

    poly: ThrustPolynomial = field(default_factory=ThrustPolynomial)
    azimuth1: AzimuthModel = AzimuthModel(K_alpha=0.1151, epsilon=0.0)
    azimuth2: AzimuthModel = AzimuthModel(K_alpha=0.1161, epsilon=0.0)
    geometry: ThrusterGeometry = field(default_factory=ThrusterGeometry)


def default_thruster() -> ThrusterModel:
    """Actuation model identified for the reference tug."""
    return ThrusterModel()


def thruster_to_dict(thr: ThrusterModel) -> dict:
    g = thr.geometry
    return {
        "poly": {"coeffs": list(thr.poly.coeffs), "divisor": thr.poly.divisor},
        "azimuth1": {"K_alpha": thr.azimuth1.K_alpha, "epsilon": thr.azimuth1.epsilon},
        "azimuth2": {"K_alpha": thr.azimuth2.K_alpha, "epsilon": thr.azimuth2.epsilon},
        "geometry": {"lx1": g.lx1, "ly1": g.ly1, "lx2": g.lx2, "ly2": g.ly2},
    }


def thruster_from_dict(d: dict) -> ThrusterModel:
    default = ThrusterModel()
    poly = default.poly
    if "poly" in d:
        poly = ThrustPolynomial(tuple(d["poly"]["coeffs"]),
                                float(d["poly"].get("divisor", 2.0)))
    az1 = AzimuthModel(**d["azimuth1"]) if "azimuth1" in d else default.azimuth1
    az2 = AzimuthModel(**d["azimuth2"]) if "azimuth2" in d else default.azimuth2
    geom = ThrusterGeometry(**d["geometry"]) if "geometry" in d else default.geometry
    return ThrusterModel(poly=poly, azimuth1=az1, azimuth2=az2, geometry=geom)


def thrust_from_rps(poly: ThrustPolynomial, n):
    """Evaluate the per-pod force for shaft speed ``n`` (RPS)."""
    n = np.asarray(n, dtype=float)
    out = np.polyval(poly.coeffs, n) / poly.divisor
    return float(out) if out.ndim == 0 else out


def config_matrix(alpha1, alpha2, geom: ThrusterGeometry) -> np.ndarray:
    """3x2 allocation matrix mapping pod forces to (surge, sway, yaw) torque.

    Column i is [cos ai, sin ai, lxi*sin ai + lyi*cos ai].
    """
    a1 = float(alpha1)
    a2 = float(alpha2)
    return np.array([
        [np.cos(a1), np.cos(a2)],
        [np.sin(a1), np.sin(a2)],
        [geom.lx1 * np.sin(a1) + geom.ly1 * np.cos(a1),
         geom.lx2 * np.sin(a2) + geom.ly2 * np.cos(a2)],
    ])


def torques(alpha1, alpha2, f1, f2, geom: ThrusterGeometry):
    """Generalized control vector tau = T(alpha) @ [f1, f2]. Broadcasts."""
    a1 = np.asarray(alpha1, dtype=float)
    a2 = np.asarray(alpha2, dtype=float)
    f1 = np.asarray(f1, dtype=float)
    f2 = np.asarray(f2, dtype=float)
    s1, c1 = np.sin(a1), np.cos(a1)
    s2, c2 = np.sin(a2), np.cos(a2)
    tau_u = c1 * f1 + c2 * f2
    tau_v = s1 * f1 + s2 * f2
    tau_r = (geom.lx1 * s1 + geom.ly1 * c1) * f1 + (geom.lx2 * s2 + geom.ly2 * c2) * f2
    return np.stack(np.broadcast_arrays(tau_u, tau_v, tau_r), axis=-1)


def azimuth_rate(model: AzimuthModel, alpha, alpha_d):
    """Pod rotation rate toward the commanded angle.

    Smooth saturating law K*(e)/sqrt(e^2 + eps^2); for eps = 0 this is
    K*sign(e) with sign(0) = 0 so the pod holds at the setpoint.
    """
    err = np.asarray(alpha_d, dtype=float) - np.asarray(alpha, dtype=float)
    if model.epsilon == 0.0:
        out = model.K_alpha * np.sign(err)
    else:
        out = model.K_alpha * err / np.sqrt(err * err + model.epsilon ** 2)
    return float(out) if np.ndim(out) == 0 else out


def fit_thrust_polynomial(samples: Sequence, degree: int, divisor: float = 2.0):
    """Least-squares polynomial fit of a bollard-pull curve.

    ``samples`` are (rps, force) pairs where force is the per-pod value;
    the numerator polynomial is fitted to ``divisor * force`` so the stored
    coefficients follow the same convention as the default curve.

    Returns ``(ThrustPolynomial, residual_norm)`` with the residual measured
    in force units. Raises InsufficientDataError when the design matrix
    cannot determine all coefficients.
    """
    pts = np.asarray(samples, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ShipIdError("samples must be (rps, force) pairs")
    if not np.all(np.isfinite(pts)):
        raise ShipIdError("samples must be finite")
    if degree < 0 or degree > 5:
        raise ShipIdError(f"degree must be within [0, 5], got {degree}")
    n, f = pts[:, 0], pts[:, 1]
    if len(np.unique(n)) < degree + 1:
        raise InsufficientDataError(
            f"need at least {degree + 1} distinct shaft speeds, got {len(np.unique(n))}"
        )
    # Vandermonde in descending powers to match the stored coefficient order.
    A = np.vander(n, degree + 1)
    coeffs, _, rank, _ = np.linalg.lstsq(A, divisor * f, rcond=None)
    if rank < degree + 1:
        raise InsufficientDataError("rank-deficient design matrix in thrust fit")
    poly = ThrustPolynomial(tuple(coeffs.tolist()), divisor)
    residual = float(np.linalg.norm(thrust_from_rps(poly, n) - f))
    return poly, residual


def _one_step_angle(K, eps, alpha, alpha_d, dt):
    """One RK4 step of the rotation ODE with the command held constant."""
    def rate(a):
        err = alpha_d - a
        if eps == 0.0:
            return K * np.sign(err)
        return K * err / np.sqrt(err * err + eps * eps)

    k1 = rate(alpha)
    k2 = rate(alpha + 0.5 * dt * k1)
    k3 = rate(alpha + 0.5 * dt * k2)
    k4 = rate(alpha + dt * k3)
    return alpha + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def estimate_azimuth_params(cmd_series, meas_series, dt, solve_options=None):
    """Identify (K_alpha, epsilon) of one pod from logged angle tracking.

    ``cmd_series``/``meas_series`` are parallel lists of arrays (one entry
    per maneuver). The model is fitted by minimizing the one-step prediction
    error of the rotation ODE, each step anchored at the measured angle.

    Raises UnidentifiableError when the measured angle never deviates from
    the command (nothing moves, so the slew rate cannot be observed).
    """
    from .solver import NlsProblem, SolveOptions, solve

    if isinstance(cmd_series, np.ndarray) and cmd_series.ndim == 1:
        cmd_series = [cmd_series]
        meas_series = [meas_series]
    cmds = [np.asarray(c, dtype=float) for c in cmd_series]
    meas = [np.asarray(m, dtype=float) for m in meas_series]
    if len(cmds) != len(meas) or any(len(c) != len(m) for c, m in zip(cmds, meas)):
        raise ShipIdError("command and measurement series must align")
    if dt <= 0:
        raise ShipIdError(f"dt must be positive, got {dt}")
    if not any(np.any(np.abs(c - m) > 1e-9) for c, m in zip(cmds, meas)):
        raise UnidentifiableError(
            "azimuth angle always equals its command; slew rate is unobservable"
        )

    def residual(theta):
        K, eps = theta
        eps = abs(eps)
        parts = []
        for c, m in zip(cmds, meas):
            pred = _one_step_angle(K, eps, m[:-1], c[:-1], dt)
            parts.append(pred - m[1:])
        return np.concatenate(parts)

    # Deep in saturation the per-step slew equals K*dt while dwell samples
    # near the setpoint barely move, so a high quantile of the observed
    # slew rates is a sharp starting point for K.
    rates = np.concatenate([np.abs(np.diff(m)) / dt for m in meas])
    moving = rates[rates > 1e-12]
    k0 = float(np.quantile(moving, 0.98)) if moving.size else 0.05
    k0 = min(max(k0, 1e-4), 10.0)

    problem = NlsProblem(
        residual,
        lower=np.array([1e-6, 0.0]),
        upper=np.array([10.0, 1.0]),
    )
    # The residual is even in eps with an exactly vanishing gradient at
    # eps = 0, where the iteration can pin itself once projected onto the
    # bound; a few deterministic eps starts avoid that trap.
    opts = solve_options or SolveOptions()
    report = None
    for eps0 in (1e-3, 0.02, 0.1):
        cand = solve(problem, np.array([k0, eps0]), opts)
        if report is None or cand.cost < report.cost:
            report = cand
    K, eps = report.theta
    return AzimuthModel(K_alpha=float(K), epsilon=float(abs(eps))), report
