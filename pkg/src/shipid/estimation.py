"""Parameter estimation for the surge-decoupled vessel model.

Two residual formulations share one whole-ship integrator:

* local (equation-error): every sample is predicted one step ahead from the
  *measured* state, so the cost is cheap, smooth and always evaluable;
* global (output-error): each maneuver is rolled out from its measured
  initial state under the logged commands and compared sample by sample,
  which is what multi-step prediction quality actually measures.

The combined estimator grows the maneuver set one prefix at a time,
attempting the global fit and falling back to local + warm restart whenever
the global solve stalls, caps out or violates the stability constraints.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import model
from .actuation import ThrusterModel, default_thruster
from .dataio import Dataset
from .errors import ShipIdError
from .params import PARAM22_KEYS, HullSpecs, ShipParams6, ShipParams22
from .solver import NlsProblem, SolveOptions, SolveReport, solve

__all__ = [
    "EstimationConfig",
    "EstimationResult",
    "empirical_added_mass",
    "init_params_empirical",
    "init_params6_empirical",
    "stability_constraints",
    "build_lo_residuals",
    "build_go_residuals",
    "estimate_lo",
    "estimate_go",
    "estimate_combined",
    "estimate_6param",
]

# Residual value substituted where a global rollout went non-finite.
_CLAMP = 1e6
# Constraint slack above which a solve counts as failed.
_CONSTRAINT_TOL = 1e-6

_CONSTRAINT_MODES = ("corrected", "paper-literal", "off")
_MASS_IDX_22 = (0, 1, 4)
_MASS_IDX_6 = (0, 1, 2)


@dataclass
class EstimationConfig:
    """Knobs shared by all estimators.

    ``bound`` is the symmetric box applied to every parameter;
    ``mass_floor`` additionally keeps the inertia diagonal away from zero so
    ridge shrinkage of unexcited parameters can never make the model
    singular at intermediate stages. The default ridge weight is small
    enough to act as numerical hygiene only: the equation-error data cost on
    a reference-scale dataset is O(1) while ||P||^2 is O(5e4), so anything
    near 1e-4 would visibly bias the inertia estimates.
    """

    lam: float = 1e-8
    bound: float = 1e4
    mass_floor: float = 1.0
    constraint_mode: str = "corrected"
    solver: SolveOptions = field(default_factory=SolveOptions)
    mode: str = "combined"
    thruster: ThrusterModel = field(default_factory=default_thruster)
    weights: Optional[dict] = None

    def __post_init__(self):
        if self.lam < 0:
            raise ShipIdError("ridge weight must be non-negative")
        if self.bound <= 0 or self.mass_floor <= 0:
            raise ShipIdError("bound and mass_floor must be positive")
        if self.constraint_mode not in _CONSTRAINT_MODES:
            raise ShipIdError(f"constraint_mode must be one of {_CONSTRAINT_MODES}")
        if self.mode not in ("lo", "go", "combined"):
            raise ShipIdError("mode must be lo, go or combined")


@dataclass
class EstimationResult:
    """Outcome of an estimation run, with full attempt provenance."""

    p_lo: Optional[ShipParams22] = None
    p_go: Optional[ShipParams22] = None
    residual_norms: dict = field(default_factory=dict)
    reports: list = field(default_factory=list)
    provenance: list = field(default_factory=list)
    degraded: bool = False

    @property
    def params(self) -> ShipParams22:
        p = self.p_go if self.p_go is not None else self.p_lo
        if p is None:
            raise ShipIdError("estimation produced no parameters")
        return p

    def to_dict(self, include_trace: bool = False) -> dict:
        out = {
            "p_lo": None if self.p_lo is None else self.p_lo.to_dict(),
            "p_go": None if self.p_go is None else self.p_go.to_dict(),
            "residual_norms": self.residual_norms,
            "provenance": self.provenance,
            "degraded": self.degraded,
        }
        out["reports"] = [
            {"tag": tag, **rep.to_dict(include_trace=include_trace)}
            for tag, rep in self.reports
        ]
        return out


# ---------------------------------------------------------------------------
# Empirical initialization


def empirical_added_mass(specs: HullSpecs) -> dict:
    """Strip-theory style added-mass estimates from the hull particulars."""
    a, b = specs.a, specs.b
    return {
        "X_ud": -0.05 * specs.m,
        "Y_vd": -0.5 * specs.rho * specs.D ** 2 * specs.L,
        "N_rd": -(0.1 * specs.m * specs.B ** 2
                  + specs.rho * np.pi * specs.D ** 2 * specs.L ** 3) / 24.0,
        "I_z": (4.0 / 15.0) * np.pi * specs.rho * a * b ** 2 * (a ** 2 + b ** 2),
    }


def init_params_empirical(specs: HullSpecs) -> ShipParams22:
    """Initial parameter vector: empirical inertia diagonal, zero damping.

    The off-diagonal inertia terms start at zero (centre of gravity at the
    origin, negligible yaw/sway added-mass coupling).
    """
    am = empirical_added_mass(specs)
    base = {k: 0.0 for k in PARAM22_KEYS}
    base.update(
        m11=specs.m - am["X_ud"],
        m22=specs.m - am["Y_vd"],
        m33=am["I_z"] - am["N_rd"],
    )
    return ShipParams22(**base)


def init_params6_empirical(specs: HullSpecs) -> ShipParams6:
    am = empirical_added_mass(specs)
    return ShipParams6(
        m11=specs.m - am["X_ud"],
        m22=specs.m - am["Y_vd"],
        m33=am["I_z"] - am["N_rd"],
        d11=0.0, d22=0.0, d33=0.0,
    )


# ---------------------------------------------------------------------------
# Constraints


def _stability_array(theta, literal: bool):
    m11, m22, m33 = theta[..., 0], theta[..., 1], theta[..., 4]
    X_u, Y_v, Y_r = theta[..., 5], theta[..., 8], theta[..., 12]
    N_v, N_r = theta[..., 15], theta[..., 18]
    q = Y_v * N_r - Y_r * N_v
    lead = X_u if literal else -X_u
    return np.stack(np.broadcast_arrays(m11, m22, m33, lead, lead * q), axis=-1)


def stability_constraints(p, mode: str = "corrected") -> np.ndarray:
    """Straight-line stability inequalities; every entry must be positive.

    The default uses the damping-matrix sign convention (-X_u > 0 for a
    dissipative hull). ``paper-literal`` keeps the raw coefficient, under
    which a dissipative hull fails the check; it exists for comparison.
    """
    if mode not in ("corrected", "paper-literal"):
        raise ShipIdError(f"unknown constraint mode {mode!r}")
    theta = p.as_array() if isinstance(p, ShipParams22) else np.asarray(p, dtype=float)
    return _stability_array(theta, literal=(mode == "paper-literal"))


# ---------------------------------------------------------------------------
# Residual builders (batched over parameter lanes)


def _weight_for(log, config: Optional[EstimationConfig]):
    if config is not None and config.weights and log.label in config.weights:
        return np.asarray(config.weights[log.label], dtype=float)
    return log.weight


class _LoBuilder:
    """One-step prediction residuals anchored at the measured states."""

    def __init__(self, dataset: Dataset, thr: ThrusterModel,
                 config: Optional[EstimationConfig] = None):
        anchors, cmds, targets, sqrtw, slices = [], [], [], [], []
        start = 0
        for log in dataset:
            if not log.has_velocities:
                raise ShipIdError(
                    f"maneuver '{log.label}' has no velocity channels; derive them first")
            states = log.measured_states()
            k = len(log) - 1
            anchors.append(states[:-1])
            cmds.append(log.cmds[:-1])
            targets.append(log.vels[1:])
            w = np.sqrt(_weight_for(log, config))
            sqrtw.append(np.broadcast_to(w, (k, 3)))
            slices.append((log.label, start, start + k))
            start += k
        self.x = np.vstack(anchors)
        self.cmds = np.vstack(cmds)
        self.targets = np.vstack(targets)
        self.sqrtw = np.vstack(sqrtw)
        self.slices = slices
        self.dt = dataset.dt
        self.tc = model._thruster_consts(thr)
        self.m = self.x.shape[0] * 3

    def predict(self, thetas):
        """Velocity predictions for (...,22) parameter lanes: (...,K,3)."""
        thetas = np.asarray(thetas, dtype=float)
        lanes = thetas.reshape((-1, 1, 22)) if thetas.ndim > 1 else thetas
        out = model._rk4_arrays(lanes, self.tc, self.x, self.cmds, self.dt)
        return out[..., 5:8]

    def residual(self, theta):
        res = (self.predict(theta) - self.targets) * self.sqrtw
        return res.reshape(res.shape[:-2] + (self.m,))

    def residual_batch(self, thetas):
        res = (self.predict(thetas) - self.targets) * self.sqrtw
        return res.reshape((thetas.shape[0], self.m))

    def per_maneuver_norms(self, theta) -> dict:
        r = self.residual(theta).reshape(-1, 3)
        return {label: float(np.linalg.norm(r[a:b]))
                for label, a, b in self.slices}


class _GoBuilder:
    """Whole-maneuver rollout residuals from the measured initial states."""

    def __init__(self, dataset: Dataset, thr: ThrusterModel,
                 config: Optional[EstimationConfig] = None):
        self.labels = [log.label for log in dataset]
        steps = [len(log) - 1 for log in dataset]
        nmax = max(steps)
        M = len(dataset)
        self.x0 = np.empty((M, 8))
        self.cmds = np.zeros((M, nmax, 4))
        self.targets = np.zeros((M, nmax, 3))
        self.mask = np.zeros((M, nmax), dtype=bool)
        self.sqrtw = np.empty((M, 3))
        for i, log in enumerate(dataset):
            if not log.has_velocities:
                raise ShipIdError(
                    f"maneuver '{log.label}' has no velocity channels; derive them first")
            k = steps[i]
            self.x0[i] = log.measured_states()[0]
            self.cmds[i, :k] = log.cmds[:k]
            self.cmds[i, k:] = log.cmds[k - 1]
            self.targets[i, :k] = log.vels[1:]
            self.mask[i, :k] = True
            self.sqrtw[i] = np.sqrt(_weight_for(log, config))
        self.steps = steps
        self.dt = dataset.dt
        self.thr = thr
        self.m = int(self.mask.sum()) * 3
        self.clamped = False

    def velocities(self, thetas):
        """Rolled-out velocities for (P,22) or (22,) lanes: (...,M,Nmax,3)."""
        traj = model.rollout_batch(thetas, self.thr, self.x0, self.cmds, self.dt)
        return traj[..., 1:, 5:8]

    def _finish(self, res):
        res = res[..., self.mask, :]
        bad = ~np.isfinite(res)
        if bad.any():
            self.clamped = True
            res = np.where(bad, _CLAMP, res)
        return res.reshape(res.shape[:-2] + (self.m,))

    def residual(self, theta):
        res = (self.velocities(np.asarray(theta, dtype=float))
               - self.targets) * self.sqrtw[:, None, :]
        return self._finish(res)

    def residual_batch(self, thetas):
        res = (self.velocities(thetas) - self.targets) * self.sqrtw[:, None, :]
        return self._finish(res)

    def per_maneuver_norms(self, theta) -> dict:
        res = (self.velocities(np.asarray(theta, dtype=float))
               - self.targets) * self.sqrtw[:, None, :]
        res = np.where(np.isfinite(res), res, _CLAMP)
        out = {}
        for i, label in enumerate(self.labels):
            out[label] = float(np.linalg.norm(res[i][self.mask[i]]))
        return out


def build_lo_residuals(p: ShipParams22, dataset: Dataset,
                       thr: Optional[ThrusterModel] = None) -> np.ndarray:
    """Equation-error residual vector (weighted, maneuver order)."""
    return _LoBuilder(dataset, thr or default_thruster()).residual(p.as_array())


def build_go_residuals(p: ShipParams22, dataset: Dataset,
                       thr: Optional[ThrusterModel] = None) -> np.ndarray:
    """Output-error residual vector (weighted, maneuver order)."""
    return _GoBuilder(dataset, thr or default_thruster()).residual(p.as_array())


# ---------------------------------------------------------------------------
# Parameter spaces (full model vs diagonal baseline)


def _embed6_array(t6):
    t6 = np.asarray(t6, dtype=float)
    out = np.zeros(t6.shape[:-1] + (22,))
    out[..., 0] = t6[..., 0]
    out[..., 1] = t6[..., 1]
    out[..., 4] = t6[..., 2]
    out[..., 5] = -t6[..., 3]
    out[..., 8] = -t6[..., 4]
    out[..., 18] = -t6[..., 5]
    return out


class _Space:
    def __init__(self, dim, mass_idx, embed):
        self.dim = dim
        self.mass_idx = mass_idx
        self.embed = embed


_SPACE22 = _Space(22, _MASS_IDX_22, lambda t: np.asarray(t, dtype=float))
_SPACE6 = _Space(6, _MASS_IDX_6, _embed6_array)


def _fd_lanes(theta, step):
    n = theta.size
    h = np.maximum(step, step * np.abs(theta))
    lanes = np.tile(theta, (2 * n, 1))
    lanes[:n] += np.diag(h)
    lanes[n:] -= np.diag(h)
    return lanes, h


def _make_problem(space: _Space, builder, config: EstimationConfig) -> NlsProblem:
    embed = space.embed

    def residual(theta):
        return builder.residual(embed(theta))

    def jacobian(theta):
        lanes, h = _fd_lanes(theta, config.solver.fd_step)
        R = builder.residual_batch(embed(lanes))
        n = theta.size
        return (R[:n] - R[n:]).T / (2.0 * h)

    lower = np.full(space.dim, -config.bound)
    upper = np.full(space.dim, config.bound)
    for i in space.mass_idx:
        lower[i] = config.mass_floor

    constraints = None
    if config.constraint_mode != "off":
        literal = config.constraint_mode == "paper-literal"

        def constraints(theta):
            return _stability_array(embed(theta), literal=literal)

    return NlsProblem(residual=residual, lower=lower, upper=upper,
                      constraints=constraints, ridge=config.lam,
                      jacobian=jacobian)


def _run_solve(space, builder, theta0, config) -> SolveReport:
    problem = _make_problem(space, builder, config)
    return solve(problem, theta0, config.solver)


def _go_failed(report: SolveReport) -> bool:
    return (not report.converged) or report.constraint_violation > _CONSTRAINT_TOL


def _norms(dataset, thr, theta22, config) -> dict:
    return {
        "lo": _LoBuilder(dataset, thr, config).per_maneuver_norms(theta22),
        "go": _GoBuilder(dataset, thr, config).per_maneuver_norms(theta22),
    }


# ---------------------------------------------------------------------------
# Public estimators


def _check_p0(space, p0):
    theta0 = p0.as_array() if hasattr(p0, "as_array") else np.asarray(p0, dtype=float)
    if theta0.shape != (space.dim,) or not np.all(np.isfinite(theta0)):
        raise ShipIdError(f"initial guess must be {space.dim} finite values")
    return theta0


def estimate_lo(dataset: Dataset, p0: ShipParams22,
                config: Optional[EstimationConfig] = None) -> EstimationResult:
    """Equation-error fit of the 22-parameter model."""
    config = config or EstimationConfig()
    theta0 = _check_p0(_SPACE22, p0)
    builder = _LoBuilder(dataset, config.thruster, config)
    report = _run_solve(_SPACE22, builder, theta0, config)
    p = ShipParams22.from_array(report.theta)
    return EstimationResult(
        p_lo=p,
        residual_norms=_norms(dataset, config.thruster, report.theta, config),
        reports=[("lo", report)],
        provenance=[{"stage": 1, "attempt": "lo", "maneuvers": len(dataset),
                     "status": report.status, "cost": report.cost}],
    )


def estimate_go(dataset: Dataset, p0: ShipParams22,
                config: Optional[EstimationConfig] = None) -> EstimationResult:
    """Output-error fit of the 22-parameter model."""
    config = config or EstimationConfig()
    theta0 = _check_p0(_SPACE22, p0)
    builder = _GoBuilder(dataset, config.thruster, config)
    report = _run_solve(_SPACE22, builder, theta0, config)
    p = ShipParams22.from_array(report.theta)
    return EstimationResult(
        p_go=p,
        residual_norms=_norms(dataset, config.thruster, report.theta, config),
        reports=[("go", report)],
        provenance=[{"stage": 1, "attempt": "go", "maneuvers": len(dataset),
                     "status": report.status, "cost": report.cost,
                     "clamped": builder.clamped}],
        degraded=_go_failed(report),
    )


def _combined(space, dataset: Dataset, theta0, config: EstimationConfig):
    """Incremental prefix-subset fitting with local-fit fallback."""
    thr = config.thruster
    theta = np.asarray(theta0, dtype=float).copy()
    provenance, reports = [], []
    theta_lo = None
    degraded = False
    n_max = len(dataset)

    for n in range(1, n_max + 1):
        sub = dataset.subset(n)
        go_builder = _GoBuilder(sub, thr, config)
        rep_go = _run_solve(space, go_builder, theta, config)
        entry = {"stage": n, "attempt": "go", "maneuvers": n,
                 "status": rep_go.status, "cost": rep_go.cost,
                 "constraint_violation": rep_go.constraint_violation,
                 "warm_start": "previous", "clamped": go_builder.clamped}
        provenance.append(entry)
        reports.append((f"go[{n}]", rep_go))
        if not _go_failed(rep_go):
            theta = rep_go.theta
            continue

        lo_builder = _LoBuilder(sub, thr, config)
        rep_lo = _run_solve(space, lo_builder, theta, config)
        theta_lo = rep_lo.theta
        provenance.append({"stage": n, "attempt": "lo", "maneuvers": n,
                           "status": rep_lo.status, "cost": rep_lo.cost,
                           "warm_start": "previous"})
        reports.append((f"lo[{n}]", rep_lo))

        go_builder.clamped = False
        rep_go2 = _run_solve(space, go_builder, rep_lo.theta, config)
        provenance.append({"stage": n, "attempt": "go", "maneuvers": n,
                           "status": rep_go2.status, "cost": rep_go2.cost,
                           "constraint_violation": rep_go2.constraint_violation,
                           "warm_start": "lo", "clamped": go_builder.clamped})
        reports.append((f"go-warm[{n}]", rep_go2))
        if _go_failed(rep_go2) and n == n_max:
            degraded = True
            theta = rep_lo.theta
        else:
            theta = rep_go2.theta

    return theta, theta_lo, provenance, reports, degraded


def estimate_combined(dataset: Dataset, p0: ShipParams22,
                      config: Optional[EstimationConfig] = None) -> EstimationResult:
    """Incremental LO+GO estimation over growing maneuver prefixes.

    When even the warm-started global fit fails at the final stage the
    result carries the local fit and is flagged as degraded.
    """
    config = config or EstimationConfig()
    theta0 = _check_p0(_SPACE22, p0)
    theta, theta_lo, provenance, reports, degraded = _combined(
        _SPACE22, dataset, theta0, config)
    p_lo = None if theta_lo is None else ShipParams22.from_array(theta_lo)
    return EstimationResult(
        p_lo=p_lo,
        p_go=None if degraded else ShipParams22.from_array(theta),
        residual_norms=_norms(dataset, config.thruster, theta, config),
        reports=reports,
        provenance=provenance,
        degraded=degraded,
    )


def estimate_6param(dataset: Dataset, p0: ShipParams6,
                    config: Optional[EstimationConfig] = None):
    """Fit the diagonal baseline model with the same combined machinery.

    Returns ``(ShipParams6, EstimationResult)``; the result stores the
    embedded 22-parameter equivalents.
    """
    config = config or EstimationConfig()
    theta0 = _check_p0(_SPACE6, p0)
    theta, theta_lo, provenance, reports, degraded = _combined(
        _SPACE6, dataset, theta0, config)
    final6 = theta_lo if degraded and theta_lo is not None else theta
    p6 = ShipParams6(m11=final6[0], m22=final6[1], m33=final6[2],
                     d11=final6[3], d22=final6[4], d33=final6[5])
    result = EstimationResult(
        p_lo=None if theta_lo is None else ShipParams22.from_array(_embed6_array(theta_lo)),
        p_go=None if degraded else p6.embed(),
        residual_norms=_norms(dataset, config.thruster, p6.embed().as_array(), config),
        reports=reports,
        provenance=provenance,
        degraded=degraded,
    )
    return p6, result
