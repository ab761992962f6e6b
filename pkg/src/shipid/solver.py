"""Bound- and inequality-constrained nonlinear least squares.

A damped Gauss-Newton (Levenberg-Marquardt) iteration minimizes

    0.5*||r(theta)||^2 + ridge*||theta||^2 + mu * sum relu(-h_i(theta))^2

subject to box bounds handled by projection. Inequalities h_i(theta) > 0
enter through a smooth exterior quadratic penalty whose weight ``mu``
escalates over a few outer rounds. Everything is deterministic for fixed
inputs; Jacobians default to central finite differences with an optional
user-supplied hook.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import SolverError

__all__ = ["NlsProblem", "SolveOptions", "SolveReport", "solve", "jacobian_fd"]

# Statuses that count as a converged solve.
CONVERGED_STATUSES = ("gtol", "xtol", "ftol")


@dataclass
class NlsProblem:
    """Residual function plus the feasible region description.

    ``constraints`` returns values that must all be positive at a feasible
    point. ``jacobian``, when given, must return the m-by-n Jacobian of the
    plain residual (ridge and penalty terms are appended internally).
    """

    residual: Callable[[np.ndarray], np.ndarray]
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    constraints: Optional[Callable[[np.ndarray], np.ndarray]] = None
    ridge: float = 0.0
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None


@dataclass
class SolveOptions:
    max_iter: int = 60
    gtol: float = 1e-8
    xtol: float = 1e-12
    ftol: float = 1e-11
    init_damping: float = 1e-3
    penalty_initial: float = 10.0
    penalty_factor: float = 10.0
    penalty_rounds: int = 4
    fd_step: float = 1e-6
    max_rejects: int = 25

    def __post_init__(self):
        for name in ("max_iter", "gtol", "xtol", "ftol", "init_damping",
                     "penalty_initial", "penalty_factor", "penalty_rounds",
                     "fd_step", "max_rejects"):
            if getattr(self, name) <= 0:
                raise SolverError(f"solver option {name} must be positive")

    def to_dict(self) -> dict:
        return {
            "max_iter": self.max_iter, "gtol": self.gtol, "xtol": self.xtol,
            "ftol": self.ftol, "init_damping": self.init_damping,
            "penalty_initial": self.penalty_initial,
            "penalty_factor": self.penalty_factor,
            "penalty_rounds": self.penalty_rounds,
            "fd_step": self.fd_step, "max_rejects": self.max_rejects,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SolveOptions":
        known = {k: d[k] for k in cls().to_dict() if k in d}
        return cls(**known)


@dataclass
class SolveReport:
    theta: np.ndarray
    cost: float
    iterations: int
    status: str
    constraint_violation: float
    cost_trace: list = field(default_factory=list)
    round_starts: list = field(default_factory=list)
    n_evals: int = 0

    @property
    def converged(self) -> bool:
        return self.status in CONVERGED_STATUSES

    def to_dict(self, include_trace: bool = False) -> dict:
        out = {
            "theta": np.asarray(self.theta).tolist(),
            "cost": self.cost,
            "iterations": self.iterations,
            "status": self.status,
            "converged": self.converged,
            "constraint_violation": self.constraint_violation,
            "n_evals": self.n_evals,
        }
        if include_trace:
            out["cost_trace"] = list(self.cost_trace)
            out["round_starts"] = list(self.round_starts)
        return out


def jacobian_fd(fn, theta, step=1e-6):
    """Central-difference Jacobian of a vector function.

    The per-parameter step is max(step, step*|theta_i|). Raises SolverError
    naming the parameter index if a perturbed evaluation is non-finite.
    """
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    cols = []
    for i in range(n):
        h = max(step, step * abs(theta[i]))
        tp = theta.copy()
        tm = theta.copy()
        tp[i] += h
        tm[i] -= h
        rp = np.asarray(fn(tp), dtype=float)
        rm = np.asarray(fn(tm), dtype=float)
        if not (np.all(np.isfinite(rp)) and np.all(np.isfinite(rm))):
            raise SolverError(
                f"non-finite residual while differencing parameter {i}"
            )
        cols.append((rp - rm) / (2.0 * h))
    return np.stack(cols, axis=1)


def _relu(x):
    return np.maximum(x, 0.0)


class _Augmented:
    """Residual/Jacobian of the penalized problem at a fixed penalty weight."""

    def __init__(self, problem: NlsProblem, mu: float, fd_step: float):
        self.p = problem
        self.mu = mu
        self.fd_step = fd_step
        self.n_evals = 0

    def residual(self, theta):
        self.n_evals += 1
        try:
            r = np.asarray(self.p.residual(theta), dtype=float).ravel()
        except Exception as exc:  # model errors at a probe point
            raise SolverError(f"residual evaluation failed: {exc}") from exc
        parts = [r]
        if self.p.ridge > 0.0:
            parts.append(np.sqrt(2.0 * self.p.ridge) * theta)
        if self.p.constraints is not None:
            h = np.asarray(self.p.constraints(theta), dtype=float).ravel()
            parts.append(np.sqrt(2.0 * self.mu) * _relu(-h))
        return np.concatenate(parts) if len(parts) > 1 else r

    def try_residual(self, theta):
        """Residual or None when the point is not evaluable/finite."""
        try:
            r = self.residual(theta)
        except SolverError:
            return None
        if not np.all(np.isfinite(r)):
            return None
        return r

    def jacobian(self, theta):
        n = theta.size
        if self.p.jacobian is not None:
            J = np.asarray(self.p.jacobian(theta), dtype=float)
        else:
            J = jacobian_fd(self.p.residual, theta, self.fd_step)
        blocks = [J]
        if self.p.ridge > 0.0:
            blocks.append(np.sqrt(2.0 * self.p.ridge) * np.eye(n))
        if self.p.constraints is not None:
            h = np.asarray(self.p.constraints(theta), dtype=float).ravel()
            Gh = jacobian_fd(self.p.constraints, theta, self.fd_step)
            active = (h < 0.0).astype(float)
            blocks.append(-np.sqrt(2.0 * self.mu) * active[:, None] * Gh)
        return np.vstack(blocks) if len(blocks) > 1 else J


def _violation(problem, theta):
    if problem.constraints is None:
        return 0.0
    h = np.asarray(problem.constraints(theta), dtype=float)
    return float(np.max(_relu(-h), initial=0.0))


def solve(problem: NlsProblem, theta0, options: Optional[SolveOptions] = None) -> SolveReport:
    """Run the damped Gauss-Newton iteration from ``theta0``.

    theta0 is clipped into the bounds (with a warning) if needed. Persistent
    step rejection yields a report with status ``stalled`` rather than an
    exception; only an unevaluable starting point raises.
    """
    opts = options or SolveOptions()
    theta = np.array(theta0, dtype=float).ravel()
    n = theta.size

    lower = np.full(n, -np.inf) if problem.lower is None else np.asarray(problem.lower, dtype=float)
    upper = np.full(n, np.inf) if problem.upper is None else np.asarray(problem.upper, dtype=float)
    if np.any(lower > upper):
        raise SolverError("lower bounds exceed upper bounds")
    clipped = np.clip(theta, lower, upper)
    if not np.array_equal(clipped, theta):
        warnings.warn("theta0 outside bounds; clipped to the feasible box", stacklevel=2)
        theta = clipped

    rounds = opts.penalty_rounds if problem.constraints is not None else 1
    mu = opts.penalty_initial

    trace: list = []
    round_starts: list = []
    total_iters = 0
    total_evals = 0
    status = "max_iter"

    for rnd in range(rounds):
        aug = _Augmented(problem, mu, opts.fd_step)
        r = aug.try_residual(theta)
        if r is None:
            if rnd == 0:
                raise SolverError("residual is non-finite at the initial point")
            break  # keep the previous round's result
        if rnd == 0 and r.size < n:
            warnings.warn(
                f"fewer residuals ({r.size}) than parameters ({n}); "
                "the problem is underdetermined", stacklevel=2)
        cost = 0.5 * float(r @ r)
        round_starts.append(len(trace))
        trace.append(cost)

        lm = opts.init_damping
        status = "max_iter"
        it = 0
        while it < opts.max_iter:
            J = aug.jacobian(theta)
            g = J.T @ r
            if np.linalg.norm(g, ord=np.inf) <= opts.gtol:
                status = "gtol"
                break
            H = J.T @ J
            # Marquardt scaling keeps the damping meaningful across
            # parameters whose sensitivities differ by orders of magnitude.
            d = np.diag(H).copy()
            floor = max(1e-12 * d.max(initial=0.0), 1e-300)
            scale = np.diag(np.maximum(d, floor))
            rejects = 0
            accepted = False
            while True:
                try:
                    delta = np.linalg.solve(H + lm * scale, -g)
                except np.linalg.LinAlgError:
                    delta = None
                if delta is not None:
                    trial = np.clip(theta + delta, lower, upper)
                    step = trial - theta
                    if np.linalg.norm(step) <= opts.xtol * (opts.xtol + np.linalg.norm(theta)):
                        status = "xtol"
                        break
                    r_trial = aug.try_residual(trial)
                    if r_trial is not None:
                        cost_trial = 0.5 * float(r_trial @ r_trial)
                        if cost_trial < cost:
                            gain = cost - cost_trial
                            theta, r, cost = trial, r_trial, cost_trial
                            trace.append(cost)
                            it += 1
                            lm = max(lm / 3.0, 1e-14)
                            accepted = True
                            if gain <= opts.ftol * max(cost, 1e-300):
                                status = "ftol"
                            break
                lm *= 2.0
                rejects += 1
                if rejects >= opts.max_rejects or lm > 1e15:
                    status = "stalled"
                    break
            if not accepted or status in ("ftol",):
                break
        total_iters += it
        total_evals += aug.n_evals

        if problem.constraints is None:
            break
        if _violation(problem, theta) <= 1e-8:
            break
        mu *= opts.penalty_factor

    return SolveReport(
        theta=theta,
        cost=cost,
        iterations=total_iters,
        status=status,
        constraint_violation=_violation(problem, theta),
        cost_trace=trace,
        round_starts=round_starts,
        n_evals=total_evals,
    )
