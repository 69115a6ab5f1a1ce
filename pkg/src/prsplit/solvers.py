"""Iterative schemes: leveraged PRS, classical PRS, relaxed DRS, and FISTA.

All solvers share the stopping logic and trace capture of :class:`SolverConfig`.
The splitting schemes consume only the prox oracles of the original pair; the
quadratic-shift identities are baked into the leveraged step, so no new
oracles are ever required.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .core import (
    CompositeProblem,
    LeverageParams,
    SolveTrace,
    TraceRecord,
    validate_leverage,
    validate_regularity,
)
from .errors import NotSmooth

__all__ = [
    "SolverConfig",
    "IterateState",
    "prs_lev_step",
    "prs_lev_solve",
    "prs_classic_solve",
    "drs_solve",
    "fista_solve",
]

# Divergence heuristic: the theory forbids growth under valid hypotheses, so
# sustained growth signals a user-input error rather than a numerical hiccup.
DIVERGENCE_FACTOR = 10.0
DIVERGENCE_STEPS = 50

Stopping = Literal["fixed_point_distance", "normalized_error", "residual"]


@dataclass(frozen=True)
class SolverConfig:
    """Iteration budget, tolerance, stopping metric, and trace switch.

    ``stopping=None`` picks ``fixed_point_distance`` when a z* oracle is
    available and ``residual`` (on ``||p_n - x_n||``) otherwise.
    """

    max_iter: int = 1000
    tol: float = 1e-10
    stopping: Optional[Stopping] = None
    record_trace: bool = True

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not (self.tol > 0.0):
            raise ValueError("tol must be positive")
        if self.stopping not in (None, "fixed_point_distance", "normalized_error", "residual"):
            raise ValueError(f"unknown stopping rule {self.stopping!r}")


@dataclass(frozen=True)
class IterateState:
    """Driving point z plus the last prox outputs x, p and reflected point y."""

    z: np.ndarray
    x: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    p: Optional[np.ndarray] = None


def prs_lev_step(
    state: IterateState, problem: CompositeProblem, lp: LeverageParams
) -> IterateState:
    """One leveraged step: two rescaled proxes of the original f and g."""
    t, e = lp.tau, lp.eta
    sf = lp.f_scale
    x = problem.f.prox((t + e) / sf, state.z / sf)
    y = (2.0 * t * x - (t - e) * state.z) / (t + e)
    sg = lp.g_scale
    p = problem.g.prox((t - e) / sg, y / sg)
    z_next = state.z + (2.0 * t / (t - e)) * (p - x)
    return IterateState(z=z_next, x=x, y=y, p=p)


class _Monitor:
    """Shared stopping/trace bookkeeping for the fixed-point solvers."""

    def __init__(self, config: SolverConfig, z0: np.ndarray, z_star: Optional[np.ndarray]):
        self.config = config
        self.z_star = z_star
        stopping = config.stopping
        if stopping is None:
            stopping = "fixed_point_distance" if z_star is not None else "residual"
        if stopping in ("fixed_point_distance", "normalized_error") and z_star is None:
            raise ValueError(f"stopping rule {stopping!r} needs a fixed-point oracle")
        self.stopping = stopping
        self.dist0 = float(np.linalg.norm(z0 - z_star)) if z_star is not None else None
        self.trace = SolveTrace(records=[], status="max_iter")
        self._growth_run = 0

    def dist(self, z: np.ndarray) -> Optional[float]:
        if self.z_star is None:
            return None
        return float(np.linalg.norm(z - self.z_star))

    def update(self, iteration: int, residual: float,
               dist_prev: Optional[float], dist_next: Optional[float]) -> bool:
        """Record one iteration; return True when the solve should stop."""
        self.trace.total_iterations = iteration + 1
        ratio = None
        if dist_prev is not None and dist_prev > 0.0 and dist_next is not None:
            ratio = dist_next / dist_prev
        if self.config.record_trace:
            self.trace.records.append(
                TraceRecord(iteration, residual, dist_prev, ratio)
            )
        if self.stopping == "residual":
            converged = residual <= self.config.tol
            metric, metric0 = residual, None
        elif self.stopping == "fixed_point_distance":
            converged = dist_next <= self.config.tol
            metric, metric0 = dist_next, self.dist0
        else:  # normalized_error
            if self.dist0 == 0.0:
                converged = True
            else:
                converged = dist_next / self.dist0 < self.config.tol
            metric, metric0 = dist_next, self.dist0
        if converged:
            self.trace.status = "converged"
            return True
        baseline = metric0 if metric0 is not None else self._first_metric(metric)
        if baseline > 0.0 and metric > DIVERGENCE_FACTOR * baseline:
            self._growth_run += 1
            if self._growth_run >= DIVERGENCE_STEPS:
                self.trace.status = "diverged"
                return True
        else:
            self._growth_run = 0
        return False

    def _first_metric(self, metric: float) -> float:
        if not hasattr(self, "_metric0"):
            self._metric0 = metric
        return self._metric0


def _default_z0(problem: CompositeProblem, z0: Optional[np.ndarray]) -> np.ndarray:
    if z0 is None:
        return problem.f.zero_point()
    return np.asarray(z0, dtype=float)


def _resolve_fixed_point(
    problem: CompositeProblem, lp: LeverageParams, z_star: Optional[np.ndarray]
) -> Optional[np.ndarray]:
    if z_star is not None:
        return np.asarray(z_star, dtype=float)
    if problem.fixed_point_oracle is not None:
        return np.asarray(problem.fixed_point_oracle(lp), dtype=float)
    return None


def prs_lev_solve(
    problem: CompositeProblem,
    lp: LeverageParams,
    config: SolverConfig = SolverConfig(),
    z0: Optional[np.ndarray] = None,
    z_star: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray, SolveTrace]:
    """Run the leveraged recurrence; returns ``(x_final, z_final, trace)``.

    ``x_final`` is the f-prox output at termination, which converges to a
    minimizer of the original problem.
    """
    validate_regularity(problem.regularity, "leveraged")
    validate_leverage(lp, problem.regularity)
    state = IterateState(z=_default_z0(problem, z0))
    zs = _resolve_fixed_point(problem, lp, z_star)
    monitor = _Monitor(config, state.z, zs)
    for n in range(config.max_iter):
        dist_prev = monitor.dist(state.z)
        state = prs_lev_step(state, problem, lp)
        residual = float(np.linalg.norm(state.p - state.x))
        if monitor.update(n, residual, dist_prev, monitor.dist(state.z)):
            break
    # the solution estimate belongs to the terminal z, not the previous one
    sf = lp.f_scale
    x_final = problem.f.prox((lp.tau + lp.eta) / sf, state.z / sf)
    return x_final, state.z, monitor.trace


def drs_solve(
    problem: CompositeProblem,
    tau: float,
    lam: float,
    config: SolverConfig = SolverConfig(),
    z0: Optional[np.ndarray] = None,
    z_star: Optional[np.ndarray] = None,
    ordering: Literal["fg", "gf"] = "fg",
) -> tuple[np.ndarray, np.ndarray, SolveTrace]:
    """Relaxed splitting ``z+ = z + 2*lam*(p - x)``; ``lam = 1`` is plain PRS.

    ``ordering="fg"`` proxes f first (the convention of the leveraged
    recurrence, whose fixed point the attached oracle describes); ``"gf"``
    swaps the roles, in which case a z*-based stopping rule needs an explicit
    ``z_star``.
    """
    if not (tau > 0.0):
        raise ValueError("tau must be positive")
    if not (0.0 < lam <= 1.0):
        raise ValueError("relaxation must lie in ]0, 1]")
    if ordering not in ("fg", "gf"):
        raise ValueError(f"unknown ordering {ordering!r}")
    first, second = (problem.f, problem.g) if ordering == "fg" else (problem.g, problem.f)
    z = _default_z0(problem, z0)
    if ordering == "fg":
        zs = _resolve_fixed_point(problem, LeverageParams(0.0, 0.0, tau), z_star)
    else:
        zs = np.asarray(z_star, dtype=float) if z_star is not None else None
    monitor = _Monitor(config, z, zs)
    for n in range(config.max_iter):
        dist_prev = monitor.dist(z)
        x = first.prox(tau, z)
        p = second.prox(tau, 2.0 * x - z)
        z = z + 2.0 * lam * (p - x)
        residual = float(np.linalg.norm(p - x))
        if monitor.update(n, residual, dist_prev, monitor.dist(z)):
            break
    return first.prox(tau, z), z, monitor.trace


def prs_classic_solve(
    problem: CompositeProblem,
    tau: float,
    config: SolverConfig = SolverConfig(),
    z0: Optional[np.ndarray] = None,
    z_star: Optional[np.ndarray] = None,
    ordering: Literal["fg", "gf"] = "fg",
) -> tuple[np.ndarray, np.ndarray, SolveTrace]:
    """Plain Peaceman-Rachford: the unrelaxed (``lam = 1``) splitting."""
    return drs_solve(problem, tau, 1.0, config, z0, z_star, ordering)


def fista_solve(
    problem: CompositeProblem,
    mode: Literal["forward_on_f", "forward_on_g"],
    config: SolverConfig = SolverConfig(),
    x0: Optional[np.ndarray] = None,
    step: Optional[float] = None,
    momentum: Optional[float] = None,
) -> tuple[np.ndarray, SolveTrace]:
    """Accelerated proximal gradient with strong-convexity momentum.

    Gradient steps are taken on the ``mode`` function and prox steps on the
    other one.  The default step is the forward function's cocoercivity
    modulus (1/Lipschitz) and the default momentum is the constant
    ``(1 - sqrt(q)) / (1 + sqrt(q))`` with ``q = step * (rho + mu)``; both can
    be overridden.  The objective is not monotone along the iterates, so
    stopping uses the prox-gradient residual ``||x_{k+1} - y_k||``, or the
    distance to ``solution_oracle`` for the distance-based rules.
    """
    reg = problem.regularity
    if mode == "forward_on_f":
        smooth, proxed, coco = problem.f, problem.g, reg.alpha
    elif mode == "forward_on_g":
        smooth, proxed, coco = problem.g, problem.f, reg.beta
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if smooth.gradient is None:
        raise NotSmooth(f"{mode} needs a gradient oracle on the forward function")
    if coco <= 0.0 and step is None:
        raise NotSmooth(f"{mode} needs a positive cocoercivity modulus (or an explicit step)")
    gamma = coco if step is None else step
    if momentum is None:
        q = min(gamma * (reg.rho + reg.mu), 1.0)
        momentum = (1.0 - math.sqrt(q)) / (1.0 + math.sqrt(q))

    x = _default_z0(problem, x0)
    x_star = problem.solution_oracle
    monitor = _Monitor(config, x, x_star)
    y = x
    for n in range(config.max_iter):
        dist_prev = monitor.dist(x)
        x_next = proxed.prox(gamma, y - gamma * smooth.gradient(y))
        residual = float(np.linalg.norm(x_next - y))
        y = x_next + momentum * (x_next - x)
        x = x_next
        if monitor.update(n, residual, dist_prev, monitor.dist(x)):
            break
    return x, monitor.trace
