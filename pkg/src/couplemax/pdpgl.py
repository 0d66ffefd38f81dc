"""Primal-dual solver for objectives linear in the inner variable.

Requires g == 0 and grad_y f independent of y.  The inner step then has a
projected closed form and one iteration from (x_k, y_k, lam_k) reads

    y_{k+1} = proj_Y((d(x_k) - B^T lam_k + p_k y_k) / (q_k + p_k))
    x_{k+1} = prox_h[X, alpha_k](x_k - grad_x L(x_k, y_{k+1}, lam_k) / alpha_k)
    lam_{k+1} = proj_cone(lam_k + gamma_k (A x_k + B y_{k+1} - c))

where d(x) = grad_y f(x, .).  The x and lam updates both read the stale x_k:
they move simultaneously, unlike the alternating solver, and swapping the
fresh x into the multiplier step changes the trajectory.

The y step maximizes L damped by (q_k/2)||y||^2 and anchored at y_k with
weight p_k.  The default schedule shrinks q_k ~ k^{-1/3} while alpha_k grows
to match, and convergence is declared on the undamped measure with the y
block evaluated at stepsize L.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .linalg import spectral_norm
from .model import MinimaxProblem, lagrangian_grads, lagrangian_value, linear_y_coefficient
from .prox import ZeroFunction
from .sets import _as1d
from .stationarity import grad_G
from .trace import IterateState, SolveResult, SolveTrace, TraceRow

Array = np.ndarray


@dataclass(frozen=True)
class TheorySchedule:
    """q_k = L / (2 k^{1/3}), p_k = q_k / 4, alpha_k matched, gamma_k = 1/alpha_k."""


@dataclass(frozen=True)
class ManualSchedule:
    """User-supplied schedule callables, each mapping k >= 1 to a value."""

    q_fn: Callable[[int], float]
    p_fn: Callable[[int], float]
    alpha_fn: Callable[[int], float]
    gamma_fn: Callable[[int], float]


@dataclass
class PdpgLParams:
    tau: float = 2.0
    max_iter: int = 1000
    target_eps: float = 1e-6
    schedule: TheorySchedule | ManualSchedule = TheorySchedule()
    record_potentials: bool = False

    def __post_init__(self):
        if self.tau <= 1:
            raise ValueError("tau must exceed 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.target_eps <= 0:
            raise ValueError("target_eps must be positive")


def _require_linear(prob: MinimaxProblem):
    if not prob.linear_in_y:
        raise ValueError("solver requires a problem declared linear in y")
    if not isinstance(prob.g, ZeroFunction):
        raise ValueError("solver requires g == 0")


def pdpgl_schedule(
    params: PdpgLParams, k: int, L: float, norm_A: float, norm_B: float
) -> tuple[float, float, float, float]:
    """Schedule values (q_k, p_k, alpha_k, gamma_k) at iteration k >= 1."""
    if k < 1:
        raise ValueError("iterations count from 1")
    if isinstance(params.schedule, ManualSchedule):
        s = params.schedule
        q_k, p_k = float(s.q_fn(k)), float(s.p_fn(k))
        alpha_k, gamma_k = float(s.alpha_fn(k)), float(s.gamma_fn(k))
        if q_k <= 0 or p_k < 0 or alpha_k <= 0 or gamma_k <= 0:
            raise ValueError("manual schedule produced a nonpositive value")
        return q_k, p_k, alpha_k, gamma_k
    q_k = L / (2.0 * k ** (1.0 / 3.0))
    p_k = q_k / 4.0
    L_A = L + norm_A
    L_B = L + norm_B
    alpha_k = 1.5 * L_A + 14.0 * params.tau * L_B**2 / (5.0 * q_k)
    return q_k, p_k, alpha_k, 1.0 / alpha_k


def vdescent_coefficient(q_k: float, tau: float, L_B: float) -> float:
    """Weight on the squared x and lam displacements in the merit decrease."""
    if q_k <= 0:
        raise ValueError("q_k must be positive")
    return 14.0 * (tau - 1.0) * L_B**2 / (5.0 * q_k)


def pdpg_l_y_step(prob: MinimaxProblem, x, y, lam, q_k: float, p_k: float) -> Array:
    """Exact damped inner maximizer, projected onto Y."""
    _require_linear(prob)
    if q_k + p_k <= 0:
        raise ValueError("q_k + p_k must be positive")
    x = _as1d(x)
    y = _as1d(y)
    lam = _as1d(lam)
    d = linear_y_coefficient(prob, x)
    target = (d - prob.constraints.B.T @ lam + p_k * y) / (q_k + p_k)
    return prob.set_Y.project(target)


def pdpg_l_step(
    prob: MinimaxProblem,
    state: IterateState,
    q_k: float,
    p_k: float,
    alpha_k: float,
    gamma_k: float,
) -> IterateState:
    """One iteration; x and lam update simultaneously from the stale x."""
    if alpha_k <= 0 or gamma_k <= 0:
        raise ValueError("alpha_k and gamma_k must be positive")
    x, y, lam = state.x, state.y, state.lam
    y_next = pdpg_l_y_step(prob, x, y, lam, q_k, p_k)
    gx, _, _ = lagrangian_grads(prob, x, y_next, lam)
    x_next = prob.h.prox(x - gx / alpha_k, alpha_k, prob.set_X)
    res = prob.constraints.A @ x + prob.constraints.B @ y_next - prob.constraints.c
    lam_next = prob.multiplier_set().project(lam + gamma_k * res)
    return IterateState(
        x=x_next,
        y=y_next,
        lam=lam_next,
        k=state.k + 1,
        schedule={"q_k": q_k, "p_k": p_k, "alpha_k": alpha_k, "gamma_k": gamma_k},
    )


def _damped_lagrangian(prob, x, y, lam, q_k, p_k, y_anchor) -> float:
    val = lagrangian_value(prob, x, y, lam) - 0.5 * q_k * float(y @ y)
    if p_k:
        d = y - y_anchor
        val -= 0.5 * p_k * float(d @ d)
    return val


def pdpg_l_solve(
    prob: MinimaxProblem,
    params: PdpgLParams,
    init: tuple[Array, Array, Array],
    sink=None,
) -> SolveResult:
    """Run the simultaneous solver from ``init``.

    Measures each iterate with weights (alpha_k, L, gamma_k) before stepping;
    convergence is declared when that norm reaches ``target_eps`` (a
    non-finite target disables the test).  With ``record_potentials`` each
    row carries the merit 2*Phi_k - L + h evaluated through the solver's own
    inner maximizer, so no extra inner solves are needed.
    """
    _require_linear(prob)
    linear_y_coefficient(prob, prob.set_X.project(_as1d(init[0])))  # verify declaration
    L = prob.f.lipschitz_L
    norm_A = spectral_norm(prob.constraints.A)
    norm_B = spectral_norm(prob.constraints.B)
    x = prob.set_X.project(_as1d(init[0]))
    y = prob.set_Y.project(_as1d(init[1]))
    lam = prob.multiplier_set().project(_as1d(init[2]))
    state = IterateState(x=x, y=y, lam=lam, k=1, schedule={})
    trace = SolveTrace(sink)
    converged = False
    steps = 0
    for k in range(1, params.max_iter + 1):
        q_k, p_k, alpha_k, gamma_k = pdpgl_schedule(params, k, L, norm_A, norm_B)
        report = grad_G(prob, state.x, state.y, state.lam, alpha_k, L, gamma_k, rho=0.0)
        grad_norm = report.norm_total
        y_next = pdpg_l_y_step(prob, state.x, state.y, state.lam, q_k, p_k)
        potential = None
        trusted = False
        if params.record_potentials:
            # unanchored damped maximizer has a projected closed form, so the
            # merit is exact rather than a lower bound from the anchored step
            y_star = pdpg_l_y_step(prob, state.x, state.y, state.lam, q_k, 0.0)
            phi_k = _damped_lagrangian(prob, state.x, y_star, state.lam, q_k, 0.0, state.y)
            potential = (
                2.0 * phi_k
                - lagrangian_value(prob, state.x, state.y, state.lam)
                + prob.h.value(state.x)
            )
            trusted = True
        sched = {"q_k": q_k, "p_k": p_k, "alpha_k": alpha_k, "gamma_k": gamma_k}
        trace.append(
            TraceRow(
                k=k,
                x_norm=float(np.linalg.norm(state.x)),
                y_norm=float(np.linalg.norm(state.y)),
                lam_norm=float(np.linalg.norm(state.lam)),
                grad_norm=grad_norm,
                max_violation=report.max_violation,
                potential=potential,
                potential_trusted=trusted,
                schedule=sched,
                x=state.x,
                y=state.y,
                lam=state.lam,
            )
        )
        if grad_norm <= params.target_eps and math.isfinite(params.target_eps):
            converged = True
            break
        gx, _, _ = lagrangian_grads(prob, state.x, y_next, state.lam)
        x_next = prob.h.prox(state.x - gx / alpha_k, alpha_k, prob.set_X)
        res = (
            prob.constraints.A @ state.x
            + prob.constraints.B @ y_next
            - prob.constraints.c
        )
        lam_next = prob.multiplier_set().project(state.lam + gamma_k * res)
        state = IterateState(x=x_next, y=y_next, lam=lam_next, k=k + 1, schedule=sched)
        steps += 1
    hit = None
    for row in trace:
        if row.grad_norm <= params.target_eps:
            hit = row.k
            break
    return SolveResult(
        final=state, trace=trace, converged=converged, iterations_used=steps, first_hit=hit
    )
