"""Alternating proximal gradient solver with a projected multiplier step.

One iteration from (x_k, y_k, lam_k):

    y_{k+1} = prox_g[Y, beta](y_k + (grad_y L(x_k, y_k, lam_k) - rho_k y_k) / beta)
    x_{k+1} = prox_h[X, alpha_k](x_k - grad_x L(x_k, y_{k+1}, lam_k) / alpha_k)
    lam_{k+1} = proj_cone(lam_k + gamma_k (A x_{k+1} + B y_{k+1} - c))

The multiplier step uses the freshly updated primal pair; feeding it the
stale x_k breaks the descent argument and, observably, the trajectory.

Two regimes share the loop.  With f strongly concave in y the weights are
constants chosen against conservative curvature bounds and the merit
2*Phi - L + h + g decreases every iteration by ``descent_constant`` times the
squared measure norm.  Without strong concavity a vanishing damping
rho_k ~ k^{-1/4} regularizes the inner problem and the weights grow with k;
convergence is then declared on the undamped measure through
||G|| <= ||G_rho|| + rho_k ||y_k||.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import spectral_norm
from .model import MinimaxProblem, lagrangian_grads
from .sets import _as1d
from .stationarity import grad_G, potential_M, potential_S
from .trace import IterateState, SolveResult, SolveTrace, TraceRow

Array = np.ndarray


@dataclass(frozen=True)
class StronglyConcaveRegime:
    """Constant weights for f strongly concave in y."""

    alpha: float
    gamma: float

    def __post_init__(self):
        if self.alpha <= 0 or self.gamma <= 0:
            raise ValueError("alpha and gamma must be positive")


@dataclass(frozen=True)
class ConcaveRegime:
    """Vanishing damping for merely concave inner problems; tau > 1."""

    tau: float = 2.0

    def __post_init__(self):
        if self.tau <= 1:
            raise ValueError("tau must exceed 1")


@dataclass
class PdapgParams:
    beta: float
    regime: StronglyConcaveRegime | ConcaveRegime
    max_iter: int = 1000
    target_eps: float = 1e-6
    theory_mode: bool = False
    record_potentials: bool = False

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.target_eps <= 0:
            raise ValueError("target_eps must be positive")


def strongly_concave_bounds(L: float, mu: float, beta: float, norm_B: float) -> dict:
    """Conservative weight thresholds for the strongly concave regime.

    eta bounds how far the inner maximizer moves per unit of prox residual;
    the alpha and 1/gamma floors keep the merit decreasing despite the x and
    multiplier blocks fighting the inner maximization.
    """
    if mu <= 0:
        raise ValueError("strongly concave regime needs mu > 0")
    eta = (2.0 * beta + mu) * (beta + L) / (mu * beta)
    alpha_min = (
        L**3 / (L + beta) ** 2
        + L * (L + beta) ** 2 * eta**2 / beta**2
        + L**2 / mu
        + 1.5 * L
    )
    inv_gamma_min = 2.0 * norm_B**2 * (L + beta) ** 2 * eta**2 / (L * beta**2) + L + L**2 / mu
    return {
        "eta": eta,
        "beta_min": 2.5 * L,
        "alpha_min": alpha_min,
        "inv_gamma_min": inv_gamma_min,
    }


def check_strongly_concave_weights(
    L: float, mu: float, beta: float, alpha: float, gamma: float, norm_B: float
) -> tuple[bool, dict]:
    bounds = strongly_concave_bounds(L, mu, beta, norm_B)
    ok = beta > bounds["beta_min"] and alpha > bounds["alpha_min"] and 1.0 / gamma > bounds["inv_gamma_min"]
    return ok, bounds


def pdapg_theory_params(
    prob: MinimaxProblem,
    beta: float | None = None,
    margin: float = 0.05,
    max_iter: int = 1000,
    target_eps: float = 1e-6,
    record_potentials: bool = False,
) -> PdapgParams:
    """Admissible constant weights for the strongly concave regime.

    beta defaults to 3L; alpha and 1/gamma sit ``margin`` above their floors
    so the guaranteed per-step decrease is strictly positive.
    """
    L = prob.f.lipschitz_L
    mu = prob.f.strong_concavity_mu
    if mu <= 0:
        raise ValueError("theory mode requires strong concavity in y (mu > 0)")
    if beta is None:
        beta = 3.0 * L
    bounds = strongly_concave_bounds(L, mu, beta, spectral_norm(prob.constraints.B))
    if beta <= bounds["beta_min"]:
        raise ValueError(f"beta must exceed {bounds['beta_min']:.6g}")
    alpha = bounds["alpha_min"] * (1.0 + margin)
    gamma = 1.0 / (bounds["inv_gamma_min"] * (1.0 + margin))
    return PdapgParams(
        beta=beta,
        regime=StronglyConcaveRegime(alpha=alpha, gamma=gamma),
        max_iter=max_iter,
        target_eps=target_eps,
        theory_mode=True,
        record_potentials=record_potentials,
    )


def pdapg_schedule(
    params: PdapgParams, k: int, L: float, norm_B: float
) -> tuple[float, float, float, float]:
    """Weights (alpha_k, beta, gamma_k, rho_k) at iteration k >= 1."""
    if k < 1:
        raise ValueError("iterations count from 1")
    beta = params.beta
    if isinstance(params.regime, StronglyConcaveRegime):
        return params.regime.alpha, beta, params.regime.gamma, 0.0
    tau = params.regime.tau
    rho_k = 2.0 * (L + beta) / k**0.25
    alpha_k = (
        L**3 / (L + beta) ** 2
        + L * tau * (L + beta) ** 4 * (2.0 * beta + rho_k) ** 2 / (beta**4 * rho_k**2)
        + tau * L**2 / rho_k
        + 1.5 * L
    )
    inv_gamma_k = (
        (2.0 * norm_B**2 + L**2 * (tau - 1.0))
        * (L + beta) ** 4
        * (2.0 * beta + rho_k) ** 2
        / (L * beta**4 * rho_k**2)
        + L
        + L**2 * tau / rho_k
    )
    return alpha_k, beta, 1.0 / inv_gamma_k, rho_k


def descent_constant(prob: MinimaxProblem, params: PdapgParams) -> float:
    """Guaranteed per-step merit decrease per unit of squared measure norm."""
    if not isinstance(params.regime, StronglyConcaveRegime):
        raise ValueError("descent constant applies to the strongly concave regime")
    L = prob.f.lipschitz_L
    mu = prob.f.strong_concavity_mu
    beta = params.beta
    alpha = params.regime.alpha
    gamma = params.regime.gamma
    norm_A = spectral_norm(prob.constraints.A)
    norm_B = spectral_norm(prob.constraints.B)
    bounds = strongly_concave_bounds(L, mu, beta, norm_B)
    num = min(
        alpha - bounds["alpha_min"],
        beta - bounds["beta_min"],
        1.0 / gamma - bounds["inv_gamma_min"],
    )
    if num <= 0:
        raise ValueError("weights do not satisfy the descent conditions")
    den = max(
        beta**2 + 2.0 * L**2 + 3.0 * norm_B**2,
        2.0 * alpha**2 + 3.0 * norm_A**2,
        3.0 / gamma**2,
    )
    return num / den


def pdapg_step(
    prob: MinimaxProblem,
    state: IterateState,
    alpha_k: float,
    beta: float,
    gamma_k: float,
    rho_k: float = 0.0,
) -> IterateState:
    """One y -> x -> lam sweep; the lam step sees the updated primal pair."""
    if alpha_k <= 0 or beta <= 0 or gamma_k <= 0:
        raise ValueError("weights must be positive")
    if rho_k < 0:
        raise ValueError("rho_k must be nonnegative")
    x, y, lam = state.x, state.y, state.lam
    _, gy, _ = lagrangian_grads(prob, x, y, lam)
    if rho_k:
        gy = gy - rho_k * y
    y_next = prob.g.prox(y + gy / beta, beta, prob.set_Y)
    gx, _, _ = lagrangian_grads(prob, x, y_next, lam)
    x_next = prob.h.prox(x - gx / alpha_k, alpha_k, prob.set_X)
    res = prob.constraints.residual(x_next, y_next)
    lam_next = prob.multiplier_set().project(lam + gamma_k * res)
    return IterateState(
        x=x_next,
        y=y_next,
        lam=lam_next,
        k=state.k + 1,
        schedule={"alpha_k": alpha_k, "beta": beta, "gamma_k": gamma_k, "rho_k": rho_k},
    )


def _validate_theory(prob: MinimaxProblem, params: PdapgParams):
    if isinstance(params.regime, StronglyConcaveRegime):
        L = prob.f.lipschitz_L
        mu = prob.f.strong_concavity_mu
        if mu <= 0:
            raise ValueError("theory mode requires strong concavity in y (mu > 0)")
        ok, bounds = check_strongly_concave_weights(
            L, mu, params.beta, params.regime.alpha, params.regime.gamma,
            spectral_norm(prob.constraints.B),
        )
        if not ok:
            raise ValueError(
                "weights violate the strongly concave descent conditions: "
                f"need beta > {bounds['beta_min']:.6g}, alpha > {bounds['alpha_min']:.6g}, "
                f"1/gamma > {bounds['inv_gamma_min']:.6g}"
            )
    else:
        if params.beta <= 2.5 * prob.f.lipschitz_L:
            raise ValueError(f"beta must exceed {2.5 * prob.f.lipschitz_L:.6g}")


def pdapg_solve(
    prob: MinimaxProblem,
    params: PdapgParams,
    init: tuple[Array, Array, Array],
    sink=None,
) -> SolveResult:
    """Run the alternating solver from ``init`` until the measure norm falls
    below ``target_eps`` or ``max_iter`` steps have been taken.

    Infeasible starting points are projected into X, Y and the multiplier
    cone.  Each iteration is measured before stepping, so the trace holds
    iterates 1..K and ``first_hit`` is the earliest measured iteration at or
    below the target.  A non-finite target disables the stopping test and the
    loop runs its full budget.
    """
    if params.theory_mode:
        _validate_theory(prob, params)
    L = prob.f.lipschitz_L
    norm_B = spectral_norm(prob.constraints.B)
    x = prob.set_X.project(_as1d(init[0]))
    y = prob.set_Y.project(_as1d(init[1]))
    lam = prob.multiplier_set().project(_as1d(init[2]))
    state = IterateState(x=x, y=y, lam=lam, k=1, schedule={})
    trace = SolveTrace(sink)
    concave = isinstance(params.regime, ConcaveRegime)
    converged = False
    steps = 0
    for k in range(1, params.max_iter + 1):
        alpha_k, beta, gamma_k, rho_k = pdapg_schedule(params, k, L, norm_B)
        report = grad_G(prob, state.x, state.y, state.lam, alpha_k, beta, gamma_k, rho=0.0)
        grad_norm = report.norm_total
        if concave and rho_k:
            damped = grad_G(prob, state.x, state.y, state.lam, alpha_k, beta, gamma_k, rho=rho_k)
            aug_norm = damped.norm_total
        else:
            aug_norm = grad_norm
        potential = None
        trusted = False
        if params.record_potentials:
            pv = (
                potential_M(prob, state.x, state.y, state.lam, rho_k)
                if concave
                else potential_S(prob, state.x, state.y, state.lam)
            )
            potential = pv.value
            trusted = pv.trusted()
        sched = {"alpha_k": alpha_k, "beta": beta, "gamma_k": gamma_k, "rho_k": rho_k,
                 "aug_norm": aug_norm}
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
        state = pdapg_step(prob, state, alpha_k, beta, gamma_k, rho_k)
        steps += 1
    hit = None
    for row in trace:
        if row.grad_norm <= params.target_eps:
            hit = row.k
            break
    return SolveResult(
        final=state, trace=trace, converged=converged, iterations_used=steps, first_hit=hit
    )
