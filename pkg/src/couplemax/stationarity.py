"""Stationarity measures, feasibility certificates and potential functions.

The composite stationarity map at (x, y, lam) with weights (alpha, beta,
gamma) stacks three prox-residual blocks:

    block_x = alpha * (x - prox_h[X, alpha](x - grad_x L / alpha))
    block_y = beta  * (y - prox_g[Y, beta](y + grad_y L / beta))
    block_l = (1/gamma) * (lam - proj_cone(lam - gamma * grad_lam L))

A small total norm certifies approximate primal-dual stationarity, and for
nonnegative multipliers it also bounds every row's constraint violation by
the same norm, which is what ``per_row_violation`` reports against.

``rho`` damps the y block (grad_y L - rho * y), giving the measure used while
a merely-concave inner problem is being regularized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    MinimaxProblem,
    _check_point,
    lagrangian_grads,
    lagrangian_value,
    linear_y_coefficient,
)
from .prox import ZeroFunction
from .sets import Sense, _as1d

Array = np.ndarray


class UntrustedPotentialError(ValueError):
    """Raised when an inner maximization has no concavity to certify it."""


@dataclass(frozen=True)
class StationarityReport:
    block_x: Array
    block_y: Array
    block_lam: Array
    norm_total: float
    per_row_violation: Array
    alpha: float
    beta: float
    gamma: float
    rho: float

    @property
    def max_violation(self) -> float:
        return float(np.max(self.per_row_violation, initial=0.0))


def constraint_violation(prob: MinimaxProblem, x, y) -> Array:
    """Per-row infeasibility: positive part for LE rows, magnitude for EQ."""
    res = prob.constraints.residual(x, y)
    out = np.empty_like(res)
    for i, sense in enumerate(prob.constraints.senses):
        out[i] = max(res[i], 0.0) if sense == Sense.LE else abs(res[i])
    return out


def grad_G(
    prob: MinimaxProblem,
    x,
    y,
    lam,
    alpha: float,
    beta: float,
    gamma: float,
    rho: float = 0.0,
) -> StationarityReport:
    """Composite stationarity measure with weights (alpha, beta, gamma)."""
    if alpha <= 0 or beta <= 0 or gamma <= 0:
        raise ValueError("stationarity weights alpha, beta, gamma must be positive")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    x, y, lam = _check_point(prob, x, y, lam)
    gx, gy, glam = lagrangian_grads(prob, x, y, lam)
    if rho:
        gy = gy - rho * y
    bx = alpha * (x - prob.h.prox(x - gx / alpha, alpha, prob.set_X))
    by = beta * (y - prob.g.prox(y + gy / beta, beta, prob.set_Y))
    lam_next = prob.multiplier_set().project(lam - gamma * glam)
    bl = (lam - lam_next) / gamma
    norm = float(np.sqrt(bx @ bx + by @ by + bl @ bl))
    return StationarityReport(
        block_x=bx,
        block_y=by,
        block_lam=bl,
        norm_total=norm,
        per_row_violation=constraint_violation(prob, x, y),
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        rho=rho,
    )


@dataclass(frozen=True)
class PotentialValue:
    value: float
    inner_residual: float

    def trusted(self, threshold: float = 1e-9) -> bool:
        return self.inner_residual <= threshold


def inner_max_value(
    prob: MinimaxProblem,
    x,
    lam,
    rho: float = 0.0,
    prox_center: tuple[Array, float] | None = None,
    tol: float = 1e-9,
    max_iter: int = 20000,
) -> PotentialValue:
    """Value of  max over y in Y of  L(x, y, lam) - (rho/2)||y||^2
                                    - (p/2)||y - y0||^2 - g(y).

    Requires some concavity to certify the answer: either f strongly concave
    in y, or rho + p > 0 from the regularizers.  Problems declared linear in
    y with g == 0 use the exact projected closed form; everything else runs
    accelerated proximal ascent until the fixed-point residual drops below
    ``tol``.  The reported residual tells callers how far the inner solve may
    be from optimal; values above the trust threshold should not feed
    monotonicity checks.
    """
    x = _as1d(x)
    lam = _as1d(lam)
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    y0 = np.zeros(prob.m)
    p = 0.0
    if prox_center is not None:
        y0 = _as1d(prox_center[0])
        p = float(prox_center[1])
        if p < 0:
            raise ValueError("prox center weight must be nonnegative")
    mu_eff = prob.f.strong_concavity_mu + rho + p
    if mu_eff <= 0:
        raise UntrustedPotentialError(
            "inner maximization is not strongly concave (mu = 0 and no "
            "regularization); its value would be untrusted"
        )

    Bt = prob.constraints.B.T

    def objective(y: Array) -> float:
        val = lagrangian_value(prob, x, y, lam) - prob.g.value(y)
        if rho:
            val -= 0.5 * rho * float(y @ y)
        if p:
            d = y - y0
            val -= 0.5 * p * float(d @ d)
        return val

    if prob.linear_in_y and isinstance(prob.g, ZeroFunction) and rho + p > 0:
        d = linear_y_coefficient(prob, x)
        y_star = prob.set_Y.project((d - Bt @ lam + p * y0) / (rho + p))
        # fixed-point residual of the projected ascent map, for honesty
        grad = d - Bt @ lam - rho * y_star - p * (y_star - y0)
        step = prob.f.lipschitz_L + rho + p
        resid = step * float(
            np.linalg.norm(y_star - prob.set_Y.project(y_star + grad / step))
        )
        return PotentialValue(objective(y_star), resid)

    L_eff = prob.f.lipschitz_L + rho + p
    kappa = L_eff / mu_eff
    momentum = (np.sqrt(kappa) - 1.0) / (np.sqrt(kappa) + 1.0)

    def smooth_grad(y: Array) -> Array:
        g = _as1d(prob.f.grad_y(x, y)) - Bt @ lam
        if rho:
            g = g - rho * y
        if p:
            g = g - p * (y - y0)
        return g

    def residual_at(y: Array) -> float:
        ahead = prob.g.prox(y + smooth_grad(y) / L_eff, L_eff, prob.set_Y)
        return L_eff * float(np.linalg.norm(y - ahead))

    y = prob.set_Y.project(y0)
    y_prev = y
    best_val = objective(y)
    resid = residual_at(y)
    for it in range(1, max_iter + 1):
        w = y + momentum * (y - y_prev)
        y_next = prob.g.prox(w + smooth_grad(w) / L_eff, L_eff, prob.set_Y)
        y_prev, y = y, y_next
        val = objective(y)
        if val < best_val:  # momentum overshoot, restart
            y_prev = y
        best_val = max(best_val, val)
        if it % 5 == 0 or it == max_iter:
            resid = residual_at(y)
            if resid <= tol:
                break
    return PotentialValue(objective(y), resid)


def potential_S(prob: MinimaxProblem, x, y, lam, tol: float = 1e-9) -> PotentialValue:
    """Merit value 2*Phi(x, lam) - L(x, y, lam) + h(x) + g(y).

    Phi is the inner max over Y; since Phi >= L - g at any feasible y, the
    merit is bounded below on bounded iterates, and the strongly concave
    solver drives it monotonically down.  At an exact inner maximizer the
    value collapses to Phi + h + g.
    """
    x, y, lam = _check_point(prob, x, y, lam)
    phi = inner_max_value(prob, x, lam, tol=tol)
    val = 2.0 * phi.value - lagrangian_value(prob, x, y, lam) + prob.h.value(x) + prob.g.value(y)
    return PotentialValue(val, phi.inner_residual)


def potential_M(prob: MinimaxProblem, x, y, lam, rho_k: float, tol: float = 1e-9) -> PotentialValue:
    """Damped merit 2*Psi_k - L_k + h + g with the rho-regularized inner max."""
    if rho_k < 0:
        raise ValueError("rho_k must be nonnegative")
    x, y, lam = _check_point(prob, x, y, lam)
    psi = inner_max_value(prob, x, lam, rho=rho_k, tol=tol)
    L_k = lagrangian_value(prob, x, y, lam) - 0.5 * rho_k * float(y @ y)
    val = 2.0 * psi.value - L_k + prob.h.value(x) + prob.g.value(y)
    return PotentialValue(val, psi.inner_residual)


def potential_V(
    prob: MinimaxProblem,
    x,
    y,
    lam,
    q_k: float,
    p_k: float,
    y_center,
    tol: float = 1e-9,
) -> PotentialValue:
    """Merit 2*Phi_k - L + h for the linear-in-y solver.

    Phi_k is the inner max damped by (q_k/2)||y||^2 and anchored at
    ``y_center`` with weight p_k; the solver's own y step computes exactly
    this maximizer, so along a trajectory the value is cheap to audit.
    """
    if q_k < 0 or p_k < 0:
        raise ValueError("q_k and p_k must be nonnegative")
    x, y, lam = _check_point(prob, x, y, lam)
    phi = inner_max_value(prob, x, lam, rho=q_k, prox_center=(_as1d(y_center), p_k), tol=tol)
    val = 2.0 * phi.value - lagrangian_value(prob, x, y, lam) + prob.h.value(x)
    return PotentialValue(val, phi.inner_residual)
