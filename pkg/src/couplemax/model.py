"""Problem containers and Lagrangian oracles.

The canonical problem is

    min over x in X   max over y in Y   f(x, y) + h(x) - g(y)
    subject to        A x + B y  (<=|=)  c   rowwise,

with f smooth, h and g prox-friendly convex terms, and the coupled rows
handled through a multiplier living in the product of half-lines (LE rows)
and lines (EQ rows).  The Lagrangian is

    L(x, y, lam) = f(x, y) - lam . (A x + B y - c).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .prox import ProxFunction
from .sets import ConvexSet, MultiplierCone, Sense, _as1d

Array = np.ndarray


@dataclass(frozen=True)
class SmoothFunction:
    """Smooth coupling term with declared curvature constants.

    ``lipschitz_L`` bounds every block of the gradient map (x and y
    derivatives, against perturbations of either argument) and
    ``strong_concavity_mu`` is the concavity modulus in y (zero when f is
    merely concave or indefinite in y).  Both are declared by the caller;
    ``estimate_lipschitz`` gives an empirical sanity check, not a certificate.
    """

    value: Callable[[Array, Array], float]
    grad_x: Callable[[Array, Array], Array]
    grad_y: Callable[[Array, Array], Array]
    lipschitz_L: float
    strong_concavity_mu: float = 0.0

    def __post_init__(self):
        if self.lipschitz_L <= 0:
            raise ValueError("lipschitz_L must be positive")
        if self.strong_concavity_mu < 0:
            raise ValueError("strong_concavity_mu must be nonnegative")


@dataclass(frozen=True)
class CouplingConstraints:
    """Rowwise linear coupling A x + B y (<=|=) c."""

    A: Array
    B: Array
    c: Array
    senses: tuple[Sense, ...]

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        c = _as1d(self.c)
        senses = tuple(Sense(s) for s in self.senses)
        if A.shape[0] != B.shape[0] or A.shape[0] != c.size:
            raise ValueError("constraint rows disagree between A, B and c")
        if len(senses) != c.size:
            raise ValueError("one sense per constraint row required")
        for arr in (A, B, c):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "senses", senses)

    @property
    def rows(self) -> int:
        return self.c.size

    def residual(self, x, y) -> Array:
        return self.A @ _as1d(x) + self.B @ _as1d(y) - self.c

    def multiplier_set(self) -> MultiplierCone:
        return MultiplierCone(self.senses)


@dataclass(frozen=True)
class MinimaxProblem:
    """Full problem instance: oracles, sets and coupled rows.

    ``linear_in_y`` declares that grad_y f does not depend on y; solvers that
    exploit the resulting closed-form inner step re-verify the claim at probe
    points before trusting it.  ``meta`` carries instance provenance (name,
    generator arguments) and is never read by the algorithms.
    """

    f: SmoothFunction
    h: ProxFunction
    g: ProxFunction
    constraints: CouplingConstraints
    set_X: ConvexSet
    set_Y: ConvexSet
    linear_in_y: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.constraints.A.shape[1] != self.set_X.dim:
            raise ValueError("A columns disagree with dim of X")
        if self.constraints.B.shape[1] != self.set_Y.dim:
            raise ValueError("B columns disagree with dim of Y")

    @property
    def n(self) -> int:
        return self.set_X.dim

    @property
    def m(self) -> int:
        return self.set_Y.dim

    @property
    def p(self) -> int:
        return self.constraints.rows

    def multiplier_set(self) -> MultiplierCone:
        return self.constraints.multiplier_set()


def _check_point(prob: MinimaxProblem, x, y, lam=None):
    x = _as1d(x)
    y = _as1d(y)
    if x.size != prob.n or y.size != prob.m:
        raise ValueError(
            f"point dims ({x.size}, {y.size}) disagree with problem dims ({prob.n}, {prob.m})"
        )
    if lam is None:
        return x, y
    lam = _as1d(lam)
    if lam.size != prob.p:
        raise ValueError(f"multiplier dim {lam.size} disagrees with {prob.p} rows")
    return x, y, lam


def lagrangian_value(prob: MinimaxProblem, x, y, lam) -> float:
    x, y, lam = _check_point(prob, x, y, lam)
    return float(prob.f.value(x, y)) - float(lam @ prob.constraints.residual(x, y))


def regularized_lagrangian_value(prob: MinimaxProblem, x, y, lam, rho: float) -> float:
    """Lagrangian minus (rho/2)||y||^2, the damped surrogate used when mu = 0."""
    y1 = _as1d(y)
    return lagrangian_value(prob, x, y, lam) - 0.5 * rho * float(y1 @ y1)


def lagrangian_grads(prob: MinimaxProblem, x, y, lam) -> tuple[Array, Array, Array]:
    """Gradients of L in x, y and lam; the lam gradient is minus the residual."""
    x, y, lam = _check_point(prob, x, y, lam)
    res = prob.constraints.residual(x, y)
    gx = _as1d(prob.f.grad_x(x, y)) - prob.constraints.A.T @ lam
    gy = _as1d(prob.f.grad_y(x, y)) - prob.constraints.B.T @ lam
    return gx, gy, -res


def linear_y_coefficient(prob: MinimaxProblem, x) -> Array:
    """Coefficient d(x) with grad_y f(x, .) == d(x), verified at two probes.

    Only meaningful for problems declared ``linear_in_y``; a mismatch above
    1e-8 between probe points reports the declaration as wrong.
    """
    if not prob.linear_in_y:
        raise ValueError("problem is not declared linear in y")
    x = _as1d(x)
    y0 = np.zeros(prob.m)
    y1 = np.ones(prob.m)
    d0 = _as1d(prob.f.grad_y(x, y0))
    d1 = _as1d(prob.f.grad_y(x, y1))
    gap = float(np.max(np.abs(d0 - d1), initial=0.0))
    if gap > 1e-8:
        raise ValueError(f"grad_y varies with y (gap {gap:.3e}); not linear in y")
    return d0


def estimate_lipschitz(prob: MinimaxProblem, n_samples: int = 200, seed: int = 0) -> float:
    """Empirical gradient Lipschitz estimate over sampled pairs in X x Y.

    Samples are projected into the sets; the estimate is a lower bound on the
    true constant and serves only as a plausibility check on declared values.
    """
    rng = np.random.default_rng(seed)
    rx = prob.set_X.radius_bound
    ry = prob.set_Y.radius_bound
    sx = rx if np.isfinite(rx) else 10.0
    sy = ry if np.isfinite(ry) else 10.0
    best = 0.0
    for _ in range(n_samples):
        x1 = prob.set_X.project(rng.uniform(-sx, sx, prob.n))
        x2 = prob.set_X.project(rng.uniform(-sx, sx, prob.n))
        y1 = prob.set_Y.project(rng.uniform(-sy, sy, prob.m))
        y2 = prob.set_Y.project(rng.uniform(-sy, sy, prob.m))
        du = np.concatenate([x1 - x2, y1 - y2])
        nd = float(np.linalg.norm(du))
        if nd < 1e-12:
            continue
        dg = np.concatenate(
            [
                _as1d(prob.f.grad_x(x1, y1)) - _as1d(prob.f.grad_x(x2, y2)),
                _as1d(prob.f.grad_y(x1, y1)) - _as1d(prob.f.grad_y(x2, y2)),
            ]
        )
        best = max(best, float(np.linalg.norm(dg)) / nd)
    return best
