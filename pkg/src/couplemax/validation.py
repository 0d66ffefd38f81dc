"""Desk-scale brute-force values and diagnostic constants.

Grid evaluation is only meant for instances with n + m <= 4; it gives an
independent reference for the primal value

    min over x   max over feasible y   f + h - g

and the dual value obtained by scanning multipliers,

    min over lam   min over x   max over y   L + h - g.

For concave-in-y instances with a strictly feasible inner point the two agree
up to grid resolution, which is the check the test-suite runs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .model import MinimaxProblem, lagrangian_value
from .sets import Sense, _as1d

Array = np.ndarray

MAX_AXIS_POINTS = 201
MAX_TOTAL_POINTS = 10_000_000


@dataclass(frozen=True)
class GridSpec:
    """Axis ranges and point counts for a rectangular evaluation grid."""

    ranges: tuple[tuple[float, float], ...]
    points: tuple[int, ...]

    def __post_init__(self):
        ranges = tuple((float(lo), float(hi)) for lo, hi in self.ranges)
        points = tuple(int(p) for p in self.points)
        if len(ranges) != len(points):
            raise ValueError("one point count per axis required")
        for (lo, hi), p in zip(ranges, points):
            if hi < lo:
                raise ValueError("axis range has hi < lo")
            if p < 2:
                raise ValueError("each axis needs at least 2 points")
            if p > MAX_AXIS_POINTS:
                raise ValueError(f"axis point count exceeds {MAX_AXIS_POINTS}")
        object.__setattr__(self, "ranges", ranges)
        object.__setattr__(self, "points", points)

    @property
    def total(self) -> int:
        return int(np.prod(self.points))

    def axes(self) -> list[Array]:
        return [np.linspace(lo, hi, p) for (lo, hi), p in zip(self.ranges, self.points)]

    def cell_diagonal(self) -> float:
        steps = [(hi - lo) / (p - 1) for (lo, hi), p in zip(self.ranges, self.points)]
        return float(np.sqrt(sum(s * s for s in steps)))


def _grid_points(spec: GridSpec, project) -> Array:
    pts = np.array(list(itertools.product(*spec.axes())), dtype=float)
    return np.array([project(p) for p in pts])


def _check_budget(*specs: GridSpec):
    total = int(np.prod([s.total for s in specs]))
    if total > MAX_TOTAL_POINTS:
        raise ValueError(f"combined grid of {total} points exceeds {MAX_TOTAL_POINTS}")


def _feasible_mask(prob: MinimaxProblem, x: Array, ys: Array, tol: float) -> Array:
    res = x @ prob.constraints.A.T + ys @ prob.constraints.B.T - prob.constraints.c
    mask = np.ones(len(ys), dtype=bool)
    for i, sense in enumerate(prob.constraints.senses):
        col = res[:, i]
        mask &= (col <= tol) if sense == Sense.LE else (np.abs(col) <= tol)
    return mask


def brute_primal_value(
    prob: MinimaxProblem, grid_x: GridSpec, grid_y: GridSpec, feas_tol: float = 1e-9
) -> float:
    """Grid min-max of f + h - g over jointly feasible pairs.

    Grid x points with no feasible grid y score +inf; if every x does, the
    grid cannot see the feasible region and the call fails loudly.
    """
    if prob.n + prob.m > 4:
        raise ValueError("brute force is limited to n + m <= 4")
    _check_budget(grid_x, grid_y)
    xs = _grid_points(grid_x, prob.set_X.project)
    ys = _grid_points(grid_y, prob.set_Y.project)
    gvals = np.array([prob.g.value(y) for y in ys])
    best = math.inf
    any_feasible = False
    for x in xs:
        mask = _feasible_mask(prob, x, ys, feas_tol)
        if not np.any(mask):
            continue
        any_feasible = True
        hx = prob.h.value(x)
        inner = max(
            float(prob.f.value(x, ys[j])) + hx - gvals[j] for j in np.flatnonzero(mask)
        )
        best = min(best, inner)
    if not any_feasible:
        raise ValueError("no grid point is feasible; refine the grid or the instance")
    return best


def brute_dual_value(
    prob: MinimaxProblem, grid_x: GridSpec, grid_y: GridSpec, grid_lam: GridSpec
) -> float:
    """Grid min over multipliers of min over x of max over y of L + h - g.

    LE rows scan [0, extent]; EQ rows scan symmetric ranges.  The caller owns
    the multiplier extent; ``suggest_multiplier_extent`` gives a crude bound
    and doubling the extent should leave the value unchanged when it is large
    enough.
    """
    if prob.n + prob.m > 4:
        raise ValueError("brute force is limited to n + m <= 4")
    if len(grid_lam.points) != prob.p:
        raise ValueError("one multiplier axis per constraint row required")
    _check_budget(grid_x, grid_y, grid_lam)
    for (lo, hi), sense in zip(grid_lam.ranges, prob.constraints.senses):
        if sense == Sense.LE and lo < 0:
            raise ValueError("LE multiplier axes must be nonnegative")
    xs = _grid_points(grid_x, prob.set_X.project)
    ys = _grid_points(grid_y, prob.set_Y.project)
    # F[i, j] = f + h - g at (x_i, y_j); residual R[:, i, j] per row.
    F = np.array([[float(prob.f.value(x, y)) for y in ys] for x in xs])
    F += np.array([prob.h.value(x) for x in xs])[:, None]
    F -= np.array([prob.g.value(y) for y in ys])[None, :]
    R = np.empty((prob.p, len(xs), len(ys)))
    for r in range(prob.p):
        ax = xs @ prob.constraints.A[r]
        by = ys @ prob.constraints.B[r]
        R[r] = ax[:, None] + by[None, :] - prob.constraints.c[r]
    best = math.inf
    for lam in itertools.product(*grid_lam.axes()):
        Lmat = F.copy()
        for r in range(prob.p):
            Lmat -= lam[r] * R[r]
        best = min(best, float(Lmat.max(axis=1).min()))
    return best


def suggest_multiplier_extent(
    prob: MinimaxProblem, grid_x: GridSpec, grid_y: GridSpec, lipschitz_G: float
) -> float:
    """Crude multiplier range: 10 G over the smallest worst-row violation.

    The violation scale is taken per grid x as the largest infeasibility over
    grid y, minimized over the x whose slice is ever infeasible.  A grid with
    no infeasible points cannot constrain the multiplier, so the extent
    defaults to 1.
    """
    xs = _grid_points(grid_x, prob.set_X.project)
    ys = _grid_points(grid_y, prob.set_Y.project)
    worst = []
    for x in xs:
        res = x @ prob.constraints.A.T + ys @ prob.constraints.B.T - prob.constraints.c
        mags = np.zeros(len(ys))
        for i, sense in enumerate(prob.constraints.senses):
            col = res[:, i]
            m = np.maximum(col, 0.0) if sense == Sense.LE else np.abs(col)
            mags = np.maximum(mags, m)
        top = float(np.max(mags))
        if top > 0:
            worst.append(top)
    if not worst:
        return 1.0
    return 10.0 * lipschitz_G / min(worst)


def check_grid_interior_feasibility(
    prob: MinimaxProblem, grid_x: GridSpec, grid_y: GridSpec, slack: float
) -> bool:
    """Every grid x must admit a grid y with at least ``slack`` of room.

    EQ rows are exempt (they have no interior); the check guards the duality
    comparison, which needs a strictly feasible inner point.
    """
    xs = _grid_points(grid_x, prob.set_X.project)
    ys = _grid_points(grid_y, prob.set_Y.project)
    le_rows = [i for i, s in enumerate(prob.constraints.senses) if s == Sense.LE]
    for x in xs:
        res = x @ prob.constraints.A.T + ys @ prob.constraints.B.T - prob.constraints.c
        ok = np.ones(len(ys), dtype=bool)
        for i in le_rows:
            ok &= res[:, i] <= -slack
        if not np.any(ok):
            return False
    return True


def scsc_diagnostic_constants(
    L: float,
    mu_x: float,
    mu_y: float,
    alpha: float,
    beta: float,
    norm_A: float,
    norm_B: float,
) -> tuple[float, float]:
    """Constants (b1, b2) for the doubly strongly convex regime.

    b1 converts the composite residual norm into a bound on the stationarity
    of the induced multiplier map; b2 bounds the distance from (x, y) to the
    saddle point of the Lagrangian at a fixed multiplier.  Both collapse as
    expected when the coupling matrices vanish: b1 = 1 and b2 depends only on
    the inner conditioning.
    """
    if min(L, mu_x, mu_y, alpha, beta) <= 0:
        raise ValueError("constants require positive L, mu_x, mu_y, alpha, beta")
    eta_y = (2.0 * beta + mu_y) * (beta + L) / (mu_y * beta)
    L_phi = L + L**2 / mu_y
    eta_x = (2.0 * beta + mu_x) * (beta + L_phi) / (mu_x * beta)
    cross = eta_y * eta_x * L / (alpha * beta) + eta_x / alpha
    b1 = 1.0 + eta_y * norm_B / beta + (norm_A + norm_B * L / mu_y) * cross
    b2 = math.sqrt(cross**2 + (eta_y / beta + (L / mu_y) * cross) ** 2)
    return b1, b2
