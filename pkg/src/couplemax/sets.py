"""Convex sets with Euclidean projections.

Every set exposes ``project``, a membership test, a bound on the norm of its
elements, and a ``kind`` tag.  Sets without a closed-form projection are
handled by ``DykstraIntersection``, which alternates member projections with
correction terms until the cycle displacement falls below tolerance.

All sets are immutable after construction, so instances can be shared freely
across threads.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

Array = np.ndarray


class Sense(str, enum.Enum):
    """Row sense of a coupled constraint: inequality (<=) or equality."""

    LE = "LE"
    EQ = "EQ"


def _as1d(v) -> Array:
    a = np.asarray(v, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1)
    if a.ndim != 1:
        raise ValueError(f"expected a vector, got shape {a.shape}")
    return a


class ConvexSet:
    """Base class; subclasses fill in projection, membership and bounds."""

    kind: str = "Abstract"
    dim: int = 0
    radius_bound: float = np.inf

    def project(self, v) -> Array:
        raise NotImplementedError

    def contains(self, v, tol: float = 1e-9) -> bool:
        raise NotImplementedError

    def _check_dim(self, v: Array) -> Array:
        if v.size != self.dim:
            raise ValueError(f"{self.kind}: expected dim {self.dim}, got {v.size}")
        return v


class FullSpace(ConvexSet):
    kind = "FullSpace"

    def __init__(self, dim: int):
        self.dim = int(dim)

    def project(self, v) -> Array:
        return self._check_dim(_as1d(v)).copy()

    def contains(self, v, tol: float = 1e-9) -> bool:
        self._check_dim(_as1d(v))
        return True


class NonnegOrthant(ConvexSet):
    kind = "NonnegOrthant"

    def __init__(self, dim: int):
        self.dim = int(dim)

    def project(self, v) -> Array:
        return np.maximum(self._check_dim(_as1d(v)), 0.0)

    def contains(self, v, tol: float = 1e-9) -> bool:
        return bool(np.all(self._check_dim(_as1d(v)) >= -tol))


class Ball(ConvexSet):
    """Euclidean ball of given center and radius."""

    kind = "Ball"

    def __init__(self, center, radius: float):
        self.center = _as1d(center)
        self.center.setflags(write=False)
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        self.radius = float(radius)
        self.dim = self.center.size
        self.radius_bound = float(np.linalg.norm(self.center)) + self.radius

    def project(self, v) -> Array:
        v = self._check_dim(_as1d(v))
        d = v - self.center
        nd = np.linalg.norm(d)
        if nd <= self.radius:
            return v.copy()
        return self.center + d * (self.radius / nd)

    def contains(self, v, tol: float = 1e-9) -> bool:
        v = self._check_dim(_as1d(v))
        return bool(np.linalg.norm(v - self.center) <= self.radius + tol)


class Box(ConvexSet):
    """Axis-aligned box; infinite bounds give half-open directions."""

    kind = "Box"

    def __init__(self, lo, hi):
        self.lo = _as1d(lo)
        self.hi = _as1d(hi)
        if self.lo.size != self.hi.size:
            raise ValueError("box bounds disagree in dimension")
        if np.any(self.lo > self.hi):
            raise ValueError("box has lo > hi")
        self.lo.setflags(write=False)
        self.hi.setflags(write=False)
        self.dim = self.lo.size
        corner = np.maximum(np.abs(self.lo), np.abs(self.hi))
        self.radius_bound = float(np.linalg.norm(corner)) if np.all(np.isfinite(corner)) else np.inf

    def project(self, v) -> Array:
        return np.clip(self._check_dim(_as1d(v)), self.lo, self.hi)

    def contains(self, v, tol: float = 1e-9) -> bool:
        v = self._check_dim(_as1d(v))
        return bool(np.all(v >= self.lo - tol) and np.all(v <= self.hi + tol))


class Simplex(ConvexSet):
    """Scaled standard simplex {z >= 0, sum(z) = total}."""

    kind = "Simplex"

    def __init__(self, dim: int, total: float = 1.0):
        if total < 0:
            raise ValueError("simplex total must be nonnegative")
        self.dim = int(dim)
        self.total = float(total)
        self.radius_bound = self.total

    def project(self, v) -> Array:
        v = self._check_dim(_as1d(v))
        u = np.sort(v)[::-1]
        css = np.cumsum(u) - self.total
        ks = np.arange(1, v.size + 1)
        mask = u - css / ks > 0
        k = ks[mask][-1] if np.any(mask) else 1
        tau = css[k - 1] / k
        return np.maximum(v - tau, 0.0)

    def contains(self, v, tol: float = 1e-9) -> bool:
        v = self._check_dim(_as1d(v))
        return bool(np.all(v >= -tol) and abs(float(np.sum(v)) - self.total) <= tol)


class Halfspace(ConvexSet):
    """{v : <a, v> <= b} for a nonzero normal a."""

    kind = "Halfspace"

    def __init__(self, normal, offset: float):
        self.normal = _as1d(normal)
        self.normal.setflags(write=False)
        self.offset = float(offset)
        self.dim = self.normal.size
        self._nsq = float(self.normal @ self.normal)
        if self._nsq == 0.0:
            raise ValueError("halfspace normal must be nonzero")

    def project(self, v) -> Array:
        v = self._check_dim(_as1d(v))
        excess = float(self.normal @ v) - self.offset
        if excess <= 0:
            return v.copy()
        return v - (excess / self._nsq) * self.normal

    def contains(self, v, tol: float = 1e-9) -> bool:
        v = self._check_dim(_as1d(v))
        return bool(float(self.normal @ v) <= self.offset + tol)


class AffineSubspace(ConvexSet):
    """{v : M v = d}, projected through the pseudoinverse of M.

    Rank-deficient systems fall back to the least-squares solution and set
    ``rank_deficient`` so callers can tell the constraint rows were redundant
    or inconsistent.
    """

    kind = "AffineSubspace"

    def __init__(self, M, d):
        M = np.asarray(M, dtype=float)
        if M.ndim == 1:
            M = M.reshape(1, -1)
        self.M = M
        self.d = _as1d(d)
        if self.M.shape[0] != self.d.size:
            raise ValueError("affine rows disagree with rhs length")
        self.M.setflags(write=False)
        self.d.setflags(write=False)
        self.dim = self.M.shape[1]
        self._pinv = np.linalg.pinv(self.M)
        self.rank_deficient = np.linalg.matrix_rank(self.M) < self.M.shape[0]

    def project(self, v) -> Array:
        v = self._check_dim(_as1d(v))
        return v - self._pinv @ (self.M @ v - self.d)

    def contains(self, v, tol: float = 1e-9) -> bool:
        v = self._check_dim(_as1d(v))
        return bool(np.max(np.abs(self.M @ v - self.d), initial=0.0) <= tol)


class ProductSet(ConvexSet):
    """Cartesian product of member sets, projected blockwise."""

    kind = "ProductSet"

    def __init__(self, members):
        self.members = tuple(members)
        if not self.members:
            raise ValueError("product of zero sets")
        self.dim = sum(s.dim for s in self.members)
        bounds = [s.radius_bound for s in self.members]
        self.radius_bound = (
            float(np.sqrt(sum(b * b for b in bounds))) if all(np.isfinite(bounds)) else np.inf
        )
        self._slices = []
        start = 0
        for s in self.members:
            self._slices.append(slice(start, start + s.dim))
            start += s.dim

    def project(self, v) -> Array:
        v = self._check_dim(_as1d(v))
        out = np.empty_like(v)
        for s, sl in zip(self.members, self._slices):
            out[sl] = s.project(v[sl])
        return out

    def contains(self, v, tol: float = 1e-9) -> bool:
        v = self._check_dim(_as1d(v))
        return all(s.contains(v[sl], tol) for s, sl in zip(self.members, self._slices))


class MultiplierCone(ConvexSet):
    """Feasible multipliers: per-row product of half-lines (LE) and lines (EQ)."""

    kind = "ProductSet"

    def __init__(self, senses):
        self.senses = tuple(Sense(s) for s in senses)
        self.dim = len(self.senses)
        self._le = np.array([s == Sense.LE for s in self.senses], dtype=bool)

    def project(self, v) -> Array:
        v = self._check_dim(_as1d(v))
        out = v.copy()
        out[self._le] = np.maximum(out[self._le], 0.0)
        return out

    def contains(self, v, tol: float = 1e-9) -> bool:
        v = self._check_dim(_as1d(v))
        return bool(np.all(v[self._le] >= -tol))


@dataclass(frozen=True)
class DykstraInfo:
    converged: bool
    cycles: int
    displacement: float


class DykstraIntersection(ConvexSet):
    """Intersection of member sets via Dykstra's alternating projections.

    Unlike plain alternating projections, Dykstra's correction terms make the
    limit the exact Euclidean projection onto the intersection.  The visible
    iterate can idle for whole cycles while the corrections still move, so
    the stopping rule charges both: a cycle counts as converged only when the
    iterate displacement and every correction change are below ``tol``.
    """

    kind = "DykstraIntersection"

    def __init__(self, members, tol: float = 1e-10, max_iter: int = 10000):
        self.members = tuple(members)
        if len(self.members) < 2:
            raise ValueError("intersection needs at least two sets")
        dims = {s.dim for s in self.members}
        if len(dims) != 1:
            raise ValueError("intersection members disagree in dimension")
        self.dim = dims.pop()
        self.tol = float(tol)
        self.max_iter = int(max_iter)
        self.radius_bound = min(s.radius_bound for s in self.members)

    def project_full(self, v) -> tuple[Array, DykstraInfo]:
        x = self._check_dim(_as1d(v)).copy()
        incr = [np.zeros_like(x) for _ in self.members]
        disp = np.inf
        for cycle in range(1, self.max_iter + 1):
            x_prev = x
            drift = 0.0
            for i, s in enumerate(self.members):
                shifted = x + incr[i]
                x = s.project(shifted)
                moved = shifted - x
                drift += float(np.sum((moved - incr[i]) ** 2))
                incr[i] = moved
            disp = math.sqrt(float(np.sum((x - x_prev) ** 2)) + drift)
            if disp <= self.tol:
                return x, DykstraInfo(True, cycle, disp)
        return x, DykstraInfo(False, self.max_iter, disp)

    def project(self, v) -> Array:
        return self.project_full(v)[0]

    def contains(self, v, tol: float = 1e-9) -> bool:
        v = self._check_dim(_as1d(v))
        return all(s.contains(v, tol) for s in self.members)


def project_ball(v, center, radius: float) -> Array:
    return Ball(center, radius).project(v)


def project_box(v, lo, hi) -> Array:
    v = _as1d(v)
    lo = _as1d(np.broadcast_to(lo, v.shape))
    hi = _as1d(np.broadcast_to(hi, v.shape))
    if np.any(lo > hi):
        raise ValueError("box has lo > hi")
    return np.clip(v, lo, hi)


def project_simplex(v, total: float = 1.0) -> Array:
    v = _as1d(v)
    return Simplex(v.size, total).project(v)


def project_affine(v, M, d) -> Array:
    """Least-squares projection onto {z : M z = d}."""
    return AffineSubspace(M, d).project(v)


def project_multiplier_cone(v, senses) -> Array:
    return MultiplierCone(senses).project(v)


def project_dykstra(v, members, tol: float = 1e-10, max_iter: int = 10000):
    """Project onto an intersection; returns (point, DykstraInfo)."""
    return DykstraIntersection(members, tol=tol, max_iter=max_iter).project_full(v)
