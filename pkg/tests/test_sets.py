"""Projection operators: closed forms, metric properties, oracle agreement."""

import numpy as np
import pytest

from couplemax import (
    AffineSubspace,
    Ball,
    Box,
    DykstraIntersection,
    FullSpace,
    Halfspace,
    MultiplierCone,
    NonnegOrthant,
    ProductSet,
    Sense,
    Simplex,
    project_affine,
    project_ball,
    project_box,
    project_dykstra,
    project_multiplier_cone,
    project_simplex,
)

from oracles import qp_box_affine


def _catalog():
    rng = np.random.default_rng(7)
    M = rng.normal(size=(2, 5))
    z0 = rng.normal(size=5)
    box = Box(np.zeros(2), np.ones(2))
    affine = AffineSubspace(np.ones((1, 2)), [1.0])
    return [
        FullSpace(3),
        NonnegOrthant(4),
        Ball(np.array([1.0, -2.0]), 1.5),
        Box(np.array([-1.0, 0.0, 2.0]), np.array([1.0, 0.5, 3.0])),
        Simplex(4),
        Simplex(3, total=2.5),
        Halfspace(np.array([1.0, 2.0]), 3.0),
        AffineSubspace(M, M @ z0),
        ProductSet([Box(np.zeros(1), np.ones(1)), Ball(np.zeros(2), 2.0)]),
        MultiplierCone((Sense.LE, Sense.EQ, Sense.LE)),
        DykstraIntersection([box, affine]),
    ]


@pytest.mark.parametrize("set_", _catalog(), ids=lambda s: s.kind + str(s.dim))
def test_projection_idempotent(set_):
    rng = np.random.default_rng(11)
    for _ in range(50):
        v = rng.normal(scale=3.0, size=set_.dim)
        p = set_.project(v)
        again = set_.project(p)
        assert np.linalg.norm(again - p) <= 1e-10
        assert set_.contains(p, tol=1e-8)


@pytest.mark.parametrize("set_", _catalog(), ids=lambda s: s.kind + str(s.dim))
def test_projection_nonexpansive(set_):
    rng = np.random.default_rng(13)
    for _ in range(200):
        v = rng.normal(scale=4.0, size=set_.dim)
        w = rng.normal(scale=4.0, size=set_.dim)
        pv, pw = set_.project(v), set_.project(w)
        assert np.linalg.norm(pv - pw) <= np.linalg.norm(v - w) + 1e-10


@pytest.mark.parametrize("set_", _catalog(), ids=lambda s: s.kind + str(s.dim))
def test_projection_beats_random_feasible_probes(set_):
    # any feasible probe must be at least as far from v as the projection
    rng = np.random.default_rng(17)
    probes = [set_.project(rng.normal(scale=5.0, size=set_.dim)) for _ in range(1000)]
    for _ in range(20):
        v = rng.normal(scale=3.0, size=set_.dim)
        p = set_.project(v)
        dist = np.linalg.norm(v - p)
        for z in probes:
            assert dist <= np.linalg.norm(v - z) + 1e-10


def test_ball_example():
    assert np.allclose(project_ball([3.0, 4.0], [0.0, 0.0], 2.0), [1.2, 1.6],
                       rtol=0, atol=1e-14)
    inside = project_ball([0.3, -0.1], [0.0, 0.0], 2.0)
    assert np.allclose(inside, [0.3, -0.1], rtol=0, atol=0)


def test_ball_degenerate_radius():
    assert np.allclose(project_ball([5.0, 1.0], [2.0, 1.0], 0.0), [2.0, 1.0])


def test_box_clamps_each_coordinate():
    got = project_box([-0.5, 0.25, 2.0], [0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
    assert np.allclose(got, [0.0, 0.25, 1.0], rtol=0, atol=0)


def test_box_rejects_inverted_bounds():
    with pytest.raises(ValueError, match="lo > hi"):
        project_box([0.0, 0.0], [0.0, 1.0], [1.0, 0.5])
    with pytest.raises(ValueError, match="lo > hi"):
        Box([0.0, 1.0], [1.0, 0.5])


def test_simplex_membership_and_total():
    rng = np.random.default_rng(3)
    for total in (1.0, 2.5):
        for _ in range(100):
            v = rng.normal(scale=3.0, size=6)
            p = project_simplex(v, total)
            assert abs(p.sum() - total) <= 1e-10
            assert np.all(p >= -1e-12)


def test_simplex_large_shift_stable():
    p = project_simplex(np.array([1e12, 1e12 + 1.0]), 1.0)
    assert abs(p.sum() - 1.0) <= 1e-9
    assert p[1] > p[0]


def test_multiplier_cone_example():
    got = project_multiplier_cone([-1.0, -1.0], (Sense.LE, Sense.EQ))
    assert np.allclose(got, [0.0, -1.0], rtol=0, atol=0)
    unchanged = project_multiplier_cone([2.0, 3.0], (Sense.LE, Sense.LE))
    assert np.allclose(unchanged, [2.0, 3.0], rtol=0, atol=0)


def test_affine_example_and_residual():
    got = project_affine([2.0, 2.0], np.array([[1.0, 1.0]]), [1.0])
    assert np.allclose(got, [0.5, 0.5], rtol=0, atol=1e-12)
    rng = np.random.default_rng(5)
    M = rng.normal(size=(3, 5))
    d = rng.normal(size=3)
    v = rng.normal(size=5)
    p = project_affine(v, M, d)
    assert np.linalg.norm(M @ p - d) <= 1e-10
    # normal-equations oracle: v - M^T (M M^T)^{-1} (M v - d)
    want = v - M.T @ np.linalg.solve(M @ M.T, M @ v - d)
    assert np.linalg.norm(p - want) <= 1e-10


def test_affine_on_subspace_fixed():
    rng = np.random.default_rng(6)
    M = rng.normal(size=(2, 4))
    z0 = rng.normal(size=4)
    sub = AffineSubspace(M, M @ z0)
    assert np.linalg.norm(sub.project(z0) - z0) <= 1e-10


def test_affine_rank_deficient_flagged():
    M = np.array([[1.0, 1.0], [2.0, 2.0]])  # second row repeats the first
    sub = AffineSubspace(M, [1.0, 2.0])
    assert sub.rank_deficient
    p = sub.project([3.0, -1.0])
    assert np.linalg.norm(M @ p - np.array([1.0, 2.0])) <= 1e-10
    full = AffineSubspace(np.array([[1.0, 0.0], [0.0, 1.0]]), [0.3, 0.4])
    assert not full.rank_deficient


def test_dykstra_example_and_membership():
    box = Box(np.zeros(2), np.ones(2))
    affine = AffineSubspace(np.ones((1, 2)), [1.0])
    point, info = project_dykstra([2.0, 2.0], [box, affine])
    assert info.converged
    assert np.allclose(point, [0.5, 0.5], rtol=0, atol=1e-9)
    assert box.contains(point, tol=1e-9)
    assert affine.contains(point, tol=1e-9)


def test_dykstra_interior_point_fixed():
    box = Box(np.zeros(2), np.ones(2))
    affine = AffineSubspace(np.ones((1, 2)), [1.0])
    v = np.array([0.5, 0.5])
    point, info = project_dykstra(v, [box, affine])
    assert info.converged
    assert np.linalg.norm(point - v) <= 1e-9


def test_dykstra_starved_sets_flag():
    box = Box(np.zeros(3), np.ones(3))
    affine = AffineSubspace(np.array([[1.0, 2.0, -1.0]]), [0.7])
    _, info = project_dykstra([4.0, -3.0, 2.0], [box, affine], max_iter=2)
    assert not info.converged


def _random_box_affine(rng, dim):
    lo = rng.uniform(-1.0, 0.0, dim)
    hi = lo + rng.uniform(0.5, 2.0, dim)
    p = rng.integers(1, min(dim, 3) + 1)
    M = rng.normal(size=(p, dim))
    interior = lo + (hi - lo) * rng.uniform(0.2, 0.8, dim)
    d = M @ interior
    return lo, hi, M, d


def test_dykstra_matches_face_enumeration_qp():
    # 50 random instances; the brute oracle enumerates active bound patterns
    rng = np.random.default_rng(2024)
    dims = [int(rng.integers(2, 7)) for _ in range(46)] + [8, 8, 10, 12]
    for trial, dim in enumerate(dims):
        lo, hi, M, d = _random_box_affine(rng, dim)
        v = rng.normal(scale=2.0, size=dim)
        point, info = project_dykstra(
            v, [Box(lo, hi), AffineSubspace(M, d)], tol=1e-12, max_iter=200000
        )
        assert info.converged, f"instance {trial} did not converge"
        want = qp_box_affine(v, lo, hi, M, d)
        assert np.linalg.norm(point - want) <= 1e-6, (
            f"instance {trial} (dim {dim}): |dykstra - qp| = "
            f"{np.linalg.norm(point - want):.3e}"
        )


def test_dykstra_membership_at_ten_tol():
    rng = np.random.default_rng(99)
    for _ in range(20):
        lo, hi, M, d = _random_box_affine(rng, 5)
        box, affine = Box(lo, hi), AffineSubspace(M, d)
        v = rng.normal(scale=3.0, size=5)
        point, info = project_dykstra(v, [box, affine], tol=1e-10)
        assert info.converged
        assert box.contains(point, tol=1e-9)
        assert affine.contains(point, tol=1e-9)


def test_product_set_splits_blocks():
    ps = ProductSet([Box(np.zeros(1), np.ones(1)), Ball(np.zeros(2), 1.0)])
    got = ps.project(np.array([2.0, 3.0, 4.0]))
    assert np.allclose(got[:1], [1.0])
    assert np.allclose(got[1:], np.array([3.0, 4.0]) / 5.0)


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        Ball(np.zeros(2), 1.0).project(np.zeros(3))
    with pytest.raises(ValueError):
        FullSpace(2).project(np.zeros(5))
