"""Problem container: Lagrangian values, gradients, declarations."""

import numpy as np
import pytest

from couplemax import (
    Ball,
    Box,
    CouplingConstraints,
    MinimaxProblem,
    Sense,
    SmoothFunction,
    ZeroFunction,
    estimate_lipschitz,
    lagrangian_grads,
    lagrangian_value,
    linear_y_coefficient,
    regularized_lagrangian_value,
)
from couplemax import experiments

from oracles import central_diff, rel_err


def _scalar_bilinear(c=4.0):
    f = SmoothFunction(
        value=lambda x, y: float(x[0] * y[0]),
        grad_x=lambda x, y: np.array([y[0]]),
        grad_y=lambda x, y: np.array([x[0]]),
        lipschitz_L=1.0,
        strong_concavity_mu=0.0,
    )
    return MinimaxProblem(
        f=f,
        h=ZeroFunction(),
        g=ZeroFunction(),
        constraints=CouplingConstraints(
            A=[[1.0]], B=[[1.0]], c=[c], senses=(Sense.LE,)
        ),
        set_X=Box([-5.0], [5.0]),
        set_Y=Box([-5.0], [5.0]),
        linear_in_y=True,
    )


def test_lagrangian_value_examples():
    prob = _scalar_bilinear()
    assert lagrangian_value(prob, [1.0], [1.0], [0.0]) == pytest.approx(1.0, abs=0)
    # multiplier relaxes the slack constraint: 1 - 1*(1+1-4) = 3
    assert lagrangian_value(prob, [1.0], [1.0], [1.0]) == pytest.approx(3.0, abs=0)
    for lam in (0.0, 0.7, 2.0):
        assert lagrangian_value(prob, [0.0], [0.0], [lam]) == pytest.approx(
            4.0 * lam, abs=1e-14
        )


def test_lagrangian_grads_example():
    prob = _scalar_bilinear()
    gx, gy, glam = lagrangian_grads(prob, [1.0], [1.0], [0.0])
    assert np.allclose(gx, [1.0], atol=0)
    assert np.allclose(gy, [1.0], atol=0)
    assert np.allclose(glam, [2.0], atol=0)  # -(1 + 1 - 4)


def test_lagrangian_affine_in_multiplier():
    prob = _scalar_bilinear()
    rng = np.random.default_rng(2)
    for _ in range(20):
        x, y = rng.normal(size=1), rng.normal(size=1)
        l1, l2 = rng.normal(size=1), rng.normal(size=1)
        t = float(rng.uniform())
        mixed = lagrangian_value(prob, x, y, (1 - t) * l1 + t * l2)
        split = (1 - t) * lagrangian_value(prob, x, y, l1) + t * lagrangian_value(
            prob, x, y, l2
        )
        assert abs(mixed - split) <= 1e-12 * max(1.0, abs(split))


def test_regularized_lagrangian():
    prob = _scalar_bilinear()
    rng = np.random.default_rng(3)
    for _ in range(10):
        x, y, lam = rng.normal(size=1), rng.normal(size=1), abs(rng.normal(size=1))
        plain = lagrangian_value(prob, x, y, lam)
        assert regularized_lagrangian_value(prob, x, y, lam, 0.0) == plain
        assert regularized_lagrangian_value(prob, x, [0.0], lam, 5.0) == \
            lagrangian_value(prob, x, [0.0], lam)
    got = regularized_lagrangian_value(prob, [0.0], [2.0], [0.0], 1.0)
    assert got == pytest.approx(-2.0, abs=1e-14)


@pytest.mark.parametrize("prob", [
    experiments.gen_bilinear(0),
    experiments.make_ncsc_quadratic(),
    experiments.make_random_ncsc(1),
    experiments.gen_flow_attack(5, 0.9, 10.0, 1.0, 2),
], ids=["bilinear", "ncsc_quad", "random_ncsc", "flow"])
def test_gradient_oracles_match_central_differences(prob):
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = prob.set_X.project(rng.normal(scale=0.5, size=prob.n))
        y = prob.set_Y.project(rng.normal(scale=0.5, size=prob.m))
        gx = prob.f.grad_x(x, y)
        gy = prob.f.grad_y(x, y)
        fdx = central_diff(lambda z: prob.f.value(z, y), x)
        fdy = central_diff(lambda z: prob.f.value(x, z), y)
        assert rel_err(gx, fdx) <= 1e-6
        assert rel_err(gy, fdy) <= 1e-6


def test_lagrangian_grads_match_central_differences():
    prob = experiments.make_ncsc_quadratic()
    rng = np.random.default_rng(7)
    for _ in range(10):
        x = rng.normal(scale=0.5, size=2)
        y = rng.normal(scale=0.5, size=2)
        lam = np.abs(rng.normal(size=1))
        gx, gy, glam = lagrangian_grads(prob, x, y, lam)
        assert rel_err(gx, central_diff(
            lambda z: lagrangian_value(prob, z, y, lam), x)) <= 1e-6
        assert rel_err(gy, central_diff(
            lambda z: lagrangian_value(prob, x, z, lam), y)) <= 1e-6
        assert rel_err(glam, central_diff(
            lambda z: lagrangian_value(prob, x, y, z), lam)) <= 1e-6


def test_strong_concavity_inequality_holds():
    prob = experiments.make_ncsc_quadratic()
    mu = prob.f.strong_concavity_mu
    rng = np.random.default_rng(11)
    for _ in range(50):
        x = rng.normal(size=2)
        y1, y2 = rng.normal(size=2), rng.normal(size=2)
        lhs = prob.f.value(x, y2)
        rhs = (
            prob.f.value(x, y1)
            + float(prob.f.grad_y(x, y1) @ (y2 - y1))
            - 0.5 * mu * float(np.sum((y2 - y1) ** 2))
        )
        assert lhs <= rhs + 1e-10


def test_linear_y_coefficient_bilinear():
    prob = _scalar_bilinear()
    for xv in (0.0, 1.0, -2.5):
        d = linear_y_coefficient(prob, [xv])
        assert np.allclose(d, [xv], atol=1e-12)


def test_linear_y_coefficient_congestion_form():
    # transport cost sum q (x + y) x, adversary in y: coefficient is q * x
    q = np.array([1.5, 2.0, 0.5])
    f = SmoothFunction(
        value=lambda x, y: float(np.sum(q * (x + y) * x)),
        grad_x=lambda x, y: 2.0 * q * x + q * y,
        grad_y=lambda x, y: q * x,
        lipschitz_L=2.0 * float(np.max(q)) + float(np.max(q)),
        strong_concavity_mu=0.0,
    )
    prob = MinimaxProblem(
        f=f,
        h=ZeroFunction(),
        g=ZeroFunction(),
        constraints=CouplingConstraints(
            A=np.eye(3), B=np.eye(3), c=np.full(3, 10.0),
            senses=(Sense.LE,) * 3,
        ),
        set_X=Box(np.zeros(3), np.full(3, 4.0)),
        set_Y=Box(np.zeros(3), np.full(3, 4.0)),
        linear_in_y=True,
    )
    x = np.array([1.0, 2.0, 3.0])
    assert np.allclose(linear_y_coefficient(prob, x), q * x, atol=1e-12)


def test_linear_y_declaration_mismatch_caught():
    f = SmoothFunction(
        value=lambda x, y: float(x[0] * y[0] ** 2),
        grad_x=lambda x, y: np.array([y[0] ** 2]),
        grad_y=lambda x, y: np.array([2.0 * x[0] * y[0]]),
        lipschitz_L=4.0,
        strong_concavity_mu=0.0,
    )
    prob = MinimaxProblem(
        f=f,
        h=ZeroFunction(),
        g=ZeroFunction(),
        constraints=CouplingConstraints(A=[[1.0]], B=[[1.0]], c=[4.0],
                                        senses=(Sense.LE,)),
        set_X=Box([-2.0], [2.0]),
        set_Y=Box([-2.0], [2.0]),
        linear_in_y=True,
    )
    with pytest.raises(ValueError, match="linear"):
        linear_y_coefficient(prob, [1.0])


def test_estimate_lipschitz_below_declared():
    for prob in (experiments.gen_bilinear(0), experiments.make_ncsc_quadratic(),
                 experiments.gen_flow_attack(5, 0.9, 10.0, 1.0, 2)):
        est = estimate_lipschitz(prob)
        assert 0.0 < est <= prob.f.lipschitz_L * (1.0 + 1e-9)


def test_constructor_rejects_bad_shapes():
    f = SmoothFunction(
        value=lambda x, y: 0.0,
        grad_x=lambda x, y: np.zeros(2),
        grad_y=lambda x, y: np.zeros(2),
        lipschitz_L=1.0,
    )
    with pytest.raises(ValueError):
        MinimaxProblem(
            f=f, h=ZeroFunction(), g=ZeroFunction(),
            constraints=CouplingConstraints(
                A=np.ones((1, 2)), B=np.ones((1, 3)), c=[1.0, 2.0],
                senses=(Sense.LE,),
            ),
            set_X=Ball(np.zeros(2), 1.0),
            set_Y=Ball(np.zeros(3), 1.0),
        )
    with pytest.raises(ValueError):
        CouplingConstraints(A=[[1.0]], B=[[1.0]], c=[1.0],
                            senses=(Sense.LE, Sense.LE))
    with pytest.raises(ValueError):
        SmoothFunction(
            value=lambda x, y: 0.0,
            grad_x=lambda x, y: x,
            grad_y=lambda x, y: y,
            lipschitz_L=0.0,
        )


def test_lagrangian_value_checks_dimensions():
    prob = _scalar_bilinear()
    with pytest.raises(ValueError):
        lagrangian_value(prob, [1.0, 2.0], [1.0], [0.0])
