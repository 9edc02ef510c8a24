import math

import numpy as np
import pytest

from logz import OptimizationError, ValidationError
from logz.datasets import RegressionDataset, radiata
from logz.models import build_model
from logz.potential import (
    KernelSpec,
    PotentialSpec,
    center_at_mode,
    gaussian_potential,
    linear_regression_potential,
    logcosh_potential,
    logistic_regression_potential,
    potential_from_kernel,
    pseudo_huber_potential,
)

BUILTIN_SPECS = [
    {"name": "gaussian", "dim": 10},
    {"name": "logcosh", "dim": 3},
    {"name": "pseudo_huber", "dim": 2},
    {"name": "radiata", "variant": "M1"},
    {"name": "radiata", "variant": "M2"},
    {"name": "pima", "variant": "M1"},
    {"name": "pima", "variant": "M2"},
]


def test_gaussian_diag_constants():
    p = gaussian_potential(np.diag([2.0] + [1.0] * 9))
    assert (p.m, p.L, p.hessian_lipschitz) == (1.0, 2.0, 0.0)


def test_gaussian_identity_1d():
    p = gaussian_potential(np.eye(1))
    assert p.m == p.L == 1.0 and p.is_gaussian
    assert p.energy(np.array([3.0])) == pytest.approx(4.5)
    np.testing.assert_allclose(p.gradient(np.array([3.0])), [3.0])


def test_gaussian_direct_evaluation():
    p = gaussian_potential(np.diag([4.0, 1.0]))
    x = np.array([1.0, 1.0])
    assert p.energy(x) == pytest.approx(2.5)
    np.testing.assert_allclose(p.gradient(x), [4.0, 1.0])


@pytest.mark.parametrize("Q", [np.array([[1.0, 0.0], [0.0, -1.0]]), np.array([[1.0, 2.0], [0.0, 1.0]])])
def test_gaussian_rejects_bad_precision(Q):
    with pytest.raises(ValidationError):
        gaussian_potential(Q)


def test_center_quadratic_with_offset():
    Q = np.array([[3.0, 1.0], [1.0, 2.0]])
    c = np.array([1.5, -2.0])
    kern = KernelSpec("quadratic", np.zeros(2), matrix=Q, vector=Q @ c)
    raw = potential_from_kernel(kern, *np.linalg.eigvalsh(Q), constant=7.0 + 0.5 * c @ Q @ c)
    cen = center_at_mode(raw)
    np.testing.assert_allclose(cen.shift, c, atol=1e-10)
    assert cen.energy(np.zeros(2)) == pytest.approx(0.0, abs=1e-12)
    assert cen.gradient_norm_at_origin() <= 1e-8
    assert cen.log_z_offset == pytest.approx(-7.0)
    # the compiled-kernel description follows the shift
    np.testing.assert_allclose(cen.kernel.gradient(np.zeros(2)), 0.0, atol=1e-10)


def test_center_already_centered_is_identity():
    p = logcosh_potential(2)
    assert center_at_mode(p) is p


def test_center_idempotent():
    p = build_model({"name": "pima", "variant": "M1"}).potential
    again = center_at_mode(p)
    assert p.gradient_norm_at_origin() <= 1e-8
    assert again.gradient_norm_at_origin() <= 1e-8


def test_center_failure_reports_best_iterate():
    raw = logistic_regression_potential(
        RegressionDataset(np.array([1.0, 0.0]), np.array([[1.0, 2.0], [2.0, 1.0]])), 0.01)
    with pytest.raises(OptimizationError) as exc:
        center_at_mode(
            PotentialSpec(dim=2, energy=raw.energy, gradient=raw.gradient, m=raw.m, L=raw.L),
            x0=np.array([50.0, -50.0]), max_iter=1)
    assert exc.value.best_x.shape == (2,) and exc.value.grad_norm > 1e-8


def test_radiata_mode_is_posterior_mean():
    data = radiata("M1")
    lam = 1e-5
    P0 = lam * np.diag([0.06, 6.0])
    mu0 = np.array([3000.0, 185.0])
    p = linear_regression_potential(data, mu0, P0, lam)
    X, y = data.covariates, data.responses
    # normal equations solved directly
    theta = np.linalg.solve(lam * X.T @ X + P0, lam * X.T @ y + P0 @ mu0)
    np.testing.assert_allclose(p.shift, theta, rtol=1e-9)
    assert p.dim == 2 and p.m > 0 and p.hessian_lipschitz == 0.0


def test_radiata_constants_match_eigensolver():
    data = radiata("M2")
    lam = 1e-5
    P0 = lam * np.diag([0.06, 6.0])
    p = linear_regression_potential(data, [3000.0, 185.0], P0, lam)
    H = lam * data.covariates.T @ data.covariates + P0
    ev = np.linalg.eigh(H)[0]
    assert p.m == pytest.approx(ev[0], rel=1e-12) and p.L == pytest.approx(ev[-1], rel=1e-12)


def test_linear_isotropic_case():
    X = np.array([[1.0], [0.0]])
    data = RegressionDataset(np.array([0.3, 0.0]), X)
    p = linear_regression_potential(data, [0.0], np.zeros((1, 1)), 2.0)
    assert p.m == p.L == 2.0


def test_linear_singular_design():
    data = RegressionDataset(np.array([1.0, 2.0]), np.array([[1.0, 1.0], [2.0, 2.0]]))
    with pytest.raises(ValidationError):
        linear_regression_potential(data, [0.0, 0.0], np.zeros((2, 2)), 1.0)


def test_pima_m1_shape():
    p = build_model({"name": "pima", "variant": "M1"}).potential
    assert p.dim == 5 and p.m == 0.01
    X = build_model({"name": "pima"}).potential.kernel.matrix
    assert p.L == pytest.approx(np.linalg.eigvalsh(X.T @ X)[-1] / 4 + 0.01)


def test_logistic_empty_data_is_prior():
    data = RegressionDataset(np.zeros(0), np.zeros((0, 3)))
    p = logistic_regression_potential(data, 1.0)
    assert p.m == p.L == 1.0


def test_logistic_rejects_non_binary():
    data = RegressionDataset(np.array([0.0, 2.0]), np.eye(2))
    with pytest.raises(ValidationError):
        logistic_regression_potential(data, 1.0)


@pytest.mark.parametrize("spec", BUILTIN_SPECS, ids=lambda s: f"{s['name']}-{s.get('variant', s.get('dim'))}")
def test_finite_differences(spec):
    p = build_model(spec).potential
    rng = np.random.default_rng(11)
    h = 1e-5
    scale = 1.0 / math.sqrt(p.L)
    for _ in range(20):
        x = rng.standard_normal(p.dim) * scale
        g = p.gradient(x)
        fd = np.array([(p.energy(x + h * scale * e) - p.energy(x - h * scale * e)) / (2 * h * scale)
                       for e in np.eye(p.dim)])
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-5 * np.abs(g).max() + 1e-9)


@pytest.mark.parametrize("spec", BUILTIN_SPECS, ids=lambda s: f"{s['name']}-{s.get('variant', s.get('dim'))}")
def test_spot_check_builtins(spec):
    p = build_model(spec).potential
    p.spot_check(n_pairs=100, radius=10.0)
    p.check_centered(tol=1e-6 * max(1.0, p.L))


def test_spot_check_catches_wrong_constant():
    p = gaussian_potential(np.diag([2.0, 1.0]))
    import dataclasses

    with pytest.raises(ValidationError):
        dataclasses.replace(p, L=1.5).spot_check()
    with pytest.raises(ValidationError):
        dataclasses.replace(p, m=1.5).spot_check()


def test_pseudo_huber_growth_and_curvature():
    p = pseudo_huber_potential(3, alpha=2.0)
    assert p.m == 0.0 and p.L == 2.0 and p.growth == (2.0, 2.0)
    x = np.array([[3.0, 4.0, 0.0]])
    assert p.energy(x)[0] == pytest.approx(2.0 * (math.sqrt(26.0) - 1.0))


def test_kernel_hessian_matches_gradient_differences():
    for spec in BUILTIN_SPECS:
        p = build_model(spec).potential
        if p.hessian is None:
            continue
        x = np.full(p.dim, 0.1)
        h = 1e-6
        H = np.array([(p.gradient(x + h * e) - p.gradient(x - h * e)) / (2 * h) for e in np.eye(p.dim)])
        np.testing.assert_allclose(p.hessian(x), H, rtol=1e-5, atol=1e-7 * p.L)
