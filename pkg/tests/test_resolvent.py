import math

import numpy as np
import pytest

from sphereflow import (
    CgSettings,
    Field,
    SolverError,
    ValidationError,
    apply_A,
    apply_phi_of_A,
    eigenvector,
    l2_norm,
    make_domain,
    operator_norm_estimate,
    resolvent_solve,
    yosida,
    zero_field,
)
from sphereflow.verify import random_low_pass

from oracles import dense_laplacian

TIGHT = CgSettings(rel_tol=1e-12)


def test_resolvent_on_eigenvector(box63):
    e1 = eigenvector(box63, 1)
    x = resolvent_solve(box63, 1.0, e1, TIGHT)
    expect = (1.0 / (1.0 + box63.lambda1h)) * e1
    assert l2_norm(box63, x - expect) <= 1e-9


def test_resolvent_zero_rhs(box63):
    x = resolvent_solve(box63, 1.0, zero_field(box63))
    assert l2_norm(box63, x) == 0.0


def test_resolvent_norm_bound(box63, spec63):
    f = random_low_pass(spec63, np.random.default_rng(0), rough=True)
    x = resolvent_solve(box63, 1000.0, f, TIGHT)
    assert l2_norm(box63, x) <= l2_norm(box63, f) / 1000.0


def test_resolvent_matches_dense_solve():
    dom = make_domain(1, [1.3], [24])
    A = dense_laplacian(dom)
    rng = np.random.default_rng(1)
    for mu in (0.5, 3.0):
        b = rng.standard_normal(dom.node_count)
        x = resolvent_solve(dom, mu, Field(b, dom), TIGHT)
        expect = np.linalg.solve(mu * np.eye(dom.node_count) + A, b)
        assert np.max(np.abs(x.values - expect)) <= 1e-9


def test_resolvent_residual_contract(box63, spec63):
    f = random_low_pass(spec63, np.random.default_rng(2), rough=True)
    settings = CgSettings(rel_tol=1e-11)
    x = resolvent_solve(box63, 0.3, f, settings)
    res = 0.3 * x + apply_A(box63, x) - f
    assert l2_norm(box63, res) <= 1e-11 * l2_norm(box63, f)


def test_resolvent_nonconvergence_reports_residual(box63, spec63):
    f = random_low_pass(spec63, np.random.default_rng(3), rough=True)
    with pytest.raises(SolverError, match="residual"):
        resolvent_solve(box63, 1.0, f, CgSettings(rel_tol=1e-12, max_iter=2))
    with pytest.raises(ValidationError):
        resolvent_solve(box63, 0.0, f)


def test_yosida_on_eigenvector(box63):
    e1 = eigenvector(box63, 1)
    j = yosida(box63, 1.0, e1, TIGHT)
    expect = (1.0 / (1.0 + box63.lambda1h)) * e1
    assert l2_norm(box63, j - expect) <= 1e-9
    assert l2_norm(box63, yosida(box63, 1.0, zero_field(box63))) == 0.0


def test_yosida_large_mu_close_to_identity(box63):
    e1 = eigenvector(box63, 1)
    j = yosida(box63, 1e6, e1, TIGHT)
    assert l2_norm(box63, j - e1) <= box63.lambda1h / 1e6
    assert l2_norm(box63, j) <= l2_norm(box63, e1) + 1e-12


def test_norm_estimate_identity(box63):
    est = operator_norm_estimate(lambda v: v, box63, iterations=10, seed=0)
    assert est.value == pytest.approx(1.0, abs=1e-12)
    assert est.converged


def test_norm_estimate_resolvent(box63):
    est = operator_norm_estimate(
        lambda v: resolvent_solve(box63, 4.0, v, TIGHT), box63, iterations=5000, seed=1
    )
    expect = 1.0 / (4.0 + box63.lambda1h)
    assert est.converged
    assert est.value == pytest.approx(expect, abs=1e-10)
    assert est.value < 0.25


def test_norm_estimate_complement_below_one():
    tiny = make_domain(1, [1.0], [2])
    mu = 4.0
    est = operator_norm_estimate(
        lambda v: v - yosida(tiny, mu, v, TIGHT), tiny, iterations=5000, seed=2
    )
    lam_max = 27.0
    assert est.value <= 1.0
    assert est.value == pytest.approx(lam_max / (mu + lam_max), abs=1e-8)


@pytest.mark.parametrize("mu", [0.1, 1.0, 10.0, 100.0])
def test_resolvent_bounds_spectral(box63, spec63, mu):
    lam = spec63.eigenvalues
    assert np.max(1.0 / (mu + lam)) <= 1.0 / mu
    assert np.max(lam / (mu + lam)) <= 1.0
    assert np.max(np.sqrt(lam) / (mu + lam)) <= 0.5 / math.sqrt(mu) + 1e-15


def test_sqrt_resolvent_bound_via_phi(box63, spec63):
    mu = 2.0
    f = random_low_pass(spec63, np.random.default_rng(4), rough=True)
    x = resolvent_solve(box63, mu, f, TIGHT)
    half = apply_phi_of_A(spec63, np.sqrt, x)
    assert l2_norm(box63, half) <= (0.5 / math.sqrt(mu)) * l2_norm(box63, f) + 1e-10


def test_yosida_strong_convergence(box63, spec63):
    u = random_low_pass(spec63, np.random.default_rng(5))
    au = apply_A(box63, u)
    au_norm = l2_norm(box63, au)
    dists = []
    for mu in (1.0, 10.0, 100.0, 1000.0):
        j = yosida(box63, mu, u, TIGHT)
        assert l2_norm(box63, j - u) <= au_norm / mu
        dists.append(l2_norm(box63, apply_A(box63, j) - au))
    assert all(a >= b for a, b in zip(dists, dists[1:]))
    assert dists[-1] < dists[0]


def test_yosida_commutes_with_A(box63, spec63):
    u = random_low_pass(spec63, np.random.default_rng(6))
    au = apply_A(box63, u)
    mu = 5.0
    lhs = apply_A(box63, yosida(box63, mu, u, TIGHT))
    rhs = yosida(box63, mu, au, TIGHT)
    assert l2_norm(box63, lhs - rhs) <= 1e-9 * l2_norm(box63, au)
