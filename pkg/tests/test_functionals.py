import math

import numpy as np
import pytest

from sphereflow import (
    CutoffParams,
    Field,
    ValidationError,
    apply_A,
    constrained_gradient,
    constraint_value,
    cutoff_g,
    cutoff_params,
    eigenvector,
    energy,
    inner,
    l2_norm,
    lp_norm_p,
    make_domain,
    modified_operator,
    monotonicity_constant,
    multiplier,
    nonlinearity,
    stencil_eigenvalue,
    tangent_project,
    zero_field,
)
from sphereflow.verify import random_low_pass


def sampled_sine(dom):
    x = np.arange(1, dom.sizes[0] + 1) * dom.spacings[0]
    return Field(math.sqrt(2 / math.pi) * np.sin(x), dom)


@pytest.fixture(scope="module")
def pi255():
    return make_domain(1, [math.pi], [255])


def test_nonlinearity_pointwise(box63):
    u = zero_field(box63)
    assert nonlinearity(u, 2.0) is u
    vals = np.zeros(box63.node_count)
    vals[10] = -2.0
    f = Field(vals, box63)
    assert nonlinearity(f, 4.0).values[10] == pytest.approx(-8.0)
    assert nonlinearity(f, 3.0).values[10] == pytest.approx(-4.0)
    with pytest.raises(ValidationError):
        nonlinearity(f, 1.0)


def test_energy_sampled_sine(pi255):
    u = sampled_sine(pi255)
    h2 = pi255.spacings[0] ** 2
    assert energy(pi255, u, 2.0) == pytest.approx(1.0, abs=h2)
    assert energy(pi255, u, 4.0) == pytest.approx(0.5 + 3 / (8 * math.pi), abs=h2)
    assert energy(pi255, zero_field(pi255), 2.0) == 0.0


def test_multiplier_sampled_sine(pi255):
    u = sampled_sine(pi255)
    h2 = pi255.spacings[0] ** 2
    assert multiplier(pi255, u, 2.0) == pytest.approx(2.0, abs=h2)
    assert multiplier(pi255, u, 4.0) == pytest.approx(1.0 + 3 / (2 * math.pi), abs=h2)
    assert multiplier(pi255, zero_field(pi255), 2.0) == 0.0


def test_tangent_project(box63, spec63):
    u = eigenvector(box63, 1)
    v = eigenvector(box63, 3)
    assert l2_norm(box63, tangent_project(box63, u, u)) <= 1e-12
    assert l2_norm(box63, tangent_project(box63, u, v) - v) <= 1e-12
    assert l2_norm(box63, tangent_project(box63, u, u + v) - v) <= 1e-12
    w = random_low_pass(spec63, np.random.default_rng(0))
    out = tangent_project(box63, u, w)
    assert abs(inner(box63, out, u)) <= 1e-10 * l2_norm(box63, w)
    with pytest.raises(ValidationError):
        tangent_project(box63, 2.0 * u, w)


def test_constrained_gradient_stationary_mode(box63):
    e1 = eigenvector(box63, 1)
    assert l2_norm(box63, constrained_gradient(box63, e1, 2.0)) <= 1e-10


def test_constrained_gradient_mixture_oracle(box63):
    # u = (e1+e2)/sqrt(2), p = 2: gradient is (lam1-lam2)/(2 sqrt 2) * (e1 - e2)
    e1, e2 = eigenvector(box63, 1), eigenvector(box63, 2)
    u = (e1 + e2) / math.sqrt(2)
    lam1, lam2 = box63.lambda1h, stencil_eigenvalue(box63, 2)
    expect = ((lam1 - lam2) / (2 * math.sqrt(2))) * (e1 - e2)
    out = constrained_gradient(box63, u, 2.0)
    assert l2_norm(box63, out - expect) <= 1e-10
    assert abs(inner(box63, out, u)) <= 1e-10


def test_constrained_gradient_orthogonality(box63, spec63):
    rng = np.random.default_rng(1)
    u = random_low_pass(spec63, rng)
    u = u / l2_norm(box63, u)
    g = constrained_gradient(box63, u, 4.0)
    scale = l2_norm(box63, apply_A(box63, u)) + l2_norm(box63, nonlinearity(u, 4.0))
    assert abs(inner(box63, g, u)) <= 1e-8 * scale
    with pytest.raises(ValidationError):
        constrained_gradient(box63, 1.1 * u, 4.0)


def test_cutoff_branches(box63, spec63):
    u = random_low_pass(spec63, np.random.default_rng(2))
    params_hi = cutoff_params(box63, multiplier(box63, u, 4.0) + 3.0, 4.0)
    S = multiplier(box63, u, 4.0)
    assert np.array_equal(cutoff_g(box63, u, params_hi).values, (S * u).values)
    params_lo = cutoff_params(box63, S / 2.0, 4.0)
    expect = (params_lo.K**2 / S) * u
    assert l2_norm(box63, cutoff_g(box63, u, params_lo) - expect) <= 1e-12 * S
    # boundary S == K sits on the first branch
    params_eq = cutoff_params(box63, S, 4.0)
    assert np.array_equal(cutoff_g(box63, u, params_eq).values, (S * u).values)
    z = zero_field(box63)
    assert l2_norm(box63, cutoff_g(box63, z, params_lo)) == 0.0


def test_cutoff_agreement_below_level(box63, spec63):
    u = random_low_pass(spec63, np.random.default_rng(3))
    S = multiplier(box63, u, 2.0)
    params = cutoff_params(box63, 2.0 * S, 2.0)
    assert np.array_equal(cutoff_g(box63, u, params).values, (S * u).values)


def test_modified_operator(box63, spec63):
    e1 = eigenvector(box63, 1)
    params = cutoff_params(box63, 100.0, 2.0)
    assert l2_norm(box63, modified_operator(box63, e1, params)) <= 1e-10
    assert l2_norm(box63, modified_operator(box63, zero_field(box63), params)) == 0.0
    u = 3.0 * random_low_pass(spec63, np.random.default_rng(4))
    small = cutoff_params(box63, 1.0, 4.0)
    S = multiplier(box63, u, 4.0)
    assert S > small.K
    expect = apply_A(box63, u) + nonlinearity(u, 4.0) - (small.K**2 / S) * u
    assert l2_norm(box63, modified_operator(box63, u, small) - expect) <= 1e-10 * S


def test_monotonicity_constant_frozen_values():
    assert monotonicity_constant(CutoffParams(1.0, 2.0, 1.0)) == pytest.approx(11.0, rel=1e-15)
    assert monotonicity_constant(CutoffParams(2.0, 2.0, 1.0)) == pytest.approx(42.0, rel=1e-15)
    for K, p, lam in [(0.5, 3.0, 0.7), (7.0, 6.0, 2.0)]:
        assert monotonicity_constant(CutoffParams(K, p, lam)) > K
    with pytest.raises(ValidationError):
        monotonicity_constant(CutoffParams(1.0, 600.0, 1.0))


def test_constraint_value(box63):
    e1 = eigenvector(box63, 1)
    assert abs(constraint_value(box63, e1)) <= 1e-12
    assert constraint_value(box63, zero_field(box63)) == -0.5
    assert constraint_value(box63, 2.0 * e1) == pytest.approx(1.5, abs=1e-12)


@pytest.mark.parametrize("p", [2.0, 3.0, 4.0, 6.0])
def test_nonlinearity_monotone_inequality(box63, spec63, p):
    rng = np.random.default_rng(int(p))
    worst = math.inf
    for i in range(200):
        rough = i % 2 == 1
        u = random_low_pass(spec63, rng, rough=rough)
        v = random_low_pass(spec63, rng, rough=rough)
        d = u - v
        lhs = inner(box63, nonlinearity(u, p) - nonlinearity(v, p), d)
        au = np.abs(u.values) ** (p / 2 - 1) * d.values
        av = np.abs(v.values) ** (p / 2 - 1) * d.values
        rhs = 0.5 * box63.cell_volume * (float(au @ au) + float(av @ av))
        worst = min(worst, (lhs - rhs) / max(1.0, abs(lhs), rhs))
    assert worst >= -1e-9


def test_p2_monotonicity_identity(box63, spec63):
    # for p = 2 both sides collapse to ||u - v||^2
    rng = np.random.default_rng(11)
    u = random_low_pass(spec63, rng)
    v = random_low_pass(spec63, rng)
    d = u - v
    lhs = inner(box63, nonlinearity(u, 2.0) - nonlinearity(v, 2.0), d)
    assert lhs == pytest.approx(inner(box63, d, d), rel=1e-14)


def test_gradient_matches_retracted_finite_differences(box63, spec63):
    rng = np.random.default_rng(12)
    u = random_low_pass(spec63, rng)
    u = u / l2_norm(box63, u)
    v = tangent_project(box63, u, random_low_pass(spec63, rng))
    p = 4.0
    exact = inner(box63, constrained_gradient(box63, u, p), v)
    errs = []
    for eps in (1e-3, 5e-4, 2.5e-4):
        w = u + eps * v
        w = w / l2_norm(box63, w)
        errs.append(abs((energy(box63, w, p) - energy(box63, u, p)) / eps - exact))
    assert 1.6 <= errs[0] / errs[1] <= 2.4
    assert 1.6 <= errs[1] / errs[2] <= 2.4


def test_modified_monotonicity_with_shift(box63, spec63):
    params = cutoff_params(box63, 1.0, 2.0)
    gamma = monotonicity_constant(params)
    rng = np.random.default_rng(13)
    worst = math.inf
    for i in range(200):
        u = random_low_pass(spec63, rng, rough=i % 2 == 1)
        v = random_low_pass(spec63, rng, rough=i % 2 == 1)
        d = u - v
        dd = inner(box63, d, d)
        if dd < 1e-28:
            continue
        gap = inner(
            box63,
            modified_operator(box63, u, params) - modified_operator(box63, v, params),
            d,
        )
        worst = min(worst, (gap + gamma * dd) / dd)
    assert worst >= -1e-9


def test_cutoff_params_validation(box63):
    with pytest.raises(ValidationError):
        CutoffParams(0.0, 2.0, 1.0)
    with pytest.raises(ValidationError):
        CutoffParams(1.0, 1.5, 1.0)
    with pytest.raises(ValidationError):
        CutoffParams(1.0, 2.0, 0.0)
    assert cutoff_params(box63, 1.0, 2.0).lambda1 == box63.lambda1h
    assert cutoff_params(box63, 1.0, 2.0, continuum=True).lambda1 == box63.lambda1
