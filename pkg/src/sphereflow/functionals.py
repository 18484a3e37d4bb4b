"""Energy, damping nonlinearity, the nonlocal multiplier, and the cut-off operator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import DomainSpec, Field, apply_A, h1_seminorm_sq, inner, l2_norm, lp_norm_p
from .errors import ValidationError


@dataclass(frozen=True)
class CutoffParams:
    """Cut-off level K, damping exponent p, and the Poincare constant used in C(K).

    ``lambda1`` may be the discrete or the continuum constant; the discrete
    one keeps the monotonicity shift self-consistent on the grid.
    """

    K: float
    p: float
    lambda1: float

    def __post_init__(self):
        if not self.K > 0:
            raise ValidationError(f"cut-off level K must be positive, got {self.K}")
        if self.p < 2:
            raise ValidationError(f"p >= 2 required, got {self.p}")
        if not self.lambda1 > 0:
            raise ValidationError("lambda1 must be positive")


def cutoff_params(domain: DomainSpec, K: float, p: float, continuum: bool = False) -> CutoffParams:
    """CutoffParams with lambda1 taken from the domain (discrete by default)."""
    return CutoffParams(K, p, domain.lambda1 if continuum else domain.lambda1h)


def nonlinearity(u: Field, p: float) -> Field:
    """Pointwise damping term |u|^(p-2) u; the identity for p = 2."""
    if p < 2:
        raise ValidationError(f"p >= 2 required, got {p}")
    if p == 2:
        return u
    v = u.values
    return Field(np.abs(v) ** (p - 2) * v, u.domain)


def energy(domain: DomainSpec, u: Field, p: float) -> float:
    """E(u) = 1/2 ||grad u||^2 + (1/p) ||u||_p^p."""
    return 0.5 * h1_seminorm_sq(domain, u) + lp_norm_p(domain, u, p) / p


def multiplier(domain: DomainSpec, u: Field, p: float) -> float:
    """Nonlocal multiplier lambda(u) = ||grad u||^2 + ||u||_p^p."""
    return h1_seminorm_sq(domain, u) + lp_norm_p(domain, u, p)


def tangent_project(domain: DomainSpec, u: Field, w: Field) -> Field:
    """Orthogonal projection of w onto the tangent space of the unit sphere at u."""
    nrm = l2_norm(domain, u)
    if abs(nrm - 1.0) > 1e-8:
        raise ValidationError(f"u must be on the unit sphere, |norm-1| = {abs(nrm - 1.0):.3e}")
    return w - inner(domain, w, u) * u


def constrained_gradient(domain: DomainSpec, u: Field, p: float) -> Field:
    """Sphere-constrained energy gradient A u + |u|^(p-2)u - lambda(u) u.

    Uses the closed form with the multiplier, which agrees with the generic
    tangent projection only on the unit sphere, hence the norm precondition.
    """
    nrm = l2_norm(domain, u)
    if abs(nrm - 1.0) > 1e-6:
        raise ValidationError(f"u must be on the unit sphere, |norm-1| = {abs(nrm - 1.0):.3e}")
    lam = multiplier(domain, u, p)
    return apply_A(domain, u) + nonlinearity(u, p) - lam * u


def cutoff_g(domain: DomainSpec, u: Field, params: CutoffParams) -> Field:
    """Cut-off multiplier term: S*u while S = lambda(u) <= K, else (K^2/S)*u.

    The over-threshold branch caps the strength of the nonlocal term at
    level K, which is what makes the modified operator monotone after a
    shift by C(K).
    """
    S = multiplier(domain, u, params.p)
    if S <= params.K:
        return S * u
    return (params.K * params.K / S) * u


def modified_operator(domain: DomainSpec, u: Field, params: CutoffParams) -> Field:
    """A u + |u|^(p-2) u - g_K(u): the cut-off drift whose negative drives the flow."""
    return apply_A(domain, u) + nonlinearity(u, params.p) - cutoff_g(domain, u, params)


def monotonicity_constant(params: CutoffParams) -> float:
    """Shift C(K) = [1 + (2 + p^2 2^(2p-3)) K / lambda1] K; always exceeds K."""
    e = 2.0 * params.p - 3.0
    if e > 1020:
        raise ValidationError(f"p = {params.p} overflows the 2^(2p-3) factor")
    c = (1.0 + (2.0 + params.p**2 * 2.0**e) * params.K / params.lambda1) * params.K
    if not math.isfinite(c):
        raise ValidationError("monotonicity constant overflowed")
    return c


def constraint_value(domain: DomainSpec, u: Field) -> float:
    """Constraint functional (||u||^2 - 1)/2; zero exactly on the unit sphere."""
    return 0.5 * (inner(domain, u, u) - 1.0)
