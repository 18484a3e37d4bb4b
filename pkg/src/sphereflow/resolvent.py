"""Matrix-free resolvent solves, the Yosida smoother, and operator-norm estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .domain import DomainSpec, Field, _apply_A_raw, inner, l2_norm
from .errors import SolverError, ValidationError


@dataclass(frozen=True)
class CgSettings:
    """Conjugate-direction solve controls.

    ``max_iter`` defaults to 10x the node count at solve time.
    """

    rel_tol: float = 1e-10
    max_iter: int | None = None

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValidationError("rel_tol must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValidationError("max_iter must be at least 1")


def resolvent_solve(
    domain: DomainSpec,
    mu: float,
    rhs: Field,
    settings: CgSettings | None = None,
    x0: Field | None = None,
) -> Field:
    """Solve (mu I + A) x = rhs by conjugate directions on the SPD operator.

    Returns x with ||(mu I + A)x - rhs|| <= rel_tol * ||rhs||; raises
    SolverError with the residual if the iteration cap is hit.  ``x0`` is an
    optional warm start (the zero field otherwise).
    """
    if not mu > 0:
        raise ValidationError(f"mu must be positive, got {mu}")
    settings = settings or CgSettings()
    b = rhs.values
    bnorm = math.sqrt(float(np.dot(b, b)))
    if bnorm == 0.0:
        return Field(np.zeros_like(b), domain)
    max_iter = settings.max_iter if settings.max_iter is not None else 10 * domain.node_count
    target = settings.rel_tol * bnorm

    def apply(v: np.ndarray) -> np.ndarray:
        return mu * v + _apply_A_raw(domain, v)

    x = x0.values.copy() if x0 is not None else np.zeros_like(b)
    r = b - apply(x)
    d = r.copy()
    rs = float(np.dot(r, r))
    k = 0
    while math.sqrt(rs) > target:
        if k >= max_iter:
            raise SolverError(
                f"conjugate-direction solve did not converge: relative residual "
                f"{math.sqrt(rs) / bnorm:.3e} after {k} iterations"
            )
        q = apply(d)
        dq = float(np.dot(d, q))
        if not math.isfinite(dq) or dq <= 0.0:
            raise SolverError("conjugate-direction solve broke down (non-SPD or non-finite data)")
        alpha = rs / dq
        x += alpha * d
        r -= alpha * q
        k += 1
        if k % 50 == 0:
            r = b - apply(x)  # periodic refresh against recurrence drift
        rs_new = float(np.dot(r, r))
        d = r + (rs_new / rs) * d
        rs = rs_new
    return Field(x, domain)


def yosida(
    domain: DomainSpec,
    mu: float,
    u: Field,
    settings: CgSettings | None = None,
    x0: Field | None = None,
) -> Field:
    """Yosida smoother J_mu u = mu (mu I + A)^(-1) u; a contraction on L2."""
    return mu * resolvent_solve(domain, mu, u, settings, x0=x0)


@dataclass(frozen=True)
class NormEstimate:
    value: float
    iterations: int
    converged: bool


def operator_norm_estimate(
    op: Callable[[Field], Field],
    domain: DomainSpec,
    iterations: int = 5000,
    seed: int = 0,
) -> NormEstimate:
    """Power-iteration spectral-norm estimate for a symmetric operator.

    The Rayleigh quotient never exceeds the true norm, so the estimate is a
    guaranteed lower bound.  Converged when successive Rayleigh quotients
    differ by <= 1e-10 relative; otherwise the best value is returned with
    ``converged=False``.
    """
    rng = np.random.default_rng(seed)
    v = Field(rng.standard_normal(domain.node_count), domain)
    nrm = l2_norm(domain, v)
    if nrm == 0.0:
        raise SolverError("degenerate start vector")
    v = v / nrm
    prev = None
    rq = 0.0
    for k in range(1, iterations + 1):
        w = op(v)
        rq = inner(domain, v, w)
        wn = l2_norm(domain, w)
        if wn < 1e-300:
            return NormEstimate(0.0, k, True)
        v = w / wn
        if prev is not None and abs(rq - prev) <= 1e-10 * max(abs(rq), 1e-300):
            return NormEstimate(abs(rq), k, True)
        prev = rq
    return NormEstimate(abs(rq), iterations, False)
