"""Time integration of the sphere-constrained flow and its cut-off / smoothed variants.

The plain flow is du/dt = -A u - |u|^(p-2) u + lambda(u) u with
lambda(u) = ||grad u||^2 + ||u||_p^p, which is the negative constrained
energy gradient on the unit L2 sphere.  The cut-off variant replaces the
multiplier term by g_K(u); the smoothed variant filters the damping term
through J_mu and starts from J_mu u0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import (
    DomainSpec,
    Field,
    Spectrum,
    apply_A,
    apply_phi_of_A,
    compute_spectrum,
    h1_seminorm_sq,
    inner,
    l2_norm,
    lp_norm_p,
)
from .errors import SolverError, SpectrumCapError, ValidationError
from .functionals import CutoffParams, cutoff_g, multiplier, nonlinearity
from .resolvent import CgSettings, resolvent_solve, yosida

INTEGRATORS = ("projected_euler", "imex", "backward_euler", "etd")

TERM_HORIZON = "horizon"
TERM_RESIDUAL = "residual_stop"
TERM_FAILURE = "solver_failure"


@dataclass(frozen=True)
class FlowConfig:
    """Everything a run needs besides the grid and the initial state.

    ``renormalize`` rescales to unit norm after every step (sphere
    retraction); the continuum flow preserves the norm exactly, the
    discretization does not.  ``cutoff`` switches to the cut-off flow,
    ``yosida_mu`` to the smoothed one.  ``solver_tol`` is the relative
    tolerance of the inner linear solves of the implicit steppers.
    """

    p: float
    dt: float
    T: float
    integrator: str = "imex"
    renormalize: bool = True
    cutoff: CutoffParams | None = None
    yosida_mu: float | None = None
    sample_every: int = 1
    stop_residual: float | None = None
    fixed_point_tol: float = 1e-10
    fixed_point_cap: int = 100
    seed: int = 0
    solver_tol: float = 1e-12
    store_fields: bool = False
    frac_powers: tuple[float, float] | None = None

    def __post_init__(self):
        if self.p < 2:
            raise ValidationError(f"p >= 2 required, got {self.p}")
        if not self.dt > 0:
            raise ValidationError("dt must be positive")
        if not self.dt < self.T:
            raise ValidationError(f"dt = {self.dt} must be below the horizon T = {self.T}")
        if self.integrator not in INTEGRATORS:
            raise ValidationError(f"unknown integrator {self.integrator!r}")
        if self.sample_every < 1:
            raise ValidationError("sample_every must be >= 1")
        if self.stop_residual is not None and not self.stop_residual > 0:
            raise ValidationError("stop_residual must be positive")
        if self.yosida_mu is not None and not self.yosida_mu > 0:
            raise ValidationError("yosida_mu must be positive")
        if self.cutoff is not None and self.cutoff.p != self.p:
            raise ValidationError("cutoff params carry a different p than the flow")


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Per-sample scalars; ``energy_eq_residual`` is |E(t) + dissipation - E(0)|."""

    t: float
    l2_norm: float
    energy: float
    grad_sq: float
    lp_p: float
    multiplier: float
    stat_residual: float
    cum_dissipation: float
    energy_eq_residual: float
    frac_alpha: float | None = None
    frac_beta: float | None = None


@dataclass
class RunResult:
    final: Field
    series: list[DiagnosticsRecord]
    termination: str
    snapshots: list[tuple[float, Field]]
    steps_taken: int
    message: str | None = None
    sampled_fields: list[tuple[float, Field]] | None = None


def _smooth(domain, u, mu, spectrum, settings):
    if spectrum is not None:
        return apply_phi_of_A(spectrum, lambda lam: mu / (mu + lam), u)
    return yosida(domain, mu, u, settings)


def _nonlinear_drive(domain, u, config, spectrum=None, settings=None) -> Field:
    """Explicit part F(u) with rhs(u) = -A u + F(u)."""
    if config.cutoff is not None:
        return cutoff_g(domain, u, config.cutoff) - nonlinearity(u, config.p)
    damping = nonlinearity(u, config.p)
    if config.yosida_mu is not None:
        damping = _smooth(domain, damping, config.yosida_mu, spectrum, settings)
    return multiplier(domain, u, config.p) * u - damping


def rhs(domain: DomainSpec, u: Field, config: FlowConfig, spectrum: Spectrum | None = None,
        settings: CgSettings | None = None) -> Field:
    """Right-hand side of the selected flow variant at state u."""
    return _nonlinear_drive(domain, u, config, spectrum, settings) - apply_A(domain, u)


def _renormalized(domain, v, config):
    if not config.renormalize:
        return v
    nrm = l2_norm(domain, v)
    if nrm < 1e-12:
        raise SolverError("norm collapse: step drove the field to (numerical) zero")
    return v / nrm


def step_projected_euler(domain: DomainSpec, u: Field, config: FlowConfig,
                         spectrum: Spectrum | None = None,
                         settings: CgSettings | None = None) -> Field:
    """Explicit Euler step, optionally retracted back to the sphere."""
    v = u + config.dt * rhs(domain, u, config, spectrum, settings)
    if l2_norm(domain, v) < 1e-12:
        raise SolverError("norm collapse: step size too large or blow-up")
    return _renormalized(domain, v, config)


def _implicit_solve(domain, u, drive, config, settings, x0):
    # (I + dt A) x = u + dt*drive, solved as ((1/dt) I + A) x = (1/dt)(u + dt*drive)
    mu = 1.0 / config.dt
    w = mu * (u + config.dt * drive)
    return resolvent_solve(domain, mu, w, settings, x0=x0)


def step_imex(domain: DomainSpec, u: Field, config: FlowConfig,
              settings: CgSettings | None = None,
              spectrum: Spectrum | None = None) -> Field:
    """Semi-implicit step: stiff linear part implicit, multiplier and damping lagged.

    Unconditionally stable in the linear part; the inner solve is warm
    started from the current state.
    """
    settings = settings or CgSettings(rel_tol=config.solver_tol)
    drive = _nonlinear_drive(domain, u, config, spectrum, settings)
    v = _implicit_solve(domain, u, drive, config, settings, x0=u)
    return _renormalized(domain, v, config)


def step_backward_euler(domain: DomainSpec, u: Field, config: FlowConfig,
                        settings: CgSettings | None = None,
                        spectrum: Spectrum | None = None) -> Field:
    """Fully implicit step via fixed-point iteration on the nonlinear drive.

    Each inner pass keeps the linear solve symmetric positive definite by
    evaluating the drive at the previous iterate.
    """
    settings = settings or CgSettings(rel_tol=config.solver_tol)
    cur = u
    for _ in range(config.fixed_point_cap):
        drive = _nonlinear_drive(domain, cur, config, spectrum, settings)
        nxt = _implicit_solve(domain, u, drive, config, settings, x0=cur)
        delta = l2_norm(domain, nxt - cur)
        cur = nxt
        if delta <= config.fixed_point_tol:
            return _renormalized(domain, cur, config)
    raise SolverError(
        f"backward Euler fixed point hit the cap of {config.fixed_point_cap} "
        f"iterations, last update {delta:.3e}"
    )


def step_etd(spectrum: Spectrum, u: Field, config: FlowConfig,
             settings: CgSettings | None = None) -> Field:
    """Variation-of-constants step in the eigenbasis.

    u+ = exp(-A dt) u + A^(-1)(I - exp(-A dt)) F(u); exact whenever the
    nonlinear drive F is constant over the step.
    """
    domain = spectrum.domain
    dt = config.dt
    lam = spectrum.eigenvalues
    drive = _nonlinear_drive(domain, u, config, spectrum, settings)
    decay = np.exp(-lam * dt)
    phi1 = -np.expm1(-lam * dt) / lam
    c = decay * spectrum.to_coeffs(u) + phi1 * spectrum.to_coeffs(drive)
    return _renormalized(domain, spectrum.from_coeffs(c), config)


def _diag_residual(domain, u, p):
    """Norm of the tangent-projected gradient, valid for any nonzero norm."""
    w = apply_A(domain, u) + nonlinearity(u, p)
    uu = inner(domain, u, u)
    if uu < 1e-30:
        return l2_norm(domain, w)
    return l2_norm(domain, w - (inner(domain, w, u) / uu) * u)


def _frac_norm(spectrum, u, power):
    return l2_norm(spectrum.domain, apply_phi_of_A(spectrum, lambda lam: lam**power, u))


def run_flow(domain: DomainSpec, u0: Field, config: FlowConfig,
             spectrum: Spectrum | None = None) -> RunResult:
    """Integrate to the horizon (or a residual stop), sampling diagnostics.

    Snapshots are stored at times 1, 2, 4, 8, ... plus the final state.  A
    blow-up guard aborts with ``termination="solver_failure"`` when the
    energy grows more than tenfold between samples or any sample goes
    non-finite; the series collected so far is kept.
    """
    if config.cutoff is None:
        nrm0 = l2_norm(domain, u0)
        if abs(nrm0 - 1.0) > 1e-8:
            raise ValidationError(f"|‖u0‖ - 1| = {abs(nrm0 - 1.0):.3e} exceeds 1e-8")

    if spectrum is None and config.integrator == "etd":
        spectrum = compute_spectrum(domain)
    if spectrum is None and config.frac_powers is not None:
        try:
            spectrum = compute_spectrum(domain)
        except SpectrumCapError:
            spectrum = None  # fractional columns stay empty

    settings = CgSettings(rel_tol=config.solver_tol)
    nsteps = int(round(config.T / config.dt))
    if nsteps < 1:
        raise ValidationError("horizon shorter than one step")

    u = u0
    if config.yosida_mu is not None:
        u = _smooth(domain, u, config.yosida_mu, spectrum, settings)

    p = config.p
    e0 = 0.5 * h1_seminorm_sq(domain, u) + lp_norm_p(domain, u, p) / p
    cum = 0.0

    def sample(t, cur):
        g = h1_seminorm_sq(domain, cur)
        lpp = lp_norm_p(domain, cur, p)
        e = 0.5 * g + lpp / p
        fa = fb = None
        if config.frac_powers is not None and spectrum is not None:
            fa = _frac_norm(spectrum, cur, config.frac_powers[0])
            fb = _frac_norm(spectrum, cur, config.frac_powers[1])
        return DiagnosticsRecord(
            t=t,
            l2_norm=l2_norm(domain, cur),
            energy=e,
            grad_sq=g,
            lp_p=lpp,
            multiplier=g + lpp,
            stat_residual=_diag_residual(domain, cur, p),
            cum_dissipation=cum,
            energy_eq_residual=abs(e + cum - e0),
            frac_alpha=fa,
            frac_beta=fb,
        )

    steppers = {
        "projected_euler": lambda cur: step_projected_euler(domain, cur, config, spectrum, settings),
        "imex": lambda cur: step_imex(domain, cur, config, settings, spectrum),
        "backward_euler": lambda cur: step_backward_euler(domain, cur, config, settings, spectrum),
        "etd": lambda cur: step_etd(spectrum, cur, config, settings),
    }
    advance = steppers[config.integrator]

    snap_steps = {}
    s = 1.0
    while s <= config.T:
        snap_steps[int(round(s / config.dt))] = s
        s *= 2.0

    series = [sample(0.0, u)]
    snapshots: list[tuple[float, Field]] = []
    sampled_fields = [(0.0, u)] if config.store_fields else None
    termination = TERM_HORIZON
    message = None
    steps_done = 0

    if config.stop_residual is not None and series[0].stat_residual <= config.stop_residual:
        snapshots.append((0.0, u))
        return RunResult(u, series, TERM_RESIDUAL, snapshots, 0, None, sampled_fields)

    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, nsteps + 1):
            try:
                nxt = advance(u)
            except SolverError as exc:
                termination, message = TERM_FAILURE, str(exc)
                break
            cum += inner(domain, nxt - u, nxt - u) / config.dt
            u = nxt
            steps_done = n
            t = n * config.dt
            if n in snap_steps:
                snapshots.append((t, u))
            if n % config.sample_every == 0 or n == nsteps:
                rec = sample(t, u)
                if not all(
                    math.isfinite(x)
                    for x in (rec.l2_norm, rec.energy, rec.stat_residual)
                ):
                    termination, message = TERM_FAILURE, "non-finite diagnostics sample"
                    break
                prev = series[-1]
                series.append(rec)
                if config.store_fields:
                    sampled_fields.append((t, u))
                if rec.energy > 10.0 * prev.energy + 1e-30:
                    termination = TERM_FAILURE
                    message = (
                        f"energy blow-up guard: E jumped from {prev.energy:.6e} "
                        f"to {rec.energy:.6e} between samples"
                    )
                    break
                if config.stop_residual is not None and rec.stat_residual <= config.stop_residual:
                    termination = TERM_RESIDUAL
                    break

    if not snapshots or snapshots[-1][0] != steps_done * config.dt:
        snapshots.append((steps_done * config.dt, u))
    return RunResult(u, series, termination, snapshots, steps_done, message, sampled_fields)
