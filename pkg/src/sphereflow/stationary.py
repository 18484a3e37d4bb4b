"""Stationary states, omega-limit detection, and decay-rate / exponent fitting."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .domain import DomainSpec, Field, Spectrum, l2_norm
from .errors import InsufficientDataError, SolverError
from .flow import TERM_FAILURE, TERM_RESIDUAL, DiagnosticsRecord, FlowConfig, run_flow
from .functionals import constrained_gradient, energy, multiplier

PHASE_FLOOR = 1e-12
PHASE_CEIL = 1e-2
THETA_GRID = tuple(round(0.5 - 0.05 * i, 2) for i in range(10))  # 0.50 ... 0.05
RATIO_BOUND = 100.0


@dataclass(frozen=True)
class StationaryResult:
    field: Field
    multiplier: float
    residual: float
    energy: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class LojasiewiczFit:
    """Decay-rate fit and gradient-dominance exponent estimate on a tail window.

    ``rate`` is the least-squares exponential rate of E(t) - E_inf;
    ``theta`` is the largest grid value in (0, 1/2] for which the ratio
    ||grad_M E|| / (E - E_inf)^(1-theta) stays within a factor of 100 over
    the window, and C is its maximum there.  ``sigma`` is the largest
    distance to the limit state seen among snapshots in the window (when
    those are supplied).
    """

    theta: float | None
    C: float | None
    rate: float
    window: tuple[float, float]
    n_points: int
    r_squared: float
    E_inf: float
    sigma: float | None = None


@dataclass(frozen=True)
class OmegaLimitReport:
    n_clusters: int
    representatives: list[tuple[float, Field]]
    labels: list[int]
    tail_single_cluster: bool
    energies: list[float]
    energy_constant: bool


def stationarity_residual(domain: DomainSpec, u: Field, p: float) -> float:
    """Norm of the constrained gradient; zero exactly at stationary states."""
    return l2_norm(domain, constrained_gradient(domain, u, p))


def solve_ground_state(domain: DomainSpec, u0: Field, config: FlowConfig, tol: float,
                       spectrum: Spectrum | None = None) -> StationaryResult:
    """Drive the constrained flow until the stationarity residual drops below tol.

    Renormalization is forced on (the stationary problem lives on the
    sphere).  If the horizon is reached first the best state is returned
    with ``converged=False``.
    """
    cfg = replace(config, stop_residual=tol, renormalize=True)
    result = run_flow(domain, u0, cfg, spectrum=spectrum)
    if result.termination == TERM_FAILURE:
        raise SolverError(f"flow failed while searching for a stationary state: {result.message}")
    v = result.final
    return StationaryResult(
        field=v,
        multiplier=multiplier(domain, v, config.p),
        residual=stationarity_residual(domain, v, config.p),
        energy=energy(domain, v, config.p),
        iterations=result.steps_taken,
        converged=result.termination == TERM_RESIDUAL,
    )


def detect_omega_limit(snapshots: list[tuple[float, Field]], p: float,
                       tol: float = 1e-6, energy_tol: float = 1e-8) -> OmegaLimitReport:
    """Cluster snapshots by pairwise L2 distance and inspect the tail.

    Reports whether the trailing quarter of the snapshots collapses to a
    single cluster (an empirical single-point omega limit) and whether the
    energy is constant across the clusters represented in that tail.
    """
    if len(snapshots) < 2:
        raise InsufficientDataError("need at least 2 snapshots")
    domain = snapshots[0][1].domain
    reps: list[tuple[float, Field]] = []
    labels: list[int] = []
    for t, f in snapshots:
        for i, (_, r) in enumerate(reps):
            if l2_norm(domain, f - r) <= tol:
                labels.append(i)
                break
        else:
            reps.append((t, f))
            labels.append(len(reps) - 1)
    tail = labels[-max(2, len(labels) // 4):]
    energies = [energy(domain, r, p) for _, r in reps]
    tail_energies = [energies[i] for i in sorted(set(tail))]
    spread = max(tail_energies) - min(tail_energies) if len(tail_energies) > 1 else 0.0
    return OmegaLimitReport(
        n_clusters=len(reps),
        representatives=reps,
        labels=labels,
        tail_single_cluster=len(set(tail)) == 1,
        energies=energies,
        energy_constant=spread <= energy_tol,
    )


def _fit_window(series: list[DiagnosticsRecord], E_inf: float) -> list[DiagnosticsRecord]:
    eligible = [PHASE_FLOOR <= rec.energy - E_inf <= PHASE_CEIL for rec in series]
    end = None
    for i in range(len(series) - 1, -1, -1):
        if eligible[i]:
            end = i
            break
    if end is None:
        raise InsufficientDataError("no samples with E - E_inf inside the fit band")
    start = end
    while start > 0 and eligible[start - 1]:
        start -= 1
    return series[start:end + 1]


def fit_lojasiewicz(series: list[DiagnosticsRecord], E_inf: float,
                    u_inf: Field | None = None,
                    snapshots: list[tuple[float, Field]] | None = None) -> LojasiewiczFit:
    """Fit the energy decay rate and estimate the gradient-dominance exponent.

    The window is the last contiguous span of samples with E - E_inf in
    [1e-12, 1e-2].  The exponent is scanned on a coarse descending grid
    with a bounded-ratio criterion, which is robust to noise near machine
    precision; nonlinear regression is deliberately avoided.
    """
    window = _fit_window(series, E_inf)
    if len(window) < 5:
        raise InsufficientDataError(
            f"fit window has only {len(window)} samples; flow not converging yet?"
        )
    t = np.array([rec.t for rec in window])
    gap = np.array([rec.energy - E_inf for rec in window])
    res = np.array([rec.stat_residual for rec in window])
    logs = np.log(gap)
    slope, intercept = np.polyfit(t, logs, 1)
    fitted = slope * t + intercept
    ss_res = float(np.sum((logs - fitted) ** 2))
    ss_tot = float(np.sum((logs - np.mean(logs)) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0

    theta = None
    C = None
    if np.all(res > 0):
        for cand in THETA_GRID:
            rho = res / gap ** (1.0 - cand)
            if float(np.max(rho)) / float(np.min(rho)) <= RATIO_BOUND:
                theta = cand
                C = float(np.max(rho))
                break

    sigma = None
    if u_inf is not None and snapshots is not None:
        t0, t1 = float(t[0]), float(t[-1])
        dists = [
            l2_norm(u_inf.domain, f - u_inf)
            for ts, f in snapshots
            if t0 <= ts <= t1
        ]
        if dists:
            sigma = max(dists)

    return LojasiewiczFit(
        theta=theta,
        C=C,
        rate=-float(slope),
        window=(float(t[0]), float(t[-1])),
        n_points=len(window),
        r_squared=r_squared,
        E_inf=E_inf,
        sigma=sigma,
    )
