"""Unit-sphere constrained dissipative flow on rectangular Dirichlet boxes."""

__version__ = "0.1.0"

from .domain import (
    DomainSpec,
    Field,
    Spectrum,
    apply_A,
    apply_phi_of_A,
    compute_spectrum,
    eigenvector,
    h1_seminorm_sq,
    inner,
    l2_norm,
    lp_norm_p,
    make_domain,
    make_field,
    restrict,
    stencil_eigenvalue,
    zero_field,
)
from .errors import (
    DomainMismatchError,
    InsufficientDataError,
    SnapshotFormatError,
    SolverError,
    SpectrumCapError,
    ValidationError,
)
from .flow import DiagnosticsRecord, FlowConfig, RunResult, rhs, run_flow
from .functionals import (
    CutoffParams,
    constrained_gradient,
    constraint_value,
    cutoff_g,
    cutoff_params,
    energy,
    modified_operator,
    monotonicity_constant,
    multiplier,
    nonlinearity,
    tangent_project,
)
from .resolvent import CgSettings, operator_norm_estimate, resolvent_solve, yosida
from .stationary import (
    LojasiewiczFit,
    StationaryResult,
    detect_omega_limit,
    fit_lojasiewicz,
    solve_ground_state,
    stationarity_residual,
)

__all__ = [name for name in dir() if not name.startswith("_")]
