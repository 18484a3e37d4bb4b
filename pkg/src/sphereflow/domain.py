"""Rectangular Dirichlet boxes, grid fields, the discrete Laplacian, and its eigenbasis.

The box (0,L_1) x ... x (0,L_d) is discretized with n_i interior nodes per
axis and spacing h_i = L_i/(n_i+1).  Boundary values are identically zero
and never stored; every operator reads missing neighbors as 0.  The inner
product carries the quadrature weight prod(h_i), which makes the stencil
Laplacian self-adjoint in it and makes discrete summation by parts exact.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainMismatchError, SpectrumCapError, ValidationError

DEFAULT_SPECTRUM_CAP = 2**24
SPECTRUM_CAP_ENV = "SPHEREFLOW_SPECTRUM_CAP"


@dataclass(frozen=True)
class DomainSpec:
    """Geometry and grid of one box, plus its Poincare constants.

    ``lambda1`` is the continuum constant sum_i (pi/L_i)^2; ``lambda1h`` is
    the smallest eigenvalue of the discrete Laplacian (always below
    ``lambda1`` for the 3-point stencil).
    """

    dimension: int
    lengths: tuple[float, ...]
    sizes: tuple[int, ...]
    spacings: tuple[float, ...]
    lambda1: float
    lambda1h: float

    @property
    def node_count(self) -> int:
        return int(np.prod(self.sizes))

    @property
    def cell_volume(self) -> float:
        """Quadrature weight of one node in the rectangle rule."""
        return float(np.prod(self.spacings))


@dataclass(frozen=True, eq=False)
class Field:
    """Real grid function on the interior nodes, flat row-major storage.

    Treated as an immutable value: operations return new fields and never
    write through ``values``.
    """

    values: np.ndarray
    domain: DomainSpec

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if v.size != self.domain.node_count:
            raise ValidationError(
                f"field has {v.size} values, domain has {self.domain.node_count} nodes"
            )
        object.__setattr__(self, "values", v)

    def __add__(self, other: "Field") -> "Field":
        _check_conforming(self, other)
        return Field(self.values + other.values, self.domain)

    def __sub__(self, other: "Field") -> "Field":
        _check_conforming(self, other)
        return Field(self.values - other.values, self.domain)

    def __mul__(self, c: float) -> "Field":
        return Field(self.values * float(c), self.domain)

    __rmul__ = __mul__

    def __truediv__(self, c: float) -> "Field":
        return Field(self.values / float(c), self.domain)

    def __neg__(self) -> "Field":
        return Field(-self.values, self.domain)


def _check_conforming(f: Field, g: Field) -> None:
    if f.domain is not g.domain and f.domain != g.domain:
        raise DomainMismatchError("fields live on different domains")


def _check_field(domain: DomainSpec, f: Field) -> None:
    if f.domain is not domain and f.domain != domain:
        raise DomainMismatchError("field does not conform to the given domain")


def make_domain(d: int, lengths: Sequence[float], sizes: Sequence[int]) -> DomainSpec:
    """Build a box domain with d axes, side lengths and interior node counts.

    Populates both Poincare constants: the continuum one analytically and
    the discrete one from the closed-form stencil eigenvalue.
    """
    if not isinstance(d, int) or not 1 <= d <= 3:
        raise ValidationError(f"dimension must be 1, 2 or 3, got {d!r}")
    if len(lengths) != d or len(sizes) != d:
        raise ValidationError(
            f"expected {d} lengths and sizes, got {len(lengths)} and {len(sizes)}"
        )
    lengths_t = tuple(float(L) for L in lengths)
    sizes_t = tuple(int(n) for n in sizes)
    if any(not math.isfinite(L) or L <= 0 for L in lengths_t):
        raise ValidationError("all lengths must be positive and finite")
    if any(n < 2 for n in sizes_t):
        raise ValidationError("need at least 2 interior nodes per axis")
    spacings = tuple(L / (n + 1) for L, n in zip(lengths_t, sizes_t))
    lam1 = sum((math.pi / L) ** 2 for L in lengths_t)
    lam1h = sum(
        _axis_eigenvalue(h, n, 1) for h, n in zip(spacings, sizes_t)
    )
    return DomainSpec(d, lengths_t, sizes_t, spacings, lam1, lam1h)


def _axis_eigenvalue(h: float, n: int, k: int) -> float:
    # 1D 3-point stencil: lambda_k = (4/h^2) sin^2(k pi / (2(n+1))), k = 1..n
    return (4.0 / (h * h)) * math.sin(k * math.pi / (2 * (n + 1))) ** 2


def stencil_eigenvalue(domain: DomainSpec, ks: Sequence[int] | int) -> float:
    """Analytic eigenvalue of the discrete Laplacian for mode indices ks (1-based)."""
    ks_t = (ks,) if isinstance(ks, int) else tuple(ks)
    if len(ks_t) != domain.dimension:
        raise ValidationError("one mode index per axis required")
    for k, n in zip(ks_t, domain.sizes):
        if not 1 <= k <= n:
            raise ValidationError(f"mode index {k} outside 1..{n}")
    return sum(
        _axis_eigenvalue(h, n, k)
        for h, n, k in zip(domain.spacings, domain.sizes, ks_t)
    )


def eigenvector(domain: DomainSpec, ks: Sequence[int] | int) -> Field:
    """Discrete Laplacian eigenvector for mode indices ks, unit norm in inner().

    The 1D modes are sampled sines sqrt(2/L) sin(j k pi/(n+1)); products of
    them are exactly orthonormal in the weighted inner product.
    """
    ks_t = (ks,) if isinstance(ks, int) else tuple(ks)
    if len(ks_t) != domain.dimension:
        raise ValidationError("one mode index per axis required")
    axes = []
    for L, n, k in zip(domain.lengths, domain.sizes, ks_t):
        if not 1 <= k <= n:
            raise ValidationError(f"mode index {k} outside 1..{n}")
        j = np.arange(1, n + 1)
        axes.append(math.sqrt(2.0 / L) * np.sin(j * k * math.pi / (n + 1)))
    v = axes[0]
    for arr in axes[1:]:
        v = np.multiply.outer(v, arr)
    return Field(v.reshape(-1), domain)


def zero_field(domain: DomainSpec) -> Field:
    return Field(np.zeros(domain.node_count), domain)


def make_field(domain: DomainSpec, values) -> Field:
    """Validating constructor: checks size and that every entry is finite."""
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValidationError("field values must all be finite")
    return Field(v, domain)


def _apply_A_raw(domain: DomainSpec, flat: np.ndarray) -> np.ndarray:
    """Stencil Laplacian on a raw flat array (hot path, no Field wrapping)."""
    a = flat.reshape(domain.sizes)
    out = np.zeros_like(a)
    full = (slice(None),) * domain.dimension
    for ax, h in enumerate(domain.spacings):
        w = 1.0 / (h * h)
        out += (2.0 * w) * a

        def at(s):
            idx = list(full)
            idx[ax] = s
            return tuple(idx)

        out[at(slice(1, None))] -= w * a[at(slice(None, -1))]
        out[at(slice(None, -1))] -= w * a[at(slice(1, None))]
    return out.reshape(-1)


def apply_A(domain: DomainSpec, u: Field) -> Field:
    """Discrete negative Laplacian (positive sign convention, zero boundary)."""
    _check_field(domain, u)
    return Field(_apply_A_raw(domain, u.values), domain)


def inner(domain: DomainSpec, f: Field, g: Field) -> float:
    """Weighted L2 inner product (f,g) = prod(h_i) * sum f_j g_j."""
    _check_field(domain, f)
    _check_field(domain, g)
    return domain.cell_volume * float(np.dot(f.values, g.values))


def l2_norm(domain: DomainSpec, f: Field) -> float:
    return math.sqrt(max(inner(domain, f, f), 0.0))


def lp_norm_p(domain: DomainSpec, f: Field, p: float) -> float:
    """The p-th power of the L^p norm, prod(h_i) * sum |f_j|^p.  Requires p >= 2."""
    if p < 2:
        raise ValidationError(f"p >= 2 required, got {p}")
    _check_field(domain, f)
    if p == 2:
        return inner(domain, f, f)
    return domain.cell_volume * float(np.sum(np.abs(f.values) ** p))


def h1_seminorm_sq(domain: DomainSpec, f: Field) -> float:
    """Squared gradient norm, defined as (A f, f) so summation by parts is exact."""
    val = inner(domain, apply_A(domain, f), f)
    return val if val > 0.0 else 0.0


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Tensorized eigenpairs of the discrete Laplacian.

    ``axis_eigenvectors[i]`` has the h_i-orthonormal 1D modes as columns, so
    the nodal<->coefficient transforms below are mutually inverse.  Carries
    the functional calculus phi(A) for fractional powers, the heat
    semigroup, and resolvents.
    """

    domain: DomainSpec
    axis_eigenvalues: tuple[np.ndarray, ...]
    axis_eigenvectors: tuple[np.ndarray, ...]
    eigenvalues: np.ndarray  # combined tensor, shape == domain.sizes

    def to_coeffs(self, u: Field) -> np.ndarray:
        _check_field(self.domain, u)
        c = u.values.reshape(self.domain.sizes)
        for ax, (h, V) in enumerate(zip(self.domain.spacings, self.axis_eigenvectors)):
            c = np.moveaxis(np.tensordot(h * V.T, c, axes=(1, ax)), 0, ax)
        return c

    def from_coeffs(self, c: np.ndarray) -> Field:
        u = np.asarray(c, dtype=np.float64)
        if u.shape != self.domain.sizes:
            u = u.reshape(self.domain.sizes)
        for ax, V in enumerate(self.axis_eigenvectors):
            u = np.moveaxis(np.tensordot(V, u, axes=(1, ax)), 0, ax)
        return Field(u.reshape(-1), self.domain)

    def mode(self, ks: Sequence[int] | int) -> Field:
        return eigenvector(self.domain, ks)


def spectrum_cap() -> int:
    raw = os.environ.get(SPECTRUM_CAP_ENV)
    if raw is None:
        return DEFAULT_SPECTRUM_CAP
    try:
        cap = int(raw)
    except ValueError as exc:
        raise ValidationError(f"{SPECTRUM_CAP_ENV} must be an integer, got {raw!r}") from exc
    if cap < 1:
        raise ValidationError(f"{SPECTRUM_CAP_ENV} must be positive")
    return cap


def compute_spectrum(domain: DomainSpec, cap: int | None = None) -> Spectrum:
    """Per-axis eigenpairs of the 1D stencil, tensorized eigenvalues included.

    Refuses grids with more than ``cap`` total nodes (default 2**24,
    overridable via the SPHEREFLOW_SPECTRUM_CAP environment variable).
    """
    limit = spectrum_cap() if cap is None else int(cap)
    if domain.node_count > limit:
        raise SpectrumCapError(
            f"{domain.node_count} nodes exceed the spectrum cap of {limit}"
        )
    evals = []
    evecs = []
    for L, n, h in zip(domain.lengths, domain.sizes, domain.spacings):
        k = np.arange(1, n + 1)
        lam = (4.0 / (h * h)) * np.sin(k * math.pi / (2 * (n + 1))) ** 2
        j = np.arange(1, n + 1)
        V = math.sqrt(2.0 / L) * np.sin(np.outer(j, k) * math.pi / (n + 1))
        evals.append(lam)
        evecs.append(V)
    combined = np.zeros(domain.sizes)
    for ax, lam in enumerate(evals):
        shape = [1] * domain.dimension
        shape[ax] = domain.sizes[ax]
        combined = combined + lam.reshape(shape)
    return Spectrum(domain, tuple(evals), tuple(evecs), combined)


def apply_phi_of_A(spectrum: Spectrum, phi: Callable[[np.ndarray], np.ndarray], u: Field) -> Field:
    """Functional calculus phi(A)u: scale eigen-coefficients by phi(lambda_k).

    ``phi`` must accept an ndarray of eigenvalues and return finite values
    on all of them.
    """
    vals = np.asarray(phi(spectrum.eigenvalues), dtype=np.float64)
    if vals.shape != spectrum.eigenvalues.shape:
        vals = np.broadcast_to(vals, spectrum.eigenvalues.shape)
    if not np.all(np.isfinite(vals)):
        raise ValidationError("phi is non-finite on part of the discrete spectrum")
    return spectrum.from_coeffs(vals * spectrum.to_coeffs(u))


def restrict(fine: Field, coarse: DomainSpec) -> Field:
    """Restrict a field to a coarser grid whose nodes are a subset of the fine ones.

    Requires equal lengths and (n_fine+1) an integer multiple of
    (n_coarse+1) per axis.
    """
    fd = fine.domain
    if fd.dimension != coarse.dimension or fd.lengths != coarse.lengths:
        raise ValidationError("restriction requires the same box geometry")
    idx = []
    for nf, nc in zip(fd.sizes, coarse.sizes):
        if (nf + 1) % (nc + 1) != 0:
            raise ValidationError(
                f"fine grid ({nf}+1 intervals) is not a refinement of coarse ({nc}+1)"
            )
        r = (nf + 1) // (nc + 1)
        idx.append(slice(r - 1, None, r))
    vals = fine.values.reshape(fd.sizes)[tuple(idx)]
    return Field(vals.reshape(-1), coarse)
