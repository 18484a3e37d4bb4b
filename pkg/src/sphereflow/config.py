"""INI-style run configuration: parsing, validation, and initial-state construction.

Schema (all keys optional unless noted):

    [domain]
    dimension = 1
    lengths   = 3.141592653589793      # one value per axis
    sizes     = 127                    # interior nodes per axis

    [flow]
    p            = 2.0
    integrator   = imex                # projected_euler | imex | backward_euler | etd
    dt           = 1e-3
    horizon      = 1.0
    renormalize  = true
    sample_every = 1
    stop_residual =                    # empty means run to the horizon
    initial      = e1                  # e<k>, e(k1,k2,..), sums like 0.8*e1 + 0.6*e2, or "random"
    seed         = 0
    fractional   = false               # record ||A^a u||, ||A^b u|| when the eigenbasis fits
    frac_alpha   = 0.75
    frac_beta    = 1.25

    [cutoff]
    K       = 1.0                      # section present => run the cut-off flow
    lambda1 = discrete                 # or "continuum"; enters the monotonicity constant

    [yosida]
    mu = 100.0                         # section present => run the smoothed flow

    [output]
    snapshots = true
    plotdata  = true

Unknown sections or keys are hard errors.  Every effective value, defaults
included, is recorded for the run manifest.
"""

from __future__ import annotations

import configparser
import hashlib
import re
from dataclasses import dataclass

import numpy as np

from .domain import DomainSpec, Field, compute_spectrum, eigenvector, l2_norm, make_domain
from .errors import ValidationError
from .flow import FlowConfig
from .functionals import CutoffParams
from .verify import random_low_pass

_SCHEMA = {
    "domain": {"dimension", "lengths", "sizes"},
    "flow": {
        "p", "integrator", "dt", "horizon", "renormalize", "sample_every",
        "stop_residual", "initial", "seed", "fractional", "frac_alpha", "frac_beta",
    },
    "cutoff": {"K", "lambda1"},
    "yosida": {"mu"},
    "output": {"snapshots", "plotdata"},
}

_TERM_RE = re.compile(r"^(?:([0-9.eE+-]+)\*)?e(?:(\d+)|\(([\d\s,]+)\))$")


@dataclass(frozen=True)
class OutputOptions:
    snapshots: bool = True
    plotdata: bool = True


@dataclass(frozen=True)
class ParsedConfig:
    domain: DomainSpec
    flow: FlowConfig
    output: OutputOptions
    initial: str
    effective: dict
    digest: str


def _bool(raw: str, where: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValidationError(f"{where}: expected a boolean, got {raw!r}")


def _floats(raw: str) -> list[float]:
    return [float(tok) for tok in raw.replace(",", " ").split()]


def _ints(raw: str) -> list[int]:
    return [int(tok) for tok in raw.replace(",", " ").split()]


def parse_config(path: str) -> ParsedConfig:
    """Read and validate a run configuration file."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case-sensitive (the cut-off level is "K")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
        cp.read_string(text, source=str(path))
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ValidationError(f"config parse error: {exc}") from exc

    for section in cp.sections():
        if section not in _SCHEMA:
            raise ValidationError(f"unknown config section [{section}]")
        for key in cp[section]:
            if key not in _SCHEMA[section]:
                raise ValidationError(f"unknown config key {section}.{key}")

    def get(section, key, default):
        if cp.has_section(section) and key in cp[section]:
            val = cp[section][key].strip()
            if val != "":
                return val
        return default

    try:
        dimension = int(get("domain", "dimension", "1"))
        lengths = _floats(get("domain", "lengths", "3.141592653589793"))
        sizes = _ints(get("domain", "sizes", "127"))
    except ValueError as exc:
        raise ValidationError(f"bad [domain] value: {exc}") from exc
    domain = make_domain(dimension, lengths, sizes)

    try:
        p = float(get("flow", "p", "2.0"))
        dt = float(get("flow", "dt", "1e-3"))
        horizon = float(get("flow", "horizon", "1.0"))
        sample_every = int(get("flow", "sample_every", "1"))
        seed = int(get("flow", "seed", "0"))
        frac_alpha = float(get("flow", "frac_alpha", "0.75"))
        frac_beta = float(get("flow", "frac_beta", "1.25"))
    except ValueError as exc:
        raise ValidationError(f"bad [flow] value: {exc}") from exc
    integrator = get("flow", "integrator", "imex")
    renormalize = _bool(get("flow", "renormalize", "true"), "flow.renormalize")
    fractional = _bool(get("flow", "fractional", "false"), "flow.fractional")
    stop_raw = get("flow", "stop_residual", None)
    stop_residual = float(stop_raw) if stop_raw is not None else None
    initial = get("flow", "initial", "e1")

    cutoff = None
    if cp.has_section("cutoff"):
        k_raw = get("cutoff", "K", None)
        if k_raw is None:
            raise ValidationError("[cutoff] section requires the key K")
        which = get("cutoff", "lambda1", "discrete").lower()
        if which not in ("discrete", "continuum"):
            raise ValidationError("cutoff.lambda1 must be 'discrete' or 'continuum'")
        lam = domain.lambda1h if which == "discrete" else domain.lambda1
        cutoff = CutoffParams(float(k_raw), p, lam)

    yosida_mu = None
    if cp.has_section("yosida"):
        mu_raw = get("yosida", "mu", None)
        if mu_raw is None:
            raise ValidationError("[yosida] section requires the key mu")
        yosida_mu = float(mu_raw)

    flow = FlowConfig(
        p=p,
        dt=dt,
        T=horizon,
        integrator=integrator,
        renormalize=renormalize,
        cutoff=cutoff,
        yosida_mu=yosida_mu,
        sample_every=sample_every,
        stop_residual=stop_residual,
        seed=seed,
        frac_powers=(frac_alpha, frac_beta) if fractional else None,
    )
    output = OutputOptions(
        snapshots=_bool(get("output", "snapshots", "true"), "output.snapshots"),
        plotdata=_bool(get("output", "plotdata", "true"), "output.plotdata"),
    )

    effective = {
        "domain": {"dimension": dimension, "lengths": lengths, "sizes": sizes,
                   "spacings": list(domain.spacings), "lambda1": domain.lambda1,
                   "lambda1h": domain.lambda1h},
        "flow": {"p": p, "integrator": integrator, "dt": dt, "horizon": horizon,
                 "renormalize": renormalize, "sample_every": sample_every,
                 "stop_residual": stop_residual, "initial": initial, "seed": seed,
                 "fractional": fractional, "frac_alpha": frac_alpha, "frac_beta": frac_beta},
        "cutoff": None if cutoff is None else {"K": cutoff.K, "lambda1": cutoff.lambda1},
        "yosida": None if yosida_mu is None else {"mu": yosida_mu},
        "output": {"snapshots": output.snapshots, "plotdata": output.plotdata},
    }
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return ParsedConfig(domain, flow, output, initial, effective, digest)


def build_initial(domain: DomainSpec, expr: str, seed: int = 0) -> Field:
    """Construct the (unit-normalized) initial state from its config string."""
    expr = expr.strip()
    if expr == "random":
        field = random_low_pass(compute_spectrum(domain), np.random.default_rng(seed))
    else:
        total = None
        for term in expr.split("+"):
            term = term.strip().replace(" ", "")
            m = _TERM_RE.match(term)
            if m is None:
                raise ValidationError(f"cannot parse initial-state term {term!r}")
            coef = float(m.group(1)) if m.group(1) else 1.0
            if m.group(2) is not None:
                ks = (int(m.group(2)),)
            else:
                ks = tuple(int(t) for t in m.group(3).replace(",", " ").split())
            if len(ks) != domain.dimension:
                raise ValidationError(
                    f"initial-state mode {term!r} has {len(ks)} indices, "
                    f"domain has {domain.dimension} axes"
                )
            piece = coef * eigenvector(domain, ks)
            total = piece if total is None else total + piece
        field = total
    nrm = l2_norm(domain, field)
    if nrm < 1e-12:
        raise ValidationError("initial state is (numerically) zero")
    return field / nrm
