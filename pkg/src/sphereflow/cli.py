"""Command-line interface: run, stationary, verify, sweep, spectrum."""

from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ParsedConfig, build_initial, parse_config
from .domain import compute_spectrum, make_domain
from .errors import SolverError, ValidationError
from .flow import TERM_FAILURE, FlowConfig, run_flow
from .functionals import CutoffParams, cutoff_params, monotonicity_constant
from .snapshots import write_plotdata, write_snapshot, write_timeseries
from .stationary import solve_ground_state
from .verify import (
    PropertyReport,
    check_energy_identities,
    check_modified_monotone,
    check_nonlinearity_monotone,
    check_resolvent_bounds,
    check_surjectivity,
    check_theta_inequality,
    check_yosida_convergence,
    random_low_pass,
)

SUITES = ("nonlinearity", "modified", "surjectivity", "resolvent", "yosida", "energy", "theta")


def _common_flags(sub):
    sub.add_argument("--config", required=False, help="path to the run configuration file")
    sub.add_argument("--out", required=True, help="output directory (created if missing)")
    sub.add_argument("--seed", type=int, default=None, help="override the config seed")
    sub.add_argument("--jobs", type=int, default=1, help="parallel subruns for sweep")
    sub.add_argument("--format", choices=("csv",), default="csv")


def _outdir(raw: str) -> Path:
    path = Path(raw)
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ValidationError(f"output directory {raw} is not writable: {exc}") from exc
    return path


def _load(args) -> ParsedConfig:
    if not args.config:
        raise ValidationError("--config is required for this command")
    parsed = parse_config(args.config)
    if args.seed is not None:
        parsed = replace(
            parsed,
            flow=replace(parsed.flow, seed=args.seed),
            effective={**parsed.effective,
                       "flow": {**parsed.effective["flow"], "seed": args.seed}},
        )
    return parsed


def _write_manifest(out: Path, parsed: ParsedConfig, extra: dict, started: float) -> None:
    manifest = {
        "tool": "sphereflow",
        "version": __version__,
        "config_digest": parsed.digest,
        "seed": parsed.flow.seed,
        "effective": parsed.effective,
        "wall_clock_seconds": time.monotonic() - started,
        **extra,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _execute_run(parsed: ParsedConfig, out: Path) -> int:
    started = time.monotonic()
    domain = parsed.domain
    u0 = build_initial(domain, parsed.initial, parsed.flow.seed)
    result = run_flow(domain, u0, parsed.flow)
    write_timeseries(result.series, str(out / "timeseries.csv"))
    outputs = {"timeseries": "timeseries.csv"}
    if parsed.output.snapshots:
        snapdir = out / "snapshots"
        snapdir.mkdir(exist_ok=True)
        names = []
        for i, (t, f) in enumerate(result.snapshots):
            name = f"snap_{i:04d}.sphf"
            write_snapshot(f, {"t": t, "p": parsed.flow.p}, str(snapdir / name))
            names.append(name)
        outputs["snapshots"] = names
    if parsed.output.plotdata:
        outputs["plotdata"] = [Path(p).name for p in write_plotdata(result.series, out)]
    _write_manifest(out, parsed, {
        "outputs": outputs,
        "termination": result.termination,
        "steps_taken": result.steps_taken,
        "failure_message": result.message,
    }, started)
    if result.termination == TERM_FAILURE:
        print(f"solver failure after {result.steps_taken} steps: {result.message}",
              file=sys.stderr)
        return 1
    return 0


def cmd_run(args) -> int:
    parsed = _load(args)
    out = _outdir(args.out)
    return _execute_run(parsed, out)


def cmd_stationary(args) -> int:
    parsed = _load(args)
    out = _outdir(args.out)
    started = time.monotonic()
    domain = parsed.domain
    u0 = build_initial(domain, parsed.initial, parsed.flow.seed)
    res = solve_ground_state(domain, u0, parsed.flow, args.tol)
    write_snapshot(res.field, {"t": res.iterations * parsed.flow.dt, "p": parsed.flow.p},
                   str(out / "ground_state.sphf"))
    report = {
        "multiplier": res.multiplier,
        "energy": res.energy,
        "residual": res.residual,
        "iterations": res.iterations,
        "converged": res.converged,
        "tolerance": args.tol,
    }
    (out / "stationary.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    _write_manifest(out, parsed, {"outputs": {"stationary": "stationary.json"}}, started)
    print(f"multiplier {res.multiplier:.12g}  energy {res.energy:.12g}  "
          f"residual {res.residual:.3e}  converged {res.converged}")
    return 0 if res.converged else 1


def _verify_reports(suite: str, seed: int) -> list[PropertyReport]:
    box = make_domain(1, [math.pi], [63])
    tiny = make_domain(1, [1.0], [2])
    reports: list[PropertyReport] = []
    if suite in ("nonlinearity", "all"):
        for p in (2.0, 3.0, 4.0, 6.0):
            reports.append(check_nonlinearity_monotone(box, p, trials=1000, seed=seed))
    if suite in ("modified", "all"):
        for p in (2.0, 4.0):
            for K in (1.0, 5.0):
                reports.append(check_modified_monotone(
                    box, cutoff_params(box, K, p), trials=1000, seed=seed))
        # coarse grids get their own report; the shift constant is derived from
        # continuum embeddings, so its discrete margin is worth watching there
        coarse = make_domain(1, [math.pi], [4])
        for p in (2.0, 4.0):
            reports.append(check_modified_monotone(
                coarse, cutoff_params(coarse, 1.0, p), trials=500, seed=seed))
    if suite in ("surjectivity", "all"):
        # continuum lambda1 = 1 on (0, pi), so the shift is exactly C(K) = 11
        params = cutoff_params(box, 1.0, 2.0, continuum=True)
        reports.append(check_surjectivity(
            box, params, gamma=monotonicity_constant(params), trials=100, seed=seed))
    if suite in ("resolvent", "all"):
        reports.extend(check_resolvent_bounds(tiny, [0.1, 1.0, 10.0, 100.0], pi_seed=seed))
        reports.extend(check_resolvent_bounds(box, [0.1, 1.0, 10.0, 100.0], pi_seed=seed,
                                              pi_ops=("resolvent",)))
    if suite in ("yosida", "all"):
        spectrum = compute_spectrum(box)
        u = random_low_pass(spectrum, np.random.default_rng(seed))
        reports.append(check_yosida_convergence(box, u, [1.0, 10.0, 100.0, 1000.0]))
    if suite in ("energy", "all"):
        dom = make_domain(1, [math.pi], [127])
        u0 = build_initial(dom, "0.8*e1 + 0.6*e2")
        base = FlowConfig(p=2.0, dt=1e-3, T=4.0, integrator="imex", sample_every=10,
                          store_fields=True)
        full = run_flow(dom, u0, base)
        half = run_flow(dom, u0, replace(base, dt=5e-4, sample_every=20))
        reports.append(check_energy_identities(full, 2.0, half_dt_run=half))
    if suite in ("theta", "all"):
        reports.append(check_theta_inequality(trials=10000, seed=seed))
    return reports


def cmd_verify(args) -> int:
    if args.suite not in SUITES + ("all",):
        print(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES + ('all',))}",
              file=sys.stderr)
        return 2
    out = _outdir(args.out)
    seed = args.seed if args.seed is not None else 0
    reports = _verify_reports(args.suite, seed)
    payload = json.dumps([r.as_dict() for r in reports], indent=2, sort_keys=True) + "\n"
    (out / "reports.json").write_text(payload)
    failed = [r for r in reports if not r.passed and not r.informational]
    for r in reports:
        tag = "info" if r.informational else ("pass" if r.passed else "FAIL")
        print(f"[{tag}] {r.name}: worst margin {r.worst_margin:.3e} "
              f"(tolerance {r.tolerance:.1e}, {r.trials} trials)")
    return 0 if not failed else 1


def _sweep_combo(payload):
    parsed, combo, subdir = payload
    flow = parsed.flow
    if "dt" in combo:
        flow = replace(flow, dt=combo["dt"])
    if "p" in combo:
        cut = flow.cutoff
        if cut is not None:
            cut = CutoffParams(cut.K, combo["p"], cut.lambda1)
        flow = replace(flow, p=combo["p"], cutoff=cut)
    if "mu" in combo:
        flow = replace(flow, yosida_mu=combo["mu"])
    sub = replace(parsed, flow=flow)
    code = _execute_run(sub, Path(subdir))
    return combo, subdir, code


def cmd_sweep(args) -> int:
    parsed = _load(args)
    out = _outdir(args.out)
    axes = {}
    if args.dt:
        axes["dt"] = [float(x) for x in args.dt.split(",")]
    if args.p:
        axes["p"] = [float(x) for x in args.p.split(",")]
    if args.mu:
        axes["mu"] = [float(x) for x in args.mu.split(",")]
    if not axes:
        print("sweep needs at least one of --dt, --p, --mu", file=sys.stderr)
        return 2
    names = sorted(axes)
    combos = [dict(zip(names, vals)) for vals in itertools.product(*(axes[n] for n in names))]
    jobs = []
    for combo in combos:
        tag = "_".join(f"{k}={combo[k]:g}" for k in names)
        subdir = out / tag
        subdir.mkdir(exist_ok=True)
        jobs.append((parsed, combo, str(subdir)))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_combo, jobs))
    else:
        results = [_sweep_combo(j) for j in jobs]

    lines = [",".join(names + ["subdir", "exit", "final_t", "final_energy",
                               "final_norm", "final_residual"])]
    for combo, subdir, code in results:
        tail = ["", "", "", ""]
        csv_path = Path(subdir) / "timeseries.csv"
        if csv_path.exists():
            last = csv_path.read_text().strip().splitlines()[-1].split(",")
            tail = [last[0], last[2], last[1], last[6]]
        lines.append(",".join(
            [f"{combo[k]:.17g}" for k in names]
            + [Path(subdir).name, str(code)] + tail
        ))
    (out / "sweep_summary.csv").write_text("\n".join(lines) + "\n")
    return 0 if all(code == 0 for _, _, code in results) else 1


def cmd_spectrum(args) -> int:
    parsed = _load(args)
    out = _outdir(args.out)
    domain = parsed.domain
    spectrum = compute_spectrum(domain)
    lam = spectrum.eigenvalues.reshape(-1)
    order = np.argsort(lam, kind="stable")[: args.modes]
    shape = domain.sizes
    lines = ["index,modes,discrete,continuum,ratio"]
    print(f"{'modes':>12} {'discrete':>22} {'continuum':>22} {'ratio':>10}")
    for rank, flat_idx in enumerate(order, start=1):
        ks = tuple(int(k) + 1 for k in np.unravel_index(flat_idx, shape))
        disc = float(lam[flat_idx])
        cont = sum((k * math.pi / L) ** 2 for k, L in zip(ks, domain.lengths))
        print(f"{str(ks):>12} {disc:>22.12f} {cont:>22.12f} {disc / cont:>10.6f}")
        lines.append(f"{rank},{' '.join(map(str, ks))},{disc:.17g},{cont:.17g},{disc / cont:.17g}")
    (out / "spectrum.csv").write_text("\n".join(lines) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sphereflow",
        description="Constrained dissipative flow on rectangular Dirichlet boxes: "
                    "simulation, ground states, and operator-inequality verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="integrate one configured flow")
    _common_flags(run_p)
    run_p.set_defaults(fn=cmd_run)

    st = sub.add_parser("stationary", help="drive the flow to a stationary state")
    _common_flags(st)
    st.add_argument("--tol", type=float, default=1e-8, help="stationarity residual target")
    st.set_defaults(fn=cmd_stationary)

    ver = sub.add_parser("verify", help="run a property-check suite")
    _common_flags(ver)
    ver.add_argument("--suite", default="all", help="one of %s or 'all'" % (SUITES,))
    ver.set_defaults(fn=cmd_verify)

    sw = sub.add_parser("sweep", help="cross-product of runs over dt / p / mu")
    _common_flags(sw)
    sw.add_argument("--dt", default=None, help="comma list of step sizes")
    sw.add_argument("--p", default=None, help="comma list of exponents")
    sw.add_argument("--mu", default=None, help="comma list of smoothing parameters")
    sw.set_defaults(fn=cmd_sweep)

    sp = sub.add_parser("spectrum", help="dump the lowest discrete eigenvalues")
    _common_flags(sp)
    sp.add_argument("--modes", type=int, default=10, help="how many eigenvalues")
    sp.set_defaults(fn=cmd_spectrum)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
