"""Binary field snapshots and the time-series CSV writer.

Snapshot layout (little-endian throughout): magic "SPHF", version u32,
dimension u32, the per-axis interior node counts as u32, the box lengths
as f64, then t and p as f64, then the node values as f64 in row-major
order.  Reading back a written snapshot reproduces the field bitwise.
"""

from __future__ import annotations

import struct

import numpy as np

from .domain import Field, make_domain
from .errors import SnapshotFormatError
from .flow import DiagnosticsRecord

MAGIC = b"SPHF"
VERSION = 1

CSV_COLUMNS = (
    "t", "l2_norm", "energy", "grad_sq", "lp_p", "lambda",
    "stat_residual", "cum_dissipation", "energy_eq_residual",
    "frac_alpha", "frac_beta",
)


def write_snapshot(field: Field, meta: dict, path: str) -> None:
    """Write one field with its time and exponent; ``meta`` needs keys t and p."""
    d = field.domain
    header = struct.pack("<4sII", MAGIC, VERSION, d.dimension)
    header += struct.pack(f"<{d.dimension}I", *d.sizes)
    header += struct.pack(f"<{d.dimension}d", *d.lengths)
    header += struct.pack("<dd", float(meta["t"]), float(meta["p"]))
    body = field.values.astype("<f8", copy=False).tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


def read_snapshot(path: str) -> tuple[Field, dict]:
    """Read a snapshot back; returns the field and {"t": ..., "p": ...}."""
    with open(path, "rb") as fh:
        blob = fh.read()

    def take(fmt, offset):
        size = struct.calcsize(fmt)
        if offset + size > len(blob):
            raise SnapshotFormatError(f"truncated snapshot {path}")
        return struct.unpack_from(fmt, blob, offset), offset + size

    (magic, version, dim), off = take("<4sII", 0)
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r} in {path}")
    if version != VERSION:
        raise SnapshotFormatError(f"unsupported snapshot version {version}")
    if not 1 <= dim <= 3:
        raise SnapshotFormatError(f"implausible dimension {dim}")
    sizes, off = take(f"<{dim}I", off)
    lengths, off = take(f"<{dim}d", off)
    (t, p), off = take("<dd", off)
    count = 1
    for n in sizes:
        count *= n
    expected = off + 8 * count
    if len(blob) < expected:
        raise SnapshotFormatError(
            f"truncated snapshot {path}: header promises {count} values"
        )
    if len(blob) > expected:
        raise SnapshotFormatError(f"trailing bytes in snapshot {path}")
    values = np.frombuffer(blob, dtype="<f8", count=count, offset=off).copy()
    domain = make_domain(dim, list(lengths), list(sizes))
    return Field(values, domain), {"t": t, "p": p}


def _cell(x) -> str:
    return "" if x is None else f"{x:.17g}"


def write_timeseries(series: list[DiagnosticsRecord], path: str) -> None:
    """CSV with the fixed column set, 17 significant digits, '\\n' newlines."""
    lines = [",".join(CSV_COLUMNS)]
    for rec in series:
        lines.append(",".join(_cell(v) for v in (
            rec.t, rec.l2_norm, rec.energy, rec.grad_sq, rec.lp_p,
            rec.multiplier, rec.stat_residual, rec.cum_dissipation,
            rec.energy_eq_residual, rec.frac_alpha, rec.frac_beta,
        )))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_plotdata(series: list[DiagnosticsRecord], directory) -> list[str]:
    """Two-column text files for energy decay, norm drift, and residual."""
    made = []
    picks = (
        ("plot_energy.dat", lambda r: r.energy),
        ("plot_norm_drift.dat", lambda r: abs(r.l2_norm - 1.0)),
        ("plot_residual.dat", lambda r: r.stat_residual),
    )
    for name, pick in picks:
        path = f"{directory}/{name}"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in series:
                fh.write(f"{rec.t:.17g} {pick(rec):.17g}\n")
        made.append(path)
    return made
