"""Experiment driver: range audit, scenario runs, CSV and plot-data output.

Every file this module writes is byte-deterministic for a given
configuration: floats are rendered with Python's shortest round-trip
``repr``, rows end in LF, and the encoding is UTF-8.  Rendering is left to
external tools; plot data files are plain two-column ASCII.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import PRESETS, ConfigError, SimConfig, parse_config
from .diagnostics import RangeFailureError, RunOutput, compare_traces, energy_drift
from .grids import MediumKind
from .precision import FORMATS, FloatFormat, Precision
from .stencil import StencilSpec

EXIT_OK = 0
EXIT_RANGE = 1
EXIT_USAGE = 2


# --- format table -------------------------------------------------------------

def _sig5(x: float) -> str:
    """Five significant digits, minimal exponent: 6.5504e4, 4.8828e-4."""
    mantissa, exponent = f"{x:.4e}".split("e")
    return f"{mantissa}e{int(exponent)}"


def formats_table() -> str:
    rows = [("format", "unit roundoff", "max finite", "min normal", "min subnormal")]
    for p in (Precision.FP16, Precision.FP32, Precision.FP64):
        f = FORMATS[p]
        rows.append(
            (f.name, _sig5(f.unit_roundoff), _sig5(f.max_finite),
             _sig5(f.min_positive_normal), _sig5(f.min_positive_subnormal))
        )
    widths = [max(len(r[k]) for r in rows) for k in range(5)]
    lines = [
        "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
        for row in rows
    ]
    return "\n".join(lines)


# --- range audit ---------------------------------------------------------------

@dataclass(frozen=True)
class Finding:
    level: str  # "error" or "warning"
    message: str

    def __str__(self):
        return f"{self.level}: {self.message}"


@dataclass
class AuditReport:
    findings: list

    @property
    def ok(self) -> bool:
        return not any(f.level == "error" for f in self.findings)

    def render(self) -> str:
        if not self.findings:
            return "range audit: all values inside the normal range"
        return "\n".join(str(f) for f in self.findings)


def _audit_values(findings, name: str, values, fmt: FloatFormat, divisor=False):
    v = np.abs(np.asarray(values, dtype=np.float64)).ravel()
    nz = v[v != 0.0]
    if nz.size == 0:
        return
    hi, lo = float(nz.max()), float(nz.min())
    if hi > fmt.max_finite:
        findings.append(Finding(
            "error",
            f"{name}: value {hi:.6g} exceeds {fmt.name} max {_sig5(fmt.max_finite)}",
        ))
    if lo < 0.5 * fmt.min_positive_subnormal and divisor:
        findings.append(Finding(
            "error",
            f"{name}: value {lo:.6g} rounds to zero in {fmt.name} "
            f"(min subnormal {_sig5(fmt.min_positive_subnormal)}) and is divided by",
        ))
    elif lo < fmt.min_positive_normal:
        findings.append(Finding(
            "warning",
            f"{name}: value {lo:.6g} is below the {fmt.name} normal floor "
            f"{_sig5(fmt.min_positive_normal)}; expect heavy relative error",
        ))


def range_audit(cfg: SimConfig) -> AuditReport:
    """Check materialized parameters against the formats that consume them.

    Medium planes are audited in the lane that multiplies or divides by
    them, dt and the source peak in the update format, stencil taps in the
    stencil format.  Overflow is an error; subnormal magnitudes warn.
    """
    findings = []
    fu = FORMATS[cfg.update_precision]
    fs = FORMATS[cfg.stencil_precision]
    planes = cfg.medium.planes
    if cfg.medium.kind is MediumKind.ACOUSTIC:
        lanes = {"rho_x": (fu, True), "rho_y": (fu, True), "beta": (fu, True)}
    else:
        lanes = {
            "rho_x": (fu, True), "rho_y": (fu, True),
            "lam": (fs, False), "mu": (fs, False),
        }
    for name, (fmt, divisor) in lanes.items():
        _audit_values(findings, f"medium.{name}", planes[name], fmt, divisor=divisor)
    if cfg.medium.kind is MediumKind.ELASTIC:
        _audit_values(findings, "medium.lam+2mu",
                      planes["lam"] + 2.0 * planes["mu"], fs)

    _audit_values(findings, "grid.dt", [cfg.grid.dt], fu)
    taps = StencilSpec.make(cfg.stencil_precision, cfg.grid.dx).coefficients
    _audit_values(findings, "stencil taps", list(taps), fs)
    if cfg.source is not None:
        _audit_values(findings, "source peak", [cfg.source.wavelet.amplitude], fu)
    return AuditReport(findings)


# --- scenario output -----------------------------------------------------------

def _fmt(x) -> str:
    return repr(float(x))


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def _trace_time_offset(field: str) -> float:
    # pressure lives on integer step levels, velocities on half levels
    return 1.0 if field == "p" else 0.5


def write_outputs(cfg: SimConfig, out: RunOutput, out_dir: Path,
                  reference: RunOutput | None = None) -> dict:
    """Write traces.csv, energy.csv, plot data, summary.json; return summary."""
    out_dir.mkdir(parents=True, exist_ok=True)
    dt = cfg.grid.dt

    if out.traces:
        off = _trace_time_offset(out.traces[0].field)
        header = "step,time," + ",".join(
            f"{t.field}_ix{t.ix}_iy{t.iy}" for t in out.traces
        )
        lines = [header]
        for n in range(cfg.grid.nt):
            row = [str(n), _fmt((n + off) * dt)]
            row += [_fmt(t.samples[n]) for t in out.traces]
            lines.append(",".join(row))
        _write_text(out_dir / "traces.csv", "\n".join(lines) + "\n")

        t_zoom = cfg.grid.nt * dt * (2.0 / 3.0)
        for t in out.traces:
            stem = f"trace_{t.field}_ix{t.ix}_iy{t.iy}"
            full, zoom = [], []
            for n in range(cfg.grid.nt):
                tn = (n + off) * dt
                line = f"{_fmt(tn)} {_fmt(t.samples[n])}"
                full.append(line)
                if tn >= t_zoom:
                    zoom.append(line)
            _write_text(out_dir / f"plot_{stem}.dat", "\n".join(full) + "\n")
            _write_text(out_dir / f"plot_{stem}_zoom.dat", "\n".join(zoom) + "\n")

    energy_lines = ["time,energy"] + [
        f"{_fmt(t)},{_fmt(e)}" for t, e in zip(out.energy.times, out.energy.values)
    ]
    _write_text(out_dir / "energy.csv", "\n".join(energy_lines) + "\n")
    _write_text(
        out_dir / "plot_energy.dat",
        "\n".join(f"{_fmt(t)} {_fmt(e)}"
                  for t, e in zip(out.energy.times, out.energy.values)) + "\n",
    )

    summary = {
        "label": cfg.label,
        "equation": cfg.equation,
        "grid": {"nx": cfg.grid.nx, "ny": cfg.grid.ny, "dx": cfg.grid.dx,
                 "dt": dt, "nt": cfg.grid.nt},
        "stencil_precision": FORMATS[cfg.stencil_precision].name,
        "update_precision": FORMATS[cfg.update_precision].name,
        "mode": cfg.variant.name.lower() if cfg.variant else "baseline",
        "final_energy": float(out.energy.values[-1]),
        "range_failure": None,
    }
    t_off = 2.0 * cfg.source.wavelet.delay if cfg.source else 0.0
    if (out.energy.times > t_off).any():
        summary["energy_drift"] = energy_drift(out.energy, t_off)
    if reference is not None and out.traces:
        comparisons = {}
        for t, r in zip(out.traces, reference.traces):
            comparisons[f"{t.field}_ix{t.ix}_iy{t.iy}"] = compare_traces(t, r)
        summary["vs_reference"] = comparisons
    _write_text(out_dir / "summary.json",
                json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


@dataclass
class ScenarioResult:
    label: str
    out_dir: Path
    failure: RangeFailureError | None
    output: RunOutput | None
    summary: dict


def run_scenario(cfg: SimConfig, out_dir: Path,
                 reference: RunOutput | None = None) -> ScenarioResult:
    """Run one configuration and write its outputs under out_dir."""
    try:
        out = cfg.run()
    except RangeFailureError as e:
        out_dir.mkdir(parents=True, exist_ok=True)
        summary = {
            "label": cfg.label,
            "range_failure": {"step": e.step, "field": e.field_name},
        }
        _write_text(out_dir / "summary.json",
                    json.dumps(summary, indent=2, sort_keys=True) + "\n")
        return ScenarioResult(cfg.label, out_dir, e, None, summary)
    summary = write_outputs(cfg, out, out_dir, reference)
    return ScenarioResult(cfg.label, out_dir, None, out, summary)


# --- reproduction suite ---------------------------------------------------------

# Canned scenario groups: a binary64 reference, the naive binary16 update
# that loses energy, and the compensated update that restores it.  "ablation"
# isolates the update stage by keeping the stencil in binary64 while the
# solution update stays binary16.
REPRO_GROUPS = {
    "acoustic": ("paper-acoustic", (
        ("fp64", {"precision.stencil": "fp64", "precision.update": "fp64",
                  "precision.mode": "baseline"}),
        ("fp16-naive", {"precision.stencil": "fp16", "precision.update": "fp16",
                        "precision.mode": "baseline"}),
        ("fp16-op3", {"precision.stencil": "fp16", "precision.update": "fp16",
                      "precision.mode": "op3"}),
    )),
    "elastic": ("paper-elastic", (
        ("fp64", {"precision.stencil": "fp64", "precision.update": "fp64",
                  "precision.mode": "baseline"}),
        ("fp16-naive", {"precision.stencil": "fp16", "precision.update": "fp16",
                        "precision.mode": "baseline"}),
        ("fp16-op6", {"precision.stencil": "fp16", "precision.update": "fp16",
                      "precision.mode": "op6"}),
        ("fp16-op3", {"precision.stencil": "fp16", "precision.update": "fp16",
                      "precision.mode": "op3"}),
    )),
    "ablation": ("paper-acoustic", (
        ("fp64", {"precision.stencil": "fp64", "precision.update": "fp64",
                  "precision.mode": "baseline"}),
        ("fp64s-fp16u-naive", {"precision.stencil": "fp64",
                               "precision.update": "fp16",
                               "precision.mode": "baseline"}),
        ("fp64s-fp16u-op3", {"precision.stencil": "fp64",
                             "precision.update": "fp16",
                             "precision.mode": "op3"}),
    )),
}


def run_repro(names, desk: bool, out_root: Path, log=print, extra_sets=()) -> int:
    rc = EXIT_OK
    for group in names:
        preset, entries = REPRO_GROUPS[group]
        reference = None
        for label, overrides in entries:
            sets = [f"{k}={v}" for k, v in overrides.items()]
            sets += list(extra_sets)
            sets.append(f"run.label={group}/{label}")
            cfg = parse_config(preset=preset, desk=desk, sets=sets)
            report = range_audit(cfg)
            if not report.ok:
                log(report.render())
                return EXIT_RANGE
            result = run_scenario(cfg, out_root / group / label, reference)
            if result.failure is not None:
                log(f"{group}/{label}: range failure: {result.failure}")
                rc = EXIT_RANGE
                continue
            if label == "fp64":
                reference = result.output
            drift = result.summary.get("energy_drift")
            note = (f"rel_deviation={drift['rel_deviation']:.3e}" if drift
                    else "no post-source window")
            log(f"{group}/{label}: ok ({note}) -> {result.out_dir}")
    return rc


# --- entry point ----------------------------------------------------------------

def _resolve_out(flag_value, cfg_output_dir: str) -> Path:
    if flag_value:
        return Path(flag_value)
    env = os.environ.get("HALFWAVE_OUT")
    if env:
        return Path(env)
    if cfg_output_dir:
        return Path(cfg_output_dir)
    return Path("halfwave-out")


def _add_config_args(sub, with_desk=True):
    sub.add_argument("--config", help="INI experiment description")
    sub.add_argument("--preset", choices=sorted(PRESETS),
                     help="named built-in configuration")
    if with_desk:
        sub.add_argument("--desk", action="store_true",
                         help="shrink a preset to desk scale")
    sub.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                     help="override one configuration value")


def _parse_from(args) -> SimConfig:
    return parse_config(
        args.config, preset=args.preset,
        desk=getattr(args, "desk", False), sets=args.set,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="halfwave",
        description="Configurable-precision staggered-grid wave simulation lab.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p_run = subs.add_parser("run", help="run one experiment and write CSV outputs")
    _add_config_args(p_run)
    p_run.add_argument("--out", help="output directory (overrides HALFWAVE_OUT)")

    p_repro = subs.add_parser("repro", help="run a canned reproduction suite")
    p_repro.add_argument("name", choices=sorted(REPRO_GROUPS) + ["all"])
    p_repro.add_argument("--desk", action="store_true",
                         help="run at desk scale (minutes, not hours)")
    p_repro.add_argument("--out", help="output directory (overrides HALFWAVE_OUT)")
    p_repro.add_argument("--set", action="append", default=[],
                         metavar="SECTION.KEY=VALUE",
                         help="override one value in every suite scenario")

    p_audit = subs.add_parser("audit", help="range-audit a configuration")
    _add_config_args(p_audit)

    subs.add_parser("formats", help="print the floating-point format constants")

    args = parser.parse_args(argv)

    if args.command == "formats":
        print(formats_table())
        return EXIT_OK

    try:
        if args.command == "repro":
            names = sorted(REPRO_GROUPS) if args.name == "all" else [args.name]
            out_root = _resolve_out(args.out, "")
            return run_repro(names, args.desk, out_root, extra_sets=args.set)

        cfg = _parse_from(args)
        report = range_audit(cfg)
        print(report.render())
        if args.command == "audit":
            return EXIT_OK if report.ok else EXIT_RANGE
        if not report.ok:
            return EXIT_RANGE
        out_dir = _resolve_out(args.out, cfg.output_dir) / cfg.label
        result = run_scenario(cfg, out_dir)
        if result.failure is not None:
            print(f"range failure: {result.failure}", file=sys.stderr)
            return EXIT_RANGE
        print(f"wrote {result.out_dir}/energy.csv"
              + (" and traces.csv" if result.output.traces else ""))
        return EXIT_OK
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
