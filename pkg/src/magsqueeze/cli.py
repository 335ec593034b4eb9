"""Command-line interface.

Subcommands: spectrum, sweep, optimize-phase, stability, threshold, ceiling,
params, verify.  Every command reads one config file, writes its outputs
(CSV/JSON plus a plot script for sweeps) into the output directory, and
drops a run report JSON with the headline numbers and a file manifest.

Exit codes: 0 success, 2 configuration error (including threshold brackets
with no crossing), 3 instability where stability is required, 4 verification
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from typing import Iterable, Optional, Sequence

import numpy as np

from . import optimize as opt
from .config import RunConfig, load_config
from .dynamics import model_from_params, stability
from .errors import BracketError, ConfigError, UnstableModelError
from .params import operating_point
from .spectra import nsd_db, spectrum_grid
from .verify import run_checks

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSTABLE = 3
EXIT_VERIFY = 4


def _fmt(x: float) -> str:
    """Fixed 12-significant-digit, locale-independent number format."""
    return f"{x:.12g}"


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: str, header: Sequence[str],
               rows: Iterable[Sequence[str]]) -> tuple[int, int]:
    lines = [",".join(header)]
    count = 0
    for row in rows:
        lines.append(",".join(row))
        count += 1
    _atomic_write(path, "\n".join(lines) + "\n")
    return count, len(header)


class _Report:
    """Accumulates the run report written next to the outputs."""

    def __init__(self, command: str, cfg: RunConfig):
        self.data = {
            "command": command,
            "config_hash": cfg.config_hash(),
            "created_unix": time.time(),
            "stability": None,
            "headline": {},
            "validity": {},
            "files": [],
            "config_echo": cfg.to_ini(),
        }

    def add_file(self, path: str, rows: int, cols: int) -> None:
        self.data["files"].append(
            {"path": os.path.basename(path), "rows": rows, "columns": cols})

    def write(self, out_dir: str, name: str = "report.json") -> str:
        path = os.path.join(out_dir, name)
        _atomic_write(path, json.dumps(self.data, indent=2) + "\n")
        return path


def _stability_dict(report) -> dict:
    return {
        "stable": bool(report.stable),
        "marginal": bool(report.marginal),
        "max_real_part": report.max_real_part,
        "margin": report.margin,
        "eigenvalues": [[float(ev.real), float(ev.imag)]
                        for ev in report.eigenvalues],
    }


def _validity_dict(op) -> dict:
    return {
        "kerr_ratio": op.kerr_ratio,
        "excitation_ratio": op.excitation_ratio,
        "cooperativity": op.cooperativity,
    }


def _prepare(cfg: RunConfig):
    params = cfg.physical_params()
    g_eff = cfg.g_eff()
    op_point = operating_point(params, g_eff=g_eff)
    model = model_from_params(params, g_eff=g_eff)
    return params, g_eff, op_point, model


def _require_stable_or_exit(model, report_obj: _Report, out_dir: str) -> None:
    rep = stability(model)
    report_obj.data["stability"] = _stability_dict(rep)
    if not rep.stable:
        report_obj.write(out_dir)
        print(json.dumps(_stability_dict(rep), indent=2), file=sys.stderr)
        raise UnstableModelError(
            f"configured system is unstable (max Re eig = {rep.max_real_part:.6g} rad/s)")


def cmd_spectrum(cfg: RunConfig, out_dir: str, phi_override=None) -> int:
    params, g_eff, op_point, model = _prepare(cfg)
    report = _Report("spectrum", cfg)
    report.data["validity"] = _validity_dict(op_point)
    _require_stable_or_exit(model, report, out_dir)

    lo, hi, n_omega = cfg.omega_grid_spec()
    omegas = np.linspace(lo, hi, n_omega) * params.omega_b
    phis_pi = phi_override if phi_override is not None else \
        cfg.get("grid", "phi_over_pi")
    phis = np.asarray(phis_pi, dtype=float) * math.pi
    result = spectrum_grid(model, omegas, phis)

    rows = []
    for i, w in enumerate(result.omega_over_omega_b):
        for j, p in enumerate(result.phi_over_pi):
            rows.append((_fmt(w), _fmt(p), _fmt(result.S[i, j]),
                         _fmt(result.S_db[i, j])))
    csv_path = os.path.join(out_dir, "spectrum.csv")
    nrows, ncols = _write_csv(
        csv_path, ("omega_over_omega_b", "phi_over_pi", "S", "S_dB"), rows)
    report.add_file(csv_path, nrows, ncols)

    i, j = np.unravel_index(int(np.argmin(result.S)), result.S.shape)
    report.data["headline"] = {
        "min_S": float(result.S[i, j]),
        "min_S_db": float(result.S_db[i, j]),
        "at_omega_over_omega_b": float(result.omega_over_omega_b[i]),
        "at_phi_over_pi": float(result.phi_over_pi[j]),
    }
    report.write(out_dir)
    return EXIT_OK


_PLOT_SCRIPT = """\
#!/usr/bin/env python3
# Renders the sweep heatmap from {csv}.  Requires matplotlib.
import csv
import math

import matplotlib.pyplot as plt
import numpy as np

rows = list(csv.DictReader(open({csv!r})))
x = sorted({{float(r[{xcol!r}]) for r in rows}})
y = sorted({{float(r[{ycol!r}]) for r in rows}})
S = np.full((len(y), len(x)), np.nan)
for r in rows:
    if r["S"] == "":
        continue
    i = y.index(float(r[{ycol!r}]))
    j = x.index(float(r[{xcol!r}]))
    value = float(r["S"])
    S[i, j] = value if value <= 0.5 else np.nan  # blank above vacuum

fig, ax = plt.subplots(figsize=(6, 4))
mesh = ax.pcolormesh(x, y, S, shading="nearest", cmap="viridis")
fig.colorbar(mesh, ax=ax, label="S")
ax.set_xlabel({xlabel!r})
ax.set_ylabel({ylabel!r})
fig.tight_layout()
fig.savefig("sweep.png", dpi=200)
print("wrote sweep.png")
"""


def _sweep_rows(grid: opt.SweepGrid, axis_names: tuple[str, str]):
    ax0, ax1 = grid.axes
    phi_opt = grid.phi_opt_over_pi
    for i, v0 in enumerate(ax0.values):
        for j, v1 in enumerate(ax1.values):
            ok = bool(grid.stable[i, j])
            s = grid.S[i, j]
            row = [_fmt(v0), _fmt(v1)]
            if ok:
                row += [_fmt(s), _fmt(nsd_db(max(s, 1e-300))),
                        "true" if s > 0.5 else "false", "true"]
            else:
                row += ["", "", "", "false"]
            if phi_opt is not None:
                row.append(_fmt(phi_opt[i, j]) if ok else "")
            yield row


def cmd_sweep(cfg: RunConfig, out_dir: str, grid_override=None,
              phi_override=None, global_phi=False) -> int:
    params, g_eff, op_point, model = _prepare(cfg)
    report = _Report("sweep", cfg)
    report.data["validity"] = _validity_dict(op_point)
    _require_stable_or_exit(model, report, out_dir)

    lo, hi, n_omega = cfg.omega_grid_spec()
    plo, phi_hi, n_phi = cfg.phi_grid_spec()
    if grid_override is not None:
        n_omega, n_phi = grid_override
    axis = cfg.get("sweep", "axis")
    fixed_phi = (phi_override[0] if phi_override else
                 cfg.get("sweep", "phi_over_pi")) * math.pi
    values = cfg.get("sweep", "values")

    if axis == "phi":
        grid = opt.sweep_omega_phi(params, (lo, hi), (plo, phi_hi),
                                   n_omega, n_phi, g_eff=g_eff)
        names = ("omega_over_omega_b", "phi_over_pi")
    elif axis == "delta_a":
        if values is None:
            raise ConfigError("[sweep] values required for axis = delta_a")
        grid = opt.sweep_detuning(params, values, (lo, hi), n_omega,
                                  phi=fixed_phi, g_eff=g_eff)
        names = ("delta_a_over_omega_b", "omega_over_omega_b")
    elif axis == "kappa_a":
        if values is None:
            raise ConfigError("[sweep] values required for axis = kappa_a")
        grid = opt.sweep_kappa(params, values, (lo, hi), n_omega,
                               phi=fixed_phi, g_eff=g_eff)
        names = ("kappa_a_over_omega_b", "omega_over_omega_b")
    elif axis == "temperature":
        if values is None:
            raise ConfigError("[sweep] values required for axis = temperature")
        grid = opt.temperature_curves(
            params, values, (lo, hi), n_omega,
            global_phi=global_phi or cfg.get("sweep", "global_phi"),
            g_eff=g_eff)
        names = ("temperature_k", "omega_over_omega_b")
    else:  # pragma: no cover - schema rejects other tokens
        raise ConfigError(f"unsupported sweep axis {axis!r}")

    header = [names[0], names[1], "S", "S_dB", "above_vacuum", "stable"]
    if grid.phi_opt_over_pi is not None:
        header.append("phi_opt_over_pi")
    csv_path = os.path.join(out_dir, "sweep.csv")
    nrows, ncols = _write_csv(csv_path, header, _sweep_rows(grid, names))
    report.add_file(csv_path, nrows, ncols)

    # The frequency axis always renders horizontally, as in the figures.
    if "omega" in names[0]:
        xcol, ycol = names
    else:
        xcol, ycol = names[1], names[0]
    script_path = os.path.join(out_dir, "plot_sweep.py")
    script = _PLOT_SCRIPT.format(csv="sweep.csv", xcol=xcol, ycol=ycol,
                                 xlabel=xcol, ylabel=ycol)
    _atomic_write(script_path, script)
    report.add_file(script_path, script.count("\n"), 1)

    loc = grid.min_location()
    report.data["headline"] = {
        "min_S": grid.min_S,
        "min_S_db": float(nsd_db(max(grid.min_S, 1e-300))),
        "at": dict(zip((f"{ax.name}_{ax.unit}" for ax in grid.axes),
                       (float(v) for v in loc))),
    }
    report.write(out_dir)
    return EXIT_OK


def cmd_optimize_phase(cfg: RunConfig, out_dir: str) -> int:
    params, g_eff, op_point, model = _prepare(cfg)
    report = _Report("optimize-phase", cfg)
    report.data["validity"] = _validity_dict(op_point)
    _require_stable_or_exit(model, report, out_dir)

    lo, hi, n_omega = cfg.omega_grid_spec()
    omegas = np.linspace(lo, hi, n_omega) * params.omega_b
    pairs = [opt.optimal_phase(model, w) for w in omegas]
    rows = [(_fmt(w / params.omega_b), _fmt(p / math.pi), _fmt(s),
             _fmt(nsd_db(max(s, 1e-300))))
            for w, (p, s) in zip(omegas, pairs)]
    csv_path = os.path.join(out_dir, "optimal_phase.csv")
    nrows, ncols = _write_csv(
        csv_path, ("omega_over_omega_b", "phi_star_over_pi", "S_min",
                   "S_min_dB"), rows)
    report.add_file(csv_path, nrows, ncols)

    k = int(np.argmin([s for _, s in pairs]))
    report.data["headline"] = {
        "min_S": pairs[k][1],
        "min_S_db": float(nsd_db(max(pairs[k][1], 1e-300))),
        "at_omega_over_omega_b": float(omegas[k] / params.omega_b),
        "at_phi_over_pi": pairs[k][0] / math.pi,
    }
    report.write(out_dir)
    return EXIT_OK


def cmd_stability(cfg: RunConfig, out_dir: str) -> int:
    params, g_eff, op_point, model = _prepare(cfg)
    rep = stability(model)
    report = _Report("stability", cfg)
    report.data["validity"] = _validity_dict(op_point)
    report.data["stability"] = _stability_dict(rep)
    payload = _stability_dict(rep)
    payload["eigenvalues_over_omega_b"] = [
        [ev[0] / params.omega_b, ev[1] / params.omega_b]
        for ev in payload["eigenvalues"]]
    path = os.path.join(out_dir, "stability.json")
    _atomic_write(path, json.dumps(payload, indent=2) + "\n")
    report.add_file(path, len(payload["eigenvalues"]), 2)
    report.data["headline"] = {"stable": rep.stable, "margin": rep.margin}
    report.write(out_dir)
    return EXIT_OK


def _threshold_payload(result: opt.ThresholdResult, scale: float,
                       unit: str) -> dict:
    return {
        "threshold": result.threshold * scale,
        "unit": unit,
        "bracket": [result.bracket[0] * scale, result.bracket[1] * scale],
        "iterations": result.iterations,
        "at_threshold": result.at_threshold,
    }


def cmd_threshold(cfg: RunConfig, out_dir: str) -> int:
    params = cfg.physical_params()
    report = _Report("threshold", cfg)
    bracket_mw = cfg.get("threshold", "power_bracket_mw")
    bracket = (bracket_mw[0] * 1e-3, bracket_mw[1] * 1e-3)
    fixed = opt.power_threshold(params, bracket, self_consistent=False)
    shifted = opt.power_threshold(params, bracket, self_consistent=True)
    payload = {
        "fixed_detuning": _threshold_payload(fixed, 1e3, "mW"),
        "self_consistent_detuning": _threshold_payload(shifted, 1e3, "mW"),
    }
    path = os.path.join(out_dir, "threshold.json")
    _atomic_write(path, json.dumps(payload, indent=2) + "\n")
    report.add_file(path, 2, 1)
    report.data["headline"] = {
        "max_power_mw": fixed.threshold * 1e3,
        "best_db_below_threshold": fixed.at_threshold["db"],
        "self_consistent_max_power_mw": shifted.threshold * 1e3,
    }
    report.write(out_dir)
    return EXIT_OK


def cmd_ceiling(cfg: RunConfig, out_dir: str) -> int:
    params = cfg.physical_params()
    report = _Report("ceiling", cfg)
    bracket = tuple(cfg.get("ceiling", "temperature_bracket_k"))
    resolution = cfg.get("ceiling", "resolution_mk") * 1e-3
    result = opt.temperature_ceiling(params, bracket, resolution=resolution,
                                     g_eff=cfg.g_eff())
    payload = _threshold_payload(result, 1.0, "K")
    path = os.path.join(out_dir, "ceiling.json")
    _atomic_write(path, json.dumps(payload, indent=2) + "\n")
    report.add_file(path, 1, 1)
    report.data["headline"] = {"ceiling_k": result.threshold}
    report.write(out_dir)
    return EXIT_OK


def cmd_params(cfg: RunConfig, out_dir: str) -> int:
    params = cfg.physical_params()
    op_point = operating_point(params, g_eff=cfg.g_eff())
    model = model_from_params(params, g_eff=cfg.g_eff())
    rep = stability(model)
    wb = params.omega_b
    if op_point.steady is not None:
        rabi_hz = op_point.steady.Omega / (2 * math.pi)
        m_mag = abs(op_point.steady.m_avg)
    else:
        rabi_hz = None
        m_mag = abs(op_point.G) / params.G0 if params.G0 > 0 else None
    payload = {
        "n_spins": op_point.n_spins,
        "drive_field_tesla": op_point.drive_field,
        "rabi_frequency_hz": rabi_hz,
        "magnon_amplitude": m_mag,
        "g_eff_over_omega_b": abs(op_point.G) / wb,
        "g_eff_hz": abs(op_point.G) / (2 * math.pi),
        "delta_m_tilde_over_omega_b": op_point.delta_m_tilde / wb,
        "occupations": {
            "n_a": op_point.occupations.n_a,
            "n_m": op_point.occupations.n_m,
            "n_b": op_point.occupations.n_b,
        },
        "kerr_ratio": op_point.kerr_ratio,
        "excitation_ratio": op_point.excitation_ratio,
        "cooperativity": op_point.cooperativity,
        "stability": _stability_dict(rep),
    }
    report = _Report("params", cfg)
    report.data["validity"] = _validity_dict(op_point)
    report.data["stability"] = _stability_dict(rep)
    path = os.path.join(out_dir, "params.json")
    _atomic_write(path, json.dumps(payload, indent=2) + "\n")
    report.add_file(path, len(payload), 1)
    report.data["headline"] = {
        "g_eff_over_omega_b": payload["g_eff_over_omega_b"],
        "stable": rep.stable,
    }
    report.write(out_dir)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out_dir: str, seed: Optional[int]) -> int:
    params = cfg.physical_params()
    if seed is None:
        seed = cfg.get("run", "seed")
    checks = run_checks(params, g_eff=cfg.g_eff(), seed=seed)
    payload = {"seed": seed, "checks": [c.as_dict() for c in checks],
               "all_passed": all(c.passed for c in checks)}
    report = _Report("verify", cfg)
    path = os.path.join(out_dir, "verify.json")
    _atomic_write(path, json.dumps(payload, indent=2) + "\n")
    report.add_file(path, len(checks), 1)
    report.data["headline"] = {"all_passed": payload["all_passed"]}
    report.write(out_dir)
    for check in checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"{status} {check.name}: measured {check.measured:.6g} "
              f"(tolerance {check.tolerance:.6g})")
    return EXIT_OK if payload["all_passed"] else EXIT_VERIFY


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        n1, n2 = text.lower().split("x")
        return int(n1), int(n2)
    except ValueError:
        raise ConfigError(f"--grid expects NxM, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magsqueeze",
        description="Microwave output-field squeezing in cavity "
                    "magnomechanics: spectra, sweeps, and thresholds.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="config file (INI)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=None,
                        help="random seed override")
    common.add_argument("--grid", type=str, default=None, metavar="NxM",
                        help="override grid sizes (omega x phi)")
    common.add_argument("--phi", type=float, default=None, metavar="PHI",
                        help="homodyne phase as a multiple of pi")
    common.add_argument("--global-phi", action="store_true",
                        help="optimize one phase per curve instead of per "
                             "frequency point")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("spectrum", "sweep", "optimize-phase", "stability",
                 "threshold", "ceiling", "params", "verify"):
        sub.add_parser(name, parents=[common])
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    try:
        cfg = load_config(args.config)
        grid_override = _parse_grid(args.grid) if args.grid else None
        phi_override = [args.phi] if args.phi is not None else None
        if args.command == "spectrum":
            return cmd_spectrum(cfg, out_dir, phi_override=phi_override)
        if args.command == "sweep":
            return cmd_sweep(cfg, out_dir, grid_override=grid_override,
                             phi_override=phi_override,
                             global_phi=args.global_phi)
        if args.command == "optimize-phase":
            return cmd_optimize_phase(cfg, out_dir)
        if args.command == "stability":
            return cmd_stability(cfg, out_dir)
        if args.command == "threshold":
            return cmd_threshold(cfg, out_dir)
        if args.command == "ceiling":
            return cmd_ceiling(cfg, out_dir)
        if args.command == "params":
            return cmd_params(cfg, out_dir)
        if args.command == "verify":
            return cmd_verify(cfg, out_dir, seed=args.seed)
        raise AssertionError(args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BracketError as exc:
        print(f"bracket error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"invalid request: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnstableModelError as exc:
        print(f"instability: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE


if __name__ == "__main__":
    sys.exit(main())
