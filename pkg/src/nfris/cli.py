"""Command-line driver.

Each subcommand reads one INI config, writes ``<subcommand>.csv`` (plus any
extra tables) and ``<subcommand>.json`` into the output directory, and prints
the JSON summary with the wall-clock runtime to standard output.  The files
themselves contain no timing so that reruns are byte-identical.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, default_config, parse_config
from .design import (FocalLine, FocalPoint, focus_design, incident_power,
                     line_current_magnitude, line_reflected_power, point_reflected_power,
                     point_source_magnitude, solid_angle)
from .geometry import radiating_near_field_bounds
from .propagation import (capacity, channel_vector, field_x_at_points, normalized_arc_power,
                          received_power_em)
from .quadrature import SurfaceGrid
from .sensing import (ScanGrid, ScanMeasurement, attitude_estimate, attitude_power_profile,
                      build_scan_model, complex_noise, fs_estimate, leading_monotone_segment,
                      ml_estimate, model_phases, noise_stream, peb, reference_power,
                      rmse_harness, sigma_for_snr, signal_jacobian, simulate_scan)
from .special import bessel_j, bessel_y

SUBCOMMANDS = ("design-export", "arc-power", "field-map", "capacity", "sense-location",
               "sense-attitude", "sense-ml", "peb", "rmse", "selftest")

# (x, J0, J1, Y0, Y1), reference values computed at 30 significant digits
BESSEL_TABLE = (
    (0.001, 0.9999997500000156, 0.0004999999375000026, -4.471416611375923, -636.6221672311394),
    (0.5, 0.9384698072408129, 0.2422684576748739, -0.44451873350670656, -1.471472392670243),
    (1.0, 0.7651976865579666, 0.4400505857449335, 0.08825696421567696, -0.7812128213002887),
    (5.0, -0.1775967713143383, -0.32757913759146523, -0.30851762524903376, 0.14786314339122683),
    (11.9, 0.025049441699589562, -0.22898324966192407, -0.22983321394337508, -0.034711498334030526),
    (12.1, 0.06966677360680738, -0.21574897337692478, -0.21843838055092546, -0.07873693145139582),
    (30.0, -0.08636798358104021, -0.11875106261662294, -0.11729573168666403, 0.08442557066174723),
    (500.0, -0.034100556880732, 0.010472613470372294, 0.010506708739831373, 0.03411108062913713),
    (10000.0, -0.0070961603533888015, 0.0036474507555295803, 0.0036478055589866058,
     0.007096342752536495),
)
SELFTEST_TOL = 1e-8


class Output:
    """Collects CSV tables for one run and writes them with a provenance header."""

    def __init__(self, out_dir: Path, cfg: ExperimentConfig, command: str):
        self.dir = out_dir
        self.header = f"# nfris {__version__} config-sha256={cfg.digest()} command={command}"
        self.files: list[str] = []

    def table(self, name: str, columns, rows) -> str:
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / name
        with open(path, "w", newline="") as fh:
            fh.write(self.header + "\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
        self.files.append(path.name)
        return str(path)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return str(v)


def _env(cfg: ExperimentConfig):
    medium = cfg.medium()
    aperture = cfg.aperture()
    wave = cfg.incident_wave()
    spl = cfg["numerics"]["samples_per_wavelength"]
    return medium, aperture, wave, spl, SurfaceGrid(aperture, medium.wavelength, spl)


def _linspace(start, stop, count):
    return np.linspace(start, stop, count) if count > 1 else np.array([float(start)])


# subcommands -------------------------------------------------------------------------

def cmd_design_export(cfg, out: Output) -> dict:
    medium, aperture, wave, spl, grid = _env(cfg)
    blk = cfg["design"]
    design = focus_design(blk["kind"], blk["focus_xyz_m"], aperture, wave, medium, spl)
    x, y = grid.mesh()
    tau, beta = design.evaluate(x, y)
    out.header += " design=" + blk["kind"] + " " + " ".join(
        f"{k}={'%.17g' % v}" for k, v in design.parameters.items())
    rows = zip(x.ravel(), y.ravel(), np.broadcast_to(tau, x.shape).ravel(), beta.ravel())
    out.table("design-export.csv", ["x_m", "y_m", "tau", "beta_rad"], rows)
    return {"kind": design.kind, "parameters": design.parameters,
            "max_tau": float(np.max(tau)), "nodes": int(x.size)}


def cmd_arc_power(cfg, out: Output) -> dict:
    medium, aperture, wave, spl, grid = _env(cfg)
    blk = cfg["arc"]
    focus = blk["focus_xyz_m"]
    d = blk["distance_m"] or math.hypot(focus[1], focus[2])
    theta_deg = _linspace(blk["theta_start_deg"], blk["theta_stop_deg"], blk["theta_count"])
    d_min, d_max = radiating_near_field_bounds(aperture, medium)
    rows, summary = [], {"distance_m": d, "peaks": {},
                         "near_field_bounds_m": {"d_min": d_min, "d_max": d_max}}
    powers = {}
    for kind in blk["kinds"]:
        design = focus_design(kind, focus, aperture, wave, medium, spl)
        powers[kind] = normalized_arc_power(design, grid, d, np.radians(theta_deg), wave, medium)
    ref = max(float(np.max(p)) for p in powers.values())
    for kind, p in powers.items():
        peak = int(np.argmax(p))
        summary["peaks"][kind] = {"theta_deg": float(theta_deg[peak]), "p_n": float(p[peak]),
                                  "db_rel_max": float(10 * np.log10(p[peak] / ref))}
        for th, v in zip(theta_deg, p):
            rows.append((kind, th, v, 10.0 * math.log10(v / ref) if v > 0 else -math.inf))
    out.table("arc-power.csv", ["design", "theta_deg", "p_n", "p_n_db_rel_max"], rows)
    return summary


def cmd_field_map(cfg, out: Output) -> dict:
    medium, aperture, wave, spl, grid = _env(cfg)
    blk = cfg["field_map"]
    design = focus_design(blk["kind"], blk["focus_xyz_m"], aperture, wave, medium, spl)
    ys = _linspace(blk["y_start_m"], blk["y_stop_m"], blk["y_count"])
    zs = _linspace(blk["z_start_m"], blk["z_stop_m"], blk["z_count"])
    yy, zz = np.meshgrid(ys, zs, indexing="ij")
    pts = np.stack([np.zeros(yy.size), yy.ravel(), zz.ravel()], axis=1)
    ex = field_x_at_points(design, grid, pts, wave, medium)
    out.table("field-map.csv", ["y_m", "z_m", "re_Ex", "im_Ex"],
              zip(pts[:, 1], pts[:, 2], ex.real, ex.imag))
    peak = int(np.argmax(np.abs(ex)))
    return {"kind": design.kind, "points": int(ex.size),
            "peak_y_m": float(pts[peak, 1]), "peak_z_m": float(pts[peak, 2])}


def cmd_capacity(cfg, out: Output) -> dict:
    medium, aperture, wave, spl, grid = _env(cfg)
    rx = cfg.receiver()
    blk = cfg["capacity"]
    noise_ref = reference_power(rx, grid, aperture, wave, medium) * wave.tx_power
    rows, powers = [], {}
    for kind in blk["kinds"]:
        design = focus_design(kind, rx.center, aperture, wave, medium, spl)
        fields = field_x_at_points(design, grid, rx.positions(), wave, medium)
        powers[kind] = received_power_em(fields, rx.rx_gain, medium)
        for snr in blk["snr_db"]:
            noise = noise_ref / 10.0 ** (snr / 10.0)
            rows.append((snr, kind, float(capacity(powers[kind], noise))))
    out.table("capacity.csv", ["snr_db", "design", "capacity_bits"], rows)
    return {"received_power_w": powers, "noise_reference_w": noise_ref}


def cmd_sense_location(cfg, out: Output) -> dict:
    medium, aperture, wave, spl, _ = _env(cfg)
    blk = cfg["location"]
    rx = cfg.receiver()
    d = _linspace(blk["d_start_m"], blk["d_stop_m"], blk["d_count"])
    psi_deg = _linspace(blk["psi_start_deg"], blk["psi_stop_deg"], blk["psi_count"])
    grid = ScanGrid.polar(d, np.radians(psi_deg))
    psi0 = math.radians(blk["true_psi_deg"])
    truth = rx.moved(center=(0.0, blk["true_d_m"] * math.cos(psi0), blk["true_d_m"] * math.sin(psi0)))
    sigma = 0.0
    if blk["snr_db"] is not None:
        surface = SurfaceGrid(aperture, medium.wavelength, spl)
        sigma = sigma_for_snr(reference_power(truth, surface, aperture, wave, medium),
                              rx.num_antennas, blk["snr_db"])
    meas = simulate_scan(truth, grid, blk["kind"], sigma, cfg["run"]["seed"], wave, medium,
                         aperture, spl)
    est = fs_estimate(meas, grid)
    energy = np.sum(np.abs(meas.samples) ** 2, axis=1)
    rows = [(grid.coordinates(t)["d"], math.degrees(grid.coordinates(t)["psi"]), energy[t])
            for t in range(grid.size)]
    out.table("sense-location.csv", ["d_m", "psi_deg", "received_energy"], rows)
    co = grid.coordinates(est.index)
    return {"method": "FS", "estimate": {"d_m": co["d"], "psi_deg": math.degrees(co["psi"])},
            "truth": {"d_m": blk["true_d_m"], "psi_deg": blk["true_psi_deg"]},
            "score": est.score, "sigma": sigma, "candidates": grid.size}


def cmd_sense_attitude(cfg, out: Output) -> dict:
    medium, aperture, wave, spl, grid = _env(cfg)
    blk = cfg["attitude"]
    rx = cfg.receiver()
    phi_deg = _linspace(blk["phi_start_deg"], blk["phi_stop_deg"], blk["phi_count"])
    rows, summary = [], {"estimates": {}}
    for kind in blk["kinds"]:
        phis, power = attitude_power_profile(rx, np.radians(phi_deg), kind, aperture, wave,
                                             medium, spl)
        for p, v in zip(phi_deg, power):
            rows.append((kind, p, v))
        seg_phi, seg_p = leading_monotone_segment(phis, power)
        true_phi = math.radians(blk["true_phi_deg"])
        measured = channel_vector(focus_design(kind, rx.center, aperture, wave, medium, spl), grid,
                                  rx.moved(attitude_phi=true_phi), wave, medium).norm2()
        entry = {"dynamic_range_db": float(10 * np.log10(power.max() / power.min())),
                 "monotone_to_deg": float(math.degrees(seg_phi[-1]))}
        if seg_p.size >= 2:
            entry["estimate_deg"] = math.degrees(attitude_estimate(measured, seg_phi, seg_p))
        summary["estimates"][kind] = entry
    out.table("sense-attitude.csv", ["design", "phi_deg", "received_power"], rows)
    summary["true_phi_deg"] = blk["true_phi_deg"]
    return summary


def _scan_setup(cfg):
    medium, aperture, wave, spl, surface = _env(cfg)
    blk = cfg["scan"]
    grid = ScanGrid.cartesian(blk["center_xyz_m"], blk["half_count"], blk["spacing_m"])
    return medium, aperture, wave, spl, surface, blk, grid


def _true_index(blk, grid) -> int:
    n = 2 * blk["half_count"] + 1
    oy, oz = blk["true_offset_steps"]
    iy, iz = blk["half_count"] + oy, blk["half_count"] + oz
    if not (0 <= iy < n and 0 <= iz < n):
        raise ConfigError("scan.true_offset_steps", "offset lies outside the scan grid")
    return iy * n + iz


def cmd_sense_ml(cfg, out: Output) -> dict:
    medium, aperture, wave, spl, surface, blk, grid = _scan_setup(cfg)
    rx = cfg.receiver()
    model = build_scan_model(rx, grid, blk["kind"], aperture, wave, medium, spl)
    t0 = _true_index(blk, grid)
    snr = blk["snr_db"][-1]
    sigma = sigma_for_snr(model.reference_power, rx.num_antennas, snr)
    y = model.signals[t0] + complex_noise(noise_stream(cfg["run"]["seed"], 0),
                                          model.signals[t0].shape, sigma)
    meas = ScanMeasurement(y, sigma, blk["kind"], cfg["run"]["seed"])
    phases = model_phases(model.signals, wave, medium)
    ml = ml_estimate(meas, grid, phases, medium, cfg["numerics"]["n_l"])
    fs = fs_estimate(meas, grid)
    rows = [(name, e.position[1], e.position[2], e.score) for name, e in (("ML", ml), ("FS", fs))]
    rows.append(("truth", grid.points[t0][1], grid.points[t0][2], math.nan))
    out.table("sense-ml.csv", ["method", "y_m", "z_m", "score"], rows)
    return {"snr_db": snr, "sigma": sigma,
            "ml": {"y_m": float(ml.position[1]), "z_m": float(ml.position[2]),
                   "kl": ml.phase_offset, "ambiguous": ml.ambiguous},
            "fs": {"y_m": float(fs.position[1]), "z_m": float(fs.position[2])},
            "truth": {"y_m": float(grid.points[t0][1]), "z_m": float(grid.points[t0][2])}}


def _center_jacobian(cfg, medium, aperture, wave, spl, blk, grid):
    rx = cfg.receiver()
    designs = [focus_design(blk["kind"], p, aperture, wave, medium, spl) for p in grid.points]
    center = grid.points[grid.size // 2]
    return rx.moved(center=center), signal_jacobian(rx.moved(center=center), designs, wave,
                                                    medium, aperture, spl)


def cmd_peb(cfg, out: Output) -> dict:
    medium, aperture, wave, spl, surface, blk, grid = _scan_setup(cfg)
    rx_c, jac = _center_jacobian(cfg, medium, aperture, wave, spl, blk, grid)
    ref = reference_power(rx_c, surface, aperture, wave, medium)
    rows = []
    for snr in blk["snr_db"]:
        sigma = sigma_for_snr(ref, rx_c.num_antennas, snr)
        fisher, bound = peb(jac, sigma, ("y", "z"))
        rows.append((snr, sigma, bound))
    out.table("peb.csv", ["snr_db", "sigma", "peb_m"], rows)
    return {"peb_m": {str(r[0]): r[2] for r in rows}, "candidates": grid.size}


def cmd_rmse(cfg, out: Output) -> dict:
    medium, aperture, wave, spl, surface, blk, grid = _scan_setup(cfg)
    rx = cfg.receiver()
    model = build_scan_model(rx, grid, blk["kind"], aperture, wave, medium, spl)
    _, jac = _center_jacobian(cfg, medium, aperture, wave, spl, blk, grid)
    rows = rmse_harness(model, blk["snr_db"], blk["trials"], cfg["run"]["seed"], wave, medium,
                        cfg["numerics"]["n_l"], peb_jacobian=jac)
    out.table("rmse.csv", ["snr_db", "sigma", "rmse_ml_m", "rmse_fs_m", "peb_m"],
              [(r.snr_db, r.sigma, r.rmse_ml, r.rmse_fs, r.peb) for r in rows])
    return {"rows": [r.__dict__ for r in rows], "trials": blk["trials"],
            "spacing_m": blk["spacing_m"], "candidates": grid.size}


def selftest_checks(cfg: ExperimentConfig) -> list[tuple[str, float, float]]:
    """(name, residual, tolerance) for the built-in oracle comparisons."""
    checks = []
    worst = 0.0
    wronskian = 0.0
    for x, j0, j1, y0, y1 in BESSEL_TABLE:
        got = (bessel_j(0, x), bessel_j(1, x), bessel_y(0, x), bessel_y(1, x))
        worst = max(worst, *(abs(g - r) / max(1.0, abs(r)) for g, r in zip(got, (j0, j1, y0, y1))))
        wronskian = max(wronskian, abs(got[1] * got[2] - got[0] * got[3] - 2.0 / (math.pi * x))
                        * x)
    checks.append(("bessel_reference_table", worst, SELFTEST_TOL))
    checks.append(("bessel_wronskian_scaled", wronskian, 1e-9))
    medium, aperture, wave, spl, grid = _env(cfg)
    focus = cfg["design"]["focus_xyz_m"]
    line = FocalLine(focus[1], focus[2])
    current = line_current_magnitude(aperture, wave, line, medium)
    p_in = incident_power(aperture, wave, medium)
    checks.append(("line_current_power_balance",
                   abs(line_reflected_power(aperture, line, current, medium) - p_in) / p_in, 1e-12))
    point = FocalPoint(*focus)
    omega = solid_angle(aperture, point, grid=grid)
    u1 = point_source_magnitude(aperture, wave, point, medium, omega=omega)
    checks.append(("point_source_power_balance",
                   abs(point_reflected_power(omega, u1, medium) - p_in) / p_in, 1e-12))
    return checks


def cmd_selftest(cfg, out: Output) -> dict:
    checks = selftest_checks(cfg)
    out.table("selftest.csv", ["check", "residual", "tolerance", "pass"],
              [(n, r, t, r < t) for n, r, t in checks])
    return {"passed": all(r < t for _, r, t in checks),
            "checks": {n: {"residual": r, "tolerance": t} for n, r, t in checks}}


COMMANDS = {
    "design-export": cmd_design_export, "arc-power": cmd_arc_power, "field-map": cmd_field_map,
    "capacity": cmd_capacity, "sense-location": cmd_sense_location,
    "sense-attitude": cmd_sense_attitude, "sense-ml": cmd_sense_ml, "peb": cmd_peb,
    "rmse": cmd_rmse, "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nfris", description=(
        "Near-field reflecting-surface simulator: designs, field maps and sensing experiments."))
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("-c", "--config", type=Path, help="INI config file (defaults if omitted)")
        p.add_argument("-o", "--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--seed", type=int, help="override run.seed")
    return parser


def run(command: str, cfg: ExperimentConfig, out_dir: Path) -> tuple[int, dict]:
    out = Output(out_dir, cfg, command)
    summary = COMMANDS[command](cfg, out)
    summary = {"command": command, "seed": cfg["run"]["seed"], "config_sha256": cfg.digest(),
               "files": out.files, **summary}
    out.dir.mkdir(parents=True, exist_ok=True)
    path = out.dir / f"{command}.json"
    summary["files"].append(path.name)
    path.write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json_default) + "\n")
    status = 0 if summary.get("passed", True) else 1
    return status, summary


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = parse_config(args.config.read_text()) if args.config else default_config()
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        status, summary = run(args.command, cfg, args.out)
    except (ConfigError, ValueError, OSError, np.linalg.LinAlgError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, ConfigError):
            err["key"] = exc.key
        print(json.dumps(err), file=sys.stderr)
        return 1
    summary["runtime_s"] = time.perf_counter() - t0
    print(json.dumps(summary, indent=2, sort_keys=True, default=_json_default))
    return status


if __name__ == "__main__":
    sys.exit(main())
