"""End-to-end acceptance checks.

Each test prints exactly one ``criterion N PASS|FAIL`` line (collected again in
the pytest terminal summary) and then asserts the same condition.  Run the file
directly with ``python tests/test_acceptance.py`` to get only those lines.
"""
import math
import sys
from pathlib import Path

import mpmath
import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
from tests_support import report  # noqa: E402

from nfris.cli import main  # noqa: E402
from nfris.config import default_config  # noqa: E402
from nfris.design import (FocalLine, FocalPoint, focus_design, incident_power,  # noqa: E402
                          line_current_magnitude, line_reflected_power, point_reflected_power,
                          point_source_magnitude, solid_angle)
from nfris.geometry import IncidentWave, RisAperture, radiating_near_field_bounds  # noqa: E402
from nfris.propagation import (channel_vector, field_x_at_points, normalized_arc_power,  # noqa
                               received_power, received_power_em)
from nfris.quadrature import SurfaceGrid  # noqa: E402
from nfris.sensing import (ScanGrid, attitude_power_profile, fs_estimate, peb,  # noqa: E402
                           scan_signals, signal_jacobian, simulate_scan)
from nfris.special import bessel_j, bessel_y  # noqa: E402

CFG = default_config()
MEDIUM = CFG.medium()
LAM = MEDIUM.wavelength
APERTURE = CFG.aperture()
WAVE = CFG.incident_wave()
RECEIVER = CFG.receiver()
SURFACE = SurfaceGrid(APERTURE, LAM, CFG["numerics"]["samples_per_wavelength"])
THETA_DEG = np.linspace(1.0, 89.0, 881)
FOCAL_STEPS = (80, 180, 280)


def _main_lobe_width_deg(theta_deg, power):
    """Width of the contiguous region around the peak that stays above half power."""
    db = 10 * np.log10(power / power.max())
    i = int(np.argmax(power))
    lo = i
    while lo > 0 and db[lo - 1] >= -3.0:
        lo -= 1
    hi = i
    while hi < db.size - 1 and db[hi + 1] >= -3.0:
        hi += 1
    # interpolate the -3 dB crossings between grid samples
    left = theta_deg[lo] if lo == 0 else np.interp(-3.0, [db[lo - 1], db[lo]],
                                                    [theta_deg[lo - 1], theta_deg[lo]])
    right = theta_deg[hi] if hi == db.size - 1 else np.interp(-3.0, [db[hi + 1], db[hi]],
                                                              [theta_deg[hi + 1], theta_deg[hi]])
    return float(right - left)


@pytest.fixture(scope="module")
def arcs():
    out = {}
    for steps in FOCAL_STEPS:
        focus = (0.0, steps * LAM, steps * LAM)
        dist = math.hypot(focus[1], focus[2])
        out[steps] = {kind: normalized_arc_power(focus_design(kind, focus, APERTURE, WAVE, MEDIUM),
                                                 SURFACE, dist, np.radians(THETA_DEG), WAVE,
                                                 MEDIUM)
                      for kind in ("cylindrical", "planar")}
    return out


def test_criterion_1_near_field_bounds():
    d_min, d_max = radiating_near_field_bounds(APERTURE, MEDIUM)
    ok = abs(d_min / LAM - 93.263) <= 0.01 and d_max == 1600 * LAM
    report(1, "near-field bounds", ok, f"d_min={d_min / LAM:.4f} lambda, d_max={d_max / LAM:.6g} lambda")
    assert ok


def test_criterion_2_arc_power(arcs):
    base = arcs[80]
    cyl_peak = THETA_DEG[int(np.argmax(base["cylindrical"]))]
    gap_db = 10 * math.log10(base["cylindrical"].max() / base["planar"].max())
    ok_a = abs(cyl_peak - 45.0) <= 0.5
    ok_b = abs(gap_db - 8.53) <= 0.5
    far_peaks = [THETA_DEG[int(np.argmax(arcs[s]["cylindrical"]))] for s in FOCAL_STEPS[1:]]
    widths = [_main_lobe_width_deg(THETA_DEG, arcs[s]["planar"]) for s in FOCAL_STEPS]
    ok_c = all(abs(p - 45.0) <= 0.5 for p in far_peaks) and all(
        b < a for a, b in zip(widths, widths[1:]))
    ok = ok_a and ok_b and ok_c
    report(2, "arc power", ok,
           f"(a) {'ok' if ok_a else 'FAIL'} cyl peak {cyl_peak:.1f} deg; "
           f"(b) {'ok' if ok_b else 'FAIL'} planar below cyl by {gap_db:.2f} dB (target 8.53+-0.5); "
           f"(c) {'ok' if ok_c else 'FAIL'} far cyl peaks {[round(float(p), 1) for p in far_peaks]}"
           f" deg, planar -3 dB widths {[round(w, 2) for w in widths]} deg")
    assert ok


def test_criterion_3_fs_location():
    d = np.arange(94, 301, 2) * LAM
    psi = np.radians(np.arange(1, 90))
    grid = ScanGrid.polar(d, psi)
    truth_index = int(np.where(np.isclose(d, 180 * LAM))[0][0]) * psi.size + 66
    truth = RECEIVER.moved(center=grid.points[truth_index])
    meas = simulate_scan(truth, grid, "cylindrical", 0.0, 1, WAVE, MEDIUM, APERTURE)
    est = fs_estimate(meas, grid)
    co = grid.coordinates(est.index)
    ok = est.index == truth_index
    report(3, "noiseless FS scan", ok,
           f"estimate ({co['d'] / LAM:.6g} lambda, {math.degrees(co['psi']):.6g} deg), "
           f"truth (180 lambda, 67 deg), {grid.size} candidates")
    assert ok


def test_criterion_4_attitude_profiles():
    phis = np.radians(np.arange(0.0, 86.0, 5.0))
    ranges = {}
    cyl_ok = True
    first_rise = []
    for steps in FOCAL_STEPS:
        rx = RECEIVER.moved(center=(0.0, steps * LAM, steps * LAM))
        for kind in ("cylindrical", "planar"):
            _, p = attitude_power_profile(rx, phis, kind, APERTURE, WAVE, MEDIUM)
            ranges[steps, kind] = 10 * math.log10(p.max() / p.min())
            if kind == "cylindrical":
                rises = np.where(np.diff(p) > 0)[0]
                if int(np.argmax(p)) != 0 or rises.size:
                    cyl_ok = False
                first_rise.append(None if rises.size == 0 else float(np.degrees(phis[rises[0] + 1])))
    dyn_ok = all(ranges[s, "cylindrical"] > ranges[s, "planar"] for s in FOCAL_STEPS)
    dist_ok = all(ranges[a, "cylindrical"] > ranges[b, "cylindrical"]
                  for a, b in zip(FOCAL_STEPS, FOCAL_STEPS[1:]))
    ok = cyl_ok and dyn_ok and dist_ok
    report(4, "attitude profiles", ok,
           f"cyl argmax 0 and non-increasing {'ok' if cyl_ok else 'FAIL'} "
           f"(first rise at {first_rise} deg); "
           f"cyl range > planar {'ok' if dyn_ok else 'FAIL'}; "
           f"range grows closer {'ok' if dist_ok else 'FAIL'}; ranges dB "
           + ", ".join(f"{s}:{ranges[s, 'cylindrical']:.1f}/{ranges[s, 'planar']:.1f}"
                       for s in FOCAL_STEPS))
    assert ok


def test_criterion_5_special_functions():
    mpmath.mp.dps = 30
    xs = np.logspace(-3, 4, 200)
    worst = 0.0
    for n in (0, 1):
        for f, ref in ((bessel_j, mpmath.besselj), (bessel_y, mpmath.bessely)):
            got = f(n, xs)
            want = np.array([float(ref(n, mpmath.mpf(float(x)))) for x in xs])
            worst = max(worst, float(np.max(np.abs(got - want))))
    wr = bessel_j(1, xs) * bessel_y(0, xs) - bessel_j(0, xs) * bessel_y(1, xs) - 2 / (np.pi * xs)
    wronskian = float(np.max(np.abs(wr)))
    ok = worst < 1e-8 and wronskian < 1e-9
    report(5, "special functions", ok,
           f"max abs error {worst:.2e} (<1e-8), Wronskian residual {wronskian:.2e} (<1e-9)")
    assert ok


def test_criterion_6_power_conservation():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(200):
        a, b = rng.uniform(0.2, 5.0, 2)
        ap = RisAperture(a, b)
        wave = IncidentWave(rng.uniform(0, 1.4), e0=rng.uniform(0.1, 10))
        p_in = incident_power(ap, wave, MEDIUM)
        line = FocalLine(rng.uniform(-20, 20), rng.uniform(0.5, 50))
        cur = line_current_magnitude(ap, wave, line, MEDIUM)
        worst = max(worst, abs(line_reflected_power(ap, line, cur, MEDIUM) - p_in) / p_in)
        omega = rng.uniform(0.05, 2 * math.pi)
        u1 = point_source_magnitude(ap, wave, FocalPoint(0, 0, 1.0), MEDIUM, omega=omega)
        worst = max(worst, abs(point_reflected_power(omega, u1, MEDIUM) - p_in) / p_in)
    h = 2.0
    exact = 4 * math.atan(APERTURE.area / (4 * h * math.sqrt(
        h * h + (APERTURE.length_x / 2) ** 2 + (APERTURE.length_y / 2) ** 2)))
    omega = solid_angle(APERTURE, FocalPoint(0.0, 0.0, h), grid=SURFACE)
    rel = abs(omega - exact) / exact
    ok = worst < 1e-12 and rel < 1e-3
    report(6, "power conservation", ok,
           f"worst balance residual {worst:.1e} (<1e-12), solid angle {omega:.6f} vs "
           f"{exact:.6f} rel {rel:.1e} (<1e-3)")
    assert ok


def test_criterion_7_channel_em_compatibility():
    worst = 0.0
    for kind in ("cylindrical", "planar"):
        design = focus_design(kind, RECEIVER.center, APERTURE, WAVE, MEDIUM)
        p_ch = received_power(channel_vector(design, SURFACE, RECEIVER, WAVE, MEDIUM), WAVE.tx_power)
        fields = field_x_at_points(design, SURFACE, RECEIVER.positions(), WAVE, MEDIUM)
        p_em = received_power_em(fields, RECEIVER.rx_gain, MEDIUM)
        worst = max(worst, abs(p_ch - p_em) / p_ch)
    ok = worst < 0.01
    report(7, "channel vs EM received power", ok, f"worst relative gap {worst:.1e} (<1e-2)")
    assert ok


def test_criterion_8_jacobian_and_bound():
    rng = np.random.default_rng(8)
    designs = [focus_design("cylindrical", (0.0, 8.0 + dy, 8.0 - dy), APERTURE, WAVE, MEDIUM)
               for dy in (-0.2, 0.0, 0.2)]
    step = 1e-5
    worst = 0.0
    sym_ok = psd_ok = halve_ok = True
    for _ in range(10):
        center = (rng.uniform(-0.5, 0.5), rng.uniform(4.0, 14.0), rng.uniform(4.0, 14.0))
        rx = RECEIVER.moved(center=center)
        jac = signal_jacobian(rx, designs, WAVE, MEDIUM, APERTURE)
        fd = np.empty_like(jac)
        for i in range(3):
            e = np.zeros(3)
            e[i] = step
            plus = scan_signals(rx.moved(center=np.add(center, e)), designs, SURFACE, WAVE, MEDIUM)
            minus = scan_signals(rx.moved(center=np.subtract(center, e)), designs, SURFACE, WAVE,
                                 MEDIUM)
            fd[i] = (plus - minus) / (2 * step)
        worst = max(worst, float(np.linalg.norm(fd - jac) / np.linalg.norm(jac)))
        sigma = 1e-6
        f1, b1 = peb(jac, sigma)
        _, b2 = peb(jac, sigma / 2)
        sym_ok &= bool(np.array_equal(f1.entries, f1.entries.T))
        psd_ok &= bool(np.all(f1.eigenvalues() >= 0))
        halve_ok &= abs(b2 - b1 / 2) <= 1e-12 * b1
    ok = worst < 1e-4 and sym_ok and psd_ok and halve_ok
    report(8, "Jacobian and Fisher matrix", ok,
           f"worst FD relative error {worst:.1e} (<1e-4), symmetric {sym_ok}, PSD {psd_ok}, "
           f"PEB halves with sigma {halve_ok}")
    assert ok


@pytest.fixture(scope="module")
def rmse_runs(tmp_path_factory):
    dirs = []
    for name in ("first", "second"):
        out = tmp_path_factory.mktemp(f"rmse_{name}")
        status = main(["rmse", "-o", str(out), "--seed", "2024"])
        dirs.append((status, out))
    return dirs


def _read_rmse(path):
    rows = [line.split(",") for line in path.read_text().splitlines()[2:]]
    return [{"snr": float(r[0]), "ml": float(r[2]), "fs": float(r[3]), "peb": float(r[4])}
            for r in rows]


def test_criterion_9_ml_fs_monte_carlo(rmse_runs):
    status, out = rmse_runs[0]
    rows = _read_rmse(out / "rmse.csv")
    spacing = CFG["scan"]["spacing_m"]
    ml_vs_fs = all(r["ml"] <= r["fs"] for r in rows)
    ml_down = all(b["ml"] <= a["ml"] for a, b in zip(rows, rows[1:]))
    at20 = [r for r in rows if r["snr"] == 20.0][0]
    above_bound = at20["ml"] >= 0.8 * at20["peb"]
    ok = status == 0 and ml_vs_fs and ml_down and above_bound
    report(9, "ML/FS Monte Carlo", ok,
           f"RMSE/step ML {[round(r['ml'] / spacing, 3) for r in rows]}, "
           f"FS {[round(r['fs'] / spacing, 3) for r in rows]}, "
           f"PEB {[round(r['peb'] / spacing, 3) for r in rows]} at SNR "
           f"{[r['snr'] for r in rows]} dB; ML<=FS {ml_vs_fs}, ML non-increasing {ml_down}, "
           f"ML>=0.8 PEB at 20 dB {above_bound}")
    assert ok


def test_criterion_10_determinism(rmse_runs):
    (s1, d1), (s2, d2) = rmse_runs
    f1 = {p.name: p.read_bytes() for p in sorted(d1.iterdir())}
    f2 = {p.name: p.read_bytes() for p in sorted(d2.iterdir())}
    ok = s1 == s2 == 0 and f1 == f2 and len(f1) > 0
    report(10, "determinism", ok, f"files {sorted(f1)} byte-identical across two runs: {f1 == f2}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
