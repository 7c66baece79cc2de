"""End-to-end acceptance criteria, one test per criterion.

Every test prints (and records for the terminal summary) a single
``[PASS]`` / ``[FAIL]`` line.  Configs live in ``configs/acceptance`` and
are run through the CLI, so the same artifacts feed the determinism check.
"""
from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from bosonlab.cli import load_config
from bosonlab.dirac import dirac_projections, initial_spinor, run_dirac, split_spinor
from bosonlab.estimates_lab import (
    SLOPE_TOL,
    gaussian_box_packet,
    trilinear_box,
    trilinear_radial,
)
from bosonlab.kernel_reduction import RadialProfile, oracle_I, reduce_I
from bosonlab.propagator import InitialDataSpec, evolve_free, make_initial
from bosonlab.solver import initial_field, rescale_trajectory, residual, run
from bosonlab.spectral_core import FourierGrid, RadialGrid, SpectralField, RadialField, japanese

from conftest import ACCEPTANCE_DIR

pytestmark = pytest.mark.acceptance


def config(name: str):
    return load_config(ACCEPTANCE_DIR / f"{name}.toml")


def _fit_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


# --------------------------------------------------------------------------


def test_c01_conservation(acceptance_runs, criterion):
    parts, ok = [], True
    for m in (0, 1):
        coarse = acceptance_runs.get(f"c01_conservation_m{m}_dt001")
        fine = acceptance_runs.get(f"c01_conservation_m{m}_dt0005")
        assert coarse["status"] == fine["status"] == 0
        dm, de = coarse["result"]["relative_mass_drift"], coarse["result"]["relative_energy_drift"]
        dm2, de2 = fine["result"]["relative_mass_drift"], fine["result"]["relative_energy_drift"]
        shrink_m = dm / dm2 if dm2 > 0 else math.inf
        shrink_e = de / de2 if de2 > 0 else math.inf
        wall = max(coarse["wall"], fine["wall"])
        ok &= dm <= 1e-8 and de <= 1e-5 and shrink_m >= 3.5 and shrink_e >= 3.5 and wall <= 60
        parts.append(f"m={m} mass {dm:.2e} (x{shrink_m:.1f}) energy {de:.2e} (x{shrink_e:.1f}) {wall:.1f}s")
    criterion(1, ok, "conservation; " + "; ".join(parts))
    assert ok


def test_c02_free_limit_and_unitarity(acceptance_runs, criterion):
    cfg = config("c02_free_limit")
    sim = cfg.payload.build(cfg.seed)
    traj = run(sim)
    f = initial_field(sim)
    norm = f.l2_norm()
    free_err = max(
        np.sqrt(sim.grid.modal_weight * np.sum(np.abs(c - evolve_free(f, t, sim.m).coeffs) ** 2)) / norm
        for t, c in zip(traj.times, traj.coeffs)
    )
    # one step from every sample is the exact free step as well
    step_err = max(
        np.max(np.abs(traj.coeffs[j + 1] - traj.coeffs[j] * np.exp(-1j * sim.dt * japanese(sim.grid.kmag, sim.m))))
        / np.max(np.abs(traj.coeffs[j]))
        for j in range(len(traj) - 1)
    )
    rng = np.random.default_rng(0)
    unit_err = 0.0
    fg, rg = FourierGrid(16, 1.0), RadialGrid(20.0, 256)
    for _ in range(4):
        fields = [
            SpectralField(fg, rng.normal(size=fg.shape) + 1j * rng.normal(size=fg.shape)),
            RadialField(rg, rng.normal(size=rg.shape) + 1j * rng.normal(size=rg.shape)),
        ]
        for u in fields:
            for t in (0.1, 1.0, 10.0):
                for m in (0.0, 1.0):
                    unit_err = max(unit_err, abs(evolve_free(u, t, m).l2_norm() / u.l2_norm() - 1))
    cli = acceptance_runs.get("c02_free_limit")["result"]
    mass = np.array(cli["diagnostics"]["mass"])
    const = float(np.max(np.abs(mass - mass[0])) / mass[0])
    ok = free_err <= 1e-13 and step_err <= 1e-13 and unit_err <= 1e-12 and const <= 1e-13
    criterion(2, ok, f"free limit: sample err {free_err:.1e}, per-step err {step_err:.1e}; unitarity {unit_err:.1e}; CLI mass drift {const:.1e}")
    assert ok


def test_c03_contraction(acceptance_runs, criterion):
    a = acceptance_runs.get("c03_picard_d1")
    b = acceptance_runs.get("c03_picard_d2")
    assert a["status"] == b["status"] == 0
    ra, rb = a["result"]["ratios"], b["result"]["ratios"]
    rho_a, rho_b = ra[0], rb[0]
    drop = rho_a / rho_b
    dist = a["result"]["sup_hs_distance_to_rk4"]
    wall = max(a["wall"], b["wall"])
    ok = (
        len(ra) >= 5 and all(r < 0.5 for r in ra[:5]) and not a["result"]["diverged"]
        and 3.5 <= drop <= 4.5 and dist <= 1e-4 and wall <= 120
    )
    criterion(3, ok, f"Picard rho {rho_a:.2e} (delta 1e-2) vs {rho_b:.2e} (delta/2), drop x{drop:.2f}; "
                     f"max of 5 ratios {max(ra[:5]):.2e}; sup H^s to exp-rk4 {dist:.1e}; {wall:.1f}s")
    assert ok


def test_c04_scattering_contrast(acceptance_runs, criterion):
    run_ = acceptance_runs.get("c04_scattering")
    assert run_["status"] == 0
    r = run_["result"]
    ok = r["yukawa_strictly_decreasing"] and r["ratio_strictly_increasing"] and run_["wall"] <= 300
    gy = ", ".join(f"{g:.2e}" for g in r["yukawa"]["dyadic_gaps"])
    ratio = ", ".join(f"{g:.2f}" for g in r["ratio_coulomb_over_yukawa"])
    criterion(4, ok, f"Yukawa gaps [{gy}]; Coulomb/Yukawa [{ratio}]; {run_['wall']:.1f}s")
    assert ok


def test_c05_kernel_reduction(acceptance_runs, criterion):
    run_ = acceptance_runs.get("c05_kernel")
    assert run_["status"] == 0
    rows = run_["result"]["rows"]
    live = [r for r in rows if not r["both_vanish"]]
    worst = max(r["rel_err"] for r in live)
    grid_zero_ok = all(r["reduced"] == 0.0 and r["oracle"] == 0.0 for r in rows if r["both_vanish"])
    # empty-support tuples: phi lies entirely below (tau + |xi|) / 2
    phi, psi = RadialProfile.gaussian(1.5, 0.4), RadialProfile.gaussian(1.2, 0.5)
    empties = [(8.0, 1.0, 0.0), (7.0, 2.0, 1.0), (12.0, 0.5, 1.0)]
    empty_ok = all(reduce_I(phi, psi, t, x, m) == 0.0 and oracle_I(phi, psi, t, x, m).value == 0.0 for t, x, m in empties)
    n_zero = len(rows) - len(live)
    ok = worst <= 0.02 and grid_zero_ok and empty_ok and run_["result"]["all_converged"] and run_["wall"] <= 180
    criterion(5, ok, f"reduce_I vs oracle_I max rel err {worst:.2e} over {len(live)} tuples; "
                     f"exact zeros on {n_zero} grid + {len(empties)} empty-support tuples; {run_['wall']:.1f}s")
    assert ok


def test_c06_bilinear(acceptance_runs, criterion):
    run_ = acceptance_runs.get("c06_bilinear")
    assert run_["status"] == 0
    r = run_["result"]
    ratio_spread = r["extra"]["max_over_median"]
    slope = r["raw_fit"]["slope"]
    tail = r["extra"]["max_tau_tail"]
    ok = ratio_spread <= 3.0 and 0.8 <= slope <= 1.2 and tail <= 1e-3 and run_["wall"] <= 300
    criterion(6, ok, f"bilinear max/median ratio {ratio_spread:.3f}, raw mu-exponent {slope:.3f}, "
                     f"|tau|>8mu tail {tail:.1e}; {run_['wall']:.1f}s")
    assert ok


def test_c07_strichartz(acceptance_runs, criterion):
    rad = acceptance_runs.get("c07_radial_strichartz")
    l6 = acceptance_runs.get("c07_l2l6_strichartz")
    loc = acceptance_runs.get("c07_localized_strichartz")
    assert rad["status"] == l6["status"] == loc["status"] == 0
    s_rad = rad["result"]["raw_fit"]["slope"]
    by_lam = {row["lam"]: row["ratio"] for row in rad["result"]["rows"] if not row["skipped"]}
    uniform = by_lam[64.0] / by_lam[8.0]
    s_l6 = l6["result"]["raw_fit"]["slope"]
    s_loc = loc["result"]["ratio_fit"]["slope"]
    wall = rad["wall"] + l6["wall"] + loc["wall"]
    ok = 0.8 <= s_rad <= 1.1 and uniform <= 2 and 0.7 <= s_l6 <= 0.95 and s_loc <= SLOPE_TOL and wall <= 300
    criterion(7, ok, f"radial L2Linf exponent {s_rad:.3f} (ratio64/ratio8 {uniform:.2f}); L2L6 exponent {s_l6:.3f}; "
                     f"localized ratio mu-slope {s_loc:+.3f}; {wall:.1f}s")
    assert ok


def _invariance_error() -> float:
    """Largest relative change of trilinear bound-ratios under phase rotation and rescaling."""
    worst = 0.0
    rng = np.random.default_rng(3)
    grid = RadialGrid(16.0, 256)
    fs = [make_initial(InitialDataSpec(shape="radial-gaussian", amplitude=1.0, width=w, radial=True), grid) for w in (0.3, 0.4, 0.5, 0.6)]
    times = np.linspace(0.0, 2.0, 41)
    base = trilinear_radial(fs[:3], fs[3], (2, 2, 2), 2, 1.0, 1.0, times, 0.1)["ratio"]
    moved = [f * (c * np.exp(1j * th)) for f, c, th in zip(fs, rng.uniform(0.1, 10, 4), rng.uniform(0, 2 * np.pi, 4))]
    worst = max(worst, abs(trilinear_radial(moved[:3], moved[3], (2, 2, 2), 2, 1.0, 1.0, times, 0.1)["ratio"] / base - 1))
    boxes = [gaussian_box_packet(1.0, c, 1.0) for c in ((1, 0, 0), (0, 2, 0), (0, 0, 2), (1, 1, 1))]
    times = np.linspace(0.0, 2.0, 21)
    base = trilinear_box(boxes[:3], boxes[3], (1, 2, 2), 2, 1.0, 1.0, times, 0.1)["ratio"]
    moved = [b.with_coeffs(b.coeffs * (c * np.exp(1j * th))) for b, c, th in zip(boxes, rng.uniform(0.1, 10, 4), rng.uniform(0, 2 * np.pi, 4))]
    worst = max(worst, abs(trilinear_box(moved[:3], moved[3], (1, 2, 2), 2, 1.0, 1.0, times, 0.1)["ratio"] / base - 1))
    return worst


def test_c08_trilinear(acceptance_runs, criterion):
    rad = acceptance_runs.get("c08_trilinear_radial")
    gen = acceptance_runs.get("c08_trilinear_general")
    foc = acceptance_runs.get("c08_trilinear_focusing")
    assert rad["status"] == gen["status"] == foc["status"] == 0
    s_rad = rad["result"]["ratio_fit"]["slope"]
    s_gen_ratio = gen["result"]["ratio_fit"]["slope"]
    s_gen_raw = gen["result"]["raw_fit"]["slope"]
    inv = _invariance_error()
    ok = s_rad <= SLOPE_TOL and s_gen_ratio <= SLOPE_TOL and s_gen_raw <= 0.7 and inv <= 1e-12
    s_foc = foc["result"]["ratio_fit"]["slope"]
    criterion(8, ok, f"radial-(a) ratio slope {s_rad:+.3f}; general-(b) ratio slope {s_gen_ratio:+.3f}, raw exponent {s_gen_raw:+.2f}; "
                     f"invariance {inv:.1e}; [diagnostic] origin-concentrated radial data ratio slope {s_foc:+.3f}")
    assert ok


def test_c09_variation_norms(acceptance_runs, criterion):
    run_ = acceptance_runs.get("c09_vnorm")
    assert run_["status"] == 0
    r = run_["result"]
    ok = r["max_abs_dp_minus_bruteforce"] == 0.0 and r["monotone_in_p"] and r["free_wave_adapted_v2"] <= 1e-11
    criterion(9, ok, f"DP - brute force max {r['max_abs_dp_minus_bruteforce']:.1e} on 200 paths; "
                     f"V^p monotone {r['monotone_in_p']}; adapted V2 of free wave {r['free_wave_adapted_v2']:.1e}")
    assert ok


def test_c10_dirac(acceptance_runs, criterion):
    rng = np.random.default_rng(10)
    eye = np.eye(4)
    alg = 0.0
    for _ in range(1000):
        xi = rng.normal(size=3) * 10 ** rng.uniform(-2, 2)
        m = float(rng.uniform(0, 3)) if rng.random() > 0.1 else 0.0
        p, q = dirac_projections(xi, m)
        alg = max(alg, np.abs(p @ p - p).max(), np.abs(q @ q - q).max(), np.abs(p @ q).max(), np.abs(q @ p).max(), np.abs(p + q - eye).max())
    run_ = acceptance_runs.get("c10_dirac")
    assert run_["status"] == 0
    drift = run_["result"]["relative_mass_drift"]
    cfg = config("c10_dirac")
    free = replace(cfg.payload.build(cfg.seed), coupling=0.0, T=2.0)
    traj = run_dirac(free)
    plus0, minus0 = split_spinor(initial_spinor(free), free.m)
    omega = japanese(free.grid.kmag, free.m)[None]
    scale = np.max(np.abs(plus0.coeffs + minus0.coeffs))
    split = max(
        max(np.abs(p - np.exp(-1j * t * omega) * plus0.coeffs).max(), np.abs(q - np.exp(1j * t * omega) * minus0.coeffs).max()) / scale
        for t, p, q in zip(traj.times, traj.plus, traj.minus)
    )
    ok = alg <= 1e-14 and drift <= 1e-7 and split <= 1e-13
    criterion(10, ok, f"projection algebra {alg:.1e} on 1000 (xi, m); mass drift {drift:.1e} (T=10); free split err {split:.1e}")
    assert ok


def _scaling_residuals():
    cfg = config("c11_scaling")
    traj = run(cfg.payload.build(cfg.seed))
    scaled = rescale_trajectory(traj, 2.0)
    mu0 = traj.config.mu0
    return residual(traj), residual(scaled, mu0=mu0 / 2), residual(scaled, mu0=2 * mu0)


@pytest.mark.xfail(strict=True, reason="the rescaled solution solves the equation with 2 mu0, not mu0 / 2 (see README)")
def test_c11_scaling_literal(acceptance_runs, criterion):
    assert acceptance_runs.get("c11_scaling")["status"] == 0
    r0, r_half, _ = _scaling_residuals()
    q = r_half / r0
    ok = 0.5 <= q <= 2.0
    criterion(11, ok, f"residual(u) {r0:.3e}; residual(u_2, mu0/2) {r_half:.3e}, ratio {q:.1f} (limit 2); "
                      "expected failure: the scaled potential parameter is 2 mu0")
    assert ok


def test_c11_scaling_corrected():
    r0, _, r_double = _scaling_residuals()
    q = r_double / r0
    print(f"[info] criterion 11 companion: residual(u_2, 2 mu0) / residual(u) = {q:.3f}")
    assert 0.5 <= q <= 2.0


def test_c12_determinism(acceptance_runs, criterion):
    names = acceptance_runs.names()
    mismatched = []
    for name in names:
        first = acceptance_runs.get(name)
        second = acceptance_runs.execute(name, "second")
        if first["status"] != 0 or second["bytes"] != first["bytes"]:
            mismatched.append(name)
    ok = not mismatched
    criterion(12, ok, f"byte-identical result.json for {len(names) - len(mismatched)}/{len(names)} acceptance configs"
                      + (f"; differing: {', '.join(mismatched)}" if mismatched else ""))
    assert ok
