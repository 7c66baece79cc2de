import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from bosonlab.estimates_lab import (
    SLOPE_TOL,
    BoxSpectrum,
    Fit,
    SweepSpec,
    Window,
    bilinear_ratio,
    box_time_norm,
    cube_packet,
    cube_square_sum,
    gaussian_box_packet,
    l2l6_strichartz_ratio,
    localized_strichartz_ratio,
    radial_strichartz_ratio,
    resonant_centers,
    run_sweep,
    summarize,
    trilinear_box,
    trilinear_radial,
)
from bosonlab.propagator import InitialDataSpec, evolve_free, make_initial
from bosonlab.spectral_core import INF, DyadicBand, FourierGrid, RadialField, RadialGrid

RG = RadialGrid(16.0, 512)


def radial(width=0.1, seed=None):
    if seed is None:
        return make_initial(InitialDataSpec(shape="radial-gaussian", width=width, radial=True), RG)
    spec = InitialDataSpec(shape="annulus-random", width=1.0, annulus=(0.5, 8.0), n_waves=16, seed=seed, radial=True)
    return make_initial(spec, RG)


# free-wave harnesses ---------------------------------------------------------------


def test_empty_band_is_skipped():
    zero = RadialField(RG, np.zeros(RG.shape))
    r = radial_strichartz_ratio(zero, 4.0, 1.0, np.linspace(0, 1, 11))
    assert r["skipped"] and r["ratio"] == 0.0


def test_radial_ratio_ignores_phase_and_scale():
    f = radial()
    times = np.linspace(0, 4, 81)
    a = radial_strichartz_ratio(f, 4.0, 1.0, times)
    b = radial_strichartz_ratio(f * (3.0 * np.exp(0.7j)), 4.0, 1.0, times)
    assert b["ratio"] == pytest.approx(a["ratio"], rel=1e-12)
    assert a["ratio"] == pytest.approx(a["raw"] / 4.0, rel=1e-14)


def test_bilinear_swap_on_symmetric_window():
    """S(t) g . S(-t) f is the original product at time -t."""
    f, g = radial(0.1), radial(0.15)
    times = np.linspace(-3, 3, 121)
    a = bilinear_ratio(f, g, 4.0, 4.0, 2.0, 1.0, times)
    b = bilinear_ratio(g, f, 4.0, 4.0, 2.0, 1.0, times)
    assert b["raw"] == pytest.approx(a["raw"], rel=1e-10)
    assert a["ratio"] == pytest.approx(a["raw"] / 2.0, rel=1e-14)
    assert 0.0 <= a["tau_tail"] <= 1.0


def test_trilinear_radial_ignores_phases():
    data = [radial(seed=s) for s in range(4)]
    times = np.linspace(0, 2, 41)
    a = trilinear_radial(data[:3], data[3], (2, 2, 2), 2, 1.0, 1.0, times, 0.1)
    rot = [d * np.exp(1j * t) for d, t in zip(data, (0.3, 0.3, 1.1, 1.1))]
    b = trilinear_radial(rot[:3], rot[3], (2, 2, 2), 2, 1.0, 1.0, times, 0.1)
    assert b["raw"] == pytest.approx(a["raw"], rel=1e-10)
    assert a["ratio"] == pytest.approx(a["raw"] / 4**0.1, rel=1e-12)


# box spectra -------------------------------------------------------------------------


FG = FourierGrid(64, 1.0)


def test_box_norms_match_full_grid():
    f = gaussian_box_packet(1.0, (3.0, 0.0, 1.0), 0.7)
    full = f.to_field(FG)
    cell = FG.volume / FG.N**3
    for t in (0.0, 0.8):
        u = evolve_free(full, t, 1.0).physical()
        l6 = (cell * np.sum(np.abs(u) ** 6)) ** (1 / 6)
        assert box_time_norm(f, [t], 1.0, 6)[0] == pytest.approx(l6, rel=1e-12)
        assert box_time_norm(f, [t], 1.0, INF, oversample=4)[0] == pytest.approx(np.max(np.abs(u)), rel=2e-2)
    assert f.l2_norm() == pytest.approx(full.l2_norm(), rel=1e-12)


def test_box_from_field_roundtrip():
    f = gaussian_box_packet(1.0, (2.0, -1.0, 0.0), 0.5)
    back = BoxSpectrum.from_field(f.to_field(FourierGrid(32, 1.0)))
    assert back.offset == f.offset
    assert np.allclose(back.coeffs, f.coeffs, atol=0, rtol=0)


def test_box_validation():
    with pytest.raises(ValueError):
        BoxSpectrum(1.0, (0, 0, 0), np.zeros((2, 2)))
    f = gaussian_box_packet(1.0, (0.0, 0.0, 0.0), 0.5)
    with pytest.raises(ValueError):
        box_time_norm(f, [0.0], 1.0, 3)
    with pytest.raises(ValueError):
        f.to_field(FourierGrid(8, 2.0))


def test_trilinear_box_matches_full_grid():
    grid = FourierGrid(32, 1.0)
    lam1, lam, m, mu0, eps = 1.0, 2.0, 1.0, 1.0, 0.1
    centers = resonant_centers(lam1, lam, 3)
    data = [gaussian_box_packet(1.0, c, 0.3) for c in centers]
    bands = (lam1, lam, lam)
    times = np.linspace(0, 1.5, 16)
    got = trilinear_box(data[:3], data[3], bands, lam, m, mu0, times, eps)
    fields = [d.project(DyadicBand(b)).to_field(grid) for d, b in zip(data, bands + (lam,))]
    cell = grid.volume / grid.N**3
    vals = []
    for t in times:
        u1, u2, u3, v = (evolve_free(f, t, m).physical() for f in fields)
        phi = grid.potential(u1 * np.conj(u2), mu0)
        vals.append(cell * np.sum(phi * u3 * np.conj(v)))
    ref = trapezoid(np.array(vals), times)
    assert complex(got["value_re"], got["value_im"]) == pytest.approx(ref, rel=1e-10)
    assert got["ratio"] == pytest.approx(got["raw"] / (lam1 * lam) ** (0.5 + eps), rel=1e-12)


def test_resonant_centers_close_the_quadrilateral():
    k1, k2, k3, k4 = resonant_centers(1.0, 8.0, 5)
    assert np.allclose(k1 - k2, k4 - k3)
    assert np.linalg.norm(k2) == pytest.approx(8.0) and np.linalg.norm(k3) == pytest.approx(8.0)
    assert float(k2 @ k3) == pytest.approx(32.0)


def test_cube_sum_bounds_each_term():
    f = gaussian_box_packet(2.0, (8.0, 0.0, 0.0), 1.0)
    r = cube_square_sum(f, 8.0, 2.0, 1.0, 0.1, np.linspace(0, 2, 21))
    assert r["n_cubes"] > 1
    assert r["raw"] >= r["max_term"] > 0


def test_cube_packet_lives_in_its_cube():
    f = cube_packet(2.0, 4.0, (1, 0, -1))
    assert f.occupied_cubes(4.0) == [(1, 0, -1)]


def test_linear_box_harness_guards():
    f = gaussian_box_packet(2.0, (4.0, 0.0, 0.0), 0.5)
    with pytest.raises(ValueError):
        l2l6_strichartz_ratio(f, 4.0, 0.0, np.linspace(0, 1, 5))
    with pytest.raises(ValueError):
        localized_strichartz_ratio(f, 4.0, 8.0, (0, 0, 0), 1.0, 0.1, np.linspace(0, 1, 5))
    empty = localized_strichartz_ratio(f, 4.0, 1.0, (-5, -5, -5), 1.0, 0.1, np.linspace(0, 1, 5))
    assert empty["skipped"]


# specs, fits and verdicts --------------------------------------------------------------


def test_window_times():
    w = Window(T=2.0, dt=0.5)
    assert np.allclose(w.times(), [0, 0.5, 1, 1.5, 2])
    s = Window(T=1.0, dt=0.5, symmetric=True).times()
    assert np.allclose(s, [-1, -0.5, 0, 0.5, 1])
    scaled = Window(T=0.0, T_per_scale=4.0, n_samples=8, dt=0.0)
    assert scaled.length(2.0) == 8.0 and scaled.times(2.0).size == 9
    assert Window(T=1.0, dt=0.0, dt_per_inverse_scale=0.5).times(4.0).size == 9


@pytest.mark.parametrize("bad", [dict(T=0.0), dict(T=-1.0), dict(dt=0.0)])
def test_window_validation(bad):
    with pytest.raises(ValueError):
        Window(**bad)


@pytest.mark.parametrize(
    "bad",
    [dict(estimate="quadrilinear"), dict(seeds=()), dict(lams=(3,)), dict(cutoff="soft"),
     dict(ensemble="uniform"), dict(width_range=(0.2, 0.1)), dict(masses=(-1.0,))],
)
def test_sweep_spec_validation(bad):
    with pytest.raises(ValueError):
        SweepSpec(**({"estimate": "bilinear"} | bad))


def test_fit_recovers_power_law():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    fit = Fit.of(x, 3 * x**1.5)
    assert fit.slope == pytest.approx(1.5) and fit.intercept == pytest.approx(math.log(3))
    assert fit.resid < 1e-12
    assert math.isnan(Fit.of([2.0], [1.0]).slope)


def _rows(ratio_slope, raw_slope):
    return [{"lam": l, "raw": l**raw_slope, "ratio": l**ratio_slope, "skipped": False} for l in (1, 2, 4, 8)]


def test_verdicts():
    assert summarize("bilinear", "lam", _rows(0.0, 1.0), {}).verdict == "bounded"
    assert summarize("bilinear", "lam", _rows(SLOPE_TOL + 0.1, 1.0), {}).verdict == "growth-consistent"
    assert summarize("bilinear", "lam", _rows(1.0, 2.0), {}).verdict == "violation"
    rows = _rows(0.0, 1.0) + [{"lam": 16, "raw": 0.0, "ratio": 0.0, "skipped": True}]
    rep = summarize("bilinear", "lam", rows, {})
    assert rep.flags["skipped"] == 1 and rep.verdict == "bounded"
    assert rep.csv().splitlines()[0].startswith("estimate,lam,raw,ratio")


def test_small_sweeps_run():
    spec = SweepSpec(estimate="radial-strichartz", lams=(1, 2), masses=(1.0,), R=16.0, N_r=256,
                     data_width=0.2, window=Window(T=2.0, dt=0.05))
    rep = run_sweep(spec)
    assert len(rep.rows) == 2 and rep.verdict in ("bounded", "growth-consistent", "violation")
    assert rep.to_dict()["spec"]["lams"] == (1, 2)
    spec = SweepSpec(estimate="bilinear", lam1s=(2,), lam2s=(2,), mus=(1, 2), seeds=(0, 1), masses=(1.0,),
                     R=16.0, N_r=256, window=Window(T=1.0, dt=0.05))
    rep = run_sweep(spec)
    assert len(rep.rows) == 4 and "max_over_median" in rep.extra
