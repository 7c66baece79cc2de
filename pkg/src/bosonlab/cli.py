"""Config-driven experiment runner.

Usage::

    bosonlab run experiment.toml [--out DIR] [--threads N] [--seed N]
    bosonlab describe simulate

A config is a TOML file with a top-level ``kind``, an optional ``seed`` and
``out``, and at most one table named after the kind holding its payload.
Unknown keys anywhere are rejected.  Each run writes ``result.json`` (sorted
keys, no timestamps), ``diagnostics.csv`` and ``manifest.json`` (config echo,
versions, wall time) into the output directory.

Exit codes: 0 success, 2 invalid config or arguments, 3 numerical abort.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
import time
from contextlib import nullcontext
from dataclasses import replace
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
import scipy
import scipy.fft
import tomli
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import __version__
from .dirac import DiracConfig, run_dirac
from .estimates_lab import ESTIMATES, SweepSpec, Window, run_sweep
from .kernel_reduction import RadialProfile, kernel_check, rows_csv
from .propagator import SHAPES, InitialDataSpec, free_samples, make_initial
from .solver import (
    CSV_HEADER,
    INTEGRATORS,
    NumericalAbort,
    SimulationConfig,
    picard_iterate,
    run,
    scattering_profile,
)
from .spectral_core import FourierGrid, RadialGrid, sobolev_norm
from .variation_norms import SampledPath, adapted_vp_norm_of, vp_norm, vp_norm_bruteforce

EXIT_OK, EXIT_INVALID, EXIT_ABORT = 0, 2, 3
KINDS = ("simulate", "simulate-dirac", "picard", "estimate-sweep", "kernel-check", "vnorm-check", "scattering-compare")


# --------------------------------------------------------------------------
# config schema
# --------------------------------------------------------------------------


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridModel(Strict):
    kind: Literal["radial", "fourier"] = Field("radial", description="radial sine grid on [0, R] or periodic cube")
    R: float = Field(40.0, gt=0, description="radial box radius")
    N_r: int = Field(512, ge=4, description="radial nodes, spacing R / N_r")
    N: int = Field(32, ge=4, description="periodic points per axis (even)")
    L: float = Field(2.0, gt=0, description="periodic box is [0, 2 pi L)^3")

    def build(self):
        if self.kind == "radial":
            return RadialGrid(self.R, self.N_r)
        return FourierGrid(self.N, self.L)


class InitialModel(Strict):
    shape: Literal[SHAPES] = Field("radial-gaussian", description="initial data family")  # type: ignore[valid-type]
    amplitude: float = Field(0.5, ge=0, description="peak amplitude before any normalization")
    width: float = Field(1.0, gt=0, description="gaussian envelope width")
    center: tuple[float, float, float] = Field((0.0, 0.0, 0.0), description="packet centre (periodic grids)")
    modulation: tuple[float, float, float] = Field((0.0, 0.0, 0.0), description="carrier frequency")
    annulus: tuple[float, float] = Field((1.0, 2.0), description="|k| range of random waves")
    n_waves: int = Field(8, ge=1, description="number of random waves")
    radial: bool = Field(False, description="use spherical waves")

    def build(self, seed: int) -> InitialDataSpec:
        return InitialDataSpec(seed=seed, **self.model_dump())


class SimulateModel(Strict):
    m: float = Field(0.0, ge=0, description="mass in the dispersion <xi>_m = sqrt(m^2 + |xi|^2)")
    mu0: float = Field(1.0, ge=0, description="Yukawa parameter, V^ = 4 pi / (|xi|^2 + mu0^2); 0 is Coulomb")
    s: float = Field(0.5, description="Sobolev index of the H^s diagnostics")
    grid: GridModel = Field(default_factory=GridModel)
    initial: InitialModel = Field(default_factory=InitialModel)
    dt: float = Field(0.01, gt=0, description="time step")
    T: float = Field(1.0, gt=0, description="final time, a multiple of dt")
    integrator: Literal[INTEGRATORS] = Field("exp-rk4", description="time integrator")  # type: ignore[valid-type]
    coupling: float = Field(1.0, description="nonlinear coupling; 0 gives the free flow")
    sample_stride: int = Field(1, ge=1, description="record every n-th step")
    refine_linf: bool = Field(False, description="sup norms on a 2x refined grid")

    _extra: tuple[str, ...] = ()

    def build(self, seed: int, **over) -> SimulationConfig:
        d = self.model_dump(exclude={"grid", "initial", *self._extra})
        d.update(over)
        return SimulationConfig(grid=self.grid.build(), initial=self.initial.build(seed), **d)


class DiracModel(Strict):
    m: float = Field(1.0, ge=0, description="mass")
    mu0: float = Field(1.0, ge=0, description="Yukawa parameter")
    s: float = Field(0.5, description="Sobolev index of diagnostics")
    grid: GridModel = Field(default_factory=lambda: GridModel(kind="fourier"))
    initial: InitialModel = Field(default_factory=lambda: InitialModel(shape="gaussian", amplitude=0.1))
    spinor: tuple[float, float, float, float] = Field((1.0, 0.0, 0.0, 1.0), description="constant spinor multiplying the profile")
    dt: float = Field(0.02, gt=0, description="time step")
    T: float = Field(1.0, gt=0, description="final time")
    coupling: float = Field(1.0, description="coupling lambda")
    sample_stride: int = Field(1, ge=1, description="record every n-th step")

    def build(self, seed: int) -> DiracConfig:
        if self.grid.kind != "fourier":
            raise ValueError("simulate-dirac.grid.kind must be 'fourier'")
        d = self.model_dump(exclude={"grid", "initial"})
        return DiracConfig(grid=self.grid.build(), initial=self.initial.build(seed), **d)


class PicardModel(SimulateModel):
    m: float = Field(1.0, ge=0, description="mass")
    T: float = Field(5.0, gt=0, description="final time")
    sample_stride: int = Field(10, ge=1, description="record every n-th step")
    n_iters: int = Field(6, ge=1, description="Picard iterations")
    delta: float = Field(1e-2, gt=0, description="smallness threshold for the H^s norm of the data")
    normalize: Optional[float] = Field(0.999, gt=0, lt=1, description="rescale the data to this fraction of delta (null keeps the amplitude)")
    compare_rk4: bool = Field(True, description="also run exp-rk4 and report the sup H^s distance")

    _extra = ("n_iters", "normalize", "compare_rk4")


class WindowModel(Strict):
    T: float = Field(16.0, ge=0, description="fixed part of the window length")
    dt: float = Field(0.05, ge=0, description="time step")
    symmetric: bool = Field(False, description="use [-T, T] instead of [0, T]")
    T_per_scale: float = Field(0.0, ge=0, description="extra length per unit of the tuple's natural time scale")
    dt_per_inverse_scale: float = Field(0.0, ge=0, description="step proportional to 1 / scale when positive")
    n_samples: int = Field(0, ge=0, description="fixed sample count when positive")


class SweepModel(Strict):
    estimate: Literal[ESTIMATES] = Field("radial-strichartz", description="estimate id")  # type: ignore[valid-type]
    lams: tuple[float, ...] = Field((1, 2, 4, 8), description="dyadic lambda")
    lam1s: tuple[float, ...] = Field((16,), description="dyadic lambda_1")
    lam2s: tuple[float, ...] = Field((16,), description="dyadic lambda_2")
    lam3s: tuple[float, ...] = Field((16,), description="dyadic lambda_3")
    mus: tuple[float, ...] = Field((1, 2, 4, 8), description="dyadic mu (output band or cube side)")
    masses: tuple[float, ...] = Field((0.0,), description="masses m")
    mu0: float = Field(1.0, ge=0, description="Yukawa parameter (trilinear)")
    eps: float = Field(0.1, gt=0, description="epsilon loss in the bounds")
    window: WindowModel = Field(default_factory=WindowModel)
    n_seeds: int = Field(8, ge=1, description="ensemble size; seeds are seed .. seed + n_seeds - 1")
    cutoff: Literal["smooth", "sharp"] = Field("smooth", description="Littlewood-Paley cutoff kind")
    radial: bool = Field(True, description="radial ensemble (trilinear)")
    R: float = Field(32.0, gt=0, description="radial box radius")
    N_r: int = Field(2048, ge=4, description="radial nodes")
    L: float = Field(2.0, gt=0, description="lattice scale of box spectra")
    N: int = Field(64, ge=4, description="periodic points per axis")
    data_width: float = Field(0.02, gt=0, description="spatial width of radial data")
    refine: bool = Field(True, description="radial sup norms on a refined grid")
    packet_width: float = Field(1.0, gt=0, description="frequency width of box packets")
    ensemble: Literal["radial-gaussian", "annulus-random"] = Field("radial-gaussian", description="bilinear data family")
    width_range: tuple[float, float] = Field((0.05, 0.12), description="log-uniform width range of radial gaussians")

    def build(self, seed: int) -> SweepSpec:
        d = self.model_dump(exclude={"window", "n_seeds"})
        return SweepSpec(window=Window(**self.window.model_dump()), seeds=tuple(range(seed, seed + self.n_seeds)), **d)


class ProfileModel(Strict):
    kind: Literal["gaussian", "indicator", "zero"] = Field("gaussian", description="radial profile family")
    a: float = Field(1.0, description="gaussian centre or indicator left end")
    b: float = Field(0.5, description="gaussian width or indicator right end")

    def build(self) -> RadialProfile:
        if self.kind == "gaussian":
            return RadialProfile.gaussian(self.a, self.b)
        if self.kind == "indicator":
            return RadialProfile.indicator(self.a, self.b)
        return RadialProfile.zero()


class KernelModel(Strict):
    phi: ProfileModel = Field(default_factory=lambda: ProfileModel(a=1.5, b=0.4))
    psi: ProfileModel = Field(default_factory=lambda: ProfileModel(a=1.2, b=0.5))
    taus: tuple[float, ...] = Field((-1.0, 0.0, 0.5, 1.0), description="temporal frequencies tau")
    xis: tuple[float, ...] = Field((0.5, 1.0, 2.0), description="spatial frequency magnitudes")
    masses: tuple[float, ...] = Field((0.0, 1.0), description="masses")
    eps_delta: float = Field(4e-3, gt=0, description="width of the smoothed delta in the oracle")
    tol: float = Field(0.02, gt=0, description="pass threshold on the relative error")


class VnormModel(Strict):
    n_paths: int = Field(200, ge=1, description="random paths compared with brute force")
    K_max: int = Field(12, ge=1, le=16, description="largest number of increments")
    dim: int = Field(3, ge=1, description="complex dimension of path values")
    ps: tuple[float, ...] = Field((2.0, 3.0), description="exponents p")
    grid: GridModel = Field(default_factory=lambda: GridModel(R=20.0, N_r=256))
    initial: InitialModel = Field(default_factory=InitialModel)
    m: float = Field(1.0, ge=0, description="mass of the free-wave check")
    T: float = Field(5.0, gt=0, description="free-wave window")
    n_samples: int = Field(64, ge=2, description="free-wave samples")


class ScatteringModel(Strict):
    m: float = Field(1.0, ge=0, description="mass")
    s: float = Field(0.5, description="Sobolev index of the profile gaps")
    mu0_yukawa: float = Field(1.0, gt=0, description="Yukawa parameter of the screened run")
    grid: GridModel = Field(default_factory=lambda: GridModel(R=160.0, N_r=1024))
    initial: InitialModel = Field(default_factory=lambda: InitialModel(amplitude=0.1))
    dt: float = Field(0.02, gt=0, description="time step")
    T: float = Field(80.0, gt=0, description="final time, at least twice the last dyadic time")
    integrator: Literal[INTEGRATORS] = Field("exp-rk4", description="time integrator")  # type: ignore[valid-type]
    dyadic_times: tuple[float, ...] = Field((5.0, 10.0, 20.0, 40.0), description="times T_k of the gaps ||phi(2 T_k) - phi(T_k)||")


PAYLOADS: dict[str, type[Strict]] = {
    "simulate": SimulateModel,
    "simulate-dirac": DiracModel,
    "picard": PicardModel,
    "estimate-sweep": SweepModel,
    "kernel-check": KernelModel,
    "vnorm-check": VnormModel,
    "scattering-compare": ScatteringModel,
}


class ExperimentFile(BaseModel):
    """Top level of a config file."""

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    kind: Literal[KINDS]  # type: ignore[valid-type]
    seed: int = 0
    out: Optional[str] = None
    simulate: Optional[SimulateModel] = None
    simulate_dirac: Optional[DiracModel] = Field(None, alias="simulate-dirac")
    picard: Optional[PicardModel] = None
    estimate_sweep: Optional[SweepModel] = Field(None, alias="estimate-sweep")
    kernel_check: Optional[KernelModel] = Field(None, alias="kernel-check")
    vnorm_check: Optional[VnormModel] = Field(None, alias="vnorm-check")
    scattering_compare: Optional[ScatteringModel] = Field(None, alias="scattering-compare")

    @model_validator(mode="after")
    def _one_payload(self):
        for name in KINDS:
            if name != self.kind and getattr(self, name.replace("-", "_")) is not None:
                raise ValueError(f"table [{name}] does not belong to kind {self.kind!r}")
        return self

    @property
    def payload(self) -> Strict:
        value = getattr(self, self.kind.replace("-", "_"))
        return PAYLOADS[self.kind]() if value is None else value

    def echo(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, self.kind: self.payload.model_dump(mode="json")}


def load_config(path: str | Path, seed: int | None = None) -> ExperimentFile:
    with open(path, "rb") as fh:
        data = tomli.load(fh)
    if seed is not None:
        data["seed"] = seed
    return ExperimentFile.model_validate(data)


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------


def _clean(x: Any) -> Any:
    """Recursively convert numpy scalars and arrays; non-finite floats become strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _simulate(cfg: ExperimentFile):
    traj = run(cfg.payload.build(cfg.seed))
    result = traj.to_dict()
    result["relative_mass_drift"] = traj.relative_drift("mass")
    result["relative_energy_drift"] = traj.relative_drift("energy")
    return result, traj.diagnostics_csv(), None


def _simulate_dirac(cfg: ExperimentFile):
    traj = run_dirac(cfg.payload.build(cfg.seed))
    rows = list(traj.diagnostics_rows())
    return traj.to_dict(), _csv(CSV_HEADER, ([r[k] for k in CSV_HEADER] for r in rows)), None


def normalized_initial(config: SimulationConfig, fraction: float) -> SimulationConfig:
    """Rescale the amplitude so the (dealiased) data has ``H^s`` norm ``fraction * delta``."""
    f = make_initial(config.initial, config.grid)
    f = f.with_coeffs(f.coeffs * config.grid.dealias_mask)
    norm = sobolev_norm(f, config.s)
    if norm == 0:
        raise ValueError("picard.initial is zero")
    amp = config.initial.amplitude * fraction * config.delta / norm
    return replace(config, initial=replace(config.initial, amplitude=amp))


def _picard(cfg: ExperimentFile):
    p: PicardModel = cfg.payload
    base = p.build(cfg.seed, integrator="exp-rk4")
    if p.normalize is not None:
        base = normalized_initial(base, p.normalize)
    res = picard_iterate(base, p.n_iters)
    result = {
        "config": base.to_dict(),
        "differences": res.differences,
        "ratios": res.ratios,
        "diverged": res.diverged,
    }
    last = res.trajectories[-1]
    if p.compare_rk4:
        ref = run(base)
        weight = (1.0 + base.grid.k2) ** base.s * base.grid.modal_weight
        diff = np.abs(ref.coeffs - last.coeffs) ** 2
        result["sup_hs_distance_to_rk4"] = math.sqrt(float(np.max(np.sum(weight * diff, axis=tuple(range(1, diff.ndim))))))
    diag = _csv(("iteration", "difference", "ratio"), ((k + 1, d, (res.differences[k] / res.differences[k - 1]) if k and res.differences[k - 1] > 0 else "") for k, d in enumerate(res.differences)))
    return result, diag, None


def _estimate_sweep(cfg: ExperimentFile):
    report = run_sweep(cfg.payload.build(cfg.seed))
    return report.to_dict(), report.csv(), None


def _kernel_check(cfg: ExperimentFile):
    k: KernelModel = cfg.payload
    rows = kernel_check(k.phi.build(), k.psi.build(), k.taus, k.xis, k.masses, k.eps_delta)
    worst = max((r.rel_err for r in rows), default=0.0)
    result = {
        "config": cfg.echo(),
        "rows": [r.to_dict() for r in rows],
        "max_rel_err": worst,
        "passed": bool(worst <= k.tol),
        "all_converged": all(r.converged for r in rows),
    }
    abort = None if result["all_converged"] else "oracle quadrature did not converge for some (tau, ximag, m)"
    return result, rows_csv(rows), abort


def _vnorm_check(cfg: ExperimentFile):
    v: VnormModel = cfg.payload
    rng = np.random.default_rng(cfg.seed)
    rows, worst = [], 0.0
    monotone = True
    for n in range(v.n_paths):
        K = int(rng.integers(1, v.K_max + 1))
        times = np.cumsum(rng.uniform(0.1, 1.0, K + 1))
        vals = rng.normal(size=(K + 1, v.dim)) + 1j * rng.normal(size=(K + 1, v.dim))
        path = SampledPath(times, vals)
        d = path.distances()
        norms = {}
        for p in v.ps:
            dp, bf = vp_norm(path, p, d), vp_norm_bruteforce(path, p)
            worst = max(worst, abs(dp - bf))
            norms[p] = dp
            rows.append((n, K, p, dp, bf, dp - bf))
        ps = sorted(norms)
        monotone &= all(norms[a] >= norms[b] * (1 - 1e-12) for a, b in zip(ps, ps[1:]))
    # free waves are constant in the adapted frame
    grid = v.grid.build()
    f = make_initial(v.initial.build(cfg.seed), grid)
    times = np.linspace(0.0, v.T, v.n_samples)
    adapted = adapted_vp_norm_of(times, free_samples(f, times, v.m), grid, v.m, 2.0)
    result = {
        "config": cfg.echo(),
        "max_abs_dp_minus_bruteforce": worst,
        "monotone_in_p": bool(monotone),
        "free_wave_adapted_v2": adapted,
        "free_wave_l2": f.l2_norm(),
    }
    return result, _csv(("path", "K", "p", "dp", "bruteforce", "difference"), rows), None


def scattering_compare(p: ScatteringModel, seed: int = 0) -> dict:
    """Run the same data with Yukawa and Coulomb potentials and compare dyadic profile gaps."""
    stride = int(round(min(p.dyadic_times) / p.dt))
    series = {}
    for label, mu0 in (("yukawa", p.mu0_yukawa), ("coulomb", 0.0)):
        config = SimulationConfig(
            m=p.m, mu0=mu0, s=p.s, grid=p.grid.build(), initial=p.initial.build(seed), dt=p.dt, T=p.T,
            integrator=p.integrator, sample_stride=stride,
        )
        traj = run(config)
        prof = scattering_profile(traj, p.m, p.s, p.dyadic_times)
        series[label] = {"dyadic_gaps": prof.dyadic_gaps, "mass_drift": traj.relative_drift("mass")}
    gy, gc = series["yukawa"]["dyadic_gaps"], series["coulomb"]["dyadic_gaps"]
    ratio = [c / y for c, y in zip(gc, gy)]
    return {
        "dyadic_times": list(p.dyadic_times),
        "yukawa": series["yukawa"],
        "coulomb": series["coulomb"],
        "ratio_coulomb_over_yukawa": ratio,
        "yukawa_strictly_decreasing": bool(all(b < a for a, b in zip(gy, gy[1:]))),
        "ratio_strictly_increasing": bool(all(b > a for a, b in zip(ratio, ratio[1:]))),
    }


def _scattering_compare(cfg: ExperimentFile):
    result = scattering_compare(cfg.payload, cfg.seed)
    result["config"] = cfg.echo()
    rows = zip(result["dyadic_times"], result["yukawa"]["dyadic_gaps"], result["coulomb"]["dyadic_gaps"], result["ratio_coulomb_over_yukawa"])
    return result, _csv(("T_k", "gap_yukawa", "gap_coulomb", "ratio"), rows), None


RUNNERS = {
    "simulate": _simulate,
    "simulate-dirac": _simulate_dirac,
    "picard": _picard,
    "estimate-sweep": _estimate_sweep,
    "kernel-check": _kernel_check,
    "vnorm-check": _vnorm_check,
    "scattering-compare": _scattering_compare,
}


def execute(cfg: ExperimentFile) -> tuple[dict, str, str | None]:
    """Run one experiment; returns (result, diagnostics csv, abort message or None)."""
    result, diag, abort = RUNNERS[cfg.kind](cfg)
    result = dict(result)
    result["experiment"] = cfg.echo()
    return _clean(result), diag, abort


def dump_result(result: dict) -> str:
    return json.dumps(result, sort_keys=True, indent=1) + "\n"


def write_outputs(out: Path, cfg: ExperimentFile, result: dict, diag: str, wall: float, status: int) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "result.json").write_text(dump_result(result))
    (out / "diagnostics.csv").write_text(diag)
    manifest = {
        "config": cfg.echo(),
        "versions": {
            "bosonlab": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "wall_time_s": wall,
        "exit_status": status,
        "files": ["result.json", "diagnostics.csv", "manifest.json"],
    }
    (out / "manifest.json").write_text(json.dumps(_clean(manifest), sort_keys=True, indent=1) + "\n")


def _format_validation(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"])
        lines.append(f"{loc}: {e['msg']}" if loc else e["msg"])
    return "; ".join(lines)


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, args.seed)
    except FileNotFoundError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except tomli.TOMLDecodeError as exc:
        print(f"error: malformed TOML: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValidationError as exc:
        print(f"error: invalid config: {_format_validation(exc)}", file=sys.stderr)
        return EXIT_INVALID
    out = Path(args.out or cfg.out or "results")
    workers = scipy.fft.set_workers(args.threads) if args.threads else nullcontext()
    start = time.perf_counter()
    try:
        with workers:
            result, diag, abort = execute(cfg)
    except NumericalAbort as exc:
        print(f"error: numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except ValueError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    status = EXIT_ABORT if abort else EXIT_OK
    write_outputs(out, cfg, result, diag, time.perf_counter() - start, status)
    if abort:
        print(f"error: numerical abort: {abort}", file=sys.stderr)
    return status


def describe(kind: str) -> str:
    """Schema text for one experiment kind."""
    if kind not in PAYLOADS:
        raise KeyError(kind)
    lines = [f"kind = \"{kind}\"", "seed = 0            # base seed (overridden by --seed)", "out = \"results\"    # output directory (overridden by --out)", "", f"[{kind}]"]
    lines += _describe_model(PAYLOADS[kind], kind)
    if kind == "estimate-sweep":
        lines += ["", "estimate ids: " + ", ".join(ESTIMATES)]
    return "\n".join(lines)


def _describe_model(model: type[BaseModel], prefix: str) -> list[str]:
    lines, nested = [], []
    for name, info in model.model_fields.items():
        default = info.get_default(call_default_factory=True)
        if isinstance(default, BaseModel):
            nested.append((name, type(default)))
            continue
        value = json.dumps(_clean(default))
        lines.append(f"{name} = {value:<14}  # {info.description or ''}".rstrip())
    for name, sub in nested:
        lines += ["", f"[{prefix}.{name}]"] + _describe_model(sub, f"{prefix}.{name}")
    return lines


def cmd_describe(args) -> int:
    try:
        print(describe(args.kind))
    except KeyError:
        print(f"error: unknown kind {args.kind!r}; expected one of {', '.join(KINDS)}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bosonlab", description="Boson star equation laboratory.")
    parser.add_argument("--version", action="version", version=f"bosonlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment described by a TOML config")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("--threads", type=int, help="FFT worker cap")
    p_run.add_argument("--seed", type=int, help="override the config seed")
    p_run.set_defaults(func=cmd_run)
    p_desc = sub.add_parser("describe", help="print the config schema of an experiment kind")
    p_desc.add_argument("kind")
    p_desc.set_defaults(func=cmd_describe)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
