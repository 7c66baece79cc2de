"""Nonlinear evolution of the semi-relativistic Hartree equation.

The equation ``-i u_t + <D>_m u = coupling * (V * |u|^2) u`` is advanced in
the interaction picture ``v(s) = S_m(-s) u(t_n + s)``, where only the
Duhamel integral is approximated:

* ``exp-rk4``   -- classical RK4 on ``v`` (Lawson scheme), local error O(dt^5);
* ``exp-midpoint`` -- implicit midpoint on ``v``, symmetric and exactly
  mass conserving (solved by fixed-point iteration);
* ``picard``    -- iteration of the Duhamel map with trapezoid quadrature
  (see :func:`picard_iterate`).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .propagator import InitialDataSpec, evolve_free, make_initial
from .spectral_core import (
    Field,
    FourierGrid,
    RadialGrid,
    field_for,
    japanese,
    sobolev_norm,
    spatial_norm,
)

INTEGRATORS = ("exp-midpoint", "exp-rk4", "picard")
BLOWUP_FACTOR = 1.10


class NumericalAbort(RuntimeError):
    """Raised by the blow-up guard; ``t`` is the time the step started from."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message if t is None else f"{message} (t = {t:g})")
        self.t = t


@dataclass(frozen=True)
class SimulationConfig:
    m: float = 0.0
    mu0: float = 1.0
    s: float = 0.5
    grid: FourierGrid | RadialGrid = field(default_factory=lambda: RadialGrid(40.0, 512))
    initial: InitialDataSpec = field(default_factory=InitialDataSpec)
    dt: float = 0.01
    T: float = 1.0
    integrator: str = "exp-rk4"
    coupling: float = 1.0
    sample_stride: int = 1
    delta: float = 1e-2
    refine_linf: bool = False

    def __post_init__(self):
        if self.m < 0:
            raise ValueError(f"m must be nonnegative, got {self.m}")
        if self.mu0 < 0:
            raise ValueError(f"mu0 must be nonnegative, got {self.mu0}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.T >= self.dt:
            raise ValueError(f"T must be at least dt, got T={self.T}, dt={self.dt}")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")
        if abs(self.T / self.dt - round(self.T / self.dt)) > 1e-9 * (self.T / self.dt):
            raise ValueError("T must be an integer multiple of dt")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = grid_to_dict(self.grid)
        return d


def grid_to_dict(grid) -> dict:
    if isinstance(grid, RadialGrid):
        return {"kind": "radial", "R": grid.R, "N_r": grid.N_r}
    return {"kind": "fourier", "N": grid.N, "L": grid.L}


# --------------------------------------------------------------------------
# right-hand side
# --------------------------------------------------------------------------


class Dynamics:
    """Precomputed operators for one ``(grid, m, mu0, coupling)``."""

    def __init__(self, grid, m: float, mu0: float, coupling: float = 1.0):
        self.grid, self.m, self.mu0, self.coupling = grid, m, mu0, coupling
        self.omega = japanese(grid.kmag, m)
        self.mask = grid.dealias_mask
        self._phases: dict[float, np.ndarray] = {}

    def phase(self, s: float) -> np.ndarray:
        p = self._phases.get(s)
        if p is None:
            p = self._phases[s] = np.exp(-1j * s * self.omega)
        return p

    def nonlinear(self, coeffs: np.ndarray) -> np.ndarray:
        """Modes of ``D[(V * D|u|^2) u]``."""
        g = self.grid
        u = g.backward(coeffs)
        phi = g.potential(np.abs(u) ** 2, self.mu0)
        return g.forward(phi * u) * self.mask

    def field_ip(self, s: float, v: np.ndarray) -> np.ndarray:
        """Interaction-picture vector field ``i c S(-s) N(S(s) v)``."""
        if s == 0:
            return 1j * self.coupling * self.nonlinear(v)
        p = self.phase(s)
        return 1j * self.coupling * np.conj(p) * self.nonlinear(p * v)

    def step(self, coeffs: np.ndarray, dt: float, integrator: str) -> np.ndarray:
        if self.coupling == 0:
            return self.phase(dt) * coeffs
        if integrator == "exp-rk4":
            v = self._rk4(coeffs, dt)
        elif integrator == "exp-midpoint":
            v = self._midpoint(coeffs, dt)
        else:
            raise ValueError(f"integrator {integrator!r} cannot step")
        return self.phase(dt) * v

    def _rk4(self, v0, h):
        k1 = self.field_ip(0.0, v0)
        k2 = self.field_ip(h / 2, v0 + (h / 2) * k1)
        k3 = self.field_ip(h / 2, v0 + (h / 2) * k2)
        k4 = self.field_ip(h, v0 + h * k3)
        return v0 + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)

    def _midpoint(self, v0, h, tol=1e-15, max_iter=100):
        v1 = v0 + h * self.field_ip(h / 2, v0)
        scale = max(float(np.max(np.abs(v0))), 1e-300)
        for _ in range(max_iter):
            nxt = v0 + h * self.field_ip(h / 2, 0.5 * (v0 + v1))
            change = float(np.max(np.abs(nxt - v1)))
            v1 = nxt
            if change <= tol * scale:
                break
        else:
            raise NumericalAbort("implicit midpoint iteration did not converge")
        return v1


def nonlinearity(u: Field, mu0: float) -> Field:
    """``(V * |u|^2) u`` with 2/3 dealiasing of the density and of the product."""
    return u.with_coeffs(Dynamics(u.grid, 0.0, mu0).nonlinear(u.coeffs))


def step(state: Field, dt: float, config: SimulationConfig) -> Field:
    """One exponential-integrator step of size ``dt`` (negative ``dt`` runs backward)."""
    dyn = Dynamics(state.grid, config.m, config.mu0, config.coupling)
    integrator = config.integrator if config.integrator != "picard" else "exp-rk4"
    new = dyn.step(state.coeffs, dt, integrator)
    _guard(state.coeffs, new, state.grid, None)
    return state.with_coeffs(new)


def _guard(old, new, grid, t):
    n_old = float(np.sum(np.abs(old) ** 2))
    n_new = float(np.sum(np.abs(new) ** 2))
    if not math.isfinite(n_new) or n_new > (BLOWUP_FACTOR**2) * n_old:
        raise NumericalAbort("L2 norm grew by more than 10% in one step", t)


# --------------------------------------------------------------------------
# conserved quantities and diagnostics
# --------------------------------------------------------------------------


def energy_terms(u: Field, m: float, mu0: float) -> tuple[float, float]:
    """``(kinetic, potential)`` with kinetic ``1/2 <u, <D>_m u>`` and potential ``1/4 int (V*|u|^2)|u|^2``."""
    g = u.grid
    kinetic = 0.5 * g.modal_weight * float(np.sum(japanese(g.kmag, m) * np.abs(u.coeffs) ** 2))
    dens = np.abs(g.backward(u.coeffs)) ** 2
    phi = g.potential(dens, mu0)
    quartic = 0.25 * np.sum(g.quad_weights * phi * dens)
    return kinetic, float(np.real(quartic))


def conserved_quantities(u: Field, m: float, mu0: float, coupling: float = 1.0) -> tuple[float, float]:
    """Mass ``int |u|^2`` and the conserved energy ``kinetic - coupling * potential``.

    The sign in front of the potential term is the one the flow of
    ``-i u_t + <D>_m u = coupling (V*|u|^2) u`` actually conserves.
    """
    kinetic, potential = energy_terms(u, m, mu0)
    return u.l2_norm() ** 2, kinetic - coupling * potential


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    energy: float
    hs_norm: float
    linf_norm: float
    profile_gap: float = 0.0


def diagnose(u: Field, t: float, config: SimulationConfig, previous_profile: Field | None = None):
    mass, energy = conserved_quantities(u, config.m, config.mu0, config.coupling)
    profile = evolve_free(u, t, config.m, sign=-1)
    gap = 0.0 if previous_profile is None else sobolev_norm(profile - previous_profile, config.s)
    rec = DiagnosticsRecord(
        t=t,
        mass=mass,
        energy=energy,
        hs_norm=sobolev_norm(u, config.s),
        linf_norm=spatial_norm(u, math.inf, refine=config.refine_linf),
        profile_gap=gap,
    )
    return rec, profile


CSV_HEADER = ("t", "mass", "energy", "hs_norm", "linf_norm", "profile_gap")


@dataclass
class Trajectory:
    """Time samples of one run plus per-sample diagnostics."""

    config: SimulationConfig
    times: np.ndarray
    coeffs: np.ndarray
    diagnostics: list[DiagnosticsRecord]

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    @property
    def grid(self):
        return self.config.grid

    def __len__(self) -> int:
        return len(self.times)

    def field(self, j: int) -> Field:
        return field_for(self.grid, self.coeffs[j])

    @property
    def fields(self) -> list[Field]:
        return [self.field(j) for j in range(len(self))]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(d, name) for d in self.diagnostics])

    def relative_drift(self, name: str) -> float:
        col = self.column(name)
        return float(np.max(np.abs(col - col[0])) / abs(col[0]))

    def to_dict(self, include_fields: bool = False) -> dict:
        out = {
            "config": self.config.to_dict(),
            "times": self.times.tolist(),
            "diagnostics": {name: self.column(name).tolist() for name in CSV_HEADER[1:]},
        }
        if include_fields:
            out["coeffs_real"] = self.coeffs.real.tolist()
            out["coeffs_imag"] = self.coeffs.imag.tolist()
        return out

    def diagnostics_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for d in self.diagnostics:
            writer.writerow([repr(float(getattr(d, name))) for name in CSV_HEADER])
        return buf.getvalue()


# --------------------------------------------------------------------------
# runs
# --------------------------------------------------------------------------


def initial_field(config: SimulationConfig) -> Field:
    f = make_initial(config.initial, config.grid)
    if config.coupling != 0:
        f = f.with_coeffs(f.coeffs * config.grid.dealias_mask)
    return f


def run(config: SimulationConfig, initial: Field | None = None) -> Trajectory:
    """Integrate from 0 to ``T`` and sample every ``sample_stride`` steps."""
    if config.integrator == "picard":
        return picard_iterate(config, 8).trajectories[-1]
    u = initial_field(config) if initial is None else initial
    dyn = Dynamics(config.grid, config.m, config.mu0, config.coupling)
    coeffs = u.coeffs
    times, samples, diags = [0.0], [coeffs], []
    rec, prof = diagnose(u, 0.0, config)
    diags.append(rec)
    for n in range(config.n_steps):
        new = dyn.step(coeffs, config.dt, config.integrator)
        _guard(coeffs, new, config.grid, n * config.dt)
        coeffs = new
        if (n + 1) % config.sample_stride == 0:
            t = (n + 1) * config.dt
            rec, prof = diagnose(field_for(config.grid, coeffs), t, config, prof)
            times.append(t)
            samples.append(coeffs)
            diags.append(rec)
    return Trajectory(config, np.array(times), np.array(samples), diags)


def trajectory_from_samples(config: SimulationConfig, times: Sequence[float], coeffs: np.ndarray) -> Trajectory:
    diags, prof = [], None
    for t, c in zip(times, coeffs):
        rec, prof = diagnose(field_for(config.grid, c), float(t), config, prof)
        diags.append(rec)
    return Trajectory(config, np.asarray(times), np.asarray(coeffs), diags)


@dataclass
class PicardResult:
    trajectories: list[Trajectory]
    differences: list[float]
    diverged: bool

    @property
    def ratios(self) -> list[float]:
        d = self.differences
        return [d[k + 1] / d[k] for k in range(len(d) - 1) if d[k] > 0]


def picard_iterate(config: SimulationConfig, n_iters: int, check_small: bool = True) -> PicardResult:
    """Iterate ``u -> S(t) f + i J(u)`` on the time grid ``n * dt``.

    ``J(u)(t) = int_0^t S(t - t') N(u(t')) dt'`` is evaluated as
    ``S(t) int_0^t S(-t') N(u(t')) dt'`` with the trapezoid rule.
    """
    f = initial_field(config)
    if check_small and sobolev_norm(f, config.s) >= config.delta:
        raise ValueError(
            f"initial data has H^{config.s} norm {sobolev_norm(f, config.s):.3g} >= delta={config.delta}"
        )
    dyn = Dynamics(config.grid, config.m, config.mu0, config.coupling)
    times = np.arange(config.n_steps + 1) * config.dt
    omega = dyn.omega
    phase = lambda t: np.exp(-1j * t * omega)  # noqa: E731
    sobolev_weight = (1.0 + config.grid.k2) ** config.s * config.grid.modal_weight

    current = np.array([phase(t) * f.coeffs for t in times])
    keep = config.sample_stride
    trajectories = [trajectory_from_samples(config, times[::keep], current[::keep])]
    diffs: list[float] = []
    diverged = False
    for _ in range(n_iters):
        integrand = np.array([np.conj(phase(t)) * dyn.nonlinear(c) for t, c in zip(times, current)])
        acc = cumulative_trapezoid(integrand, dx=config.dt, axis=0, initial=0)
        nxt = np.array([phase(t) * (f.coeffs + 1j * config.coupling * a) for t, a in zip(times, acc)])
        diff = np.abs(nxt - current) ** 2
        d = math.sqrt(float(np.max(np.sum(sobolev_weight * diff, axis=tuple(range(1, diff.ndim))))))
        diffs.append(d)
        current = nxt
        trajectories.append(trajectory_from_samples(config, times[::keep], current[::keep]))
        if len(diffs) >= 3 and diffs[-1] > diffs[-2] > diffs[-3]:
            diverged = True
            break
    return PicardResult(trajectories, diffs, diverged)


# --------------------------------------------------------------------------
# residual and scattering
# --------------------------------------------------------------------------


def residual(traj: Trajectory, mu0: float | None = None) -> float:
    """Time-integrated discrete defect ``sum_n dt ||-i d_t u + <D>_m u - c N(u)||_{L2}``.

    Centered differences over interior samples; the samples must be
    uniformly spaced.  ``mu0`` overrides the configured potential parameter.
    """
    if len(traj) < 3:
        raise ValueError("residual needs at least 3 samples")
    cfg = traj.config
    tau = np.diff(traj.times)
    if np.max(np.abs(tau - tau[0])) > 1e-9 * tau[0]:
        raise ValueError("residual needs uniformly spaced samples")
    tau = float(tau[0])
    dyn = Dynamics(cfg.grid, cfg.m, cfg.mu0 if mu0 is None else mu0, cfg.coupling)
    c = traj.coeffs
    total = 0.0
    for n in range(1, len(traj) - 1):
        defect = -1j * (c[n + 1] - c[n - 1]) / (2 * tau) + dyn.omega * c[n]
        if cfg.coupling != 0:
            defect = defect - cfg.coupling * dyn.nonlinear(c[n])
        total += tau * math.sqrt(cfg.grid.modal_weight * float(np.sum(np.abs(defect) ** 2)))
    return total


def rescale_trajectory(traj: Trajectory, lam: float) -> Trajectory:
    """Radial trajectory of ``lam^{3/2} u(lam t, lam x)``; its potential parameter is ``lam * mu0``."""
    cfg = traj.config
    if not isinstance(cfg.grid, RadialGrid):
        raise ValueError("rescaling is implemented for radial trajectories")
    grid = RadialGrid(cfg.grid.R / lam, cfg.grid.N_r)
    new_cfg = replace(cfg, grid=grid, mu0=cfg.mu0 * lam, dt=cfg.dt / lam, T=cfg.T / lam)
    # w = r u on the scaled nodes is lam^{1/2} times the old w; the DST is linear
    return trajectory_from_samples(new_cfg, traj.times / lam, traj.coeffs * math.sqrt(lam))


@dataclass
class ScatteringProfile:
    times: np.ndarray
    profiles: np.ndarray
    gaps: np.ndarray
    dyadic_times: list[float]
    dyadic_gaps: list[float]


def scattering_profile(traj: Trajectory, m: float, s: float, dyadic_times: Sequence[float] | None = None) -> ScatteringProfile:
    """Profiles ``S_m(-t) u(t)``, consecutive ``H^s`` gaps and dyadic gaps ``||phi(2T) - phi(T)||``."""
    grid = traj.grid
    omega = japanese(grid.kmag, m)
    profiles = np.array([np.exp(1j * t * omega) * c for t, c in zip(traj.times, traj.coeffs)])
    weight = (1.0 + grid.k2) ** s * grid.modal_weight
    axes = tuple(range(1, profiles.ndim))

    def hs(x):
        return np.sqrt(np.sum(weight * np.abs(x) ** 2, axis=axes))

    gaps = hs(np.diff(profiles, axis=0))
    if dyadic_times is None:
        t_end = traj.times[-1]
        dyadic_times, T = [], traj.times[1] if len(traj) > 1 else t_end
        while 2 * T <= t_end + 1e-9:
            dyadic_times.append(float(T))
            T *= 2
    dgaps = []
    for T in dyadic_times:
        i, j = _sample_index(traj.times, T), _sample_index(traj.times, 2 * T)
        dgaps.append(float(hs((profiles[j] - profiles[i])[None])[0]))
    return ScatteringProfile(traj.times, profiles, gaps, list(dyadic_times), dgaps)


def _sample_index(times: np.ndarray, t: float) -> int:
    j = int(np.argmin(np.abs(times - t)))
    if abs(times[j] - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"time {t} is not a sample of the trajectory")
    return j
