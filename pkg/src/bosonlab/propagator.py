"""Free half-Klein-Gordon flow ``S_m(t) = exp(-i t <D>_m``) and initial data."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .spectral_core import (
    Field,
    FourierGrid,
    RadialField,
    RadialGrid,
    SpectralField,
    japanese,
)


def free_phase(grid, t: float, m: float, sign: int = 1) -> np.ndarray:
    """Multiplier ``exp(-i sign t <xi>_m)`` on the grid's modes."""
    if m < 0:
        raise ValueError(f"mass must be nonnegative, got {m}")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return np.exp(-1j * sign * t * japanese(grid.kmag, m))


def evolve_free(f: Field, t: float, m: float, sign: int = 1) -> Field:
    """Apply ``S_m(sign * t)``; exact, unitary and a group in ``t``."""
    if t == 0:
        return f.with_coeffs(f.coeffs.copy())
    return f.with_coeffs(f.coeffs * free_phase(f.grid, t, m, sign))


def free_samples(f: Field, times: Sequence[float], m: float, sign: int = 1) -> np.ndarray:
    """Stacked modes of ``S_m(sign t) f`` for every ``t`` in ``times``."""
    omega = japanese(f.grid.kmag, m)
    t = np.asarray(times, dtype=float).reshape((-1,) + (1,) * omega.ndim)
    return f.coeffs[None] * np.exp(-1j * sign * t * omega[None])


# --------------------------------------------------------------------------
# initial data
# --------------------------------------------------------------------------

SHAPES = ("gaussian", "plane-wave", "annulus-random", "radial-gaussian")


@dataclass(frozen=True)
class InitialDataSpec:
    """Description of initial data ``f``.

    ``width`` may be a scalar or one value per axis (anisotropic packets).
    ``modulation`` is a carrier frequency vector for ``gaussian`` and the
    integer mode index for ``plane-wave``.  ``annulus-random`` superposes
    ``n_waves`` random waves with ``|k|`` in ``annulus`` under a gaussian
    envelope of ``width``; with ``radial`` the waves are spherical
    (``sin(k r) / (k r)``).
    """

    shape: str = "radial-gaussian"
    amplitude: float = 1.0
    width: float | tuple[float, float, float] = 1.0
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    modulation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    annulus: tuple[float, float] = (1.0, 2.0)
    n_waves: int = 8
    seed: int = 0
    radial: bool = False

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}; expected one of {SHAPES}")
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        if self.shape == "radial-gaussian" and not self.radial:
            object.__setattr__(self, "radial", True)
        if self.radial and self.shape == "plane-wave":
            raise ValueError("plane waves are not radial")


def make_initial(spec: InitialDataSpec, grid: FourierGrid | RadialGrid) -> Field:
    """Sample ``spec`` on ``grid`` and return the field."""
    if isinstance(grid, RadialGrid):
        if not spec.radial:
            raise ValueError(f"shape {spec.shape!r} with radial=False cannot live on a radial grid")
        values = _radial_profile(spec, grid.r)
        return RadialField(grid, grid.forward(values))
    if spec.radial:
        values = _radial_profile(spec, grid.radius(spec.center))
    elif spec.shape == "plane-wave":
        kx, ky, kz = grid.coordinates()
        n = np.asarray(spec.modulation, dtype=float)
        values = spec.amplitude * np.exp(1j * (n[0] * kx + n[1] * ky + n[2] * kz) / grid.L)
    elif spec.shape == "gaussian":
        values = _gaussian_packet(spec, grid)
    else:
        values = _random_waves(spec, grid)
    return SpectralField(grid, grid.forward(values))


def _widths(spec) -> np.ndarray:
    return np.broadcast_to(np.asarray(spec.width, dtype=float), (3,))


def _gaussian_packet(spec, grid: FourierGrid) -> np.ndarray:
    x = grid.coordinates(spec.center)
    wid = _widths(spec)
    env = np.exp(-sum(xi**2 / (2 * w**2) for xi, w in zip(x, wid)))
    k = np.asarray(spec.modulation, dtype=float)
    return spec.amplitude * env * np.exp(1j * sum(ki * xi for ki, xi in zip(k, x)))


def _random_waves(spec, grid: FourierGrid) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    lo, hi = spec.annulus
    x = grid.coordinates(spec.center)
    wid = _widths(spec)
    env = np.exp(-sum(xi**2 / (2 * w**2) for xi, w in zip(x, wid)))
    total = np.zeros(grid.shape, dtype=complex)
    for _ in range(spec.n_waves):
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        k = rng.uniform(lo, hi) * direction
        c = rng.normal() + 1j * rng.normal()
        total += c * np.exp(1j * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2]))
    return spec.amplitude * env * total / math.sqrt(spec.n_waves)


def _radial_profile(spec, r: np.ndarray) -> np.ndarray:
    width = float(np.asarray(spec.width).ravel()[0])
    env = np.exp(-(r**2) / (2 * width**2))
    if spec.shape in ("radial-gaussian", "gaussian"):
        return spec.amplitude * env.astype(complex)
    if spec.shape != "annulus-random":
        raise ValueError(f"shape {spec.shape!r} has no radial version")
    rng = np.random.default_rng(spec.seed)
    lo, hi = spec.annulus
    total = np.zeros(r.shape, dtype=complex)
    for _ in range(spec.n_waves):
        k = rng.uniform(lo, hi)
        c = rng.normal() + 1j * rng.normal()
        total += c * np.sinc(k * r / math.pi)
    return spec.amplitude * env * total / math.sqrt(spec.n_waves)


def embed_radial(f: RadialField, grid: FourierGrid, center=(0.0, 0.0, 0.0)) -> SpectralField:
    """Sample a radial field at ``|x - center|`` of a periodic grid."""
    values = f.grid.evaluate(f.coeffs, grid.radius(center))
    return SpectralField(grid, grid.forward(values))


def is_radial(u: SpectralField, center=(0.0, 0.0, 0.0), tol: float = 1e-12) -> bool:
    """True when samples at equal distance from ``center`` agree to ``tol`` (relative)."""
    vals = u.physical().ravel()
    radii = np.round(u.grid.radius(center).ravel() / u.grid.dx, 9)
    order = np.argsort(radii, kind="stable")
    r_sorted, v_sorted = radii[order], vals[order]
    scale = max(np.max(np.abs(vals)), 1e-300)
    starts = np.flatnonzero(np.diff(np.concatenate([[-1.0], r_sorted])) != 0)
    spread = np.maximum.reduceat(np.abs(v_sorted - np.repeat(v_sorted[starts], np.diff(np.append(starts, v_sorted.size)))), starts)
    return bool(np.max(spread) <= tol * scale)
