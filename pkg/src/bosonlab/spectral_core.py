"""Grids, transforms, Fourier multipliers and norms.

Two discretizations share one small interface so the propagator and the
solver can run on either:

* :class:`FourierGrid` -- periodic cube of side ``2*pi*L`` with ``N`` points
  per axis; modes are the coefficients ``c`` of ``u(x) = sum c_xi e^{i xi.x}``
  on the lattice ``xi in Z^3 / L``.
* :class:`RadialGrid` -- ball of radius ``R`` with Dirichlet wall; a radial
  ``u`` is stored through ``w = r u`` and expanded in ``sin(rho_k r)``,
  ``rho_k = k pi / R``.  The Laplacian acts as ``-rho_k**2`` on these modes.

Every grid exposes ``forward`` / ``backward`` (physical values of ``u`` to
modes and back), ``kmag`` (``|xi|`` per mode), ``modal_weight`` (Plancherel
factor), ``quad_weights`` (spatial quadrature weights) and
``potential`` (the Yukawa/Coulomb field of a density).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft
from scipy.integrate import trapezoid

FOUR_PI = 4.0 * math.pi


# --------------------------------------------------------------------------
# periodic grid
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FourierGrid:
    """Periodic cube ``[0, 2 pi L)^3`` sampled with ``N`` points per axis."""

    N: int
    L: float

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or self.N < 8 or self.N % 2:
            raise ValueError(f"N must be an even integer >= 8, got {self.N!r}")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ValueError(f"L must be positive, got {self.L!r}")

    ndim = 3
    kind = "fourier"

    @cached_property
    def index1d(self) -> np.ndarray:
        return np.fft.fftfreq(self.N, 1.0 / self.N).astype(int)

    @cached_property
    def k1d(self) -> np.ndarray:
        return self.index1d / self.L

    @property
    def dk(self) -> float:
        return 1.0 / self.L

    @cached_property
    def frequencies(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        k = self.k1d
        return k[:, None, None], k[None, :, None], k[None, None, :]

    @cached_property
    def k2(self) -> np.ndarray:
        kx, ky, kz = self.frequencies
        return kx**2 + ky**2 + kz**2

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        keep = np.abs(self.index1d) < self.N / 3
        return keep[:, None, None] & keep[None, :, None] & keep[None, None, :]

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.N, self.N, self.N)

    @property
    def volume(self) -> float:
        return (2 * math.pi * self.L) ** 3

    @property
    def dx(self) -> float:
        return 2 * math.pi * self.L / self.N

    @property
    def modal_weight(self) -> float:
        return self.volume

    @property
    def quad_weights(self) -> float:
        return self.volume / self.N**3

    @property
    def nyquist(self) -> float:
        return (self.N // 2) / self.L

    @cached_property
    def x1d(self) -> np.ndarray:
        return np.arange(self.N) * self.dx

    def coordinates(self, center=(0.0, 0.0, 0.0)) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinates, wrapped into ``[-pi L, pi L)`` about ``center``."""
        side = 2 * math.pi * self.L
        out = []
        for axis, c in enumerate(center):
            x = (self.x1d - c + side / 2) % side - side / 2
            shape = [1, 1, 1]
            shape[axis] = self.N
            out.append(x.reshape(shape))
        return tuple(out)

    def radius(self, center=(0.0, 0.0, 0.0)) -> np.ndarray:
        x, y, z = self.coordinates(center)
        return np.sqrt(x**2 + y**2 + z**2)

    def forward(self, values: np.ndarray) -> np.ndarray:
        return sfft.fftn(values, axes=(-3, -2, -1)) / self.N**3

    def backward(self, coeffs: np.ndarray) -> np.ndarray:
        return sfft.ifftn(coeffs, axes=(-3, -2, -1)) * self.N**3

    def refine(self, coeffs: np.ndarray, factor: int = 2) -> np.ndarray:
        """Physical values on a ``factor``-times finer grid (zero padding)."""
        n, m = self.N, self.N * factor
        padded = np.zeros(coeffs.shape[:-3] + (m, m, m), dtype=complex)
        idx = np.where(np.arange(n) < n // 2, np.arange(n), np.arange(n) + m - n)
        padded[..., idx[:, None, None], idx[None, :, None], idx[None, None, :]] = coeffs
        return sfft.ifftn(padded, axes=(-3, -2, -1)) * m**3

    def yukawa_multiplier(self, mu0: float) -> np.ndarray:
        return _yukawa_symbol(self.k2, mu0)

    def potential(self, density: np.ndarray, mu0: float) -> np.ndarray:
        """Physical values of ``V * D[density]`` (``D`` is the 2/3 projection)."""
        rho = self.forward(density) * self.dealias_mask
        return self.backward(rho * self.yukawa_multiplier(mu0))


def _yukawa_symbol(k2: np.ndarray, mu0: float) -> np.ndarray:
    if mu0 < 0:
        raise ValueError(f"mu0 must be nonnegative, got {mu0}")
    with np.errstate(divide="ignore"):
        mult = FOUR_PI / (k2 + mu0 * mu0)
    if mu0 == 0:
        mult = np.where(k2 == 0, 0.0, mult)
    return mult


def make_grid(N: int, L: float) -> FourierGrid:
    """Build a :class:`FourierGrid`; raises ``ValueError`` on bad ``N`` or ``L``."""
    return FourierGrid(N, L)


# --------------------------------------------------------------------------
# radial grid
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RadialGrid:
    """Ball of radius ``R`` with interior nodes ``r_j = j R / N_r``, ``j = 1..N_r-1``.

    ``w = r u`` vanishes at both ends, so only the interior nodes carry data;
    the sine modes are ``rho_k = k pi / R``, ``k = 1..N_r-1``.
    """

    R: float
    N_r: int

    def __post_init__(self):
        if not isinstance(self.N_r, (int, np.integer)) or self.N_r < 8:
            raise ValueError(f"N_r must be an integer >= 8, got {self.N_r!r}")
        if not (self.R > 0 and math.isfinite(self.R)):
            raise ValueError(f"R must be positive, got {self.R!r}")

    ndim = 1
    kind = "radial"

    @property
    def h(self) -> float:
        return self.R / self.N_r

    @property
    def n(self) -> int:
        return self.N_r - 1

    @property
    def shape(self) -> tuple[int]:
        return (self.n,)

    @cached_property
    def r(self) -> np.ndarray:
        return np.arange(1, self.N_r) * self.h

    @cached_property
    def rho(self) -> np.ndarray:
        return np.arange(1, self.N_r) * math.pi / self.R

    @property
    def kmag(self) -> np.ndarray:
        return self.rho

    @property
    def k2(self) -> np.ndarray:
        return self.rho**2

    @property
    def frequencies(self) -> tuple[np.ndarray]:
        return (self.rho,)

    @property
    def dk(self) -> float:
        return math.pi / self.R

    @property
    def nyquist(self) -> float:
        return self.rho[-1]

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        return np.arange(1, self.N_r) < 2 * self.N_r / 3

    @property
    def modal_weight(self) -> float:
        return FOUR_PI * self.h

    @cached_property
    def quad_weights(self) -> np.ndarray:
        return FOUR_PI * self.h * self.r**2

    def dst(self, w: np.ndarray) -> np.ndarray:
        return sfft.dst(w, type=1, norm="ortho", axis=-1)

    def forward(self, values: np.ndarray) -> np.ndarray:
        return self.dst(values * self.r)

    def backward(self, coeffs: np.ndarray) -> np.ndarray:
        return self.dst(coeffs) / self.r

    def origin_value(self, coeffs: np.ndarray) -> np.ndarray:
        """``u(0) = w'(0)`` from the sine series."""
        return math.sqrt(2.0 / self.N_r) * (coeffs @ self.rho)

    def evaluate(self, coeffs: np.ndarray, radii: np.ndarray) -> np.ndarray:
        """Sine-series interpolation of ``u`` at arbitrary radii (zero beyond ``R``)."""
        radii = np.asarray(radii, dtype=float)
        flat = radii.ravel()
        out = np.zeros(flat.shape, dtype=complex)
        scale = math.sqrt(2.0 / self.N_r)
        inside = flat < self.R
        rr = flat[inside]
        chunk = max(1, 4_000_000 // self.n)
        vals = np.empty(rr.shape, dtype=complex)
        for start in range(0, rr.size, chunk):
            seg = rr[start:start + chunk]
            s = np.sin(np.outer(seg, self.rho))
            w = scale * (s @ coeffs)
            small = seg < 1e-12
            safe = np.where(small, 1.0, seg)
            vals[start:start + chunk] = np.where(small, self.origin_value(coeffs), w / safe)
        out[inside] = vals
        return out.reshape(radii.shape)

    def refine(self, coeffs: np.ndarray, factor: int = 2) -> np.ndarray:
        """Values of ``u`` on the nodes of a grid ``factor`` times finer, plus ``r=0``."""
        m = self.N_r * factor
        padded = np.zeros(coeffs.shape[:-1] + (m - 1,), dtype=complex)
        padded[..., : self.n] = coeffs
        w = sfft.dst(padded, type=1, norm="ortho", axis=-1) * math.sqrt(factor)
        r_fine = np.arange(1, m) * (self.R / m)
        u = w / r_fine
        return np.concatenate([self.origin_value(coeffs)[..., None], u], axis=-1)

    def yukawa_multiplier(self, mu0: float) -> np.ndarray:
        return _yukawa_symbol(self.rho**2, mu0)

    def _boundary_profile(self, mu0: float) -> tuple[np.ndarray, float]:
        """Profile ``a(r)`` and constant ``c`` of the rank-one free-space correction.

        The Dirichlet solve misses the homogeneous solution fixing the true
        boundary value; in free space it equals ``c a(r) <a, density>``.
        """
        R, r = self.R, self.r
        if mu0 == 0:
            return np.ones_like(r), 1.0 / R
        a = np.exp(mu0 * (r - R)) * (-np.expm1(-2 * mu0 * r)) / (2 * r)
        c = 2.0 / (mu0 * (-np.expm1(-2 * mu0 * R)))
        return a, c

    def potential(self, density: np.ndarray, mu0: float, free_space: bool = True) -> np.ndarray:
        """Radial potential ``V * D[density]`` at the nodes.

        The sine-mode multiplier ``4 pi / (rho^2 + mu0^2)`` solves the
        Dirichlet problem in the ball.  With ``free_space`` the missing
        homogeneous solution is added back in physical space, which makes the
        result the whole-space potential for densities supported in the ball.
        The correction uses the undealiased density so the quartic energy
        stays a symmetric form.
        """
        rho_hat = self.forward(density) * self.dealias_mask
        phi = self.backward(rho_hat * self.yukawa_multiplier(mu0))
        if free_space:
            a, c = self._boundary_profile(mu0)
            amp = c * np.sum(self.quad_weights * a * density, axis=-1)
            phi = phi + np.asarray(amp)[..., None] * a
        return phi


# --------------------------------------------------------------------------
# fields
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Field:
    """Complex field stored by its modes on ``grid``."""

    grid: FourierGrid | RadialGrid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.grid.shape:
            raise ValueError(f"coefficient shape {c.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_physical(cls, grid, values):
        return cls(grid, grid.forward(np.asarray(values, dtype=complex)))

    def physical(self) -> np.ndarray:
        return self.grid.backward(self.coeffs)

    def with_coeffs(self, coeffs):
        return type(self)(self.grid, coeffs)

    def l2_norm(self) -> float:
        return math.sqrt(self.grid.modal_weight * float(np.sum(np.abs(self.coeffs) ** 2)))

    def quadrature_l2(self) -> float:
        """L2 norm by spatial quadrature of the physical samples."""
        return float(np.sqrt(np.sum(self.grid.quad_weights * np.abs(self.physical()) ** 2)))

    def __add__(self, other):
        _check_same_grid(self, other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_coeffs(-self.coeffs)


class SpectralField(Field):
    """Field on a :class:`FourierGrid`; ``coeffs`` are plane-wave amplitudes."""


class RadialField(Field):
    """Radial field on a :class:`RadialGrid`; ``coeffs`` are sine modes of ``w = r u``."""

    @classmethod
    def from_w(cls, grid: RadialGrid, w):
        return cls(grid, grid.dst(np.asarray(w, dtype=complex)))

    @property
    def w(self) -> np.ndarray:
        return self.grid.dst(self.coeffs)


def field_for(grid, coeffs) -> Field:
    return (RadialField if isinstance(grid, RadialGrid) else SpectralField)(grid, coeffs)


def _check_same_grid(a: Field, b: Field) -> None:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


# --------------------------------------------------------------------------
# multipliers and projectors
# --------------------------------------------------------------------------


def japanese(kmag: np.ndarray, m: float = 1.0) -> np.ndarray:
    """``<xi>_m = sqrt(m^2 + |xi|^2)``."""
    return np.sqrt(m * m + np.asarray(kmag) ** 2)


def sobolev_norm(u: Field, s: float) -> float:
    """Inhomogeneous ``H^s`` norm with weight ``(1 + |xi|^2)^(s/2)``."""
    c = u.coeffs
    if not np.all(np.isfinite(c)):
        raise ValueError("field has non-finite coefficients")
    weight = (1.0 + u.grid.k2) ** s
    return math.sqrt(u.grid.modal_weight * float(np.sum(weight * np.abs(c) ** 2)))


def apply_symbol(u: Field, symbol: Callable[..., np.ndarray] | np.ndarray) -> Field:
    """Multiply modes by ``symbol``.

    ``symbol`` is either an array broadcastable to the modes or a callable
    receiving the grid's frequency arrays (``kx, ky, kz`` or ``rho``).
    """
    values = symbol(*u.grid.frequencies) if callable(symbol) else symbol
    values = np.broadcast_to(np.asarray(values), u.grid.shape)
    retained = u.coeffs != 0
    if not np.all(np.isfinite(values[retained])):
        raise ValueError("symbol is not finite on every retained mode")
    with np.errstate(invalid="ignore", over="ignore"):
        # non-finite symbol values on empty modes are discarded below
        out = np.where(retained, values * np.where(retained, u.coeffs, 0), 0)
    return u.with_coeffs(out)


def yukawa_convolve(g: Field, mu0: float) -> Field:
    """``V * g`` for ``V(x) = exp(-mu0 |x|) / |x|`` via the multiplier ``4 pi / (|xi|^2 + mu0^2)``.

    For ``mu0 == 0`` (Coulomb) the zero mode of the output is set to 0.
    On a :class:`RadialGrid` the Dirichlet solve is corrected to the
    whole-space potential.
    """
    if mu0 < 0:
        raise ValueError(f"mu0 must be nonnegative, got {mu0}")
    grid = g.grid
    if isinstance(grid, RadialGrid):
        phi = grid.backward(g.coeffs * grid.yukawa_multiplier(mu0))
        a, c = grid._boundary_profile(mu0)
        phi = phi + c * np.sum(grid.quad_weights * a * g.physical()) * a
        return g.with_coeffs(grid.forward(phi))
    return g.with_coeffs(g.coeffs * grid.yukawa_multiplier(mu0))


def beta1(s) -> np.ndarray:
    """Smooth cutoff: 1 on ``|s| <= 1``, 0 on ``|s| >= 2``, smoothstep ramp between."""
    a = np.abs(np.asarray(s, dtype=float))
    x = np.clip(2.0 - a, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


@dataclass(frozen=True)
class DyadicBand:
    """Dyadic frequency band ``lam = 2^k``; ``kind`` is ``"smooth"`` or ``"sharp"``."""

    lam: float
    kind: str = "smooth"

    def __post_init__(self):
        k = math.log2(self.lam) if self.lam > 0 else -1
        if k < 0 or abs(k - round(k)) > 1e-12:
            raise ValueError(f"band scale must be 2^k with k >= 0, got {self.lam}")
        if self.kind not in ("smooth", "sharp"):
            raise ValueError(f"unknown band kind {self.kind!r}")

    def multiplier(self, s) -> np.ndarray:
        s = np.abs(np.asarray(s, dtype=float))
        lam = self.lam
        if self.kind == "smooth":
            if lam == 1:
                return beta1(s)
            return beta1(s / lam) - beta1(2 * s / lam)
        lo = 0.0 if lam == 1 else lam / math.sqrt(2)
        return ((s >= lo) & (s < math.sqrt(2) * lam)).astype(float)


def dyadic_scales(max_scale: float) -> list[float]:
    """``[1, 2, 4, ...]`` up to and including ``max_scale``."""
    out, lam = [], 1.0
    while lam <= max_scale:
        out.append(lam)
        lam *= 2
    return out


def lp_project(u: Field, band: DyadicBand) -> Field:
    """Littlewood-Paley piece ``P_lam u``."""
    return u.with_coeffs(u.coeffs * band.multiplier(u.grid.kmag))


def cube_labels(grid: FourierGrid, mu: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integer cube index ``z`` with ``xi in mu z + [0, mu)^3`` per axis (broadcastable)."""
    z = np.floor(grid.k1d / mu).astype(int)
    return z[:, None, None], z[None, :, None], z[None, None, :]


def cube_project(u: SpectralField, mu: float, z: Sequence[int]) -> SpectralField:
    """Keep exactly the modes with ``xi`` in ``C_z = mu z + [0, mu)^3``."""
    if mu < 1:
        raise ValueError(f"cube side must be >= 1, got {mu}")
    zx, zy, zz = cube_labels(u.grid, mu)
    keep = (zx == z[0]) & (zy == z[1]) & (zz == z[2])
    return u.with_coeffs(np.where(keep, u.coeffs, 0))


def occupied_cubes(u: SpectralField, mu: float) -> list[tuple[int, int, int]]:
    zx, zy, zz = cube_labels(u.grid, mu)
    zx, zy, zz = np.broadcast_arrays(zx, zy, zz)
    nz = u.coeffs != 0
    triples = np.stack([zx[nz], zy[nz], zz[nz]], axis=1)
    return sorted({tuple(int(v) for v in t) for t in np.unique(triples, axis=0)})


# --------------------------------------------------------------------------
# norms
# --------------------------------------------------------------------------

INF = math.inf


def spatial_norm(u: Field, q: float, refine: bool = False) -> float:
    """``L^q_x`` norm by grid quadrature; ``q = inf`` takes the grid maximum."""
    if q == INF:
        if refine:
            vals = u.grid.refine(u.coeffs)
        else:
            vals = u.physical()
            if isinstance(u.grid, RadialGrid):
                vals = np.append(vals, u.grid.origin_value(u.coeffs))
        return float(np.max(np.abs(vals)))
    vals = np.abs(u.physical())
    return float(np.sum(u.grid.quad_weights * vals**q) ** (1.0 / q))


def time_norm(values: Sequence[float], dt: float, p: float) -> float:
    """Temporal ``L^p`` of sampled nonnegative values by the trapezoid rule."""
    a = np.asarray(values, dtype=float)
    if a.size < 2:
        raise ValueError("need at least 2 time samples")
    if p == INF:
        return float(np.max(a))
    return float(trapezoid(a**p, dx=dt) ** (1.0 / p))


def mixed_norm(samples: Sequence[Field], dt: float, p: float, q: float, refine: bool = False) -> float:
    """``L^p_t L^q_x`` of a uniformly sampled trajectory."""
    if len(samples) < 2:
        raise ValueError("need at least 2 time samples")
    if p not in (2, 6, INF) or q not in (2, 6, INF):
        raise ValueError("exponents must be 2, 6 or inf")
    return time_norm([spatial_norm(u, q, refine) for u in samples], dt, p)
