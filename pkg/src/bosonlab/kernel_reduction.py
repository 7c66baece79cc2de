"""Reduction of the delta-constrained convolution to a one-dimensional integral.

For radial profiles ``phi, psi`` the integral

    I(tau, xi) = int phi(|eta|) psi(|xi - eta|) delta(tau - <eta>_m + <xi - eta>_m) d eta

is computed in spherical coordinates about ``xi``.  With ``rho = |eta|`` and
``a = cos angle(eta, xi)`` the delta fixes ``<xi - eta>_m = <rho>_m - tau``,
i.e. ``|xi - eta| = chi(tau, rho) = sqrt((<rho>_m - tau)^2 - m^2)`` and

    a*(rho) = (|xi|^2 - tau^2 + 2 tau <rho>_m) / (2 |xi| rho).

The Jacobian of the delta in ``a`` is ``<xi - eta>_m / (|xi| rho)`` and the
azimuth contributes ``2 pi``, so

    I = (2 pi / |xi|) int_{A} phi(rho) psi(chi(tau, rho)) rho (<rho>_m - tau) d rho

over the admissible set ``A = {|a*| <= 1, <rho>_m - tau >= m}``.  For
``m = 0`` and ``|tau| < |xi|`` this is the half line ``rho >= (tau + |xi|)/2``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import integrate, optimize

VANISH = 1e-12  # absolute level below which values count as zero
GAUSS_TRUNC = 6.0  # gaussian profiles vanish beyond this many widths
DELTA_TRUNC = 8.0  # smoothed delta vanishes beyond this many widths


@dataclass(frozen=True)
class RadialProfile:
    """Nonnegative radial profile: ``indicator`` of ``[A, B]``, truncated ``gaussian`` or ``tabulated``."""

    kind: str
    params: tuple = ()
    samples: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind == "indicator":
            a, b = self.params
            if not 0 <= a < b:
                raise ValueError("indicator needs 0 <= A < B")
        elif self.kind == "gaussian":
            c, w = self.params
            if w <= 0:
                raise ValueError("gaussian width must be positive")
        elif self.kind == "tabulated":
            r, v = (np.asarray(x, dtype=float) for x in self.samples)
            if r.ndim != 1 or r.size < 2 or np.any(np.diff(r) <= 0) or np.any(v < 0) or v.shape != r.shape:
                raise ValueError("tabulated profile needs increasing radii and nonnegative values")
        elif self.kind != "zero":
            raise ValueError(f"unknown profile kind {self.kind!r}")

    @classmethod
    def indicator(cls, a: float, b: float) -> "RadialProfile":
        return cls("indicator", (float(a), float(b)))

    @classmethod
    def gaussian(cls, center: float, width: float) -> "RadialProfile":
        return cls("gaussian", (float(center), float(width)))

    @classmethod
    def tabulated(cls, radii, values) -> "RadialProfile":
        return cls("tabulated", (), (tuple(map(float, radii)), tuple(map(float, values))))

    @classmethod
    def zero(cls) -> "RadialProfile":
        return cls("zero")

    @property
    def support(self) -> tuple[float, float] | None:
        if self.kind == "zero":
            return None
        if self.kind == "indicator":
            return self.params
        if self.kind == "gaussian":
            c, w = self.params
            return max(0.0, c - GAUSS_TRUNC * w), c + GAUSS_TRUNC * w
        r, v = self.samples
        nz = np.flatnonzero(np.asarray(v) > 0)
        if nz.size == 0:
            return None
        return r[max(nz[0] - 1, 0)], r[min(nz[-1] + 1, len(r) - 1)]

    @property
    def breakpoints(self) -> list[float]:
        if self.kind == "tabulated":
            return list(self.samples[0])
        s = self.support
        return [] if s is None else list(s)

    def __call__(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(rho)
        if self.kind == "indicator":
            a, b = self.params
            return ((rho >= a) & (rho <= b)).astype(float)
        if self.kind == "gaussian":
            c, w = self.params
            lo, hi = self.support
            val = np.exp(-0.5 * ((rho - c) / w) ** 2)
            return np.where((rho >= lo) & (rho <= hi), val, 0.0)
        r, v = self.samples
        return np.interp(rho, r, v, left=0.0, right=0.0)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "params": list(self.params)}
        if self.kind == "tabulated":
            d["radii"], d["values"] = list(self.samples[0]), list(self.samples[1])
        return d


def japanese(x, m):
    return np.sqrt(np.asarray(x, dtype=float) ** 2 + m * m)


def change_of_variable(tau: float, rho, m: float) -> np.ndarray:
    """``chi(tau, rho) = sqrt((<rho>_m - tau)^2 - m^2)``, the value of ``|xi - eta|`` on the constraint."""
    e = japanese(rho, m) - tau
    rad = e * e - m * m
    if np.any(rad < -1e-12 * np.maximum(1.0, e * e)):
        raise ValueError("negative radicand: <rho>_m - tau < m inside the integration range")
    return np.sqrt(np.maximum(rad, 0.0))


def cos_star(tau: float, rho, ximag: float, m: float) -> np.ndarray:
    """Cosine of the angle between ``eta`` and ``xi`` selected by the constraint."""
    rho = np.asarray(rho, dtype=float)
    return (ximag**2 - tau**2 + 2 * tau * japanese(rho, m)) / (2 * ximag * rho)


def _degenerate(tau, ximag, m) -> bool:
    """``m = 0, |tau| = |xi|``: the constraint sits on the boundary ``a = +-1`` for every ``rho``."""
    return m == 0 and abs(abs(tau) - ximag) <= 1e-13 * ximag


def _admissible_mask(tau, rho, ximag, m):
    rho = np.asarray(rho, dtype=float)
    ok_delta = japanese(rho, m) - tau >= m
    with np.errstate(divide="ignore", invalid="ignore"):
        a = cos_star(tau, rho, ximag, m)
    return ok_delta & (np.abs(a) <= 1) & (rho > 0)


def _conditions(tau, ximag, m):
    def c1(r):
        return 1.0 - cos_star(tau, r, ximag, m)

    def c2(r):
        return 1.0 + cos_star(tau, r, ximag, m)

    def c3(r):
        return japanese(r, m) - tau - m

    return (c1, c2, c3)


def _roots_in(fun, lo, hi, n_scan=2048) -> list[float]:
    grid = np.linspace(lo, hi, n_scan + 1)
    val = fun(grid)
    out = []
    for i in np.flatnonzero(np.sign(val[:-1]) * np.sign(val[1:]) < 0):
        out.append(optimize.brentq(fun, grid[i], grid[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
    out.extend(grid[np.flatnonzero(val == 0)].tolist())
    return out


def _psi_preimages(psi: RadialProfile, tau, m) -> list[float]:
    """``rho`` where ``chi(tau, rho)`` hits a breakpoint of ``psi``."""
    out = []
    for s in psi.breakpoints:
        e = math.sqrt(s * s + m * m) + tau
        if e >= m:
            out.append(math.sqrt(e * e - m * m))
    return out


def reduce_I(phi: RadialProfile, psi: RadialProfile, tau: float, ximag: float, m: float, epsrel: float = 1e-8) -> float:
    """One-dimensional reduction of ``I(phi, psi)(tau, xi)``.

    The degenerate case ``m = 0, |tau| = |xi|`` puts the delta on the
    boundary of the angular range; it is counted with weight 1/2, the limit of
    any symmetric smoothing of the delta.
    """
    if not ximag > 0:
        raise ValueError(f"ximag must be positive, got {ximag}")
    if m < 0:
        raise ValueError(f"mass must be nonnegative, got {m}")
    sp, ss = phi.support, psi.support
    if sp is None or ss is None:
        return 0.0
    lo, hi = max(sp[0], 0.0), sp[1]
    if lo >= hi:
        return 0.0
    weight = 1.0
    if _degenerate(tau, ximag, m):
        weight = 0.5
        start = max(lo, 0.5 * (tau + ximag), tau)
        pieces_edges = sorted({start, hi, *[b for b in phi.breakpoints + _psi_preimages(psi, tau, m) if start < b < hi]})
        admissible = lambda r: r >= start  # noqa: E731
    else:
        cuts = {lo, hi}
        tiny = 1e-300
        for c in _conditions(tau, ximag, m):
            with np.errstate(divide="ignore", invalid="ignore"):
                cuts.update(_roots_in(c, max(lo, tiny), hi))
        cuts.update(b for b in phi.breakpoints + _psi_preimages(psi, tau, m) if lo < b < hi)
        pieces_edges = sorted(cuts)
        admissible = lambda r: bool(_admissible_mask(tau, r, ximag, m))  # noqa: E731

    def integrand(r):
        chi = change_of_variable(tau, r, m)
        return float(phi(r) * psi(chi) * r * (japanese(r, m) - tau))

    total = 0.0
    for a, b in zip(pieces_edges[:-1], pieces_edges[1:]):
        if b <= a or not admissible(0.5 * (a + b)):
            continue
        val, _ = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=epsrel, limit=200)
        total += val
    return weight * 2 * math.pi / ximag * total


# --------------------------------------------------------------------------
# smoothed-delta oracle
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleResult:
    value: float
    levels: tuple[float, float]
    converged: bool


@lru_cache(maxsize=None)
def _composite_gauss(a: float, b: float, n: int, order: int = 16):
    """Composite Gauss-Legendre rule with about ``n`` nodes on uniform panels."""
    x, w = np.polynomial.legendre.leggauss(order)
    panels = max(1, n // order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return (mid[:, None] + half[:, None] * x[None]).ravel(), (half[:, None] * w[None]).ravel()


def _smoothed(phi, psi, tau, xi_vec, m, eps, n_rho, n_cos, n_az):
    """Tensor grid in spherical coordinates of ``eta`` about ``e_3``."""
    sp = phi.support
    lo, hi = max(sp[0], 0.0), sp[1]
    # Gauss-Legendre in rho on panels between profile breakpoints
    edges = sorted({lo, hi, *[b for b in phi.breakpoints if lo < b < hi]})
    x, w = np.polynomial.legendre.leggauss(max(4, n_rho // max(1, len(edges) - 1)))
    rho, wr = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        rho.append(0.5 * (b - a) * x + 0.5 * (a + b))
        wr.append(0.5 * (b - a) * w)
    rho, wr = np.concatenate(rho), np.concatenate(wr)
    keep = phi(rho) > 0
    rho, wr = rho[keep], wr[keep] * phi(rho[keep]) * rho[keep] ** 2
    xa, wa = _composite_gauss(-1.0, 1.0, n_cos)
    az = np.arange(n_az) * (2 * math.pi / n_az)
    xi_vec = np.asarray(xi_vec, dtype=float)
    total = 0.0
    sin = np.sqrt(1 - xa**2)
    for r, w_r in zip(rho, wr):
        eta = r * np.stack(
            [sin[:, None] * np.cos(az)[None], sin[:, None] * np.sin(az)[None], np.broadcast_to(xa[:, None], (n_cos, n_az))]
        )
        diff = xi_vec[:, None, None] - eta
        sig = np.sqrt(np.sum(diff**2, axis=0))
        g = tau - math.sqrt(r * r + m * m) + np.sqrt(sig**2 + m * m)
        z = g / eps
        kern = np.where(np.abs(z) <= DELTA_TRUNC, np.exp(-0.5 * z * z), 0.0) / (eps * math.sqrt(2 * math.pi))
        vals = kern * psi(sig)
        total += w_r * float(np.sum(wa[:, None] * vals)) * (2 * math.pi / n_az)
    return total


def oracle_I(
    phi: RadialProfile,
    psi: RadialProfile,
    tau: float,
    ximag: float,
    m: float,
    eps_delta: float = 4e-3,
    direction: Sequence[float] = (0.0, 0.0, 1.0),
    n_rho: int = 192,
    n_cos: int = 6144,
    n_az: int | None = None,
    tol: float = 0.05,
) -> OracleResult:
    """Smoothed-delta quadrature with Richardson extrapolation over ``(eps, eps/2)``.

    The smoothing error is even in ``eps`` to leading order, so
    ``(4 I(eps/2) - I(eps)) / 3`` removes it.  ``converged`` is False when
    the two levels differ by more than ``tol`` (relative).
    """
    if not eps_delta > 0:
        raise ValueError("eps_delta must be positive")
    if not ximag > 0:
        raise ValueError(f"ximag must be positive, got {ximag}")
    if phi.support is None or psi.support is None:
        return OracleResult(0.0, (0.0, 0.0), True)
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    xi_vec = ximag * d
    if n_az is None:
        # the integrand is axially symmetric when xi lies on the polar axis
        n_az = 1 if np.allclose(d, (0, 0, 1)) else 256
    coarse = _smoothed(phi, psi, tau, xi_vec, m, eps_delta, n_rho, n_cos, n_az)
    fine = _smoothed(phi, psi, tau, xi_vec, m, eps_delta / 2, n_rho, n_cos, n_az)
    scale = max(abs(coarse), abs(fine))
    if scale <= VANISH:
        # nothing above roundoff to extrapolate
        return OracleResult(0.0, (coarse, fine), True)
    value = (4 * fine - coarse) / 3
    return OracleResult(value, (coarse, fine), abs(fine - coarse) <= tol * scale)


def temporal_bound(phi: RadialProfile, ximag: float, m: float) -> float:
    """Upper bound for ``|tau|`` on the support: ``|xi| (|xi| + 2 sup|eta|) / max(|xi|, 2m)``."""
    sp = phi.support
    if sp is None:
        return 0.0
    return ximag * (ximag + 2 * sp[1]) / max(ximag, 2 * m)


# --------------------------------------------------------------------------
# comparison grid and report
# --------------------------------------------------------------------------

DEFAULT_TAUS = (-1.0, 0.0, 0.5, 1.0)
DEFAULT_XIS = (0.5, 1.0, 2.0)
DEFAULT_MASSES = (0.0, 1.0)
CSV_HEADER = ("tau", "ximag", "m", "reduced", "oracle", "rel_err")


@dataclass
class KernelRow:
    tau: float
    ximag: float
    m: float
    reduced: float
    oracle: float
    rel_err: float
    converged: bool
    both_vanish: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def kernel_check(
    phi: RadialProfile,
    psi: RadialProfile,
    taus: Sequence[float] = DEFAULT_TAUS,
    xis: Sequence[float] = DEFAULT_XIS,
    masses: Sequence[float] = DEFAULT_MASSES,
    eps_delta: float = 4e-3,
    **oracle_kw,
) -> list[KernelRow]:
    """Compare :func:`reduce_I` with :func:`oracle_I` over a ``(tau, ximag, m)`` grid."""
    rows = []
    for m in masses:
        for xi in xis:
            for tau in taus:
                red = reduce_I(phi, psi, tau, xi, m)
                orc = oracle_I(phi, psi, tau, xi, m, eps_delta, **oracle_kw)
                vanish = abs(red) <= VANISH and abs(orc.value) <= VANISH
                err = 0.0 if vanish else abs(red - orc.value) / max(abs(red), abs(orc.value))
                rows.append(KernelRow(tau, xi, m, red, orc.value, err, orc.converged, vanish))
    return rows


def rows_csv(rows: Sequence[KernelRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([repr(float(getattr(r, k))) for k in CSV_HEADER])
    return buf.getvalue()
