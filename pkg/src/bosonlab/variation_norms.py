"""Discrete p-variation norms and the adapted-space proxy norms.

``vp_norm`` is the exact maximum of ``(sum_k ||v(t_k) - v(t_{k-1})||^p)^(1/p)``
over all subsequences of the sample times.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .spectral_core import DyadicBand, dyadic_scales, japanese

BRUTE_FORCE_MAX = 16


@dataclass(frozen=True)
class SampledPath:
    """Samples ``values[k]`` (arrays of modes) at strictly increasing ``times[k]``.

    ``weight`` turns coefficient sums into squared L2 norms (the grid's
    Plancherel weight, optionally times a Sobolev weight).
    """

    times: np.ndarray
    values: np.ndarray
    weight: float | np.ndarray = 1.0

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("a path needs at least two samples")
        if np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if v.shape[0] != t.size:
            raise ValueError("one value per sample time is required")
        if not np.all(np.isfinite(v)):
            raise ValueError("path values must be finite")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def K(self) -> int:
        return self.times.size - 1

    def distances(self) -> np.ndarray:
        """Matrix ``D[i, j] = ||v(t_j) - v(t_i)||``."""
        v = self.values.reshape(self.values.shape[0], -1)
        w = np.broadcast_to(np.asarray(self.weight, dtype=float), self.values.shape[1:]).reshape(-1)
        gram = (v * w) @ np.conj(v).T
        sq = np.real(np.diag(gram))
        d2 = sq[:, None] + sq[None, :] - 2 * np.real(gram)
        # recompute small entries directly, cancellation makes the Gram form inaccurate there
        d = np.sqrt(np.maximum(d2, 0.0))
        small = d2 <= 1e-6 * (sq[:, None] + sq[None, :])
        for i, j in zip(*np.nonzero(np.triu(small, 1))):
            d[i, j] = d[j, i] = math.sqrt(float(np.sum(w * np.abs(v[j] - v[i]) ** 2)))
        np.fill_diagonal(d, 0.0)
        return d

    def reversed(self) -> "SampledPath":
        return SampledPath(self.times[-1] - self.times[::-1], self.values[::-1], self.weight)

    def __add__(self, other: "SampledPath") -> "SampledPath":
        if not np.array_equal(self.times, other.times):
            raise ValueError("paths must share their time grid")
        return SampledPath(self.times, self.values + other.values, self.weight)


def _check_p(p: float):
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")


def vp_norm(path: SampledPath, p: float, distances: np.ndarray | None = None) -> float:
    """Exact discrete ``V^p`` norm by dynamic programming over subsequences."""
    _check_p(p)
    d = path.distances() if distances is None else distances
    dp = d**p
    n = dp.shape[0]
    best = np.zeros(n)
    for j in range(1, n):
        best[j] = np.max(best[:j] + dp[:j, j])
    return float(np.max(best) ** (1.0 / p))


def vp_norm_bruteforce(path: SampledPath, p: float) -> float:
    """Enumerate every subsequence with at least two points (``K <= 16``)."""
    _check_p(p)
    if path.K > BRUTE_FORCE_MAX:
        raise ValueError(f"brute force limited to K <= {BRUTE_FORCE_MAX}, got K = {path.K}")
    dp = path.distances() ** p
    n = dp.shape[0]
    best = 0.0
    for size in range(2, n + 1):
        for idx in itertools.combinations(range(n), size):
            total = sum(dp[a, b] for a, b in zip(idx, idx[1:]))
            best = max(best, total)
    return float(best ** (1.0 / p))


def _twisted_path(times, coeffs, grid, m, sobolev: float | None = None) -> SampledPath:
    omega = japanese(grid.kmag, m)
    twisted = np.array([np.exp(1j * t * omega) * c for t, c in zip(times, coeffs)])
    weight = grid.modal_weight if sobolev is None else grid.modal_weight * (1 + grid.k2) ** sobolev
    return SampledPath(times, twisted, weight)


def adapted_vp_norm_of(times, coeffs, grid, m: float, p: float, sobolev: float | None = None) -> float:
    """``||S_m(-t) u(t)||_{V^p}`` for samples ``coeffs[k]`` of ``u(times[k])`` on ``grid``."""
    return vp_norm(_twisted_path(times, coeffs, grid, m, sobolev), p)


def adapted_vp_norm(traj, m: float, p: float, sobolev: float | None = None) -> float:
    """Adapted ``V^p`` norm over a trajectory's samples (L2 differences unless ``sobolev``)."""
    return adapted_vp_norm_of(traj.times, traj.coeffs, traj.grid, m, p, sobolev)


def xs_proxy_norm(traj, m: float, s: float, kind: str = "smooth") -> tuple[float, list[dict]]:
    """Proxy ``(sum_mu mu^{2s} (||P_mu u||_{V^2_m} + ||P_mu u(0)||)^2)^{1/2}`` and per-band terms."""
    grid = traj.grid
    terms, total = [], 0.0
    for mu in dyadic_scales(2 * grid.nyquist):
        mult = DyadicBand(mu, kind).multiplier(grid.kmag)
        if not np.any(mult):
            continue
        coeffs = traj.coeffs * mult[None]
        if not np.any(coeffs):
            continue
        var = vp_norm(_twisted_path(traj.times, coeffs, grid, m), 2.0)
        start = math.sqrt(grid.modal_weight * float(np.sum(np.abs(coeffs[0]) ** 2)))
        contrib = mu ** (2 * s) * (var + start) ** 2
        terms.append({"mu": mu, "variation": var, "initial": start, "contribution": contrib})
        total += contrib
    return math.sqrt(total), terms


def scalar_path(times: Sequence[float], values: Sequence[complex]) -> SampledPath:
    """Path of complex scalars (useful for tests)."""
    v = np.asarray(values, dtype=complex).reshape(-1, 1)
    return SampledPath(np.asarray(times, dtype=float), v)
