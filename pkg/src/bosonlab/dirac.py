"""Dirac-Hartree extension: projections ``P_+-(xi)`` and the split half-wave system.

With ``H(xi) = xi . alpha + m beta`` one has ``H^2 = <xi>_m^2``, so
``P_+-(xi) = (I +- H(xi) / <xi>_m) / 2`` are complementary Hermitian
projections and ``psi_+- = P_+-(D) psi`` satisfy

    (-i d_t +- <D>_m) psi_+- = lambda P_+-(D) [(V * |psi|^2) psi].

Only periodic 3-D grids are supported (the Dirac operator does not preserve
radial symmetry).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .propagator import InitialDataSpec, make_initial
from .solver import CSV_HEADER, BLOWUP_FACTOR, NumericalAbort
from .spectral_core import FourierGrid, SpectralField, japanese

_S1 = np.array([[0, 1], [1, 0]], dtype=complex)
_S2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
_S3 = np.array([[1, 0], [0, -1]], dtype=complex)
_Z2 = np.zeros((2, 2), dtype=complex)
_I2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class DiracMatrices:
    """Standard (Dirac) representation: ``alpha^i = [[0, s_i], [s_i, 0]]``, ``beta = diag(1, 1, -1, -1)``."""

    alpha: np.ndarray = field(
        default_factory=lambda: np.array([np.block([[_Z2, s], [s, _Z2]]) for s in (_S1, _S2, _S3)])
    )
    beta: np.ndarray = field(default_factory=lambda: np.block([[_I2, _Z2], [_Z2, -_I2]]))

    def anticommutator_error(self) -> float:
        """Largest entry of ``{a^i, a^j} - 2 delta_ij``, ``{a^i, b}`` and ``b^2 - I``."""
        eye = np.eye(4)
        err = float(np.max(np.abs(self.beta @ self.beta - eye)))
        for i in range(3):
            a = self.alpha[i]
            err = max(err, float(np.max(np.abs(a @ self.beta + self.beta @ a))))
            for j in range(3):
                b = self.alpha[j]
                err = max(err, float(np.max(np.abs(a @ b + b @ a - 2 * (i == j) * eye))))
        return err


DIRAC = DiracMatrices()


def dirac_symbol(xi, m: float) -> np.ndarray:
    """``xi . alpha + m beta`` as a 4x4 matrix."""
    xi = np.asarray(xi, dtype=float)
    return np.tensordot(xi, DIRAC.alpha, axes=1) + m * DIRAC.beta


def dirac_projections(xi, m: float) -> tuple[np.ndarray, np.ndarray]:
    """``(P_+(xi), P_-(xi))``; both equal ``I/2`` at the degenerate point ``xi = 0, m = 0``."""
    if m < 0:
        raise ValueError(f"mass must be nonnegative, got {m}")
    xi = np.asarray(xi, dtype=float)
    w = math.sqrt(float(xi @ xi) + m * m)
    eye = np.eye(4, dtype=complex)
    if w == 0:
        return 0.5 * eye, 0.5 * eye
    h = dirac_symbol(xi, m) / w
    return 0.5 * (eye + h), 0.5 * (eye - h)


@dataclass
class SpinorField:
    """Four spectral components on one grid; ``coeffs`` has shape ``(4,) + grid.shape``."""

    grid: FourierGrid
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (4,) + self.grid.shape:
            raise ValueError(f"spinor coeffs must have shape {(4,) + self.grid.shape}")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("spinor coefficients must be finite")

    @classmethod
    def from_components(cls, parts) -> "SpinorField":
        parts = list(parts)
        if len(parts) != 4 or any(p.grid != parts[0].grid for p in parts):
            raise ValueError("need four components on a shared grid")
        return cls(parts[0].grid, np.stack([p.coeffs for p in parts]))

    @property
    def components(self) -> list[SpectralField]:
        return [SpectralField(self.grid, c) for c in self.coeffs]

    def density(self) -> np.ndarray:
        """Pointwise ``|psi|^2`` summed over components (physical space)."""
        return np.sum(np.abs(self.grid.backward(self.coeffs)) ** 2, axis=0)

    def l2_norm(self) -> float:
        return math.sqrt(self.grid.modal_weight * float(np.sum(np.abs(self.coeffs) ** 2)))

    def __add__(self, other):
        return SpinorField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return SpinorField(self.grid, self.coeffs - other.coeffs)


def _apply_h(grid: FourierGrid, coeffs: np.ndarray, m: float, scale=None) -> np.ndarray:
    """``(xi . alpha + m beta) psi`` mode by mode, optionally divided by ``scale``.

    In the standard representation ``H = [[m, s.xi], [s.xi, -m]]`` with
    ``s.xi = [[kz, kx - i ky], [kx + i ky, -kz]]``.
    """
    kx, ky, kz = grid.frequencies
    mm = m
    if scale is not None:
        kx, ky, kz, mm = kx / scale, ky / scale, kz / scale, m / scale
    km, kp = kx - 1j * ky, kx + 1j * ky
    a, b, c, d = coeffs
    return np.stack(
        [
            mm * a + kz * c + km * d,
            mm * b + kp * c - kz * d,
            kz * a + km * b - mm * c,
            kp * a - kz * b - mm * d,
        ]
    )


def _split_coeffs(grid: FourierGrid, coeffs: np.ndarray, m: float):
    w = japanese(grid.kmag, m)
    safe = np.where(w > 0, w, np.inf)  # degenerate mode: H / w -> 0, P_+- = I/2
    hpsi = _apply_h(grid, coeffs, m, safe)
    return 0.5 * (coeffs + hpsi), 0.5 * (coeffs - hpsi)


def split_spinor(psi: SpinorField, m: float) -> tuple[SpinorField, SpinorField]:
    """``(P_+(D) psi, P_-(D) psi)``."""
    if m < 0:
        raise ValueError(f"mass must be nonnegative, got {m}")
    plus, minus = _split_coeffs(psi.grid, psi.coeffs, m)
    return SpinorField(psi.grid, plus), SpinorField(psi.grid, minus)


# --------------------------------------------------------------------------
# evolution
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DiracConfig:
    """Split Dirac-Hartree run; ``psi_0 = spinor (x) profile`` with ``profile`` built from ``initial``."""

    m: float = 1.0
    mu0: float = 1.0
    s: float = 0.5
    grid: FourierGrid = field(default_factory=lambda: FourierGrid(32, 2.0))
    initial: InitialDataSpec = field(default_factory=lambda: InitialDataSpec(shape="gaussian", amplitude=0.1))
    spinor: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 1.0)
    dt: float = 0.01
    T: float = 1.0
    coupling: complex = 1.0
    sample_stride: int = 1

    def __post_init__(self):
        if self.m < 0:
            raise ValueError(f"m must be nonnegative, got {self.m}")
        if self.mu0 < 0:
            raise ValueError(f"mu0 must be nonnegative, got {self.mu0}")
        if not isinstance(self.grid, FourierGrid):
            raise ValueError("the Dirac system runs on periodic 3-D grids only")
        if not self.dt > 0 or self.T < self.dt:
            raise ValueError("need 0 < dt <= T")
        if abs(self.T / self.dt - round(self.T / self.dt)) > 1e-9 * (self.T / self.dt):
            raise ValueError("T must be an integer multiple of dt")
        if len(self.spinor) != 4 or not any(self.spinor):
            raise ValueError("spinor must be a nonzero 4-vector")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = {"kind": "fourier", "N": self.grid.N, "L": self.grid.L}
        c = complex(self.coupling)
        d["coupling"] = c.real if c.imag == 0 else [c.real, c.imag]
        return d


def initial_spinor(config: DiracConfig) -> SpinorField:
    f = make_initial(config.initial, config.grid)
    w = np.asarray(config.spinor, dtype=complex)
    w = w / np.linalg.norm(w)
    return SpinorField(config.grid, w[:, None, None, None] * (f.coeffs * config.grid.dealias_mask)[None])


class DiracDynamics:
    def __init__(self, grid: FourierGrid, m: float, mu0: float, coupling: complex = 1.0, force_scalar: bool = False):
        self.grid, self.m, self.mu0, self.coupling = grid, m, mu0, coupling
        self.omega = japanese(grid.kmag, m)
        self.mask = grid.dealias_mask
        # force_scalar: P_+ = I, P_- = 0 (scalar-reduction sanity check)
        self.force_scalar = force_scalar
        w = self.omega
        self._inv_w = np.where(w > 0, w, np.inf)
        self._phases: dict[float, np.ndarray] = {}

    def phase(self, s: float) -> np.ndarray:
        p = self._phases.get(s)
        if p is None:
            p = self._phases[s] = np.exp(-1j * s * self.omega)[None]
        return p

    def nonlinear(self, total: np.ndarray) -> np.ndarray:
        g = self.grid
        psi = g.backward(total)
        phi = g.potential(np.sum(np.abs(psi) ** 2, axis=0), self.mu0)
        return g.forward(phi[None] * psi) * self.mask[None]

    def project(self, n: np.ndarray):
        if self.force_scalar:
            return n, np.zeros_like(n)
        hn = _apply_h(self.grid, n, self.m, self._inv_w)
        return 0.5 * (n + hn), 0.5 * (n - hn)

    def field_ip(self, s: float, vp: np.ndarray, vm: np.ndarray):
        """Interaction picture: ``psi_+ = e^{-is w} v_+``, ``psi_- = e^{+is w} v_-``."""
        ph = self.phase(s)
        n = self.nonlinear(ph * vp + np.conj(ph) * vm)
        npl, nmi = self.project(n)
        c = 1j * self.coupling
        return c * np.conj(ph) * npl, c * ph * nmi

    def step(self, plus: np.ndarray, minus: np.ndarray, h: float):
        ph = self.phase(h)
        if self.coupling == 0:
            return ph * plus, np.conj(ph) * minus
        f = self.field_ip
        k1 = f(0.0, plus, minus)
        k2 = f(h / 2, plus + h / 2 * k1[0], minus + h / 2 * k1[1])
        k3 = f(h / 2, plus + h / 2 * k2[0], minus + h / 2 * k2[1])
        k4 = f(h, plus + h * k3[0], minus + h * k3[1])
        vp = plus + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        vm = minus + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        return ph * vp, np.conj(ph) * vm


def step_dirac(state: tuple[SpinorField, SpinorField], dt: float, config: DiracConfig, force_scalar: bool = False):
    """One Lawson-RK4 step of the split system from ``(psi_+, psi_-)``."""
    plus, minus = state
    dyn = DiracDynamics(plus.grid, config.m, config.mu0, config.coupling, force_scalar)
    p, q = dyn.step(plus.coeffs, minus.coeffs, dt)
    _guard(plus.coeffs, minus.coeffs, p, q, None)
    return SpinorField(plus.grid, p), SpinorField(plus.grid, q)


def _guard(p0, q0, p1, q1, t):
    before = float(np.sum(np.abs(p0) ** 2) + np.sum(np.abs(q0) ** 2))
    after = float(np.sum(np.abs(p1) ** 2) + np.sum(np.abs(q1) ** 2))
    if not math.isfinite(after) or after > BLOWUP_FACTOR**2 * before:
        raise NumericalAbort("L2 norm grew by more than 10% in one step", t)


@dataclass
class DiracTrajectory:
    config: DiracConfig
    times: np.ndarray
    plus: np.ndarray
    minus: np.ndarray
    mass: np.ndarray

    @property
    def psi(self) -> np.ndarray:
        return self.plus + self.minus

    def relative_mass_drift(self) -> float:
        return float(np.max(np.abs(self.mass - self.mass[0])) / self.mass[0])

    def diagnostics_rows(self):
        g = self.config.grid
        omega = japanese(g.kmag, self.config.m)
        weight = (1 + g.k2) ** self.config.s * g.modal_weight
        prev = None
        for t, p, q, mass in zip(self.times, self.plus, self.minus, self.mass):
            c = p + q
            energy = 0.5 * g.modal_weight * float(np.sum(omega * (np.abs(p) ** 2 - np.abs(q) ** 2)))
            hs = math.sqrt(float(np.sum(weight * np.abs(c) ** 2)))
            linf = float(np.max(np.sqrt(np.sum(np.abs(g.backward(c)) ** 2, axis=0))))
            ph = np.exp(1j * t * omega)[None]
            prof = np.concatenate([ph * p, np.conj(ph) * q])
            gap = 0.0 if prev is None else math.sqrt(float(np.sum(weight * np.abs(prof - prev) ** 2)))
            prev = prof
            yield dict(zip(CSV_HEADER, (t, mass, energy, hs, linf, gap)))

    def to_dict(self) -> dict:
        rows = list(self.diagnostics_rows())
        return {
            "config": self.config.to_dict(),
            "times": self.times.tolist(),
            "diagnostics": {k: [r[k] for r in rows] for k in CSV_HEADER[1:]},
            "relative_mass_drift": self.relative_mass_drift(),
        }


def run_dirac(config: DiracConfig, initial: SpinorField | None = None) -> DiracTrajectory:
    psi0 = initial_spinor(config) if initial is None else initial
    plus, minus = split_spinor(psi0, config.m)
    p, q = plus.coeffs, minus.coeffs
    dyn = DiracDynamics(config.grid, config.m, config.mu0, config.coupling)
    w = config.grid.modal_weight

    def mass(a, b):
        return w * float(np.sum(np.abs(a + b) ** 2))

    times, ps, qs, ms = [0.0], [p], [q], [mass(p, q)]
    for n in range(config.n_steps):
        p1, q1 = dyn.step(p, q, config.dt)
        _guard(p, q, p1, q1, n * config.dt)
        p, q = p1, q1
        if (n + 1) % config.sample_stride == 0:
            times.append((n + 1) * config.dt)
            ps.append(p)
            qs.append(q)
            ms.append(mass(p, q))
    return DiracTrajectory(config, np.array(times), np.array(ps), np.array(qs), np.array(ms))


def dirac_residual(traj: DiracTrajectory) -> float:
    """``sum dt ||-i d_t psi + (D . alpha + m beta) psi - lambda (V*|psi|^2) psi||`` over interior samples."""
    cfg = traj.config
    psi = traj.psi
    if len(psi) < 3:
        raise ValueError("residual needs at least 3 samples")
    tau = float(traj.times[1] - traj.times[0])
    dyn = DiracDynamics(cfg.grid, cfg.m, cfg.mu0, cfg.coupling)
    total = 0.0
    for n in range(1, len(psi) - 1):
        defect = -1j * (psi[n + 1] - psi[n - 1]) / (2 * tau) + _apply_h(cfg.grid, psi[n], cfg.m)
        if cfg.coupling != 0:
            defect = defect - cfg.coupling * dyn.nonlinear(psi[n])
        total += tau * math.sqrt(cfg.grid.modal_weight * float(np.sum(np.abs(defect) ** 2)))
    return total
