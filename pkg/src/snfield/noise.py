"""Driving noise for both formulations.

Gaussian draws come from a counter-based generator: each number is a hash of
``(seed, stream, path_index, step_index, point)``, so any increment can be
recomputed alone and whole ensembles are generated in one vectorised call with
no dependence on how paths are split between workers.

White-noise increments are stored as densities: the value at a node is the
cell increment W([t, t+dt] x cell) divided by dx^N, hence has variance
dt / dx^N.  Smoothing by a profile phi is then a plain grid convolution.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from .grid import Field, Grid, GridMismatch, convolve, read_values, write_values

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_GAMMA2 = np.uint64(0xD1B54A32D192ED03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1

WHITE_STREAM = 0
QWIENER_STREAM = 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def standard_normals(seed: int, paths, step: int, count: int, stream: int = WHITE_STREAM) -> np.ndarray:
    """Standard normals of shape (len(paths), count), a pure function of the counters."""
    paths = np.atleast_1d(np.asarray(paths, dtype=np.uint64))
    with np.errstate(over="ignore"):
        base = _mix(np.array([(int(seed) & _MASK64)], dtype=np.uint64) + _GAMMA * np.uint64(stream + 1))
        kp = _mix(base ^ _mix((paths + np.uint64(1)) * _GAMMA))
        ks = _mix(kp + np.uint64((int(step) + 1) & _MASK64) * _GAMMA2)
        idx = (np.arange(count, dtype=np.uint64) + np.uint64(1)) * _GAMMA
        h = _mix(_mix(ks[:, None] ^ idx[None, :]))
    u = ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


@dataclass(frozen=True)
class RngStream:
    seed: int
    path_index: int = 0
    step_index: int = 0

    def at_step(self, step: int) -> "RngStream":
        return RngStream(self.seed, self.path_index, step)


# --- white and smoothed increments -------------------------------------------

def white_increments(grid: Grid, dt: float, seed: int, paths, step: int) -> np.ndarray:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return np.sqrt(dt / grid.cell) * standard_normals(seed, paths, step, grid.size)


def white_increment(grid: Grid, dt: float, rng: RngStream) -> Field:
    """Density of the space-time white noise over [t, t+dt] x cell, per node."""
    return Field(grid, white_increments(grid, dt, rng.seed, [rng.path_index], rng.step_index)[0])


class NoiseMode(str, enum.Enum):
    SMOOTHED_WHITE = "SmoothedWhite"
    QWIENER = "QWiener"


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Finite eigen-expansion of Q: eigenvalues and grid-orthonormal basis rows."""

    lambdas: np.ndarray
    basis: np.ndarray = field(repr=False)

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float).reshape(-1)
        basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        if lam.size == 0:
            raise ValueError("spectrum is empty")
        if basis.shape[0] != lam.size:
            raise ValueError(f"{lam.size} eigenvalues but {basis.shape[0]} basis fields")
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise ValueError("eigenvalues must be finite and non-negative")
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "basis", basis)

    @property
    def trace(self) -> float:
        return float(np.sum(self.lambdas))

    def check_orthonormal(self, grid: Grid, tol: float = 1e-8) -> float:
        gram = grid.cell * self.basis @ self.basis.T
        err = float(np.max(np.abs(gram - np.eye(len(self.lambdas)))))
        if err > tol:
            raise ValueError(f"basis is not orthonormal (max Gram defect {err:.3g})")
        return err

    @classmethod
    def from_fields(cls, pairs) -> "Spectrum":
        pairs = list(pairs)
        return cls(np.array([p[0] for p in pairs]), np.stack([np.asarray(p[1]) for p in pairs]))


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    phi: Field
    mode: NoiseMode = NoiseMode.SMOOTHED_WHITE
    spectrum: Spectrum | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", NoiseMode(self.mode))
        if self.mode is NoiseMode.SMOOTHED_WHITE:
            if not integrate_sq(self.phi) > 0:
                raise ValueError("phi must have positive L2 norm")
        else:
            if self.spectrum is None:
                raise ValueError("Q-Wiener noise needs a spectrum")
            if self.spectrum.basis.shape[1] != self.grid.size:
                raise GridMismatch("spectrum basis does not live on phi's grid")
            self.spectrum.check_orthonormal(self.grid)

    @property
    def grid(self) -> Grid:
        return self.phi.grid

    @cached_property
    def phi_hat(self) -> np.ndarray:
        return self.grid.fft_kernel(self.phi.values)


def integrate_sq(f: Field) -> float:
    return f.grid.cell * float(np.sum(f.values**2))


def smoothed_white(phi: Field, seed: int = 0) -> NoiseSpec:
    return NoiseSpec(phi, NoiseMode.SMOOTHED_WHITE, None, seed)


def qwiener(phi: Field, spectrum: Spectrum, seed: int = 0) -> NoiseSpec:
    return NoiseSpec(phi, NoiseMode.QWIENER, spectrum, seed)


def smoothed_increments(spec: NoiseSpec, dt: float, paths, step: int) -> np.ndarray:
    white = white_increments(spec.grid, dt, spec.seed, paths, step)
    return spec.grid.apply_fft_kernel(spec.phi_hat, white)


def smoothed_increment(spec: NoiseSpec, grid: Grid, dt: float, rng: RngStream) -> Field:
    """Increment of W^phi over one step: phi convolved with the white increment."""
    if grid != spec.grid:
        raise GridMismatch(f"{grid.spec} != {spec.grid.spec}")
    if spec.mode is not NoiseMode.SMOOTHED_WHITE:
        raise ValueError("smoothed_increment needs SmoothedWhite noise")
    s = NoiseSpec(spec.phi, spec.mode, None, rng.seed)
    return Field(grid, smoothed_increments(s, dt, [rng.path_index], rng.step_index)[0])


def qwiener_increments(spec: NoiseSpec, dt: float, paths, step: int) -> np.ndarray:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    sp = spec.spectrum
    if sp is None:
        raise ValueError("Q-Wiener noise needs a spectrum")
    z = standard_normals(spec.seed, paths, step, len(sp.lambdas), stream=QWIENER_STREAM)
    return (z * np.sqrt(sp.lambdas * dt)) @ sp.basis


def qwiener_increment(spec: NoiseSpec, dt: float, rng: RngStream) -> Field:
    """Truncated expansion sum_k sqrt(lambda_k) (beta_k(t+dt) - beta_k(t)) e_k."""
    s = NoiseSpec(spec.phi, spec.mode, spec.spectrum, rng.seed)
    return Field(spec.grid, qwiener_increments(s, dt, [rng.path_index], rng.step_index)[0])


# --- covariance and regularity ---------------------------------------------

def analytic_covariance(phi: Field) -> Field:
    """Spatial covariance per unit time of W^phi: phi convolved with its reflection."""
    return convolve(phi, phi.reflected())


def fourier_spectrum(c: Field, n_modes: int | None = None) -> Spectrum:
    """Real Fourier modes diagonalising convolution with an even covariance c.

    Eigenvalues are returned in decreasing order; ``n_modes`` truncates.
    """
    g = c.grid
    sym = g.cell * np.fft.fftn(np.fft.ifftshift(c.nd)).reshape(-1)
    if np.max(np.abs(sym.imag)) > 1e-9 * max(1.0, np.max(np.abs(sym.real))):
        raise ValueError("covariance is not even; real Fourier modes do not diagonalise it")
    eig = np.clip(sym.real, 0.0, None)
    multi = np.array(np.unravel_index(np.arange(g.size), g.shape))
    conj = np.ravel_multi_index(tuple((-multi) % g.n), g.shape)
    phase_idx = np.array(np.unravel_index(np.arange(g.size), g.shape))
    lams, rows = [], []
    norm = 1.0 / np.sqrt(g.volume)
    for k in range(g.size):
        kc = conj[k]
        if kc < k:
            continue
        theta = 2.0 * np.pi * (multi[:, k] @ phase_idx) / g.n
        if kc == k:
            lams.append(eig[k])
            rows.append(norm * np.cos(theta))
        else:
            lams += [eig[k], eig[k]]
            rows += [np.sqrt(2.0) * norm * np.cos(theta), np.sqrt(2.0) * norm * np.sin(theta)]
    lams = np.array(lams)
    order = np.argsort(-lams, kind="stable")
    if n_modes is not None:
        order = order[:n_modes]
    return Spectrum(lams[order], np.array(rows)[order])


def matched_qwiener(phi: Field, seed: int = 0, n_modes: int | None = None) -> NoiseSpec:
    """Q-Wiener noise whose covariance equals that of the phi-smoothed white noise.

    Q carries the full covariance phi * phi~, so the smoothing profile of the
    returned spec is the discrete delta.
    """
    sp = fourier_spectrum(analytic_covariance(phi), n_modes)
    return qwiener(phi.grid.delta(), sp, seed)


def nikolskii_constant(phi: Field, alpha: float) -> float:
    """max_z ||phi - tau_z phi||_2 / |z|^alpha over z in {1,2,4,8} dx on each axis."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    g = phi.grid
    best = 0.0
    for ax in range(g.dim):
        for k in (1, 2, 4, 8):
            d = phi.values - g.roll(phi.values, k, axis=ax)
            best = max(best, np.sqrt(g.cell * np.sum(d**2)) / (k * g.dx) ** alpha)
    return float(best)


# --- phi profiles ----------------------------------------------------------

def delta_profile(grid: Grid) -> Field:
    return grid.delta()


def indicator(grid: Grid, h: float = 1.0) -> Field:
    """Indicator of the half-open cube [-h/2, h/2)^N, matching the half-open cells."""
    eps = 1e-9 * grid.dx
    inside = np.all((grid.points >= -h / 2 - eps) & (grid.points < h / 2 - eps), axis=-1)
    return Field(grid, inside.astype(float))


def gaussian_profile(grid: Grid, s: float = 1.0) -> Field:
    """phi(x) = exp(-|x|^2 / s^2)."""
    return Field(grid, np.exp(-(grid.radius**2) / s**2))


# --- spectrum files ----------------------------------------------------------

def write_spectrum(path, spectrum: Spectrum, grid: Grid) -> Path:
    """Text file of ``lambda  relative/field/path`` lines plus one field file per mode."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for k, (lam, row) in enumerate(zip(spectrum.lambdas, spectrum.basis)):
        rel = f"{path.stem}_modes/mode{k:05d}"
        write_values(path.parent / rel, row, grid, "spectrum_mode", eigenvalue=float(lam))
        lines.append(f"{float(lam)!r} {rel}.bin")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_spectrum(path) -> tuple[Spectrum, Grid]:
    path = Path(path)
    lams, rows, grid = [], [], None
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            lam, rel = line.split(None, 1)
            lams.append(float(lam))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: expected '<lambda> <field path>'") from None
        values, g, _ = read_values(path.parent / rel.strip())
        if grid is not None and g != grid:
            raise GridMismatch(f"{path}:{lineno}: mode lives on a different grid")
        grid = g
        rows.append(values.reshape(-1))
    if grid is None:
        raise ValueError(f"{path}: spectrum is empty")
    return Spectrum(np.array(lams), np.stack(rows)), grid
