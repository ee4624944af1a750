"""Periodic box discretisation of R^N, rectangle-rule quadrature and FFT convolution.

The box is ``[-L, L)^N`` with ``n`` points per axis.  Values are stored flat in
row-major order (axis 0 slowest).  Every array-level helper accepts leading
batch dimensions so that whole path ensembles can be pushed through in one call.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np


class GridError(ValueError):
    pass


class OddMeshCount(GridError):
    pass


class GridMismatch(GridError):
    pass


class NonFiniteField(GridError):
    pass


@dataclass(frozen=True)
class GridSpec:
    dim: int
    half_width: float
    points_per_dim: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise GridError(f"dim must be 1 or 2, got {self.dim}")
        if not self.half_width > 0:
            raise GridError(f"half_width must be positive, got {self.half_width}")
        n = self.points_per_dim
        if n % 2:
            raise OddMeshCount(f"points_per_dim must be even, got {n}")
        if n < 4:
            raise GridError(f"points_per_dim must be >= 4, got {n}")

    @property
    def mesh(self) -> float:
        return 2.0 * self.half_width / self.points_per_dim


@dataclass(frozen=True, eq=False)
class Grid:
    spec: GridSpec

    def __eq__(self, other):
        return isinstance(other, Grid) and self.spec == other.spec

    def __hash__(self):
        return hash(self.spec)

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def n(self) -> int:
        return self.spec.points_per_dim

    @property
    def half_width(self) -> float:
        return self.spec.half_width

    @property
    def dx(self) -> float:
        return self.spec.mesh

    @property
    def cell(self) -> float:
        """Cell volume dx^N, the quadrature weight."""
        return self.dx**self.dim

    @property
    def volume(self) -> float:
        return (2.0 * self.half_width) ** self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.half_width + self.dx * np.arange(self.n)

    @cached_property
    def points(self) -> np.ndarray:
        """Coordinates of every node, shape (size, dim), row-major order."""
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def radius(self) -> np.ndarray:
        return np.sqrt(np.sum(self.points**2, axis=-1))

    @property
    def origin_index(self) -> int:
        return self.flat_index((self.n // 2,) * self.dim)

    def flat_index(self, multi) -> int:
        return int(np.ravel_multi_index(tuple(multi), self.shape))

    def coord(self, flat: int) -> np.ndarray:
        return self.points[flat]

    def sample(self, func) -> "Field":
        """Sample ``func(points)`` at the nodes; ``points`` has shape (size, dim)."""
        return Field(self, np.asarray(func(self.points), dtype=float).reshape(self.size))

    def constant(self, value: float = 1.0) -> "Field":
        return Field(self, np.full(self.size, float(value)))

    def delta(self) -> "Field":
        """Discrete Dirac mass: 1/dx^N at the origin node."""
        v = np.zeros(self.size)
        v[self.origin_index] = 1.0 / self.cell
        return Field(self, v)

    def doubled(self) -> "Grid":
        """Box of twice the half-width at the same mesh size."""
        return make_grid(GridSpec(self.dim, 2.0 * self.half_width, 2 * self.n))

    def reflect(self, values: np.ndarray) -> np.ndarray:
        """Values of x -> f(-x); index k maps to (n - k) mod n on every axis."""
        idx = (-np.arange(self.n)) % self.n
        a = np.asarray(values).reshape(values.shape[:-1] + self.shape)
        for ax in range(self.dim):
            a = np.take(a, idx, axis=a.ndim - self.dim + ax)
        return a.reshape(values.shape)

    def roll(self, values: np.ndarray, shift: int, axis: int = 0) -> np.ndarray:
        """Periodic shift: result[x] = values[x + shift*dx] along ``axis``."""
        a = np.asarray(values).reshape(values.shape[:-1] + self.shape)
        a = np.roll(a, -shift, axis=a.ndim - self.dim + axis)
        return a.reshape(values.shape)

    def fft_kernel(self, profile: np.ndarray) -> np.ndarray:
        """Transfer function of h -> dx^N sum_j profile(x - x_j) h(x_j)."""
        p = np.asarray(profile, dtype=float).reshape(self.shape)
        return self.cell * np.fft.rfftn(np.fft.ifftshift(p))

    def apply_fft_kernel(self, khat: np.ndarray, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        batch = u.shape[:-1]
        axes = tuple(range(len(batch), len(batch) + self.dim))
        a = u.reshape(batch + self.shape)
        out = np.fft.irfftn(np.fft.rfftn(a, axes=axes) * khat, s=self.shape, axes=axes)
        return out.reshape(u.shape)


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size != self.grid.size:
            raise GridMismatch(f"field has {v.size} values, grid has {self.grid.size}")
        if not np.all(np.isfinite(v)):
            raise NonFiniteField("field contains NaN or Inf")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self):
        return self.values.size

    @property
    def nd(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def reflected(self) -> "Field":
        return Field(self.grid, self.grid.reflect(self.values))


def make_grid(spec: GridSpec) -> Grid:
    return Grid(spec)


def _same_grid(*fields: Field) -> Grid:
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridMismatch(f"{f.grid.spec} != {g.spec}")
    return g


def integrate(f: Field, weight: Field | None = None) -> float:
    if weight is None:
        return f.grid.cell * float(np.sum(f.values))
    g = _same_grid(f, weight)
    return g.cell * float(np.sum(f.values * weight.values))


def convolve(profile: Field, u: Field) -> Field:
    """(profile * u)(x_i) = dx^N sum_j profile(x_i - x_j) u(x_j), periodic."""
    g = _same_grid(profile, u)
    return Field(g, g.apply_fft_kernel(g.fft_kernel(profile.values), u.values))


# --- field files -----------------------------------------------------------

def _paths(path) -> tuple[Path, Path]:
    p = Path(path)
    if p.suffix in (".bin", ".json"):
        p = p.with_suffix("")
    return p.with_suffix(".bin"), p.with_suffix(".json")


def write_values(path, values: np.ndarray, grid: Grid, role: str, **extra) -> Path:
    """Write raw little-endian float64 values plus a JSON sidecar."""
    bin_path, meta_path = _paths(path)
    bin_path.parent.mkdir(parents=True, exist_ok=True)
    values = np.ascontiguousarray(values, dtype="<f8")
    if values.shape[-1] != grid.size:
        raise GridMismatch(f"trailing axis {values.shape[-1]} != grid size {grid.size}")
    bin_path.write_bytes(values.tobytes())
    meta = {
        "dim": grid.dim,
        "half_width": grid.half_width,
        "points_per_dim": grid.n,
        "role": role,
    }
    if values.ndim > 1:
        meta["shape"] = list(values.shape)
    meta.update(extra)
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return bin_path


def read_values(path) -> tuple[np.ndarray, Grid, dict]:
    bin_path, meta_path = _paths(path)
    meta = json.loads(meta_path.read_text())
    grid = make_grid(GridSpec(int(meta["dim"]), float(meta["half_width"]), int(meta["points_per_dim"])))
    values = np.frombuffer(bin_path.read_bytes(), dtype="<f8").astype(float)
    shape = tuple(meta.get("shape", (grid.size,)))
    return values.reshape(shape), grid, meta


def save_field(path, f: Field, role: str = "field") -> Path:
    return write_values(path, f.values, f.grid, role)


def load_field(path) -> Field:
    values, grid, _ = read_values(path)
    return Field(grid, values)
