"""Neural field kernels, integrability conditions and the weight eigenproblem.

A kernel is either homogeneous, w(x, y) = w(x - y), stored as a sampled
profile and applied by FFT convolution, or general, stored as a dense
``size x size`` matrix.  Kernels built from an analytic form keep that form so
the condition certifier can re-sample them on a doubled box.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np

from .grid import Field, Grid, GridMismatch, GridSpec, NonFiniteField, make_grid

MAX_DENSE_POINTS = 4096
DIVERGENCE_RATIO = 1.05
NEGATIVITY_TOL = 1e-8
_ROW_CHUNK = 256


class KernelError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


class Verdict(str, enum.Enum):
    HOLDS = "Holds"
    FAILS = "Fails"
    DIVERGES = "DivergesUnderRefinement"


class Condition(str, enum.Enum):
    C1 = "C1"
    C2 = "C2"
    C2PRIME = "C2prime"
    C3PRIME = "C3prime"


@dataclass(frozen=True, eq=False)
class KernelModel:
    """Sampled neural field kernel on a grid.

    ``profile_fn(grid)`` re-samples a homogeneous profile, ``entry_fn(x, y)``
    evaluates a general kernel on point blocks of shape (m, dim) and (k, dim).
    """

    grid: Grid
    profile: np.ndarray | None = field(default=None, repr=False)
    entry_fn: Callable | None = field(default=None, repr=False)
    profile_fn: Callable | None = field(default=None, repr=False)
    name: str = "kernel"
    _matrix: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if (self.profile is None) == (self.entry_fn is None and self._matrix is None):
            raise KernelError("give exactly one of a homogeneous profile or a general kernel")
        if self.profile is not None:
            p = np.array(self.profile, dtype=float).reshape(-1)
            if p.size != self.grid.size:
                raise GridMismatch(f"profile has {p.size} values, grid has {self.grid.size}")
            if not np.all(np.isfinite(p)):
                raise NonFiniteField("kernel profile is not finite")
            p.setflags(write=False)
            object.__setattr__(self, "profile", p)
        elif self._matrix is not None:
            m = np.asarray(self._matrix, dtype=float)
            if m.shape != (self.grid.size, self.grid.size):
                raise GridMismatch(f"matrix shape {m.shape} does not match grid size {self.grid.size}")
            if not np.all(np.isfinite(m)):
                raise NonFiniteField("kernel matrix is not finite")

    @property
    def homogeneous(self) -> bool:
        return self.profile is not None

    @property
    def kind(self) -> str:
        return "Homogeneous" if self.homogeneous else "General"

    @cached_property
    def matrix(self) -> np.ndarray:
        """Dense w(x_i, y_j); homogeneous kernels are expanded with periodic lags."""
        if self._matrix is not None:
            return np.asarray(self._matrix, dtype=float)
        g = self.grid
        if g.size > MAX_DENSE_POINTS:
            raise KernelError(f"dense kernel capped at {MAX_DENSE_POINTS} points, grid has {g.size}")
        if self.homogeneous:
            multi = np.array(np.unravel_index(np.arange(g.size), g.shape))
            lag = (multi[:, :, None] - multi[:, None, :] + g.n // 2) % g.n
            return self.profile[np.ravel_multi_index(tuple(lag), g.shape)]
        m = np.asarray(self.entry_fn(g.points, g.points), dtype=float)
        if not np.all(np.isfinite(m)):
            raise NonFiniteField("kernel matrix is not finite")
        return m

    @cached_property
    def _khat(self):
        return self.grid.fft_kernel(self.profile)

    @cached_property
    def _khat_t(self):
        return self.grid.fft_kernel(self.grid.reflect(self.profile))

    @cached_property
    def _khat_abs(self):
        return self.grid.fft_kernel(np.abs(self.profile))

    @cached_property
    def _khat_abs_t(self):
        return self.grid.fft_kernel(self.grid.reflect(np.abs(self.profile)))

    def on(self, grid: Grid) -> "KernelModel":
        """The same analytic kernel sampled on another grid."""
        if self.homogeneous:
            if self.profile_fn is None:
                raise KernelError(f"kernel {self.name!r} has no analytic profile to re-sample")
            return homogeneous(grid, self.profile_fn, name=self.name)
        if self.entry_fn is None:
            raise KernelError(f"kernel {self.name!r} has no analytic form to re-sample")
        return general(grid, self.entry_fn, name=self.name)

    def scaled(self, c: float) -> "KernelModel":
        if self.homogeneous:
            pf = None if self.profile_fn is None else (lambda g, f=self.profile_fn: c * f(g))
            return KernelModel(self.grid, profile=c * self.profile, profile_fn=pf, name=f"{c}*{self.name}")
        ef = None if self.entry_fn is None else (lambda x, y, f=self.entry_fn: c * f(x, y))
        mat = None if self.entry_fn is not None else c * self.matrix
        return KernelModel(self.grid, entry_fn=ef, name=f"{c}*{self.name}", _matrix=mat)


# --- constructors ------------------------------------------------------------

def homogeneous(grid: Grid, profile_fn: Callable[[Grid], np.ndarray], name: str = "homogeneous") -> KernelModel:
    return KernelModel(grid, profile=profile_fn(grid), profile_fn=profile_fn, name=name)


def general(grid: Grid, entry_fn: Callable, name: str = "general") -> KernelModel:
    return KernelModel(grid, entry_fn=entry_fn, name=name)


def from_matrix(grid: Grid, matrix: np.ndarray, name: str = "matrix") -> KernelModel:
    return KernelModel(grid, name=name, _matrix=np.asarray(matrix, dtype=float))


def from_profile(grid: Grid, profile, name: str = "profile") -> KernelModel:
    return KernelModel(grid, profile=np.asarray(profile, dtype=float), name=name)


def gaussian(grid: Grid, a: float = 1.0, s: float = 1.0) -> KernelModel:
    """w(r) = a exp(-|r|^2 / s^2)."""
    return homogeneous(grid, lambda g: a * np.exp(-(g.radius**2) / s**2), name=f"gaussian({a},{s})")


def mexican_hat(grid: Grid, a1: float = 2.0, s1: float = 1.0, a2: float = 1.0, s2: float = 2.0) -> KernelModel:
    """w(r) = a1 exp(-|r|^2/s1^2) - a2 exp(-|r|^2/s2^2)."""
    def prof(g):
        r2 = g.radius**2
        return a1 * np.exp(-r2 / s1**2) - a2 * np.exp(-r2 / s2**2)

    return homogeneous(grid, prof, name=f"mexican_hat({a1},{s1},{a2},{s2})")


def exponential(grid: Grid, a: float = 1.0, s: float = 1.0) -> KernelModel:
    return homogeneous(grid, lambda g: a * np.exp(-g.radius / s), name=f"exponential({a},{s})")


def delta(grid: Grid) -> KernelModel:
    """Identity operator: the discrete Dirac profile."""
    return homogeneous(grid, lambda g: g.delta().values, name="delta")


def zero(grid: Grid) -> KernelModel:
    return homogeneous(grid, lambda g: np.zeros(g.size), name="zero")


def normalized_gaussian(grid: Grid, s: float = 1.0) -> KernelModel:
    """Gaussian profile rescaled so that its grid quadrature is exactly 1."""
    def prof(g):
        p = np.exp(-(g.radius**2) / s**2)
        return p / (g.cell * p.sum())

    return homogeneous(grid, prof, name=f"normalized_gaussian({s})")


def rank_one_gaussian(grid: Grid) -> KernelModel:
    """w(x, y) = u(x) u(y) with u(x) = exp(-|x|^2 / 2)."""
    def entries(x, y):
        ux = np.exp(-0.5 * np.sum(x**2, axis=-1))
        uy = np.exp(-0.5 * np.sum(y**2, axis=-1))
        return np.outer(ux, uy)

    return general(grid, entries, name="rank_one_gaussian")


def separable_decay(grid: Grid) -> KernelModel:
    """w(x, y) = (1+|x|)^-1 (1+|y|)^-1: square integrable, rows not in L^2(L^1)."""
    def entries(x, y):
        return np.outer(1.0 / (1.0 + np.linalg.norm(x, axis=-1)), 1.0 / (1.0 + np.linalg.norm(y, axis=-1)))

    return general(grid, entries, name="separable_decay")


# --- application -------------------------------------------------------------

def apply_kernel(K: KernelModel, h, absolute: bool = False, transpose: bool = False) -> np.ndarray:
    """dx^N sum_j w(x_i, y_j) h(y_j), with |w| and/or w(y_j, x_i) on request.

    ``h`` may be a Field or an array with leading batch axes; an array of the
    same shape is returned (a Field for Field input).
    """
    as_field = isinstance(h, Field)
    if as_field and h.grid != K.grid:
        raise GridMismatch(f"{h.grid.spec} != {K.grid.spec}")
    arr = np.asarray(h, dtype=float)
    if arr.shape[-1] != K.grid.size:
        raise GridMismatch(f"trailing axis {arr.shape[-1]} != grid size {K.grid.size}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteField("kernel input is not finite")
    if K.homogeneous:
        khat = {
            (False, False): "_khat",
            (False, True): "_khat_t",
            (True, False): "_khat_abs",
            (True, True): "_khat_abs_t",
        }[(absolute, transpose)]
        out = K.grid.apply_fft_kernel(getattr(K, khat), arr)
    else:
        m = np.abs(K.matrix) if absolute else K.matrix
        out = K.grid.cell * (arr @ (m if transpose else m.T))
    return Field(K.grid, out) if as_field else out


# --- conditions --------------------------------------------------------------

@dataclass
class ConditionReport:
    condition: Condition
    verdict: Verdict
    value_at_L: float
    value_at_2L: float
    constant: float | None = None
    alpha: float | None = None

    @property
    def ratio(self) -> float:
        if self.value_at_L == 0.0:
            return 1.0 if self.value_at_2L == 0.0 else np.inf
        return self.value_at_2L / self.value_at_L


_SHIFTS = (1, 2, 4)


def _homogeneous_quantity(K: KernelModel, cond: Condition, alpha):
    g, p = K.grid, K.profile
    l1 = g.cell * np.sum(np.abs(p))
    if cond is Condition.C1:
        return g.volume * g.cell * np.sum(p**2)
    if cond is Condition.C2:
        return g.volume * l1**2
    if cond is Condition.C2PRIME:
        return l1
    best = 0.0
    for ax in range(g.dim):
        for k in _SHIFTS:
            diff = g.cell * np.sum(np.abs(p - g.roll(p, k, axis=ax)))
            best = max(best, diff / (k * g.dx) ** alpha)
    return best


def _general_quantity(K: KernelModel, cond: Condition, alpha):
    g = K.grid

    def rows(sl):
        if K.entry_fn is None:
            return K.matrix[sl]
        return np.asarray(K.entry_fn(g.points[sl], g.points), dtype=float)
    acc = 0.0
    for start in range(0, g.size, _ROW_CHUNK):
        sl = slice(start, min(start + _ROW_CHUNK, g.size))
        block = rows(sl)
        if cond is Condition.C1:
            acc += g.cell**2 * np.sum(block**2)
        elif cond is Condition.C2:
            acc += g.cell * np.sum((g.cell * np.sum(np.abs(block), axis=1)) ** 2)
        elif cond is Condition.C2PRIME:
            acc = max(acc, float(np.max(g.cell * np.sum(np.abs(block), axis=1))))
        else:
            acc = max(acc, _general_holder_block(K, g, sl, block, alpha))
    return acc


def _general_holder_block(K, g, sl, block, alpha):
    best = 0.0
    multi = np.array(np.unravel_index(np.arange(sl.start, sl.stop), g.shape)).T
    for ax in range(g.dim):
        for k in _SHIFTS:
            tgt = multi.copy()
            tgt[:, ax] += k
            ok = tgt[:, ax] < g.n
            if not ok.any():
                continue
            flat = np.ravel_multi_index(tuple(tgt[ok].T), g.shape)
            if K.entry_fn is None:
                other = K.matrix[flat]
            else:
                other = np.asarray(K.entry_fn(g.points[flat], g.points), dtype=float)
            diff = g.cell * np.sum(np.abs(block[ok] - other), axis=1)
            best = max(best, float(np.max(diff)) / (k * g.dx) ** alpha)
    return best


def condition_value(K: KernelModel, cond, alpha: float | None = None) -> float:
    """The defining quantity of a condition on K's own box."""
    cond = Condition(cond)
    if K.homogeneous:
        return float(_homogeneous_quantity(K, cond, alpha))
    return float(_general_quantity(K, cond, alpha))


def check_condition(K: KernelModel, cond, alpha: float | None = None,
                    ratio_threshold: float = DIVERGENCE_RATIO) -> ConditionReport:
    """Evaluate a condition on the box [-L, L)^N and on [-2L, 2L)^N at the same mesh.

    A quantity that is finite on R^N settles as the box grows; one that grows
    by more than ``ratio_threshold`` under doubling is reported as diverging.
    """
    try:
        cond = Condition(cond)
    except ValueError:
        raise KernelError(f"unknown condition {cond!r}") from None
    if cond is Condition.C3PRIME:
        if alpha is None:
            raise KernelError("C3prime needs an exponent alpha")
        if not 0.0 < alpha <= 1.0:
            raise KernelError(f"alpha must lie in (0, 1], got {alpha}")
    v1 = condition_value(K, cond, alpha)
    v2 = condition_value(K.on(K.grid.doubled()), cond, alpha)
    report = ConditionReport(cond, Verdict.HOLDS, v1, v2, alpha=alpha)
    if not (np.isfinite(v1) and np.isfinite(v2)):
        report.verdict = Verdict.FAILS
    elif report.ratio >= ratio_threshold:
        report.verdict = Verdict.DIVERGES
    if cond in (Condition.C2PRIME, Condition.C3PRIME):
        report.constant = max(v1, v2)
    return report


# --- weight eigenproblem ---------------------------------------------------

class Method(str, enum.Enum):
    POWER = "PowerIteration"
    FOURIER = "FourierConstruction"


@dataclass
class EigenResult:
    rho: Field
    lam: float
    residual: float
    method: Method
    iterations: int
    min_rho: float = 0.0


def verify_c1prime(K: KernelModel, rho: Field, lam: float) -> float:
    """Largest violation of int |w(x,y)| rho(x) dx <= lam rho(y), relative to sup rho."""
    r = np.asarray(rho, dtype=float)
    top = float(np.max(r))
    if top <= 0 or float(np.min(r)) < -NEGATIVITY_TOL * top:
        raise KernelError("weight must be non-negative and not identically zero")
    if not lam > 0:
        raise KernelError(f"lambda must be positive, got {lam}")
    jr = apply_kernel(K, r, absolute=True, transpose=True)
    return float(np.max(jr - lam * r)) / top


def solve_rho_power(K: KernelModel, tol: float = 1e-10, max_iter: int = 10_000) -> EigenResult:
    """Leading eigenpair of J h(y) = int |w(x, y)| h(x) dx by power iteration.

    Starts from the constant field and keeps int rho = 1, so the eigenvalue
    estimate is simply int J rho.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    g = K.grid
    rho = np.full(g.size, 1.0 / g.volume)
    for it in range(1, max_iter + 1):
        jr = apply_kernel(K, rho, absolute=True, transpose=True)
        lam = g.cell * float(np.sum(jr))
        if not lam > 0:
            raise KernelError("kernel is identically zero; J has no positive eigenvalue")
        resid = float(np.max(np.abs(jr - lam * rho))) / (lam * float(np.max(rho)))
        if resid < tol:
            return EigenResult(Field(g, rho), lam, resid, Method.POWER, it, float(np.min(rho)))
        rho = jr / lam
    raise ConvergenceError(f"power iteration did not reach {tol:g} in {max_iter} steps (last {resid:.3g})")


def solve_rho_fourier(K: KernelModel) -> EigenResult:
    """Weight from the resolvent construction for homogeneous kernels.

    With v = |w| and lam = ||w||_1 + 1, rho solves lam rho - v~ * rho = z for
    z = exp(-|x|^2/2).  The symbol lam - v^ is at least 1 in modulus, and the
    Neumann series of the resolvent keeps rho non-negative.
    """
    if not K.homogeneous:
        raise KernelError("the Fourier construction needs a homogeneous kernel")
    g = K.grid
    v = np.abs(K.profile)
    lam = g.cell * float(np.sum(v)) + 1.0
    denom = lam - K._khat_abs_t
    if float(np.min(np.abs(denom))) < 1.0 - 1e-9:
        raise KernelError("resolvent symbol dropped below 1")
    z = np.exp(-0.5 * g.radius**2).reshape(g.shape)
    axes = tuple(range(g.dim))
    rho = np.fft.irfftn(np.fft.rfftn(z) / denom, s=g.shape, axes=axes).reshape(-1)
    rho /= g.cell * np.sum(rho)
    top, low = float(np.max(rho)), float(np.min(rho))
    if low < -NEGATIVITY_TOL * top:
        raise KernelError(f"weight has a negative lobe {low:.3g} (max {top:.3g})")
    jr = apply_kernel(K, rho, absolute=True, transpose=True)
    resid = max(0.0, float(np.max(jr - lam * rho))) / top
    return EigenResult(Field(g, rho), lam, resid, Method.FOURIER, 1, low)


# --- kernel matrix files -----------------------------------------------------

def write_kernel_matrix(path, matrix: np.ndarray, grid: Grid) -> Path:
    """General kernel file: int64 (rows, cols) header, then row-major float64, little-endian."""
    m = np.ascontiguousarray(matrix, dtype="<f8")
    if m.shape != (grid.size, grid.size):
        raise GridMismatch(f"matrix shape {m.shape} != ({grid.size}, {grid.size})")
    p = Path(path).with_suffix(".bin")
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_bytes(np.array(m.shape, dtype="<i8").tobytes() + m.tobytes())
    meta = {"dim": grid.dim, "half_width": grid.half_width, "points_per_dim": grid.n, "role": "kernel"}
    p.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return p


def read_kernel_matrix(path) -> tuple[np.ndarray, Grid]:
    p = Path(path).with_suffix(".bin")
    meta = json.loads(p.with_suffix(".json").read_text())
    grid = make_grid(GridSpec(int(meta["dim"]), float(meta["half_width"]), int(meta["points_per_dim"])))
    raw = p.read_bytes()
    if len(raw) < 16:
        raise KernelError(f"{p}: missing shape header")
    rows, cols = (int(v) for v in np.frombuffer(raw[:16], dtype="<i8"))
    if (rows, cols) != (grid.size, grid.size):
        raise GridMismatch(f"{p}: header shape ({rows}, {cols}) does not match a grid of {grid.size} points")
    if len(raw) != 16 + 8 * rows * cols:
        raise KernelError(f"{p}: expected {rows * cols} values after the header")
    return np.frombuffer(raw[16:], dtype="<f8").reshape(rows, cols).astype(float), grid


def load_kernel(path, name: str | None = None) -> KernelModel:
    m, grid = read_kernel_matrix(path)
    return from_matrix(grid, m, name=name or Path(path).stem)
