"""Time stepping of the stochastic neural field equation in mild form.

    dY = (-Y + F(Y)) dt + sigma(Y) dW^phi,    F(Y)(x) = int w(x, y) G(Y(y)) dy

Both the random-field route (white noise smoothed by phi) and the Hilbert route
(truncated Q-Wiener noise, then smoothed) share one stepping loop.  States are
arrays of shape (paths, size); a single path is just a batch of one.
"""

from __future__ import annotations

import enum
import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .grid import Field, Grid, GridMismatch
from .kernels import KernelModel, apply_kernel, condition_value
from .noise import NoiseMode, NoiseSpec, integrate_sq, qwiener_increments, smoothed_increments

BLOWUP = 1e12
PATH_BLOCK = 256


class BlowUpError(RuntimeError):
    pass


# --- gain and diffusion menus ------------------------------------------------

@dataclass(frozen=True)
class Sigmoid:
    slope: float = 1.0

    def __call__(self, a):
        return expit(self.slope * a)

    @property
    def lipschitz(self) -> float:
        return abs(self.slope) / 4.0

    @property
    def bound(self) -> float:
        return 1.0


@dataclass(frozen=True)
class SmoothHeaviside:
    """0.5 (1 + tanh(a / width)), a smoothed step."""

    width: float = 0.1

    def __call__(self, a):
        return 0.5 * (1.0 + np.tanh(a / self.width))

    @property
    def lipschitz(self) -> float:
        return 0.5 / self.width

    @property
    def bound(self) -> float:
        return 1.0


@dataclass(frozen=True)
class ConstantGain:
    c: float = 0.0

    def __call__(self, a):
        return np.full_like(np.asarray(a, dtype=float), self.c)

    @property
    def lipschitz(self) -> float:
        return 0.0

    @property
    def bound(self) -> float:
        return abs(self.c)


@dataclass(frozen=True)
class ConstantDiffusion:
    s0: float = 1.0

    def __call__(self, a):
        return np.full_like(np.asarray(a, dtype=float), self.s0)

    @property
    def lipschitz(self) -> float:
        return abs(self.s0)

    bounded = True


@dataclass(frozen=True)
class Affine:
    """sigma(a) = s0 + s1 a."""

    s0: float = 0.0
    s1: float = 1.0

    def __call__(self, a):
        return self.s0 + self.s1 * np.asarray(a, dtype=float)

    @property
    def lipschitz(self) -> float:
        return max(abs(self.s0), abs(self.s1))

    @property
    def bounded(self) -> bool:
        return self.s1 == 0.0


@dataclass(frozen=True)
class BoundedSmooth:
    """sigma(a) = offset + s0 tanh(a)."""

    s0: float = 1.0
    offset: float = 0.0

    def __call__(self, a):
        return self.offset + self.s0 * np.tanh(a)

    @property
    def lipschitz(self) -> float:
        return abs(self.offset) + abs(self.s0)

    bounded = True


_PROBE = np.linspace(-50.0, 50.0, 1001)


@dataclass(frozen=True, eq=False)
class ModelSpec:
    kernel: KernelModel
    gain: object = field(default_factory=Sigmoid)
    diffusion: object = field(default_factory=ConstantDiffusion)
    initial: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        g = self.kernel.grid
        y0 = np.zeros(g.size) if self.initial is None else np.asarray(self.initial, dtype=float).reshape(-1)
        if y0.size != g.size:
            raise GridMismatch(f"initial state has {y0.size} values, grid has {g.size}")
        if not np.all(np.isfinite(y0)):
            raise ValueError("initial state is not finite")
        object.__setattr__(self, "initial", y0)
        cg, cs = self.C_G, self.C_sigma
        if not (math.isfinite(cg) and math.isfinite(cs)):
            raise ValueError("Lipschitz constants must be finite")
        if np.max(np.abs(self.gain(_PROBE))) > cg * (1 + 1e-12):
            raise ValueError("gain exceeds its declared bound")
        if np.any(np.abs(self.diffusion(_PROBE)) > cs * (1.0 + np.abs(_PROBE)) * (1 + 1e-12)):
            raise ValueError("diffusion violates |sigma(a)| <= C(1 + |a|)")

    @property
    def grid(self) -> Grid:
        return self.kernel.grid

    @property
    def C_G(self) -> float:
        return max(self.gain.bound, self.gain.lipschitz)

    @property
    def C_sigma(self) -> float:
        return self.diffusion.lipschitz

    @property
    def C_w(self) -> float:
        return condition_value(self.kernel, "C2prime")

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(repr((self.kernel.name, self.kernel.grid.spec, self.gain, self.diffusion)).encode())
        if self.kernel.homogeneous:
            h.update(self.kernel.profile.tobytes())
        elif self.kernel._matrix is not None:
            h.update(np.ascontiguousarray(self.kernel._matrix).tobytes())
        h.update(self.initial.tobytes())
        return h.hexdigest()[:16]


class Scheme(str, enum.Enum):
    EXPONENTIAL_EULER = "ExponentialEuler"
    EULER_MARUYAMA = "EulerMaruyama"


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    scheme: Scheme = Scheme.EXPONENTIAL_EULER
    record_every: int = 1
    n_paths: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.dt > self.t_end:
            raise ValueError(f"dt={self.dt} exceeds t_end={self.t_end}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if abs(self.t_end / self.dt - round(self.t_end / self.dt)) > 1e-9 * self.t_end / self.dt:
            raise ValueError(f"t_end={self.t_end} is not a whole number of steps dt={self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def record_steps(self) -> np.ndarray:
        steps = list(range(0, self.n_steps + 1, self.record_every))
        if steps[-1] != self.n_steps:
            steps.append(self.n_steps)
        return np.array(steps)

    def fingerprint(self) -> str:
        return hashlib.sha256(repr(self).encode()).hexdigest()[:16]


@dataclass(eq=False)
class Ensemble:
    """Recorded states of several paths, shape (paths, records, size)."""

    grid: Grid
    times: np.ndarray
    states: np.ndarray = field(repr=False)
    seed: int = 0
    path_indices: np.ndarray | None = None
    model_fingerprint: str = ""
    solver_fingerprint: str = ""

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    def at(self, t: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"time {t} was not recorded")
        return self.states[:, k]

    def path(self, i: int) -> "Trajectory":
        pi = int(self.path_indices[i]) if self.path_indices is not None else i
        return Trajectory(self.grid, self.times, self.states[i], self.seed, pi,
                          self.model_fingerprint, self.solver_fingerprint)


@dataclass(eq=False)
class Trajectory:
    grid: Grid
    times: np.ndarray
    states: np.ndarray = field(repr=False)
    seed: int = 0
    path_index: int = 0
    model_fingerprint: str = ""
    solver_fingerprint: str = ""

    def field_at(self, k: int) -> Field:
        return Field(self.grid, self.states[k])


# --- stepping ----------------------------------------------------------------

def drift_F(model: ModelSpec, Y):
    """F(Y)(x) = int w(x, y) G(Y(y)) dy."""
    if isinstance(Y, Field):
        return Field(Y.grid, drift_F(model, Y.values))
    return apply_kernel(model.kernel, model.gain(np.asarray(Y, dtype=float)))


def noise_weight(dt: float) -> float:
    """sqrt((1 - e^{-2 dt}) / (2 dt)): exact variance of the decayed noise over a step."""
    return math.sqrt(-math.expm1(-2.0 * dt) / (2.0 * dt))


def step(model: ModelSpec, Y, dt: float, dW_phi, scheme=Scheme.EXPONENTIAL_EULER):
    """Advance one step with left-point (Ito) evaluation of F and sigma."""
    if isinstance(Y, Field):
        return Field(Y.grid, step(model, Y.values, dt, np.asarray(dW_phi), scheme))
    y = np.asarray(Y, dtype=float)
    dw = np.asarray(dW_phi, dtype=float)
    if dw.shape != y.shape:
        raise GridMismatch(f"noise shape {dw.shape} != state shape {y.shape}")
    f = drift_F(model, y)
    s = model.diffusion(y)
    if Scheme(scheme) is Scheme.EXPONENTIAL_EULER:
        decay = math.exp(-dt)
        out = decay * y + (-math.expm1(-dt)) * f + noise_weight(dt) * s * dw
    else:
        out = y + dt * (f - y) + s * dw
    _guard(out)
    return out


def _guard(y: np.ndarray, where: str = ""):
    if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > BLOWUP:
        raise BlowUpError(f"state left the bound |Y| <= {BLOWUP:g}{where}")


def _run(model, y0, config: SolverConfig, draw):
    """Shared stepping loop; ``draw(k)`` returns the smoothed increment of step k."""
    y = np.array(y0, dtype=float)
    rec = config.record_steps
    out = np.empty((y.shape[0], len(rec), y.shape[1]))
    out[:, 0] = y
    r = 1
    for k in range(config.n_steps):
        try:
            y = step(model, y, config.dt, draw(k), config.scheme)
        except BlowUpError as e:
            raise BlowUpError(f"{e} at t={(k + 1) * config.dt:g}") from None
        if r < len(rec) and rec[r] == k + 1:
            out[:, r] = y
            r += 1
    return config.dt * rec, out


def _drawer(noise: NoiseSpec, dt: float, seed: int, paths: np.ndarray):
    if noise.mode is NoiseMode.SMOOTHED_WHITE:
        s = NoiseSpec(noise.phi, noise.mode, None, seed)
        return lambda k: smoothed_increments(s, dt, paths, k)
    s = NoiseSpec(noise.phi, noise.mode, noise.spectrum, seed)
    return lambda k: noise.grid.apply_fft_kernel(noise.phi_hat, qwiener_increments(s, dt, paths, k))


def _check(model: ModelSpec, noise: NoiseSpec):
    if noise.grid != model.grid:
        raise GridMismatch(f"noise grid {noise.grid.spec} != model grid {model.grid.spec}")


def solve_ensemble(model: ModelSpec, config: SolverConfig, noise: NoiseSpec, seed: int | None = None,
                   paths=None, threads: int = 1, block: int = PATH_BLOCK) -> Ensemble:
    """Simulate many paths; work is cut into fixed blocks so output does not depend on ``threads``."""
    _check(model, noise)
    seed = noise.seed if seed is None else int(seed)
    paths = np.arange(config.n_paths) if paths is None else np.asarray(paths, dtype=np.int64)
    blocks = [paths[i:i + block] for i in range(0, len(paths), block)]

    def work(p):
        y0 = np.broadcast_to(model.initial, (len(p), model.grid.size))
        return _run(model, y0, config, _drawer(noise, config.dt, seed, p))

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, blocks))
    else:
        results = [work(p) for p in blocks]
    times = results[0][0]
    states = np.concatenate([r[1] for r in results], axis=0)
    return Ensemble(model.grid, times, states, seed, paths, model.fingerprint(), config.fingerprint())


def solve_path(model: ModelSpec, config: SolverConfig, noise: NoiseSpec, seed: int | None = None,
               path_index: int = 0) -> Trajectory:
    """One path of the random-field solution driven by phi-smoothed white noise."""
    if noise.mode is not NoiseMode.SMOOTHED_WHITE:
        raise ValueError("solve_path needs SmoothedWhite noise; use solve_hilbert_path for Q-Wiener")
    return solve_ensemble(model, config, noise, seed, [path_index]).path(0)


def solve_hilbert_path(model: ModelSpec, config: SolverConfig, noise: NoiseSpec, seed: int | None = None,
                       path_index: int = 0) -> Trajectory:
    """One path with noise sigma(Y) . (phi * dW), W a truncated Q-Wiener process."""
    if noise.mode is not NoiseMode.QWIENER:
        raise ValueError("solve_hilbert_path needs Q-Wiener noise")
    return solve_ensemble(model, config, noise, seed, [path_index]).path(0)


# --- frozen noise --------------------------------------------------------------

def draw_increments(noise: NoiseSpec, dt: float, n_steps: int, seed: int | None = None, paths=(0,)) -> np.ndarray:
    """Pre-drawn smoothed increments, shape (n_steps, paths, size)."""
    seed = noise.seed if seed is None else int(seed)
    draw = _drawer(noise, dt, seed, np.asarray(paths, dtype=np.int64))
    return np.stack([draw(k) for k in range(n_steps)])


def coarsen(increments: np.ndarray, factor: int) -> np.ndarray:
    """Sum consecutive groups of ``factor`` increments (same Brownian path, larger dt)."""
    n = increments.shape[0]
    if n % factor:
        raise ValueError(f"{n} increments do not split into groups of {factor}")
    return increments.reshape((n // factor, factor) + increments.shape[1:]).sum(axis=1)


def solve_frozen(model: ModelSpec, config: SolverConfig, increments: np.ndarray, y0=None) -> Ensemble:
    """Integrate on a given noise path: ``increments`` has shape (n_steps, paths, size)."""
    inc = np.asarray(increments, dtype=float)
    if inc.shape[0] != config.n_steps or inc.shape[2] != model.grid.size:
        raise ValueError(f"increments of shape {inc.shape} do not match {config.n_steps} steps "
                         f"on {model.grid.size} points")
    y0 = model.initial if y0 is None else np.asarray(y0, dtype=float)
    y0 = np.broadcast_to(y0, (inc.shape[1], model.grid.size))
    times, states = _run(model, y0, config, lambda k: inc[k])
    return Ensemble(model.grid, times, states, model_fingerprint=model.fingerprint(),
                    solver_fingerprint=config.fingerprint())


# --- Picard iteration ----------------------------------------------------------

@dataclass
class PicardDiagnostics:
    """H[n] = sup_x mean_paths |Y_{n+1}(T, x) - Y_n(T, x)|^2 for n = 0..n_iter."""

    H: list
    final_states: list = field(repr=False)
    last_iterate: np.ndarray = field(repr=False)
    times: np.ndarray = field(repr=False)
    bound_constants: tuple = ()
    T: float = 0.0


def picard_sweep(model: ModelSpec, prev: np.ndarray, increments: np.ndarray, dt: float, y0) -> np.ndarray:
    """One Picard map of the mild equation, discretised like the exponential Euler step.

    Y_{n+1}(t_{j+1}) = e^{-dt} Y_{n+1}(t_j) + (1 - e^{-dt}) F(Y_n(t_j)) + nu(dt) sigma(Y_n(t_j)) dW_j,
    so the fixed point is the ExponentialEuler trajectory on the same noise.
    """
    m = increments.shape[0]
    f = drift_F(model, prev[:m])
    s = model.diffusion(prev[:m])
    decay = math.exp(-dt)
    gain = -math.expm1(-dt)
    nu = noise_weight(dt)
    out = np.empty_like(prev)
    out[0] = y0
    acc = np.array(out[0], dtype=float)
    for j in range(m):
        acc = decay * acc + gain * f[j] + nu * s[j] * increments[j]
        out[j + 1] = acc
    _guard(out)
    return out


def picard_solve(model: ModelSpec, frozen_noise, dt: float, n_iter: int, phi: Field | None = None) -> PicardDiagnostics:
    """Picard iteration of the mild equation on fixed noise paths.

    ``frozen_noise`` holds phi-smoothed increments, shape (steps, paths, size);
    the same increments are reused by every iterate.
    """
    if n_iter < 2:
        raise ValueError("need at least 2 Picard iterations")
    inc = np.asarray(frozen_noise, dtype=float)
    if inc.ndim != 3 or inc.shape[2] != model.grid.size:
        raise ValueError(f"frozen noise must have shape (steps, paths, {model.grid.size}), got {inc.shape}")
    steps, n_paths = inc.shape[:2]
    y0 = np.broadcast_to(model.initial, (n_paths, model.grid.size))
    cur = np.broadcast_to(y0, (steps + 1, n_paths, model.grid.size)).copy()
    H, finals = [], [cur[-1].copy()]
    for _ in range(n_iter + 1):
        nxt = picard_sweep(model, cur, inc, dt, y0)
        H.append(float(np.max(np.mean((nxt[-1] - cur[-1]) ** 2, axis=0))))
        finals.append(nxt[-1].copy())
        cur = nxt
    K = 2.0 * max(model.C_sigma**2, model.C_G**2)
    phi2 = integrate_sq(phi) if phi is not None else float("nan")
    return PicardDiagnostics(H, finals, cur, dt * np.arange(steps + 1), (K, model.C_w, phi2), steps * dt)
