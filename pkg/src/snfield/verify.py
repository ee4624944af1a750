"""Estimators and closed-form oracles for checking simulated fields.

Statistical comparisons are made in Monte-Carlo standard errors.  Standard
errors are computed from per-path statistics (spatial averages first), which
are independent across paths even though grid points within a path are not.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .dynamics import Ensemble, PicardDiagnostics, Trajectory
from .grid import Field
from .noise import analytic_covariance


class OffGridLag(UserWarning):
    pass


def _lag_steps(grid, lag: float) -> int:
    k = int(round(lag / grid.dx))
    if abs(k * grid.dx - lag) > 1e-9 * max(1.0, abs(lag)):
        warnings.warn(f"lag {lag} is off the mesh; using nearest lag {k * grid.dx:g}", OffGridLag, stacklevel=3)
    return k


def ou_covariance(phi: Field, t: float, lag: float, c: Field | None = None) -> float:
    """Equal-time covariance of the linear model (G = 0, sigma = 1, Y0 = 0).

    c(lag) (1 - e^{-2t}) / 2 with c the grid covariance of phi-smoothed noise.
    """
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    c = analytic_covariance(phi) if c is None else c
    g = phi.grid
    k = _lag_steps(g, lag) % g.n
    idx = list(np.array(g.shape) // 2)
    idx[0] = (idx[0] + k) % g.n
    return float(c.values[g.flat_index(idx)]) * (-math.expm1(-2.0 * t)) / 2.0


@dataclass
class CovarianceReport:
    lags: list
    empirical: list
    analytic: list | None
    mc_sigma: list
    max_z: float
    degenerate: bool = False

    def rows(self):
        for i, lag in enumerate(self.lags):
            a = self.analytic[i] if self.analytic is not None else float("nan")
            z = abs(self.empirical[i] - a) / self.mc_sigma[i] if self.mc_sigma[i] > 0 else float("nan")
            yield lag, self.empirical[i], a, self.mc_sigma[i], z


def empirical_covariance(ensemble: Ensemble, t: float, lags, phi: Field | None = None,
                         min_paths: int = 100) -> CovarianceReport:
    """Pooled equal-time covariance E[Y(t,x) Y(t,x+r)] of the centred field.

    Averaging is over paths and over x (stationarity pooling along axis 0).
    With ``phi`` given, the linear-model oracle fills the analytic column.
    """
    if ensemble.n_paths < min_paths:
        raise ValueError(f"need at least {min_paths} paths, got {ensemble.n_paths}")
    y = ensemble.at(t)
    y = y - y.mean(axis=0)
    g = ensemble.grid
    c = analytic_covariance(phi) if phi is not None else None
    emp, sig, ana = [], [], []
    for lag in lags:
        k = _lag_steps(g, lag)
        per_path = np.mean(y * g.roll(y, k, axis=0), axis=1)
        emp.append(float(per_path.mean()))
        sig.append(float(per_path.std(ddof=1) / math.sqrt(len(per_path))))
        if phi is not None:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", OffGridLag)
                ana.append(ou_covariance(phi, t, lag, c))
    degenerate = min(sig) == 0.0
    if phi is None or degenerate:
        max_z = float("nan")
    else:
        max_z = max(abs(e - a) / s for e, a, s in zip(emp, ana, sig))
    return CovarianceReport(list(lags), emp, ana if phi is not None else None, sig, max_z, degenerate)


class Direction(str, enum.Enum):
    TIME = "Time"
    SPACE = "Space"


@dataclass
class ExponentEstimate:
    direction: Direction
    q: float
    eta_hat: float
    fit_r2: float
    scales_used: list
    moments: list = field(default_factory=list)

    @property
    def rough(self) -> bool:
        """False when the slope saturates at smoothness (eta close to 1)."""
        return self.eta_hat < 0.95


def holder_exponent(states, direction, q: float = 2, dt: float | None = None, grid=None,
                    n_scales: int = 4, t_min: float = 0.0) -> ExponentEstimate:
    """Variogram estimate of the Hoelder exponent from q-th moments of increments.

    ``states`` is an Ensemble, a Trajectory, or an array (paths, records, size)
    or (records, size).  Increments are taken at dyadic separations 1, 2, 4, ...
    records (Time) or mesh steps along axis 0 (Space); eta_hat = slope / q.
    """
    times = None
    if isinstance(states, (Ensemble, Trajectory)):
        grid = states.grid
        times = np.asarray(states.times)
        states = states.states
    a = np.asarray(states, dtype=float)
    if a.ndim == 2:
        a = a[None]
    if times is not None and t_min > 0:
        a = a[:, times >= t_min - 1e-12]
        times = times[times >= t_min - 1e-12]
    direction = Direction(direction)
    if q not in (2, 4):
        raise ValueError(f"q must be 2 or 4, got {q}")
    seps = [2**j for j in range(n_scales)]
    if direction is Direction.TIME:
        if dt is None:
            if times is None or len(times) < 2:
                raise ValueError("time direction needs dt or recorded times")
            dt = float(times[1] - times[0])
        if a.shape[1] <= seps[-1]:
            raise ValueError(f"need more than {seps[-1]} records for {n_scales} dyadic scales")
        h = [k * dt for k in seps]
        m = [float(np.mean(np.abs(a[:, k:] - a[:, :-k]) ** q)) for k in seps]
    else:
        if grid is None:
            raise ValueError("space direction needs the grid")
        if grid.n // 2 <= seps[-1]:
            raise ValueError(f"need more than {2 * seps[-1]} points per axis for {n_scales} scales")
        h = [k * grid.dx for k in seps]
        m = [float(np.mean(np.abs(grid.roll(a, k, axis=0) - a) ** q)) for k in seps]
    if min(m) <= 0:
        raise ValueError("increments vanish; the exponent is undefined")
    lx, ly = np.log(h), np.log(m)
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + icpt)
    ss = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    return ExponentEstimate(direction, q, float(slope / q), float(r2), h, m)


@dataclass
class MomentReport:
    p: int
    value: float
    mc_sigma: float
    first_half: float
    second_half: float
    finite: bool
    argmax: tuple = ()


def moment_supremum(ensemble: Ensemble, p: int = 2, t_max: float | None = None,
                    pool_space: bool = False, min_paths: int = 100) -> MomentReport:
    """sup over recorded t <= T and x of the ensemble mean |Y(t, x)|^p.

    ``finite`` is the growth verdict: the supremum over (T/2, T] is at most twice
    the supremum over [0, T/2].  With ``pool_space`` the mean also runs over x,
    which is legitimate for homogeneous models.
    """
    if ensemble.n_paths == 0:
        raise ValueError("empty ensemble")
    if ensemble.n_paths < min_paths:
        raise ValueError(f"need at least {min_paths} paths, got {ensemble.n_paths}")
    if p not in (2, 4, 8):
        raise ValueError(f"p must be 2, 4 or 8, got {p}")
    times = np.asarray(ensemble.times)
    T = times[-1] if t_max is None else t_max
    keep = times <= T + 1e-12
    yp = np.abs(ensemble.states[:, keep]) ** p
    if pool_space:
        per_path = yp.mean(axis=2)
        mean = per_path.mean(axis=0)
        t_idx = int(np.argmax(mean))
        value, sample = float(mean[t_idx]), per_path[:, t_idx]
        where = (float(times[keep][t_idx]),)
        curve = mean
    else:
        mean = yp.mean(axis=0)
        t_idx, x_idx = np.unravel_index(int(np.argmax(mean)), mean.shape)
        value, sample = float(mean[t_idx, x_idx]), yp[:, t_idx, x_idx]
        where = (float(times[keep][t_idx]), int(x_idx))
        curve = mean.max(axis=1)
    sigma = float(sample.std(ddof=1) / math.sqrt(len(sample))) if len(sample) > 1 else 0.0
    tk = times[keep]
    first = float(curve[tk <= T / 2 + 1e-12].max())
    later = tk > T / 2 + 1e-12
    second = float(curve[later].max()) if later.any() else first
    finite = bool(np.isfinite(value)) and second <= 2.0 * first + 1e-300
    return MomentReport(p, value, sigma, first, second, finite, where)


def pathwise_compare(a, b) -> float:
    """sup over recorded (t, x) of |A - B| for two trajectories or ensembles."""
    if a.grid != b.grid:
        raise ValueError("trajectories live on different grids")
    ta, tb = np.asarray(a.times), np.asarray(b.times)
    if ta.shape != tb.shape or not np.allclose(ta, tb, rtol=0, atol=1e-12):
        raise ValueError("trajectories were recorded at different times")
    sa, sb = np.asarray(a.states), np.asarray(b.states)
    if sa.shape != sb.shape:
        raise ValueError(f"state shapes differ: {sa.shape} vs {sb.shape}")
    return float(np.max(np.abs(sa - sb)))


@dataclass
class RateCheck:
    passed: bool
    xi_T: float
    envelope: list
    monotone: bool

    def __bool__(self):
        return self.passed


def picard_rate_check(diag, margin: float = 0.25) -> RateCheck:
    """Check H_n against a factorial envelope C (xi T)^n / n!.

    xi T is fitted as the largest rate n H_n / H_{n-1} over the first half of
    the sequence.  The envelope e_n = log H_n + log n! - n log(xi T) must stay
    bounded: its maximum over the second half may exceed the first-half
    maximum by at most log(1 + margin).  H_n must also strictly decrease from
    n = 2 (exact zeros count as converged).
    """
    H = np.asarray(diag.H if isinstance(diag, PicardDiagnostics) else diag, dtype=float)
    if len(H) < 5:
        raise ValueError(f"need at least 5 Picard differences, got {len(H)}")
    if np.any(H < 0) or not np.all(np.isfinite(H)):
        raise ValueError("H must be finite and non-negative")
    step = np.diff(H[2:])
    monotone = bool(np.all((step < 0) | ((H[3:] == 0) & (H[2:-1] == 0))))
    n = np.arange(len(H))
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(H[:-1] > 0, n[1:] * H[1:] / H[:-1], 0.0)
    xi_T = float(np.max(q[: len(q) // 2]))
    if xi_T <= 0:
        # H vanished after the first iterate: exact convergence
        return RateCheck(monotone, 0.0, [float("-inf")] * len(H), monotone)
    with np.errstate(divide="ignore"):
        env = np.log(H) + gammaln(n + 1) - n * math.log(xi_T)
    half = (len(H) + 1) // 2
    bounded = bool(np.max(env[half:]) <= np.max(env[:half]) + math.log1p(margin))
    return RateCheck(monotone and bounded, xi_T, [float(e) for e in env], monotone)
