"""Batch front-end: ``snfield <subcommand> --config run.cfg``.

Config files use INI syntax with sections [grid] [kernel] [noise] [model]
[solver] [output] and an optional [picard]; see README for every key.
Exit codes: 0 success or pass, 1 validation error, 2 acceptance failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import os
import re
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels as kz
from . import noise as nz
from .dynamics import (Affine, BoundedSmooth, ConstantDiffusion, ConstantGain, Ensemble, ModelSpec, Scheme,
                       Sigmoid, SmoothHeaviside, SolverConfig, draw_increments, picard_solve, solve_ensemble)
from .grid import Field, Grid, GridError, GridSpec, load_field, make_grid, read_values, write_values
from .verify import OffGridLag, empirical_covariance, holder_exponent, moment_supremum, picard_rate_check

OUTPUT_ENV = "SNFIELD_OUTPUT"
DEFAULT_OUTPUT = "snfield_out"
EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 1, 2
Z_REJECT = 4.0

# accepted keys per section; anything else is a typo and is rejected
SCHEMA = {
    "grid": {"dim", "half_width", "points_per_dim"},
    "kernel": {"type", "a", "s", "a1", "s1", "a2", "s2", "file", "alpha", "ratio_threshold"},
    "noise": {"mode", "phi", "h", "s", "phi_file", "spectrum", "n_modes", "seed"},
    "model": {"gain", "slope", "width", "value", "diffusion", "s0", "s1", "offset", "initial"},
    "solver": {"dt", "t_end", "scheme", "n_paths", "record_every"},
    "output": {"directory", "formats"},
    "picard": {"n_iter"},
}
REQUIRED = {"grid": {"dim", "half_width", "points_per_dim"}, "kernel": {"type"}}
KERNELS = ("gaussian", "mexican_hat", "exponential", "rank_one_gaussian", "separable_decay", "paper_counterexample",
           "zero", "file")
PHIS = ("delta", "indicator", "gaussian", "file")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Parsed configuration: raw string sections plus where they came from."""

    sections: dict
    source: str = "<string>"
    text: str = ""

    def get(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    def _where(self, section, key=None) -> str:
        line = _locate(self.text, section, key)
        return f"{self.source}:{line}: " if line else f"{self.source}: "

    def fail(self, section, key, msg):
        field_name = f"[{section}] {key}" if key else f"[{section}]"
        raise ConfigError(f"{self._where(section, key)}{field_name}: {msg}")

    def number(self, section, key, default=None, kind=float):
        raw = self.get(section, key)
        if raw is None:
            if default is None:
                self.fail(section, key, "missing required value")
            return default
        try:
            v = kind(raw)
        except ValueError:
            self.fail(section, key, f"expected {'an integer' if kind is int else 'a number'}, got {raw!r}")
        if kind is float and not np.isfinite(v):
            self.fail(section, key, f"value must be finite, got {raw!r}")
        return v

    def choice(self, section, key, options, default=None):
        raw = self.get(section, key, default)
        if raw is None:
            self.fail(section, key, "missing required value")
        if raw not in options:
            self.fail(section, key, f"unknown value {raw!r}; expected one of {', '.join(options)}")
        return raw

    def path(self, section, key):
        raw = self.get(section, key)
        if raw is None:
            self.fail(section, key, "missing required file path")
        p = Path(raw)
        if not p.is_absolute():
            p = Path(self.source).parent / p if self.source != "<string>" else p
        if not (p.exists() or p.with_suffix(".bin").exists()):
            self.fail(section, key, f"file not found: {raw}")
        return p

    def canonical(self) -> dict:
        """Sections that define the computation; [output] is excluded."""
        return {s: dict(sorted(v.items())) for s, v in sorted(self.sections.items()) if s != "output"}

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(self.canonical(), sort_keys=True).encode()).hexdigest()[:16]


def _locate(text: str, section: str, key: str | None) -> int | None:
    cur = None
    for i, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            cur = m.group(1).strip()
            if key is None and cur == section:
                return i
            continue
        if cur == section and key is not None and re.match(rf"\s*{re.escape(key)}\s*[=:]", line):
            return i
    return None


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"{source}: malformed config: {e}") from None
    sections = {s: dict(cp[s]) for s in cp.sections()}
    cfg = RunConfig(sections, source, text)
    for s, keys in sections.items():
        if s not in SCHEMA:
            cfg.fail(s, None, f"unknown section; expected one of {', '.join(SCHEMA)}")
        for k in keys:
            if k not in SCHEMA[s]:
                cfg.fail(s, k, f"unknown key; section accepts {', '.join(sorted(SCHEMA[s]))}")
    for s, keys in REQUIRED.items():
        if s not in sections:
            raise ConfigError(f"{source}: missing section [{s}]")
        for k in sorted(keys - set(sections[s])):
            cfg.fail(s, k, "missing required value")
    return cfg


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(p.read_text(), str(p))


# --- building domain objects -------------------------------------------------

@dataclass
class Run:
    cfg: RunConfig
    grid: Grid
    kernel: kz.KernelModel
    phi: Field
    noise: nz.NoiseSpec
    model: ModelSpec
    solver: SolverConfig | None


def build_grid(cfg: RunConfig) -> Grid:
    try:
        return make_grid(GridSpec(cfg.number("grid", "dim", kind=int), cfg.number("grid", "half_width"),
                                  cfg.number("grid", "points_per_dim", kind=int)))
    except GridError as e:
        cfg.fail("grid", None, str(e))


def _same(cfg, section, key, grid, other: Grid):
    if other != grid:
        cfg.fail(section, key, f"file lives on {other.spec}, config grid is {grid.spec}")


def build_kernel(cfg: RunConfig, grid: Grid) -> kz.KernelModel:
    kind = cfg.choice("kernel", "type", KERNELS)
    num = lambda k, d: cfg.number("kernel", k, d)  # noqa: E731
    if kind == "gaussian":
        return kz.gaussian(grid, num("a", 1.0), num("s", 1.0))
    if kind == "mexican_hat":
        return kz.mexican_hat(grid, num("a1", 2.0), num("s1", 1.0), num("a2", 1.0), num("s2", 2.0))
    if kind == "exponential":
        return kz.exponential(grid, num("a", 1.0), num("s", 1.0))
    if kind == "rank_one_gaussian":
        return kz.rank_one_gaussian(grid)
    if kind in ("separable_decay", "paper_counterexample"):
        return kz.separable_decay(grid)
    if kind == "zero":
        return kz.zero(grid)
    p = cfg.path("kernel", "file")
    try:
        K = kz.load_kernel(p)
    except (OSError, ValueError, KeyError) as e:
        cfg.fail("kernel", "file", str(e))
    _same(cfg, "kernel", "file", grid, K.grid)
    return K


def build_phi(cfg: RunConfig, grid: Grid) -> Field:
    kind = cfg.choice("noise", "phi", PHIS, "delta")
    if kind == "delta":
        return nz.delta_profile(grid)
    if kind == "indicator":
        return nz.indicator(grid, cfg.number("noise", "h", 1.0))
    if kind == "gaussian":
        return nz.gaussian_profile(grid, cfg.number("noise", "s", 1.0))
    p = cfg.path("noise", "phi_file")
    try:
        phi = load_field(p)
    except (OSError, ValueError, KeyError) as e:
        cfg.fail("noise", "phi_file", str(e))
    _same(cfg, "noise", "phi_file", grid, phi.grid)
    return phi


def build_noise(cfg: RunConfig, grid: Grid, phi: Field) -> nz.NoiseSpec:
    mode = cfg.choice("noise", "mode", ("smoothed_white", "qwiener"), "smoothed_white")
    seed = cfg.number("noise", "seed", 0, kind=int)
    if seed < 0:
        cfg.fail("noise", "seed", "seed must be non-negative")
    if mode == "smoothed_white":
        return nz.smoothed_white(phi, seed)
    spec = cfg.get("noise", "spectrum", "matched")
    if spec == "matched":
        n_modes = cfg.get("noise", "n_modes")
        return nz.matched_qwiener(phi, seed, None if n_modes is None else cfg.number("noise", "n_modes", kind=int))
    p = cfg.path("noise", "spectrum")
    try:
        sp, g = nz.read_spectrum(p)
    except (OSError, ValueError, KeyError) as e:
        cfg.fail("noise", "spectrum", str(e))
    _same(cfg, "noise", "spectrum", grid, g)
    return nz.qwiener(phi, sp, seed)


def build_model(cfg: RunConfig, kernel: kz.KernelModel) -> ModelSpec:
    grid = kernel.grid
    gain = cfg.choice("model", "gain", ("sigmoid", "smooth_heaviside", "constant"), "sigmoid")
    if gain == "sigmoid":
        G = Sigmoid(cfg.number("model", "slope", 1.0))
    elif gain == "smooth_heaviside":
        width = cfg.number("model", "width", 0.1)
        if width <= 0:
            cfg.fail("model", "width", "width must be positive")
        G = SmoothHeaviside(width)
    else:
        G = ConstantGain(cfg.number("model", "value", 0.0))
    diff = cfg.choice("model", "diffusion", ("constant", "affine", "bounded_smooth"), "constant")
    if diff == "constant":
        S = ConstantDiffusion(cfg.number("model", "s0", 1.0))
    elif diff == "affine":
        S = Affine(cfg.number("model", "s0", 0.0), cfg.number("model", "s1", 1.0))
    else:
        S = BoundedSmooth(cfg.number("model", "s0", 1.0), cfg.number("model", "offset", 0.0))
    raw = cfg.get("model", "initial", "0")
    try:
        y0 = np.full(grid.size, float(raw))
    except ValueError:
        p = cfg.path("model", "initial")
        f = load_field(p)
        _same(cfg, "model", "initial", grid, f.grid)
        y0 = f.values
    try:
        return ModelSpec(kernel, G, S, y0)
    except ValueError as e:
        cfg.fail("model", None, str(e))


def build_solver(cfg: RunConfig) -> SolverConfig | None:
    if "solver" not in cfg.sections:
        return None
    try:
        return SolverConfig(cfg.number("solver", "dt"), cfg.number("solver", "t_end"),
                            Scheme(cfg.choice("solver", "scheme", [s.value for s in Scheme], "ExponentialEuler")),
                            cfg.number("solver", "record_every", 1, kind=int),
                            cfg.number("solver", "n_paths", 1, kind=int))
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        cfg.fail("solver", None, str(e))


def build(cfg: RunConfig) -> Run:
    """Construct and cross-validate every object before any computation starts."""
    grid = build_grid(cfg)
    kernel = build_kernel(cfg, grid)
    phi = build_phi(cfg, grid)
    noise = build_noise(cfg, grid, phi)
    model = build_model(cfg, kernel)
    return Run(cfg, grid, kernel, phi, noise, model, build_solver(cfg))


def output_dir(cfg: RunConfig | None, flag: str | None) -> Path:
    if flag:
        return Path(flag)
    if cfg is not None and cfg.get("output", "directory"):
        return Path(cfg.get("output", "directory"))
    return Path(os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT))


def _formats(cfg: RunConfig) -> set:
    raw = cfg.get("output", "formats", "bin,csv")
    f = {x.strip() for x in raw.split(",") if x.strip()}
    if not f <= {"bin", "csv"}:
        cfg.fail("output", "formats", f"unknown format in {raw!r}; use bin and/or csv")
    return f


def _write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in r])


def _write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _print_table(header, rows):
    cells = [[str(h) for h in header]] + [[f"{v:.6g}" if isinstance(v, float) else str(v) for v in r] for r in rows]
    widths = [max(len(c[i]) for c in cells) for i in range(len(header))]
    for c in cells:
        print("  ".join(s.ljust(w) for s, w in zip(c, widths)).rstrip())


# --- subcommands -------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    run = build(cfg)
    if run.solver is None:
        raise ConfigError(f"{cfg.source}: simulate needs a [solver] section")
    formats = _formats(cfg)
    out = output_dir(cfg, args.output)
    ens = solve_ensemble(run.model, run.solver, run.noise, threads=args.threads)
    files = []
    for k, t in enumerate(ens.times):
        name = f"fields/t{k:05d}"
        if "bin" in formats:
            write_values(out / name, ens.states[:, k], run.grid, "ensemble", time=float(t))
        files.append(name + ".bin")
    manifest = {
        "times": [float(t) for t in ens.times],
        "dt": run.solver.dt,
        "scheme": run.solver.scheme.value,
        "seed": ens.seed,
        "n_paths": ens.n_paths,
        "path_indices": [int(i) for i in ens.path_indices],
        "noise_mode": run.noise.mode.value,
        "model_fingerprint": ens.model_fingerprint,
        "solver_fingerprint": ens.solver_fingerprint,
        "config_fingerprint": cfg.fingerprint,
        "config": cfg.canonical(),
        "files": files if "bin" in formats else [],
    }
    _write_json(out / "manifest.json", manifest)
    if "csv" in formats:
        y = ens.states
        _write_csv(out / "summary.csv", ["time", "mean", "mean_square", "sup_x_mean_square"],
                   [(float(t), float(y[:, k].mean()), float((y[:, k] ** 2).mean()),
                     float((y[:, k] ** 2).mean(axis=0).max())) for k, t in enumerate(ens.times)])
    print(f"simulated {ens.n_paths} paths to t={ens.times[-1]:g}; wrote {out}")
    return EXIT_OK


def load_ensemble(directory) -> tuple[Ensemble, RunConfig]:
    """Re-open a ``simulate`` output directory."""
    d = Path(directory)
    mp = d / "manifest.json"
    if not mp.exists():
        raise ConfigError(f"no manifest.json in {d}")
    m = json.loads(mp.read_text())
    if not m.get("files"):
        raise ConfigError(f"{d} has no field files (formats did not include bin)")
    cfg = RunConfig({s: dict(v) for s, v in m["config"].items()}, str(mp))
    if cfg.fingerprint != m["config_fingerprint"]:
        raise ConfigError(f"{mp}: config does not match its fingerprint")
    states, grid = [], None
    for f in m["files"]:
        if not (d / f).exists() or not (d / f).with_suffix(".json").exists():
            raise ConfigError(f"{d}: missing field file {f}")
        v, g, _ = read_values(d / f)
        grid = grid or g
        if g != grid:
            raise ConfigError(f"{f} lives on a different grid")
        states.append(v.reshape(-1, g.size))
    ens = Ensemble(grid, np.array(m["times"]), np.stack(states, axis=1), m["seed"],
                   np.array(m["path_indices"]), m["model_fingerprint"], m["solver_fingerprint"])
    return ens, cfg


def cmd_check_kernel(args) -> int:
    cfg = load_config(args.config)
    grid = build_grid(cfg)
    K = build_kernel(cfg, grid)
    conds = [kz.Condition.C1, kz.Condition.C2, kz.Condition.C2PRIME]
    alpha = cfg.get("kernel", "alpha")
    if alpha is not None:
        alpha = cfg.number("kernel", "alpha")
        conds.append(kz.Condition.C3PRIME)
    threshold = cfg.number("kernel", "ratio_threshold", kz.DIVERGENCE_RATIO)
    if threshold <= 1.0:
        cfg.fail("kernel", "ratio_threshold", "threshold must exceed 1")
    rows = []
    for c in conds:
        r = kz.check_condition(K, c, alpha if c is kz.Condition.C3PRIME else None, threshold)
        rows.append((c.value, r.verdict.value, r.value_at_L, r.value_at_2L, r.ratio,
                     "" if r.constant is None else r.constant))
    header = ["condition", "verdict", "value_L", "value_2L", "ratio", "constant"]
    _print_table(header, rows)
    _write_csv(output_dir(cfg, args.output) / "check_kernel.csv", header, rows)
    return EXIT_OK


def cmd_solve_rho(args) -> int:
    cfg = load_config(args.config)
    grid = build_grid(cfg)
    K = build_kernel(cfg, grid)
    out = output_dir(cfg, args.output)
    results = [kz.solve_rho_power(K)]
    if K.homogeneous:
        results.append(kz.solve_rho_fourier(K))
    rows = []
    for r in results:
        rows.append((r.method.value, r.lam, r.residual, r.iterations, r.min_rho))
        write_values(out / f"rho_{r.method.value}", r.rho.values, grid, "rho", lam=r.lam)
    header = ["method", "lambda", "residual", "iterations", "min_rho"]
    _print_table(header, rows)
    _write_csv(out / "solve_rho.csv", header, rows)
    if len(results) == 2:
        a, b = (np.asarray(r.rho) for r in results)
        # the two methods answer different questions: report, do not assert
        print(f"sup |rho_power - rho_fourier| = {np.max(np.abs(a - b)):.6g}")
    return EXIT_OK


def cmd_picard(args) -> int:
    cfg = load_config(args.config)
    run = build(cfg)
    if run.solver is None:
        raise ConfigError(f"{cfg.source}: picard needs a [solver] section for dt, t_end and n_paths")
    if run.noise.mode is not nz.NoiseMode.SMOOTHED_WHITE:
        cfg.fail("noise", "mode", "picard runs on smoothed white noise")
    n_iter = cfg.number("picard", "n_iter", 8, kind=int)
    if n_iter < 4:
        cfg.fail("picard", "n_iter", "need at least 4 iterations for the rate check")
    s = run.solver
    inc = draw_increments(run.noise, s.dt, s.n_steps, paths=np.arange(s.n_paths))
    diag = picard_solve(run.model, inc, s.dt, n_iter, phi=run.phi)
    rc = picard_rate_check(diag)
    rows = [(n, h, e) for n, (h, e) in enumerate(zip(diag.H, rc.envelope))]
    header = ["n", "H_n", "log_envelope"]
    _print_table(header, rows)
    print(f"xi*T = {rc.xi_T:.6g}; monotone = {rc.monotone}; rate check {'pass' if rc.passed else 'FAIL'}")
    _write_csv(output_dir(cfg, args.output) / "picard.csv", header, rows)
    return EXIT_OK


def _floats(raw: str, what: str) -> list:
    try:
        return [float(x) for x in raw.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"{what}: expected comma-separated numbers, got {raw!r}") from None


def _is_linear(model: ModelSpec) -> bool:
    """G = 0, sigma = 1, Y0 = 0: the case with a closed-form covariance."""
    K = model.kernel
    no_drift = model.gain == ConstantGain(0.0) or (K.homogeneous and not np.any(K.profile))
    return (no_drift and model.diffusion == ConstantDiffusion(1.0) and not np.any(model.initial))


def cmd_verify(args) -> int:
    ens, cfg = load_ensemble(args.input)
    out = Path(args.output) if args.output else Path(args.input)
    if not (args.covariance or args.holder or args.moments):
        raise ConfigError("verify needs at least one of --covariance, --holder, --moments")
    verdict, ok = {}, True
    t = float(ens.times[-1]) if args.time is None else args.time
    if args.covariance:
        lags = _floats(args.covariance, "--covariance")
        run = build(cfg)
        phi = run.phi if _is_linear(run.model) else None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OffGridLag)
            rep = empirical_covariance(ens, t, lags, phi, min_paths=min(100, ens.n_paths))
        rows = list(rep.rows())
        _write_csv(out / "covariance.csv", ["lag", "empirical", "analytic", "mc_sigma", "z"], rows)
        _print_table(["lag", "empirical", "analytic", "mc_sigma", "z"], rows)
        passed = bool(phi is not None and np.isfinite(rep.max_z) and rep.max_z < Z_REJECT)
        verdict["covariance"] = {"t": t, "max_z": rep.max_z, "oracle": phi is not None, "passed": passed}
        ok &= passed or phi is None
    if args.holder:
        est = holder_exponent(ens, args.holder, q=args.q, t_min=args.t_min)
        rows = [(h, m) for h, m in zip(est.scales_used, est.moments)]
        _write_csv(out / f"holder_{est.direction.value.lower()}.csv", ["scale", f"moment_q{args.q:g}"], rows)
        print(f"{est.direction.value} exponent {est.eta_hat:.4f} (r2 {est.fit_r2:.5f}, q={args.q:g})")
        verdict["holder"] = {"direction": est.direction.value, "eta_hat": est.eta_hat, "fit_r2": est.fit_r2,
                             "rough": est.rough}
    if args.moments:
        rep = moment_supremum(ens, args.moments, min_paths=min(100, ens.n_paths))
        _write_csv(out / "moments.csv", ["p", "sup_mean_abs_p", "mc_sigma", "first_half", "second_half", "finite"],
                   [(rep.p, rep.value, rep.mc_sigma, rep.first_half, rep.second_half, rep.finite)])
        print(f"sup E|Y|^{rep.p} = {rep.value:.6g} +- {rep.mc_sigma:.3g}; bounded growth: {rep.finite}")
        verdict["moments"] = {"p": rep.p, "value": rep.value, "mc_sigma": rep.mc_sigma, "finite": rep.finite}
        ok &= rep.finite
    verdict["passed"] = bool(ok)
    _write_json(out / "verify.json", verdict)
    return EXIT_OK if ok else EXIT_FAILED


def cmd_accept(args) -> int:
    from .acceptance import CRITERIA, run_all, write_report

    only = None
    if args.only:
        try:
            only = [int(x) for x in args.only.split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"--only: expected comma-separated criterion numbers, got {args.only!r}") from None
        if not only or any(k not in CRITERIA for k in only):
            raise ConfigError(f"--only: criteria are numbered {min(CRITERIA)}-{max(CRITERIA)}")
    out = output_dir(None, args.output)
    results = run_all(threads=args.threads, only=only, workdir=out / "accept_work")
    write_report(results, out)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1, help="worker threads (output does not depend on it)")
    common.add_argument("--output", help=f"output directory (default: [output] directory, ${OUTPUT_ENV}, "
                                         f"or ./{DEFAULT_OUTPUT})")
    cfg = argparse.ArgumentParser(add_help=False)
    cfg.add_argument("--config", required=True, help="INI run configuration")

    p = _Parser(prog="snfield", description="Stochastic neural field simulator and verification suite.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("simulate", parents=[common, cfg], help="simulate an ensemble and write fields")
    sub.add_parser("check-kernel", parents=[common, cfg], help="certify kernel integrability conditions")
    sub.add_parser("solve-rho", parents=[common, cfg], help="weight eigenproblem by both methods")
    sub.add_parser("picard", parents=[common, cfg], help="Picard iteration diagnostics on frozen noise")
    v = sub.add_parser("verify", parents=[common], help="statistics of a stored ensemble")
    v.add_argument("--input", required=True, help="directory written by simulate")
    v.add_argument("--covariance", metavar="LAGS", help="comma-separated lags, e.g. 0,0.25,0.5")
    v.add_argument("--holder", choices=["Time", "Space"])
    v.add_argument("--q", type=float, default=2)
    v.add_argument("--t-min", type=float, default=0.0, dest="t_min")
    v.add_argument("--moments", type=int, choices=[2, 4, 8])
    v.add_argument("--time", type=float, help="evaluation time for --covariance (default: last record)")
    a = sub.add_parser("accept", parents=[common], help="run the acceptance suite")
    a.add_argument("--only", help="comma-separated criterion numbers")
    return p


COMMANDS = {"simulate": cmd_simulate, "check-kernel": cmd_check_kernel, "solve-rho": cmd_solve_rho,
            "picard": cmd_picard, "verify": cmd_verify, "accept": cmd_accept}


def run(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        return COMMANDS[args.command](args)
    except (ConfigError, GridError, kz.KernelError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


def main():
    sys.exit(run())
