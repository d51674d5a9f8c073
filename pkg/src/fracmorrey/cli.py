"""Command line entry point and experiment orchestration.

Usage::

    fracmorrey <experiment> --config path.json [--out-dir D] [--threads K] [--seed S]

Exit status is 0 on success, 2 for an invalid configuration and 3 when the
run fails numerically (outputs written so far are kept).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .grid import ContractError, Field, GridSpec, read_fbmf, resample, set_fft_workers, write_fbmf
from .initial_data import DataRecipe, admissibility_report, realize
from .littlewood_paley import ZETA_PROFILE, ConfigurationError, build_bank
from .norms import (
    INFINITY,
    MorreyGridPolicy,
    ParameterError,
    SpaceParams,
    besov_morrey_norm,
    besov_sup_norm,
    embedding_ratios,
    morrey_norm,
)
from .semigroup import (
    SymbolSpec,
    dyadic_kernel_bound,
    low_kernel_bound,
    smoothing_decay_fit,
    split_smallness,
)
from .solver import (
    CONVERGED,
    HJ,
    POWER,
    ProblemSpec,
    ScheduleError,
    SolverControls,
    TimeMesh,
    bootstrap_schedule,
    check_schedule,
    fixed_point_residual,
    linf_monitor,
    picard_solve,
    threshold_scan,
    weighted_profile,
)

log = logging.getLogger(__name__)

EXPERIMENTS = ("lp-check", "norms", "semigroup", "kernel-bounds", "split", "solve", "solve-hj",
               "threshold-scan", "bootstrap-schedule", "embedding-check")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

_BLOCK_KEYS = {
    "grid": ("dim", "L", "M"),
    "problem": ("theta", "gamma", "kind", "T", "s", "p", "q", "r", "K", "nu", "max_iters", "tol",
                "filter_strength", "center_stride"),
    "runtime": ("threads", "seed", "out_dir", "refine"),
    "params": ("times", "sigma", "m", "jrange", "symbol", "t", "axis", "exponent", "amplitudes",
               "count", "input", "jwin", "eps"),
}
_DATA_KEYS = ("kind", "amplitude", "beta", "order", "s", "seed", "theta", "smoothing")
_NEEDS = {
    "lp-check": ("grid",),
    "norms": ("grid", "problem"),
    "semigroup": ("grid", "problem", "data"),
    "kernel-bounds": ("grid", "problem"),
    "split": ("grid", "problem", "data"),
    "solve": ("grid", "problem", "data"),
    "solve-hj": ("grid", "problem", "data"),
    "threshold-scan": ("grid", "problem", "data"),
    "bootstrap-schedule": ("grid", "problem"),
    "embedding-check": ("grid", "problem"),
}


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class NumericalFailure(RuntimeError):
    pass


def default_threads() -> int:
    raw = os.environ.get("FRACMORREY_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError("FRACMORREY_THREADS", f"not an integer: {raw!r}") from None


@dataclass
class ExperimentConfig:
    experiment: str
    grid: dict = field(default_factory=dict)
    problem: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)
    runtime: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict, experiment: str | None = None) -> "ExperimentConfig":
        """Accept nested blocks or a flat mapping of known keys."""
        if not isinstance(raw, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        raw = dict(raw)
        exp = raw.pop("experiment", None)
        if experiment is not None:
            if exp is not None and exp != experiment:
                raise ConfigError("experiment", f"config says {exp!r}, command line says {experiment!r}")
            exp = experiment
        if exp not in EXPERIMENTS:
            raise ConfigError("experiment", f"unknown experiment {exp!r}; expected one of {EXPERIMENTS}")
        blocks = {b: {} for b in ("grid", "problem", "data", "runtime", "params")}
        for key, val in raw.items():
            if key in blocks:
                if not isinstance(val, dict):
                    raise ConfigError(key, "block must be an object")
                allowed = _DATA_KEYS if key == "data" else _BLOCK_KEYS[key]
                for k, v in val.items():
                    if key == "data" and k == "params" and isinstance(v, dict):
                        for kk, vv in v.items():
                            if kk not in _DATA_KEYS:
                                raise ConfigError(f"data.params.{kk}", "unknown key")
                            blocks["data"][kk] = vv
                        continue
                    if k not in allowed:
                        raise ConfigError(f"{key}.{k}", "unknown key")
                    blocks[key][k] = v
                continue
            owner = next((b for b, keys in _BLOCK_KEYS.items() if key in keys), None)
            if owner is None:
                raise ConfigError(key, "unknown key")
            blocks[owner][key] = val
        cfg = cls(exp, **blocks)
        cfg.check()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def check(self) -> None:
        for b in _NEEDS[self.experiment]:
            if not getattr(self, b):
                raise ConfigError(b, f"block required for experiment {self.experiment!r}")
        if self.grid:
            for k in ("dim", "L", "M"):
                if k not in self.grid:
                    raise ConfigError(f"grid.{k}", "missing")
            try:
                self.grid_spec()
            except (ContractError, ValueError, TypeError) as exc:
                raise ConfigError("grid", str(exc)) from None
        if self.data:
            if "kind" not in self.data:
                raise ConfigError("data.kind", "missing")
            try:
                self.recipe()
            except (ValueError, TypeError) as exc:
                raise ConfigError("data", str(exc)) from None
        th = self.runtime.get("threads")
        if th is not None and (not isinstance(th, int) or th < 1):
            raise ConfigError("runtime.threads", "must be a positive integer")
        seed = self.runtime.get("seed")
        if seed is not None and not isinstance(seed, int):
            raise ConfigError("runtime.seed", "must be an integer")

    # -- typed views ---------------------------------------------------------

    def grid_spec(self) -> GridSpec:
        g = self.grid
        return GridSpec(int(g["dim"]), float(g["L"]), int(g["M"]))

    def recipe(self) -> DataRecipe:
        d = dict(self.data)
        if d.get("kind") == "random_shell" and "seed" not in d and "seed" in self.runtime:
            d["seed"] = self.runtime["seed"]
        return DataRecipe(**d)

    def need(self, block: str, key: str, default=None, required: bool = True):
        src = getattr(self, block)
        if key in src:
            return src[key]
        if default is None and required:
            raise ConfigError(f"{block}.{key}", f"required for experiment {self.experiment!r}")
        return default

    def space(self) -> SpaceParams:
        try:
            return SpaceParams(float(self.need("problem", "s")), float(self.need("problem", "p")),
                               float(self.need("problem", "q")), self.problem.get("r", INFINITY))
        except ParameterError as exc:
            raise ConfigError("problem", str(exc)) from None

    def policy(self, grid: GridSpec) -> MorreyGridPolicy:
        return MorreyGridPolicy.dyadic(grid, int(self.problem.get("center_stride", 4)))

    def problem_spec(self, kind: str | None = None) -> ProblemSpec:
        kind = kind or self.problem.get("kind", POWER)
        spec = ProblemSpec(float(self.need("problem", "theta")), float(self.need("problem", "gamma")),
                           kind, float(self.need("problem", "T")), self.space())
        bad = spec.violations(int(self.grid.get("dim", 1)))
        if bad:
            raise ConfigError("problem", "; ".join(bad))
        return spec

    def mesh(self) -> TimeMesh:
        try:
            return TimeMesh(float(self.need("problem", "T")), int(self.need("problem", "K")),
                            float(self.problem.get("nu", 2.0)))
        except ParameterError as exc:
            raise ConfigError("problem", str(exc)) from None

    def controls(self, grid: GridSpec, store: str = "last") -> SolverControls:
        return SolverControls(max_iters=int(self.problem.get("max_iters", 100)),
                              tol=float(self.problem.get("tol", 1e-8)),
                              policy=self.policy(grid),
                              filter_strength=self.problem.get("filter_strength"),
                              store=store)


@dataclass
class RunManifest:
    experiment: str
    config: dict
    version: str
    zeta_profile: str
    status: str = "ok"
    wall_time: float = 0.0
    summary: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    error: str | None = None
    exit_code: int = EXIT_OK

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_jsonable)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


class _Outputs:
    """Writes CSV/FBMF files into ``out_dir`` and records their hashes."""

    def __init__(self, out_dir: Path, manifest: RunManifest):
        self.dir = out_dir
        self.manifest = manifest

    def _record(self, path: Path) -> None:
        self.manifest.files[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()

    def csv(self, name: str, header, rows) -> Path:
        path = self.dir / name
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        self._record(path)
        return path

    def fbmf(self, name: str, f: Field) -> Path:
        path = self.dir / name
        write_fbmf(path, f)
        self._record(path)
        return path


# -- experiments -------------------------------------------------------------

def _data_field(cfg: ExperimentConfig, grid: GridSpec) -> Field:
    src = cfg.params.get("input")
    if src:
        try:
            f = read_fbmf(src)
        except (OSError, ValueError) as exc:
            raise ConfigError("params.input", str(exc)) from None
        if f.grid != grid:
            f = resample(f, grid)
        return f
    if not cfg.data:
        raise ConfigError("data", "a data block or params.input is required")
    q = cfg.problem.get("q")
    return realize(cfg.recipe(), grid, None if q is None else float(q))


def _exp_lp_check(cfg, out: _Outputs, summary: dict):
    grid = cfg.grid_spec()
    bank = build_bank(grid)
    res = bank.partition_residual()
    idx = np.indices(grid.shape).reshape(grid.dim, -1).T
    xi = grid.xi_norm.ravel()
    out.csv("lp_check.csv", [f"k{a}" for a in range(grid.dim)] + ["xi_norm", "residual"],
            (list(k) + [xi[i], r] for i, (k, r) in enumerate(zip(idx, res.ravel()))))
    summary.update(jmax=bank.jmax, max_residual=float(res.max()))


def _exp_norms(cfg, out, summary):
    grid = cfg.grid_spec()
    bank = build_bank(grid)
    sp = cfg.space()
    pol = cfg.policy(grid)
    f = _data_field(cfg, grid)
    row = [sp.s, sp.p, sp.q, sp.r, morrey_norm(f, sp.p, sp.q, pol),
           besov_morrey_norm(bank, f, sp, pol), besov_sup_norm(bank, f, sp.s - grid.dim / sp.p, sp.r)]
    out.csv("norms.csv", ["s", "p", "q", "r", "morrey", "besov_morrey", "besov_sup"], [row])
    if "theta" in cfg.problem and "gamma" in cfg.problem and "T" in cfg.problem:
        rep = admissibility_report(f, bank, cfg.problem_spec(), int(cfg.params.get("jwin", 3)), pol)
        summary.update(tail=rep.tail, index_check=rep.index_check)
    summary.update(dict(zip(["morrey", "besov_morrey", "besov_sup"], row[4:])))


def _times(cfg, default):
    t = cfg.params.get("times", default)
    try:
        return [float(x) for x in t]
    except (TypeError, ValueError):
        raise ConfigError("params.times", "must be a list of numbers") from None


def _exp_semigroup(cfg, out, summary):
    grid = cfg.grid_spec()
    bank = build_bank(grid)
    f = _data_field(cfg, grid)
    theta = float(cfg.need("problem", "theta"))
    sigma = float(cfg.params.get("sigma", 0.0))
    times = _times(cfg, list(np.geomspace(1e-3, 1e-1, 9)))
    try:
        slope, resid, norms = smoothing_decay_fit(bank, f, theta, cfg.space(), sigma, times, cfg.policy(grid))
    except ParameterError as exc:
        raise ConfigError("params", str(exc)) from None
    out.csv("semigroup.csv", ["t", "norm", "slope"], ([t, n, slope] for t, n in zip(sorted(times), norms)))
    summary.update(slope=slope, fit_residual=resid, target_slope=(cfg.space().s - sigma) / theta)


def _exp_kernel_bounds(cfg, out, summary):
    grid = cfg.grid_spec()
    bank = build_bank(grid)
    theta = float(cfg.need("problem", "theta"))
    kind = cfg.params.get("symbol", "abs_power")
    t = float(cfg.params.get("t", 0.0))
    m = float(cfg.params.get("m", 1.0))
    if kind == "heat":
        sym = SymbolSpec.heat(theta, t)
    elif kind == "grad_heat":
        sym = SymbolSpec.grad_heat(theta, t, int(cfg.params.get("axis", 0)))
    elif kind == "abs_power":
        e = float(cfg.params.get("exponent", m))
        sym = SymbolSpec.custom(lambda xi: np.sqrt(np.sum(xi ** 2, axis=0)) ** e)
    else:
        raise ConfigError("params.symbol", f"unknown symbol {kind!r}")
    jr = cfg.params.get("jrange", [2, bank.jmax - 1])
    js = range(int(jr[0]), int(jr[1]) + 1)
    try:
        rows = dyadic_kernel_bound(bank, sym, m, js)
    except IndexError as exc:
        raise ConfigError("params.jrange", str(exc)) from None
    out.csv("kernel_bounds.csv", ["j", "ratio"], rows)
    ratios = [r for _, r in rows]
    summary.update(low_bound=low_kernel_bound(bank, sym), ratio_spread=max(ratios) / min(ratios))


def _exp_split(cfg, out, summary):
    grid = cfg.grid_spec()
    bank = build_bank(grid)
    f = _data_field(cfg, grid)
    theta = float(cfg.need("problem", "theta"))
    sigma = float(cfg.params.get("sigma", 0.0))
    times = _times(cfg, list(np.geomspace(1e-3, 1e-1, 5)))
    ms = cfg.params.get("m", list(range(1, bank.jmax + 1)))
    ms = [ms] if isinstance(ms, (int, float)) else ms
    rows = []
    for m in ms:
        try:
            hi, lo = split_smallness(bank, f, theta, cfg.space(), sigma, int(m), times, cfg.policy(grid))
        except ParameterError as exc:
            raise ConfigError("params.m", str(exc)) from None
        rows.append((int(m), hi, lo))
    out.csv("split.csv", ["m", "high_sup", "low_sup"], rows)
    summary.update(rows=len(rows))


def _exp_solve(cfg, out, summary, kind):
    grid = cfg.grid_spec()
    spec = cfg.problem_spec(kind)
    mesh = cfg.mesh()
    phi = _data_field(cfg, grid)
    controls = cfg.controls(grid)
    trace = picard_solve(spec, phi, mesh, controls)
    ratios = [None] + list(trace.contraction_ratios)
    out.csv("sweeps.csv", ["sweep", "x_norm", "diff_norm", "ratio"],
            ((n + 1, x, d, r) for n, (x, d, r) in enumerate(zip(trace.x_norms[1:], trace.diff_norms, ratios))))
    t, m, w = weighted_profile(trace, spec, controls.policy)
    mon = linf_monitor(trace, 0.0)
    header = ["t", "morrey", "weighted", "max_abs"]
    cols = [t, m, w, [r[1] for r in mon]]
    if kind == HJ:
        _, gm, gw = weighted_profile(trace, spec, controls.policy, gradient=True)
        header += ["grad_morrey", "grad_weighted", "grad_max_abs"]
        cols += [gm, gw, [r[2] for r in mon]]
    out.csv("nodes.csv", header, zip(*cols))
    out.fbmf("final.fbmf", trace.field(len(mesh.nodes) - 1))
    summary.update(status=trace.status, sweeps=trace.sweeps, diagnostic=trace.diagnostic,
                   x_norm=trace.x_norms[-1])
    if trace.status == CONVERGED:
        summary["fixed_point_residual"] = fixed_point_residual(trace, spec, phi, mesh, controls)
    else:
        raise NumericalFailure(f"Picard iteration {trace.status}: {trace.diagnostic}")


def _exp_threshold(cfg, out, summary):
    grid = cfg.grid_spec()
    spec = cfg.problem_spec()
    amps = cfg.need("params", "amplitudes")
    phi = _data_field(cfg, grid)
    try:
        scan = threshold_scan(spec, phi, amps, cfg.mesh(), cfg.controls(grid))
    except ParameterError as exc:
        raise ConfigError("params.amplitudes", str(exc)) from None
    out.csv("threshold.csv", ["amplitude", "status", "last_ratio"],
            ((c, st, r[-1] if r else None) for c, st, r in scan.rows))
    summary.update(c_ok=scan.c_ok, c_bad=scan.c_bad, monotone=scan.monotone)


def _exp_bootstrap(cfg, out, summary):
    dim = int(cfg.need("grid", "dim"))
    th, g = float(cfg.need("problem", "theta")), float(cfg.need("problem", "gamma"))
    p, q = float(cfg.need("problem", "p")), float(cfg.need("problem", "q"))
    kind = cfg.problem.get("kind", POWER)
    s = cfg.problem.get("s")
    try:
        rows = bootstrap_schedule(dim, th, g, p, q, kind, None if s is None else float(s))
    except (ScheduleError, ParameterError) as exc:
        raise ConfigError("problem", str(exc)) from None
    ok = not check_schedule(dim, th, g, rows, kind)
    out.csv("ladder.csv", ["j", "p", "q", "s", "dim_over_p", "checks_pass"],
            ((j + 1, pj, qj, sj, dim / pj, ok) for j, (pj, qj, sj) in enumerate(rows)))
    summary.update(rows=len(rows), checks_pass=ok)


def embedding_constants(grid: GridSpec, params: SpaceParams, gamma: float, data_s: float,
                        seeds, center_stride: int = 4, refine: bool = False):
    """Fitted embedding constants (max ratio over seeded ``random_shell`` fields).

    With ``refine`` the same band-limited fields are also evaluated on the
    doubled grid; returns ``{name: (constant, constant_refined | None)}``.
    """
    from .initial_data import random_shell

    fields = [Field.physical(grid, random_shell(grid, data_s, sd)) for sd in seeds]
    base = embedding_ratios(build_bank(grid), fields, params, gamma,
                            MorreyGridPolicy.dyadic(grid, center_stride))
    fine = None
    if refine:
        g2 = grid.refined(2)
        fine = embedding_ratios(build_bank(g2), [resample(f, g2) for f in fields], params, gamma,
                                MorreyGridPolicy.dyadic(g2, center_stride))
    return base, fine


def _exp_embedding(cfg, out, summary):
    grid = cfg.grid_spec()
    sp = cfg.space()
    gamma = float(cfg.problem.get("gamma", 2.0))
    count = int(cfg.params.get("count", 50))
    seed0 = int(cfg.runtime.get("seed", 0))
    data_s = float(cfg.data.get("s", sp.s)) if cfg.data else sp.s
    seeds = list(range(seed0, seed0 + count))
    refine = bool(cfg.runtime.get("refine", False))
    base, fine = embedding_constants(grid, sp, gamma, data_s, seeds,
                                     int(cfg.problem.get("center_stride", 4)), refine)
    names = list(base)
    out.csv("embedding.csv", ["seed"] + names, ([sd] + [base[k][i] for k in names] for i, sd in enumerate(seeds)))
    rows = []
    for k in names:
        c = float(base[k].max())
        cf = None if fine is None else float(fine[k].max())
        rows.append((k, c, cf, None if cf is None else abs(cf / c - 1.0)))
    out.csv("embedding_constants.csv", ["chain", "constant", "constant_refined", "relative_change"], rows)
    summary.update({f"C_{k}": c for k, c, _, _ in rows})


_RUNNERS = {
    "lp-check": _exp_lp_check,
    "norms": _exp_norms,
    "semigroup": _exp_semigroup,
    "kernel-bounds": _exp_kernel_bounds,
    "split": _exp_split,
    "solve": lambda c, o, s: _exp_solve(c, o, s, POWER),
    "solve-hj": lambda c, o, s: _exp_solve(c, o, s, HJ),
    "threshold-scan": _exp_threshold,
    "bootstrap-schedule": _exp_bootstrap,
    "embedding-check": _exp_embedding,
}


def run(config: ExperimentConfig) -> RunManifest:
    """Execute one experiment and write its outputs plus ``manifest.json``.

    Configuration problems raise :class:`ConfigError` before anything is
    written. Numerical failures are reported in the manifest
    (``status="failed"``, ``exit_code=3``) with partial outputs kept.
    """
    out_dir = Path(config.runtime.get("out_dir", "."))
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError("runtime.out_dir", str(exc)) from None
    if not os.access(out_dir, os.W_OK):
        raise ConfigError("runtime.out_dir", f"{out_dir} is not writable")
    set_fft_workers(int(config.runtime.get("threads", default_threads())))
    manifest = RunManifest(config.experiment, config.to_dict(), __version__, ZETA_PROFILE)
    out = _Outputs(out_dir, manifest)
    start = time.perf_counter()
    try:
        _RUNNERS[config.experiment](config, out, manifest.summary)
    except ConfigError:
        raise
    except (ParameterError, ContractError, ConfigurationError) as exc:
        raise ConfigError(config.experiment, str(exc)) from None
    except (NumericalFailure, FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
        manifest.status = "failed"
        manifest.error = str(exc)
        manifest.exit_code = EXIT_NUMERICAL
    manifest.wall_time = time.perf_counter() - start
    (out_dir / "manifest.json").write_text(manifest.to_json() + "\n")
    return manifest


def sweep(configs, parallelism: int = 1, threads: int | None = None) -> list[RunManifest]:
    """Run several configs concurrently; results follow input order.

    A config that fails (invalid or numerically) yields a manifest with
    ``status="failed"`` and never affects its siblings. ``threads`` is the
    total FFT thread budget shared by the concurrent runs.
    """
    configs = list(configs)
    dirs = [str(Path(c.runtime.get("out_dir", ".")).resolve()) for c in configs]
    dup = {d for d in dirs if dirs.count(d) > 1}
    if dup:
        raise ConfigError("runtime.out_dir", f"duplicate output directories: {sorted(dup)}")
    if not configs:
        return []
    parallelism = max(1, min(int(parallelism), len(configs)))
    budget = threads if threads is not None else default_threads()
    per_run = max(1, budget // parallelism)

    def one(cfg: ExperimentConfig) -> RunManifest:
        cfg = ExperimentConfig(cfg.experiment, dict(cfg.grid), dict(cfg.problem), dict(cfg.data),
                               {**cfg.runtime, "threads": cfg.runtime.get("threads", per_run)},
                               dict(cfg.params))
        try:
            return run(cfg)
        except ConfigError as exc:
            return RunManifest(cfg.experiment, cfg.to_dict(), __version__, ZETA_PROFILE,
                               status="failed", error=str(exc), exit_code=EXIT_CONFIG)
        except Exception as exc:  # isolation: one config never aborts the others
            log.exception("run failed")
            return RunManifest(cfg.experiment, cfg.to_dict(), __version__, ZETA_PROFILE,
                               status="failed", error=f"{type(exc).__name__}: {exc}",
                               exit_code=EXIT_NUMERICAL)

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, configs))


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracmorrey", description=__doc__.splitlines()[0])
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", required=True, help="JSON configuration file")
    ap.add_argument("--out-dir", help="output directory (overrides runtime.out_dir)")
    ap.add_argument("--threads", type=int, help="FFT thread budget (default $FRACMORREY_THREADS or 1)")
    ap.add_argument("--seed", type=int, help="seed for seeded data (overrides runtime.seed)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        try:
            raw = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError("--config", str(exc)) from None
        except json.JSONDecodeError as exc:
            raise ConfigError("--config", f"invalid JSON: {exc}") from None
        if isinstance(raw, dict):
            rt = raw.setdefault("runtime", {}) if "runtime" in raw else raw
            if args.out_dir is not None:
                rt["out_dir"] = args.out_dir
            if args.seed is not None:
                rt["seed"] = args.seed
            if args.threads is not None:
                rt["threads"] = args.threads
        cfg = ExperimentConfig.from_dict(raw, args.experiment)
        if "threads" not in cfg.runtime:
            cfg.runtime["threads"] = default_threads()
        manifest = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if manifest.status != "ok":
        print(f"numerical failure: {manifest.error}", file=sys.stderr)
        return manifest.exit_code
    print(json.dumps(manifest.summary, sort_keys=True, default=_jsonable))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
