"""Configuration-driven entry point: run, verify, stokes, report.

Exit codes are CI-facing: 0 all passed, 1 configuration or input error,
2 a verdict failed. Validation happens before any computation and the
first failing key is named. Corpus sweeps fan out over a thread pool
capped by MHDRELAX_THREADS; results are collected in seed order, so the
emitted CSVs are byte-identical however many workers run.
"""

from __future__ import annotations

import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np
import tomli

from . import dynamics, experiments, lorentz, reporting, stokes
from .fields import TorusGrid, FlowState, advective_term, init_field, lp_norm, sobolev_norm, to_physical
from .lorentz import weak_lp_quasinorm
from .snapshot import read_snapshot, snapshot_of_field, write_snapshot

DBDT_BOUND_TOL = 1.0 + 1e-8
CANCELLATION_TOL = 1e-10
SUITES = ("lorentz", "stokes", "dynamics", "all")
EXPERIMENTS = ("uniqueness", "smoothing", "relaxation")


class ConfigError(Exception):
    """Invalid configuration; the message names the offending key."""


def _worker_count() -> int:
    raw = os.environ.get("MHDRELAX_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"MHDRELAX_THREADS: not an integer: {raw!r}")


def _pmap(fn, items):
    items = list(items)
    workers = _worker_count()
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# configuration

@dataclass
class RunConfig:
    n: int
    nu: float
    eta: float
    dt: float
    t_end: float
    cfl_safety: float
    init_kind: str
    seed: int | None
    spectrum_exponent: float | None
    init_path: str | None
    out_dir: str
    cadence: int
    experiment: str | None
    exp_params: dict
    echo: dict = field(repr=False, default_factory=dict)


def _get(raw: dict, dotted: str):
    node = raw
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            return None
        node = node[part]
    return node


def _set_dotted(raw: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = raw
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{dotted}: cannot override inside non-table key")
    node[parts[-1]] = value


def _parse_override(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise ConfigError(f"--set needs key=value, got {text!r}")
    key, _, raw_value = text.partition("=")
    key = key.strip()
    if not key:
        raise ConfigError(f"--set needs a nonempty key, got {text!r}")
    try:
        value = tomli.loads(f"v = {raw_value}")["v"]
    except tomli.TOMLDecodeError:
        value = raw_value
    return key, value


def _require(raw: dict, key: str, kind, pred=None, reason: str = ""):
    value = _get(raw, key)
    if value is None:
        raise ConfigError(f"{key}: missing required key")
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ConfigError(f"{key}: expected {kind.__name__}, got {value!r}")
    if pred is not None and not pred(value):
        raise ConfigError(f"{key}: {reason}, got {value!r}")
    return value


def _optional(raw: dict, key: str, default, kind, pred=None, reason: str = ""):
    if _get(raw, key) is None:
        return default
    return _require(raw, key, kind, pred, reason)


def load_config(path, overrides=()) -> RunConfig:
    """Parse, override, and fail-fast validate a run configuration."""
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config file does not parse: {exc}")
    for text in overrides:
        key, value = _parse_override(text)
        _set_dotted(raw, key, value)

    n = _require(raw, "grid.n", int, lambda v: v >= 4 and v % 2 == 0, "must be an even integer >= 4")
    nu = _require(raw, "params.nu", float, lambda v: v > 0, "must be positive")
    eta = _require(raw, "params.eta", float, lambda v: v >= 0, "must be nonnegative")
    dt = _require(raw, "time.dt", float, lambda v: v > 0, "must be positive")
    t_end = _require(raw, "time.t_end", float, lambda v: v >= 0, "must be nonnegative")
    cfl = _optional(raw, "time.cfl_safety", 0.5, float, lambda v: 0 < v <= 1, "must lie in (0, 1]")
    kind = _require(raw, "init.kind", str, lambda v: v in ("taylor_green", "random_sobolev", "from_file"),
                    "must be taylor_green, random_sobolev, or from_file")
    seed = _optional(raw, "init.seed", None, int)
    exponent = _optional(raw, "init.spectrum_exponent", None, float, lambda v: v > 0, "must be positive")
    init_path = _optional(raw, "init.path", None, str)
    if kind == "random_sobolev":
        if seed is None:
            raise ConfigError("init.seed: required when init.kind is random_sobolev")
        if exponent is None:
            raise ConfigError("init.spectrum_exponent: required when init.kind is random_sobolev")
    if kind == "from_file" and init_path is None:
        raise ConfigError("init.path: required when init.kind is from_file")
    out_dir = _optional(raw, "output.dir", "out", str)
    cadence = _optional(raw, "output.cadence", 100, int, lambda v: v >= 1, "must be >= 1")
    experiment = _optional(raw, "experiment.name", None, str,
                           lambda v: v in EXPERIMENTS, f"must be one of {EXPERIMENTS}")
    exp_params = _optional(raw, "experiment.params", {}, dict)

    return RunConfig(n, nu, eta, dt, t_end, cfl, kind, seed, exponent, init_path,
                     out_dir, cadence, experiment, dict(exp_params), raw)


def _galerkin(cfg: RunConfig) -> dynamics.GalerkinConfig:
    return dynamics.GalerkinConfig(
        TorusGrid(cfg.n), cfg.nu, cfg.eta, cfg.dt, cfg.t_end, cfl_safety=cfg.cfl_safety
    )


# ---------------------------------------------------------------------------
# run

def _plain_run(cfg: RunConfig, out: Path) -> int:
    gconf = _galerkin(cfg)
    B0 = init_field(gconf.grid, cfg.init_kind, seed=cfg.seed,
                    spectrum_exponent=cfg.spectrum_exponent, path=cfg.init_path)
    state0 = FlowState(0.0, B0, cfg.nu, cfg.eta)
    counter = [0]

    def snapshot_observer(state: FlowState) -> None:
        snapshot_of_field(out / f"snap_{counter[0]:06d}.smhd", state.t, state.B)
        counter[0] += 1

    final, ledger = dynamics.integrate(
        state0, gconf, observers=(snapshot_observer,), cadence=cfg.cadence
    )
    reporting.write_csv(out / "ledger.csv", dynamics.LEDGER_HEADER, ledger.rows())
    snapshot_of_field(out / "final.smhd", final.t, final.B)
    reporting.write_metadata(out, cfg.echo)
    click.echo(f"run finished at t = {final.t:g}; ledger has {len(ledger)} rows -> {out}")
    return 0


def _experiment_run(cfg: RunConfig, out: Path) -> int:
    gconf = _galerkin(cfg)
    params = cfg.exp_params
    if cfg.experiment == "uniqueness":
        report = experiments.run_uniqueness(
            gconf,
            delta=params.get("deltas", (1e-4, 1e-5, 1e-6)),
            seed=cfg.seed if cfg.seed is not None else 0,
            spectrum_exponent=cfg.spectrum_exponent or 2.5,
            out_dir=out,
        )
    elif cfg.experiment == "smoothing":
        report = experiments.run_smoothing(
            gconf,
            ns=tuple(params.get("ns", (64, 128, 256))),
            seed=cfg.seed if cfg.seed is not None else 0,
            times=tuple(params.get("times", (0.0, 0.1, 0.5))),
            spectrum_exponent=cfg.spectrum_exponent or 1.5,
            out_dir=out,
        )
    else:
        report = experiments.run_relaxation(
            gconf,
            seed=cfg.seed if cfg.seed is not None else 7,
            spectrum_exponent=cfg.spectrum_exponent or 2.5,
            out_dir=out,
        )
    reporting.write_metadata(out, cfg.echo)
    failed = 0
    for v in report.verdicts:
        click.echo(v.render())
        failed += 0 if v.passed else 1
    return 2 if failed else 0


def cmd_run(config_path, overrides, output_dir) -> int:
    cfg = load_config(config_path, overrides)
    out = Path(output_dir) if output_dir is not None else Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.experiment is None:
        return _plain_run(cfg, out)
    return _experiment_run(cfg, out)


# ---------------------------------------------------------------------------
# verify

def _parse_seeds(text: str) -> list:
    text = text.strip()
    try:
        if ".." in text:
            lo, _, hi = text.partition("..")
            a, b = int(lo), int(hi)
            if b < a:
                raise ValueError
            return list(range(a, b + 1))
        return [int(text)]
    except ValueError:
        raise ConfigError(f"--seeds: expected N or A..B, got {text!r}")


def _verify_lorentz(seeds, out: Path) -> list:
    grid = TorusGrid(64)
    sweep = lorentz.scalar_inequality_sweep(grid, seeds)
    for name, reports in sweep.items():
        reporting.write_csv(
            out / f"lorentz_{name}.csv",
            ("corpus_id", "lhs", "rhs", "ratio"),
            ((r.corpus_id, r.lhs, r.rhs, r.ratio) for r in reports),
        )

    def chebyshev(seed):
        f = lorentz.corpus_scalar_field(grid, seed)
        quasi = weak_lp_quasinorm(f, 4.0).value
        strong = lp_norm(f, 4.0)
        return (f"seed={seed}", quasi, strong, quasi / strong)

    rows = _pmap(chebyshev, seeds)
    reporting.write_csv(out / "lorentz_chebyshev.csv", ("corpus_id", "lhs", "rhs", "ratio"), rows)

    verdicts = []
    worst = max(r[3] for r in rows)
    verdicts.append(reporting.VerdictLine(
        "chebyshev_weak_le_strong", "<= 1 + 1e-12", worst, worst <= 1.0 + 1e-12
    ))
    for name, reports in sweep.items():
        mx = max(r.ratio for r in reports)
        verdicts.append(reporting.VerdictLine(f"{name}_finite", "isfinite", mx, bool(np.isfinite(mx))))
    return verdicts


def _verify_stokes(seeds, out: Path) -> list:
    rng = np.random.default_rng(101)
    pts = rng.uniform(-2.0, 2.0, size=(10_000, 2))
    pts = pts[np.hypot(pts[:, 0], pts[:, 1]) > 1e-6]
    radii = np.hypot(pts[:, 0], pts[:, 1])
    rows = []
    worst = 0.0
    for nu in (0.1, 1.0, 10.0):
        grad = stokes.greens_gradient(pts, nu)
        product = np.max(np.abs(grad), axis=(1, 2, 3)) * (np.pi * nu * radii)
        violations = int(np.sum(product > 1.0))
        worst = max(worst, float(product.max()))
        rows.append((nu, float(product.max()), violations))
    reporting.write_csv(out / "stokes_greens_bound.csv", ("nu", "max_product", "violations"), rows)

    def young(seed):
        specs = stokes.bump_corpus_pair(seed)
        rep = stokes.freespace_estimate_report(specs, box=1.0, n=128, nu=1.0)
        return (f"seed={seed}", rep["f_l1"], rep["u_weak_l2"], rep["kernel_quasinorm"], rep["young_ratio"])

    yrows = _pmap(young, seeds)
    reporting.write_csv(
        out / "stokes_weak_young.csv",
        ("corpus_id", "f_l1", "u_weak_l2", "kernel_quasinorm", "young_ratio"),
        yrows,
    )
    max_ratio = max(r[4] for r in yrows)
    return [
        reporting.VerdictLine("greens_gradient_bound", "<= 1", worst, worst <= 1.0),
        reporting.VerdictLine("weak_young_finite", "isfinite", max_ratio, bool(np.isfinite(max_ratio))),
    ]


def _verify_dynamics(seeds, out: Path) -> list:
    grid = TorusGrid(64)

    def one(seed):
        ratio = dynamics.dBdt_hminus1_bound_check(dynamics.corpus_state(grid, seed))
        c1, c2 = dynamics.semidiscrete_cancellations(
            dynamics.corpus_vector_field(grid, seed, stream=1), 1.0
        )
        u = dynamics.corpus_vector_field(grid, seed, stream=0)
        v = dynamics.corpus_vector_field(grid, seed, stream=1)
        lhs = sobolev_norm(advective_term(u, v), 2)
        rhs_val = sobolev_norm(u, 2) * sobolev_norm(v, 3)
        return (seed, ratio, c1, c2, lhs, rhs_val)

    rows = _pmap(one, seeds)
    reporting.write_csv(
        out / "dynamics_dbdt_bound.csv",
        ("corpus_id", "lhs", "rhs", "ratio"),
        ((f"seed={s}", r, 1.0, r) for s, r, _, _, _, _ in rows),
    )
    reporting.write_csv(
        out / "dynamics_cancellations.csv",
        ("corpus_id", "advection_pairing", "stretching_pairing"),
        ((f"seed={s}", c1, c2) for s, _, c1, c2, _, _ in rows),
    )
    reporting.write_csv(
        out / "dynamics_hs_product.csv",
        ("corpus_id", "lhs", "rhs", "ratio"),
        ((f"seed={s}", l, rv, l / rv) for s, _, _, _, l, rv in rows),
    )
    worst_ratio = max(r[1] for r in rows)
    worst_cancel = max(max(r[2], r[3]) for r in rows)
    worst_hs = max(r[4] / r[5] for r in rows)
    return [
        reporting.VerdictLine("dbdt_bound_ratio", "<= 1 + 1e-8", worst_ratio, worst_ratio <= DBDT_BOUND_TOL),
        reporting.VerdictLine("cancellations", "<= 1e-10", worst_cancel, worst_cancel <= CANCELLATION_TOL),
        reporting.VerdictLine("hs_product_finite", "isfinite", worst_hs, bool(np.isfinite(worst_hs))),
    ]


def cmd_verify(suite: str, seeds_text: str, output_dir: str) -> int:
    if suite not in SUITES:
        raise ConfigError(f"--suite: must be one of {SUITES}, got {suite!r}")
    seeds = _parse_seeds(seeds_text)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    verdicts = []
    if suite in ("lorentz", "all"):
        verdicts += _verify_lorentz(seeds, out)
    if suite in ("stokes", "all"):
        verdicts += _verify_stokes(seeds, out)
    if suite in ("dynamics", "all"):
        verdicts += _verify_dynamics(seeds, out)
    reporting.write_verdicts(out / "verdict.txt", verdicts)
    reporting.write_metadata(out, {"verify": {"suite": suite, "seeds": seeds_text}})
    failed = 0
    for v in verdicts:
        click.echo(v.render())
        failed += 0 if v.passed else 1
    return 2 if failed else 0


# ---------------------------------------------------------------------------
# one-shot stokes solve

def cmd_stokes(input_path: str, nu: float, output_path) -> int:
    if nu <= 0:
        raise ConfigError(f"--nu: must be positive, got {nu}")
    try:
        snap = read_snapshot(input_path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"--input: {exc}")
    if output_path is None:
        output_path = str(Path(input_path).with_suffix("")) + "_velocity.smhd"

    if snap.box is None:
        if snap.samples.shape[0] != 2:
            raise ConfigError(
                f"--input: torus snapshot must hold 2 components (B), got {snap.samples.shape[0]}"
            )
        grid = TorusGrid(snap.samples.shape[1])
        B = init_field(grid, "from_file", path=input_path)
        sol = stokes.velocity_from_B(B, nu)
        write_snapshot(output_path, snap.t,
                       [to_physical(sol.u.x_comp), to_physical(sol.u.y_comp)])
        click.echo(
            f"torus solve: n = {grid.n}, residual = {sol.residual_rel:.3e}, "
            f"|u|_L2 = {sobolev_norm(sol.u, 0):.6e} -> {output_path}"
        )
        return 0

    if snap.samples.shape[0] != 4:
        raise ConfigError(
            "--input: free-space snapshot must hold 4 components "
            f"(forcing tensor rows f11, f12, f21, f22), got {snap.samples.shape[0]}"
        )
    n = snap.samples.shape[1]
    f = snap.samples.reshape(2, 2, n, n)
    u = stokes.solve_stokes_freespace(f, snap.box, nu)
    write_snapshot(output_path, snap.t, [u[0], u[1]], box=snap.box)
    click.echo(
        f"free-space solve: n = {n}, box = {snap.box:g}, "
        f"max |u| = {float(np.max(np.hypot(u[0], u[1]))):.6e} -> {output_path}"
    )
    return 0


# ---------------------------------------------------------------------------
# report re-evaluation

def _ledger_verdicts(cols) -> list:
    energy = np.asarray(cols["energy_B"])
    residual = np.asarray(cols["balance_residual"])
    rise = float(np.max(np.diff(energy))) if energy.size >= 2 else 0.0
    mono = rise <= 1e-12 * float(energy[0]) if energy.size >= 2 else True
    final_res = float(residual[-1]) if residual.size else 0.0
    return [
        reporting.VerdictLine("energy_B_nonincreasing", "diff <= 1e-12 rel", rise, bool(mono)),
        reporting.VerdictLine("balance_residual_final", "< 1e-6", final_res, final_res < 1e-6),
    ]


def cmd_report(directory: str) -> int:
    root = Path(directory)
    meta_path = root / "metadata.json"
    report_path = root / "report.csv"
    ledger_path = root / "ledger.csv"
    if report_path.exists():
        import json

        name = None
        if meta_path.exists():
            with open(meta_path) as fh:
                meta = json.load(fh)
            name = _get(meta.get("config", {}), "experiment.name")
        if name is None:
            raise ConfigError(f"{meta_path}: cannot determine the experiment name")
        _, cols = reporting.read_csv(report_path)
        metrics = {k: np.asarray(v) for k, v in cols.items()}
        verdicts = experiments.verdicts_from_metrics(name, metrics)
    elif ledger_path.exists():
        _, cols = reporting.read_csv(ledger_path)
        verdicts = _ledger_verdicts(cols)
    else:
        raise ConfigError(f"--dir: neither report.csv nor ledger.csv found under {directory}")
    reporting.write_verdicts(root / "verdict.txt", verdicts)
    failed = 0
    for v in verdicts:
        click.echo(v.render())
        failed += 0 if v.passed else 1
    return 2 if failed else 0


# ---------------------------------------------------------------------------
# click wiring

@click.group()
def main() -> None:
    """Pseudo-spectral magnetic relaxation toolkit."""


def _run_exit(fn, *args) -> None:
    try:
        sys.exit(fn(*args))
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


@main.command("run")
@click.option("--config", "config_path", required=True, help="TOML run configuration.")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Override a config key (dotted path, last wins).")
@click.option("--output-dir", default=None, help="Override output.dir from the config.")
def run_command(config_path, overrides, output_dir) -> None:
    """Run a time integration or a named experiment from a config file."""
    _run_exit(cmd_run, config_path, overrides, output_dir)


@main.command("verify")
@click.option("--suite", required=True, help="lorentz, stokes, dynamics, or all.")
@click.option("--seeds", "seeds_text", default="0..19", show_default=True,
              metavar="N|A..B", help="Corpus seed or inclusive seed range.")
@click.option("--output-dir", default="verify_out", show_default=True)
def verify_command(suite, seeds_text, output_dir) -> None:
    """Run inequality verification sweeps; exit 2 on any hard violation."""
    _run_exit(cmd_verify, suite, seeds_text, output_dir)


@main.command("stokes")
@click.option("--input", "input_path", required=True, help="SMHD snapshot to solve from.")
@click.option("--nu", default=1.0, show_default=True, help="Viscosity.")
@click.option("--output", "output_path", default=None,
              help="Velocity snapshot path (default: alongside the input).")
def stokes_command(input_path, nu, output_path) -> None:
    """One-shot Stokes solve from a snapshot file.

    A torus snapshot (no box header) must hold the two components of B; a
    free-space snapshot must hold the four forcing tensor components.
    """
    _run_exit(cmd_stokes, input_path, nu, output_path)


@main.command("report")
@click.option("--dir", "directory", required=True, help="Output directory of a previous run.")
def report_command(directory) -> None:
    """Re-evaluate verdicts from the CSVs of an existing run."""
    _run_exit(cmd_report, directory)
