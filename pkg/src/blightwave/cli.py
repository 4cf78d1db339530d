"""Command-line interface: ``blightwave {simulate,wave,sobol,check}``.

Every command reads an optional INI config (see :mod:`blightwave.config`),
applies ``BLIGHTWAVE_*`` environment overrides and then command-line flags,
and writes its outputs into ``--out``. CSV files start with ``#`` comment
lines carrying the seed and the config hash, followed by one header row.

Exit codes: 0 success (warnings allowed), 2 configuration or I/O error,
3 experiment aborted.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .config import RunConfig, config_hash, dumps_config, load_config
from .errors import BlightError, ConfigError
from .model import a_priori_bounds, check_theorem_constraints
from .sensitivity import SensitivityAborted, run_sensitivity
from .solver import COMPARTMENTS, Grid, Trajectory, integrate, standard_initial_condition
from .svg import bar_chart_svg, snapshot_svg
from .waves import SUMMARY_STATISTICS, WaveExperimentResult, peak_location, wave_experiment

logger = logging.getLogger("blightwave")

EXIT_OK, EXIT_CONFIG, EXIT_ABORTED = 0, 2, 3

TRAJECTORY_COLUMNS = ("t", "x", "B", "O", "S", "I", "R")
WAVE_SAMPLE_COLUMNS = ("sample", "D1", "D2", "K", "eps", "r", "mu", "gamma", "alpha", "M1", "M2",
                       "A1", "A2", "n1", "n2", "pearson", "l2", "neighborhood_truncated", "speed",
                       "speed_minus_cmin", "status")
WAVE_SUMMARY_COLUMNS = ("statistic", "sample_min", "sample_max", "sample_mean", "std_dev")
WAVE_SUMMARY_ROWS = {"pearson": "pearson_correlation", "l2_shape_diff": "local_l2_norm",
                     "speed_minus_cmin": "wave_speed_difference"}
SOBOL_COLUMNS = ("factor", "S", "S_ci_low", "S_ci_high", "T", "T_ci_low", "T_ci_high")


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return "nan" if math.isnan(value) else repr(float(value))
    return str(value)


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence],
              cfg: RunConfig, comments: Sequence[str] = ()) -> Path:
    """CSV with provenance comments, a header row and repr-formatted floats."""
    buf = io.StringIO()
    buf.write(f"# blightwave {__version__} {cfg.experiment}\n")
    buf.write(f"# seed = {cfg.seed}\n")
    buf.write(f"# config_sha256 = {config_hash(cfg)}\n")
    for line in comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_csv(path: str | Path) -> tuple[list[str], list[dict[str, str]]]:
    """Comments and rows of a file written by :func:`write_csv`."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    comments = [ln[2:] for ln in lines if ln.startswith("# ")]
    body = [ln for ln in lines if not ln.startswith("#")]
    return comments, list(csv.DictReader(body))


def _prepare_out(out: str | Path, cfg: RunConfig) -> Path:
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
        (path / "config.ini").write_text(
            f"# config_sha256 = {config_hash(cfg)}\n" + dumps_config(cfg), encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot write to output directory {path}: {exc.strerror or exc}") from None
    return path


def _simulation_times(cfg: RunConfig) -> list[float]:
    it = cfg.integrator
    times = set(float(t) for t in cfg.simulate.snapshots)
    if it.record_every is not None:
        n = int(math.floor(it.t_end / it.record_every + 1e-9))
        times.update(round(k * it.record_every, 12) for k in range(1, n + 1))
    return sorted(times)


def simulate_trajectory(cfg: RunConfig) -> Trajectory:
    """Integrate the configured initial-value problem."""
    it = cfg.integrator
    grid = Grid(cfg.grid.length, cfg.grid.n_cells)
    state0 = standard_initial_condition(grid, cfg.params, cfg.initial.b_seed)
    if it.method == "bdf":
        times = _simulation_times(cfg) or [it.t_end]
        return integrate(state0, cfg.params, grid, it.t_end, dt=it.dt, record_times=times,
                         rtol=it.rtol, atol=it.atol)
    return integrate(state0, cfg.params, grid, it.t_end, dt=it.dt, method=it.method,
                     record_every=it.record_every)


def cmd_simulate(cfg: RunConfig, out: str | Path) -> dict[str, Path]:
    """Trajectory CSV (one row per cell per recorded time) and one SVG per snapshot."""
    cfg = replace(cfg, experiment="simulate")
    out = _prepare_out(out, cfg)
    traj = simulate_trajectory(cfg)
    grid = traj.grid
    x = grid.centers

    def rows():
        for snap in traj.snapshots:
            cols = [getattr(snap, c) for c in COMPARTMENTS]
            for k in range(grid.n_cells):
                yield (snap.t, x[k], *(c[k] for c in cols))

    peaks = [f"peak_I(t={s.t:g}) = {peak_location(s.i, grid).location!r}" for s in traj.snapshots]
    written = {"trajectory": write_csv(out / "trajectory.csv", TRAJECTORY_COLUMNS, rows(), cfg,
                                       [f"method = {traj.method}", *peaks])}
    for t in cfg.simulate.snapshots:
        try:
            snap = traj.at(t)
        except BlightError as exc:
            raise ConfigError(f"snapshot t={t} was not recorded: {exc}") from None
        fields = {c.upper(): getattr(snap, c) for c in COMPARTMENTS}
        path = out / f"snapshot_t{t:07.3f}.svg"
        path.write_text(snapshot_svg(x, fields, t, cfg.params.N), encoding="utf-8")
        written[f"svg_{t:g}"] = path
    return written


def _wave_rows(result: WaveExperimentResult):
    for s in result.samples:
        p = s.params
        st = s.stats
        stats = ((st.pearson, st.l2_shape_diff, st.neighborhood_truncated, st.speed,
                  st.speed_minus_cmin) if st else (math.nan,) * 2 + ("",) + (math.nan,) * 2)
        yield (s.index, *(p[name] for name in WAVE_SAMPLE_COLUMNS[1:15]), *stats, s.status)


def cmd_wave(cfg: RunConfig, out: str | Path, *, progress=None) -> dict[str, Path]:
    """Per-sample statistics and the min/max/mean/std summary table."""
    cfg = replace(cfg, experiment="wave")
    out = _prepare_out(out, cfg)
    result = wave_experiment(cfg.wave.n_samples, cfg.seed, cfg.wave_ranges, cfg.wave_config(),
                             workers=cfg.threads, progress=progress)
    if result.n_failed:
        logger.warning("%d of %d wave samples failed and are excluded from the summary",
                       result.n_failed, len(result.samples))
    written = {"samples": write_csv(out / "wave_samples.csv", WAVE_SAMPLE_COLUMNS,
                                    _wave_rows(result), cfg,
                                    [f"n_samples = {len(result.samples)}",
                                     f"n_failed = {result.n_failed}"])}
    summary_rows = [(WAVE_SUMMARY_ROWS[name], result.summary[name]["min"],
                     result.summary[name]["max"], result.summary[name]["mean"],
                     result.summary[name]["std"]) for name in SUMMARY_STATISTICS]
    written["summary"] = write_csv(out / "wave_summary.csv", WAVE_SUMMARY_COLUMNS, summary_rows,
                                   cfg, [f"n_ok = {len(result.samples) - result.n_failed}",
                                         f"n_failed = {result.n_failed}"])
    return written


def cmd_sobol(cfg: RunConfig, out: str | Path, *, progress=None) -> dict[str, Path]:
    """Sobol indices CSV, the per-run design/QoI CSV and a grouped bar chart."""
    cfg = replace(cfg, experiment="sobol")
    out = _prepare_out(out, cfg)
    s = cfg.sobol
    result = run_sensitivity(cfg.sobol_factors, s.n_base, cfg.seed, cfg.sobol_config(),
                             sampler=s.sampler, n_bootstrap=s.n_bootstrap, workers=cfg.threads,
                             progress=progress)
    nan_pair = np.full((result.k, 2), math.nan)
    fci = result.first_ci if result.first_ci is not None else nan_pair
    tci = result.total_ci if result.total_ci is not None else nan_pair
    rows = [(name, result.first_order[i], fci[i, 0], fci[i, 1], result.total_order[i],
             tci[i, 0], tci[i, 1]) for i, name in enumerate(result.factors)]
    comments = [f"{result.total_runs} model runs (n_base = {result.n_base}, k = {result.k}, "
                f"sampler = {result.sampler})",
                f"qoi = peak location of I at t = {s.t_q:g} days",
                f"variance = {result.variance!r}",
                f"sum_S = {float(np.nansum(result.first_order))!r}",
                f"degenerate_runs = {result.degenerate_runs}"]
    written = {"indices": write_csv(out / "sobol_indices.csv", SOBOL_COLUMNS, rows, cfg, comments)}
    design = result.extra["design_rows"]
    run_rows = ((k, *design[k], result.outputs[k]) for k in range(design.shape[0]))
    written["runs"] = write_csv(out / "sobol_runs.csv", ("run", *result.factors, "peak_location"),
                                run_rows, cfg, comments[:1])
    svg = bar_chart_svg(result.factors,
                        {"first order S_i": result.first_order, "total effect T_i": result.total_order},
                        {"first order S_i": [tuple(r) for r in fci],
                         "total effect T_i": [tuple(r) for r in tci]},
                        title=f"Sobol indices ({result.total_runs} model runs)", ylabel="index")
    (out / "sobol_indices.svg").write_text(svg, encoding="utf-8")
    written["svg"] = out / "sobol_indices.svg"
    return written


def check_report(cfg: RunConfig) -> list[tuple[str, object]]:
    p = cfg.params
    report = check_theorem_constraints(p)
    grid = Grid(cfg.grid.length, cfg.grid.n_cells)
    init = standard_initial_condition(grid, p, cfg.initial.b_seed)
    bounds = a_priori_bounds(p, float(init.b.max()), float(init.o.max()))
    return [("d2_le_d1", report.d2_le_d1), ("exponent_link", report.exponent_link),
            ("m1_le_gN", report.m1_le_gN), ("ooze_inequality", report.ooze_inequality),
            ("all_satisfied", report.all_satisfied), ("c_min", report.c_min),
            ("b_max", bounds.b_max), ("o_max", bounds.o_max),
            ("compartment_max", bounds.compartment_max)]


def cmd_check(cfg: RunConfig, out: str | Path, stream=None) -> dict[str, Path]:
    """Print the travelling-wave constraints, ``c_min`` and the a-priori bounds."""
    cfg = replace(cfg, experiment="check")
    out = _prepare_out(out, cfg)
    stream = stream or sys.stdout
    rows = check_report(cfg)
    for name, value in rows:
        stream.write(f"{name:<16} {_cell(value)}\n")
    return {"check": write_csv(out / "check.csv", ("quantity", "value"), rows, cfg)}


COMMANDS = {"simulate": cmd_simulate, "wave": cmd_wave, "sobol": cmd_sobol, "check": cmd_check}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blightwave",
        description="Blossom-blight reaction-diffusion simulations and analyses.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"simulate": "integrate one configuration and write snapshots",
             "wave": "travelling-wave statistics over sampled parameter sets",
             "sobol": "Sobol sensitivity of the infection-peak location",
             "check": "report travelling-wave constraints and a-priori bounds"}
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--seed", type=int, help="master seed (overrides [run] seed)")
        p.add_argument("--out", default="blightwave_out", help="output directory")
        p.add_argument("--samples", type=int,
                       help="wave: n_samples; sobol: n_base (overrides the config)")
        p.add_argument("--threads", type=int, help="worker processes for sample evaluation")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    return parser


def resolve_config(args: argparse.Namespace, environ=None) -> RunConfig:
    """Config file, then environment, then command-line flags."""
    cfg = load_config(args.config, environ)
    cfg = replace(cfg, experiment=args.command)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be >= 0")
        cfg = replace(cfg, seed=args.seed)
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = replace(cfg, threads=args.threads)
    if args.samples is not None:
        if args.command == "wave":
            if args.samples < 1:
                raise ConfigError("--samples must be >= 1")
            cfg = replace(cfg, wave=replace(cfg.wave, n_samples=args.samples))
        elif args.command == "sobol":
            if args.samples < 2:
                raise ConfigError("--samples (n_base) must be >= 2")
            cfg = replace(cfg, sobol=replace(cfg.sobol, n_base=args.samples))
        else:
            raise ConfigError(f"--samples does not apply to {args.command}")
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        progress = None
        if args.verbose and args.command in ("wave", "sobol"):
            counter = iter(range(1, 10 ** 9))
            progress = lambda _res: logger.info("finished evaluation %d", next(counter))  # noqa: E731
        kwargs = {"progress": progress} if args.command in ("wave", "sobol") else {}
        written = COMMANDS[args.command](cfg, args.out, **kwargs)
    except ConfigError as exc:
        print(f"blightwave: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"blightwave: I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SensitivityAborted as exc:
        print(f"blightwave: sensitivity run aborted: {exc}", file=sys.stderr)
        return EXIT_ABORTED
    except BlightError as exc:
        print(f"blightwave: experiment aborted: {exc}", file=sys.stderr)
        return EXIT_ABORTED
    for path in written.values():
        logger.info("wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
