"""Command-line interface.

Three subcommands: ``run`` simulates a config and exports CSV tables (plus
figures when requested), ``analyze`` sweeps cluster counts over a
multipath table, and ``validate`` runs the statistical sanity battery on a
config.  Exit codes: 0 success, 1 configuration error, 2 I/O error,
3 validation failure, 4 internal error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io as tables
from .analytics import cdf_quantile, combined_indicator, empirical_cdf
from .config import (
    ConfigError,
    load_config_data,
    parse_config,
    validation_preset,
)
from .pipeline import PipelineError, run_simulation
from .plots import render_cluster_map, render_indicator_curve, render_spread_cdfs

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_VALIDATION = 3
EXIT_INTERNAL = 4


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with the config category."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _parse_span(text, name, kind=float):
    parts = str(text).split(":")
    if len(parts) != 2:
        raise ConfigError(f"{name} must look like 'low:high', got '{text}'")
    try:
        low, high = kind(parts[0]), kind(parts[1])
    except ValueError:
        raise ConfigError(f"{name} bounds must be numbers, got '{text}'") from None
    if low > high:
        raise ConfigError(f"{name} bounds are reversed: '{text}'")
    return low, high


def _apply_run_overrides(data, args):
    block = data.get("run") or {}
    if getattr(args, "seed", None) is not None:
        block["seed"] = args.seed
    if getattr(args, "drops", None) is not None:
        block["drops"] = args.drops
    if getattr(args, "parallel", None) is not None:
        block["parallel"] = args.parallel
    if getattr(args, "emit", None) is not None:
        block["outputs"] = [token.strip() for token in args.emit.split(",")
                            if token.strip()]
    data["run"] = block
    return data


def _cmd_run(args) -> int:
    data = _apply_run_overrides(load_config_data(args.config), args)
    config = parse_config(data)
    realizations = run_simulation(config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = tables.export(realizations, config.run.outputs, out_dir,
                            config.config_hash)
    paths = [str(p) for p in written.values()]
    if "figures" in config.run.outputs and realizations:
        paths.append(str(render_cluster_map(realizations,
                                            out_dir / "cluster_map.png")))
        paths.append(str(render_spread_cdfs(tables.stats_rows(realizations),
                                            out_dir / "spread_cdfs.png")))
    print(f"simulated {len(realizations)} link realization(s) over "
          f"{config.run.drops} drop(s)")
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_analyze(args) -> int:
    try:
        rows = tables.read_mpc_table(args.mpc)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    samples = tables.mpc_table_samples(rows)
    if not samples:
        raise ConfigError(f"{args.mpc} contains no multipath rows")
    low, high = _parse_span(args.k_range, "--k-range", kind=int)
    if low < 2:
        raise ConfigError("--k-range lower bound must be at least 2")
    limit = len(samples) - 1
    if low > limit:
        raise ConfigError(
            f"--k-range lower bound {low} exceeds N-1={limit} for this table")
    if high > limit:
        print(f"note: clamping --k-range upper bound to N-1={limit}",
              file=sys.stderr)
        high = limit
    rng = np.random.default_rng(args.seed)
    best, scores = combined_indicator(samples, range(low, high + 1), rng)
    tag = tables.read_config_hash(args.mpc) or tables.file_digest(args.mpc)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [
        tables.write_indices_csv(scores, best, out_dir / "indices.csv", tag),
        tables.write_sample_cdf_csv(samples, out_dir / "cdf.csv", tag),
        render_indicator_curve(scores, best, out_dir / "indicator.png"),
    ]
    print(f"selected_k={best}")
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    if args.config:
        data = load_config_data(args.config)
    else:
        data = validation_preset()
    data = _apply_run_overrides(data, args)
    config = parse_config(data)
    band_low, band_high = _parse_span(args.ds_band, "--ds-band")

    realizations = run_simulation(config)
    checks = []
    if not realizations:
        checks.append(("realizations", False, "simulation produced no links"))
    else:
        rows = tables.stats_rows(realizations)
        spreads = np.array([[r[1], r[2], r[3]] for r in rows])
        checks.append((
            "spreads_finite_positive",
            bool(np.all(np.isfinite(spreads)) and np.all(spreads > 0.0)),
            f"{len(rows)} links, min spread {spreads.min():.3e}",
        ))
        monotone = True
        for col in (0, 1, 2):
            table = empirical_cdf(spreads[:, col])
            monotone &= bool(np.all(np.diff(table[:, 1]) > 0)
                             and np.all(np.diff(table[:, 0]) >= 0))
        checks.append(("cdf_monotone", monotone,
                       "probability strictly increasing, values sorted"))
        p90 = cdf_quantile(spreads[:, 0], 0.9)
        checks.append((
            "delay_spread_p90_band",
            bool(band_low <= p90 <= band_high),
            f"p90 {p90:.3e} s, band [{band_low:.1e}, {band_high:.1e}] s",
        ))
        repeat_drops = min(config.run.drops, 3)
        repeat_cfg = dict(config.normalized)
        repeat_cfg["run"] = dict(repeat_cfg["run"])
        repeat_cfg["run"]["drops"] = repeat_drops
        repeat_rows = tables.stats_rows(run_simulation(parse_config(repeat_cfg)))
        baseline = [r for r in rows
                    if int(r[0].split(":", 1)[0][1:]) < repeat_drops]
        checks.append(("deterministic_repeat", repeat_rows == baseline,
                       f"first {repeat_drops} drop(s) reproduced exactly"))

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    if realizations:
        paths.append(tables.write_stats_csv(realizations,
                                            out_dir / "stats.csv",
                                            config.config_hash))
        paths.append(tables.write_cdf_csv(realizations, out_dir / "cdf.csv",
                                          config.config_hash))
        paths.append(render_spread_cdfs(tables.stats_rows(realizations),
                                        out_dir / "spread_cdfs.png"))
    paths.append(tables.write_validation_csv(checks,
                                             out_dir / "validation.csv",
                                             config.config_hash))
    all_passed = all(passed for _, passed, _ in checks)
    for name, passed, detail in checks:
        print(f"{name}: {'PASS' if passed else 'FAIL'} ({detail})")
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK if all_passed else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="isac-chansim",
        description="Stochastic channel simulator for joint communication "
                    "and sensing links.",
        epilog="exit codes: 0 ok, 1 config error, 2 I/O error, "
               "3 validation failure, 4 internal error",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="simulate a config and export tables")
    run_p.add_argument("--config", required=True, help="YAML config file")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override run.seed")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--emit", default=None,
                       help="comma-separated outputs: clusters,cir,stats,"
                            "cdf,figures (default: config run.outputs)")
    run_p.add_argument("--drops", type=int, default=None,
                       help="override run.drops")
    run_p.add_argument("--parallel", type=int, default=None,
                       help="override run.parallel worker count")
    run_p.set_defaults(func=_cmd_run)

    an_p = sub.add_parser("analyze",
                          help="sweep cluster counts over a multipath table")
    an_p.add_argument("--mpc", required=True,
                      help="CSV in the clusters.csv schema")
    an_p.add_argument("--k-range", default="2:20", dest="k_range",
                      help="inclusive cluster-count range, e.g. 2:20")
    an_p.add_argument("--out", required=True, help="output directory")
    an_p.add_argument("--seed", type=int, default=0,
                      help="seed for clustering restarts")
    an_p.set_defaults(func=_cmd_analyze)

    val_p = sub.add_parser("validate",
                           help="run the statistical sanity battery")
    val_p.add_argument("--config", default=None,
                       help="YAML config file (default: built-in single-link "
                            "urban-micro preset)")
    val_p.add_argument("--out", required=True, help="output directory")
    val_p.add_argument("--drops", type=int, default=100,
                       help="drops to simulate (default 100)")
    val_p.add_argument("--seed", type=int, default=None,
                       help="override run.seed")
    val_p.add_argument("--parallel", type=int, default=None,
                       help="override run.parallel worker count")
    val_p.add_argument("--ds-band", default="10e-9:500e-9", dest="ds_band",
                       help="plausibility band for the delay-spread 90th "
                            "percentile, seconds (default 10e-9:500e-9)")
    val_p.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PipelineError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
