"""Command-line entry point.

Exit codes: 0 success, 1 invalid configuration or usage, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import config as config_mod
from . import forecast, harness
from .config import AGENT_KINDS, ConfigError

log = logging.getLogger("fsorf")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageFailure(f"{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML config file; omitted keys use the defaults")
    p.add_argument("--seed", type=int)
    p.add_argument("--episodes", type=int)
    p.add_argument("--output-dir", type=Path)
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override any config value, e.g. --set dqn.lr=3e-4")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fsorf", description="FSO/RF link switching experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="train one agent and write run_<agent>_<seed>.csv")
    _common(p)
    p.add_argument("--agent", choices=AGENT_KINDS)

    p = sub.add_parser("compare", help="run all four agents and write compare.csv")
    _common(p)
    p.add_argument("--agents", nargs="+", choices=AGENT_KINDS, default=list(AGENT_KINDS))
    p.add_argument("--checkpoints", nargs="*", type=int, default=[],
                   help="episodes at which to report the cumulative switch count")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("forecast", help="RSSI forecasting study; writes mae_by_horizon.csv and ae_cdf.csv")
    _common(p)

    p = sub.add_parser("export-plots", help="turn run/forecast CSVs into long-format plot data")
    p.add_argument("inputs", nargs="+", type=Path, help="run CSV files or directories holding them")
    p.add_argument("--output-dir", type=Path, default=Path("plots"))
    p.add_argument("-v", "--verbose", action="count", default=0)

    p = sub.add_parser("validate-config", help="check a config file and list every invalid field")
    p.add_argument("path", type=Path)
    p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def _parse_value(text: str):
    import yaml
    return yaml.safe_load(text)


def _build_config(args) -> config_mod.ExperimentConfig:
    data = {}
    if args.config is not None:
        data = config_mod.to_dict(config_mod.load(args.config))
    over: dict = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError([f"--set {item}: expected SECTION.KEY=VALUE"])
        node = over
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = _parse_value(value)
    for name in ("seed", "episodes", "agent"):
        v = getattr(args, name, None)
        if v is not None:
            over[name] = v
    if args.output_dir is not None:
        over["output_dir"] = str(args.output_dir)
    return config_mod.from_dict(config_mod.merge(data, over))


def cmd_run(args) -> int:
    cfg = _build_config(args)
    rec = harness.run(cfg, progress=_progress if args.verbose else None)
    print(rec.paths["run"])
    return EXIT_OK


def _progress(row):
    log.info("episode %d reward %.3f loss %s switches %d", row.episode, row.normalized_reward,
             row.mean_loss, row.switch_count_cum)


def cmd_compare(args) -> int:
    base = _build_config(args)
    cfgs = [base.replace(agent=a) for a in args.agents]
    harness.compare(cfgs, checkpoints=tuple(args.checkpoints), workers=args.workers)
    print(Path(base.output_dir) / "compare.csv")
    return EXIT_OK


def cmd_forecast(args) -> int:
    cfg = _build_config(args)
    report = forecast.study(cfg.forecast, cfg.seed)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    print(forecast.write_mae_csv(report, out / "mae_by_horizon.csv"))
    print(forecast.write_cdf_csv(report, out / "ae_cdf.csv"))
    return EXIT_OK


def cmd_validate(args) -> int:
    config_mod.load(args.path)
    print(f"{args.path}: ok")
    return EXIT_OK


def _read_rows(path: Path) -> list[dict]:
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _series_label(path: Path) -> str:
    return path.stem[len("run_"):] if path.stem.startswith("run_") else path.stem


def export_plots(inputs, out_dir) -> list[Path]:
    """Long-format plot tables from run, mae_by_horizon and ae_cdf CSVs."""
    files = []
    missing = []
    for p in map(Path, inputs):
        if p.is_dir():
            files.extend(sorted(p.glob("run_*.csv")))
            files.extend(sorted(p.glob("mae_by_horizon.csv")))
            files.extend(sorted(p.glob("ae_cdf.csv")))
        elif p.is_file():
            files.append(p)
        else:
            missing.append(str(p))
    files = [f for f in files if not f.stem.endswith("_timing")]
    if missing:
        raise FileNotFoundError("missing input: " + ", ".join(missing))
    if not files:
        raise FileNotFoundError("no run or forecast CSVs under: " + ", ".join(map(str, inputs)))

    runs = [f for f in files if f.name.startswith("run_")]
    maes = [f for f in files if f.name.startswith("mae_by_horizon")]
    cdfs = [f for f in files if f.name.startswith("ae_cdf")]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(name, header, rows):
        path = out / name
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        written.append(path)

    if runs:
        tables = [(_series_label(f), _read_rows(f)) for f in runs]
        emit("loss_vs_episode.csv", ("series", "episode", "loss"),
             [(s, r["episode"], r["mean_loss"]) for s, rows in tables for r in rows])
        emit("reward_vs_episode.csv", ("series", "episode", "reward", "oracle_reward"),
             [(s, r["episode"], r["normalized_reward"], r["oracle_reward"]) for s, rows in tables for r in rows])
        emit("switch_cost_vs_episodes.csv", ("series", "episode", "switch_cost"),
             [(s, r["episode"], r["switch_count_cum"]) for s, rows in tables for r in rows])
    if maes:
        emit("mae_vs_horizon.csv", ("series", "visibility_km", "minutes", "mae_dbm"),
             [(f.parent.name, r["visibility_km"], r["minutes"], r["mae_dbm"])
              for f in maes for r in _read_rows(f)])
    if cdfs:
        emit("cdf_vs_ae.csv", ("series", "visibility_km", "ae_dbm", "fraction"),
             [(f.parent.name, r["visibility_km"], r["ae_threshold_dbm"], r["fraction"])
              for f in cdfs for r in _read_rows(f)])
    return written


def cmd_export(args) -> int:
    for p in export_plots(args.inputs, args.output_dir):
        print(p)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "compare": cmd_compare,
    "forecast": cmd_forecast,
    "export-plots": cmd_export,
    "validate-config": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageFailure as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
