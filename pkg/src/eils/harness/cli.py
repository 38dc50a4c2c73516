"""Command-line entry point: ``eils run | compare | figures | check``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from eils.envs import ENV_NAMES
from eils.harness.config import AGENTS, ConfigError, load_config
from eils.harness.figures import heatmap_figure, shift_zoom_figure, recovery_figure
from eils.harness.metrics import MetricsSummary, summarize
from eils.harness.records import read_csv
from eils.harness.runner import NumericFailure, echo_path, read_visits, records_path, run_experiment, visits_path
from eils.harness.selfcheck import run_checks

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_SELFTEST = 0, 1, 2, 3

log = logging.getLogger("eils")

SUMMARY_COLUMNS = (
    "env", "agent", "seeds", "episodes", "success_mean", "success_std",
    "recovered", "recovery_median", "coverage_mean", "coverage_std", "reversal_median", "status",
)


def _seeds(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}")


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors; argparse's default status 2 is reserved."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eils", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train one arm on one environment")
    run.add_argument("--env", choices=ENV_NAMES)
    run.add_argument("--agent", help=f"one of {', '.join(AGENTS)} (aliases: ppo-baseline, eils-full)")
    run.add_argument("--episodes", type=int)
    run.add_argument("--seeds", type=_seeds)
    run.add_argument("--config", type=Path)
    run.add_argument("--out", type=Path)
    run.add_argument("--workers", type=int)

    for name, text in (("compare", "tabulate every arm found in DIR"), ("figures", "write SVG figures for DIR")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--out", type=Path, required=True)

    sub.add_parser("check", help="gradient and oracle self-tests")
    return parser


def _fmt(x: float | None, digits: int = 1) -> str:
    return "-" if x is None else f"{x:.{digits}f}"


def summary_row(s: MetricsSummary) -> dict[str, str]:
    cov = s.coverage
    return {
        "env": s.env,
        "agent": s.agent,
        "seeds": " ".join(str(x) for x in s.seeds),
        "episodes": str(s.episodes),
        "success_mean": _fmt(s.success.mean, 2),
        "success_std": _fmt(s.success.std, 2),
        "recovered": f"{s.recovered}/{len(s.recovery)}" if s.recovery else "-",
        "recovery_median": ("not-recovered" if s.recovery_median is None else _fmt(s.recovery_median)) if s.recovery else "-",
        "coverage_mean": _fmt(cov.mean if cov else None, 2),
        "coverage_std": _fmt(cov.std if cov else None, 2),
        "reversal_median": ("not-reattained" if s.reversal_median is None else _fmt(s.reversal_median)) if s.reversal else "-",
        "status": "complete" if s.complete else "incomplete",
    }


def collect_summaries(out: Path) -> list[MetricsSummary]:
    summaries = []
    for env in ENV_NAMES:
        for agent in AGENTS:
            path = records_path(out, env, agent)
            if not path.is_file():
                continue
            echo = echo_path(out, env, agent)
            cfg = load_config(echo if echo.is_file() else None, env=env, agent=agent)
            records = read_csv(path)
            complete = len(records) == len(cfg.seeds) * cfg.episodes
            s = summarize(records, env, agent, cfg.change_episode(), cfg.episodes)
            s.complete = s.complete and complete
            summaries.append(s)
    return summaries


def format_table(rows: list[dict[str, str]]) -> str:
    cols = ("env", "agent", "success_mean", "success_std", "recovered", "recovery_median",
            "coverage_mean", "reversal_median", "status")
    head = ("environment", "arm", "success %", "±", "recovered", "recovery", "coverage %", "reversal", "")
    table = [head] + [tuple(r[c] for c in cols) for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(cols))]
    return "\n".join("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in table)


def cmd_run(args) -> int:
    cfg = load_config(
        args.config, env=args.env, agent=args.agent, episodes=args.episodes,
        seeds=args.seeds, out_dir=str(args.out) if args.out else None, workers=args.workers,
    )
    result = run_experiment(cfg)
    print(f"wrote {result.csv_path}")
    print(format_table([summary_row(result.summary)]))
    return EXIT_OK


def cmd_compare(args) -> int:
    summaries = collect_summaries(args.out)
    if not summaries:
        print(f"no records_*.csv found in {args.out}", file=sys.stderr)
        return EXIT_CONFIG
    rows = [summary_row(s) for s in summaries]
    print(format_table(rows))
    with open(args.out / "summary.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return EXIT_OK


def make_figures(out: Path) -> list[Path]:
    written = []
    cartpole = {a: read_csv(p) for a in AGENTS if (p := records_path(out, "dynamic-cartpole", a)).is_file()}
    shift = load_config(_first_echo(out, "dynamic-cartpole")).cartpole.shift_episode
    written.append(recovery_figure(cartpole, shift, out / "recovery_dynamic-cartpole.svg"))
    written.append(shift_zoom_figure(cartpole.get("eils", []), shift, out / "shift_zoom.svg"))
    visits = {a: read_visits(p) for a in AGENTS if (p := visits_path(out, "sparse-maze", a)).is_file()}
    written.append(heatmap_figure(visits, out / "heatmap_sparse-maze.svg"))
    return [p for p in written if p is not None]


def _first_echo(out: Path, env: str) -> Path | None:
    for agent in AGENTS:
        if (p := echo_path(out, env, agent)).is_file():
            return p
    return None


def cmd_figures(args) -> int:
    if not args.out.is_dir():
        print(f"output directory not found: {args.out}", file=sys.stderr)
        return EXIT_CONFIG
    for path in make_figures(args.out):
        print(f"wrote {path}")
    return EXIT_OK


def cmd_check(_args) -> int:
    return EXIT_OK if run_checks() else EXIT_SELFTEST


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "figures": cmd_figures, "check": cmd_check}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
