"""Command-line front end: dtt, sim, bench, report, calibrate.

Exit status: 0 on success, 1 on validation failures, 2 on unreadable or
inconsistent inputs. ``--config``/``--artifact``/``--scenario``/``--overrides``
accept either a path or the name of a shipped fixture (``dual_vm.cfg``).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__, fixture_path
from .bench import run_bench
from .core import ConfigError, ContractError
from .dtt import (
    ArtifactError,
    ControlTableError,
    build_artifacts,
    export_artifacts,
    import_artifacts,
    masking_map_from_lines,
    parse_artifact_lines,
    validate_masking_map,
)
from .formats import load_config, load_scenario, with_params
from .report import OVERHEAD_COLUMNS, to_csv, render_instrumentation, summarize, write_run
from .sim import calibrate_alpha, run

EXIT_OK, EXIT_INVALID, EXIT_ERROR = 0, 1, 2


def resolve(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    shipped = fixture_path(name)
    if shipped.exists():
        return shipped
    raise FileNotFoundError(f"no such file or shipped fixture: {name}")


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def _periods(text: str) -> list[float]:
    try:
        values = [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad period list {text!r}") from None
    if not values or any(p <= 0 for p in values):
        raise argparse.ArgumentTypeError("periods must be positive")
    return values


def _load_config(args):
    config = load_config(resolve(args.config))
    changes = {k: getattr(args, k, None) for k in ("alpha", "beta")}
    if getattr(args, "stepwise", None) is not None:
        changes["stepwise_transitions"] = args.stepwise
    return with_params(config, **changes)


def cmd_dtt(args) -> int:
    config = _load_config(args)
    masking, ctl, refs = None, None, None
    if args.overrides:
        raw = parse_artifact_lines(resolve(args.overrides).read_text(encoding="utf-8"), args.overrides)
        if raw.modes:
            masking = masking_map_from_lines(raw.modes, config)
        ctl, refs = raw.ctl or None, raw.refs or None
    try:
        artifacts = build_artifacts(config, masking, ctl, refs)
    except ControlTableError as exc:
        print(f"control table: {exc}")
        if exc.witness:
            print(f"  witness registers: {exc.witness[0]:#x} {exc.witness[1]:#x}")
        return EXIT_INVALID
    print("degradation effects (highest first):")
    for e in artifacts.effects:
        print(f"  {e.irq} pin {e.irq.pin}: {e.effect:.6g}")
    print("masking map:")
    for m, masked in enumerate(artifacts.masking_map):
        print(f"  mode {m}: " + (" ".join(str(i) for i in sorted(masked)) or "none"))
    problems = validate_masking_map(artifacts.masking_map, config)
    if problems:
        print(f"validation: {len(problems)} violation(s)")
        for p in problems:
            print(f"  {p}")
        return EXIT_INVALID
    print("validation: ok")
    if args.out:
        export_artifacts(artifacts, args.out, config)
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_sim(args) -> int:
    config = _load_config(args)
    artifacts = import_artifacts(resolve(args.artifact), config) if args.artifact else None
    scenario = load_scenario(resolve(args.scenario)) if args.scenario else None
    report = run(config, scenario, args.duration_us, args.seed, artifacts,
                 rtm_enabled=args.rtm, baseline=args.baseline)
    for path in write_run(report, args.out):
        print(f"wrote {path}")
    return EXIT_OK


def cmd_bench(args) -> int:
    config = _load_config(args)
    artifacts = import_artifacts(resolve(args.artifact), config) if args.artifact else None
    if args.iterations < 1000:
        print("bench: --iterations must be at least 1000", file=sys.stderr)
        return EXIT_ERROR
    result = run_bench(config, artifacts, args.iterations)
    points = render_instrumentation(result.points)
    rows = [tuple(repr(float(x)) for x in row)
            for row in result.overhead_rows(args.periods, args.worst_case_us)]
    overhead = to_csv(OVERHEAD_COLUMNS, rows)
    print(f"{result.iterations} ticks, mean {result.tick_mean_us:.3f} us, max {result.tick_max_us:.3f} us")
    sys.stdout.write(points)
    sys.stdout.write(overhead)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "bench.csv").write_text(points, encoding="utf-8", newline="")
        (out / "overhead.csv").write_text(overhead, encoding="utf-8", newline="")
        print(f"wrote {out / 'bench.csv'} and {out / 'overhead.csv'}")
    return EXIT_OK


def cmd_report(args) -> int:
    sys.stdout.write(summarize(args.out))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    config = _load_config(args)
    scenario = load_scenario(resolve(args.scenario)) if args.scenario else None
    alpha = calibrate_alpha(config, scenario, args.target, args.vm, args.duration_us,
                            args.seed, args.start_us, args.tol)
    print(f"alpha {alpha:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irqcolor", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def model_flags(p, stepwise=True):
        p.add_argument("--config", required=True, help="system config file or fixture name")
        p.add_argument("--alpha", type=float, help="override the contention scale")
        p.add_argument("--beta", type=float, help="override the bus-rate weight")
        if stepwise:
            p.add_argument("--stepwise", type=_on_off, metavar="{on,off}",
                           help="override stepwise mode transitions")

    p = sub.add_parser("dtt", help="generate, validate and export artifacts")
    model_flags(p, stepwise=False)
    p.add_argument("--overrides", help="user masking map / ctl / ref lines (artifact grammar)")
    p.add_argument("--out", help="artifact file to write")
    p.set_defaults(func=cmd_dtt)

    p = sub.add_parser("sim", help="run a scenario and write CSV reports")
    model_flags(p)
    p.add_argument("--artifact", help="artifact file (default: generated from the config)")
    p.add_argument("--scenario", help="scenario file (default: periodic triggers only)")
    p.add_argument("--duration-us", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rtm", type=_on_off, default=True, metavar="{on,off}")
    p.add_argument("--baseline", type=_on_off, default=True, metavar="{on,off}",
                   help="also run the interference-free baseline for relative throughput")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("bench", help="time the measuring points and print the overhead curve")
    model_flags(p)
    p.add_argument("--artifact")
    p.add_argument("--iterations", type=int, default=10_000)
    p.add_argument("--periods", type=_periods, default=[10.0, 100.0, 1000.0],
                   help="actuation periods in us, comma separated")
    p.add_argument("--worst-case-us", type=float, default=0.782,
                   help="constant worst-case cost for the model column")
    p.add_argument("--out", help="directory for bench.csv and overhead.csv")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="summarize a sim output directory")
    p.add_argument("--out", required=True, help="directory written by sim")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("calibrate", help="bisect alpha for a target unmitigated slowdown")
    model_flags(p, stepwise=False)
    p.add_argument("--scenario")
    p.add_argument("--target", type=float, default=2.13)
    p.add_argument("--vm", type=int, help="VM to calibrate (default: the ASIL-D VM)")
    p.add_argument("--duration-us", type=int, default=10_000_000)
    p.add_argument("--start-us", type=int, default=0, help="measure slowdown after this time")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-3)
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ArtifactError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID if isinstance(exc, ArtifactError) and args.command == "dtt" else EXIT_ERROR
    except (ContractError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

