"""Command-line driver: ``leadppc simulate|certify|presets``.

Exit codes: 0 when every run is approved and stays inside its funnels, 2 when
a run finished but was not approved or recorded violations, 1 on error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import scenario as scn
from .certify import certify
from .sim import Mode


def _parse_preset(spec: str) -> scn.Scenario:
    name, _, variant = spec.partition(":")
    return scn.preset(name, variant or None)


def _load(args) -> list[scn.Scenario]:
    scenarios = [_parse_preset(p) for p in args.preset or []]
    for path in args.scenario or []:
        scenarios.append(scn.load_scenario(Path(path).read_text()))
    if not scenarios:
        raise SystemExit("no scenario given (pass a file or --preset NAME)")
    overrides = {}
    if getattr(args, "dt", None) is not None:
        overrides["dt"] = args.dt
    if getattr(args, "t_end", None) is not None:
        overrides["t_end"] = args.t_end
    if getattr(args, "mode", None) is not None:
        overrides["mode"] = Mode(args.mode)
    if overrides:
        scenarios = [sc.with_(**overrides) for sc in scenarios]
    return scenarios


def _simulate_one(sc: scn.Scenario, out: str | None, fmt: str) -> tuple[str, int]:
    trace, summary = scn.run(sc)
    if out:
        scn.emit(trace, summary, fmt, Path(out) / sc.name)
    return summary.to_json(), scn.exit_code(summary)


def cmd_simulate(args) -> int:
    scenarios = _load(args)
    jobs = [(sc, args.out, args.format) for sc in scenarios]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_simulate_one, *zip(*jobs)))
    else:
        results = [_simulate_one(*j) for j in jobs]
    for text, _ in results:
        print(text)
    return max(code for _, code in results)


def cmd_certify(args) -> int:
    code = 0
    for sc in _load(args):
        r = certify(sc.topology, sc.perf.l)
        print(json.dumps({
            "name": sc.name,
            "approved": r.approved,
            "method": r.method.value,
            "gamma_status": r.status.value,
            "gamma_bar": r.gamma_bar,
            "l_max": r.l_max,
            "special_bound": r.special_bound,
            "note": r.note,
        }))
        code = max(code, 0 if r.approved else 2)
    return code


def cmd_presets(args) -> int:
    for name in scn.preset_names():
        variants = ", ".join(scn.GAIN_VARIANTS.get(name, {}))
        print(f"{name}\tvariants: {variants}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="leadppc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_args(p):
        p.add_argument("scenario", nargs="*", help="scenario JSON document(s)")
        p.add_argument("--preset", action="append", metavar="NAME[:VARIANT]")
        p.add_argument("--mode", choices=[m.value for m in Mode])

    sim = sub.add_parser("simulate", help="certify and simulate scenarios")
    scenario_args(sim)
    sim.add_argument("--dt", type=float)
    sim.add_argument("--t-end", type=float)
    sim.add_argument("--out", metavar="DIR")
    sim.add_argument("--format", choices=["csv", "json"], default="csv")
    sim.add_argument("--jobs", type=int, default=1)
    sim.set_defaults(func=cmd_simulate)

    cert = sub.add_parser("certify", help="decay-rate feasibility only")
    scenario_args(cert)
    cert.set_defaults(func=cmd_certify)

    pre = sub.add_parser("presets", help="list built-in scenarios")
    pre.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
