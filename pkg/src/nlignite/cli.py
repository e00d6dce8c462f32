"""Command line: ``nlignite <command> [options]``.

Every command resolves a config (defaults <- --preset <- --config file <- --set),
runs one or more pipeline stages in-process and writes artifacts below
``<out>/<run-name>/``. Exit codes: 0 all claims passed, 2 invalid input,
3 numerical failure, 4 a checked claim or invariant failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import NligniteError
from .pipeline import (EXPERIMENT_PRESETS, STAGES, ArtifactWriter, ExperimentConfig, _all_passed, dumps,
                       expand_sweep, load_waves_summary, output_root, parse_value, run_pipeline,
                       run_stages, spectral_report)

log = logging.getLogger("nlignite")


def _parse_set(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise argparse.ArgumentTypeError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = parse_value(v)
    return out


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--preset", choices=sorted(EXPERIMENT_PRESETS), help="named experiment preset")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", default=[],
                   help="dotted override, value parsed as JSON (repeatable), e.g. --set grid.h=0.1")
    p.add_argument("--out", help="output root (default: $NLIGNITE_OUTPUT_ROOT or ./runs)")
    p.add_argument("--name", help="run directory name (default: run-<config hash>)")
    p.add_argument("--jobs", type=int, default=1, help="parallel Cauchy solves")
    p.add_argument("--seed", type=int, help="random seed for the comparison stage")
    p.add_argument("--kernel", help="kernel preset name, inline JSON object or path to a kernel JSON file")
    p.add_argument("--rho", type=float, help="ignition threshold")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--amplitude", type=float, help="reaction amplitude (instead of --fprime-max)")
    g.add_argument("--fprime-max", type=float, help="calibrate the amplitude to this max f' on [0, 1]")
    p.add_argument("--h", type=float, help="grid spacing")
    p.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"), help="wave window")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlignite", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernel-check", help="mass, moments, window and witnesses of the kernel")
    _common(p)
    p = sub.add_parser("wave", help="both fronts by Newton (and front tracking)")
    _common(p)
    p.add_argument("--method", choices=["newton", "tracking", "both"], default=None,
                   help="solver(s) to run (default: both)")
    p = sub.add_parser("spectral", help="characteristic roots and tail diagnostics")
    _common(p)
    p.add_argument("--waves", help="reuse the fronts from a waves.json written by 'wave'")
    p = sub.add_parser("entire", help="build the entire solution and check it")
    _common(p)
    p.add_argument("--theta", type=float, help="phase parameter (default: omega)")
    p.add_argument("--n-list", help="comma-separated start times, e.g. 5,10,20")
    p.add_argument("--t-forward", type=float, help="forward horizon (default: automatic)")
    p.add_argument("--case-expect", choices=["a", "b", "c"], help="fail unless the speeds give this case")
    p = sub.add_parser("pipeline", help="run every stage in order")
    _common(p)
    p.add_argument("--until", choices=STAGES, help="last stage to run")
    p = sub.add_parser("sweep", help="run the pipeline over a cartesian product of overrides")
    _common(p)
    p.add_argument("--vary", action="append", metavar="KEY=V1,V2", default=[], required=True,
                   help="dotted key and comma-separated JSON values (repeatable)")
    p.add_argument("--until", choices=STAGES, help="last stage to run for each point")
    return ap


def _overrides(args) -> dict:
    o = _parse_set(args.set)
    if args.seed is not None:
        o["seed"] = args.seed
    if args.kernel:
        path = Path(args.kernel)
        if args.kernel.lstrip().startswith("{"):
            o["kernel"] = json.loads(args.kernel)
        elif path.suffix == ".json":
            o["kernel"] = json.loads(path.read_text())
        else:
            o["kernel"] = {"preset": args.kernel}
    if args.rho is not None:
        o["reaction.rho"] = args.rho
    if args.amplitude is not None:
        o["reaction.amplitude"] = args.amplitude
        o["reaction.fprime_max"] = None
    if args.fprime_max is not None:
        o["reaction.fprime_max"] = args.fprime_max
        o["reaction.amplitude"] = None
    if args.h is not None:
        o["grid.h"] = args.h
    if args.window is not None:
        o["grid.window"] = list(args.window)
    if args.command == "wave" and args.method:
        o["waves.method"] = args.method
    if args.command == "entire":
        if args.theta is not None:
            o["entire.theta"] = args.theta
        if args.n_list:
            o["entire.n_list"] = [int(v) for v in args.n_list.split(",")]
        if args.t_forward is not None:
            o["entire.t_forward"] = args.t_forward
        if args.case_expect:
            o["entire.case_expect"] = args.case_expect
    return o


def _run_dir(args, cfg: ExperimentConfig) -> Path:
    return output_root(args.out) / (args.name or cfg.run_name())


def _report(result, command: str) -> None:
    m = result.manifest
    out = {"out": str(result.out_dir), "exit_code": m["exit_code"], "stages": m["stages"]}
    if command == "wave" and m["stages"].get("waves", {}).get("status") == "ok":
        diag = json.loads((result.out_dir / "waves" / "diagnostics.json").read_text())
        out["summary"] = diag["summary"]
    print(json.dumps(out, sort_keys=True, indent=2))


def _spectral_from_file(args, cfg: ExperimentConfig) -> int:
    spec, nl = cfg.kernel(), cfg.reaction()
    w, wh = load_waves_summary(args.waves, spec)
    out_dir = _run_dir(args, cfg)
    writer = ArtifactWriter(out_dir)
    writer.json("config.json", cfg.data)
    diag, roots = spectral_report(spec, nl, w, wh, cfg["spectral"])
    ok = _all_passed(diag)
    writer.json("spectral/roots.json", roots)
    writer.json("spectral/diagnostics.json", {"stage": "spectral", "passed": ok, "waves": str(args.waves),
                                              **diag})
    code = 0 if ok else 4
    manifest = {"tool": "nlignite", "config_hash": cfg.hash(), "seed": cfg.seed, "exit_code": code,
                "stages": {"spectral": {"status": "ok", "passed": ok}},
                "artifacts": dict(sorted(writer.files.items()))}
    (out_dir / "manifest.json").write_text(dumps(manifest))
    print(json.dumps({"out": str(out_dir), "exit_code": code}, indent=2))
    return code


def _sweep(args) -> int:
    axes = {}
    for item in args.vary:
        if "=" not in item:
            raise argparse.ArgumentTypeError(f"--vary expects key=v1,v2, got {item!r}")
        k, vs = item.split("=", 1)
        axes[k] = [parse_value(v) for v in vs.split(",")]
    base = _overrides(args)
    file_cfg = json.loads(Path(args.config).read_text()) if args.config else None
    root = output_root(args.out) / (args.name or "sweep")
    rows, worst = [], 0
    for point in expand_sweep(base, axes):
        cfg = ExperimentConfig.resolve(file_cfg, args.preset, point)
        res = run_pipeline(cfg, root / cfg.run_name(), args.jobs, args.until)
        rows.append({"overrides": {k: point[k] for k in axes}, "run": cfg.run_name(),
                     "exit_code": res.exit_code})
        worst = max(worst, res.exit_code)
    (root / "sweep.json").write_text(dumps({"axes": axes, "points": rows}))
    print(json.dumps({"out": str(root), "points": rows}, sort_keys=True, indent=2))
    return worst


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "sweep":
            return _sweep(args)
        cfg = ExperimentConfig.from_file(args.config, args.preset, _overrides(args))
        if args.command == "spectral" and args.waves:
            return _spectral_from_file(args, cfg)
        stages = {"kernel-check": ("kernel",), "wave": ("waves",), "spectral": ("spectral",),
                  "entire": ("entire",)}.get(args.command)
        if stages is None:
            result = run_pipeline(cfg, _run_dir(args, cfg), args.jobs, args.until)
        else:
            result = run_stages(cfg, stages, _run_dir(args, cfg), args.jobs)
        _report(result, args.command)
        return result.exit_code
    except NligniteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (argparse.ArgumentTypeError, json.JSONDecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
