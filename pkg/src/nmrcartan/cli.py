"""Command-line front end: ``nmrcartan {synth,compile,simulate,verify}``.

Options are resolved as command-line flag, then ``--config`` file, then
built-in default.  The config file is flat ``key = value`` text; keys are
the long flag names with or without the leading dashes (``starts = 128``,
``phase-mode = exact``); ``#`` starts a comment.

Exit codes: 0 success, 1 scientific failure (no converged start, failed
verification), 2 usage error (bad flags, unreadable or malformed input).
"""
from __future__ import annotations

import argparse
import logging
import os
import re
import sys
from dataclasses import asdict
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, cartan, compiler, nmrsim, qmat, serialize, targets

log = logging.getLogger("nmrcartan")

PENALTY_CHECK = "penalty"
KAK_CHECK = "kak"
SIM_CHECK = "simulation"


class UsageError(Exception):
    """Bad invocation or unreadable input; maps to exit code 2."""


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _widths(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in re.split(r"[,\s]+", str(text).strip()) if x]


# key -> (converter, default)
OPTIONS = {
    "starts": (int, 512),
    "seed": (int, 0),
    "tol": (float, 1e-8),
    "phase_mode": (str, "phase_invariant"),
    "time_weight": (float, 0.0),
    "nonneg_times": (_bool, False),
    "max_iter": (int, 20000),
    "workers": (int, 0),
    "out": (str, None),
    "merge": (_bool, False),
    "frame_tracking": (_bool, True),
    "pi2_us": (_widths, [0.0, 25.0, 50.0, 100.0, 250.0]),
    "j_hz": (float, 215.5),
    "gamma_ratio": (float, 3.98),
}


def load_config(path) -> dict:
    """Read a flat ``key = value`` file into converted option values."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    out = {}
    for n, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{n}: expected key = value")
        key = key.strip().lstrip("-").replace("-", "_")
        if key not in OPTIONS:
            raise UsageError(f"{path}:{n}: unknown key {key!r}")
        try:
            out[key] = OPTIONS[key][0](value.strip())
        except ValueError as exc:
            raise UsageError(f"{path}:{n}: {exc}") from None
    return out


def resolve_options(args: argparse.Namespace) -> dict:
    """Merge flags over config-file values over defaults."""
    config = load_config(args.config) if getattr(args, "config", None) else {}
    opts = {}
    for key, (conv, default) in OPTIONS.items():
        flag = getattr(args, key, None)
        if flag is not None:
            opts[key] = conv(flag)
        elif key in config:
            opts[key] = config[key]
        else:
            opts[key] = default
    if opts["workers"] <= 0:
        opts["workers"] = os.cpu_count() or 1
    return opts


def _search_config(opts) -> cartan.SearchConfig:
    try:
        return cartan.SearchConfig(
            num_starts=opts["starts"], seed=opts["seed"], penalty_tolerance=opts["tol"],
            max_iterations=opts["max_iter"], phase_mode=opts["phase_mode"],
            time_weight=opts["time_weight"], nonneg_times=opts["nonneg_times"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _machine_config(opts, width_us: float = 0.0) -> nmrsim.MachineConfig:
    try:
        return nmrsim.MachineConfig(J=opts["j_hz"], pi2_duration=width_us * 1e-6,
                                    gamma_ratio=opts["gamma_ratio"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _safe(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", label).strip("_") or "target"


def _kak_json(kak: cartan.KakResult) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(kak).items()}


def _fmt_time(t) -> str:
    if isinstance(t, Fraction):
        return f"{t.numerator}/J" if t.denominator == 1 else f"{t.numerator}/{t.denominator}J"
    return f"{float(t):.6g}/J"


# ---------------------------------------------------------------- synth

def cmd_synth(args, opts) -> int:
    text = args.target_flag or args.target
    if not text:
        raise UsageError("synth needs a target (u00..u11[xcp|xcp2] or @file.json)")
    try:
        spec = targets.parse_target(text)
        target = targets.resolve(spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    config = _search_config(opts)
    run = cartan.synthesize(target, config, workers=opts["workers"])
    spectrum = run.spectrum()
    results = run.results
    man = serialize.manifest("synth", {"search": asdict(config), "target": spec.label}, config.seed)
    payload = {
        "manifest": man,
        "target": {"label": spec.label, "matrix": qmat.matrix_to_json(target)},
        "kak": _kak_json(run.kak),
        "summary": {
            "starts": config.num_starts,
            "converged": len(results),
            "min_time": run.min_time,
            "best_penalty": run.best_penalty,
            "spectrum": [asdict(b) for b in spectrum.bins],
            "outliers": spectrum.outliers,
        },
        "results": [r.to_json() for r in results],
    }
    if not results:
        best = min(run.starts, key=lambda r: (r.penalty, r.start_seed))
        payload["best_effort"] = best.to_json()

    print(f"target {spec.label}: Weyl bound T >= {run.kak.lower_bound:.6f}/J")
    print(f"converged {len(results)}/{config.num_starts}, best penalty {run.best_penalty:.3e}")
    if results:
        print(f"minimal T = {run.min_time:.6f}/J (penalty {run.best.penalty:.3e}, seed {run.best.start_seed})")
        print("winding  T(1/J)     count")
        for b in spectrum.bins:
            print(f"{b.winding_index:7d}  {b.center:9.6f}  {b.count:5d}")
        if spectrum.outliers:
            print(f"{len(spectrum.outliers)} execution times off the lattice")

    out = Path(opts["out"] or ".")
    name = _safe(spec.label)
    path = serialize.write_json(out / f"synth_{name}.json", payload)
    rows = [(b.winding_index, repr(b.center), b.count) for b in spectrum.bins]
    serialize.write_text(out / f"spectrum_{name}.csv",
                         serialize.csv_text(["winding_index", "time", "count"], rows, {"manifest": man}))
    rows = [(r.start_seed, int(r.converged), repr(r.penalty), repr(r.execution_time), r.winding_index,
             r.iterations) for r in run.starts]
    serialize.write_text(out / f"starts_{name}.csv",
                         serialize.csv_text(["seed", "converged", "penalty", "execution_time",
                                             "winding_index", "iterations"], rows, {"manifest": man}))
    print(f"wrote {path}")
    if not results:
        print("no start converged below the penalty tolerance", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------- compile

def _load_results(data: dict):
    """Control parameters from a synth output, a single result, or bare parameters."""
    try:
        if "results" in data:
            return [cartan.SynthesisResult.from_json(r) for r in data["results"]]
        if "params" in data:
            params = cartan.ControlParams.from_json(data["params"])
        else:
            params = cartan.ControlParams.from_json(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"malformed result file: {exc}") from None
    return [cartan.SynthesisResult(params, 0.0, params.execution_time, 0, 0, 0)]


def cmd_compile(args, opts) -> int:
    if bool(args.preset) == bool(args.source):
        raise UsageError("compile needs exactly one of a result file or --preset")
    chosen = None
    if args.preset:
        try:
            program = compiler.preset(args.preset)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        source = args.preset
    else:
        try:
            data = serialize.read_json(args.source)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        results = _load_results(data)
        source = str(args.source)
        label = Path(source).stem
        if not results:
            print("result file holds no converged decomposition", file=sys.stderr)
            return 1
        if args.index is not None:
            if not 0 <= args.index < len(results):
                raise UsageError(f"--index out of range (0..{len(results) - 1})")
            chosen = results[args.index]
            program = compiler.compile(chosen.params, merge=opts["merge"],
                                       frame_tracking=opts["frame_tracking"], label=label)
        else:
            program, chosen = compiler.compile_best(results, merge=opts["merge"],
                                                    frame_tracking=opts["frame_tracking"], label=label)
    text = compiler.render(program)
    print(text)
    print(f"pulses {program.pulse_count}, coupling time {_fmt_time(program.coupling_time)}")
    if opts["out"]:
        man = serialize.manifest("compile", {"source": source, "merge": opts["merge"],
                                             "frame_tracking": opts["frame_tracking"]})
        payload = {"manifest": man, "program": program.to_json(), "text": text}
        if chosen is not None:
            payload["result"] = chosen.to_json()
        name = _safe(Path(source).stem if not args.preset else args.preset)
        out = Path(opts["out"])
        serialize.write_json(out / f"program_{name}.json", payload)
        serialize.write_text(out / f"program_{name}.txt",
                             serialize.comment_block({"manifest": man}) + text + "\n")
    return 0


# ---------------------------------------------------------------- simulate

def load_program(spec: str) -> compiler.PulseProgram:
    """A preset name (``optimal:u10``), a program JSON, or a program text file."""
    path = Path(spec)
    if not path.exists() and ":" in spec:
        return compiler.preset(spec)
    if path.suffix == ".json":
        data = serialize.read_json(path)
        try:
            return compiler.PulseProgram.from_json(data.get("program", data))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{spec}: malformed program JSON: {exc}") from None
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValueError(f"cannot read program {spec}: {exc}") from None
    return compiler.parse(text, label=path.stem)


def _programs(specs):
    try:
        return [load_program(s) for s in specs]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _state_bits(text: str) -> tuple[int, int]:
    if not re.fullmatch(r"[01]{2}", text or ""):
        raise UsageError(f"--state must be two bits such as 10, got {text!r}")
    return int(text[0]), int(text[1])


def cmd_simulate(args, opts) -> int:
    target = _state_bits(args.state)
    widths = opts["pi2_us"]
    if any(w < 0 for w in widths):
        raise UsageError("pulse widths must be non-negative")
    base = _machine_config(opts)
    man_config = {"machine": {"J": base.J, "gamma_ratio": base.gamma_ratio}, "pi2_us": widths,
                  "state": args.state}

    if args.readout:
        programs = _programs(args.programs) if args.programs else nmrsim.preset_triples()[0]
        if len(programs) not in (1, 3):
            raise UsageError("--readout takes one program or a triple")
        group = programs[0] if len(programs) == 1 else programs
        rows = []
        print("pi2(us)  carbon|0>  carbon|1>  hydrogen|0>  hydrogen|1>  dominant")
        for w in widths:
            rep = nmrsim.readout(nmrsim.temporal_average(group, _machine_config(opts, w)))
            rows.append({"pi2_duration": w * 1e-6, "peaks": rep.to_json()})
            print(f"{w:7.2f}  {rep.carbon[0]:9.5f}  {rep.carbon[1]:9.5f}  {rep.hydrogen[0]:11.5f}"
                  f"  {rep.hydrogen[1]:11.5f}  |{rep.dominant}>")
        man_config["programs"] = [compiler.render(p) for p in programs]
        if opts["out"]:
            man = serialize.manifest("simulate", man_config)
            out = Path(opts["out"])
            serialize.write_json(out / "readout.json", {"manifest": man, "rows": rows})
            table = [[repr(r["pi2_duration"] * 1e6), *map(repr, r["peaks"]["carbon"]),
                      *map(repr, r["peaks"]["hydrogen"]), r["peaks"]["dominant"]] for r in rows]
            serialize.write_text(out / "readout.csv", serialize.csv_text(
                ["pi2_us", "carbon_0", "carbon_1", "hydrogen_0", "hydrogen_1", "dominant"], table,
                {"manifest": man}))
        return 0

    if args.programs:
        if len(args.programs) != 6:
            raise UsageError("give six programs (optimal triple then conventional triple) or use "
                             "--optimal/--conventional")
        optimal, conventional = _programs(args.programs[:3]), _programs(args.programs[3:])
    else:
        default_opt, default_conv = nmrsim.preset_triples(literal=args.literal)
        optimal = _programs(args.optimal) if args.optimal else default_opt
        conventional = _programs(args.conventional) if args.conventional else default_conv
    report = nmrsim.compare_sequences(optimal, conventional, [w * 1e-6 for w in widths], base,
                                      target=target, workers=min(opts["workers"], len(widths)))
    print("pi2(us)  fidelity opt/conv     purity opt/conv       unwanted opt/conv")
    for w, o, c in zip(widths, report.optimal, report.conventional):
        print(f"{w:7.2f}  {o.fidelity:.6f} {c.fidelity:.6f}  {o.purity:.6f} {c.purity:.6f}"
              f"  {o.unwanted:.6f} {c.unwanted:.6f}")
    if opts["out"]:
        man_config["optimal"] = [compiler.render(p) for p in optimal]
        man_config["conventional"] = [compiler.render(p) for p in conventional]
        man = serialize.manifest("simulate", man_config)
        out = Path(opts["out"])
        serialize.write_json(out / "comparison.json", {"manifest": man, "report": report.to_json()})
        serialize.write_text(out / "comparison.csv",
                             serialize.comment_block({"manifest": man}) + report.to_csv())
    return 0


# ---------------------------------------------------------------- verify

def _target_from(data) -> np.ndarray:
    t = data.get("target")
    if t is None:
        raise UsageError("result file names no target")
    try:
        if isinstance(t, str):
            return targets.resolve(targets.parse_target(t))
        if isinstance(t, dict):
            return qmat.matrix_from_json(t["matrix"])
        return qmat.matrix_from_json(t)
    except (KeyError, ValueError) as exc:
        raise UsageError(f"bad target in result file: {exc}") from None


def verify_params(params: cartan.ControlParams, target: np.ndarray, tol: float = 1e-8,
                  phase_mode: str = "phase_invariant") -> list[tuple[str, bool, str]]:
    """``(check, passed, detail)`` for the penalty, KAK and simulation checks."""
    checks = []
    u = cartan.reconstruct(params)
    pen = cartan.distance(u, target, phase_mode)
    checks.append((PENALTY_CHECK, pen < tol, f"penalty {pen:.3e} (tolerance {tol:.1e})"))
    kak = cartan.analytic_kak(target)
    dinv = float(np.max(np.abs(cartan.local_invariants(u) - np.array(kak.invariants))))
    t = params.execution_time
    ok = dinv < 1e-6 and t >= kak.lower_bound - 1e-6
    checks.append((KAK_CHECK, ok, f"invariant mismatch {dinv:.2e}, T {t:.6f} vs bound {kak.lower_bound:.6f}"))
    program = compiler.compile(params, merge=True)
    fid = qmat.fidelity(program.unitary(), target)
    checks.append((SIM_CHECK, 1.0 - fid < 1e-9,
                   f"ideal fidelity deficit {1.0 - fid:.2e}, {program.pulse_count} pulses"))
    return checks


def cmd_verify(args, opts) -> int:
    if bool(args.reference) == bool(args.result):
        raise UsageError("verify needs exactly one of a result file or --reference")
    if args.reference:
        if args.reference not in cartan.REFERENCE_SOLUTIONS:
            raise UsageError(f"unknown reference {args.reference!r}; "
                             f"choose from {sorted(cartan.REFERENCE_SOLUTIONS)}")
        target = targets.resolve(targets.parse_target(args.reference))
        results = [cartan.SynthesisResult(cartan.REFERENCE_SOLUTIONS[args.reference], 0.0, 0.0, 0, 0, 0)]
    else:
        try:
            data = serialize.read_json(args.result)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        target = _target_from(data)
        results = _load_results(data)
        if not results:
            print("FAIL converged: result file holds no converged decomposition")
            return 1
    if not args.all:
        results = results[:1]
    failed = []
    records = []
    for r in results:
        for name, ok, detail in verify_params(r.params, target, opts["tol"], opts["phase_mode"]):
            print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
            records.append({"seed": r.start_seed, "check": name, "passed": ok, "detail": detail})
            if not ok:
                failed.append(name)
    if opts["out"]:
        man = serialize.manifest("verify", {"source": args.result or args.reference, "tol": opts["tol"],
                                            "phase_mode": opts["phase_mode"]})
        serialize.write_json(Path(opts["out"]) / "verify.json", {"manifest": man, "checks": records})
    if failed:
        print(f"verification failed: {', '.join(sorted(set(failed)))}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nmrcartan", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="flat key = value option file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int, help="parallel processes (default: all cores)")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress")

    def search(p):
        p.add_argument("--tol", type=float, help="penalty tolerance for convergence (default 1e-8)")
        p.add_argument("--phase-mode", choices=cartan.PHASE_MODES, help="penalty distance")

    p = sub.add_parser("synth", help="multi-start Cartan decomposition of a target")
    p.add_argument("target", nargs="?", help="u00..u11 with optional xcp/xcp2 suffix, or @file.json")
    p.add_argument("--target", dest="target_flag", help="same as the positional target")
    p.add_argument("--starts", type=int, help="number of starts (default 512)")
    p.add_argument("--seed", type=int, help="base seed (default 0)")
    p.add_argument("--max-iter", type=int, help="iteration cap per start (default 20000)")
    p.add_argument("--time-weight", type=float, help="weight of sum|t| added to the penalty")
    p.add_argument("--nonneg-times", action="store_true", default=None,
                   help="restrict coupling times to be non-negative")
    search(p)
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("compile", help="pulse program from a result file or a preset")
    p.add_argument("source", nargs="?", help="synth output, single result or parameter JSON")
    p.add_argument("--preset", help="conventional:NAME, conventional-literal:NAME or optimal:NAME")
    p.add_argument("--merge", action="store_true", default=None, help="fuse rotations between delays")
    p.add_argument("--no-frame-tracking", dest="frame_tracking", action="store_false", default=None,
                   help="build z rotations from x-y pulses instead of a virtual frame")
    p.add_argument("--index", type=int, help="compile this result instead of the fewest-pulse optimum")
    common(p)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("simulate", help="finite-pulse comparison or readout of programs")
    p.add_argument("programs", nargs="*", help="program files or preset names")
    p.add_argument("--optimal", nargs=3, metavar="PROG", help="time-optimal triple")
    p.add_argument("--conventional", nargs=3, metavar="PROG", help="conventional triple")
    p.add_argument("--literal", action="store_true",
                   help="use the uncorrected conventional composites instead of the executable ones")
    p.add_argument("--pi2-us", help="comma-separated pi/2 widths in microseconds")
    p.add_argument("--j-hz", type=float, help="coupling constant in Hz (default 215.5)")
    p.add_argument("--gamma-ratio", type=float, help="thermal polarisation ratio (default 3.98)")
    p.add_argument("--state", default="10", help="pseudopure state searched for (default 10)")
    p.add_argument("--readout", action="store_true", help="report line amplitudes instead")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="re-check a decomposition")
    p.add_argument("result", nargs="?", help="synth output or result JSON with a target")
    p.add_argument("--reference", help="check a built-in reference solution (u10, u10xcp, u10xcp2)")
    p.add_argument("--all", action="store_true", help="check every result, not just the best")
    search(p)
    common(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        opts = resolve_options(args)
        return args.func(args, opts)
    except UsageError as exc:
        print(f"nmrcartan: error: {exc}", file=sys.stderr)
        return 2
