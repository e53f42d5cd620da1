"""Command-line front end.

    ballsbins simulate --n 16 --rounds 10 --seed 1 --out runs/a
    ballsbins exact --n 2
    ballsbins adversary --n 1024 --fault-period 8192 --out runs/adv

With ``--out`` the run writes ``manifest.json`` first, then one CSV per
trial, then ``summary.json``; without it the summary goes to stdout.
Exit status: 0 success, 1 invalid input, 2 internal error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__, bounds
from .harness import ExperimentSpec, Kind, run_experiment

log = logging.getLogger("ballsbins")

CSV_HEADER = "round,max_load,empty_bins,overloaded_bins,tetris_max_load,coupled_flag,dominance_flag\n"

COMMANDS = {
    "simulate": Kind.STABILITY,
    "tetris": Kind.TETRIS,
    "couple": Kind.COUPLE,
    "exact": Kind.EXACT_CHECK,
    "cover": Kind.COVER,
    "stabilize": Kind.STABILIZE,
    "adversary": Kind.COVER,
    "bounds": None,
    "suite": None,
}

# spec-file key (or flag dest) -> ExperimentSpec field
FIELDS = {
    "kind": "kind", "n": "n", "balls": "m", "m": "m", "rounds": "T", "t": "T", "trials": "trials",
    "seed": "seed", "strategy": "strategy", "topology": "topology", "degree": "degree",
    "threshold_c": "C", "c": "C", "beta": "beta", "fault_period": "fault_period",
    "fault_kind": "fault_kind", "fault_target": "fault_target", "start": "start",
}
INT_FIELDS = {"n", "m", "T", "trials", "seed", "degree", "fault_period", "fault_target"}
FLOAT_FIELDS = {"C", "beta"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ballsbins", description="Repeated balls-into-bins experiments.")
    p.add_argument("--version", action="version", version=f"ballsbins {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--n", type=int)
        s.add_argument("--balls", type=int, help="number of balls (default n)")
        s.add_argument("--rounds", type=int)
        s.add_argument("--trials", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--strategy", choices=["fifo", "lifo", "random"], type=str.lower)
        s.add_argument("--topology", choices=["complete", "ring", "regular"], type=str.lower)
        s.add_argument("--degree", type=int, help="degree for --topology regular (default 3)")
        s.add_argument("--start", choices=["random", "flat", "all_in_one"], type=str.lower)
        s.add_argument("--threshold-c", type=float, dest="threshold_c")
        s.add_argument("--beta", type=float)
        s.add_argument("--fault-period", type=int, dest="fault_period")
        s.add_argument("--fault-kind", choices=["all_in_one", "permute"], dest="fault_kind",
                       type=lambda v: v.lower().replace("-", "_"))
        s.add_argument("--out", type=Path)
        s.add_argument("--spec", type=Path, help="flat key = value file; flags override it")
        if name == "suite":
            s.add_argument("--kinds", help="comma-separated experiment kinds (default: all)")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def read_spec_file(path: Path) -> dict:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        text = path.read_text()
    except OSError as e:
        raise UsageError(f"cannot read spec file {path}: {e.strerror}") from None
    try:
        cp.read_string("[spec]\n" + text)
    except configparser.Error as e:
        raise UsageError(f"malformed spec file {path}: {e}") from None
    out = {}
    for key, raw in cp["spec"].items():
        name = FIELDS.get(key.replace("-", "_").lower())
        if name is None:
            raise UsageError(f"unknown key {key!r} in {path}")
        out[name] = _convert(name, raw.strip())
    return out


def _convert(name, raw):
    if raw.lower() in ("none", ""):
        return None
    try:
        if name in INT_FIELDS:
            return int(raw)
        if name in FLOAT_FIELDS:
            return float(raw)
    except ValueError:
        raise UsageError(f"{name} must be a number, got {raw!r}") from None
    return raw


def _spec_kwargs(args) -> dict:
    kw = read_spec_file(args.spec) if args.spec else {}
    for dest, name in FIELDS.items():
        v = getattr(args, dest, None)
        if v is not None:
            kw[name] = v
    return kw


def _defaults(command, kw) -> dict:
    n = kw.setdefault("n", 64)
    if command == "exact":
        kw.setdefault("trials", 100_000)
    if command in ("cover", "adversary"):
        kw.setdefault("T", max(10_000, int(40 * n * math.log(n) ** 2)))
    if command == "adversary":
        kw.setdefault("fault_period", 8 * n)
    if command == "stabilize":
        kw.setdefault("T", 6 * n)
    kw.setdefault("T", 1000)
    kw.setdefault("trials", 1)
    return kw


def make_spec(command, kw) -> ExperimentSpec:
    kw = _defaults(command, dict(kw))
    kind = COMMANDS[command]
    if "kind" in kw:
        want = Kind.parse(kw.pop("kind"))
        allowed = {kind}
        if kind is Kind.STABILITY:
            allowed |= {Kind.EMPTY_BINS, Kind.CONJECTURE}
        if want not in allowed:
            raise ValueError(f"spec file kind {want.value!r} does not match command {command!r}")
        kind = want
    if kind is Kind.STABILITY and kw.get("topology", "complete") != "complete":
        kind = Kind.CONJECTURE
    if command == "cover" and kw.get("fault_period"):
        raise ValueError("cover runs fault-free; use the adversary command for faults")
    return ExperimentSpec(kind=kind, **kw)


def _prepare_out(out: Path):
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as e:
        raise UsageError(f"output directory {out} is not writable: {e.strerror}") from None


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write_csv(path: Path, traj):
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write(CSV_HEADER)
        for row in traj.rows():
            f.write(",".join(str(x) for x in row) + "\n")


def _manifest(command, payload) -> dict:
    return {"tool": "ballsbins", "version": __version__, "command": command, **payload}


def _run_one(command, spec, out: Path | None):
    if out is not None:
        (out / "manifest.json").write_text(_dump(_manifest(command, {"spec": spec.as_dict()})))
    rep = run_experiment(spec, keep_trajectories=out is not None)
    summary = rep.to_dict()
    if out is not None:
        for i, tr in enumerate(rep.trajectories):
            _write_csv(out / f"trial_{i:04d}.csv", tr)
        (out / "summary.json").write_text(_dump(summary))
    return summary


def _bounds(kw) -> dict:
    n = kw.get("n", 64)
    beta = kw.get("beta", 2.0)
    window = kw.get("T", 10_000)
    if n < 2 or window < 1:
        raise ValueError("bounds need n >= 2 and rounds >= 1")
    return {
        "n": n,
        "beta": beta,
        "window": window,
        "between_empty_threshold": bounds.between_empty_threshold(beta, n),
        "between_empty_bound": bounds.between_empty_bound(beta, window, n),
        "between_empty_chernoff": bounds.between_empty_chernoff(beta, window, n),
        "tetris_window_mean": {str(d): bounds.tetris_window_mean(d) for d in (0, 3, 15)},
        "emptying_exponent": bounds.emptying_exponent(),
        "emptying_tail_bound": bounds.emptying_tail_bound(n),
        "chernoff_upper_mu100_delta025": bounds.chernoff_upper(100, 0.25),
    }


SUITE = ("stability", "empty_bins", "stabilize", "tetris", "couple", "cover", "exact_check")


def _suite(args, kw, out):
    kinds = [Kind.parse(k.strip()) for k in (args.kinds or ",".join(SUITE)).split(",") if k.strip()]
    kw = dict(kw)
    kw.pop("kind", None)
    kw.setdefault("n", 64)
    specs = {}
    for k in kinds:
        local = dict(kw)
        if k is Kind.EXACT_CHECK:
            local["n"] = 2
            local.pop("m", None)
            local.setdefault("trials", 100_000)
        if k is Kind.COUPLE:
            local["n"] = 4 * max(1, local["n"] // 4)
        if k is Kind.COVER:
            local.setdefault("T", max(10_000, int(40 * local["n"] * math.log(local["n"]) ** 2)))
        if k is Kind.STABILIZE:
            local.setdefault("T", 6 * local["n"])
        local.setdefault("T", 1000)
        local.setdefault("trials", 4)
        specs[k] = ExperimentSpec(kind=k, **local)
    if out is not None:
        (out / "manifest.json").write_text(_dump(_manifest("suite", {
            "specs": {k.value: s.as_dict() for k, s in specs.items()}})))
    result = {}
    for k, spec in specs.items():
        sub = None
        if out is not None:
            sub = out / k.value
            sub.mkdir(exist_ok=True)
        result[k.value] = _run_one(k.value, spec, sub)
    if out is not None:
        (out / "summary.json").write_text(_dump(result))
    return result


def dispatch(args) -> dict:
    kw = _spec_kwargs(args)
    out = args.out
    if out is not None:
        _prepare_out(out)
    if args.command == "bounds":
        result = _bounds(kw)
        if out is not None:
            (out / "manifest.json").write_text(_dump(_manifest("bounds", {"params": kw})))
            (out / "summary.json").write_text(_dump(result))
        return result
    if args.command == "suite":
        return _suite(args, kw, out)
    return _run_one(args.command, make_spec(args.command, kw), out)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"ballsbins: error: {e}", file=sys.stderr)
        return 1
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        result = dispatch(args)
    except (UsageError, ValueError) as e:
        print(f"ballsbins: error: {e}", file=sys.stderr)
        return 1
    except Exception:
        log.exception("internal error")
        return 2
    if args.out is None:
        sys.stdout.write(_dump(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
