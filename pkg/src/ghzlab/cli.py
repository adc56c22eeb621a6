"""Command-line driver: ``ghzlab {bound,qvalue,simulate,threshold,audit}``.

Every subcommand reads one JSON config (``--config``), lets a few flags
override scalar fields, and echoes the resolved config in its report.

Exit codes: 0 success (audit: all channels closed), 1 audit found an open
channel, 2 config or validation error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
from decimal import Decimal
from fractions import Fraction

from ghzlab import kernels
from ghzlab.game import GameError, GameSpec, is_ghz_shaped, make_ghz_game
from ghzlab.harness import (
    HarnessError, assignment_from_config, run_trials, state_from_name,
    strategy_from_dict, write_trials_csv,
)
from ghzlab.lhv import classical_value, classical_value_lp, snap_lp_value
from ghzlab.loopholes import LoopholeError, detection_threshold
from ghzlab.quantum import QuantumError, quantum_win_prob
from ghzlab.spacetime import ExperimentTimeline, TimelineError, audit, make_preset

EXIT_OK, EXIT_OPEN, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

DEFAULTS = {
    "game": "ghz",
    "strategy": {"kind": "quantum", "state": "ghz-"},
    "trials": 100_000,
    "master_seed": 0,
    "scoring": "strict",
    "workers": 1,
    "confidence": 0.95,
    "p0": "3/4",
    "tolerance": 1e-6,
    "quantum": {"state": "ghz-", "assignment": {"X": "X", "Y": "Y"}},
    "timeline": {"preset": "ideal"},
    "out": None,
    "format": "json",
}

log = logging.getLogger("ghzlab")


class ConfigError(ValueError):
    pass


class OutputError(OSError):
    pass


def load_config(path: str | None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                user = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        cfg.update(user)
        cfg["_config_dir"] = os.path.dirname(os.path.abspath(path))
    return cfg


def apply_overrides(cfg: dict, args) -> dict:
    for flag, key in (("seed", "master_seed"), ("trials", "trials"), ("out", "out"),
                      ("format", "format"), ("scoring", "scoring"), ("workers", "workers"),
                      ("tol", "tolerance"), ("confidence", "confidence"), ("p0", "p0")):
        v = getattr(args, flag, None)
        if v is not None:
            cfg[key] = v
    if getattr(args, "preset", None):
        cfg["timeline"] = {"preset": args.preset}
    if getattr(args, "timeline", None):
        cfg["timeline"] = args.timeline
    if getattr(args, "state", None):
        cfg["quantum"] = dict(cfg.get("quantum") or {}, state=args.state)
    if getattr(args, "strategy", None):
        cfg["strategy"] = {"kind": args.strategy}
        if args.strategy == "quantum":
            cfg["strategy"].update(cfg.get("quantum") or {})
    return cfg


def resolve_game(cfg: dict) -> GameSpec:
    g = cfg.get("game", "ghz")
    try:
        if g == "ghz":
            return make_ghz_game()
        if isinstance(g, dict):
            return GameSpec.from_dict(g)
    except GameError as exc:
        raise ConfigError(f"invalid game: {exc}") from exc
    raise ConfigError(f"game must be \"ghz\" or a game object, got {g!r}")


def resolve_timeline(cfg: dict) -> ExperimentTimeline:
    t = cfg.get("timeline")
    if isinstance(t, dict) and set(t) == {"preset"}:
        return make_preset(str(t["preset"]))
    if isinstance(t, dict):
        return ExperimentTimeline.from_dict(t)
    if isinstance(t, str):
        if t.lower() in ("rowe", "weihs", "galaxy", "ideal"):
            return make_preset(t)
        path = t if os.path.isabs(t) else os.path.join(cfg.get("_config_dir", "."), t)
        try:
            with open(path, encoding="utf-8") as fh:
                return ExperimentTimeline.from_json(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read timeline file {t}: {exc}") from exc
    raise ConfigError("timeline must be a preset name, a file path or a timeline object")


def _echo(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if not k.startswith("_")}


def _dump(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, default=_json_default)


def _json_default(o):
    if isinstance(o, (Fraction, Decimal)):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _write_outputs(cfg: dict, files: dict[str, str]) -> None:
    out = cfg.get("out")
    if not out:
        return
    if not os.path.isdir(out):
        raise OutputError(f"output directory does not exist: {out}")
    for name, text in files.items():
        with open(os.path.join(out, name), "w", encoding="utf-8") as fh:
            fh.write(text)


# --- subcommands ----------------------------------------------------------------

def cmd_bound(cfg: dict) -> int:
    spec = resolve_game(cfg)
    value, maximizers = classical_value(spec)
    lp_value, _ = classical_value_lp(spec)
    snap_lp_value(lp_value, value)
    report = {
        "value": str(value),
        "maximizers": [s.to_list() for s in maximizers],
        "lp_value": lp_value,
        "config": _echo(cfg),
    }
    text = _dump(report)
    _write_outputs(cfg, {"bound.json": text + "\n"})
    print(str(value))
    print(text)
    return EXIT_OK


def cmd_qvalue(cfg: dict) -> int:
    spec = resolve_game(cfg)
    q = cfg.get("quantum") or {}
    try:
        state = state_from_name(q.get("state", "ghz-"), spec.players)
        assign = assignment_from_config(q.get("assignment"), spec.players)
        value = quantum_win_prob(spec, state, assign)
    except (HarnessError, QuantumError, KeyError) as exc:
        raise ConfigError(f"invalid quantum settings: {exc}") from exc
    shown = f"{max(0.0, value) + 0.0:.12f}"
    report = {"value": shown, "state": q.get("state", "ghz-"), "config": _echo(cfg)}
    text = _dump(report)
    _write_outputs(cfg, {"qvalue.json": text + "\n"})
    print(shown)
    print(text)
    return EXIT_OK


def _int_field(cfg, key, minimum):
    v = cfg.get(key)
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigError(f"{key} must be an integer >= {minimum}, got {v!r}")
    return v


def cmd_simulate(cfg: dict) -> int:
    spec = resolve_game(cfg)
    n = _int_field(cfg, "trials", 1)
    seed = _int_field(cfg, "master_seed", -(2 ** 63))
    workers = _int_field(cfg, "workers", 1)
    if cfg.get("format") not in ("json", "csv"):
        raise ConfigError(f"format must be json or csv, got {cfg.get('format')!r}")
    desc = cfg.get("strategy")
    if not isinstance(desc, dict):
        raise ConfigError("strategy must be a descriptor object")
    if desc.get("kind") == "communication" and "timeline" not in desc and "preset" not in desc:
        desc = dict(desc, timeline=resolve_timeline(cfg))
    log.info("simulate: %d trials, seed %d, %d worker(s), %s kernel", n, seed, workers, kernels.BACKEND)
    try:
        strategy = strategy_from_dict(desc, spec)
        report = run_trials(spec, strategy, n, seed, cfg.get("scoring", "strict"), workers=workers,
                            confidence=float(cfg.get("confidence", 0.95)), p0=Fraction(str(cfg.get("p0", "3/4"))),
                            record=cfg.get("format") == "csv")
    except (HarnessError, GameError, LoopholeError, QuantumError, TimelineError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    body = report.to_dict()
    body["config"] = _echo(cfg)
    text = _dump(body)
    out = cfg.get("out")
    if out and not os.path.isdir(out):
        raise OutputError(f"output directory does not exist: {out}")
    _write_outputs(cfg, {"report.json": text + "\n"})
    if out and report.records is not None:
        write_trials_csv(os.path.join(out, "trials.csv"), report.records, spec.players)
    print(text)
    return EXIT_OK


def cmd_threshold(cfg: dict) -> int:
    spec = resolve_game(cfg)
    try:
        tol = float(cfg.get("tolerance", 1e-6))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad tolerance {cfg.get('tolerance')!r}") from exc
    if not tol > 0:
        raise ConfigError(f"tolerance must be positive, got {tol!r}")
    if not is_ghz_shaped(spec):
        raise ConfigError("unsupported game shape: threshold search needs 3 players with 2 questions each")
    try:
        result = detection_threshold(spec, tol)
    except LoopholeError as exc:
        raise ConfigError(str(exc)) from exc
    body = result.to_dict()
    body["config"] = _echo(cfg)
    text = _dump(body)
    _write_outputs(cfg, {"threshold.json": text + "\n"})
    print(text)
    return EXIT_OK


def cmd_audit(cfg: dict) -> int:
    timeline = resolve_timeline(cfg)
    report = audit(timeline)
    body = report.to_dict()
    body["config"] = _echo(cfg)
    text = _dump(body)
    _write_outputs(cfg, {"audit.json": text + "\n"})
    print(text)
    return EXIT_OK if report.all_closed else EXIT_OPEN


COMMANDS = {
    "bound": cmd_bound,
    "qvalue": cmd_qvalue,
    "simulate": cmd_simulate,
    "threshold": cmd_threshold,
    "audit": cmd_audit,
}


def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps a subcommand's unset flag from clobbering one given before it
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", metavar="PATH", help="JSON experiment config")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", metavar="DIR", help="directory for report files")
    common.add_argument("--format", choices=("json", "csv"), help="csv also writes per-trial records")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ghzlab", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("bound", parents=[common], help="exact classical value")
    p = sub.add_parser("qvalue", parents=[common], help="quantum win probability")
    p.add_argument("--state", help="ghz-, ghz+, product or a bit string")
    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo run")
    p.add_argument("--trials", type=int)
    p.add_argument("--strategy", choices=("quantum", "lhv"), help="shortcut for the strategy descriptor")
    p.add_argument("--state", help="state for --strategy quantum")
    p.add_argument("--scoring", choices=("strict", "postselect"))
    p.add_argument("--workers", type=int)
    p.add_argument("--confidence", type=float)
    p.add_argument("--p0", help="bound to test against, e.g. 3/4")
    p.add_argument("--preset", help="timeline preset for a communication adversary")
    p = sub.add_parser("threshold", parents=[common], help="detection-efficiency threshold")
    p.add_argument("--tol", type=float)
    p = sub.add_parser("audit", parents=[common], help="light-cone audit of a timeline")
    p.add_argument("--preset", choices=("rowe", "weihs", "galaxy", "ideal"))
    p.add_argument("--timeline", metavar="PATH", help="timeline JSON file")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = apply_overrides(load_config(getattr(args, "config", None)), args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, GameError, TimelineError, HarnessError, LoopholeError, QuantumError) as exc:
        print(f"ghzlab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"ghzlab {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
