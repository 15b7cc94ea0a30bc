"""Command-line entry point: ``nvsim <subcommand> --config run.yaml``."""

from __future__ import annotations

import argparse
import datetime as _dt
import logging
import sys

import yaml

from .config import apply_overrides, config_from_dict
from .errors import ConfigError, NVSimError
from .output import emit
from .runner import run

log = logging.getLogger("nvsim")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

# subcommand -> (default model, allowed models)
SUBCOMMANDS = {
    "eigensweep": ("eigensweep", ("eigensweep",)),
    "hyperfine": ("hyperfine", ("hyperfine",)),
    "echo": ("echo_closed", ("echo_closed", "echo_exact")),
    "sensitivity": ("sensitivity", ("sensitivity",)),
    "noise": ("noise_variance", ("noise_variance", "optimal_angle")),
    "lindblad": ("echo_lindblad", ("echo_lindblad",)),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nvsim", description="NV-center angle-sensing simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry, e.g. field.magnitude=93")
        p.add_argument("--reproducible", action="store_true", help="omit the timestamp from metadata")
        p.add_argument("--output", "-o", help="output file (default: config output.path or stdout)")
        p.add_argument("--format", choices=("csv", "json"), help="output format")
        p.add_argument("--verbose", "-v", action="store_true")
    return parser


def _load(args):
    default_model, allowed = SUBCOMMANDS[args.command]
    with open(args.config, encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(
            f"YAML parse error: {getattr(exc, 'problem', None) or exc}",
            line=mark.line + 1 if mark else None,
            column=mark.column + 1 if mark else None,
        ) from None
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a mapping")
    doc = apply_overrides(doc, args.overrides)
    cfg = config_from_dict(doc, default_model)
    if cfg.model not in allowed:
        raise ConfigError(f"model '{cfg.model}' is not handled by '{args.command}'", path="model")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO

    log.info("running model %s", cfg.model)
    try:
        table = run(cfg)
    except NVSimError as exc:
        print(f"numerical error in {type(exc).__module__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if not args.reproducible:
        table.metadata["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()

    fmt = args.format or cfg.output.format
    path = args.output or cfg.output.path
    data = emit(table, fmt)
    try:
        if path in (None, "-"):
            sys.stdout.buffer.write(data)
            sys.stdout.flush()
        else:
            with open(path, "wb") as fh:
                fh.write(data)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    log.info("wrote %d rows", len(table))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
