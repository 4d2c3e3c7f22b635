"""Command line entry point: ``complextubes <command> [--config FILE] [--set k=v ...] [--out DIR]``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .harness import COMMANDS, EXIT_ERROR, KEYS, ConfigError, dumps_report, load_config, run_command


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="complextubes", description="Complex tube incidence and Falconer experiments.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="flat key = value file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one key (repeatable)")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--list-keys", action="store_true", help="print known keys with defaults and exit")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.list_keys:
        for name, key in KEYS.items():
            print(f"{name} = {key.emit(key.default)}    # {key.help}".rstrip(" #"))
        return 0
    try:
        cfg = load_config(args.config, args.overrides)
    except (ConfigError, OSError) as exc:
        rep = {"command": args.command, "pass": False, "version": __version__,
               "failure": {"type": type(exc).__name__, "message": str(exc)}}
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(dumps_report(rep))
        print(json.dumps(rep, sort_keys=True), file=sys.stderr)
        return EXIT_ERROR
    status = run_command(args.command, cfg, Path(args.out))
    if status == EXIT_ERROR:
        print((Path(args.out) / "report.json").read_text(), file=sys.stderr, end="")
    return status


if __name__ == "__main__":
    sys.exit(main())
