"""Command-line entry point: ``sobolev-escape COMMAND CONFIG [--seed N] [--out-dir D] [--quiet] [--threads N]``."""
from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .. import __version__
from ..symbols import SymbolDomainError, SymbolSyntaxError
from .commands import COMMANDS, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK
from .config import ConfigError, echo, load_config
from .output import write_json


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sobolev-escape", description=__doc__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("config", help="JSON run configuration")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out-dir", default=None, help="override the config output_dir")
    p.add_argument("--quiet", action="store_true", default=None, help="suppress the summary on stdout")
    p.add_argument("--threads", type=int, default=None,
                   help="cap BLAS/OpenMP threads (falls back to $ESCAPE_THREADS)")
    return p


def _threads(arg: int | None) -> int | None:
    if arg is not None:
        return arg if arg > 0 else None
    env = os.environ.get("ESCAPE_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"ESCAPE_THREADS must be an integer, got {env!r}") from None
        return n if n > 0 else None
    return None


def _fail(code: int, message: str, quiet: bool) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.command,
                          {"seed": args.seed, "output_dir": args.out_dir, "quiet": args.quiet})
        threads = _threads(args.threads)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc), False)
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    try:
        with threadpool_limits(limits=threads), np.errstate(over="ignore", under="ignore"):
            results, code = COMMANDS[args.command](cfg, out)
    except (ConfigError, SymbolSyntaxError) as exc:
        return _fail(EXIT_CONFIG, str(exc), cfg["quiet"])
    except (ValueError, RuntimeError, ArithmeticError, SymbolDomainError, np.linalg.LinAlgError) as exc:
        # numerical failures: empty or critical level, step failure, missing basin, ...
        return _fail(EXIT_NUMERICAL, f"{type(exc).__name__}: {exc}", cfg["quiet"])
    elapsed = time.perf_counter() - start
    report = {"command": args.command, "version": __version__, "exit_code": code, "config": echo(cfg),
              "results": results}
    write_json(out / "report.json", report)
    write_json(out / "run_meta.json", {"wall_clock_s": elapsed, "version": __version__,
                                       "threads": threads})
    if not cfg["quiet"]:
        status = "ok" if code == EXIT_OK else "verification failed"
        print(f"{args.command}: {status} ({elapsed:.1f} s); files in {out}")
    return code


def main(argv: list[str] | None = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
