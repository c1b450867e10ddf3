"""``glskit <command> --config PATH [--seed N] [--out DIR]``."""

from __future__ import annotations

import argparse
import sys

from .errors import GLSError, InvalidConfig, IoFailure
from .experiments import DEFAULTS, load_config, run_experiment

EXIT_CONFIG, EXIT_IO, EXIT_RUNTIME = 2, 3, 1


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="glskit", description="Gumbel-max list sampling experiments.")
    ap.add_argument("command", choices=sorted(DEFAULTS))
    ap.add_argument("--config", required=True, help="YAML file with the experiment parameters")
    ap.add_argument("--seed", type=int, help="override the master seed")
    ap.add_argument("--out", help="output directory (default: the config's 'out' key)")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.seed is not None and args.seed < 0:
            raise InvalidConfig("seed must be non-negative")
        cfg = load_config(args.config, args.command).with_overrides(args.seed, args.out)
        if cfg.out is None:
            raise InvalidConfig("no output directory; pass --out or set 'out' in the config")
        rep = run_experiment(cfg)
    except InvalidConfig as exc:
        print(f"glskit: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IoFailure as exc:
        print(f"glskit: io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except GLSError as exc:
        print(f"glskit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"{len(rep.records)} records -> {rep.records_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
