"""``tidalfem <experiment> --config cfg.json [--override k=v ...] --out dir``.

Exit codes: 0 success, 2 invalid configuration or input, 3 solver failure,
4 resource problem (output directory, memory, oversized mesh), 1 otherwise.
The only environment variable read is ``TIDALFEM_LOG_LEVEL``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import config as cfgmod
from .errors import TidalFemError
from .experiments import COMMANDS

LOG_ENV = "TIDALFEM_LOG_LEVEL"
EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG, EXIT_SOLVER, EXIT_RESOURCE = 0, 1, 2, 3, 4

log = logging.getLogger("tidalfem")


def build_parser():
    p = argparse.ArgumentParser(
        prog="tidalfem",
        description="Mixed finite element tide model experiments.",
    )
    p.add_argument("experiment", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON config file (defaults are used when omitted)")
    p.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="dotted key, JSON value, e.g. params.C=0.02 or mesh.level=3",
    )
    p.add_argument("--out", required=True, help="output directory")
    return p


def _setup_logging():
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        file_cfg = cfgmod.load_file(args.config) if args.config else None
        cfg = cfgmod.resolve(args.experiment, file_cfg, args.override)
        summary = COMMANDS[args.experiment](cfg, args.out)
    except TidalFemError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except MemoryError:
        log.error("out of memory")
        return EXIT_RESOURCE
    except OSError as exc:
        log.error("i/o failure: %s", exc)
        return EXIT_RESOURCE
    except (ValueError, TypeError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_CONFIG
    for key, value in summary.metrics.items():
        print(f"{key}: {value}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
