"""``nearfield-ris`` entry point.  Exit status: 0 success, 2 config error, 3 runtime abort."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..config import ConfigError, ExperimentConfig, parse_config
from ..control.hdrl import TrainingAborted
from .runner import MODES, MissingArtifact, run

EXIT_OK, EXIT_CONFIG, EXIT_ABORT = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nearfield-ris", description=__doc__.splitlines()[0])
    p.add_argument("--config", type=Path, help="JSON config document (defaults if omitted)")
    p.add_argument("--mode", required=True, choices=MODES)
    p.add_argument("--seed", type=int, help="override the config's master seed")
    p.add_argument("--out", type=Path, default=Path("runs"), help="output directory")
    p.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    return p


def load_config(path: Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_config(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    log = logging.getLogger("nearfield_ris")
    try:
        cfg = load_config(args.config)
        paths = run(cfg, args.mode, args.out, args.seed)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (MissingArtifact, TrainingAborted, FloatingPointError) as exc:
        log.error("aborted: %s", exc)
        return EXIT_ABORT
    for path in paths:
        log.info("wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
