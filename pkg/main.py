from __future__ import annotations

import argparse
import logging
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from app.scenarios import ScenarioError, load_config, run
from app.settings import app_version, log_level, roll_workers


logger = logging.getLogger("pancake-roll")


def _format_validation_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        location = ".".join(str(part) for part in err["loc"]) or "<config>"
        lines.append(f"{location}: {err['msg']}")
    return "; ".join(lines)


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Rolling-ball and no-slip billiard scenarios.")
    parser.add_argument("--config", required=True, type=Path, help="Scenario config JSON (or a previous manifest.json)")
    parser.add_argument("--out-dir", default=Path("out"), type=Path, help="Directory for data files, default ./out")
    parser.add_argument("--quiet", action="store_true", help="Only log warnings and errors")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.WARNING if args.quiet else log_level())
    logger.info("pancake-roll %s", app_version())

    try:
        config = load_config(args.config)
    except FileNotFoundError:
        raise SystemExit(f"Config not found: {args.config}")
    except ValueError as exc:
        # pydantic.ValidationError is a ValueError; plain ValueError is malformed JSON
        message = _format_validation_error(exc) if isinstance(exc, ValidationError) else str(exc)
        logger.error("Invalid config %s: %s", args.config, message)
        raise SystemExit(2)

    try:
        manifest, outputs = run(config, args.out_dir, workers=roll_workers())
    except ScenarioError as exc:
        logger.error("%s", exc)
        raise SystemExit(1)

    logger.info("Manifest written to %s", manifest)
    for path in outputs:
        logger.info("  %s", path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
