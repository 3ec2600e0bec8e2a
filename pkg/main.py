"""
Membrane stress toolkit - command line entry point

Exit codes: 0 success, 1 configuration error, 2 tolerance failure,
3 runtime error (immersion lost, flow failure, stagnation).
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path
from typing import List, Optional

from commands import flow as flow_commands
from commands import geometry as geometry_commands
from commands.common import RunContext
from config.settings import get_settings
from models.response_models import ErrorResponse, RunManifest
from utils.errors import ConfigurationError, ToolkitError
from utils.logger import ExceptionLogger, get_logger, log_performance
from utils.validators import load_run_config, parse_formats

logger = get_logger(__name__)

EXIT_OK = 0


class ToolkitArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped onto the configuration exit code"""

    def error(self, message: str):
        raise ConfigurationError(f"{self.prog}: {message}")


def build_parser() -> ToolkitArgumentParser:
    parser = ToolkitArgumentParser(
        prog="membrane",
        description="Stress tensors, shape equations and gradient flows of curvature-elastic surfaces",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    geometry_commands.register(subparsers)
    flow_commands.register(subparsers)
    return parser


def _apply_thread_override(threads: Optional[int]):
    if threads is None:
        return
    if threads < 1:
        raise ConfigurationError(f"--threads must be at least 1, got {threads}")
    os.environ["MEMBRANE_THREADS"] = str(threads)
    get_settings.cache_clear()


def _write_error(exc: ToolkitError):
    response = ErrorResponse(
        status="error",
        message=exc.message,
        error_code=exc.error_code,
        error_details=exc.details or None,
    )
    sys.stderr.write(response.model_dump_json() + "\n")


def main(argv: Optional[List[str]] = None) -> int:
    started = time.perf_counter()
    context: Optional[RunContext] = None
    config = None
    command = "unknown"
    exit_code = EXIT_OK
    message = ""

    try:
        args = build_parser().parse_args(argv)
        command = args.command
        _apply_thread_override(args.threads)
        settings = get_settings()

        config = load_run_config(args.config)
        if args.formats is not None:
            config = config.model_copy(update={"formats": parse_formats(args.formats)})

        out_dir = Path(args.out or config.output_dir or settings.output_dir)
        context = RunContext(out_dir=out_dir, formats=list(config.formats), tol=args.tol)
        args.handler(config, context)
        sys.stdout.write(json.dumps({"command": command, **context.summary}) + "\n")
    except ToolkitError as exc:
        ExceptionLogger.log_exception(exc, command, error_code=exc.error_code)
        _write_error(exc)
        exit_code = exc.exit_code
        message = exc.message

    if context is not None:
        manifest = RunManifest(
            status="success" if exit_code == EXIT_OK else "error",
            message=message,
            command=command,
            artifact_version=get_settings().artifact_version,
            config=config.model_dump(mode="json"),
            outputs=list(context.outputs),
            exit_code=exit_code,
        )
        context.out_dir.mkdir(parents=True, exist_ok=True)
        (context.out_dir / "manifest.json").write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")

    log_performance(command, time.perf_counter() - started, exit_code=exit_code)
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
