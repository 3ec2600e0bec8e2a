"""
Validators - 运行配置文件的加载与校验
JSON 语法错误和模型校验错误都带文件行号
"""

import json
import os
import re
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from pydantic import ValidationError

from models.config_models import OUTPUT_FORMATS, RunConfig
from utils.errors import ConfigurationError
from utils.logger import get_logger

logger = get_logger(__name__)


def validate_config_file(file_path: str) -> Tuple[bool, Optional[str], dict]:
    """
    Basic checks on a configuration file before parsing.

    Returns:
        (is_valid, error message, file info)
    """
    if not os.path.exists(file_path):
        return False, f"{file_path}: configuration file does not exist", {}

    file_ext = Path(file_path).suffix.lower()
    if file_ext != ".json":
        return False, f"{file_path}: only .json configuration files are supported, got: {file_ext or 'none'}", {}

    file_size = os.path.getsize(file_path)
    if file_size == 0:
        return False, f"{file_path}:1: configuration file is empty", {}

    return True, None, {"filename": Path(file_path).name, "size": file_size, "extension": file_ext}


def key_line(text: str, location: Sequence) -> int:
    """Line of the deepest key of `location` present in the JSON text (1 if none)."""
    position = 0
    found = None
    for part in location:
        if isinstance(part, int):
            continue
        match = re.compile(r'"%s"\s*:' % re.escape(str(part))).search(text, position)
        if match is None:
            break
        position = found = match.start()
    return 1 if found is None else text.count("\n", 0, found) + 1


def _dotted(location: Sequence) -> str:
    return ".".join(str(part) for part in location if not isinstance(part, int)) or "<root>"


def parse_run_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate configuration text."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}", {"line": exc.lineno, "column": exc.colno}
        ) from exc

    if not isinstance(data, dict):
        raise ConfigurationError(f"{source}:1: configuration root must be a JSON object", {"line": 1})

    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        problems = []
        for error in exc.errors():
            location = error.get("loc", ())
            key = _dotted(location)
            problems.append(
                {"key": key, "line": key_line(text, location), "message": error.get("msg", "invalid value")}
            )
        first = problems[0]
        raise ConfigurationError(
            f"{source}:{first['line']}: {first['key']}: {first['message']}",
            {"key": first["key"], "line": first["line"], "errors": problems},
        ) from exc


def load_run_config(file_path: str) -> RunConfig:
    """
    Load a run configuration file.

    Raises:
        ConfigurationError: message anchored at the offending line
    """
    is_valid, error, info = validate_config_file(file_path)
    if not is_valid:
        raise ConfigurationError(error, {"path": str(file_path)})

    text = Path(file_path).read_text(encoding="utf-8")
    config = parse_run_config(text, source=str(file_path))
    logger.info(f"loaded configuration {info['filename']} ({info['size']} bytes): {config.surface.kind.value}")
    return config


def parse_formats(value: str) -> List[str]:
    """Comma-separated subset of json, csv, obj."""
    formats = [item.strip() for item in value.split(",") if item.strip()]
    unknown = [item for item in formats if item not in OUTPUT_FORMATS]
    if unknown or not formats:
        raise ConfigurationError(
            f"--formats must be a comma-separated subset of {','.join(OUTPUT_FORMATS)}, got '{value}'"
        )
    return formats
