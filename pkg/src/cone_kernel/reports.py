"""
Deterministic CSV / JSON report writers shared by every subcommand.

CSV goes through pandas with float_format "%.17g" (round-trippable floats)
and a fixed column order; JSON keeps insertion order and writes complex
numbers as {"re": .., "im": ..}.
"""
from __future__ import annotations

import io
import json
from pathlib import Path
from typing import Iterable, Optional, Sequence

import pandas as pd

from .errors import ReportError
from .logging_config import get_logger

logger = get_logger(__name__, component="Reports")

FLOAT_FORMAT = "%.17g"


def complex_to_json(value) -> Optional[dict]:
    if value is None:
        return None
    value = complex(value)
    return {"re": value.real, "im": value.imag}


def complex_from_json(data) -> Optional[complex]:
    if data is None:
        return None
    return complex(data["re"], data["im"])


def render_csv(rows: Iterable[dict], columns: Sequence[str]) -> str:
    """CSV text with exactly `columns`, header included even when rows is empty."""
    frame = pd.DataFrame(list(rows), columns=list(columns))
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return buffer.getvalue()


def render_json(document) -> str:
    return json.dumps(document, indent=2, sort_keys=False) + "\n"


def write_text(text: str, path) -> Path:
    """Write text to path, creating parent directories."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        logger.error(f"cannot write report: {exc}", method="write_text", path=str(path))
        raise ReportError(f"cannot write report to {path}: {exc}") from exc
    logger.info("report written", method="write_text", path=str(path), size=len(text))
    return path


def sibling_path(path, suffix: str) -> Path:
    """report.csv -> report.<suffix>.csv"""
    path = Path(path)
    return path.with_name(f"{path.stem}.{suffix}{path.suffix}")
