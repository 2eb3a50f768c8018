"""Flat ``key = value`` config files and duration strings."""

from __future__ import annotations

import configparser
import math
import re
from pathlib import Path

_UNITS = {"us": 1, "µs": 1, "ms": 1_000, "s": 1_000_000}
_DURATION = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?)\s*(us|µs|ms|s)?\s*$")


def parse_duration(text: str | int | float) -> int | float:
    """Duration to integer microseconds; bare numbers are microseconds.

    ``inf``/``none`` give ``math.inf``.
    """
    if isinstance(text, (int, float)):
        return text if math.isinf(text) else int(text)
    if text.strip().lower() in ("inf", "infinity", "none"):
        return math.inf
    m = _DURATION.match(text)
    if not m:
        raise ValueError(f"cannot parse duration {text!r} (try 320ms, 8s, 10000us)")
    value = float(m.group(1)) * _UNITS[m.group(2) or "us"]
    if not value.is_integer():
        raise ValueError(f"duration {text!r} is not a whole number of microseconds")
    return int(value)


def parse_list(text: str) -> list[str]:
    return [p.strip() for p in re.split(r"[,\s]+", text.strip()) if p.strip()]


def read_flat_config(path: str | Path) -> dict[str, str]:
    """Read ``key = value`` lines (``#`` comments) into a dict; keys are
    lower-cased with dashes turned into underscores."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.read_string("[root]\n" + Path(path).read_text())
    return {k.replace("-", "_"): v for k, v in parser["root"].items()}
