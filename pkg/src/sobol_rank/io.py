"""CSV ingestion, study config files and CSV emission."""

from __future__ import annotations

import csv
import math
import re
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from sobol_rank.estimators import PairedSample
from sobol_rank.models import ModelSpecError, make_model
from sobol_rank.study import StudyConfig

CONFIG_KEYS = ("model", "law", "ns", "max_lag", "avg_ks", "reps", "seed", "k_rule")
REQUIRED_KEYS = ("model", "law", "ns", "reps")


class DataError(ValueError):
    """Unreadable or malformed input data."""


class ConfigError(ValueError):
    """Config file schema violation; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def format_number(x, digits: int = 10) -> str:
    """Shortest decimal that round-trips, capped at ``digits`` significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    s = repr(x)
    mantissa = s.split("e")[0].lstrip("-").replace(".", "").strip("0")
    if len(mantissa) > digits:
        s = f"{x:.{digits}g}"
    return s[:-2] if s.endswith(".0") else s


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], digits: int = 10) -> None:
    """Header-first, comma-separated, newline-terminated table."""
    lines = [",".join(header)]
    lines += [",".join(format_number(v, digits) if not isinstance(v, str) else v for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def read_xy_csv(path) -> PairedSample:
    """Read a two-column ``x,y`` CSV. Errors name the offending line."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [c.strip().lower() for c in rows[0]]
    if header != ["x", "y"]:
        raise DataError(f"{path}: row 1: expected header 'x,y', got {','.join(rows[0])!r}")
    xs, ys = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise DataError(f"{path}: row {lineno}: expected 2 fields, got {len(row)}")
        try:
            x, y = float(row[0]), float(row[1])
        except ValueError:
            raise DataError(f"{path}: row {lineno}: non-numeric value in {row!r}") from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise DataError(f"{path}: row {lineno}: non-finite value in {row!r}")
        xs.append(x)
        ys.append(y)
    if len(xs) < 2:
        raise DataError(f"{path}: need at least 2 data rows, got {len(xs)}")
    return PairedSample(np.array(xs), np.array(ys))


def read_table(path) -> tuple[list[str], list[list[float]]]:
    """Read back a numeric table written by :func:`write_csv`."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], [[float(c) for c in r] for r in rows[1:]]


def _int_list(key: str, value: str) -> tuple[int, ...]:
    try:
        out = tuple(int(v) for v in re.split(r"[,\s]+", value.strip()) if v)
    except ValueError:
        raise ConfigError(key, f"expected a comma-separated integer list, got {value!r}") from None
    if not out:
        raise ConfigError(key, "empty list")
    return out


def _int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(key, f"expected an integer, got {value!r}") from None


def parse_config_text(text: str) -> StudyConfig:
    """Parse ``key = value`` lines (``#`` comments) into a StudyConfig.

    Keys: model, law, ns, max_lag, avg_ks, reps, seed, k_rule. ``max_lag``
    defaults to ``min(50, min(ns) - 1)``, ``avg_ks`` to the multiples of 5 up
    to ``max_lag``, ``seed`` to 0 and ``k_rule`` to ``cube_root``.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(key or f"line {lineno}", "expected 'key = value'")
        if key not in CONFIG_KEYS:
            raise ConfigError(key, f"unknown key; allowed keys are {', '.join(CONFIG_KEYS)}")
        if key in raw:
            raise ConfigError(key, "duplicate key")
        raw[key] = value.strip()
    for key in REQUIRED_KEYS:
        if key not in raw:
            raise ConfigError(key, "missing required key")

    try:
        model = make_model(raw["model"], raw["law"])
    except ModelSpecError as exc:
        key = "law" if "law" in str(exc) else "model"
        raise ConfigError(key, str(exc)) from None
    ns = _int_list("ns", raw["ns"])
    if min(ns) < 3:
        raise ConfigError("ns", "sample sizes must be >= 3")
    max_lag = _int("max_lag", raw["max_lag"]) if "max_lag" in raw else min(50, min(ns) - 1)
    if not 1 <= max_lag < min(ns):
        raise ConfigError("max_lag", f"must lie in [1, {min(ns) - 1}], got {max_lag}")
    if "avg_ks" in raw:
        avg_ks = _int_list("avg_ks", raw["avg_ks"])
    else:
        avg_ks = tuple(range(5, max_lag + 1, 5)) or (max_lag,)
    if any(not 1 <= k <= max_lag for k in avg_ks):
        raise ConfigError("avg_ks", f"values must lie in [1, max_lag={max_lag}]")
    reps = _int("reps", raw["reps"])
    if reps < 2:
        raise ConfigError("reps", f"must be >= 2, got {reps}")
    seed = _int("seed", raw["seed"]) if "seed" in raw else 0
    if seed < 0:
        raise ConfigError("seed", "must be non-negative")
    k_rule = raw.get("k_rule", "cube_root").replace(" ", "")
    try:
        return StudyConfig(
            model=model,
            sample_sizes=ns,
            max_lag=max_lag,
            avg_ks=avg_ks,
            replications=reps,
            base_seed=seed,
            k_rule=k_rule,
        )
    except ValueError as exc:
        raise ConfigError("k_rule", str(exc)) from None


def read_config(path) -> StudyConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    return parse_config_text(text)
