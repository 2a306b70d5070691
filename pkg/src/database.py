"""Artifact storage: atomic CSV/JSON writers and the matching parsers."""

from __future__ import annotations

import json
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Any

import pandas as pd

from src.feasible import (
    DIAG_HIGH,
    DIAG_LOW,
    M_HIGH,
    M_LEFT,
    M_LOW,
    M_RIGHT,
    BoundaryCurve,
)
from src.model import PricePair
from src.optimiser import Certificate, Contract, Direction, Objective, Regime, SolveResult

logger = logging.getLogger(__name__)

FORMATS = ("csv", "json")
CSV_FLOAT_FORMAT = "%.17g"


def infer_format(path: str | Path, fmt: str | None = None) -> str:
    """Explicit format, else the file suffix, else csv."""
    if fmt is not None:
        if fmt not in FORMATS:
            raise ValueError(f"Unknown format '{fmt}', expected one of {FORMATS}")
        return fmt
    return "json" if Path(path).suffix.lower() == ".json" else "csv"


def _atomic_write(path: str | Path, text: str) -> None:
    """Write text to a temporary file beside the target, then rename over it."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    handle = tempfile.NamedTemporaryFile(
        "w",
        dir=target.parent,
        prefix=f".{target.name}.",
        suffix=".tmp",
        delete=False,
        encoding="utf-8",
        newline="",
    )
    try:
        with handle:
            handle.write(text)
        os.replace(handle.name, target)
    except Exception:
        Path(handle.name).unlink(missing_ok=True)
        raise


def _flatten(record: dict[str, Any], prefix: str = "") -> dict[str, Any]:
    flat: dict[str, Any] = {}
    for key, value in record.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{name}."))
        elif isinstance(value, list | tuple):
            flat[name] = json.dumps(list(value))
        else:
            flat[name] = value
    return flat


def _unflatten(flat: dict[str, Any]) -> dict[str, Any]:
    record: dict[str, Any] = {}
    for key, value in flat.items():
        if isinstance(value, float) and math.isnan(value):
            value = None
        elif isinstance(value, str) and value.startswith("["):
            value = json.loads(value)
        node = record
        *parents, leaf = key.split(".")
        for parent in parents:
            node = node.setdefault(parent, {})
        node[leaf] = value
    return record


def _json_default(value: Any) -> Any:
    if hasattr(value, "item"):
        return value.item()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serialisable")


def _dumps(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n"


def write_table(frame: pd.DataFrame, path: str | Path, fmt: str | None = None) -> Path:
    """
    Write a table as CSV (header row, LF endings, full precision) or JSON records.

    Returns:
        The written path.
    """
    fmt = infer_format(path, fmt)
    if fmt == "csv":
        text = frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    else:
        text = _dumps(frame.to_dict(orient="records"))
    _atomic_write(path, text)
    logger.info(f"Wrote {len(frame)} rows to {path} ({fmt})")
    return Path(path)


def write_document(record: dict[str, Any], path: str | Path, fmt: str | None = None) -> Path:
    """Write a record as JSON, or as a one-row CSV with dotted column names."""
    fmt = infer_format(path, fmt)
    if fmt == "csv":
        frame = pd.DataFrame([_flatten(record)])
        text = frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    else:
        text = _dumps(record)
    _atomic_write(path, text)
    logger.info(f"Wrote document to {path} ({fmt})")
    return Path(path)


def load_table(path: str | Path, fmt: str | None = None) -> pd.DataFrame:
    fmt = infer_format(path, fmt)
    if fmt == "csv":
        return pd.read_csv(path, float_precision="round_trip")
    with open(path, encoding="utf-8") as handle:
        return pd.DataFrame(json.load(handle))


def load_document(path: str | Path, fmt: str | None = None) -> dict[str, Any]:
    fmt = infer_format(path, fmt)
    if fmt == "csv":
        frame = pd.read_csv(path, float_precision="round_trip")
        if len(frame) != 1:
            raise ValueError(f"Expected a one-row document in {path}, found {len(frame)} rows")
        row = {
            key: value.item() if hasattr(value, "item") else value
            for key, value in frame.iloc[0].to_dict().items()
        }
        return _unflatten(row)
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)


def boundary_from_frame(frame: pd.DataFrame) -> BoundaryCurve:
    """
    Rebuild a BoundaryCurve from its p1, p2, tag table.

    Raises:
        ValueError: If a required tag is missing.
    """
    points = tuple(
        PricePair(float(a), float(b)) for a, b in zip(frame["p1"], frame["p2"], strict=True)
    )
    tags = tuple(str(tag) for tag in frame["tag"])
    tagged: dict[str, PricePair] = {}
    for tag in (M_LEFT, M_RIGHT, M_LOW, M_HIGH, DIAG_LOW, DIAG_HIGH):
        if tag not in tags:
            raise ValueError(f"Boundary table has no '{tag}' row")
        tagged[tag] = points[tags.index(tag)]
    p_low = tagged[DIAG_LOW].p1
    p_high = tagged[DIAG_HIGH].p1
    anchor = (p_low + p_high) / 2.0
    return BoundaryCurve(
        points=points,
        tags=tags,
        anchor=PricePair(anchor, anchor),
        m_left=tagged[M_LEFT],
        m_right=tagged[M_RIGHT],
        m_low=tagged[M_LOW],
        m_high=tagged[M_HIGH],
        p_low_diag=p_low,
        p_high_diag=p_high,
    )


def solve_result_from_dict(record: dict[str, Any]) -> SolveResult:
    """Inverse of SolveResult.to_dict; extra keys such as A and s are ignored."""
    mirror = record.get("mirror")
    certificate = None
    if record.get("certificate_resolution") is not None:
        certificate = Certificate(
            resolution=int(record["certificate_resolution"]),
            grid_value=float(record["grid_value"]),
            bound=float(record["certificate_bound"]),
            certified=bool(record["certified"]),
        )
    return SolveResult(
        objective=Objective(record["objective"]),
        direction=Direction(record["direction"]),
        contract=Contract(
            p1=float(record["p1"]), p2=float(record["p2"]), alpha=float(record["alpha"])
        ),
        value=float(record["value"]),
        regime=Regime(record["regime"]),
        binding=tuple(record.get("binding") or ()),
        mirror=(
            Contract(p1=float(mirror["p1"]), p2=float(mirror["p2"]), alpha=float(mirror["alpha"]))
            if mirror
            else None
        ),
        certificate=certificate,
        restricted=bool(record.get("restricted", False)),
    )
