"""Reading and writing counts, laws and scenarios.

Accepted data inputs:

* delimited text (tab, comma or whitespace) with header ``z x y count``:
  aggregated counts, all eight cells required;
* delimited text with header ``z x y p``: an observed law;
* delimited text with header ``z x y`` or no header and three fields per
  line: raw unit records, aggregated on read;
* JSON holding ``counts`` or ``law`` record lists, either at the top level
  or under ``inputs`` (so tool reports can be fed back in).
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .model import CELLS, ObservedLaw, TrialCounts, law_from_counts, validate_law


class InputError(ValueError):
    pass


@dataclass(frozen=True)
class LoadedData:
    law: ObservedLaw
    counts: Optional[TrialCounts] = None
    source_format: str = ""


def _level(token: str, where: str, name: str) -> int:
    if token not in ("0", "1"):
        raise InputError(f"{where}: field '{name}' must be 0 or 1, got {token!r}")
    return int(token)


def _split(line: str, delim: Optional[str]) -> list[str]:
    return [t.strip() for t in (line.split(delim) if delim else line.split())]


def _parse_delimited(text: str, name: str) -> LoadedData:
    lines = [(i + 1, ln) for i, ln in enumerate(text.splitlines()) if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise InputError(f"{name}: no data lines")
    first = lines[0][1]
    delim = "\t" if "\t" in first else "," if "," in first else None
    header = [t.lower() for t in _split(first, delim)]
    if all(t in ("0", "1") or t.replace(".", "", 1).isdigit() for t in header):
        columns = ["z", "x", "y"] if len(header) == 3 else ["z", "x", "y", "count"] if len(header) == 4 else None
        if columns is None:
            raise InputError(f"{name}:{lines[0][0]}: expected 3 (z,x,y) or 4 (z,x,y,count) fields, got {len(header)}")
        body = lines
    else:
        columns = header
        body = lines[1:]
    for required in ("z", "x", "y"):
        if required not in columns:
            raise InputError(f"{name}:{lines[0][0]}: header lacks column '{required}'")
    value_col = next((c for c in ("count", "p", "prob", "probability") if c in columns), None)
    idx = {c: columns.index(c) for c in columns}

    if value_col is None:
        records = []
        for lineno, line in body:
            fields = _split(line, delim)
            if len(fields) != len(columns):
                raise InputError(f"{name}:{lineno}: expected {len(columns)} fields, got {len(fields)}")
            where = f"{name}:{lineno}"
            records.append(tuple(_level(fields[idx[c]], where, c) for c in "zxy"))
        try:
            counts = TrialCounts.from_records(records)
        except ValueError as exc:
            raise InputError(f"{name}: {exc}") from exc
        return LoadedData(law_from_counts(counts), counts, "records")

    cells = {}
    for lineno, line in body:
        fields = _split(line, delim)
        where = f"{name}:{lineno}"
        if len(fields) != len(columns):
            raise InputError(f"{where}: expected {len(columns)} fields, got {len(fields)}")
        key = tuple(_level(fields[idx[c]], where, c) for c in "zxy")
        if key in cells:
            raise InputError(f"{where}: duplicate cell z={key[0]} x={key[1]} y={key[2]}")
        raw = fields[idx[value_col]]
        try:
            cells[key] = int(raw) if value_col == "count" else float(raw)
        except ValueError:
            raise InputError(f"{where}: field '{value_col}' is not a valid number: {raw!r}") from None
    return _from_cells(cells, value_col == "count", name)


def _from_cells(cells: dict, is_counts: bool, name: str) -> LoadedData:
    missing = [c for c in CELLS if c not in cells]
    if missing:
        listed = ", ".join(f"(z={z},x={x},y={y})" for z, x, y in missing)
        raise InputError(f"{name}: missing cells {listed}; all 8 cells are required")
    try:
        if is_counts:
            counts = TrialCounts.from_mapping(cells)
            return LoadedData(law_from_counts(counts), counts, "counts")
        law = ObservedLaw.from_mapping(cells)
    except ValueError as exc:
        raise InputError(f"{name}: {exc}") from exc
    report = validate_law(law)
    if not report.ok:
        raise InputError(f"{name}: " + "; ".join(f.message for f in report.fatal))
    return LoadedData(law, None, "law")


def _records_to_cells(records, value_key: str, name: str) -> dict:
    if not isinstance(records, list):
        raise InputError(f"{name}: '{value_key}' records must be a list")
    cells = {}
    for i, rec in enumerate(records):
        where = f"{name}: record {i}"
        if not isinstance(rec, dict):
            raise InputError(f"{where}: expected an object")
        for k in ("z", "x", "y", value_key):
            if k not in rec:
                raise InputError(f"{where}: missing field '{k}'")
        key = tuple(_level(str(rec[k]), where, k) for k in "zxy")
        if key in cells:
            raise InputError(f"{where}: duplicate cell {key}")
        value = rec[value_key]
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise InputError(f"{where}: field '{value_key}' must be a number")
        cells[key] = value
    return cells


def _parse_json(text: str, name: str) -> LoadedData:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{name}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if isinstance(data, list):
        value_key = "count" if data and isinstance(data[0], dict) and "count" in data[0] else "p"
        return _from_cells(_records_to_cells(data, value_key, name), value_key == "count", name)
    if not isinstance(data, dict):
        raise InputError(f"{name}: expected a JSON object or list")
    for container in (data, data.get("inputs") or {}):
        if "counts" in container:
            return _from_cells(_records_to_cells(container["counts"], "count", name), True, name)
        if "law" in container:
            return _from_cells(_records_to_cells(container["law"], "p", name), False, name)
    raise InputError(f"{name}: JSON input needs a 'counts' or 'law' field")


def parse_data(text: str, name: str = "<input>") -> LoadedData:
    stripped = text.lstrip()
    if stripped.startswith("{") or stripped.startswith("["):
        return _parse_json(text, name)
    return _parse_delimited(text, name)


def _read_text(path: str | Path) -> tuple[str, str]:
    """Contents of ``path``, or of stdin when ``path`` is ``-``."""
    if str(path) == "-":
        return sys.stdin.read(), "<stdin>"
    path = Path(path)
    try:
        return path.read_text(), str(path)
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from None


def read_data(path: str | Path) -> LoadedData:
    text, name = _read_text(path)
    return parse_data(text, name)


def read_scenario(path: str | Path) -> dict:
    text, name = _read_text(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{name}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(data, dict):
        raise InputError(f"{name}: scenario must be a JSON object")
    return data


def counts_records(counts: TrialCounts) -> list[dict]:
    return [{"z": z, "x": x, "y": y, "count": int(counts.n[z, x, y])} for z, x, y in CELLS]


def law_records(law: ObservedLaw) -> list[dict]:
    return [{"z": z, "x": x, "y": y, "p": float(law.p[z, x, y])} for z, x, y in CELLS]


def counts_tsv(counts: TrialCounts) -> str:
    rows = ["z\tx\ty\tcount"] + [f"{z}\t{x}\t{y}\t{int(counts.n[z, x, y])}" for z, x, y in CELLS]
    return "\n".join(rows) + "\n"


def law_tsv(law: ObservedLaw) -> str:
    rows = ["z\tx\ty\tp"] + [f"{z}\t{x}\t{y}\t{float(law.p[z, x, y])!r}" for z, x, y in CELLS]
    return "\n".join(rows) + "\n"
