"""JSONL record files and JSON result files."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .povm import SCHEME_COLUMNS, Records, Scheme, SchemeConfig

__all__ = ["RecordFileError", "write_records", "read_records", "header_config", "write_json", "read_json"]


class RecordFileError(ValueError):
    pass


def _header(cfg: SchemeConfig, n: int, seed, true_state) -> dict:
    cutoff = cfg.cutoffs[0] if len(cfg.cutoffs) == 1 else list(cfg.cutoffs)
    return {
        "scheme": cfg.scheme.value,
        "eta": cfg.eta,
        "cutoff": cutoff,
        "seed": seed,
        "n": n,
        "true_state": true_state,
    }


def write_records(path, records: Records, cfg: SchemeConfig, seed=None, true_state=None) -> None:
    """Write a header line followed by one JSON object per record."""
    names = SCHEME_COLUMNS[records.scheme]
    lines = [json.dumps(_header(cfg, len(records), seed, true_state))]
    cols = [records[name] for name in names]
    for i in range(len(records)):
        row = {"scheme": records.scheme.value}
        for name, col in zip(names, cols):
            row[name] = col[i].tolist() if col.ndim > 1 else float(col[i])
        lines.append(json.dumps(row))
    Path(path).write_text("\n".join(lines) + "\n")


def header_config(header: dict) -> SchemeConfig:
    cutoff = header.get("cutoff")
    cutoffs = () if cutoff is None else (tuple(cutoff) if isinstance(cutoff, list) else (int(cutoff),))
    return SchemeConfig(Scheme(header["scheme"]), float(header.get("eta", 1.0)), cutoffs)


def read_records(path) -> tuple[dict, Records]:
    """Return ``(header, records)``; validates scheme tags and record count."""
    path = Path(path)
    with path.open() as fh:
        lines = [line for line in fh if line.strip()]
    if not lines:
        raise RecordFileError(f"{path}: empty file")
    try:
        header = json.loads(lines[0])
        rows = [json.loads(line) for line in lines[1:]]
    except json.JSONDecodeError as exc:
        raise RecordFileError(f"{path}: invalid JSON ({exc})") from exc
    if "scheme" not in header or "eta" not in header:
        raise RecordFileError(f"{path}: first line is not a header")
    scheme = Scheme(header["scheme"])
    names = SCHEME_COLUMNS[scheme]
    columns = {name: [] for name in names}
    for k, row in enumerate(rows, start=2):
        if row.get("scheme") != scheme.value:
            raise RecordFileError(f"{path}:{k}: scheme {row.get('scheme')!r} does not match header")
        for name in names:
            try:
                columns[name].append(row[name])
            except KeyError:
                raise RecordFileError(f"{path}:{k}: missing field {name!r}") from None
    if header.get("n") is not None and header["n"] != len(rows):
        raise RecordFileError(f"{path}: header announces {header['n']} records, found {len(rows)}")
    if not rows:
        raise RecordFileError(f"{path}: no records")
    records = Records(scheme, **{k: np.asarray(v, dtype=float) for k, v in columns.items()})
    return header, records


def write_json(path, data: dict) -> None:
    Path(path).write_text(json.dumps(data, indent=1) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())
