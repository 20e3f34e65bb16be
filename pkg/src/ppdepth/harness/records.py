"""Result records and atomic CSV/JSON emission.

Every emitted row carries the experiment name, the master seed, and the
config hash.  Floats are written with ``repr`` (shortest round-trip), so a
CSV/JSON round trip preserves all 17 significant digits and reruns with the
same seed are byte-identical.  Files are written to a temporary sibling and
atomically renamed; a sidecar ``<name>.meta.json`` records the config, its
hash, the seed, and the library versions (never timestamps or worker counts,
which would break byte-identical reruns).
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

__all__ = ["ResultRecord", "emit", "write_rows_csv"]


@dataclass(frozen=True)
class ResultRecord:
    statistic: str
    value: float
    replicate: int | None = None
    params: tuple[tuple[str, object], ...] = ()
    stderr: float | None = None


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _atomic_write(path, write_fn) -> None:
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"failed writing {path}: {exc}") from exc
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def emit(
    records,
    fmt: str,
    path,
    *,
    experiment: str,
    config_hash: str,
    seed: int,
    param_columns: tuple[str, ...],
    raw_config: dict | None = None,
    versions: dict | None = None,
) -> None:
    """Atomically write the records plus a metadata sidecar."""
    records = list(records)
    if fmt == "csv":
        columns = (
            ["experiment", "config_hash", "seed"]
            + list(param_columns)
            + ["replicate", "statistic", "value", "stderr"]
        )

        def write_csv(fh):
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for rec in records:
                params = dict(rec.params)
                row = [experiment, config_hash, seed]
                row += [_cell(params.get(c)) for c in param_columns]
                row += [
                    _cell(rec.replicate),
                    rec.statistic,
                    _cell(rec.value),
                    _cell(rec.stderr),
                ]
                writer.writerow(row)

        _atomic_write(path, write_csv)
    elif fmt == "json":

        def write_json(fh):
            payload = [
                {
                    "experiment": experiment,
                    "config_hash": config_hash,
                    "seed": seed,
                    **dict(rec.params),
                    "replicate": rec.replicate,
                    "statistic": rec.statistic,
                    "value": rec.value,
                    "stderr": rec.stderr,
                }
                for rec in records
            ]
            json.dump(payload, fh, indent=1)
            fh.write("\n")

        _atomic_write(path, write_json)
    else:
        raise ValueError(f"unknown output format {fmt!r}")

    meta = {
        "experiment": experiment,
        "config_hash": config_hash,
        "seed": seed,
        "config": raw_config or {},
        "versions": versions or _default_versions(),
    }
    _atomic_write(
        f"{path}.meta.json",
        lambda fh: fh.write(json.dumps(meta, indent=1, sort_keys=True) + "\n"),
    )


def _default_versions() -> dict:
    import platform

    import numpy
    import scipy

    from .. import __version__

    return {
        "ppdepth": __version__,
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def write_rows_csv(rows: list[dict], columns: list[str], path) -> None:
    """Fixed-column CSV for auxiliary tables (bound tables, depth queries)."""

    def write(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in columns])

    _atomic_write(path, write)
