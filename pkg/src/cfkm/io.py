"""CSV / JSON input and output, run manifests and the study config file."""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import CensoredSample, CounterfactualCovariates, Grid, validate_sample
from .errors import (
    ConfigError,
    DimensionMismatchError,
    EmptySampleError,
    InvalidCensoringError,
    NegativeDurationError,
    SchemaError,
)
from .kernels import BandwidthRule

__all__ = [
    "RunManifest",
    "load_sample_csv",
    "load_counterfactual_csv",
    "load_grid_file",
    "write_sample_csv",
    "write_covariates_csv",
    "write_table",
    "read_table",
    "load_study_config",
]

_COVARIATE = re.compile(r"^x([1-9][0-9]*)$")


@dataclass
class RunManifest:
    """Provenance embedded in every result file.

    ``timestamp`` defaults to empty so that identical runs give identical
    files; pass one explicitly to record wall-clock time.
    """

    command: str
    inputs: list[str] = field(default_factory=list)
    kernel: str = "quartic4"
    bandwidth: float | None = None
    grid: str = ""
    hazard: str = "neg_log"
    alpha: float | None = None
    seed: int | None = None
    version: str = ""
    timestamp: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def now() -> str:
        return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    reader = csv.reader(lines)
    rows = [r for r in reader if r and any(c.strip() for c in r)]
    if not rows:
        raise EmptySampleError(f"{path}: file is empty")
    header = [c.strip() for c in rows[0]]
    return header, rows[1:]


def _covariate_columns(header: Sequence[str], path, start: int) -> int:
    """Check that ``header[start:]`` is exactly ``x1..xd`` and return ``d``."""
    rest = list(header[start:])
    if not rest:
        raise SchemaError(f"{path}: missing column 'x1'", column="x1")
    for k, name in enumerate(rest, start=1):
        if name != f"x{k}":
            m = _COVARIATE.match(name)
            expected = f"x{k}"
            if m is None:
                raise SchemaError(f"{path}: unexpected column {name!r}, expected {expected!r}", column=name)
            raise SchemaError(f"{path}: covariate columns out of order, missing {expected!r}", column=expected)
    return len(rest)


def _parse_matrix(rows, header, path, first_data_line: int = 1) -> np.ndarray:
    out = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        line = first_data_line + i
        if len(row) != len(header):
            raise SchemaError(
                f"{path}: row {line} has {len(row)} fields, expected {len(header)}", row=line
            )
        for j, cell in enumerate(row):
            try:
                v = float(cell.strip())
            except ValueError:
                raise SchemaError(
                    f"{path}: row {line}, column {header[j]!r}: {cell!r} is not a number",
                    row=line,
                    column=header[j],
                ) from None
            if not math.isfinite(v):
                raise SchemaError(
                    f"{path}: row {line}, column {header[j]!r}: non-finite value", row=line, column=header[j]
                )
            out[i, j] = v
    return out


def load_sample_csv(path, validate: bool = True) -> CensoredSample:
    """Read columns ``y, delta, x1..xd`` (``d`` taken from the header).

    Row numbers in error messages count data rows from 1 (header excluded). The returned
    sample keeps file order; pass it to :func:`validate_sample` (the
    estimators do this themselves) for the sorted form.
    """
    header, rows = _read_rows(path)
    for k, name in enumerate(("y", "delta")):
        if name not in header:
            raise SchemaError(f"{path}: missing column {name!r}", column=name)
        if header[k] != name:
            raise SchemaError(f"{path}: column {k + 1} must be {name!r}, got {header[k]!r}", column=name)
    _covariate_columns(header, path, 2)
    if not rows:
        raise EmptySampleError(f"{path}: no data rows")
    data = _parse_matrix(rows, header, path)
    delta = data[:, 1]
    bad = np.flatnonzero((delta != 0) & (delta != 1))
    if bad.size:
        line = int(bad[0]) + 1
        raise InvalidCensoringError(
            f"{path}: row {line}: delta={delta[bad[0]]:g} is not 0 or 1", row=line, column="delta"
        )
    neg = np.flatnonzero(data[:, 0] < 0)
    if neg.size:
        line = int(neg[0]) + 1
        raise NegativeDurationError(f"{path}: row {line}: negative duration {data[neg[0], 0]:g}", row=line, column="y")
    sample = CensoredSample(data[:, 0], delta.astype(np.int8), data[:, 2:])
    if validate:
        # remaining checks (covariates); file order is kept
        validate_sample(sample)
    return sample


def load_counterfactual_csv(path, d: int | None = None) -> CounterfactualCovariates:
    """Read columns ``x1..xd``; ``d`` (if given) must match."""
    header, rows = _read_rows(path)
    got = _covariate_columns(header, path, 0)
    if d is not None and got != d:
        raise DimensionMismatchError(f"{path}: counterfactual covariates have d={got}, sample has d={d}")
    if not rows:
        raise EmptySampleError(f"{path}: no data rows")
    return CounterfactualCovariates(_parse_matrix(rows, header, path))


def load_grid_file(path) -> Grid:
    """One evaluation time per line (a ``t`` header is allowed)."""
    header, rows = _read_rows(path)
    cells = rows if header == ["t"] else [header] + rows
    try:
        pts = [float(r[0]) for r in cells]
    except ValueError as exc:
        raise SchemaError(f"{path}: grid file holds a non-numeric entry") from exc
    return Grid(pts)


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


def write_sample_csv(sample: CensoredSample, path) -> None:
    header = ["y", "delta"] + [f"x{k + 1}" for k in range(sample.d)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for y, dl, x in zip(sample.y, sample.delta, sample.x):
            w.writerow([_fmt(y), str(int(dl))] + [_fmt(v) for v in x])


def write_covariates_csv(xstar: CounterfactualCovariates, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{k + 1}" for k in range(xstar.d)])
        for row in xstar.rows:
            w.writerow([_fmt(v) for v in row])


def _json_value(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return int(v)
    v = float(v)
    return None if math.isnan(v) else v


def render_table(columns: dict[str, Sequence], manifest: RunManifest | None, fmt: str = "csv") -> str:
    """Serialize equal-length columns; the manifest goes in comment lines (CSV) or a key (JSON)."""
    names = list(columns)
    lengths = {len(columns[c]) for c in names}
    if len(lengths) > 1:
        raise ValueError("columns have different lengths")
    nrows = lengths.pop() if lengths else 0
    if fmt == "json":
        doc = {
            "manifest": manifest.to_dict() if manifest else None,
            "columns": names,
            "rows": [{c: _json_value(columns[c][i]) for c in names} for i in range(nrows)],
        }
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"
    if fmt != "csv":
        raise ConfigError(f"unknown output format {fmt!r}")
    buf = io.StringIO()
    if manifest is not None:
        buf.write("# manifest: " + json.dumps(manifest.to_dict(), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for i in range(nrows):
        w.writerow([_fmt(columns[c][i]) for c in names])
    return buf.getvalue()


def write_table(columns: dict[str, Sequence], path, manifest: RunManifest | None = None, fmt: str = "csv") -> None:
    Path(path).write_text(render_table(columns, manifest, fmt), encoding="utf-8")


def _column(cells) -> np.ndarray:
    try:
        return np.array([np.nan if c is None else float(c) for c in cells])
    except ValueError:
        return np.array(cells, dtype=object)


def read_table(path) -> tuple[dict[str, np.ndarray], dict | None]:
    """Read back a file produced by :func:`write_table` (either format)."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        cols = {c: _column([r[c] for r in doc["rows"]]) for c in doc["columns"]}
        return cols, doc["manifest"]
    manifest = None
    lines = []
    for ln in text.splitlines():
        if ln.startswith("# manifest: "):
            manifest = json.loads(ln[len("# manifest: "):])
        elif not ln.startswith("#"):
            lines.append(ln)
    rows = list(csv.reader(lines))
    names = rows[0]
    cols = {c: _column([r[j] for r in rows[1:]]) for j, c in enumerate(names)}
    return cols, manifest


_CONFIG_KEYS = {
    "sizes", "reps", "base_seed", "bandwidth", "kernel", "grid",
    "estimators", "hazard", "variant", "strict", "output",
}


def _parse_bool(key: str, v: str) -> bool:
    low = v.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"config key {key!r}: {v!r} is not a boolean")


def parse_bandwidth(value: str) -> BandwidthRule:
    """``auto`` (3 n^-1/7), a fixed number, or ``C*n^-a`` / ``C,a``."""
    v = value.strip().lower().replace(" ", "")
    if v == "auto":
        return BandwidthRule()
    m = re.fullmatch(r"([0-9.eE+-]+)\*n\^\(?-([0-9./]+)\)?", v)
    try:
        if m:
            c, e = m.group(1), m.group(2)
            if "/" in e:
                num, den = e.split("/")
                exponent = float(num) / float(den)
            else:
                exponent = float(e)
            return BandwidthRule(constant=float(c), exponent=exponent)
        return BandwidthRule(fixed=float(v))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bandwidth {value!r} is not 'auto', a number or 'C*n^-a'") from exc


def load_study_config(path):
    """Parse a ``key = value`` study file into a :class:`~cfkm.simulation.StudyConfig`.

    Blank lines and ``#`` comments are ignored. Relative ``output`` paths are
    resolved against the config file's directory.
    """
    from .simulation import StudyConfig

    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = val
    kw = {}
    try:
        if "sizes" in values:
            kw["sizes"] = tuple(int(v) for v in re.split(r"[,\s]+", values["sizes"]) if v)
        if "reps" in values:
            kw["reps"] = int(values["reps"])
        if "base_seed" in values:
            kw["base_seed"] = int(values["base_seed"], 0)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if "bandwidth" in values:
        kw["bandwidth"] = parse_bandwidth(values["bandwidth"])
    if "kernel" in values:
        kw["kernel"] = values["kernel"]
    if "grid" in values:
        kw["grid"] = Grid.parse(values["grid"])
    if "estimators" in values:
        kw["estimators"] = tuple(v for v in re.split(r"[,\s]+", values["estimators"]) if v)
    if "hazard" in values:
        kw["hazard_method"] = values["hazard"].replace("-", "_")
    if "variant" in values:
        kw["variant"] = values["variant"].replace("-", "_")
    if "strict" in values:
        kw["strict"] = _parse_bool("strict", values["strict"])
    if "output" in values:
        out = Path(values["output"])
        kw["output"] = str(out if out.is_absolute() else Path(path).parent / out)
    return StudyConfig(**kw)
