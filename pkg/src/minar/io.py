"""CSV count series and JSON parameter documents."""
import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import (
    ConfigError,
    MinarError,
    NegativeCount,
    NotPositiveDefinite,
    ParseError,
    RaggedRows,
)
from .mixtures import MU_BOUND, SIGMA_DIAG_MAX
from .process import ModelParams


@dataclass
class CountSeries:
    """A T x N count matrix with its column names."""

    values: np.ndarray
    columns: list = field(default_factory=list)

    def __post_init__(self):
        if not self.columns:
            self.columns = [f"x{i + 1}" for i in range(self.values.shape[1])]

    @property
    def shape(self):
        return self.values.shape


def _parse_int(cell, path, row, col):
    s = cell.strip()
    if s.startswith("-") and s[1:].isdigit():
        raise NegativeCount(f"negative count {s!r}", path, row, col)
    if not s.isdigit() or not s.isascii():
        raise ParseError(f"expected a non-negative base-10 integer, got {cell!r}", path, row, col)
    return int(s)


def parse_csv_text(text, path=None):
    """Parse CSV text (header + integer rows). Row numbers count the header as row 1."""
    if text.startswith("﻿"):
        text = text[1:]
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("file is empty; a header row is required", path, 1) from None
    header = [h.strip() for h in header]
    if not header or any(h == "" for h in header):
        raise ParseError("header row has an empty column name", path, 1)
    n = len(header)
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if not rec or (len(rec) == 1 and rec[0].strip() == ""):
            continue
        if len(rec) != n:
            raise RaggedRows(f"expected {n} fields, found {len(rec)}", path, lineno)
        rows.append([_parse_int(c, path, lineno, j + 1) for j, c in enumerate(rec)])
    if not rows:
        raise ParseError("no data rows", path, 2)
    return CountSeries(np.array(rows, dtype=np.int64).reshape(len(rows), n), header)


def load_csv(path):
    """Read a count series from a UTF-8 CSV file with a header row."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not valid UTF-8 ({exc.reason})", path) from None
    return parse_csv_text(text, path)


def format_csv(values, columns=None):
    values = np.asarray(values)
    if values.ndim == 1:
        values = values[:, None]
    columns = columns or [f"x{i + 1}" for i in range(values.shape[1])]
    lines = [",".join(columns)]
    lines += [",".join(str(int(v)) for v in row) for row in values]
    return "\n".join(lines) + "\n"


def write_csv(path, values, columns=None):
    """Write counts with LF line endings so output is byte-stable across platforms."""
    Path(path).write_bytes(format_csv(values, columns).encode("utf-8"))


# parameter documents -----------------------------------------------------------

def _number_list(obj, key, length=None):
    if not isinstance(obj, list):
        raise ConfigError("expected a list of numbers", key)
    if length is not None and len(obj) != length:
        raise ConfigError(f"expected {length} entries, found {len(obj)}", key)
    out = []
    for i, v in enumerate(obj):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"expected a number, got {v!r}", f"{key}[{i}]")
        out.append(float(v))
    return out


def params_from_config(doc):
    """Validate a {family, alpha, mu, sigma} mapping and build ModelParams.

    Every failure names the offending key path, e.g. ``sigma[1][0]``.
    """
    if not isinstance(doc, dict):
        raise ConfigError("top-level value must be an object")
    for key in ("family", "alpha", "mu", "sigma"):
        if key not in doc:
            raise ConfigError("missing required key", key)
    fam = doc["family"]
    if not isinstance(fam, str) or fam.strip().lower() not in ("pl", "gl"):
        raise ConfigError(f"must be 'pl' or 'gl', got {fam!r}", "family")
    alpha = _number_list(doc["alpha"], "alpha")
    n = len(alpha)
    if n == 0:
        raise ConfigError("must not be empty", "alpha")
    for i, a in enumerate(alpha):
        if not 0.0 < a < 1.0:
            raise ConfigError(f"must lie in (0, 1), got {a}", f"alpha[{i}]")
    mu = _number_list(doc["mu"], "mu", n)
    for i, m in enumerate(mu):
        if abs(m) > MU_BOUND:
            raise ConfigError(f"must lie in [-{MU_BOUND}, {MU_BOUND}], got {m}", f"mu[{i}]")
    sig = doc["sigma"]
    if not isinstance(sig, list) or len(sig) != n:
        raise ConfigError(f"expected a {n}x{n} matrix", "sigma")
    sigma = [_number_list(r, f"sigma[{i}]", n) for i, r in enumerate(sig)]
    s = np.array(sigma)
    for i in range(n):
        for j in range(i + 1, n):
            if abs(s[i, j] - s[j, i]) > 1e-12 * max(1.0, abs(s[i, j])):
                raise ConfigError("matrix is not symmetric", f"sigma[{i}][{j}]")
        if not s[i, i] <= SIGMA_DIAG_MAX:
            raise ConfigError(f"variance exceeds {SIGMA_DIAG_MAX}", f"sigma[{i}][{i}]")
    try:
        return ModelParams.from_arrays(fam.strip().lower(), alpha, mu, s)
    except NotPositiveDefinite as exc:
        err = NotPositiveDefinite(f"sigma: {exc}")
        err.key_path = "sigma"
        raise err from None
    except MinarError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_params(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FileNotFoundError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return params_from_config(doc)


def dump_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n", encoding="utf-8")
