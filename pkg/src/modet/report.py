"""Report documents: assembly, JSON/CSV emission with fixed key order, parsing."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, is_dataclass
from datetime import datetime, timezone
from fractions import Fraction

import numpy as np

from . import __version__
from .config import Conventions
from .identities import CalibrationResult, IdentityReport
from .series import QSeries

RESULT_KEYS = ("identity", "params", "lhs", "rhs", "abs_err", "rel_err", "fitted_constant", "dispersion",
               "mode", "pass", "truncation", "notes")
CSV_KEYS = ("identity", "mode", "pass", "abs_err", "rel_err", "fitted_re", "fitted_im", "dispersion")


def plain(x):
    """Convert numeric and container types to JSON-ready values (complex -> {re, im})."""
    if x is None or isinstance(x, (bool, str)):
        return x
    if isinstance(x, QSeries):
        return "series"
    if isinstance(x, Conventions):
        return x.to_dict()
    if isinstance(x, np.ndarray):
        return [plain(v) for v in x.tolist()]
    if isinstance(x, np.generic):
        return plain(x.item())
    if isinstance(x, int):
        return x
    if isinstance(x, float):
        return x
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, dict):
        return {str(k): plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [plain(v) for v in x]
    if is_dataclass(x):
        return plain(asdict(x))
    return str(x)


def result_entry(rep: IdentityReport) -> dict:
    vals = (rep.identity_id, rep.params, rep.lhs, rep.rhs, rep.abs_err, rep.rel_err, rep.fitted_constant,
            rep.dispersion, rep.mode, bool(rep.passed), rep.truncation, rep.notes)
    return {k: plain(v) for k, v in zip(RESULT_KEYS, vals)}


def calibration_entry(cal: CalibrationResult) -> dict:
    return {
        "scanned_axes": plain(cal.scanned_axes),
        "winner": plain(cal.winner),
        "residual": plain(cal.residual),
        "per_identity": plain(cal.per_identity),
        "passed": bool(cal.passed),
        "conventions": cal.conventions.to_dict(),
        "params": plain(cal.params),
    }


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def make_document(config: dict, results: list, exit_code: int | None = None, calibration=None,
                  values=None, timestamp: str | None = None) -> dict:
    """Report document; exit defaults to 0 if all results pass, 1 if any fails, 2 if there are none."""
    if exit_code is None:
        if not results and values is None and calibration is None:
            exit_code = 2
        else:
            exit_code = 0 if all(r["pass"] for r in results) else 1
    doc = {"version": __version__, "timestamp": timestamp or utc_timestamp(), "config": plain(config),
           "results": list(results)}
    if calibration is not None:
        doc["calibration"] = calibration
    if values is not None:
        doc["values"] = plain(values)
    doc["exit"] = exit_code
    return doc


def _num(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    s = format(x, ".17g")
    return s if any(c in s for c in ".en") else s + ".0"


def _dump(x) -> str:
    if x is None:
        return "null"
    if x is True:
        return "true"
    if x is False:
        return "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return _num(x)
    if isinstance(x, str):
        return json.dumps(x, ensure_ascii=False)
    if isinstance(x, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_dump(v)}" for k, v in x.items()) + "}"
    if isinstance(x, (list, tuple)):
        return "[" + ", ".join(_dump(v) for v in x) + "]"
    return _dump(plain(x))


def emit_report(doc: dict, fmt: str = "json") -> bytes:
    if fmt == "json":
        return (_dump(doc) + "\n").encode()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_KEYS)
        for r in doc["results"]:
            fc = r["fitted_constant"] or {"re": None, "im": None}
            row = [r["identity"], r["mode"], r["pass"], r["abs_err"], r["rel_err"], fc["re"], fc["im"],
                   r["dispersion"]]
            w.writerow(["" if v is None else (_num(v) if isinstance(v, float) else v) for v in row])
        return buf.getvalue().encode()
    raise ValueError(f"unknown format {fmt!r}")


def _unspecial(x):
    if isinstance(x, dict):
        return {k: _unspecial(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_unspecial(v) for v in x]
    if x in ("nan", "inf", "-inf"):
        return float(x)
    return x


def parse_report(data: bytes | str) -> dict:
    return _unspecial(json.loads(data))
