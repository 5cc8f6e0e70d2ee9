"""Deterministic CSV / JSON writers for sweep, norm, count and dynamics output.

Every file starts with the package version, a hash of the run configuration
and the calibration constant ``kappa``. Floats are written with 17
significant digits so values round-trip exactly.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, TextIO, Union

import numpy as np

from .expansion import ExpansionReport, LayeredBasis, StructureConstants
from .oracles import KAPPA

__all__ = [
    "package_version",
    "config_hash",
    "header",
    "format_float",
    "render_csv",
    "render_json",
    "write_output",
    "expansion_dump",
]


def package_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _jsonable(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else repr(v)
    if isinstance(value, Path):
        return str(value)
    return value


def config_hash(config: Mapping[str, Any]) -> str:
    """First 16 hex digits of the SHA-256 of the canonical JSON config."""
    blob = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def header(config: Mapping[str, Any], kappa: float = KAPPA) -> Dict[str, Any]:
    return {"version": package_version(), "config_hash": config_hash(config),
            "kappa": float(kappa)}


def format_float(x: Any) -> str:
    """Format a cell: floats with 17 significant digits, others via ``str``."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        v = float(x)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.17g}"
    if x is None:
        return ""
    return str(x)


def render_csv(columns: Sequence[str], rows: Sequence[Sequence[Any]],
               meta: Mapping[str, Any]) -> str:
    """CSV text with ``# key: value`` comment lines first."""
    buf = _io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}: {format_float(v) if isinstance(v, float) else v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(columns))
    for r in rows:
        w.writerow([format_float(x) for x in r])
    return buf.getvalue()


def render_json(payload: Mapping[str, Any], meta: Mapping[str, Any]) -> str:
    doc = {"meta": dict(meta)}
    doc.update(payload)
    return json.dumps(_jsonable(doc), indent=2, sort_keys=False) + "\n"


def write_output(text: str, out: Optional[Union[str, Path]], stream: TextIO) -> None:
    """Write to ``out`` if given (UTF-8, ``\\n`` line endings), else to ``stream``."""
    if out is None:
        stream.write(text)
        return
    Path(out).write_text(text, encoding="utf-8", newline="\n")


def expansion_dump(lb: LayeredBasis, sc: StructureConstants,
                   report: ExpansionReport) -> Dict[str, Any]:
    """JSON-ready description of an expansion.

    Structure constants are listed as ``{k, l, monomials}`` with ``k`` the odd
    orbit index, ``l`` the even orbit index and each monomial given as
    ``{sign, j_pow, lam_pow, scale}``.
    """
    odd_labels = lb.odd_labels()
    even_labels = lb.even_labels()
    layers: Dict[int, Dict[str, List]] = {}
    for i, lab in enumerate(odd_labels):
        layers.setdefault(int(lb.odd_layer[i]), {"labels": [], "multiplicities": []})
        layers[int(lb.odd_layer[i])]["labels"].append(lab)
        layers[int(lb.odd_layer[i])]["multiplicities"].append(int(lb.odd_mult[i]))
    for i, lab in enumerate(even_labels):
        layers.setdefault(int(lb.even_layer[i]), {"labels": [], "multiplicities": []})
        layers[int(lb.even_layer[i])]["labels"].append(lab)
        layers[int(lb.even_layer[i])]["multiplicities"].append(int(lb.even_mult[i]))
    constants = []
    for (k, l) in sorted(sc.entries):
        monos = [{"sign": 1 if v > 0 else -1, "j_pow": int(m[0]), "lam_pow": int(m[1]),
                  "scale": abs(float(v))}
                 for m, v in sorted(sc.entries[(k, l)].items())]
        constants.append({"k": int(k), "l": int(l), "monomials": monos})
    return {
        "n_sites": int(lb.n_sites),
        "group": repr(lb.group),
        "report": report.as_dict(),
        "layers": [{"layer": b, **layers[b]} for b in sorted(layers)],
        "odd_labels": odd_labels,
        "even_labels": even_labels,
        "structure_constants": constants,
        "c0": [{"l": int(l), "value": float(v)} for l, v in sorted(sc.c0.items())],
    }
