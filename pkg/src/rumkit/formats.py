"""Versioned JSON documents, CSV exports and atomic file writes.

Every document carries ``"version": "1"``.  Canonical text has sorted keys,
floats written with 17 significant digits and no insignificant whitespace
beyond one space after separators, so save/load/save is byte-stable.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import jsonschema
import numpy as np

from .errors import RumkitIOError, ValidationError
from .framework import CrystalFramework, RealizedFramework, VelocityField, realize_window
from .geometry import Basis2, LineFigure, ProjLine
from .multigrid import GridFamily, MultigridSpec, Tiling

VERSION = "1"

_num = {"type": "number"}
_vec2 = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_ivec2 = {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}
_version = {"const": VERSION}

CRYSTAL_SCHEMA = {
    "type": "object",
    "required": ["version", "basis", "motif_joints", "motif_edges"],
    "properties": {
        "version": _version,
        "name": {"type": "string"},
        "basis": {"type": "array", "items": _vec2, "minItems": 2, "maxItems": 2},
        "motif_joints": {"type": "array", "items": _vec2, "minItems": 1},
        "motif_edges": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["from", "to", "offset"],
                "properties": {
                    "from": {"type": "integer", "minimum": 0},
                    "to": {"type": "integer", "minimum": 0},
                    "offset": _ivec2,
                },
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
}

SPEC_SCHEMA = {
    "type": "object",
    "required": ["families", "window"],
    "properties": {
        "name": {"type": "string"},
        "window": {"type": "number", "exclusiveMinimum": 0},
        "families": {
            "type": "array",
            "minItems": 2,
            "items": {
                "type": "object",
                "required": ["normal", "offset", "edge"],
                "properties": {"normal": _vec2, "offset": _num, "edge": _vec2},
                "additionalProperties": False,
            },
        },
    },
}

MULTIGRID_SCHEMA = dict(SPEC_SCHEMA, required=["version", "families", "window"],
                        properties=dict(SPEC_SCHEMA["properties"], version=_version))

TILING_SCHEMA = {
    "type": "object",
    "required": ["version", "spec", "vertices", "tiles"],
    "properties": {
        "version": _version,
        "spec": SPEC_SCHEMA,
        "vertices": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["K", "pos"],
                "properties": {"K": {"type": "array", "items": {"type": "integer"}}, "pos": _vec2},
            },
        },
        "tiles": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["families", "indices", "verts"],
                "properties": {
                    "families": _ivec2,
                    "indices": _ivec2,
                    "verts": {"type": "array", "items": {"type": "integer", "minimum": 0},
                              "minItems": 4, "maxItems": 4},
                },
            },
        },
    },
}

FIELD_SCHEMA = {
    "type": "object",
    "required": ["version", "framework_ref", "values"],
    "properties": {
        "version": _version,
        "framework_ref": {"type": "object", "required": ["kind"]},
        "values": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["joint", "re", "im"],
                "properties": {"joint": {"type": "integer", "minimum": 0}, "re": _vec2, "im": _vec2},
                "additionalProperties": False,
            },
        },
    },
}

FIGURE_SCHEMA = {
    "type": "object",
    "required": ["version", "kind", "lines"],
    "properties": {
        "version": _version,
        "kind": {"enum": ["ambient", "slippage", "limit", "rum"]},
        "basis": {"anyOf": [{"type": "null"}, {"type": "array", "items": _vec2, "minItems": 2, "maxItems": 2}]},
        "lines": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["angle", "direction"],
                "properties": {"angle": _num, "direction": _vec2},
            },
        },
    },
}

SCHEMAS = {"crystal": CRYSTAL_SCHEMA, "multigrid": MULTIGRID_SCHEMA, "tiling": TILING_SCHEMA,
           "field": FIELD_SCHEMA, "figure": FIGURE_SCHEMA}


# --------------------------------------------------------------------------
# canonical text


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValidationError("non-finite number cannot be serialized")
    return "%.17g" % (x + 0.0)  # no negative zero


def canonical_dumps(obj) -> str:
    """JSON text with sorted keys and 17-significant-digit floats."""
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        items = sorted(obj.items())
        return "{" + ", ".join(f"{json.dumps(str(k))}: {canonical_dumps(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(canonical_dumps(v) for v in obj) + "]"
    raise ValidationError(f"cannot serialize {type(obj).__name__}")


def atomic_write_text(path, text: str):
    """Write through a temporary file in the same directory and rename into place."""
    path = Path(path)
    try:
        d = path.parent if str(path.parent) else Path(".")
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=d)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as e:
        raise RumkitIOError(f"cannot write {path}: {e.strerror or e}") from e


def read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise RumkitIOError(f"cannot read {path}: {e.strerror or e}") from e


def validate_document(doc, kind: str):
    """Schema check; the first violation is reported with its JSON pointer."""
    schema = SCHEMAS[kind]
    v = jsonschema.Draft202012Validator(schema)
    errs = sorted(v.iter_errors(doc), key=lambda e: (len(e.path), list(map(str, e.path))))
    if errs:
        e = errs[0]
        pointer = "/" + "/".join(str(p) for p in e.path)
        raise ValidationError(f"schema violation: {e.message}", path=pointer)


def parse_json(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"invalid JSON: {e.msg} at line {e.lineno}") from e


# --------------------------------------------------------------------------
# crystals


def crystal_to_doc(c: CrystalFramework) -> dict:
    doc = {
        "version": VERSION,
        "basis": [c.basis.a1.tolist(), c.basis.a2.tolist()],
        "motif_joints": c.motif_joints.tolist(),
        "motif_edges": [{"from": e.source, "to": e.target, "offset": list(e.offset)}
                        for e in c.motif_edges],
    }
    if c.name:
        doc["name"] = c.name
    return doc


def crystal_from_doc(doc) -> CrystalFramework:
    validate_document(doc, "crystal")
    edges = [(e["from"], e["to"], tuple(e["offset"])) for e in doc["motif_edges"]]
    return CrystalFramework(Basis2(*doc["basis"]), doc["motif_joints"], edges, name=doc.get("name", ""))


# --------------------------------------------------------------------------
# multigrids and tilings


def spec_to_doc(spec: MultigridSpec, versioned: bool = True) -> dict:
    doc = {
        "window": spec.window,
        "families": [{"normal": f.normal.tolist(), "offset": f.offset, "edge": f.edge.tolist()}
                     for f in spec.families],
    }
    if spec.name:
        doc["name"] = spec.name
    if versioned:
        doc["version"] = VERSION
    return doc


def spec_from_doc(doc, versioned: bool = True) -> MultigridSpec:
    validate_document(doc, "multigrid") if versioned else None
    fams = [GridFamily(f["normal"], f["offset"], f["edge"]) for f in doc["families"]]
    return MultigridSpec(fams, doc["window"], doc.get("name", ""))


def tiling_to_doc(t: Tiling) -> dict:
    return {
        "version": VERSION,
        "spec": spec_to_doc(t.spec, versioned=False),
        "vertices": [{"K": k, "pos": p} for k, p in zip(t.K.tolist(), t.positions.tolist())],
        "tiles": [{"families": f, "indices": i, "verts": v}
                  for f, i, v in zip(t.families.tolist(), t.indices.tolist(), t.verts.tolist())],
    }


def tiling_from_doc(doc) -> Tiling:
    validate_document(doc, "tiling")
    spec = spec_from_doc(doc["spec"], versioned=False)
    K = [v["K"] for v in doc["vertices"]]
    if any(len(k) != spec.r for k in K):
        raise ValidationError("vertex index vector length differs from the number of grid families")
    pos = [v["pos"] for v in doc["vertices"]]
    tiles = doc["tiles"]
    verts = [tl["verts"] for tl in tiles]
    nv = len(K)
    for i, v in enumerate(verts):
        if max(v) >= nv:
            raise ValidationError(f"tile {i} refers to a missing vertex", path=f"/tiles/{i}/verts")
    t = Tiling(spec, K, pos, [tl["families"] for tl in tiles], [tl["indices"] for tl in tiles], verts)
    t.validate()
    return t


# --------------------------------------------------------------------------
# fields


def framework_ref(fw) -> dict:
    from .multigrid import TilingFramework

    if isinstance(fw, RealizedFramework):
        r1, r2 = fw.k_ranges
        doc = crystal_to_doc(fw.crystal)
        del doc["version"]
        return {"kind": "crystal-window", "crystal": doc,
                "k_range": [[r1.start, r1.stop], [r2.start, r2.stop]]}
    if isinstance(fw, TilingFramework):
        return {"kind": "tiling", "spec": spec_to_doc(fw.tiling.spec, versioned=False)}
    return {"kind": "finite", "n_joints": fw.n_joints}


def field_to_doc(u: VelocityField, ref: dict | None = None) -> dict:
    if ref is None:
        if u.framework is None:
            raise ValidationError("field has no framework; pass a framework_ref")
        ref = framework_ref(u.framework)
    vals = [{"joint": i, "re": v.real.tolist(), "im": v.imag.tolist()} for i, v in enumerate(u.values)]
    return {"version": VERSION, "framework_ref": ref, "values": vals}


def field_from_doc(doc) -> VelocityField:
    """Field document to a :class:`VelocityField`; crystal windows and tilings are rebuilt."""
    from .multigrid import dualize

    validate_document(doc, "field")
    ref = doc["framework_ref"]
    fw = None
    if ref["kind"] == "crystal-window":
        cdoc = dict(ref["crystal"], version=VERSION)
        fw = realize_window(crystal_from_doc(cdoc), [tuple(r) for r in ref["k_range"]])
    elif ref["kind"] == "tiling":
        fw = dualize(spec_from_doc(ref["spec"], versioned=False)).framework
    n = fw.n_joints if fw is not None else int(ref.get("n_joints", len(doc["values"])))
    vals = np.zeros((n, 2), complex)
    seen = np.zeros(n, bool)
    for i, item in enumerate(doc["values"]):
        j = item["joint"]
        if j >= n:
            raise ValidationError(f"joint {j} out of range", path=f"/values/{i}/joint")
        vals[j] = np.array(item["re"]) + 1j * np.array(item["im"])
        seen[j] = True
    if not seen.all():
        raise ValidationError(f"missing joint value for joint {int(np.argmin(seen))}")
    return VelocityField(vals, fw)


# --------------------------------------------------------------------------
# figures


def figure_to_doc(F: LineFigure, kind: str = "ambient", basis: Basis2 | None = None) -> dict:
    return {
        "version": VERSION,
        "kind": kind,
        "basis": None if basis is None else [basis.a1.tolist(), basis.a2.tolist()],
        "lines": [{"angle": L.angle, "direction": L.direction.tolist()} for L in F],
    }


def figure_from_doc(doc):
    """Returns ``(LineFigure, kind, basis or None)``."""
    validate_document(doc, "figure")
    F = LineFigure(ProjLine(item["direction"]) for item in doc["lines"])
    b = doc.get("basis")
    return F, doc["kind"], (Basis2(*b) if b is not None else None)


# --------------------------------------------------------------------------
# generic save/load


def _kind_of(value) -> str:
    from .spectra import SpectrumFigure

    if isinstance(value, CrystalFramework):
        return "crystal"
    if isinstance(value, MultigridSpec):
        return "multigrid"
    if isinstance(value, Tiling):
        return "tiling"
    if isinstance(value, VelocityField):
        return "field"
    if isinstance(value, (LineFigure, SpectrumFigure)):
        return "figure"
    raise ValidationError(f"no file format for {type(value).__name__}")


def to_doc(value) -> dict:
    from .spectra import SpectrumFigure

    kind = _kind_of(value)
    if kind == "crystal":
        return crystal_to_doc(value)
    if kind == "multigrid":
        return spec_to_doc(value)
    if kind == "tiling":
        return tiling_to_doc(value)
    if kind == "field":
        return field_to_doc(value)
    if isinstance(value, SpectrumFigure):
        return figure_to_doc(value.figure, value.kind, value.basis)
    return figure_to_doc(value)


def detect_kind(doc) -> str:
    if not isinstance(doc, dict):
        raise ValidationError("document must be a JSON object", path="/")
    if "motif_edges" in doc or "motif_joints" in doc:
        return "crystal"
    if "tiles" in doc:
        return "tiling"
    if "families" in doc:
        return "multigrid"
    if "values" in doc:
        return "field"
    if "lines" in doc:
        return "figure"
    raise ValidationError("unrecognized document", path="/")


def from_doc(doc, kind: str | None = None):
    kind = kind or detect_kind(doc)
    if kind == "crystal":
        return crystal_from_doc(doc)
    if kind == "multigrid":
        return spec_from_doc(doc)
    if kind == "tiling":
        return tiling_from_doc(doc)
    if kind == "field":
        return field_from_doc(doc)
    if kind == "figure":
        return figure_from_doc(doc)
    raise ValidationError(f"unknown document kind {kind!r}")


def save(path, value):
    atomic_write_text(path, canonical_dumps(to_doc(value)) + "\n")


def load(path, kind: str | None = None):
    return from_doc(parse_json(read_text(path)), kind)


# --------------------------------------------------------------------------
# CSV


def scan_csv(scan) -> str:
    R = scan.resolution
    lines = ["gamma1,gamma2,sigma_min"]
    for i in range(R):
        for j in range(R):
            lines.append(f"{_fmt_float(i / R)},{_fmt_float(j / R)},{_fmt_float(float(scan.samples[i, j]))}")
    return "\n".join(lines) + "\n"


def figure_csv(F, kind: str = "ambient") -> str:
    from .spectra import SpectrumFigure

    if isinstance(F, SpectrumFigure):
        kind, F = F.kind, F.figure
    lines = ["angle_rad,dir_x,dir_y,kind"]
    for L in F:
        lines.append(f"{_fmt_float(L.angle)},{_fmt_float(float(L.direction[0]))},"
                     f"{_fmt_float(float(L.direction[1]))},{kind}")
    return "\n".join(lines) + "\n"


def emit_spectrum_csv(obj, path):
    """Write a scan (``gamma1,gamma2,sigma_min``) or a figure (``angle_rad,dir_x,dir_y,kind``)."""
    from .rum import SpectrumScan

    text = scan_csv(obj) if isinstance(obj, SpectrumScan) else figure_csv(obj)
    atomic_write_text(path, text)
