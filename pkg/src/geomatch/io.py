"""Curve files: a JSON manifest holding CSV coordinate blocks.

Layout::

    {
      "format": "geomatch-curves",
      "version": 1,
      "manifold": "sphere2",
      "meta": {...},
      "curves": [
        {"name": "a", "rows": [
          "1,0,0",
          "0.99500416527802582,0.099833416646828155,0"
        ]}
      ]
    }

Each row sits on its own line so load errors can cite a file line.  Floats
are written with 17 significant digits, which makes ``save``/``load`` an
exact roundtrip.  Plain CSV files (one curve, optional ``# manifold: <tag>``
comment and an optional header row) are accepted as input too.
"""

from __future__ import annotations

import csv
import io as _io
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import manifolds as mf
from .curves import CurvePath, DiscreteCurve
from .errors import CurveFileError, DegenerateEdgeError, DomainError

FORMAT = "geomatch-curves"
VERSION = 1
DRIFT_TOL = 1e-6


def fmt(x: float) -> str:
    """17 significant digits; integral values keep a compact form."""
    s = f"{float(x):.17g}"
    return "0" if s == "-0" else s


@dataclass
class CurveFile:
    manifold: str
    names: list
    curves: list
    meta: dict = field(default_factory=dict)
    version: int = VERSION

    def spec(self) -> mf.ManifoldSpec:
        return mf.ManifoldSpec.from_tag(self.manifold)

    def discrete(self, relaxed: bool = False) -> list:
        M = self.spec()
        return [DiscreteCurve(M, c, relaxed) for c in self.curves]


# ---------------------------------------------------------------------------
# validation


def _check_rows(M: mf.ManifoldSpec, rows: np.ndarray, lines: list, where: str) -> np.ndarray:
    if rows.ndim != 2 or rows.shape[1] != M.coord_dim:
        raise CurveFileError(f"{where}: expected {M.coord_dim} columns for {M.tag}")
    if rows.shape[0] < 2:
        raise CurveFileError(f"{where}: a curve needs at least two rows")
    for i, r in enumerate(rows):
        if not np.all(np.isfinite(r)):
            raise CurveFileError(f"{where}: non-finite coordinate", line=lines[i])
        if M.kind == "hyperbolic" and r[1] <= 0:
            raise CurveFileError(f"{where}: half-plane point needs y > 0 (line {lines[i]})", line=lines[i])
        if M.kind == "sphere":
            drift = abs(float(np.linalg.norm(r)) - 1.0)
            if drift >= DRIFT_TOL:
                raise CurveFileError(
                    f"{where}: sphere point off the unit sphere by {drift:.3g} (line {lines[i]})",
                    line=lines[i], drift=drift)
    return mf.check_point(M, rows)


def _check_edges(M, rows, lines, where):
    d = mf.distance(M, rows[:-1], rows[1:])
    bad = np.flatnonzero(d <= 1e-14)
    if bad.size:
        k = int(bad[0])
        raise CurveFileError(f"{where}: rows {k} and {k + 1} coincide (line {lines[k + 1]})",
                             line=lines[k + 1])


def _parse_row(text: str, line: int, where: str) -> list:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise CurveFileError(f"{where}: malformed row {text!r} (line {line})", line=line) from None


# ---------------------------------------------------------------------------
# reading


def _locate_rows(text: str, blocks: list) -> list:
    """File line of every row string, scanning forward in file order."""
    lines = text.splitlines()
    out, pos = [], 0
    for block in blocks:
        found = []
        for row in block:
            needle = json.dumps(row)
            ln = None
            for j in range(pos, len(lines)):
                if needle in lines[j]:
                    ln, pos = j + 1, j + 1
                    break
            found.append(ln)
        out.append(found)
    return out


def _load_json(text: str, path: str, strict: bool) -> CurveFile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CurveFileError(f"{path}: invalid JSON ({exc.msg})", line=exc.lineno) from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise CurveFileError(f"{path}: not a {FORMAT} file")
    if doc.get("version") != VERSION:
        raise CurveFileError(f"{path}: unsupported format version {doc.get('version')!r}")
    try:
        M = mf.ManifoldSpec.from_tag(str(doc.get("manifold", "")))
    except DomainError as exc:
        raise CurveFileError(f"{path}: {exc}") from None
    entries = doc.get("curves")
    if not isinstance(entries, list) or not entries:
        raise CurveFileError(f"{path}: no curves")
    blocks = []
    for e in entries:
        rows = e.get("rows") if isinstance(e, dict) else None
        if not isinstance(rows, list) or not all(isinstance(r, str) for r in rows):
            raise CurveFileError(f"{path}: every curve needs a list of CSV row strings")
        blocks.append(rows)
    lines = _locate_rows(text, blocks)
    names, curves = [], []
    for i, (e, block, ln) in enumerate(zip(entries, blocks, lines)):
        name = str(e.get("name", f"curve{i}"))
        if e.get("manifold", M.tag) != M.tag:
            raise CurveFileError(f"{path}: curve {name!r} has manifold {e['manifold']!r}, file has {M.tag!r}")
        where = f"{path} [{name}]"
        vals = [_parse_row(r, ln[j], where) for j, r in enumerate(block)]
        if len({len(v) for v in vals}) > 1:
            raise CurveFileError(f"{where}: rows of unequal length")
        pts = _check_rows(M, np.array(vals, dtype=float), ln, where)
        if strict:
            _check_edges(M, pts, ln, where)
        names.append(name)
        curves.append(pts)
    return CurveFile(M.tag, names, curves, dict(doc.get("meta", {})), VERSION)


def _load_csv(text: str, path: str, strict: bool, manifold: str | None) -> CurveFile:
    tag = manifold
    vals, lines = [], []
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            if key.strip().lower() == "manifold" and tag is None:
                tag = value.strip()
            continue
        if not vals and any(c.isalpha() and c not in "eE" for c in line):
            continue  # header row
        vals.append(_parse_row(line, i, path))
        lines.append(i)
    if not vals:
        raise CurveFileError(f"{path}: no data rows")
    if len({len(v) for v in vals}) > 1:
        raise CurveFileError(f"{path}: rows of unequal length")
    rows = np.array(vals, dtype=float)
    try:
        M = mf.ManifoldSpec.from_tag(tag or f"euclidean:{rows.shape[1]}")
    except DomainError as exc:
        raise CurveFileError(f"{path}: {exc}") from None
    pts = _check_rows(M, rows, lines, path)
    if strict:
        _check_edges(M, pts, lines, path)
    name = os.path.splitext(os.path.basename(path))[0]
    return CurveFile(M.tag, [name], [pts])


def read_curve_file(path: str, strict: bool = False, manifold: str | None = None) -> CurveFile:
    """Parse a curve file (JSON manifest or plain CSV)."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CurveFileError(f"{path}: {exc.strerror}") from None
    if text.lstrip().startswith("{"):
        cf = _load_json(text, path, strict)
        if manifold is not None and manifold != cf.manifold:
            raise CurveFileError(f"{path}: manifold {cf.manifold!r}, expected {manifold!r}")
        return cf
    return _load_csv(text, path, strict, manifold)


def load_curves(path: str, strict: bool = False, relaxed: bool = False) -> list:
    """Load every curve of a file as :class:`DiscreteCurve` objects.

    With ``strict`` coinciding consecutive rows are rejected with their line
    number; otherwise they surface later as a degenerate-edge error.
    """
    cf = read_curve_file(path, strict)
    try:
        return cf.discrete(relaxed)
    except DegenerateEdgeError as exc:
        raise CurveFileError(f"{path}: {exc}", **exc.details) from None


# ---------------------------------------------------------------------------
# writing


def dumps_curve_file(cf: CurveFile) -> str:
    head = {"format": FORMAT, "version": cf.version, "manifold": cf.manifold}
    parts = [json.dumps(head, sort_keys=False)[:-1]]
    parts.append(f', "meta": {json.dumps(cf.meta, sort_keys=True)}, "curves": [\n')
    blocks = []
    for name, pts in zip(cf.names, cf.curves):
        rows = [json.dumps(",".join(fmt(v) for v in r)) for r in np.asarray(pts, dtype=float)]
        blocks.append(f'  {{"name": {json.dumps(str(name))}, "rows": [\n    '
                      + ",\n    ".join(rows) + "\n  ]}")
    parts.append(",\n".join(blocks))
    parts.append("\n]}\n")
    return "".join(parts)


def _write(path: str, text: str):
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def save_curve_file(path: str, cf: CurveFile):
    _write(path, dumps_curve_file(cf))


def save_curves(path: str, curves: list, names=None, meta: dict | None = None):
    """Write curves sharing one manifold to a JSON manifest."""
    curves = list(curves)
    if not curves:
        raise CurveFileError("nothing to save")
    M = curves[0].manifold
    if any(c.manifold != M for c in curves):
        raise CurveFileError("all curves in one file must share the manifold")
    names = list(names) if names is not None else [f"curve{i}" for i in range(len(curves))]
    save_curve_file(path, CurveFile(M.tag, names, [c.points for c in curves], dict(meta or {})))


def save_path(path: str, p: CurvePath, meta: dict | None = None):
    """Write every sampled curve of a path, named by its ``s`` value."""
    s = [j / p.m for j in range(p.m + 1)]
    info = {"kind": p.kind, "s": [fmt(x) for x in s]}
    info.update(meta or {})
    names = [f"s={fmt(x)}" for x in s]
    save_curve_file(path, CurveFile(p.manifold.tag, names, list(p.points), info))


def load_path(path: str) -> CurvePath:
    """Reload a path file and check its invariants (shared ``n``, increasing ``s``)."""
    cf = read_curve_file(path)
    if "s" not in cf.meta:
        raise CurveFileError(f"{path}: not a path file (no s grid)")
    s = np.array([float(x) for x in cf.meta["s"]])
    if s.size != len(cf.curves) or s.size < 2:
        raise CurveFileError(f"{path}: s grid does not match the curves")
    if s[0] != 0.0 or s[-1] != 1.0 or np.any(np.diff(s) <= 0):
        raise CurveFileError(f"{path}: s grid must increase from 0 to 1")
    if len({c.shape for c in cf.curves}) != 1:
        raise CurveFileError(f"{path}: curves of a path must share n")
    kind = cf.meta.get("kind", "raw")
    return CurvePath(cf.spec(), np.array(cf.curves), None, kind, {"file": path})


def save_table(path: str, header: list, columns: list):
    """Write equally long numeric columns as CSV with 17 significant digits."""
    cols = [np.asarray(c, dtype=float) for c in columns]
    if len({c.size for c in cols}) > 1:
        raise CurveFileError("table columns differ in length")
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*cols):
        w.writerow([fmt(v) for v in row])
    _write(path, buf.getvalue())


def load_table(path: str) -> tuple[list, np.ndarray]:
    try:
        with open(path, encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise CurveFileError(f"{path}: {exc.strerror}") from None
    if not rows:
        raise CurveFileError(f"{path}: empty table")
    data = []
    for i, r in enumerate(rows[1:], start=2):
        try:
            data.append([float(v) for v in r])
        except ValueError:
            raise CurveFileError(f"{path}: malformed row (line {i})", line=i) from None
    return rows[0], np.array(data)


def save_phi(path: str, phi: np.ndarray):
    """Two-column table ``t, phi(t)`` on the uniform grid ``t = k/n``."""
    phi = np.asarray(phi, dtype=float)
    save_table(path, ["t", "phi"], [np.linspace(0.0, 1.0, phi.size), phi])


def load_phi(path: str) -> tuple[np.ndarray, np.ndarray]:
    header, data = load_table(path)
    if header != ["t", "phi"] or data.ndim != 2 or data.shape[1] != 2:
        raise CurveFileError(f"{path}: not a reparameterization table")
    return data[:, 0], data[:, 1]


def save_json(path: str, obj):
    """Deterministic JSON (sorted keys, shortest-roundtrip floats)."""
    _write(path, json.dumps(obj, sort_keys=True, indent=2, default=_default) + "\n")


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")
