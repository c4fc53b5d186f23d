"""Model files, report assembly and the JSON/CSV/SVG emitters.

Numbers are written with Python's shortest round-trip float repr (at most 17
significant digits); complex numbers become ``{"re": .., "im": ..}`` objects.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
from typing import Optional
from xml.sax.saxutils import escape

import numpy as np

from . import __version__
from .errors import ArtifactError, ParseError, ValidationError
from .index_flow import FlowReport, IndexReport, resonance_index, total_resonance_index
from .operator_models import ContinuumModel, EmbeddedModel, FinitePencil, OperatorModel
from .resonance import group_splitting

CSV_HEADER = "lambda,total_index,ssf_counting,agreement"


# ---------------------------------------------------------------------------
# JSON values

def to_jsonable(x):
    """Plain JSON value: complex -> {re, im}, arrays -> nested lists, non-finite -> null."""
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return to_jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": _float(x.real), "im": _float(x.imag)}
    if isinstance(x, (float, np.floating)):
        return _float(x)
    return x


def _float(v):
    v = float(v)
    return v if math.isfinite(v) else None


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# model files

def _number(v, where):
    if isinstance(v, bool):
        raise ParseError(f"{where}: expected a number, got a boolean")
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, dict):
        if set(v) - {"re", "im"} or "re" not in v:
            raise ParseError(f"{where}: complex entries need the keys re and im")
        try:
            return complex(float(v["re"]), float(v.get("im", 0.0)))
        except (TypeError, ValueError):
            raise ParseError(f"{where}: re/im must be numbers") from None
    raise ParseError(f"{where}: expected a number or {{re, im}}, got {type(v).__name__}")


def _matrix(v, where, square=True):
    if not isinstance(v, list) or not v or not all(isinstance(row, list) for row in v):
        raise ParseError(f"{where}: expected a non-empty array of rows")
    width = len(v[0])
    for i, row in enumerate(v):
        if len(row) != width:
            raise ParseError(f"{where}[{i}]: row length {len(row)} != {width} (matrix not rectangular)")
    out = np.array([[_number(x, f"{where}[{i}][{j}]") for j, x in enumerate(row)]
                    for i, row in enumerate(v)])
    if square and out.shape[0] != out.shape[1]:
        raise ParseError(f"{where}: matrix is {out.shape[0]}x{out.shape[1]}, expected square")
    return out if np.any(out.imag) else out.real


def _vector(v, where):
    if not isinstance(v, list) or not v:
        raise ParseError(f"{where}: expected a non-empty array")
    out = np.array([_number(x, f"{where}[{i}]") for i, x in enumerate(v)])
    return out if np.any(out.imag) else out.real


def _real(obj, key, where):
    if key not in obj:
        raise ParseError(f"{where}: missing field '{key}'")
    v = _number(obj[key], f"{where}.{key}")
    if v.imag != 0:
        raise ParseError(f"{where}.{key}: expected a real number")
    return v.real


def _continuum(obj, where):
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object")
    ivs = obj.get("intervals")
    if not isinstance(ivs, list) or not ivs:
        raise ParseError(f"{where}.intervals: expected a non-empty array")
    out = []
    for i, iv in enumerate(ivs):
        w = f"{where}.intervals[{i}]"
        if not isinstance(iv, dict):
            raise ParseError(f"{w}: expected an object")
        if "C" not in iv:
            raise ParseError(f"{w}: missing field 'C'")
        out.append((_real(iv, "a", w), _real(iv, "b", w), _matrix(iv["C"], f"{w}.C")))
    if "J" not in obj:
        raise ParseError(f"{where}: missing field 'J'")
    return ContinuumModel(out, _matrix(obj["J"], f"{where}.J"), float(obj.get("s0", 0.0)))


def parse_model(obj) -> OperatorModel:
    """ModelFile object -> operator model.  Errors name the offending field."""
    if not isinstance(obj, dict):
        raise ParseError("model: expected a JSON object")
    kind = obj.get("kind")
    try:
        if kind == "finite":
            body = obj.get("finite", obj)
            if not isinstance(body, dict) or "H0" not in body:
                raise ParseError("finite: missing field 'H0'")
            H0 = _matrix(body["H0"], "finite.H0")
            V = _matrix(body["V"], "finite.V") if "V" in body else None
            F = _matrix(body["F"], "finite.F") if "F" in body else None
            J = _matrix(body["J"], "finite.J") if "J" in body else None
            return FinitePencil(H0, V, F=F, J=J)
        if kind == "continuum":
            return _continuum(obj.get("continuum", obj), "continuum")
        if kind == "embedded":
            body = obj.get("embedded", obj)
            if not isinstance(body, dict) or "base" not in body:
                raise ParseError("embedded: missing field 'base'")
            base = _continuum(body["base"], "embedded.base")
            if "psi_hat" not in body:
                raise ParseError("embedded: missing field 'psi_hat'")
            psi = _vector(body["psi_hat"], "embedded.psi_hat")
            return EmbeddedModel(base, psi, _real(body, "alpha", "embedded"),
                                 _real(body, "lambda", "embedded"), _real(body, "r_lambda", "embedded"))
    except ParseError:
        raise
    except ValidationError as exc:
        raise ParseError(f"{kind}: {exc}") from None
    raise ParseError(f"kind: expected 'finite', 'continuum' or 'embedded', got {kind!r}")


def load_model(path: str) -> OperatorModel:
    if path.startswith("builtin:"):
        return builtin_model(path[len("builtin:"):])
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_model(obj)


def _continuum_dict(c: ContinuumModel):
    return {"intervals": [{"a": iv.a, "b": iv.b, "C": iv.C} for iv in c.intervals],
            "J": c.J, "s0": c.s0}


def model_to_dict(m: OperatorModel) -> dict:
    if isinstance(m, FinitePencil):
        return {"kind": "finite", "finite": {"H0": m.H0, "V": m.V, "F": m.F, "J": m.J}}
    if isinstance(m, EmbeddedModel):
        return {"kind": "embedded", "embedded": {
            "base": _continuum_dict(m.base), "psi_hat": m.psi, "alpha": m.alpha,
            "lambda": m.lam, "r_lambda": m.r_lambda}}
    if isinstance(m, ContinuumModel):
        return {"kind": "continuum", "continuum": _continuum_dict(m)}
    raise TypeError(type(m).__name__)


def model_digest(m: OperatorModel) -> dict:
    text = json.dumps(to_jsonable(model_to_dict(m)), sort_keys=True)
    return {"sha256": hashlib.sha256(text.encode()).hexdigest(), "kind": m.kind, "dim": int(m.dim)}


# ---------------------------------------------------------------------------
# built-in models

def triple_crossing_pencil(eps: float = 0.5, lam: float = 0.0) -> FinitePencil:
    H0 = np.diag([lam + eps, lam - eps, lam])
    V = np.array([[1.0, 0, 1], [0, 1, 1], [1, 1, 0]])
    return FinitePencil(H0, V)


def four_level_pencil(which: str = "v2", lam: float = 0.0) -> FinitePencil:
    H0 = np.diag([lam + 1, lam + 1, lam - 0.5, lam])
    d1, d2 = {"v1": (-2.0, -2.0), "v2": (-4.0, -1.0), "v3": (-3.0, -1.0)}[which]
    V = np.array([[d1, 0, 0, 1], [0, d2, 0, 1], [0, 0, 1, 1], [1, 1, 1, 0]])
    return FinitePencil(H0, V)


def builtin_model(name: str) -> OperatorModel:
    from .embedded import scalar_model, witness_property_S_fail, witness_S_not_P
    table = {
        "paper-14-1": lambda: triple_crossing_pencil(0.5),
        "paper-14-2-v2": lambda: four_level_pencil("v2"),
        "paper-14-2-v3": lambda: four_level_pencil("v3"),
        "paper-13-4-alpha-pos": lambda: scalar_model(1.0),
        "paper-13-4-alpha-neg": lambda: scalar_model(-1.0),
        "paper-13-4-alpha-zero": lambda: scalar_model(0.0),
        "paper-13-3-2-S-fail": witness_property_S_fail,
        "paper-13-3-2-S-noP": witness_S_not_P,
        "zero": lambda: FinitePencil(np.diag([-1.0, 0.5, 2.0]), np.zeros((3, 3))),
    }
    if name not in table:
        from .errors import UnknownExample
        raise UnknownExample(f"unknown built-in model {name!r}; known: {', '.join(sorted(table))}")
    return table[name]()


# ---------------------------------------------------------------------------
# reports

def point_record(rep: IndexReport, cls=None) -> dict:
    out = {
        "r_lambda": rep.r_lambda,
        "order_d": rep.order_d,
        "dim_upsilon1": rep.dim_upsilon1,
        "N": rep.N, "N_plus": rep.N_plus, "N_minus": rep.N_minus,
        "index": {"splitting": rep.ind_splitting, "rindex": rep.ind_rindex,
                  "signature": rep.ind_signature},
        "consistency": rep.consistency,
        "uturn_ok": rep.uturn_ok,
        "split_points": [complex(r) for r in rep.split_points],
        "diagnostics": list(rep.diagnostics),
    }
    if cls is not None:
        out["classification"] = {
            "type_I_point": cls.type_I_point, "indeterminate": cls.indeterminate,
            "property_S": cls.property_S, "property_P": cls.property_P,
            "dim_type_I_space": cls.dim_type_I_space, "pp_spectrum_ok": cls.pp_spectrum_ok,
            "clLw_dim": cls.clLw_dim, "depth_table": [list(t) for t in cls.depth_table],
        }
    return out


def _classify(m, lam, r):
    from .boundary import classify_point
    try:
        return classify_point(m, lam, r)
    except ArtifactError:
        return None


def flow_report(m: OperatorModel, fr: FlowReport, seed=None, classify=True) -> dict:
    pts = [point_record(rep, _classify(m, fr.lam, r) if classify else None) for r, rep in fr.per_point]
    return {
        "tool": {"name": "artifact", "version": __version__},
        "model": model_digest(m),
        "query": {"lambda": fr.lam, "interval": list(fr.interval)},
        "points": pts,
        "totals": {"total_index": fr.total, "sum_check": sum(p["index"]["splitting"] for p in pts) == fr.total,
                   "ssf_counting": fr.ssf_value, "spectral_flow": fr.tracking_value,
                   "agreement": fr.agreement},
        "consistency": all(p["consistency"] for p in pts),
        "seed": seed,
    }


def point_report(m: OperatorModel, lam: float, r: float, seed=None) -> dict:
    rep = resonance_index(m, lam, r)
    rec = point_record(rep, _classify(m, lam, rep.r_lambda))
    return {
        "tool": {"name": "artifact", "version": __version__},
        "model": model_digest(m),
        "query": {"lambda": lam, "at": r},
        "points": [rec],
        "totals": {"total_index": rep.ind_splitting, "sum_check": True},
        "consistency": rep.consistency,
        "seed": seed,
    }


# ---------------------------------------------------------------------------
# sweep

def _eigen_hit(m: OperatorModel, lam: float, a: float, b: float) -> bool:
    if not isinstance(m, FinitePencil):
        return False
    for r in (a, b):
        w = np.linalg.eigvalsh(m.H(r))
        if np.min(np.abs(w - lam)) <= 1e-9 * max(1.0, np.max(np.abs(w))):
            return True
    return False


def sweep_rows(m: OperatorModel, grid, a: float, b: float, warn=None) -> list[tuple]:
    """(lambda, total, ssf or None, agreement) per grid value, in grid order."""
    rows = []
    for lam in grid:
        lam = float(lam)
        if _eigen_hit(m, lam, a, b):
            if warn:
                warn(f"lambda={lam!r} is an eigenvalue at an endpoint; shifted by 1e-9")
            lam += 1e-9
        fr = total_resonance_index(m, lam, a, b, with_oracles=False)
        ssf = None
        if isinstance(m, FinitePencil):
            from .index_flow import ssf_counting
            ssf = ssf_counting(m, lam, a, b)
        rows.append((lam, fr.total, ssf, (ssf is None or ssf == fr.total) and
                     all(rep.consistency for _, rep in fr.per_point)))
    return rows


def csv_text(rows) -> str:
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for lam, total, ssf, agree in rows:
        out.write(f"{lam!r},{total},{'' if ssf is None else ssf},{str(bool(agree)).lower()}\n")
    return out.getvalue()


def parse_grid(text: str) -> np.ndarray:
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise ParseError(f"--lambda-grid: expected A:B:N, got {text!r}") from None
    if n < 1:
        raise ParseError("--lambda-grid: N must be positive")
    return np.linspace(a, b, n)


# ---------------------------------------------------------------------------
# SVG figures

_W, _H, _PAD = 480, 360, 40


def _axes(xs, ys):
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    dx = (x1 - x0) or 1.0
    dy = (y1 - y0) or 1.0
    x0, x1, y0, y1 = x0 - 0.1 * dx, x1 + 0.1 * dx, y0 - 0.1 * dy, y1 + 0.1 * dy

    def px(x):
        return _PAD + (x - x0) / (x1 - x0) * (_W - 2 * _PAD)

    def py(y):
        return _H - _PAD - (y - y0) / (y1 - y0) * (_H - 2 * _PAD)
    return px, py, (x0, x1, y0, y1)


def _svg(body: list[str], title: str) -> str:
    head = (f'<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_W}" height="{_H}" '
            f'viewBox="0 0 {_W} {_H}">\n<title>{escape(title)}</title>\n'
            f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>\n')
    return head + "\n".join(body) + "\n</svg>\n"


def splitting_svg(m: OperatorModel, lam: float, points: list[float], y: Optional[float] = None) -> str:
    """Group splitting in the s-plane: filled circles for the resonance points at
    lambda + iy, open circles for their conjugates (anti-resonance points)."""
    pts = []
    for r in points:
        gs = group_splitting(m, lam, r, y=y)
        for rz, k in gs.split_points:
            pts.extend([complex(rz)] * int(k))
    xs = [p.real for p in pts] + [r for r in points] or [0.0]
    ys = [p.imag for p in pts] + [-p.imag for p in pts] + [0.0]
    px, py, (x0, x1, _, _) = _axes(xs, ys)
    body = [f'<line x1="{px(x0):.2f}" y1="{py(0):.2f}" x2="{px(x1):.2f}" y2="{py(0):.2f}" stroke="gray"/>']
    for r in points:
        body.append(f'<line class="real-point" x1="{px(r):.2f}" y1="{py(0) - 6:.2f}" '
                    f'x2="{px(r):.2f}" y2="{py(0) + 6:.2f}" stroke="black"/>')
    for p in pts:
        body.append(f'<circle class="resonance" cx="{px(p.real):.2f}" cy="{py(p.imag):.2f}" r="4" fill="black"/>')
        body.append(f'<circle class="anti-resonance" cx="{px(p.real):.2f}" cy="{py(-p.imag):.2f}" r="4" '
                    f'fill="none" stroke="black"/>')
    return _svg(body, f"splitting at lambda={lam!r}")


def trajectories_svg(p: FinitePencil, lam: float, a: float, b: float, grid: int = 200) -> str:
    """Eigenvalues of H_r against r on [a, b], with the level lambda dashed."""
    rs = np.linspace(a, b, grid)
    ev = np.array([np.linalg.eigvalsh(p.H(r)) for r in rs])
    px, py, (x0, x1, _, _) = _axes(list(rs), list(ev.ravel()) + [lam])
    body = [f'<line class="level" x1="{px(x0):.2f}" y1="{py(lam):.2f}" x2="{px(x1):.2f}" '
            f'y2="{py(lam):.2f}" stroke="gray" stroke-dasharray="4 3"/>']
    for k in range(ev.shape[1]):
        path = " ".join(f"{px(r):.2f},{py(v):.2f}" for r, v in zip(rs, ev[:, k]))
        body.append(f'<polyline class="eigenvalue" points="{path}" fill="none" stroke="black"/>')
    return _svg(body, f"eigenvalues of H_r, lambda={lam!r}")


__all__ = ["to_jsonable", "dumps", "parse_model", "load_model", "model_to_dict", "model_digest",
           "builtin_model", "triple_crossing_pencil", "four_level_pencil", "point_record", "flow_report",
           "point_report", "sweep_rows", "csv_text", "parse_grid", "splitting_svg",
           "trajectories_svg", "CSV_HEADER"]
