"""JSON schema parsing and deterministic CSV/JSON artifact writing."""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .chidensity import WeightedChiSquare
from .errors import ValidationError
from .integraltest import PhiFamily
from .sequences import CovarianceSequence, CutoffFamily, DiscreteDistribution
from .spectral import Spectrum


def parse_matrix(obj) -> np.ndarray:
    """Row-major nested arrays, or an object with an 'entries' field."""
    if isinstance(obj, dict):
        if "entries" not in obj:
            raise ValidationError("matrix object must carry 'entries'")
        obj = obj["entries"]
    try:
        m = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"matrix entries are not numeric: {e}") from None
    if m.ndim != 2:
        raise ValidationError(f"matrix must be 2-dimensional, got shape {m.shape}")
    return m


def parse_weights_or_matrix(cfg: dict) -> WeightedChiSquare:
    if "weights" in cfg:
        return WeightedChiSquare.from_weights(cfg["weights"])
    if "matrix" in cfg:
        from .spectral import eigh

        return WeightedChiSquare.from_spectrum(eigh(parse_matrix(cfg["matrix"])))
    raise ValidationError("config needs either 'weights' or 'matrix'")


def parse_grid(obj, name: str) -> np.ndarray:
    """Either an explicit list or {min, max, count, spacing: log|linear}."""
    if isinstance(obj, list):
        g = np.asarray(obj, dtype=float)
        if g.size == 0:
            raise ValidationError(f"grid '{name}' is empty")
        return g
    if isinstance(obj, dict):
        missing = [k for k in ("min", "max", "count") if k not in obj]
        if missing:
            raise ValidationError(f"grid '{name}' missing fields: {missing}")
        spacing = obj.get("spacing", "log")
        if spacing == "log":
            return np.geomspace(float(obj["min"]), float(obj["max"]), int(obj["count"]))
        if spacing == "linear":
            return np.linspace(float(obj["min"]), float(obj["max"]), int(obj["count"]))
        raise ValidationError(f"grid '{name}': unknown spacing {spacing!r}")
    raise ValidationError(f"grid '{name}' must be a list or a range object")


def parse_phi(obj: dict) -> PhiFamily:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValidationError("phi family must be an object with a 'kind'")
    kind = obj["kind"]
    if kind == "parametric":
        return PhiFamily(
            kind="parametric",
            a=float(obj.get("a", 0.0)),
            b=float(obj.get("b", 0.0)),
            clamp=bool(obj.get("clamp", False)),
        )
    if kind == "tabulated":
        if "values" not in obj:
            raise ValidationError("tabulated phi family needs 'values'")
        env = obj.get("envelope")
        return PhiFamily(
            kind="tabulated",
            values=tuple(float(x) for x in obj["values"]),
            clamp=bool(obj.get("clamp", False)),
            envelope=tuple(float(x) for x in env) if env else None,
        )
    raise ValidationError(f"unknown phi family kind {kind!r}")


def parse_distribution(obj: dict) -> DiscreteDistribution:
    if not isinstance(obj, dict) or "atoms" not in obj:
        raise ValidationError("distribution must be an object with 'atoms'")
    pts, probs = [], []
    for i, atom in enumerate(obj["atoms"]):
        if "point" not in atom or "prob" not in atom:
            raise ValidationError(f"atom {i} needs 'point' and 'prob'")
        pts.append([float(x) for x in atom["point"]])
        probs.append(float(atom["prob"]))
    return DiscreteDistribution(points=np.asarray(pts), probs=np.asarray(probs))


def parse_cutoff(obj: dict) -> CutoffFamily:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValidationError("cutoff family must be an object with a 'kind'")
    kind = obj["kind"]
    if kind == "sqrt_n":
        g = obj.get("g_table")
        return CutoffFamily(
            kind="sqrt_n",
            scale=float(obj.get("scale", 1.0)),
            g_table=tuple(float(x) for x in g) if g else None,
        )
    if kind == "constant":
        if "value" not in obj:
            raise ValidationError("constant cutoff needs 'value'")
        return CutoffFamily(kind="constant", value=float(obj["value"]))
    raise ValidationError(f"unknown cutoff kind {kind!r}")


def parse_sequence(obj: dict) -> CovarianceSequence:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValidationError("sequence must be an object with a 'kind'")
    kind = obj["kind"]
    if kind == "constant":
        if "matrix" not in obj:
            raise ValidationError("constant sequence needs 'matrix'")
        return CovarianceSequence.constant(parse_matrix(obj["matrix"]))
    if kind == "tabulated":
        if "matrices" not in obj:
            raise ValidationError("tabulated sequence needs 'matrices'")
        return CovarianceSequence.tabulated([parse_matrix(m) for m in obj["matrices"]])
    if kind == "truncated":
        missing = [k for k in ("distribution", "cutoff") if k not in obj]
        if missing:
            raise ValidationError(f"truncated sequence missing fields: {missing}")
        return CovarianceSequence.truncated(
            parse_distribution(obj["distribution"]), parse_cutoff(obj["cutoff"])
        )
    raise ValidationError(f"unknown sequence kind {kind!r}")


# ---------------------------------------------------------------------------
# Deterministic artifact writing
# ---------------------------------------------------------------------------


def format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def atomic_write_text(path: str | Path, text: str) -> None:
    """Single-writer atomic write via temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str | Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(format_cell(v) for v in row) for row in rows)
    atomic_write_text(path, "\n".join(lines) + "\n")


def dump_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def write_json(path: str | Path, payload: dict) -> None:
    atomic_write_text(path, dump_json(payload))


def spectrum_csv_rows(s: Spectrum) -> list[tuple[int, float, int]]:
    """Rows (index, eigenvalue, group_id) for the frozen spectrum export."""
    rows = []
    idx = 0
    for gid, (_, mult) in enumerate(s.groups):
        for _ in range(mult):
            rows.append((idx, float(s.eigenvalues[idx]), gid))
            idx += 1
    return rows
