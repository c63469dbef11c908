"""
Shaped-pulse files.

Two formats:

- native: JSON {"basis", "dt_us", "digits": [[c1, c2, ...], ...]} with
  controls in radians per digit, one digit per line, floats written with
  their shortest round-trip representation. Optional keys: "theta_xy_const"
  (phase_only), "constraint" (one limit object, or a list when several limits
  apply; needed to interpret reduced amplitudes) and
  "dt_s" when dt_us / 1e6 would not reproduce the stored durations exactly.
- jcamp: JCAMP-DX style shape with "amplitude_percent, phase_degrees" pairs.
  Amplitudes are relative to ##$SHAPE_MAX_THETA (radians per digit), phases
  lie in [0, 360). Reading one back yields a polar_amp_phase shape.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from app.core.errors import ContractViolation, ShapeParseError
from app.models.problem import (
    AmplitudeLimit,
    Constraint,
    ConstraintSpec,
    EnergyLimit,
    PowerLimit,
    constraint_limits,
    normalize_constraint,
)
from app.models.pulse import BasisKind, ControlBasis, PulseShape
from app.services.controls import amplitude_phase

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

NATIVE = "native"
JCAMP = "jcamp"
FORMATS = (NATIVE, JCAMP)

_JCAMP_SUFFIXES = {".jdx", ".dx", ".jcamp", ".shape"}


def detect_format(path: PathLike) -> str:
    return JCAMP if Path(path).suffix.lower() in _JCAMP_SUFFIXES else NATIVE


def _limit_to_json(spec: ConstraintSpec) -> Dict[str, Any]:
    if isinstance(spec, AmplitudeLimit):
        return {"type": "amplitude", "theta_max": spec.theta_max.tolist()}
    if isinstance(spec, PowerLimit):
        return {"type": "power", "p_max_avg": spec.p_max_avg}
    return {"type": "energy", "e_theta_max": spec.e_theta_max}


def _constraint_to_json(constraint: Optional[Constraint]) -> Any:
    """One object for a single limit, a list for several."""
    limits = constraint_limits(constraint)
    if not limits:
        return None
    if len(limits) == 1:
        return _limit_to_json(limits[0])
    return [_limit_to_json(limit) for limit in limits]


def _limit_from_json(data: Any, line: Optional[int]) -> ConstraintSpec:
    try:
        kind = data["type"]
        if kind == "amplitude":
            return AmplitudeLimit(np.array(data["theta_max"], dtype=np.float64))
        if kind == "power":
            return PowerLimit(data["p_max_avg"])
        if kind == "energy":
            return EnergyLimit(data["e_theta_max"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ShapeParseError(f"invalid constraint: {exc}", line) from exc
    raise ShapeParseError(f"unknown constraint type {kind!r}", line)


def _constraint_from_json(data: Any, line: Optional[int]) -> Optional[Constraint]:
    if data is None:
        return None
    if isinstance(data, list):
        return normalize_constraint([_limit_from_json(item, line) for item in data])
    return _limit_from_json(data, line)


def native_text(shape: PulseShape, constraint: Optional[Constraint] = None) -> str:
    dt = shape.dt
    uniform = bool(np.all(dt == dt[0]))
    dt_us = float(dt[0]) * 1e6 if uniform else [float(v) * 1e6 for v in dt]
    lines = ["{", f'  "basis": {json.dumps(shape.basis.name)},']
    if shape.basis.theta_xy_const is not None:
        lines.append(f'  "theta_xy_const": {json.dumps(shape.basis.theta_xy_const)},')
    lines.append(f'  "dt_us": {json.dumps(dt_us)},')
    if not np.array_equal(np.asarray(dt_us, dtype=np.float64) / 1e6, dt):
        lines.append(f'  "dt_s": {json.dumps(float(dt[0]) if uniform else dt.tolist())},')
    if constraint is not None:
        lines.append(f'  "constraint": {json.dumps(_constraint_to_json(constraint))},')
    rows = [f"    {json.dumps([float(c) for c in row])}" for row in shape.controls]
    lines.append('  "digits": [')
    lines.append(",\n".join(rows))
    lines.append("  ]")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _key_line(text: str, key: str) -> Optional[int]:
    needle = f'"{key}"'
    for number, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return number
    return None


def parse_native(text: str) -> Tuple[PulseShape, Optional[Constraint]]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ShapeParseError(exc.msg, exc.lineno) from exc
    if not isinstance(data, dict):
        raise ShapeParseError("shape document must be a JSON object", 1)
    for key in ("basis", "dt_us", "digits"):
        if key not in data:
            raise ShapeParseError(f"missing key {key!r}", 1)
    unknown = set(data) - {"basis", "dt_us", "dt_s", "digits", "theta_xy_const", "constraint"}
    if unknown:
        key = sorted(unknown)[0]
        raise ShapeParseError(f"unknown key {key!r}", _key_line(text, key))

    try:
        basis = ControlBasis.from_name(data["basis"], data.get("theta_xy_const"))
    except (ContractViolation, TypeError) as exc:
        raise ShapeParseError(str(exc), _key_line(text, "basis")) from exc

    digits = data["digits"]
    digits_line = _key_line(text, "digits")
    if not isinstance(digits, list) or not digits:
        raise ShapeParseError("digits must be a non-empty list", digits_line)
    text_lines = text.splitlines()
    for index, row in enumerate(digits):
        if not isinstance(row, list) or len(row) != basis.arity or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in row
        ):
            line = digits_line
            if digits_line is not None and digits_line + index < len(text_lines):
                if text_lines[digits_line + index].strip().startswith("["):
                    line = digits_line + 1 + index
            raise ShapeParseError(f"digit {index} must hold {basis.arity} numbers for {basis.name}", line)

    key = "dt_s" if "dt_s" in data else "dt_us"
    try:
        dt = np.asarray(data[key], dtype=np.float64)
        if key == "dt_us":
            dt = dt / 1e6
        shape = PulseShape(np.array(digits, dtype=np.float64), dt, basis)
    except (ContractViolation, TypeError, ValueError) as exc:
        raise ShapeParseError(str(exc), _key_line(text, key)) from exc
    constraint = _constraint_from_json(data.get("constraint"), _key_line(text, "constraint"))
    return shape, constraint


def jcamp_text(
    shape: PulseShape,
    constraint: Optional[Constraint] = None,
    title: str = "pulse",
) -> str:
    if not np.all(shape.dt == shape.dt[0]):
        raise ContractViolation("JCAMP export needs a uniform digit duration")
    amplitude, phase = amplitude_phase(shape, constraint)
    peak = float(np.max(amplitude))
    percent = np.zeros_like(amplitude) if peak == 0.0 else 100.0 * amplitude / peak
    degrees = np.round(np.mod(np.degrees(phase), 360.0), 6)
    degrees[degrees >= 360.0] = 0.0
    lines = [
        f"##TITLE= {title}",
        "##JCAMP-DX= 5.00",
        "##DATA TYPE= Shape Data",
        f"##$SHAPE_MAX_THETA= {peak!r}",
        f"##$DT_US= {float(shape.dt[0]) * 1e6!r}",
        f"##NPOINTS= {shape.n_digits}",
        "##XYPOINTS= (XY..XY)",
    ]
    lines.extend(f"{a:.6f}, {p:.6f}" for a, p in zip(percent, degrees))
    lines.append("##END=")
    return "\n".join(lines) + "\n"


def parse_jcamp(text: str) -> PulseShape:
    headers: Dict[str, Tuple[str, int]] = {}
    points: List[Tuple[float, float]] = []
    in_data = False
    ended = False
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("$$"):
            continue
        if line.startswith("##"):
            key, sep, value = line[2:].partition("=")
            if not sep:
                raise ShapeParseError(f"malformed header {line!r}", number)
            key = key.strip().upper()
            if key == "END":
                ended = True
                break
            headers[key] = (value.strip(), number)
            in_data = key == "XYPOINTS"
            continue
        if not in_data:
            raise ShapeParseError(f"data line outside ##XYPOINTS: {line!r}", number)
        parts = [p for p in line.replace(",", " ").split() if p]
        if len(parts) != 2:
            raise ShapeParseError(f"expected 'amplitude, phase', got {line!r}", number)
        try:
            points.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ShapeParseError(f"non-numeric data {line!r}", number) from exc
    if not ended:
        raise ShapeParseError("missing ##END=", len(text.splitlines()))

    def header(key: str) -> Tuple[float, int]:
        if key not in headers:
            raise ShapeParseError(f"missing ##{key}=", None)
        value, number = headers[key]
        try:
            return float(value), number
        except ValueError as exc:
            raise ShapeParseError(f"##{key} is not a number: {value!r}", number) from exc

    npoints, npoints_line = header("NPOINTS")
    if int(npoints) != len(points):
        raise ShapeParseError(f"##NPOINTS={int(npoints)} but {len(points)} data lines", npoints_line)
    peak, _ = header("$SHAPE_MAX_THETA")
    dt_us, dt_line = header("$DT_US")
    if not points:
        raise ShapeParseError("shape has no points", npoints_line)
    data = np.array(points)
    controls = np.column_stack([data[:, 0] / 100.0 * peak, np.radians(data[:, 1])])
    try:
        return PulseShape(controls, dt_us / 1e6, ControlBasis(BasisKind.POLAR_AMP_PHASE))
    except ContractViolation as exc:
        raise ShapeParseError(str(exc), dt_line) from exc


def write_shape(
    shape: PulseShape,
    path: PathLike,
    fmt: Optional[str] = None,
    constraint: Optional[Constraint] = None,
    title: str = "pulse",
) -> Path:
    path = Path(path)
    fmt = fmt or detect_format(path)
    if fmt == NATIVE:
        text = native_text(shape, constraint)
    elif fmt == JCAMP:
        text = jcamp_text(shape, constraint, title)
    else:
        raise ContractViolation(f"unknown shape format {fmt!r}; expected one of {FORMATS}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info("Wrote %s shape with %d digits to %s", fmt, shape.n_digits, path)
    return path


def load_shape(path: PathLike, fmt: Optional[str] = None) -> Tuple[PulseShape, Optional[Constraint]]:
    """Shape and, for native files, the constraint stored alongside it."""
    path = Path(path)
    fmt = fmt or detect_format(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ShapeParseError(f"cannot read {path}: {exc}") from exc
    if fmt == NATIVE:
        return parse_native(text)
    if fmt == JCAMP:
        return parse_jcamp(text), None
    raise ContractViolation(f"unknown shape format {fmt!r}; expected one of {FORMATS}")


def read_shape(path: PathLike, fmt: Optional[str] = None) -> PulseShape:
    return load_shape(path, fmt)[0]
