"""Output-noise curves: (setpoint, output) samples at one frequency, and CSV I/O."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import SchemaError
from ..paramp import CompressionCurve
from ..quanta import E_CHARGE, H, K_B, quanta_from_psd

CSV_COLUMNS = ("frequency_hz", "setpoint", "setpoint_unit", "output", "output_unit")
SETPOINT_UNITS = {"V": "sntj", "K": "vts"}


@dataclass
class NoiseCurve:
    """Output noise (quanta) versus source setpoint at a fixed frequency.

    Setpoints are junction bias voltages (``setpoint_unit="V"``, SNTJ) or
    stage temperatures (``"K"``, VTS).  An optional compression curve
    describes the bias-dependent gain of a saturating first amplifier.
    """

    frequency: float
    setpoints: np.ndarray
    outputs: np.ndarray
    setpoint_unit: str = "V"
    lambda_curve: CompressionCurve | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (np.isfinite(self.frequency) and self.frequency > 0):
            raise ValueError("frequency must be finite and > 0")
        if self.setpoint_unit not in SETPOINT_UNITS:
            raise ValueError(f"setpoint_unit must be one of {sorted(SETPOINT_UNITS)}")
        x = np.asarray(self.setpoints, float)
        y = np.asarray(self.outputs, float)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValueError("setpoints and outputs must be 1-D of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("setpoints and outputs must be finite")
        d = np.diff(x)
        if x.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("setpoints must be strictly monotone")
        if self.setpoint_unit == "K" and np.any(x < 0):
            raise ValueError("temperatures must be >= 0")
        self.setpoints, self.outputs = x, y

    @property
    def source_kind(self):
        return SETPOINT_UNITS[self.setpoint_unit]

    def __len__(self):
        return self.setpoints.size

    def input_quanta_classical(self, center=0.0):
        """Classical input per mode: ``e|V - c|/(2hf)`` or ``k_B T/(hf)``."""
        if self.source_kind == "sntj":
            return E_CHARGE * np.abs(self.setpoints - center) / (2 * H * self.frequency)
        return K_B * self.setpoints / (H * self.frequency)

    def window(self, half_width, center=0.0):
        """Subset whose classical input lies within `half_width` quanta of the center."""
        keep = self.input_quanta_classical(center) <= half_width * (1 + 1e-12)
        return replace(self, setpoints=self.setpoints[keep], outputs=self.outputs[keep],
                       metadata=dict(self.metadata))

    def subset(self, mask):
        return replace(self, setpoints=self.setpoints[mask], outputs=self.outputs[mask],
                       metadata=dict(self.metadata))


def _fmt(x):
    return repr(float(x))


def write_curves_csv(curves, path):
    """Write one or more curves to a single CSV (outputs in quanta)."""
    if isinstance(curves, NoiseCurve):
        curves = [curves]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for c in curves:
            for x, y in zip(c.setpoints, c.outputs):
                w.writerow([_fmt(c.frequency), _fmt(x), c.setpoint_unit, _fmt(y), "quanta"])


def read_curves_csv(path):
    """Read a curve CSV; rows are grouped by frequency in order of first appearance.

    Outputs tagged ``w_per_hz`` are converted to quanta at the row frequency.
    Raises :class:`SchemaError` with a row location on malformed input.
    """
    groups = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in CSV_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise SchemaError(f"missing columns {missing}", f"{path}: header")
        for lineno, row in enumerate(reader, start=2):
            where = f"{path}: line {lineno}"
            try:
                f = float(row["frequency_hz"])
                x = float(row["setpoint"])
                y = float(row["output"])
            except (TypeError, ValueError):
                raise SchemaError("non-numeric field", where) from None
            unit = (row["setpoint_unit"] or "").strip()
            if unit not in SETPOINT_UNITS:
                raise SchemaError(f"setpoint_unit must be V or K, got {unit!r}", where)
            out_unit = (row["output_unit"] or "").strip()
            if out_unit == "w_per_hz":
                if not (f > 0 and y >= 0):
                    raise SchemaError("invalid power or frequency", where)
                y = quanta_from_psd(y, f)
            elif out_unit != "quanta":
                raise SchemaError(f"output_unit must be quanta or w_per_hz, got {out_unit!r}", where)
            g = groups.setdefault(f, {"unit": unit, "x": [], "y": [], "line": lineno})
            if g["unit"] != unit:
                raise SchemaError("mixed setpoint units within one frequency", where)
            g["x"].append(x)
            g["y"].append(y)
    if not groups:
        raise SchemaError("no data rows", str(path))
    curves = []
    for f, g in groups.items():
        try:
            curves.append(NoiseCurve(f, np.array(g["x"]), np.array(g["y"]), g["unit"]))
        except ValueError as exc:
            raise SchemaError(str(exc), f"{path}: frequency {f!r}") from None
    return curves
