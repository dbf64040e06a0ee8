"""CSV / JSON assembly for the command-line front end.

Everything here builds text in memory; the caller writes it once. Floats are
written with ``repr`` so that parsing the file gives back the same doubles.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict

import numpy as np

from .bloch import quasi_energy
from .topology import PhaseDiagram, group_velocity, is_gapless, winding_integral, winding_rule

BANDS_HEADER = ("k", "E_plus", "E_minus", "V_plus", "V_minus")
WINDING_HEADER = ("theta", "winding_integral", "winding_rule")
SIMULATE_HEADER = ("position", "probability")
MOMENTS_HEADER = (
    "T",
    "theta",
    "m1",
    "m2",
    "m2_over_T2",
    "l_value",
    "deviation",
    "m2_over_T2_second",
    "spread",
)


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return ""
    return repr(value)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def to_json(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def k_grid(samples: int) -> np.ndarray:
    """Uniform grid on [-pi, pi), right endpoint excluded."""
    return np.linspace(-math.pi, math.pi, samples, endpoint=False)


def bands_rows(T: int, theta: float, k_samples: int):
    k = k_grid(k_samples)
    energy = quasi_energy(T, theta, k)
    v = group_velocity(T, theta, k, strict=False)
    rows = []
    for kk, e, vv in zip(k, energy, v):
        vp = None if math.isnan(vv) else float(vv)
        vm = None if vp is None else -vp
        rows.append((float(kk), float(e), -float(e), vp, vm))
    return rows


def bands_csv(T: int, theta: float, k_samples: int) -> str:
    return to_csv(BANDS_HEADER, bands_rows(T, theta, k_samples))


def bands_json(T: int, theta: float, k_samples: int) -> str:
    rows = bands_rows(T, theta, k_samples)
    return to_json({"T": T, "theta": theta, "rows": [dict(zip(BANDS_HEADER, r)) for r in rows]})


def phase_diagram_doc(diagram: PhaseDiagram) -> dict:
    regions = []
    for i, r in enumerate(diagram.regions):
        entry = {
            "m": r.index_m,
            "theta_min": r.theta_min,
            "theta_max": r.theta_max,
            "winding": r.winding,
            "boundaries": [
                {"theta": b.theta, "closing_k0": b.closing_at_k0, "closing_kpi": b.closing_at_kpi}
                for b in (r.left_boundary, r.right_boundary)
            ],
        }
        if diagram.verified_windings is not None:
            entry["winding_integral"] = diagram.verified_windings[i]
        regions.append(entry)
    return {"T": diagram.T, "regions": regions}


def winding_row(T: int, theta: float, resolution: int):
    """(theta, integral, rule); the last two are None at a gapless angle."""
    if is_gapless(T, theta):
        return (theta, None, None)
    return (theta, winding_integral(T, theta, resolution), winding_rule(T, theta))


def moments_rows(reports):
    return [tuple(asdict(r)[h] for h in MOMENTS_HEADER) for r in reports]
