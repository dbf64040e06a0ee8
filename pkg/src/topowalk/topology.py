"""Winding numbers, gapless structure, group velocity and the L asymptote."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bloch
from .bloch import GAP_TOL, half_angle
from .errors import DegeneratePoint, NonIntegerWinding

TWO_PI = 2.0 * math.pi

# theta is gapless when |theta T / 2pi - m| < GAPLESS_TOL for an integer m
GAPLESS_TOL = 1e-9
NON_INTEGER_TOL = 1e-3

E0 = "E0"
EPI = "Epi"


@dataclass(frozen=True)
class GaplessPoint:
    """Coin angle 2 pi m / T where the bands touch at k = 0 and k = +-pi."""

    theta: float
    index_m: int
    closing_at_k0: str
    closing_at_kpi: str

    @classmethod
    def from_index(cls, T: int, m: int) -> "GaplessPoint":
        if m % 2 == 0:
            return cls(TWO_PI * m / T, m, E0, EPI)
        return cls(TWO_PI * m / T, m, EPI, E0)


@dataclass(frozen=True)
class PhaseRegion:
    index_m: int
    theta_min: float
    theta_max: float
    winding: int
    left_boundary: GaplessPoint
    right_boundary: GaplessPoint

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.theta_min + self.theta_max)


@dataclass
class PhaseDiagram:
    T: int
    regions: list[PhaseRegion]
    gapless: list[GaplessPoint]
    verified_windings: list[float] | None = field(default=None)

    def windings(self) -> list[int]:
        return [r.winding for r in self.regions]


def _check_steps(T: int) -> int:
    if int(T) != T or T < 1:
        raise ValueError(f"step count must be a positive integer, got {T!r}")
    return int(T)


def gapless_index(T, theta) -> int | None:
    """The m with theta = 2 pi m / T, or None when theta is inside a phase."""
    x = theta * T / TWO_PI
    m = round(x)
    if abs(x - m) < GAPLESS_TOL:
        return int(m)
    return None


def is_gapless(T, theta) -> bool:
    return gapless_index(T, theta) is not None


def group_velocity(T, theta, k, band: int = +1, strict: bool = True):
    """V(k) = dE/dk = +-cos a sin k / sqrt(1 - (cos a cos k)^2), a = T theta / 2.

    ``band`` is +1 for the positive branch, -1 for the negative one.
    """
    if band not in (1, -1):
        raise ValueError("band must be +1 or -1")
    c = np.cos(half_angle(T, theta))
    k = np.asarray(k, dtype=float)
    sin_e = bloch.gap_sine(T, theta, k)
    bad = sin_e < GAP_TOL
    if strict and np.any(bad):
        raise DegeneratePoint(f"group velocity undefined at T={T}, theta={theta}, k={k}")
    with np.errstate(divide="ignore", invalid="ignore"):
        return band * c * np.sin(k) / np.where(bad, np.nan, sin_e)


def _winding_integrand(T, theta, k):
    """(n x dn/dk) . A with dn/dk differentiated analytically."""
    a = half_angle(T, theta)
    c, s = np.cos(a), np.sin(a)
    sk, ck = np.sin(k), np.cos(k)
    energy, sin_e, v = bloch._bloch_parts(T, theta, k)
    if np.any(sin_e < GAP_TOL):
        raise DegeneratePoint(f"winding undefined: bands touch at T={T}, theta={theta}")
    n = v / sin_e[..., None]
    dv = np.stack([s * ck, -s * sk, -c * ck], axis=-1)
    # d(sin E)/dk = cos E * dE/dk = cos E * c sin k / sin E
    dsin_e = np.cos(energy) * c * sk / sin_e
    dn = dv / sin_e[..., None] - v * (dsin_e / sin_e**2)[..., None]
    return np.cross(n, dn) @ bloch.chiral_axis(T, theta)


def winding_integral(T, theta, resolution: int = 4096) -> float:
    """Trapezoid estimate of the winding of n(k) about the chiral axis.

    On the periodic grid k_j = -pi + 2 pi j / N the trapezoid rule reduces to
    the sample mean. Resolution 256 or more is needed near phase edges.
    """
    T = _check_steps(T)
    if resolution < 4:
        raise ValueError("resolution must be at least 4")
    if is_gapless(T, theta):
        raise DegeneratePoint(f"theta={theta} is a gapless angle for T={T}")
    k = np.linspace(-math.pi, math.pi, resolution, endpoint=False)
    value = float(np.mean(_winding_integrand(T, theta, k)))
    if abs(value - round(value)) > NON_INTEGER_TOL:
        raise NonIntegerWinding(
            f"winding {value:.6g} at T={T}, theta={theta} is not an integer "
            f"(resolution {resolution})"
        )
    return value


def winding_rule(T, theta) -> int:
    """Closed-form winding: -1 for even m = floor(theta T / 2 pi), +1 for odd m."""
    T = _check_steps(T)
    if is_gapless(T, theta):
        raise DegeneratePoint(f"theta={theta} is a gapless angle for T={T}")
    m = math.floor(theta * T / TWO_PI)
    return 1 if m % 2 else -1


def gapless_angles(T: int) -> list[GaplessPoint]:
    """All T+1 gapless angles in [0, 2 pi], ordered."""
    T = _check_steps(T)
    return [GaplessPoint.from_index(T, m) for m in range(T + 1)]


def flat_band_angles(T: int, c_max: int | None = None) -> list[float]:
    """Angles with cos(T theta/2) = 0, i.e. (pi + 2 pi c)/T inside [0, 2 pi].

    ``c_max`` optionally caps the integer c.
    """
    T = _check_steps(T)
    out = []
    c = 0
    while c_max is None or c <= c_max:
        theta = (math.pi + TWO_PI * c) / T
        if theta > TWO_PI:
            break
        out.append(theta)
        c += 1
    return out


def phase_diagram(T: int, verify: bool = False, resolution: int = 4096) -> PhaseDiagram:
    """Split [0, 2 pi] into the T open phases between gapless angles.

    With ``verify`` every region's winding is recomputed by integration at its
    midpoint; a mismatch raises NonIntegerWinding.
    """
    T = _check_steps(T)
    points = gapless_angles(T)
    regions = []
    for m in range(T):
        left, right = points[m], points[m + 1]
        mid = 0.5 * (left.theta + right.theta)
        regions.append(PhaseRegion(m, left.theta, right.theta, winding_rule(T, mid), left, right))
    diagram = PhaseDiagram(T, regions, points)
    if verify:
        values = [winding_integral(T, r.midpoint, resolution) for r in regions]
        for r, v in zip(regions, values):
            if round(v) != r.winding:
                raise NonIntegerWinding(
                    f"region m={r.index_m} of T={T}: integral {v:.6g} != rule {r.winding}"
                )
        diagram.verified_windings = values
    return diagram


def l_analytic(T, theta):
    """Asymptote L = 1 - |sin(T theta / 2)| of M2 / T^2."""
    return 1.0 - np.abs(np.sin(half_angle(T, theta)))


def velocity_squared(T, theta, k):
    """V(k)^2 with gapless samples replaced by their limit 1."""
    c = np.cos(half_angle(T, theta))
    k = np.asarray(k, dtype=float)
    den = bloch.gap_sine(T, theta, k) ** 2
    num = (c * np.sin(k)) ** 2
    bad = den < GAP_TOL**2
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(bad, 1.0, num / np.where(bad, 1.0, den))


def l_quadrature(T, theta, resolution: int = 4096):
    """Trapezoid value of the integral of V(k)^2 dk / 2 pi over the zone.

    ``theta`` may be an array; the k axis is appended last.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    k = np.linspace(-math.pi, math.pi, resolution, endpoint=False)
    theta = np.asarray(theta, dtype=float)
    return np.mean(velocity_squared(T, theta[..., None], k), axis=-1)


def transition_points(T: int, step: float = 1e-5) -> list[float]:
    """Kinks of L(theta) on [0, 2 pi], located numerically.

    Scans finite-difference slopes of ``l_analytic`` for jumps larger than
    T/2, then refines each bracket by ternary search on the kink maximum.
    """
    T = _check_steps(T)
    grid = np.arange(-3 * step, TWO_PI + 3 * step, step)
    values = l_analytic(T, grid)
    slopes = np.diff(values) / step
    jumps = np.abs(slopes[2:] - slopes[:-2]) > T / 2
    idx = np.flatnonzero(jumps)
    if idx.size == 0:
        return []
    clusters = np.split(idx, np.flatnonzero(np.diff(idx) > 3) + 1)
    points = []
    for cl in clusters:
        lo, hi = grid[cl[0]], grid[min(cl[-1] + 3, grid.size - 1)]
        for _ in range(200):
            m1 = lo + (hi - lo) / 3
            m2 = hi - (hi - lo) / 3
            if l_analytic(T, m1) < l_analytic(T, m2):
                lo = m1
            else:
                hi = m2
            if hi - lo < 1e-15:
                break
        x = 0.5 * (lo + hi)
        if -1e-9 <= x <= TWO_PI + 1e-9:
            points.append(float(min(max(x, 0.0), TWO_PI)))
    return points
