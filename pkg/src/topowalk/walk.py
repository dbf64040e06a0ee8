"""Position-space simulation of the step-dependent-coin walk.

Two protocols are available:

* ``"step"`` -- step t applies the coin with rotation parameter t*theta
  (the step-dependent walk proper; it Bloch-oscillates).
* ``"floquet"`` -- every one of the T steps applies the coin with parameter
  T*theta, i.e. ``(S C)^T`` for the fixed period unitary whose band structure
  the momentum-space modules describe. The M2 / T^2 -> L asymptote refers to
  this walk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NormalizationError, StepOrderError
from .topology import TWO_PI, l_analytic

NORM_TOL = 1e-12
# probabilities at or below this are treated as round-off and dropped
ZERO_PROB = 1e-24
PROTOCOLS = ("step", "floquet")


@dataclass(frozen=True)
class InitialCoinSpec:
    """Coin amplitudes at x = 0: alpha |0> + beta |1>."""

    alpha: complex = 1 / math.sqrt(2)
    beta: complex = 1j / math.sqrt(2)

    def norm_error(self) -> float:
        return abs(abs(self.alpha) ** 2 + abs(self.beta) ** 2 - 1.0)


DEFAULT_SPEC = InitialCoinSpec()
SECOND_SPEC = InitialCoinSpec(1.0, 0.0)


@dataclass
class WalkerState:
    """Amplitudes over x in [-T, T] (row x + T) and two coin levels (columns)."""

    T_capacity: int
    amplitudes: np.ndarray
    steps_done: int = 0

    @property
    def positions(self) -> np.ndarray:
        return np.arange(-self.T_capacity, self.T_capacity + 1)

    def probabilities(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=1)

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


@dataclass(frozen=True)
class MomentReport:
    T: int
    theta: float
    m1: float
    m2: float
    m2_over_T2: float
    l_value: float
    deviation: float
    # same quantities for the comparison initial state
    m2_over_T2_second: float
    spread: float


def make_initial(spec: InitialCoinSpec, T: int) -> WalkerState:
    if spec.norm_error() > NORM_TOL:
        raise NormalizationError(
            f"|alpha|^2 + |beta|^2 = {abs(spec.alpha)**2 + abs(spec.beta)**2!r}, expected 1"
        )
    if int(T) != T or T < 1:
        raise ValueError(f"step capacity must be a positive integer, got {T!r}")
    amps = np.zeros((2 * T + 1, 2), dtype=complex)
    amps[T] = spec.alpha, spec.beta
    return WalkerState(int(T), amps, 0)


def coin_parameter(state: WalkerState, t: int, theta: float, protocol: str) -> float:
    if protocol == "step":
        return t * theta
    if protocol == "floquet":
        return state.T_capacity * theta
    raise ValueError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")


def evolve_step(state: WalkerState, t: int, theta: float, protocol: str = "step") -> WalkerState:
    """Apply coin then shift for step ``t`` (1-based), in place.

    Coin-0 amplitude moves to x+1, coin-1 amplitude to x-1.
    """
    if state.steps_done != t - 1:
        raise StepOrderError(f"step {t} requested but {state.steps_done} steps done")
    if not 1 <= t <= state.T_capacity:
        raise StepOrderError(f"step {t} outside 1..{state.T_capacity}")
    a = 0.5 * coin_parameter(state, t, theta, protocol)
    c, s = math.cos(a), math.sin(a)
    up = c * state.amplitudes[:, 0] - s * state.amplitudes[:, 1]
    down = s * state.amplitudes[:, 0] + c * state.amplitudes[:, 1]
    amps = state.amplitudes
    amps[1:, 0] = up[:-1]
    amps[0, 0] = 0.0
    amps[:-1, 1] = down[1:]
    amps[-1, 1] = 0.0
    state.steps_done = t
    return state


def run_walk(
    T: int,
    theta: float,
    spec: InitialCoinSpec = DEFAULT_SPEC,
    protocol: str = "step",
) -> WalkerState:
    state = make_initial(spec, T)
    for t in range(1, T + 1):
        evolve_step(state, t, theta, protocol)
    return state


def distribution(state: WalkerState) -> list[tuple[int, float]]:
    """Nonzero (position, probability) pairs in increasing position."""
    probs = state.probabilities()
    return [(int(x), float(p)) for x, p in zip(state.positions, probs) if p > ZERO_PROB]


def moment(state: WalkerState, order: int) -> float:
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    return float(np.sum(state.positions.astype(float) ** order * state.probabilities()))


def m2_scan(
    theta: float,
    T_list,
    spec: InitialCoinSpec = DEFAULT_SPEC,
    second_spec: InitialCoinSpec = SECOND_SPEC,
    protocol: str = "floquet",
    gap_margin: float = 1e-3,
) -> list[MomentReport]:
    """Compare simulated M2 / T^2 with L(T, theta) for each T, sorted by T."""
    for T in T_list:
        step = TWO_PI / T
        dist = abs(theta - step * round(theta / step))
        if dist < gap_margin:
            raise ValueError(
                f"theta={theta} lies within {gap_margin} of a gapless angle for T={T}"
            )
    reports = []
    for T in sorted(T_list):
        state = run_walk(T, theta, spec, protocol)
        other = run_walk(T, theta, second_spec, protocol)
        m2 = moment(state, 2)
        ratio = m2 / T**2
        ratio2 = moment(other, 2) / T**2
        l_value = float(l_analytic(T, theta))
        reports.append(
            MomentReport(
                T=T,
                theta=theta,
                m1=moment(state, 1),
                m2=m2,
                m2_over_T2=ratio,
                l_value=l_value,
                deviation=abs(ratio - l_value),
                m2_over_T2_second=ratio2,
                spread=abs(ratio - ratio2),
            )
        )
    return reports
