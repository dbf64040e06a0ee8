"""Momentum-space step unitary of the step-dependent-coin walk.

The coin at step count T is a real rotation by T*theta/2 and the shift is
diag(e^{ik}, e^{-ik}), so the one-period unitary is

    U(k) = S(k) C(T, theta) = cos E - i sin E (n . sigma),
    cos E = cos(T theta / 2) cos k.

Every function broadcasts over ``theta`` and ``k`` (numpy arrays or scalars);
2x2 operators come back with shape ``(..., 2, 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePoint

# a point is gapless when sin(E) falls below this
GAP_TOL = 1e-9

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])


@dataclass(frozen=True)
class BlochDecomposition:
    """Positive quasi-energy band and unit Bloch vector, ``U = exp(-i E n.sigma)``."""

    energy: np.ndarray | float
    n: np.ndarray

    def hamiltonian(self) -> np.ndarray:
        return np.asarray(self.energy)[..., None, None] * dot_sigma(self.n)


def half_angle(T, theta):
    """The coin rotation half-angle T*theta/2."""
    return 0.5 * T * np.asarray(theta, dtype=float)


def dot_sigma(vec) -> np.ndarray:
    """``vec . sigma`` for real 3-vectors stacked along the last axis."""
    vec = np.asarray(vec)
    return np.einsum("...i,ijk->...jk", vec.astype(complex), PAULI)


def coin_unitary(T, theta) -> np.ndarray:
    """Real rotation [[cos a, -sin a], [sin a, cos a]] with a = T*theta/2."""
    a = half_angle(T, theta)
    c, s = np.cos(a), np.sin(a)
    out = np.empty(a.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def shift_unitary(k) -> np.ndarray:
    """Conditional shift in momentum space, diag(e^{ik}, e^{-ik})."""
    k = np.asarray(k, dtype=float)
    out = np.zeros(k.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = np.exp(1j * k)
    out[..., 1, 1] = np.exp(-1j * k)
    return out


def step_unitary(T, theta, k) -> np.ndarray:
    """One shift-coin period ``S(k) @ C(T, theta)``."""
    return shift_unitary(k) @ coin_unitary(T, theta)


def quasi_energy(T, theta, k):
    """Positive band E(k) = arccos(cos(T theta/2) cos k), in [0, pi].

    Evaluated as atan2(sin E, cos E) with sin E taken from ``gap_sine`` so
    that it stays accurate close to the band touchings.
    """
    return _bloch_parts(T, theta, k)[0]


def gap_sine(T, theta, k):
    """sin E(k) = sqrt(sin^2 k + sin^2(T theta/2) cos^2 k), free of cancellation."""
    a = half_angle(T, theta)
    k = np.asarray(k, dtype=float)
    return np.hypot(np.sin(k), np.sin(a) * np.cos(k))


def _bloch_parts(T, theta, k):
    """Return (E, sin E, unnormalised n * sin E) without any gap check."""
    a = half_angle(T, theta)
    k = np.asarray(k, dtype=float)
    c, s = np.cos(a), np.sin(a)
    sk, ck = np.sin(k), np.cos(k)
    sin_e = np.hypot(sk, s * ck)
    energy = np.arctan2(sin_e, c * ck)
    v = np.stack(np.broadcast_arrays(s * sk, s * ck, -c * sk), axis=-1)
    return energy, sin_e, v


def gapless_mask(T, theta, k) -> np.ndarray:
    """True where the bands touch at (theta, k)."""
    _, sin_e, _ = _bloch_parts(T, theta, k)
    return sin_e < GAP_TOL


def bloch_vector(T, theta, k, strict: bool = True) -> BlochDecomposition:
    """Quasi-energy and Bloch vector n(k).

    n = (sin a sin k, sin a cos k, -cos a sin k) / sin E with a = T*theta/2.
    With ``strict`` a gapless sample raises DegeneratePoint; otherwise those
    entries of ``n`` are NaN.
    """
    energy, sin_e, v = _bloch_parts(T, theta, k)
    bad = sin_e < GAP_TOL
    if strict and np.any(bad):
        raise DegeneratePoint(f"bands touch at T={T}, theta={theta}, k={k}")
    with np.errstate(divide="ignore", invalid="ignore"):
        n = v / np.where(bad, np.nan, sin_e)[..., None]
    return BlochDecomposition(energy=energy, n=n)


def chiral_axis(T, theta) -> np.ndarray:
    """Unit vector A = (cos a, 0, sin a), orthogonal to n(k) for every k."""
    a = half_angle(T, theta)
    return np.stack([np.cos(a), np.zeros_like(a), np.sin(a)], axis=-1)


def chiral_operator(T, theta) -> np.ndarray:
    """Gamma = A . sigma = [[sin a, cos a], [cos a, -sin a]]."""
    return dot_sigma(chiral_axis(T, theta))


def effective_hamiltonian(T, theta, k, strict: bool = True) -> np.ndarray:
    """Closed-form H(k) = eps * M(k) with eps = E / sin E.

    M = [[-sin k cos a, sin a (sin k - i cos k)],
         [sin a (sin k + i cos k), sin k cos a]]
    """
    a = half_angle(T, theta)
    k = np.asarray(k, dtype=float)
    energy, sin_e, _ = _bloch_parts(T, theta, k)
    bad = sin_e < GAP_TOL
    if strict and np.any(bad):
        raise DegeneratePoint(f"effective Hamiltonian singular at T={T}, theta={theta}, k={k}")
    with np.errstate(divide="ignore", invalid="ignore"):
        eps = energy / np.where(bad, np.nan, sin_e)
    c, s = np.cos(a), np.sin(a)
    sk, ck = np.sin(k), np.cos(k)
    c, s, sk, ck, eps = np.broadcast_arrays(c, s, sk, ck, eps)
    h = np.empty(eps.shape + (2, 2), dtype=complex)
    h[..., 0, 0] = -sk * c
    h[..., 0, 1] = s * (sk - 1j * ck)
    h[..., 1, 0] = s * (sk + 1j * ck)
    h[..., 1, 1] = sk * c
    return eps[..., None, None] * h


def sublattice_projectors(T, theta) -> tuple[np.ndarray, np.ndarray]:
    """P_A = (1 + Gamma)/2 and P_B = (1 - Gamma)/2."""
    gamma = chiral_operator(T, theta)
    return 0.5 * (IDENTITY + gamma), 0.5 * (IDENTITY - gamma)


def hamiltonian_log_oracle(T, theta, k) -> np.ndarray:
    """``i log U(k)`` by eigendecomposition, principal branch.

    Independent of the closed forms above: it only needs the step unitary.
    Eigenphases phi in (-pi, pi] map to eigenvalues -phi of H.
    """
    u = step_unitary(T, theta, k)
    lam, vecs = np.linalg.eig(u)
    if np.any(0.5 * np.abs(lam[..., 0] - lam[..., 1]) < GAP_TOL):
        raise DegeneratePoint("step unitary has degenerate eigenvalues; log branch undefined")
    phases = np.angle(lam)
    # np.angle maps -1 to +pi already; keep (-pi, pi] explicit
    phases = np.where(phases <= -np.pi, phases + 2 * np.pi, phases)
    diag = np.zeros(lam.shape + (2,), dtype=complex)
    diag[..., 0, 0] = -phases[..., 0]
    diag[..., 1, 1] = -phases[..., 1]
    return vecs @ diag @ np.linalg.inv(vecs)
