"""Invariant suites behind the ``verify`` command and the acceptance tests.

Each suite measures the largest violation of one family of identities over a
fixed grid and compares it with a pinned tolerance. Suites are independent
and may run in any order or in separate processes.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bloch, output, topology, walk
from .bloch import IDENTITY
from .errors import DegeneratePoint, NonIntegerWinding
from .topology import TWO_PI

GRID_T = range(1, 26)
GRID_THETA = np.linspace(0.0, TWO_PI, 101)
GRID_K = np.linspace(-math.pi, math.pi, 257, endpoint=False)

PLATEAU_FRACTIONS = (0.05, 0.25, 0.5, 0.75, 0.95)
SEED = 20190521


@dataclass
class Options:
    resolution: int = 4096
    sim_runs: int = 1000
    velocity_samples: int = 10_000


@dataclass
class SuiteResult:
    name: str
    passed: bool
    max_error: float
    tolerance: float
    seconds: float = 0.0
    detail: str = ""
    extra: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        msg = f"{status}  {self.name:<28} max_err={self.max_error:.3e} tol={self.tolerance:.1e} ({self.seconds:.2f}s)"
        if self.detail:
            msg += f"  {self.detail}"
        return msg


def _max_abs(x) -> float:
    x = np.asarray(x)
    if x.size == 0:
        return 0.0
    return float(np.nanmax(np.abs(x)))


def _dagger(m):
    return np.conj(np.swapaxes(m, -1, -2))


def _grid(T):
    theta, k = np.meshgrid(GRID_THETA, GRID_K, indexing="ij")
    ok = ~bloch.gapless_mask(T, theta, k)
    return theta, k, ok


# --- bloch-core ---------------------------------------------------------


def suite_unitarity(opts: Options):
    err = 0.0
    for T in GRID_T:
        theta, k, _ = _grid(T)
        for u in (bloch.coin_unitary(T, theta), bloch.shift_unitary(k), bloch.step_unitary(T, theta, k)):
            err = max(err, _max_abs(u @ _dagger(u) - IDENTITY), _max_abs(np.linalg.det(u) - 1.0))
    return err, 1e-12, ""


def suite_reconstruction(opts: Options):
    err = 0.0
    for T in GRID_T:
        theta, k, ok = _grid(T)
        theta, k = theta[ok], k[ok]
        dec = bloch.bloch_vector(T, theta, k)
        e = dec.energy[..., None, None]
        rebuilt = np.cos(e) * IDENTITY - 1j * np.sin(e) * bloch.dot_sigma(dec.n)
        err = max(err, _max_abs(rebuilt - bloch.step_unitary(T, theta, k)))
    return err, 1e-12, ""


def suite_bloch_vector(opts: Options):
    err = 0.0
    for T in GRID_T:
        theta, k, ok = _grid(T)
        theta, k = theta[ok], k[ok]
        n = bloch.bloch_vector(T, theta, k).n
        a = bloch.chiral_axis(T, theta)
        err = max(
            err,
            _max_abs(np.linalg.norm(n, axis=-1) - 1.0),
            _max_abs(np.sum(a * n, axis=-1)),
            _max_abs(np.linalg.norm(a, axis=-1) - 1.0),
        )
    return err, 1e-12, "|n|=1, A.n=0, |A|=1"


def suite_chiral(opts: Options):
    err = 0.0
    for T in GRID_T:
        theta, k, ok = _grid(T)
        theta, k = theta[ok], k[ok]
        g = bloch.chiral_operator(T, theta)
        h = bloch.effective_hamiltonian(T, theta, k)
        g_inv = np.linalg.inv(g)
        err = max(
            err,
            _max_abs(g - _dagger(g)),
            _max_abs(g @ g - IDENTITY),
            _max_abs(g @ h @ g + h),
            _max_abs(g @ h @ g_inv + h),
            _max_abs(g_inv @ h @ g + h),
        )
    return err, 1e-12, "Gamma^2=1, Gamma H Gamma^{+-1} = -H"


def suite_projectors(opts: Options):
    err = 0.0
    for T in GRID_T:
        theta, k, ok = _grid(T)
        theta, k = theta[ok], k[ok]
        pa, pb = bloch.sublattice_projectors(T, theta)
        h = bloch.effective_hamiltonian(T, theta, k)
        err = max(
            err,
            _max_abs(pa + pb - IDENTITY),
            _max_abs(pa @ pb),
            _max_abs(pa @ pa - pa),
            _max_abs(pb @ pb - pb),
            _max_abs(pa @ h @ pa),
            _max_abs(pb @ h @ pb),
            _max_abs(pa @ h @ pb + pb @ h @ pa - h),
        )
    return err, 1e-12, ""


def suite_hamiltonian(opts: Options):
    err = 0.0
    for T in GRID_T:
        theta, k, ok = _grid(T)
        theta, k = theta[ok], k[ok]
        h = bloch.effective_hamiltonian(T, theta, k)
        dec = bloch.bloch_vector(T, theta, k)
        err = max(
            err,
            _max_abs(h - _dagger(h)),
            _max_abs(np.trace(h, axis1=-2, axis2=-1)),
            _max_abs(h - dec.hamiltonian()),
            _max_abs(bloch.effective_hamiltonian(T, theta, k + TWO_PI) - h),
        )
    return err, 1e-12, "Hermitian, traceless, E n.sigma, H(k+2pi)=H(k)"


def suite_energy_symmetry(opts: Options):
    err = 0.0
    for T in GRID_T:
        theta, k, _ = _grid(T)
        err = max(err, _max_abs(bloch.quasi_energy(T, theta, k) - bloch.quasi_energy(T, theta, -k)))
    return err, 1e-15, "E(k)=E(-k)"


def suite_log_oracle(opts: Options):
    err = 0.0
    for T in GRID_T:
        theta, k, ok = _grid(T)
        theta, k = theta[ok], k[ok]
        err = max(
            err,
            _max_abs(bloch.hamiltonian_log_oracle(T, theta, k) - bloch.effective_hamiltonian(T, theta, k)),
        )
    return err, 1e-10, "i log U vs closed form"


# --- topology -----------------------------------------------------------


def suite_winding_midpoints(opts: Options):
    err = 0.0
    problems = []
    for T in range(1, 21):
        diagram = topology.phase_diagram(T)
        values = []
        for region in diagram.regions:
            try:
                v = topology.winding_integral(T, region.midpoint, opts.resolution)
            except NonIntegerWinding as exc:
                problems.append(f"NonIntegerWinding: {exc}")
                err = max(err, 1.0)
                continue
            values.append(v)
            err = max(err, abs(v - region.winding), abs(abs(v) - 1.0))
        w = diagram.windings()
        minus, plus = w.count(-1), w.count(1)
        expect = ((T + 1) // 2, (T - 1) // 2) if T % 2 else (T // 2, T // 2)
        if (minus, plus) != expect or w[0] != -1:
            problems.append(f"T={T}: counts (-1:{minus}, +1:{plus}) first={w[0]}")
    return err, 1e-6, "; ".join(problems[:3]), not problems


def suite_winding_plateau(opts: Options):
    err = 0.0
    problems = []
    for T in range(1, 11):
        for region in topology.phase_diagram(T).regions:
            width = region.theta_max - region.theta_min
            for f in PLATEAU_FRACTIONS:
                theta = region.theta_min + f * width
                try:
                    v = topology.winding_integral(T, theta, opts.resolution)
                except NonIntegerWinding as exc:
                    problems.append(f"NonIntegerWinding: {exc}")
                    err = max(err, 1.0)
                    continue
                err = max(err, abs(v - region.winding))
    return err, 1e-6, "; ".join(problems[:2]), not problems


def suite_gapless_structure(opts: Options):
    err = 0.0
    problems = []
    for T in range(1, 51):
        points = topology.gapless_angles(T)
        if len(points) != T + 1:
            problems.append(f"T={T}: {len(points)} angles")
        for m, p in enumerate(points):
            err = max(err, abs(p.theta - TWO_PI * m / T))
            want = ("E0", "Epi") if m % 2 == 0 else ("Epi", "E0")
            if (p.closing_at_k0, p.closing_at_kpi) != want or p.index_m != m:
                problems.append(f"T={T}, m={m}: classified {p}")
            # the classification must match the band energies themselves
            e0 = bloch.quasi_energy(T, p.theta, 0.0)
            epi = bloch.quasi_energy(T, p.theta, -math.pi)
            target0 = 0.0 if want[0] == "E0" else math.pi
            targetpi = 0.0 if want[1] == "E0" else math.pi
            if abs(e0 - target0) > 1e-6 or abs(epi - targetpi) > 1e-6:
                problems.append(f"T={T}, m={m}: E(0)={e0}, E(pi)={epi}")
        err = max(err, abs((points[1].theta - points[0].theta) - TWO_PI / T))
        for fb in topology.flat_band_angles(T):
            k = GRID_K
            err = max(
                err,
                _max_abs(bloch.quasi_energy(T, fb, k) - math.pi / 2),
                _max_abs(topology.group_velocity(T, fb, k)),
            )
    return err, 1e-12, "; ".join(problems[:3]), not problems


def suite_l_identity(opts: Options):
    thetas = np.linspace(0.0, TWO_PI, 100)
    err = 0.0
    for T in GRID_T:
        err = max(err, _max_abs(topology.l_quadrature(T, thetas, opts.resolution) - topology.l_analytic(T, thetas)))
    return err, 1e-8, "25 T x 100 theta"


def suite_transitions(opts: Options):
    err = 0.0
    problems = []
    for T in GRID_T:
        found = topology.transition_points(T)
        expected = [p.theta for p in topology.gapless_angles(T)]
        if len(found) != len(expected):
            problems.append(f"T={T}: {len(found)} kinks vs {len(expected)} gapless")
            err = max(err, 1.0)
            continue
        err = max(err, _max_abs(np.subtract(found, expected)))
    return err, 1e-12, "; ".join(problems[:3]), not problems


def suite_group_velocity(opts: Options):
    """Central finite differences of E(k) against the closed-form V."""
    rng = np.random.default_rng(SEED)
    h = 1e-6
    worst = 0.0
    n_done = 0
    while n_done < opts.velocity_samples:
        T = int(rng.integers(1, 26))
        theta = float(rng.uniform(0.0, TWO_PI))
        k = float(rng.uniform(-math.pi, math.pi))
        # keep the stencil off the Dirac cone tip
        if np.sin(bloch.quasi_energy(T, theta, k)) < 1e-3:
            continue
        fd = (bloch.quasi_energy(T, theta, k + h) - bloch.quasi_energy(T, theta, k - h)) / (2 * h)
        worst = max(worst, abs(fd - topology.group_velocity(T, theta, k)))
        n_done += 1
    return worst, 1e-6, f"{opts.velocity_samples} samples"


def suite_velocity_symmetry(opts: Options):
    err = 0.0
    over = 0.0
    for T in GRID_T:
        theta, k, ok = _grid(T)
        v = topology.group_velocity(T, theta, k, strict=False)
        vm = topology.group_velocity(T, theta, -k, strict=False)
        n = bloch.bloch_vector(T, theta, k, strict=False).n
        over = max(over, float(np.nanmax(np.abs(v))))
        err = max(err, _max_abs(v + vm), _max_abs(n[..., 2] + v))
        # unsigned form n_z = -|V| on k in (0, pi) wherever cos(T theta/2) >= 0
        sel = ok & (k > 0) & (np.cos(0.5 * T * theta) >= 0)
        err = max(err, _max_abs(n[..., 2][sel] + np.abs(v[sel])))
    return err, 1e-12, f"max |V| = {over:.15f}", over <= 1.0

def suite_velocity_saturation(opts: Options):
    err = 0.0
    for T in (1, 2):
        for p in topology.gapless_angles(T):
            sign = -1.0 if p.closing_at_k0 == "E0" else 1.0
            for off in (-1e-4, 1e-4):
                theta = p.theta + off
                if not 0.0 <= theta <= TWO_PI:
                    continue
                v_left = float(topology.group_velocity(T, theta, -1e-3))
                v_right = float(topology.group_velocity(T, theta, 1e-3))
                err = max(err, abs(v_left - sign), abs(v_right + sign))
    return err, 1e-2, "T in {1,2}, theta +-1e-4, |k|=1e-3"


# --- walk-sim -----------------------------------------------------------


def suite_simulation_norm(opts: Options):
    rng = np.random.default_rng(SEED + 1)
    err = 0.0
    support_bad = 0
    for run in range(opts.sim_runs):
        T = int(rng.integers(1, 101))
        theta = float(rng.uniform(0.0, TWO_PI))
        z = rng.normal(size=4)
        a, b = complex(z[0], z[1]), complex(z[2], z[3])
        r = math.hypot(abs(a), abs(b))
        spec = walk.InitialCoinSpec(a / r, b / r)
        protocol = walk.PROTOCOLS[run % 2]
        state = walk.make_initial(spec, T)
        x = state.positions
        for t in range(1, T + 1):
            walk.evolve_step(state, t, theta, protocol)
            err = max(err, abs(state.norm() - 1.0))
            forbidden = (np.abs(x) > t) | ((x + t) % 2 == 1)
            support_bad += int(np.count_nonzero(state.amplitudes[forbidden]))
        if walk.moment(state, 2) > T * T + 1e-9:
            support_bad += 1
    detail = f"{opts.sim_runs} runs" + (f"; {support_bad} support violations" if support_bad else "")
    return err, 1e-12, detail, support_bad == 0


def suite_simulation_traces(opts: Options):
    one = walk.InitialCoinSpec(1.0, 0.0)
    err = 0.0
    for protocol in walk.PROTOCOLS:
        s1 = walk.run_walk(1, math.pi / 2, one, protocol)
        err = max(err, abs(walk.moment(s1, 2) - 1.0))
        p1 = dict(walk.distribution(s1))
        err = max(err, abs(p1.get(-1, 0) - 0.5), abs(p1.get(1, 0) - 0.5))
        s2 = walk.run_walk(2, math.pi / 2, one, protocol)
        err = max(err, abs(dict(walk.distribution(s2)).get(0, 0) - 1.0), abs(walk.moment(s2, 2)))
        s3 = walk.run_walk(2, 0.0, one, protocol)
        err = max(err, abs(dict(walk.distribution(s3)).get(2, 0) - 1.0))
    # ballistic theta=0: coin-0 mass at +T, coin-1 mass at -T, exactly
    spec = walk.InitialCoinSpec(0.6, 0.8j)
    for T in (1, 5, 17):
        state = walk.run_walk(T, 0.0, spec)
        probs = dict(walk.distribution(state))
        if set(probs) != {-T, T} or probs[T] != abs(spec.alpha) ** 2 or probs[-T] != abs(spec.beta) ** 2:
            return err, 1e-12, f"ballistic walk T={T} gave {probs}", False
    return err, 1e-12, "closed-form traces and ballistic walk"


def suite_reflection(opts: Options):
    rng = np.random.default_rng(SEED + 2)
    err = 0.0
    for _ in range(50):
        T = int(rng.integers(1, 60))
        theta = float(rng.uniform(0.0, TWO_PI))
        z = rng.normal(size=4)
        a, b = complex(z[0], z[1]), complex(z[2], z[3])
        r = math.hypot(abs(a), abs(b))
        a, b = a / r, b / r
        for protocol in walk.PROTOCOLS:
            p = walk.run_walk(T, theta, walk.InitialCoinSpec(a, b), protocol).probabilities()
            q = walk.run_walk(T, -theta, walk.InitialCoinSpec(b.conjugate(), a.conjugate()), protocol).probabilities()
            err = max(err, _max_abs(p - q[::-1]))
    return err, 1e-12, "(a,b,theta) -> (b*,a*,-theta) mirrors x"


M2_THETAS = (math.pi / 5, math.pi / 7)
M2_STEPS = (10, 20, 40, 80)
M2_MARGIN = 1e-3


def nudged_theta(theta: float, steps=M2_STEPS, margin: float = M2_MARGIN) -> float:
    """Move theta upward until it is at least ``margin`` from every gapless angle."""
    def distance(th):
        return min(abs(th - (TWO_PI / T) * round(th * T / TWO_PI)) for T in steps)

    shifted = theta
    while distance(shifted) < margin:
        shifted += margin
    return shifted


def suite_m2_trend(opts: Options):
    problems = []
    worst_ratio = 0.0
    for theta in M2_THETAS:
        th = nudged_theta(theta)
        for spec in (walk.DEFAULT_SPEC, walk.SECOND_SPEC):
            reports = walk.m2_scan(th, M2_STEPS, spec, walk.SECOND_SPEC if spec is walk.DEFAULT_SPEC else walk.DEFAULT_SPEC)
            first, last = reports[0].deviation, reports[-1].deviation
            worst_ratio = max(worst_ratio, last / first if first else math.inf)
            if not last < first:
                problems.append(f"theta={th:.6f}: deviation {first:.3e} -> {last:.3e}")
        reports = walk.m2_scan(th, M2_STEPS)
        spreads = [r.spread for r in reports]
        # round-off floor: the two default initial states give identical M2 exactly
        shrinking = sum(spreads[i + 1] <= max(spreads[i], 1e-12) for i in range(len(spreads) - 1))
        if shrinking < len(spreads) - 1:
            problems.append(f"theta={th:.6f}: spreads {spreads}")
    return worst_ratio, 1.0, "; ".join(problems) or "max_err is dev(T=80)/dev(T=10)", not problems


def suite_bands_figure(opts: Options):
    """Gap closures in emitted bands CSV at theta = pi/10, T in {5,10,15,20}."""
    theta = math.pi / 10
    problems = []
    worst = 0.0
    for T in (5, 10, 15, 20):
        rows = list(csv.DictReader(io.StringIO(output.bands_csv(T, theta, 256))))
        ks = np.array([float(r["k"]) for r in rows])
        sep0 = np.array([float(r["E_plus"]) - float(r["E_minus"]) for r in rows])
        sep_pi = TWO_PI - sep0
        m = topology.gapless_index(T, theta)
        if m is None:
            if min(sep0.min(), sep_pi.min()) < 1e-6:
                problems.append(f"T={T}: unexpected closure")
            continue
        point = topology.GaplessPoint.from_index(T, m)
        for k_target, label in ((0.0, point.closing_at_k0), (-math.pi, point.closing_at_kpi)):
            i = int(np.argmin(np.abs(ks - k_target)))
            gap = sep0[i] if label == "E0" else sep_pi[i]
            worst = max(worst, gap)
            if gap >= 1e-6:
                problems.append(f"T={T}: no {label} closure at k={k_target}")
            if rows[i]["V_plus"] != "":
                problems.append(f"T={T}: V given at gapless k={k_target}")
        closed = np.flatnonzero(np.minimum(sep0, sep_pi) < 1e-6)
        if set(ks[closed]) != {0.0, -math.pi}:
            problems.append(f"T={T}: closures at {ks[closed]}")
    return worst, 1e-6, "; ".join(problems), not problems


SUITES = {
    "unitarity": suite_unitarity,
    "spectral-reconstruction": suite_reconstruction,
    "bloch-vector": suite_bloch_vector,
    "effective-hamiltonian": suite_hamiltonian,
    "chiral-symmetry": suite_chiral,
    "sublattice-projectors": suite_projectors,
    "energy-symmetry": suite_energy_symmetry,
    "log-oracle": suite_log_oracle,
    "winding-midpoints": suite_winding_midpoints,
    "winding-plateau": suite_winding_plateau,
    "gapless-structure": suite_gapless_structure,
    "l-identity": suite_l_identity,
    "transition-points": suite_transitions,
    "group-velocity": suite_group_velocity,
    "velocity-symmetry": suite_velocity_symmetry,
    "velocity-saturation": suite_velocity_saturation,
    "simulation-norm": suite_simulation_norm,
    "simulation-traces": suite_simulation_traces,
    "reflection": suite_reflection,
    "m2-trend": suite_m2_trend,
    "bands-figure": suite_bands_figure,
}


def run_suite(name: str, opts: Options | None = None) -> SuiteResult:
    opts = opts or Options()
    start = time.perf_counter()
    try:
        err, tol, detail, *flag = SUITES[name](opts)
        passed = err <= tol and all(flag)
    except (DegeneratePoint, NonIntegerWinding, ValueError, FloatingPointError) as exc:
        err, tol, detail, passed = math.inf, 0.0, f"{type(exc).__name__}: {exc}", False
    return SuiteResult(name, passed, float(err), tol, time.perf_counter() - start, detail)


def run_all(opts: Options | None = None, jobs: int = 1, names=None) -> list[SuiteResult]:
    names = list(names or SUITES)
    opts = opts or Options()
    if jobs <= 1:
        return [run_suite(n, opts) for n in names]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_suite, names, [opts] * len(names)))
