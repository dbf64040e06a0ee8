"""Command-line front end: ``topowalk <command> [options]``."""

from __future__ import annotations

import argparse
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import output, topology, verify, walk
from .errors import InvalidConfig, NonIntegerWinding, NormalizationError, TopowalkError

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

COMMANDS = ("bands", "phase-diagram", "winding", "simulate", "moments-scan", "verify")

EPILOG = """\
exit codes:
  0  success
  2  invalid configuration or arguments
  3  numerical check failed (verify suite, non-integer winding)
  4  could not write output

angles accept plain numbers or multiples of pi: 0.3, pi/10, 3pi/2, -pi.
TOPOWALK_JOBS sets the default for --jobs.
"""

_ANGLE = re.compile(r"^\s*([+-]?\d*\.?\d*(?:[eE][+-]?\d+)?)\s*\*?\s*(pi)?\s*(?:/\s*(\d*\.?\d+))?\s*$")


def parse_angle(text: str) -> float:
    m = _ANGLE.match(text)
    if not m or (not m.group(1) and not m.group(2)):
        raise InvalidConfig(f"cannot parse angle {text!r}")
    coef, pi, denom = m.groups()
    if coef in ("", "+", "-"):
        value = -1.0 if coef == "-" else 1.0
    else:
        value = float(coef)
    if pi:
        value *= math.pi
    if denom:
        value /= float(denom)
    return value


def parse_steps(text: str) -> list[int]:
    """``N``, ``a,b,c`` or an inclusive range ``a:b``."""
    try:
        if ":" in text:
            lo, hi = (int(p) for p in text.split(":"))
            return list(range(lo, hi + 1))
        return [int(p) for p in text.split(",")]
    except ValueError:
        raise InvalidConfig(f"cannot parse step count {text!r}") from None


@dataclass
class RunConfig:
    command: str
    T: list[int] = field(default_factory=lambda: [1])
    theta: float | None = None
    theta_grid: tuple[float, float, int] | None = None
    k_samples: int = 256
    resolution: int = 4096
    initial: walk.InitialCoinSpec = walk.DEFAULT_SPEC
    output_path: str | None = None
    format: str = "csv"
    protocol: str | None = None
    verify_windings: bool = False
    jobs: int = 1

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise InvalidConfig(f"unknown command {self.command!r}")
        if not self.T or any(t < 1 for t in self.T):
            raise InvalidConfig("step counts must be positive integers")
        if self.k_samples < 16:
            raise InvalidConfig("--k-samples must be at least 16")
        if self.resolution < 2:
            raise InvalidConfig("--resolution must be at least 2")
        if self.theta_grid is not None:
            lo, hi, n = self.theta_grid
            if n < 2:
                raise InvalidConfig("theta grid needs at least 2 points")
            if not 0.0 <= lo <= hi <= topology.TWO_PI + 1e-12:
                raise InvalidConfig("theta grid must lie within [0, 2pi]")
        if self.theta is not None and not 0.0 <= self.theta <= topology.TWO_PI + 1e-12:
            raise InvalidConfig("theta must lie within [0, 2pi]")
        if self.format not in ("csv", "json"):
            raise InvalidConfig("--format must be csv or json")
        if self.protocol is not None and self.protocol not in walk.PROTOCOLS:
            raise InvalidConfig(f"--protocol must be one of {walk.PROTOCOLS}")
        if self.initial.norm_error() > walk.NORM_TOL:
            raise InvalidConfig("initial coin state is not normalised")
        if self.jobs < 1:
            raise InvalidConfig("--jobs must be positive")
        return self

    def single_T(self) -> int:
        if len(self.T) != 1:
            raise InvalidConfig(f"{self.command} takes a single --steps value")
        return self.T[0]

    def thetas(self) -> list[float]:
        if self.theta_grid is not None:
            lo, hi, n = self.theta_grid
            return [float(x) for x in np.linspace(lo, hi, n)]
        if self.theta is None:
            raise InvalidConfig(f"{self.command} needs --theta or --theta-grid")
        return [self.theta]

    def single_theta(self) -> float:
        if self.theta is None:
            raise InvalidConfig(f"{self.command} needs --theta")
        return self.theta


def _pmap(fn, items, jobs: int):
    """Order-preserving map; each item is computed independently."""
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [fn(*it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, *zip(*items)))


def run_bands(cfg: RunConfig) -> str:
    T, theta = cfg.single_T(), cfg.single_theta()
    if cfg.format == "json":
        return output.bands_json(T, theta, cfg.k_samples)
    return output.bands_csv(T, theta, cfg.k_samples)


def _diagram_with_windings(T: int, resolution: int, jobs: int):
    diagram = topology.phase_diagram(T)
    values = _pmap(topology.winding_integral, [(T, r.midpoint, resolution) for r in diagram.regions], jobs)
    for r, v in zip(diagram.regions, values):
        if round(v) != r.winding:
            raise NonIntegerWinding(f"region m={r.index_m}: integral {v!r} != rule {r.winding}")
    diagram.verified_windings = values
    return diagram


def run_phase_diagram(cfg: RunConfig) -> str:
    T = cfg.single_T()
    if cfg.verify_windings:
        diagram = _diagram_with_windings(T, cfg.resolution, cfg.jobs)
    else:
        diagram = topology.phase_diagram(T)
    return output.to_json(output.phase_diagram_doc(diagram))


def run_winding(cfg: RunConfig) -> str:
    T = cfg.single_T()
    rows = _pmap(output.winding_row, [(T, th, cfg.resolution) for th in cfg.thetas()], cfg.jobs)
    if cfg.format == "json":
        return output.to_json({"T": T, "rows": [dict(zip(output.WINDING_HEADER, r)) for r in rows]})
    return output.to_csv(output.WINDING_HEADER, rows)


def simulate_report(T: int, theta: float, spec, protocol: str) -> tuple[list, dict]:
    state = walk.run_walk(T, theta, spec, protocol)
    m2 = walk.moment(state, 2)
    l_value = float(topology.l_analytic(T, theta))
    report = {
        "T": T,
        "theta": theta,
        "protocol": protocol,
        "m1": walk.moment(state, 1),
        "m2": m2,
        "m2_over_T2": m2 / T**2,
        "l_value": l_value,
        "deviation": abs(m2 / T**2 - l_value),
    }
    return walk.distribution(state), report


def run_simulate(cfg: RunConfig) -> tuple[str, str]:
    """Returns (CSV text, JSON sidecar text)."""
    dist, report = simulate_report(cfg.single_T(), cfg.single_theta(), cfg.initial, cfg.protocol or "step")
    return output.to_csv(output.SIMULATE_HEADER, dist), output.to_json(report)


def run_moments_scan(cfg: RunConfig) -> str:
    theta = cfg.single_theta()
    protocol = cfg.protocol or "floquet"
    try:
        reports = walk.m2_scan(theta, cfg.T, cfg.initial, walk.SECOND_SPEC, protocol)
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from None
    if cfg.format == "json":
        return output.to_json([asdict(r) for r in reports])
    return output.to_csv(output.MOMENTS_HEADER, output.moments_rows(reports))


def run_verify(cfg: RunConfig) -> tuple[int, str]:
    opts = verify.Options(resolution=cfg.resolution)
    results = verify.run_all(opts, jobs=cfg.jobs)
    lines = [r.line() for r in results]
    failed = [r.name for r in results if not r.passed]
    total = sum(r.seconds for r in results)
    lines.append(f"{len(results) - len(failed)}/{len(results)} suites passed ({total:.1f}s)")
    if any("NonIntegerWinding" in r.detail for r in results):
        lines.append("NonIntegerWinding reported")
    return (EXIT_NUMERIC if failed else EXIT_OK), "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--steps", default="1", help="step count T; moments-scan takes a list a,b,c or range a:b")
    common.add_argument("--theta", help="coin angle in [0, 2pi]")
    common.add_argument("--theta-grid", metavar="MIN:MAX:N", help="inclusive theta grid")
    common.add_argument("--k-samples", type=int, default=256, help="momentum samples on [-pi, pi)")
    common.add_argument("--resolution", type=int, default=4096, help="quadrature points for integrals")
    common.add_argument("--initial", metavar="a_re,a_im,b_re,b_im", help="initial coin amplitudes")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    common.add_argument("--protocol", choices=walk.PROTOCOLS, help="walk protocol (simulate: step, moments-scan: floquet)")
    common.add_argument("--verify-windings", action="store_true", help="cross-check phase windings by integration")
    common.add_argument("--jobs", type=int, default=int(os.environ.get("TOPOWALK_JOBS", "1") or 1))

    parser = argparse.ArgumentParser(
        prog="topowalk",
        description="Band structure, topology and simulation of step-dependent-coin quantum walks.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "bands": "quasi-energy and group velocity on a k grid (CSV/JSON)",
        "phase-diagram": "phases, windings and gapless boundaries for one T (JSON)",
        "winding": "winding integral and closed-form rule per theta",
        "simulate": "position distribution after T steps plus moment sidecar",
        "moments-scan": "M2/T^2 against L for a list of T",
        "verify": "run every invariant suite; exit 3 on any failure",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name], epilog=EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    return parser


def config_from_args(args) -> RunConfig:
    grid = None
    if args.theta_grid:
        parts = args.theta_grid.split(":")
        if len(parts) != 3:
            raise InvalidConfig("--theta-grid expects MIN:MAX:N")
        try:
            grid = (parse_angle(parts[0]), parse_angle(parts[1]), int(parts[2]))
        except ValueError:
            raise InvalidConfig(f"bad --theta-grid {args.theta_grid!r}") from None
    initial = walk.DEFAULT_SPEC
    if args.initial:
        try:
            a_re, a_im, b_re, b_im = (float(x) for x in args.initial.split(","))
        except ValueError:
            raise InvalidConfig("--initial expects four comma-separated numbers") from None
        initial = walk.InitialCoinSpec(complex(a_re, a_im), complex(b_re, b_im))
    cfg = RunConfig(
        command=args.command,
        T=parse_steps(args.steps),
        theta=parse_angle(args.theta) if args.theta is not None else None,
        theta_grid=grid,
        k_samples=args.k_samples,
        resolution=args.resolution,
        initial=initial,
        output_path=args.out,
        format=args.format,
        protocol=args.protocol,
        verify_windings=args.verify_windings,
        jobs=args.jobs,
    )
    return cfg.validate()


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        if cfg.command == "verify":
            code, report = run_verify(cfg)
            _write(cfg.output_path, report)
            if cfg.output_path is not None:
                sys.stdout.write(report)
            return code
        if cfg.command == "simulate":
            table, sidecar = run_simulate(cfg)
            if cfg.output_path is None:
                _write(None, table + "\n" + sidecar)
            else:
                _write(cfg.output_path, table)
                _write(cfg.output_path + ".json", sidecar)
            return EXIT_OK
        runner = {
            "bands": run_bands,
            "phase-diagram": run_phase_diagram,
            "winding": run_winding,
            "moments-scan": run_moments_scan,
        }[cfg.command]
        _write(cfg.output_path, runner(cfg))
        return EXIT_OK
    except (InvalidConfig, NormalizationError) as exc:
        print(f"topowalk: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"topowalk: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except TopowalkError as exc:
        print(f"topowalk: numerical check failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
