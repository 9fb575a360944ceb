#!/usr/bin/env python3
"""
Command-line entry point for fraclab.

Usage:
    python -m fraclab constants --n 3 --s 0.5
    python -m fraclab psi-table --n 2 --s 0.25 --out psi.csv
    python -m fraclab wos --n 1 --s 0.5 --domain "ball(0,1)" --data sign --x0 0.3
    python -m fraclab --config run.json

Every run echoes its full configuration: inside JSON reports, or as
<out>.config.json next to CSV output (a stderr line when writing to stdout).
"""

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from fraclab.acceptance import TIERS, run_acceptance_suite
from fraclab.config import configure_logging, resolve_threads
from fraclab.constants import FracParams, constants_for
from fraclab.errors import FraclabError
from fraclab.fields import builtin_data, builtin_density, builtin_field
from fraclab.fraclap import frac_laplacian_point
from fraclab.geometry import parse_domain
from fraclab.kernels import Ball, MultiIndex, regularized_kernel
from fraclab.liouville import (EstimateRecord, cauchy_estimate_record,
                               fit_loglog_slope, liouville_decay_experiment)
from fraclab.poisson import extension_field, poisson_extend
from fraclab.quadrature import QuadSpec
from fraclab.riesz import adjudicate_alpha, riesz_potential
from fraclab.wos import DEFAULT_MAX_STEPS, wos_solve

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_NONCONVERGED = 3

# Flags that map onto QuadSpec fields
QUAD_FLAGS = {
    'rel_tol': 'rel_tol',
    'abs_tol': 'abs_tol',
    'max_subdiv': 'max_subdivisions',
    'tail_factor': 'tail_radius_factor',
}

# Options that are not part of a subcommand's recorded parameters
GLOBAL_KEYS = {'command', 'config', 'out', 'threads', 'log_level', 'n', 's'} | set(QUAD_FLAGS)


@dataclass
class RunConfig:
    """Everything needed to replay a run"""

    command: str
    n: Optional[int] = None
    s: Optional[float] = None
    quad: Dict[str, Any] = field(default_factory=dict)
    options: Dict[str, Any] = field(default_factory=dict)
    out: Optional[str] = None
    threads: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        if 'command' not in data:
            raise FraclabError("config has no 'command'")
        known = {k: data[k] for k in ('command', 'n', 's', 'quad', 'options', 'out', 'threads') if k in data}
        return cls(**known)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> 'RunConfig':
        values = vars(args)
        quad = {QUAD_FLAGS[k]: values[k] for k in QUAD_FLAGS if values.get(k) is not None}
        options = {k: v for k, v in values.items() if k not in GLOBAL_KEYS}
        return cls(command=args.command, n=values.get('n'), s=values.get('s'), quad=quad,
                   options=options, out=values.get('out'), threads=values.get('threads'))

    @property
    def params(self) -> FracParams:
        if self.n is None or self.s is None:
            raise FraclabError(f"'{self.command}' needs --n and --s")
        return FracParams(int(self.n), float(self.s))

    @property
    def spec(self) -> QuadSpec:
        return QuadSpec().with_overrides(**self.quad)

    def option(self, name: str, default: Any = None) -> Any:
        value = self.options.get(name)
        return default if value is None else value


@dataclass
class Output:
    """What a subcommand produced: a JSON report or a CSV table"""

    report: Optional[Dict[str, Any]] = None
    header: Optional[Sequence[str]] = None
    rows: List[Sequence[Any]] = field(default_factory=list)
    summary: Optional[Dict[str, Any]] = None
    converged: bool = True
    failed: bool = False


# ==========================================
# INPUT HELPERS
# ==========================================


def _parse_floats(text: str) -> List[float]:
    try:
        return [float(v) for v in str(text).split(',') if v.strip()]
    except ValueError:
        raise FraclabError(f"expected comma-separated numbers, got {text!r}")


def read_points(path: str, n: int) -> np.ndarray:
    """One point per CSV row; non-numeric rows (a header) are skipped"""
    if not path:
        raise FraclabError("a points file is required (--points)")
    try:
        with open(path, newline='', encoding='utf-8') as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise FraclabError(f"cannot read points file: {e}")

    points = []
    for row in rows:
        cells = [c.strip() for c in row if c.strip()]
        if not cells:
            continue
        try:
            values = [float(c) for c in cells]
        except ValueError:
            continue
        if len(values) != n:
            raise FraclabError(f"point {values} in {path} does not have {n} coordinates")
        points.append(values)
    if not points:
        raise FraclabError(f"no points in {path}")
    return np.array(points)


def _point_columns(n: int) -> List[str]:
    return [f"x{i + 1}" for i in range(n)]


# ==========================================
# SUBCOMMANDS
# ==========================================


def run_constants(config: RunConfig) -> Output:
    p = config.params
    return Output(report={"params": p.to_dict(), **constants_for(p).to_dict()})


def run_psi_table(config: RunConfig) -> Output:
    p = config.params
    kernel = regularized_kernel(p)
    radii = np.geomspace(float(config.option('r_min', 1.0)), float(config.option('r_max', 100.0)),
                         int(config.option('points', 100)))
    spec = config.spec
    rows = []
    for t in radii:
        value = kernel.exact(float(t), spec)
        rows.append([float(t), value, value * float(t) ** (p.n + 2.0 * p.s)])
    return Output(header=['radius', 'psi', 'psi_times_decay_power'], rows=rows)


def run_fraclap_eval(config: RunConfig) -> Output:
    p = config.params
    u = builtin_field(config.option('field', 'bump2s'), p)
    points = read_points(config.option('points'), p.n)
    spec = config.spec
    rows, converged = [], True
    for point in points:
        result = frac_laplacian_point(p, u, point, spec)
        converged = converged and result.converged
        rows.append(list(point) + [result.value, result.error_estimate])
    return Output(header=_point_columns(p.n) + ['value', 'error_estimate'], rows=rows,
                  converged=converged)


def run_poisson_solve(config: RunConfig) -> Output:
    p = config.params
    center = _parse_floats(config.option('center', ','.join(['0'] * p.n)))
    ball = Ball(tuple(center), float(config.option('radius', 1.0)))
    g = builtin_data(config.option('data', 'one'), p.n)
    points = read_points(config.option('points'), p.n)
    spec = config.spec
    rows, converged = [], True
    for point in points:
        result = poisson_extend(p, ball, g, point, spec)
        converged = converged and result.converged
        rows.append(list(point) + [result.value, result.error_estimate])
    return Output(header=_point_columns(p.n) + ['value', 'error_estimate'], rows=rows,
                  converged=converged)


def run_riesz(config: RunConfig) -> Output:
    p = config.params
    spec = config.spec
    threads = resolve_threads(config.threads)
    density = builtin_density(config.option('density', 'bump'), p.n)

    if config.option('adjudicate', False):
        report = adjudicate_alpha(p, spec, density, threads=threads)
        return Output(report=report.to_dict(), converged=report.alpha_report.converged)

    normalization = float(config.option('normalization', 1.0))
    points = read_points(config.option('points'), p.n)
    values = [riesz_potential(p, density, point, normalization, spec) for point in points]
    return Output(
        report={
            'params': p.to_dict(),
            'density': density.name,
            'normalization': normalization,
            'points': points.tolist(),
            'values': [v.value for v in values],
            'error_estimates': [v.error_estimate for v in values],
        },
        converged=all(v.converged for v in values),
    )


def _records_output(records: List[EstimateRecord], summary: Dict[str, Any]) -> Output:
    return Output(header=list(EstimateRecord.CSV_COLUMNS), rows=[r.csv_row() for r in records],
                  summary=summary, converged=all(r.converged for r in records))


def run_cauchy(config: RunConfig) -> Output:
    p = config.params
    spec = config.spec
    gamma = MultiIndex.parse(config.option('gamma', '1'))
    g = builtin_data(config.option('data', 'sign'), p.n)
    radii = _parse_floats(config.option('radii', '1,2,4,8,16'))
    records = []
    for R in radii:
        u = extension_field(p, Ball((0.0,) * p.n, R), g, spec)
        records.append(cauchy_estimate_record(p, u, gamma, R, spec))
    ratios = [r.ratio for r in records if r.ratio is not None]
    summary = {
        'gamma': str(gamma),
        'data': g.name,
        'max_ratio': max(ratios, default=None),
        'min_ratio': min(ratios, default=None),
        'lhs_slope': fit_loglog_slope(radii, [r.lhs for r in records]),
    }
    return _records_output(records, summary)


def run_liouville_decay(config: RunConfig) -> Output:
    p = config.params
    report = liouville_decay_experiment(
        p,
        builtin_data(config.option('data', 'bounded-noise:0'), p.n),
        MultiIndex.parse(config.option('gamma', '2')),
        _parse_floats(config.option('radii', '1,2,4,8,16')),
        config.spec,
        threads=resolve_threads(config.threads),
    )
    summary = report.to_dict()
    summary.pop('records')
    return _records_output(report.records, summary)


def run_wos(config: RunConfig) -> Output:
    p = config.params
    omega = parse_domain(config.option('domain', 'ball(' + ','.join(['0'] * p.n) + ',1)'), p.n)
    result = wos_solve(
        p, omega,
        builtin_data(config.option('data', 'sign'), p.n),
        _parse_floats(config.option('x0', ','.join(['0'] * p.n))),
        int(config.option('samples', 10_000)),
        max_steps=int(config.option('max_steps', DEFAULT_MAX_STEPS)),
        seed=int(config.option('seed', 0)),
        spec=config.spec,
        threads=resolve_threads(config.threads),
    )
    report = {'params': p.to_dict(), 'domain': omega.to_spec(), **result.to_dict()}
    return Output(report=report, converged=not result.flagged)


def run_accept(config: RunConfig) -> Output:
    report = run_acceptance_suite(config.option('tier', 'fast'))
    return Output(report=report.to_dict(), failed=not report.passed)


COMMANDS: Dict[str, Callable[[RunConfig], Output]] = {
    'constants': run_constants,
    'psi-table': run_psi_table,
    'fraclap-eval': run_fraclap_eval,
    'poisson-solve': run_poisson_solve,
    'riesz': run_riesz,
    'cauchy': run_cauchy,
    'liouville-decay': run_liouville_decay,
    'wos': run_wos,
    'accept': run_accept,
}


# ==========================================
# OUTPUT
# ==========================================


def _write_text(text: str, out: Optional[str]):
    if out:
        Path(out).write_text(text, encoding='utf-8')
        print(f"✅ Wrote {out}", file=sys.stderr)
    else:
        sys.stdout.write(text)


def _dumps(data: Dict[str, Any]) -> str:
    return json.dumps(data, indent=2, ensure_ascii=False) + '\n'


def write_output(output: Output, config: RunConfig):
    """JSON reports carry the config; CSV tables get it in a sidecar file"""
    if output.report is not None:
        _write_text(_dumps({**output.report, 'config': config.to_dict()}), config.out)
        return

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(output.header)
    writer.writerows(output.rows)
    _write_text(buffer.getvalue(), config.out)

    sidecar = {'config': config.to_dict()}
    if output.summary is not None:
        sidecar['summary'] = output.summary
    if config.out:
        Path(config.out + '.config.json').write_text(_dumps(sidecar), encoding='utf-8')
    else:
        print(json.dumps(sidecar, ensure_ascii=False), file=sys.stderr)


# ==========================================
# ARGUMENT PARSING
# ==========================================


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--out', help='Output file (default: stdout)')
    common.add_argument('--threads', type=int, help='Worker threads (default: FRACLAB_THREADS or 1)')
    common.add_argument('--log-level', help='Logging level (default: FRACLAB_LOG_LEVEL or WARNING)')
    common.add_argument('--rel-tol', type=float, help='Relative quadrature tolerance (default: 1e-10)')
    common.add_argument('--abs-tol', type=float, help='Absolute quadrature tolerance (default: 1e-12)')
    common.add_argument('--max-subdiv', type=int, help='Maximum adaptive subdivisions (default: 2000)')
    common.add_argument('--tail-factor', type=float, help='Far-field radius factor (default: 64)')
    return common


def _params_parser() -> argparse.ArgumentParser:
    params = argparse.ArgumentParser(add_help=False)
    params.add_argument('--n', type=int, required=True, help='Dimension (1, 2 or 3)')
    params.add_argument('--s', type=float, required=True, help='Order in (0, 1)')
    return params


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='fraclab',
        description='Numerical experiments for the fractional Laplacian and s-harmonic functions',
    )
    parser.add_argument('--config', help='Replay a run from a saved config JSON')
    sub = parser.add_subparsers(dest='command')
    common = _common_parser()
    with_params = [common, _params_parser()]

    sub.add_parser('constants', parents=with_params, help='Print c, β and α for (n, s)')

    table = sub.add_parser('psi-table', parents=with_params, help='Tabulate the regularized kernel profile')
    table.add_argument('--r-min', type=float, default=1.0, help='Smallest radius (default: 1)')
    table.add_argument('--r-max', type=float, default=100.0, help='Largest radius (default: 100)')
    table.add_argument('--points', type=int, default=100, help='Number of radii (default: 100)')

    fraclap = sub.add_parser('fraclap-eval', parents=with_params, help='Evaluate (-Δ)^s of a builtin field')
    fraclap.add_argument('--field', default='bump2s', help='Builtin field name (default: bump2s)')
    fraclap.add_argument('--points', required=True, help='CSV file, one point per row')

    poisson = sub.add_parser('poisson-solve', parents=with_params, help='Poisson extension into a ball')
    poisson.add_argument('--center', help='Ball center, comma-separated (default: origin)')
    poisson.add_argument('--radius', type=float, default=1.0, help='Ball radius (default: 1)')
    poisson.add_argument('--data', default='one', help='Exterior data (default: one)')
    poisson.add_argument('--points', required=True, help='CSV file, one point per row')

    riesz = sub.add_parser('riesz', parents=with_params, help='Riesz potentials and the α check')
    riesz.add_argument('--density', default='bump', help='Builtin density (default: bump)')
    riesz.add_argument('--normalization', type=float, default=1.0, help='Constant in front (default: 1)')
    riesz.add_argument('--points', help='CSV file, one point per row')
    riesz.add_argument('--adjudicate', action='store_true', help='Decide between α and 1/α')

    cauchy = sub.add_parser('cauchy', parents=with_params, help='Cauchy-type derivative estimate')
    cauchy.add_argument('--gamma', default='1', help='Multi-index, comma-separated (default: 1)')
    cauchy.add_argument('--data', default='sign', help='Exterior data (default: sign)')
    cauchy.add_argument('--radii', default='1,2,4,8,16', help='Radii (default: 1,2,4,8,16)')

    decay = sub.add_parser('liouville-decay', parents=with_params, help='Derivative decay over growing balls')
    decay.add_argument('--gamma', default='2', help='Multi-index with |γ| > 2s (default: 2)')
    decay.add_argument('--data', default='bounded-noise:0', help='Bounded exterior data (default: bounded-noise:0)')
    decay.add_argument('--radii', default='1,2,4,8,16', help='Radii (default: 1,2,4,8,16)')

    wos = sub.add_parser('wos', parents=with_params, help='Walk-on-spheres solver')
    wos.add_argument('--domain', help='Domain spec (default: unit ball)')
    wos.add_argument('--data', default='sign', help='Bounded exterior data (default: sign)')
    wos.add_argument('--x0', help='Start point, comma-separated (default: origin)')
    wos.add_argument('--samples', type=int, default=10_000, help='Number of walks (default: 10000)')
    wos.add_argument('--max-steps', type=int, default=DEFAULT_MAX_STEPS, help='Step cap per walk (default: 10000)')
    wos.add_argument('--seed', type=int, default=0, help='Run seed (default: 0)')

    accept = sub.add_parser('accept', parents=[common], help='Run the acceptance suite')
    accept.add_argument('--tier', choices=TIERS, default='fast', help='fast or full (default: fast)')

    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding='utf-8'))
        except (OSError, json.JSONDecodeError) as e:
            raise FraclabError(f"cannot load config {args.config}: {e}")
        config = RunConfig.from_dict(data.get('config', data))
        if getattr(args, 'out', None):
            config.out = args.out
        return config
    if not args.command:
        raise FraclabError("no subcommand given")
    return RunConfig.from_args(args)


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Parse argv, run one subcommand and return the exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    configure_logging(getattr(args, 'log_level', None))

    try:
        config = load_config(args)
        if config.command not in COMMANDS:
            raise FraclabError(f"unknown command {config.command!r}")
        output = COMMANDS[config.command](config)
        write_output(output, config)
    except FraclabError as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        print(json.dumps({'error': str(e), 'type': type(e).__name__}, ensure_ascii=False), file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception("unexpected failure")
        print(json.dumps({'error': str(e), 'type': type(e).__name__}, ensure_ascii=False), file=sys.stderr)
        return EXIT_UNEXPECTED

    if output.failed:
        print("❌ Acceptance suite failed", file=sys.stderr)
        return EXIT_UNEXPECTED
    if not output.converged:
        print("⚠️ Some quadratures or walks did not converge", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
