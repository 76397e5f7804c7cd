#  ~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~
#  MIT License
#
#  Copyright (c) 2022 Nathan Juraj Michlo
#
#  Permission is hereby granted, free of charge, to any person obtaining a copy
#  of this software and associated documentation files (the "Software"), to deal
#  in the Software without restriction, including without limitation the rights
#  to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
#  copies of the Software, and to permit persons to whom the Software is
#  furnished to do so, subject to the following conditions:
#
#  The above copyright notice and this permission notice shall be included in
#  all copies or substantial portions of the Software.
#
#  THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
#  IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
#  FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
#  AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
#  LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
#  OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
#  SOFTWARE.
#  ~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~=~

import argparse
import logging
import math
import sys
from typing import Any
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np

from ringmod._condenser import Condenser
from ringmod._condenser import capacity
from ringmod._condenser import check_lemma1_bound
from ringmod._criteria import PsiFamily
from ringmod._criteria import check_divergence_criterion
from ringmod._criteria import check_fmo
from ringmod._criteria import check_loewner_bound
from ringmod._criteria import check_ls_criterion
from ringmod._criteria import make_ladder
from ringmod._criteria import run_equicontinuity_experiment
from ringmod._criteria import theorem1_growth_check
from ringmod._curves import generate_annulus_family
from ringmod._errors import RingmodError
from ringmod._fmt import Verdict
from ringmod._fmt import fmt_use_colors_get
from ringmod._fmt import fmt_verdict_line
from ringmod._geometry import ChartKind
from ringmod._geometry import GeodesicAnnulus
from ringmod._geometry import GridDomain
from ringmod._geometry import MetricChart
from ringmod._geometry import chart_from_expression
from ringmod._geometry import unit_directions
from ringmod._io import load_yaml
from ringmod._io import read_metric_grid
from ringmod._io import write_table
from ringmod._modulus import annulus_modulus_oracle
from ringmod._modulus import compute_modulus
from ringmod._ringmap import MappingSpec
from ringmod._ringmap import QField
from ringmod._ringmap import estimate_minimal_constant_Q
from ringmod._ringmap import verify_ring_inequality


LOG = logging.getLogger(__name__)


# ========================================================================= #
# Exit Codes                                                                #
# ========================================================================= #


EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAIL = 2
EXIT_INCONCLUSIVE = 3

_VERDICT_EXIT_CODES = {
    Verdict.PASS: EXIT_OK,
    Verdict.FMO: EXIT_OK,
    Verdict.DIVERGENT: EXIT_OK,
    Verdict.FAIL: EXIT_FAIL,
    Verdict.NOT_FMO: EXIT_FAIL,
    Verdict.CONVERGENT: EXIT_FAIL,
    Verdict.INCONCLUSIVE: EXIT_INCONCLUSIVE,
    Verdict.NOT_APPLICABLE: EXIT_INCONCLUSIVE,
}


def verdict_exit_code(verdict: Verdict, expect: Optional[str] = None) -> int:
    """
    Without an expected verdict, PASS, FMO and DIVERGENT exit with 0.
    With one, matching it exits with 0 and any other definite verdict with 2.
    """
    verdict = Verdict(verdict)
    if verdict in (Verdict.INCONCLUSIVE, Verdict.NOT_APPLICABLE) and verdict.value != expect:
        return EXIT_INCONCLUSIVE
    if expect is None:
        return _VERDICT_EXIT_CODES[verdict]
    return EXIT_OK if verdict == Verdict(expect) else EXIT_FAIL


# ========================================================================= #
# Config                                                                    #
# ========================================================================= #


def _number(value) -> float:
    # allow constants like "E" or "exp(-1)" in config files
    if isinstance(value, str):
        import sympy
        return float(sympy.sympify(value))
    return float(value)


def _numbers(values) -> List[float]:
    return [_number(v) for v in values]


def chart_from_config(config: Dict[str, Any]) -> MetricChart:
    """
    Build a chart from the `chart` section of a config file.

    :raises KeyError for an unknown kind or a missing required key
    """
    kind = config.get('kind', 'euclidean')
    dim = int(config.get('dim', 2))
    half_width = _number(config.get('half_width', 1.0))
    box = config.get('box', None)
    box = [[-half_width, half_width]] * dim if (box is None) else [_numbers(b) for b in box]
    r_max = _number(config.get('r_max', math.inf))
    if kind == ChartKind.EUCLIDEAN.value:
        return MetricChart.euclidean(dim=dim, box=box, r_max=r_max)
    elif kind == ChartKind.CONFORMAL.value:
        return chart_from_expression(dim, str(config['lambda']), box=box, r_max=r_max)
    elif kind == 'poincare':
        radius = config.get('chart_radius', None)
        return MetricChart.poincare_ball(dim=dim, chart_radius=None if (radius is None) else _number(radius))
    elif kind == 'sphere':
        return MetricChart.stereographic_sphere(dim=dim, half_width=half_width)
    elif kind == ChartKind.GRID.value:
        file_dim, _, metric = read_metric_grid(config['metric_file'])
        if file_dim != dim and 'dim' in config:
            raise ValueError(f'metric grid file has dimension {file_dim}, but the config declares: {dim}')
        if 'box' not in config:
            box = [[-half_width, half_width]] * file_dim
        return MetricChart.from_metric_grid(metric, box=box, r_max=r_max)
    raise KeyError(f'invalid chart kind: {repr(kind)}, must be one of: euclidean, conformal, poincare, sphere, grid')


def q_from_config(config, dim: int, center=None) -> QField:
    """
    A Q field from a number, an expression string, or a mapping with one of
    the keys `constant`, `expression`, `power`, `log_inverse` and an optional `floor`.
    """
    if config is None:
        return QField.constant(1.0)
    if isinstance(config, (int, float)):
        return QField.constant(config)
    if isinstance(config, str):
        try:
            return QField.constant(float(config))
        except ValueError:
            return QField.expression(config, dim, center=center)
    if 'constant' in config:
        Q = QField.constant(_number(config['constant']))
    elif 'expression' in config:
        Q = QField.expression(str(config['expression']), dim, center=center)
    elif 'power' in config:
        Q = QField.power(_number(config['power']), dim, center=center)
    elif config.get('log_inverse', False):
        Q = QField.log_inverse(dim, center=center)
    else:
        raise KeyError(f'invalid Q config, expected one of the keys constant, expression, power, log_inverse, got: {sorted(config)}')
    if 'floor' in config:
        Q = Q.with_floor(_number(config['floor']))
    return Q


def mapping_from_config(config, chart: MetricChart, center) -> MappingSpec:
    """
    A mapping from a kind name, or a mapping with the keys `kind`, `alpha`,
    `components` and `omitted_diameter`.
    """
    if isinstance(config, str):
        config = {'kind': config}
    kind = config.get('kind', 'identity')
    omitted = _number(config.get('omitted_diameter', math.inf))
    if kind == 'identity':
        return MappingSpec.identity(chart, center=center, omitted_diameter=omitted)
    elif kind in ('radial_stretch', 'stretch'):
        return MappingSpec.radial_stretch(_number(config.get('alpha', 1.0)), chart, center=center, omitted_diameter=omitted)
    elif kind in ('user_analytic', 'user'):
        return MappingSpec.user_analytic([str(c) for c in config['components']], chart, center=center, omitted_diameter=omitted, name=config.get('name', 'user'))
    raise KeyError(f'invalid mapping kind: {repr(kind)}, must be one of: identity, radial_stretch, user_analytic')


def ladder_from_config(config, eps0: float, rungs: int = 12) -> np.ndarray:
    if config is None:
        return make_ladder(eps0, rungs=rungs)
    if isinstance(config, dict):
        return make_ladder(_number(config.get('eps0', eps0)), rungs=int(config.get('rungs', rungs)), ratio=_number(config.get('ratio', 0.5)))
    return np.asarray(_numbers(config))


class _Options(object):
    """
    Resolves an option from the command line first, then the command
    section of the config file, then the top level of the config file.
    """

    def __init__(self, args: argparse.Namespace, config: Dict[str, Any], command: str):
        self._args = args
        self._config = config
        self._section = config.get(command, None) or {}
        self.chart = chart_from_config(config.get('chart', None) or {})
        self.dim = self.chart.dim
        self.x0 = np.asarray(_numbers(self.get('x0', [0.0] * self.dim)), dtype=np.float64)
        self.resolution = self.get('resolution', (config.get('chart', None) or {}).get('resolution', None))
        self.resolution = None if (self.resolution is None) else int(self.resolution)

    def get(self, key: str, default=None):
        value = getattr(self._args, key, None)
        if value is not None:
            return value
        if key in self._section:
            return self._section[key]
        return self._config.get(key, default)

    def number(self, key: str, default=None) -> Optional[float]:
        value = self.get(key, default)
        return None if (value is None) else _number(value)

    def require(self, key: str) -> float:
        value = self.number(key)
        if value is None:
            raise KeyError(f'missing required option: {repr(key)}')
        return value

    def count(self) -> Optional[int]:
        value = self.get('curves', None)
        return None if (value is None) else int(value)

    def seed(self) -> int:
        return int(self.get('seed', 0))

    def q(self) -> QField:
        return q_from_config(self.get('q', None), self.dim, center=self.x0)

    def mapping(self) -> MappingSpec:
        config = self.get('map', 'identity')
        if isinstance(config, str):
            config = {'kind': config}
        if self._args_value('alpha') is not None:
            config = {**config, 'alpha': self._args_value('alpha')}
        return mapping_from_config(config, self.chart, self.x0)

    def solver(self) -> Dict[str, Any]:
        kwargs = {}
        for key in ('tol', 'max_iter', 'method'):
            value = self.get(key, None)
            if value is not None:
                kwargs[key] = value
        return kwargs

    def _args_value(self, key: str):
        return getattr(self._args, key, None)


# ========================================================================= #
# Commands                                                                  #
# ========================================================================= #


CommandResult = Tuple['pandas.DataFrame', Verdict, Dict[str, Any]]


def _annulus_grid(annulus: GeodesicAnnulus, resolution: Optional[int]) -> GridDomain:
    outer = annulus.sphere_points(unit_directions(annulus.dim, 64), annulus.r2)
    return GridDomain.bounding(annulus.chart, outer, resolution=resolution)


def _oracle_row(opts: _Options, p: float, r1: float, r2: float, value: float, converged: bool, rtol: float = 0.05) -> Tuple[Dict[str, Any], Verdict]:
    row = {}
    verdict = Verdict.PASS if converged else Verdict.INCONCLUSIVE
    if opts.chart.kind == ChartKind.EUCLIDEAN:
        oracle = annulus_modulus_oracle(opts.dim, p, r1, r2)
        error = abs(value - oracle) / oracle
        row = {'oracle': oracle, 'relative_error': error}
        if error > rtol:
            verdict = Verdict.FAIL
    return row, verdict


def cmd_modulus(opts: _Options, args: argparse.Namespace) -> CommandResult:
    import pandas as pd
    p = opts.require('p')
    r1, r2 = opts.require('r1'), opts.require('r2')
    annulus = GeodesicAnnulus(center=opts.x0, r1=r1, r2=r2, chart=opts.chart)
    grid = _annulus_grid(annulus, opts.resolution)
    family = generate_annulus_family(annulus, count=opts.count(), seed=opts.seed(), grid=grid)
    result = compute_modulus(family, p, grid, **opts.solver())
    if args.solver_report is not None:
        result.write_report(args.solver_report)
    row = dict(n=opts.dim, p=p, r1=r1, r2=r2, curves=len(family), value=result.value, lower_bound=result.lower_bound, duality_gap=result.duality_gap, iterations=result.iterations, converged=result.converged)
    extra, verdict = _oracle_row(opts, p, r1, r2, result.value, result.converged)
    row.update(extra)
    return pd.DataFrame([row]), verdict, dict(value=result.value, gap=result.duality_gap)


def cmd_capacity(opts: _Options, args: argparse.Namespace) -> CommandResult:
    import pandas as pd
    p = opts.require('p')
    cond = Condenser(center=opts.x0, eps=opts.require('eps'), eps0=opts.require('eps0'), chart=opts.chart)
    grid = _annulus_grid(cond.annulus, opts.resolution)
    result = capacity(cond, p, grid=grid, count=opts.count(), seed=opts.seed(), **opts.solver())
    row = dict(n=opts.dim, p=p, eps=cond.eps, eps0=cond.eps0, value=result.value, lower_bound=result.lower_bound, duality_gap=result.duality_gap, converged=result.converged)
    extra, verdict = _oracle_row(opts, p, cond.eps, cond.eps0, result.value, result.converged)
    row.update(extra)
    return pd.DataFrame([row]), verdict, dict(value=result.value)


def cmd_lemma1(opts: _Options, args: argparse.Namespace) -> CommandResult:
    p = opts.require('p')
    eps0 = opts.require('eps0')
    eps_list = _numbers(opts.get('eps_list', [0.5 * eps0, 0.25 * eps0]))
    cond = Condenser(center=opts.x0, eps=min(eps_list), eps0=eps0, chart=opts.chart)
    kind = opts.get('psi', 'log_power' if eps0 < 1 else 'reciprocal')
    if kind == 'log_power':
        psi = PsiFamily.log_power(opts.dim, p, eps0)
    elif kind == 'reciprocal':
        psi = PsiFamily.reciprocal(opts.dim, p, eps0)
    else:
        raise KeyError(f'invalid psi: {repr(kind)}, must be one of: log_power, reciprocal')
    report = check_lemma1_bound(opts.mapping(), cond, opts.q(), p, psi, eps_list, count=opts.count(), seed=opts.seed(), resolution=opts.resolution, **opts.solver())
    return report.table, report.verdict, dict(rows=len(report.table), lhs_decreasing=report.lhs_decreasing)


def cmd_verify_ring(opts: _Options, args: argparse.Namespace) -> CommandResult:
    f = opts.mapping()
    report = verify_ring_inequality(
        f, opts.x0, opts.q(), opts.require('p'), opts.require('r1'), opts.require('r2'),
        count=opts.count(), seed=opts.seed(), resolution=opts.resolution, **opts.solver(),
    )
    return report.table, report.verdict, dict(lhs=report.lhs, max_ratio=float(report.table['ratio'].max()))


def cmd_estimate_q(opts: _Options, args: argparse.Namespace) -> CommandResult:
    import pandas as pd
    p = opts.require('p')
    f = opts.mapping()
    radii = [tuple(_numbers(r)) for r in opts.get('radii', [[0.1, 0.5]])]
    estimate = estimate_minimal_constant_Q(f, opts.x0, p, radii, count=opts.count(), seed=opts.seed(), resolution=opts.resolution, **opts.solver())
    known = f.known_minimal_q(p)
    verdict = Verdict.PASS
    if known is not None and abs(estimate - known) > _number(opts.get('rtol', 0.1)) * known:
        verdict = Verdict.FAIL
    table = pd.DataFrame([dict(mapping=f.name, p=p, estimate=estimate, closed_form=math.nan if (known is None) else known)])
    return table, verdict, dict(estimate=estimate)


def cmd_check_fmo(opts: _Options, args: argparse.Namespace) -> CommandResult:
    grid = GridDomain(opts.chart, resolution=opts.resolution)
    ladder = opts.get('ladder', None)
    ladder = None if (ladder is None) else ladder_from_config(ladder, 0.25)
    report = check_fmo(opts.q(), opts.x0, grid, ladder=ladder, resolution=int(opts.get('ball_resolution', 64)))
    return report.table(), report.verdict, dict(slope=report.slope, clamped=report.clamped)


def cmd_check_divergence(opts: _Options, args: argparse.Namespace) -> CommandResult:
    delta = opts.require('delta')
    ladder = opts.get('ladder', None)
    ladder = None if (ladder is None) else ladder_from_config(ladder, delta, rungs=20)
    report = check_divergence_criterion(opts.q(), opts.x0, opts.require('p'), opts.dim, delta, ladder=ladder, chart=opts.chart)
    return report.table, report.verdict, report.values


def cmd_check_ls(opts: _Options, args: argparse.Namespace) -> CommandResult:
    eps0 = opts.require('eps0')
    ladder = opts.get('ladder', None)
    ladder = None if (ladder is None) else ladder_from_config(ladder, eps0)
    report = check_ls_criterion(
        opts.q(), opts.x0, opts.dim, opts.require('p'), opts.require('s'), eps0,
        ladder=ladder, chart=opts.chart, resolution=opts.resolution or 128,
    )
    return report.table, report.verdict, report.values


def cmd_theorem1_growth(opts: _Options, args: argparse.Namespace) -> CommandResult:
    eps0 = opts.require('eps0')
    Q = opts.q()
    ladder = ladder_from_config(opts.get('ladder', None), eps0, rungs=8)
    fmo_report = None
    if opts.get('require_fmo', False):
        fmo_report = check_fmo(Q, opts.x0, GridDomain(opts.chart, resolution=opts.resolution))
    report = theorem1_growth_check(Q, opts.x0, opts.dim, opts.require('p'), eps0, ladder, chart=opts.chart, fmo_report=fmo_report)
    return report.table, report.verdict, report.values


def cmd_equicontinuity(opts: _Options, args: argparse.Namespace) -> CommandResult:
    mappings = [mapping_from_config(m, opts.chart, opts.x0) for m in opts.get('mappings', ['identity'])]
    budget = q_from_config(opts.get('budget', None), opts.dim, center=opts.x0)
    ladder = ladder_from_config(opts.get('ladder', None), 0.5, rungs=6)
    radii = opts.get('radii', None)
    radii = None if (radii is None) else [tuple(_numbers(r)) for r in radii]
    report = run_equicontinuity_experiment(
        mappings, budget, opts.x0, opts.require('p'), ladder,
        delta=opts.number('delta'), sigma=opts.number('sigma'), radii_grid=radii,
        count=opts.count(), seed=opts.seed(), resolution=opts.resolution, **opts.solver(),
    )
    return report.table, report.verdict, dict(mappings=len(mappings), excluded=len(report.excluded))


def cmd_loewner(opts: _Options, args: argparse.Namespace) -> CommandResult:
    pairs = [(np.asarray([_numbers(v) for v in pair['E']]), np.asarray([_numbers(v) for v in pair['F']])) for pair in opts.get('pairs', [])]
    rescale = opts.get('rescale', 0.5)
    report = check_loewner_bound(
        pairs, opts.require('p'), opts.require('R'), x0=opts.x0,
        count=opts.count(), seed=opts.seed(), resolution=opts.resolution,
        rescale=None if (rescale is None) else _number(rescale), **opts.solver(),
    )
    return report.table, report.verdict, dict(inv_c=report.inv_c, stable=report.stable)


COMMANDS = {
    'modulus': cmd_modulus,
    'capacity': cmd_capacity,
    'lemma1': cmd_lemma1,
    'verify-ring': cmd_verify_ring,
    'estimate-q': cmd_estimate_q,
    'check-fmo': cmd_check_fmo,
    'check-divergence': cmd_check_divergence,
    'check-ls': cmd_check_ls,
    'theorem1-growth': cmd_theorem1_growth,
    'equicontinuity': cmd_equicontinuity,
    'loewner': cmd_loewner,
}


# ========================================================================= #
# Parser                                                                    #
# ========================================================================= #


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default=None, help='YAML file with the chart, Q and per-command sections')
    common.add_argument('--out', default=None, help='CSV report path, stdout if omitted')
    common.add_argument('-v', '--verbose', action='count', default=0, help='-v for info, -vv for debug logging')
    common.add_argument('--tol', type=float, default=None, help='relative duality gap of the modulus solver')
    common.add_argument('--p', type=float, default=None)
    common.add_argument('--curves', type=int, default=None, help='number of sampled curves')
    common.add_argument('--seed', type=int, default=None)
    common.add_argument('--resolution', type=int, default=None, help='grid cells per axis')
    common.add_argument('--expect', default=None, choices=[v.value for v in Verdict], help='verdict that counts as success')

    parser = argparse.ArgumentParser(prog='ringmod', description='p-moduli, condenser capacities and ring mapping checks')
    subparsers = parser.add_subparsers(dest='command', required=True)
    for name in COMMANDS:
        sub = subparsers.add_parser(name, parents=[common])
        if name in ('modulus', 'verify-ring'):
            sub.add_argument('--r1', type=float, default=None)
            sub.add_argument('--r2', type=float, default=None)
        if name == 'modulus':
            sub.add_argument('--solver-report', default=None, help='CSV path for the solver history')
        if name == 'capacity':
            sub.add_argument('--eps', type=float, default=None)
            sub.add_argument('--eps0', type=float, default=None)
        if name == 'verify-ring':
            sub.add_argument('--map', default=None, choices=['identity', 'radial_stretch'])
            sub.add_argument('--alpha', type=float, default=None)
            sub.add_argument('--q', default=None, help='constant or expression in x1..xn and r')
    return parser


def _configure_logging(verbose: int):
    level = logging.WARNING if verbose <= 0 else (logging.INFO if verbose == 1 else logging.DEBUG)
    logging.basicConfig(level=level, format='[%(name)s:%(funcName)s:%(lineno)s] %(levelname)s: %(message)s')


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        config = load_yaml(args.config) if args.config else {}
        opts = _Options(args, config, args.command)
        table, verdict, values = COMMANDS[args.command](opts, args)
        if args.out is None:
            write_table(table, file=sys.stdout)
            stream = sys.stderr
        else:
            write_table(table, args.out)
            stream = sys.stdout
        use_colors = fmt_use_colors_get() and stream.isatty()
        print(fmt_verdict_line(args.command, verdict, use_colors=use_colors, **values), file=stream)
        return verdict_exit_code(verdict, expect=opts.get('expect', None))
    except (RingmodError, KeyError, ValueError, OSError) as e:
        LOG.debug('command failed', exc_info=True)
        print(f'ringmod {args.command}: error: {e}', file=sys.stderr)
        return EXIT_ERROR


# ========================================================================= #
# export                                                                    #
# ========================================================================= #


__all__ = (
    'EXIT_OK',
    'EXIT_ERROR',
    'EXIT_FAIL',
    'EXIT_INCONCLUSIVE',
    'verdict_exit_code',
    'chart_from_config',
    'q_from_config',
    'mapping_from_config',
    'ladder_from_config',
    'make_parser',
    'main',
)


# ========================================================================= #
# END                                                                       #
# ========================================================================= #
