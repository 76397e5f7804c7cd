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

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np

from ringmod._condenser import image_modulus
from ringmod._curves import generate_annulus_family
from ringmod._errors import DomainError
from ringmod._errors import InvalidProfileError
from ringmod._errors import PreconditionError
from ringmod._fmt import Verdict
from ringmod._fmt import fmt_ratio
from ringmod._geometry import GeodesicAnnulus
from ringmod._geometry import GridDomain
from ringmod._geometry import MetricChart
from ringmod._geometry import annulus_quadrature
from ringmod._geometry import as_points
from ringmod._geometry import lambdify_point_expression
from ringmod._geometry import sphere_points
from ringmod._geometry import sphere_quadrature
from ringmod._geometry import unit_directions
from ringmod._modulus import check_exponent
from ringmod._modulus import compute_modulus


LOG = logging.getLogger(__name__)


PointFn = Callable[[np.ndarray], np.ndarray]


# ========================================================================= #
# Mappings                                                                  #
# ========================================================================= #


class MappingKind(str, Enum):
    IDENTITY = 'identity'
    RADIAL_STRETCH = 'radial_stretch'
    USER_ANALYTIC = 'user_analytic'


@dataclass(frozen=True, eq=False)
class MappingSpec:
    """
    A mapping f from a source chart into a target chart, evaluated on arrays
    of points with shape (m, n).

    `omitted_diameter` is the declared diameter of a continuum K_f the
    mapping omits, infinite if not declared.
    """

    kind: MappingKind
    source: MetricChart
    target: MetricChart
    center: np.ndarray
    alpha: float = 1.0
    fn: Optional[PointFn] = None
    omitted_diameter: float = math.inf
    name: str = 'f'

    def __post_init__(self):
        object.__setattr__(self, 'kind', MappingKind(self.kind))
        object.__setattr__(self, 'center', as_points(self.center, self.source.dim)[0])
        if self.source.dim != self.target.dim:
            raise ValueError(f'source and target charts must have the same dimension, got: {self.source.dim} and {self.target.dim}')
        if self.kind == MappingKind.RADIAL_STRETCH and not (0 < self.alpha <= 1):
            raise PreconditionError(f'radial stretch exponent must lie in (0, 1], got: alpha={repr(self.alpha)}')
        if self.kind == MappingKind.USER_ANALYTIC and self.fn is None:
            raise ValueError('user analytic mappings require a function')

    # CONSTRUCTORS

    @classmethod
    def identity(cls, chart: MetricChart, center=None, omitted_diameter: float = math.inf) -> 'MappingSpec':
        center = np.zeros(chart.dim) if (center is None) else center
        return cls(kind=MappingKind.IDENTITY, source=chart, target=chart, center=center, omitted_diameter=omitted_diameter, name='identity')

    @classmethod
    def radial_stretch(
        cls,
        alpha: float,
        chart: MetricChart,
        center=None,
        target: Optional[MetricChart] = None,
        omitted_diameter: float = math.inf,
    ) -> 'MappingSpec':
        """
        f(x) = x0 + (x - x0)·|x - x0|^(α-1) with f(x0) = x0.
        The default target is a Euclidean chart covering the image of the source box.
        """
        center = np.zeros(chart.dim) if (center is None) else as_points(center, chart.dim)[0]
        if target is None:
            # the farthest box corner bounds the image radius
            reach = float(np.linalg.norm(np.maximum(np.abs(chart.lower - center), np.abs(chart.upper - center))))
            h = 1.001 * reach ** alpha
            target = MetricChart.euclidean(dim=chart.dim, box=np.stack([center - h, center + h], axis=1))
        return cls(kind=MappingKind.RADIAL_STRETCH, source=chart, target=target, center=center, alpha=alpha, omitted_diameter=omitted_diameter, name=f'radial_stretch({alpha})')

    @classmethod
    def user_analytic(
        cls,
        components: Union[PointFn, Sequence[str]],
        source: MetricChart,
        target: Optional[MetricChart] = None,
        center=None,
        omitted_diameter: float = math.inf,
        name: str = 'user',
    ) -> 'MappingSpec':
        """
        :param components: a function of points, or one sympy expression per
                           image coordinate in the symbols x1..xn and r = |x - x0|
        """
        center = np.zeros(source.dim) if (center is None) else center
        if callable(components):
            fn = components
        else:
            if len(components) != source.dim:
                raise ValueError(f'expected {source.dim} component expressions, got: {len(components)}')
            parts = [lambdify_point_expression(e, source.dim, center=center) for e in components]

            def fn(points: np.ndarray) -> np.ndarray:
                return np.stack([part(points) for part in parts], axis=1)

        return cls(kind=MappingKind.USER_ANALYTIC, source=source, target=source if (target is None) else target, center=center, fn=fn, omitted_diameter=omitted_diameter, name=name)

    # EVAL

    @property
    def dim(self) -> int:
        return self.source.dim

    def __call__(self, points) -> np.ndarray:
        """
        :raises DomainError if a point is outside the source chart or the image is not finite
        """
        points = self.source.check_inside(points, what=f'argument of {self.name}')
        if self.kind == MappingKind.IDENTITY:
            return points.copy()
        elif self.kind == MappingKind.RADIAL_STRETCH:
            rel = points - self.center
            r = np.linalg.norm(rel, axis=1, keepdims=True)
            with np.errstate(divide='ignore', invalid='ignore'):
                image = self.center + np.where(r > 0, rel * r ** (self.alpha - 1), 0.0)
        elif self.kind == MappingKind.USER_ANALYTIC:
            with np.errstate(divide='ignore', invalid='ignore'):
                image = np.asarray(self.fn(points), dtype=np.float64).reshape(points.shape)
        else:  # pragma: no cover
            raise NotImplementedError(f'unsupported mapping kind: {self.kind}, this is a bug!')
        finite = np.all(np.isfinite(image), axis=1)
        if not np.all(finite):
            raise DomainError(f'{self.name} is not defined at: {points[~finite][0].tolist()}')
        return image

    def known_minimal_q(self, p: float) -> Optional[float]:
        """
        The least constant Q of the ring inequality when known in closed form.
        """
        if self.kind == MappingKind.IDENTITY:
            return 1.0
        if self.kind == MappingKind.RADIAL_STRETCH:
            if math.isclose(p, self.dim):
                return self.alpha ** (1 - self.dim)
            if self.alpha == 1:
                return 1.0
        return None


# ========================================================================= #
# Q Fields                                                                  #
# ========================================================================= #


@dataclass(frozen=True, eq=False)
class QField:
    """
    A nonnegative weight Q on the source chart, evaluated on points.
    `floor` records the codomain in use, [0, inf] or [1, inf].
    """

    fn: PointFn
    name: str = 'Q'
    floor: float = 0.0
    constant_value: Optional[float] = None

    # CONSTRUCTORS

    @classmethod
    def constant(cls, value: float) -> 'QField':
        value = float(value)
        if not (value >= 0):
            raise PreconditionError(f'Q must be nonnegative, got constant: {repr(value)}')
        return cls(fn=lambda points: np.full(len(points), value), name=f'{value:g}', constant_value=value)

    @classmethod
    def expression(cls, expression: str, dim: int, center=None) -> 'QField':
        """sympy expression in x1..xn and r = |x - x0|"""
        return cls(fn=lambdify_point_expression(expression, dim, center=center), name=expression)

    @classmethod
    def power(cls, sigma: float, dim: int, center=None) -> 'QField':
        """Q(x) = |x - x0|^σ"""
        x0 = np.zeros(dim) if (center is None) else as_points(center, dim)[0]

        def fn(points):
            with np.errstate(divide='ignore'):
                return np.linalg.norm(as_points(points, dim) - x0, axis=1) ** sigma

        return cls(fn=fn, name=f'|x|^{sigma:g}')

    @classmethod
    def log_inverse(cls, dim: int, center=None) -> 'QField':
        """Q(x) = log(1/|x - x0|)"""
        x0 = np.zeros(dim) if (center is None) else as_points(center, dim)[0]

        def fn(points):
            with np.errstate(divide='ignore'):
                return -np.log(np.linalg.norm(as_points(points, dim) - x0, axis=1))

        return cls(fn=fn, name='log(1/|x|)')

    @classmethod
    def from_callable(cls, fn: PointFn, name: str = 'Q') -> 'QField':
        return cls(fn=fn, name=name)

    def with_floor(self, floor: float = 1.0) -> 'QField':
        """max(Q, floor), eg. the [1, inf] codomain of the divergence criterion"""
        value = None if self.constant_value is None else max(self.constant_value, floor)
        return QField(fn=self.fn, name=self.name, floor=float(floor), constant_value=value)

    # EVAL

    def evaluate(self, points) -> Tuple[np.ndarray, np.ndarray]:
        """
        :return: the values, and a mask of non-finite samples
        """
        points = np.asarray(points, dtype=np.float64)
        with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
            values = np.asarray(self.fn(points), dtype=np.float64).reshape(len(points))
        if np.any(values < 0):
            raise PreconditionError(f'Q={self.name} is negative at: {points[values < 0][0].tolist()}')
        values = np.maximum(values, self.floor)
        return values, ~np.isfinite(values)

    def __call__(self, points) -> np.ndarray:
        return self.evaluate(points)[0]

    def __pow__(self, s: float) -> 'QField':
        value = None if self.constant_value is None else self.constant_value ** s
        fn = self.fn
        floor = self.floor
        return QField(fn=lambda points: np.maximum(np.asarray(fn(points), dtype=np.float64), floor) ** s, name=f'({self.name})^{s:g}', constant_value=value)


def spherical_mean(Q, x0, r: float, chart: MetricChart, samples: Optional[int] = None, grid: Optional[GridDomain] = None) -> float:
    """
    q_{x0}(r) = r^(1-n)·∫_{S(x0, r)} Q dA
    """
    if r <= 0:
        raise PreconditionError(f'spherical means need a positive radius, got: {repr(r)}')
    return sphere_quadrature(x0, r, Q, chart, samples=samples, grid=grid) / r ** (chart.dim - 1)


# ========================================================================= #
# Radial Profiles                                                           #
# ========================================================================= #


@dataclass(frozen=True, eq=False)
class EtaProfile:
    """
    A radial function η on (r1, r2), zero outside, stored as samples.
    Step profiles are constant on [nodes[i], nodes[i+1]), others linear in between.
    """

    r1: float
    r2: float
    nodes: np.ndarray
    values: np.ndarray
    step: bool = False
    name: str = 'eta'

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if not (0 < self.r1 < self.r2):
            raise PreconditionError(f'profile radii must satisfy 0 < r1 < r2, got: r1={repr(self.r1)}, r2={repr(self.r2)}')
        if nodes.ndim != 1 or len(nodes) < 2 or np.any(np.diff(nodes) <= 0):
            raise ValueError('profile nodes must be strictly increasing')
        expected = (len(nodes) - 1,) if self.step else nodes.shape
        if values.shape != expected:
            raise ValueError(f'profile has {len(values)} values for {len(nodes)} nodes')
        object.__setattr__(self, 'nodes', nodes)
        object.__setattr__(self, 'values', values)

    # CONSTRUCTORS

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], np.ndarray], r1: float, r2: float, num: int = 2049, name: str = 'eta') -> 'EtaProfile':
        nodes = np.geomspace(r1, r2, num)
        return cls(r1=r1, r2=r2, nodes=nodes, values=np.asarray(fn(nodes), dtype=np.float64) * np.ones(num), name=name)

    @classmethod
    def extremal(cls, n: int, p: float, r1: float, r2: float, q: Optional[Callable[[np.ndarray], np.ndarray]] = None, num: int = 2049) -> 'EtaProfile':
        """
        η(t) ∝ 1 / (t^((n-1)/(p-1))·q(t)^(1/(p-1))), normalized to ∫η = 1,
        where q are spherical means of Q (constant if not given).
        """
        p = check_exponent(p)

        def fn(t):
            w = t ** ((1.0 - n) / (p - 1.0))
            if q is not None:
                w = w / np.asarray(q(t), dtype=np.float64) ** (1.0 / (p - 1.0))
            return w

        eta = cls.from_function(fn, r1, r2, num=num, name='extremal')
        return eta.normalized()

    @classmethod
    def uniform(cls, r1: float, r2: float) -> 'EtaProfile':
        return cls(r1=r1, r2=r2, nodes=np.array([r1, r2]), values=np.array([1.0 / (r2 - r1)]), step=True, name='uniform')

    @classmethod
    def random_steps(cls, r1: float, r2: float, seed: int = 0, steps: int = 8) -> 'EtaProfile':
        rng = np.random.default_rng([seed, 4])
        nodes = np.concatenate([[r1], np.sort(rng.uniform(r1, r2, size=steps - 1)), [r2]])
        values = rng.uniform(0.1, 1.0, size=steps)
        return cls(r1=r1, r2=r2, nodes=nodes, values=values, step=True, name=f'random_steps({seed})').normalized()

    # EVAL

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        inside = (r >= self.r1) & (r <= self.r2)
        if self.step:
            idx = np.clip(np.searchsorted(self.nodes, r, side='right') - 1, 0, len(self.values) - 1)
            values = self.values[idx]
        else:
            values = np.interp(r, self.nodes, self.values)
        return np.where(inside, values, 0.0)

    def integral(self) -> float:
        if self.step:
            return float(np.sum(self.values * np.diff(self.nodes)))
        from scipy.integrate import trapezoid
        return float(trapezoid(self.values, self.nodes))

    def normalized(self) -> 'EtaProfile':
        total = self.integral()
        if not (total > 0):
            raise InvalidProfileError(f'cannot normalize the profile {self.name}, its integral is: {total}')
        return EtaProfile(r1=self.r1, r2=self.r2, nodes=self.nodes, values=self.values / total, step=self.step, name=self.name)

    def validate(self, tol: float = 1e-3) -> 'EtaProfile':
        """
        :raises InvalidProfileError if η < 0 somewhere or ∫η < 1 - tol
        """
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise InvalidProfileError(f'profile {self.name} must be finite and nonnegative')
        total = self.integral()
        if total < 1 - tol:
            raise InvalidProfileError(f'profile {self.name} must satisfy ∫η >= 1, got: {total}')
        return self


def default_etas(Q, x0, n: int, p: float, r1: float, r2: float, chart: MetricChart, seed: int = 0, samples: Optional[int] = None) -> List[EtaProfile]:
    """
    The extremal profile for the spherical means of Q, a uniform profile and
    two seeded random step profiles.
    """
    if getattr(Q, 'constant_value', None) is not None:
        q = None
    else:
        def q(t):
            return np.array([spherical_mean(Q, x0, float(r), chart, samples=samples) for r in t])
    try:
        extremal = EtaProfile.extremal(n, p, r1, r2, q=q, num=257 if q is not None else 2049)
    except InvalidProfileError:
        extremal = EtaProfile.extremal(n, p, r1, r2)
    return [extremal, EtaProfile.uniform(r1, r2), EtaProfile.random_steps(r1, r2, seed=seed), EtaProfile.random_steps(r1, r2, seed=seed + 1)]


# ========================================================================= #
# Ring Inequality                                                           #
# ========================================================================= #


RING_COLUMNS = ('eta', 'integral', 'LHS', 'RHS', 'ratio', 'pass')


@dataclass(frozen=True)
class RingReport:
    table: 'pandas.DataFrame'
    lhs: float
    passed: bool

    @property
    def verdict(self) -> Verdict:
        return Verdict.PASS if self.passed else Verdict.FAIL


def _source_grid(annulus: GeodesicAnnulus, resolution: Optional[int]) -> GridDomain:
    outer = annulus.sphere_points(unit_directions(annulus.dim, 64), annulus.r2)
    return GridDomain.bounding(annulus.chart, outer, resolution=resolution)


def verify_ring_inequality(
    f: MappingSpec,
    x0,
    Q: QField,
    p: float,
    r1: float,
    r2: float,
    etas: Optional[Sequence[EtaProfile]] = None,
    grid: Optional[GridDomain] = None,
    count: Optional[int] = None,
    seed: int = 0,
    resolution: Optional[int] = None,
    tol: float = 0.01,
    samples: Optional[int] = None,
    **solver_kwargs,
) -> RingReport:
    """
    M_p(f(Γ(S1, S2, A))) <= ∫_A Q(x)·η^p(d(x, x0)) dv for every tested η.

    The solved left side estimates the modulus of a finite sample, so a pass
    is evidence and a fail that persists under refinement is a counterexample.

    :raises InvalidProfileError if some η has ∫η < 1
    """
    p = check_exponent(p)
    annulus = GeodesicAnnulus(center=x0, r1=r1, r2=r2, chart=f.source)
    if etas is None:
        etas = default_etas(Q, annulus.center, f.dim, p, r1, r2, f.source, seed=seed, samples=samples)
    for eta in etas:
        eta.validate()
    if grid is None:
        grid = _source_grid(annulus, resolution)
    family = generate_annulus_family(annulus, count=count, seed=seed, grid=grid)
    lhs = image_modulus(family, f, p, resolution=resolution, **solver_kwargs)[0].value

    rows = []
    for eta in etas:
        rhs = annulus_quadrature(annulus.center, r1, r2, Q, f.source, radial=lambda t, eta=eta: eta(t) ** p, samples=samples)
        ok = lhs <= rhs * (1 + tol)
        ratio = lhs / rhs if rhs > 0 else math.inf
        LOG.info(f'ring inequality for {f.name} with η={eta.name}: LHS / RHS: {fmt_ratio(lhs, rhs, use_colors=False)}, pass={ok}')
        rows.append((eta.name, eta.integral(), lhs, rhs, ratio, ok))

    import pandas as pd
    table = pd.DataFrame(rows, columns=list(RING_COLUMNS))
    return RingReport(table=table, lhs=lhs, passed=bool(table['pass'].all()))


def estimate_minimal_constant_Q(
    f: MappingSpec,
    x0,
    p: float,
    radii_grid: Sequence[Tuple[float, float]],
    count: Optional[int] = None,
    seed: int = 0,
    resolution: Optional[int] = None,
    **solver_kwargs,
) -> float:
    """
    sup over the tested rings of M_p(f(Γ)) / M_p(Γ), the least constant Q
    satisfying the ring inequality with extremal η on those rings.

    :raises PreconditionError for degenerate radii
    """
    p = check_exponent(p)
    if len(radii_grid) == 0:
        raise PreconditionError('at least one pair of radii is required')
    best = 0.0
    for r1, r2 in radii_grid:
        annulus = GeodesicAnnulus(center=x0, r1=r1, r2=r2, chart=f.source)
        grid = _source_grid(annulus, resolution)
        family = generate_annulus_family(annulus, count=count, seed=seed, grid=grid)
        source = compute_modulus(family, p, grid, **solver_kwargs).value
        image = image_modulus(family, f, p, resolution=resolution, **solver_kwargs)[0].value
        ratio = image / source
        LOG.info(f'{f.name} on A({r1}, {r2}): M_p(f(Γ))={image:.6g}, M_p(Γ)={source:.6g}, ratio={ratio:.6g}')
        best = max(best, ratio)
    known = f.known_minimal_q(p)
    if known is not None:
        LOG.info(f'estimated minimal Q={best:.6g}, closed form={known:.6g}')
    return best


def modulus_of_continuity(
    f: MappingSpec,
    x0,
    eps_list: Sequence[float],
    samples: Optional[int] = None,
    grid: Optional[GridDomain] = None,
):
    """
    ω(ε) = max over S(x0, ε) of d*(f(x), f(x0)), with the ratio ω(ε)/ε whose
    growth as ε -> 0 shows the loss of quasi-isometry.

    :return: a DataFrame with columns eps, omega, gehring_ratio
    """
    import pandas as pd
    x0 = as_points(x0, f.dim)[0]
    y0 = f(x0[None])[0]
    rows = []
    for eps in eps_list:
        if eps == 0:
            rows.append((0.0, 0.0, math.nan))
            continue
        points = sphere_points(x0, eps, f.source, count=samples, grid=grid)
        omega = float(np.max(f.target.distance_to(y0, f(points))))
        rows.append((float(eps), omega, omega / eps))
    return pd.DataFrame(rows, columns=['eps', 'omega', 'gehring_ratio'])


# ========================================================================= #
# export                                                                    #
# ========================================================================= #


__all__ = (
    # types
    'MappingKind',
    'MappingSpec',
    'QField',
    'EtaProfile',
    'RingReport',
    'RING_COLUMNS',
    # helpers
    'spherical_mean',
    'default_etas',
    # operations
    'verify_ring_inequality',
    'estimate_minimal_constant_Q',
    'modulus_of_continuity',
)


# ========================================================================= #
# END                                                                       #
# ========================================================================= #
