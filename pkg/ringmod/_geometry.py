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
from typing import Dict
from typing import NoReturn
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np
from scipy.special import gamma

from ringmod._errors import DomainError
from ringmod._errors import PreconditionError
from ringmod._errors import UnreachableError
from ringmod._utils import VarHandlerInt


LOG = logging.getLogger(__name__)


# ========================================================================= #
# Variable Handlers                                                         #
# ========================================================================= #


_VAR_HANDLER_GRID_RESOLUTION = VarHandlerInt(
    identifier='grid_resolution',
    environ_key='RINGMOD_GRID_RESOLUTION',
    fallback_value=256,
    min_value=4,
)

_VAR_HANDLER_SPHERE_SAMPLES = VarHandlerInt(
    identifier='sphere_samples',
    environ_key='RINGMOD_SPHERE_SAMPLES',
    fallback_value=1024,
    min_value=8,
)


def grid_resolution_set_default(resolution: Optional[int]) -> NoReturn:
    return _VAR_HANDLER_GRID_RESOLUTION.set_default_value(value=resolution)


def grid_resolution_get(resolution: Optional[int] = None) -> int:
    return _VAR_HANDLER_GRID_RESOLUTION.get_value(override=resolution)


def sphere_samples_set_default(samples: Optional[int]) -> NoReturn:
    return _VAR_HANDLER_SPHERE_SAMPLES.set_default_value(value=samples)


def sphere_samples_get(samples: Optional[int] = None) -> int:
    return _VAR_HANDLER_SPHERE_SAMPLES.get_value(override=samples)


# ========================================================================= #
# Types                                                                     #
# ========================================================================= #


Points = np.ndarray
PointFn = Callable[[np.ndarray], np.ndarray]
DistanceFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class ChartKind(str, Enum):
    EUCLIDEAN = 'euclidean'
    CONFORMAL = 'conformal'
    GRID = 'grid'


def sphere_area(n: int) -> float:
    """
    ω_{n-1}, the area of the unit sphere in R^n, eg. 2π for n=2 and 4π for n=3
    """
    return 2 * math.pi ** (n / 2) / gamma(n / 2)


def as_points(points, dim: Optional[int] = None) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[None, :]
    if points.ndim != 2:
        raise ValueError(f'points must have shape (m, n), got: {points.shape}')
    if dim is not None and points.shape[1] != dim:
        raise ValueError(f'points must have dimension {dim}, got: {points.shape[1]}')
    return points


# ========================================================================= #
# Metric Chart                                                              #
# ========================================================================= #


@dataclass(frozen=True, eq=False)
class MetricChart:
    """
    A coordinate chart with a Riemannian metric g_ij.

    - Euclidean charts have g_ij = δ_ij.
    - Conformal charts have g_ij = λ(x)^2 δ_ij.
    - Grid charts interpolate a sampled tensor field.

    The chart declares `r_max`, the geodesic radius below which spheres and
    annuli around its points are treated as lying in a normal neighbourhood.
    """

    dim: int
    box: np.ndarray
    kind: ChartKind = ChartKind.EUCLIDEAN
    scale_fn: Optional[PointFn] = None
    metric_fn: Optional[PointFn] = None
    distance_fn: Optional[DistanceFn] = None
    r_max: float = math.inf
    name: str = 'chart'

    def __post_init__(self):
        box = np.array(self.box, dtype=np.float64)
        object.__setattr__(self, 'box', box)
        object.__setattr__(self, 'kind', ChartKind(self.kind))
        if not isinstance(self.dim, int) or self.dim < 2:
            raise ValueError(f'chart dimension must be an integer >= 2, got: {repr(self.dim)}')
        if box.shape != (self.dim, 2):
            raise ValueError(f'chart box must have shape ({self.dim}, 2), got: {box.shape}')
        if not np.all(box[:, 0] < box[:, 1]):
            raise ValueError(f'chart box must have lower < upper bounds on every axis, got: {box.tolist()}')
        if self.kind == ChartKind.CONFORMAL and self.scale_fn is None:
            raise ValueError('conformal charts require a scale function λ(x)')
        if self.kind == ChartKind.GRID and self.metric_fn is None:
            raise ValueError('grid charts require a metric function')
        if not (self.r_max > 0):
            raise ValueError(f'r_max must be positive, got: {repr(self.r_max)}')

    # CONSTRUCTORS

    @classmethod
    def euclidean(cls, dim: int = 2, box=None, half_width: float = 1.0, r_max: float = math.inf) -> 'MetricChart':
        if box is None:
            box = [[-half_width, half_width]] * dim
        return cls(dim=dim, box=box, kind=ChartKind.EUCLIDEAN, distance_fn=_euclidean_distance, r_max=r_max, name='euclidean')

    @classmethod
    def conformal(
        cls,
        dim: int,
        lam: PointFn,
        box,
        r_max: float = math.inf,
        distance: Optional[DistanceFn] = None,
        name: str = 'conformal',
    ) -> 'MetricChart':
        return cls(dim=dim, box=box, kind=ChartKind.CONFORMAL, scale_fn=lam, distance_fn=distance, r_max=r_max, name=name)

    @classmethod
    def poincare_ball(cls, dim: int = 2, chart_radius: Optional[float] = None) -> 'MetricChart':
        """
        The Poincaré ball model λ(x) = 2/(1-|x|^2), restricted to a box whose
        corners stay inside the unit ball.
        """
        if chart_radius is None:
            chart_radius = 0.99 / math.sqrt(dim)
        if not (0 < chart_radius * math.sqrt(dim) < 1):
            raise ValueError(f'the chart box with half width {chart_radius} must lie inside the unit ball')
        return cls(
            dim=dim,
            box=[[-chart_radius, chart_radius]] * dim,
            kind=ChartKind.CONFORMAL,
            scale_fn=_poincare_scale,
            distance_fn=_poincare_distance,
            r_max=2 * math.atanh(chart_radius),
            name='poincare',
        )

    @classmethod
    def stereographic_sphere(cls, dim: int = 2, half_width: float = 1.0) -> 'MetricChart':
        """
        The unit sphere in stereographic coordinates, λ(x) = 2/(1+|x|^2).
        """
        return cls(
            dim=dim,
            box=[[-half_width, half_width]] * dim,
            kind=ChartKind.CONFORMAL,
            scale_fn=_sphere_scale,
            distance_fn=_sphere_distance,
            r_max=2 * math.atan(half_width),
            name='sphere',
        )

    @classmethod
    def from_metric_grid(cls, metric: np.ndarray, box, r_max: float = math.inf, name: str = 'grid') -> 'MetricChart':
        """
        A chart whose metric tensor is sampled at the cell centers of a regular
        grid over `box`, with shape (res,)*n + (n, n). Values between samples are
        interpolated linearly.
        """
        from scipy.interpolate import RegularGridInterpolator
        metric = np.asarray(metric, dtype=np.float64)
        n = metric.shape[-1]
        res = metric.shape[0]
        if metric.shape != (res,) * n + (n, n):
            raise ValueError(f'metric grid must have shape (res,)*n + (n, n), got: {metric.shape}')
        flat = metric.reshape(-1, n, n)
        if not np.allclose(flat, np.swapaxes(flat, 1, 2), rtol=1e-10, atol=1e-12):
            raise ValueError('metric grid samples must be symmetric')
        if not np.all(np.linalg.eigvalsh(flat)[:, 0] > 0):
            raise ValueError('metric grid samples must be positive-definite, det g_ij > 0')
        box = np.asarray(box, dtype=np.float64)
        axes = [lo + (np.arange(res) + 0.5) * (hi - lo) / res for lo, hi in box]
        interp = RegularGridInterpolator(axes, metric, method='linear')
        lo = np.array([a[0] for a in axes])
        hi = np.array([a[-1] for a in axes])

        def metric_fn(points: np.ndarray) -> np.ndarray:
            return interp(np.clip(points, lo, hi))

        return cls(dim=n, box=box, kind=ChartKind.GRID, metric_fn=metric_fn, r_max=r_max, name=name)

    # PROPS

    @property
    def lower(self) -> np.ndarray:
        return self.box[:, 0]

    @property
    def upper(self) -> np.ndarray:
        return self.box[:, 1]

    @property
    def has_analytic_distance(self) -> bool:
        return self.distance_fn is not None

    # CHECKS

    def contains(self, points) -> np.ndarray:
        points = as_points(points, self.dim)
        tol = 1e-9 * (self.upper - self.lower)
        return np.all((points >= self.lower - tol) & (points <= self.upper + tol), axis=1)

    def check_inside(self, points, what: str = 'point') -> np.ndarray:
        points = as_points(points, self.dim)
        inside = self.contains(points)
        if not np.all(inside):
            bad = points[~inside][0]
            raise DomainError(f'{what} outside of the {self.name} chart box {self.box.tolist()}: {bad.tolist()}')
        return points

    # METRIC

    def scale(self, points) -> np.ndarray:
        points = as_points(points, self.dim)
        if self.kind == ChartKind.EUCLIDEAN:
            return np.ones(len(points))
        elif self.kind == ChartKind.CONFORMAL:
            return np.asarray(self.scale_fn(points), dtype=np.float64).reshape(len(points))
        raise TypeError(f'charts of kind {self.kind.value} have no conformal scale')

    def metric(self, points) -> np.ndarray:
        points = as_points(points, self.dim)
        if self.kind == ChartKind.EUCLIDEAN:
            return np.broadcast_to(np.eye(self.dim), (len(points), self.dim, self.dim))
        elif self.kind == ChartKind.CONFORMAL:
            return self.scale(points)[:, None, None] ** 2 * np.eye(self.dim)
        elif self.kind == ChartKind.GRID:
            return np.asarray(self.metric_fn(points), dtype=np.float64)
        raise NotImplementedError(f'unsupported chart kind: {self.kind}, this is a bug!')

    def sqrt_det(self, points) -> np.ndarray:
        """
        the volume density √det g_ij
        """
        points = as_points(points, self.dim)
        if self.kind == ChartKind.EUCLIDEAN:
            return np.ones(len(points))
        elif self.kind == ChartKind.CONFORMAL:
            return self.scale(points) ** self.dim
        with np.errstate(invalid='ignore'):
            return np.sqrt(np.linalg.det(self.metric(points)))

    def segment_lengths(self, a, b) -> np.ndarray:
        """
        metric lengths of the straight segments a[i] -> b[i], midpoint rule
        """
        a, b = as_points(a, self.dim), as_points(b, self.dim)
        d = b - a
        mid = 0.5 * (a + b)
        if self.kind == ChartKind.EUCLIDEAN:
            return np.linalg.norm(d, axis=1)
        elif self.kind == ChartKind.CONFORMAL:
            return self.scale(mid) * np.linalg.norm(d, axis=1)
        g = self.metric(mid)
        with np.errstate(invalid='ignore'):
            return np.sqrt(np.einsum('mi,mij,mj->m', d, g, d))

    # DISTANCE

    def analytic_distance(self, x, y) -> np.ndarray:
        if self.distance_fn is None:
            raise TypeError(f'the {self.name} chart has no analytic distance')
        x, y = np.broadcast_arrays(as_points(x, self.dim), as_points(y, self.dim))
        return np.asarray(self.distance_fn(x, y), dtype=np.float64)

    def default_grid(self, resolution: Optional[int] = None) -> 'GridDomain':
        """
        The chart-wide grid used for numeric distances when no grid is given.
        One grid is kept per resolution, so its distance fields are reused.
        """
        resolution = grid_resolution_get(resolution)
        grids = self.__dict__.setdefault('_default_grids', {})
        if resolution not in grids:
            LOG.debug(f'building the default {resolution}^{self.dim} grid of the {self.name} chart')
            grids[resolution] = GridDomain(self, resolution=resolution)
        return grids[resolution]

    def distance_to(self, x0, points, grid: Optional['GridDomain'] = None) -> np.ndarray:
        """
        d(x0, points), analytically if possible, otherwise from the
        grid-graph distance field of `x0` (cached on the grid).
        """
        points = as_points(points, self.dim)
        if self.has_analytic_distance:
            return self.analytic_distance(x0, points)
        if grid is None:
            grid = self.default_grid()
        return grid.distance_field(x0).interpolate(points)

    def check_patch_radius(self, r: float, what: str = 'radius') -> NoReturn:
        if r > self.r_max:
            raise PreconditionError(f'{what}: {repr(r)} exceeds the normal-patch guard r_max={self.r_max} of the {self.name} chart')


# analytic metrics


def _euclidean_distance(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.linalg.norm(x - y, axis=-1)


def _poincare_scale(x: np.ndarray) -> np.ndarray:
    return 2 / (1 - np.sum(x**2, axis=-1))


def _poincare_distance(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    xx = np.sum(x**2, axis=-1)
    yy = np.sum(y**2, axis=-1)
    dd = np.sum((x - y)**2, axis=-1)
    return np.arccosh(1 + 2 * dd / ((1 - xx) * (1 - yy)))


def _sphere_scale(x: np.ndarray) -> np.ndarray:
    return 2 / (1 + np.sum(x**2, axis=-1))


def _sphere_distance(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    xx = np.sum(x**2, axis=-1)
    yy = np.sum(y**2, axis=-1)
    chord = 2 * np.linalg.norm(x - y, axis=-1) / np.sqrt((1 + xx) * (1 + yy))
    return 2 * np.arcsin(np.clip(chord / 2, 0, 1))


def chart_from_expression(
    dim: int,
    expression: str,
    box,
    r_max: float = math.inf,
    center=None,
    name: str = 'conformal',
) -> MetricChart:
    """
    A conformal chart from a sympy expression for λ in the symbols x1..xn
    and r = |x - center|, eg. "2/(1 - r**2)".
    """
    return MetricChart.conformal(
        dim=dim,
        lam=lambdify_point_expression(expression, dim, center=center),
        box=box,
        r_max=r_max,
        name=name,
    )


def lambdify_point_expression(expression: str, dim: int, center=None) -> PointFn:
    """
    Compile a scalar sympy expression in x1..xn and r = |x - center|
    into a vectorized function of points with shape (m, n).
    """
    import sympy
    xs = sympy.symbols(' '.join(f'x{i+1}' for i in range(dim)))
    r = sympy.Symbol('r', nonnegative=True)
    try:
        expr = sympy.sympify(expression, locals={**{str(s): s for s in xs}, 'r': r})
    except (sympy.SympifyError, TypeError) as e:
        raise ValueError(f'invalid expression: {repr(expression)}') from e
    unknown = {str(s) for s in expr.free_symbols} - {str(s) for s in xs} - {'r'}
    if unknown:
        raise ValueError(f'expression {repr(expression)} uses unknown symbols: {sorted(unknown)}, allowed are x1..x{dim} and r')
    fn = sympy.lambdify([*xs, r], expr, modules='numpy')
    center = np.zeros(dim) if center is None else np.asarray(center, dtype=np.float64)

    def point_fn(points: np.ndarray) -> np.ndarray:
        points = as_points(points, dim)
        radii = np.linalg.norm(points - center, axis=1)
        with np.errstate(divide='ignore', invalid='ignore'):
            values = fn(*points.T, radii)
        return np.broadcast_to(np.asarray(values, dtype=np.float64), (len(points),)).copy()

    return point_fn


# ========================================================================= #
# Grid Domain                                                               #
# ========================================================================= #


class GridDomain(object):
    """
    A regular grid of cells over a box of a chart, with the metric
    volume v_c = √det g(center_c)·Π h_k of every cell.

    Cells with a non-finite or non-positive volume are invalid,
    densities are never placed on them and the graph skips them.
    """

    def __init__(
        self,
        chart: MetricChart,
        resolution: Optional[int] = None,
        box=None,
    ):
        self._chart = chart
        self._resolution = grid_resolution_get(resolution)
        box = chart.box if (box is None) else np.asarray(box, dtype=np.float64)
        if box.shape != (chart.dim, 2) or not np.all(box[:, 0] < box[:, 1]):
            raise ValueError(f'invalid grid box: {box.tolist()}')
        chart.check_inside(box.T, what='grid box corner')
        self._box = box
        self._cell_size = (box[:, 1] - box[:, 0]) / self._resolution
        self._axes = [lo + (np.arange(self._resolution) + 0.5) * h for (lo, _), h in zip(box, self._cell_size)]
        self._centers = None
        self._volumes = None
        self._graph = None
        self._fields: Dict[Tuple[float, ...], 'DistanceField'] = {}

    @classmethod
    def bounding(cls, chart: MetricChart, points, margin: float = 0.05, resolution: Optional[int] = None) -> 'GridDomain':
        """
        A grid with square cells covering the given points plus a relative margin,
        clipped to the chart box.
        """
        points = chart.check_inside(points)
        lo, hi = points.min(axis=0), points.max(axis=0)
        mid = 0.5 * (lo + hi)
        half = 0.5 * np.max(hi - lo) * (1 + 2 * margin)
        half = half if half > 0 else 1e-3
        box = np.stack([np.maximum(mid - half, chart.lower), np.minimum(mid + half, chart.upper)], axis=1)
        return cls(chart, resolution=resolution, box=box)

    def zoom(self, center, half_width: float) -> 'GridDomain':
        """
        A grid with the same resolution over the box center ± half_width.
        """
        center = as_points(center, self.dim)[0]
        box = np.stack([center - half_width, center + half_width], axis=1)
        return GridDomain(self._chart, resolution=self._resolution, box=box)

    # PROPS

    @property
    def chart(self) -> MetricChart:
        return self._chart

    @property
    def dim(self) -> int:
        return self._chart.dim

    @property
    def resolution(self) -> int:
        return self._resolution

    @property
    def box(self) -> np.ndarray:
        return self._box

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self._resolution,) * self.dim

    @property
    def size(self) -> int:
        return self._resolution ** self.dim

    @property
    def cell_size(self) -> np.ndarray:
        return self._cell_size

    @property
    def cell_diameter(self) -> float:
        return float(np.linalg.norm(self._cell_size))

    @property
    def axes(self) -> Sequence[np.ndarray]:
        return self._axes

    @property
    def centers(self) -> np.ndarray:
        if self._centers is None:
            mesh = np.meshgrid(*self._axes, indexing='ij')
            self._centers = np.stack([m.reshape(-1) for m in mesh], axis=1)
        return self._centers

    @property
    def cell_volumes(self) -> np.ndarray:
        if self._volumes is None:
            with np.errstate(invalid='ignore', divide='ignore', over='ignore'):
                vols = self._chart.sqrt_det(self.centers) * np.prod(self._cell_size)
            valid = np.isfinite(vols) & (vols > 0)
            if not np.all(valid):
                LOG.warning(f'{np.sum(~valid)} of {self.size} cells of the {self._chart.name} grid have no finite positive volume and are excluded')
            self._volumes = np.where(valid, vols, np.inf)
        return self._volumes

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.cell_volumes)

    # INDEXING

    def locate(self, points) -> np.ndarray:
        """
        flat indices of the cells containing the points
        """
        points = as_points(points, self.dim)
        tol = 1e-9 * (self._box[:, 1] - self._box[:, 0])
        if not np.all((points >= self._box[:, 0] - tol) & (points <= self._box[:, 1] + tol)):
            bad = points[~np.all((points >= self._box[:, 0] - tol) & (points <= self._box[:, 1] + tol), axis=1)][0]
            raise DomainError(f'point outside of the grid box {self._box.tolist()}: {bad.tolist()}')
        idx = np.floor((points - self._box[:, 0]) / self._cell_size).astype(np.int64)
        idx = np.clip(idx, 0, self._resolution - 1)
        return np.ravel_multi_index(tuple(idx.T), self.shape)

    # GRAPH

    def _stencil(self) -> np.ndarray:
        # primitive offsets, one per undirected edge direction
        reach = 2 if self.dim == 2 else 1
        rng = range(-reach, reach + 1)
        offsets = []
        for o in np.stack(np.meshgrid(*[rng] * self.dim, indexing='ij'), axis=-1).reshape(-1, self.dim):
            if not np.any(o):
                continue
            if np.gcd.reduce(np.abs(o)) != 1:
                continue
            first = o[np.nonzero(o)[0][0]]
            if first > 0:
                offsets.append(o)
        return np.array(offsets, dtype=np.int64)

    def graph(self):
        """
        The undirected grid graph with metric edge weights, as a scipy CSR matrix.
        """
        if self._graph is None:
            from scipy.sparse import coo_matrix
            shape = np.array(self.shape)
            multi = np.stack(np.unravel_index(np.arange(self.size), self.shape), axis=1)
            valid = self.valid
            rows, cols, weights = [], [], []
            for o in self._stencil():
                target = multi + o
                ok = np.all((target >= 0) & (target < shape), axis=1)
                src = np.nonzero(ok)[0]
                dst = np.ravel_multi_index(tuple(target[ok].T), self.shape)
                keep = valid[src] & valid[dst]
                src, dst = src[keep], dst[keep]
                w = self._chart.segment_lengths(self.centers[src], self.centers[dst])
                finite = np.isfinite(w) & (w > 0)
                rows.append(src[finite])
                cols.append(dst[finite])
                weights.append(w[finite])
            rows, cols, weights = np.concatenate(rows), np.concatenate(cols), np.concatenate(weights)
            self._graph = coo_matrix((weights, (rows, cols)), shape=(self.size, self.size)).tocsr()
            LOG.debug(f'built grid graph with {self.size} nodes and {len(weights)} edges')
        return self._graph

    def _attach(self, points: np.ndarray):
        """
        edges from extra nodes (one per point) to the valid cells around them
        """
        reach = 2 if self.dim == 2 else 1
        idx = np.stack(np.unravel_index(self.locate(points), self.shape), axis=1)
        rows, cols, weights = [], [], []
        offsets = np.stack(np.meshgrid(*[range(-reach, reach + 1)] * self.dim, indexing='ij'), axis=-1).reshape(-1, self.dim)
        for k, (p, i) in enumerate(zip(points, idx)):
            nb = i + offsets
            nb = nb[np.all((nb >= 0) & (nb < self._resolution), axis=1)]
            flat = np.ravel_multi_index(tuple(nb.T), self.shape)
            flat = flat[self.valid[flat]]
            w = self._chart.segment_lengths(np.broadcast_to(p, (len(flat), self.dim)), self.centers[flat])
            ok = np.isfinite(w)
            rows.append(np.full(np.sum(ok), k))
            cols.append(flat[ok])
            weights.append(w[ok])
        return rows, cols, weights

    def _augmented_graph(self, points: np.ndarray):
        from scipy.sparse import coo_matrix
        m = len(points)
        rows, cols, weights = self._attach(points)
        base = self.graph().tocoo()
        # explicit zeros would be dropped, a touching point gets a tiny positive weight
        rows = np.concatenate([base.row, self.size + np.concatenate(rows)])
        cols = np.concatenate([base.col, np.concatenate(cols)])
        weights = np.concatenate([base.data, np.maximum(np.concatenate(weights), 1e-300)])
        n = self.size + m
        return coo_matrix((weights, (rows, cols)), shape=(n, n)).tocsr(), m

    def graph_distance(self, x, y) -> float:
        from scipy.sparse.csgraph import dijkstra
        x = as_points(x, self.dim)[0]
        y = as_points(y, self.dim)[0]
        if np.array_equal(x, y):
            return 0.0
        graph, m = self._augmented_graph(np.stack([x, y]))
        # points within one cell of each other are also joined directly
        direct = math.inf
        if np.all(np.abs(x - y) <= self._cell_size):
            direct = float(self._chart.segment_lengths(x, y)[0])
        dist = dijkstra(graph, directed=False, indices=self.size)
        d = min(float(dist[self.size + 1]), direct)
        if not math.isfinite(d):
            raise UnreachableError(f'no path between {x.tolist()} and {y.tolist()} on the {self._chart.name} grid, the points lie in disconnected components')
        return d

    def distance_field(self, x0) -> 'DistanceField':
        x0 = as_points(x0, self.dim)[0]
        key = tuple(float(v) for v in x0)
        if key not in self._fields:
            from scipy.sparse.csgraph import dijkstra
            graph, _ = self._augmented_graph(x0[None, :])
            dist = dijkstra(graph, directed=False, indices=self.size)[:self.size]
            self._fields[key] = DistanceField(self, x0, dist)
        return self._fields[key]


class DistanceField(object):
    """
    Graph distances from a point to every cell center of a grid,
    interpolated linearly in between.
    """

    def __init__(self, grid: GridDomain, x0: np.ndarray, values: np.ndarray):
        from scipy.interpolate import RegularGridInterpolator
        self._grid = grid
        self._x0 = x0
        self._values = values
        self._lo = np.array([a[0] for a in grid.axes])
        self._hi = np.array([a[-1] for a in grid.axes])
        self._interp = RegularGridInterpolator(grid.axes, values.reshape(grid.shape), method='linear')

    @property
    def values(self) -> np.ndarray:
        return self._values

    def interpolate(self, points) -> np.ndarray:
        points = as_points(points, self._grid.dim)
        d = self._interp(np.clip(points, self._lo, self._hi))
        # exact near the source, where interpolation is worst
        near = np.all(np.abs(points - self._x0) <= self._grid.cell_size, axis=1)
        if np.any(near):
            d[near] = self._grid.chart.segment_lengths(np.broadcast_to(self._x0, points[near].shape), points[near])
        return d


# ========================================================================= #
# Geodesic Annulus                                                          #
# ========================================================================= #


@dataclass(frozen=True, eq=False)
class GeodesicAnnulus:
    """
    A(x0, r1, r2) = {x : r1 < d(x, x0) < r2} with 0 < r1 < r2 <= r_max.
    """

    center: np.ndarray
    r1: float
    r2: float
    chart: MetricChart

    def __post_init__(self):
        center = as_points(self.center, self.chart.dim)[0]
        object.__setattr__(self, 'center', center)
        if not (0 < self.r1 < self.r2):
            raise PreconditionError(f'annulus radii must satisfy 0 < r1 < r2, got: r1={repr(self.r1)}, r2={repr(self.r2)}')
        self.chart.check_patch_radius(self.r2, what='outer annulus radius')
        self.chart.check_inside(center, what='annulus center')

    @property
    def dim(self) -> int:
        return self.chart.dim

    def distance(self, points, grid: Optional[GridDomain] = None) -> np.ndarray:
        return self.chart.distance_to(self.center, points, grid=grid)

    def contains(self, points, closed: bool = False, grid: Optional[GridDomain] = None) -> np.ndarray:
        d = self.distance(points, grid=grid)
        if closed:
            return (d >= self.r1) & (d <= self.r2)
        return (d > self.r1) & (d < self.r2)

    def coordinate_radii(self, directions: np.ndarray, r: float, grid: Optional[GridDomain] = None) -> np.ndarray:
        return coordinate_radii(self.chart, self.center, directions, r, grid=grid)

    def sphere_points(self, directions: np.ndarray, r: float, grid: Optional[GridDomain] = None) -> np.ndarray:
        t = self.coordinate_radii(directions, r, grid=grid)
        return self.center + t[:, None] * directions

    def scaled(self, s: float) -> 'GeodesicAnnulus':
        return GeodesicAnnulus(center=self.center, r1=self.r1 * s, r2=self.r2 * s, chart=self.chart)


# ========================================================================= #
# Spheres                                                                   #
# ========================================================================= #


def unit_directions(n: int, count: int) -> np.ndarray:
    """
    Deterministic, nearly uniform unit vectors. Equispaced angles for n=2,
    otherwise an unscrambled Halton sequence pushed through the normal quantile
    function. The first `count` directions for n=2 with count=2k are a
    subset of those for count=4k.
    """
    if count < 1:
        raise PreconditionError(f'number of directions must be >= 1, got: {repr(count)}')
    if n == 2:
        theta = 2 * math.pi * np.arange(count) / count
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    from scipy.stats import norm
    from scipy.stats import qmc
    u = qmc.Halton(d=n, scramble=False).random(count + 1)[1:]
    v = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _ray_exit(chart: MetricChart, x0: np.ndarray, directions: np.ndarray) -> np.ndarray:
    # coordinate distance along each ray until the chart box is left
    with np.errstate(divide='ignore', invalid='ignore'):
        t_hi = np.where(directions > 0, (chart.upper - x0) / directions, np.inf)
        t_lo = np.where(directions < 0, (chart.lower - x0) / directions, np.inf)
    return np.min(np.minimum(t_hi, t_lo), axis=1)


def coordinate_radii(
    chart: MetricChart,
    x0,
    directions: np.ndarray,
    r: float,
    grid: Optional[GridDomain] = None,
    iterations: int = 80,
) -> np.ndarray:
    """
    For every direction u, the coordinate radius t with d(x0 + t·u, x0) = r,
    found by vectorized bisection. Radial rays are assumed to leave every
    geodesic sphere once, which holds inside a normal neighbourhood.
    """
    x0 = as_points(x0, chart.dim)[0]
    directions = as_points(directions, chart.dim)
    if r == 0:
        return np.zeros(len(directions))
    if chart.kind == ChartKind.EUCLIDEAN:
        t = np.full(len(directions), float(r))
        chart.check_inside(x0 + t[:, None] * directions, what=f'point of the sphere S(x0, {r})')
        return t
    hi = _ray_exit(chart, x0, directions)
    d_hi = chart.distance_to(x0, x0 + hi[:, None] * directions, grid=grid)
    if np.any(d_hi < r):
        raise PreconditionError(f'the geodesic sphere of radius {r} around {x0.tolist()} leaves the {chart.name} chart box')
    lo = np.zeros(len(directions))
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        inside = chart.distance_to(x0, x0 + mid[:, None] * directions, grid=grid) < r
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return 0.5 * (lo + hi)


def _sphere_angles(n: int, samples: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Midpoint nodes and weights of the hyperspherical angles
    (φ_1..φ_{n-2} in [0, π], φ_{n-1} in [0, 2π)).
    """
    if n == 2:
        phi = 2 * math.pi * (np.arange(samples) + 0.5) / samples
        return phi[:, None], np.full(samples, 2 * math.pi / samples)
    b = max(4, int(round((samples / 2) ** (1 / (n - 1)))))
    polar = [math.pi * (np.arange(b) + 0.5) / b] * (n - 2)
    azimuth = 2 * math.pi * (np.arange(2 * b) + 0.5) / (2 * b)
    mesh = np.meshgrid(*polar, azimuth, indexing='ij')
    angles = np.stack([m.reshape(-1) for m in mesh], axis=1)
    weights = np.full(len(angles), (math.pi / b) ** (n - 2) * (math.pi / b))
    return angles, weights


def _angles_to_directions(angles: np.ndarray) -> np.ndarray:
    m, k = angles.shape
    n = k + 1
    u = np.ones((m, n))
    sin_prod = np.ones(m)
    for i in range(k):
        u[:, i] = sin_prod * np.cos(angles[:, i])
        sin_prod = sin_prod * np.sin(angles[:, i])
    u[:, n - 1] = sin_prod
    # the last angle is the azimuth, so the last two components are (cos, sin)
    return u


def sphere_points(x0, r: float, chart: MetricChart, count: Optional[int] = None, grid: Optional[GridDomain] = None) -> np.ndarray:
    """
    Sample points of the geodesic sphere S(x0, r).
    """
    count = sphere_samples_get(count)
    chart.check_patch_radius(r, what='sphere radius')
    directions = unit_directions(chart.dim, count)
    x0 = as_points(x0, chart.dim)[0]
    t = coordinate_radii(chart, x0, directions, r, grid=grid)
    return x0 + t[:, None] * directions


Integrand = Union[float, Callable[[np.ndarray], np.ndarray]]


def _evaluate(integrand: Integrand, points: np.ndarray) -> np.ndarray:
    if callable(integrand):
        return np.broadcast_to(np.asarray(integrand(points), dtype=np.float64), (len(points),))
    return np.full(len(points), float(integrand))


def sphere_quadrature(
    x0,
    r: float,
    integrand: Integrand,
    chart: MetricChart,
    samples: Optional[int] = None,
    grid: Optional[GridDomain] = None,
    step: float = 1e-6,
) -> float:
    """
    ∫_{S(x0,r)} integrand dA over the geodesic sphere, by midpoint angular
    quadrature. The area element is √det g*_{αβ} for the induced metric
    g*_{αβ} = g_ij ∂x^i/∂u^α ∂x^j/∂u^β of the hyperspherical parametrisation
    u -> x0 + t(u)·dir(u), with derivatives by central differences.
    """
    x0 = as_points(x0, chart.dim)[0]
    if r < 0:
        raise PreconditionError(f'sphere radius must be non-negative, got: {repr(r)}')
    chart.check_patch_radius(r, what='sphere radius')
    if r == 0:
        return 0.0
    n = chart.dim
    angles, weights = _sphere_angles(n, sphere_samples_get(samples))

    def embed(a: np.ndarray) -> np.ndarray:
        dirs = _angles_to_directions(a)
        return x0 + coordinate_radii(chart, x0, dirs, r, grid=grid)[:, None] * dirs

    points = embed(angles)
    jac = np.empty((len(angles), n, n - 1))
    for k in range(n - 1):
        da = np.zeros(n - 1)
        da[k] = step
        jac[:, :, k] = (embed(angles + da) - embed(angles - da)) / (2 * step)
    g = chart.metric(points)
    g_star = np.einsum('mia,mij,mjb->mab', jac, g, jac)
    area = np.sqrt(np.clip(np.linalg.det(g_star), 0, None))
    values = _evaluate(integrand, points)
    return float(np.sum(values * area * weights))


# ========================================================================= #
# Radial Quadrature                                                         #
# ========================================================================= #


_GAUSS_ORDER = 8


def radial_integral(fn: Callable[[np.ndarray], np.ndarray], a: float, b: float, panel_width: float = 0.25) -> float:
    """
    ∫_a^b fn(r) dr for 0 < a <= b, by Gauss-Legendre panels in log-radius.
    `fn` is called once with all nodes.
    """
    if not (0 < a):
        raise PreconditionError(f'radial integrals need a positive lower limit, got: {repr(a)}')
    if b < a:
        raise PreconditionError(f'radial integral limits must satisfy a <= b, got: a={repr(a)}, b={repr(b)}')
    if a == b:
        return 0.0
    la, lb = math.log(a), math.log(b)
    panels = max(1, int(math.ceil((lb - la) / panel_width)))
    edges = np.linspace(la, lb, panels + 1)
    x, w = np.polynomial.legendre.leggauss(_GAUSS_ORDER)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    u = (mid[:, None] + half[:, None] * x[None, :]).reshape(-1)
    wu = (half[:, None] * w[None, :]).reshape(-1)
    radii = np.exp(u)
    values = np.asarray(fn(radii), dtype=np.float64)
    return float(np.sum(values * radii * wu))


def annulus_quadrature(
    x0,
    r1: float,
    r2: float,
    integrand: Integrand,
    chart: MetricChart,
    radial: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    samples: Optional[int] = None,
    grid: Optional[GridDomain] = None,
) -> float:
    """
    ∫ integrand(x)·radial(d(x, x0)) dv over r1 < d(x, x0) < r2, as a radial
    integral of sphere integrals.
    """
    if r1 == r2:
        return 0.0

    def shells(radii: np.ndarray) -> np.ndarray:
        values = np.array([sphere_quadrature(x0, t, integrand, chart, samples=samples, grid=grid) for t in radii])
        if radial is not None:
            values = values * np.asarray(radial(radii), dtype=np.float64)
        return values

    return radial_integral(shells, r1, r2)


# ========================================================================= #
# Operations                                                                #
# ========================================================================= #


def _curve_vertices(curve) -> np.ndarray:
    return np.asarray(getattr(curve, 'vertices', curve), dtype=np.float64)


def curve_length(curve, chart: MetricChart) -> float:
    """
    Metric length of a polyline, Σ over segments with the metric at the midpoint.
    """
    vertices = _curve_vertices(curve)
    if vertices.ndim != 2 or len(vertices) < 2:
        raise PreconditionError(f'a curve needs at least 2 vertices, got shape: {vertices.shape}')
    chart.check_inside(vertices, what='curve vertex')
    return float(np.sum(chart.segment_lengths(vertices[:-1], vertices[1:])))


def volume(region: Callable[[np.ndarray], np.ndarray], grid: GridDomain) -> float:
    """
    Σ v_c over the valid cells whose center satisfies the predicate.
    """
    mask = np.asarray(region(grid.centers), dtype=bool) & grid.valid
    if not np.any(mask):
        return 0.0
    return float(np.sum(grid.cell_volumes[mask]))


def geodesic_distance(x, y, chart: MetricChart, grid: Optional[GridDomain] = None, method: str = 'auto') -> float:
    """
    :param method: 'analytic' uses the closed form of the chart, 'graph' the
                   shortest path on the grid graph with metric edge weights,
                   'auto' prefers the closed form when the chart has one.
    """
    x = chart.check_inside(x)[0]
    y = chart.check_inside(y)[0]
    if method not in ('auto', 'analytic', 'graph'):
        raise KeyError(f'invalid distance method: {repr(method)}, must be one of: analytic/auto/graph')
    if method == 'auto':
        method = 'analytic' if chart.has_analytic_distance else 'graph'
    if method == 'analytic':
        return float(chart.analytic_distance(x, y)[0])
    if grid is None:
        grid = chart.default_grid()
    return grid.graph_distance(x, y)


# ========================================================================= #
# export                                                                    #
# ========================================================================= #


__all__ = (
    # config
    'grid_resolution_set_default',
    'grid_resolution_get',
    'sphere_samples_set_default',
    'sphere_samples_get',
    # types
    'ChartKind',
    'MetricChart',
    'GridDomain',
    'DistanceField',
    'GeodesicAnnulus',
    # helpers
    'sphere_area',
    'as_points',
    'chart_from_expression',
    'lambdify_point_expression',
    'unit_directions',
    'coordinate_radii',
    'sphere_points',
    'radial_integral',
    'annulus_quadrature',
    # operations
    'curve_length',
    'volume',
    'geodesic_distance',
    'sphere_quadrature',
)


# ========================================================================= #
# END                                                                       #
# ========================================================================= #
