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
from dataclasses import field
from enum import Enum
from pathlib import Path
from typing import Callable
from typing import Dict
from typing import Iterator
from typing import NoReturn
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np

from ringmod._errors import DomainError
from ringmod._errors import MinorizationError
from ringmod._errors import PreconditionError
from ringmod._geometry import GeodesicAnnulus
from ringmod._geometry import GridDomain
from ringmod._geometry import MetricChart
from ringmod._geometry import as_points
from ringmod._geometry import coordinate_radii
from ringmod._geometry import unit_directions
from ringmod._hash import Hash
from ringmod._hash import hash_array
from ringmod._hash import hash_arrays
from ringmod._hash import hash_validate
from ringmod._utils import VarHandlerInt


LOG = logging.getLogger(__name__)


# ========================================================================= #
# Variable Handlers                                                         #
# ========================================================================= #


_VAR_HANDLER_CURVE_COUNT = VarHandlerInt(
    identifier='curve_count',
    environ_key='RINGMOD_CURVE_COUNT',
    fallback_value=4096,
    min_value=1,
)


def curve_count_set_default(count: Optional[int]) -> NoReturn:
    return _VAR_HANDLER_CURVE_COUNT.set_default_value(value=count)


def curve_count_get(count: Optional[int] = None) -> int:
    return _VAR_HANDLER_CURVE_COUNT.get_value(override=count)


# ========================================================================= #
# Discrete Curve                                                            #
# ========================================================================= #


class DiscreteCurve(object):
    """
    A polyline γ in chart coordinates with at least two vertices.
    Metric segment lengths are cached per chart.
    """

    __slots__ = ('_vertices', '_lengths')

    def __init__(self, vertices):
        vertices = np.array(vertices, dtype=np.float64)
        if vertices.ndim != 2 or len(vertices) < 2:
            raise PreconditionError(f'a curve needs at least 2 vertices, got shape: {vertices.shape}')
        if not np.all(np.isfinite(vertices)):
            raise DomainError('curve vertices must be finite')
        vertices.setflags(write=False)
        self._vertices = vertices
        self._lengths: Dict[int, np.ndarray] = {}

    def __repr__(self):
        return f'{self.__class__.__name__}(num_vertices={len(self._vertices)}, start={self.start.tolist()}, end={self.end.tolist()})'

    def __len__(self) -> int:
        return len(self._vertices)

    @property
    def vertices(self) -> np.ndarray:
        return self._vertices

    @property
    def dim(self) -> int:
        return self._vertices.shape[1]

    @property
    def start(self) -> np.ndarray:
        return self._vertices[0]

    @property
    def end(self) -> np.ndarray:
        return self._vertices[-1]

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self._vertices[1:] + self._vertices[:-1])

    @property
    def steps(self) -> np.ndarray:
        """coordinate lengths of the segments"""
        return np.linalg.norm(np.diff(self._vertices, axis=0), axis=1)

    def segment_lengths(self, chart: MetricChart) -> np.ndarray:
        key = id(chart)
        if key not in self._lengths:
            chart.check_inside(self._vertices, what='curve vertex')
            self._lengths[key] = chart.segment_lengths(self._vertices[:-1], self._vertices[1:])
        return self._lengths[key]

    def length(self, chart: MetricChart) -> float:
        return float(np.sum(self.segment_lengths(chart)))

    def refined(self, max_step: float) -> 'DiscreteCurve':
        return refine_curve(self, max_step)

    def reversed(self) -> 'DiscreteCurve':
        return DiscreteCurve(self._vertices[::-1])

    def concatenate(self, other: 'DiscreteCurve') -> 'DiscreteCurve':
        if not np.allclose(self.end, other.start, rtol=0, atol=1e-12):
            raise PreconditionError(f'cannot concatenate curves, end {self.end.tolist()} != start {other.start.tolist()}')
        return DiscreteCurve(np.concatenate([self._vertices, other.vertices[1:]], axis=0))

    def fingerprint(self) -> Hash:
        return hash_array(self._vertices)


def refine_curve(curve: DiscreteCurve, max_step: float) -> DiscreteCurve:
    """
    Subdivide segments linearly in coordinates until no step exceeds `max_step`.
    """
    if not (max_step > 0):
        raise ValueError(f'max_step must be positive, got: {repr(max_step)}')
    v = curve.vertices
    pieces = np.maximum(1, np.ceil(curve.steps / max_step).astype(np.int64))
    if np.all(pieces == 1):
        return curve
    return DiscreteCurve(_subdivide(v, pieces))


def _subdivide(v: np.ndarray, pieces: np.ndarray) -> np.ndarray:
    # for segment i, insert pieces[i]-1 interior points
    seg = np.repeat(np.arange(len(pieces)), pieces)
    offset = np.arange(len(seg)) - np.repeat(np.cumsum(pieces) - pieces, pieces)
    t = (offset / np.repeat(pieces, pieces))[:, None]
    points = v[seg] + t * (v[seg + 1] - v[seg])
    return np.concatenate([points, v[-1:]], axis=0)


# ========================================================================= #
# Curve Family                                                              #
# ========================================================================= #


class CurveProvenance(str, Enum):
    RADIAL_BUNDLE = 'radial_bundle'
    PERTURBED_RADIAL = 'perturbed_radial'
    RANDOM_CONNECTING = 'random_connecting'
    PUSHFORWARD = 'pushforward'
    TRUNCATED = 'truncated'
    CONTINUA_CONNECTING = 'continua_connecting'
    IMPORTED = 'imported'


@dataclass(frozen=True, eq=False)
class MinorizationCertificate:
    """
    Records for each curve of `parent` the subcurve of `child` it contains:
    child[k] = [point on parent segment i_k at t_k] + parent[i_k+1 .. j_k] + [point on parent segment j_k at s_k]
    """

    parent: 'CurveFamily'
    start_segment: np.ndarray
    start_param: np.ndarray
    end_segment: np.ndarray
    end_param: np.ndarray

    def verify(self, child: 'CurveFamily', atol: float = 1e-9) -> NoReturn:
        if len(child) != len(self.parent):
            raise MinorizationError(f'certificate covers {len(self.parent)} curves, but the family has {len(child)}')
        for k, (big, small) in enumerate(zip(self.parent, child)):
            v = big.vertices
            i, j = int(self.start_segment[k]), int(self.end_segment[k])
            a = v[i] + self.start_param[k] * (v[i + 1] - v[i])
            b = v[j] + self.end_param[k] * (v[j + 1] - v[j])
            expected = np.concatenate([a[None], v[i + 1:j + 1], b[None]], axis=0)
            if expected.shape != small.vertices.shape or not np.allclose(expected, small.vertices, rtol=0, atol=atol):
                raise MinorizationError(f'curve {k} is not a subcurve of the corresponding parent curve')


@dataclass(frozen=True, eq=False)
class CurveFamily:
    """
    A finite sample of a curve family. For families tied to an annulus
    Γ(S1, S2, A), each curve starts on S(x0, r1) and ends on S(x0, r2).
    """

    curves: Tuple[DiscreteCurve, ...]
    kinds: Tuple[CurveProvenance, ...]
    seed: Optional[int] = None
    annulus: Optional[GeodesicAnnulus] = None
    certificate: Optional[MinorizationCertificate] = None
    _fingerprint: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        object.__setattr__(self, 'curves', tuple(self.curves))
        object.__setattr__(self, 'kinds', tuple(CurveProvenance(k) for k in self.kinds))
        if len(self.curves) != len(self.kinds):
            raise ValueError(f'every curve needs a provenance, got {len(self.curves)} curves and {len(self.kinds)} kinds')
        dims = {c.dim for c in self.curves}
        if len(dims) > 1:
            raise ValueError(f'all curves of a family must have the same dimension, got: {sorted(dims)}')

    @classmethod
    def empty(cls) -> 'CurveFamily':
        return cls(curves=(), kinds=())

    def __len__(self) -> int:
        return len(self.curves)

    def __iter__(self) -> Iterator[DiscreteCurve]:
        return iter(self.curves)

    def __getitem__(self, item) -> DiscreteCurve:
        return self.curves[item]

    @property
    def provenance(self) -> Tuple[CurveProvenance, ...]:
        """distinct provenances in order of appearance"""
        return tuple(dict.fromkeys(self.kinds))

    @property
    def dim(self) -> Optional[int]:
        return self.curves[0].dim if self.curves else None

    @property
    def fingerprint(self) -> Hash:
        if not self._fingerprint:
            self._fingerprint.append(hash_arrays(c.vertices for c in self.curves))
        return self._fingerprint[0]

    def subset(self, indices: Sequence[int]) -> 'CurveFamily':
        indices = list(indices)
        return CurveFamily(
            curves=[self.curves[i] for i in indices],
            kinds=[self.kinds[i] for i in indices],
            seed=self.seed,
            annulus=self.annulus,
        )

    def union(self, other: 'CurveFamily') -> 'CurveFamily':
        return CurveFamily(curves=self.curves + other.curves, kinds=self.kinds + other.kinds, seed=self.seed)

    def map_vertices(self, fn: Callable[[np.ndarray], np.ndarray], kind: Optional[CurveProvenance] = None, annulus: Optional[GeodesicAnnulus] = None) -> 'CurveFamily':
        return CurveFamily(
            curves=[DiscreteCurve(fn(c.vertices)) for c in self.curves],
            kinds=self.kinds if kind is None else [kind] * len(self.curves),
            seed=self.seed,
            annulus=annulus,
        )

    def refined(self, max_step: float) -> 'CurveFamily':
        return CurveFamily(
            curves=[refine_curve(c, max_step) for c in self.curves],
            kinds=self.kinds,
            seed=self.seed,
            annulus=self.annulus,
            certificate=self.certificate,
        )

    def check_endpoints(self, tol: float) -> NoReturn:
        """
        Every curve starts on S(x0, r1), ends on S(x0, r2) and stays in the
        closed annulus, up to `tol` in distance.
        """
        if self.annulus is None:
            raise PreconditionError('the family is not tied to an annulus')
        ann = self.annulus
        for k, c in enumerate(self.curves):
            d = ann.distance(c.vertices)
            if abs(d[0] - ann.r1) > tol or abs(d[-1] - ann.r2) > tol:
                raise PreconditionError(f'curve {k} does not join the spheres of radius {ann.r1} and {ann.r2}, endpoint distances: {d[0]}, {d[-1]}')
            if np.any(d < ann.r1 - tol) or np.any(d > ann.r2 + tol):
                raise PreconditionError(f'curve {k} leaves the closed annulus')


# ========================================================================= #
# Line Integrals                                                            #
# ========================================================================= #


def line_integral(rho, curve: DiscreteCurve, chart: Optional[MetricChart] = None) -> float:
    """
    ∫_γ ρ ds = Σ over segments of ρ(midpoint)·(metric segment length).

    :param rho: a `DensityField` (piecewise constant on grid cells) or a
                function of points, evaluated at the segment midpoints
    """
    if not isinstance(curve, DiscreteCurve):
        curve = DiscreteCurve(curve)
    if callable(rho):
        if chart is None:
            raise ValueError('a chart is required to integrate a density function')
        values = np.asarray(rho(curve.midpoints), dtype=np.float64)
        return float(np.sum(values * curve.segment_lengths(chart)))
    grid = rho.grid
    if chart is not None and chart is not grid.chart:
        raise ValueError(f'the density lives on the {grid.chart.name} chart, not on the {chart.name} chart')
    cells = grid.locate(curve.midpoints)
    return float(np.sum(rho.values[cells] * curve.segment_lengths(grid.chart)))


def line_integral_matrix(family: CurveFamily, grid: GridDomain):
    """
    The sparse matrix A with (Aρ)_γ = line integral of the cell density ρ along γ.
    Segments through invalid cells do not contribute.
    """
    from scipy.sparse import coo_matrix
    rows, cols, vals = [], [], []
    for k, c in enumerate(family.curves):
        cells = grid.locate(c.midpoints)
        rows.append(np.full(len(cells), k, dtype=np.int64))
        cols.append(cells)
        vals.append(c.segment_lengths(grid.chart))
    if not rows:
        return coo_matrix((len(family), grid.size)).tocsr()
    rows, cols, vals = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    keep = grid.valid[cols] & np.isfinite(vals)
    matrix = coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(len(family), grid.size)).tocsr()
    matrix.sum_duplicates()
    return matrix


# ========================================================================= #
# Annulus Families                                                          #
# ========================================================================= #


def _default_step(annulus: GeodesicAnnulus, grid: Optional[GridDomain]) -> float:
    if grid is not None:
        return 0.5 * float(np.min(grid.cell_size))
    return (annulus.r2 - annulus.r1) / 128


def _split_count(count: int) -> Tuple[int, int, int]:
    radial = max(1, count // 2)
    perturbed = (count - radial) // 2
    return radial, perturbed, count - radial - perturbed


def _random_direction(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=n)
    return v / np.linalg.norm(v)


def _normalize_rows(v: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v, axis=1, keepdims=True)
    return np.where(norm > 1e-12, v / np.maximum(norm, 1e-300), fallback)


def _radial_path(annulus: GeodesicAnnulus, directions: np.ndarray, s: np.ndarray, grid: Optional[GridDomain]) -> np.ndarray:
    # x0 + ((1-s)·t1(u) + s·t2(u))·u, which lies in the closed annulus
    t1 = annulus.coordinate_radii(directions, annulus.r1, grid=grid)
    t2 = annulus.coordinate_radii(directions, annulus.r2, grid=grid)
    t = (1 - s) * t1 + s * t2
    return annulus.center + t[:, None] * directions


def _num_steps(annulus: GeodesicAnnulus, max_step: float, scale: float = 1.0) -> int:
    t = annulus.coordinate_radii(np.eye(annulus.dim)[:1], annulus.r2)[0] - annulus.coordinate_radii(np.eye(annulus.dim)[:1], annulus.r1)[0]
    return max(2, int(math.ceil(scale * t / max_step)))


def _project_into_annulus(annulus: GeodesicAnnulus, points: np.ndarray, fallback: np.ndarray, grid: Optional[GridDomain]) -> np.ndarray:
    rel = points - annulus.center
    radius = np.linalg.norm(rel, axis=1)
    directions = _normalize_rows(rel, fallback)
    t1 = annulus.coordinate_radii(directions, annulus.r1, grid=grid)
    t2 = annulus.coordinate_radii(directions, annulus.r2, grid=grid)
    return annulus.center + np.clip(radius, t1, t2)[:, None] * directions


def _perturbed_curve(annulus: GeodesicAnnulus, rng: np.random.Generator, max_step: float, grid: Optional[GridDomain]) -> np.ndarray:
    n = annulus.dim
    base = _random_direction(rng, n)
    m = _num_steps(annulus, max_step, scale=1.5)
    s = np.linspace(0, 1, m + 1)
    # smooth transverse wiggle that vanishes nowhere in particular
    wiggle = np.zeros((m + 1, n))
    for k in range(1, 4):
        w = rng.normal(size=n)
        w -= np.dot(w, base) * base
        wiggle += (0.4 / k) * np.sin(k * math.pi * s + rng.uniform(0, math.pi))[:, None] * w[None, :]
    directions = _normalize_rows(base[None, :] + wiggle, base[None, :])
    return _radial_path(annulus, directions, s, grid)


def _random_connecting_curve(annulus: GeodesicAnnulus, rng: np.random.Generator, max_step: float, grid: Optional[GridDomain]) -> np.ndarray:
    n = annulus.dim
    k = int(rng.integers(2, 6))
    s = np.concatenate([[0.0], np.sort(rng.uniform(0, 1, size=k - 1)), [1.0]])
    u = [_random_direction(rng, n)]
    for _ in range(k):
        u.append(_random_direction(rng, n) * 0.5 + u[-1])
        u[-1] /= np.linalg.norm(u[-1])
    waypoints = _radial_path(annulus, np.array(u), s, grid)
    v = refine_curve(DiscreteCurve(waypoints), max_step).vertices
    fallback = np.broadcast_to(u[0], v.shape)
    v = _project_into_annulus(annulus, v, fallback, grid)
    # endpoints snap to the spheres
    v[0], v[-1] = waypoints[0], waypoints[-1]
    return v


def generate_annulus_family(
    annulus: GeodesicAnnulus,
    count: Optional[int] = None,
    seed: int = 0,
    grid: Optional[GridDomain] = None,
    max_step: Optional[float] = None,
) -> CurveFamily:
    """
    A finite sample of Γ(S(x0,r1), S(x0,r2), A):

    1. a deterministic bundle of radial curves along equispaced directions,
    2. seeded smooth perturbations of radial curves,
    3. seeded random piecewise-straight walks projected into the annulus.

    Each random curve draws from its own generator seeded by (seed, index), so
    the family for `count` contains the family for `count // 2` when both
    bundle sizes nest.
    """
    if count is not None and count < 1:
        raise PreconditionError(f'count must be >= 1, got: {repr(count)}')
    count = curve_count_get(count)
    max_step = _default_step(annulus, grid) if (max_step is None) else max_step
    n_radial, n_perturbed, n_random = _split_count(count)

    curves, kinds = [], []
    # 1. radial bundle
    directions = unit_directions(annulus.dim, n_radial)
    m = _num_steps(annulus, max_step)
    s = np.linspace(0, 1, m + 1)
    for u in directions:
        path = _radial_path(annulus, np.broadcast_to(u, (m + 1, annulus.dim)), s, grid)
        curves.append(refine_curve(DiscreteCurve(path), max_step))
        kinds.append(CurveProvenance.RADIAL_BUNDLE)
    # 2. perturbed radial curves
    for i in range(n_perturbed):
        rng = np.random.default_rng([seed, 1, i])
        curves.append(refine_curve(DiscreteCurve(_perturbed_curve(annulus, rng, max_step, grid)), max_step))
        kinds.append(CurveProvenance.PERTURBED_RADIAL)
    # 3. random connecting walks
    for i in range(n_random):
        rng = np.random.default_rng([seed, 2, i])
        curves.append(refine_curve(DiscreteCurve(_random_connecting_curve(annulus, rng, max_step, grid)), max_step))
        kinds.append(CurveProvenance.RANDOM_CONNECTING)

    family = CurveFamily(curves=curves, kinds=kinds, seed=seed, annulus=annulus)
    LOG.debug(f'generated annulus family: r1={annulus.r1}, r2={annulus.r2}, radial={n_radial}, perturbed={n_perturbed}, random={n_random}, fingerprint={family.fingerprint}')
    return family


def radial_family(annulus: GeodesicAnnulus, count: int, grid: Optional[GridDomain] = None, max_step: Optional[float] = None) -> CurveFamily:
    """
    Only the deterministic radial bundle of an annulus.
    """
    if count < 1:
        raise PreconditionError(f'count must be >= 1, got: {repr(count)}')
    max_step = _default_step(annulus, grid) if (max_step is None) else max_step
    m = _num_steps(annulus, max_step)
    s = np.linspace(0, 1, m + 1)
    curves = [
        refine_curve(DiscreteCurve(_radial_path(annulus, np.broadcast_to(u, (m + 1, annulus.dim)), s, grid)), max_step)
        for u in unit_directions(annulus.dim, count)
    ]
    return CurveFamily(curves=curves, kinds=[CurveProvenance.RADIAL_BUNDLE] * count, annulus=annulus)


# ========================================================================= #
# Truncation                                                                #
# ========================================================================= #


def _crossing(annulus: GeodesicAnnulus, a: np.ndarray, b: np.ndarray, r: float, iterations: int = 60) -> float:
    # parameter t in [0, 1] with d(a + t(b-a)) = r, d(a) and d(b) on opposite sides
    da = annulus.distance(a[None])[0]
    lo, hi = 0.0, 1.0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        dm = annulus.distance((a + mid * (b - a))[None])[0]
        if (dm < r) == (da < r):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def truncate_family(family: CurveFamily, r1: float, r2: float) -> CurveFamily:
    """
    For each curve, the subcurve joining S(x0, r1) and S(x0, r2) inside the
    sub-annulus A(x0, r1, r2): from its last exit of the ball B(x0, r1) to its
    first entry into the complement of B(x0, r2). The result carries a
    certificate that `family` minorizes it.
    """
    if family.annulus is None:
        raise PreconditionError('only families tied to an annulus can be truncated')
    outer = family.annulus
    if not (outer.r1 <= r1 < r2 <= outer.r2):
        raise PreconditionError(f'the sub-annulus ({r1}, {r2}) must lie inside ({outer.r1}, {outer.r2})')
    inner = GeodesicAnnulus(center=outer.center, r1=r1, r2=r2, chart=outer.chart)
    curves, i_seg, i_par, j_seg, j_par = [], [], [], [], []
    for k, c in enumerate(family.curves):
        v = c.vertices
        d = outer.distance(v)
        reach = np.nonzero(d >= r2)[0]
        if len(reach) == 0 or reach[0] == 0:
            raise PreconditionError(f'curve {k} never crosses the sphere of radius {r2}')
        j = int(reach[0]) - 1
        below = np.nonzero(d[:j + 1] <= r1)[0]
        if len(below) == 0:
            raise PreconditionError(f'curve {k} never starts inside the sphere of radius {r1}')
        i = int(below[-1])
        t_start = _crossing(outer, v[i], v[i + 1], r1) if d[i] < r1 else 0.0
        t_end = _crossing(outer, v[j], v[j + 1], r2) if d[j + 1] > r2 else 1.0
        a = v[i] + t_start * (v[i + 1] - v[i])
        b = v[j] + t_end * (v[j + 1] - v[j])
        curves.append(DiscreteCurve(np.concatenate([a[None], v[i + 1:j + 1], b[None]], axis=0)))
        i_seg.append(i)
        i_par.append(t_start)
        j_seg.append(j)
        j_par.append(t_end)
    certificate = MinorizationCertificate(
        parent=family,
        start_segment=np.array(i_seg),
        start_param=np.array(i_par),
        end_segment=np.array(j_seg),
        end_param=np.array(j_par),
    )
    return CurveFamily(curves=curves, kinds=[CurveProvenance.TRUNCATED] * len(curves), seed=family.seed, annulus=inner, certificate=certificate)


# ========================================================================= #
# Continua Families                                                         #
# ========================================================================= #


def _polyline_points(poly: np.ndarray, s: np.ndarray) -> np.ndarray:
    # points at arc-length fractions s along a polyline
    steps = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(steps)])
    target = s * cum[-1]
    seg = np.clip(np.searchsorted(cum, target, side='right') - 1, 0, len(steps) - 1)
    t = ((target - cum[seg]) / np.where(steps[seg] > 0, steps[seg], 1.0))[:, None]
    return poly[seg] + t * (poly[seg + 1] - poly[seg])


def connecting_family(
    E: np.ndarray,
    F: np.ndarray,
    count: Optional[int] = None,
    seed: int = 0,
    max_step: float = 0.01,
    bow: float = 0.5,
) -> CurveFamily:
    """
    A finite sample of Γ(E, F), curves joining the polyline continua E and F:
    straight segments between matching arc-length positions plus seeded
    quadratic arcs between random positions.
    """
    count = curve_count_get(count)
    E, F = as_points(E), as_points(F)
    if len(E) < 2 or len(F) < 2:
        raise PreconditionError('continua must be polylines with at least 2 vertices')
    n_direct = max(1, count // 2)
    s = (np.arange(n_direct) + 0.5) / n_direct
    starts, ends = _polyline_points(E, s), _polyline_points(F, s)
    curves, kinds = [], []
    for a, b in zip(starts, ends):
        curves.append(refine_curve(DiscreteCurve(np.stack([a, b])), max_step))
        kinds.append(CurveProvenance.CONTINUA_CONNECTING)
    dim = E.shape[1]
    t = np.linspace(0, 1, 33)[:, None]
    for i in range(count - n_direct):
        rng = np.random.default_rng([seed, 3, i])
        a = _polyline_points(E, rng.uniform(0, 1, size=1))[0]
        b = _polyline_points(F, rng.uniform(0, 1, size=1))[0]
        offset = rng.normal(size=dim) * bow * np.linalg.norm(b - a) / math.sqrt(dim)
        control = 0.5 * (a + b) + offset
        path = (1 - t)**2 * a + 2 * (1 - t) * t * control + t**2 * b
        curves.append(refine_curve(DiscreteCurve(path), max_step))
        kinds.append(CurveProvenance.CONTINUA_CONNECTING)
    return CurveFamily(curves=curves, kinds=kinds, seed=seed)


# ========================================================================= #
# Pushforward                                                               #
# ========================================================================= #


def pushforward(family: CurveFamily, f, max_step: Optional[float] = None, passes: int = 8) -> CurveFamily:
    """
    f(Γ) = {f∘γ : γ ∈ Γ}, evaluated vertexwise. Source segments are subdivided
    until the image steps satisfy `max_step`, so image vertices stay on the
    true image curves.

    :param f: a mapping, called on arrays of points, eg. a `MappingSpec`
    """
    if max_step is None:
        steps = [c.steps.max() for c in family.curves]
        max_step = float(np.max(steps)) if steps else 1.0
    target = getattr(f, 'target', None)
    curves = []
    for c in family.curves:
        v = c.vertices
        image = np.asarray(f(v), dtype=np.float64)
        for _ in range(passes):
            pieces = np.maximum(1, np.ceil(np.linalg.norm(np.diff(image, axis=0), axis=1) / max_step).astype(np.int64))
            if np.all(pieces == 1):
                break
            v = _subdivide(v, pieces)
            image = np.asarray(f(v), dtype=np.float64)
        if target is not None:
            target.check_inside(image, what='image vertex')
        curves.append(refine_curve(DiscreteCurve(image), max_step))
    return CurveFamily(curves=curves, kinds=[CurveProvenance.PUSHFORWARD] * len(curves), seed=family.seed)


# ========================================================================= #
# CSV                                                                       #
# ========================================================================= #


def family_to_frame(family: CurveFamily):
    import pandas as pd
    if len(family) == 0:
        return pd.DataFrame(columns=['curve_id', 'vertex_index'])
    n = family.dim
    ids = np.concatenate([np.full(len(c), k) for k, c in enumerate(family.curves)])
    idx = np.concatenate([np.arange(len(c)) for c in family.curves])
    xs = np.concatenate([c.vertices for c in family.curves], axis=0)
    df = pd.DataFrame({'curve_id': ids, 'vertex_index': idx})
    for i in range(n):
        df[f'x{i+1}'] = xs[:, i]
    return df


def family_to_csv(family: CurveFamily, path: Union[str, Path], overwrite: bool = False, metadata: bool = True):
    """
    Write a family as CSV (curve_id, vertex_index, x1..xn), optionally with a
    YAML sidecar holding the provenance, seed and fingerprint.
    """
    from ringmod._io import write_table
    from ringmod._io import write_yaml
    write_table(family_to_frame(family), path, overwrite=overwrite)
    if metadata:
        write_yaml({
            'seed': family.seed,
            'dim': family.dim,
            'count': len(family),
            'kinds': [k.value for k in family.kinds],
            'fingerprint': family.fingerprint,
        }, f'{path}.yaml', overwrite=overwrite)


def family_from_csv(path: Union[str, Path], expected_fingerprint: Optional[Hash] = None) -> CurveFamily:
    """
    :raises HashError if the expected fingerprint does not match
    """
    from ringmod._io import load_yaml
    from ringmod._io import read_table
    df = read_table(path)
    coords = sorted((c for c in df.columns if c.startswith('x')), key=lambda c: int(c[1:]))
    if not coords:
        raise ValueError(f'curve family file has no coordinate columns: {repr(str(path))}')
    df = df.sort_values(['curve_id', 'vertex_index'], kind='stable')
    curves = [DiscreteCurve(g[coords].to_numpy(dtype=np.float64)) for _, g in df.groupby('curve_id', sort=True)]
    meta_path = Path(f'{path}.yaml')
    meta = load_yaml(meta_path) if meta_path.exists() else {}
    kinds = meta.get('kinds', [CurveProvenance.IMPORTED.value] * len(curves))
    family = CurveFamily(curves=curves, kinds=kinds, seed=meta.get('seed'))
    if expected_fingerprint is not None:
        hash_validate(family.fingerprint, expected_fingerprint, what=f'curve family {repr(str(path))}')
    return family


# ========================================================================= #
# export                                                                    #
# ========================================================================= #


__all__ = (
    # config
    'curve_count_set_default',
    'curve_count_get',
    # types
    'DiscreteCurve',
    'CurveProvenance',
    'CurveFamily',
    'MinorizationCertificate',
    # helpers
    'refine_curve',
    'line_integral_matrix',
    'radial_family',
    'truncate_family',
    'connecting_family',
    'family_to_frame',
    'family_to_csv',
    'family_from_csv',
    # operations
    'line_integral',
    'generate_annulus_family',
    'pushforward',
)


# ========================================================================= #
# END                                                                       #
# ========================================================================= #
