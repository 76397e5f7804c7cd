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
from typing import Callable
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np

from ringmod._curves import DiscreteCurve
from ringmod._curves import connecting_family
from ringmod._curves import refine_curve
from ringmod._errors import DivisionGuardError
from ringmod._errors import IntersectingContinuaError
from ringmod._errors import PreconditionError
from ringmod._errors import UnsupportedExponentError
from ringmod._fmt import Verdict
from ringmod._geometry import GridDomain
from ringmod._geometry import MetricChart
from ringmod._geometry import annulus_quadrature
from ringmod._geometry import as_points
from ringmod._geometry import radial_integral
from ringmod._geometry import sphere_area
from ringmod._geometry import sphere_points
from ringmod._geometry import sphere_quadrature
from ringmod._modulus import check_exponent
from ringmod._modulus import compute_modulus
from ringmod._ringmap import MappingSpec
from ringmod._ringmap import QField
from ringmod._ringmap import estimate_minimal_constant_Q
from ringmod._ringmap import modulus_of_continuity
from ringmod._ringmap import spherical_mean
from ringmod._utils import iter_progress


LOG = logging.getLogger(__name__)


# ========================================================================= #
# Ladders                                                                   #
# ========================================================================= #


def make_ladder(eps0: float, rungs: int = 12, ratio: float = 0.5) -> np.ndarray:
    """
    The geometric ladder ε_k = ε0·ratio^k for k = 1..rungs, decreasing.
    """
    if not (eps0 > 0):
        raise PreconditionError(f'ladder start must be positive, got: {repr(eps0)}')
    if not (0 < ratio < 1):
        raise PreconditionError(f'ladder ratio must lie in (0, 1), got: {repr(ratio)}')
    if rungs < 1:
        raise PreconditionError(f'ladder needs at least one rung, got: {repr(rungs)}')
    return eps0 * ratio ** np.arange(1, rungs + 1)


def _as_ladder(ladder: Sequence[float], upper: Optional[float] = None) -> np.ndarray:
    ladder = np.sort(np.asarray(ladder, dtype=np.float64))[::-1]
    if len(ladder) == 0 or not np.all(ladder > 0):
        raise PreconditionError('a ladder must be a nonempty list of positive radii')
    if upper is not None and not np.all(ladder < upper):
        raise PreconditionError(f'every rung must lie below {upper}, got: {ladder.tolist()}')
    return ladder


def _default_chart(n: int, x0: np.ndarray, radius: float, chart: Optional[MetricChart]) -> MetricChart:
    if chart is not None:
        return chart
    h = 1.05 * radius
    return MetricChart.euclidean(dim=n, box=np.stack([x0 - h, x0 + h], axis=1))


def _as_q(Q) -> QField:
    return Q if isinstance(Q, QField) else QField.from_callable(Q)


# ========================================================================= #
# Psi Families                                                              #
# ========================================================================= #


class PsiKind(str, Enum):
    LOG_POWER = 'log_power'
    RECIPROCAL = 'reciprocal'
    WEIGHTED_INVERSE = 'weighted_inverse'


@dataclass(frozen=True, eq=False)
class PsiFamily:
    """
    Radial test functions ψ on (ε, ε0):

    - LOG_POWER: ψ(t) = 1/(t·log(1/t))^(n/p)
    - RECIPROCAL: ψ(t) = 1/t
    - WEIGHTED_INVERSE: ψ(t) = 1/(t^((n-1)/(p-1))·q(t)^(1/(p-1))) on (r1, r2), zero outside,
      where q are the spherical means of Q

    with I(ε, ε0) = ∫_ε^ε0 ψ dt and F(ε, ε0) = ∫ Q·ψ^p dv over ε < d(x, x0) < ε0.
    """

    kind: PsiKind
    n: int
    p: float
    eps0: float
    q: Optional[Callable[[np.ndarray], np.ndarray]] = None
    r1: float = 0.0
    r2: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, 'kind', PsiKind(self.kind))
        check_exponent(self.p)
        if self.kind == PsiKind.LOG_POWER and not (0 < self.eps0 < 1):
            raise PreconditionError(f'log-power profiles need 0 < eps0 < 1, got: {repr(self.eps0)}')
        if self.kind == PsiKind.WEIGHTED_INVERSE and self.q is None:
            raise ValueError('weighted inverse profiles need the spherical means q')

    @classmethod
    def log_power(cls, n: int, p: float, eps0: float) -> 'PsiFamily':
        return cls(kind=PsiKind.LOG_POWER, n=n, p=p, eps0=eps0)

    @classmethod
    def reciprocal(cls, n: int, p: float, eps0: float) -> 'PsiFamily':
        return cls(kind=PsiKind.RECIPROCAL, n=n, p=p, eps0=eps0)

    @classmethod
    def weighted_inverse(cls, n: int, p: float, eps0: float, q: Callable[[np.ndarray], np.ndarray], r1: float = 0.0, r2: Optional[float] = None) -> 'PsiFamily':
        return cls(kind=PsiKind.WEIGHTED_INVERSE, n=n, p=p, eps0=eps0, q=q, r1=r1, r2=eps0 if (r2 is None) else r2)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        if self.kind == PsiKind.LOG_POWER:
            return 1.0 / (t * np.log(1.0 / t)) ** (self.n / self.p)
        elif self.kind == PsiKind.RECIPROCAL:
            return 1.0 / t
        elif self.kind == PsiKind.WEIGHTED_INVERSE:
            q = _guarded_means(self.q, t)
            values = 1.0 / (t ** ((self.n - 1.0) / (self.p - 1.0)) * q ** (1.0 / (self.p - 1.0)))
            return np.where((t > self.r1) & (t < self.r2), values, 0.0)
        raise NotImplementedError(f'unsupported profile kind: {self.kind}, this is a bug!')  # pragma: no cover

    def I(self, eps: float, eps0: Optional[float] = None) -> float:
        eps0 = self.eps0 if (eps0 is None) else eps0
        return radial_integral(self, eps, eps0)

    def F(self, Q, x0, eps: float, eps0: Optional[float] = None, chart: Optional[MetricChart] = None, samples: Optional[int] = None) -> float:
        eps0 = self.eps0 if (eps0 is None) else eps0
        x0 = as_points(x0, self.n)[0]
        chart = _default_chart(self.n, x0, eps0, chart)
        return annulus_quadrature(x0, eps, eps0, _as_q(Q), chart, radial=lambda t: self(t) ** self.p, samples=samples)


def _guarded_means(q: Callable[[np.ndarray], np.ndarray], radii: np.ndarray) -> np.ndarray:
    values = np.asarray(q(radii), dtype=np.float64)
    zero = values == 0
    if np.any(zero):
        raise DivisionGuardError(f'the spherical mean q(r) vanishes at r={np.asarray(radii)[zero].ravel()[0]}')
    return values


# ========================================================================= #
# Series Classification                                                     #
# ========================================================================= #


def _classify_accumulation(T: np.ndarray, tail: int = 3, rel_tol: float = 0.01, ratio_min: float = 0.8) -> Tuple[Verdict, np.ndarray, np.ndarray]:
    """
    Classify a nondecreasing sequence of partial integrals along a ladder.

    - CONVERGENT if the relative increments over the last `tail` rungs are all below `rel_tol`.
    - DIVERGENT if the successive increment ratios over the tail are at least
      `ratio_min` and the relative increments at least `rel_tol`.
    - INCONCLUSIVE otherwise.
    """
    T = np.asarray(T, dtype=np.float64)
    increments = np.diff(T)
    with np.errstate(divide='ignore', invalid='ignore'):
        relative = np.where(T[1:] > 0, increments / T[1:], 0.0)
        ratios = increments[1:] / increments[:-1]
    if len(increments) < tail + 1:
        return Verdict.INCONCLUSIVE, relative, ratios
    if not np.all(np.isfinite(T)):
        return Verdict.DIVERGENT, relative, ratios
    if np.all(relative[-tail:] < rel_tol):
        return Verdict.CONVERGENT, relative, ratios
    if np.all(ratios[-tail:] >= ratio_min) and np.all(relative[-tail:] >= rel_tol):
        return Verdict.DIVERGENT, relative, ratios
    return Verdict.INCONCLUSIVE, relative, ratios


# ========================================================================= #
# Finite Mean Oscillation                                                   #
# ========================================================================= #


@dataclass(frozen=True)
class OscillationReport:
    """
    Mean values φ̄_ε and mean oscillations m(ε) = (1/v(B))∫_B |φ - φ̄_ε| dv
    over the balls B = B(x0, ε) of a ladder.
    """

    eps: np.ndarray
    means: np.ndarray
    oscillations: np.ndarray
    slope: float
    verdict: Verdict
    clamped: int = 0

    def table(self):
        import pandas as pd
        return pd.DataFrame({'eps': self.eps, 'mean': self.means, 'oscillation': self.oscillations})


def _ball_samples(Q: QField, x0: np.ndarray, eps: float, grid: GridDomain, resolution: int) -> Tuple[np.ndarray, np.ndarray, int]:
    local = GridDomain(grid.chart, resolution=resolution, box=np.stack([x0 - eps, x0 + eps], axis=1))
    centers = local.centers
    inside = (local.chart.distance_to(x0, centers) < eps) & local.valid
    points = centers[inside]
    values, bad = Q.evaluate(points)
    if np.any(bad):
        # clamp singular samples to the value at one cell from the center
        rel = points[bad] - x0
        norm = np.linalg.norm(rel, axis=1, keepdims=True)
        rel = np.where(norm > 0, rel / np.maximum(norm, 1e-300), np.eye(len(x0))[0])
        values[bad] = Q.evaluate(x0 + local.cell_diameter * rel)[0]
        if not np.all(np.isfinite(values)):
            raise PreconditionError(f'Q={Q.name} is not finite at one cell from the center of the ball of radius {eps}')
    return values, local.cell_volumes[inside], int(np.sum(bad))


def check_fmo(
    Q: QField,
    x0,
    grid: GridDomain,
    ladder: Optional[Sequence[float]] = None,
    resolution: int = 64,
) -> OscillationReport:
    """
    Estimate whether Q has finite mean oscillation at x0 from the mean
    oscillations over a ladder of balls, each sampled on its own local grid.

    - FMO if the last 5 values are at most 10x the median of the first 5 and
      the slope of log m(ε) against log(1/ε) is at most 0.05.
    - NOT_FMO if the slope is at least 0.5 and m grows monotonically.
    - INCONCLUSIVE otherwise.
    """
    Q = _as_q(Q)
    x0 = as_points(x0, grid.dim)[0]
    ladder = _as_ladder(make_ladder(0.25 * float(np.min(grid.box[:, 1] - grid.box[:, 0])), rungs=12) if ladder is None else ladder)
    means, osc, clamped = [], [], 0
    for eps in ladder:
        values, volumes, bad = _ball_samples(Q, x0, eps, grid, resolution)
        clamped += bad
        if len(values) == 0:
            raise PreconditionError(f'no grid cell lies inside the ball of radius {eps}')
        mean = float(np.sum(values * volumes) / np.sum(volumes))
        if np.all(values == values[0]):
            m = 0.0
        else:
            m = float(np.sum(np.abs(values - mean) * volumes) / np.sum(volumes))
        LOG.debug(f'eps={eps:.3e}: mean={mean:.6g}, oscillation={m:.6g}')
        means.append(mean)
        osc.append(m)
    if clamped:
        LOG.warning(f'clamped {clamped} non-finite samples of Q={Q.name} at one cell from the center')
    means, osc = np.array(means), np.array(osc)

    positive = osc > 0
    if np.sum(positive) >= 2:
        slope = float(np.polyfit(np.log(1.0 / ladder[positive]), np.log(osc[positive]), 1)[0])
    else:
        slope = 0.0
    head = float(np.median(osc[:5]))
    bounded = float(np.max(osc[-5:])) <= 10 * head if head > 0 else bool(np.all(osc[-5:] == 0))
    if bounded and slope <= 0.05:
        verdict = Verdict.FMO
    elif slope >= 0.5 and np.all(np.diff(osc) >= 0):
        verdict = Verdict.NOT_FMO
    else:
        verdict = Verdict.INCONCLUSIVE
    LOG.info(f'mean oscillation of Q={Q.name}: slope={slope:.4f}, verdict={verdict}')
    return OscillationReport(eps=ladder, means=means, oscillations=osc, slope=slope, verdict=verdict, clamped=clamped)


# ========================================================================= #
# Spherical Means & Divergence                                              #
# ========================================================================= #


def spherical_mean_q(Q, x0, r: float, chart: MetricChart, samples: Optional[int] = None) -> float:
    """
    q_{x0}(r) = r^(1-n)·∫_{S(x0, r)} Q dA
    """
    return spherical_mean(_as_q(Q), x0, r, chart, samples=samples)


@dataclass(frozen=True)
class CriterionReport:
    table: 'pandas.DataFrame'
    verdict: Verdict
    values: dict = field(default_factory=dict)


def check_divergence_criterion(
    Q,
    x0,
    p: float,
    n: int,
    delta: float,
    ladder: Optional[Sequence[float]] = None,
    chart: Optional[MetricChart] = None,
    samples: Optional[int] = None,
) -> CriterionReport:
    """
    T(ε) = ∫_ε^δ dr / (r^((n-1)/(p-1))·q_{x0}^(1/(p-1))(r)) along a ladder,
    with Q floored at 1. The report also lists I^(1-p) = F/I^p for the
    weighted inverse profile, which has F = I = T.

    :raises DivisionGuardError if q(r) = 0
    """
    p = check_exponent(p)
    x0 = as_points(x0, n)[0]
    Qf = _as_q(Q).with_floor(1.0)
    chart = _default_chart(n, x0, delta, chart)
    ladder = _as_ladder(make_ladder(delta, rungs=20) if ladder is None else ladder, upper=delta)

    def q(radii):
        return np.array([spherical_mean(Qf, x0, float(r), chart, samples=samples) for r in np.atleast_1d(radii)])

    def integrand(radii):
        means = _guarded_means(q, radii)
        return 1.0 / (radii ** ((n - 1.0) / (p - 1.0)) * means ** (1.0 / (p - 1.0)))

    edges = np.concatenate([[delta], ladder])
    T = np.cumsum([radial_integral(integrand, lo, hi) for hi, lo in zip(edges[:-1], edges[1:])])
    verdict, relative, ratios = _classify_accumulation(T)

    import pandas as pd
    with np.errstate(divide='ignore'):
        table = pd.DataFrame({
            'eps': ladder,
            'T': T,
            'relative_increment': np.concatenate([[math.nan], relative]),
            'increment_ratio': np.concatenate([[math.nan, math.nan], ratios]),
            'F_over_I_p': T ** (1.0 - p),
        })
    LOG.info(f'divergence integral for Q={Qf.name}: T(eps_min)={T[-1]:.6g}, verdict={verdict}')
    return CriterionReport(table=table, verdict=verdict, values={'T': float(T[-1])})


# ========================================================================= #
# Growth Of The Capacity Bound                                              #
# ========================================================================= #


def theorem1_growth_check(
    Q,
    x0,
    n: int,
    p: float,
    eps0: float,
    ladder: Sequence[float],
    chart: Optional[MetricChart] = None,
    samples: Optional[int] = None,
    fmo_report: Optional[OscillationReport] = None,
) -> CriterionReport:
    """
    With ψ(t) = 1/(t·log(1/t))^(n/p) check that F(ε) = O(log log(1/ε)), within a
    factor 3 over the ladder, and that F/I^p decreases over the last 4 rungs.

    :raises PreconditionError for fewer than 6 rungs, or if a given oscillation report is not FMO
    """
    p = check_exponent(p)
    if len(ladder) < 6:
        raise PreconditionError(f'the growth check needs at least 6 rungs, got: {len(ladder)}')
    if fmo_report is not None and fmo_report.verdict != Verdict.FMO:
        raise PreconditionError(f'Q must have finite mean oscillation at x0, the oscillation check returned: {fmo_report.verdict}')
    ladder = _as_ladder(ladder, upper=eps0)
    x0 = as_points(x0, n)[0]
    chart = _default_chart(n, x0, eps0, chart)
    psi = PsiFamily.log_power(n, p, eps0)
    Q = _as_q(Q)
    LOG.warning('the growth check reads the capacity bound as F = o(I^p), the F/I column shows the reading with exponent 1')

    I = np.array([psi.I(eps) for eps in ladder])
    F = np.array([psi.F(Q, x0, eps, eps0, chart=chart, samples=samples) for eps in ladder])
    loglog = np.log(np.log(1.0 / ladder))
    growth = F / loglog
    F_over_I_p = F / I ** p

    if np.all(F == 0):
        bounded, decreasing = True, True
    else:
        bounded = bool(np.all(growth > 0) and np.max(growth) <= 3 * np.min(growth))
        decreasing = bool(np.all(np.diff(F_over_I_p[-4:]) <= 0))
    verdict = Verdict.PASS if (bounded and decreasing) else Verdict.FAIL

    import pandas as pd
    table = pd.DataFrame({
        'eps': ladder,
        'I': I,
        'F': F,
        'F_over_loglog': growth,
        'F_over_I_p': F_over_I_p,
        'F_over_I': np.where(I > 0, F / I, math.nan),
    })
    LOG.info(f'growth check for Q={Q.name}: bounded={bounded}, decreasing={decreasing}, verdict={verdict}')
    return CriterionReport(table=table, verdict=verdict, values={'bounded': bounded, 'decreasing': decreasing})


# ========================================================================= #
# L^s Criterion                                                             #
# ========================================================================= #


def _ls_norm(Q: QField, x0: np.ndarray, s: float, eps0: float, chart: MetricChart, resolution: int) -> float:
    grid = GridDomain(chart, resolution=resolution, box=np.stack([x0 - eps0, x0 + eps0], axis=1))
    values, volumes, bad = _ball_samples(Q, x0, eps0, grid, resolution)
    if bad:
        LOG.warning(f'clamped {bad} non-finite samples of Q={Q.name} in the L^{s:g} norm')
    return float(np.sum(values ** s * volumes)) ** (1.0 / s)


def check_ls_criterion(
    Q,
    x0,
    n: int,
    p: float,
    s: float,
    eps0: float,
    ladder: Optional[Sequence[float]] = None,
    chart: Optional[MetricChart] = None,
    resolution: int = 128,
    samples: Optional[int] = None,
) -> CriterionReport:
    """
    For Q in L^s near x0 with s >= n/(n-p) and ψ(t) = 1/t, Hölder's inequality gives
        F(ε) <= ‖Q‖_{L^s}·(ω_{n-1}∫_ε^ε0 r^(n-1-pq) dr)^(1/q),   q = s/(s-1)
    and the bound over I^p decreases to zero. Passes if both the bound and the
    computed F over I^p decrease over the last 4 rungs.

    :raises UnsupportedExponentError unless 1 < p < n and s >= n/(n-p)
    """
    p = check_exponent(p)
    if not (p < n):
        raise UnsupportedExponentError(f'the L^s criterion needs 1 < p < n, got: p={repr(p)}, n={n}')
    s_min = n / (n - p)
    if not (s >= s_min):
        raise UnsupportedExponentError(f'the L^s criterion needs s >= n/(n-p) = {s_min}, got: s={repr(s)}')
    Q = _as_q(Q)
    x0 = as_points(x0, n)[0]
    chart = _default_chart(n, x0, eps0, chart)
    ladder = _as_ladder(make_ladder(eps0) if ladder is None else ladder, upper=eps0)
    import pandas as pd

    # integrability of |Q|^s near x0 along a long radial ladder
    Qs = Q ** s
    long_ladder = make_ladder(eps0, rungs=40)
    edges = np.concatenate([[eps0], long_ladder])

    def shells(radii):
        return np.array([sphere_quadrature(x0, float(r), Qs, chart, samples=samples) for r in radii])

    T = np.cumsum([radial_integral(shells, lo, hi) for hi, lo in zip(edges[:-1], edges[1:])])
    integrability, _, _ = _classify_accumulation(T)
    if integrability == Verdict.DIVERGENT:
        LOG.warning(f'|Q|^{s:g} is not integrable near x0 for Q={Q.name}, the criterion does not apply')
        return CriterionReport(table=pd.DataFrame({'eps': ladder}), verdict=Verdict.NOT_APPLICABLE, values={'norm': math.inf})
    if integrability == Verdict.INCONCLUSIVE:
        LOG.warning(f'integrability of |Q|^{s:g} near x0 is inconclusive for Q={Q.name}')

    norm = _ls_norm(Q, x0, s, eps0, chart, resolution)
    q = s / (s - 1.0)
    omega = sphere_area(n)
    exponent = n - 1.0 - p * q
    psi = PsiFamily.reciprocal(n, p, eps0)
    I = np.log(eps0 / ladder)
    split = np.array([omega * radial_integral(lambda r: r ** exponent, eps, eps0) for eps in ladder]) ** (1.0 / q)
    bound = norm * split
    F = np.array([psi.F(Q, x0, eps, eps0, chart=chart, samples=samples) for eps in ladder])
    bound_over = bound / I ** p
    F_over = F / I ** p
    decreasing = bool(np.all(np.diff(bound_over[-4:]) <= 0) and np.all(np.diff(F_over[-4:]) <= 1e-12 * np.abs(F_over[-4:-1])))
    verdict = Verdict.PASS if decreasing else Verdict.FAIL
    table = pd.DataFrame({
        'eps': ladder,
        'I': I,
        'holder_bound': bound,
        'F': F,
        'bound_over_I_p': bound_over,
        'F_over_I_p': F_over,
    })
    LOG.info(f'L^{s:g} criterion for Q={Q.name}: norm={norm:.6g}, verdict={verdict}')
    return CriterionReport(table=table, verdict=verdict, values={'norm': norm})


# ========================================================================= #
# Equicontinuity                                                            #
# ========================================================================= #


@dataclass(frozen=True)
class EquicontinuityReport:
    table: 'pandas.DataFrame'
    sup_table: 'pandas.DataFrame'
    excluded: List[str]
    verdict: Verdict


def _budget_value(Q_budget: QField, x0: np.ndarray, ladder: np.ndarray, chart: MetricChart) -> float:
    # the budget bounds a constant minimal Q where it is smallest
    if Q_budget.constant_value is not None:
        return Q_budget.constant_value
    points = np.concatenate([sphere_points(x0, float(r), chart, count=64) for r in ladder], axis=0)
    return float(np.min(Q_budget(points)))


def run_equicontinuity_experiment(
    mappings: Sequence[MappingSpec],
    Q_budget,
    x0,
    p: float,
    ladder: Sequence[float],
    delta: Optional[float] = None,
    sigma: Optional[float] = None,
    radii_grid: Optional[Sequence[Tuple[float, float]]] = None,
    samples: Optional[int] = None,
    progress: bool = False,
    **estimate_kwargs,
) -> EquicontinuityReport:
    """
    For a family of mappings whose minimal constant Q stays under a budget
    and which omit continua of diameter at least δ, tabulate ω_f(ε) and
    check that sup_f ω_f(ε) decreases with ε, and ends below σ if given.

    The minimal Q of each mapping is estimated numerically on `radii_grid`,
    or on the ring between the two largest rungs, with any closed form
    logged and tabulated next to it.
    """
    p = check_exponent(p)
    if len(mappings) == 0:
        raise PreconditionError('the experiment needs at least one mapping')
    Q_budget = _as_q(Q_budget)
    ladder = _as_ladder(ladder)
    radii = radii_grid
    if radii is None and len(ladder) > 1:
        # the outermost ring of the ladder
        radii = [(float(ladder[1]), float(ladder[0]))]
    import pandas as pd
    rows, excluded, included = [], [], []
    for f in iter_progress(mappings, desc='mappings', enabled=progress):
        x = as_points(x0, f.dim)[0]
        budget = _budget_value(Q_budget, x, ladder, f.source)
        known = f.known_minimal_q(p)
        if radii is not None:
            q_min = estimate_minimal_constant_Q(f, x, p, radii, **estimate_kwargs)
        elif known is not None:
            LOG.info(f'a single rung gives no ring to estimate on, using the closed form Q={known:.6g} of {f.name}')
            q_min = known
        else:
            raise PreconditionError(f'the minimal Q of {f.name} has no closed form, radii for a numerical estimate are required')
        if q_min > budget * (1 + 1e-9):
            LOG.warning(f'excluding {f.name}: its minimal Q={q_min:.6g} exceeds the budget {budget:.6g}')
            excluded.append(f.name)
            continue
        if delta is not None and f.omitted_diameter < delta:
            LOG.warning(f'excluding {f.name}: its omitted continuum has diameter {f.omitted_diameter} < {delta}')
            excluded.append(f.name)
            continue
        omega = modulus_of_continuity(f, x, ladder, samples=samples)
        omega['mapping'] = f.name
        omega['minimal_q'] = q_min
        omega['closed_form_q'] = math.nan if (known is None) else known
        omega['omitted_diameter'] = f.omitted_diameter
        rows.append(omega)
        included.append(f.name)
    if not rows:
        LOG.warning('every mapping was excluded from the experiment')
        empty = pd.DataFrame(columns=['eps', 'omega', 'gehring_ratio', 'mapping', 'minimal_q', 'closed_form_q', 'omitted_diameter'])
        return EquicontinuityReport(table=empty, sup_table=pd.DataFrame(columns=['eps', 'sup_omega']), excluded=excluded, verdict=Verdict.INCONCLUSIVE)
    table = pd.concat(rows, ignore_index=True)
    sup = table.groupby('eps', sort=False)['omega'].max().reset_index().rename(columns={'omega': 'sup_omega'})
    sup = sup.sort_values('eps', ascending=False, ignore_index=True)
    decreasing = bool(np.all(np.diff(sup['sup_omega'].to_numpy()) <= 0))
    small = True if sigma is None else bool(sup['sup_omega'].iloc[-1] <= sigma)
    verdict = Verdict.PASS if (decreasing and small) else Verdict.FAIL
    LOG.info(f'equicontinuity over {included}: decreasing={decreasing}, sup omega at eps_min={sup["sup_omega"].iloc[-1]:.6g}, verdict={verdict}')
    return EquicontinuityReport(table=table, sup_table=sup, excluded=excluded, verdict=verdict)


# ========================================================================= #
# Loewner Bound                                                             #
# ========================================================================= #


def _diameter(points: np.ndarray) -> float:
    from scipy.spatial.distance import pdist
    return float(np.max(pdist(points))) if len(points) > 1 else 0.0


def _check_disjoint(E: np.ndarray, F: np.ndarray, tol: float) -> float:
    from scipy.spatial.distance import cdist
    e = refine_curve(DiscreteCurve(E), tol).vertices
    f = refine_curve(DiscreteCurve(F), tol).vertices
    gap = float(np.min(cdist(e, f)))
    if gap < tol:
        raise IntersectingContinuaError(f'the continua meet or lie closer than {tol}: distance={gap}')
    return gap


@dataclass(frozen=True)
class LoewnerReport:
    table: 'pandas.DataFrame'
    inv_c: float
    stable: bool
    verdict: Verdict


def check_loewner_bound(
    pairs: Sequence[Tuple[np.ndarray, np.ndarray]],
    p: float,
    R: float,
    x0=None,
    count: Optional[int] = None,
    seed: int = 0,
    resolution: Optional[int] = None,
    rescale: Optional[float] = 0.5,
    **solver_kwargs,
) -> LoewnerReport:
    """
    ρ_i = M_p(Γ(E_i, F_i))·R^(1+p-n) / min{diam E_i, diam F_i} for continua in
    B(x0, R). The empirical constant 1/C is min_i ρ_i. The first pair is also
    rescaled about x0 to check that ρ stays within a factor 3.

    :raises IntersectingContinuaError if some E and F meet
    :raises PreconditionError if some continuum is a single point
    """
    p = check_exponent(p)
    if len(pairs) == 0:
        raise PreconditionError('at least one pair of continua is required')
    n = as_points(pairs[0][0]).shape[1]
    x0 = np.zeros(n) if (x0 is None) else as_points(x0, n)[0]
    chart = MetricChart.euclidean(dim=n, box=np.stack([x0 - R, x0 + R], axis=1))
    grid = GridDomain(chart, resolution=resolution)
    half_cell = 0.5 * float(np.min(grid.cell_size))

    def ratio(E, F) -> Tuple[float, float, float]:
        E, F = as_points(E, n), as_points(F, n)
        if np.any(np.linalg.norm(np.concatenate([E, F]) - x0, axis=1) > R):
            raise PreconditionError(f'the continua must lie in the ball B(x0, {R})')
        _check_disjoint(E, F, half_cell)
        d = min(_diameter(E), _diameter(F))
        if d <= 0:
            raise PreconditionError(f'the continua must be nondegenerate, got a minimum diameter of {d}')
        family = connecting_family(E, F, count=count, seed=seed, max_step=half_cell)
        inside = [k for k, c in enumerate(family) if np.all(chart.contains(c.vertices))]
        family = family.subset(inside)
        M = compute_modulus(family, p, grid, **solver_kwargs).value
        return M, d, M * R ** (1 + p - n) / d

    rows = []
    for i, (E, F) in enumerate(pairs):
        M, d, rho = ratio(E, F)
        rows.append(dict(pair=i, scale=1.0, modulus=M, min_diameter=d, ratio=rho))
    stable = True
    if rescale is not None:
        E, F = pairs[0]
        M, d, rho = ratio(x0 + rescale * (as_points(E, n) - x0), x0 + rescale * (as_points(F, n) - x0))
        rows.append(dict(pair=0, scale=rescale, modulus=M, min_diameter=d, ratio=rho))
        stable = bool(max(rho, rows[0]['ratio']) <= 3 * min(rho, rows[0]['ratio']))

    import pandas as pd
    table = pd.DataFrame(rows)
    inv_c = float(table.loc[table['scale'] == 1.0, 'ratio'].min())
    verdict = Verdict.PASS if (inv_c > 0 and stable) else Verdict.FAIL
    LOG.info(f'Loewner bound: 1/C={inv_c:.6g}, stable={stable}, verdict={verdict}')
    return LoewnerReport(table=table, inv_c=inv_c, stable=stable, verdict=verdict)


# ========================================================================= #
# export                                                                    #
# ========================================================================= #


__all__ = (
    # types
    'PsiKind',
    'PsiFamily',
    'OscillationReport',
    'CriterionReport',
    'EquicontinuityReport',
    'LoewnerReport',
    # helpers
    'make_ladder',
    # operations
    'check_fmo',
    'spherical_mean_q',
    'check_divergence_criterion',
    'theorem1_growth_check',
    'check_ls_criterion',
    'run_equicontinuity_experiment',
    'check_loewner_bound',
)


# ========================================================================= #
# END                                                                       #
# ========================================================================= #
