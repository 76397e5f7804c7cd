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
from typing import NoReturn
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np

from ringmod._curves import CurveFamily
from ringmod._curves import generate_annulus_family
from ringmod._curves import pushforward
from ringmod._errors import InvalidProfileError
from ringmod._errors import PreconditionError
from ringmod._fmt import Verdict
from ringmod._geometry import GeodesicAnnulus
from ringmod._geometry import GridDomain
from ringmod._geometry import MetricChart
from ringmod._geometry import as_points
from ringmod._geometry import unit_directions
from ringmod._modulus import ModulusResult
from ringmod._modulus import check_exponent
from ringmod._modulus import compute_modulus


LOG = logging.getLogger(__name__)


# ========================================================================= #
# Condenser                                                                 #
# ========================================================================= #


@dataclass(frozen=True, eq=False)
class Condenser:
    """
    The ball condenser E = (A, C) with A = B(x0, ε0) and C = closed B(x0, ε).
    """

    center: np.ndarray
    eps: float
    eps0: float
    chart: MetricChart

    def __post_init__(self):
        object.__setattr__(self, 'center', as_points(self.center, self.chart.dim)[0])
        if not (0 < self.eps < self.eps0):
            raise PreconditionError(f'condenser radii must satisfy 0 < eps < eps0, got: eps={repr(self.eps)}, eps0={repr(self.eps0)}')
        self.chart.check_patch_radius(self.eps0, what='condenser radius eps0')
        self.chart.check_inside(self.center, what='condenser center')

    @property
    def annulus(self) -> GeodesicAnnulus:
        """A \\ C, whose boundary spheres the escaping curves join"""
        return GeodesicAnnulus(center=self.center, r1=self.eps, r2=self.eps0, chart=self.chart)

    def with_eps(self, eps: float) -> 'Condenser':
        return Condenser(center=self.center, eps=eps, eps0=self.eps0, chart=self.chart)

    def check_gap(self, grid: GridDomain) -> NoReturn:
        """
        C must lie strictly inside A, at least one grid cell away from ∂A.
        """
        cell = float(np.min(grid.cell_size))
        # compare in coordinates along the first axis
        u = unit_directions(self.chart.dim, 1)
        t = self.annulus.coordinate_radii(u, self.eps0)[0] - self.annulus.coordinate_radii(u, self.eps)[0]
        if t < cell * (1 - 1e-9):
            raise PreconditionError(f'the gap between C and the boundary of A is smaller than one grid cell: {t} < {cell}')


# ========================================================================= #
# Capacity                                                                  #
# ========================================================================= #


def capacity(
    cond: Condenser,
    p: float,
    grid: Optional[GridDomain] = None,
    count: Optional[int] = None,
    seed: int = 0,
    **solver_kwargs,
) -> ModulusResult:
    """
    cap_p E = M_p(Γ_E). Escaping curves are truncated at ∂A, so the family
    is sampled as Γ(S(x0, ε), S(x0, ε0), A).

    :raises PreconditionError if count < 1 or the condenser gap is below one cell
    """
    p = check_exponent(p)
    if count is not None and count < 1:
        raise PreconditionError(f'the sampled family of a condenser must not be empty, got count: {repr(count)}')
    if grid is None:
        grid = GridDomain(cond.chart)
    cond.check_gap(grid)
    family = generate_annulus_family(cond.annulus, count=count, seed=seed, grid=grid)
    result = compute_modulus(family, p, grid, **solver_kwargs)
    LOG.info(f'capacity p={p}, eps={cond.eps}, eps0={cond.eps0}: {result.value:.8g}')
    return result


def image_modulus(
    family: CurveFamily,
    f,
    p: float,
    resolution: Optional[int] = None,
    margin: float = 0.05,
    target: Optional[MetricChart] = None,
    **solver_kwargs,
) -> Tuple[ModulusResult, CurveFamily, GridDomain]:
    """
    M_p(f(Γ)) on a grid of the target chart that covers the image curves.
    """
    target = getattr(f, 'target', None) if (target is None) else target
    if target is None:
        raise ValueError('the target chart of the mapping is unknown')
    image = pushforward(family, f)
    points = np.concatenate([c.vertices for c in image], axis=0)
    grid = GridDomain.bounding(target, points, margin=margin, resolution=resolution)
    image = image.refined(0.5 * float(np.min(grid.cell_size)))
    return compute_modulus(image, p, grid, **solver_kwargs), image, grid


def image_capacity(
    f,
    cond: Condenser,
    p: float,
    count: Optional[int] = None,
    seed: int = 0,
    resolution: Optional[int] = None,
    **solver_kwargs,
) -> ModulusResult:
    """
    cap_p f(E), from the pushforward of the escaping family of E.
    """
    p = check_exponent(p)
    if count is not None and count < 1:
        raise PreconditionError(f'the sampled family of a condenser must not be empty, got count: {repr(count)}')
    source = GridDomain.bounding(cond.chart, cond.annulus.sphere_points(unit_directions(cond.chart.dim, 64), cond.eps0), resolution=resolution)
    family = generate_annulus_family(cond.annulus, count=count, seed=seed, grid=source)
    result, _, _ = image_modulus(family, f, p, resolution=resolution, **solver_kwargs)
    return result


# ========================================================================= #
# Capacity Bound                                                            #
# ========================================================================= #


LEMMA1_COLUMNS = ('eps', 'I', 'F', 'RHS', 'LHS', 'pass', 'F_over_I_n')


@dataclass(frozen=True)
class Lemma1Report:
    """
    Rows of cap_p f(E) <= F(ε, ε0) / I^p(ε, ε0) per ε, with the
    alternative normalization F / I^n alongside.
    """

    table: 'pandas.DataFrame'
    passed: bool
    degenerate: bool
    lhs_decreasing: bool

    @property
    def verdict(self) -> Verdict:
        return Verdict.PASS if self.passed else Verdict.FAIL


def check_lemma1_bound(
    f,
    cond: Condenser,
    Q,
    p: float,
    psi,
    eps_list: Sequence[float],
    count: Optional[int] = None,
    seed: int = 0,
    resolution: Optional[int] = None,
    tol: float = 0.05,
    samples: Optional[int] = None,
    **solver_kwargs,
) -> Lemma1Report:
    """
    For each ε compare the capacity of the image condenser f(E) with
    F(ε, ε0)/I^p(ε, ε0), where I = ∫_ε^ε0 ψ dt and F = ∫ Q·ψ^p dv over the
    annulus ε < d(x, x0) < ε0.

    :param f: a ring (p,Q)-mapping at x0, eg. a `MappingSpec`
    :param psi: provides `I(eps, eps0)` and `F(Q, x0, eps, eps0, chart)`, eg. a `PsiFamily`
    :raises InvalidProfileError if I is not finite and positive
    """
    import pandas as pd
    p = check_exponent(p)
    n = cond.chart.dim
    rows = []
    for eps in sorted(eps_list, reverse=True):
        c = cond.with_eps(eps)
        I = float(psi.I(eps, cond.eps0))
        if not (0 < I < math.inf):
            raise InvalidProfileError(f'ψ must satisfy 0 < I(eps, eps0) < inf, got I={I} for eps={eps}, eps0={cond.eps0}')
        F = float(psi.F(Q, c.center, eps, cond.eps0, cond.chart, samples=samples))
        rhs = F / I ** p
        lhs = image_capacity(f, c, p, count=count, seed=seed, resolution=resolution, **solver_kwargs).value
        if rhs == 0:
            ok = lhs <= tol
        else:
            ok = lhs <= rhs * (1 + tol)
        LOG.info(f'capacity bound at eps={eps}: LHS={lhs:.6g}, RHS={rhs:.6g}, I={I:.6g}, F={F:.6g}, pass={ok}')
        rows.append((eps, I, F, rhs, lhs, ok, F / I ** n))
    table = pd.DataFrame(rows, columns=list(LEMMA1_COLUMNS))
    degenerate = bool(np.all(table['F'] == 0))
    if degenerate:
        LOG.warning('F vanishes on every tested annulus, Q is zero there and the bound degenerates to cap <= 0')
    lhs = table['LHS'].to_numpy()
    lhs_decreasing = bool(np.all(np.diff(lhs) <= 1e-9 * np.abs(lhs[:-1]))) if len(lhs) > 1 else True
    return Lemma1Report(table=table, passed=bool(table['pass'].all()), degenerate=degenerate, lhs_decreasing=lhs_decreasing)


def loewner_diameter_bound(cap: float, R: float, p: float, n: int, inv_c: float) -> float:
    """
    min{diam f(C), diam K_f} <= cap_p f(E)·R^(1+p-n) / (1/C), the diameter
    bound implied by a Loewner-type lower bound with constant 1/C.
    """
    if not (inv_c > 0):
        raise ValueError(f'the Loewner constant 1/C must be positive, got: {repr(inv_c)}')
    if not (R > 0):
        raise ValueError(f'the ball radius must be positive, got: {repr(R)}')
    return cap * R ** (1 + p - n) / inv_c


# ========================================================================= #
# export                                                                    #
# ========================================================================= #


__all__ = (
    'Condenser',
    'Lemma1Report',
    'LEMMA1_COLUMNS',
    'capacity',
    'image_modulus',
    'image_capacity',
    'check_lemma1_bound',
    'loewner_diameter_bound',
)


# ========================================================================= #
# END                                                                       #
# ========================================================================= #
