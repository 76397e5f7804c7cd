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
from typing import Callable
from typing import Dict
from typing import List
from typing import NoReturn
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np

from ringmod._curves import CurveFamily
from ringmod._curves import generate_annulus_family
from ringmod._curves import line_integral_matrix
from ringmod._errors import MinorizationError
from ringmod._errors import PreconditionError
from ringmod._errors import UnsupportedExponentError
from ringmod._geometry import GeodesicAnnulus
from ringmod._geometry import GridDomain
from ringmod._geometry import MetricChart
from ringmod._geometry import as_points
from ringmod._geometry import radial_integral
from ringmod._geometry import sphere_area
from ringmod._utils import VarHandlerFloat
from ringmod._utils import VarHandlerInt
from ringmod._utils import VarHandlerStr
from ringmod._utils import iter_progress


LOG = logging.getLogger(__name__)


# ========================================================================= #
# Variable Handlers                                                         #
# ========================================================================= #


_VAR_HANDLER_SOLVER_TOL = VarHandlerFloat(
    identifier='solver_tol',
    environ_key='RINGMOD_SOLVER_TOL',
    fallback_value=1e-4,
    min_value=0.0,
    min_inclusive=False,
)

_VAR_HANDLER_SOLVER_MAX_ITER = VarHandlerInt(
    identifier='solver_max_iter',
    environ_key='RINGMOD_SOLVER_MAX_ITER',
    fallback_value=100000,
    min_value=1,
)

_VAR_HANDLER_SOLVER_METHOD = VarHandlerStr(
    identifier='solver_method',
    environ_key='RINGMOD_SOLVER_METHOD',
    fallback_value='lbfgs',
    allowed_values=('lbfgs', 'pgd'),
)


def solver_tol_set_default(tol: Optional[float]) -> NoReturn:
    return _VAR_HANDLER_SOLVER_TOL.set_default_value(value=tol)


def solver_tol_get(tol: Optional[float] = None) -> float:
    return _VAR_HANDLER_SOLVER_TOL.get_value(override=tol)


def solver_max_iter_set_default(max_iter: Optional[int]) -> NoReturn:
    return _VAR_HANDLER_SOLVER_MAX_ITER.set_default_value(value=max_iter)


def solver_max_iter_get(max_iter: Optional[int] = None) -> int:
    return _VAR_HANDLER_SOLVER_MAX_ITER.get_value(override=max_iter)


def solver_method_set_default(method: Optional[str]) -> NoReturn:
    return _VAR_HANDLER_SOLVER_METHOD.set_default_value(value=method)


def solver_method_get(method: Optional[str] = None) -> str:
    return _VAR_HANDLER_SOLVER_METHOD.get_value(override=method)


# absolute tolerance on the constraints of a returned density
FEAS_TOL = 1e-6


def check_exponent(p: float) -> float:
    """
    :raises UnsupportedExponentError if p <= 1 or not finite
    """
    if isinstance(p, bool) or not isinstance(p, (int, float, np.floating, np.integer)):
        raise TypeError(f'exponent must be a real number, got: {repr(p)}')
    p = float(p)
    if not (math.isfinite(p) and p > 1):
        raise UnsupportedExponentError(f'only exponents p > 1 are supported, got: p={repr(p)}')
    return p


# ========================================================================= #
# Densities                                                                 #
# ========================================================================= #


@dataclass(frozen=True, eq=False)
class DensityField:
    """
    A nonnegative density ρ, piecewise constant on the cells of a grid.
    """

    grid: GridDomain
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if values.shape != (self.grid.size,):
            raise ValueError(f'density must have one value per cell, got {values.size} values for {self.grid.size} cells')
        if np.any(np.isnan(values)) or np.any(values < 0):
            raise ValueError('density values must be nonnegative')
        values = np.where(self.grid.valid, values, 0.0)
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def zeros(cls, grid: GridDomain) -> 'DensityField':
        return cls(grid=grid, values=np.zeros(grid.size))

    @classmethod
    def from_function(cls, grid: GridDomain, fn: Callable[[np.ndarray], np.ndarray]) -> 'DensityField':
        """sample a density function at the cell centers"""
        with np.errstate(divide='ignore', invalid='ignore'):
            values = np.asarray(fn(grid.centers), dtype=np.float64)
        return cls(grid=grid, values=np.where(np.isfinite(values), values, 0.0))

    def energy(self, p: float) -> float:
        return density_energy(self, p)

    def image(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def __mul__(self, other: float) -> 'DensityField':
        return DensityField(self.grid, self.values * float(other))

    __rmul__ = __mul__


def density_energy(density: DensityField, p: float) -> float:
    """
    ∫ρ^p dv ≈ Σ_c ρ_c^p v_c over the valid cells.
    """
    valid = density.grid.valid
    return float(np.sum(density.values[valid] ** p * density.grid.cell_volumes[valid]))


def constraint_matrix(family: CurveFamily, grid: GridDomain):
    """
    The sparse (curves × cells) matrix of line integrals, see `line_integral_matrix`.

    :raises PreconditionError if a curve has no positive length on the grid
    """
    A = line_integral_matrix(family, grid)
    lengths = np.asarray(A.sum(axis=1)).reshape(-1)
    if len(lengths) and not np.all(lengths > 0):
        bad = int(np.nonzero(~(lengths > 0))[0][0])
        raise PreconditionError(f'all curves must have positive length on the grid, curve {bad} has length: {lengths[bad]}')
    return A


# ========================================================================= #
# Results                                                                   #
# ========================================================================= #


HISTORY_COLUMNS = ('iteration', 'objective', 'max_violation', 'duality_gap')


@dataclass(frozen=True, eq=False)
class ModulusResult:
    """
    The solution of the discrete p-modulus program for a curve family.
    `value` is a certified upper bound of the discrete optimum, attained
    by the admissible `density`. `lower_bound` is the dual value.
    """

    value: float
    density: DensityField
    p: float
    duality_gap: float
    iterations: int
    lower_bound: float = 0.0
    converged: bool = True
    method: str = 'lbfgs'
    multipliers: Optional[np.ndarray] = field(default=None, repr=False)
    min_line_integral: float = math.inf
    history: List[Tuple[int, float, float, float]] = field(default_factory=list, repr=False)

    def history_frame(self):
        import pandas as pd
        return pd.DataFrame(self.history, columns=list(HISTORY_COLUMNS))

    def write_report(self, path=None, file=None, overwrite: bool = True):
        """export the solver history as CSV"""
        from ringmod._io import write_table
        write_table(self.history_frame(), path, overwrite=overwrite, file=file)


# ========================================================================= #
# Dual Problem                                                              #
# ========================================================================= #


class _DualProblem(object):
    """
    The Lagrangian dual of  min Σ v_c ρ_c^p  s.t.  Aρ >= 1, ρ >= 0.

    For multipliers λ >= 0 the minimising density is
        ρ_c(λ) = ((Aᵀλ)_c / (p v_c))^(1/(p-1))
    and the dual function, a lower bound on the optimum, is
        g(λ) = Σλ - (p-1) Σ v_c ρ_c(λ)^p
    with gradient 1 - Aρ(λ).
    """

    def __init__(self, A, volumes: np.ndarray, p: float):
        # only cells crossed by some curve carry density
        used = np.unique(A.indices)
        self.cells = used
        self.A = A[:, used].tocsr()
        self.AT = self.A.T.tocsr()
        self.v = volumes[used]
        self.p = p
        self.num_evals = 0

    @property
    def num_curves(self) -> int:
        return self.A.shape[0]

    def density(self, lam: np.ndarray) -> np.ndarray:
        w = np.maximum(self.AT @ lam, 0.0)
        return (w / (self.p * self.v)) ** (1.0 / (self.p - 1.0))

    def energy(self, rho: np.ndarray) -> float:
        return float(np.sum(self.v * rho ** self.p))

    def evaluate(self, lam: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray, np.ndarray]:
        self.num_evals += 1
        rho = self.density(lam)
        Arho = self.A @ rho
        g = float(np.sum(lam)) - (self.p - 1.0) * self.energy(rho)
        return g, 1.0 - Arho, rho, Arho

    def ray_scale(self, direction: np.ndarray) -> np.ndarray:
        """
        the maximiser of g along the ray c·direction, c > 0
        """
        direction = np.maximum(direction, 0.0)
        total = float(np.sum(direction))
        S = self.energy(self.density(direction))
        if total <= 0 or S <= 0:
            return direction
        # g(c·d) = c·Σd - (p-1)·c^(p/(p-1))·S
        return direction * (total / (self.p * S)) ** (self.p - 1.0)

    def upper(self, rho: np.ndarray, Arho: np.ndarray) -> Tuple[float, float]:
        """
        energy of the rescaled admissible density, and the scale
        """
        m = float(np.min(Arho))
        if not (m > 0):
            return math.inf, 0.0
        return self.energy(rho) / m ** self.p, 1.0 / m


class _Tracker(object):
    """
    Keeps the best certified bounds and the history rows.
    """

    def __init__(self, problem: _DualProblem, tol: float):
        self.problem = problem
        self.tol = tol
        self.lower = 0.0
        self.upper = math.inf
        self.best_rho = None
        self.best_lam = None
        self.history = []

    @property
    def gap(self) -> float:
        if self.upper == 0:
            return 0.0
        if not math.isfinite(self.upper):
            return math.inf
        return max(0.0, (self.upper - self.lower) / self.upper)

    @property
    def done(self) -> bool:
        return self.gap <= self.tol

    def offer_primal(self, rho: np.ndarray, Arho: np.ndarray) -> NoReturn:
        U, scale = self.problem.upper(rho, Arho)
        if U < self.upper:
            self.upper = U
            self.best_rho = rho * scale

    def update(self, iteration: int, lam: np.ndarray) -> NoReturn:
        g, grad, rho, Arho = self.problem.evaluate(lam)
        if g > self.lower:
            self.lower = g
            self.best_lam = lam.copy()
        self.offer_primal(rho, Arho)
        max_violation = float(max(0.0, np.max(grad)))
        self.history.append((iteration, self.upper, max_violation, self.gap))
        LOG.debug(f'iteration {iteration}: upper={self.upper:.8g}, lower={self.lower:.8g}, gap={self.gap:.3e}, max_violation={max_violation:.3e}')


def _solve_lbfgs(problem: _DualProblem, tracker: _Tracker, lam: np.ndarray, max_iter: int, chunk: int = 200) -> Tuple[np.ndarray, int]:
    from scipy.optimize import minimize

    def fun(x):
        g, grad, _, _ = problem.evaluate(x)
        return -g, -grad

    bounds = [(0.0, None)] * problem.num_curves
    iterations = 0
    stalls = 0
    while iterations < max_iter and not tracker.done:
        res = minimize(
            fun, lam, jac=True, method='L-BFGS-B', bounds=bounds,
            options=dict(maxiter=min(chunk, max_iter - iterations), maxcor=20, ftol=1e-16, gtol=1e-14, maxls=50),
        )
        iterations += max(int(res.nit), 1)
        lam = np.maximum(res.x, 0.0)
        before = tracker.gap
        tracker.update(iterations, lam)
        if res.nit < chunk and tracker.gap >= before * (1 - 1e-9):
            stalls += 1
            if stalls >= 3:
                LOG.warning(f'L-BFGS-B made no further progress after {iterations} iterations, gap={tracker.gap:.3e}: {res.message}')
                break
        else:
            stalls = 0
    return lam, iterations


def _solve_pgd(problem: _DualProblem, tracker: _Tracker, lam: np.ndarray, max_iter: int, check_every: int = 50) -> Tuple[np.ndarray, int]:
    # accelerated projected gradient ascent on g with Armijo backtracking
    step = 1.0 / max(1.0, float(np.max(np.asarray(problem.A.sum(axis=1)))) ** 2)
    y, y_prev, t = lam.copy(), lam.copy(), 1.0
    g_lam = problem.evaluate(lam)[0]
    iteration = 0
    for iteration in range(1, max_iter + 1):
        g_y, grad_y, _, _ = problem.evaluate(y)
        while True:
            candidate = np.maximum(y + step * grad_y, 0.0)
            diff = candidate - y
            g_c = problem.evaluate(candidate)[0]
            if g_c >= g_y + float(np.sum(grad_y * diff)) - float(np.sum(diff * diff)) / (2 * step) or step < 1e-300:
                break
            step *= 0.5
        if g_c < g_lam:
            # restart momentum
            t, y = 1.0, lam.copy()
            continue
        t_next = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        y = candidate + ((t - 1) / t_next) * (candidate - lam)
        lam, g_lam, t = candidate, g_c, t_next
        step *= 1.1
        if iteration % check_every == 0:
            tracker.update(iteration, lam)
            if tracker.done:
                break
    tracker.update(iteration, lam)
    return lam, iteration


# ========================================================================= #
# Modulus                                                                   #
# ========================================================================= #


def compute_modulus(
    family: CurveFamily,
    p: float,
    grid: GridDomain,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    method: Optional[str] = None,
    warm_start: Optional[np.ndarray] = None,
) -> ModulusResult:
    """
    M_p(Γ) = inf Σ_c ρ_c^p v_c over cell densities with ∫_γ ρ ds >= 1 for all γ in Γ.

    The solver ascends the dual until the relative gap between the best
    rescaled primal (an upper bound) and the best dual value (a lower bound)
    is at most `tol`, or `max_iter` iterations have passed.

    :raises UnsupportedExponentError if p <= 1
    :raises PreconditionError if a curve has no positive length on the grid
    """
    p = check_exponent(p)
    tol = solver_tol_get(tol)
    max_iter = solver_max_iter_get(max_iter)
    method = solver_method_get(method)
    # the modulus of the empty family is zero
    if len(family) == 0:
        return ModulusResult(value=0.0, density=DensityField.zeros(grid), p=p, duality_gap=0.0, iterations=0, method=method, multipliers=np.zeros(0))

    A = constraint_matrix(family, grid)
    problem = _DualProblem(A, grid.cell_volumes, p)
    tracker = _Tracker(problem, tol)

    # uniform admissible start ρ ≡ 1/ℓ_min
    lengths = np.asarray(problem.A.sum(axis=1)).reshape(-1)
    rho0 = np.full(len(problem.cells), 1.0 / float(np.min(lengths)))
    tracker.offer_primal(rho0, problem.A @ rho0)

    if warm_start is not None:
        warm_start = np.asarray(warm_start, dtype=np.float64)
        if warm_start.shape != (len(family),):
            raise ValueError(f'warm start needs one multiplier per curve, got shape: {warm_start.shape}')
        lam = problem.ray_scale(warm_start)
    else:
        lam = problem.ray_scale(np.ones(len(family)))
    tracker.update(0, lam)

    if method == 'lbfgs':
        lam, iterations = _solve_lbfgs(problem, tracker, lam, max_iter)
    elif method == 'pgd':
        lam, iterations = _solve_pgd(problem, tracker, lam, max_iter)
    else:  # pragma: no cover
        raise NotImplementedError(f'unsupported solver method: {repr(method)}, this is a bug!')

    converged = tracker.done
    if not converged:
        LOG.warning(f'modulus solver stopped after {iterations} iterations with relative gap {tracker.gap:.3e} > tol={tol:.1e}')

    values = np.zeros(grid.size)
    values[problem.cells] = tracker.best_rho
    density = DensityField(grid=grid, values=values)
    min_integral = float(np.min(A @ density.values))
    value = density_energy(density, p)
    LOG.info(f'modulus p={p}: value={value:.8g}, lower={tracker.lower:.8g}, gap={tracker.gap:.3e}, iterations={iterations}, curves={len(family)}, method={method}')
    return ModulusResult(
        value=value,
        density=density,
        p=p,
        duality_gap=tracker.gap,
        iterations=iterations,
        lower_bound=tracker.lower,
        converged=converged,
        method=method,
        multipliers=tracker.best_lam if tracker.best_lam is not None else lam,
        min_line_integral=min_integral,
        history=tracker.history,
    )


# ========================================================================= #
# Annulus Oracle                                                            #
# ========================================================================= #


def _check_ring(n: int, p: float, r1: float, r2: float) -> float:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 2:
        raise ValueError(f'dimension must be an integer >= 2, got: {repr(n)}')
    p = check_exponent(p)
    if not (0 < r1 < r2):
        raise PreconditionError(f'ring radii must satisfy 0 < r1 < r2, got: r1={repr(r1)}, r2={repr(r2)}')
    return p


def _radial_exponent(n: int, p: float) -> float:
    return (1.0 - n) / (p - 1.0)


def _radial_normalizer(n: int, p: float, r1: float, r2: float) -> float:
    # J = ∫_{r1}^{r2} r^((1-n)/(p-1)) dr
    a = _radial_exponent(n, p)
    if math.isclose(a, -1.0, rel_tol=0, abs_tol=1e-12):
        return math.log(r2 / r1)
    return (r2 ** (a + 1) - r1 ** (a + 1)) / (a + 1)


def annulus_modulus_oracle(n: int, p: float, r1: float, r2: float) -> float:
    """
    The p-modulus of the family of curves joining the boundary spheres of a
    Euclidean ring, ω_{n-1}·J^(1-p) with J = ∫_{r1}^{r2} r^((1-n)/(p-1)) dr.
    For p = n this is ω_{n-1}·log(r2/r1)^(1-n).
    """
    p = _check_ring(n, p, r1, r2)
    return sphere_area(n) * _radial_normalizer(n, p, r1, r2) ** (1.0 - p)


def extremal_annulus_density(n: int, p: float, r1: float, r2: float, center=None) -> Callable[[np.ndarray], np.ndarray]:
    """
    ρ(x) = |x - x0|^((1-n)/(p-1)) / J inside the ring, zero outside.
    """
    p = _check_ring(n, p, r1, r2)
    a = _radial_exponent(n, p)
    J = _radial_normalizer(n, p, r1, r2)
    x0 = np.zeros(n) if (center is None) else as_points(center, n)[0]

    def rho(points: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(as_points(points, n) - x0, axis=1)
        inside = (r >= r1) & (r <= r2)
        with np.errstate(divide='ignore'):
            return np.where(inside, np.abs(r) ** a / J, 0.0)

    return rho


@dataclass(frozen=True)
class OracleValidation:
    radial_integral: float
    energy: float
    oracle: float
    ok: bool


def validate_annulus_oracle(n: int, p: float, r1: float, r2: float, rtol: float = 1e-8) -> OracleValidation:
    """
    Check by quadrature that the extremal density has unit integral along
    radii and energy equal to the oracle value.
    """
    p = _check_ring(n, p, r1, r2)
    a = _radial_exponent(n, p)
    J = _radial_normalizer(n, p, r1, r2)
    along = radial_integral(lambda r: r ** a / J, r1, r2)
    energy = sphere_area(n) * radial_integral(lambda r: (r ** a / J) ** p * r ** (n - 1), r1, r2)
    oracle = annulus_modulus_oracle(n, p, r1, r2)
    ok = math.isclose(along, 1.0, rel_tol=rtol) and math.isclose(energy, oracle, rel_tol=rtol)
    if not ok:
        LOG.warning(f'annulus oracle failed validation for n={n}, p={p}, r1={r1}, r2={r2}: radial integral={along}, energy={energy}, oracle={oracle}')
    return OracleValidation(radial_integral=along, energy=energy, oracle=oracle, ok=ok)


# ========================================================================= #
# Properties                                                                #
# ========================================================================= #


@dataclass(frozen=True)
class ComparisonReport:
    """
    Solved values of two sides of a modulus inequality `lhs <= rhs·(1 + slack)`.
    """

    lhs: float
    rhs: float
    slack: float
    holds: bool

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else (math.inf if self.lhs > 0 else 1.0)


def _compare(lhs: float, rhs: float, slack: float, what: str) -> ComparisonReport:
    holds = lhs <= rhs * (1 + slack)
    (LOG.info if holds else LOG.warning)(f'{what}: {lhs:.8g} <= {rhs:.8g} * (1 + {slack:.1e}) is {holds}')
    return ComparisonReport(lhs=lhs, rhs=rhs, slack=slack, holds=holds)


def check_minorization(family1: CurveFamily, family2: CurveFamily, p: float, grid: GridDomain, tol: Optional[float] = None, **solver_kwargs) -> ComparisonReport:
    """
    If every curve of `family1` contains a curve of `family2`, then
    M_p(family1) <= M_p(family2).

    :raises MinorizationError if `family2` carries no valid certificate for `family1`
    """
    tol = solver_tol_get(tol)
    if family1 is family2:
        value = compute_modulus(family1, p, grid, tol=tol, **solver_kwargs).value
        return _compare(value, value, 2 * tol, 'minorization (reflexive)')
    certificate = family2.certificate
    if certificate is None or certificate.parent is not family1:
        raise MinorizationError('the second family carries no minorization certificate for the first family, construct it with `truncate_family`')
    certificate.verify(family2)
    m1 = compute_modulus(family1, p, grid, tol=tol, **solver_kwargs).value
    m2 = compute_modulus(family2, p, grid, tol=tol, **solver_kwargs).value
    return _compare(m1, m2, 2 * tol, 'minorization')


def check_monotonicity(family_small: CurveFamily, family_big: CurveFamily, p: float, grid: GridDomain, tol: Optional[float] = None, **solver_kwargs) -> ComparisonReport:
    """
    Γ1 ⊂ Γ2 implies M_p(Γ1) <= M_p(Γ2).

    :raises PreconditionError if the first family is not a subset of the second
    """
    tol = solver_tol_get(tol)
    big = {c.fingerprint() for c in family_big}
    if not all(c.fingerprint() in big for c in family_small):
        raise PreconditionError('the first family is not a subset of the second family')
    m1 = compute_modulus(family_small, p, grid, tol=tol, **solver_kwargs).value
    m2 = compute_modulus(family_big, p, grid, tol=tol, **solver_kwargs).value
    return _compare(m1, m2, 2 * tol, 'monotonicity')


def check_subadditivity(family1: CurveFamily, family2: CurveFamily, p: float, grid: GridDomain, tol: Optional[float] = None, **solver_kwargs) -> ComparisonReport:
    """
    M_p(Γ1 ∪ Γ2) <= M_p(Γ1) + M_p(Γ2).
    """
    tol = solver_tol_get(tol)
    m1 = compute_modulus(family1, p, grid, tol=tol, **solver_kwargs).value
    m2 = compute_modulus(family2, p, grid, tol=tol, **solver_kwargs).value
    m12 = compute_modulus(family1.union(family2), p, grid, tol=tol, **solver_kwargs).value
    return _compare(m12, m1 + m2, 2 * tol, 'subadditivity')


# ========================================================================= #
# Studies                                                                   #
# ========================================================================= #


def _map_multipliers(previous: CurveFamily, lam: np.ndarray, family: CurveFamily) -> np.ndarray:
    # carry multipliers over to the curves shared with the previous family
    known: Dict[str, float] = {c.fingerprint(): float(x) for c, x in zip(previous, lam)}
    fill = float(np.mean(lam)) if len(lam) else 1.0
    return np.array([known.get(c.fingerprint(), fill) for c in family])


def refinement_study(
    annulus: GeodesicAnnulus,
    counts: Sequence[int],
    p: float,
    grid: GridDomain,
    seed: int = 0,
    tol: Optional[float] = None,
    oracle: Optional[float] = None,
    progress: bool = False,
    atol: float = 1e-6,
    **solver_kwargs,
):
    """
    Solve the modulus of nested annulus families of increasing size, each
    warm-started from the multipliers of the previous one.

    A row is non-decreasing when its certified upper bound is at least the
    certified lower bound of the previous, smaller family, up to `atol`.

    :return: a DataFrame with columns count, value, lower_bound, duality_gap, iterations, non_decreasing, and relative_error if an oracle is given
    """
    import pandas as pd
    tol = solver_tol_get(tol)
    rows = []
    previous, result = None, None
    for count in iter_progress(sorted(counts), desc='refinement', enabled=progress):
        family = generate_annulus_family(annulus, count=count, seed=seed, grid=grid)
        warm = None if previous is None else _map_multipliers(previous, result.multipliers, family)
        result = compute_modulus(family, p, grid, tol=tol, warm_start=warm, **solver_kwargs)
        # nested families have non-decreasing optima: M(bigger) >= M(smaller) >= lower bound of smaller
        non_decreasing = not rows or result.value >= rows[-1]['lower_bound'] - atol
        row = dict(count=count, value=result.value, lower_bound=result.lower_bound, duality_gap=result.duality_gap, iterations=result.iterations, non_decreasing=non_decreasing)
        if oracle is not None:
            row['relative_error'] = (result.value - oracle) / oracle
        rows.append(row)
        previous = family
    return pd.DataFrame(rows)


def scaling_study(
    n: int,
    p: float,
    r1: float,
    r2: float,
    scales: Sequence[float],
    count: int = 512,
    resolution: int = 128,
    seed: int = 0,
    rtol: float = 0.05,
    **solver_kwargs,
):
    """
    Euclidean scaling law: scaling a ring by s multiplies M_p by s^(n-p).

    :return: a DataFrame with columns scale, value, predicted, ratio, within
    """
    import pandas as pd
    p = _check_ring(n, p, r1, r2)
    base = None
    rows = []
    for s in scales:
        chart = MetricChart.euclidean(dim=n, half_width=1.05 * r2 * s)
        grid = GridDomain(chart, resolution=resolution)
        annulus = GeodesicAnnulus(center=np.zeros(n), r1=r1 * s, r2=r2 * s, chart=chart)
        family = generate_annulus_family(annulus, count=count, seed=seed, grid=grid)
        value = compute_modulus(family, p, grid, **solver_kwargs).value
        if base is None:
            base = (s, value)
        predicted = base[1] * (s / base[0]) ** (n - p)
        rows.append(dict(scale=s, value=value, predicted=predicted, ratio=value / predicted, within=abs(value / predicted - 1) <= rtol))
    return pd.DataFrame(rows)


# ========================================================================= #
# export                                                                    #
# ========================================================================= #


__all__ = (
    # config
    'solver_tol_set_default',
    'solver_tol_get',
    'solver_max_iter_set_default',
    'solver_max_iter_get',
    'solver_method_set_default',
    'solver_method_get',
    'FEAS_TOL',
    'check_exponent',
    # types
    'DensityField',
    'ModulusResult',
    'OracleValidation',
    'ComparisonReport',
    # helpers
    'density_energy',
    'constraint_matrix',
    'extremal_annulus_density',
    'validate_annulus_oracle',
    'check_monotonicity',
    'check_subadditivity',
    'refinement_study',
    'scaling_study',
    # operations
    'compute_modulus',
    'annulus_modulus_oracle',
    'check_minorization',
)


# ========================================================================= #
# END                                                                       #
# ========================================================================= #
