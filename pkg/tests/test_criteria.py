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

import math

import numpy as np
import pytest

from ringmod._criteria import PsiFamily
from ringmod._criteria import PsiKind
from ringmod._criteria import check_divergence_criterion
from ringmod._criteria import check_fmo
from ringmod._criteria import check_loewner_bound
from ringmod._criteria import check_ls_criterion
from ringmod._criteria import make_ladder
from ringmod._criteria import run_equicontinuity_experiment
from ringmod._criteria import spherical_mean_q
from ringmod._criteria import theorem1_growth_check
from ringmod._errors import DivisionGuardError
from ringmod._errors import IntersectingContinuaError
from ringmod._errors import PreconditionError
from ringmod._errors import UnsupportedExponentError
from ringmod._fmt import Verdict
from ringmod._geometry import GridDomain
from ringmod._geometry import MetricChart
from ringmod._ringmap import MappingSpec
from ringmod._ringmap import QField


@pytest.fixture(scope='module')
def chart():
    return MetricChart.euclidean(dim=2, half_width=1.05)


# ========================================================================= #
# TEST LADDERS & PROFILES                                                   #
# ========================================================================= #


def test_make_ladder():
    np.testing.assert_allclose(make_ladder(1.0, rungs=3), [0.5, 0.25, 0.125])
    np.testing.assert_allclose(make_ladder(0.1, rungs=2, ratio=0.1), [0.01, 0.001])
    assert len(make_ladder(0.5)) == 12
    with pytest.raises(PreconditionError, match='ladder start must be positive'):
        make_ladder(0.0)
    with pytest.raises(PreconditionError, match=r'ratio must lie in \(0, 1\)'):
        make_ladder(1.0, ratio=1.0)
    with pytest.raises(PreconditionError, match='at least one rung'):
        make_ladder(1.0, rungs=0)


def test_psi_log_power():
    psi = PsiFamily.log_power(n=2, p=2, eps0=0.1)
    assert psi.kind == PsiKind.LOG_POWER
    # I = log(log(1/ε)/log(1/ε0))
    assert psi.I(0.01) == pytest.approx(math.log(2), rel=1e-8)
    assert psi.I(1e-4) == pytest.approx(math.log(4), rel=1e-8)
    # F = 2π·(1/log(1/ε0) - 1/log(1/ε)) for Q = 1
    F = psi.F(QField.constant(1.0), [0, 0], 0.01)
    assert F == pytest.approx(2 * math.pi * (1 / math.log(10) - 1 / math.log(100)), rel=1e-6)
    with pytest.raises(PreconditionError, match='0 < eps0 < 1'):
        PsiFamily.log_power(n=2, p=2, eps0=1.0)
    with pytest.raises(UnsupportedExponentError):
        PsiFamily.log_power(n=2, p=1, eps0=0.1)


def test_psi_reciprocal():
    psi = PsiFamily.reciprocal(n=2, p=2, eps0=1.0)
    np.testing.assert_allclose(psi([0.5, 2.0]), [2.0, 0.5])
    assert psi.I(0.2) == pytest.approx(math.log(5))
    assert psi.I(0.2, 0.4) == pytest.approx(math.log(2))
    # F = 2π·log(1/ε) for Q = 1 in the plane, with a plain callable
    assert psi.F(lambda x: np.ones(len(x)), [0, 0], 0.2) == pytest.approx(2 * math.pi * math.log(5), rel=1e-6)


def test_psi_weighted_inverse():
    psi = PsiFamily.weighted_inverse(n=2, p=2, eps0=0.5, q=lambda t: 2 * math.pi * np.ones_like(t), r1=0.1)
    np.testing.assert_allclose(psi([0.05, 0.25, 0.6]), [0, 1 / (2 * math.pi * 0.25), 0])
    with pytest.raises(ValueError, match='need the spherical means'):
        PsiFamily(kind='weighted_inverse', n=2, p=2, eps0=0.5)
    zero = PsiFamily.weighted_inverse(n=2, p=2, eps0=0.5, q=lambda t: np.zeros_like(t))
    with pytest.raises(DivisionGuardError, match='vanishes at r='):
        zero([0.25])


def test_spherical_mean_q(chart):
    assert spherical_mean_q(lambda x: np.ones(len(x)), [0, 0], 0.5, chart) == pytest.approx(2 * math.pi)


# ========================================================================= #
# TEST FMO                                                                  #
# ========================================================================= #


def test_check_fmo_constant(chart):
    grid = GridDomain(chart, resolution=32)
    report = check_fmo(QField.constant(2.0), [0, 0], grid)
    assert report.verdict == Verdict.FMO
    assert len(report.eps) == 12
    np.testing.assert_allclose(report.means, 2.0)
    np.testing.assert_array_equal(report.oscillations, 0.0)
    assert list(report.table().columns) == ['eps', 'mean', 'oscillation']


def test_check_fmo_log(chart):
    grid = GridDomain(chart, resolution=32)
    report = check_fmo(QField.log_inverse(2), [0, 0], grid, ladder=make_ladder(0.5, rungs=10), resolution=32)
    assert report.verdict == Verdict.FMO
    # the means grow like log(1/ε), the oscillations do not
    assert report.means[-1] > report.means[0] + 5
    assert abs(report.slope) <= 0.05
    assert report.clamped == 0


def test_check_fmo_power(chart):
    grid = GridDomain(chart, resolution=32)
    report = check_fmo(QField.power(-1, 2), [0, 0], grid, ladder=make_ladder(0.5, rungs=10), resolution=32)
    assert report.verdict == Verdict.NOT_FMO
    assert report.slope == pytest.approx(1.0, abs=0.05)


def test_check_fmo_errors(chart):
    grid = GridDomain(chart, resolution=32)
    with pytest.raises(PreconditionError, match='nonempty list of positive radii'):
        check_fmo(QField.constant(1.0), [0, 0], grid, ladder=[])


# ========================================================================= #
# TEST DIVERGENCE                                                           #
# ========================================================================= #


def test_divergence_constant():
    report = check_divergence_criterion(QField.constant(1.0), [0, 0], p=2, n=2, delta=0.5)
    assert report.verdict == Verdict.DIVERGENT
    df = report.table
    assert len(df) == 20
    np.testing.assert_allclose(df['T'], np.log(0.5 / df['eps']) / (2 * math.pi), rtol=0.02)
    np.testing.assert_allclose(df['increment_ratio'].iloc[2:], 1.0, rtol=1e-6)
    np.testing.assert_allclose(df['F_over_I_p'], 1 / df['T'])
    assert report.values['T'] == pytest.approx(df['T'].iloc[-1])


def test_divergence_floor():
    # Q = 1/4 is floored to 1
    a = check_divergence_criterion(QField.constant(0.25), [0, 0], p=2, n=2, delta=0.5, ladder=make_ladder(0.5, rungs=6))
    b = check_divergence_criterion(QField.constant(1.0), [0, 0], p=2, n=2, delta=0.5, ladder=make_ladder(0.5, rungs=6))
    np.testing.assert_allclose(a.table['T'], b.table['T'])


def test_divergence_convergent():
    report = check_divergence_criterion(QField.power(-0.5, 2), [0, 0], p=2, n=2, delta=0.5)
    assert report.verdict == Verdict.CONVERGENT
    # T(ε) = (√δ - √ε)/π
    eps = report.table['eps'].to_numpy()
    np.testing.assert_allclose(report.table['T'], (math.sqrt(0.5) - np.sqrt(eps)) / math.pi, rtol=0.02)


def test_divergence_log():
    report = check_divergence_criterion(QField.log_inverse(2), [0, 0], p=2, n=2, delta=0.5)
    assert report.verdict == Verdict.DIVERGENT


def test_divergence_short_ladder():
    report = check_divergence_criterion(QField.constant(1.0), [0, 0], p=2, n=2, delta=0.5, ladder=[0.25, 0.125, 0.0625])
    assert report.verdict == Verdict.INCONCLUSIVE


def test_divergence_metric_grid(monkeypatch):
    monkeypatch.setenv('RINGMOD_GRID_RESOLUTION', '64')
    chart = MetricChart.from_metric_grid(np.broadcast_to(np.eye(2), (8, 8, 2, 2)), box=[[-1, 1], [-1, 1]])
    report = check_divergence_criterion(QField.constant(1.0), [0, 0], p=2, n=2, delta=0.5, ladder=make_ladder(0.5, rungs=8), chart=chart, samples=64)
    assert report.verdict == Verdict.DIVERGENT
    df = report.table
    np.testing.assert_allclose(df['T'], np.log(0.5 / df['eps']) / (2 * math.pi), rtol=0.05)


def test_divergence_errors():
    with pytest.raises(PreconditionError, match='every rung must lie below 0.5'):
        check_divergence_criterion(QField.constant(1.0), [0, 0], p=2, n=2, delta=0.5, ladder=[0.6, 0.1])
    with pytest.raises(UnsupportedExponentError):
        check_divergence_criterion(QField.constant(1.0), [0, 0], p=1, n=2, delta=0.5)


# ========================================================================= #
# TEST GROWTH                                                               #
# ========================================================================= #


def test_theorem1_growth_constant():
    ladder = [10.0 ** -k for k in range(2, 8)]
    report = theorem1_growth_check(QField.constant(1.0), [0, 0], n=2, p=2, eps0=0.1, ladder=ladder)
    assert report.verdict == Verdict.PASS
    assert report.values == {'bounded': True, 'decreasing': True}
    df = report.table
    assert list(df.columns) == ['eps', 'I', 'F', 'F_over_loglog', 'F_over_I_p', 'F_over_I']
    np.testing.assert_allclose(df['I'], np.log(np.arange(2, 8)), rtol=1e-6)
    assert df['F_over_loglog'].max() <= 3 * df['F_over_loglog'].min()


def test_theorem1_growth_zero():
    ladder = [10.0 ** -k for k in range(2, 8)]
    report = theorem1_growth_check(QField.constant(0.0), [0, 0], n=2, p=2, eps0=0.1, ladder=ladder)
    assert report.verdict == Verdict.PASS
    np.testing.assert_array_equal(report.table['F'], 0.0)


def test_theorem1_growth_errors(chart):
    with pytest.raises(PreconditionError, match='at least 6 rungs'):
        theorem1_growth_check(QField.constant(1.0), [0, 0], n=2, p=2, eps0=0.1, ladder=[0.01, 0.001])
    grid = GridDomain(chart, resolution=32)
    not_fmo = check_fmo(QField.power(-1, 2), [0, 0], grid, ladder=make_ladder(0.5, rungs=10), resolution=32)
    with pytest.raises(PreconditionError, match='finite mean oscillation'):
        theorem1_growth_check(QField.constant(1.0), [0, 0], n=2, p=2, eps0=0.1, ladder=make_ladder(0.05, rungs=6), fmo_report=not_fmo)


# ========================================================================= #
# TEST L^s                                                                  #
# ========================================================================= #


def test_ls_criterion_constant():
    report = check_ls_criterion(QField.constant(1.0), [0, 0, 0], n=3, p=2, s=3, eps0=0.5, resolution=32)
    assert report.verdict == Verdict.PASS
    # ‖1‖_{L^3} over the ball of radius 1/2
    assert report.values['norm'] == pytest.approx((4 / 3 * math.pi * 0.125) ** (1 / 3), rel=0.05)
    df = report.table
    np.testing.assert_allclose(df['F'], 4 * math.pi * (0.5 - df['eps']), rtol=1e-3)
    assert np.all(df['holder_bound'] >= df['F'] * (1 - 0.05))


def test_ls_criterion_not_integrable():
    report = check_ls_criterion(QField.power(-1.5, 3), [0, 0, 0], n=3, p=2, s=3, eps0=0.5)
    assert report.verdict == Verdict.NOT_APPLICABLE
    assert math.isinf(report.values['norm'])


def test_ls_criterion_errors():
    with pytest.raises(UnsupportedExponentError, match='needs 1 < p < n'):
        check_ls_criterion(QField.constant(1.0), [0, 0], n=2, p=2, s=3, eps0=0.5)
    with pytest.raises(UnsupportedExponentError, match=r's >= n/\(n-p\)'):
        check_ls_criterion(QField.constant(1.0), [0, 0, 0], n=3, p=2, s=2, eps0=0.5)


# ========================================================================= #
# TEST EQUICONTINUITY                                                       #
# ========================================================================= #


# the minimal Q is estimated on a coarser sample than the defaults
ESTIMATE = dict(count=256, resolution=96, tol=1e-3)


def test_equicontinuity_stretch(chart):
    eps = [0.1, 0.01, 0.001]
    mappings = [MappingSpec.radial_stretch(a, chart) for a in [0.3, 0.5, 0.8]]
    report = run_equicontinuity_experiment(mappings, QField.constant(4.0), [0, 0], p=2, ladder=eps, **ESTIMATE)
    assert report.verdict == Verdict.PASS
    assert report.excluded == []
    assert len(report.table) == 9
    assert report.sup_table['eps'].tolist() == eps
    np.testing.assert_allclose(report.sup_table['sup_omega'], np.power(eps, 0.3), rtol=0.02)
    # the estimated minimal Q sits next to the closed form α^(-1)
    per_mapping = report.table.groupby('mapping', sort=False)[['minimal_q', 'closed_form_q']].first()
    np.testing.assert_allclose(per_mapping['closed_form_q'], [1 / 0.3, 1 / 0.5, 1 / 0.8])
    np.testing.assert_allclose(per_mapping['minimal_q'], per_mapping['closed_form_q'], rtol=0.1)
    # the gehring ratio of the square root grows tenfold
    half = report.table[report.table['mapping'] == mappings[1].name].set_index('eps')
    assert half.loc[0.001, 'gehring_ratio'] / half.loc[0.1, 'gehring_ratio'] >= 10 - 1e-9


def test_equicontinuity_budget(chart):
    eps = [0.1, 0.01, 0.001]
    mappings = [MappingSpec.radial_stretch(a, chart) for a in [0.3, 0.5, 0.8]]
    report = run_equicontinuity_experiment(mappings, QField.constant(2.5), [0, 0], p=2, ladder=eps, **ESTIMATE)
    assert report.excluded == [mappings[0].name]
    np.testing.assert_allclose(report.sup_table['sup_omega'], np.power(eps, 0.5), rtol=0.02)
    # nothing fits under a budget below 1.25
    report = run_equicontinuity_experiment(mappings, QField.constant(1.0), [0, 0], p=2, ladder=eps, **ESTIMATE)
    assert report.verdict == Verdict.INCONCLUSIVE
    assert len(report.excluded) == 3
    assert len(report.table) == 0


def test_equicontinuity_delta_sigma(chart):
    eps = [0.1, 0.01, 0.001]
    mappings = [
        MappingSpec.radial_stretch(0.5, chart, omitted_diameter=1.0),
        MappingSpec.radial_stretch(0.8, chart, omitted_diameter=0.1),
    ]
    report = run_equicontinuity_experiment(mappings, QField.constant(4.0), [0, 0], p=2, ladder=eps, delta=0.5, **ESTIMATE)
    assert report.excluded == [mappings[1].name]
    assert report.verdict == Verdict.PASS
    report = run_equicontinuity_experiment(mappings, QField.constant(4.0), [0, 0], p=2, ladder=eps, sigma=0.01, **ESTIMATE)
    assert report.verdict == Verdict.FAIL


def test_equicontinuity_single_rung(chart):
    # no ring fits a single rung, so the closed form is used as is
    report = run_equicontinuity_experiment([MappingSpec.radial_stretch(0.5, chart)], QField.constant(4.0), [0, 0], p=2, ladder=[0.1])
    assert report.table['minimal_q'].tolist() == [2.0]
    assert report.table['closed_form_q'].tolist() == [2.0]


def test_equicontinuity_errors(chart):
    with pytest.raises(PreconditionError, match='at least one mapping'):
        run_equicontinuity_experiment([], QField.constant(1.0), [0, 0], p=2, ladder=[0.1])
    user = MappingSpec.user_analytic(['x1', 'x2'], chart)
    with pytest.raises(PreconditionError, match='radii for a numerical estimate are required'):
        run_equicontinuity_experiment([user], QField.constant(1.0), [0, 0], p=2, ladder=[0.1])


# ========================================================================= #
# TEST LOEWNER                                                              #
# ========================================================================= #


def test_loewner_bound():
    E = [[-0.5, -0.3], [-0.5, 0.3]]
    F = [[0.5, -0.3], [0.5, 0.3]]
    G = [[0.2, 0.0], [0.6, 0.0]]
    report = check_loewner_bound([(E, F), (E, G)], p=2, R=1.0, count=16, resolution=32, tol=1e-2)
    assert report.verdict == Verdict.PASS
    assert report.inv_c > 0
    assert report.stable
    df = report.table
    assert df['scale'].tolist() == [1.0, 1.0, 0.5]
    assert report.inv_c == pytest.approx(df['ratio'].iloc[:2].min())
    np.testing.assert_allclose(df['min_diameter'], [0.6, 0.4, 0.3])


def test_loewner_bound_errors():
    E = [[-0.5, 0.0], [0.5, 0.0]]
    F = [[0.0, -0.5], [0.0, 0.5]]
    with pytest.raises(IntersectingContinuaError, match='meet'):
        check_loewner_bound([(E, F)], p=2, R=1.0, count=4, resolution=16)
    with pytest.raises(PreconditionError, match='must lie in the ball'):
        check_loewner_bound([([[0.9, 0.9], [0.9, 0.0]], [[-0.5, 0], [-0.5, 0.5]])], p=2, R=1.0, count=4, resolution=16)
    with pytest.raises(PreconditionError, match='at least one pair'):
        check_loewner_bound([], p=2, R=1.0)
    # a single point has no diameter to divide by
    point = [[-0.5, 0.0], [-0.5, 0.0]]
    with pytest.raises(PreconditionError, match='must be nondegenerate, got a minimum diameter of 0.0'):
        check_loewner_bound([(point, [[0.5, -0.3], [0.5, 0.3]])], p=2, R=1.0, count=4, resolution=16)
