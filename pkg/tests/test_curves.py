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

import numpy as np
import pytest

from ringmod._curves import CurveFamily
from ringmod._curves import CurveProvenance
from ringmod._curves import DiscreteCurve
from ringmod._curves import connecting_family
from ringmod._curves import family_from_csv
from ringmod._curves import family_to_csv
from ringmod._curves import family_to_frame
from ringmod._curves import generate_annulus_family
from ringmod._curves import line_integral
from ringmod._curves import line_integral_matrix
from ringmod._curves import pushforward
from ringmod._curves import radial_family
from ringmod._curves import refine_curve
from ringmod._curves import truncate_family
from ringmod._errors import DomainError
from ringmod._errors import MinorizationError
from ringmod._errors import PreconditionError
from ringmod._geometry import GeodesicAnnulus
from ringmod._geometry import GridDomain
from ringmod._geometry import MetricChart
from ringmod._hash import HashError
from ringmod._modulus import DensityField


@pytest.fixture()
def annulus():
    chart = MetricChart.euclidean(dim=2, half_width=4.0)
    return GeodesicAnnulus(center=np.zeros(2), r1=1.0, r2=3.0, chart=chart)


# ========================================================================= #
# TEST CURVES                                                               #
# ========================================================================= #


def test_discrete_curve():
    c = DiscreteCurve([[0, 0], [3, 0], [3, 4]])
    assert len(c) == 3
    assert c.dim == 2
    np.testing.assert_array_equal(c.start, [0, 0])
    np.testing.assert_array_equal(c.end, [3, 4])
    np.testing.assert_array_equal(c.steps, [3, 4])
    np.testing.assert_array_equal(c.midpoints, [[1.5, 0], [3, 2]])
    assert c.length(MetricChart.euclidean(dim=2, half_width=5.0)) == pytest.approx(7.0)
    np.testing.assert_array_equal(c.reversed().vertices, [[3, 4], [3, 0], [0, 0]])
    # read only
    with pytest.raises(ValueError):
        c.vertices[0, 0] = 1.0


def test_discrete_curve_errors():
    with pytest.raises(PreconditionError, match='a curve needs at least 2 vertices'):
        DiscreteCurve([[0, 0]])
    with pytest.raises(PreconditionError, match='a curve needs at least 2 vertices'):
        DiscreteCurve([0, 1, 2])
    with pytest.raises(DomainError, match='must be finite'):
        DiscreteCurve([[0, 0], [np.nan, 1]])
    with pytest.raises(PreconditionError, match='cannot concatenate curves'):
        DiscreteCurve([[0, 0], [1, 0]]).concatenate(DiscreteCurve([[2, 0], [3, 0]]))
    # outside of the chart
    with pytest.raises(DomainError):
        DiscreteCurve([[0, 0], [9, 0]]).length(MetricChart.euclidean(dim=2, half_width=1.0))


def test_refine_curve():
    c = DiscreteCurve([[0, 0], [1, 0], [1, 0.05]])
    r = refine_curve(c, 0.1)
    assert np.all(r.steps <= 0.1 + 1e-12)
    assert len(r) == 12
    np.testing.assert_array_equal(r.start, c.start)
    np.testing.assert_array_equal(r.end, c.end)
    assert np.sum(r.steps) == pytest.approx(np.sum(c.steps))
    # already fine enough
    assert refine_curve(c, 2.0) is c
    with pytest.raises(ValueError, match='max_step must be positive'):
        refine_curve(c, 0.0)


def test_concatenate_additive():
    chart = MetricChart.euclidean(dim=2, half_width=5.0)
    a = DiscreteCurve([[0, 0], [1, 1]])
    b = DiscreteCurve([[1, 1], [2, 0], [2, 3]])
    ab = a.concatenate(b)
    assert len(ab) == 4
    rho = lambda x: 1 + x[:, 0] ** 2
    assert line_integral(rho, ab, chart) == pytest.approx(line_integral(rho, a, chart) + line_integral(rho, b, chart))


# ========================================================================= #
# TEST LINE INTEGRALS                                                       #
# ========================================================================= #


def test_line_integral_function():
    chart = MetricChart.euclidean(dim=2, half_width=5.0)
    assert line_integral(lambda x: np.ones(len(x)), [[0, 0], [3, 4]], chart) == pytest.approx(5.0)
    # ρ(x) = x1 along x1 in [0, 2] is exact with midpoints
    assert line_integral(lambda x: x[:, 0], [[0, 0], [1, 0], [2, 0]], chart) == pytest.approx(2.0)
    with pytest.raises(ValueError, match='a chart is required'):
        line_integral(lambda x: x[:, 0], [[0, 0], [1, 0]])


def test_line_integral_density():
    chart = MetricChart.euclidean(dim=2, half_width=1.0)
    grid = GridDomain(chart, resolution=16)
    rho = DensityField(grid, np.ones(grid.size))
    curve = refine_curve(DiscreteCurve([[-0.5, 0.1], [0.5, 0.1]]), 0.01)
    assert line_integral(rho, curve) == pytest.approx(1.0)
    assert line_integral(rho * 3, curve) == pytest.approx(3.0)
    with pytest.raises(ValueError, match='not on the'):
        line_integral(rho, curve, MetricChart.euclidean(dim=2, half_width=1.0))


def test_line_integral_matrix(annulus):
    grid = GridDomain(annulus.chart, resolution=32)
    family = generate_annulus_family(annulus, count=8, seed=0, grid=grid)
    A = line_integral_matrix(family, grid)
    assert A.shape == (8, grid.size)
    lengths = np.array([c.length(annulus.chart) for c in family])
    np.testing.assert_allclose(A @ np.ones(grid.size), lengths)
    # empty
    assert line_integral_matrix(CurveFamily.empty(), grid).shape == (0, grid.size)


# ========================================================================= #
# TEST FAMILIES                                                             #
# ========================================================================= #


def test_curve_family_errors():
    c = DiscreteCurve([[0, 0], [1, 0]])
    with pytest.raises(ValueError, match='every curve needs a provenance'):
        CurveFamily(curves=[c], kinds=[])
    with pytest.raises(ValueError, match='same dimension'):
        CurveFamily(curves=[c, DiscreteCurve([[0, 0, 0], [1, 0, 0]])], kinds=['imported', 'imported'])
    with pytest.raises(PreconditionError, match='not tied to an annulus'):
        CurveFamily(curves=[c], kinds=['imported']).check_endpoints(1e-6)
    empty = CurveFamily.empty()
    assert len(empty) == 0
    assert empty.dim is None


def test_generate_annulus_family(annulus):
    family = generate_annulus_family(annulus, count=8, seed=0)
    assert len(family) == 8
    assert family.kinds.count(CurveProvenance.RADIAL_BUNDLE) == 4
    assert family.kinds.count(CurveProvenance.PERTURBED_RADIAL) == 2
    assert family.kinds.count(CurveProvenance.RANDOM_CONNECTING) == 2
    assert family.provenance == (CurveProvenance.RADIAL_BUNDLE, CurveProvenance.PERTURBED_RADIAL, CurveProvenance.RANDOM_CONNECTING)
    assert family.annulus is annulus
    family.check_endpoints(1e-6)
    # every radial curve has length r2 - r1
    for c, kind in zip(family, family.kinds):
        if kind == CurveProvenance.RADIAL_BUNDLE:
            assert c.length(annulus.chart) == pytest.approx(2.0)
        else:
            assert c.length(annulus.chart) >= 2.0 - 1e-9
    with pytest.raises(PreconditionError, match='count must be >= 1'):
        generate_annulus_family(annulus, count=0)


def test_generate_annulus_family_seeded(annulus):
    a = generate_annulus_family(annulus, count=8, seed=1)
    b = generate_annulus_family(annulus, count=8, seed=1)
    c = generate_annulus_family(annulus, count=8, seed=2)
    assert a.fingerprint == b.fingerprint
    assert a.fingerprint != c.fingerprint
    # the radial bundle does not depend on the seed
    assert [x.fingerprint() for x in a[:4]] == [x.fingerprint() for x in c[:4]]


def test_generate_annulus_family_nested(annulus):
    small = generate_annulus_family(annulus, count=16, seed=3)
    large = generate_annulus_family(annulus, count=32, seed=3)
    large_prints = {c.fingerprint() for c in large}
    assert {c.fingerprint() for c in small} <= large_prints


def test_generate_annulus_family_default_count(annulus, monkeypatch):
    monkeypatch.setenv('RINGMOD_CURVE_COUNT', '6')
    family = generate_annulus_family(annulus, seed=0)
    assert len(family) == 6
    assert family.kinds.count(CurveProvenance.RADIAL_BUNDLE) == 3


def test_generate_annulus_family_3d():
    chart = MetricChart.euclidean(dim=3, half_width=2.0)
    annulus = GeodesicAnnulus(center=np.zeros(3), r1=0.5, r2=1.5, chart=chart)
    family = generate_annulus_family(annulus, count=10, seed=0)
    assert family.dim == 3
    family.check_endpoints(1e-6)


def test_radial_family(annulus):
    family = radial_family(annulus, count=4, max_step=0.1)
    assert len(family) == 4
    family.check_endpoints(1e-9)
    np.testing.assert_allclose(family[1].start, [0, 1], atol=1e-12)
    np.testing.assert_allclose(family[1].end, [0, 3], atol=1e-12)
    assert np.all(family[0].steps <= 0.1 + 1e-12)


def test_family_subset_union(annulus):
    family = generate_annulus_family(annulus, count=8, seed=0)
    sub = family.subset([0, 5])
    assert len(sub) == 2
    assert sub.kinds == (family.kinds[0], family.kinds[5])
    both = sub.union(family.subset([7]))
    assert len(both) == 3
    assert both[2] is family[7]


# ========================================================================= #
# TEST TRUNCATION                                                           #
# ========================================================================= #


def test_truncate_family(annulus):
    family = generate_annulus_family(annulus, count=8, seed=0)
    truncated = truncate_family(family, 1.5, 2.5)
    assert len(truncated) == 8
    assert set(truncated.kinds) == {CurveProvenance.TRUNCATED}
    assert truncated.annulus.r1 == 1.5
    assert truncated.annulus.r2 == 2.5
    truncated.check_endpoints(1e-6)
    truncated.certificate.verify(truncated)
    # subcurves are never longer
    for big, small in zip(family, truncated):
        assert small.length(annulus.chart) <= big.length(annulus.chart) + 1e-9


def test_truncate_family_errors(annulus):
    family = generate_annulus_family(annulus, count=4, seed=0)
    with pytest.raises(PreconditionError, match='must lie inside'):
        truncate_family(family, 0.5, 2.0)
    with pytest.raises(PreconditionError, match='must lie inside'):
        truncate_family(family, 2.0, 2.0)
    with pytest.raises(PreconditionError, match='only families tied to an annulus'):
        truncate_family(CurveFamily(curves=family.curves, kinds=family.kinds), 1.5, 2.5)


def test_minorization_certificate_rejects(annulus):
    family = generate_annulus_family(annulus, count=4, seed=0)
    truncated = truncate_family(family, 1.5, 2.5)
    with pytest.raises(MinorizationError, match='certificate covers 4 curves'):
        truncated.certificate.verify(truncated.subset([0, 1]))
    other = truncate_family(family, 1.2, 2.5)
    with pytest.raises(MinorizationError, match='is not a subcurve'):
        truncated.certificate.verify(other)


# ========================================================================= #
# TEST CONTINUA & PUSHFORWARD                                               #
# ========================================================================= #


def test_connecting_family():
    E = [[0, 0], [0, 1]]
    F = [[1, 0], [1, 1]]
    family = connecting_family(E, F, count=6, seed=0, max_step=0.05)
    assert len(family) == 6
    assert set(family.kinds) == {CurveProvenance.CONTINUA_CONNECTING}
    for c in family:
        assert c.start[0] == pytest.approx(0.0)
        assert 0 <= c.start[1] <= 1
        assert c.end[0] == pytest.approx(1.0)
        assert 0 <= c.end[1] <= 1
        assert np.all(c.steps <= 0.05 + 1e-12)
    # the direct segments are horizontal
    np.testing.assert_allclose(family[0].start, [0, 1 / 6])
    np.testing.assert_allclose(family[0].end, [1, 1 / 6])
    with pytest.raises(PreconditionError, match='at least 2 vertices'):
        connecting_family([[0, 0]], F, count=2)


def test_pushforward_scaling():
    family = CurveFamily(curves=[refine_curve(DiscreteCurve([[0, 0], [1, 0]]), 0.1)], kinds=['imported'], seed=7)
    image = pushforward(family, lambda v: 2 * v)
    assert len(image) == 1
    assert image.kinds == (CurveProvenance.PUSHFORWARD,)
    assert image.seed == 7
    np.testing.assert_allclose(image[0].start, [0, 0])
    np.testing.assert_allclose(image[0].end, [2, 0])
    assert np.all(image[0].steps <= 0.1 + 1e-12)
    assert np.sum(image[0].steps) == pytest.approx(2.0)


def test_pushforward_checks_target():
    chart = MetricChart.euclidean(dim=2, half_width=1.0)

    class Shift(object):
        target = chart

        def __call__(self, v):
            return v + 0.75

    family = CurveFamily(curves=[DiscreteCurve([[0, 0], [0.5, 0]])], kinds=['imported'])
    with pytest.raises(DomainError, match='image vertex'):
        pushforward(family, Shift(), max_step=0.1)


# ========================================================================= #
# TEST CSV                                                                  #
# ========================================================================= #


def test_family_to_frame(annulus):
    family = radial_family(annulus, count=2, max_step=1.0)
    df = family_to_frame(family)
    assert list(df.columns) == ['curve_id', 'vertex_index', 'x1', 'x2']
    assert len(df) == sum(len(c) for c in family)
    assert list(family_to_frame(CurveFamily.empty()).columns) == ['curve_id', 'vertex_index']


def test_family_csv(annulus, tmp_path):
    family = generate_annulus_family(annulus, count=8, seed=5)
    path = tmp_path / 'family.csv'
    family_to_csv(family, path)
    assert (tmp_path / 'family.csv.yaml').exists()
    loaded = family_from_csv(path, expected_fingerprint=family.fingerprint)
    assert len(loaded) == 8
    assert loaded.kinds == family.kinds
    assert loaded.seed == 5
    with pytest.raises(HashError):
        family_from_csv(path, expected_fingerprint='0' * 32)
    # no overwrite
    with pytest.raises(FileExistsError):
        family_to_csv(family, path)


def test_family_csv_without_metadata(annulus, tmp_path):
    family = radial_family(annulus, count=3, max_step=0.5)
    path = tmp_path / 'radial.csv'
    family_to_csv(family, path, metadata=False)
    loaded = family_from_csv(path)
    assert loaded.kinds == (CurveProvenance.IMPORTED,) * 3
    assert loaded.fingerprint == family.fingerprint
