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

import itertools

import pytest

from ringmod._utils import VarHandlerBool
from ringmod._utils import VarHandlerFloat
from ringmod._utils import VarHandlerInt
from ringmod._utils import VarHandlerStr
from ringmod._utils import iter_progress


# ========================================================================= #
# TEST UTILS                                                                #
# ========================================================================= #


INVALID = 'INVL'


def _make_str_handler(fallback: str = 'lbfgs') -> VarHandlerStr:
    return VarHandlerStr(
        identifier='solver_method',
        environ_key='RINGMOD_TEST_SOLVER_METHOD',
        fallback_value=fallback,
        allowed_values=('lbfgs', 'pgd'),
    )


def _get_params():
    params = itertools.product(
        ['lbfgs', 'pgd', INVALID, None],
        ['lbfgs', 'pgd', INVALID, None],
        ['lbfgs', 'pgd', INVALID, None],
    )
    for manual, default, environ in params:
        row = [manual, default, environ, 'lbfgs']
        target, source = next((t, s) for t, s in zip(row, ['manual', 'default', 'environment', 'fallback']) if t)
        yield environ, default, manual, target, source


# ========================================================================= #
# TEST VAR HANDLERS                                                         #
# ========================================================================= #


@pytest.mark.parametrize(('environ', 'default', 'manual', 'target', 'source'), _get_params())
def test_str_handler_priority(monkeypatch, environ, default, manual, target, source):
    handler = _make_str_handler()
    if environ is not None:
        monkeypatch.setenv('RINGMOD_TEST_SOLVER_METHOD', environ)
    else:
        monkeypatch.delenv('RINGMOD_TEST_SOLVER_METHOD', raising=False)
    # defaults are validated when set
    if default == INVALID:
        with pytest.raises(KeyError, match=f"invalid solver_method: '{INVALID}', obtained from source: set_default_value"):
            handler.set_default_value(default)
        handler._value_default = default
    else:
        handler.set_default_value(default)
    # resolve
    if target != INVALID:
        assert handler.get_value(manual) == target
    else:
        with pytest.raises(KeyError, match=f"invalid solver_method: '{INVALID}', obtained from source: {source}, must be one of the allowed_values: \\['lbfgs', 'pgd'\\]"):
            handler.get_value(manual)


def test_str_handler_reset(monkeypatch):
    handler = _make_str_handler()
    monkeypatch.setenv('RINGMOD_TEST_SOLVER_METHOD', 'pgd')
    handler.set_default_value('lbfgs')
    assert handler.get_value() == 'lbfgs'
    handler.set_default_value(None)
    assert handler.get_value() == 'pgd'
    monkeypatch.delenv('RINGMOD_TEST_SOLVER_METHOD')
    assert handler.get_value() == 'lbfgs'


def test_str_handler_invalid_construction():
    with pytest.raises(ValueError, match='allowed_values must not be an empty sequence'):
        VarHandlerStr('solver_method', 'RINGMOD_X', 'lbfgs', allowed_values=())
    with pytest.raises(ValueError, match="the fallback_value: 'newton' is not one of the allowed_values"):
        VarHandlerStr('solver_method', 'RINGMOD_X', 'newton', allowed_values=('lbfgs',))
    with pytest.raises(ValueError, match='identifier must be a valid python identifier'):
        VarHandlerStr('solver-method', 'RINGMOD_X', 'lbfgs', allowed_values=('lbfgs',))
    with pytest.raises(TypeError, match="invalid solver_method: 1, obtained from source: manual, must be of type <class 'str'>"):
        _make_str_handler().get_value(1)


def test_handler_del_default(monkeypatch):
    handler = _make_str_handler()
    monkeypatch.setenv('RINGMOD_TEST_SOLVER_METHOD', 'pgd')
    handler.set_default_value('lbfgs')
    assert handler.resolve() == ('default', 'lbfgs')
    handler.del_default_value()
    assert handler.resolve() == ('environment', 'pgd')
    # deleting twice is a no-op
    handler.del_default_value()
    assert handler.get_value() == 'pgd'


def test_handler_resolve_source(monkeypatch):
    handler = _make_str_handler()
    monkeypatch.delenv('RINGMOD_TEST_SOLVER_METHOD', raising=False)
    assert handler.resolve() == ('fallback', 'lbfgs')
    monkeypatch.setenv('RINGMOD_TEST_SOLVER_METHOD', ' newton ')
    # resolving does not validate
    assert handler.resolve() == ('environment', 'newton')
    assert handler.resolve('pgd') == ('manual', 'pgd')
    with pytest.raises(KeyError, match="invalid solver_method: 'newton', obtained from source: environment"):
        handler.get_value()


@pytest.mark.parametrize(('environ', 'expected'), [
    ('yes', True), ('1', True), (' TRUE ', True), ('on', True),
    ('no', False), ('0', False), ('f', False), ('off', False),
])
def test_bool_handler_environ(monkeypatch, environ, expected):
    handler = VarHandlerBool('colors', 'RINGMOD_TEST_COLORS', fallback_value=(not expected))
    monkeypatch.setenv('RINGMOD_TEST_COLORS', environ)
    assert handler.get_value() is expected


def test_bool_handler_invalid(monkeypatch):
    handler = VarHandlerBool('colors', 'RINGMOD_TEST_COLORS', fallback_value=True)
    monkeypatch.setenv('RINGMOD_TEST_COLORS', 'maybe')
    with pytest.raises(TypeError, match="cannot normalize environment variable `RINGMOD_TEST_COLORS='maybe'` into colors"):
        handler.get_value()
    with pytest.raises(TypeError, match='invalid colors: 1, obtained from source: manual'):
        handler.get_value(1)


def test_int_handler(monkeypatch):
    handler = VarHandlerInt('curve_count', 'RINGMOD_TEST_COUNT', fallback_value=4096, min_value=1)
    assert handler.get_value() == 4096
    monkeypatch.setenv('RINGMOD_TEST_COUNT', '128')
    assert handler.get_value() == 128
    assert handler.get_value(7) == 7
    with pytest.raises(ValueError, match=r'invalid curve_count: 0, obtained from source: manual, must lie in the range \[1, inf\]'):
        handler.get_value(0)
    with pytest.raises(TypeError, match='invalid curve_count: True, obtained from source: manual'):
        handler.get_value(True)
    with pytest.raises(TypeError, match='invalid curve_count: 2.5, obtained from source: manual'):
        handler.get_value(2.5)
    monkeypatch.setenv('RINGMOD_TEST_COUNT', 'many')
    with pytest.raises(TypeError, match='must be a valid int'):
        handler.get_value()


def test_float_handler(monkeypatch):
    handler = VarHandlerFloat('solver_tol', 'RINGMOD_TEST_TOL', fallback_value=1e-4, min_value=0.0, max_value=1.0, min_inclusive=False)
    assert handler.get_value() == 1e-4
    assert handler.get_value(1) == 1
    monkeypatch.setenv('RINGMOD_TEST_TOL', '1e-6')
    assert handler.get_value() == 1e-6
    with pytest.raises(ValueError, match=r'invalid solver_tol: 0.0, obtained from source: manual, must lie in the range \(0.0, 1.0\]'):
        handler.get_value(0.0)
    with pytest.raises(ValueError, match='must not exceed: 1.0'):
        handler.get_value(2.0)
    with pytest.raises(ValueError, match='must be finite'):
        handler.get_value(float('nan'))


# ========================================================================= #
# TEST PROGRESS                                                             #
# ========================================================================= #


def test_iter_progress_disabled():
    items = [1, 2, 3]
    assert iter_progress(items, desc='items') is items


def test_iter_progress_enabled():
    tqdm = pytest.importorskip('tqdm')
    assert list(iter_progress(range(3), desc='items', enabled=True)) == [0, 1, 2]
