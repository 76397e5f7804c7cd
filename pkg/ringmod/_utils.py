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
import os
from typing import Callable
from typing import Generic
from typing import Iterable
from typing import NoReturn
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import TypeVar


LOG = logging.getLogger(__name__)


# ========================================================================= #
# Variable Manager                                                          #
# ========================================================================= #


T = TypeVar('T')


class VarHandlerBase(Generic[T]):
    """
    A named configuration value that can be resolved from several sources.

    priority:
      1. manual specification (`override`)
      2. process default (`set_default_value`)
      3. environment variable
      4. fallback value
    """

    def __init__(
        self,
        identifier: str,
        environ_key: str,
        fallback_value: T,
    ):
        if not str.isidentifier(identifier):
            raise ValueError(f'identifier must be a valid python identifier, got: {repr(identifier)}')
        if not str.isidentifier(environ_key):
            raise ValueError(f'environ_key must be a valid python identifier, got: {repr(environ_key)}')
        self._identifier = identifier
        self._environ_key = environ_key
        self._value_default: Optional[T] = None
        self._value_fallback = fallback_value
        self._validate_value(self._value_fallback, source='fallback_value')

    # OVERRIDEABLE

    def _validate_value(self, value: T, source: str) -> NoReturn:  # pragma: no cover
        raise NotImplementedError

    def _normalize_environ_value(self, value: str) -> T:  # pragma: no cover
        raise NotImplementedError

    # COMMON - PROPS

    @property
    def identifier(self) -> str:
        return self._identifier

    @property
    def environ_key(self) -> str:
        return self._environ_key

    @property
    def fallback_value(self) -> T:
        return self._value_fallback

    # COMMON - FUNCS

    def set_default_value(self, value: Optional[T] = None) -> NoReturn:
        if value is not None:
            self._validate_value(value, source='set_default_value')
        self._value_default = value

    def del_default_value(self) -> NoReturn:
        self._value_default = None

    def resolve(self, override: Optional[T] = None) -> Tuple[str, T]:
        """
        The unvalidated value and the name of the source it came from.
        The environment is re-read on every call.
        """
        if override is not None:
            return 'manual', override
        if self._value_default is not None:
            return 'default', self._value_default
        raw = os.environ.get(self._environ_key, None)
        if raw is not None:
            return 'environment', self._normalize_environ_value(raw)
        return 'fallback', self._value_fallback

    def get_value(self, override: Optional[T] = None) -> T:
        source, value = self.resolve(override)
        self._validate_value(value, source=source)
        return value

    def _raise_type(self, value, source: str, expected: type) -> NoReturn:
        raise TypeError(f'invalid {self.identifier}: {repr(value)}, obtained from source: {source}, must be of type {expected}, got type: {type(value)}')


# ========================================================================= #
# String Variable Manager                                                   #
# ========================================================================= #


class VarHandlerStr(VarHandlerBase[str]):
    """
    A string value restricted to a set of choices, eg. a solver method or a hash algorithm.
    """

    def __init__(
        self,
        identifier: str,
        environ_key: str,
        fallback_value: str,
        allowed_values: Sequence[str],
    ):
        choices = frozenset(allowed_values)
        if not choices:
            raise ValueError(f'allowed_values must not be an empty sequence, got: {repr(allowed_values)}')
        bad = sorted(repr(v) for v in choices if not isinstance(v, str))
        if bad:
            raise ValueError(f'all entries in the allowed_values must be strings, got: {", ".join(bad)}')
        if fallback_value not in choices:
            raise ValueError(f'the fallback_value: {repr(fallback_value)} is not one of the allowed_values: {sorted(choices)}')
        self._choices = choices
        super().__init__(identifier=identifier, environ_key=environ_key, fallback_value=fallback_value)

    @property
    def allowed_values(self) -> list:
        return sorted(self._choices)

    def _validate_value(self, value: str, source: Optional[str] = None) -> NoReturn:
        if not isinstance(value, str):
            self._raise_type(value, source, str)
        if value not in self._choices:
            raise KeyError(f'invalid {self.identifier}: {repr(value)}, obtained from source: {source}, must be one of the allowed_values: {self.allowed_values}')

    def _normalize_environ_value(self, value: str) -> str:
        return value.strip()


# ========================================================================= #
# Bool Variable Manager                                                     #
# ========================================================================= #


class VarHandlerBool(VarHandlerBase[bool]):

    _ENVIRON_TRUE = ('y', 'yes', 't', 'true', '1', 'on')
    _ENVIRON_FALSE = ('n', 'no', 'f', 'false', '0', 'off')

    def _validate_value(self, value: bool, source: str) -> NoReturn:
        if not isinstance(value, bool):
            self._raise_type(value, source, bool)

    def _normalize_environ_value(self, value: str) -> bool:
        value = value.strip().lower()
        if value in self._ENVIRON_TRUE:
            return True
        elif value in self._ENVIRON_FALSE:
            return False
        raise TypeError(f'cannot normalize environment variable `{self.environ_key}={repr(value)}` into {self.identifier}, must be one of: {sorted(self._ENVIRON_TRUE + self._ENVIRON_FALSE)}')


# ========================================================================= #
# Numeric Variable Managers                                                 #
# ========================================================================= #


N = TypeVar('N', int, float)


class _VarHandlerNumber(VarHandlerBase[N]):

    _TYPE: type = None
    _PARSE: Callable[[str], N] = None

    def __init__(
        self,
        identifier: str,
        environ_key: str,
        fallback_value: N,
        min_value: Optional[N] = None,
        max_value: Optional[N] = None,
        min_inclusive: bool = True,
    ):
        self._min_value = min_value
        self._max_value = max_value
        self._min_inclusive = min_inclusive
        super().__init__(identifier=identifier, environ_key=environ_key, fallback_value=fallback_value)

    def _check_type(self, value, source: str) -> NoReturn:  # pragma: no cover
        raise NotImplementedError

    def _validate_value(self, value: N, source: str) -> NoReturn:
        self._check_type(value, source)
        if self._min_value is not None:
            too_small = (value < self._min_value) if self._min_inclusive else (value <= self._min_value)
            if too_small:
                bracket = '[' if self._min_inclusive else '('
                raise ValueError(f'invalid {self.identifier}: {repr(value)}, obtained from source: {source}, must lie in the range {bracket}{self._min_value}, {self._max_value if self._max_value is not None else "inf"}]')
        if self._max_value is not None and value > self._max_value:
            raise ValueError(f'invalid {self.identifier}: {repr(value)}, obtained from source: {source}, must not exceed: {self._max_value}')

    def _normalize_environ_value(self, value: str) -> N:
        try:
            return type(self)._PARSE(value.strip())
        except ValueError as e:
            raise TypeError(f'cannot normalize environment variable `{self.environ_key}={repr(value)}` into {self.identifier}, must be a valid {self._TYPE.__name__}') from e


class VarHandlerInt(_VarHandlerNumber[int]):

    _TYPE = int
    _PARSE = int

    def _check_type(self, value, source: str) -> NoReturn:
        # bool is a subclass of int, but never a valid count
        if isinstance(value, bool) or not isinstance(value, int):
            self._raise_type(value, source, int)


class VarHandlerFloat(_VarHandlerNumber[float]):

    _TYPE = float
    _PARSE = float

    def _check_type(self, value, source: str) -> NoReturn:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self._raise_type(value, source, float)
        if not math.isfinite(value):
            raise ValueError(f'invalid {self.identifier}: {repr(value)}, obtained from source: {source}, must be finite')


# ========================================================================= #
# Progress                                                                  #
# ========================================================================= #


def iter_progress(items: Iterable[T], desc: str, enabled: bool = False, total: Optional[int] = None) -> Iterable[T]:
    """
    Wrap an iterable in a `tqdm` progress bar when enabled.
    `tqdm` is an optional dependency and is only imported on use.
    """
    if not enabled:
        return items
    try:
        from tqdm import tqdm
    except ImportError as e:
        raise ImportError(f'`tqdm` needs to be installed to show progress for: {repr(desc)}') from e
    return tqdm(items, desc=desc, total=total)


# ========================================================================= #
# export                                                                    #
# ========================================================================= #


__all__ = (
    'VarHandlerBase',
    'VarHandlerStr',
    'VarHandlerBool',
    'VarHandlerInt',
    'VarHandlerFloat',
    'iter_progress',
)


# ========================================================================= #
# END                                                                       #
# ========================================================================= #
