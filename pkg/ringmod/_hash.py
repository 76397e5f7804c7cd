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

import hashlib
from typing import Iterable
from typing import NoReturn
from typing import Optional

import numpy as np

from ringmod._utils import VarHandlerStr


# ========================================================================= #
# hash algos                                                                #
# ========================================================================= #


Hash = str
HashAlgo = str


_VAR_HANDLER_HASH_ALGO = VarHandlerStr(
    identifier='hash_algo',
    environ_key='RINGMOD_HASH_ALGO',
    fallback_value='md5',
    allowed_values=tuple(hashlib.algorithms_guaranteed),
)


def hash_algo_set_default(hash_algo: Optional[HashAlgo]) -> NoReturn:
    return _VAR_HANDLER_HASH_ALGO.set_default_value(value=hash_algo)


def hash_algo_get(hash_algo: Optional[HashAlgo] = None) -> HashAlgo:
    return _VAR_HANDLER_HASH_ALGO.get_value(override=hash_algo)


# ========================================================================= #
# byte hashing                                                              #
# ========================================================================= #


def _hexdigest(hash) -> str:
    # shake algorithms need an explicit digest length
    if hash.name.startswith('shake_'):
        return hash.hexdigest(32)
    return hash.hexdigest()


def hash_bytes_iter(bytes_iter: Iterable[bytes], hash_algo: Optional[HashAlgo] = None) -> Hash:
    hash = hashlib.new(hash_algo_get(hash_algo=hash_algo))
    for chunk in bytes_iter:
        hash.update(chunk)
    return _hexdigest(hash)


# ========================================================================= #
# array hashing                                                             #
# ========================================================================= #


def _yield_array_bytes(array: np.ndarray) -> Iterable[bytes]:
    # shape and dtype are part of the identity of an array,
    # values are hashed in a fixed (little-endian, C) layout
    array = np.asarray(array)
    yield f'{array.dtype.kind}{array.dtype.itemsize}:{array.shape}'.encode('utf-8')
    yield np.ascontiguousarray(array, dtype=array.dtype.newbyteorder('<')).tobytes()


def hash_array(array: np.ndarray, hash_algo: Optional[HashAlgo] = None) -> Hash:
    return hash_bytes_iter(_yield_array_bytes(array), hash_algo=hash_algo)


def hash_arrays(arrays: Iterable[np.ndarray], hash_algo: Optional[HashAlgo] = None) -> Hash:
    """
    Hash a sequence of arrays, eg. the vertices of all curves of a family.
    The boundaries between arrays are part of the hash.
    """
    def _gen():
        for i, array in enumerate(arrays):
            yield f'[{i}]'.encode('utf-8')
            yield from _yield_array_bytes(array)
    return hash_bytes_iter(_gen(), hash_algo=hash_algo)


# ========================================================================= #
# validation                                                                #
# ========================================================================= #


class HashError(Exception):
    """
    Raised if a computed fingerprint does not match the expected one.
    """


def hash_validate(computed: Hash, expected: Hash, what: str, hash_algo: Optional[HashAlgo] = None) -> NoReturn:
    """
    :raises HashError
    """
    if not isinstance(expected, str):
        raise TypeError(f'expected hash should be a str, got type: {type(expected)} for value: {repr(expected)}')
    if computed != expected:
        raise HashError(f'computed {hash_algo_get(hash_algo)} hash: {repr(computed)} does not match expected hash: {repr(expected)} for: {what}')


# ========================================================================= #
# export                                                                    #
# ========================================================================= #


__all__ = (
    'Hash',
    'HashAlgo',
    'HashError',
    'hash_algo_set_default',
    'hash_algo_get',
    'hash_bytes_iter',
    'hash_array',
    'hash_arrays',
    'hash_validate',
)


# ========================================================================= #
# END                                                                       #
# ========================================================================= #
