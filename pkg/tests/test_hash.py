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

import numpy as np
import pytest

from ringmod._hash import HashError
from ringmod._hash import hash_algo_get
from ringmod._hash import hash_algo_set_default
from ringmod._hash import hash_array
from ringmod._hash import hash_arrays
from ringmod._hash import hash_bytes_iter
from ringmod._hash import hash_validate


# ========================================================================= #
# TEST VAR HANDLER                                                          #
# ========================================================================= #


def test_hash_algo_set_default(monkeypatch):
    monkeypatch.delenv('RINGMOD_HASH_ALGO', raising=False)
    assert hash_algo_get() == 'md5'
    hash_algo_set_default('sha1')
    try:
        assert hash_algo_get() == 'sha1'
        # check that environ doesnt overwrite & that setting to null resets
        monkeypatch.setenv('RINGMOD_HASH_ALGO', 'sha256')
        assert hash_algo_get() == 'sha1'
    finally:
        hash_algo_set_default(None)
    assert hash_algo_get() == 'sha256'
    monkeypatch.delenv('RINGMOD_HASH_ALGO')
    assert hash_algo_get() == 'md5'
    # check invalid
    with pytest.raises(KeyError, match="invalid hash_algo: 'INVALID', obtained from source: set_default_value, must be one of the allowed_values:"):
        hash_algo_set_default('INVALID')


# ========================================================================= #
# TEST HASHING                                                              #
# ========================================================================= #


@pytest.mark.parametrize('hash_algo', ['md5', 'sha1', 'sha256'])
def test_hash_bytes_iter(hash_algo):
    # chunks hash like their concatenation
    assert hash_bytes_iter([b'ri', b'ng'], hash_algo=hash_algo) == hashlib.new(hash_algo, b'ring').hexdigest()


def test_hash_bytes_shake():
    assert len(hash_bytes_iter([b'ring'], hash_algo='shake_128')) == 64


def test_hash_array():
    a = np.arange(6, dtype=np.float64).reshape(2, 3)
    assert hash_array(a) == hash_array(a.copy())
    # layout does not matter
    assert hash_array(a) == hash_array(np.asfortranarray(a))
    assert hash_array(a) == hash_array(a.astype('>f8'))
    # shape & dtype do
    assert hash_array(a) != hash_array(a.reshape(3, 2))
    assert hash_array(a) != hash_array(a.astype(np.float32))
    # values do
    b = a.copy()
    b[1, 2] += 1e-12
    assert hash_array(a) != hash_array(b)


def test_hash_arrays():
    a, b = np.zeros((2, 2)), np.ones((3, 2))
    assert hash_arrays([a, b]) == hash_arrays([a.copy(), b.copy()])
    assert hash_arrays([a, b]) != hash_arrays([b, a])
    # boundaries between arrays are part of the hash
    assert hash_arrays([np.zeros(4)]) != hash_arrays([np.zeros(2), np.zeros(2)])
    assert hash_arrays([]) == hash_arrays(iter([]))


def test_hash_validate():
    h = hash_array(np.zeros(3))
    hash_validate(h, h, what='zeros')
    with pytest.raises(HashError, match="computed md5 hash: '.*' does not match expected hash: 'abc' for: zeros"):
        hash_validate(h, 'abc', what='zeros', hash_algo='md5')
    with pytest.raises(TypeError, match="expected hash should be a str, got type: <class 'NoneType'> for value: None"):
        hash_validate(h, None, what='zeros')
