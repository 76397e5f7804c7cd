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
import os
import struct
from pathlib import Path
from typing import Any
from typing import BinaryIO
from typing import Dict
from typing import Optional
from typing import TextIO
from typing import Tuple
from typing import Union
from uuid import uuid4

import numpy as np


LOG = logging.getLogger(__name__)


# ========================================================================= #
# Atomic file saving                                                        #
# ========================================================================= #


_MODE_REPLACE = 'w'
_MODE_MISSING = 'x'


class AtomicPath(object):
    """
    Within the context, data must be written to a temporary file
    next to the destination. Once the context exits without error
    the temporary file is renamed over the destination.

    ```
    with AtomicPath('report.csv', mode='w') as tmp_path:
        df.to_csv(tmp_path, index=False)
    ```

    SUPPORTED MODES:
    'w' : replace the destination if it exists
    'x' : fail if the destination exists
    """

    def __init__(
        self,
        file: Union[str, Path],
        mode: str = _MODE_MISSING,
        makedirs: bool = False,
    ):
        if (not file) or Path(file).name in ('', '.', '..'):
            raise ValueError(f'file must not be empty: {repr(file)}')
        if mode not in (_MODE_REPLACE, _MODE_MISSING):
            raise ValueError(f'invalid mode: {repr(mode)}, must be one of: {_MODE_REPLACE}/{_MODE_MISSING} (replace/missing)')
        self._dst_path = Path(file).absolute()
        self._tmp_path = self._dst_path.parent / f'.temp.{uuid4()}.{self._dst_path.name}'
        self._makedirs = makedirs
        self._mode = mode

    @property
    def destination(self) -> Path:
        return self._dst_path

    def _check_destination(self):
        if self._dst_path.exists():
            if self._mode == _MODE_MISSING:
                raise FileExistsError(f'the destination file should not exist: {self._dst_path}')
            if not self._dst_path.is_file():
                raise IsADirectoryError(f'the destination file exists but is not a file: {self._dst_path}')

    def __enter__(self) -> Path:
        if self._tmp_path.exists():
            raise RuntimeError(f'the temporary file already exists: {self._tmp_path}, this is a bug!')
        self._check_destination()
        if self._makedirs:
            self._tmp_path.parent.mkdir(parents=True, exist_ok=True)
        return self._tmp_path

    def __exit__(self, error_type, error, traceback):
        if error_type is not None:
            if self._tmp_path.is_file():
                self._tmp_path.unlink()
                LOG.error(f'An error occurred in {self.__class__.__name__}, deleted temporary file: {self._tmp_path}')
            else:
                LOG.error(f'An error occurred in {self.__class__.__name__}')
            return
        if not self._tmp_path.is_file():
            raise FileNotFoundError(f'the temporary file was not created: {self._tmp_path}')
        # the destination may have appeared while we were writing
        self._check_destination()
        LOG.info(f'moving temporary file to final location: {self._tmp_path} -> {self._dst_path}')
        os.replace(self._tmp_path, self._dst_path)


class AtomicOpen(object):
    """
    Like `open(...)` for writing, but through an `AtomicPath`.
    Supports the modes 'w', 'x', 'wb' and 'xb'.
    """

    def __init__(
        self,
        file: Union[str, Path],
        mode: str = 'x',
        makedirs: bool = False,
    ):
        if mode.replace('b', '').replace('t', '') not in (_MODE_REPLACE, _MODE_MISSING):
            raise ValueError(f'invalid mode: {repr(mode)}, must be one of: w/x with optional b/t')
        self._open_mode = mode
        self._file_io = None
        self._atomic_path = AtomicPath(file=file, mode=mode[0], makedirs=makedirs)

    def __enter__(self) -> Union[TextIO, BinaryIO]:
        tmp_path = self._atomic_path.__enter__()
        LOG.debug(f'opening temporary file: {tmp_path} with mode: {self._open_mode}')
        self._file_io = open(tmp_path, self._open_mode.replace('x', 'w'))
        return self._file_io

    def __exit__(self, error_type, error, traceback):
        try:
            self._file_io.close()
        finally:
            self._file_io = None
        self._atomic_path.__exit__(error_type, error, traceback)


def _atomic_mode(overwrite: bool) -> str:
    return _MODE_REPLACE if overwrite else _MODE_MISSING


# ========================================================================= #
# Tables                                                                    #
# ========================================================================= #


def write_table(df, path: Optional[Union[str, Path]] = None, overwrite: bool = True, file: Optional[TextIO] = None):
    """
    Write a `pandas.DataFrame` as CSV, atomically when a path is given,
    otherwise to the given text stream.
    """
    if path is None:
        if file is None:
            raise ValueError('either a path or a file must be given')
        df.to_csv(file, index=False)
        return
    with AtomicOpen(path, _atomic_mode(overwrite)) as fp:
        df.to_csv(fp, index=False)


def read_table(path: Union[str, Path]):
    import pandas as pd
    return pd.read_csv(path, float_precision='round_trip')


# ========================================================================= #
# Config Files                                                              #
# ========================================================================= #


def load_yaml(path: Union[str, Path]) -> Dict[str, Any]:
    import yaml
    with open(path, 'r', encoding='utf-8') as fp:
        data = yaml.safe_load(fp)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError(f'config file must contain a mapping at the top level, got: {type(data).__name__} from: {repr(str(path))}')
    return data


def write_yaml(data: Dict[str, Any], path: Union[str, Path], overwrite: bool = True):
    import yaml
    with AtomicOpen(path, _atomic_mode(overwrite)) as fp:
        fp.write(yaml.safe_dump(data, sort_keys=False))


# ========================================================================= #
# Metric Grid Files                                                         #
# ========================================================================= #


# 8 byte magic + uint32 dim + uint32 resolution
METRIC_GRID_MAGIC = b'RINGMODG'
_METRIC_GRID_HEADER = struct.Struct('<8sII')


def write_metric_grid(path: Union[str, Path], metric: np.ndarray, overwrite: bool = False):
    """
    Write samples of a metric tensor field of shape (res, ..., res, n, n)
    as a 16 byte header followed by row-major little-endian doubles.
    """
    metric = np.asarray(metric, dtype='<f8')
    n = metric.shape[-1]
    res = metric.shape[0]
    if metric.ndim != n + 2 or metric.shape != (res,) * n + (n, n):
        raise ValueError(f'metric grid must have shape (res,)*n + (n, n), got: {metric.shape}')
    with AtomicOpen(path, 'wb' if overwrite else 'xb') as fp:
        fp.write(_METRIC_GRID_HEADER.pack(METRIC_GRID_MAGIC, n, res))
        fp.write(np.ascontiguousarray(metric).tobytes())


def read_metric_grid(path: Union[str, Path]) -> Tuple[int, int, np.ndarray]:
    """
    :return: (dim, resolution, metric) where metric has shape (res,)*dim + (dim, dim)
    """
    with open(path, 'rb') as fp:
        header = fp.read(_METRIC_GRID_HEADER.size)
        if len(header) != _METRIC_GRID_HEADER.size:
            raise ValueError(f'metric grid file is too short to contain a header: {repr(str(path))}')
        magic, dim, res = _METRIC_GRID_HEADER.unpack(header)
        if magic != METRIC_GRID_MAGIC:
            raise ValueError(f'invalid metric grid magic: {repr(magic)}, expected: {repr(METRIC_GRID_MAGIC)}')
        data = np.frombuffer(fp.read(), dtype='<f8')
    expected = res ** dim * dim * dim
    if data.size != expected:
        raise ValueError(f'metric grid has {data.size} values, expected {expected} for dim={dim} and resolution={res}')
    metric = data.reshape((res,) * dim + (dim, dim)).astype(np.float64)
    return dim, res, metric


# ========================================================================= #
# export                                                                    #
# ========================================================================= #


__all__ = (
    'AtomicPath',
    'AtomicOpen',
    'write_table',
    'read_table',
    'load_yaml',
    'write_yaml',
    'METRIC_GRID_MAGIC',
    'write_metric_grid',
    'read_metric_grid',
)


# ========================================================================= #
# END                                                                       #
# ========================================================================= #
