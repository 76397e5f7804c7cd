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
from enum import Enum
from typing import NoReturn
from typing import Optional

from ringmod._utils import VarHandlerBool


# ========================================================================= #
# Ansi Colors                                                               #
# ========================================================================= #


RST = '\033[0m'
GRY = '\033[90m'
lRED = '\033[91m'
lGRN = '\033[92m'
lYLW = '\033[93m'
lCYN = '\033[96m'


# ========================================================================= #
# Variable Handlers                                                         #
# ========================================================================= #


_VAR_HANDLER_USE_COLORS = VarHandlerBool(
    identifier='colors',
    environ_key='RINGMOD_ENABLE_COLORS',
    fallback_value=True,
)


def fmt_use_colors_set_default(use_colors: Optional[bool]) -> NoReturn:
    return _VAR_HANDLER_USE_COLORS.set_default_value(value=use_colors)


def fmt_use_colors_get(use_colors: Optional[bool] = None) -> bool:
    return _VAR_HANDLER_USE_COLORS.get_value(override=use_colors)


# ========================================================================= #
# Verdicts                                                                  #
# ========================================================================= #


class Verdict(str, Enum):
    # generic
    PASS = 'pass'
    FAIL = 'fail'
    INCONCLUSIVE = 'inconclusive'
    NOT_APPLICABLE = 'not_applicable'
    # oscillation
    FMO = 'fmo'
    NOT_FMO = 'not_fmo'
    # divergence
    DIVERGENT = 'divergent'
    CONVERGENT = 'convergent'

    def __str__(self) -> str:
        return self.value


_VERDICT_COLORS = {
    Verdict.PASS: lGRN,
    Verdict.FMO: lGRN,
    Verdict.DIVERGENT: lGRN,
    Verdict.FAIL: lRED,
    Verdict.NOT_FMO: lRED,
    Verdict.CONVERGENT: lRED,
    Verdict.INCONCLUSIVE: lYLW,
    Verdict.NOT_APPLICABLE: GRY,
}


def fmt_verdict(verdict: Verdict, use_colors: Optional[bool] = None) -> str:
    verdict = Verdict(verdict)
    name = verdict.value.upper()
    if fmt_use_colors_get(use_colors):
        return f'{_VERDICT_COLORS[verdict]}{name}{RST}'
    return name


def fmt_verdict_line(command: str, verdict: Verdict, use_colors: Optional[bool] = None, **values: float) -> str:
    """
    The single plain-text summary line printed after a report, eg.
    `check-fmo: FMO (slope=0.001, tail_max=0.37)`
    """
    parts = ', '.join(f'{k}={fmt_number(v)}' for k, v in values.items())
    line = f'{command}: {fmt_verdict(verdict, use_colors=use_colors)}'
    return f'{line} ({parts})' if parts else line


# ========================================================================= #
# Number Formatting                                                         #
# ========================================================================= #


def fmt_number(value: float, digits: int = 6) -> str:
    """
    Compact representation of report values, switching to
    scientific notation for very large or small magnitudes.
    """
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if value is None:
        return 'none'
    value = float(value)
    if math.isnan(value):
        return 'nan'
    if math.isinf(value):
        return 'inf' if value > 0 else '-inf'
    if value == 0:
        return '0'
    if 1e-4 <= abs(value) < 1e6:
        return f'{value:.{digits}g}'
    return f'{value:.{max(digits - 3, 1)}e}'


def fmt_ratio(lhs: float, rhs: float, use_colors: Optional[bool] = None) -> str:
    """
    Format `lhs/rhs`, colored by whether lhs <= rhs.
    """
    ratio = math.inf if rhs == 0 and lhs > 0 else (1.0 if rhs == lhs == 0 else lhs / rhs)
    text = f'{fmt_number(lhs)} / {fmt_number(rhs)} = {fmt_number(ratio)}'
    if fmt_use_colors_get(use_colors):
        return f'{lGRN if ratio <= 1 else lRED}{text}{RST}'
    return text


# ========================================================================= #
# export                                                                    #
# ========================================================================= #


__all__ = (
    'Verdict',
    'fmt_use_colors_set_default',
    'fmt_use_colors_get',
    'fmt_verdict',
    'fmt_verdict_line',
    'fmt_number',
    'fmt_ratio',
)


# ========================================================================= #
# END                                                                       #
# ========================================================================= #
