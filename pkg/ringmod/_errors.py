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

# ========================================================================= #
# Errors                                                                    #
# ========================================================================= #


class RingmodError(Exception):
    """
    Base class of all errors raised by ringmod.
    """


class DomainError(RingmodError, ValueError):
    """
    Raised if a point lies outside a chart box or outside the domain of a mapping.
    """


class PreconditionError(RingmodError, ValueError):
    """
    Raised if the inputs of an operation violate its preconditions,
    eg. a sphere beyond the normal-patch guard or a degenerate curve.
    """


class UnreachableError(RingmodError, RuntimeError):
    """
    Raised if two points lie in disconnected components of a grid graph.
    """


class UnsupportedExponentError(RingmodError, ValueError):
    """
    Raised for exponents outside of the supported range, eg. p <= 1.
    """


class InvalidProfileError(RingmodError, ValueError):
    """
    Raised if a radial profile is negative or not normalized.
    """


class DivisionGuardError(RingmodError, ZeroDivisionError):
    """
    Raised if a spherical mean vanishes where it is used as a divisor.
    """


class MinorizationError(RingmodError, ValueError):
    """
    Raised if two curve families are compared without a valid minorization certificate.
    """


class IntersectingContinuaError(RingmodError, ValueError):
    """
    Raised if the continua of a Loewner pair meet.
    """


# ========================================================================= #
# export                                                                    #
# ========================================================================= #


__all__ = (
    'RingmodError',
    'DomainError',
    'PreconditionError',
    'UnreachableError',
    'UnsupportedExponentError',
    'InvalidProfileError',
    'DivisionGuardError',
    'MinorizationError',
    'IntersectingContinuaError',
)


# ========================================================================= #
# END                                                                       #
# ========================================================================= #
