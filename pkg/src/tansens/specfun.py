"""Special functions: Gamma, Kummer's 1F1, and normal absolute moments.

``kummer_1f1`` evaluates the confluent hypergeometric function of the first
kind.  The cases this package actually exercises have ``a`` a nonpositive
integer or half-integer, ``b = 1/2`` and ``z <= 0``; those are covered by a
truncating polynomial or by the reflection ``1F1(a,b,z) = e^z 1F1(b-a,b,-z)``
whose series has nonnegative terms (no cancellation).  Everything is summed
with compensated (Neumaier) accumulation and exact power-of-two rescaling, so
log-scale values stay available for bound evaluation at extreme arguments.
"""

from __future__ import annotations

import math

_LN2 = math.log(2.0)
# Exact power-of-two rescaling bounds for the running sum.
_BIG = 2.0**900
_SMALL = 2.0**-900

# Term caps: cancellation-prone (alternating) sums give up early rather than
# return silently wrong values; positive-term sums only need patience.
MAX_TERMS_ALTERNATING = 10_000
MAX_TERMS_POSITIVE = 50_000


class ConvergenceError(ArithmeticError):
    """Series did not reach the requested tolerance."""

    def __init__(self, message: str, achieved_tol: float):
        super().__init__(f"{message} (achieved tolerance ~{achieved_tol:.3e})")
        self.achieved_tol = achieved_tol


def _is_nonpositive_int(x: float) -> bool:
    return x <= 0.0 and float(x).is_integer()


def gamma_fn(x: float) -> float:
    """Gamma function; poles at nonpositive integers raise ``ValueError``."""
    if _is_nonpositive_int(x):
        raise ValueError(f"gamma pole at x={x}")
    return math.gamma(x)


def _series_scaled(a: float, b: float, z: float, rtol: float, max_terms: int):
    """Sum the 1F1 series, returning ``(mantissa, log_scale, achieved)``.

    The value is ``mantissa * exp(log_scale)``.  ``achieved`` estimates the
    attainable relative accuracy from the largest intermediate term (poor
    when the sum cancels heavily).  Raises ``ConvergenceError`` when the
    term cap is hit before the tail is negligible.
    """
    term = 1.0
    total = 1.0
    comp = 0.0  # Neumaier compensation
    log_scale = 0.0
    max_abs = 1.0
    hump = abs(z)
    n = 0
    small_streak = 0
    while n < max_terms:
        term *= (a + n) * z / ((b + n) * (n + 1.0))
        n += 1
        if term == 0.0:  # truncating polynomial case
            break
        t = total + term
        if abs(total) >= abs(term):
            comp += (total - t) + term
        else:
            comp += (term - t) + total
        total = t
        max_abs = max(max_abs, abs(term), abs(total))
        if abs(term) <= rtol * max(abs(total), 1e-300):
            small_streak += 1
            if small_streak >= 2 and n > hump:
                break
        else:
            small_streak = 0
        if abs(total) > _BIG or abs(term) > _BIG:
            total *= _SMALL
            comp *= _SMALL
            term *= _SMALL
            max_abs *= _SMALL
            log_scale += 900.0 * _LN2
    else:
        raise ConvergenceError(
            f"1F1({a},{b},z) series not converged after {max_terms} terms",
            abs(term) / max(abs(total), 1e-300),
        )
    total += comp
    achieved = 2.22e-16 * max_abs / max(abs(total), 1e-300)
    return total, log_scale, achieved


def _kummer_scaled(a: float, b: float, z: float, rtol: float, max_terms):
    """Dispatch to a cancellation-free series; returns (mantissa, log_scale)."""
    if _is_nonpositive_int(b):
        raise ValueError(f"1F1 undefined for nonpositive integer b={b}")
    if z == 0.0 or a == 0.0:
        return 1.0, 0.0
    if _is_nonpositive_int(a):
        # Degree-|a| polynomial; for z <= 0 every term is nonnegative.
        cap = max_terms or MAX_TERMS_ALTERNATING
        mant, log_scale, achieved = _series_scaled(a, b, z, rtol, cap)
        if z > 0.0 and achieved > 1e-12:
            raise ConvergenceError(f"1F1({a},{b},{z}) lost accuracy to cancellation", achieved)
        return mant, log_scale
    if z < 0.0:
        # Reflection: 1F1(a,b,z) = e^z 1F1(b-a, b, -z).
        if _is_nonpositive_int(b - a):
            cap = max_terms or MAX_TERMS_ALTERNATING
        else:
            cap = max_terms or MAX_TERMS_POSITIVE
        mant, log_scale, achieved = _series_scaled(b - a, b, -z, rtol, cap)
        if (b - a < 0.0 or b < 0.0) and achieved > 1e-12:
            raise ConvergenceError(f"1F1({a},{b},{z}) lost accuracy to cancellation", achieved)
        return mant, log_scale + z
    cap = max_terms or (MAX_TERMS_POSITIVE if a > 0.0 else MAX_TERMS_ALTERNATING)
    mant, log_scale, achieved = _series_scaled(a, b, z, rtol, cap)
    if achieved > 1e-12:
        raise ConvergenceError(f"1F1({a},{b},{z}) lost accuracy to cancellation", achieved)
    return mant, log_scale


def kummer_1f1(a: float, b: float, z: float, rtol: float = 1e-15, max_terms=None) -> float:
    """Confluent hypergeometric function 1F1(a; b; z)."""
    mant, log_scale = _kummer_scaled(a, b, z, rtol, max_terms)
    if log_scale == 0.0:
        return mant
    return mant * math.exp(log_scale)


def kummer_1f1_log(a: float, b: float, z: float, rtol: float = 1e-15, max_terms=None) -> float:
    """``log 1F1(a; b; z)`` for argument ranges where the value is positive."""
    mant, log_scale = _kummer_scaled(a, b, z, rtol, max_terms)
    if mant <= 0.0:
        raise ValueError(f"1F1({a},{b},{z}) = {mant * math.exp(log_scale)} is not positive")
    return math.log(mant) + log_scale


def normal_abs_moment(order: float, mu: float, sigma: float) -> float:
    """``E|X|^order`` for ``X ~ N(mu, sigma^2)`` via the 1F1 closed form."""
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if order < 0.0:
        raise ValueError(f"moment order must be nonnegative, got {order}")
    if order == 0.0:
        return 1.0
    z = -(mu * mu) / (2.0 * sigma * sigma)
    return (
        sigma**order
        * 2.0 ** (order / 2.0)
        * gamma_fn((order + 1.0) / 2.0)
        / math.sqrt(math.pi)
        * kummer_1f1(-order / 2.0, 0.5, z)
    )
