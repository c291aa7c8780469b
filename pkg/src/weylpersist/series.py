"""Stable evaluation of truncated exponential series.

All kernels and inequality checks reduce to three sums:

* ``sum_{i<=n} z**i / i!`` for ``z >= 0`` (kept in log form),
* the alternating version ``sum_{i<=n} (-z)**i / i!``,
* Poisson tails ``P(Poi(x) > n)``.
"""
import math
from dataclasses import dataclass
from fractions import Fraction

from scipy.special import gammainc

from . import _accel
from .errors import PrecisionLoss

LogValue = float
"""Natural log of a nonnegative quantity; ``-inf`` encodes zero."""

CANCELLATION_LIMIT = 1e8
# Integer bit budget for exact escalation (~n * bits-per-term).
EXACT_BIT_BUDGET = 40_000_000
_EPS = 2.0**-53


@dataclass(frozen=True)
class SignedSeriesValue:
    """Value of an alternating partial sum.

    ``condition_flag`` is set when double precision could not be trusted and
    the value came from exact rational accumulation.  ``log_abs`` is
    ``log|value|``; it stays finite when ``value`` itself underflows.
    """

    value: float
    condition_flag: bool
    log_abs: float
    sign: int


def log_partial_exp(n, z):
    """Return ``log sum_{i=0}^{n} z**i / i!`` for ``z >= 0``.

    The sum is accumulated outward from the largest term (index
    ``min(n, floor(z))``) so no intermediate leaves a bounded range.
    """
    if n < 0 or not z >= 0:
        raise ValueError(f"need n >= 0 and z >= 0, got n={n}, z={z}")
    return _accel.log_partial_exp(n, z)


def log_partial_exp_many(n, z):
    """Vectorized :func:`log_partial_exp` over an array of ``z``."""
    return _accel.log_partial_exp_many(n, z)


def log_alternating_even(n, z):
    """``log( e**z * sum_{i<=n} (-z)**i / i! )`` for even ``n``.

    Uses ``e**z * sum_{i<=n} (-z)**i/i! = 1 + int_0^z e**t t**n / n! dt``,
    expanded as ``1 + sum_k z**(n+1+k) / (n! k! (n+1+k))``: every term is
    positive, so nothing cancels.  The result is >= 0.
    """
    if n % 2:
        raise ValueError("the positive representation needs even n")
    if not z >= 0:
        raise ValueError("z must be nonnegative")
    return _accel.log_ell_even(n, z)


def log_alternating_even_many(n, z):
    if n % 2:
        raise ValueError("the positive representation needs even n")
    return _accel.log_ell_even_many(n, z)


def _alternating_double(n, z):
    """Compensated sum plus a running rounding-error bound."""
    s = 0.0
    comp = 0.0
    t = 1.0
    biggest = 0.0
    err = 0.0
    for i in range(n + 1):
        if i:
            t *= -z / i
        new = s + t
        if abs(s) >= abs(t):
            comp += (s - new) + t
        else:
            comp += (t - new) + s
        s = new
        biggest = max(biggest, abs(s + comp))
        # each term carries ~ (i+1) roundings from the recurrence
        err += (i + 1) * abs(t)
    return s + comp, biggest, 2.0 * _EPS * err


def _alternating_exact(n, z):
    p, q = Fraction(z).as_integer_ratio()
    bits = (n + 1) * (p.bit_length() + q.bit_length() + (n + 1).bit_length() + 2)
    if bits > EXACT_BIT_BUDGET:
        return None
    # sum_i (-p)^i q^(n-i) n!/i!  over  q^n n!, by Horner in (-p)
    acc = 1
    b = 1
    for i in range(n - 1, -1, -1):
        b *= q * (i + 1)
        acc = acc * (-p) + b
    if acc == 0:
        return 0.0, -math.inf, 0
    sign = 1 if acc > 0 else -1
    log_abs = math.log(abs(acc)) - math.log(b)
    try:
        value = acc / b
    except OverflowError:
        value = sign * math.inf
    return value, log_abs, sign


def alternating_sandwich(n, z):
    """Analytic enclosure of ``sum_{i<=n} (-z)**i / i!`` for even ``n``.

    Valid for ``0 <= z <= n - sqrt(n) * alpha_n`` with ``alpha_n = sqrt(n)/log n``;
    outside that range only the sign information (value >= 0) is used.
    """
    lower, upper = -math.inf, math.inf
    if n % 2 == 0:
        lower = 0.0
        if n >= 2:
            alpha = math.sqrt(n) / math.log(n)
            if z <= n - math.sqrt(n) * alpha:
                lo_log = 2 * z + (n + 1) * math.log(z) - math.lgamma(n + 2) if z > 0 else -math.inf
                if lo_log < 0:
                    lower = math.exp(-z) * -math.expm1(lo_log)
                hi_log = 2 * z - alpha**2 / 4 - 0.5 * math.log(2 * math.pi * n)
                upper = math.exp(-z + math.log1p(math.exp(hi_log))) if hi_log < 700 else math.inf
    return lower, upper


def alternating_partial_exp(n, z):
    """Return ``sum_{i=0}^{n} (-z)**i / i!`` for ``z >= 0``.

    Double precision with compensated summation is tried first.  When the
    partial sums outgrow the result by more than ``CANCELLATION_LIMIT`` (or the
    rounding bound exceeds ``max(1e-10 * e**-z, 1e-12 * |result|)``) the sum is
    redone exactly in rational arithmetic and ``condition_flag`` is set.

    Raises
    ------
    PrecisionLoss
        If the exact route would exceed ``EXACT_BIT_BUDGET``; the exception
        carries the analytic sandwich as ``lower``/``upper``.
    """
    if n < 0 or not z >= 0:
        raise ValueError(f"need n >= 0 and z >= 0, got n={n}, z={z}")
    if z == 0 or n == 0:
        return SignedSeriesValue(1.0, False, 0.0, 1)
    if z < 700:
        value, biggest, err = _alternating_double(n, z)
        tol = max(1e-10 * math.exp(-z), 1e-12 * abs(value))
        if value != 0 and biggest <= CANCELLATION_LIMIT * abs(value) and err <= tol:
            return SignedSeriesValue(value, False, math.log(abs(value)), 1 if value > 0 else -1)
    exact = _alternating_exact(n, z)
    if exact is None:
        lo, hi = alternating_sandwich(n, z)
        raise PrecisionLoss(
            f"alternating sum with n={n}, z={z} exceeds the exact-arithmetic budget",
            lower=lo,
            upper=hi,
        )
    value, log_abs, sign = exact
    return SignedSeriesValue(value, True, log_abs, sign)


def poisson_tail(x, n):
    """``P(Poi(x) > n)`` as the regularized lower incomplete gamma ``P(n+1, x)``."""
    if not x > 0:
        raise ValueError("x must be positive")
    return float(gammainc(n + 1, x))


def poisson_rate(theta):
    """Cramer rate function of Poisson(1): ``theta log theta - (theta - 1)``."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    return theta * math.log(theta) - (theta - 1.0)


def log_weyl_coeff(i):
    """``log(1/sqrt(i!)) = -lgamma(i+1)/2``; exact factorial up to 20!."""
    if i < 0:
        raise ValueError("index must be nonnegative")
    if i <= 20:
        return -0.5 * math.log(math.factorial(i))
    return -0.5 * math.lgamma(i + 1.0)


def weyl_alpha(n):
    """Buffer width ``sqrt(n)/log(n)`` (``nan`` when ``n < 2``)."""
    if n < 2:
        return math.nan
    return math.sqrt(n) / math.log(n)
