"""Correlation kernels: finite-degree Weyl autocorrelation and stationary limits."""
import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import series
from .grids import DEFAULT_MAX_POINTS, GridSpec


class KernelKind(str, enum.Enum):
    WEYL = "weyl"
    GAUSS = "gauss"
    SECH = "sech"


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind
    n: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if self.kind is KernelKind.WEYL:
            if self.n is None or self.n < 0:
                raise ValueError("Weyl kernel needs a degree n >= 0")
        elif self.n is not None:
            raise ValueError(f"{self.kind.value} kernel takes no degree")

    @classmethod
    def weyl(cls, n):
        return cls(KernelKind.WEYL, int(n))

    @classmethod
    def gauss(cls):
        return cls(KernelKind.GAUSS)

    @classmethod
    def sech(cls):
        return cls(KernelKind.SECH)

    @classmethod
    def parse(cls, text):
        """``"gauss"``, ``"sech"`` or ``"weyl:<n>"``."""
        text = text.strip().lower()
        if text.startswith("weyl"):
            _, _, deg = text.partition(":")
            return cls.weyl(int(deg))
        return cls(KernelKind(text))

    @property
    def stationary(self):
        return self.kind is not KernelKind.WEYL

    def __str__(self):
        return f"weyl:{self.n}" if self.kind is KernelKind.WEYL else self.kind.value

    def profile(self, lag):
        """Stationary correlation as a function of the lag (vectorized)."""
        lag = np.abs(np.asarray(lag, dtype=float))
        if self.kind is KernelKind.GAUSS:
            return np.exp(-0.5 * lag * lag)
        if self.kind is KernelKind.SECH:
            return 1.0 / np.cosh(0.5 * lag)
        raise TypeError("the Weyl kernel is not stationary")


def _log_norm(n, x):
    """``log sqrt(sum_i x^(2i)/i!)``, the log standard deviation of f_n(x)."""
    return 0.5 * series.log_partial_exp(n, x * x)


def corr(kernel, x, y):
    """Correlation of the process at ``x`` and ``y``.

    For odd Weyl degrees and arguments of opposite sign the value may be
    negative.

    Raises
    ------
    PrecisionLoss
        From :func:`series.alternating_partial_exp` when a mixed-sign Weyl
        numerator cannot be certified.
    """
    x = float(x)
    y = float(y)
    if x == y:
        return 1.0
    if kernel.stationary:
        return float(kernel.profile(x - y))
    n = kernel.n
    xy = x * y
    norm = _log_norm(n, x) + _log_norm(n, y)
    if xy >= 0:
        return math.exp(series.log_partial_exp(n, xy) - norm)
    num = series.alternating_partial_exp(n, -xy)
    if num.sign == 0:
        return 0.0
    return num.sign * math.exp(num.log_abs - norm)


def limit_gap(n, x, y):
    """``|A_n(x, y) - exp(-(x-y)^2/2)|``."""
    return abs(corr(KernelSpec.weyl(n), x, y) - math.exp(-0.5 * (x - y) ** 2))


def weyl_basis(n, points):
    """Rows ``x^i / sqrt(i!)`` normalized to unit length, one row per point.

    ``basis @ a`` is the standardized Weyl path ``f_n(x)/sd(f_n(x))`` for a
    coefficient vector ``a``.  Entries are built in log form so that large
    ``|x|`` does not overflow.
    """
    x = np.asarray(points, dtype=float)
    idx = np.arange(n + 1, dtype=float)
    log_den = 0.5 * series.log_partial_exp_many(n, x * x)
    with np.errstate(divide="ignore", invalid="ignore"):
        logx = np.log(np.abs(x))
        logmag = idx[None, :] * logx[:, None] - 0.5 * gammaln(idx + 1.0)[None, :] - log_den[:, None]
    zero = x == 0
    if zero.any():
        logmag[zero, :] = -np.inf
        logmag[zero, 0] = 0.0
    basis = np.exp(logmag)
    neg = x < 0
    if neg.any():
        basis[np.ix_(neg, idx.astype(int) % 2 == 1)] *= -1.0
    return basis


def build_corr_matrix(kernel, grid, max_points=DEFAULT_MAX_POINTS):
    """Correlation matrix of the kernel on the grid points.

    Weyl matrices are formed as ``B @ B.T`` from :func:`weyl_basis`, which keeps
    them positive semidefinite by construction.
    """
    if not isinstance(grid, GridSpec):
        raise TypeError("grid must be a GridSpec")
    grid.check_size(max_points)
    pts = grid.points()
    if kernel.stationary:
        mat = kernel.profile(pts[:, None] - pts[None, :])
    else:
        basis = weyl_basis(kernel.n, pts)
        mat = basis @ basis.T
        mat = 0.5 * (mat + mat.T)
        if kernel.n % 2 == 0:
            # rounding noise only; even-degree correlations are nonnegative
            np.maximum(mat, 0.0, out=mat)
    np.fill_diagonal(mat, 1.0)
    mat.setflags(write=False)
    return mat
