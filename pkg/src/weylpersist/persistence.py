"""Persistence probability estimates, sweeps and exponent fits."""
import enum
import math
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from .errors import InsufficientData, OddDegreeWholeLine, PreconditionError
from .grids import GridSpec
from .sampler import RngStream, WeylModel, sample_stationary_signs, sample_weyl_signs

Z95 = NormalDist().inv_cdf(0.975)
MIN_WEYL_DEGREE = 16


class Side(str, enum.Enum):
    HALF = "half"
    WHOLE = "whole"


@dataclass(frozen=True)
class PersistenceEstimate:
    trials: int
    successes: int
    p_hat: float
    log_p: float
    ci_low: float
    ci_high: float
    scale: float
    seed: RngStream | None = None
    label: str = ""

    @property
    def half_width(self):
        return 0.5 * (self.ci_high - self.ci_low)

    @property
    def log_p_var(self):
        """Delta-method variance of ``log p_hat``; floored at ``1/trials**2``."""
        if self.successes == 0:
            return math.inf
        return max((1.0 - self.p_hat) / (self.p_hat * self.trials), 1.0 / self.trials**2)


def wilson_interval(successes, trials, z=Z95):
    """Wilson score interval for a binomial proportion."""
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    low = 0.0 if successes == 0 else min(p, center - half)
    high = 1.0 if successes == trials else max(p, center + half)
    return max(low, 0.0), min(high, 1.0)


def estimate(batch, scale, seed=None, label=""):
    """Binomial estimate with a 95% Wilson interval from a :class:`PathBatch`."""
    if batch.trials < 1:
        raise PreconditionError("batch has no trials")
    p = batch.survived / batch.trials
    low, high = wilson_interval(batch.survived, batch.trials)
    log_p = math.log(p) if p > 0 else -math.inf
    return PersistenceEstimate(batch.trials, batch.survived, p, log_p, low, high, float(scale), seed, label)


def sweep_T(kernel, T_list, step, trials, seed, workers=None):
    """One estimate per horizon ``T`` (stream ``seed.offset(i)`` for the i-th)."""
    out = []
    for i, T in enumerate(T_list):
        rng = seed.offset(i)
        batch = sample_stationary_signs(kernel, T, step, trials, rng, workers=workers)
        out.append(estimate(batch, T, rng, label=f"{kernel}:T={T:g}"))
    return out


def weyl_grid(side, n, step, extent=None):
    """Grid for the half line ``[0, R]`` or whole line ``[-R, R]``, ``R = sqrt(n)+3 alpha_n``."""
    side = Side(side)
    if side is Side.WHOLE and n % 2:
        raise OddDegreeWholeLine(f"degree {n} is odd: the polynomial changes sign on the real line")
    if extent is None:
        if n == 0:
            return GridSpec(0.0, 0.0, step)
        if n < MIN_WEYL_DEGREE:
            raise PreconditionError(f"n={n} is below {MIN_WEYL_DEGREE}; pass an explicit extent")
        extent = WeylModel(n).reach
    return GridSpec(0.0 if side is Side.HALF else -extent, extent, step)


def sweep_n(side, n_list, step, trials, seed, workers=None, extent=None):
    """One estimate per degree, scale ``sqrt(n)``; degrees share nothing but the master seed."""
    side = Side(side)
    grids = [weyl_grid(side, n, step, extent) for n in n_list]
    out = []
    for i, (n, grid) in enumerate(zip(n_list, grids)):
        rng = seed.offset(i)
        batch = sample_weyl_signs(WeylModel(n), grid, trials, rng, workers=workers)
        out.append(estimate(batch, math.sqrt(n), rng, label=f"{side.value}:n={n}"))
    return out


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    slope_stderr: float
    r_squared: float
    points: tuple = field(default=())
    chi2: float = 0.0


def fit_line(scales, log_ps, weights):
    """Weighted least squares of ``log_ps`` on ``scales``.

    The slope error assumes the weights are inverse variances and is scaled
    up by ``sqrt(chi2/dof)`` when the scatter exceeds what they predict.
    """
    s = np.asarray(scales, dtype=float)
    y = np.asarray(log_ps, dtype=float)
    w = np.asarray(weights, dtype=float)
    if s.size < 3:
        raise InsufficientData(f"need at least 3 points with successes, got {s.size}")
    W = w.sum()
    s_bar = (w * s).sum() / W
    y_bar = (w * y).sum() / W
    sxx = (w * (s - s_bar) ** 2).sum()
    if sxx <= 0:
        raise InsufficientData("all points share one scale")
    slope = (w * (s - s_bar) * (y - y_bar)).sum() / sxx
    intercept = y_bar - slope * s_bar
    resid = y - (intercept + slope * s)
    chi2 = float((w * resid**2).sum())
    sst = float((w * (y - y_bar) ** 2).sum())
    r2 = 1.0 if sst == 0 else max(0.0, 1.0 - chi2 / sst)
    dof = s.size - 2
    stderr = math.sqrt(1.0 / sxx) * max(1.0, math.sqrt(chi2 / dof))
    pts = tuple((float(a), float(b), float(c)) for a, b, c in zip(s, y, w))
    return ExponentFit(float(slope), float(intercept), stderr, r2, pts, chi2)


def fit_exponent(estimates):
    """Fit ``log p_hat`` against scale with inverse-variance weights.

    Points with no successes are dropped.
    """
    usable = [e for e in estimates if e.successes > 0]
    if len(usable) < 3:
        raise InsufficientData(
            f"{len(usable)} of {len(estimates)} points have successes; at least 3 are needed"
        )
    return fit_line(
        [e.scale for e in usable], [e.log_p for e in usable], [1.0 / e.log_p_var for e in usable]
    )


def slopes_agree(a, b, k=1.0):
    """Do two fitted slopes differ by at most ``k`` joint standard errors?"""
    return abs(a.slope - b.slope) <= k * math.hypot(a.slope_stderr, b.slope_stderr)


def slope_ratio(num, den):
    """``num.slope / den.slope`` with first-order error propagation."""
    r = num.slope / den.slope
    rel = math.hypot(num.slope_stderr / num.slope, den.slope_stderr / den.slope)
    return r, abs(r) * rel


@dataclass(frozen=True)
class Decomposition:
    """Estimates on the bulk (A), crossover (B) and edge (C) pieces of the half line."""

    n: int
    a: PersistenceEstimate
    b: PersistenceEstimate
    c: PersistenceEstimate
    full: PersistenceEstimate

    @property
    def product(self):
        return self.a.p_hat * self.b.p_hat * self.c.p_hat

    def slepian_gap(self):
        """``(p_full - product, combined CI half-width)``."""
        prod = self.product
        rel = 0.0
        for e in (self.a, self.b, self.c):
            if e.p_hat > 0:
                rel += (e.half_width / e.p_hat) ** 2
        combined = math.hypot(self.full.half_width, prod * math.sqrt(rel))
        return self.full.p_hat - prod, combined

    def slepian_consistent(self, k=3.0):
        gap, combined = self.slepian_gap()
        return gap >= -k * combined


def decomposition_grids(n, step):
    model = WeylModel(n)
    root, alpha = math.sqrt(n), model.alpha_n
    if n < 2 or not root - alpha > 0:
        raise PreconditionError(f"n={n}: sqrt(n) - alpha_n must be positive")
    return {
        "a": GridSpec(0.0, root - alpha, step),
        "b": GridSpec(root - alpha, root + alpha, step),
        "c": GridSpec(root + alpha, root + 3 * alpha, step),
        "full": GridSpec(0.0, root + 3 * alpha, step),
    }


def product_decomposition(n, step, trials, seed, workers=None):
    """Estimate the three pieces and the full half line from the same coefficient draws."""
    grids = decomposition_grids(n, step)
    model = WeylModel(n)
    est = {}
    for key, grid in grids.items():
        batch = sample_weyl_signs(model, grid, trials, seed, workers=workers)
        est[key] = estimate(batch, math.sqrt(n), seed, label=f"decompose:{key}:n={n}")
    return Decomposition(n, est["a"], est["b"], est["c"], est["full"])
