"""Numerical certification of the inequalities behind the Weyl persistence exponents.

Each ``check_*`` function sweeps one inequality over a parameter box and
returns a :class:`BoundReport`.  Margins are ``RHS - LHS`` (or, where both
sides span many orders of magnitude, ``log RHS - log LHS``); a report passes
when its worst margin is at least ``-tolerance``.  Claims of the form "for
all n (or tau) large enough" are swept over a range and the smallest passing
parameter is reported in ``details`` instead of being assumed.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from . import series
from .errors import PrecisionLoss, PreconditionError
from .series import weyl_alpha

ANALYTIC_TOL = 1e-9
SAMPLED_TOL = 1e-6
IDENTITY_TOL = 1e-10
DEFAULT_N = (64, 100, 256, 1024)
MAX_SWEEP_POINTS = 20_000
ETA = 1.5


@dataclass
class BoundReport:
    name: str
    swept_box: dict
    worst_margin: float
    worst_point: dict
    passed: bool
    tolerance: float
    details: dict = field(default_factory=dict)

    def to_record(self):
        return {
            "type": "report",
            "name": self.name,
            "worst_margin": _finite(self.worst_margin),
            "worst_point": {k: _finite(v) for k, v in self.worst_point.items()},
            "pass": self.passed,
            "tolerance": self.tolerance,
            "swept_box": self.swept_box,
            "details": _jsonable(self.details),
        }


def _finite(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
    elif isinstance(v, np.integer):
        return int(v)
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return _finite(obj)


class _Worst:
    """Running minimum of a margin together with where it happened."""

    def __init__(self):
        self.margin = math.inf
        self.point = {}

    def add(self, margin, **point):
        if margin < self.margin or not self.point:
            self.margin = float(margin)
            self.point = point

    def add_array(self, margins, **coords):
        margins = np.asarray(margins, dtype=float)
        if margins.size == 0:
            return
        j = int(np.argmin(margins))
        point = {k: (float(np.broadcast_to(v, margins.shape)[j]) if np.ndim(v) else v) for k, v in coords.items()}
        self.add(margins[j], **point)


def _report(name, box, worst, tol, details=None, extra_ok=True):
    return BoundReport(
        name=name,
        swept_box=box,
        worst_margin=worst.margin,
        worst_point=worst.point,
        passed=bool(extra_ok and worst.margin >= -tol),
        tolerance=tol,
        details=details or {},
    )


def _require_even(n_list):
    odd = [n for n in n_list if n % 2]
    if odd:
        raise PreconditionError(f"even degrees required, got {odd}")


def _smallest_passing(per_n):
    """Smallest n from which every larger swept n passes (``None`` if the largest fails)."""
    best = None
    for n in sorted(per_n, reverse=True):
        if per_n[n]:
            best = n
        else:
            break
    return best


# ---------------------------------------------------------------------------
# truncated exponential series facts
# ---------------------------------------------------------------------------


def check_even_nonneg(n_list, z_grid):
    """``sum_{i<=n} x^i / i! >= 0`` for even n at every ``x`` in ``z_grid``."""
    _require_even(n_list)
    worst = _Worst()
    escalated = 0
    for n in n_list:
        for x in np.asarray(z_grid, dtype=float):
            if x >= 0:
                lv = series.log_partial_exp(n, x)
                value = math.exp(lv) if lv < 700 else math.inf
            else:
                sv = series.alternating_partial_exp(n, -x)
                escalated += sv.condition_flag
                value = sv.value if sv.value != 0 or sv.sign == 0 else sv.sign * 5e-324
            worst.add(value, n=n, x=float(x))
    z = np.asarray(z_grid, dtype=float)
    box = {"n": list(n_list), "x": [float(z.min()), float(z.max())], "points": int(z.size)}
    return _report("even_nonneg", box, worst, ANALYTIC_TOL, {"escalated_points": escalated})


def check_poisson_sandwich(n_list, points=400):
    """``1 - e^{-alpha^2/4} <= e^{-x} sum_{i<=n} x^i/i! <= 1`` on ``[0, n - sqrt(n) alpha_n]``."""
    if points < 200:
        raise PreconditionError("at least 200 x points are required")
    worst = _Worst()
    per_n = {}
    margins_n = {}
    for n in n_list:
        alpha = weyl_alpha(n)
        x_max = n - math.sqrt(n) * alpha
        if not x_max > 0:
            raise PreconditionError(f"n={n}: n - sqrt(n)*alpha_n must be positive")
        floor = math.exp(-alpha * alpha / 4)
        local = _Worst()
        for x in np.linspace(0.0, x_max, points):
            tail = series.poisson_tail(x, n) if x > 0 else 0.0
            local.add(tail, n=n, x=float(x), side="upper")
            local.add(floor - tail, n=n, x=float(x), side="lower")
        per_n[n] = local.margin >= -ANALYTIC_TOL
        margins_n[n] = local.margin
        worst.add(local.margin, **local.point)
    box = {"n": list(n_list), "x": "[0, n - sqrt(n)*alpha_n]", "points": points}
    details = {"margin_by_n": margins_n, "smallest_passing_n": _smallest_passing(per_n)}
    return _report("poisson_sandwich", box, worst, ANALYTIC_TOL, details)


def check_poisson_identity(samples=1000, x_max=30.0, n_max=120, seed=20240601):
    """``P(Poi(x) > n) + e^{-x} sum_{i<=n} x^i/i! = 1`` at random ``(x, n)``."""
    rng = np.random.default_rng(seed)
    worst = _Worst()
    xs = rng.uniform(0.0, x_max, samples)
    xs[xs == 0] = x_max
    ns = rng.integers(0, n_max + 1, samples)
    for x, n in zip(xs, ns):
        err = abs(series.poisson_tail(x, int(n)) + math.exp(-x + series.log_partial_exp(int(n), x)) - 1.0)
        worst.add(-err, x=float(x), n=int(n))
    box = {"x": [0.0, x_max], "n": [0, n_max], "samples": samples, "seed": seed}
    return _report("poisson_identity", box, worst, IDENTITY_TOL)


def check_rate_chain(n_list):
    """``k I(n/k) >= (k/3)(n/k - 1)^2 >= alpha_n^2/3`` with ``k = ceil(n - sqrt(n) alpha_n)``."""
    worst = _Worst()
    rows = {}
    for n in n_list:
        alpha = weyl_alpha(n)
        k = math.ceil(n - math.sqrt(n) * alpha)
        theta = n / k
        top = k * series.poisson_rate(theta)
        mid = k / 3 * (theta - 1) ** 2
        bottom = alpha * alpha / 3
        rows[n] = {"k": k, "kI": top, "quadratic": mid, "alpha2_over_3": bottom}
        worst.add(top - mid, n=n, step="rate>=quadratic")
        worst.add(mid - bottom, n=n, step="quadratic>=alpha^2/3")
    return _report("rate_chain", {"n": list(n_list)}, worst, ANALYTIC_TOL, {"chain": rows})


def check_alternating_sandwich(n_list, points=200):
    """Two-sided bound on ``ell_n(x) = e^x sum_{i<=n} (-x)^i/i!`` for even n.

    Lower: ``1 - e^{2x} x^{n+1}/(n+1)!``; upper: ``1 + e^{2x} e^{-alpha^2/4}/sqrt(2 pi n)``,
    both for ``0 <= x <= n - sqrt(n) alpha_n``.  Margins are relative:
    ``1 - lower/ell`` and ``1 - ell/upper``.
    """
    _require_even(n_list)
    worst = _Worst()
    per_n = {}
    flagged = []
    disagreement = 0.0
    for n in n_list:
        if n < 4:
            raise PreconditionError("alternating sandwich needs n >= 4")
        alpha = weyl_alpha(n)
        x_max = n - math.sqrt(n) * alpha
        local = _Worst()
        for x in np.linspace(0.0, x_max, points):
            x = float(x)
            try:
                sv = series.alternating_partial_exp(n, x)
                if sv.sign <= 0:
                    local.add(-math.inf, n=n, x=x, side="sign")
                    continue
                log_ell = x + sv.log_abs
                disagreement = max(disagreement, abs(log_ell - series.log_alternating_even(n, x)))
            except PrecisionLoss:
                flagged.append((n, x))
                log_ell = series.log_alternating_even(n, x)
            lo_log = 2 * x + (n + 1) * math.log(x) - math.lgamma(n + 2) if x > 0 else -math.inf
            if lo_log < 0:
                lower = -math.expm1(lo_log)
                local.add(-math.expm1(math.log(lower) - log_ell), n=n, x=x, side="lower")
            hi_log = np.logaddexp(0.0, 2 * x - alpha * alpha / 4 - 0.5 * math.log(2 * math.pi * n))
            local.add(-math.expm1(log_ell - hi_log), n=n, x=x, side="upper")
        per_n[n] = local.margin >= -ANALYTIC_TOL
        worst.add(local.margin, **local.point)
    box = {"n": list(n_list), "x": "[0, n - sqrt(n)*alpha_n]", "points": points}
    details = {
        "smallest_passing_n": _smallest_passing(per_n),
        "precision_loss_points": flagged,
        "max_log_disagreement_vs_positive_series": disagreement,
    }
    return _report("alternating_sandwich", box, worst, ANALYTIC_TOL, details)


# ---------------------------------------------------------------------------
# autocorrelation decay (b1) and modulus of continuity (b3)
# ---------------------------------------------------------------------------


def weyl_log_corr_pairs(n, s, t):
    """``log A_n(s, t)`` for arrays of pairs (even n when signs differ).

    Pairs of opposite sign must have a nonnegative correlation, which holds
    for even n; their numerator uses the cancellation-free representation of
    the alternating sum.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    prod = s * t
    norm = 0.5 * series.log_partial_exp_many(n, s * s) + 0.5 * series.log_partial_exp_many(n, t * t)
    out = np.empty(np.broadcast(s, t).shape)
    same = prod >= 0
    if same.any():
        out[same] = series.log_partial_exp_many(n, prod[same])
    if (~same).any():
        if n % 2:
            raise PreconditionError("mixed-sign log-correlations need even n")
        a = -prod[~same]
        out[~same] = -a + series.log_alternating_even_many(n, a)
    return out - norm


def check_b1(n_list, s_step=0.05, tau_grid=None, tau_required=10.0):
    """Decay of ``A_n(s, s+tau)`` for ``|s|, |s+tau| <= sqrt(n) - alpha_n``.

    Same-sign pairs: ``A_n <= 4 e^{-tau^2/2}``.  Opposite-sign pairs:
    ``A_n <= tau^{-2}``, required for ``tau >= tau_required``; the smallest
    grid ``tau`` from which it holds is reported, as is the supremum of
    ``log A_n / log tau`` beyond the threshold (must be below -1).
    """
    _require_even(n_list)
    worst = _Worst()
    per_n = {}
    ok_all = True
    for n in n_list:
        R = math.sqrt(n) - weyl_alpha(n)
        s = np.arange(-R, R + 1e-12, s_step)
        taus = np.asarray(tau_grid if tau_grid is not None else np.arange(0.0, 2 * R + 1e-12, 0.5))
        same_worst = _Worst()
        mixed_worst = _Worst()
        # per tau: worst mixed log-margin and sup of log A / log tau
        mixed_ok = {}
        ratio_sup = {}
        for tau in taus:
            t = s + tau
            keep = t <= R + 1e-12
            ss, tt = s[keep], t[keep]
            if ss.size == 0:
                continue
            logA = weyl_log_corr_pairs(n, ss, tt)
            same = ss * tt >= 0
            if same.any():
                same_worst.add_array(
                    math.log(4.0) - 0.5 * tau * tau - logA[same], n=n, s=ss[same], tau=float(tau)
                )
            mixed = ~same
            if mixed.any() and tau > 1:
                m = -2.0 * math.log(tau) - logA[mixed]
                mixed_ok[float(tau)] = bool(m.min() >= -SAMPLED_TOL)
                if tau >= tau_required:
                    mixed_worst.add_array(m, n=n, s=ss[mixed], tau=float(tau))
            if tau > 1:
                ratio_sup[float(tau)] = float(logA.max() / math.log(tau))
        tau_mixed = _threshold(mixed_ok)
        tau_b1 = _threshold({k: v < -1.0 for k, v in ratio_sup.items()})
        sup_beyond = max((v for k, v in ratio_sup.items() if tau_b1 is not None and k >= tau_b1), default=None)
        per_n[n] = {
            "same_sign_margin": same_worst.margin,
            "mixed_sign_margin_tau_ge_required": mixed_worst.margin,
            "tau_threshold_mixed": tau_mixed,
            "tau_threshold_b1": tau_b1,
            "sup_logA_over_logtau_beyond_threshold": sup_beyond,
        }
        ok_all &= tau_b1 is not None and tau_mixed is not None
        if same_worst.point:
            worst.add(same_worst.margin, branch="same_sign", **same_worst.point)
        if mixed_worst.point:
            worst.add(mixed_worst.margin, branch="mixed_sign", **mixed_worst.point)
    box = {"n": list(n_list), "s_step": s_step, "tau_required": tau_required}
    return _report("b1_decay", box, worst, SAMPLED_TOL, {"by_n": per_n}, extra_ok=ok_all)


def _threshold(ok_by_tau):
    """Smallest tau such that every tau' >= tau in the sweep is ok."""
    best = None
    for tau in sorted(ok_by_tau, reverse=True):
        if ok_by_tau[tau]:
            best = tau
        else:
            break
    return best


def log_one_minus_corr_lagrange(n, s, tau):
    """``log(1 - A_n(s, s+tau))`` without cancellation, for moderate ``n`` and ``|s|``.

    Uses ``D_s D_t - N^2 = sum_{i<j} (s^i t^j - s^j t^i)^2 / (i! j!)`` and
    ``s^i t^j - s^j t^i = (st)^i * tau * e_{j-i}`` with
    ``e_m = sum_{l<m} t^{m-1-l} s^l``, so ``tau`` is factored out exactly.
    """
    s = float(s)
    tau = float(tau)
    if tau == 0:
        return -math.inf
    t = s + tau
    e = [0.0] * (n + 1)
    spow = 1.0
    for m in range(1, n + 1):
        e[m] = t * e[m - 1] + spow
        spow *= s
    lf = [math.lgamma(i + 1.0) for i in range(n + 1)]
    st = s * t
    acc = 0.0
    for i in range(n):
        sti = st ** (2 * i) if st != 0 else (1.0 if i == 0 else 0.0)
        if sti == 0.0:
            break
        for j in range(i + 1, n + 1):
            acc += sti * e[j - i] ** 2 * math.exp(-lf[i] - lf[j])
    log_gram = math.log(acc) + 2 * math.log(tau)
    lds = series.log_partial_exp(n, s * s)
    ldt = series.log_partial_exp(n, t * t)
    log_root = 0.5 * (lds + ldt)
    num = series.alternating_partial_exp(n, -st) if st < 0 else None
    if num is None:
        log_num = series.log_partial_exp(n, st)
        log_root_plus_num = np.logaddexp(log_root, log_num)
    else:
        numv = num.sign * math.exp(num.log_abs - log_root)
        log_root_plus_num = log_root + math.log1p(numv)
    return log_gram - log_root - log_root_plus_num


def _log_one_minus_corr_bulk(n, s, tau):
    """``log(1 - A_n(s, s+tau))`` for same-sign pairs via log-correlations."""
    logA = weyl_log_corr_pairs(n, s, s + tau)
    with np.errstate(divide="ignore"):
        return np.log(np.maximum(-np.expm1(np.minimum(logA, 0.0)), 0.0))


def _s_grid(lo, hi, step):
    step = max(step, (hi - lo) / MAX_SWEEP_POINTS)
    return np.arange(lo, hi + 1e-15, step), step


def check_b3(n_list, u_grid=None, tiny_u=(1e-20, 1e-50, 1e-100, 1e-200), eta=ETA):
    """Modulus of continuity of ``A_n`` near the diagonal.

    For each ``u``:

    * opposite signs, ``|t - s| <= u``: ``1 - A_n <= u^2``;
    * same sign, ``n <= sqrt|log u|``: ``1 - A_n <= u`` (these regimes need
      very small ``u``, taken from ``tiny_u``);
    * same sign, ``n >= sqrt|log u|``: ``1 - A_n <= 1/|log u|^2``.

    Margins are ``log(bound) - log(1 - A_n)``.  Also reports
    ``sup_u |log u|^eta * p^2(u)`` with ``p^2(u) = 2 - 2 inf A_n`` over all
    regimes; the combined target ``1 - inf A_n <= 1/|log u|^2`` bounds it by
    ``2 |log u|^(eta-2) <= 1``.
    """
    _require_even(n_list)
    if u_grid is None:
        u_grid = (1.5e-2, 1e-2, 5e-3, 2e-3, 1e-3, 1e-4, 1e-6, 1e-8)
    for u in list(u_grid) + list(tiny_u):
        if not (0 < u <= 0.2 and math.sqrt(abs(math.log(u))) >= 2):
            raise PreconditionError(f"u={u} is not small enough (need sqrt|log u| >= 2)")
    lemma = {"c31": _Worst(), "c32": _Worst(), "c33": _Worst(), "target": _Worst()}
    eta_sup = 0.0
    eta_point = None
    sup_by_u = {}
    fracs = np.linspace(0.1, 1.0, 10)
    for u in list(u_grid) + list(tiny_u):
        L = abs(math.log(u))
        sup_log = -math.inf  # log sup (1 - A) over all regimes for this u
        # c31: s in [-u, 0), t in (0, s+u]
        for n in n_list:
            for s in -u * fracs:
                for tau in u * fracs:
                    if s + tau <= 0:
                        continue
                    v = log_one_minus_corr_lagrange(n, s, tau)
                    lemma["c31"].add(2 * math.log(u) - v, n=n, u=u, s=float(s), tau=float(tau))
                    sup_log = max(sup_log, v)
        # c32: even n <= sqrt|log u| with a nonempty interval [0, sqrt(n) - alpha_n]
        for n in range(4, int(math.sqrt(L)) + 1, 2):
            R = math.sqrt(n) - weyl_alpha(n)
            if R <= 0:
                continue
            for s in np.linspace(0.0, max(R - u, 0.0), 41):
                for tau in (0.5 * u, u):
                    v = log_one_minus_corr_lagrange(n, s, tau)
                    lemma["c32"].add(math.log(u) - v, n=n, u=u, s=float(s), tau=float(tau))
                    sup_log = max(sup_log, v)
        # c33: swept n >= sqrt|log u|
        for n in n_list:
            if n < math.sqrt(L):
                continue
            R = math.sqrt(n) - weyl_alpha(n)
            s, _ = _s_grid(0.0, R - u, u / 10)
            for tau in u * np.array([0.25, 0.5, 0.75, 1.0]):
                v = _log_one_minus_corr_bulk(n, s, tau)
                lemma["c33"].add_array(-2 * math.log(L) - v, n=n, u=u, s=s, tau=float(tau))
                sup_log = max(sup_log, float(v.max()))
        target = -2 * math.log(L)
        lemma["target"].add(target - sup_log, u=u)
        sup_by_u[u] = sup_log
        eta_val = L**eta * 2 * math.exp(sup_log) if sup_log > -math.inf else 0.0
        if eta_val >= eta_sup:
            eta_sup, eta_point = eta_val, u
    worst = _Worst()
    for key, w in lemma.items():
        if w.point:
            worst.add(w.margin, lemma=key, **w.point)
    worst.add(1.0 - eta_sup, lemma="eta_boundedness", u=eta_point)
    details = {
        "lemma_margins": {k: w.margin for k, w in lemma.items()},
        "lemma_worst_points": {k: w.point for k, w in lemma.items()},
        "log_sup_one_minus_A_by_u": sup_by_u,
        "eta": eta,
        "sup_logu_eta_p2": eta_sup,
        "s_grid_cap": MAX_SWEEP_POINTS,
    }
    box = {"n": list(n_list), "u": list(u_grid), "tiny_u": list(tiny_u)}
    return _report("b3_continuity", box, worst, SAMPLED_TOL, details)


def gram_excess(n, s, t):
    """``D_s D_t - N^2 = sum_{0<=i<j<=n} (s^i t^j - s^j t^i)^2 / (i! j!)`` by direct summation."""
    total = 0.0
    for i in range(n + 1):
        for j in range(i + 1, n + 1):
            total += (s**i * t**j - s**j * t**i) ** 2 / (math.factorial(i) * math.factorial(j))
    return total


def check_c32_chain(n_values=range(2, 11), taus=(1e-3, 1e-2, 0.1), points=20):
    """``1 - A_n(s,t) <= D_s D_t - N^2 <= n^(3n+3) (t-s)^2`` for ``0 <= s < t <= sqrt(n)``."""
    worst = _Worst()
    for n in n_values:
        root = math.sqrt(n)
        for s in np.linspace(0.0, root, points):
            for tau in taus:
                t = s + tau
                if t > root:
                    continue
                one_minus = math.exp(log_one_minus_corr_lagrange(n, s, tau))
                gram = gram_excess(n, s, t)
                cap = n ** (3 * n + 3) * tau * tau
                worst.add(math.log(gram) - math.log(one_minus), n=n, s=float(s), tau=tau, step="1-A<=gram")
                worst.add(math.log(cap) - math.log(gram), n=n, s=float(s), tau=tau, step="gram<=cap")
    box = {"n": list(n_values), "tau": list(taus), "s": "[0, sqrt(n)]"}
    return _report("c32_chain", box, worst, ANALYTIC_TOL)


# ---------------------------------------------------------------------------
# value/derivative variance ratios near sqrt(n)
# ---------------------------------------------------------------------------


def _weights(n, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    i = np.arange(n + 1, dtype=float)
    logt = i[None, :] * np.log(x * x)[:, None] - gammaln(i + 1.0)[None, :]
    w = np.exp(logt - logt.max(axis=1, keepdims=True))
    return x, i, w, logt


def variance_ratio_g(n, x):
    """``E(g'^2)/E(g^2)`` for ``g(x) = e^{-x^2/2} f_n(x)``:
    ``sum (i/x - x)^2 x^{2i}/i! / sum x^{2i}/i!``."""
    scalar = np.ndim(x) == 0
    xs, i, w, _ = _weights(n, x)
    if np.any(xs <= 0):
        raise ValueError("x must be positive")
    r = (w * ((i[None, :] - (xs * xs)[:, None]) ** 2)).sum(axis=1) / (xs * xs) / w.sum(axis=1)
    return float(r[0]) if scalar else r


def variance_ratio_h(n, x):
    """``E(h'^2)/E(h^2)`` for ``h(x) = x^{-n} f_n(x)``:
    ``sum ((i-n)/x)^2 x^{2i}/i! / sum x^{2i}/i!``."""
    scalar = np.ndim(x) == 0
    xs, i, w, _ = _weights(n, x)
    if np.any(xs <= 0):
        raise ValueError("x must be positive")
    r = (w * (i[None, :] - n) ** 2).sum(axis=1) / (xs * xs) / w.sum(axis=1)
    return float(r[0]) if scalar else r


def max_delta(n, points=400):
    """Largest ``Delta`` with ``2 Delta^2 E(Z'^2) <= E(Z^2)`` on both rescaled pieces."""
    if n < 2:
        raise PreconditionError("n must be >= 2")
    root, alpha = math.sqrt(n), weyl_alpha(n)
    if not root - alpha > 0:
        raise PreconditionError(f"n={n}: sqrt(n) - alpha_n must be positive")
    xg = np.linspace(root - alpha, root, points)
    xh = np.linspace(root, root + alpha, points)
    ratio = max(variance_ratio_g(n, xg).max(), variance_ratio_h(n, xh).max())
    return 1.0 / math.sqrt(2.0 * ratio)


def check_ldm_condition(n_list, points=400, spread=0.2):
    """A single ``Delta > 0`` serves every swept n.

    Passes when ``min_n Delta*(n) >= (1 - spread) * max_n Delta*(n)``.
    """
    if any(n < 64 for n in n_list):
        raise PreconditionError("check_ldm_condition sweeps n >= 64")
    deltas = {n: max_delta(n, points) for n in n_list}
    lo_n = min(deltas, key=deltas.get)
    worst = _Worst()
    worst.add(deltas[lo_n] - (1 - spread) * max(deltas.values()), n=lo_n)
    details = {"delta_star": deltas, "uniform_delta": deltas[lo_n], "spread": spread}
    box = {"n": list(n_list), "g": "[sqrt(n)-alpha_n, sqrt(n)]", "h": "[sqrt(n), sqrt(n)+alpha_n]", "points": points}
    return _report("ldm_condition", box, worst, ANALYTIC_TOL, details, extra_ok=deltas[lo_n] > 0)


def check_variance_lower_bounds(n_list, points=200):
    """Peak-window lower bounds on the value variances.

    g-piece: ``sum x^{2i}/i! >= x^{2k}/k! (floor(sqrt k)+1)/3`` with ``k = floor(x^2)``;
    h-piece: ``sum x^{2i}/i! >= x^{2n}/(3 n!) sum_{j<=floor(sqrt n)} (n/x^2)^j``.
    Margins are log-ratios.
    """
    worst = _Worst()
    for n in n_list:
        root, alpha = math.sqrt(n), weyl_alpha(n)
        for x in np.linspace(root - alpha, root, points):
            k = min(int(math.floor(x * x)), n)
            lhs = series.log_partial_exp(n, x * x)
            rhs = k * math.log(x * x) - math.lgamma(k + 1) + math.log((math.isqrt(k) + 1) / 3)
            worst.add(lhs - rhs, n=n, x=float(x), piece="g")
        m = math.isqrt(n)
        for x in np.linspace(root, root + alpha, points):
            r = n / (x * x)
            geo = m + 1 if r == 1 else (1 - r ** (m + 1)) / (1 - r)
            lhs = series.log_partial_exp(n, x * x)
            rhs = n * math.log(x * x) - math.lgamma(n + 1) - math.log(3) + math.log(geo)
            worst.add(lhs - rhs, n=n, x=float(x), piece="h")
    box = {"n": list(n_list), "points": points}
    return _report("variance_lower_bounds", box, worst, ANALYTIC_TOL)


# ---------------------------------------------------------------------------
# edge domination by the top coefficient
# ---------------------------------------------------------------------------


def tail_domination_margin(n, x):
    """``log(log n * x^n/sqrt(n!)) - log(sum_{i<n} x^i/sqrt(i!))``."""
    i = np.arange(n, dtype=float)
    lhs = logsumexp(i * math.log(x) - 0.5 * gammaln(i + 1.0))
    rhs = math.log(math.log(n)) + n * math.log(x) - 0.5 * math.lgamma(n + 1.0)
    return float(rhs - lhs)


def check_tail_domination(n_list, x_grid=None, points=200):
    """``sum_{i<n} x^i/sqrt(i!) <= log n * x^n/sqrt(n!)`` for ``x >= sqrt(n) + alpha_n``.

    ``x_grid`` holds multiples of ``alpha_n`` past ``sqrt(n)`` (default 1..3).
    Degrees with ``log n = 0`` are out of regime and skipped.
    """
    factors = np.asarray(x_grid if x_grid is not None else np.linspace(1.0, 3.0, points))
    if np.any(factors < 1.0):
        raise PreconditionError("x must be at least sqrt(n) + alpha_n")
    worst = _Worst()
    per_n = {}
    monotone = {}
    skipped = []
    for n in n_list:
        if n < 2:
            skipped.append(n)
            continue
        root, alpha = math.sqrt(n), weyl_alpha(n)
        m = np.array([tail_domination_margin(n, root + f * alpha) for f in factors])
        worst.add_array(m, n=n, x=root + factors * alpha)
        per_n[n] = bool(m.min() >= -ANALYTIC_TOL)
        monotone[n] = bool(np.all(np.diff(m) >= -1e-12))
    details = {"smallest_passing_n": _smallest_passing(per_n), "margin_increasing_in_x": monotone, "out_of_regime": skipped}
    box = {"n": list(n_list), "x": "sqrt(n) + [1, 3] * alpha_n", "points": int(factors.size)}
    return _report("tail_domination", box, worst, ANALYTIC_TOL, details)


# ---------------------------------------------------------------------------


def default_suite(n_list=DEFAULT_N):
    """Every report of the verification suite, in a fixed order."""
    n_list = tuple(n_list)
    small_even = tuple(range(2, 22, 2))
    return [
        check_even_nonneg(small_even + n_list, np.round(np.arange(-60.0, 0.05, 0.1), 10)),
        check_poisson_sandwich(n_list),
        check_poisson_identity(),
        check_rate_chain(n_list),
        check_alternating_sandwich(n_list),
        check_b1(n_list),
        check_b3(n_list),
        check_c32_chain(),
        check_ldm_condition(n_list),
        check_variance_lower_bounds(n_list),
        check_tail_domination(n_list),
    ]
