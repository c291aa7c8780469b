"""Time the numba kernels against their pure-numpy fallbacks.

Each kernel runs on identical inputs under both backends; results must agree
before timings are reported.  Compilation happens in a warm-up call and is
excluded.

    python benchmarks/bench_backends.py --trials 100000
"""
import argparse
import time

import numpy as np

from weylpersist import _accel
from weylpersist.grids import GridSpec
from weylpersist.kernels import KernelSpec, build_corr_matrix, weyl_basis
from weylpersist.persistence import weyl_grid
from weylpersist.sampler import cholesky_with_jitter


def _time(fn, repeat):
    fn()  # warm-up / compile
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(trials, rng):
    n = 400
    half = weyl_grid("half", n, 0.05)
    whole = weyl_grid("whole", n, 0.05)
    coeffs = rng.standard_normal((trials, n + 1))
    for label, grid in (("weyl half n=400", half), ("weyl whole n=400", whole)):
        basis = weyl_basis(n, grid.points())
        support = _accel._basis_support(basis)
        yield label, lambda b=basis, s=support: _accel.count_linear_survivors(coeffs, b, True, s)

    factor, _ = cholesky_with_jitter(build_corr_matrix(KernelSpec.gauss(), GridSpec(0.0, 10.0, 0.05)))
    z = rng.standard_normal((trials, factor.shape[0]))
    yield "gauss cholesky T=10", lambda: _accel.count_cholesky_survivors(z, factor, True)

    zs = rng.uniform(0.0, 1500.0, trials)
    yield "log partial exp n=1024", lambda: _accel.log_partial_exp_many(1024, zs)
    yield "log alternating n=1024", lambda: _accel.log_ell_even_many(1024, zs[: trials // 10])


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=100_000)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args(argv)

    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<26}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    previous = _accel.backend()
    try:
        for label, fn in cases(args.trials, rng):
            _accel.set_backend("numba")
            t_nb, out_nb = _time(fn, args.repeat)
            _accel.set_backend("numpy")
            t_np, out_np = _time(fn, args.repeat)
            if not np.allclose(out_nb, out_np, rtol=1e-10, atol=0):
                raise SystemExit(f"{label}: backends disagree ({out_nb} vs {out_np})")
            print(f"{label:<26}{t_nb:>12.4f}{t_np:>12.4f}{t_np / t_nb:>9.2f}x")
    finally:
        _accel.set_backend(previous)


if __name__ == "__main__":
    main()
