"""Monte Carlo sign sampling for Weyl polynomials and stationary Gaussian paths.

Trials are split into fixed-size chunks.  Chunk ``c`` of stream ``s`` under
master seed ``m`` always draws from the Philox generator keyed by
``SeedSequence(m, spawn_key=(s, c))``, so counts do not depend on how chunks
are spread over workers, and a run with more trials reuses the draws of a run
with fewer.
"""
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .errors import FactorizationFailed, PreconditionError
from .grids import DEFAULT_MAX_POINTS, GridSpec
from .kernels import KernelSpec, build_corr_matrix, weyl_basis
from .series import weyl_alpha

CHUNK_TRIALS = 8192
JITTER_LADDER = (0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8)

__all__ = [
    "CHUNK_TRIALS",
    "GridSpec",
    "PathBatch",
    "RngStream",
    "WeylModel",
    "cholesky_with_jitter",
    "sample_stationary_signs",
    "sample_weyl_signs",
    "stationary_paths",
    "weyl_paths",
]


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must fit in 64 unsigned bits")
        if self.stream_index < 0:
            raise ValueError("stream_index must be nonnegative")

    def generator(self, chunk=0):
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index, chunk))
        return np.random.Generator(np.random.Philox(seq))

    def offset(self, k):
        """The stream ``k`` positions further along (for sweeps)."""
        return RngStream(self.master_seed, self.stream_index + k)


@dataclass(frozen=True)
class WeylModel:
    n: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("degree must be nonnegative")

    @property
    def alpha_n(self):
        return weyl_alpha(self.n)

    @property
    def reach(self):
        """Largest |x| the sampler accepts: sqrt(n) + 3 alpha_n."""
        if self.n < 2:
            return math.inf
        return math.sqrt(self.n) + 3.0 * self.alpha_n


@dataclass
class PathBatch:
    grid: GridSpec
    survived: int
    trials: int
    min_values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 0 <= self.survived <= self.trials:
            raise ValueError("survived must lie in [0, trials]")

    @property
    def ratio(self):
        return self.survived / self.trials

    def merge(self, other):
        if other.grid != self.grid:
            raise ValueError("cannot merge batches on different grids")
        mins = None
        if self.min_values is not None and other.min_values is not None:
            mins = np.concatenate([self.min_values, other.min_values])
        return PathBatch(self.grid, self.survived + other.survived, self.trials + other.trials, mins)


def _chunks(trials):
    if trials < 1:
        raise ValueError("trials must be >= 1")
    full, rest = divmod(trials, CHUNK_TRIALS)
    sizes = [CHUNK_TRIALS] * full + ([rest] if rest else [])
    return list(enumerate(sizes))


def _run_chunks(work, trials, workers):
    chunks = _chunks(trials)
    workers = workers or os.cpu_count() or 1
    if workers == 1 or len(chunks) == 1:
        results = [work(c, size) for c, size in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda cs: work(*cs), chunks))
    survived = sum(r[0] for r in results)
    mins = None
    if results and results[0][1] is not None:
        mins = np.concatenate([r[1] for r in results])
    return survived, mins


def _check_weyl_grid(model, grid):
    hi = max(abs(grid.start), abs(grid.end))
    if hi > model.reach * (1 + 1e-12):
        raise PreconditionError(
            f"grid reaches |x|={hi:.4g} beyond sqrt(n)+3*alpha_n={model.reach:.4g} for n={model.n}"
        )


def sample_weyl_signs(
    model,
    grid,
    trials,
    rng,
    workers=None,
    early_abort=True,
    record_minima=False,
    max_points=DEFAULT_MAX_POINTS,
):
    """Count Weyl polynomials ``sum_i a_i x^i / sqrt(i!)`` positive on every grid point.

    Paths are evaluated in standardized form (same sign), scanning the grid
    left to right and abandoning a trial at its first nonpositive value.
    With ``record_minima`` every path is evaluated in full and its minimum
    over the grid is kept.
    """
    grid.check_size(max_points)
    _check_weyl_grid(model, grid)
    n = model.n
    basis = weyl_basis(n, grid.points())
    support = _accel._basis_support(basis)

    def work(chunk, size):
        coeffs = rng.generator(chunk).standard_normal((size, n + 1))
        if record_minima:
            mins = (coeffs @ basis.T).min(axis=1)
            return int(np.count_nonzero(mins > 0)), mins
        return _accel.count_linear_survivors(coeffs, basis, early_abort, support), None

    survived, mins = _run_chunks(work, trials, workers)
    return PathBatch(grid, survived, trials, mins)


def weyl_paths(model, grid, trials, rng, max_points=DEFAULT_MAX_POINTS):
    """Full standardized Weyl paths, shape ``(trials, points)``; same draws as the counter."""
    grid.check_size(max_points)
    basis = weyl_basis(model.n, grid.points())
    out = [
        rng.generator(c).standard_normal((size, model.n + 1)) @ basis.T for c, size in _chunks(trials)
    ]
    return np.concatenate(out)


def cholesky_with_jitter(mat):
    """Lower Cholesky factor of ``mat + jitter*I``, escalating the jitter as needed.

    Returns ``(factor, jitter)``.  Raises :class:`FactorizationFailed` if the
    largest jitter on the ladder still leaves a nonpositive pivot.
    """
    eye = np.eye(mat.shape[0])
    for jitter in JITTER_LADDER:
        try:
            factor = np.linalg.cholesky(mat + jitter * eye)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(factor)) and np.all(np.diag(factor) > 0):
            return factor, jitter
    raise FactorizationFailed(
        f"Cholesky failed with jitter up to {JITTER_LADDER[-1]:g}; the grid is too fine for this kernel"
    )


def _stationary_setup(kernel, T, step, max_points):
    if not isinstance(kernel, KernelSpec) or not kernel.stationary:
        raise PreconditionError("stationary sampling needs the gauss or sech kernel")
    if T < 0:
        raise PreconditionError("T must be nonnegative")
    grid = GridSpec(0.0, float(T), float(step)).check_size(max_points)
    factor, _ = cholesky_with_jitter(build_corr_matrix(kernel, grid, max_points))
    return grid, factor


def sample_stationary_signs(
    kernel,
    T,
    step,
    trials,
    rng,
    workers=None,
    early_abort=True,
    record_minima=False,
    max_points=DEFAULT_MAX_POINTS,
):
    """Count stationary Gaussian paths on ``[0, T]`` positive at every grid point.

    Each path is generated point by point from the Cholesky factor (value at
    point ``j`` uses the first ``j+1`` normals), stopping at the first
    nonpositive value.
    """
    grid, factor = _stationary_setup(kernel, T, step, max_points)
    npts = grid.count

    def work(chunk, size):
        z = rng.generator(chunk).standard_normal((size, npts))
        if record_minima:
            mins = (z @ factor.T).min(axis=1)
            return int(np.count_nonzero(mins > 0)), mins
        return _accel.count_cholesky_survivors(z, factor, early_abort), None

    survived, mins = _run_chunks(work, trials, workers)
    return PathBatch(grid, survived, trials, mins)


def stationary_paths(kernel, T, step, trials, rng, max_points=DEFAULT_MAX_POINTS):
    """Full stationary paths, shape ``(trials, points)``; same draws as the counter."""
    grid, factor = _stationary_setup(kernel, T, step, max_points)
    out = [rng.generator(c).standard_normal((size, grid.count)) @ factor.T for c, size in _chunks(trials)]
    return np.concatenate(out)
