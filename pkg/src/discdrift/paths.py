"""Time grids, Brownian paths, bridge refinement and the fresh-bridge coupling.

Batched helpers work on time-major arrays of shape ``(len(times), reps)``,
one column per replication, each column driven by its own generator.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Partition ``0 = t_0 < ... < t_n = 1``.

    With ``paper_grid=True`` the grid must also have even ``n`` and contain
    ``2/n, 4/n, ..., 1``.
    """

    times: np.ndarray
    paper_grid: bool = False

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        t.setflags(write=False)
        object.__setattr__(self, "times", t)
        if t.ndim != 1 or t.size < 2:
            raise GridError("a grid needs at least the two endpoints")
        if t[0] != 0.0 or t[-1] != 1.0:
            raise GridError("grid must start at 0 and end at 1")
        if not np.all(np.diff(t) > 0):
            raise GridError("grid times must be strictly increasing")
        if self.paper_grid:
            n = self.n
            if n % 2:
                raise GridError("paper_grid requires even n")
            need = np.arange(1, n // 2 + 1) * 2 / n
            if not np.all(np.isin(need, t)):
                raise GridError("paper_grid requires {2/n, 4/n, ..., 1} among the grid times")

    @property
    def n(self) -> int:
        return self.times.size - 1

    @classmethod
    def uniform(cls, n: int, paper_grid: bool = False) -> "TimeGrid":
        return cls(np.arange(n + 1) / n, paper_grid)

    def refined(self, factor: int) -> "TimeGrid":
        """Split every interval into ``factor`` equal parts; original times kept bitwise."""
        if factor < 1:
            raise GridError("refinement factor must be >= 1")
        t = self.times
        j = np.arange(factor) / factor
        fine = (t[:-1, None] + np.diff(t)[:, None] * j[None, :]).ravel()
        fine[::factor] = t[:-1]
        return TimeGrid(np.append(fine, 1.0))

    def positions_of(self, coarse: "TimeGrid") -> np.ndarray:
        """Indices of ``coarse.times`` inside this grid; raises if not a refinement."""
        idx = np.searchsorted(self.times, coarse.times)
        ok = idx < self.times.size
        if not (np.all(ok) and np.array_equal(self.times[idx], coarse.times)):
            raise GridError("grid does not contain all coarse times")
        return idx

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and np.array_equal(self.times, other.times)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class BrownianPath:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if v.shape != self.grid.times.shape:
            raise GridError("path length does not match its grid")
        if v[0] != 0.0:
            raise GridError("a Brownian path starts at 0")

    @property
    def times(self):
        return self.grid.times


@dataclass(frozen=True, eq=False)
class CoupledPathPair:
    """``w`` and ``w_tilde`` share the coarse-time values; bridges are independent."""

    fine_grid: TimeGrid
    w: BrownianPath
    w_tilde: BrownianPath
    coarse_indices: np.ndarray


# batched kernels ---------------------------------------------------------

def brownian_batch(times: np.ndarray, gens) -> np.ndarray:
    """Brownian values on ``times`` for each generator, shape ``(len(times), len(gens))``."""
    sd = np.sqrt(np.diff(times))
    z = np.empty((times.size - 1, len(gens)))
    for j, g in enumerate(gens):
        z[:, j] = g.standard_normal(times.size - 1)
    out = np.zeros((times.size, len(gens)))
    np.cumsum(z * sd[:, None], axis=0, out=out[1:])
    return out


def bridge_fill(fine_times: np.ndarray, coarse_idx: np.ndarray, coarse_vals: np.ndarray, gens) -> np.ndarray:
    """Sample the fine-grid values given the coarse ones.

    Interior points of each coarse interval are drawn left to right, each
    conditioned on the last sampled value and the right coarse endpoint.
    """
    N = fine_times.size
    m = coarse_vals.shape[1]
    out = np.empty((N, m))
    out[coarse_idx] = coarse_vals
    is_new = np.ones(N, dtype=bool)
    is_new[coarse_idx] = False
    new = np.flatnonzero(is_new)
    if new.size == 0:
        return out
    z = np.empty((new.size, m))
    for j, g in enumerate(gens):
        z[:, j] = g.standard_normal(new.size)
    rpos = np.searchsorted(coarse_idx, new)  # right coarse neighbour
    rank = new - coarse_idx[rpos - 1] - 1
    t_right = fine_times[coarse_idx[rpos]]
    for r in range(int(rank.max()) + 1):
        sel = np.flatnonzero(rank == r)
        idx = new[sel]
        u, l, t = fine_times[idx], fine_times[idx - 1], t_right[sel]
        w = ((u - l) / (t - l))[:, None]
        sd = np.sqrt((t - u) * (u - l) / (t - l))[:, None]
        prev = out[idx - 1]
        out[idx] = prev + w * (coarse_vals[rpos[sel]] - prev) + sd * z[sel]
    return out


# single-path API ---------------------------------------------------------

def sample_brownian(grid: TimeGrid, rng: np.random.Generator) -> BrownianPath:
    """Independent Gaussian increments with variance ``t_i - t_{i-1}``."""
    return BrownianPath(grid, brownian_batch(grid.times, [rng])[:, 0])


def linear_interp(path: BrownianPath, t):
    """Piecewise linear interpolation of the path values."""
    t = np.asarray(t, dtype=float)
    if np.any((t < 0.0) | (t > 1.0)):
        raise GridError("t must lie in [0, 1]")
    times, w = path.times, path.values
    i = np.clip(np.searchsorted(times, t, side="right"), 1, times.size - 1)
    t0, t1 = times[i - 1], times[i]
    out = (t - t0) / (t1 - t0) * w[i] + (t1 - t) / (t1 - t0) * w[i - 1]
    return float(out) if out.ndim == 0 else out


def restrict(path: BrownianPath, coarse: TimeGrid) -> BrownianPath:
    return BrownianPath(coarse, path.values[path.grid.positions_of(coarse)])


def refine(path: BrownianPath, fine: TimeGrid, rng: np.random.Generator) -> BrownianPath:
    """Fill in ``fine`` by conditional Brownian bridge sampling; known values are kept."""
    idx = fine.positions_of(path.grid)
    vals = bridge_fill(fine.times, idx, path.values[:, None], [rng])[:, 0]
    return BrownianPath(fine, vals)


def couple(path: BrownianPath, coarse: TimeGrid, rng: np.random.Generator) -> CoupledPathPair:
    """Replace the bridges of ``path`` between coarse times by fresh independent ones."""
    idx = path.grid.positions_of(coarse)
    vals = bridge_fill(path.times, idx, path.values[idx][:, None], [rng])[:, 0]
    return CoupledPathPair(path.grid, path, BrownianPath(path.grid, vals), idx)


# export -----------------------------------------------------------------

def dump_binary(path: BrownianPath, fh) -> None:
    """Write ``(t, W_t)`` pairs as little-endian float64."""
    np.column_stack([path.times, path.values]).astype("<f8").tofile(fh)


def load_binary(fh) -> BrownianPath:
    a = np.fromfile(fh, dtype="<f8").reshape(-1, 2)
    return BrownianPath(TimeGrid(a[:, 0]), a[:, 1])


def export_pair_csv(pair: CoupledPathPair, fh) -> None:
    wr = csv.writer(fh)
    wr.writerow(["t", "w", "w_tilde"])
    for t, a, b in zip(pair.fine_grid.times, pair.w.values, pair.w_tilde.values):
        wr.writerow([repr(float(t)), repr(float(a)), repr(float(b))])
