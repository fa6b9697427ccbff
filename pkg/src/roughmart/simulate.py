"""Reproducible generators for the driving processes used in experiments.

Every generator is a deterministic function of (parameters, SeedSpec);
per-path streams are derived from the master seed and the path index, so
ensembles are identical no matter how the work is scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import GridPath, TimeGrid

CHOLESKY_LIMIT = 2048


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus a stream id; spawns one independent RNG per path."""

    master: int
    stream: int = 0

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.master, spawn_key=(self.stream,)))

    def child(self, index: int) -> "SeedSpec":
        return SeedSpec(self.master, self.stream * 1_000_003 + index)


@dataclass(frozen=True)
class FbmParams:
    hurst: float
    grid: TimeGrid

    def __post_init__(self):
        if not 0.0 < self.hurst < 1.0:
            raise ValueError("Hurst parameter must lie in (0, 1)")


def brownian(grid: TimeGrid, d: int, seed: SeedSpec) -> GridPath:
    """Standard Brownian path: independent N(0, dt) increments per component."""
    rng = seed.rng()
    dt = np.diff(grid.times)
    incs = rng.standard_normal((grid.n, d)) * np.sqrt(dt)[:, None]
    vals = np.vstack([np.zeros((1, d)), np.cumsum(incs, axis=0)])
    return GridPath(grid, vals[:, 0] if d == 1 else vals)


def random_walk(grid: TimeGrid, seed: SeedSpec, scale: float | None = None) -> GridPath:
    """Scaled +/-1 walk; default scale sqrt(dt) matches Brownian variance."""
    rng = seed.rng()
    dt = np.diff(grid.times)
    steps = rng.choice([-1.0, 1.0], size=grid.n) * (np.sqrt(dt) if scale is None else scale)
    return GridPath(grid, np.concatenate([[0.0], np.cumsum(steps)]))


def fbm_covariance(hurst: float, times: np.ndarray) -> np.ndarray:
    t = times[:, None]
    s = times[None, :]
    return 0.5 * (t ** (2 * hurst) + s ** (2 * hurst) - np.abs(t - s) ** (2 * hurst))


def fbm_cholesky(params: FbmParams, seed: SeedSpec) -> GridPath:
    """Fractional Brownian path from the exact covariance factorization."""
    grid = params.grid
    if grid.n > CHOLESKY_LIMIT:
        raise ValueError(f"Cholesky sampling limited to N <= {CHOLESKY_LIMIT}")
    cov = fbm_covariance(params.hurst, grid.times[1:])
    try:
        chol = np.linalg.cholesky(cov + 1e-14 * np.eye(cov.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise ValueError("fBm covariance factorization failed") from exc
    z = seed.rng().standard_normal(grid.n)
    return GridPath(grid, np.concatenate([[0.0], chol @ z]))


def volterra_kernel_weights(hurst: float, times: np.ndarray) -> np.ndarray:
    """Lower-triangular weights w[k, j] = (t_k - t_j)^{H - 1/2} for j < k.

    Left-point distances keep the singular kernel finite; the j = k term
    is omitted, matching left-limit evaluation of the moving average.
    """
    n1 = times.shape[0]
    w = np.zeros((n1, n1 - 1))
    for k in range(1, n1):
        w[k, :k] = (times[k] - times[:k]) ** (hurst - 0.5)
    return w


def correlated_fbm_bm(hurst: float, grid: TimeGrid, seed: SeedSpec) -> tuple[GridPath, GridPath]:
    """(B^H, B) with B^H the discretized moving average of B's increments,
    B^H_{t_k} = sum_{j<k} (t_k - t_j)^{H-1/2} dB_j; genuinely correlated."""
    if grid.n > CHOLESKY_LIMIT:
        raise ValueError(f"kernel construction limited to N <= {CHOLESKY_LIMIT}")
    rng = seed.rng()
    dt = np.diff(grid.times)
    db = rng.standard_normal(grid.n) * np.sqrt(dt)
    b = GridPath(grid, np.concatenate([[0.0], np.cumsum(db)]))
    w = volterra_kernel_weights(hurst, grid.times)
    bh = GridPath(grid, w @ db)
    return bh, b


@dataclass(frozen=True)
class JumpLaw:
    """Mean-zero jump size distribution for compound Poisson sampling."""

    kind: str = "normal"  # normal | uniform | rademacher
    scale: float = 1.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "normal":
            return self.scale * rng.standard_normal(size)
        if self.kind == "uniform":
            return rng.uniform(-self.scale, self.scale, size)
        if self.kind == "rademacher":
            return self.scale * rng.choice([-1.0, 1.0], size=size)
        raise ValueError(f"unknown jump law {self.kind!r}")


def compound_poisson_martingale(
    rate: float, law: JumpLaw, grid: TimeGrid, seed: SeedSpec
) -> GridPath:
    """Compound Poisson with mean-zero jumps, landed on grid times; the
    compensator vanishes, so the sampled path is already a martingale."""
    rng = seed.rng()
    dt = np.diff(grid.times)
    counts = rng.poisson(rate * dt)
    jumps = np.zeros(grid.n)
    total = int(counts.sum())
    if total:
        sizes = law.sample(rng, total)
        interval_ids = np.repeat(np.arange(grid.n), counts)
        jumps = np.bincount(interval_ids, weights=sizes, minlength=grid.n)
    return GridPath(grid, np.concatenate([[0.0], np.cumsum(jumps)]))
