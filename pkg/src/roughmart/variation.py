"""Variation functionals: V^p over chains, Holder norms, dyadic block
suprema, and block-sup ell^r functionals, plus a brute-force oracle.

For a path the supremum defining V^p runs over strictly increasing index
subsequences; for a general two-parameter field the same chains are scored
by the entry magnitudes |Pi_{u_{l-1}, u_l}|.  For p <= 1 and *increment*
fields the finest chain is optimal (x -> x^p is subadditive), so a closed
form is used; for general fields that shortcut is unsound and the dynamic
program runs for every finite p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .grids import GridPath, IndexPartition, TwoParamField

ORACLE_LIMIT = 14


def _path_values(f) -> np.ndarray:
    if isinstance(f, GridPath):
        return f.values
    return np.asarray(f, dtype=np.float64)


def _window(values: np.ndarray, window) -> np.ndarray:
    if window is None:
        return values
    a, b = window
    return values[a : b + 1]


def vp_path(f, p: float, window: tuple[int, int] | None = None) -> float:
    """Exact p-variation of a sampled path (supremum over index chains).

    ``window=(a, b)`` restricts to the index range [a, b].
    """
    if p <= 0:
        raise ValueError("p must be positive")
    x = _window(_path_values(f), window)
    if x.shape[0] <= 1:
        return 0.0
    if math.isinf(p):
        return kernels.pinf_scalar(x) if x.ndim == 1 else kernels.pinf_vector(x)
    if p <= 1.0:
        steps = np.abs(np.diff(x)) if x.ndim == 1 else np.linalg.norm(np.diff(x, axis=0), axis=1)
        return float(np.sum(steps**p) ** (1.0 / p))
    s = kernels.pvar_sum_scalar(x, p) if x.ndim == 1 else kernels.pvar_sum_vector(x, p)
    return float(s ** (1.0 / p))


def vp_field(
    field: TwoParamField,
    p: float,
    window: tuple[int, int] | None = None,
    is_increment: bool = False,
) -> float:
    """p-variation of a two-parameter field over strict index chains.

    ``is_increment=True`` enables the finest-chain closed form for p <= 1,
    which is valid only when the field is of increment form.
    """
    if p <= 0:
        raise ValueError("p must be positive")
    norms = field.norms()
    if window is not None:
        a, b = window
        norms = norms[a : b + 1, a : b + 1]
    if norms.shape[0] <= 1:
        return 0.0
    if math.isinf(p):
        return kernels.pinf_matrix(norms)
    if is_increment and p <= 1.0:
        steps = np.diagonal(norms, offset=1)
        return float(np.sum(steps**p) ** (1.0 / p))
    return float(kernels.pvar_sum_matrix(norms, p) ** (1.0 / p))


def _oracle_from_dist(n1: int, dist, p: float) -> float:
    best = 0.0
    for mask in range(1, 1 << n1):
        if mask & (mask - 1) == 0:
            continue  # single point
        chain = [i for i in range(n1) if mask >> i & 1]
        if math.isinf(p):
            v = max(dist(a, b) for a, b in zip(chain, chain[1:]))
        else:
            v = sum(dist(a, b) ** p for a, b in zip(chain, chain[1:]))
        best = max(best, v)
    return best if math.isinf(p) else best ** (1.0 / p)


def vp_oracle(obj, p: float) -> float:
    """Ground truth by exhaustive chain enumeration; N <= 14 only."""
    if p <= 0:
        raise ValueError("p must be positive")
    if isinstance(obj, TwoParamField):
        norms = obj.norms()
        n1 = norms.shape[0]
        dist = lambda a, b: norms[a, b]
    else:
        x = _path_values(obj)
        n1 = x.shape[0]
        if x.ndim == 1:
            dist = lambda a, b: abs(x[b] - x[a])
        else:
            dist = lambda a, b: float(np.linalg.norm(x[b] - x[a]))
    if n1 - 1 > ORACLE_LIMIT:
        raise ValueError(f"oracle limited to N <= {ORACLE_LIMIT}")
    return float(_oracle_from_dist(n1, dist, p))


def holder_norm(field: TwoParamField, gamma: float) -> float:
    """max over grid pairs t < t' of |Pi_{t,t'}| / (t'-t)^gamma."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    norms = field.norms()
    t = field.grid.times
    gaps = t[np.newaxis, :] - t[:, np.newaxis]
    iu = np.triu_indices(norms.shape[0], k=1)
    return float(np.max(norms[iu] / gaps[iu] ** gamma))


def _indices_of_times(grid, points: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(grid.times, points)
    idx = np.clip(idx, 0, grid.n)
    if not np.allclose(grid.times[idx], points, atol=1e-12):
        raise ValueError("grid lacks the required dyadic points")
    return idx


def _block_sup(norms: np.ndarray, stops: np.ndarray) -> float:
    best = 0.0
    for a, b in zip(stops[:-1], stops[1:]):
        if b > a:
            best = max(best, float(norms[a : b + 1, a : b + 1].max()))
    return best


def dyadic_block_sup(field: TwoParamField, n: int) -> tuple[float, float]:
    """Per-block suprema (K_n, K~_n) over the level-n dyadic partition of
    [0, 1] and its half-step shift {0, 1} + shifted interior points."""
    h = 2.0**-n
    plain = np.arange(0.0, 1.0 + h / 2, h)
    interior = np.arange(h / 2, 1.0, h)
    shifted = np.unique(np.concatenate(([0.0], interior, [1.0])))
    idx_plain = _indices_of_times(field.grid, plain)
    idx_shift = _indices_of_times(field.grid, shifted)
    norms = field.norms()
    return _block_sup(norms, idx_plain), _block_sup(norms, idx_shift)


def ell_r_block_norm(field: TwoParamField, tau: IndexPartition, r: float) -> float:
    """(sum_j (sup_{tau_{j-1} <= t < t' <= tau_j} |Pi_{t,t'}|)^r)^{1/r}."""
    if r <= 0:
        raise ValueError("r must be positive")
    if tau.grid != field.grid:
        raise ValueError("field and partition must share a grid")
    norms = field.norms()
    sups = []
    for a, b in zip(tau.indices[:-1], tau.indices[1:]):
        block = np.triu(norms[a : b + 1, a : b + 1], k=1)
        sups.append(float(block.max()) if b > a else 0.0)
    sups = np.asarray(sups)
    if math.isinf(r):
        return float(sups.max())
    return float(np.sum(sups**r) ** (1.0 / r))


@dataclass(frozen=True)
class VariationExponents:
    """Exponent bundle for variation estimates; all entries positive."""

    p: float = math.inf
    r: float = math.inf
    rho: float | None = None
    p1: float | None = None
    p1_hat: float | None = None
    p_i0: tuple[float, ...] = ()
    p_i1: tuple[float, ...] = ()

    def __post_init__(self):
        for name in ("p", "r", "rho", "p1", "p1_hat"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"exponent {name} must be positive")
        for fam in (self.p_i0, self.p_i1):
            if any(v <= 0 for v in fam):
                raise ValueError("exponent families must be positive")

    def check_vr_condition(self) -> None:
        """Require 1/r < 1/p1 + 1/2 (and per-term 1/r < 1/p_i0 + 1/p_i1)."""
        if self.p1 is None:
            raise ValueError("p1 required for the variation condition")
        if not 1.0 / self.r < 1.0 / self.p1 + 0.5:
            raise ValueError(f"need 1/r < 1/p1 + 1/2, got r={self.r}, p1={self.p1}")
        for a, b in zip(self.p_i0, self.p_i1):
            if not 1.0 / self.r < 1.0 / a + 1.0 / b:
                raise ValueError("need 1/r < 1/p_i0 + 1/p_i1 for every i")


@dataclass(frozen=True)
class HolderExponents:
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    alpha_i: tuple[float, ...] = ()
    beta_i: tuple[float, ...] = ()

    def __post_init__(self):
        vals = (self.alpha, self.beta, self.gamma) + self.alpha_i + self.beta_i
        if any(v < 0 for v in vals):
            raise ValueError("Holder exponents must be nonnegative")

    def check_sum_condition(self) -> None:
        """Require gamma < alpha + beta (and gamma < alpha_i + beta_i)."""
        if not self.gamma < self.alpha + self.beta:
            raise ValueError("need gamma < alpha + beta")
        for a, b in zip(self.alpha_i, self.beta_i):
            if not self.gamma < a + b:
                raise ValueError("need gamma < alpha_i + beta_i for every i")
