"""Discrete and partition-indexed paraproducts, their Chen relations, the
stopping-time variation bound, sewing-based Young integration, and mesh
refinement of the left-point integral approximants.

The basic object is the left-point sum

    Pi(F, g)_{s,t} = sum_{s <= j < t} F_{s,j} (g_{j+1} - g_j),

with tensor (outer) products when F and g are vector valued.  Along a
partition pi the sum uses F at floor(t, pi) and clips g's increments to
[t, t'], which makes the coarsening identity
Pi^pi(F, g) = Pi^pi'(F^(pi), g) exact for nested partitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .grids import GridPath, IndexPartition, TimeGrid, TwoParamField, discretize_field
from .variation import vp_field, vp_path


def _outer(a, b):
    return np.multiply.outer(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))


def pi_discrete(f_field: TwoParamField, g: GridPath, s: int, t: int):
    """Pi(F, g)_{s,t} = sum_{s <= j < t} F_{s,j} (g_{j+1} - g_j)."""
    if f_field.grid != g.grid:
        raise ValueError("field and path must share a grid")
    if s > t:
        raise ValueError("need s <= t")
    dg = g.increments()
    acc = np.zeros(f_field.value_shape + (() if g.is_scalar else (g.dim,)))
    for j in range(s, t):
        acc = acc + _outer(f_field.entries[s, j], dg[j])
    return float(acc) if acc.ndim == 0 else acc


def paraproduct_field(f_field: TwoParamField, g: GridPath) -> TwoParamField:
    """Dense field of Pi(F, g)_{s,t} for all pairs, via the kernels."""
    if f_field.grid != g.grid:
        raise ValueError("field and path must share a grid")
    dg = np.atleast_2d(g.increments().T).T  # (N, dg)
    n1 = f_field.grid.n + 1
    fshape = f_field.value_shape
    gdim = dg.shape[1]
    out = np.zeros((n1, n1) + fshape + ((gdim,) if not g.is_scalar else ()))
    f_flat = f_field.entries.reshape((n1, n1, -1))
    out_view = out.reshape((n1, n1, f_flat.shape[2], gdim))
    for a in range(f_flat.shape[2]):
        for b in range(gdim):
            out_view[:, :, a, b] = kernels.paraproduct_field(f_flat[:, :, a], dg[:, b])
    if fshape == () and g.is_scalar:
        out = out_view[:, :, 0, 0]
    return TwoParamField(f_field.grid, out)


def pi_increments(f: GridPath, g: GridPath) -> TwoParamField:
    """Pi(delta f, g): the paraproduct of a path's increments against g."""
    return paraproduct_field(TwoParamField.from_increments(f), g)


def pi_partition(f_field: TwoParamField, g: GridPath, pi: IndexPartition, t: int, t2: int):
    """Pi^pi(F, g)_{t,t'}: left-point sum along pi with increments of g
    clipped to [t, t'] and the base point floored to pi."""
    if f_field.grid != g.grid or pi.grid != g.grid:
        raise ValueError("field, path, and partition must share a grid")
    if t > t2:
        raise ValueError("need t <= t'")
    s0 = pi.floor(t)
    idx = pi.indices
    acc = np.zeros(f_field.value_shape + (() if g.is_scalar else (g.dim,)))
    for pos in range(np.searchsorted(idx, s0), len(idx) - 1):
        pj, pj1 = int(idx[pos]), int(idx[pos + 1])
        if pj >= t2:
            break
        lo, hi = max(pj, t), min(pj1, t2)
        if hi > lo:
            acc = acc + _outer(f_field.entries[s0, pj], g.values[hi] - g.values[lo])
    return float(acc) if acc.ndim == 0 else acc


def pi_partition_path(f_field: TwoParamField, g: GridPath, pi: IndexPartition) -> GridPath:
    """t -> Pi^pi(F, g)_{0,t} for every grid index t, in one O(N) sweep."""
    if f_field.grid != g.grid or pi.grid != g.grid:
        raise ValueError("field, path, and partition must share a grid")
    n = g.grid.n
    idx = pi.indices
    shape = f_field.value_shape + (() if g.is_scalar else (g.dim,))
    out = np.zeros((n + 1,) + shape)
    acc = np.zeros(shape)
    pos = 0
    for t in range(1, n + 1):
        if pos + 1 < len(idx) and idx[pos + 1] <= t - 1:
            # the block ending at t-1 became full; fold it into acc
            pj, pj1 = int(idx[pos]), int(idx[pos + 1])
            acc = acc + _outer(f_field.entries[0, pj], g.values[pj1] - g.values[pj])
            pos += 1
        pj = int(idx[pos])
        partial = _outer(f_field.entries[0, pj], g.values[t] - g.values[pj])
        out[t] = acc + partial
    return GridPath(g.grid, out if shape else out.reshape(n + 1))


def chen_defect(pi_field: TwoParamField, f_field: TwoParamField, g: GridPath, s: int, t: int, u: int):
    """(delta Pi)_{s,t,u} - Pi(delta_s F, g)_{t,u}; identically zero when
    pi_field was built from (F, g) by the left-point sum."""
    if not (s <= t <= u):
        raise ValueError("need s <= t <= u")
    d2 = pi_field.second_increment(s, t, u)
    dg = g.increments()
    cross = np.zeros(np.shape(d2))
    for j in range(t, u):
        cross = cross + _outer(f_field.entries[s, j] - f_field.entries[t, j], dg[j])
    out = np.asarray(d2) - cross
    return float(out) if out.ndim == 0 else out


def chen_max_defect(f_field: TwoParamField, g: GridPath) -> float:
    """Max |chen_defect| over all (s, t, u); vectorized over (s, u)."""
    pp = paraproduct_field(f_field, g)
    dg = np.atleast_2d(g.increments().T).T
    n1 = f_field.grid.n + 1
    e = pp.entries.reshape((n1, n1, -1))
    f_flat = f_field.entries.reshape((n1, n1, -1))
    worst = 0.0
    for t in range(n1):
        # delta Pi for all s <= t, u >= t
        d2 = e[:t + 1, t:] - e[:t + 1, t:t + 1] - e[t:t + 1, t:]
        # cross term: sum_{t <= j < u} (F_{s,j} - F_{t,j}) x dg_j
        diff = f_flat[: t + 1, t:] - f_flat[t : t + 1, t:]  # (s, j-offset, fdim)
        terms = np.einsum("sjf,jg->sjfg", diff[:, :-1, :], dg[t:, :])
        cross = np.concatenate(
            [np.zeros_like(terms[:, :1]), np.cumsum(terms, axis=1)], axis=1
        ).reshape(t + 1, n1 - t, -1)
        worst = max(worst, float(np.max(np.abs(d2 - cross))))
    return worst


# -- stopping-time construction ------------------------------------------


@dataclass(frozen=True)
class StoppingFamily:
    """Per level m, the increasing stop indices tau^(m) (starting at 0)."""

    grid: TimeGrid
    levels: tuple[np.ndarray, ...]
    pi_star: float
    m_max: int

    def level(self, m: int) -> np.ndarray:
        return self.levels[m]


def _running_pair_sup(norms: np.ndarray) -> np.ndarray:
    """P[t] = sup over 0 <= n < n' <= t of |Pi_{n,n'}|."""
    n1 = norms.shape[0]
    out = np.zeros(n1)
    run = 0.0
    for t in range(1, n1):
        run = max(run, float(norms[:t, t].max()))
        out[t] = run
    return out


def _auto_m_max(norms: np.ndarray, pi_star: float, cap: int = 40) -> int:
    iu = np.triu_indices(norms.shape[0], k=1)
    vals = norms[iu]
    nonzero = vals[vals > 0]
    if pi_star == 0.0 or nonzero.size == 0:
        return 0
    m = 0
    while m < cap and 2.0 ** (-m - 1) * pi_star >= nonzero.min():
        m += 1
    return m


def stopping_family(field: TwoParamField, m_max: int | None = None) -> StoppingFamily:
    """Stop whenever the backward sup of |Pi_{., t}| since the last stop
    reaches 2^{-m-1} of the running two-parameter sup Pi*_t.

    Levels run to the smallest m at which the threshold falls below the
    smallest nonzero entry (capped at 40); beyond that every further level
    stops at the same points and adds nothing.
    """
    norms = field.norms()
    n = field.grid.n
    pi_star_t = _running_pair_sup(norms)
    pi_star = float(pi_star_t[-1])
    if m_max is None:
        m_max = _auto_m_max(norms, pi_star)
    levels = []
    for m in range(m_max + 1):
        thr = 2.0 ** (-m - 1)
        stops = [0]
        t = stops[-1] + 1
        while t <= n:
            tau = stops[-1]
            if pi_star_t[t] > 0 and float(norms[tau:t, t].max()) >= thr * pi_star_t[t]:
                stops.append(t)
            t += 1
        levels.append(np.asarray(stops, dtype=np.int64))
    return StoppingFamily(field.grid, tuple(levels), pi_star, m_max)


def check_stopping_minimality(field: TwoParamField, family: StoppingFamily) -> bool:
    """Recompute each level by scan and compare (the defining minimality)."""
    fresh = stopping_family(field, m_max=family.m_max)
    return all(np.array_equal(a, b) for a, b in zip(fresh.levels, family.levels))


def pathwise_variation_bound(
    field: TwoParamField, rho: float, r: float, m_max: int | None = None
) -> tuple[float, float]:
    """Both sides of the pathwise chain-sum bound

        sup over chains of sum |Pi|^r
          <= (Pi*)^r / (1 - 2^{-r})
             + 2^rho sum_m (2^{-m} Pi*)^{r-rho} sum_j (block sup at tau^(m)_j)^rho.

    Requires 0 < rho < r.  The m-sum is finite because on a finite grid
    every nonzero chain entry falls in a bucket with m <= m_max.
    """
    if not 0 < rho < r < math.inf:
        raise ValueError("need 0 < rho < r < infinity")
    norms = field.norms()
    lhs = kernels.pvar_sum_matrix(norms, r)
    family = stopping_family(field, m_max=m_max)
    pi_star = family.pi_star
    if pi_star == 0.0:
        return 0.0, 0.0
    rhs = pi_star**r / (1.0 - 2.0**-r)
    for m, stops in enumerate(family.levels):
        block = 0.0
        for a, b in zip(stops[:-1], stops[1:]):
            block += float(norms[a:b, b].max()) ** rho
        rhs += 2.0**rho * (2.0**-m * pi_star) ** (r - rho) * block
    return float(lhs), float(rhs)


# -- structural decomposition and sewing ----------------------------------


@dataclass(frozen=True)
class StructuralDecomposition:
    """Terms (F^i, F~^i) with F_{s,u} - F_{t,u} = sum_i F^i_{s,t} F~^i_{t,u}."""

    terms: tuple[tuple[TwoParamField, TwoParamField], ...]

    def defect(self, field: TwoParamField, s: int, t: int, u: int):
        acc = field.entries[s, u] - field.entries[t, u]
        for fi, fti in self.terms:
            acc = acc - fi.entries[s, t] * fti.entries[t, u]
        return float(acc) if np.ndim(acc) == 0 else acc

    def max_defect(self, field: TwoParamField) -> float:
        n1 = field.grid.n + 1
        worst = 0.0
        for t in range(n1):
            acc = field.entries[: t + 1, t:] - field.entries[t, t:][np.newaxis, :]
            for fi, fti in self.terms:
                acc = acc - np.multiply.outer(fi.entries[: t + 1, t], fti.entries[t, t:])
            worst = max(worst, float(np.max(np.abs(acc))))
        return worst

    def discretize(self, pi: IndexPartition) -> "StructuralDecomposition":
        return StructuralDecomposition(
            tuple((discretize_field(a, pi), discretize_field(b, pi)) for a, b in self.terms)
        )

    @classmethod
    def of_increments(cls, f: GridPath) -> "StructuralDecomposition":
        """For F = delta f: F_{s,u} - F_{t,u} = delta f_{s,t} * 1."""
        ones = TwoParamField(f.grid, np.ones((f.grid.n + 1, f.grid.n + 1)))
        return cls(((TwoParamField.from_increments(f), ones),))


@dataclass(frozen=True)
class Control:
    """A superadditive nonnegative function on grid pairs."""

    grid: TimeGrid
    values: np.ndarray  # (N+1, N+1), upper triangle

    def __call__(self, s: int, t: int) -> float:
        return float(self.values[s, t])

    def superadditivity_margin(self) -> float:
        """max over s <= t <= u of w(s,t) + w(t,u) - w(s,u); <= 0 if control."""
        n1 = self.values.shape[0]
        worst = -math.inf
        for t in range(n1):
            gap = self.values[: t + 1, t][:, None] + self.values[t, t:][None, :] - self.values[: t + 1, t:]
            worst = max(worst, float(gap.max()))
        return worst

    @classmethod
    def from_vp(cls, path_or_field, p: float, grid: TimeGrid | None = None) -> "Control":
        """w(s, t) = (V^p restricted to [s, t])^p; superadditive in (s, t)."""
        if isinstance(path_or_field, GridPath):
            grid = path_or_field.grid
            vp = lambda s, t: vp_path(path_or_field, p, window=(s, t))
        else:
            grid = path_or_field.grid
            vp = lambda s, t: vp_field(path_or_field, p, window=(s, t))
        n1 = grid.n + 1
        vals = np.zeros((n1, n1))
        for s in range(n1):
            for t in range(s + 1, n1):
                vals[s, t] = vp(s, t) ** p
        return cls(grid, vals)


@dataclass(frozen=True)
class YoungResult:
    """Left-point integral field plus the sewing-bound ingredients."""

    field: TwoParamField
    rho: float | None
    lhs: float | None  # V^rho of the field
    rhs: float | None  # sum_i V^{p_i1} F^i * V^{p_i0} Pi(F~^i, g)
    ratio: float | None


def young_integral(f: GridPath, g: GridPath, p1: float | None = None, p0: float | None = None) -> YoungResult:
    """The Young integral of f against g at grid resolution: the finest
    left-point sum Pi(delta f, g), with the sewing inequality data
    (V^rho of the integral vs V^{p1} f * V^{p0} g, 1/rho = 1/p1 + 1/p0)
    when exponents are supplied."""
    field = pi_increments(f, g)
    if p1 is None or p0 is None:
        return YoungResult(field, None, None, None, None)
    rho = 1.0 / (1.0 / p1 + 1.0 / p0)
    lhs = vp_field(field, rho)
    rhs = vp_path(f, p1) * vp_path(g, p0)
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    return YoungResult(field, rho, lhs, rhs, ratio)


@dataclass(frozen=True)
class RefinementReport:
    """Left-point approximants along a partition family, with Cauchy data."""

    paths: tuple[GridPath, ...]
    successive_sup: tuple[float, ...]
    distance_to_finest: tuple[float, ...]


def ito_refinement(f: GridPath, g: GridPath, partitions) -> RefinementReport:
    """Pi^{pi_k}(delta f, g)_{0, .} for each pi_k, plus sup distances between
    consecutive levels and to the finest-grid value (the exact limit here)."""
    f_field = TwoParamField.from_increments(f)
    paths = [pi_partition_path(f_field, g, pi) for pi in partitions]
    finest = pi_partition_path(f_field, g, IndexPartition.full(g.grid))
    succ = tuple(
        float(np.max(np.abs(a.values - b.values))) for a, b in zip(paths[:-1], paths[1:])
    )
    dist = tuple(float(np.max(np.abs(p.values - finest.values))) for p in paths)
    return RefinementReport(tuple(paths), succ, dist)
