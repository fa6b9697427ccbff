"""Exact probability on finite filtered spaces.

A space is a finite outcome set with strictly positive probabilities and a
refining sequence of partitions P_0, ..., P_T (P_0 trivial).  Conditional
expectations, martingale checks, maximal and square functions, L^q norms,
and the predictable/bounded-variation martingale decomposition are all
computed exactly, with no sampling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

MARTINGALE_TOL = 1e-10


@dataclass(frozen=True)
class FiniteFilteredSpace:
    """Outcomes 0..M-1 with probabilities and a refining filtration.

    ``filtration[n]`` is a tuple of blocks (tuples of outcome indices)
    partitioning the outcome set; ``labels[n, w]`` is the block id of
    outcome w at time n.
    """

    probs: np.ndarray
    filtration: tuple[tuple[tuple[int, ...], ...], ...]

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", p)
        filt = tuple(tuple(tuple(int(i) for i in b) for b in part) for part in self.filtration)
        object.__setattr__(self, "filtration", filt)
        if np.any(p <= 0):
            raise ValueError("probabilities must be strictly positive")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1")
        m = p.shape[0]
        labels = np.zeros((len(filt), m), dtype=np.int64)
        for n, part in enumerate(filt):
            seen = sorted(i for b in part for i in b)
            if seen != list(range(m)):
                raise ValueError(f"level {n} is not a partition of the outcomes")
            for bid, block in enumerate(part):
                labels[n, list(block)] = bid
        if len(filt[0]) != 1:
            raise ValueError("P_0 must be the trivial partition")
        for n in range(len(filt) - 1):
            # refinement: outcomes sharing a block at n+1 share one at n
            coarse = labels[n]
            fine = labels[n + 1]
            for bid in range(fine.max() + 1):
                members = np.where(fine == bid)[0]
                if len(np.unique(coarse[members])) > 1:
                    raise ValueError(f"P_{n + 1} does not refine P_{n}")
        object.__setattr__(self, "_labels", labels)

    @property
    def n_outcomes(self) -> int:
        return self.probs.shape[0]

    @property
    def horizon(self) -> int:
        return len(self.filtration) - 1

    def labels(self, n: int) -> np.ndarray:
        return self._labels[n]

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(
            {
                "probs": self.probs.tolist(),
                "filtration": [[list(b) for b in part] for part in self.filtration],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "FiniteFilteredSpace":
        obj = json.loads(text)
        return cls(np.asarray(obj["probs"]), tuple(tuple(tuple(b) for b in p) for p in obj["filtration"]))

    # -- constructions -----------------------------------------------------

    @classmethod
    def walk(cls, steps: int) -> "FiniteFilteredSpace":
        """Uniform space of 2^steps sign sequences with the natural filtration."""
        m = 1 << steps
        filtration = []
        for n in range(steps + 1):
            # outcomes share a block iff their first n signs agree
            width = 1 << (steps - n)
            blocks = tuple(tuple(range(b * width, (b + 1) * width)) for b in range(1 << n))
            filtration.append(blocks)
        return cls(np.full(m, 1.0 / m), tuple(filtration))

    @classmethod
    def random(cls, rng: np.random.Generator, n_outcomes: int, horizon: int) -> "FiniteFilteredSpace":
        """Random refining filtration with strictly positive dyadic-free probs."""
        probs = rng.uniform(0.2, 1.0, size=n_outcomes)
        probs /= probs.sum()
        blocks = [tuple(range(n_outcomes))]
        filtration = [tuple(blocks)]
        for _ in range(horizon):
            new_blocks = []
            for block in blocks:
                if len(block) > 1 and rng.random() < 0.8:
                    cut = int(rng.integers(1, len(block)))
                    perm = [int(i) for i in rng.permutation(list(block))]
                    new_blocks.append(tuple(sorted(perm[:cut])))
                    new_blocks.append(tuple(sorted(perm[cut:])))
                else:
                    new_blocks.append(block)
            blocks = new_blocks
            filtration.append(tuple(blocks))
        return cls(probs, tuple(filtration))


def walk_process(space: FiniteFilteredSpace) -> "AdaptedDiscreteProcess":
    """The +/-1 walk on a ``FiniteFilteredSpace.walk`` space."""
    steps = space.horizon
    m = space.n_outcomes
    values = np.zeros((steps + 1, m))
    for w in range(m):
        signs = [1.0 if (w >> (steps - 1 - n)) & 1 == 0 else -1.0 for n in range(steps)]
        values[1:, w] = np.cumsum(signs)
    return AdaptedDiscreteProcess(space, values)


@dataclass(frozen=True)
class AdaptedDiscreteProcess:
    """values[n, w] (or values[n, w, :] for vector entries), adapted."""

    space: FiniteFilteredSpace
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.shape[0] != self.space.horizon + 1 or v.shape[1] != self.space.n_outcomes:
            raise ValueError("values must be (T+1, M, ...)")
        for n in range(v.shape[0]):
            if not _is_measurable(self.space, n, v[n]):
                raise ValueError(f"values at time {n} are not P_{n}-measurable")

    @property
    def horizon(self) -> int:
        return self.values.shape[0] - 1

    def differences(self) -> np.ndarray:
        return np.diff(self.values, axis=0)


def _is_measurable(space: FiniteFilteredSpace, n: int, x: np.ndarray, tol: float = 1e-9) -> bool:
    labels = space.labels(n)
    for bid in range(labels.max() + 1):
        members = x[labels == bid]
        if np.max(np.abs(members - members[0])) > tol:
            return False
    return True


def condexp(space: FiniteFilteredSpace, n: int, x: np.ndarray) -> np.ndarray:
    """E[X | F_n] as an outcome-indexed array (constant on P_n blocks)."""
    x = np.asarray(x, dtype=np.float64)
    labels = space.labels(n)
    nb = labels.max() + 1
    mass = np.bincount(labels, weights=space.probs, minlength=nb)
    if x.ndim == 1:
        num = np.bincount(labels, weights=space.probs * x, minlength=nb)
        return (num / mass)[labels]
    out = np.empty_like(x)
    for k in range(x.shape[1]):
        num = np.bincount(labels, weights=space.probs * x[:, k], minlength=nb)
        out[:, k] = (num / mass)[labels]
    return out


def martingale_from_terminal(space: FiniteFilteredSpace, z: np.ndarray) -> AdaptedDiscreteProcess:
    """f_n = E[Z | F_n]; a martingale by the tower property."""
    values = np.stack([condexp(space, n, z) for n in range(space.horizon + 1)])
    return AdaptedDiscreteProcess(space, values)


def is_martingale(space: FiniteFilteredSpace, f: AdaptedDiscreteProcess, tol: float = MARTINGALE_TOL):
    """(is_martingale, max defect of E[f_{n+1}|F_n] - f_n)."""
    defect = 0.0
    for n in range(f.horizon):
        d = condexp(space, n, f.values[n + 1]) - f.values[n]
        defect = max(defect, float(np.max(np.abs(d))))
    return defect <= tol, defect


def lq_norm(space: FiniteFilteredSpace, x: np.ndarray, q: float) -> float:
    """(sum_w p_w |X_w|^q)^{1/q}; q = inf gives the max over outcomes."""
    if q <= 0:
        raise ValueError("q must be positive")
    x = np.asarray(x, dtype=np.float64)
    mag = np.abs(x) if x.ndim == 1 else np.linalg.norm(x, axis=-1)
    if np.isinf(q):
        return float(mag.max())
    return float(np.sum(space.probs * mag**q) ** (1.0 / q))


@dataclass(frozen=True)
class MaxSquare:
    """Maximal and square functions of a process, with stopped variants."""

    running_max: np.ndarray  # M_t f, shape (T+1, M)
    running_square: np.ndarray  # S_t f, shape (T+1, M)
    diff_norms: np.ndarray  # |df_n|, shape (T, M)

    @property
    def max(self) -> np.ndarray:
        return self.running_max[-1]

    @property
    def square(self) -> np.ndarray:
        return self.running_square[-1]

    def windowed_square(self, s: int, t: int) -> np.ndarray:
        """Sg_{s,t} = (sum_{s < j <= t} |dg_j|^2)^{1/2} per outcome."""
        if s > t:
            raise ValueError("need s <= t")
        return np.sqrt(np.sum(self.diff_norms[s:t] ** 2, axis=0))


def max_and_square(f: AdaptedDiscreteProcess) -> MaxSquare:
    vals = f.values
    mag = np.abs(vals) if vals.ndim == 2 else np.linalg.norm(vals, axis=-1)
    running_max = np.maximum.accumulate(mag, axis=0)
    d = f.differences()
    dmag = np.abs(d) if d.ndim == 2 else np.linalg.norm(d, axis=-1)
    sq = np.zeros_like(mag)
    sq[1:] = np.sqrt(np.cumsum(dmag**2, axis=0))
    return MaxSquare(running_max, sq, dmag)


@dataclass(frozen=True)
class DavisDecomposition:
    """f = pred + bv with certified jump bounds.

    ``predictable_margin`` is max over (n, w) of |d pred_n| - 4 sup_{k<n}|df_k|
    (nonpositive when the certified bound holds).  ``bv_bounds`` maps q to
    (lhs, rhs) for  || sum_n |d bv_n| ||_q <= 2(q+1) || sup_n |df_n| ||_q.
    """

    pred: AdaptedDiscreteProcess
    bv: AdaptedDiscreteProcess
    predictable_margin: float
    bv_bounds: dict


def davis_decompose(
    space: FiniteFilteredSpace,
    f: AdaptedDiscreteProcess,
    qs: tuple[float, ...] = (1.0, 2.0, 4.0),
) -> DavisDecomposition:
    """Split a martingale (f_0 = 0) into a part with predictable jump
    majorants and a part of integrable total variation.

    Construction: with lam*_n = max_{k <= n} |df_k| (lam*_0 = 0), keep the
    small jumps h_n = df_n 1{|df_n| <= 2 lam*_{n-1}} and compensate:
    d pred_n = h_n - E[h_n | F_{n-1}],  d bv_n = df_n - d pred_n.
    This yields |d pred_n| <= 4 sup_{k<n} |df_k| pathwise and the total
    variation bound with constant 2(q+1).
    """
    ok, defect = is_martingale(space, f)
    if not ok:
        raise ValueError(f"input is not a martingale (defect {defect:.2e})")
    if np.max(np.abs(f.values[0])) > 1e-14:
        raise ValueError("martingale must start at 0")
    d = f.differences()
    dmag = np.abs(d) if d.ndim == 2 else np.linalg.norm(d, axis=-1)
    t_steps, m = dmag.shape

    lam_prev = np.zeros(m)
    d_pred = np.zeros_like(d)
    for n in range(t_steps):
        keep = (dmag[n] <= 2.0 * lam_prev).astype(np.float64)
        h = d[n] * (keep if d.ndim == 2 else keep[:, None])
        d_pred[n] = h - condexp(space, n, h)
        lam_prev = np.maximum(lam_prev, dmag[n])
    d_bv = d - d_pred

    zeros = np.zeros_like(f.values[:1])
    pred = AdaptedDiscreteProcess(space, np.concatenate([zeros, zeros[0] + np.cumsum(d_pred, axis=0)]))
    bv = AdaptedDiscreteProcess(space, np.concatenate([zeros, zeros[0] + np.cumsum(d_bv, axis=0)]))

    pred_mag = np.abs(d_pred) if d.ndim == 2 else np.linalg.norm(d_pred, axis=-1)
    bv_mag = np.abs(d_bv) if d.ndim == 2 else np.linalg.norm(d_bv, axis=-1)
    lam_before = np.vstack([np.zeros((1, m)), np.maximum.accumulate(dmag, axis=0)[:-1]])
    predictable_margin = float(np.max(pred_mag - 4.0 * lam_before))

    sup_jump = dmag.max(axis=0)
    total_bv = bv_mag.sum(axis=0)
    bounds = {}
    for q in qs:
        bounds[q] = (lq_norm(space, total_bv, q), 2.0 * (q + 1.0) * lq_norm(space, sup_jump, q))
    return DavisDecomposition(pred, bv, predictable_margin, bounds)


def lq_ellr_norm(space: FiniteFilteredSpace, x: np.ndarray, q: float, r: float) -> float:
    """|| ell^r over the trailing axis of x ||_{L^q}."""
    x = np.asarray(x, dtype=np.float64)
    inner = np.linalg.norm(x, ord=r, axis=-1) if not np.isinf(r) else np.abs(x).max(axis=-1)
    return lq_norm(space, inner, q)
