"""Time grids, sampled cadlag paths, two-parameter fields, and partitions.

Paths are piecewise constant between grid times: the value on
``[t_k, t_{k+1})`` is ``values[k]``, the left limit at ``t_k`` is
``values[k-1]``, and the jump at ``t_k`` is ``values[k] - values[k-1]``
(zero at ``t_0``).  Two-parameter fields live on grid index pairs
``(i, j)`` with ``i <= j``.

Everything here is immutable after construction and all operations are
pure functions, so concurrent use needs no locking.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

#: Largest grid for which dense (N+1) x (N+1) fields are materialized.
DENSE_FIELD_LIMIT = 4096


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing times t_0 < t_1 < ... < t_N with t_0 = 0."""

    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        object.__setattr__(self, "times", t)
        if t.ndim != 1 or t.shape[0] < 2:
            raise ValueError("grid needs at least two times")
        if t[0] != 0.0:
            raise ValueError("grid must start at 0")
        if not np.all(np.diff(t) > 0):
            raise ValueError("grid times must be strictly increasing")

    @property
    def n(self) -> int:
        return self.times.shape[0] - 1

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def mesh(self) -> float:
        return float(np.max(np.diff(self.times)))

    @classmethod
    def uniform(cls, n: int, horizon: float = 1.0) -> "TimeGrid":
        return cls(np.linspace(0.0, horizon, n + 1))

    def index_of_time(self, t: float) -> int:
        """Largest grid index k with t_k <= t."""
        return int(np.searchsorted(self.times, t, side="right") - 1)

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and np.array_equal(self.times, other.times)

    def __hash__(self):
        return hash(self.times.tobytes())


@dataclass(frozen=True)
class GridPath:
    """A path sampled on a grid; scalar (N+1,) or vector (N+1, d) values."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.ndim not in (1, 2):
            raise ValueError("values must be (N+1,) or (N+1, d)")
        if v.shape[0] != self.grid.n + 1:
            raise ValueError("one value per grid time required")

    @classmethod
    def of(cls, values, grid: TimeGrid | None = None) -> "GridPath":
        values = np.asarray(values, dtype=np.float64)
        if grid is None:
            grid = TimeGrid.uniform(values.shape[0] - 1)
        return cls(grid, values)

    @property
    def is_scalar(self) -> bool:
        return self.values.ndim == 1

    @property
    def dim(self) -> int:
        return 1 if self.is_scalar else self.values.shape[1]

    def increment(self, s: int, t: int) -> np.ndarray | float:
        """delta f over [s, t]; contract violation if s > t."""
        if s > t:
            raise ValueError("increment needs s <= t")
        out = self.values[t] - self.values[s]
        return float(out) if self.is_scalar else out

    def increments(self) -> np.ndarray:
        """One-step differences, shape (N,) or (N, d)."""
        return np.diff(self.values, axis=0)

    def left_limit(self, k: int):
        """Value just before t_k under the piecewise-constant embedding."""
        idx = max(k - 1, 0)
        v = self.values[idx]
        return float(v) if self.is_scalar else v

    def jump(self, k: int):
        if k == 0:
            return 0.0 if self.is_scalar else np.zeros(self.dim)
        return self.increment(k - 1, k)

    def component(self, i: int) -> "GridPath":
        if self.is_scalar:
            if i != 0:
                raise IndexError("scalar path has a single component")
            return self
        return GridPath(self.grid, self.values[:, i])

    # -- serialization ----------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        vals = self.values if not self.is_scalar else self.values[:, None]
        w.writerow(["time"] + [f"x{i}" for i in range(vals.shape[1])])
        for t, row in zip(self.grid.times, vals):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GridPath":
        rows = list(csv.reader(io.StringIO(text)))
        body = rows[1:]
        times = np.array([float(r[0]) for r in body])
        vals = np.array([[float(v) for v in r[1:]] for r in body])
        if vals.shape[1] == 1:
            vals = vals[:, 0]
        return cls(TimeGrid(times), vals)

    def to_json(self) -> str:
        return json.dumps(
            {"grid": self.grid.times.tolist(), "values": np.atleast_2d(self.values.T).T.tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "GridPath":
        obj = json.loads(text)
        vals = np.asarray(obj["values"], dtype=np.float64)
        if vals.ndim == 2 and vals.shape[1] == 1:
            vals = vals[:, 0]
        return cls(TimeGrid(np.asarray(obj["grid"])), vals)


def increment(f: GridPath, s: int, t: int):
    return f.increment(s, t)


@dataclass(frozen=True)
class TwoParamField:
    """Values Pi_{i,j} on grid index pairs i <= j, materialized densely.

    ``entries`` has shape (N+1, N+1) for scalar values, or (N+1, N+1, ...)
    with trailing value axes.  Only the upper triangle is meaningful.
    """

    grid: TimeGrid
    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.float64)
        object.__setattr__(self, "entries", e)
        n1 = self.grid.n + 1
        if e.shape[:2] != (n1, n1):
            raise ValueError("entries must be (N+1, N+1, ...)")

    @property
    def value_shape(self) -> tuple:
        return self.entries.shape[2:]

    @property
    def is_scalar(self) -> bool:
        return self.entries.ndim == 2

    def entry(self, i: int, j: int):
        if i > j:
            raise ValueError("fields are defined on i <= j only")
        v = self.entries[i, j]
        return float(v) if self.is_scalar else v

    def norms(self) -> np.ndarray:
        """|Pi_{i,j}| (Euclidean over value axes), zero below the diagonal."""
        if self.is_scalar:
            out = np.abs(self.entries).copy()
        else:
            flat = self.entries.reshape(self.entries.shape[0], self.entries.shape[1], -1)
            out = np.linalg.norm(flat, axis=-1)
        return out * np.tri(out.shape[0], k=0).T

    @classmethod
    def from_function(cls, grid: TimeGrid, fn) -> "TwoParamField":
        if grid.n + 1 > DENSE_FIELD_LIMIT:
            raise ValueError(
                f"grid too large to materialize densely (N > {DENSE_FIELD_LIMIT - 1}); "
                "use LazyTwoParamField"
            )
        sample = np.asarray(fn(0, 0), dtype=np.float64)
        n1 = grid.n + 1
        entries = np.zeros((n1, n1) + sample.shape)
        for i in range(n1):
            for j in range(i, n1):
                entries[i, j] = fn(i, j)
        return cls(grid, entries)

    @classmethod
    def from_increments(cls, path: GridPath) -> "TwoParamField":
        """The increment field (delta f)_{i,j} = f_j - f_i."""
        v = path.values
        entries = v[np.newaxis, :] - v[:, np.newaxis] if path.is_scalar else (
            v[np.newaxis, :, :] - v[:, np.newaxis, :]
        )
        mask = np.tri(v.shape[0], k=0).T
        entries = entries * (mask if path.is_scalar else mask[:, :, np.newaxis])
        return cls(path.grid, entries)

    def second_increment(self, s: int, t: int, u: int):
        """(delta Pi)_{s,t,u} = Pi_{s,u} - Pi_{s,t} - Pi_{t,u}."""
        if not (s <= t <= u):
            raise ValueError("second_increment needs s <= t <= u")
        v = self.entries[s, u] - self.entries[s, t] - self.entries[t, u]
        return float(v) if self.is_scalar else v

    def to_json(self) -> str:
        n1 = self.grid.n + 1
        entries = {}
        for i in range(n1):
            for j in range(i, n1):
                v = self.entries[i, j]
                entries[f"{i},{j}"] = [float(v)] if self.is_scalar else np.ravel(v).tolist()
        return json.dumps(
            {
                "grid": self.grid.times.tolist(),
                "value_shape": list(self.value_shape),
                "entries": entries,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "TwoParamField":
        obj = json.loads(text)
        grid = TimeGrid(np.asarray(obj["grid"]))
        shape = tuple(obj.get("value_shape", []))
        n1 = grid.n + 1
        entries = np.zeros((n1, n1) + shape)
        for key, val in obj["entries"].items():
            i, j = (int(x) for x in key.split(","))
            entries[i, j] = np.asarray(val).reshape(shape) if shape else val[0]
        return cls(grid, entries)


class LazyTwoParamField:
    """Entry-on-demand field for grids too large to materialize."""

    def __init__(self, grid: TimeGrid, fn):
        self.grid = grid
        self._fn = fn

    def entry(self, i: int, j: int):
        if i > j:
            raise ValueError("fields are defined on i <= j only")
        return self._fn(i, j)

    def materialize(self) -> TwoParamField:
        return TwoParamField.from_function(self.grid, self._fn)


def second_increment(field: TwoParamField, s: int, t: int, u: int):
    return field.second_increment(s, t, u)


@dataclass(frozen=True)
class IndexPartition:
    """Subset of grid indices pi_0 = 0 < pi_1 < ... < pi_M = N."""

    grid: TimeGrid
    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        object.__setattr__(self, "indices", idx)
        if idx[0] != 0 or idx[-1] != self.grid.n:
            raise ValueError("partition must start at 0 and end at N")
        if not np.all(np.diff(idx) > 0):
            raise ValueError("partition indices must be strictly increasing")
        if np.any(idx < 0) or np.any(idx > self.grid.n):
            raise ValueError("partition indices out of range")

    @classmethod
    def full(cls, grid: TimeGrid) -> "IndexPartition":
        return cls(grid, np.arange(grid.n + 1))

    @classmethod
    def of(cls, grid: TimeGrid, indices) -> "IndexPartition":
        return cls(grid, np.asarray(indices, dtype=np.int64))

    @classmethod
    def dyadic(cls, grid: TimeGrid, level: int) -> "IndexPartition":
        """2^level blocks of (near) equal index width; requires 2^level <= N."""
        blocks = 1 << level
        if blocks > grid.n:
            raise ValueError("partition finer than the grid")
        idx = np.unique(np.round(np.linspace(0, grid.n, blocks + 1)).astype(np.int64))
        return cls(grid, idx)

    def mesh(self) -> float:
        t = self.grid.times[self.indices]
        return float(np.max(np.diff(t)))

    def is_subpartition_of(self, other: "IndexPartition") -> bool:
        return bool(np.all(np.isin(self.indices, other.indices)))

    def floor(self, t_index: int) -> int:
        """max{pi_j : pi_j <= t_index}; defined for all 0 <= t_index <= N."""
        if not 0 <= t_index <= self.grid.n:
            raise ValueError("index out of range")
        pos = int(np.searchsorted(self.indices, t_index, side="right") - 1)
        return int(self.indices[pos])

    def floor_all(self) -> np.ndarray:
        """floor(k) for every grid index k, shape (N+1,)."""
        n1 = self.grid.n + 1
        pos = np.searchsorted(self.indices, np.arange(n1), side="right") - 1
        return self.indices[pos]


def floor_index(t_index: int, partition: IndexPartition) -> int:
    return partition.floor(t_index)


def discretize_field(field: TwoParamField, partition: IndexPartition) -> TwoParamField:
    """F^(pi) with entries F_{floor(s), floor(t)}."""
    if partition.grid != field.grid:
        raise ValueError("field and partition must share a grid")
    fl = partition.floor_all()
    entries = field.entries[np.ix_(fl, fl)]
    return TwoParamField(field.grid, entries)


def discretize_path(path: GridPath, partition: IndexPartition) -> GridPath:
    """f^(pi) with values f_{floor(t)}."""
    if partition.grid != path.grid:
        raise ValueError("path and partition must share a grid")
    return GridPath(path.grid, path.values[partition.floor_all()])


@dataclass(frozen=True)
class AdaptedPartitionRule:
    """A stopping rule: ``decide(values_prefix, prev_stop, k)`` says whether
    grid index k is the next partition point.

    Adaptedness means the decision at k may inspect only ``values[: k + 1]``;
    this is testable by perturbing the path strictly after k.
    """

    decide: "callable"
    name: str = "rule"

    def partition(self, path: GridPath) -> IndexPartition:
        stops = [0]
        n = path.grid.n
        for k in range(1, n):
            if self.decide(path.values[: k + 1], stops[-1], k):
                stops.append(k)
        if stops[-1] != n:
            stops.append(n)
        return IndexPartition.of(path.grid, stops)

    @classmethod
    def threshold_hitting(cls, threshold: float) -> "AdaptedPartitionRule":
        """Stop when the move since the last stop reaches the threshold."""

        def decide(prefix, prev_stop, k):
            move = prefix[k] - prefix[prev_stop]
            return float(np.linalg.norm(np.atleast_1d(move))) >= threshold

        return cls(decide, name=f"hit[{threshold}]")


def check_adapted(rule: AdaptedPartitionRule, path_a: GridPath, path_b: GridPath, k: int) -> bool:
    """True if the rule's decisions agree up to index k for two paths that
    agree up to k.  Callers supply paths differing only after k."""
    stops_a, stops_b = [0], [0]
    for i in range(1, k + 1):
        da = rule.decide(path_a.values[: i + 1], stops_a[-1], i)
        db = rule.decide(path_b.values[: i + 1], stops_b[-1], i)
        if da != db:
            return False
        if da:
            stops_a.append(i)
            stops_b.append(i)
    return True
