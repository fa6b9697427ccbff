"""Labeled rooted trees and forests, admissible cuts and the coproduct,
iterated-sum lifts of discrete paths, and branched paraproducts.

Trees are unordered: children are stored sorted by a canonical encoding,
and forests are sorted multisets of trees, so multiset identities (the
coproduct, its coassociativity) are exact term-by-term comparisons.
Forest literals use a bracket syntax: ``a[b,c]`` is the tree with root
label a and children b, c; whitespace separates the trees of a forest.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grids import GridPath, TwoParamField
from .paraproduct import paraproduct_field


@dataclass(frozen=True)
class LabeledTree:
    label: str
    children: tuple["LabeledTree", ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(sorted(self.children, key=lambda c: c.encode())))

    def encode(self) -> str:
        if not self.children:
            return self.label
        return self.label + "[" + ",".join(c.encode() for c in self.children) + "]"

    @property
    def degree(self) -> int:
        return 1 + sum(c.degree for c in self.children)

    def __repr__(self):
        return f"Tree({self.encode()})"


@dataclass(frozen=True)
class Forest:
    trees: tuple[LabeledTree, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(sorted(self.trees, key=lambda t: t.encode())))

    @property
    def is_unit(self) -> bool:
        return not self.trees

    @property
    def degree(self) -> int:
        return sum(t.degree for t in self.trees)

    def encode(self) -> str:
        return " ".join(t.encode() for t in self.trees) if self.trees else "1"

    def __mul__(self, other: "Forest") -> "Forest":
        return Forest(self.trees + other.trees)

    def __repr__(self):
        return f"Forest({self.encode()})"


UNIT = Forest()


def tree(label: str, *children: LabeledTree) -> LabeledTree:
    return LabeledTree(label, tuple(children))


def single(label: str) -> Forest:
    return Forest((tree(label),))


# -- literals ---------------------------------------------------------------


def _parse_tree(text: str, pos: int) -> tuple[LabeledTree, int]:
    start = pos
    while pos < len(text) and text[pos] not in "[],":
        pos += 1
    label = text[start:pos].strip()
    if not label:
        raise ValueError(f"empty label at position {start} in forest literal")
    children = []
    if pos < len(text) and text[pos] == "[":
        pos += 1
        while True:
            child, pos = _parse_tree(text, pos)
            children.append(child)
            if pos >= len(text):
                raise ValueError("unterminated bracket in forest literal")
            if text[pos] == ",":
                pos += 1
                continue
            if text[pos] == "]":
                pos += 1
                break
            raise ValueError(f"unexpected character {text[pos]!r} in forest literal")
    return LabeledTree(label, tuple(children)), pos


def parse_tree(text: str) -> LabeledTree:
    t, pos = _parse_tree(text.strip(), 0)
    if pos != len(text.strip()):
        raise ValueError("trailing characters in tree literal")
    return t


def parse_forest(text: str) -> Forest:
    text = text.strip()
    if text in ("", "1"):
        return UNIT
    return Forest(tuple(parse_tree(part) for part in text.split()))


def format_forest(forest: Forest) -> str:
    return forest.encode()


# -- coproduct --------------------------------------------------------------


class FormalTensorSum:
    """Integer-multiplicity multiset of (branch forest, root forest) pairs."""

    def __init__(self, terms=None):
        self.terms = Counter()
        if terms:
            for key, mult in (terms.items() if isinstance(terms, (dict, Counter)) else terms):
                if mult < 0:
                    raise ValueError("multiplicities must be positive")
                if mult:
                    self.terms[key] += mult

    def items(self):
        return self.terms.items()

    def __eq__(self, other):
        return isinstance(other, FormalTensorSum) and self.terms == other.terms

    def __len__(self):
        return sum(self.terms.values())

    def without(self, *keys) -> "FormalTensorSum":
        out = Counter(self.terms)
        for key in keys:
            out.pop(key, None)
        return FormalTensorSum(out)

    def product(self, other: "FormalTensorSum") -> "FormalTensorSum":
        out = Counter()
        for (b1, r1), m1 in self.terms.items():
            for (b2, r2), m2 in other.terms.items():
                out[(b1 * b2, r1 * r2)] += m1 * m2
        return FormalTensorSum(out)

    def __repr__(self):
        parts = [f"{m} * {b.encode()} (x) {r.encode()}" for (b, r), m in sorted(
            self.terms.items(), key=lambda kv: (kv[0][0].encode(), kv[0][1].encode())
        )]
        return " + ".join(parts) if parts else "0"


@lru_cache(maxsize=None)
def _tree_cuts(t: LabeledTree) -> FormalTensorSum:
    # full cut: the whole tree moves to the branch side
    out = Counter({(Forest((t,)), UNIT): 1})
    # root kept: combine admissible cuts of the child subtrees
    combos = FormalTensorSum({(UNIT, UNIT): 1})
    for child in t.children:
        combos = combos.product(_tree_cuts(child))
    for (branches, roots), mult in combos.items():
        rooted = LabeledTree(t.label, roots.trees)
        out[(branches, Forest((rooted,)))] += mult
    return FormalTensorSum(out)


def admissible_cuts(forest: Forest) -> FormalTensorSum:
    """All admissible cuts of the forest, including 1 (x) f and f (x) 1;
    cuts of distinct trees combine multiplicatively."""
    out = FormalTensorSum({(UNIT, UNIT): 1})
    for t in forest.trees:
        out = out.product(_tree_cuts(t))
    return out


def coproduct(forest: Forest) -> FormalTensorSum:
    return admissible_cuts(forest)


def coproduct_reduced(forest: Forest, form: str = "chen") -> FormalTensorSum:
    """The cut sum entering the generalized Chen relation.

    form="chen":    drop 1 (x) f and f (x) 1  (the second-increment form);
    form="delta_s": drop only the branch-empty term 1 (x) f.
    """
    cuts = admissible_cuts(forest)
    if form == "chen":
        return cuts.without((UNIT, forest), (forest, UNIT))
    if form == "delta_s":
        return cuts.without((UNIT, forest))
    raise ValueError("form must be 'chen' or 'delta_s'")


def coassociativity_defect(forest: Forest) -> int:
    """Multiset difference count between (D (x) id) D and (id (x) D) D."""
    left = Counter()
    right = Counter()
    for (b, r), m in admissible_cuts(forest).items():
        for (b2, r2), m2 in admissible_cuts(b).items():
            left[(b2, r2, r)] += m * m2
        for (b2, r2), m2 in admissible_cuts(r).items():
            right[(b, b2, r2)] += m * m2
    diff = left - right
    diff.update(right - left)
    return sum(diff.values())


# -- enumeration ------------------------------------------------------------


def trees_of_degree(labels: tuple[str, ...], degree: int) -> list[LabeledTree]:
    if degree < 1:
        return []
    if degree == 1:
        return [tree(lab) for lab in labels]
    out = set()
    for lab in labels:
        for branch in forests_of_degree(labels, degree - 1):
            if not branch.is_unit:
                out.add(LabeledTree(lab, branch.trees))
    return sorted(out, key=lambda t: t.encode())


def forests_of_degree(labels: tuple[str, ...], degree: int) -> list[Forest]:
    """All forests of exactly the given total degree (multisets of trees)."""
    if degree == 0:
        return [UNIT]
    out = set()
    for d in range(1, degree + 1):
        for t in trees_of_degree(labels, d):
            for rest in forests_of_degree(labels, degree - d):
                # avoid duplicates: keep t <= every tree of rest
                if rest.is_unit or t.encode() <= rest.trees[0].encode():
                    out.add(Forest((t,) + rest.trees))
    return sorted(out, key=lambda f: f.encode())


def forests_up_to_degree(labels, max_degree: int, include_unit: bool = False) -> list[Forest]:
    labels = tuple(labels)
    out = [UNIT] if include_unit else []
    for d in range(1, max_degree + 1):
        out.extend(forests_of_degree(labels, d))
    return out


def subtree_partition_family(forest: Forest) -> list[Forest]:
    """All forests obtained by partitioning each tree into subtrees
    (closure of the forest under iterated proper admissible cuts)."""
    seen = {forest.encode(): forest}
    frontier = [forest]
    while frontier:
        current = frontier.pop()
        for k, t in enumerate(current.trees):
            rest = current.trees[:k] + current.trees[k + 1 :]
            for (b, r), _ in _tree_cuts(t).items():
                if b.is_unit or r.is_unit:
                    continue
                new = Forest(rest) * b * r
                if new.encode() not in seen:
                    seen[new.encode()] = new
                    frontier.append(new)
    return sorted(seen.values(), key=lambda f: f.encode())


# -- lifts ------------------------------------------------------------------


class BranchedLift:
    """Iterated-sum branched lift of a family of scalar label paths.

    F^1 = 1; for a tree with root a and branch forest b,
    F^t_{s,u} = sum_{s <= j < u} F^b_{s,j} dx^a_j, and forests multiply
    pointwise.  The cache is write-once per canonical forest key.
    """

    def __init__(self, paths: dict[str, GridPath]):
        if not paths:
            raise ValueError("at least one label path required")
        grids = {p.grid for p in paths.values()}
        if len(grids) != 1:
            raise ValueError("all label paths must share one grid")
        if any(not p.is_scalar for p in paths.values()):
            raise ValueError("label paths are scalar")
        self.paths = dict(paths)
        self.grid = next(iter(grids))
        self._cache: dict[str, TwoParamField] = {}

    def field(self, forest: Forest) -> TwoParamField:
        key = forest.encode()
        if key in self._cache:
            return self._cache[key]
        n1 = self.grid.n + 1
        if forest.is_unit:
            out = TwoParamField(self.grid, np.triu(np.ones((n1, n1))))
        elif len(forest.trees) == 1:
            t = forest.trees[0]
            if t.label not in self.paths:
                raise KeyError(f"no path for label {t.label!r}")
            branch = self.field(Forest(t.children))
            out = paraproduct_field(branch, self.paths[t.label])
        else:
            acc = np.triu(np.ones((n1, n1)))
            for t in forest.trees:
                acc = acc * self.field(Forest((t,))).entries
            out = TwoParamField(self.grid, acc)
        self._cache[key] = out
        return out


def iterated_sum_lift(paths: dict[str, GridPath], forest: Forest) -> TwoParamField:
    return BranchedLift(paths).field(forest)


def chen_branched_defect(lift: BranchedLift, forest: Forest, s: int, t: int, u: int) -> float:
    """delta F^f_{s,t,u} minus the reduced-cut cross sum; zero for every
    iterated-sum lift."""
    f = lift.field(forest)
    acc = f.second_increment(s, t, u)
    for (b, r), mult in coproduct_reduced(forest, form="chen").items():
        acc -= mult * lift.field(b).entry(s, t) * lift.field(r).entry(t, u)
    return float(acc)


def chen_branched_max_defect(lift: BranchedLift, forest: Forest) -> float:
    """Max defect over all triples s <= t <= u, vectorized per middle point."""
    f = lift.field(forest).entries
    n1 = f.shape[0]
    reduced = list(coproduct_reduced(forest, form="chen").items())
    fields = [(lift.field(b).entries, lift.field(r).entries, m) for (b, r), m in reduced]
    worst = 0.0
    for t in range(n1):
        acc = f[: t + 1, t:] - f[: t + 1, t : t + 1] - f[t : t + 1, t:]
        for fb, fr, m in fields:
            acc = acc - m * np.outer(fb[: t + 1, t], fr[t, t:])
        worst = max(worst, float(np.max(np.abs(acc))))
    return worst


def pi_branched(lift: BranchedLift, forest: Forest, g: GridPath) -> TwoParamField:
    """Pi(F^f, g): the branched paraproduct against the integrator g."""
    return paraproduct_field(lift.field(forest), g)
