"""Quadratic covariation, discrete brackets, integration by parts, joint
rough-path lifts, rough-semimartingale decompositions, controlled rough
integration, and the hybrid differential-equation stepper.

Conventions.  Second-level entries pair the first index with the inner
increment: XX_{s,t}^{ab} accumulates delta X^a against dX^b, so the Chen
defect equals the outer product delta X_{t,t'} (x) delta X_{t',t''}.  Jumps
use the piecewise-constant embedding: the jump of h at grid index k is
h[k] - h[k-1] and the left limit is h[k-1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import GridPath, IndexPartition, TwoParamField
from .paraproduct import paraproduct_field, pi_partition_path
from .variation import vp_field, vp_path


def _vec(path: GridPath) -> np.ndarray:
    """Path values as (N+1, d), promoting scalars to d = 1."""
    v = path.values
    return v[:, None] if v.ndim == 1 else v


def _maybe_scalar(arr: np.ndarray):
    return float(arr) if np.ndim(arr) == 0 else arr


# -- brackets --------------------------------------------------------------


def quad_covar_pi(
    y: GridPath,
    g: GridPath,
    pi: IndexPartition,
    z: GridPath | None = None,
    t_index: int | None = None,
):
    """sum_{pi_j < T} Z_{pi_j} * delta Y_{pi_j, pi_{j+1} ^ T} (x) delta g(same).

    Z defaults to 1; vector Y, g produce an outer-product (matrix) value.
    """
    if y.grid != g.grid or pi.grid != g.grid:
        raise ValueError("paths and partition must share a grid")
    t_end = y.grid.n if t_index is None else t_index
    yv, gv = _vec(y), _vec(g)
    scalar = y.is_scalar and g.is_scalar
    acc = np.zeros((yv.shape[1], gv.shape[1]))
    for a, b in zip(pi.indices[:-1], pi.indices[1:]):
        if a >= t_end:
            break
        hi = min(int(b), t_end)
        w = 1.0 if z is None else float(z.values[a])
        acc += w * np.outer(yv[hi] - yv[a], gv[hi] - gv[a])
    return float(acc[0, 0]) if scalar else acc


def quad_covar_pi_path(
    y: GridPath, g: GridPath, pi: IndexPartition, z: GridPath | None = None
) -> GridPath:
    """T -> the discrete bracket along pi, for every grid index T."""
    n = y.grid.n
    yv, gv = _vec(y), _vec(g)
    scalar = y.is_scalar and g.is_scalar
    out = np.zeros((n + 1, yv.shape[1], gv.shape[1]))
    idx = pi.indices
    acc = np.zeros_like(out[0])
    pos = 0
    for t in range(1, n + 1):
        if pos + 1 < len(idx) and idx[pos + 1] <= t - 1:
            a, b = int(idx[pos]), int(idx[pos + 1])
            w = 1.0 if z is None else float(z.values[a])
            acc = acc + w * np.outer(yv[b] - yv[a], gv[b] - gv[a])
            pos += 1
        a = int(idx[pos])
        w = 1.0 if z is None else float(z.values[a])
        out[t] = acc + w * np.outer(yv[t] - yv[a], gv[t] - gv[a])
    return GridPath(y.grid, out[:, 0, 0] if scalar else out)


def quad_covar(f: GridPath, g: GridPath) -> GridPath:
    """[f, g]_t = delta f delta g - Pi(f, g) - Pi(g, f) at full resolution;
    equals the running sum of df_j (x) dg_j."""
    full = IndexPartition.full(f.grid)
    fw = TwoParamField.from_increments(f)
    gw = TwoParamField.from_increments(g)
    pi_fg = pi_partition_path(fw, g, full).values  # (N+1, df, dg) or (N+1,)
    pi_gf = pi_partition_path(gw, f, full).values
    fv, gv = _vec(f), _vec(g)
    cross = np.einsum("ta,tb->tab", fv - fv[0], gv - gv[0])
    scalar = f.is_scalar and g.is_scalar
    if scalar:
        out = cross[:, 0, 0] - pi_fg - pi_gf
    else:
        pfg = pi_fg.reshape(cross.shape)
        pgf = pi_gf.reshape((cross.shape[0], cross.shape[2], cross.shape[1]))
        out = cross - pfg - np.swapaxes(pgf, 1, 2)
    return GridPath(f.grid, out)


@dataclass(frozen=True)
class BracketJumpSeries:
    """The jump-sum representation of [Y, g]: the reference-jump series and
    the remainder-jump series, plus their sum."""

    total: GridPath
    from_reference: GridPath
    from_remainder: GridPath


def bracket_limit_formula(
    x: GridPath,
    yprime: np.ndarray,
    remainder: TwoParamField,
    g: GridPath,
    z: GridPath | None = None,
) -> BracketJumpSeries:
    """t -> sum_{s <= t} Z_{s-} dX_s Y'_{s-} dg_s + sum_{s <= t} Z_{s-} dR_s dg_s,
    with dR_s = R_{s-1, s} and all jumps read off the grid embedding."""
    n = x.grid.n
    xv, gv = _vec(x), _vec(g)
    yp = np.asarray(yprime, dtype=np.float64)
    h = 1 if yp.ndim == 1 else yp.shape[1]
    scalar = x.is_scalar and g.is_scalar and yp.ndim == 1
    ref = np.zeros((n + 1, h, gv.shape[1]))
    rem = np.zeros_like(ref)
    for k in range(1, n + 1):
        w = 1.0 if z is None else float(z.values[k - 1])
        dx = xv[k] - xv[k - 1]
        dgk = gv[k] - gv[k - 1]
        op = yp[k - 1]
        ydx = np.atleast_1d(op * dx[0] if np.ndim(op) == 0 else op @ dx)
        dr = np.atleast_1d(remainder.entries[k - 1, k])
        ref[k] = ref[k - 1] + w * np.outer(ydx, dgk)
        rem[k] = rem[k - 1] + w * np.outer(dr, dgk)
    total = ref + rem
    if scalar:
        ref, rem, total = ref[:, 0, 0], rem[:, 0, 0], total[:, 0, 0]
    return BracketJumpSeries(
        GridPath(x.grid, total), GridPath(x.grid, ref), GridPath(x.grid, rem)
    )


def ito_isometry_check(f: GridPath, g: GridPath, s: int) -> tuple[GridPath, GridPath]:
    """lhs: the bracket of t -> Pi(f, g)_{s,t}; rhs: the jump-sum
    sum_{s < u <= t} |f_{u-} - f_s|^2 d[g]_u.  Equal in discrete time."""
    if not (f.is_scalar and g.is_scalar):
        raise ValueError("isometry check is scalar-valued")
    n = f.grid.n
    dg = g.increments()
    h = np.zeros(n + 1)
    for t in range(s + 1, n + 1):
        h[t] = h[t - 1] + (f.values[t - 1] - f.values[s]) * dg[t - 1]
    h_path = GridPath(f.grid, h)
    lhs = quad_covar(h_path, h_path)
    dbr_g = dg**2
    rhs = np.zeros(n + 1)
    for u in range(s + 1, n + 1):
        rhs[u] = rhs[u - 1] + (f.values[u - 1] - f.values[s]) ** 2 * dbr_g[u - 1]
    return lhs, GridPath(f.grid, rhs)


# -- controlled processes and lifts ----------------------------------------


@dataclass(frozen=True)
class ControlledProcess:
    """(Y, Y') relative to a reference path X; the remainder
    R_{s,t} = delta Y - Y'_s delta X is derived, never stored."""

    y: GridPath
    yprime: np.ndarray  # (N+1,), (N+1, h), or (N+1, h, m)
    x: GridPath

    def __post_init__(self):
        yp = np.asarray(self.yprime, dtype=np.float64)
        object.__setattr__(self, "yprime", yp)
        if yp.shape[0] != self.y.grid.n + 1:
            raise ValueError("one derivative value per grid time required")
        if self.y.grid != self.x.grid:
            raise ValueError("Y and X must share a grid")

    def _apply(self, s: int, dx):
        op = self.yprime[s]
        if np.ndim(op) == 0:
            return op * dx
        if np.ndim(op) == 1 and self.x.is_scalar:
            return op * dx  # vector Y, scalar X
        return op @ dx

    def remainder(self, s: int, t: int):
        return self.y.increment(s, t) - self._apply(s, self.x.increment(s, t))

    def remainder_field(self) -> TwoParamField:
        n1 = self.y.grid.n + 1
        yv = self.y.values
        sample = np.asarray(self.remainder(0, 0))
        out = np.zeros((n1, n1) + sample.shape)
        for s in range(n1):
            dx = self.x.values[s:] - self.x.values[s]
            op = self.yprime[s]
            if np.ndim(op) == 0:
                ydx = op * dx
            elif np.ndim(op) == 1 and self.x.is_scalar:
                ydx = np.multiply.outer(dx, op)
            else:
                ydx = dx @ op.T
            out[s, s:] = (yv[s:] - yv[s]) - ydx
        return TwoParamField(self.y.grid, out)


def pi_g_controlled(g: GridPath, controlled: ControlledProcess) -> TwoParamField:
    """Pi(g, Y)_{t,t'} = delta g delta Y - Pi(Y, g) - delta[Y, g], the
    integration-by-parts integral of delta g against the controlled Y.

    Satisfies the Chen relation with cross term delta g_{t,t'} delta Y_{t',t''}.
    Value axes are ordered (g components, Y components).
    """
    y = controlled.y
    if g.grid != y.grid:
        raise ValueError("paths must share a grid")
    scalar = g.is_scalar and y.is_scalar
    pi_yg = paraproduct_field(TwoParamField.from_increments(y), g)  # (h, n)
    bracket = bracket_limit_formula(
        controlled.x, controlled.yprime, controlled.remainder_field(), g
    ).total
    gv, yv = _vec(g), _vec(y)
    dg = gv[np.newaxis, :, :] - gv[:, np.newaxis, :]
    dy = yv[np.newaxis, :, :] - yv[:, np.newaxis, :]
    cross = np.einsum("stb,sta->stba", dg, dy)
    n1 = g.grid.n + 1
    p = pi_yg.entries.reshape((n1, n1, yv.shape[1], gv.shape[1]))
    br = np.asarray(_vec_path_values(bracket, yv.shape[1], gv.shape[1]))
    dbr = br[np.newaxis, :, :, :] - br[:, np.newaxis, :, :]
    entries = cross - np.swapaxes(p, 2, 3) - np.swapaxes(dbr, 2, 3)
    mask = np.tri(n1, k=0).T
    entries = entries * mask[:, :, np.newaxis, np.newaxis]
    if scalar:
        entries = entries[:, :, 0, 0]
    return TwoParamField(g.grid, entries)


def _vec_path_values(path: GridPath, d1: int, d2: int) -> np.ndarray:
    v = path.values
    return v.reshape((v.shape[0], d1, d2))


@dataclass(frozen=True)
class RoughPath:
    """(X, XX) with the Chen invariant
    XX_{t,t''} = XX_{t,t'} + XX_{t',t''} + delta X_{t,t'} (x) delta X_{t',t''}."""

    x: GridPath
    xx: TwoParamField

    def chen_defect_max(self) -> float:
        xv = _vec(self.x)
        n1 = xv.shape[0]
        e = self.xx.entries.reshape((n1, n1, -1))
        worst = 0.0
        for t in range(n1):
            d2 = e[: t + 1, t:] - e[: t + 1, t : t + 1] - e[t : t + 1, t:]
            cross = np.einsum("sa,ub->suab", xv[t] - xv[: t + 1], xv[t:] - xv[t])
            worst = max(worst, float(np.max(np.abs(d2 - cross.reshape(d2.shape)))))
        return worst

    @classmethod
    def ito_lift(cls, x: GridPath) -> "RoughPath":
        """The left-point (Ito-type) lift XX = Pi(delta X, X)."""
        return cls(x, paraproduct_field(TwoParamField.from_increments(x), x))

    @classmethod
    def geometric_lift(cls, x: GridPath) -> "RoughPath":
        """Mid-point (Stratonovich-type) lift: Ito plus half the bracket."""
        ito = paraproduct_field(TwoParamField.from_increments(x), x)
        br = quad_covar(x, x).values
        dbr = br[np.newaxis, ...] - br[:, np.newaxis, ...]
        n1 = x.grid.n + 1
        mask = np.tri(n1, k=0).T
        extra = 0.5 * dbr * mask.reshape((n1, n1) + (1,) * (dbr.ndim - 2))
        return cls(x, TwoParamField(x.grid, ito.entries + extra))


def hom_norm(rough: RoughPath, p: float) -> float:
    """Homogeneous norm V^p X + (V^{p/2} XX)^{1/2}."""
    return vp_path(rough.x, p) + math.sqrt(vp_field(rough.xx, p / 2.0))


def joint_lift(rough: RoughPath, g: GridPath) -> RoughPath:
    """Rough path over the concatenated state (X, g): first level stacked,
    second level with blocks XX, Pi(X, g), Pi(g, X), Pi(g, g)."""
    x = rough.x
    if x.grid != g.grid:
        raise ValueError("paths must share a grid")
    xv, gv = _vec(x), _vec(g)
    m, n = xv.shape[1], gv.shape[1]
    n1 = x.grid.n + 1
    level1 = GridPath(x.grid, np.concatenate([xv, gv], axis=1))
    xx = rough.xx.entries.reshape((n1, n1, m, m))
    pi_xg = paraproduct_field(TwoParamField.from_increments(x), g).entries.reshape((n1, n1, m, n))
    pi_gg = paraproduct_field(TwoParamField.from_increments(g), g).entries.reshape((n1, n1, n, n))
    ident = np.tile(np.eye(m), (n1, 1, 1)) if m > 1 or not x.is_scalar else np.ones(n1)
    controlled_x = ControlledProcess(x, ident, x)
    pi_gx = pi_g_controlled(g, controlled_x).entries.reshape((n1, n1, n, m))
    top = np.concatenate([xx, pi_xg], axis=3)
    bottom = np.concatenate([pi_gx, pi_gg], axis=3)
    entries = np.concatenate([top, bottom], axis=2)
    return RoughPath(level1, TwoParamField(x.grid, entries))


# -- rough semimartingales --------------------------------------------------


@dataclass(frozen=True)
class RsmDecomposition:
    """Composite W = g + Y with Y controlled by the reference X."""

    g: GridPath
    y: GridPath
    yprime: np.ndarray
    x: GridPath

    def composite(self) -> GridPath:
        return GridPath(self.g.grid, self.g.values + self.y.values)

    def controlled(self) -> ControlledProcess:
        return ControlledProcess(self.y, self.yprime, self.x)


@dataclass(frozen=True)
class RsmFromControlled:
    decomposition: RsmDecomposition
    remainder_identity_margin: float


def rsm_from_controlled(
    z: GridPath, zprime_x: np.ndarray, zprime_g: np.ndarray, x: GridPath, g: GridPath
) -> RsmFromControlled:
    """Split an (X, g)-controlled process into martingale part
    g~_T = sum_{j < T} Z'_g[j] dg_{j+1} and controlled rest (Z - g~, Z'_X).

    Also reports the max defect of the exact remainder identity
    R^{Y~, X}_{s,t} = R^{Z,(X,g)}_{s,t} - sum_{s<=j<t} (Z'_g[j] - Z'_g[s]) dg_j.
    """
    if z.grid != x.grid or z.grid != g.grid:
        raise ValueError("paths must share a grid")
    n = z.grid.n
    zv, gv, xv = _vec(z), _vec(g), _vec(x)
    zp_g = np.asarray(zprime_g, dtype=np.float64)
    zp_x = np.asarray(zprime_x, dtype=np.float64)

    def op_apply(op, vec):
        return op * vec[0] if np.ndim(op) == 0 else (
            op * vec[0] if np.ndim(op) == 1 and vec.shape[0] == 1 else op @ vec
        )

    g_tilde = np.zeros_like(zv)
    for j in range(n):
        g_tilde[j + 1] = g_tilde[j] + np.atleast_1d(op_apply(zp_g[j], gv[j + 1] - gv[j]))
    y_tilde = zv - g_tilde

    # remainder identity, with the correction paraproduct computed through
    # the kernel route rather than by rearranging g~
    h = zv.shape[1]
    zp_g_mat = zp_g.reshape((n + 1, h, gv.shape[1]))
    corr = np.zeros((n + 1, n + 1, h))
    for a in range(h):
        for i in range(gv.shape[1]):
            col = GridPath(z.grid, zp_g_mat[:, a, i])
            field = paraproduct_field(TwoParamField.from_increments(col), GridPath(z.grid, gv[:, i]))
            corr[:, :, a] += field.entries
    worst = 0.0
    for s in range(n + 1):
        zx_dx = np.stack(
            [np.atleast_1d(op_apply(zp_x[s], xv[t] - xv[s])) for t in range(s, n + 1)]
        )
        zg_dg = np.stack(
            [np.atleast_1d(op_apply(zp_g[s], gv[t] - gv[s])) for t in range(s, n + 1)]
        )
        lhs = (y_tilde[s:] - y_tilde[s]) - zx_dx
        r_z = (zv[s:] - zv[s]) - zx_dx - zg_dg
        worst = max(worst, float(np.max(np.abs(lhs - (r_z - corr[s, s:])))))

    squeeze = z.is_scalar
    dec = RsmDecomposition(
        GridPath(z.grid, g_tilde[:, 0] if squeeze else g_tilde),
        GridPath(z.grid, y_tilde[:, 0] if squeeze else y_tilde),
        zp_x,
        x,
    )
    return RsmFromControlled(dec, worst)


# -- controlled rough integration -------------------------------------------


def _second_order_product(op1, op2, xx_val):
    """Y'_s Ybar'_s XX_{s,t}: einsum over the reference indices."""
    if np.ndim(op1) == 0 and np.ndim(op2) == 0 and np.ndim(xx_val) == 0:
        return op1 * op2 * xx_val
    a = np.atleast_2d(op1)
    b = np.atleast_2d(op2)
    xv = np.atleast_2d(xx_val)
    return np.einsum("ai,bj,ij->ab", a, b, xv)


def controlled_integral_path(
    cy: ControlledProcess, cybar: ControlledProcess, xx: TwoParamField, pi: IndexPartition
) -> GridPath:
    """T -> sum_{pi_j < T} delta Y_{0,pi_j} (x) delta Ybar_{pi_j, pi_{j+1}^T}
    + Y'_{pi_j} Ybar'_{pi_j} XX_{pi_j, pi_{j+1}^T}  (germ sums along pi)."""
    y, ybar = cy.y, cybar.y
    n = y.grid.n
    yv, bv = _vec(y), _vec(ybar)
    scalar = y.is_scalar and ybar.is_scalar
    out = np.zeros((n + 1, yv.shape[1], bv.shape[1]))
    idx = pi.indices
    acc = np.zeros_like(out[0])

    def germ(j, hi):
        first = np.outer(yv[j] - yv[0], bv[hi] - bv[j])
        second = np.atleast_2d(
            _second_order_product(cy.yprime[j], cybar.yprime[j], xx.entries[j, hi])
        )
        return first + second

    pos = 0
    for t in range(1, n + 1):
        if pos + 1 < len(idx) and idx[pos + 1] <= t - 1:
            acc = acc + germ(int(idx[pos]), int(idx[pos + 1]))
            pos += 1
        out[t] = acc + germ(int(idx[pos]), t)
    return GridPath(y.grid, out[:, 0, 0] if scalar else out)


def controlled_integral(
    cy: ControlledProcess, cybar: ControlledProcess, xx: TwoParamField, pi: IndexPartition
) -> TwoParamField:
    """Two-parameter germ sums: entry (s, t) integrates over [s, t] with the
    base point at s and partition points of pi clipped to the window."""
    y, ybar = cy.y, cybar.y
    n = y.grid.n
    yv, bv = _vec(y), _vec(ybar)
    scalar = y.is_scalar and ybar.is_scalar
    entries = np.zeros((n + 1, n + 1, yv.shape[1], bv.shape[1]))
    idx = pi.indices

    def germ(s, j, hi):
        first = np.outer(yv[j] - yv[s], bv[hi] - bv[j])
        second = np.atleast_2d(
            _second_order_product(cy.yprime[j], cybar.yprime[j], xx.entries[j, hi])
        )
        return first + second

    for s in range(n + 1):
        stops = np.unique(np.concatenate([[s], idx[idx > s]]))
        acc = np.zeros_like(entries[0, 0])
        pos = 0
        for t in range(s + 1, n + 1):
            if pos + 1 < len(stops) and stops[pos + 1] <= t - 1:
                acc = acc + germ(s, int(stops[pos]), int(stops[pos + 1]))
                pos += 1
            entries[s, t] = acc + germ(s, int(stops[pos]), t)
    return TwoParamField(y.grid, entries[:, :, 0, 0] if scalar else entries)


@dataclass(frozen=True)
class RsmParaproduct:
    """Pi(W, Wbar)_{0,.} with its enhanced Gubinelli derivative."""

    path: GridPath
    derivative: np.ndarray  # delta W_{0,t} (x) Ybar'_t


def rsm_paraproduct(
    w: RsmDecomposition,
    wbar: RsmDecomposition,
    xx: TwoParamField,
    pi: IndexPartition | None = None,
) -> RsmParaproduct:
    """Pi(W, Wbar) = Pi(delta W, gbar) + Pi(g, Ybar) + controlled integral of
    (Y, Y') against (Ybar, Ybar'), all based at 0."""
    grid = w.g.grid
    if pi is None:
        pi = IndexPartition.full(grid)
    comp_w = w.composite()
    hv = _vec(comp_w)
    gbarv = _vec(wbar.g)
    scalar = comp_w.is_scalar and wbar.g.is_scalar and wbar.y.is_scalar
    n1 = grid.n + 1

    term1 = pi_partition_path(TwoParamField.from_increments(comp_w), wbar.g, pi).values.reshape(
        (n1, hv.shape[1], gbarv.shape[1])
    )
    # Pi(g, Ybar)_{0, t} = delta g delta Ybar - Pi(Ybar, g) - [Ybar-bracket]
    gv = _vec(w.g)
    ybv = _vec(wbar.y)
    pi_ybar_g = pi_partition_path(
        TwoParamField.from_increments(wbar.y), w.g, pi
    ).values.reshape((n1, ybv.shape[1], gv.shape[1]))
    bracket = bracket_limit_formula(
        wbar.x, wbar.yprime, wbar.controlled().remainder_field(), w.g
    ).total.values.reshape((n1, ybv.shape[1], gv.shape[1]))
    cross = np.einsum("ta,tb->tab", gv - gv[0], ybv - ybv[0])
    term2 = cross - np.swapaxes(pi_ybar_g, 1, 2) - np.swapaxes(bracket, 1, 2)

    term3 = controlled_integral_path(w.controlled(), wbar.controlled(), xx, pi).values.reshape(
        (n1, hv.shape[1], ybv.shape[1])
    )
    total = term1 + term2 + term3
    dw = hv - hv[0]
    ybp = wbar.yprime
    if ybp.ndim == 1:
        deriv = np.einsum("ta,t->ta", dw, ybp)
    elif ybp.ndim == 2:
        deriv = np.einsum("ta,tb->tab", dw, ybp)
    else:
        deriv = np.einsum("ta,tbi->tabi", dw, ybp)
    path = GridPath(grid, total[:, 0, 0] if scalar else total)
    return RsmParaproduct(path, deriv)


# -- differential equations --------------------------------------------------


@dataclass(frozen=True)
class VectorField:
    """A driver-indexed vector field z -> (state dim, driver dim) with its
    Jacobian z -> (state dim, driver dim, state dim)."""

    name: str
    value: "callable"
    jacobian: "callable"


def vf_zero(state_dim: int, driver_dim: int) -> VectorField:
    return VectorField(
        "zero",
        lambda z: np.zeros((state_dim, driver_dim)),
        lambda z: np.zeros((state_dim, driver_dim, state_dim)),
    )


def vf_linear(a: np.ndarray, b: np.ndarray | None = None) -> VectorField:
    """value[i, d] = sum_k a[i, d, k] z_k + b[i, d]."""
    a = np.asarray(a, dtype=np.float64)
    b0 = np.zeros(a.shape[:2]) if b is None else np.asarray(b, dtype=np.float64)
    return VectorField(
        "linear",
        lambda z: np.einsum("idk,k->id", a, z) + b0,
        lambda z: a.copy(),
    )


def vf_scalar_identity() -> VectorField:
    """sigma(z) = z for one-dimensional state and driver."""
    return vf_linear(np.ones((1, 1, 1)))


def vf_sine(coef: np.ndarray, freq: float = 1.0) -> VectorField:
    """value[i, d] = coef[i, d] sin(freq z_i); componentwise in the state."""
    coef = np.asarray(coef, dtype=np.float64)

    def value(z):
        return coef * np.sin(freq * z)[:, None]

    def jacobian(z):
        zdim, ddim = coef.shape
        out = np.zeros((zdim, ddim, zdim))
        for i in range(zdim):
            out[i, :, i] = coef[i] * freq * np.cos(freq * z[i])
        return out

    return VectorField("sine", value, jacobian)


def vf_polynomial(coefs: np.ndarray) -> VectorField:
    """value[i, d] = sum_deg coefs[deg, i, d] z_i^deg (componentwise)."""
    coefs = np.asarray(coefs, dtype=np.float64)

    def value(z):
        return sum(coefs[deg] * (z**deg)[:, None] for deg in range(coefs.shape[0]))

    def jacobian(z):
        zdim, ddim = coefs.shape[1:]
        out = np.zeros((zdim, ddim, zdim))
        for i in range(zdim):
            acc = np.zeros(ddim)
            for deg in range(1, coefs.shape[0]):
                acc += deg * coefs[deg, i] * z[i] ** (deg - 1)
            out[i, :, i] = acc
        return out

    return VectorField("polynomial", value, jacobian)


def make_vector_field(name: str, state_dim: int, driver_dim: int, **params) -> VectorField:
    """Named built-ins for config-driven runs: zero, identity, linear, sine,
    polynomial."""
    if name == "zero":
        return vf_zero(state_dim, driver_dim)
    if name == "identity":
        if state_dim != 1 or driver_dim != 1:
            raise ValueError("identity field is scalar")
        return vf_scalar_identity()
    if name == "linear":
        a = np.asarray(params.get("a", np.ones((state_dim, driver_dim, state_dim))))
        return vf_linear(a, params.get("b"))
    if name == "sine":
        coef = np.asarray(params.get("coef", np.ones((state_dim, driver_dim))))
        return vf_sine(coef, params.get("freq", 1.0))
    if name == "polynomial":
        coefs = np.asarray(params.get("coefs", np.ones((2, state_dim, driver_dim))))
        return vf_polynomial(coefs)
    raise ValueError(f"unknown vector field {name!r}")


@dataclass(frozen=True)
class RdeSolution:
    path: GridPath  # partition-floor embedding on the grid
    drift: GridPath  # the reference-driven component along the partition
    at_partition: np.ndarray


def rde_solve(
    joint: RoughPath,
    sigma: VectorField,
    mu: VectorField,
    z0,
    pi: IndexPartition,
    x_dim: int,
) -> RdeSolution:
    """Second-order (Milstein-type) stepping along pi for
    dZ = sigma(Z-) dX + mu(Z-) dg, driven by the joint lift over (X, g).

    Each step adds f(Z) dW plus the second-level correction with coefficient
    Df_b . f_a contracted against the block (a, b) of the joint second level;
    the drift output accumulates only the X-driven terms.
    """
    z0 = np.atleast_1d(np.asarray(z0, dtype=np.float64))
    zdim = z0.shape[0]
    wv = _vec(joint.x)
    total_dim = wv.shape[1]
    n1 = joint.x.grid.n + 1
    xx = joint.xx.entries.reshape((n1, n1, total_dim, total_dim))

    def fields(z):
        f = np.concatenate([sigma.value(z), mu.value(z)], axis=1)
        df = np.concatenate([sigma.jacobian(z), mu.jacobian(z)], axis=1)
        return f, df

    idx = pi.indices
    zs = np.zeros((len(idx), zdim))
    drift = np.zeros((len(idx), zdim))
    zs[0] = z0
    for j in range(len(idx) - 1):
        a, b = int(idx[j]), int(idx[j + 1])
        z = zs[j]
        f, df = fields(z)
        dw = wv[b] - wv[a]
        block = xx[a, b]
        step = f @ dw + np.einsum("ibk,ka,ab->i", df, f, block)
        zs[j + 1] = z + step
        if not np.all(np.isfinite(zs[j + 1])):
            raise ValueError(f"non-finite state at partition step {j + 1}")
        drift[j + 1] = (
            drift[j]
            + f[:, :x_dim] @ dw[:x_dim]
            + np.einsum("ibk,ka,ab->i", df[:, :x_dim], f[:, :x_dim], block[:x_dim, :x_dim])
        )

    floor = pi.floor_all()
    pos = np.searchsorted(idx, floor)
    path_vals = zs[pos]
    drift_vals = drift[pos]
    if zdim == 1:
        path_vals, drift_vals = path_vals[:, 0], drift_vals[:, 0]
    return RdeSolution(
        GridPath(joint.x.grid, path_vals), GridPath(joint.x.grid, drift_vals), zs
    )
