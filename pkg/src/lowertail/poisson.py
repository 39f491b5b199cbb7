"""Poissonian last passage on [0, n]^2: longest increasing chains of points.

The square is cut into boxes of side ``eps_D``; box ``v = (a, b)`` covers
``[a eps_D, (a+1) eps_D) x [b eps_D, (b+1) eps_D)`` for ``0 <= a, b <= m``
with ``m = n/eps_D - 1``.  Boxes on one box-diagonal ``a + b = i`` are
pairwise incomparable, so given the points elsewhere their contents are
independent Poisson processes conditioned on the chain constraint; the
box-diagonal Gibbs sweep below mirrors the lattice sweep.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .lattice import GridSpec, central_indices
from .rng import step_generator

__all__ = [
    "PointConfig",
    "BoundaryFn",
    "BoxExhausted",
    "sample_ppp",
    "lis",
    "chain_lengths",
    "boundary_fn",
    "box_slack",
    "saturation_stats",
    "box_resample",
    "poisson_rejection_conditional",
    "poisson_rejection_sample",
    "PoissonGibbs",
    "eps_D_admissible",
]

_JITTER = 1e-12


@dataclass(frozen=True, eq=False)
class PointConfig:
    """Planar points in [0, n]^2 in general position, sorted by x."""

    n: float
    xs: np.ndarray
    ys: np.ndarray
    eps_D: float = 1.0

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float).ravel()
        ys = np.asarray(self.ys, dtype=float).ravel()
        if xs.shape != ys.shape:
            raise ValueError("x and y arrays differ in length")
        if np.any((xs < 0) | (xs > self.n) | (ys < 0) | (ys > self.n)):
            raise ValueError("points must lie in [0, n]^2")
        m1 = self.n / self.eps_D
        if abs(m1 - round(m1)) > 1e-9 or round(m1) < 1:
            raise ValueError("n / eps_D must be a positive integer")
        o = np.argsort(xs, kind="stable")
        xs, ys = _general_position(xs[o]), ys[o]
        oy = np.argsort(ys, kind="stable")
        ys[oy] = _general_position(ys[oy])
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def __len__(self) -> int:
        return self.xs.size

    @property
    def m(self) -> int:
        return int(round(self.n / self.eps_D)) - 1

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.xs, self.ys])

    def box_of(self) -> np.ndarray:
        """(N, 2) box coordinates of every point."""
        m = self.m
        a = np.minimum((self.xs / self.eps_D).astype(np.int64), m)
        b = np.minimum((self.ys / self.eps_D).astype(np.int64), m)
        return np.column_stack([a, b])

    def box_index(self) -> dict:
        """Map box ``(a, b)`` to the indices of its points."""
        ab = self.box_of()
        out: dict = {}
        for k, (a, b) in enumerate(ab.tolist()):
            out.setdefault((a, b), []).append(k)
        return out

    def without_box(self, v) -> "PointConfig":
        keep = ~np.all(self.box_of() == np.asarray(v), axis=1)
        return PointConfig(self.n, self.xs[keep], self.ys[keep], self.eps_D)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y"])
            for x, y in zip(self.xs, self.ys):
                w.writerow([repr(float(x)), repr(float(y))])

    @classmethod
    def from_csv(cls, path, n: float, eps_D: float = 1.0) -> "PointConfig":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.size == 0:
            return cls(n, np.empty(0), np.empty(0), eps_D)
        return cls(n, data[:, 0], data[:, 1], eps_D)


def _general_position(v: np.ndarray) -> np.ndarray:
    """Break exact ties in a sorted array by nudging later copies up by 1e-12."""
    v = v.copy()
    for k in range(1, v.size):
        if v[k] <= v[k - 1]:
            v[k] = v[k - 1] + _JITTER
    return v


def sample_ppp(n: float, rate: float, rng: np.random.Generator, eps_D: float = 1.0) -> PointConfig:
    """Homogeneous Poisson process of the given rate on [0, n]^2."""
    if n <= 0 or rate <= 0:
        raise ValueError("n and rate must be positive")
    N = rng.poisson(rate * n * n)
    xy = rng.random((N, 2)) * n
    return PointConfig(n, xy[:, 0], xy[:, 1], eps_D)


def lis(points, u=(0.0, 0.0), v=None) -> int:
    """Longest chain of points p with u <= p <= v, strictly increasing in both coordinates.

    ``points`` is a PointConfig or an (N, 2) array.  Patience sorting on the
    y-values after ordering by x, O(N log N).
    """
    if isinstance(points, PointConfig):
        xs, ys = points.xs, points.ys
        if v is None:
            v = (points.n, points.n)
    else:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        xs, ys = pts[:, 0], pts[:, 1]
        if v is None:
            v = (np.inf, np.inf)
    if u[0] > v[0] or u[1] > v[1]:
        raise ValueError(f"{u} is not below {v} in the coordinatewise order")
    keep = (xs >= u[0]) & (xs <= v[0]) & (ys >= u[1]) & (ys <= v[1])
    xs, ys = xs[keep], ys[keep]
    o = np.lexsort((-ys, xs))  # equal x: larger y first so they cannot chain
    return int(K.patience_length(np.ascontiguousarray(ys[o])))


def chain_lengths(config: PointConfig):
    """(fL, bL): longest chain ending at / starting from each point, point included."""
    N = len(config)
    if N == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    rank = np.empty(N, dtype=np.int64)
    rank[np.argsort(config.ys, kind="stable")] = np.arange(N)
    return K.chain_lengths(rank, np.arange(N, dtype=np.int64))


def _prefix_max(A: np.ndarray) -> np.ndarray:
    return np.maximum.accumulate(np.maximum.accumulate(A, axis=0), axis=1)


def _suffix_max(A: np.ndarray) -> np.ndarray:
    return _prefix_max(A[::-1, ::-1])[::-1, ::-1]


def _pad_get(M, a, b):
    """M[a, b] with 0 outside the box grid."""
    if 0 <= a < M.shape[0] and 0 <= b < M.shape[1]:
        return int(M[a, b])
    return 0


@dataclass
class BoundaryFn:
    """Exterior chain data around box ``v``.

    ``f(x, y) = c_int - L(0, x) - L(y, n)`` for ``x`` on the SW boundary and
    ``y`` on the NE boundary.  The four edge profiles are step functions:
    ``sw_left`` maps a height on the left edge to L(0, point), breakpoints
    at the y of points in the row strip to the left, and likewise for the
    other edges.

    ``R`` is the minimum of ``f`` over pairs with ``x <= y`` coordinatewise:
    only those pairs can be joined through the box, so ``R = 0`` certifies a
    chain of length ``c_int`` passing the box.  ``R_separable`` is the
    unrestricted ``c_int - max L(0, .) - max L(., n)``, a lower bound that
    can be negative for a feasible configuration.
    """

    v: tuple
    c_int: int
    eps_D: float
    corner_sw: int  # chains ending strictly SW of the box
    corner_ne: int
    left_y: np.ndarray  # left strip: point heights (sorted) and running max of fL
    left_val: np.ndarray
    bottom_x: np.ndarray
    bottom_val: np.ndarray
    top_x: np.ndarray  # top strip: point abscissae (sorted) and suffix max of bL
    top_val: np.ndarray
    right_y: np.ndarray
    right_val: np.ndarray
    max_sw: int
    max_ne: int

    @property
    def R_separable(self) -> int:
        return self.c_int - self.max_sw - self.max_ne

    @property
    def R(self) -> int:
        lo, hi = -np.inf, np.inf
        best = max(
            self.sw_left(hi) + self.ne_top(lo),  # left edge to top edge
            self.sw_bottom(hi) + self.ne_right(lo),  # bottom edge to right edge
        )
        # left to right needs y_in <= y_out, bottom to top needs x_in <= x_out;
        # a nondecreasing plus a nonincreasing step function peaks at a jump
        ys = np.concatenate(([lo], self.left_y))
        best = max(best, int((self.sw_left(ys) + self.ne_right(ys)).max()))
        xs = np.concatenate(([lo], self.bottom_x))
        best = max(best, int((self.sw_bottom(xs) + self.ne_top(xs)).max()))
        return int(self.c_int - best)

    def sw_left(self, y):
        """L(0, (a eps_D, y)) for heights in the box's y-range."""
        j = np.searchsorted(self.left_y, y, side="right")
        ext = np.concatenate(([self.corner_sw], np.maximum(self.left_val, self.corner_sw)))
        return ext[j]

    def sw_bottom(self, x):
        j = np.searchsorted(self.bottom_x, x, side="right")
        ext = np.concatenate(([self.corner_sw], np.maximum(self.bottom_val, self.corner_sw)))
        return ext[j]

    def ne_top(self, x):
        """L((x, (b+1) eps_D), n) for abscissae in the box's x-range."""
        j = np.searchsorted(self.top_x, x, side="right")
        ext = np.concatenate((np.maximum(self.top_val, self.corner_ne), [self.corner_ne]))
        return ext[j]

    def ne_right(self, y):
        j = np.searchsorted(self.right_y, y, side="right")
        ext = np.concatenate((np.maximum(self.right_val, self.corner_ne), [self.corner_ne]))
        return ext[j]

    def f(self, sw_point, ne_point) -> int:
        """f_v at boundary points given as (edge, coordinate) pairs.

        ``sw_point = ("left", y)`` or ``("bottom", x)``;
        ``ne_point = ("top", x)`` or ``("right", y)``.
        """
        e, t = sw_point
        Ls = self.sw_left(t) if e == "left" else self.sw_bottom(t)
        e, t = ne_point
        Ln = self.ne_top(t) if e == "top" else self.ne_right(t)
        return int(self.c_int - Ls - Ln)

    def breakpoints(self) -> int:
        return self.left_y.size + self.bottom_x.size + self.top_x.size + self.right_y.size

    def through_box(self, px: np.ndarray, py: np.ndarray):
        """Longest chain through candidate interior points, and their fL values.

        Points must be sorted by x.  Returns ``(best, val)`` where ``val[p]``
        is the longest chain from the origin ending at ``p``.
        """
        k = px.size
        if k == 0:
            return 0, np.zeros(0, np.int64)
        a = np.maximum(self.sw_left(py), self.sw_bottom(px)).astype(np.int64)
        bnd = np.maximum(self.ne_top(px), self.ne_right(py)).astype(np.int64)
        val = _box_chain(px, py, a)
        return int((val + bnd).max()), val


def _box_chain(px, py, a):
    # k is Poisson(eps_D^2): small, so the quadratic scan is fine
    k = px.size
    val = np.empty(k, dtype=np.int64)
    for t in range(k):
        best = a[t]
        for s in range(t):
            if px[s] < px[t] and py[s] < py[t] and val[s] > best:
                best = val[s]
        val[t] = best + 1
    return val


class _BoxGeometry:
    """Per-box point lists with chain values; shared by the sweep and one-off calls."""

    def __init__(self, config: PointConfig):
        self.n, self.eps_D, self.m = config.n, config.eps_D, config.m
        m1 = self.m + 1
        fL, bL = chain_lengths(config)
        self.px = [[None] * m1 for _ in range(m1)]
        self.py = [[None] * m1 for _ in range(m1)]
        self.fl = [[None] * m1 for _ in range(m1)]
        self.bl = [[None] * m1 for _ in range(m1)]
        idx = config.box_index()
        empty_f = np.zeros(0)
        empty_i = np.zeros(0, np.int64)
        for a in range(m1):
            for b in range(m1):
                ks = np.array(idx.get((a, b), []), dtype=np.int64)
                if ks.size:
                    self.px[a][b], self.py[a][b] = config.xs[ks], config.ys[ks]
                    self.fl[a][b], self.bl[a][b] = fL[ks], bL[ks]
                else:
                    self.px[a][b] = self.py[a][b] = empty_f
                    self.fl[a][b] = self.bl[a][b] = empty_i
        self.refresh_forward_max()
        self.refresh_backward_max()

    def box_max(self, vals):
        m1 = self.m + 1
        out = np.zeros((m1, m1), dtype=np.int64)
        for a in range(m1):
            for b in range(m1):
                if vals[a][b].size:
                    out[a, b] = vals[a][b].max()
        return out

    def refresh_forward_max(self):
        self.PM = _prefix_max(self.box_max(self.fl))

    def refresh_backward_max(self):
        self.SM = _suffix_max(self.box_max(self.bl))

    def update_prefix_diagonal(self, i):
        """Recompute PM on diagonal i from the boxes there and PM on i-1."""
        m = self.m
        for a in range(max(0, i - m), min(i, m) + 1):
            b = i - a
            own = self.fl[a][b].max() if self.fl[a][b].size else 0
            self.PM[a, b] = max(own, _pad_get(self.PM, a - 1, b), _pad_get(self.PM, a, b - 1))

    def strip(self, coords, along, vals):
        """Concatenate points of the listed boxes: (coordinate along edge, chain value)."""
        c_parts = [getattr(self, along)[a][b] for a, b in coords]
        v_parts = [vals[a][b] for a, b in coords]
        if not c_parts:
            return np.zeros(0), np.zeros(0, np.int64)
        return np.concatenate(c_parts), np.concatenate(v_parts)

    def boundary(self, v, c_int) -> BoundaryFn:
        a, b = v
        m = self.m
        ly, lv = self.strip([(a2, b) for a2 in range(a)], "py", self.fl)
        bx, bv = self.strip([(a, b2) for b2 in range(b)], "px", self.fl)
        tx, tv = self.strip([(a, b2) for b2 in range(b + 1, m + 1)], "px", self.bl)
        ry, rv = self.strip([(a2, b) for a2 in range(a + 1, m + 1)], "py", self.bl)
        o = np.argsort(ly); ly, lv = ly[o], np.maximum.accumulate(lv[o]) if lv.size else lv
        o = np.argsort(bx); bx, bv = bx[o], np.maximum.accumulate(bv[o]) if bv.size else bv
        o = np.argsort(tx); tx, tv = tx[o], np.maximum.accumulate(tv[o][::-1])[::-1] if tv.size else tv
        o = np.argsort(ry); ry, rv = ry[o], np.maximum.accumulate(rv[o][::-1])[::-1] if rv.size else rv
        # a point sitting exactly at a boundary coordinate is not below it: use strict
        # comparisons by shifting lookups (side="right" counts equal breakpoints, so
        # nudge the breakpoint arrays up/down by one ulp)
        ly, bx = np.nextafter(ly, np.inf), np.nextafter(bx, np.inf)
        return BoundaryFn(
            v=(a, b), c_int=int(c_int), eps_D=self.eps_D,
            corner_sw=_pad_get(self.PM, a - 1, b - 1),
            corner_ne=_pad_get(self.SM, a + 1, b + 1),
            left_y=ly, left_val=lv, bottom_x=bx, bottom_val=bv,
            top_x=tx, top_val=tv, right_y=ry, right_val=rv,
            max_sw=max(_pad_get(self.PM, a - 1, b), _pad_get(self.PM, a, b - 1)),
            max_ne=max(_pad_get(self.SM, a + 1, b), _pad_get(self.SM, a, b + 1)),
        )

    def slack_grid(self, c_int) -> np.ndarray:
        """R_v for every box."""
        m1 = self.m + 1
        out = np.empty((m1, m1), dtype=np.int64)
        for a in range(m1):
            for b in range(m1):
                out[a, b] = self.boundary((a, b), c_int).R
        return out

    def separable_slack_grid(self, c_int) -> np.ndarray:
        P = np.pad(self.PM, ((1, 0), (1, 0)))
        S = np.pad(self.SM, ((0, 1), (0, 1)))
        sw = np.maximum(P[:-1, 1:], P[1:, :-1])  # PM[a-1,b], PM[a,b-1]
        ne = np.maximum(S[1:, :-1], S[:-1, 1:])  # SM[a+1,b], SM[a,b+1]
        return c_int - sw - ne

    def to_config(self) -> PointConfig:
        xs = [self.px[a][b] for a in range(self.m + 1) for b in range(self.m + 1)]
        ys = [self.py[a][b] for a in range(self.m + 1) for b in range(self.m + 1)]
        return PointConfig(self.n, np.concatenate(xs), np.concatenate(ys), self.eps_D)


def boundary_fn(config: PointConfig, v, c_int: int) -> BoundaryFn:
    """Boundary function of box ``v`` from the points outside it.

    Raises ValueError when the exterior alone already forces a chain longer
    than ``c_int`` past the box (``R_v < 0``).
    """
    geo = _BoxGeometry(config.without_box(v))
    bf = geo.boundary(tuple(v), int(c_int))
    if bf.R < 0:
        raise ValueError(f"exterior incompatible with the constraint at box {tuple(v)}: R_v = {bf.R}")
    return bf


def box_slack(config: PointConfig, c_int: int) -> np.ndarray:
    """R_v for every box, with each box's own points excluded.

    Chain values of points SW of a box never use that box's points (and
    likewise NE), so one pass over the full configuration suffices.
    """
    return _BoxGeometry(config).slack_grid(int(c_int))


def eps_D_admissible(eps_D: float, eps: float) -> bool:
    """E(X | X <= 1) >= (1 - eps/4) eps_D^2 for X ~ Poisson(eps_D^2)."""
    lam = eps_D * eps_D
    return lam / (1 + lam) >= (1 - eps / 4) * lam


def saturation_stats(config: PointConfig, c: float, eps_D: float | None = None, eps: float = 0.04):
    """Per central box-diagonal: slack boxes (R_v >= 1), zero-slack boxes, saturation flag."""
    if eps_D is not None and abs(eps_D - config.eps_D) > 1e-12:
        config = PointConfig(config.n, config.xs, config.ys, eps_D)
    c_int = int(math.floor(c))
    R = box_slack(config, c_int)
    m = config.m
    rows = []
    for i in central_indices(GridSpec(m), eps):
        a = np.arange(max(0, i - m), min(i, m) + 1)
        r = R[a, i - a]
        slack = int(np.count_nonzero(r >= 1))
        rows.append({
            "i": i, "size": int(a.size), "slack": slack,
            "zero": int(np.count_nonzero(r == 0)),
            "saturated": bool(slack <= (1 - eps) * a.size),
        })
    return rows


def zero_slack_boxes(config: PointConfig, c: float) -> np.ndarray:
    """(k, 2) boxes with R_v = 0: each has a chain of length floor(c) through its boundary."""
    R = box_slack(config, int(math.floor(c)))
    return np.argwhere(R == 0)


@dataclass
class BoxExhausted:
    """Rejection budget ran out; ``tries`` draws were made."""

    tries: int
    exhausted: bool = True


def _draw_box(geo_eps, a, b, rng):
    k = rng.poisson(geo_eps * geo_eps)
    px = (a + rng.random(k)) * geo_eps
    py = (b + rng.random(k)) * geo_eps
    o = np.argsort(px)
    return px[o], py[o]


def box_resample(config: PointConfig, v, c: float, budget: int, rng: np.random.Generator):
    """Fresh content for box ``v`` given the rest, conditioned on all chains <= floor(c).

    Returns ``(new_config, tries)`` or a :class:`BoxExhausted`.
    """
    c_int = int(math.floor(c))
    bf = boundary_fn(config, v, c_int)
    a, b = v
    rest = config.without_box(v)
    for t in range(1, budget + 1):
        px, py = _draw_box(config.eps_D, a, b, rng)
        best, _ = bf.through_box(px, py)
        if best <= c_int:
            new = PointConfig(config.n, np.concatenate([rest.xs, px]), np.concatenate([rest.ys, py]), config.eps_D)
            return new, t
    return BoxExhausted(budget)


def poisson_rejection_sample(n: float, c: float, count: int, budget: int, seed: int,
                             stream: tuple = (), rate: float = 1.0, eps_D: float = 1.0,
                             start: int = 0):
    """Iid Poisson configurations with LIS <= floor(c); draw ``j`` uses step ``j``.

    Returns ``(accepted configs, tries, exhausted)``.
    """
    c_int = math.floor(c)
    out, j = [], start
    while len(out) < count and j - start < budget:
        cfg = sample_ppp(n, rate, step_generator(seed, stream, j), eps_D)
        j += 1
        if lis(cfg) <= c_int:
            out.append(cfg)
    return out, j - start, len(out) < count


def poisson_rejection_conditional(n: float, c: float, budget: int, seed: int, stream: tuple = (), **kw):
    """First iid configuration with LIS <= floor(c), or :class:`BoxExhausted`."""
    out, tries, ex = poisson_rejection_sample(n, c, 1, budget, seed, stream, **kw)
    return BoxExhausted(tries) if ex else out[0]


class PoissonGibbs:
    """Box-diagonal Gibbs sampler for the Poisson process given LIS <= floor(c)."""

    def __init__(self, config: PointConfig, c: float, seed: int, stream: tuple = (), budget: int = 100_000):
        self.c_int = int(math.floor(c))
        if lis(config) > self.c_int:
            raise ValueError("initial configuration violates the constraint")
        self.geo = _BoxGeometry(config)
        self.seed, self.stream, self.budget = seed, tuple(stream), budget
        self.sweep_count = 0
        self.tries = 0

    @classmethod
    def empty(cls, n: float, c: float, seed: int, eps_D: float = 1.0, **kw) -> "PoissonGibbs":
        return cls(PointConfig(n, np.empty(0), np.empty(0), eps_D), c, seed, **kw)

    @property
    def config(self) -> PointConfig:
        return self.geo.to_config()

    def sweep(self) -> "PoissonGibbs":
        geo, m = self.geo, self.geo.m
        m1 = m + 1
        for i in range(2 * m + 1):
            for a in range(max(0, i - m), min(i, m) + 1):
                b = i - a
                bf = geo.boundary((a, b), self.c_int)
                if bf.R < 0:
                    raise RuntimeError(f"negative slack at box {(a, b)}")
                rng = step_generator(self.seed, (*self.stream, self.sweep_count), a * m1 + b)
                for t in range(1, self.budget + 1):
                    px, py = _draw_box(geo.eps_D, a, b, rng)
                    best, val = bf.through_box(px, py)
                    if best <= self.c_int:
                        break
                else:
                    raise RuntimeError(f"box {(a, b)} exhausted its budget")
                self.tries += t
                geo.px[a][b], geo.py[a][b], geo.fl[a][b] = px, py, val
            geo.update_prefix_diagonal(i)
        # rebuild every chain value (backward ones change everywhere)
        cfg = geo.to_config()
        self.geo = _BoxGeometry(cfg)
        self.sweep_count += 1
        return self

    def lis(self) -> int:
        return lis(self.geo.to_config())
