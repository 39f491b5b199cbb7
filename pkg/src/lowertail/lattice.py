"""Grid geometry for directed last-passage percolation on the box [0, n]^d.

Vertices are integer tuples ``(x_0, ..., x_{d-1})``; arrays holding one value
per vertex use C order with shape ``(n+1,)*d`` so ``w[x, y]`` is the weight of
vertex ``(x, y)``.  Internally the DP kernels work in *diagonal-major* order:
vertices sorted by coordinate sum, lexicographically within a sum.  The
:class:`DiagonalLayout` translates between the two.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

__all__ = [
    "GridSpec",
    "WeightField",
    "RegionMask",
    "MonotoneCurve",
    "DiagonalLayout",
    "layout",
    "anti_diagonal",
    "strip",
    "cylinder",
    "central_indices",
]


@dataclass(frozen=True)
class GridSpec:
    """The vertex box [0, n]^d."""

    n: int
    d: int = 2

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise ValueError(f"n must be a nonnegative integer, got {self.n!r}")
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"d must be an integer >= 2, got {self.d!r}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n + 1,) * self.d

    @property
    def size(self) -> int:
        return (self.n + 1) ** self.d

    @property
    def n_diagonals(self) -> int:
        return self.d * self.n + 1

    def contains(self, v) -> bool:
        return len(v) == self.d and all(0 <= c <= self.n for c in v)


class DiagonalLayout:
    """Diagonal-major indexing of a grid.

    Attributes
    ----------
    order : (N,) int64
        ``order[k]`` is the flat C index of the k-th vertex in diagonal-major order.
    pos : (N,) int64
        Inverse permutation of ``order``.
    pred, succ : (N, d) int64
        Diagonal-major index of the in-/out-neighbour obtained by decrementing /
        incrementing coordinate ``j``; -1 where it falls outside the box.
    ptr : (d*n + 2,) int64
        Diagonal ``i`` occupies ``[ptr[i], ptr[i+1])``.
    """

    def __init__(self, grid: GridSpec):
        self.grid = grid
        n, d = grid.n, grid.d
        coords = np.indices(grid.shape).reshape(d, -1)
        s = coords.sum(axis=0)
        # lexsort: last key is primary
        order = np.lexsort(tuple(coords[::-1]) + (s,))
        pos = np.empty_like(order)
        pos[order] = np.arange(order.size)
        strides = np.array([(n + 1) ** (d - 1 - j) for j in range(d)], dtype=np.int64)
        c_ord = coords[:, order]
        pred = np.full((order.size, d), -1, dtype=np.int64)
        succ = np.full((order.size, d), -1, dtype=np.int64)
        for j in range(d):
            has = c_ord[j] > 0
            pred[has, j] = pos[order[has] - strides[j]]
            has = c_ord[j] < n
            succ[has, j] = pos[order[has] + strides[j]]
        self.order = order.astype(np.int64)
        self.pos = pos.astype(np.int64)
        self.pred = pred
        self.succ = succ
        self.ptr = np.searchsorted(s[order], np.arange(grid.n_diagonals + 1)).astype(np.int64)
        self.diag_of = s[order].astype(np.int64)
        self.coords = c_ord.T.copy()  # (N, d) coordinates in diagonal-major order

    def to_diag(self, arr: np.ndarray) -> np.ndarray:
        """Grid-shaped array (trailing ``grid.shape`` axes) -> diagonal-major vector(s)."""
        lead = arr.shape[: arr.ndim - self.grid.d]
        return np.ascontiguousarray(arr.reshape(lead + (-1,))[..., self.order])

    def to_grid(self, vec: np.ndarray) -> np.ndarray:
        lead = vec.shape[:-1]
        return vec[..., self.pos].reshape(lead + self.grid.shape)

    def index(self, v) -> int:
        return int(self.pos[np.ravel_multi_index(tuple(v), self.grid.shape)])

    def diagonal_slice(self, i: int) -> slice:
        return slice(int(self.ptr[i]), int(self.ptr[i + 1]))


@lru_cache(maxsize=32)
def layout(grid: GridSpec) -> DiagonalLayout:
    return DiagonalLayout(grid)


@dataclass(frozen=True, eq=False)
class WeightField:
    """Nonnegative vertex weights on a grid, stored as a ``grid.shape`` array."""

    grid: GridSpec
    weights: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=float)
        if w.shape != self.grid.shape:
            raise ValueError(f"weights shape {w.shape} does not match grid {self.grid.shape}")
        if not np.all(w >= 0):
            raise ValueError("weights must be nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_diag(cls, grid: GridSpec, vec: np.ndarray) -> "WeightField":
        return cls(grid, layout(grid).to_grid(np.asarray(vec, dtype=float)))

    def diag(self) -> np.ndarray:
        return layout(self.grid).to_diag(self.weights)

    def scaled(self, t: float) -> "WeightField":
        return WeightField(self.grid, self.weights * t)

    def total(self) -> float:
        return float(self.weights.sum())

    def __getitem__(self, v) -> float:
        return float(self.weights[tuple(v)])


@dataclass(frozen=True, eq=False)
class RegionMask:
    """A subset of the vertex box, held as a boolean ``grid.shape`` array."""

    grid: GridSpec
    membership: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(self.membership, dtype=bool)
        if m.shape != self.grid.shape:
            raise ValueError(f"mask shape {m.shape} does not match grid {self.grid.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "membership", m)

    @classmethod
    def full(cls, grid: GridSpec) -> "RegionMask":
        return cls(grid, np.ones(grid.shape, dtype=bool))

    @classmethod
    def from_vertices(cls, grid: GridSpec, vertices) -> "RegionMask":
        m = np.zeros(grid.shape, dtype=bool)
        for v in vertices:
            m[tuple(v)] = True
        return cls(grid, m)

    def __len__(self) -> int:
        return int(self.membership.sum())

    @property
    def cardinality(self) -> int:
        return len(self)

    def __contains__(self, v) -> bool:
        return self.grid.contains(v) and bool(self.membership[tuple(v)])

    def __and__(self, other: "RegionMask") -> "RegionMask":
        return RegionMask(self.grid, self.membership & other.membership)

    def __or__(self, other: "RegionMask") -> "RegionMask":
        return RegionMask(self.grid, self.membership | other.membership)

    def issubset(self, other: "RegionMask") -> bool:
        return not np.any(self.membership & ~other.membership)

    def vertices(self) -> list[tuple[int, ...]]:
        return [tuple(int(c) for c in v) for v in np.argwhere(self.membership)]

    def diag(self) -> np.ndarray:
        return layout(self.grid).to_diag(self.membership)

    # Run-length encoding: one entry per first-axis row that has members,
    # [row, start0, len0, start1, len1, ...] over the flattened remaining axes.
    def to_rle(self) -> dict:
        rows = []
        flat = self.membership.reshape(self.grid.n + 1, -1)
        for r, line in enumerate(flat):
            if not line.any():
                continue
            padded = np.concatenate(([False], line, [False])).astype(np.int8)
            edges = np.flatnonzero(np.diff(padded))
            starts, ends = edges[::2], edges[1::2]
            entry = [r]
            for a, b in zip(starts, ends):
                entry += [int(a), int(b - a)]
            rows.append(entry)
        return {"n": self.grid.n, "d": self.grid.d, "rows": rows}

    @classmethod
    def from_rle(cls, data: dict) -> "RegionMask":
        grid = GridSpec(int(data["n"]), int(data.get("d", 2)))
        flat = np.zeros((grid.n + 1, grid.size // (grid.n + 1)), dtype=bool)
        for entry in data["rows"]:
            r, runs = entry[0], entry[1:]
            for a, ln in zip(runs[::2], runs[1::2]):
                flat[r, a : a + ln] = True
        return cls(grid, flat.reshape(grid.shape))


@dataclass(frozen=True, eq=False)
class MonotoneCurve:
    """Piecewise-linear nondecreasing curve on [0, 1] from (0, 0) to (1, 1)."""

    t: np.ndarray
    gamma: np.ndarray = field(repr=False)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        g = np.asarray(self.gamma, dtype=float)
        if t.ndim != 1 or t.shape != g.shape or t.size < 2:
            raise ValueError("curve needs matching 1-d knot arrays with at least two knots")
        if t[0] != 0 or g[0] != 0 or t[-1] != 1 or g[-1] != 1:
            raise ValueError("curve must start at (0, 0) and end at (1, 1)")
        if np.any(np.diff(t) <= 0):
            raise ValueError("knot abscissae must be strictly increasing")
        if np.any(np.diff(g) < 0):
            raise ValueError("curve values must be nondecreasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "gamma", g)

    @classmethod
    def identity(cls) -> "MonotoneCurve":
        return cls(np.array([0.0, 1.0]), np.array([0.0, 1.0]))

    @classmethod
    def through(cls, *points) -> "MonotoneCurve":
        """Curve through the given interior knots ``(t, gamma(t))``."""
        pts = [(0.0, 0.0), *points, (1.0, 1.0)]
        return cls(np.array([p[0] for p in pts]), np.array([p[1] for p in pts]))

    @classmethod
    def load(cls, path) -> "MonotoneCurve":
        data = np.loadtxt(path, ndmin=2, delimiter=None if not str(path).endswith(".csv") else ",")
        return cls(data[:, 0], data[:, 1])

    def save(self, path) -> None:
        np.savetxt(path, np.column_stack([self.t, self.gamma]), fmt="%.17g")

    def __call__(self, s):
        return np.interp(s, self.t, self.gamma)

    def to_json(self) -> dict:
        return {"t": self.t.tolist(), "gamma": self.gamma.tolist()}


def anti_diagonal(grid: GridSpec, i: int) -> list[tuple[int, ...]]:
    """Vertices with coordinate sum ``i`` in lexicographic order."""
    if not 0 <= i <= grid.d * grid.n:
        raise IndexError(f"diagonal index {i} outside [0, {grid.d * grid.n}]")
    lay = layout(grid)
    return [tuple(int(c) for c in v) for v in lay.coords[lay.diagonal_slice(i)]]


def strip(grid: GridSpec, i: int, K: int) -> RegionMask:
    """``{(x, y): |x - y - 4iK| <= K}``; strips for distinct ``i`` are disjoint."""
    if grid.d != 2:
        raise ValueError("strips are defined for d = 2")
    if K < 1:
        raise ValueError("K must be a positive integer")
    x, y = np.indices(grid.shape)
    return RegionMask(grid, np.abs(x - y - 4 * i * K) <= K)


def cylinder(curve: MonotoneCurve, eps: float, grid: GridSpec) -> RegionMask:
    """Vertices within vertical distance ``eps*n`` of the scaled curve."""
    if grid.d != 2:
        raise ValueError("cylinders are defined for d = 2")
    if eps <= 0:
        raise ValueError("eps must be positive")
    n = grid.n
    xs = np.arange(n + 1)
    centre = n * curve(xs / n) if n > 0 else np.zeros(1)
    y = np.arange(n + 1)
    # small slack absorbs rounding in n*gamma(x/n) and eps*n
    tol = 1e-9 * max(n, 1)
    member = np.abs(y[None, :] - centre[:, None]) <= eps * n + tol
    return RegionMask(grid, member)


def central_indices(grid: GridSpec, eps) -> list[int]:
    """Diagonals ``i`` with ``|i - n| <= (1 - sqrt(eps)/4) n``.

    The comparison is done exactly in rationals after squaring, so boundary
    cases are decided without floating-point noise.
    """
    if grid.d != 2:
        raise ValueError("central index set is defined for d = 2")
    e = Fraction(str(eps)) if not isinstance(eps, Fraction) else eps
    if not 0 < e < 1:
        raise ValueError("eps must lie in (0, 1)")
    n = grid.n
    out = []
    for i in range(2 * n + 1):
        room = 4 * (n - abs(i - n))  # need room >= sqrt(eps) * n
        if room >= 0 and Fraction(room * room) >= e * n * n:
            out.append(i)
    return out


def save_mask(mask: RegionMask, path) -> None:
    Path(path).write_text(json.dumps(mask.to_rle()))


def load_mask(path) -> RegionMask:
    return RegionMask.from_rle(json.loads(Path(path).read_text()))

