"""Last-passage values, geodesics, restricted passage times and slack.

Passage weights include both endpoint weights.  Tables are kept in
diagonal-major order together with watermarks recording which diagonals are
valid, so a sweep can extend them one diagonal at a time.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .lattice import GridSpec, RegionMask, WeightField, layout

__all__ = [
    "WatermarkError",
    "PassageTables",
    "Geodesic",
    "forward_table",
    "backward_table",
    "passage_tables",
    "last_passage",
    "last_passage_batch",
    "geodesic",
    "restricted_passage",
    "slack_field",
    "advance_forward",
    "retreat_backward",
]


class WatermarkError(RuntimeError):
    """An incremental update was requested on a diagonal not adjacent to the valid region."""


@dataclass
class PassageTables:
    """Forward L(0, v) and backward L(v, n) tables in diagonal-major order.

    ``forward_watermark`` is the last diagonal whose forward values are valid
    (-1 when none are); ``backward_watermark`` is the first diagonal whose
    backward values are valid (``d*n + 1`` when none are).
    """

    grid: GridSpec
    forward: np.ndarray
    backward: np.ndarray
    forward_watermark: int
    backward_watermark: int

    @classmethod
    def empty(cls, grid: GridSpec) -> "PassageTables":
        N = grid.size
        return cls(grid, np.full(N, np.nan), np.full(N, np.nan), -1, grid.n_diagonals)

    @property
    def fully_valid(self) -> bool:
        return self.forward_watermark == self.grid.n_diagonals - 1 and self.backward_watermark == 0

    @property
    def L(self) -> float:
        if self.forward_watermark < self.grid.n_diagonals - 1:
            raise WatermarkError("forward table does not reach the far corner")
        return float(self.forward[-1])

    def forward_at(self, v) -> float:
        return float(self.forward[layout(self.grid).index(v)])

    def backward_at(self, v) -> float:
        return float(self.backward[layout(self.grid).index(v)])

    def forward_grid(self) -> np.ndarray:
        return layout(self.grid).to_grid(self.forward)

    def backward_grid(self) -> np.ndarray:
        return layout(self.grid).to_grid(self.backward)


@dataclass(frozen=True)
class Geodesic:
    """A directed path from the origin to the far corner, as an (d*n+1, d) array."""

    vertices: np.ndarray

    def __len__(self) -> int:
        return len(self.vertices)

    def weight(self, field: WeightField) -> float:
        return float(field.weights[tuple(self.vertices.T)].sum())

    def to_csv(self, path) -> None:
        d = self.vertices.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{j}" for j in range(d)])
            w.writerows(self.vertices.tolist())

    @classmethod
    def from_csv(cls, path) -> "Geodesic":
        return cls(np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2))


def _rows(field: WeightField) -> np.ndarray:
    return field.diag()[None, :]


def forward_table(field: WeightField) -> PassageTables:
    lay = layout(field.grid)
    t = PassageTables.empty(field.grid)
    f = t.forward[None, :]
    K.forward_range(_rows(field), f, lay.pred, 0, field.grid.size)
    t.forward_watermark = field.grid.n_diagonals - 1
    return t


def backward_table(field: WeightField, tables: PassageTables | None = None) -> PassageTables:
    lay = layout(field.grid)
    t = tables if tables is not None else PassageTables.empty(field.grid)
    K.backward_range(_rows(field), t.backward[None, :], lay.succ, 0, field.grid.size)
    t.backward_watermark = 0
    return t


def passage_tables(field: WeightField) -> PassageTables:
    """Both tables, fully valid."""
    return backward_table(field, forward_table(field))


def last_passage(field: WeightField) -> float:
    return float(K.last_passage(_rows(field), layout(field.grid).pred)[0])


def last_passage_batch(grid: GridSpec, x: np.ndarray) -> np.ndarray:
    """L_n for each row of a ``(B, N)`` diagonal-major weight array."""
    return K.last_passage(np.ascontiguousarray(x, dtype=float), layout(grid).pred)


def geodesic(field: WeightField, tables: PassageTables | None = None) -> Geodesic:
    """Backtrack the maximising path.

    Ties go to the in-neighbour reached by decrementing the lowest coordinate
    index, so equal weights on (1,0) and (0,1) give the path through (0,1).
    """
    if tables is None:
        tables = forward_table(field)
    elif tables.forward_watermark < field.grid.n_diagonals - 1:
        raise WatermarkError("geodesic needs a complete forward table")
    lay = layout(field.grid)
    idx = K.backtrack(tables.forward, lay.pred, field.grid.n_diagonals - 1)
    return Geodesic(lay.coords[idx].copy())


def geodesic_indices(grid: GridSpec, fwd_row: np.ndarray) -> np.ndarray:
    """Diagonal-major geodesic indices from a forward-table row."""
    return K.backtrack(fwd_row, layout(grid).pred, grid.n_diagonals - 1)


def restricted_passage(field: WeightField, A: RegionMask):
    """Best path weight using vertices of ``A`` only, and the path.

    Returns ``(-inf, None)`` when no directed path from the origin to the far
    corner stays inside ``A``.
    """
    lay = layout(field.grid)
    f = K.masked_passage(_rows(field), A.diag(), lay.pred)[0]
    val = float(f[-1])
    if val == -np.inf:
        return val, None
    idx = K.backtrack(f, lay.pred, field.grid.n_diagonals - 1)
    return val, Geodesic(lay.coords[idx].copy())


def restricted_passage_batch(grid: GridSpec, x: np.ndarray, A: RegionMask) -> np.ndarray:
    """A-restricted passage values for each row of a diagonal-major batch."""
    f = K.masked_passage(np.ascontiguousarray(x, dtype=float), A.diag(), layout(grid).pred)
    return f[:, -1].copy()


def slack_field(field: WeightField, tables: PassageTables, c: float, i: int) -> dict:
    """R_v = c - (best path weight through v excluding X_v) for v on diagonal i."""
    grid = field.grid
    if not 0 <= i < grid.n_diagonals:
        raise IndexError(f"diagonal {i} outside [0, {grid.n_diagonals - 1}]")
    if tables.forward_watermark < i - 1 or tables.backward_watermark > i + 1:
        raise WatermarkError(f"tables not valid around diagonal {i}")
    lay = layout(grid)
    sl = lay.diagonal_slice(i)
    R = K.slack_range(
        _rows(field), tables.forward[None, :], tables.backward[None, :],
        lay.pred, lay.succ, float(c), sl.start, sl.stop,
    )[0]
    return {tuple(int(a) for a in lay.coords[k]): float(r) for k, r in zip(range(sl.start, sl.stop), R)}


def advance_forward(tables: PassageTables, field: WeightField, i: int) -> PassageTables:
    """Make forward values valid on diagonal i, given validity through i-1."""
    if i != tables.forward_watermark + 1:
        raise WatermarkError(f"forward watermark at {tables.forward_watermark}, cannot advance to {i}")
    lay = layout(field.grid)
    sl = lay.diagonal_slice(i)
    K.forward_range(_rows(field), tables.forward[None, :], lay.pred, sl.start, sl.stop)
    tables.forward_watermark = i
    return tables


def retreat_backward(tables: PassageTables, field: WeightField, i: int) -> PassageTables:
    """Make backward values valid on diagonal i, given validity from i+1."""
    if i != tables.backward_watermark - 1:
        raise WatermarkError(f"backward watermark at {tables.backward_watermark}, cannot retreat to {i}")
    lay = layout(field.grid)
    sl = lay.diagonal_slice(i)
    K.backward_range(_rows(field), tables.backward[None, :], lay.succ, sl.start, sl.stop)
    tables.backward_watermark = i
    return tables


def invalidate_from(tables: PassageTables, i: int) -> PassageTables:
    """Mark forward values on diagonals >= i and backward values on <= i stale."""
    tables.forward_watermark = min(tables.forward_watermark, i - 1)
    tables.backward_watermark = max(tables.backward_watermark, i + 1)
    return tables
