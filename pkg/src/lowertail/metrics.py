"""Statistics over sample batches: containment, mass, gaps, restricted passage, shape."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from . import _kernels as K
from .distributions import law_from_spec
from .lattice import GridSpec, MonotoneCurve, RegionMask, cylinder, layout, strip
from .passage import restricted_passage_batch
from .poisson import lis
from .rng import step_generator, uniforms

__all__ = [
    "Estimate",
    "SampleBatch",
    "containment_probability",
    "median_curve",
    "mass_deficit",
    "concentration_statistic",
    "anticoncentration_curve",
    "strip_profile",
    "shape_check",
    "occupation",
    "heatmap_svg",
    "write_csv",
    "one_sided_proportion_test",
    "summary",
]


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    count: int
    hits: int | None = None

    def row(self, **extra) -> dict:
        out = dict(extra)
        out.update(value=self.value, stderr=self.stderr, count=self.count)
        if self.hits is not None:
            out["hits"] = self.hits
        return out


def _proportion(hits: np.ndarray) -> Estimate:
    k = int(hits.size)
    h = int(np.count_nonzero(hits))
    p = h / k if k else float("nan")
    se = math.sqrt(p * (1 - p) / k) if k else float("nan")
    return Estimate(p, se, k, h)


def summary(values, qs=(0.1, 0.25, 0.5, 0.75, 0.9)) -> dict:
    v = np.asarray(values, dtype=float)
    out = {"count": int(v.size), "mean": float(v.mean()),
           "stderr": float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else float("nan")}
    for q in qs:
        out[f"q{int(round(q * 100)):02d}"] = float(np.quantile(v, q))
    return out


@dataclass
class SampleBatch:
    """Samples that share parameters.

    Lattice batches carry ``L``, ``mass`` and, optionally, geodesics as
    diagonal-major index rows and full fields.  Poisson batches carry
    ``L`` (chain length), ``mass`` (point count) and ``witnesses``: per
    sample, the boxes with zero slack.  ``replica`` and ``sweep`` record where
    each sample came from.
    """

    model: str
    params: dict
    L: np.ndarray
    mass: np.ndarray
    replica: np.ndarray
    sweep: np.ndarray
    geodesics: np.ndarray | None = None
    fields: np.ndarray | None = None
    witnesses: list | None = None
    c: float = math.inf

    def __post_init__(self):
        k = len(self.L)
        for name in ("mass", "replica", "sweep"):
            if len(getattr(self, name)) != k:
                raise ValueError(f"{name} has {len(getattr(self, name))} entries, expected {k}")

    def __len__(self) -> int:
        return len(self.L)

    @property
    def grid(self) -> GridSpec:
        return GridSpec(int(self.params["n"]), int(self.params.get("d", 2)))

    @property
    def n(self):
        return self.params["n"]

    def samples_table(self) -> list[dict]:
        return [
            {"replica": int(r), "sweep": int(s), "L": float(l), "mass": float(m)}
            for r, s, l, m in zip(self.replica, self.sweep, self.L, self.mass)
        ]


def containment_probability(batch: SampleBatch, curve: MonotoneCurve, eps: float) -> Estimate:
    """Fraction of samples whose geodesic (or every zero-slack box) lies in the cylinder."""
    if batch.model == "poisson":
        n, eD = batch.params["n"], batch.params.get("eps_D", 1.0)
        hits = []
        for w in batch.witnesses:
            w = np.asarray(w, dtype=float).reshape(-1, 2)
            cx, cy = (w[:, 0] + 0.5) * eD, (w[:, 1] + 0.5) * eD
            hits.append(bool(np.all(np.abs(cy - n * curve(cx / n)) <= eps * n + 1e-9 * n)))
        return _proportion(np.array(hits, dtype=bool))
    if batch.geodesics is None:
        raise ValueError("batch has no geodesics")
    mask = cylinder(curve, eps, batch.grid).diag()
    return _proportion(mask[batch.geodesics].all(axis=1))


def geodesic_heights(batch: SampleBatch) -> np.ndarray:
    """(k, n+1): midpoint of the y-range each geodesic occupies in column x."""
    grid = batch.grid
    coords = layout(grid).coords[batch.geodesics]  # (k, 2n+1, 2)
    k, n = len(batch), grid.n
    lo = np.full((k, n + 1), np.inf)
    hi = np.full((k, n + 1), -np.inf)
    rows = np.repeat(np.arange(k), coords.shape[1])
    xs = coords[..., 0].ravel()
    ys = coords[..., 1].ravel().astype(float)
    np.minimum.at(lo, (rows, xs), ys)
    np.maximum.at(hi, (rows, xs), ys)
    return 0.5 * (lo + hi)


def median_curve(batch: SampleBatch) -> MonotoneCurve:
    """Per-column median of geodesic height, pinned to (0,0) and (1,1)."""
    n = batch.grid.n
    h = np.median(geodesic_heights(batch), axis=0) / n
    h[0], h[-1] = 0.0, 1.0
    return MonotoneCurve(np.arange(n + 1) / n, np.maximum.accumulate(np.clip(h, 0, 1)))


def mass_deficit(batch: SampleBatch, mean: float | None = None) -> dict:
    """Summary of total mass over its unconditional mean m (n+1)^d."""
    if mean is None:
        mean = law_from_spec(batch.params.get("law", "exp")).mean
    grid = batch.grid
    ratio = np.asarray(batch.mass, dtype=float) / (mean * grid.size)
    return summary(ratio)


def concentration_statistic(batch: SampleBatch, c: float | None = None) -> np.ndarray:
    """n^{d-1} |c - L_n| per sample (zero when L_n hits c)."""
    c = batch.c if c is None else c
    grid = batch.grid
    return grid.n ** (grid.d - 1) * np.abs(c - np.asarray(batch.L, dtype=float))


def anticoncentration_curve(batch: SampleBatch, masks, H: float, c: float | None = None) -> list[dict]:
    """P(L_n(A) >= c - H/n^{d-1}) for each mask, against |A|/n^2."""
    if batch.fields is None:
        raise ValueError("batch has no retained fields")
    c = batch.c if c is None else c
    grid = batch.grid
    bar = c - H / grid.n ** (grid.d - 1)
    rows = []
    for label, A in (masks.items() if isinstance(masks, dict) else enumerate(masks)):
        vals = restricted_passage_batch(grid, batch.fields, A)
        est = _proportion(vals >= bar)
        rows.append(est.row(mask=label, area=len(A) / grid.n ** 2))
    return rows


@dataclass
class StripProfile:
    K: int
    index: np.ndarray
    values: np.ndarray
    bar: float | None = None

    @property
    def fraction_meeting(self) -> float:
        if self.bar is None:
            return float("nan")
        ok = np.isfinite(self.values)
        return float(np.mean(self.values[ok] >= self.bar)) if ok.any() else float("nan")


def strip_profile(weights: np.ndarray, K: int, bar: float | None = None, imax: int | None = None) -> StripProfile:
    """Best path inside each strip |x - y - 4iK| <= K.

    For strip i >= 0 the path runs from (4iK, 0) to (n, n - 4iK); for i < 0
    from (0, -4iK) to (n + 4iK, n).  ``weights`` is a grid-shaped 2-d array.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("strip profiles are defined on square 2-d fields")
    n = w.shape[0] - 1
    if imax is None:
        imax = n // (4 * K)
    idx, vals = [], []
    for i in range(-imax, imax + 1):
        s = 4 * abs(i) * K
        if s > n:
            continue
        sub = w[s:, : n + 1 - s] if i >= 0 else w[: n + 1 - s, s:]
        g = GridSpec(n - s)
        mask = strip(GridSpec(n), i, K).membership
        msub = mask[s:, : n + 1 - s] if i >= 0 else mask[: n + 1 - s, s:]
        lay = layout(g)
        f = float(restricted_passage_batch(g, lay.to_diag(sub)[None, :], RegionMask(g, msub))[0])
        idx.append(i)
        vals.append(f)
    return StripProfile(K, np.array(idx), np.array(vals), bar)


def shape_check(aspects, n: int, replicas: int, seed: int, law="exp", model: str = "lattice") -> list[dict]:
    """Empirical E L/n on an (nx) x (ny) rectangle against the limit shape.

    Lattice: G(x, y) = (sqrt x + sqrt y)^2 scaled by the law (exact for Exp(1)).
    Poisson: 2 sqrt(xy).
    """
    rows = []
    law = law_from_spec(law)
    for j, (ax, ay) in enumerate(aspects):
        vals = np.empty(replicas)
        for r in range(replicas):
            if model == "lattice":
                shape = (int(math.floor(n * ax)) + 1, int(math.floor(n * ay)) + 1)
                w = law.ppf(uniforms(seed, (j,), r, shape))
                vals[r] = K.rect_passage(np.ascontiguousarray(w, dtype=float)) / n
            else:
                rng = step_generator(seed, (j,), r)
                N = rng.poisson(n * n * ax * ay)
                xy = rng.random((N, 2)) * (n * ax, n * ay)
                vals[r] = lis(xy) / n
        G = (math.sqrt(ax) + math.sqrt(ay)) ** 2 if model == "lattice" else 2 * math.sqrt(ax * ay)
        s = summary(vals, qs=())
        rows.append({"model": model, "x": ax, "y": ay, "n": n, "mean": s["mean"],
                     "stderr": s["stderr"], "count": replicas, "limit": G})
    return rows


def occupation(batch: SampleBatch) -> np.ndarray:
    """How many geodesics visit each vertex (grid-shaped counts)."""
    grid = batch.grid
    counts = np.bincount(batch.geodesics.ravel(), minlength=grid.size)
    return layout(grid).to_grid(counts)


def heatmap_svg(counts: np.ndarray, path, max_cells: int = 128) -> None:
    """Grayscale SVG of a 2-d count array (darker = more visits), y axis upward."""
    c = np.asarray(counts, dtype=float)
    step = max(1, int(math.ceil(c.shape[0] / max_cells)))
    if step > 1:
        pad = (-c.shape[0]) % step, (-c.shape[1]) % step
        c = np.pad(c, ((0, pad[0]), (0, pad[1])))
        c = c.reshape(c.shape[0] // step, step, c.shape[1] // step, step).sum(axis=(1, 3))
    top = c.max() if c.max() > 0 else 1.0
    nx, ny = c.shape
    px = 4
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{nx * px}" height="{ny * px}" '
             f'viewBox="0 0 {nx * px} {ny * px}">',
             f'<rect width="{nx * px}" height="{ny * px}" fill="#ffffff"/>']
    for x in range(nx):
        for y in range(ny):
            if c[x, y] <= 0:
                continue
            g = int(round(255 * (1 - c[x, y] / top)))
            parts.append(f'<rect x="{x * px}" y="{(ny - 1 - y) * px}" width="{px}" height="{px}" '
                         f'fill="#{g:02x}{g:02x}{g:02x}"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(rows: list[dict], path) -> None:
    """One row per estimate; floats written with repr so output is byte-stable."""
    rows = list(rows)
    keys: list = []
    for r in rows:
        for k in r:
            if k not in keys:
                keys.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for r in rows:
            w.writerow([_fmt(r.get(k, "")) for k in keys])


def one_sided_proportion_test(a: Estimate, b: Estimate) -> float:
    """p-value for H1: proportion a < proportion b (Fisher's exact test)."""
    table = [[a.hits, a.count - a.hits], [b.hits, b.count - b.hits]]
    return float(stats.fisher_exact(table, alternative="less")[1])
