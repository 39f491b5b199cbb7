"""Exact MCMC for the weight field conditioned on {L_n <= c}.

Given every weight off an anti-diagonal, the weights on it are independent,
each distributed as the weight law truncated at its slack R_v.  A sweep
resamples the diagonals in ascending order, extending the forward table as
it goes, and rebuilds the backward table once at the end.

A :class:`GibbsState` holds ``B`` independent chains as rows of a
``(B, N)`` diagonal-major array; every chain reads its uniforms from a
counter-based stream indexed by the sweep number.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dfield
from pathlib import Path

import numpy as np

from . import __version__
from . import _kernels as K
from .distributions import (
    DiscreteLaw,
    ExpLaw,
    WeightLaw,
    law_from_spec,
    sample_trunc_gamma,
    solve_M,
)
from .lattice import GridSpec, RegionMask, WeightField, central_indices, layout
from .passage import PassageTables, geodesic_indices
from .rng import step_generator, uniforms

__all__ = [
    "InfeasibleStateError",
    "GibbsState",
    "CoupledState",
    "RejectionResult",
    "init_state",
    "init_batch",
    "gibbs_sweep",
    "run_sweeps",
    "region_sum_move",
    "theta_max",
    "coupled_sweep",
    "init_coupled",
    "rejection_oracle",
    "rejection_sample",
    "event_B",
    "event_M",
    "save_checkpoint",
    "load_checkpoint",
]

_REGION_STREAM = 7
_INIT_STREAM = 3


class InfeasibleStateError(RuntimeError):
    """A chain was found outside {L_n <= c}."""


def feasibility_margin(grid: GridSpec, c: float, law: WeightLaw) -> float:
    """Head-room kept below c so floating-point path sums never exceed it.

    A path sum has d*n+1 terms; each addition can round up by half an ulp.
    Discrete laws add exact representable levels and need no margin.
    """
    if isinstance(law, DiscreteLaw) or not math.isfinite(c):
        return 0.0
    return 4.0 * (grid.n_diagonals + 1) * np.finfo(float).eps * max(abs(c), 1.0)


@dataclass
class GibbsState:
    grid: GridSpec
    law: WeightLaw
    c: float
    x: np.ndarray  # (B, N) diagonal-major weights
    fwd: np.ndarray
    bwd: np.ndarray
    seed: int
    stream: tuple = ()
    sweep_count: int = 0
    move_count: int = 0
    margin: float = dfield(default=0.0)

    @property
    def B(self) -> int:
        return self.x.shape[0]

    @property
    def threshold(self) -> float:
        return self.c

    @property
    def L(self) -> np.ndarray:
        return self.fwd[:, -1].copy()

    @property
    def mass(self) -> np.ndarray:
        return self.x.sum(axis=1)

    def field(self, b: int = 0) -> WeightField:
        return WeightField.from_diag(self.grid, self.x[b])

    def tables(self, b: int = 0) -> PassageTables:
        nd = self.grid.n_diagonals
        return PassageTables(self.grid, self.fwd[b].copy(), self.bwd[b].copy(), nd - 1, 0)

    def geodesic_indices(self, b: int = 0) -> np.ndarray:
        return geodesic_indices(self.grid, self.fwd[b])

    def recompute(self) -> None:
        lay = layout(self.grid)
        K.forward_range(self.x, self.fwd, lay.pred, 0, self.grid.size)
        K.backward_range(self.x, self.bwd, lay.succ, 0, self.grid.size)

    def check(self) -> None:
        """Exact recomputation of L_n; raises if any chain left the event."""
        L = K.last_passage(self.x, layout(self.grid).pred)
        bad = np.flatnonzero(L > self.c)
        if bad.size:
            raise InfeasibleStateError(f"chain {bad[0]} has L_n = {L[bad[0]]!r} > c = {self.c!r}")


def _tables_for(grid: GridSpec, x: np.ndarray):
    lay = layout(grid)
    fwd = np.empty_like(x)
    bwd = np.empty_like(x)
    K.forward_range(x, fwd, lay.pred, 0, grid.size)
    K.backward_range(x, bwd, lay.succ, 0, grid.size)
    return fwd, bwd


def init_state(field0, c: float, s0: float = 0.99, keep_if_feasible: bool = False,
               law="exp", seed: int = 0, stream: tuple = ()) -> GibbsState:
    """Feasible starting state by global scaling: L_n(t X) = t L_n(X).

    ``field0`` is a WeightField, a list of them, or a ``(B, N)`` diagonal-major
    array.  Each chain is scaled so that its passage time is ``s0 * c``.
    """
    law = law_from_spec(law)
    if not 0 < s0 < 1 and not (s0 == 1 and isinstance(law, DiscreteLaw)):
        raise ValueError("s0 must lie in (0, 1)")
    if isinstance(field0, WeightField):
        grid, x = field0.grid, field0.diag()[None, :]
    elif isinstance(field0, (list, tuple)):
        grid = field0[0].grid
        x = np.stack([f.diag() for f in field0])
    else:
        raise TypeError("field0 must be a WeightField or a list of them; use init_batch for arrays")
    return _init_from_array(grid, np.array(x, dtype=float), c, s0, keep_if_feasible, law, seed, stream)


def _init_from_array(grid, x, c, s0, keep_if_feasible, law, seed, stream):
    L = K.last_passage(x, layout(grid).pred)
    if np.any(L <= 0):
        raise ValueError("initial field has zero passage time; cannot scale to the threshold")
    scale = s0 * c / L
    if keep_if_feasible:
        scale = np.where(L <= s0 * c, 1.0, scale)
    if math.isfinite(c):
        x *= scale[:, None]
    fwd, bwd = _tables_for(grid, x)
    st = GibbsState(grid, law, float(c), x, fwd, bwd, int(seed), tuple(stream),
                    margin=feasibility_margin(grid, c, law))
    st.check()
    return st


def init_batch(grid: GridSpec, c: float, B: int, law="exp", seed: int = 0, stream: tuple = (),
               s0: float = 0.99) -> GibbsState:
    """B chains started from scaled iid fields drawn from their own stream."""
    law = law_from_spec(law)
    u = uniforms(seed, (*stream, _INIT_STREAM), 0, (B, grid.size))
    x = np.ascontiguousarray(law.ppf(u), dtype=float)
    return _init_from_array(grid, x, c, s0, False, law, seed, stream)


_NO_FREE = np.empty((0, 0))


def gibbs_sweep(state: GibbsState, u: np.ndarray | None = None, free: np.ndarray | None = None) -> GibbsState:
    """One ascending diagonal sweep for every chain; modifies and returns ``state``.

    ``free``, if given, is filled with the untruncated draws F^-1(u).
    """
    grid, lay = state.grid, layout(state.grid)
    if u is None:
        u = uniforms(state.seed, state.stream, state.sweep_count, state.x.shape)
    tol = 4 * state.margin + 1e-12 * max(abs(state.c), 1.0) * (not isinstance(state.law, DiscreteLaw))
    if isinstance(state.law, ExpLaw):
        bad = K.sweep_exp(state.x, state.fwd, state.bwd, lay.pred, lay.succ, u,
                          state.c, state.margin, tol, _NO_FREE if free is None else free)
        if bad >= 0:
            b, k = divmod(bad, grid.size)
            raise InfeasibleStateError(f"negative slack at chain {b}, vertex {tuple(lay.coords[k])}")
    else:
        for i in range(grid.n_diagonals):
            _resample_diagonal(state, i, u, tol)
        if free is not None:
            free[...] = state.law.ppf(u)
        K.backward_range(state.x, state.bwd, lay.succ, 0, grid.size)
    state.sweep_count += 1
    if np.any(state.fwd[:, -1] > state.c):
        raise InfeasibleStateError("sweep produced L_n above the threshold")
    return state


def _resample_diagonal(state: GibbsState, i: int, u: np.ndarray, tol: float) -> None:
    lay = layout(state.grid)
    lo, hi = int(lay.ptr[i]), int(lay.ptr[i + 1])
    R = K.slack_range(state.x, state.fwd, state.bwd, lay.pred, lay.succ, state.c, lo, hi)
    if np.any(R < -tol):
        b, k = np.argwhere(R < -tol)[0]
        raise InfeasibleStateError(f"negative slack at chain {b}, vertex {tuple(lay.coords[lo + k])}")
    R -= state.margin
    pos = R > 0
    xs = np.zeros_like(R)
    if isinstance(state.law, DiscreteLaw):
        pos = R >= 0
    if pos.any():
        xs[pos] = state.law.trunc_ppf(u[:, lo:hi][pos], R[pos])
    state.x[:, lo:hi] = xs
    K.forward_range(state.x, state.fwd, lay.pred, lo, hi)


def run_sweeps(state: GibbsState, k: int) -> GibbsState:
    for _ in range(k):
        gibbs_sweep(state)
    return state


# ------------------------------------------------------------------ region moves

def theta_max(grid: GridSpec, x: np.ndarray, A: np.ndarray, c: float, tol: float = 1e-9):
    """Largest total mass of region ``A`` keeping L_n <= c, directions fixed.

    ``x`` is one diagonal-major field and ``A`` a boolean diagonal-major mask.
    Returns ``(theta, bound)`` where ``bound = c Z_A / L_n(A; X)`` is the
    a-priori upper limit used to bracket the bisection.
    """
    pred = layout(grid).pred
    Z = float(x[A].sum())
    if Z <= 0:
        raise ValueError("region carries zero mass; directions undefined")
    Y = x[A] / Z
    work = x.copy()[None, :]

    def L(z):
        work[0, A] = z * Y
        return float(K.last_passage(work, pred)[0])

    L_A = float(K.last_passage((x * A)[None, :], pred)[0])
    bound = c * Z / L_A
    lo, hi = Z, bound
    if L(lo) > c:
        raise InfeasibleStateError("current field already violates the threshold")
    if L(hi) < c * (1 - 1e-12):
        raise RuntimeError("bisection failed to bracket the threshold crossing")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if L(mid) <= c:
            lo = mid
        else:
            hi = mid
    return lo, bound


def _sample_general_sum(law: WeightLaw, Y: np.ndarray, top: float, u: float, npts: int = 4097) -> float:
    """Inverse-CDF draw from the density z^{k-1} prod f(z y_v) on (0, top]."""
    k = Y.size
    z = np.linspace(0.0, top, npts)
    with np.errstate(divide="ignore"):
        lg = (k - 1) * np.log(z) + law.logpdf(z[:, None] * Y[None, :]).sum(axis=1)
    if k == 1:
        lg[0] = float(law.logpdf(0.0))
    lg[~np.isfinite(lg)] = -np.inf
    w = np.exp(lg - lg.max())
    cdf = np.concatenate(([0.0], np.cumsum(0.5 * (w[1:] + w[:-1]))))
    cdf /= cdf[-1]
    return float(np.interp(u, cdf, z))


def region_sum_move(state: GibbsState, A: RegionMask, tol: float = 1e-9, cap: bool = True,
                    chains=None) -> GibbsState:
    """Resample the total mass Z_A of a region with its directions held fixed.

    For Exp(1) weights Z_A is independent of the directions and Gamma(|A|),
    so the update is Gamma(|A|) truncated at theta_max.  Other laws use the
    density z^{|A|-1} prod f(z y_v), sampled by numerical inversion, with the
    bound optionally capped at 2 m |A| (m the law's mean).
    """
    mask = A.diag()
    k = int(mask.sum())
    if k == 0:
        raise ValueError("region is empty")
    rng = step_generator(state.seed, (*state.stream, _REGION_STREAM), state.move_count)
    rows = range(state.B) if chains is None else chains
    for b in rows:
        x = state.x[b]
        Z = float(x[mask].sum())
        if Z <= 0:
            raise ValueError("region carries zero mass; directions undefined")
        theta, bound = theta_max(state.grid, x, mask, state.c - state.margin, tol)
        if theta > bound * (1 + 1e-12):
            raise AssertionError("theta_max exceeds c Z_A / L_n(A; X)")
        Y = x[mask] / Z
        if isinstance(state.law, ExpLaw):
            Znew = float(sample_trunc_gamma(k, theta, rng))
        else:
            top = min(theta, 2 * state.law.mean * k) if cap else theta
            if k == 1:
                Znew = float(state.law.trunc_ppf(rng.random(), top))
            else:
                Znew = _sample_general_sum(state.law, Y, top, rng.random())
        x[mask] = Znew * Y
    state.move_count += 1
    state.fwd, state.bwd = _tables_for(state.grid, state.x)
    state.check()
    return state


# ---------------------------------------------------------------------- coupling

@dataclass
class CoupledState:
    """A conditioned chain and a free chain driven by the same uniforms."""

    star: GibbsState
    free: np.ndarray  # (B, N) diagonal-major

    @property
    def violations(self) -> int:
        return int(np.count_nonzero(self.star.x > self.free))


def init_coupled(grid: GridSpec, c: float, B: int, law="exp", seed: int = 0, stream: tuple = ()) -> CoupledState:
    star = init_batch(grid, c, B, law, seed, stream)
    free = np.ascontiguousarray(star.law.ppf(uniforms(seed, (*stream, _INIT_STREAM), 0, star.x.shape)), dtype=float)
    # the star chain starts as a scaled-down copy of the same draws, so X* <= X
    return CoupledState(star, free)


def coupled_sweep(cs: CoupledState) -> CoupledState:
    """Sweep both chains with shared site uniforms.

    The free chain takes F^-1(u) and the conditioned chain F^-1(u F(R)),
    so X* <= X holds site by site after every sweep.
    """
    st = cs.star
    u = uniforms(st.seed, st.stream, st.sweep_count, st.x.shape)
    gibbs_sweep(st, u, cs.free)
    return cs


# --------------------------------------------------------------------- rejection

@dataclass
class RejectionResult:
    """Outcome of a rejection run; ``exhausted`` is set when the budget ran out."""

    samples: np.ndarray  # (k, N) accepted diagonal-major fields
    tries: int
    batches: int
    exhausted: bool
    draws: np.ndarray | None = None  # try index of each accepted field

    @property
    def acceptance_rate(self) -> float:
        return len(self.samples) / self.tries if self.tries else float("nan")

    @property
    def field(self):
        return self.samples[0] if len(self.samples) else None


def rejection_sample(grid: GridSpec, law, c: float, count: int, max_tries: int, seed: int,
                     stream: tuple = (), batch: int = 4096, start_batch: int = 0) -> RejectionResult:
    """Draw iid fields in seeded batches, keep those with L_n <= c.

    Batch ``j`` always uses the same uniforms, so a run can be continued
    with ``start_batch`` and reproduces exactly what a single run would give.
    """
    law = law_from_spec(law)
    pred = layout(grid).pred
    kept, where, tries, j = [], [], 0, start_batch
    have = 0
    while have < count and tries < max_tries:
        m = min(batch, max_tries - tries)
        x = np.ascontiguousarray(law.ppf(uniforms(seed, stream, j, (m, grid.size))), dtype=float)
        L = K.last_passage(x, pred)
        ok = np.flatnonzero(L <= c)
        if have + ok.size >= count:
            ok = ok[: count - have]
            m = int(ok[-1]) + 1  # tries counted up to the last accepted draw
        kept.append(x[ok])
        where.append(tries + ok)
        have += ok.size
        tries += m
        j += 1
    samples = np.concatenate(kept) if kept else np.empty((0, grid.size))
    draws = np.concatenate(where) if where else np.empty(0, np.int64)
    return RejectionResult(samples, tries, j - start_batch, have < count, draws)


def rejection_oracle(grid: GridSpec, law, c: float, max_tries: int, seed: int, stream: tuple = ()):
    """First iid field with L_n <= c, or an exhausted result carrying the try count."""
    res = rejection_sample(grid, law, c, 1, max_tries, seed, stream, batch=min(4096, max_tries))
    return res


# ---------------------------------------------------------------------- events

def _check_central(grid, i, eps):
    if i not in set(central_indices(grid, eps)):
        raise ValueError(f"diagonal {i} is not in the central index set for eps={eps}")


def event_B(state: GibbsState, i: int, eps: float, b: int = 0) -> bool:
    """Sum of weights on D_i at most (1 - 2 eps) m |D_i|."""
    _check_central(state.grid, i, eps)
    sl = layout(state.grid).diagonal_slice(i)
    size = sl.stop - sl.start
    return bool(state.x[b, sl].sum() <= (1 - 2 * eps) * state.law.mean * size)


def event_M(state: GibbsState, i: int, eps: float, M: float | None = None, b: int = 0) -> bool:
    """At least eps |D_i| / 2 sites of D_i have slack R_v <= M."""
    _check_central(state.grid, i, eps)
    if M is None:
        M = solve_M(eps)
    lay = layout(state.grid)
    sl = lay.diagonal_slice(i)
    R = K.slack_range(state.x[b : b + 1], state.fwd[b : b + 1], state.bwd[b : b + 1],
                      lay.pred, lay.succ, state.c, sl.start, sl.stop)[0]
    return bool(np.count_nonzero(R <= M) >= eps * (sl.stop - sl.start) / 2)


def event_counts(state: GibbsState, eps: float, M: float | None = None) -> np.ndarray:
    """Per chain, the number of central diagonals where B_i and M_i hold: (B, 2)."""
    if M is None:
        M = solve_M(eps)
    lay = layout(state.grid)
    out = np.zeros((state.B, 2), dtype=np.int64)
    for i in central_indices(state.grid, eps):
        sl = lay.diagonal_slice(i)
        size = sl.stop - sl.start
        out[:, 0] += state.x[:, sl].sum(axis=1) <= (1 - 2 * eps) * state.law.mean * size
        R = K.slack_range(state.x, state.fwd, state.bwd, lay.pred, lay.succ, state.c, sl.start, sl.stop)
        out[:, 1] += np.count_nonzero(R <= M, axis=1) >= eps * size / 2
    return out


# -------------------------------------------------------------------- checkpoints

def save_checkpoint(state: GibbsState, path, meta: dict | None = None) -> None:
    """Write weights, threshold, counters and stream identity; resumes bit-exactly."""
    header = {
        "version": __version__,
        "n": state.grid.n,
        "d": state.grid.d,
        "law": state.law.spec if not isinstance(state.law, DiscreteLaw) else
        {"name": "discrete", "levels": state.law.levels.tolist(), "probs": state.law.probs.tolist()},
        "c": repr(state.c),
        "seed": state.seed,
        "stream": list(state.stream),
        "sweep_count": state.sweep_count,
        "move_count": state.move_count,
        "meta": meta or {},
    }
    with open(path, "wb") as fh:
        np.savez(fh, x=state.x, header=np.array(json.dumps(header)))


def load_checkpoint(path):
    """Return ``(state, header)``; the tables are rebuilt from the weights."""
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        x = np.ascontiguousarray(data["x"], dtype=float)
    grid = GridSpec(header["n"], header["d"])
    law = law_from_spec(header["law"])
    c = float(header["c"])
    fwd, bwd = _tables_for(grid, x)
    st = GibbsState(grid, law, c, x, fwd, bwd, header["seed"], tuple(header["stream"]),
                    header["sweep_count"], header["move_count"], feasibility_margin(grid, c, law))
    return st, header


def checkpoint_path(directory, name: str) -> Path:
    return Path(directory) / f"{name}.npz"
