"""Compiled inner loops.

All kernels take diagonal-major arrays (see :class:`lowertail.lattice.DiagonalLayout`).
Weight, forward and backward arrays are 2-d ``(B, N)``: one row per chain, so a
batch of independent chains shares one compiled loop.
"""
import numpy as np
from numba import njit

NEG_INF = -np.inf


@njit(cache=True)
def forward_range(x, fwd, pred, lo, hi):
    """fwd[b, k] = x[b, k] + max over in-neighbours, for lo <= k < hi."""
    B = x.shape[0]
    d = pred.shape[1]
    for b in range(B):
        for k in range(lo, hi):
            mi = 0.0
            for j in range(d):
                p = pred[k, j]
                if p >= 0 and fwd[b, p] > mi:
                    mi = fwd[b, p]
            fwd[b, k] = x[b, k] + mi


@njit(cache=True)
def backward_range(x, bwd, succ, lo, hi):
    """bwd[b, k] = x[b, k] + max over out-neighbours, for k = hi-1 down to lo."""
    B = x.shape[0]
    d = succ.shape[1]
    for b in range(B):
        for k in range(hi - 1, lo - 1, -1):
            mo = 0.0
            for j in range(d):
                s = succ[k, j]
                if s >= 0 and bwd[b, s] > mo:
                    mo = bwd[b, s]
            bwd[b, k] = x[b, k] + mo


@njit(cache=True)
def last_passage(x, pred):
    """L_n for each row of ``x`` without keeping the table."""
    B, N = x.shape
    d = pred.shape[1]
    out = np.empty(B)
    f = np.empty(N)
    for b in range(B):
        for k in range(N):
            mi = 0.0
            for j in range(d):
                p = pred[k, j]
                if p >= 0 and f[p] > mi:
                    mi = f[p]
            f[k] = x[b, k] + mi
        out[b] = f[N - 1]
    return out


@njit(cache=True)
def masked_passage(x, mask, pred):
    """Best 0 -> n path weight using only vertices with mask true; -inf if none.

    Returns the forward table so callers can backtrack.
    """
    B, N = x.shape
    d = pred.shape[1]
    f = np.empty((B, N))
    for b in range(B):
        for k in range(N):
            if not mask[k]:
                f[b, k] = NEG_INF
                continue
            if k == 0:
                f[b, k] = x[b, 0]
                continue
            mi = NEG_INF
            for j in range(d):
                p = pred[k, j]
                if p >= 0 and f[b, p] > mi:
                    mi = f[b, p]
            f[b, k] = x[b, k] + mi if mi > NEG_INF else NEG_INF
    return f


@njit(cache=True)
def slack_range(x, fwd, bwd, pred, succ, c, lo, hi):
    """R_v = c - (max in-neighbour forward) - (max out-neighbour backward)."""
    B = x.shape[0]
    d = pred.shape[1]
    R = np.empty((B, hi - lo))
    for b in range(B):
        for k in range(lo, hi):
            mi = 0.0
            mo = 0.0
            for j in range(d):
                p = pred[k, j]
                if p >= 0 and fwd[b, p] > mi:
                    mi = fwd[b, p]
                s = succ[k, j]
                if s >= 0 and bwd[b, s] > mo:
                    mo = bwd[b, s]
            R[b, k - lo] = c - mi - mo
    return R


@njit(cache=True)
def sweep_exp(x, fwd, bwd, pred, succ, u, c, margin, tol, free):
    """One ascending diagonal sweep for Exp(1) weights, then a backward rebuild.

    If ``free`` has the shape of ``x`` it receives the untruncated draws
    -log(1 - u) computed by the same compiled code, so that X* <= X holds
    exactly rather than up to libm rounding differences.

    Sites are visited in diagonal-major order; sites sharing a diagonal are
    incomparable, so visiting them one after another is the same as updating
    the diagonal jointly.  Returns the flat index ``b*N + k`` of the first site
    whose slack fell below ``-tol`` (an infeasible state), or -1.
    """
    B, N = x.shape
    d = pred.shape[1]
    bad = -1
    coupled = free.shape[0] == B and free.shape[1] == N
    for b in range(B):
        for k in range(N):
            mi = 0.0
            mo = 0.0
            for j in range(d):
                p = pred[k, j]
                if p >= 0 and fwd[b, p] > mi:
                    mi = fwd[b, p]
                s = succ[k, j]
                if s >= 0 and bwd[b, s] > mo:
                    mo = bwd[b, s]
            R = c - mi - mo
            if R < -tol and bad < 0:
                bad = b * N + k
            R -= margin
            if R <= 0.0:
                xv = 0.0
            else:
                xv = -np.log1p(-u[b, k] * (-np.expm1(-R)))
                if xv > R:
                    xv = R
            x[b, k] = xv
            fwd[b, k] = xv + mi
            if coupled:
                free[b, k] = -np.log1p(-u[b, k])
        for k in range(N - 1, -1, -1):
            mo = 0.0
            for j in range(d):
                s = succ[k, j]
                if s >= 0 and bwd[b, s] > mo:
                    mo = bwd[b, s]
            bwd[b, k] = x[b, k] + mo
    return bad


@njit(cache=True)
def backtrack(fwd, pred, n_steps):
    """Geodesic from the last vertex back to the origin.

    At each step the in-neighbour with the largest forward value is taken;
    among equal values the one that decrements the lowest coordinate index wins.
    Returns diagonal-major indices ordered from origin to corner.
    """
    d = pred.shape[1]
    path = np.empty(n_steps + 1, dtype=np.int64)
    k = fwd.shape[0] - 1
    path[n_steps] = k
    for t in range(n_steps - 1, -1, -1):
        best = -1
        bv = NEG_INF
        for j in range(d):
            p = pred[k, j]
            if p >= 0 and fwd[p] > bv:
                bv = fwd[p]
                best = p
        k = best
        path[t] = k
    return path


@njit(cache=True)
def patience_length(ys):
    """Length of the longest strictly increasing subsequence of ``ys``."""
    tails = np.empty(ys.shape[0])
    L = 0
    for y in ys:
        lo, hi = 0, L
        while lo < hi:
            mid = (lo + hi) // 2
            if tails[mid] < y:
                lo = mid + 1
            else:
                hi = mid
        tails[lo] = y
        if lo == L:
            L += 1
    return L


@njit(cache=True)
def chain_lengths(ys_rank, order_x):
    """Longest chain ending at / starting from each point.

    ``order_x`` lists point indices by increasing x; ``ys_rank`` gives each
    point's y-rank in 0..N-1.  Uses a Fenwick tree over y-ranks for prefix
    maxima, so the cost is O(N log N).
    """
    N = ys_rank.shape[0]
    fL = np.zeros(N, dtype=np.int64)
    bL = np.zeros(N, dtype=np.int64)
    tree = np.zeros(N + 1, dtype=np.int64)
    for t in range(N):
        p = order_x[t]
        r = ys_rank[p]  # query ranks < r
        i = r
        best = 0
        while i > 0:
            if tree[i] > best:
                best = tree[i]
            i -= i & (-i)
        fL[p] = best + 1
        i = r + 1
        while i <= N:
            if tree[i] < fL[p]:
                tree[i] = fL[p]
            i += i & (-i)
    tree[:] = 0
    for t in range(N - 1, -1, -1):
        p = order_x[t]
        r = N - 1 - ys_rank[p]  # reversed rank: query points with larger y
        i = r
        best = 0
        while i > 0:
            if tree[i] > best:
                best = tree[i]
            i -= i & (-i)
        bL[p] = best + 1
        i = r + 1
        while i <= N:
            if tree[i] < bL[p]:
                tree[i] = bL[p]
            i += i & (-i)
    return fL, bL


@njit(cache=True)
def rect_passage(w):
    """Corner value of vertex-weight LPP on a rectangular (rows, cols) array."""
    R, C = w.shape
    row = np.zeros(C)
    for r in range(R):
        left = 0.0
        for k in range(C):
            up = row[k]
            v = w[r, k] + (up if up > left else left)
            row[k] = v
            left = v
    return row[C - 1]
