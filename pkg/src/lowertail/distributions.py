"""Truncated weight laws: exponential, Gamma and user-supplied densities.

Samplers are inverse-CDF maps ``u -> x`` wherever possible, so they are
deterministic in the uniform and monotone in both ``u`` and the truncation
bound; coupled chains rely on that.
"""
from __future__ import annotations

import math
import re
from pathlib import Path

import numpy as np
from scipy import integrate, special

__all__ = [
    "sample_trunc_exp",
    "trunc_exp_mean",
    "solve_M",
    "sample_trunc_gamma",
    "trunc_gamma_mean",
    "trunc_gamma_tail_ratio",
    "log_lower_gamma",
    "WeightLaw",
    "ExpLaw",
    "GammaLaw",
    "HalfNormalLaw",
    "UniformLaw",
    "ExpMixtureLaw",
    "LomaxLaw",
    "TabulatedLaw",
    "DiscreteLaw",
    "law_from_spec",
    "validate_law",
    "sample_trunc_general",
    "logconcave_ratio_bound",
    "LawError",
]


class LawError(ValueError):
    """A weight law failed validation or cannot be truncated as asked."""


# ---------------------------------------------------------------- exponential

def sample_trunc_exp(R, u):
    """Exp(1) conditioned on [0, R], by inversion: -log(1 - u(1 - e^-R))."""
    R = np.asarray(R, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(R <= 0):
        raise ValueError("truncation bound must be positive")
    out = -np.log1p(-u * -np.expm1(-R))
    out = np.minimum(out, R)
    return out[()] if out.ndim == 0 else out


def trunc_exp_mean(R):
    """Mean of Exp(1) conditioned on [0, R]: 1 - R/(e^R - 1)."""
    R = np.asarray(R, dtype=float)
    if np.any(R <= 0):
        raise ValueError("truncation bound must be positive")
    with np.errstate(over="ignore", invalid="ignore"):
        big = 1.0 - R / np.expm1(R)
        small = R / 2 - R**2 / 12 + R**4 / 720
    out = np.where(R < 1e-3, small, big)
    out = np.where(np.isinf(R), 1.0, out)
    return out[()] if out.ndim == 0 else out


def solve_M(eps: float, tol: float = 1e-12) -> float:
    """The bound M with E Exp(0, M) = 1 - eps/4, by bisection."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    target = 1.0 - eps / 4
    lo, hi = 1e-9, 1.0
    while trunc_exp_mean(hi) < target:
        hi *= 2
    while hi - lo > tol * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if trunc_exp_mean(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------- gamma

def log_lower_gamma(m: float, t: float) -> float:
    """log of the regularized lower incomplete gamma P(m, t), stable for tiny values."""
    if t <= 0:
        return -math.inf
    p = special.gammainc(m, t)
    if p > 1e-280:
        return math.log(p)
    # series: P(m,t) = t^m e^-t / Gamma(m+1) * sum_k t^k / ((m+1)...(m+k))
    term, s, k = 1.0, 1.0, 0
    while term > 1e-17 * s:
        k += 1
        term *= t / (m + k)
        s += term
    return m * math.log(t) - t - special.gammaln(m + 1) + math.log(s)


def _trunc_gamma_inverse(m: float, theta: float, u: float) -> float:
    """Solve P(m, t) = u P(m, theta) on [0, theta] in log space."""
    target = math.log(u) + log_lower_gamma(m, theta)
    lo, hi = 0.0, theta
    s = math.log(theta) + math.log(u) / m  # leading-order start: (t/theta)^m ~ u
    t = min(max(math.exp(s), 1e-300), theta)
    for _ in range(200):
        h = log_lower_gamma(m, t) - target
        if h > 0:
            hi = t
        else:
            lo = t
        if abs(h) < 1e-12:
            break
        # d/dlog t of log P = t f(t) / P(t)
        dlog = math.exp(m * math.log(t) - t - special.gammaln(m) - log_lower_gamma(m, t))
        tn = t * math.exp(-h / dlog) if dlog > 0 else 0.5 * (lo + hi)
        if not lo < tn < hi:
            tn = 0.5 * (lo + hi)
        if hi - lo <= 1e-14 * hi:
            break
        t = tn
    return t


def sample_trunc_gamma(m: int, theta_max: float, rng: np.random.Generator, size=None):
    """Gamma(m) conditioned on [0, theta_max].

    Plain rejection when the retained mass is at least 1e-3, otherwise
    numerical inversion of the regularized incomplete gamma function.
    """
    if m < 1:
        raise ValueError("shape must be at least 1")
    if theta_max <= 0:
        raise ValueError("theta_max must be positive")
    n = 1 if size is None else int(np.prod(size))
    if math.isinf(theta_max):
        out = rng.gamma(m, size=n)
    else:
        P = special.gammainc(m, theta_max)
        if P >= 1e-3:
            out = np.empty(n)
            filled = 0
            while filled < n:
                draw = rng.gamma(m, size=max(16, int(1.2 * (n - filled) / P)))
                ok = draw[draw <= theta_max][: n - filled]
                out[filled : filled + ok.size] = ok
                filled += ok.size
        else:
            u = rng.random(n)
            np.maximum(u, np.finfo(float).tiny, out=u)
            out = np.array([_trunc_gamma_inverse(m, theta_max, ui) for ui in u])
    return out[0] if size is None else out.reshape(size)


def trunc_gamma_mean(m: float, theta: float) -> float:
    """E[Z | Z <= theta] for Z ~ Gamma(m): m P(m+1, theta)/P(m, theta)."""
    return m * math.exp(log_lower_gamma(m + 1, theta) - log_lower_gamma(m, theta))


def trunc_gamma_tail_ratio(m: float, theta: float, s: float) -> float:
    """P(Z >= s theta | Z <= theta) for Z ~ Gamma(m)."""
    return -math.expm1(log_lower_gamma(m, s * theta) - log_lower_gamma(m, theta))


# ----------------------------------------------------------------- weight laws

class WeightLaw:
    """A weight distribution on [0, inf) given by density, CDF and inverse CDF.

    Subclasses supply ``pdf`` and ``cdf``; ``ppf`` falls back to a
    bracketed Newton solve seeded from a 1024-point lookup grid.  ``tag`` is ``"P1"`` for
    a nonincreasing density, ``"P2"`` for a log-concave one with finite
    slope of ``-log f`` at zero, ``"other"`` otherwise.
    """

    name = "law"
    tag = "other"
    spec: str = "law"

    def pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def logpdf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(x))

    def sf(self, x):
        return 1.0 - self.cdf(x)

    @property
    def mean(self) -> float:
        val, _ = integrate.quad(lambda x: float(self.sf(x)), 0, np.inf, limit=200)
        return val

    def upper(self) -> float:
        """A point with survival below 1e-13 (end of the lookup grid)."""
        x = 1.0
        while self.sf(x) > 1e-13 and x < 1e12:
            x *= 2
        return x

    def _grid(self):
        if not hasattr(self, "_lut"):
            xs = np.linspace(0.0, self.upper(), 1024)
            self._lut = (xs, np.maximum.accumulate(self.cdf(xs)))
        return self._lut

    def ppf(self, p):
        """Numerical inverse CDF.

        The lookup grid gives a bracket per point; inside it Newton steps are
        taken while they stay in the bracket, bisection otherwise, until the
        CDF matches to 1e-12 or the bracket collapses.
        """
        p_in = np.asarray(p, dtype=float)
        p = np.atleast_1d(p_in).ravel()
        xs, Fs = self._grid()
        j = np.clip(np.searchsorted(Fs, p), 1, len(xs) - 1)
        lo, hi = xs[j - 1].copy(), xs[j].copy()
        beyond = p > Fs[-1]
        hi[beyond] = xs[-1] * 4
        dF = np.maximum(Fs[j] - Fs[j - 1], 1e-300)
        x = lo + (hi - lo) * np.clip((p - Fs[j - 1]) / dF, 0.0, 1.0)
        active = np.ones(p.shape, dtype=bool)
        for _ in range(100):
            xa = x[active]
            err = self.cdf(xa) - p[active]
            lo_a, hi_a = lo[active], hi[active]
            lo_a = np.where(err < 0, xa, lo_a)
            hi_a = np.where(err > 0, xa, hi_a)
            f = self.pdf(xa)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = xa - err / f
            bad = ~np.isfinite(step) | (step <= lo_a) | (step >= hi_a)
            xn = np.where(bad, 0.5 * (lo_a + hi_a), step)
            done = (np.abs(err) <= 1e-12) | (hi_a - lo_a <= 4e-16 * np.maximum(hi_a, 1e-300))
            xn = np.where(done, xa, xn)
            lo[active], hi[active], x[active] = lo_a, hi_a, xn
            active[np.flatnonzero(active)[done]] = False
            if not active.any():
                break
        out = np.where(p <= 0, 0.0, x).reshape(p_in.shape)
        return out[()] if out.ndim == 0 else out

    def trunc_ppf(self, u, R):
        """F^-1(u F(R)): the law restricted to [0, R], by inversion."""
        R = np.asarray(R, dtype=float)
        FR = self.cdf(R)
        if np.any(FR <= 0):
            raise LawError(f"{self.name}: no mass below the truncation bound")
        out = self.ppf(np.asarray(u) * FR)
        return np.minimum(out, R)

    def sample(self, rng: np.random.Generator, size):
        u = rng.random(size)
        return self.ppf(u)

    def __repr__(self):
        return f"{type(self).__name__}({self.spec!r})"


class ExpLaw(WeightLaw):
    name, tag, spec = "exp", "P2", "exp"

    def pdf(self, x):
        return np.exp(-np.asarray(x, dtype=float))

    def logpdf(self, x):
        return -np.asarray(x, dtype=float)

    def cdf(self, x):
        return -np.expm1(-np.maximum(np.asarray(x, dtype=float), 0.0))

    def sf(self, x):
        return np.exp(-np.maximum(np.asarray(x, dtype=float), 0.0))

    @property
    def mean(self):
        return 1.0

    def ppf(self, p):
        return -np.log1p(-np.asarray(p, dtype=float))

    def trunc_ppf(self, u, R):
        R = np.asarray(R, dtype=float)
        return np.minimum(-np.log1p(-np.asarray(u) * -np.expm1(-R)), R)


class GammaLaw(WeightLaw):
    name, tag = "gamma", "other"

    def __init__(self, k: float):
        if k < 1:
            raise LawError("gamma shape below 1 has an unbounded density at 0")
        self.k = float(k)
        self.spec = f"gamma({k:g})"
        if k == 1:
            self.tag = "P2"

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp((self.k - 1) * np.log(np.maximum(x, 1e-300)) - x - special.gammaln(self.k)) if self.k > 1 else np.exp(-x)

    def cdf(self, x):
        return special.gammainc(self.k, np.maximum(np.asarray(x, dtype=float), 0.0))

    def sf(self, x):
        return special.gammaincc(self.k, np.maximum(np.asarray(x, dtype=float), 0.0))

    @property
    def mean(self):
        return self.k

    def ppf(self, p):
        return special.gammaincinv(self.k, np.asarray(p, dtype=float))


class HalfNormalLaw(WeightLaw):
    """|N(0, 1)|; log-concave with -log f having slope 0 at the origin."""

    name, tag, spec = "half-normal", "P2", "half-normal"

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(2 / np.pi) * np.exp(-0.5 * x * x)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.log(2 / np.pi) - 0.5 * x * x

    def cdf(self, x):
        return special.erf(np.maximum(np.asarray(x, dtype=float), 0.0) / np.sqrt(2))

    def sf(self, x):
        return special.erfc(np.maximum(np.asarray(x, dtype=float), 0.0) / np.sqrt(2))

    @property
    def mean(self):
        return math.sqrt(2 / math.pi)

    def ppf(self, p):
        return np.sqrt(2) * special.erfinv(np.asarray(p, dtype=float))


class UniformLaw(WeightLaw):
    """Uniform on [0, b]: a nonincreasing density with compact support."""

    name, tag = "uniform-positive-part", "P1"

    def __init__(self, b: float = 1.0):
        if b <= 0:
            raise LawError("uniform width must be positive")
        self.b = float(b)
        self.spec = f"uniform-positive-part({b:g})"

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= 0) & (x <= self.b), 1.0 / self.b, 0.0)

    def cdf(self, x):
        return np.clip(np.asarray(x, dtype=float) / self.b, 0.0, 1.0)

    @property
    def mean(self):
        return self.b / 2

    def upper(self):
        return self.b

    def ppf(self, p):
        return np.asarray(p, dtype=float) * self.b


class ExpMixtureLaw(WeightLaw):
    """Finite mixture of exponentials; its density is nonincreasing."""

    name, tag = "exp-mixture", "P1"

    def __init__(self, weights, rates):
        w = np.asarray(weights, dtype=float)
        r = np.asarray(rates, dtype=float)
        if w.shape != r.shape or w.ndim != 1 or np.any(w < 0) or np.any(r <= 0):
            raise LawError("exp-mixture needs matching nonnegative weights and positive rates")
        self.w = w / w.sum()
        self.r = r
        self.spec = "exp-mixture(" + ",".join(f"{a:g}:{b:g}" for a, b in zip(self.w, self.r)) + ")"

    def pdf(self, x):
        x = np.asarray(x, dtype=float)[..., None]
        return (self.w * self.r * np.exp(-self.r * x)).sum(-1)

    def cdf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)[..., None]
        return (self.w * -np.expm1(-self.r * x)).sum(-1)

    def sf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)[..., None]
        return (self.w * np.exp(-self.r * x)).sum(-1)

    @property
    def mean(self):
        return float((self.w / self.r).sum())


class LomaxLaw(WeightLaw):
    """Pareto type II, f(x) = a/(1+x)^(a+1); heavy-tailed for small a."""

    name, tag = "lomax", "P1"

    def __init__(self, a: float):
        self.a = float(a)
        self.spec = f"lomax({a:g})"

    def pdf(self, x):
        return self.a / (1 + np.asarray(x, dtype=float)) ** (self.a + 1)

    def cdf(self, x):
        return 1 - (1 + np.maximum(np.asarray(x, dtype=float), 0.0)) ** -self.a

    def sf(self, x):
        return (1 + np.maximum(np.asarray(x, dtype=float), 0.0)) ** -self.a

    @property
    def mean(self):
        return 1 / (self.a - 1) if self.a > 1 else math.inf

    def ppf(self, p):
        return (1 - np.asarray(p, dtype=float)) ** (-1 / self.a) - 1


class TabulatedLaw(WeightLaw):
    """Density given by knots (x, f(x)), linear in between, zero past the last knot."""

    name, tag = "tabulated", "other"

    def __init__(self, xs, fs, tag: str = "other", spec: str = "tabulated"):
        xs = np.asarray(xs, dtype=float)
        fs = np.asarray(fs, dtype=float)
        if xs.ndim != 1 or xs.shape != fs.shape or xs.size < 2:
            raise LawError("tabulated density needs at least two (x, f) knots")
        if xs[0] != 0 or np.any(np.diff(xs) <= 0) or np.any(fs < 0):
            raise LawError("tabulated knots must start at 0, increase, and carry f >= 0")
        cum = np.concatenate(([0.0], np.cumsum(0.5 * (fs[1:] + fs[:-1]) * np.diff(xs))))
        self.xs, self.fs = xs, fs / cum[-1]
        self._cum = cum / cum[-1]
        self.tag = tag
        self.spec = spec

    @classmethod
    def load(cls, path, tag: str = "other") -> "TabulatedLaw":
        data = np.loadtxt(path, ndmin=2, delimiter="," if str(path).endswith(".csv") else None)
        return cls(data[:, 0], data[:, 1], tag=tag, spec=f"tabulated:{path}")

    def pdf(self, x):
        return np.interp(x, self.xs, self.fs, right=0.0)

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, self.xs[-1])
        j = np.clip(np.searchsorted(self.xs, x, side="right") - 1, 0, len(self.xs) - 2)
        h = x - self.xs[j]
        slope = (self.fs[j + 1] - self.fs[j]) / (self.xs[j + 1] - self.xs[j])
        return np.minimum(self._cum[j] + self.fs[j] * h + 0.5 * slope * h * h, 1.0)

    def upper(self):
        return float(self.xs[-1])

    @property
    def mean(self):
        val, _ = integrate.quad(lambda x: float(self.sf(x)), 0, self.xs[-1], limit=400, points=self.xs[1:-1][:50])
        return val


class DiscreteLaw(WeightLaw):
    """Finitely many nonnegative levels; used for exact enumeration checks."""

    name, tag = "discrete", "other"

    def __init__(self, levels, probs):
        lv = np.asarray(levels, dtype=float)
        p = np.asarray(probs, dtype=float)
        if lv.ndim != 1 or lv.shape != p.shape or np.any(np.diff(lv) <= 0) or lv[0] < 0 or np.any(p <= 0):
            raise LawError("discrete law needs increasing nonnegative levels with positive masses")
        self.levels = lv
        self.probs = p / p.sum()
        self._F = np.cumsum(self.probs)
        self.spec = "discrete(" + ",".join(f"{a:g}:{b:g}" for a, b in zip(lv, self.probs)) + ")"

    def pdf(self, x):  # probability mass function
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for a, q in zip(self.levels, self.probs):
            out = np.where(x == a, q, out)
        return out

    def cdf(self, x):
        j = np.searchsorted(self.levels, np.asarray(x, dtype=float), side="right")
        return np.concatenate(([0.0], self._F))[j]

    @property
    def mean(self):
        return float(self.levels @ self.probs)

    def ppf(self, p):
        j = np.searchsorted(self._F, np.asarray(p, dtype=float), side="left")
        return self.levels[np.minimum(j, len(self.levels) - 1)]

    def trunc_pmf(self, R):
        """Masses of the law restricted to levels <= R."""
        keep = self.levels <= R
        if not keep.any():
            raise LawError("no level below the truncation bound")
        q = np.where(keep, self.probs, 0.0)
        return q / q.sum()

    def trunc_ppf(self, u, R):
        R = np.asarray(R, dtype=float)
        FR = self.cdf(R)
        if np.any(FR <= 0):
            raise LawError("no level below the truncation bound")
        # smallest level a with F(a) >= u F(R); never above R by construction
        return self.ppf(np.asarray(u) * FR)

    def sample(self, rng, size):
        return rng.choice(self.levels, size=size, p=self.probs)


_NAMED = re.compile(r"^\s*([a-z\-]+)\s*(?:\((.*)\))?\s*$")


def law_from_spec(spec) -> WeightLaw:
    """Build a law from ``"exp"``, ``"gamma(2)"``, ``"half-normal"``,
    ``"uniform-positive-part(2)"``, ``"exp-mixture(0.5:1,0.5:3)"``, ``"lomax(3)"``,
    or a dict ``{"name": "tabulated", "path": ..., "tag": ...}``."""
    if isinstance(spec, WeightLaw):
        return spec
    if isinstance(spec, dict):
        name = spec.get("name")
        if name == "tabulated":
            if "path" not in spec or not Path(spec["path"]).exists():
                raise LawError(f"tabulated law file not found: {spec.get('path')!r}")
            return TabulatedLaw.load(spec["path"], tag=spec.get("tag", "other"))
        if name == "discrete":
            return DiscreteLaw(spec["levels"], spec["probs"])
        args = spec.get("args", [])
        spec = f"{name}({','.join(map(str, args))})" if args else str(name)
    m = _NAMED.match(str(spec))
    if not m:
        raise LawError(f"unknown law {spec!r}")
    name, arg = m.group(1), (m.group(2) or "").strip()
    try:
        if name == "exp" and not arg:
            return ExpLaw()
        if name == "gamma":
            return GammaLaw(float(arg or 1))
        if name == "half-normal" and not arg:
            return HalfNormalLaw()
        if name == "uniform-positive-part":
            return UniformLaw(float(arg or 1))
        if name == "exp-mixture":
            pairs = [p.split(":") for p in arg.split(",")] if arg else [["0.5", "1"], ["0.5", "3"]]
            return ExpMixtureLaw([float(a) for a, _ in pairs], [float(b) for _, b in pairs])
        if name == "lomax":
            return LomaxLaw(float(arg))
    except (TypeError, ValueError) as exc:
        raise LawError(f"bad parameters for law {name!r}: {arg!r}") from exc
    raise LawError(f"unknown law {spec!r}")


def _estimate_C(law: WeightLaw, npts: int = 10_000) -> float:
    """-inf of V' with V = -log f, from finite differences on a grid."""
    xs = np.linspace(0.0, min(law.upper(), 50.0), npts)
    V = -law.logpdf(xs)
    if not np.all(np.isfinite(V)):
        return math.inf
    # V convex => V' is smallest at 0, where a secant over the coarse grid overshoots
    h = 1e-7
    at0 = float((-law.logpdf(h) + law.logpdf(0.0)) / h)
    return float(-min(np.min(np.diff(V) / np.diff(xs)), at0))


def validate_law(law: WeightLaw, eps: float | None = None, d: int = 2, npts: int = 10_000) -> WeightLaw:
    """Spot-check the class tag and the regularity a conditioned run needs."""
    if isinstance(law, DiscreteLaw):
        return law
    hi = law.upper()
    xs = np.linspace(0.0, min(hi, 50.0), npts)
    f = law.pdf(xs)
    if np.any(f < 0) or not np.all(np.isfinite(f)):
        raise LawError(f"{law.spec}: density must be finite and nonnegative")
    total = float(law.cdf(hi * 4))
    if abs(total - 1) > 1e-10:
        raise LawError(f"{law.spec}: CDF tends to {total}, not 1")
    if law.tag == "P1" and np.any(np.diff(f) > 1e-12 * max(f.max(), 1.0)):
        raise LawError(f"{law.spec}: tagged P1 but density increases on the check grid")
    if law.tag == "P2":
        with np.errstate(divide="ignore"):
            lf = np.log(f)
        if not np.all(np.isfinite(lf)):
            raise LawError(f"{law.spec}: tagged P2 but density vanishes on the check grid")
        second = lf[2:] - 2 * lf[1:-1] + lf[:-2]
        if np.any(second > 1e-9):
            raise LawError(f"{law.spec}: tagged P2 but log density is not concave")
        if not math.isfinite(_estimate_C(law)) or _estimate_C(law) > 1e6:
            raise LawError(f"{law.spec}: tagged P2 but -log f has unbounded slope")
    if eps is not None:
        M = solve_M(eps)
        grid = np.linspace(0.0, M, 1001)
        if np.any(law.pdf(grid) < 1e-12):
            raise LawError(f"{law.spec}: density is not bounded away from zero on [0, {M:.3g}]")
    # tails: the integral of (1 - F)^(1/d) must converge
    if not isinstance(law, (TabulatedLaw, UniformLaw)):
        g = lambda x: float(law.sf(x)) ** (1.0 / d)
        # for a power tail x^-p the mass of successive 3-decade blocks shrinks
        # geometrically iff p > 1, i.e. iff the integral converges
        near, _ = integrate.quad(g, 0, 1e3, limit=400)
        mid, _ = integrate.quad(g, 1e3, 1e6, limit=400)
        far, _ = integrate.quad(g, 1e6, 1e9, limit=400)
        if not math.isfinite(near) or (mid > 1e-12 * near and far > 0.5 * mid):
            raise LawError(f"{law.spec}: tail too heavy, integral of (1-F)^(1/{d}) does not converge")
    return law


def sample_trunc_general(law: WeightLaw, R, u):
    """Inverse-CDF draw from ``law`` restricted to [0, R]."""
    if np.any(np.asarray(R) <= 0):
        raise ValueError("truncation bound must be positive")
    return law.trunc_ppf(u, R)


def logconcave_ratio_bound(law: WeightLaw, t: float, z_A: float) -> float:
    """e^{C (1 - t) z_A} with C = -inf V', bounding prod f(x_v) / prod f(t x_v)."""
    if law.tag != "P2":
        raise LawError(f"{law.spec}: ratio bound needs a P2 law")
    if not 0 < t <= 1:
        raise ValueError("t must lie in (0, 1]")
    C = _estimate_C(law)
    if not math.isfinite(C) or C > 1e6:
        raise LawError(f"{law.spec}: slope estimate diverges, not P2")
    return math.exp(C * (1 - t) * z_A)
