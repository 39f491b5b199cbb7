"""Declarative experiments: spec validation, threshold calibration, runs and records.

A record directory holds

``spec.json``      the validated spec with defaults filled in
``record.json``    code version, resolved threshold, sampler bookkeeping
``samples.csv``    one row per sample with ``replica`` and ``sweep`` provenance
``metrics.csv``    one row per estimate
``verdicts.csv``   PASS/FAIL per check listed in the spec
``heatmap.svg``    geodesic occupation (lattice, d = 2)
``checkpoint.npz`` chain state plus everything collected so far
``timing.json``    wall-clock figures, kept apart so the rest is reproducible
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
import operator
import os
import time
from pathlib import Path

import numpy as np

from . import __version__
from .distributions import LawError, law_from_spec, validate_law
from .gibbs import (
    coupled_sweep,
    event_counts,
    gibbs_sweep,
    init_batch,
    init_coupled,
    load_checkpoint,
    rejection_sample,
    save_checkpoint,
)
from .lattice import GridSpec, MonotoneCurve, RegionMask, cylinder, load_mask, strip
from .metrics import (
    SampleBatch,
    anticoncentration_curve,
    concentration_statistic,
    containment_probability,
    heatmap_svg,
    mass_deficit,
    median_curve,
    occupation,
    shape_check,
    summary,
    write_csv,
)
from .passage import last_passage_batch
from .poisson import PoissonGibbs, lis, poisson_rejection_sample, zero_slack_boxes
from .rng import step_generator, uniforms

__all__ = [
    "SpecError",
    "ExperimentSpec",
    "load_spec",
    "resolve_threshold",
    "run",
    "resume",
    "report",
    "bench",
    "batch_from_arrays",
]

_CAL_STREAM = 11
_CHAIN_STREAM = 13
_REJ_STREAM = 17

MODELS = ("lattice", "poisson")
SAMPLERS = ("gibbs", "rejection", "coupled")
METRICS = ("mass", "concentration", "containment", "anticoncentration", "events", "shape", "coupling")
_OPS = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge}


class SpecError(ValueError):
    """Invalid experiment spec; ``field`` names the offending entry."""

    def __init__(self, field: str, msg: str):
        super().__init__(f"{field}: {msg}")
        self.field = field


DEFAULTS = {
    "model": "lattice",
    "d": 2,
    "law": "exp",
    "sampler": "gibbs",
    "replicas": 1,
    "samples": 1,
    "burn_in": None,  # 50 n
    "thin": None,  # n
    "max_tries": 10_000_000,
    "metrics": ["mass", "concentration"],
    "curves": ["identity"],
    "eps_prime": [0.05],
    "masks": [],
    "H": {"quantile": 0.9},
    "eps": 0.04,
    "eps_D": 1.0,
    "keep_fields": False,
    "checks": [],
    "aspects": [[1, 1]],
}


class ExperimentSpec(dict):
    """A validated spec: a plain dict with every default filled in."""

    @property
    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self, sort_keys=True).encode()).hexdigest()[:16]

    @property
    def grid(self) -> GridSpec:
        return GridSpec(int(self["n"]), int(self["d"]))


def _need(cond, field, msg):
    if not cond:
        raise SpecError(field, msg)


def load_spec(source, seed: int | None = None, base: Path | None = None) -> ExperimentSpec:
    """Validate a spec given as a dict or a JSON file path."""
    if isinstance(source, (str, Path)):
        base = Path(source).resolve().parent
        try:
            raw = json.loads(Path(source).read_text())
        except FileNotFoundError:
            raise SpecError("spec", f"file not found: {source}") from None
        except json.JSONDecodeError as exc:
            raise SpecError("spec", f"not valid JSON: {exc}") from None
    else:
        raw = copy.deepcopy(dict(source))
    unknown = set(raw) - set(DEFAULTS) - {"n", "seed", "threshold", "name", "poisson_sampler"}
    _need(not unknown, sorted(unknown)[0] if unknown else "", "unknown field")
    spec = ExperimentSpec({**copy.deepcopy(DEFAULTS), **raw})
    if seed is not None:
        spec["seed"] = int(seed)
    _need("seed" in spec and isinstance(spec["seed"], int) and spec["seed"] >= 0, "seed", "a nonnegative integer seed is required")
    _need(spec["model"] in MODELS, "model", f"must be one of {MODELS}")
    _need(isinstance(spec.get("n"), (int, float)) and spec["n"] >= 1, "n", "must be a positive number")
    if spec["model"] == "lattice":
        _need(int(spec["n"]) == spec["n"], "n", "lattice size must be an integer")
        spec["n"] = int(spec["n"])
    _need(isinstance(spec["d"], int) and spec["d"] >= 2, "d", "must be an integer >= 2")
    _need(spec["sampler"] in SAMPLERS, "sampler", f"must be one of {SAMPLERS}")
    if spec["model"] == "poisson":
        _need(spec["sampler"] != "coupled", "sampler", "coupled sampling is lattice-only")
        _need(spec["d"] == 2, "d", "Poisson model is planar")
    try:
        law = law_from_spec(spec["law"])
        if spec["model"] == "lattice":
            validate_law(law, d=spec["d"])
    except LawError as exc:
        raise SpecError("law", str(exc)) from None
    for key in ("replicas", "samples", "max_tries"):
        _need(isinstance(spec[key], int) and spec[key] >= 1, key, "must be a positive integer")
    n = spec["n"]
    if spec["burn_in"] is None:
        spec["burn_in"] = int(50 * n)
    if spec["thin"] is None:
        spec["thin"] = max(1, int(n))
    _need(isinstance(spec["burn_in"], int) and spec["burn_in"] >= 0, "burn_in", "must be a nonnegative integer")
    _need(isinstance(spec["thin"], int) and spec["thin"] >= 1, "thin", "must be a positive integer")
    _need(isinstance(spec["metrics"], list) and all(m in METRICS for m in spec["metrics"]),
          "metrics", f"entries must be among {METRICS}")
    th = spec.get("threshold")
    _need(isinstance(th, dict) and th.get("mode") in ("delta", "absolute", "quantile"),
          "threshold", "needs mode delta, absolute or quantile")
    if th["mode"] == "delta":
        _need(isinstance(th.get("delta"), (int, float)) and th["delta"] > 0, "threshold.delta", "must be positive")
        mu = th.get("mu", "empirical")
        _need(mu == "empirical" or isinstance(mu, (int, float)), "threshold.mu", "number or 'empirical'")
    elif th["mode"] == "absolute":
        _need(isinstance(th.get("c"), (int, float)) and th["c"] > 0, "threshold.c", "must be positive")
    else:
        _need(isinstance(th.get("q"), (int, float)) and 0 < th["q"] < 1, "threshold.q", "must lie in (0, 1)")
    for j, cv in enumerate(spec["curves"]):
        if cv not in ("identity", "median"):
            p = (base / cv) if base and not Path(cv).is_absolute() else Path(cv)
            _need(p.exists(), f"curves[{j}]", f"curve file not found: {cv}")
            spec["curves"][j] = str(p)
    for j, mk in enumerate(spec["masks"]):
        _need(isinstance(mk, dict) and mk.get("type") in ("cylinder", "strip", "file", "full"),
              f"masks[{j}]", "type must be cylinder, strip, file or full")
        if mk["type"] == "file":
            p = (base / mk["path"]) if base and not Path(mk["path"]).is_absolute() else Path(mk["path"])
            _need(p.exists(), f"masks[{j}].path", f"mask file not found: {mk['path']}")
            mk["path"] = str(p)
    H = spec["H"]
    _need(isinstance(H, (int, float)) or (isinstance(H, dict) and 0 < H.get("quantile", -1) < 1),
          "H", "number or {'quantile': q}")
    for j, ck in enumerate(spec["checks"]):
        _need(isinstance(ck, dict) and {"name", "metric", "op", "value"} <= set(ck) and ck["op"] in _OPS,
              f"checks[{j}]", "needs name, metric, op (<, <=, >, >=) and value")
    return spec


# ----------------------------------------------------------------- thresholds

def _iid_L(spec, count: int, stream: tuple) -> np.ndarray:
    law = law_from_spec(spec["law"])
    if spec["model"] == "poisson":
        n = spec["n"]
        vals = []
        for j in range(count):
            rng = step_generator(spec["seed"], stream, j)
            N = rng.poisson(n * n)
            vals.append(lis(rng.random((N, 2)) * n))
        return np.array(vals, dtype=float)
    grid = spec.grid
    out = []
    batch = max(1, min(count, 2_000_000 // grid.size))
    for j in range(0, count, batch):
        m = min(batch, count - j)
        x = np.ascontiguousarray(law.ppf(uniforms(spec["seed"], stream, j // batch, (m, grid.size))), dtype=float)
        out.append(last_passage_batch(grid, x))
    return np.concatenate(out)


def resolve_threshold(spec: ExperimentSpec) -> dict:
    """Turn the threshold spec into a number c, recording how it was obtained.

    ``delta``: c = (mu - delta m) n with m the law's mean and mu either given
    or the empirical E L_n / n at this n (finite-size calibration).
    ``quantile``: the empirical q-quantile of L_n.  ``absolute``: c as given.
    """
    th = spec["threshold"]
    n = spec["n"]
    info = {"mode": th["mode"]}
    if th["mode"] == "absolute":
        info["c"] = float(th["c"])
        return info
    samples = int(th.get("samples", 400 if th["mode"] == "delta" else 100_000))
    if th["mode"] == "quantile":
        L = _iid_L(spec, samples, (_CAL_STREAM,))
        info.update(c=float(np.quantile(L, th["q"])), q=th["q"], samples=samples)
        return info
    mean = 1.0 if spec["model"] == "poisson" else law_from_spec(spec["law"]).mean
    if th.get("mu", "empirical") == "empirical":
        L = _iid_L(spec, samples, (_CAL_STREAM,))
        mu = float(L.mean() / n)
        info.update(mu=mu, mu_stderr=float(L.std(ddof=1) / n / math.sqrt(samples)), samples=samples)
    else:
        mu = float(th["mu"])
        info["mu"] = mu
    info.update(delta=th["delta"], c=(mu - th["delta"] * mean) * n)
    return info


# --------------------------------------------------------------------- running

def _empty_collected():
    return {"L": [], "mass": [], "replica": [], "sweep": [], "geodesics": [], "fields": [],
            "events": [], "free_mass": [], "violations": [], "witnesses": []}


def _record_lattice(col, st, spec, cs=None):
    B = st.B
    col["L"].append(st.L)
    col["mass"].append(st.mass)
    col["replica"].append(np.arange(B))
    col["sweep"].append(np.full(B, st.sweep_count))
    if spec["d"] == 2:
        col["geodesics"].append(np.stack([st.geodesic_indices(b) for b in range(B)]))
    if spec["keep_fields"]:
        col["fields"].append(st.x.copy())
    if "events" in spec["metrics"]:
        col["events"].append(event_counts(st, spec["eps"]))
    if cs is not None:
        col["free_mass"].append(cs.free.sum(axis=1))


def _stack(col):
    out = {}
    for k, v in col.items():
        if k == "witnesses":
            continue
        if v:
            out[k] = np.concatenate(v) if np.ndim(v[0]) >= 1 else np.array(v)
    return out


def _save_state(path, spec, threshold, st, col, extra=None):
    arrays = {f"col_{k}": v for k, v in _stack(col).items()}
    meta = {"spec_digest": spec.digest, "threshold": threshold, "extra": extra or {}}
    tmp = Path(str(path) + ".tmp")
    save_checkpoint(st, tmp, meta)
    with np.load(tmp) as data:
        base = {k: data[k] for k in data.files}
    with open(tmp, "wb") as fh:
        np.savez(fh, **base, **arrays)
    os.replace(tmp, path)


def _load_collected(data) -> dict:
    col = _empty_collected()
    for k in data.files:
        if k.startswith("col_"):
            col[k[4:]] = [data[k]]
    return col


def _run_chain(spec, threshold, rec: Path, st=None, col=None, cs=None, stop_after=None):
    c = threshold["c"]
    grid = spec.grid
    total = spec["burn_in"] + spec["samples"] * spec["thin"]
    coupled = spec["sampler"] == "coupled"
    if st is None:
        if coupled:
            cs = init_coupled(grid, c, spec["replicas"], spec["law"], spec["seed"], (_CHAIN_STREAM,))
            st = cs.star
        else:
            st = init_batch(grid, c, spec["replicas"], spec["law"], spec["seed"], (_CHAIN_STREAM,))
        col = _empty_collected()
    violations = int(col["violations"][-1][-1]) if col["violations"] else 0
    while st.sweep_count < total:
        if stop_after is not None and st.sweep_count >= stop_after:
            break
        if coupled:
            coupled_sweep(cs)
            violations += cs.violations
        else:
            gibbs_sweep(st)
        s = st.sweep_count - spec["burn_in"]
        if s > 0 and s % spec["thin"] == 0:
            _record_lattice(col, st, spec, cs)
            if coupled:
                col["violations"].append(np.array([violations]))
    extra = {}
    if coupled:
        extra["free"] = True
        np.save(rec / "free_state.npy", cs.free)
    _save_state(rec / "checkpoint.npz", spec, threshold, st, col, extra)
    return st, col, st.sweep_count >= total


_REJ_BATCH = 4096


def _run_rejection(spec, threshold, rec: Path, col=None, start_batch=0, tries0=0, stop_after=None):
    """Rejection sampling in whole batches of draws.

    ``stop_after`` caps the number of batches used by this call, so an
    interrupted run resumes on a batch boundary and reproduces a straight run.
    """
    grid = spec.grid
    want = spec["replicas"] * spec["samples"]
    col = col or _empty_collected()
    have = sum(len(a) for a in col["L"])
    # each call gets a fresh max_tries budget; the try counter keeps running
    budget = spec["max_tries"]
    capped = stop_after is not None and stop_after * _REJ_BATCH < budget
    if capped:
        budget = stop_after * _REJ_BATCH
    res = rejection_sample(grid, spec["law"], threshold["c"], want - have, budget,
                           spec["seed"], (_REJ_STREAM,), batch=_REJ_BATCH, start_batch=start_batch)
    if len(res.samples):
        x = res.samples
        from .gibbs import _tables_for  # one-off tables for geodesics

        fwd, _ = _tables_for(grid, x.copy())
        col["L"].append(fwd[:, -1].copy())
        col["mass"].append(x.sum(axis=1))
        col["replica"].append(np.arange(have, have + len(x)))
        col["sweep"].append(res.draws + tries0)
        if spec["d"] == 2:
            from .passage import geodesic_indices

            col["geodesics"].append(np.stack([geodesic_indices(grid, f) for f in fwd]))
        if spec["keep_fields"]:
            col["fields"].append(x)
    tries = tries0 + res.tries
    info = {"tries": tries, "next_batch": start_batch + res.batches,
            "exhausted": bool(res.exhausted and not capped),
            "interrupted": bool(res.exhausted and capped),
            "accepted": have + len(res.samples)}
    arrays = {f"col_{k}": v for k, v in _stack(col).items()}
    header = {"version": __version__, "spec_digest": spec.digest, "threshold": threshold, "rejection": info}
    with open(rec / "checkpoint.npz", "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header)), **arrays)
    return col, info


def _run_poisson(spec, threshold, rec: Path):
    n, c, eD = spec["n"], threshold["c"], spec["eps_D"]
    col = _empty_collected()
    info = {}
    if spec["sampler"] == "rejection":
        cfgs, tries, ex = poisson_rejection_sample(n, c, spec["replicas"] * spec["samples"], spec["max_tries"],
                                                   spec["seed"], (_REJ_STREAM,), eps_D=eD)
        info = {"tries": tries, "exhausted": bool(ex), "accepted": len(cfgs)}
        for r, cfg in enumerate(cfgs):
            col["L"].append(lis(cfg)); col["mass"].append(len(cfg))
            col["replica"].append(r); col["sweep"].append(0)
            col["witnesses"].append(zero_slack_boxes(cfg, c))
        return col, info
    for r in range(spec["replicas"]):
        g = PoissonGibbs.empty(n, c, spec["seed"], eps_D=eD, stream=(_CHAIN_STREAM, r))
        total = spec["burn_in"] + spec["samples"] * spec["thin"]
        while g.sweep_count < total:
            g.sweep()
            s = g.sweep_count - spec["burn_in"]
            if s > 0 and s % spec["thin"] == 0:
                cfg = g.config
                col["L"].append(lis(cfg)); col["mass"].append(len(cfg))
                col["replica"].append(r); col["sweep"].append(g.sweep_count)
                col["witnesses"].append(zero_slack_boxes(cfg, c))
        info[f"tries_{r}"] = g.tries
    return col, info


def batch_from_arrays(spec, threshold, col) -> SampleBatch:
    if spec["model"] == "poisson":
        return SampleBatch("poisson", {"n": spec["n"], "eps_D": spec["eps_D"], "law": "poisson"},
                           np.asarray(col["L"], float), np.asarray(col["mass"], float),
                           np.asarray(col["replica"]), np.asarray(col["sweep"]),
                           witnesses=col["witnesses"], c=threshold["c"])
    a = _stack(col)
    k = len(a.get("L", []))
    return SampleBatch(
        "lattice", {"n": spec["n"], "d": spec["d"], "law": spec["law"]},
        a.get("L", np.empty(0)), a.get("mass", np.empty(0)),
        a.get("replica", np.empty(0, int)), a.get("sweep", np.empty(0, int)),
        geodesics=a.get("geodesics"), fields=a.get("fields"), c=threshold["c"],
    ) if k else SampleBatch("lattice", {"n": spec["n"], "d": spec["d"], "law": spec["law"]},
                            np.empty(0), np.empty(0), np.empty(0, int), np.empty(0, int), c=threshold["c"])


def _curve(spec, name, batch):
    if name == "identity":
        return MonotoneCurve.identity()
    if name == "median":
        return median_curve(batch)
    return MonotoneCurve.load(name)


def _mask(spec, mk, grid):
    if mk["type"] == "full":
        return RegionMask.full(grid)
    if mk["type"] == "cylinder":
        return cylinder(MonotoneCurve.identity() if mk.get("curve", "identity") == "identity"
                        else MonotoneCurve.load(mk["curve"]), mk["eps"], grid)
    if mk["type"] == "strip":
        return strip(grid, mk["i"], mk["K"])
    return load_mask(mk["path"])


def compute_metrics(spec, threshold, batch: SampleBatch, col=None) -> list[dict]:
    rows = []
    c = threshold["c"]
    if len(batch) == 0:
        return rows
    if "mass" in spec["metrics"]:
        s = mass_deficit(batch) if batch.model == "lattice" else summary(batch.mass / spec["n"] ** 2)
        rows += [{"metric": "mass", "stat": k, "param": "", "value": v} for k, v in s.items()]
    gap = concentration_statistic(batch, c)
    if "concentration" in spec["metrics"]:
        rows += [{"metric": "concentration", "stat": k, "param": "", "value": v} for k, v in summary(gap).items()]
    if "containment" in spec["metrics"] and (batch.geodesics is not None or batch.witnesses is not None):
        for name in spec["curves"]:
            curve = _curve(spec, name, batch) if not (name == "median" and batch.model == "poisson") else None
            if curve is None:
                continue
            for e in spec["eps_prime"]:
                est = containment_probability(batch, curve, e)
                label = name if name in ("identity", "median") else Path(name).name
                rows.append({"metric": "containment", "stat": "p", "param": f"{label}@{e}", "value": est.value,
                             "stderr": est.stderr, "count": est.count, "hits": est.hits})
    if "anticoncentration" in spec["metrics"] and batch.fields is not None:
        H = spec["H"] if isinstance(spec["H"], (int, float)) else float(np.quantile(gap, spec["H"]["quantile"]))
        masks = {json.dumps(mk, sort_keys=True): _mask(spec, mk, batch.grid) for mk in spec["masks"]}
        for r in anticoncentration_curve(batch, masks, H, c):
            rows.append({"metric": "anticoncentration", "stat": "p", "param": r["mask"], "value": r["value"],
                         "stderr": r["stderr"], "count": r["count"], "hits": r["hits"], "area": r["area"], "H": H})
    if "events" in spec["metrics"] and col is not None and col.get("events"):
        ev = np.concatenate(col["events"])
        for j, name in enumerate(("B", "M")):
            rows += [{"metric": f"events_{name}", "stat": k, "param": spec["eps"], "value": v}
                     for k, v in summary(ev[:, j]).items()]
    if "coupling" in spec["metrics"] and col is not None and col.get("free_mass"):
        fm = np.concatenate(col["free_mass"])
        rows += [{"metric": "coupling", "stat": "star_over_free_max", "param": "",
                  "value": float(np.max(batch.mass / fm))},
                 {"metric": "coupling", "stat": "violations", "param": "",
                  "value": int(np.concatenate(col["violations"])[-1])}]
    if "shape" in spec["metrics"]:
        for r in shape_check([tuple(a) for a in spec["aspects"]], spec["n"], spec["replicas"] * spec["samples"],
                             spec["seed"], spec["law"], spec["model"]):
            rows.append({"metric": "shape", "stat": "mean", "param": f"{r['x']}x{r['y']}", "value": r["mean"],
                         "stderr": r["stderr"], "count": r["count"], "limit": r["limit"]})
    return rows


def _verdicts(spec, rows) -> list[dict]:
    flat = {}
    for r in rows:
        key = f"{r['metric']}.{r['stat']}" + (f"[{r['param']}]" if r.get("param", "") != "" else "")
        flat[key] = r["value"]
    out = []
    for ck in spec["checks"]:
        v = flat.get(ck["metric"])
        ok = v is not None and _OPS[ck["op"]](v, ck["value"])
        out.append({"name": ck["name"], "metric": ck["metric"], "op": ck["op"], "bound": ck["value"],
                    "observed": "" if v is None else v, "verdict": "PASS" if ok else "FAIL"})
    return out


def _finish(spec, threshold, rec: Path, col, status: dict, t0: float):
    batch = batch_from_arrays(spec, threshold, col)
    rows = compute_metrics(spec, threshold, batch, col)
    table = batch.samples_table()
    gap = concentration_statistic(batch, threshold["c"]) if len(batch) else []
    for r, g in zip(table, gap):
        r["gap"] = float(g)
    write_csv(table, rec / "samples.csv")
    write_csv(rows, rec / "metrics.csv")
    verdicts = _verdicts(spec, rows)
    write_csv(verdicts, rec / "verdicts.csv")
    if batch.geodesics is not None and len(batch):
        heatmap_svg(occupation(batch), rec / "heatmap.svg")
    record = {"version": __version__, "spec_digest": spec.digest, "threshold": threshold, "status": status}
    (rec / "record.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    (rec / "timing.json").write_text(json.dumps({"wall_seconds": time.perf_counter() - t0}) + "\n")
    return {"dir": rec, "batch": batch, "metrics": rows, "verdicts": verdicts, "threshold": threshold,
            "status": status}


def run(spec_source, out_dir, seed: int | None = None, stop_after: int | None = None, force_sampler=None) -> dict:
    """Execute a spec into ``out_dir``; ``stop_after`` interrupts chains at that sweep."""
    t0 = time.perf_counter()
    spec = load_spec(spec_source, seed=seed)
    if force_sampler:
        spec["sampler"] = force_sampler
    rec = Path(out_dir)
    rec.mkdir(parents=True, exist_ok=True)
    (rec / "spec.json").write_text(json.dumps(spec, indent=2, sort_keys=True) + "\n")
    threshold = resolve_threshold(spec)
    if spec["model"] == "poisson":
        col, info = _run_poisson(spec, threshold, rec)
        status = {"complete": not info.get("exhausted", False), **info}
        if info.get("exhausted"):
            status["failure"] = "rejection budget exhausted"
        return _finish(spec, threshold, rec, col, status, t0)
    if spec["sampler"] == "rejection":
        col, info = _run_rejection(spec, threshold, rec, stop_after=stop_after)
        status = {"complete": not (info["exhausted"] or info["interrupted"]), **info}
        if info["exhausted"]:
            status["failure"] = "rejection budget exhausted; threshold unobtainable within max_tries"
        return _finish(spec, threshold, rec, col, status, t0)
    st, col, done = _run_chain(spec, threshold, rec, stop_after=stop_after)
    status = {"complete": done, "sweeps": st.sweep_count}
    return _finish(spec, threshold, rec, col, status, t0)


class ResumeError(RuntimeError):
    pass


def resume(checkpoint, stop_after: int | None = None) -> dict:
    """Continue the run whose checkpoint is given; refuses on version or spec changes."""
    t0 = time.perf_counter()
    ck = Path(checkpoint)
    rec = ck.parent
    spec = load_spec(json.loads((rec / "spec.json").read_text()))
    with np.load(ck, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        col = _load_collected(data)
    if header.get("version") != __version__:
        raise ResumeError(f"checkpoint written by version {header.get('version')}, running {__version__}")
    digest = header.get("spec_digest") or header.get("meta", {}).get("spec_digest")
    if digest != spec.digest:
        raise ResumeError("spec.json no longer matches the spec the checkpoint was written with")
    threshold = header.get("threshold") or header["meta"]["threshold"]
    if "rejection" in header:
        info = header["rejection"]
        col, info = _run_rejection(spec, threshold, rec, col, info["next_batch"], info["tries"], stop_after)
        status = {"complete": not (info["exhausted"] or info["interrupted"]), **info}
        if info["exhausted"]:
            status["failure"] = "rejection budget exhausted; threshold unobtainable within max_tries"
        return _finish(spec, threshold, rec, col, status, t0)
    st, _ = load_checkpoint(ck)
    cs = None
    if spec["sampler"] == "coupled":
        from .gibbs import CoupledState

        cs = CoupledState(st, np.load(rec / "free_state.npy"))
    st, col, done = _run_chain(spec, threshold, rec, st=st, col=col, cs=cs, stop_after=stop_after)
    status = {"complete": done, "sweeps": st.sweep_count}
    return _finish(spec, threshold, rec, col, status, t0)


def report(record_dir) -> str:
    """Human-readable digest of a record directory."""
    rec = Path(record_dir)
    record = json.loads((rec / "record.json").read_text())
    lines = [f"record {rec}", f"version {record['version']}  threshold c = {record['threshold']['c']!r}",
             f"status {json.dumps(record['status'], sort_keys=True)}"]
    import csv

    with open(rec / "metrics.csv") as fh:
        for r in csv.DictReader(fh):
            extra = f" +/- {r['stderr']}" if r.get("stderr") else ""
            lines.append(f"  {r['metric']:<18} {r['stat']:<20} {r.get('param', ''):<24} {r['value']}{extra}")
    if (rec / "verdicts.csv").exists():
        with open(rec / "verdicts.csv") as fh:
            for r in csv.DictReader(fh):
                lines.append(f"{r['verdict']} {r['name']}: {r['metric']} = {r['observed']} {r['op']} {r['bound']}")
    return "\n".join(lines)


def bench(spec_source, sweeps: int = 20, seed: int | None = None) -> dict:
    """Sweep throughput for the spec's grid, law and replica count."""
    spec = load_spec(spec_source, seed=seed)
    threshold = resolve_threshold(spec)
    grid = spec.grid
    st = init_batch(grid, threshold["c"], spec["replicas"], spec["law"], spec["seed"], (_CHAIN_STREAM,))
    gibbs_sweep(st)  # compile
    t = time.perf_counter()
    for _ in range(sweeps):
        gibbs_sweep(st)
    dt = time.perf_counter() - t
    return {"n": grid.n, "d": grid.d, "replicas": st.B, "sweeps": sweeps, "seconds": dt,
            "sweeps_per_second": sweeps / dt, "site_updates_per_second": sweeps * st.B * grid.size / dt}
