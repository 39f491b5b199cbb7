import csv
import json

import numpy as np
import pytest

from lowertail import __version__
from lowertail.cli import main
from lowertail.experiment import ResumeError, SpecError, load_spec, report, resolve_threshold, resume, run
from lowertail.lattice import MonotoneCurve


def minimal(**kw):
    spec = {"model": "lattice", "n": 16, "law": "exp", "threshold": {"mode": "quantile", "q": 0.01},
            "sampler": "rejection", "samples": 100, "seed": 7}
    spec.update(kw)
    return spec


def chain_spec(**kw):
    spec = {"n": 10, "threshold": {"mode": "delta", "delta": 0.5, "samples": 100}, "replicas": 2,
            "samples": 4, "burn_in": 10, "thin": 3, "seed": 5,
            "metrics": ["mass", "concentration", "containment", "events"]}
    spec.update(kw)
    return spec


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_minimal_rejection_run(tmp_path):
    res = run(minimal(), tmp_path / "r")
    rows = read_rows(tmp_path / "r" / "samples.csv")
    assert len(rows) >= 100
    assert {"replica", "sweep", "L", "mass"} <= set(rows[0])
    c = res["threshold"]["c"]
    assert all(float(r["L"]) <= c for r in rows)
    for name in ("spec.json", "record.json", "metrics.csv", "verdicts.csv", "heatmap.svg",
                 "checkpoint.npz", "timing.json"):
        assert (tmp_path / "r" / name).exists()
    rec = json.loads((tmp_path / "r" / "record.json").read_text())
    assert rec["version"] == __version__ and rec["status"]["complete"]


def test_same_spec_same_bytes(tmp_path):
    for d in ("a", "b"):
        run(chain_spec(), tmp_path / d)
    for name in ("metrics.csv", "samples.csv", "verdicts.csv", "heatmap.svg", "record.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.parametrize("field,patch", [
    ("law", {"law": "nonsense"}),
    ("seed", {"seed": None}),
    ("threshold", {"threshold": {"mode": "sometimes"}}),
    ("threshold.q", {"threshold": {"mode": "quantile", "q": 1.5}}),
    ("sampler", {"sampler": "metropolis"}),
    ("n", {"n": 0}),
    ("curves[0]", {"curves": ["missing_curve.txt"]}),
    ("masks[0].path", {"masks": [{"type": "file", "path": "missing_mask.json"}]}),
])
def test_invalid_spec_names_field(field, patch):
    spec = minimal(**patch)
    if spec.get("seed") is None:
        del spec["seed"]
    with pytest.raises(SpecError) as err:
        load_spec(spec)
    assert err.value.field == field
    assert field in str(err.value)


def test_cli_reports_bad_law(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(minimal(law="cauchy")))
    assert main(["run", str(path), "-o", str(tmp_path / "out")]) == 2
    assert "law" in capsys.readouterr().err


def test_interrupt_and_resume_is_bit_exact(tmp_path):
    run(chain_spec(), tmp_path / "straight")
    part = run(chain_spec(), tmp_path / "split", stop_after=13)
    assert not part["status"]["complete"]
    resume(tmp_path / "split" / "checkpoint.npz", stop_after=17)
    resume(tmp_path / "split" / "checkpoint.npz")
    for name in ("metrics.csv", "samples.csv"):
        assert (tmp_path / "straight" / name).read_bytes() == (tmp_path / "split" / name).read_bytes()


def test_coupled_run_and_resume(tmp_path):
    spec = chain_spec(sampler="coupled", metrics=["mass", "coupling"])
    run(spec, tmp_path / "a")
    run(spec, tmp_path / "b", stop_after=15)
    resume(tmp_path / "b" / "checkpoint.npz")
    assert (tmp_path / "a" / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()
    rows = {r["stat"]: float(r["value"]) for r in read_rows(tmp_path / "a" / "metrics.csv") if r["metric"] == "coupling"}
    assert rows["violations"] == 0 and rows["star_over_free_max"] <= 1


def test_resume_refuses_altered_spec(tmp_path):
    run(chain_spec(), tmp_path / "r", stop_after=5)
    spec = json.loads((tmp_path / "r" / "spec.json").read_text())
    spec["thin"] = 4
    (tmp_path / "r" / "spec.json").write_text(json.dumps(spec))
    with pytest.raises(ResumeError, match="spec"):
        resume(tmp_path / "r" / "checkpoint.npz")


def test_resume_refuses_other_version(tmp_path, monkeypatch):
    run(chain_spec(), tmp_path / "r", stop_after=5)
    import lowertail.experiment as ex

    monkeypatch.setattr(ex, "__version__", "9.9.9")
    with pytest.raises(ResumeError) as err:
        resume(tmp_path / "r" / "checkpoint.npz")
    assert __version__ in str(err.value) and "9.9.9" in str(err.value)


def test_exhausted_rejection_resume_continues_counter(tmp_path):
    spec = minimal(n=8, threshold={"mode": "absolute", "c": 9.0}, max_tries=4096, samples=50)
    res = run(spec, tmp_path / "r")
    assert not res["status"]["complete"] and res["status"]["exhausted"]
    assert "failure" in json.loads((tmp_path / "r" / "record.json").read_text())["status"]
    t0 = res["status"]["tries"]
    res2 = resume(tmp_path / "r" / "checkpoint.npz")
    assert res2["status"]["tries"] > t0
    sweeps = [int(r["sweep"]) for r in read_rows(tmp_path / "r" / "samples.csv")]
    assert sweeps == sorted(sweeps)


def test_rejection_interrupt_resume_matches(tmp_path):
    spec = minimal(n=6, threshold={"mode": "quantile", "q": 0.05, "samples": 20_000}, samples=400)
    run(spec, tmp_path / "a")
    part = run(spec, tmp_path / "b", stop_after=1)
    assert part["status"]["interrupted"]
    resume(tmp_path / "b" / "checkpoint.npz")
    assert (tmp_path / "a" / "samples.csv").read_bytes() == (tmp_path / "b" / "samples.csv").read_bytes()


def test_thresholds():
    spec = load_spec(minimal(threshold={"mode": "absolute", "c": 12.5}))
    assert resolve_threshold(spec)["c"] == 12.5
    spec = load_spec(chain_spec(threshold={"mode": "delta", "delta": 1.0, "mu": 4.0}))
    assert resolve_threshold(spec)["c"] == 30.0
    spec = load_spec(chain_spec())
    info = resolve_threshold(spec)
    assert info["c"] == pytest.approx((info["mu"] - 0.5) * 10)


def test_checks_masks_and_curves(tmp_path):
    MonotoneCurve.through((0.5, 0.4)).save(tmp_path / "curve.txt")
    spec = chain_spec(metrics=["containment", "anticoncentration", "mass"], keep_fields=True,
                      curves=["identity", "median", str(tmp_path / "curve.txt")], eps_prime=[0.2, 1.0],
                      masks=[{"type": "full"}, {"type": "cylinder", "eps": 0.1}, {"type": "strip", "i": 0, "K": 2}],
                      H=50.0,
                      checks=[{"name": "full tube", "metric": "containment.p[identity@1.0]", "op": ">=", "value": 1.0},
                              {"name": "impossible", "metric": "mass.mean", "op": "<", "value": 0.0}])
    res = run(spec, tmp_path / "r")
    verdicts = {v["name"]: v["verdict"] for v in res["verdicts"]}
    assert verdicts == {"full tube": "PASS", "impossible": "FAIL"}
    text = report(tmp_path / "r")
    assert "PASS full tube" in text and "anticoncentration" in text


def test_poisson_run(tmp_path):
    spec = {"model": "poisson", "n": 4, "threshold": {"mode": "absolute", "c": 4},
            "replicas": 2, "samples": 3, "burn_in": 4, "thin": 2, "seed": 1,
            "metrics": ["mass", "concentration", "containment"], "eps_prime": [0.5]}
    res = run(spec, tmp_path / "p")
    assert len(res["batch"]) == 6 and np.all(res["batch"].L <= 4)
    res = run({**spec, "sampler": "rejection"}, tmp_path / "q")
    assert len(res["batch"]) == 6


def test_cli_commands(tmp_path, capsys, monkeypatch):
    path = tmp_path / "s.json"
    path.write_text(json.dumps(chain_spec()))
    out = tmp_path / "rec"
    assert main(["run", str(path), "-o", str(out), "--seed", "11"]) == 0
    assert json.loads((out / "spec.json").read_text())["seed"] == 11
    assert main(["report", str(out)]) == 0
    assert "threshold" in capsys.readouterr().out
    assert main(["oracle", str(path), "-o", str(tmp_path / "orc")]) == 0
    assert json.loads((tmp_path / "orc" / "spec.json").read_text())["sampler"] == "rejection"
    monkeypatch.setenv("LOWERTAIL_THREADS", "1")
    assert main(["bench", str(path), "--sweeps", "2"]) == 0
    assert "sweeps_per_second" in capsys.readouterr().out
    assert main(["run", str(path), "-o", str(tmp_path / "s2"), "--stop-after", "4"]) == 0
    assert main(["resume", str(tmp_path / "s2" / "checkpoint.npz")]) == 0
