import json
import os
import subprocess
import sys

import pytest

from collision_mmab.cli import main
from collision_mmab.errors import ConfigError
from collision_mmab.harness import ExperimentSpec, run_experiment, sweep_specs

SMALL = {"K": 4, "M": 2, "T": 5000, "means": [0.9, 0.7, 0.4, 0.2], "beta": 2.0, "seeds": 2, "seed": 7}


def write(tmp_path, data, name="c.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def test_spec_defaults_and_seeds():
    spec = ExperimentSpec.from_dict({"K": 10, "M": 5, "T": 50_000})
    assert spec.beta == 4.0 and spec.seeds == 20
    assert spec.bandit.means[0] == 0.9 and spec.bandit.means[-1] == pytest.approx(0.89)
    assert spec.normalized()["delta"] == pytest.approx(1 / 50_000**2)
    assert spec.run_seeds == list(range(20))
    explicit = ExperimentSpec.from_dict({**SMALL, "seeds": [3, 11]})
    assert explicit.run_seeds == [3, 11]


@pytest.mark.parametrize("bad", [{"beta": 1.0}, {"seeds": 0}, {"M": 4}, {"means": [0.9, 0.7, 0.4, 1.2]},
                                 {"algorithm": "async"}, {"algorithm": "nope"}])
def test_spec_rejects_bad_input(bad):
    with pytest.raises(ConfigError):
        ExperimentSpec.from_dict({**SMALL, **bad})


def test_run_is_deterministic(tmp_path):
    cfg = write(tmp_path, SMALL)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    for name in ("runs.csv", "aggregate.csv", "curves.csv", "spec.normalized.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_cli_overrides_and_env_var(tmp_path, monkeypatch):
    cfg = write(tmp_path, SMALL)
    monkeypatch.setenv("COLLISION_MMAB_OUT", str(tmp_path / "env"))
    assert main(["run", "--config", cfg, "--seeds", "1", "--beta", "3"]) == 0
    rows = (tmp_path / "env" / "runs.csv").read_text().splitlines()
    assert len(rows) == 2
    assert json.loads((tmp_path / "env" / "spec.normalized.json").read_text())["beta"] == 3.0


def test_curves_are_monotone(tmp_path):
    cfg = write(tmp_path, SMALL)
    main(["run", "--config", cfg, "--out", str(tmp_path)])
    lines = (tmp_path / "curves.csv").read_text().splitlines()[1:]
    means = [float(line.split(",")[1]) for line in lines]
    assert all(b >= a - 1e-9 for a, b in zip(means, means[1:]))


def test_sweep_writes_long_format(tmp_path):
    cfg = write(tmp_path, {**SMALL, "seeds": 1})
    assert main(["sweep", "--config", cfg, "--param", "beta", "--values", "2,3", "--out", str(tmp_path)]) == 0
    header, *rows = (tmp_path / "sweep.csv").read_text().splitlines()
    assert header.startswith("beta,")
    assert [r.split(",")[0] for r in rows] == ["2.0", "3.0"]
    assert (tmp_path / "beta=2.0" / "curves.csv").exists()


def test_sweep_gap_builds_means():
    spec = ExperimentSpec.from_dict(SMALL)
    (_, sub), = sweep_specs(spec, "delta_gap", [0.1])
    assert sub.bandit.means == pytest.approx((0.9, 0.8, 0.7, 0.6))
    with pytest.raises(ConfigError):
        sweep_specs(spec, "delta_gap", [0.5])


def test_validate_prints_normalized(tmp_path, capsys):
    cfg = write(tmp_path, {"K": 3, "M": 1, "T": 100})
    assert main(["validate", "--config", cfg]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["beta"] == 4.0 and len(out["means"]) == 3 and "config_hash" in out


def test_invalid_config_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, {**SMALL, "beta": 0.5})
    assert main(["validate", "--config", cfg]) == 2
    assert "error" in json.loads(capsys.readouterr().err)


def test_failures_give_nonzero_exit(tmp_path, monkeypatch):
    import collision_mmab.harness as harness
    original = harness.summarize

    def broken(*args, **kwargs):
        summary = original(*args, **kwargs)
        summary.failures.append("collision_free")
        return summary

    monkeypatch.setattr(harness, "summarize", broken)
    cfg = write(tmp_path, {**SMALL, "seeds": 1})
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 1
    report = json.loads((tmp_path / "failures.json").read_text())
    assert report == [{"seed": 7, "failed": ["collision_free"]}]


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, {"K": 3, "M": 1, "T": 100})
    proc = subprocess.run([sys.executable, "-m", "collision_mmab", "validate", "--config", cfg],
                          capture_output=True, text=True, env={**os.environ})
    assert proc.returncode == 0 and '"K": 3' in proc.stdout


def test_run_experiment_parallel_matches_serial():
    spec = ExperimentSpec.from_dict(SMALL)
    from dataclasses import replace
    serial = [r.row for r in run_experiment(spec)]
    parallel = [r.row for r in run_experiment(replace(spec, workers=2))]
    assert serial == parallel
