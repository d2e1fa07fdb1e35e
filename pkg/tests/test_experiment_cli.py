import json
import os
import shutil
import subprocess
import sys

import numpy as np
import pytest

import sobosvd as sv
from sobosvd.cli import main
from sobosvd.errors import ConfigError, SampleFileError
from sobosvd.experiment import (
    CHECK_NAMES,
    ExperimentConfig,
    load_samples,
    run_experiment,
    save_samples,
)

_ENV_VARS = (
    "SOBOSVD_THREADS",
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


@pytest.fixture(autouse=True)
def _restore_thread_env():
    # the cli pins thread vars straight into os.environ
    saved = {v: os.environ.get(v) for v in _ENV_VARS}
    yield
    for var, val in saved.items():
        if val is None:
            os.environ.pop(var, None)
        else:
            os.environ[var] = val


def write_config(tmp_path, data, name="config.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data), "utf-8")
    return p


def test_config_minimal_defaults():
    cfg = ExperimentConfig.from_dict({"function": {"case": "SEP1"}})
    assert cfg.case_name == "SEP1"
    assert cfg.sample_file is None
    assert cfg.checks == CHECK_NAMES
    assert cfg.tolerance("sandwich") == 1e-9


def test_config_checks_keep_canonical_order():
    cfg = ExperimentConfig.from_dict(
        {"function": {"case": "SEP1"}, "checks": ["sandwich", "eckart_young"]}
    )
    assert cfg.checks == ("eckart_young", "sandwich")


def test_config_schema_rejections():
    bad = [
        {},
        {"function": {}},
        {"function": {"case": "SEP1", "file": "x.raw"}},
        {"function": {"case": "SEP1"}, "grid": {"n": [2, 2]}},
        {"function": {"case": "SEP1"}, "surprise": 1},
        {"function": {"case": "SEP1"}, "checks": ["nonsense"]},
        {"function": {"case": "SEP1"}, "ranks": {}},
        {"function": {"case": "SEP1"}, "ranks": {"explicit": [[1]], "sweep": {"from": 1, "to": 2}}},
        {"function": {"case": "SEP1"}, "ranks": {"explicit": [[-1, 1]]}},
        {"function": {"case": "SEP1"}, "tolerances": {"sandwich": 0.0}},
    ]
    for data in bad:
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(data)


def test_config_unknown_tolerance_key():
    with pytest.raises(ConfigError, match="unknown tolerance"):
        ExperimentConfig.from_dict(
            {"function": {"case": "SEP1"}, "tolerances": {"typo": 1e-9}}
        )


def test_config_from_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(tmp_path / "missing.json")
    p = tmp_path / "broken.json"
    p.write_text("{not json", "utf-8")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(p)
    p.write_text("[1, 2]", "utf-8")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(p)


def test_config_paths_resolve_against_config_dir(tmp_path):
    sub = tmp_path / "nested"
    sub.mkdir()
    p = write_config(
        sub, {"function": {"file": "data.raw"}, "output": "results"}
    )
    cfg = ExperimentConfig.from_file(p)
    assert cfg.sample_file == sub / "data.raw"
    assert cfg.output == sub / "results"


def sample_grid(shape=(9, 7)):
    rng = np.random.default_rng(42)
    axes = tuple(
        sv.make_axis(n, -1.0, 2.0) if j == 0 else sv.make_axis(n)
        for j, n in enumerate(shape)
    )
    return sv.GridFunction(axes, rng.standard_normal(shape))


def test_samples_round_trip_is_exact(tmp_path):
    u = sample_grid()
    p = save_samples(u, tmp_path / "u.raw")
    back = load_samples(p)
    assert back.shape == u.shape
    assert np.array_equal(back.values, u.values)
    assert back.axes[0].lower == -1.0 and back.axes[0].upper == 2.0
    again = tmp_path / "again.raw"
    save_samples(back, again)
    assert again.read_bytes() == p.read_bytes()
    meta = json.loads((tmp_path / "u.raw.meta.json").read_text("utf-8"))
    assert meta["format"] == "sobosvd-raw-1"
    assert meta["shape"] == [9, 7]


def test_load_samples_shape_crosscheck(tmp_path):
    p = save_samples(sample_grid(), tmp_path / "u.raw")
    load_samples(p, shape=(9, 7))
    with pytest.raises(SampleFileError):
        load_samples(p, shape=(7, 9))


def test_load_samples_failure_modes(tmp_path):
    u = sample_grid()
    p = save_samples(u, tmp_path / "u.raw")
    meta_p = tmp_path / "u.raw.meta.json"

    with pytest.raises(SampleFileError):
        load_samples(tmp_path / "absent.raw")

    good = meta_p.read_text("utf-8")
    meta_p.write_text("{oops", "utf-8")
    with pytest.raises(SampleFileError):
        load_samples(p)

    meta = json.loads(good)
    meta["format"] = "other"
    meta_p.write_text(json.dumps(meta), "utf-8")
    with pytest.raises(SampleFileError):
        load_samples(p)

    meta = json.loads(good)
    meta["axes"] = meta["axes"][:1]
    meta_p.write_text(json.dumps(meta), "utf-8")
    with pytest.raises(SampleFileError):
        load_samples(p)

    meta = json.loads(good)
    del meta["axes"][0]["upper"]
    meta_p.write_text(json.dumps(meta), "utf-8")
    with pytest.raises(SampleFileError):
        load_samples(p)

    meta = json.loads(good)
    meta["axes"][0]["upper"] = meta["axes"][0]["lower"]
    meta_p.write_text(json.dumps(meta), "utf-8")
    with pytest.raises(SampleFileError):
        load_samples(p)

    meta_p.write_text(good, "utf-8")
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(SampleFileError):
        load_samples(p)


def test_run_experiment_catalog_case(tmp_path):
    cfg = ExperimentConfig.from_dict(
        {"function": {"case": "SEP1"}, "grid": {"n": [21, 21]}}
    )
    result = run_experiment(cfg, out_dir=tmp_path / "out")
    assert result.passed
    report = result.report
    assert report["schema"] == "sobosvd-report-1"
    assert report["function"]["case"] == "SEP1"
    assert report["grid"]["n"] == [21, 21]
    # default sweep is balanced 1..8
    assert report["ranks"][0] == [1, 1] and len(report["ranks"]) == 8
    statuses = {c["name"]: c["status"] for c in report["checks"]}
    assert set(statuses) == set(CHECK_NAMES)
    assert all(s == "pass" for s in statuses.values())

    assert result.report_path is not None and result.report_path.exists()
    on_disk = json.loads(result.report_path.read_text("utf-8"))
    assert on_disk["passed"] is True
    assert not list((tmp_path / "out").glob("*.tmp"))


def test_run_experiment_is_deterministic(tmp_path):
    cfg = ExperimentConfig.from_dict(
        {
            "function": {"case": "BROWNIAN"},
            "grid": {"n": [17, 17]},
            "ranks": {"sweep": {"from": 1, "to": 4}},
        }
    )
    a = run_experiment(cfg, out_dir=tmp_path / "a")
    b = run_experiment(cfg, out_dir=tmp_path / "b")
    assert a.sigma_path.read_text("utf-8") == b.sigma_path.read_text("utf-8")
    assert json.dumps(a.report, sort_keys=True) == json.dumps(b.report, sort_keys=True)


def test_sigma_csv_layout(tmp_path):
    cfg = ExperimentConfig.from_dict(
        {
            "function": {"case": "EXPXY"},
            "grid": {"n": [33, 33]},
            "ranks": {"explicit": [[1, 1], [2, 2], [3, 3]]},
        }
    )
    result = run_experiment(cfg, out_dir=tmp_path)
    lines = result.sigma_path.read_text("utf-8").splitlines()
    assert lines[0] == "mode,k,sigma,dpsi_norm,bound_value"
    first = lines[1].split(",")
    assert first[0] == "1" and first[1] == "1"
    assert float(first[2]) == pytest.approx(result.report["spectra"][0]["sigmas"][0])
    # directions past the retained block carry sigma only
    retained = result.report["spectra"][0]["retained"]
    assert retained < 33
    tail = lines[1 + retained].split(",")
    assert tail[3] == "" and tail[4] == ""


def test_run_experiment_three_dims_skips_h1_identity():
    cfg = ExperimentConfig.from_dict(
        {
            "function": {"case": "SUM3D"},
            "grid": {"n": [13, 13, 13]},
            "ranks": {"explicit": [[1, 1, 1], [2, 2, 2]]},
        }
    )
    result = run_experiment(cfg)
    statuses = {c["name"]: c["status"] for c in result.report["checks"]}
    assert statuses["h1_identity"] == "skipped"
    assert statuses["diagnostics"] == "skipped"
    assert result.passed
    assert result.report_path is None


def test_run_experiment_from_sample_file(tmp_path):
    u = sv.sample_case(sv.get_case("SINSUM"), (17, 17))
    save_samples(u, tmp_path / "u.raw")
    p = write_config(
        tmp_path,
        {
            "function": {"file": "u.raw"},
            "ranks": {"sweep": {"from": 1, "to": 3}},
        },
    )
    result = run_experiment(ExperimentConfig.from_file(p))
    assert result.passed
    assert result.report["function"]["file"].endswith("u.raw")


def test_run_experiment_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="grid sizes"):
        run_experiment(ExperimentConfig.from_dict({"function": {"case": "SEP1"}}))
    with pytest.raises(ConfigError, match="dimensions"):
        run_experiment(
            ExperimentConfig.from_dict(
                {"function": {"case": "SEP3D"}, "grid": {"n": [9, 9]}}
            )
        )
    with pytest.raises(ConfigError, match="exceeds"):
        run_experiment(
            ExperimentConfig.from_dict(
                {
                    "function": {"case": "SEP1"},
                    "grid": {"n": [9, 9]},
                    "ranks": {"explicit": [[1, 10]]},
                }
            )
        )
    with pytest.raises(ConfigError, match="step"):
        run_experiment(
            ExperimentConfig.from_dict(
                {
                    "function": {"case": "SEP1"},
                    "grid": {"n": [9, 9]},
                    "ranks": {"sweep": {"from": 1, "to": 3, "step": 0}},
                }
            )
        )
    with pytest.raises(ConfigError, match="below"):
        run_experiment(
            ExperimentConfig.from_dict(
                {
                    "function": {"case": "SEP1"},
                    "grid": {"n": [9, 9]},
                    "ranks": {"sweep": {"from": 3, "to": 1}},
                }
            )
        )

    u = sv.sample_case(sv.get_case("SEP1"), (9, 9))
    save_samples(u, tmp_path / "u.raw")
    with pytest.raises(ConfigError, match="does not match"):
        run_experiment(
            ExperimentConfig.from_dict(
                {"function": {"file": "u.raw"}, "grid": {"n": [11, 11]}},
                base_dir=tmp_path,
            )
        )

    one_d = sv.sample(lambda x: x, (sv.make_axis(9),))
    save_samples(one_d, tmp_path / "line.raw")
    with pytest.raises(ConfigError, match="two axes"):
        run_experiment(
            ExperimentConfig.from_dict(
                {"function": {"file": "line.raw"}}, base_dir=tmp_path
            )
        )


def test_run_experiment_edge_cases_block():
    cfg = ExperimentConfig.from_dict(
        {"function": {"case": "SINSUM"}, "grid": {"n": [17, 17]}}
    )
    result = run_experiment(cfg, edge_cases=True)
    statuses = {c["name"]: c["status"] for c in result.report["checks"]}
    assert statuses["edge_cases"] == "pass"
    assert result.passed


def test_cli_list_cases(capsys):
    assert main(["list-cases"]) == 0
    out = capsys.readouterr().out
    for name in ("SEP1", "SINSUM", "BROWNIAN", "SEP3D", "SUM3D", "EXPXY"):
        assert name in out


def test_cli_verify_passes(capsys, tmp_path):
    code = main(["verify", "--case", "SEP1", "--n", "21", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "all checks passed" in out
    assert (tmp_path / "report.json").exists()


def test_cli_run_and_failure_exit(tmp_path, capsys):
    ok = write_config(
        tmp_path,
        {
            "function": {"case": "BROWNIAN"},
            "grid": {"n": [17, 17]},
            "ranks": {"sweep": {"from": 1, "to": 4}},
            "output": "out",
        },
    )
    assert main(["run", "--config", str(ok)]) == 0
    assert (tmp_path / "out" / "report.json").exists()
    capsys.readouterr()

    strict = write_config(
        tmp_path,
        {
            "function": {"case": "BROWNIAN"},
            "grid": {"n": [17, 17]},
            "ranks": {"sweep": {"from": 1, "to": 4}},
            "tolerances": {"eckart_young": 1e-300},
        },
        name="strict.json",
    )
    assert main(["run", "--config", str(strict)]) == 1
    report = json.loads((tmp_path / "out" / "report.json").read_text("utf-8"))
    assert report["passed"] is True


def test_cli_error_exit_codes(tmp_path, capsys):
    assert main(["verify", "--case", "NOPE", "--n", "17"]) == 2
    assert "unknown case" in capsys.readouterr().err
    assert main(["verify", "--case", "SEP1", "--n", "2"]) == 2
    capsys.readouterr()
    assert main(["verify", "--case", "SEP1", "--n", "x"]) == 2
    capsys.readouterr()
    assert main(["run", "--config", str(tmp_path / "absent.json")]) == 2
    capsys.readouterr()

    missing = write_config(tmp_path, {"function": {"file": "ghost.raw"}})
    assert main(["run", "--config", str(missing)]) == 3
    assert "ghost.raw" in capsys.readouterr().err


def test_cli_thread_pinning(capsys):
    os.environ.pop("SOBOSVD_THREADS", None)
    assert main(["verify", "--case", "SEP1", "--n", "9", "--threads", "3"]) == 0
    assert os.environ["OMP_NUM_THREADS"] == "3"
    assert os.environ["SOBOSVD_THREADS"] == "3"
    capsys.readouterr()

    # the environment variable wins over the flag
    os.environ["SOBOSVD_THREADS"] = "2"
    assert main(["verify", "--case", "SEP1", "--n", "9", "--threads", "5"]) == 0
    assert os.environ["OMP_NUM_THREADS"] == "2"
    report = capsys.readouterr().out
    assert report

    os.environ["SOBOSVD_THREADS"] = "zebra"
    assert main(["list-cases"]) == 2
    assert "not an integer" in capsys.readouterr().err

    os.environ.pop("SOBOSVD_THREADS", None)
    assert main(["verify", "--case", "SEP1", "--n", "9", "--threads", "0"]) == 2
    assert "at least 1" in capsys.readouterr().err


def test_cli_module_invocation():
    proc = subprocess.run(
        [sys.executable, "-m", "sobosvd.cli", "list-cases"],
        capture_output=True,
        text=True,
        timeout=60,
    )
    assert proc.returncode == 0
    assert "BROWNIAN" in proc.stdout


@pytest.mark.skipif(shutil.which("sobosvd") is None, reason="script not on PATH")
def test_cli_console_script():
    proc = subprocess.run(
        ["sobosvd", "list-cases"], capture_output=True, text=True, timeout=60
    )
    assert proc.returncode == 0
    assert "SINSUM" in proc.stdout
