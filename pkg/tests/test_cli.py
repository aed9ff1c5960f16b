import csv
import json
from pathlib import Path

import pytest

from threshold_gms import cli
from threshold_gms.validation import FINITE_EXAMPLE, TRANSIENT_EXAMPLE


@pytest.fixture
def transient_params(tmp_path):
    path = tmp_path / "transient.json"
    path.write_text(json.dumps(TRANSIENT_EXAMPLE.to_json()))
    return str(path)


@pytest.fixture
def finite_params(tmp_path):
    path = tmp_path / "finite.json"
    path.write_text(json.dumps(FINITE_EXAMPLE.to_json()))
    return str(path)


def read_dir(out: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


def test_simulate_writes_trace_and_summary(tmp_path, transient_params):
    out = tmp_path / "sim"
    code = cli.main(
        ["simulate", "--params", transient_params, "--horizon", "10", "--out", str(out)]
    )
    assert code == 0
    files = read_dir(out)
    assert set(files) == {"trace.csv", "summary.json", "manifest.json"}
    summary = json.loads(files["summary.json"])
    assert summary["events"] == summary["births"] + summary["extinctions"]
    assert summary["final_count"] >= 0
    rows = files["trace.csv"].decode().strip().splitlines()
    assert rows[0] == "time,kind,mark,count_after"
    assert len(rows) == summary["events"] + 1
    manifest = json.loads(files["manifest.json"])
    assert manifest["command"] == "simulate"
    assert sorted(manifest["outputs"]) == ["manifest.json", "summary.json", "trace.csv"]


def test_simulate_reruns_are_byte_identical(tmp_path, transient_params):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    argv = ["simulate", "--params", transient_params, "--horizon", "15", "--seed", "5"]
    assert cli.main(argv + ["--out", str(out1)]) == 0
    assert cli.main(argv + ["--out", str(out2)]) == 0
    assert read_dir(out1) == read_dir(out2)


def test_simulate_seed_changes_the_draw(tmp_path, transient_params):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    base = ["simulate", "--params", transient_params, "--horizon", "15"]
    assert cli.main(base + ["--seed", "1", "--out", str(out1)]) == 0
    assert cli.main(base + ["--seed", "2", "--out", str(out2)]) == 0
    assert read_dir(out1)["trace.csv"] != read_dir(out2)["trace.csv"]


def test_simulate_json_format(tmp_path, transient_params):
    out = tmp_path / "sim"
    code = cli.main(
        [
            "simulate",
            "--params",
            transient_params,
            "--horizon",
            "8",
            "--format",
            "json",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    trace = json.loads((out / "trace.json").read_text())
    summary = json.loads((out / "summary.json").read_text())
    assert len(trace["events"]) == summary["events"]
    if trace["events"]:
        assert set(trace["events"][0]) == {"time", "kind", "mark", "count_after"}


def test_simulate_accepts_initial_configuration(tmp_path, transient_params):
    initial = tmp_path / "initial.csv"
    initial.write_text("fitness\n0.5\n2.5\n")
    out = tmp_path / "sim"
    code = cli.main(
        [
            "simulate",
            "--params",
            transient_params,
            "--horizon",
            "0.001",
            "--initial",
            str(initial),
            "--out",
            str(out),
        ]
    )
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    # with an almost empty window the two seeded species usually survive
    assert summary["final_count"] >= 0


def test_classify_single_params(tmp_path, transient_params):
    out = tmp_path / "cls"
    assert cli.main(["classify", "--params", transient_params, "--out", str(out)]) == 0
    payload = json.loads((out / "classification.json").read_text())
    assert payload["report"]["recurrence"] == "Transient"
    assert payload["report"]["limit_count"] == "Infinite"
    assert payload["report"]["integrals"]["e_n"] == "inf"


def test_classify_grid_phase_map(tmp_path):
    out = tmp_path / "grid"
    argv = [
        "classify",
        "--grid",
        "alpha_fitness=1,2;alpha_threshold=1,2",
        "--out",
        str(out),
    ]
    assert cli.main(argv) == 0
    with open(out / "phase_map.csv", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 4
    by_key = {(r["alpha_fitness"], r["alpha_threshold"]): r for r in rows}
    transient = by_key[("1.0", "2.0")]
    assert transient["recurrence"] == "Transient"
    assert transient["e_n"] == "inf"
    assert transient["null_recurrent_like"] == "false"
    boundary = by_key[("1.0", "1.0")]
    assert boundary["null_recurrent_like"] == "true"
    assert boundary["e_m"] == "inf"
    out2 = tmp_path / "grid2"
    assert cli.main(argv[:-1] + [str(out2)]) == 0
    assert read_dir(out) == read_dir(out2)


def test_ladder_mc_outputs(tmp_path, transient_params):
    out = tmp_path / "mc"
    argv = [
        "ladder-mc",
        "--params",
        transient_params,
        "--reps",
        "400",
        "--seed",
        "77",
        "--out",
        str(out),
    ]
    assert cli.main(argv) == 0
    files = read_dir(out)
    assert set(files) == {"samples.csv", "summary.json", "manifest.json"}
    rows = files["samples.csv"].decode().strip().splitlines()
    assert rows[0] == "rep,count,mass"
    assert len(rows) == 401
    summary = json.loads(files["summary.json"])
    assert summary["plan"]["task"] == "extinction_count"
    assert summary["summary"]["n"] == 400
    assert summary["summary"]["sentinel_count"] == 0
    out2 = tmp_path / "mc2"
    assert cli.main(argv[:-1] + [str(out2)]) == 0
    assert read_dir(out) == read_dir(out2)


def test_ladder_mc_total_mode_and_json_format(tmp_path, transient_params):
    out = tmp_path / "mc"
    code = cli.main(
        [
            "ladder-mc",
            "--params",
            transient_params,
            "--reps",
            "50",
            "--mode",
            "total",
            "--format",
            "json",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    payload = json.loads((out / "samples.json").read_text())
    assert len(payload["counts"]) == 50
    assert len(payload["masses"]) == 50
    summary = json.loads((out / "summary.json").read_text())
    assert summary["plan"]["count_mode"] == "total"


def test_limit_mc_outputs(tmp_path, finite_params):
    out = tmp_path / "limit"
    code = cli.main(
        ["limit-mc", "--params", finite_params, "--reps", "300", "--out", str(out)]
    )
    assert code == 0
    rows = (out / "samples.csv").read_text().strip().splitlines()
    assert rows[0] == "rep,n0,n_above,total,band0_mass"
    assert len(rows) == 301
    summary = json.loads((out / "summary.json").read_text())
    assert summary["summary"]["sentinel_count"] == 0


def test_limit_mc_divergent_regime_reports_sentinels(tmp_path, transient_params):
    out = tmp_path / "limit"
    code = cli.main(
        ["limit-mc", "--params", transient_params, "--reps", "5", "--out", str(out)]
    )
    assert code == 0
    with open(out / "samples.csv", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert all(r["total"] == "inf" for r in rows)
    assert all(r["n0"] == "" for r in rows)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["summary"]["sentinel_fraction"] == 1.0


def test_validate_subset(tmp_path, capsys):
    out = tmp_path / "val"
    code = cli.main(
        [
            "validate",
            "--only",
            "quadrature,phase-map",
            "--reps",
            "1000",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    printed = capsys.readouterr().out
    assert "PASS quadrature" in printed
    assert "PASS phase-map" in printed
    payload = json.loads((out / "validation.json").read_text())
    assert [c["name"] for c in payload["checks"]] == ["quadrature", "phase-map"]
    assert all(c["passed"] for c in payload["checks"])


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate", "--params", "missing.json", "--horizon", "5"],
        ["classify"],
        ["classify", "--grid", "alpha_fitness=1"],
        ["validate", "--reps", "500"],
        ["ladder-mc", "--params", "PARAMS", "--reps", "0"],
    ],
)
def test_errors_leave_no_output_behind(tmp_path, argv, transient_params, capsys):
    argv = [a if a != "PARAMS" else transient_params for a in argv]
    out = tmp_path / "never"
    code = cli.main(argv + ["--out", str(out)])
    assert code == 2
    assert not out.exists()
    assert "error:" in capsys.readouterr().err


def test_classify_rejects_both_sources(tmp_path, transient_params, capsys):
    out = tmp_path / "never"
    code = cli.main(
        [
            "classify",
            "--params",
            transient_params,
            "--grid",
            "alpha_fitness=1;alpha_threshold=1",
            "--out",
            str(out),
        ]
    )
    assert code == 2
    assert not out.exists()


def test_malformed_params_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    out = tmp_path / "never"
    code = cli.main(
        ["simulate", "--params", str(bad), "--horizon", "5", "--out", str(out)]
    )
    assert code == 2
    assert not out.exists()


def test_missing_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit):
        cli.main([])
