"""Command line interface: parsing, outputs, manifests, determinism."""

import json

import pytest

from toricloss.cli import (
    CsvWriter,
    FIT_COLUMNS,
    ORACLE_COLUMNS,
    PERC_COLUMNS,
    PFAIL_COLUMNS,
    _fmt,
    build_parser,
    main,
)

MANIFEST_KEYS = {
    "command",
    "config",
    "results",
    "seed_scheme",
    "status",
    "versions",
    "wall_time_s",
    "workers",
}


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]


def read_manifest(outdir):
    return json.loads((outdir / "manifest.json").read_text())


def test_formatting_helpers(tmp_path):
    assert _fmt(True) == "1" and _fmt(False) == "0"
    assert _fmt(42) == "42"
    assert _fmt(0.1) == "0.1"
    assert float(_fmt(1 / 3)) == 1 / 3  # repr round-trips exactly
    w = CsvWriter(tmp_path / "t.csv", ("a", "b"))
    w.row((1, 2.5))
    with pytest.raises(ValueError):
        w.row((1,))
    w.close()
    assert (tmp_path / "t.csv").read_text() == "a,b\n1,2.5\n"


def test_parser_defaults():
    args = build_parser().parse_args(["threshold"])
    assert args.L == [8, 12, 16]
    assert args.p_loss == [0.0]
    assert args.trials == 10000
    assert args.seed == 0
    assert args.y_window == 0.15
    args = build_parser().parse_args(["percolation"])
    assert args.L == [8, 16, 32]
    assert args.trials == 200
    assert len(args.p_loss) == 10


def test_usage_errors_exit_2():
    bad = [
        [],
        ["simulate", "-L", "4"],  # p_comp required
        ["simulate", "-L", "1", "--p-comp", "0.1"],
        ["simulate", "-L", "4", "--p-comp", "0.6"],
        ["simulate", "-L", "4", "--p-comp", "0.1", "--p-loss", "1.0"],
        ["simulate", "-L", "4", "--p-comp", "0.1", "--tau", "-2"],
        ["simulate", "-L", "4", "--p-comp", "0.1", "--trials", "0"],
    ]
    for argv in bad:
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "toricloss" in capsys.readouterr().out


def test_simulate_outputs(tmp_path):
    rc = main(
        [
            "simulate", "-L", "4", "--p-comp", "0.05", "0.1",
            "--trials", "20", "--seed", "3", "--out", str(tmp_path),
        ]
    )
    assert rc == 0
    header, rows = read_csv(tmp_path / "pfail.csv")
    assert tuple(header) == PFAIL_COLUMNS
    assert len(rows) == 2
    for row in rows:
        rec = dict(zip(header, row))
        assert rec["L"] == "4"
        assert rec["n_trials"] == "20"
        assert float(rec["p_fail"]) == int(rec["n_fail"]) / 20
    man = read_manifest(tmp_path)
    assert set(man) == MANIFEST_KEYS
    assert man["status"] == "ok"
    assert man["command"] == "simulate"
    assert man["config"]["trials"] == 20
    assert man["results"]["cells"] == 2
    assert "toricloss" in man["versions"]


def test_simulate_worker_independent_bytes(tmp_path):
    base = ["simulate", "-L", "5", "--p-loss", "0.15", "--p-comp", "0.08",
            "--trials", "40", "--seed", "9"]
    main(base + ["--out", str(tmp_path / "a"), "--workers", "1"])
    main(base + ["--out", str(tmp_path / "b"), "--workers", "2"])
    assert (tmp_path / "a/pfail.csv").read_bytes() == (tmp_path / "b/pfail.csv").read_bytes()


def test_threshold_outputs(tmp_path):
    rc = main(
        [
            "threshold", "-L", "4", "6",
            "--p-comp", "0.08", "0.09", "0.1", "0.11", "0.12",
            "--trials", "60", "--seed", "2", "--out", str(tmp_path),
        ]
    )
    assert rc == 0
    header, rows = read_csv(tmp_path / "fit.csv")
    assert tuple(header) == FIT_COLUMNS
    assert len(rows) == 1 and rows[0][0] == "0.0"
    header, rows = read_csv(tmp_path / "pfail.csv")
    assert len(rows) == 10  # 2 sizes x 5 grid points
    man = read_manifest(tmp_path)
    (fit,) = man["results"]["fits"]
    assert {"p_loss", "p_thr", "p_thr_err", "nu0", "n_kept", "crossings"} <= set(fit)
    (cross,) = fit["crossings"]
    assert cross["L1"] == 4 and cross["L2"] == 6
    assert "p_cross" in cross or "error" in cross


def test_percolation_outputs(tmp_path):
    rc = main(
        [
            "percolation", "-L", "4", "6", "--p-loss", "0.3", "0.36", "0.42", "0.48",
            "--trials", "15", "--seed", "1", "--out", str(tmp_path),
        ]
    )
    assert rc == 0
    header, rows = read_csv(tmp_path / "percolation.csv")
    assert tuple(header) == PERC_COLUMNS
    assert len(rows) == 8
    man = read_manifest(tmp_path)
    assert len(man["results"]["p_scale"]) == 2
    assert "chi" in man["results"]["fit"] or "error" in man["results"]["fit"]


def test_tau_sweep_outputs(tmp_path):
    rc = main(
        [
            "tau-sweep", "-L", "4", "6", "--tau", "0.0", "1.0",
            "--p-comp", "0.08", "0.09", "0.1", "0.11", "0.12",
            "--trials", "50", "--paired-trials", "40",
            "--seed", "4", "--out", str(tmp_path),
        ]
    )
    assert rc == 0
    header, rows = read_csv(tmp_path / "taufit.csv")
    assert header[0] == "tau"
    assert [r[0] for r in rows] == ["0.0", "1.0"]
    paired = read_manifest(tmp_path)["results"]["paired"]
    assert paired["n_trials"] == 40
    assert paired["tau_a"] == 0.0 and paired["tau_b"] == 1.0
    assert 0.0 <= paired["sign_test_pvalue"] <= 1.0


def test_oracle_check_outputs(tmp_path):
    rc = main(
        [
            "oracle-check", "-L", "4", "--p-loss", "0.0", "0.2",
            "--instances", "10", "--bias-instances", "2",
            "--seed", "7", "--out", str(tmp_path),
        ]
    )
    assert rc == 0
    header, rows = read_csv(tmp_path / "oracle.csv")
    assert tuple(header) == ORACLE_COLUMNS
    assert len(rows) == 10
    assert all(r[-1] == "1" for r in rows)
    res = read_manifest(tmp_path)["results"]
    assert res["mismatches"] == 0
    assert res["bias_clean"] is True
