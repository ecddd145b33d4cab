"""End-to-end command line checks: the gen-data, train, eval, sample, and
embed subcommands run in-process against tiny models, and failure paths map to
the documented exit codes (2 for configuration problems, 3 for numeric aborts).
"""

import json

import numpy as np
import pytest

from maskcond.checkpoint import load_checkpoint, read_dataset, write_dataset
from maskcond.cli import main
from maskcond.evaluation import CSV_HEADER, EvalReport
from maskcond.gaussian import reference_gaussian, sample_conditional
from maskcond.masks import pair_from_bits


@pytest.fixture()
def workdir(tmp_path):
    cfg = {
        "train": {"steps": 2, "batch": 8, "hidden": [6, 6], "log_every": 1},
    }
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(cfg))
    data_path = tmp_path / "data.json"
    assert main(["gen-data", "--out", str(data_path), "--n", "64", "--seed", "0"]) == 0
    return tmp_path, str(cfg_path), str(data_path)


def train_ckpt(workdir, name="ckpt.json", extra=()):
    tmp_path, cfg_path, data_path = workdir
    ckpt_path = tmp_path / name
    code = main(["train", "--config", cfg_path, "--data", data_path,
                 "--out", str(ckpt_path), *extra])
    assert code == 0
    return str(ckpt_path)


def test_gen_data_writes_dataset(tmp_path, capsys):
    out = tmp_path / "data.json"
    assert main(["gen-data", "--out", str(out), "--n", "32", "--seed", "7"]) == 0
    rows, meta = read_dataset(str(out))
    assert rows.shape == (32, 3)
    assert meta["seed"] == 7
    assert "wrote 32 rows" in capsys.readouterr().out
    # Same seed, same file content.
    out2 = tmp_path / "data2.json"
    assert main(["gen-data", "--out", str(out2), "--n", "32", "--seed", "7"]) == 0
    assert out.read_bytes() == out2.read_bytes()


def test_gen_data_rho_flag(tmp_path):
    out = tmp_path / "data.json"
    assert main(["gen-data", "--out", str(out), "--n", "8", "--rho", "0.5"]) == 0
    rows, _ = read_dataset(str(out))
    assert rows.shape == (8, 3)


def test_train_writes_checkpoint_and_trace(workdir):
    tmp_path, cfg_path, data_path = workdir
    trace_path = tmp_path / "trace.jsonl"
    ckpt_path = train_ckpt(workdir, extra=["--trace", str(trace_path)])
    ckpt = load_checkpoint(ckpt_path)
    assert ckpt.steps_completed == 2
    assert ckpt.discriminator is not None
    assert len(trace_path.read_text().strip().splitlines()) == 2


def test_train_flag_overrides(workdir):
    tmp_path, cfg_path, data_path = workdir
    ckpt_path = train_ckpt(workdir, name="mm.json",
                           extra=["--mode", "moment-matching", "--steps", "1",
                                  "--seed", "3", "--no-sn"])
    ckpt = load_checkpoint(ckpt_path)
    assert ckpt.discriminator is None
    assert ckpt.steps_completed == 1
    assert ckpt.train_config.mode == "moment-matching"
    assert ckpt.train_config.seed == 3
    assert ckpt.train_config.sn_enabled is False


def test_train_requires_data_and_out(workdir, capsys):
    tmp_path, cfg_path, data_path = workdir
    assert main(["train", "--config", cfg_path, "--out", str(tmp_path / "x.json")]) == 2
    assert "missing --data" in capsys.readouterr().err
    assert main(["train", "--config", cfg_path, "--data", data_path]) == 2
    assert "missing --ckpt" in capsys.readouterr().err


def test_train_numeric_abort_exit_code(workdir, capsys):
    tmp_path, cfg_path, data_path = workdir
    bad = tmp_path / "nan.json"
    write_dataset(str(bad), np.full((16, 3), np.nan), seed=0)
    code = main(["train", "--config", cfg_path, "--data", str(bad),
                 "--out", str(tmp_path / "x.json")])
    assert code == 3
    assert "numeric abort" in capsys.readouterr().err


def test_eval_table1(workdir):
    tmp_path, cfg_path, data_path = workdir
    ckpt_path = train_ckpt(workdir)
    out = tmp_path / "report.csv"
    code = main(["eval", "--ckpt", ckpt_path, "--protocol", "table1",
                 "--out", str(out), "--n", "100"])
    assert code == 0
    report = EvalReport.from_csv(str(out))
    assert len(report.values(protocol="table1")) == 12
    assert len(report.values(protocol="table1-mean")) == 12
    json_rows = json.loads((tmp_path / "report.json").read_text())
    assert len(json_rows) == 24
    assert set(json_rows[0]) == set(CSV_HEADER)


def test_eval_two_checkpoints_aggregate(workdir):
    tmp_path, cfg_path, data_path = workdir
    c1 = train_ckpt(workdir, name="c1.json", extra=["--seed", "0"])
    c2 = train_ckpt(workdir, name="c2.json", extra=["--seed", "1"])
    out = tmp_path / "pair.csv"
    code = main(["eval", "--ckpt", f"{c1},{c2}", "--protocol", "table1",
                 "--out", str(out), "--n", "100"])
    assert code == 0
    report = EvalReport.from_csv(str(out))
    assert len(report.values(protocol="table1")) == 24
    means = report.values(protocol="table1-mean")
    assert len(means) == 12
    for a_bits, r_bits in (("100", "011"), ("010", "101")):
        pair_vals = report.values(protocol="table1", a=a_bits, r=r_bits)
        mean_val = report.values(protocol="table1-mean", a=a_bits, r=r_bits)[0]
        assert abs(np.mean(pair_vals) - mean_val) < 1e-15


def test_eval_joint_and_bound(workdir):
    tmp_path, cfg_path, data_path = workdir
    ckpt_path = train_ckpt(workdir)
    out = tmp_path / "joint.csv"
    assert main(["eval", "--ckpt", ckpt_path, "--protocol", "joint",
                 "--out", str(out), "--n", "500"]) == 0
    report = EvalReport.from_csv(str(out))
    assert {row.metric for row in report.rows} == {"joint_mean_err", "joint_cov_err"}

    out2 = tmp_path / "bound.csv"
    assert main(["eval", "--ckpt", ckpt_path, "--protocol", "bound",
                 "--out", str(out2), "--data", data_path]) == 0
    report2 = EvalReport.from_csv(str(out2))
    assert len(report2.values(protocol="bound")) == 7
    assert len(report2.values(protocol="bound-floor")) == 7


def test_eval_usage_errors(workdir, capsys):
    tmp_path, cfg_path, data_path = workdir
    ckpt_path = train_ckpt(workdir)
    assert main(["eval", "--protocol", "table1",
                 "--out", str(tmp_path / "r.csv")]) == 2
    assert main(["eval", "--ckpt", ckpt_path, "--protocol", "bound",
                 "--out", str(tmp_path / "r.csv")]) == 2
    assert main(["eval", "--ckpt", ckpt_path, "--protocol", "table1",
                 "--out", str(tmp_path / "r.csv"), "--seeds", "zero"]) == 2
    assert main(["eval", "--ckpt", f"{ckpt_path},{ckpt_path}", "--protocol",
                 "table1", "--out", str(tmp_path / "r.csv"), "--n", "100",
                 "--seeds", "0,1,2"]) == 2
    capsys.readouterr()


def test_sample_oracle_matches_library_call(workdir, tmp_path):
    _, cfg_path, data_path = workdir
    ckpt_path = train_ckpt(workdir)
    out = tmp_path / "draws.csv"
    code = main(["sample", "--ckpt", ckpt_path, "--available", "1=2.0",
                 "--request", "2,3", "--n", "5", "--seed", "11",
                 "--oracle", "--out", str(out)])
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "x2,x3"
    got = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    ref = sample_conditional(reference_gaussian(), pair_from_bits("100", "011"),
                             [2.0], 5, 11)
    assert np.array_equal(got, ref)


def test_sample_generator_and_empty_draws(workdir, capsys):
    tmp_path, cfg_path, data_path = workdir
    ckpt_path = train_ckpt(workdir)
    capsys.readouterr()
    assert main(["sample", "--ckpt", ckpt_path, "--request", "1,2,3",
                 "--n", "4", "--seed", "0"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "x1,x2,x3"
    assert len(lines) == 5
    # Same command, same draws.
    assert main(["sample", "--ckpt", ckpt_path, "--request", "1,2,3",
                 "--n", "4", "--seed", "0"]) == 0
    assert capsys.readouterr().out.strip().splitlines() == lines

    assert main(["sample", "--ckpt", ckpt_path, "--request", "2", "--n", "0"]) == 0
    assert capsys.readouterr().out.strip().splitlines() == ["x2"]


def test_sample_usage_errors(workdir, capsys):
    tmp_path, cfg_path, data_path = workdir
    ckpt_path = train_ckpt(workdir)
    assert main(["sample", "--ckpt", ckpt_path, "--available", "2=1.0",
                 "--request", "2"]) == 2
    assert main(["sample", "--ckpt", ckpt_path, "--request", "4"]) == 2
    assert main(["sample", "--ckpt", ckpt_path, "--request", "2,2"]) == 2
    assert main(["sample", "--ckpt", ckpt_path, "--request", ""]) == 2
    assert main(["sample", "--ckpt", ckpt_path, "--available", "1:2.0",
                 "--request", "2"]) == 2
    capsys.readouterr()


def test_embed_single_mask_and_all_masks(workdir, capsys):
    tmp_path, cfg_path, data_path = workdir
    ckpt_path = train_ckpt(workdir)
    out = tmp_path / "emb.csv"
    code = main(["embed", "--ckpt", ckpt_path, "--data", data_path,
                 "--available", "1", "--request", "2", "--out", str(out)])
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "a,r," + ",".join(f"e{i}" for i in range(6))
    assert len(lines) == 1 + 64
    assert lines[1].startswith("100,010,")

    out2 = tmp_path / "emb_all.csv"
    assert main(["embed", "--ckpt", ckpt_path, "--data", data_path,
                 "--all-masks", "--out", str(out2)]) == 0
    lines2 = out2.read_text().strip().splitlines()
    assert len(lines2) == 1 + 19 * 64
    capsys.readouterr()


def test_embed_usage_errors(workdir, capsys):
    tmp_path, cfg_path, data_path = workdir
    ckpt_path = train_ckpt(workdir)
    assert main(["embed", "--ckpt", ckpt_path, "--data", data_path]) == 2
    assert main(["embed", "--ckpt", ckpt_path, "--data", data_path,
                 "--available", "1", "--request", "1"]) == 2
    wrong = tmp_path / "wrong.json"
    write_dataset(str(wrong), np.zeros((4, 2)), seed=0)
    assert main(["embed", "--ckpt", ckpt_path, "--data", str(wrong),
                 "--all-masks"]) == 2
    capsys.readouterr()


def test_missing_files_exit_2(workdir, capsys):
    tmp_path, cfg_path, data_path = workdir
    assert main(["train", "--config", cfg_path, "--data",
                 str(tmp_path / "nope.json"), "--out", str(tmp_path / "x.json")]) == 2
    assert main(["sample", "--ckpt", str(tmp_path / "nope.json"),
                 "--request", "1"]) == 2
    capsys.readouterr()
