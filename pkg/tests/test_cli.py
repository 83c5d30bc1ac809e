import json

from msignn.cli import EXIT_DATA, EXIT_IO, EXIT_OK, EXIT_USAGE, OUT_DIR_ENV, main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_gen_chains_writes_dataset(tmp_path, capsys):
    out = tmp_path / "chains"
    code, stdout, _ = run(capsys, "gen-chains", "--length", "10", "--out", str(out))
    assert code == EXIT_OK
    assert "400 nodes" in stdout
    for name in ("edges.tsv", "features.csv", "labels.csv", "masks.json", "config.json"):
        assert (out / name).exists()
    assert len((out / "edges.tsv").read_text().strip().split("\n")) == 360


def test_gen_rerun_is_byte_identical(tmp_path, capsys):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    run(capsys, "gen-chains", "--length", "7", "--seed", "3", "--out", str(out_a))
    run(capsys, "gen-chains", "--length", "7", "--seed", "3", "--out", str(out_b))
    for name in ("edges.tsv", "features.csv", "labels.csv", "masks.json"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_gen_colors(tmp_path, capsys):
    out = tmp_path / "colors"
    code, stdout, _ = run(capsys, "gen-colors", "--chains", "5", "--length", "8",
                          "--out", str(out))
    assert code == EXIT_OK
    assert "40 nodes" in stdout
    assert (out / "edges.tsv").exists()


def test_train_und_eval_round_trip(tmp_path, capsys):
    data_dir = tmp_path / "data"
    run(capsys, "gen-chains", "--length", "5", "--out", str(data_dir))
    out = tmp_path / "run"
    code, stdout, _ = run(capsys, "train", "--data", str(data_dir),
                          "--epochs", "5", "--hidden", "4", "--out", str(out))
    assert code == EXIT_OK
    for name in ("checkpoint.json", "history.csv", "metrics.json", "config.json"):
        assert (out / name).exists()
    train_metrics = json.loads((out / "metrics.json").read_text())

    code, stdout, _ = run(capsys, "eval", "--checkpoint", str(out / "checkpoint.json"),
                          "--data", str(data_dir))
    assert code == EXIT_OK
    eval_metrics = json.loads(stdout)
    for split in ("train", "val", "test"):
        assert eval_metrics[split] == train_metrics[split]

    # eval twice: identical output
    code2, stdout2, _ = run(capsys, "eval", "--checkpoint", str(out / "checkpoint.json"),
                            "--data", str(data_dir))
    assert stdout2 == stdout


def test_train_epochs_zero_untrained_checkpoint(tmp_path, capsys):
    out = tmp_path / "run"
    code, _, _ = run(capsys, "train", "--gen", "chains", "--length", "3",
                     "--epochs", "0", "--hidden", "4", "--out", str(out))
    assert code == EXIT_OK
    history = (out / "history.csv").read_text().strip().split("\n")
    assert len(history) == 1  # header only
    payload = json.loads((out / "checkpoint.json").read_text())
    assert payload["config"]["hidden_dim"] == 4


def test_train_rejects_duplicate_scales(tmp_path, capsys):
    code, _, err = run(capsys, "train", "--gen", "chains", "--length", "3",
                       "--scales", "1,1", "--epochs", "1",
                       "--out", str(tmp_path / "x"))
    assert code == EXIT_DATA
    assert "distinct" in err


def test_train_rerun_byte_identical(tmp_path, capsys):
    args = ["train", "--gen", "chains", "--length", "4", "--epochs", "3",
            "--hidden", "4", "--seed", "11"]
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    run(capsys, *args, "--out", str(out_a))
    run(capsys, *args, "--out", str(out_b))
    assert (out_a / "checkpoint.json").read_bytes() == (out_b / "checkpoint.json").read_bytes()
    assert (out_a / "metrics.json").read_bytes() == (out_b / "metrics.json").read_bytes()

    def strip_seconds(path):
        rows = path.read_text().strip().split("\n")
        return ["," .join(r.split(",")[:-1]) for r in rows]

    # wall-time column is measured, everything else must match exactly
    assert strip_seconds(out_a / "history.csv") == strip_seconds(out_b / "history.csv")


def test_probe_range_outputs_and_determinism(tmp_path, capsys):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    args = ["probe-range", "--gammas", "0.3,0.5", "--scales", "1", "--length", "20",
            "--theta", "1e-6", "--seed", "2"]
    code, stdout, _ = run(capsys, *args, "--out", str(out_a))
    assert code == EXIT_OK
    assert (out_a / "curve_g0.3_m1.csv").exists()
    assert (out_a / "curve_g0.5_m1.csv").exists()
    summary = (out_a / "summary.csv").read_text().strip().split("\n")
    assert summary[0] == "gamma,m,theta,empirical_range,range_bound,file"
    assert len(summary) == 3

    run(capsys, *args, "--out", str(out_b))
    for name in ("curve_g0.3_m1.csv", "curve_g0.5_m1.csv", "summary.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_probe_theta_changes_only_summary(tmp_path, capsys):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    base = ["probe-range", "--gammas", "0.5", "--scales", "1", "--length", "15"]
    run(capsys, *base, "--theta", "1e-4", "--out", str(out_a))
    run(capsys, *base, "--theta", "1e-9", "--out", str(out_b))
    assert (out_a / "curve_g0.5_m1.csv").read_bytes() == \
        (out_b / "curve_g0.5_m1.csv").read_bytes()
    assert (out_a / "summary.csv").read_bytes() != (out_b / "summary.csv").read_bytes()


def test_bound_prints_reference_values(capsys):
    code, stdout, _ = run(capsys, "bound", "--gamma", "0.5", "--theta", "1e-6")
    assert code == EXIT_OK and stdout.strip() == "20"
    code, stdout, _ = run(capsys, "bound", "--gamma", "0.5", "--theta", "1e-6",
                          "--m", "4")
    assert stdout.strip() == "83"
    code, stdout, _ = run(capsys, "bound", "--gamma", "0.9", "--theta", "1e-6")
    assert stdout.strip() == "152"


def test_bound_domain_error_exit_code(capsys):
    code, _, err = run(capsys, "bound", "--gamma", "1.5", "--theta", "1e-6")
    assert code == EXIT_DATA


def test_usage_error_exit_code(capsys):
    assert main(["no-such-command"]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE


def test_missing_out_dir_is_data_error(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv(OUT_DIR_ENV, raising=False)
    code, _, err = run(capsys, "gen-chains", "--length", "3")
    assert code == EXIT_DATA
    assert OUT_DIR_ENV in err


def test_env_var_supplies_out_dir(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(OUT_DIR_ENV, str(tmp_path / "envout"))
    code, _, _ = run(capsys, "gen-chains", "--length", "3")
    assert code == EXIT_OK
    assert (tmp_path / "envout" / "edges.tsv").exists()


def test_io_error_exit_code(tmp_path, capsys):
    target = tmp_path / "blocked"
    target.write_text("a file, not a directory")
    code, _, err = run(capsys, "gen-chains", "--length", "3", "--out",
                       str(target / "sub"))
    assert code == EXIT_IO


def test_config_file_with_flag_override(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"length": 6, "seed": 9}))
    out = tmp_path / "out"
    code, _, _ = run(capsys, "gen-chains", "--config", str(cfg_path),
                     "--length", "4", "--out", str(out))
    assert code == EXIT_OK
    echoed = json.loads((out / "config.json").read_text())
    assert echoed["length"] == 4   # flag overrides file
    assert echoed["seed"] == 9     # file overrides default


def test_config_file_unknown_key_rejected(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"lenght": 6}))
    code, _, err = run(capsys, "gen-chains", "--config", str(cfg_path),
                       "--out", str(tmp_path / "o"))
    assert code == EXIT_DATA
    assert "unknown config keys" in err


def test_eval_on_mismatched_features_is_data_error(tmp_path, capsys):
    chains = tmp_path / "chains"
    colors = tmp_path / "colors"
    run(capsys, "gen-chains", "--length", "4", "--out", str(chains))
    run(capsys, "gen-colors", "--chains", "4", "--length", "4", "--out", str(colors))
    out = tmp_path / "run"
    run(capsys, "train", "--data", str(chains), "--epochs", "1", "--hidden", "4",
        "--out", str(out))
    code, _, err = run(capsys, "eval", "--checkpoint", str(out / "checkpoint.json"),
                       "--data", str(colors))
    assert code == EXIT_DATA
