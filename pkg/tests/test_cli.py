import numpy as np
import pytest

from hho_control.cli import (CSV_HEADER, ConfigError, ExperimentConfig, main,
                             run_experiment, validate_config)


def make_config(**overrides):
    base = dict(scheme="uc1", degree=0, mesh_family="cartesian",
                levels=[2, 4], preset="uc1-default")
    base.update(overrides)
    return ExperimentConfig(**base)


def test_minimal_config_defaults_filled():
    cfg = validate_config("scheme = uc1\ndegree = 1\npreset = uc1-default\n")
    assert cfg.levels == [4, 8, 16, 32]
    assert cfg.rng_seed == 42
    assert cfg.pgd.tol == 1e-10
    assert cfg.pgd.theta == 0.5


def test_config_comments_and_lists():
    text = ("# study\nscheme = wc1\ndegree = 0\nlevels = 4, 8\n"
            "preset = wc-default\nbounds = -250, -10\n")
    cfg = validate_config(text)
    assert cfg.levels == [4, 8]
    assert cfg.bounds == (-250.0, -10.0)


def test_uc31_degree_rule_named():
    with pytest.raises(ConfigError, match="uc31.*k in \\{0, 1\\}"):
        validate_config("scheme = uc31\ndegree = 2\npreset = uc31-default\n")


def test_wc1_requires_bounds():
    with pytest.raises(ConfigError, match="bounds required"):
        validate_config("scheme = wc1\ndegree = 0\npreset = uc1-default\n")


def test_unknown_field_rejected():
    with pytest.raises(ConfigError, match="unknown config field"):
        validate_config("scheme = uc1\ndegree = 0\ncolour = red\n")


def test_unknown_scheme_rejected():
    with pytest.raises(ConfigError, match="unknown scheme"):
        validate_config("scheme = uc9\ndegree = 0\n")


def test_bounds_on_unconstrained_rejected():
    with pytest.raises(ConfigError, match="not admissible"):
        validate_config("scheme = uc1\ndegree = 0\npreset = uc1-default\n"
                        "bounds = -1, 1\n")


def test_run_experiment_structure(tmp_path):
    cfg = make_config(levels=[4, 8, 16], output_dir=str(tmp_path))
    report = run_experiment(cfg)
    csv = (tmp_path / "report.csv").read_text().splitlines()
    assert csv[0] == CSV_HEADER
    assert len(csv) == 1 + 3  # header + one row per level
    first = csv[1].split(",")
    assert first[0] == "4"
    assert first[4] == ""  # no rate on the first level
    assert (tmp_path / "report.md").exists()
    assert (tmp_path / "plotdata.tsv").exists()
    assert (tmp_path / "plotdata_err_u_l2.tsv").exists()
    assert len(report.rates["err_u_l2"]) == 2


def test_reports_are_byte_deterministic(tmp_path):
    cfg1 = make_config(output_dir=str(tmp_path / "a"), mesh_family="voronoi",
                       levels=[16, 64])
    cfg2 = make_config(output_dir=str(tmp_path / "b"), mesh_family="voronoi",
                       levels=[16, 64])
    run_experiment(cfg1)
    run_experiment(cfg2)
    assert (tmp_path / "a" / "report.csv").read_bytes() \
        == (tmp_path / "b" / "report.csv").read_bytes()
    assert (tmp_path / "a" / "plotdata.tsv").read_bytes() \
        == (tmp_path / "b" / "plotdata.tsv").read_bytes()


def test_incomplete_run_preserves_partial_csv(tmp_path):
    out = tmp_path / "out"
    cfg = make_config(scheme="wc1", degree=0, preset="wc-default",
                      levels=[4, 8], output_dir=str(out))
    cfg.pgd.max_iters = 2  # forces an iteration failure on the first level
    with pytest.raises(Exception):
        run_experiment(cfg)
    lines = (out / "report.csv").read_text().splitlines()
    assert lines[0] == CSV_HEADER
    assert lines[-1] == "# INCOMPLETE"


def test_cli_main_run_and_exit_codes(tmp_path, capsys):
    out = tmp_path / "run"
    rc = main(["run", "--scheme", "uc1", "--degree", "0", "--mesh",
               "cartesian", "--levels", "4,8", "--preset", "uc1-default",
               "--out", str(out)])
    assert rc == 0
    assert (out / "report.csv").exists()

    rc = main(["run", "--scheme", "uc31", "--degree", "3", "--preset",
               "uc31-default", "--out", str(out)])
    captured = capsys.readouterr()
    assert rc == 1
    assert "error:" in captured.err


def test_cli_presets_lists_ids(capsys):
    assert main(["presets"]) == 0
    out = capsys.readouterr().out
    assert "uc1-default" in out and "wc-default" in out


def test_cli_mesh_subcommand(tmp_path):
    from hho_control import read_mesh

    path = tmp_path / "mesh.txt"
    rc = main(["mesh", "--family", "voronoi", "--cells", "16", "--seed", "42",
               "--out", str(path)])
    assert rc == 0
    mesh = read_mesh(path.read_text())
    assert mesh.n_cells == 16


def test_cli_config_file_run(tmp_path):
    out = tmp_path / "cfgout"
    config = tmp_path / "study.cfg"
    config.write_text("scheme = uc1\ndegree = 0\nlevels = 4,8\n"
                      f"preset = uc1-default\noutput_dir = {out}\n")
    rc = main(["run", "--config", str(config)])
    assert rc == 0
    assert (out / "report.csv").exists()


def test_inline_exact_functions(tmp_path):
    cfg = validate_config(
        "scheme = uc1\ndegree = 0\nlevels = 2,4\n"
        "exact_y = sin(2*pi*x1)*sin(2*pi*x2)\n"
        "exact_phi = exp(x1+x2)*sin(pi*x1)*sin(pi*x2)\n"
        "lambda = 0.1\n")
    cfg.output_dir = str(tmp_path)
    report = run_experiment(cfg)
    assert len(report.records) == 2


def test_csv_real_formatting(tmp_path):
    cfg = make_config(levels=[2], output_dir=str(tmp_path))
    run_experiment(cfg)
    row = (tmp_path / "report.csv").read_text().splitlines()[1].split(",")
    h = row[1]
    assert h == format(np.sqrt(2.0) / 2.0, ".16g")
    assert "," not in h and "e" not in h.replace("e-", "").replace("e+", "")
