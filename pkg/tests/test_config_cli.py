"""Configuration parsing and the command line driver.

Training runs here use miniature budgets: a few dozen optimizer steps on a
few hundred samples keep every CLI path under a few seconds while still
producing complete artifact directories.
"""
import dataclasses
import json
from pathlib import Path

import pytest

from sepinn import config as cf
from sepinn.cli import main

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"
SHIPPED = sorted(p.name for p in CONFIG_DIR.glob("*.cfg"))


# -- configuration files -------------------------------------------------------


def test_all_shipped_configs_present():
    assert SHIPPED == ["cube-four-edges-c.cfg", "cube-four-edges-n.cfg",
                       "eigen-lshape.cfg", "helmholtz2d.cfg", "helmholtz3d.cfg",
                       "lshape-prism-c.cfg", "lshape-prism-n.cfg",
                       "lshape2d.cfg", "square-mixed.cfg"]


@pytest.mark.parametrize("name", SHIPPED)
def test_roundtrip_shipped_configs(name):
    cfg = cf.load_config(CONFIG_DIR / name)
    again = cf.parse_config(cf.serialize_config(cfg))
    assert again == cfg


def test_roundtrip_preserves_exact_values():
    cfg = cf.RunConfig(problem="lshape2d", method="sepinn",
                       widths=[2, 7, 7, 1], sigma_d=123.456789012345,
                       growth=1.0000001, sigma_cap=9.9e12, threshold=3e-7,
                       coeff_lr=[0.008], nu=[0.02, 0.01], error_n=2000)
    again = cf.parse_config(cf.serialize_config(cfg))
    assert again == cfg


def bad_fields(cfg):
    return "\n".join(cf.validate_config(cfg))


def valid_base(**over):
    return dataclasses.replace(
        cf.RunConfig(problem="lshape2d", widths=[2, 8, 8, 1],
                     sigma_cap=150.0, error_n=2000), **over)


def test_validate_accepts_base():
    assert cf.validate_config(valid_base()) == []


def test_diagnostics_name_offending_fields():
    assert "penalty.growth" in bad_fields(valid_base(growth=1.0))
    assert "penalty.sigma_cap" in bad_fields(valid_base(sigma_cap=50.0))
    assert "run.method" in bad_fields(valid_base(method="magic"))
    assert "network.widths" in bad_fields(valid_base(widths=[2, 8, 8, 2]))
    assert "network.widths" in bad_fields(valid_base(widths=[3, 8, 1]))
    assert "adam.coeff_lr" in bad_fields(valid_base(coeff_lr=[-1.0]))
    assert "eigen.nu" in bad_fields(valid_base(nu=[0.02]))
    assert "evaluate.n_samples" in bad_fields(valid_base(error_n=10))


def test_method_problem_pairing_checks():
    assert "series.truncation" in bad_fields(
        valid_base(problem="lshape-prism", widths=[3, 8, 8, 1], method="sepinn-c"))
    assert "network.aux_widths" in bad_fields(
        valid_base(problem="lshape-prism", widths=[3, 8, 8, 1], method="sepinn-n"))
    assert "series.truncation" in bad_fields(valid_base(truncation=5))
    assert "run.method" in bad_fields(
        valid_base(method="sepinn-n", aux_widths=[2, 8, 1]))
    assert "network.aux_widths" in bad_fields(
        valid_base(method="sepinn-n", aux_widths=[4, 8, 1]))
    assert "run.method" in bad_fields(valid_base(method="eigen"))
    assert "run.method" in bad_fields(valid_base(problem="eigen-lshape"))
    assert "samples.n_neumann" in bad_fields(valid_base(n_neumann=50))
    assert "samples.n_neumann" in bad_fields(
        valid_base(problem="square-mixed", sigma_n=100.0))


def test_parse_reports_every_problem_at_once():
    text = "[magic]\nx = 1\n\n[penalty]\nsigma = 3\n\n[samples]\nn_interior = soup\n"
    with pytest.raises(cf.ConfigError) as err:
        cf.parse_config(text)
    joined = "\n".join(err.value.diagnostics)
    assert "magic: unknown section" in joined
    assert "penalty.sigma: unknown key" in joined
    assert "samples.n_interior: cannot parse" in joined


# -- command line driver -------------------------------------------------------


def tiny_cfg(**over):
    return dataclasses.replace(
        cf.RunConfig(problem="lshape2d", method="sepinn", seed=0,
                     widths=[2, 8, 8, 1], n_interior=400, n_dirichlet=120,
                     sigma_d=100.0, sigma_cap=150.0, threshold=1e-9,
                     adam_lr=2e-3, adam_iters=40, lbfgs_iters=30,
                     validation_n=500, error_n=2000), **over)


def write_cfg(path, cfg):
    cf.save_config(cfg, path)
    return str(path)


@pytest.fixture(scope="module")
def trained_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli-runs")
    cfg_path = write_cfg(root / "tiny.cfg", tiny_cfg())
    rc = main(["--output-root", str(root), "train", cfg_path,
               "--run-name", "base"])
    assert rc == 0
    run_dir = root / "base"
    with open(run_dir / "manifest.json") as fh:
        manifest = json.load(fh)
    return root, cfg_path, run_dir, manifest


def test_train_writes_complete_run_directory(trained_run):
    _, _, run_dir, manifest = trained_run
    for name in ("config.cfg", "report.csv", "manifest.json", "training.png",
                 "gamma.png", "checkpoint_final.bin"):
        assert (run_dir / name).exists(), name
    assert manifest["tool"] == "sepinn"
    assert manifest["command"] == "train"
    assert manifest["status"] == "ok"
    assert manifest["wall_seconds"] > 0.0
    assert manifest["config"]["problem"] == "lshape2d"
    for key in ("e", "e_u", "e_S", "gamma_hat", "validation_error"):
        assert key in manifest["metrics"], key
    # the config snapshot reproduces the parsed configuration exactly
    snap = cf.load_config(run_dir / "config.cfg")
    assert snap == cf.load_config(run_dir.parent / "tiny.cfg")


def test_same_config_and_seed_reproduces_metrics(trained_run):
    root, cfg_path, _, manifest = trained_run
    rc = main(["--output-root", str(root), "train", cfg_path,
               "--run-name", "duplicate"])
    assert rc == 0
    with open(root / "duplicate" / "manifest.json") as fh:
        dup = json.load(fh)
    assert dup["metrics"] == manifest["metrics"]


def test_seed_override_lands_in_manifest(tmp_path):
    cfg_path = write_cfg(tmp_path / "t.cfg",
                         tiny_cfg(adam_iters=5, lbfgs_iters=5, sigma_cap=100.0))
    rc = main(["--output-root", str(tmp_path), "train", cfg_path, "--seed", "5",
               "--run-name", "seeded"])
    assert rc == 0
    with open(tmp_path / "seeded" / "manifest.json") as fh:
        manifest = json.load(fh)
    assert manifest["seed"] == 5
    assert manifest["config"]["seed"] == 5


def test_replay_reproduces_summary(trained_run, capsys):
    root, _, run_dir, _ = trained_run
    rc = main(["--output-root", str(root), "train", "--replay", str(run_dir)])
    assert rc == 0
    assert "replay: summary reproduced" in capsys.readouterr().out
    assert (root / "base-replay" / "manifest.json").exists()


def test_replay_flags_drifted_metrics(trained_run, tmp_path, capsys):
    root, _, run_dir, manifest = trained_run
    drifted = json.loads(json.dumps(manifest))
    drifted["metrics"]["e"] *= 1.5
    target = tmp_path / "drifted"
    target.mkdir()
    with open(target / "manifest.json", "w") as fh:
        json.dump(drifted, fh)
    rc = main(["--output-root", str(root), "train",
               "--replay", str(target / "manifest.json")])
    assert rc == 3
    assert "replay mismatch" in capsys.readouterr().err


def test_evaluate_run_directory(trained_run, capsys):
    root, _, run_dir, manifest = trained_run
    rc = main(["evaluate", str(run_dir), "--n-samples", "2000", "--res", "5"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "e =" in out and "gamma_0 =" in out
    assert (run_dir / "evaluate.csv").exists()
    assert (run_dir / "field.csv").exists()
    assert (run_dir / "field.png").exists()
    # fresh samples at the manifest seed agree with the stored headline error
    line = next(l for l in (run_dir / "evaluate.csv").read_text().splitlines()
                if l.startswith("e,"))
    assert float(line.split(",")[1]) == pytest.approx(manifest["metrics"]["e"],
                                                      rel=1e-12)


def test_evaluate_bare_checkpoint(trained_run, capsys):
    _, _, run_dir, _ = trained_run
    ck = str(run_dir / "checkpoint_final.bin")
    assert main(["evaluate", ck, "--problem", "lshape2d",
                 "--n-samples", "2000"]) == 0
    capsys.readouterr()
    assert main(["evaluate", ck, "--n-samples", "2000"]) == 2
    assert "--problem" in capsys.readouterr().err
    assert main(["evaluate", ck, "--problem", "lshape-prism",
                 "--n-samples", "2000"]) == 2
    assert "dimension" in capsys.readouterr().err


def test_config_errors_exit_with_diagnostics(tmp_path, capsys):
    cfg_path = write_cfg(tmp_path / "bad.cfg", tiny_cfg())
    text = Path(cfg_path).read_text().replace("growth = 1.5", "growth = 1.0")
    Path(cfg_path).write_text(text)
    rc = main(["--output-root", str(tmp_path), "train", cfg_path])
    assert rc == 2
    assert "config error: penalty.growth" in capsys.readouterr().err


def test_missing_inputs_are_config_errors(tmp_path, capsys):
    assert main(["--output-root", str(tmp_path), "train",
                 str(tmp_path / "nope.cfg")]) == 2
    assert main(["--output-root", str(tmp_path), "train"]) == 2
    assert main(["--threads", "0", "train", "x.cfg"]) == 2
    capsys.readouterr()


def test_sweep_truncation_analytic(tmp_path, monkeypatch):
    cfg_path = write_cfg(tmp_path / "prism.cfg",
                         tiny_cfg(problem="lshape-prism", method="sepinn-c",
                                  widths=[3, 8, 8, 1], truncation=5))
    monkeypatch.setenv("SEPINN_OUTPUT_ROOT", str(tmp_path / "env-root"))
    rc = main(["sweep-truncation", cfg_path, "--levels", "5,10", "--analytic",
               "--run-name", "sweep"])
    assert rc == 0
    run_dir = tmp_path / "env-root" / "sweep"
    assert (run_dir / "sweep.csv").exists()
    assert (run_dir / "sweep.png").exists()
    with open(run_dir / "manifest.json") as fh:
        metrics = json.load(fh)["metrics"]
    assert metrics["e_S_N5"] > metrics["e_S_N10"] > 0.0


def test_sweep_needs_series_method(tmp_path, capsys):
    cfg_path = write_cfg(tmp_path / "t.cfg", tiny_cfg())
    assert main(["--output-root", str(tmp_path), "sweep-truncation",
                 cfg_path, "--analytic"]) == 2
    assert "sepinn-c" in capsys.readouterr().err


def test_compare_baseline(tmp_path):
    cfg_path = write_cfg(tmp_path / "t.cfg", tiny_cfg())
    rc = main(["--output-root", str(tmp_path), "compare-baseline", cfg_path,
               "--run-name", "versus"])
    assert rc == 0
    run_dir = tmp_path / "versus"
    assert (run_dir / "comparison.csv").exists()
    assert (run_dir / "comparison.png").exists()
    with open(run_dir / "manifest.json") as fh:
        metrics = json.load(fh)["metrics"]
    assert metrics["sepinn_e_u"] > 0.0
    assert metrics["pinn_e_u"] > 0.0
    assert metrics["ratio"] == pytest.approx(
        metrics["sepinn_e_u"] / metrics["pinn_e_u"])
    for method in ("sepinn", "pinn"):
        assert (run_dir / method / "report.csv").exists()


def test_compare_baseline_needs_sepinn(tmp_path, capsys):
    cfg_path = write_cfg(tmp_path / "t.cfg", tiny_cfg(method="pinn"))
    assert main(["--output-root", str(tmp_path), "compare-baseline",
                 cfg_path]) == 2
    assert "sepinn" in capsys.readouterr().err


def test_eigen_subcommand(tmp_path, capsys):
    cfg_path = write_cfg(
        tmp_path / "eig.cfg",
        tiny_cfg(problem="eigen-lshape", method="eigen", n_interior=500,
                 n_dirichlet=150, sigma_d=50.0, sigma_cap=75.0, threshold=1e-3,
                 adam_iters=60, pretrain_iters=50, max_alternations=2,
                 max_restarts=1))
    rc = main(["--output-root", str(tmp_path), "eigen", cfg_path,
               "--run-name", "eig"])
    assert rc == 0
    run_dir = tmp_path / "eig"
    with open(run_dir / "manifest.json") as fh:
        manifest = json.load(fh)
    assert manifest["status"] == "ok"
    assert manifest["metrics"]["mu_1"] <= manifest["metrics"]["mu_2"]
    assert (run_dir / "checkpoint_eigen.bin").exists()
    capsys.readouterr()
    assert main(["evaluate", str(run_dir), "--n-samples", "2000"]) == 0
    assert "mu_1" in capsys.readouterr().out


def test_eigen_subcommand_needs_eigen_method(tmp_path, capsys):
    cfg_path = write_cfg(tmp_path / "t.cfg", tiny_cfg())
    assert main(["--output-root", str(tmp_path), "eigen", cfg_path]) == 2
    assert "eigen" in capsys.readouterr().err
