"""Configuration handling and the four subcommands end to end."""

import numpy as np
import pytest

from rtetomo import RunConfig, UsageError, config_hash, load_config, with_overrides
from rtetomo.cli import build_parser, main
from rtetomo.config import config_lines
from rtetomo.serialize import read_boundary, read_keyvalues, read_manifest


def test_default_configuration_is_the_production_study():
    cfg = RunConfig()
    assert cfg.half_width == 0.5
    assert (cfg.slab_bottom, cfg.slab_top) == (1.0, 2.0)
    assert cfg.source_half_width == 0.5
    assert cfg.sigma == 0.05
    assert cfg.anisotropy == 0.5
    assert cfg.mu_s == 5.0
    assert (cfg.letter, cfg.c_a) == ("A", 5.0)
    assert (cfg.h_forward, cfg.h_inverse) == (0.025, 0.05)
    assert cfg.downsample_factor == 2
    assert (cfg.lam, cfg.gamma, cfg.epsilon) == (5.0, 1e-3, 1e-2)
    assert (cfg.delta, cfg.seed, cfg.out) == (0.0, 0, "run")


def test_configuration_validation():
    with pytest.raises(UsageError):
        RunConfig(h_forward=0.04, h_inverse=0.05)
    with pytest.raises(UsageError):
        RunConfig(letter="Q")
    with pytest.raises(UsageError):
        RunConfig(letter="A", c_a=0.0)
    with pytest.raises(UsageError):
        RunConfig(gamma=1.0)
    with pytest.raises(UsageError):
        RunConfig(out="")
    assert RunConfig(letter=None, c_a=0.0).letter is None


def test_config_file_round_trip(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# desk-scale study\n"
        "h_forward=0.05\n"
        "h_inverse=0.1\n"
        "lambda=7.5\n"
        "letter=none\n"
        "c_a=0\n"
        "seed=4\n"
        "\n"
        "out=results  # trailing comment\n"
    )
    cfg = load_config(path)
    assert cfg.h_forward == 0.05 and cfg.h_inverse == 0.1
    assert cfg.lam == 7.5
    assert cfg.letter is None
    assert cfg.seed == 4
    assert cfg.out == "results"
    assert "lambda=7.5" in config_lines(cfg)
    assert not any(line.startswith("lam=") for line in config_lines(cfg))


@pytest.mark.parametrize(
    "text",
    [
        "turbo=1\n",
        "seed=1\nseed=2\n",
        "gamma=fast\n",
        "just words\n",
        "seed=one\n",
    ],
)
def test_config_file_rejects_bad_lines(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(UsageError):
        load_config(path)


def test_missing_config_file_is_a_usage_error(tmp_path):
    with pytest.raises(UsageError):
        load_config(tmp_path / "absent.cfg")
    assert main(["forward", "--config", str(tmp_path / "absent.cfg")]) == 1


def test_overrides_drop_none_and_coerce_text():
    cfg = RunConfig()
    same = with_overrides(cfg, seed=None, delta=None)
    assert same == cfg
    bumped = with_overrides(cfg, seed="3", delta="0.1", letter="OMEGA")
    assert bumped.seed == 3 and bumped.delta == 0.1 and bumped.letter == "OMEGA"
    assert with_overrides(cfg, letter="none").letter is None
    with pytest.raises(UsageError):
        with_overrides(cfg, c_a="-1")
    with pytest.raises(UsageError):
        with_overrides(cfg, c_a="much")


def test_hash_ignores_the_destination_only():
    assert config_hash(RunConfig(out="a")) == config_hash(RunConfig(out="b"))
    assert config_hash(RunConfig(seed=1)) != config_hash(RunConfig(seed=2))
    assert config_hash(RunConfig(lam=5.0)) != config_hash(RunConfig(lam=5.5))
    assert len(config_hash(RunConfig())) == 16


def test_lambda_flag_maps_to_the_weight_exponent():
    args = build_parser().parse_args(["invert", "--lambda", "7", "--ca", "10"])
    assert args.lam == 7.0
    assert args.c_a == 10.0


def test_unknown_flag_exits_one(capsys):
    assert main(["forward", "--turbo"]) == 1
    assert "error:" in capsys.readouterr().err
    assert main([]) == 1
    capsys.readouterr()


def desk_config(tmp_path, extra=""):
    path = tmp_path / "desk.cfg"
    path.write_text("h_forward=0.1\nh_inverse=0.1\ndelta=0.05\nseed=3\n" + extra)
    return path


def test_forward_invert_score_flow(tmp_path, capsys):
    cfg_file = desk_config(tmp_path)
    out = tmp_path / "run"
    assert main(["forward", "--config", str(cfg_file), "--out", str(out)]) == 0
    assert (out / "boundary.csv").is_file()
    manifest = read_manifest(out / "manifest.txt")
    expected = with_overrides(load_config(cfg_file), out=str(out))
    assert manifest["config_hash"] == config_hash(expected)
    assert manifest["backend"] in ("numba", "numpy")

    assert main(["invert", "--config", str(cfg_file), "--out", str(out)]) == 0
    for name in ("iterations.csv", "pair.csv", "reconstruction.csv", "metrics.txt"):
        assert (out / name).is_file()
    metrics, meta = read_keyvalues(out / "metrics.txt")
    for key in (
        "l2_rel", "contrast", "true_contrast", "centroid_offset",
        "centroid_offset_cells", "iterations", "objective", "grad_inf", "converged",
    ):
        assert key in metrics
    assert metrics["converged"] in ("true", "false")
    assert meta["config_hash"] == config_hash(expected)

    capsys.readouterr()
    assert main(["score", "--run", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "contrast=" in printed
    rescored, _ = read_keyvalues(out / "metrics.txt")
    assert rescored["contrast"] == metrics["contrast"]


def test_invert_checks_the_acquisition_step(tmp_path):
    cfg_file = desk_config(tmp_path)
    out = tmp_path / "run"
    assert main(["forward", "--config", str(cfg_file), "--out", str(out)]) == 0
    mismatched = tmp_path / "fine.cfg"
    mismatched.write_text("h_forward=0.05\nh_inverse=0.1\ndelta=0.05\nseed=3\n")
    assert main(["invert", "--config", str(mismatched), "--out", str(out)]) == 1


def test_noise_free_data_ignore_the_seed(tmp_path):
    cfg_file = tmp_path / "quiet.cfg"
    cfg_file.write_text("h_forward=0.1\nh_inverse=0.1\ndelta=0\n")
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    base = ["forward", "--config", str(cfg_file)]
    assert main(base + ["--seed", "1", "--out", str(out_a)]) == 0
    assert main(base + ["--seed", "2", "--out", str(out_b)]) == 0
    bds_a = read_boundary(out_a / "boundary.csv")
    bds_b = read_boundary(out_b / "boundary.csv")
    for face in ("bottom", "top", "left", "right"):
        np.testing.assert_array_equal(bds_a.g[face], bds_b.g[face])
    assert bds_a.seed == 1 and bds_b.seed == 2


def test_supercritical_scattering_exits_two(tmp_path):
    cfg_file = tmp_path / "hot.cfg"
    cfg_file.write_text("h_forward=0.1\nh_inverse=0.1\nmu_s=25\nletter=none\nc_a=0\n")
    assert main(["forward", "--config", str(cfg_file), "--out", str(tmp_path / "run")]) == 2


def test_verify_writes_a_report_and_passes(tmp_path):
    out = tmp_path / "lab"
    code = main(["verify", "--samples", "5", "--pairs", "5", "--out", str(out)])
    assert code == 0
    report, meta = read_keyvalues(out / "report.txt")
    assert report["passed"] == "true"
    assert float(report["gradient_max_rel_error"]) < 1e-5
    assert float(report["convexity_min_margin"]) >= 0.0
    for tag in ("2", "5", "10"):
        assert float(report[f"carleman_min_ratio_lam_{tag}"]) > 0.0
    assert (out / "ratios.csv").is_file()
    assert (out / "convexity.csv").is_file()
    assert meta["verify_step"] == "0.10000000000000001"


def test_broken_gradient_exits_three(tmp_path, monkeypatch):
    import rtetomo.cli as cli

    monkeypatch.setattr(cli, "gradient_check", lambda *a, **k: np.ones(20))
    out = tmp_path / "lab"
    code = main(["verify", "--samples", "3", "--pairs", "3", "--out", str(out)])
    assert code == 3
    report, _ = read_keyvalues(out / "report.txt")
    assert report["passed"] == "false"
