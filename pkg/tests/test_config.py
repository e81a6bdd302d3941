import pytest

from stentropy.config import KEYS, RunConfig, describe_keys
from stentropy.entropy import ProportionMode
from stentropy.errors import DataError
from stentropy.grid import build_grid


def test_defaults():
    cfg = RunConfig()
    assert cfg["grid.cell_size_m"] == 500.0
    assert cfg["entropy.slice_seconds"] == 86400
    assert cfg["entropy.max_gap_seconds"] == 3600
    assert cfg["gam.basis_dim"] == 10
    assert cfg["gam.penalty_order"] == 2
    assert cfg["gam.max_iter"] == 100 and cfg["gam.tol"] == 1e-8
    grid = cfg["gam.lambda_grid_log10"]
    assert len(grid) == 13 and grid[0] == pytest.approx(1e-3) and grid[-1] == pytest.approx(1e3)
    assert cfg["pipeline.test_fraction"] == 0.1
    assert cfg["pipeline.aggregate"] == "mean"


def test_parse_and_comments():
    cfg = RunConfig.parse("# run\nentropy.proportion_mode = count  # fixes\n\nrun.seed=7\n")
    assert cfg["run.seed"] == 7
    assert cfg.entropy().proportion_mode is ProportionMode.COUNT


def test_unknown_key():
    with pytest.raises(DataError, match="unknown config key"):
        RunConfig.parse("grid.cellsize = 3\n")


def test_bad_value():
    with pytest.raises(DataError, match="gam.basis_dim"):
        RunConfig().set("gam.basis_dim", "ten")


def test_missing_equals():
    with pytest.raises(DataError, match=":2:"):
        RunConfig.parse("run.seed = 1\njunk\n")


def test_override():
    cfg = RunConfig().override(["run.seed=9", "pipeline.aggregate = vote"])
    assert cfg["run.seed"] == 9 and cfg["pipeline.aggregate"] == "vote"
    with pytest.raises(DataError):
        cfg.override(["run.seed"])


def test_text_round_trip():
    cfg = RunConfig().override(["grid.min_lat=46.5", "io.out_dir=x y"])
    again = RunConfig.parse(cfg.to_text())
    assert again.to_text() == cfg.to_text()


def test_fingerprint_ignores_io_and_seed():
    a = RunConfig()
    b = RunConfig().override(["io.out_dir=elsewhere", "run.seed=1"])
    c = RunConfig().override(["gam.basis_dim=12"])
    assert a.fingerprint() == b.fingerprint() != c.fingerprint()


def test_grid_from_box_or_data(grid2):
    cfg = RunConfig().set_bbox(grid2)
    assert cfg.grid() == grid2
    with pytest.raises(DataError):
        RunConfig().grid()


def test_every_key_described():
    text = describe_keys()
    for key in KEYS:
        assert key in text
