from __future__ import annotations

import csv

import pytest

from bvlab import InvalidArgument, build_grid
from bvlab.cli.config import DEFAULTS, load_config, parse_override
from bvlab.cli.main import EXIT_FAIL, EXIT_OK, EXIT_RESOLUTION, EXIT_USAGE, main
from bvlab.cli.svg import emit_svg
from bvlab.grid import ball


def test_list(capsys):
    assert main(["list"]) == EXIT_OK
    out = capsys.readouterr().out
    for name in DEFAULTS:
        assert name in out


def test_oracle_command(capsys):
    assert main(["oracle", "--grid", "3x3", "--cases", "50"]) == EXIT_OK
    assert "0 mismatches" in capsys.readouterr().out
    assert main(["oracle", "--grid", "3x4"]) == EXIT_USAGE


def test_parse_override_defaults_to_params():
    assert parse_override("depth=3") == ("params", "depth", "3")
    assert parse_override("space.resolution=64") == ("space", "resolution", "64")
    with pytest.raises(InvalidArgument):
        parse_override("depth")


def test_load_config_file_and_overrides(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[experiment]\nname = thinness_atlas\n\n[space]\nresolution = 128\n")
    cfg = load_config(ini, ["depth=2"])
    assert cfg.space["resolution"] == 128
    assert cfg.params["depth"] == 2
    assert cfg.params["radius"] == DEFAULTS["thinness_atlas"]["params"]["radius"]
    with pytest.raises(InvalidArgument):
        load_config(ini, ["bogus=1"])
    with pytest.raises(InvalidArgument):
        load_config(None, ["experiment.name=nope"])
    with pytest.raises(InvalidArgument):
        load_config(tmp_path / "missing.ini")


def test_usage_errors_exit_2(tmp_path):
    assert main(["run", "--set", "experiment.name=nope", "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE


def test_coarse_grid_exits_3(tmp_path):
    args = ["run", "--set", "experiment.name=counterexample", "--set", "space.resolution=64"]
    assert main(args + ["--out", str(tmp_path)]) == EXIT_RESOLUTION


def test_run_writes_report(tmp_path):
    out = tmp_path / "atlas"
    code = main(
        ["run", "--set", "experiment.name=thinness_atlas", "--set", "space.resolution=128",
         "--set", "depth=2", "--out", str(out)]
    )
    assert code in (EXIT_OK, EXIT_FAIL)
    with (out / "report.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["check_name", "scale", "lhs", "rhs", "tolerance", "status"]
    assert len(rows) > 1
    assert all(r[5] in {"pass", "fail", "untrusted", "info"} for r in rows[1:])
    assert (out / "config_used.ini").read_text().startswith("[experiment]")
    assert list(out.glob("profile_*.csv"))


def test_config_used_roundtrips(tmp_path):
    out = tmp_path / "coarea"
    args = ["run", "--set", "experiment.name=coarea_suite", "--set", "functions=10"]
    assert main(args + ["--out", str(out)]) == EXIT_OK
    again = tmp_path / "again"
    assert main(["run", "--config", str(out / "config_used.ini"), "--out", str(again)]) == EXIT_OK
    assert (out / "report.csv").read_bytes() == (again / "report.csv").read_bytes()


def test_svg_is_deterministic(tmp_path):
    s = build_grid(2, 1.0, 16)
    A = ball(s, (0, 0), 0.5)
    a = emit_svg(s, [A], tmp_path / "a.svg").read_bytes()
    b = emit_svg(s, [A], tmp_path / "b.svg").read_bytes()
    assert a == b
    assert a.count(b"<rect") == len(A) + 1
