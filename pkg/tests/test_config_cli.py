import os
import subprocess
import sys
from pathlib import Path

import pytest

from fransim import cli
from fransim.config import config_from_dict, load_config, parse_config, with_overrides
from fransim.errors import ConfigError
from fransim.report import format_csv, parse_csv, read_csv, write_csv
from fransim.sim import SimConfig, run_experiment

QUICK = """
[simulation]
horizon = 2000.0
replications = 3
n_snapshots = 1
"""

QUICK_FIG6 = QUICK + """
[experiment]
values = [1, 2]
n_faps = [2, 3, 4]
"""


def write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_empty_file_gives_defaults(tmp_path):
    cfg, ov = load_config(write(tmp_path, ""))
    assert cfg == SimConfig()
    assert ov.sweep_param is None and ov.values is None


def test_arrival_rate_parsed(tmp_path):
    cfg = parse_config(write(tmp_path, "[session]\narrival_rate = 0.1\n"))
    assert cfg.session.arrival_rate == 0.1
    assert cfg.session.mean_holding_time == SimConfig().session.mean_holding_time


def test_full_config(tmp_path):
    text = """
[simulation]
horizon = 1e4
seed = 9
procedure = "non_fran"
gate_enabled = false
[session]
arrival_rate = 0.3
mean_holding_time = 2
residence_rate = 0.5
[mix]
"FAP->FAP" = 0.25
"FAP->MRRH" = 0.75
[power]
levels = [0.01, 0.2]
[channel]
n_subchannels = 4
[experiment]
sweep_param = "arrival_rate"
values = [0.1, 0.2]
procedures = ["fran"]
"""
    cfg, ov = load_config(write(tmp_path, text))
    assert cfg.horizon == 1e4 and cfg.seed == 9 and cfg.procedure.value == "non_fran"
    assert not cfg.gate_enabled
    assert cfg.session.residence_rate == 0.5 and cfg.session.mean_holding_time == 2.0
    assert cfg.mix == {"FAP->FAP": 0.25, "FAP->MRRH": 0.75}
    assert tuple(cfg.grid.levels) == (0.01, 0.2)
    assert cfg.channel.n_subchannels == 4
    assert ov.sweep_param == "arrival_rate" and tuple(ov.values) == (0.1, 0.2) and tuple(ov.procedures) == ("fran",)


@pytest.mark.parametrize("text,key", [
    ("[session]\nmean_holding_time = -1\n", "session.mean_holding_time"),
    ("[session]\narrival_rate = -0.5\n", "session.arrival_rate"),
    ("[session]\narrival_rate = 'fast'\n", "session.arrival_rate"),
    ("[simulation]\nhorizon = 0\n", "simulation.horizon"),
    ("[simulation]\nreplications = 2.5\n", "simulation.replications"),
    ("[simulation]\nprocedure = 'lte'\n", "simulation.procedure"),
    ("[simulation]\nseed = -3\n", "simulation.seed"),
    ("[simulation]\nbogus = 1\n", "simulation.bogus"),
    ("[weather]\nrain = 1\n", "weather"),
    ("[mix]\n'FAP->FAP' = 0.4\n", "mix"),
    ("[mix]\n'UE->Mars' = 1.0\n", "UE->Mars"),
    ("[power]\np_min = 0.5\np_max = 0.1\n", "power.p_min"),
    ("[power]\nlevels = [0.1]\np_max = 1.0\n", "power.levels"),
    ("[channel]\npathloss_exponent = 1.5\n", "channel.pathloss_exponent"),
    ("[topology]\nn_faps = -2\n", "topology.n_faps"),
    ("[utility]\nalpha = -1\n", "utility.alpha"),
    ("[experiment]\nsweep_param = 'color'\n", "experiment.sweep_param"),
    ("[experiment]\nvalues = []\n", "experiment.values"),
    ("[simulation\n", "invalid TOML"),
])
def test_invalid_configs(tmp_path, text, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.").replace("[", r"\[")):
        load_config(write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        parse_config(tmp_path / "absent.toml")


def test_overrides():
    cfg = with_overrides(SimConfig(), seed=4, replications=2)
    assert cfg.seed == 4 and cfg.replications == 2
    assert with_overrides(SimConfig()) == SimConfig()
    with pytest.raises(ConfigError):
        with_overrides(SimConfig(), replications=0)


def test_config_from_dict_matches_file(tmp_path):
    assert config_from_dict({"session": {"arrival_rate": 0.2}})[0] == parse_config(
        write(tmp_path, "[session]\narrival_rate = 0.2\n"))


def test_csv_round_trip(tmp_path):
    cfg = SimConfig(horizon=2e3, replications=3, n_snapshots=0)
    rep = run_experiment(cfg, "arrival_rate", [0.1, 0.3])
    rep.metadata = {"experiment": "custom", "seed": "1"}
    write_csv(rep, tmp_path / "r.csv")
    back = read_csv(tmp_path / "r.csv")
    assert back.rows == rep.rows and back.metadata == rep.metadata
    assert format_csv(parse_csv(format_csv(rep))) == format_csv(rep)


def run_cli(args):
    return cli.main(args + ["--quiet"])


def test_fig5_metadata(tmp_path):
    cfg = write(tmp_path, QUICK + "[experiment]\nvalues = [1.0, 2.0]\n")
    assert run_cli(["--experiment", "fig5", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rep = read_csv(tmp_path / "o" / "fig5.csv")
    assert rep.metadata["arrival_rate"] == "0.1" and rep.metadata["sweep_param"] == "mean_holding_time"
    assert {r.sweep_value for r in rep.rows} == {1.0, 2.0}
    assert (tmp_path / "o" / "summary.txt").read_text().count("PASS") >= 1


def test_fig6_rows(tmp_path):
    cfg = write(tmp_path, QUICK_FIG6)
    assert run_cli(["--experiment", "fig6", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rep = read_csv(tmp_path / "fig6.csv")
    assert len(rep.rows) == 3 * 3 * 2
    assert {r.variant for r in rep.rows} == {f"{s}@n_faps={n}" for s in ("proposed", "existing_fran", "non_fran")
                                             for n in (2, 3, 4)}
    assert all(r.metric == "total_net_utility" and r.n_reps == 3 for r in rep.rows)
    summary = (tmp_path / "summary.txt").read_text()
    assert "INFO best-response power decreases:" in summary and "over 36 games" in summary


def test_rerun_byte_identical(tmp_path):
    cfg = write(tmp_path, QUICK + "[experiment]\nvalues = [0.1, 0.2]\n")
    for d in ("a", "b"):
        assert run_cli(["--experiment", "fig4", "--config", str(cfg), "--out", str(tmp_path / d), "--seed", "3"]) == 0
    a, b = ((tmp_path / d / "fig4.csv").read_bytes() for d in ("a", "b"))
    assert a == b
    assert run_cli(["--experiment", "fig4", "--config", str(cfg), "--out", str(tmp_path / "c"), "--seed", "4"]) == 0
    assert (tmp_path / "c" / "fig4.csv").read_bytes() != a


def test_error_exit_leaves_nothing(tmp_path, capsys):
    bad = write(tmp_path, "[session]\nmean_holding_time = -1\n")
    out = tmp_path / "o"
    assert run_cli(["--experiment", "fig4", "--config", str(bad), "--out", str(out)]) == 1
    assert "session.mean_holding_time" in capsys.readouterr().err
    assert not out.exists() or not any(out.iterdir())
    assert run_cli(["--experiment", "fig4", "--config", str(tmp_path / "nope.toml"), "--out", str(out)]) == 1


def test_partial_output_removed(tmp_path):
    cfg = write(tmp_path, QUICK + "[experiment]\nvalues = [0.1, 0.2]\n")
    out = tmp_path / "o"
    # csv is written first, then summary.txt fails because a directory is in the way
    (out / "summary.txt").mkdir(parents=True)
    assert run_cli(["--experiment", "fig4", "--config", str(cfg), "--out", str(out)]) == 1
    assert not (out / "fig4.csv").exists()


def test_custom_needs_sweep(tmp_path):
    assert run_cli(["--experiment", "custom", "--config", str(write(tmp_path, QUICK)),
                    "--out", str(tmp_path / "o")]) == 1


def test_env_out_and_no_stray_files(tmp_path, monkeypatch):
    cfg = write(tmp_path, QUICK + "[experiment]\nvalues = [0.1, 0.2]\n", name="cfg.toml")
    work = tmp_path / "cwd"
    work.mkdir()
    monkeypatch.chdir(work)
    out = tmp_path / "env-out"
    monkeypatch.setenv(cli.OUT_ENV, str(out))
    before = set(tmp_path.rglob("*"))
    assert run_cli(["--experiment", "fig4", "--config", str(cfg)]) == 0
    assert {p.name for p in out.iterdir()} == {"fig4.csv", "summary.txt"}
    assert set(tmp_path.rglob("*")) - before == {out, out / "fig4.csv", out / "summary.txt"}


def test_bad_experiment_name():
    with pytest.raises(SystemExit):
        cli.main(["--experiment", "fig9"])
    with pytest.raises(ConfigError):
        cli.RunSpec("fig9")


def test_numpy_backend_same_csv(tmp_path):
    cfg = write(tmp_path, QUICK + "[experiment]\nvalues = [0.1, 0.2]\n")
    outs = []
    for flag in ("0", "1"):
        out = tmp_path / f"o{flag}"
        subprocess.run([sys.executable, "-m", "fransim", "--experiment", "fig4", "--config", str(cfg),
                        "--out", str(out), "--quiet"],
                       env={**os.environ, "FRANSIM_DISABLE_NUMBA": flag}, check=True)
        outs.append((out / "fig4.csv").read_bytes())
    assert outs[0] == outs[1]


def test_module_entry_point_help():
    out = subprocess.run([sys.executable, "-m", "fransim", "--help"], capture_output=True, text=True, check=True)
    assert "--experiment" in out.stdout


def test_readme_config_example(tmp_path):
    readme = (Path(__file__).parent.parent / "README.md").read_text()
    block = readme.split("```toml\n", 1)[1].split("```", 1)[0]
    cfg, ov = load_config(write(tmp_path, block))
    assert cfg.topology.n_faps == 20 and len(cfg.grid) == 4
    assert ov.values == (0.05, 0.1, 0.2)
