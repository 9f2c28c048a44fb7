import json
import math
import subprocess
import sys

import numpy as np
import pytest
from scipy.stats import nbinom

from eseplab import cli
from eseplab.errors import ConfigInvalid
from eseplab.limits import SweepReport, monotone_within


def run(tmp_path, config, *flags):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(config))
    return cli.main([*flags[:1], "--config", str(cfg), *flags[1:]])


def test_simulate_summary_and_determinism(tmp_path):
    conf = {"model": "esep", "horizon": 20.0, "replications": 300, "write_paths": 2}
    for d in ("a", "b"):
        assert run(tmp_path, conf, "simulate", "--seed", "5", "--out", str(tmp_path / d)) == 0
    for name in ("summary.json", "paths/path_0.csv", "paths/path_1.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert not (tmp_path / "a" / "paths" / "path_2.csv").exists()
    s = json.loads((tmp_path / "a" / "summary.json").read_text())
    se = math.sqrt(s["variance"] / 300)
    assert abs(s["mean"] - 10.0) < 3 * se + 0.5
    assert (tmp_path / "a" / "paths" / "path_0.csv").read_text().startswith("time,kind,batch\n")


def test_seed_changes_output(tmp_path):
    conf = {"horizon": 5.0, "replications": 5}
    run(tmp_path, conf, "simulate", "--seed", "1", "--out", str(tmp_path / "a"))
    run(tmp_path, conf, "simulate", "--seed", "2", "--out", str(tmp_path / "b"))
    assert (tmp_path / "a" / "paths/path_0.csv").read_bytes() != (tmp_path / "b" / "paths/path_0.csv").read_bytes()


def test_config_errors(tmp_path, capsys):
    assert run(tmp_path, {"replications": 0}, "simulate", "--out", str(tmp_path)) == 2
    assert run(tmp_path, {"colour": "red"}, "simulate", "--out", str(tmp_path)) == 2
    assert run(tmp_path, {"params": {"baseline": -1.0, "jump": 1.0, "expire_rate": 2.0}}, "simulate",
               "--out", str(tmp_path)) == 2
    assert "config error" in capsys.readouterr().err
    with pytest.raises(ConfigInvalid):
        cli.RunConfig.from_dict({"seed": -3})
    with pytest.raises(ConfigInvalid):
        cli.load_config(str(tmp_path / "missing.json"), {})


def test_flags_override_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 3, "replications": 7}))
    rc = cli.load_config(str(cfg), {"seed": 9, "replications": None})
    assert rc.seed == 9 and rc.replications == 7


def test_analytic_negbin_table(tmp_path):
    assert run(tmp_path, {"quantity": "negbin_pmf", "K": 40}, "analytic", "--out", str(tmp_path)) == 0
    text = (tmp_path / "analytic.csv").read_text()
    rows = cli.parse_analytic_csv(text)
    assert len(rows) == 41
    assert [r[0] for r in rows] == [str(k) for k in range(41)]
    # the 41 rows carry everything except the tail beyond 40
    assert sum(r[1] for r in rows) + nbinom.sf(40, 5, 1 / 3) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.xfail(strict=True, reason="mean 10, variance 30: P(Q > 40) = 1.35e-4, so 41 rows cannot hold 1 - 1e-6")
def test_analytic_negbin_table_literal_mass(tmp_path):
    assert run(tmp_path, {"quantity": "negbin_pmf", "K": 40}, "analytic", "--out", str(tmp_path)) == 0
    rows = cli.parse_analytic_csv((tmp_path / "analytic.csv").read_text())
    assert sum(r[1] for r in rows) >= 1 - 1e-6


def test_analytic_round_trip_and_domain(tmp_path):
    conf = {"quantity": "counting_pgf", "grid": [0.5, 0.9, 2.0], "t": 1.0}
    assert run(tmp_path, conf, "analytic", "--out", str(tmp_path)) == 0
    rows = cli.parse_analytic_csv((tmp_path / "analytic.csv").read_text())
    direct = cli.analytic_rows(cli.RunConfig.from_dict(conf))
    assert [float(a) for a, _, _ in rows] == [a for a, _, _ in direct]
    for (_, v, ok), (_, w, ok2) in zip(rows, direct):
        assert ok == ok2
        assert (math.isnan(v) and math.isnan(w)) or v == w
    assert rows[-1][2] is False


def test_analytic_joint_arguments(tmp_path):
    conf = {"quantity": "joint_pgf", "grid": [[0.9, 0.8], [0.5, 1.0]]}
    assert run(tmp_path, conf, "analytic", "--out", str(tmp_path)) == 0
    rows = cli.parse_analytic_csv((tmp_path / "analytic.csv").read_text())
    assert rows[0][0] == "0.9|0.8"


def test_sweep_sis_monotone_and_round_trip(tmp_path):
    conf = {"sweep": "sis", "N_list": [50, 500, 10000], "replications": 4000}
    assert run(tmp_path, conf, "sweep", "--out", str(tmp_path), "--seed", "3") == 0
    rep = SweepReport.from_csv((tmp_path / "sweep.csv").read_text(), True)
    _, tv = rep.metric("tv")
    _, se = rep.metric("tv_se")
    assert monotone_within(tv, se)
    assert tv[0] > tv[-1]
    side = json.loads((tmp_path / "sweep.json").read_text())
    assert side["run_config"]["N_list"] == [50, 500, 10000]
    direct = cli.run_sweep(cli.RunConfig.from_dict({**conf, "seed": 3}))
    assert direct.rows == rep.rows


def test_sweep_pasta(tmp_path):
    conf = {"sweep": "pasta", "n_list": [1, 5, 50],
            "params": {"baseline": 10.0, "jump": 2.0, "expire_rate": 3.0, "capacity": 5}}
    assert run(tmp_path, conf, "sweep", "--out", str(tmp_path)) == 0
    rep = SweepReport.from_csv((tmp_path / "sweep.csv").read_text(), True)
    assert np.all(np.diff(rep.metric("pasta_ratio")[1]) < 0)


def test_verify_exit_codes(tmp_path):
    assert run(tmp_path, {"suite": "quick"}, "verify", "--out", str(tmp_path / "q")) == 0
    recs = json.loads((tmp_path / "q" / "verify.json").read_text())
    assert recs and all(r["passed"] for r in recs)
    assert (tmp_path / "q" / "verify.csv").read_text().startswith(
        "claim_id,statistic,observed,threshold,passed,seed,rerun\n")
    assert run(tmp_path, {"suite": "controls"}, "verify", "--out", str(tmp_path / "c")) == 1


def test_verify_output_is_seed_determined(tmp_path):
    for d in ("a", "b"):
        run(tmp_path, {"suite": "quick"}, "verify", "--seed", "11", "--out", str(tmp_path / d))
    assert (tmp_path / "a" / "verify.json").read_bytes() == (tmp_path / "b" / "verify.json").read_bytes()


def test_io_error_exit_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run(tmp_path, {"quantity": "negbin_pmf"}, "analytic", "--out", str(blocker / "sub")) == 3


def test_module_entry_point_help():
    out = subprocess.run([sys.executable, "-m", "eseplab", "analytic", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "argument,value,in_domain" in out.stdout
