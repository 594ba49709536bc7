import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from spinesim.analysis import poisson_chisquare
from spinesim.cli import main
from spinesim.config import ConfigError, RunConfig, parse_config_text


def write_cfg(tmp_path, doc, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def data_rows(path):
    with open(path) as fh:
        return list(csv.reader(line for line in fh if not line.startswith("#")))


def header(path):
    with open(path) as fh:
        return [line for line in fh if line.startswith("#")]


YULE = {"models": {"id": "yule", "b": 1.0}, "population": {"init": [1], "horizon": 1.0}}


def test_simulate_zero_horizon(tmp_path):
    doc = {"models": {"id": "linear_growth", "a": 1, "alpha": 1},
           "population": {"init": [1.0, 2.0, 3.0], "horizon": 0}}
    out = tmp_path / "t.csv"
    assert main(["simulate", "--config", write_cfg(tmp_path, doc), "--replicates", "1",
                 "--threads", "1", "--out", str(out)]) == 0
    rows = data_rows(out)
    assert len(rows) == 1 + 3
    assert all(r[rows[0].index("parent")] in ("", "NA", "None") for r in rows[1:])


def test_verify_many_to_one_yule(tmp_path):
    out = tmp_path / "v.csv"
    doc = dict(YULE, analysis={"functional": "zpow:0.5"})
    code = main(["verify", "many-to-one", "--config", write_cfg(tmp_path, doc), "--seed", "3",
                 "--replicates", "2000", "--threads", "1", "--out", str(out)])
    rows = data_rows(out)
    assert rows[0] == ["identity", "lhs_mean", "lhs_se", "rhs_mean", "rhs_se", "z", "pass"]
    assert rows[1][-1] == "true" and code == 0
    report = [l for l in header(out) if l.startswith("# report")]
    assert json.loads(report[0][len("# report "):])["pass"] is True


def test_verify_failure_exit_code(tmp_path):
    # a published-form check is not reachable from the CLI; a zero threshold fails instead
    doc = dict(YULE, analysis={"functional": "terminal", "threshold": 0.0})
    out = tmp_path / "v.csv"
    assert main(["verify", "many-to-one", "--config", write_cfg(tmp_path, doc),
                 "--replicates", "200", "--threads", "1", "--out", str(out)]) == 1
    assert data_rows(out)[1][-1] == "false"


def test_verify_sampling_table(tmp_path):
    doc = {"models": {"id": "exp_growth", "a": 0.1, "alpha": 0.1},
           "auxiliary": {"x0": 1, "t": 2}, "analysis": {"n_grid": [1, 5], "n_boot": 20}}
    out = tmp_path / "s.csv"
    assert main(["verify", "sampling", "--config", write_cfg(tmp_path, doc),
                 "--replicates", "100", "--threads", "1", "--out", str(out)]) == 0
    rows = data_rows(out)
    assert rows[0] == ["n", "ks", "p_value", "boot_lo", "boot_hi"] and len(rows) == 3


def test_figure_zero_horizon(tmp_path):
    doc = {"auxiliary": {"x0": 1, "t": 0}}
    out = tmp_path / "f.csv"
    assert main(["figure", "--config", write_cfg(tmp_path, doc), "--replicates", "50",
                 "--threads", "1", "--out", str(out)]) == 0
    rows = data_rows(out)[1:]
    assert sorted(rows) == [["auxiliary", "0", "1"], ["tagged", "0", "1"], ["uniform", "0", "1"]]


def test_figure_yule_poisson_series(tmp_path):
    doc = {"models": {"id": "yule", "b": 1.0}, "auxiliary": {"x0": 1, "t": 1}}
    out = tmp_path / "f.csv"
    assert main(["figure", "--config", write_cfg(tmp_path, doc), "--seed", "4",
                 "--replicates", "3000", "--threads", "1", "--out", str(out)]) == 0
    counts = {"auxiliary": [], "tagged": []}
    for name, k, f in data_rows(out)[1:]:
        if name in counts:
            counts[name] += [int(k)] * round(float(f) * 3000)
    # spine divisions at rate 2b, tagged cell at rate b
    assert poisson_chisquare(np.array(counts["auxiliary"]), 2.0)[1] > 1e-3
    assert poisson_chisquare(np.array(counts["tagged"]), 1.0)[1] > 1e-3
    means = {l.split()[2]: float(l.split()[3]) for l in header(out) if l.startswith("# mean")}
    assert means["tagged"] < means["auxiliary"]


COMMANDS = [
    ["simulate"], ["auxiliary"], ["tagged"], ["sample"], ["figure"],
    ["verify", "many-to-one"], ["verify", "whole-tree"], ["verify", "forks"],
    ["verify", "feynman-kac"], ["verify", "sampling"],
]
SMALL = {"models": {"id": "linear_growth", "a": 1, "alpha": 1},
         "population": {"init": [1.0], "horizon": 0.8},
         "analysis": {"functional": "terminal", "s": 0.4, "n_grid": [1, 3], "n_boot": 10}}


@pytest.mark.parametrize("cmd", COMMANDS, ids=lambda c: "-".join(c))
def test_determinism_and_replay(tmp_path, cmd):
    cfg = write_cfg(tmp_path, SMALL)
    outs = []
    for i, threads in enumerate(("1", "1", "2")):
        out = tmp_path / f"o{i}.csv"
        main(cmd + ["--config", cfg, "--seed", "21", "--replicates", "40",
                    "--threads", threads, "--out", str(out)])
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]
    rep = tmp_path / "replay.csv"
    main(["replay", str(tmp_path / "o0.csv"), "--threads", "1", "--out", str(rep)])
    assert rep.read_bytes() == outs[0]
    other = tmp_path / "other.csv"
    main(cmd + ["--config", cfg, "--seed", "22", "--replicates", "40", "--threads", "1",
                "--out", str(other)])
    assert other.read_bytes() != outs[0]


def test_header_records_config(tmp_path):
    out = tmp_path / "a.csv"
    main(["auxiliary", "--config", write_cfg(tmp_path, SMALL), "--seed", "5",
          "--replicates", "3", "--threads", "1", "--out", str(out)])
    h = header(out)
    assert h[0].startswith("# spinesim auxiliary")
    assert h[1].startswith("# config_hash sha256:") and h[2] == "# seed 5\n"


def test_config_hash_ignores_threads():
    a = RunConfig("simulate", {"cli": {"threads": 1}}, 1, 10)
    b = RunConfig("simulate", {"cli": {"threads": 8}}, 1, 10)
    c = RunConfig("simulate", {}, 2, 10)
    assert a.config_hash() == b.config_hash() != c.config_hash()


def test_parse_error_location(tmp_path):
    with pytest.raises(ConfigError, match=r"run.json:3:\d+"):
        parse_config_text('{\n "models": {"id": "yule"},\n "population": {,}\n}', "run.json")
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config_text('{"model": {}}')
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_text('{"cli": {"sed": 1}}')


def test_invalid_seed():
    with pytest.raises(ConfigError):
        RunConfig("simulate", {}, 2 ** 64, 1)
    with pytest.raises(ConfigError):
        RunConfig("simulate", {}, 1, 0)


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{ nope")
    assert main(["simulate", "--config", str(bad)]) == 2
    assert "bad.json:1:" in capsys.readouterr().err
    assert main(["simulate", "--config", write_cfg(tmp_path, {"models": {"id": "nosuch"}},
                                                      "m.json")]) == 2
    assert main(["simulate", "--config", write_cfg(tmp_path, {"models": {"id": "yule"}},
                                                      "h.json")]) == 2
    big = {"models": {"id": "yule", "b": 1.0}, "population": {"init": [1], "horizon": 20}}
    assert main(["simulate", "--config", write_cfg(tmp_path, big, "c.json"), "--threads", "1",
                 "--replicates", "1", "--cap-individuals", "100",
                 "--out", str(tmp_path / "c.csv")]) == 3
    assert "cap exceeded" in capsys.readouterr().err
    assert main(["replay", str(bad)]) == 2


def test_module_entry_point(tmp_path):
    out = tmp_path / "m.csv"
    res = subprocess.run([sys.executable, "-m", "spinesim", "tagged", "--config",
                          write_cfg(tmp_path, SMALL), "--replicates", "2", "--threads", "1",
                          "--out", str(out)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert any(l.startswith("# horizon") for l in header(out))
