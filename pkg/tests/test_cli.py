from __future__ import annotations

import json
import subprocess
import sys

import pytest

from homlab import __version__
from homlab.cli import main


def _report(path):
    return json.loads(path.read_text(encoding="utf-8"))


def test_version_and_help(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out
    assert main(["--help"]) == 0


@pytest.mark.parametrize("argv", [["--bogus"], [], ["gen", "--steps", "x"],
                                  ["verify-all", "--only", "a"], ["zariski", "nope"]])
def test_usage_errors_exit_64(argv):
    assert main(argv) == 64


def test_gen_writes_space_and_figure(tmp_path):
    out = tmp_path / "space.json"
    assert main(["gen", "--steps", "12", "--out", str(out)]) == 0
    body = _report(out)
    assert body["schema"] == "v1"
    assert out.with_suffix(".png").read_bytes()[:4] == b"\x89PNG"


@pytest.mark.parametrize("cmd", ["pinch", "spread"])
def test_pair_commands(tmp_path, cmd):
    out = tmp_path / f"{cmd}.json"
    assert main([cmd, "--advances", "10", "--out", str(out)]) == 0
    assert out.exists() and out.with_suffix(".png").exists()


def test_oligo_acl_stdout(capsys):
    assert main(["oligo", "acl", "--kind", "vec_fq", "--dim", "3", "--set", "e1,e2"]) == 0
    body = json.loads(capsys.readouterr().out)
    assert sorted(body["acl"]) == sorted(["0", "e1", "e2", "e1+e2"])


def test_indep_axioms_exit_codes(tmp_path):
    rep = tmp_path / "ax.json"
    assert main(["indep", "axioms", "--samples", "60", "--report", str(rep)]) == 0
    body = _report(rep)
    assert body["status"] == "ok"
    assert [c["name"] for c in body["checks"]] == sorted(c["name"] for c in body["checks"])
    assert main(["indep", "axioms", "--relation", "always", "--samples", "60",
                 "--report", str(rep)]) == 1
    bad = [c for c in _report(rep)["checks"] if c["status"] == "violation"]
    assert bad and all(c["witness"] is not None for c in bad)


def test_inconclusive_exit_2(tmp_path):
    rep = tmp_path / "reach.json"
    assert main(["chains", "reach", "--dim", "5", "--length", "3", "--budget", "1",
                 "--samples", "3", "--report", str(rep)]) == 2
    assert _report(rep)["status"] == "inconclusive"


def test_report_layout(tmp_path):
    rep = tmp_path / "sink.json"
    assert main(["indep", "sink", "--kind", "vec_fq", "--dim", "5", "--depth", "12",
                 "--samples", "2", "--report", str(rep)]) == 0
    body = _report(rep)
    assert set(body) == {"schema", "version", "seed", "status", "checks"}
    assert body["version"] == __version__
    timings = _report(rep.with_suffix(".timings.json"))
    assert set(timings["runtime_ms"]) == {"indep.sink"}
    assert rep.with_suffix(".png").exists()


def test_sink_rejects_wrong_omega():
    assert main(["indep", "sink", "--kind", "pure_set", "--omega", "even_span"]) == 64


def test_injected_fault_exits_1(tmp_path):
    rep = tmp_path / "bad.json"
    assert main(["verify-all", "--quick", "--only", "1", "--inject", "broken_minus",
                 "--report", str(rep)]) == 1
    (c,) = _report(rep)["checks"]
    assert c["status"] == "violation" and c["witness"]


def test_verify_all_subset_reproducible(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert main(["verify-all", "--quick", "--only", "3,7", "--seed", "5",
                     "--report", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.with_suffix(".png").read_bytes() == b.with_suffix(".png").read_bytes()
    assert len(_report(a)["checks"]) == 2


def test_module_entry_point():
    done = subprocess.run([sys.executable, "-m", "homlab", "--version"],
                          capture_output=True, text=True)
    assert done.returncode == 0 and __version__ in done.stdout
