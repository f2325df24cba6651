import json
import subprocess
import sys
from pathlib import Path

import pytest

from statmix import __version__
from statmix.cli import load_config, list_vocabulary, main, ConfigError
from statmix.couplings import COUPLING_KINDS

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_list_vocabulary():
    text = list_vocabulary()
    assert "random-to-top" in text
    assert "transposition-any-k-positions" in text
    for kind in COUPLING_KINDS:
        assert f"  {kind}\n" in text
    assert len(COUPLING_KINDS) == 10
    # sections and the entries within them are alphabetized
    sections, current = [], None
    for line in text.splitlines():
        if not line.startswith("  "):
            current = []
            sections.append((line, current))
        else:
            current.append(line.strip())
    names = [s for s, _ in sections]
    assert names == sorted(names)
    for _, entries in sections:
        assert entries == sorted(entries)
    assert list_vocabulary() == text


def test_version(capsys):
    assert main(["version"]) == 0
    assert __version__ in capsys.readouterr().out


def test_exact_parity_run(tmp_path, capsys):
    rc = main(["run", str(CONFIGS / "rtt-parity-5.json"), "--out", str(tmp_path), "--workers", "1"])
    assert rc == 0
    rows = (tmp_path / "rtt-parity-5.csv").read_text().splitlines()
    assert rows[0] == "t,d_tv,d_sep,scope,chain,statistic"
    d1 = float(rows[2].split(",")[1])
    assert d1 <= 0.1 + 1e-12
    summary = json.loads((tmp_path / "rtt-parity-5.json").read_text())
    assert set(summary) == {"experiment_id", "claims", "seed", "runtime_seconds"}
    claim = summary["claims"][0]
    assert set(claim) == {"id", "paper_anchor", "expected", "observed", "tolerance", "pass"}
    assert claim["pass"] is True
    assert (tmp_path / "rtt-parity-5.txt").exists()
    assert "1/1 claim checks passed" in capsys.readouterr().out


def test_analytic_run(tmp_path):
    rc = main(["run", str(CONFIGS / "top17-law.json"), "--out", str(tmp_path)])
    assert rc == 0
    header = (tmp_path / "top17-law.csv").read_text().splitlines()[0]
    assert header == "scenario,n,k,t,pmf,cdf,tail"


def test_poker17_suite(tmp_path):
    rc = main(["run", str(CONFIGS / "poker17.json"), "--out", str(tmp_path), "--trials", "20000",
               "--workers", "2"])
    summary = json.loads((tmp_path / "poker17.json").read_text())
    observed = {c["id"]: c["observed"] for c in summary["claims"]}
    text = json.dumps(observed)
    assert any(abs(v - 20.6) < 0.05 for v in observed.values() if isinstance(v, float))
    assert any(abs(v - 4.3) < 0.05 for v in observed.values() if isinstance(v, float))
    assert 41 in observed.values(), text
    assert all(c["paper_anchor"] for c in summary["claims"])
    assert rc == 0


def test_failing_check_gives_exit_1(tmp_path):
    cfg = json.loads((CONFIGS / "rtt-parity-5.json").read_text())
    cfg["checks"][0]["value"] = 0.01
    p = _write(tmp_path, "bad.json", json.dumps(cfg, indent=2))
    assert main(["run", str(p), "--out", str(tmp_path / "o")]) == 1
    summary = json.loads((tmp_path / "o" / "rtt-parity-5.json").read_text())
    assert summary["claims"][0]["pass"] is False


def test_same_seed_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = str(CONFIGS / "hypercube-first-one.json")
    assert main(["run", cfg, "--out", str(a), "--trials", "2000", "--workers", "1"]) == 0
    assert main(["run", cfg, "--out", str(b), "--trials", "2000", "--workers", "2"]) == 0
    for name in ("hypercube-first-one.csv", "hypercube-first-one.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    c = tmp_path / "c"
    main(["run", cfg, "--out", str(c), "--trials", "2000", "--seed", "8"])
    assert (a / "hypercube-first-one.csv").read_bytes() != (c / "hypercube-first-one.csv").read_bytes()


def test_timing_flag(tmp_path):
    main(["run", str(CONFIGS / "rtt-parity-5.json"), "--out", str(tmp_path), "--timing"])
    summary = json.loads((tmp_path / "rtt-parity-5.json").read_text())
    assert isinstance(summary["runtime_seconds"], float)


BAD_CHAIN = """{
  "experiment-id": "x",
  "engine": "exact",
  "chain": {"kind": "random-to-bottom", "n": 4},
  "statistics": [{"kind": "parity"}]
}
"""

BAD_JSON = """{
  "experiment-id": "x",
  "engine": "exact",
  "chain": {"kind": "random-to-top", "n": 4},
  "statistics": [{"kind": "parity"}],,
}
"""

BAD_TIMES = """{
  "experiment-id": "x",
  "engine": "exact",
  "chain": {"kind": "random-to-top", "n": 4},
  "statistics": [{"kind": "parity"}],
  "times": [1, 3, 2]
}
"""

BAD_STAT = """{
  "experiment-id": "x",
  "engine": "exact",
  "chain": {"kind": "hypercube-lazy", "n": 4},

  "statistics": [{"kind": "parity"}]
}
"""


@pytest.mark.parametrize(
    "text, line, fragment",
    [(BAD_CHAIN, 4, "random-to-bottom"), (BAD_JSON, 5, "column"), (BAD_TIMES, 6, "strictly increasing"),
     (BAD_STAT, 6, "permutation")],
)
def test_line_numbered_errors(tmp_path, capsys, text, line, fragment):
    p = _write(tmp_path, "cfg.json", text)
    with pytest.raises(ConfigError) as e:
        load_config(p)
    assert e.value.line == line
    assert main(["run", str(p), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert f"cfg.json:{line}:" in err and fragment in err


def test_cap_exceeded(tmp_path, capsys):
    text = BAD_CHAIN.replace('"random-to-bottom", "n": 4', '"random-to-top", "n": 11')
    p = _write(tmp_path, "big.json", text)
    assert main(["run", str(p), "--out", str(tmp_path / "o")]) == 3
    err = capsys.readouterr().err
    assert "cap exceeded" in err and "cap 1e+06" in err


def test_missing_file(tmp_path):
    assert main(["run", str(tmp_path / "nope.json")]) == 2


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "statmix", "list"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "rtt-parity" in out.stdout
