import json
import subprocess
import sys

import pytest

from skanf.cli import EXIT_ERROR, EXIT_FOUND, EXIT_NONE, main
from skanf.fixtures.bundles import bundle_path, hex_path
from skanf.fixtures.generator import OWNER
from skanf.oracle import validate_report
from skanf.words import hex_addr


def _full(tmp_path, name, *extra, sub="run"):
    out = tmp_path / sub
    code = main(["full", "--fixture", str(bundle_path(name)), "--out-dir", str(out), *extra])
    docs = {p.stem: json.loads(p.read_text()) for p in out.glob("*.json")}
    return code, docs


@pytest.mark.parametrize("name,expected", [
    ("destroyer-inu", EXIT_FOUND),
    ("safe-constant", EXIT_NONE),
    ("ungated-notx", EXIT_FOUND),
])
def test_exit_codes(tmp_path, capsys, name, expected):
    code, docs = _full(tmp_path, name)
    assert code == expected
    assert set(docs) == {"deobfuscation", "reports", "exploits", "summary"}


def test_missing_bytecode_is_error(tmp_path, capsys):
    assert main(["analyze", "--bytecode", str(tmp_path / "nope.hex")]) == EXIT_ERROR
    assert "cannot read bytecode" in capsys.readouterr().err


def test_bad_budget_is_error(capsys):
    assert main(["analyze", "--bytecode", str(hex_path("direct")), "--path-cap", "0"]) == EXIT_ERROR


def test_recorded_origin_flag(tmp_path, capsys):
    code, docs = _full(tmp_path, "destroyer-inu-notx")
    assert code != EXIT_FOUND and docs["reports"] == []
    code, docs = _full(tmp_path, "destroyer-inu-notx", "--recorded-origin", hex(OWNER), sub="rec")
    assert code == EXIT_FOUND
    assert [r["origin"] for r in docs["reports"]] == [hex_addr(OWNER)]


def test_deobfuscate_notice_and_coverage(tmp_path, capsys):
    assert main(["deobfuscate", "--bytecode", str(hex_path("direct"))]) == EXIT_NONE
    assert "not obfuscated" in capsys.readouterr().out
    for name, full in [("destroyer-inu", True), ("dead-block", False)]:
        out = tmp_path / name
        main(["deobfuscate", "--bytecode", str(hex_path(name)), "--out-dir", str(out)])
        doc = json.loads((out / "deobfuscation.json").read_text())
        assert doc["obfuscated"] and doc["coverage_before"] < 1.0
        assert (doc["coverage_after"] == 1.0) == full


def test_deterministic(tmp_path, capsys):
    _, a = _full(tmp_path, "destroyer-inu", sub="a")
    _, b = _full(tmp_path, "destroyer-inu", sub="b")
    for k in a:
        if k != "summary":
            assert a[k] == b[k]
    strip = lambda s: {k: v for k, v in s.items() if k != "exploration"}
    assert strip(a["summary"]) == strip(b["summary"])


def test_summary_consistent(tmp_path, capsys):
    _, d = _full(tmp_path, "destroyer-inu")
    s = d["summary"]
    assert s["reports"] == len(d["reports"]) == 1
    assert s["exploits"] == len(d["exploits"]["exploits"]) == 1
    assert s["validExploits"] == sum(x["verdict"]["valid"] for x in d["exploits"]["exploits"])
    assert s["synthesisFailures"] == len(d["exploits"]["failures"])
    for r in d["reports"]:
        validate_report(r)


def test_validate_subcommand(tmp_path, capsys):
    _, d = _full(tmp_path, "destroyer-inu")
    ex = tmp_path / "run" / "exploits.json"
    out = tmp_path / "val"
    assert main(["validate", "--fixture", str(bundle_path("destroyer-inu")), "--exploits", str(ex),
                 "--out-dir", str(out)]) == EXIT_NONE
    val = json.loads((out / "validation.json").read_text())
    assert [v["verdict"]["valid"] for v in val] == [True]


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "skanf.cli", "analyze", "--fixture", str(bundle_path("destroyer-inu"))],
                       capture_output=True, text=True, timeout=120)
    assert r.returncode == EXIT_FOUND and json.loads(r.stdout)[0]["functionSelector"] == "0xa9059cbb"
