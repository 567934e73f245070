"""
End-to-end tests of the `fragwave` entrypoint: argument parsing, exit codes
and the JSON error document.
"""
import json
from pathlib import Path

import pytest

from src.infrastructure.main import build_parser, join_signed_values, main


def test_exponents_end_to_end(capsys: pytest.CaptureFixture):
    """
    Test Case: `fragwave exponents` prints the table and exits with 0.
    """
    code = main(["exponents", "--measure", "uniform_binary", "--p-grid", "0:1:0.5"])
    out = capsys.readouterr().out

    assert code == 0
    assert out.splitlines()[0] == "p,phi,phi_prime,c_p"
    assert "p_lower,p_bar,c_p_bar" in out


def test_missing_config_is_an_io_error(tmp_path: Path, capsys: pytest.CaptureFixture):
    """
    Test Case: An unreadable config exits with 1 and an IO_ERROR document naming the path.
    """
    missing = tmp_path / "missing.json"

    code = main(["run", "--config", str(missing), "--out", str(tmp_path)])
    document = json.loads(capsys.readouterr().err)

    assert code == 1
    assert document["error"]["code"] == "IO_ERROR"
    assert document["error"]["details"]["path"] == str(missing)


def test_invalid_config_exits_with_one(tmp_path: Path, capsys: pytest.CaptureFixture):
    """
    Test Case: A config that fails validation exits with 1 and INVALID_CONFIG.
    """
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"kind": "wave", "measure": {"kind": "uniform_binary"}, "master_seed": 1}))

    code = main(["run", "--config", str(config), "--out", str(tmp_path)])
    document = json.loads(capsys.readouterr().err)

    assert code == 1
    assert document["error"]["code"] == "INVALID_CONFIG"


def test_domain_error_exits_with_one(capsys: pytest.CaptureFixture):
    """
    Test Case: A grid below p̲ is a domain rule violation with exit code 1.
    """
    code = main(["exponents", "--measure", "uniform_binary", "--p-grid", "-3:0:1"])
    document = json.loads(capsys.readouterr().err)

    assert code == 1
    assert document["error"]["code"] == "DOMAIN_RULE_VIOLATION"


def test_negative_grid_accepts_both_spellings(capsys: pytest.CaptureFixture):
    """
    Test Case: A grid starting below zero parses with a space or with `=`.
    """
    spaced = main(["exponents", "--measure", "uniform_binary", "--p-grid", "-0.5:0.5:0.5"])
    spaced_out = capsys.readouterr().out
    joined = main(["exponents", "--measure", "uniform_binary", "--p-grid=-0.5:0.5:0.5"])

    assert spaced == joined == 0
    assert spaced_out == capsys.readouterr().out
    assert spaced_out.splitlines()[1].startswith("-0.5,")


def test_join_signed_values():
    """
    Test Case: Only the signed-value options are joined; a trailing option is left for argparse.
    """
    assert join_signed_values(["exponents", "--p-grid", "-3:0:1", "--measure", "x"]) == [
        "exponents", "--p-grid=-3:0:1", "--measure", "x",
    ]
    assert join_signed_values(["exponents", "--p-grid"]) == ["exponents", "--p-grid"]


@pytest.mark.parametrize(
    "argv",
    [
        ["run"],
        ["run", "--config", "a.json", "--workers", "0"],
        ["history", "--offset", "-1"],
        ["teleport"],
    ],
)
def test_bad_arguments_exit_through_argparse(argv: list[str]):
    """
    Test Case: Malformed command lines are refused by the parser.
    """
    with pytest.raises(SystemExit) as info:
        build_parser().parse_args(argv)
    assert info.value.code == 2
