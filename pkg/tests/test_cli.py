import json

import pytest

from nvsim.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, main
from nvsim.errors import InvariantViolation

ECHO = """schema: 1
model: echo_closed
field: {magnitude: 65, theta: {start: 89, stop: 91, count: 3}}
tau: {start: 0, stop: 3, count: 4}
"""


@pytest.fixture
def echo_cfg(tmp_path):
    p = tmp_path / "echo.yaml"
    p.write_text(ECHO)
    return p


def test_reproducible_output_is_byte_identical(tmp_path, echo_cfg):
    outs = []
    for i in range(2):
        out = tmp_path / f"o{i}.json"
        assert main(["echo", "--config", str(echo_cfg), "--reproducible", "-o", str(out), "--format", "json"]) == EXIT_OK
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    doc = json.loads(outs[0])
    assert "timestamp" not in doc["metadata"]
    assert doc["metadata"]["config"]["field"]["theta"] == {"start": 89.0, "stop": 91.0, "count": 3}


def test_timestamp_without_flag(tmp_path, echo_cfg):
    out = tmp_path / "o.json"
    assert main(["echo", "--config", str(echo_cfg), "-o", str(out), "--format", "json"]) == EXIT_OK
    assert "timestamp" in json.loads(out.read_text())["metadata"]


def test_csv_to_stdout(echo_cfg, capsysbinary):
    assert main(["echo", "--config", str(echo_cfg), "--reproducible"]) == EXIT_OK
    lines = capsysbinary.readouterr().out.decode().splitlines()
    assert lines[0] == "theta_B(deg),tau(us),P(1)" and len(lines) == 13


def test_overrides(tmp_path, echo_cfg):
    out = tmp_path / "o.csv"
    assert main(["echo", "--config", str(echo_cfg), "--set", "tau.count=2", "--set", "model=echo_exact",
                 "-o", str(out)]) == EXIT_OK
    assert len(out.read_text().splitlines()) == 1 + 3 * 2


@pytest.mark.parametrize(
    "args",
    [
        ["eigensweep"],  # model mismatch
        ["echo", "--set", "field.bogus=1"],
        ["echo", "--set", "schema=3"],
    ],
)
def test_config_errors_exit_2(echo_cfg, args, capsys):
    assert main(args[:1] + ["--config", str(echo_cfg)] + args[1:]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_syntax_error_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text("schema: 1\nfield: [1, 2\n")
    assert main(["echo", "--config", str(p)]) == EXIT_CONFIG
    assert "line" in capsys.readouterr().err


def test_io_errors_exit_4(tmp_path, echo_cfg):
    assert main(["echo", "--config", str(tmp_path / "missing.yaml")]) == EXIT_IO
    assert main(["echo", "--config", str(echo_cfg), "-o", str(tmp_path / "no" / "dir.csv")]) == EXIT_IO


def test_numerical_error_exit_3(echo_cfg, monkeypatch):
    def boom(cfg):
        raise InvariantViolation("trace drifted")

    monkeypatch.setattr("nvsim.cli.run", boom)
    assert main(["echo", "--config", str(echo_cfg)]) == EXIT_NUMERICAL
