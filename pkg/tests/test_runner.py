import time

import numpy as np
import pytest

from nvsim import __version__
from nvsim.config import parse_config
from nvsim.eseem import echo_unitary_exact
from nvsim.hamiltonian import FieldConfig, solve_electron
from nvsim.output import emit
from nvsim.runner import run, worker_count
from nvsim.sensitivity import ReadoutParams, eta_nuclear, eta_star_nuclear


def cfg(text):
    return parse_config("schema: 1\n" + text)


def test_eigensweep_single_point(consts):
    t = run(cfg("model: eigensweep\nfield: {magnitude: 65, theta: {start: 89.5, stop: 89.5}}\n"))
    assert len(t) == 1
    e = solve_electron(consts, FieldConfig(65.0, 89.5))
    assert t.column("E_minus")[0] == pytest.approx(e.energy("minus"))
    assert t.column("Sz_minus")[0] == pytest.approx(e.expectation("minus")[2])
    assert t.column("eps")[0] == pytest.approx(e.hybridization_eps)
    assert t.metadata["model"] == "eigensweep" and t.metadata["version"] == __version__


def test_echo_closed_performance_and_order():
    c = cfg("model: echo_closed\nfield: {magnitude: 65, theta: {start: 89, stop: 91, count: 101}}\n"
            "tau: {start: 0, stop: 3, count: 301}\n")
    start = time.perf_counter()
    t = run(c)
    assert time.perf_counter() - start < 10.0
    assert len(t) == 101 * 301
    th, tau = t.column("theta_B"), t.column("tau")
    assert np.all(th[:301] == 89.0) and th[301] == pytest.approx(89.02)
    np.testing.assert_allclose(tau[:301], np.linspace(0, 3, 301))
    assert np.all((t.column("P") >= 0) & (t.column("P") <= 1 + 1e-12))


def test_echo_exact_values(consts):
    t = run(cfg("model: echo_exact\nfield: {magnitude: 65, theta: {start: 89, stop: 90, count: 2}}\n"
                "tau: {start: 0, stop: 4, count: 3}\ntransition: plus_zero\n"))
    ref = echo_unitary_exact(consts, FieldConfig(65.0, 90.0), "plus_zero", [0.0, 2.0, 4.0])
    np.testing.assert_allclose(t.column("P")[3:], ref, atol=1e-14)
    assert t.metadata["model"] == "unitary_exact"


def test_sensitivity_model_at_figure_delays(consts):
    t = run(cfg("model: sensitivity\nfield: {magnitude: 65, theta: {start: 89.5, stop: 89.9, count: 3}}\n"
                "tau: {start: 2.2, stop: 11, count: 2}\nreadout: {contrast_C: 0.15}\n"
                "conventional: {eta_Bz_parallel: [300, 800]}\n"))
    assert t.columns[-2:] == ["eta_con_300nT", "eta_con_800nT"]
    r = ReadoutParams(contrast_C=0.15)
    for row in t.rows:
        f = FieldConfig(65.0, row[0])
        assert row[2] == pytest.approx(eta_nuclear(consts, f, r, row[1]))
        assert row[3] == pytest.approx(eta_star_nuclear(consts, f, r, row[1]))
    np.testing.assert_allclose(t.column("eta_con_800nT") / t.column("eta_con_300nT"), 800 / 300)


def test_noise_models():
    t = run(cfg("model: noise_variance\nfield: {magnitude: 65, theta: {start: 89, stop: 91, count: 5}}\n"
                "noise: {kind: dipolar, u: [1, 0, 1], DS: 0.5}\n"))
    assert t.columns == ["theta_B", "var_minus_zero", "var_plus_zero"]
    assert np.all(t.rows[:, 1:] > 0)
    t = run(cfg("model: optimal_angle\nfield: {magnitude: 65}\nnoise: {kind: line, angle: -45}\n"))
    assert t.column("theta_opt")[0] == pytest.approx(90.231, abs=2e-3)
    assert t.column("theta_opt")[1] == pytest.approx(89.532, abs=2e-3)


def test_lindblad_model_without_noise_is_unitary(consts):
    t = run(cfg("model: echo_lindblad\nfield: {magnitude: 65, theta: {start: 89.5, stop: 89.5}}\n"
                "tau: {start: 0, stop: 6, count: 4}\nnoise: {kind: none}\n"))
    ref = echo_unitary_exact(consts, FieldConfig(65.0, 89.5), "minus_zero", [0, 2, 4, 6])
    np.testing.assert_allclose(t.column("P"), ref, atol=1e-9)


def test_hyperfine_model():
    t = run(cfg("model: hyperfine\nfield: {magnitude: 65, theta: {start: 0, stop: 90, count: 4}}\n"))
    assert np.isnan(t.column("gamma_theta")[0])
    assert t.column("omega_zero")[0] == pytest.approx(0.4316e-3 * 65)


def test_threads_do_not_change_output(monkeypatch):
    c = cfg("model: hyperfine\nfield: {magnitude: 93, theta: {start: 88, stop: 92, count: 21}}\n")
    monkeypatch.setenv("NV_SIM_THREADS", "1")
    serial = emit(run(c), "json")
    monkeypatch.setenv("NV_SIM_THREADS", "4")
    assert worker_count() == 4
    assert emit(run(c), "json") == serial
    monkeypatch.setenv("NV_SIM_THREADS", "0")
    assert worker_count() >= 1


CONFIG_DIR = __import__("pathlib").Path(__file__).resolve().parents[1] / "configs"


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.yaml")), ids=lambda p: p.name)
def test_shipped_configs_parse(path):
    c = parse_config(path.read_text())
    assert c.model in path.read_text()
