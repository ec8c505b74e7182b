import math

import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from cascadelab.service import create_app
from cascadelab.cli import main as cli_main


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "ok"
    assert "tail" in body["experiments"]


def test_spectral_endpoint_values(client):
    r = client.post("/spectral/evaluate", json={
        "s_values": [0.0, 0.5, 1.0, 2.0],
        "gamma_values": [2.0],
        "zeta0_values": [math.log(2) / math.log(3)],
        "alpha": 0.5,
        "beta": 0.5,
    })
    assert r.status_code == 200
    body = r.json()
    assert body["phi"] == pytest.approx([0.0, 0.75, 1.0, 0.0], abs=1e-12)
    assert body["phi_tilde"][1] == pytest.approx(0.25, abs=1e-12)
    assert body["tau_star"][0]["value"] == pytest.approx(1.0, abs=1e-10)
    assert body["kpz"][0] == pytest.approx(0.392488480414945, abs=1e-9)
    assert body["kpz_dual"][0] == pytest.approx(0.1962442402074725, abs=1e-9)
    assert body["q_beta"] == pytest.approx(4.0, abs=1e-9)


def test_spectral_endpoint_rejects_bad_model(client):
    r = client.post("/spectral/evaluate", json={"model": {"kind": "cauchy"},
                                                "s_values": [1.0]})
    assert r.status_code == 422


def test_experiment_endpoint_runs_and_reports(client):
    r = client.post("/experiments/run", json={
        "experiment": "normalization", "seed": 5, "beta": 0.5,
        "n_list": [8], "replicas": 80, "threads": 1,
    })
    assert r.status_code == 200
    body = r.json()
    assert body["experiment"] == "normalization"
    assert body["config"]["seed"] == 5
    assert isinstance(body["passed"], bool)
    assert len(body["fingerprint"]) == 64
    # identical request reproduces the fingerprint
    r2 = client.post("/experiments/run", json={
        "experiment": "normalization", "seed": 5, "beta": 0.5,
        "n_list": [8], "replicas": 80, "threads": 1,
    })
    assert r2.json()["fingerprint"] == body["fingerprint"]


def test_experiment_endpoint_validates(client):
    r = client.post("/experiments/run", json={"experiment": "nope"})
    assert r.status_code == 422
    r = client.post("/experiments/run", json={"experiment": "tail", "replicas": 0})
    assert r.status_code == 422
    r = client.post("/experiments/run", json={"experiment": "normalization",
                                              "n_list": [30], "replicas": 5,
                                              "threads": 8})
    assert r.status_code == 422  # memory guard refuses


def test_verify_endpoint_quick_subset(client):
    r = client.post("/verify", json={"profile": "quick", "threads": 1, "only": ["A1"]})
    assert r.status_code == 200
    body = r.json()
    assert body["all_passed"] is True
    assert body["criteria"][0]["cid"] == "A1"
    assert "A1" in body["matrix"]


# --- CLI (thin client over the same machinery) -----------------------------------

def test_cli_verify_only_a1_exit_zero():
    res = CliRunner().invoke(cli_main, ["verify", "--only", "A1", "--threads", "1"])
    assert res.exit_code == 0
    assert "A1   PASS" in res.output


def test_cli_simulate_runs_and_writes(tmp_path):
    res = CliRunner().invoke(cli_main, [
        "simulate", "--kind", "normalization", "--beta", "0.5", "--n", "8",
        "--replicas", "60", "--seed", "4", "--threads", "1",
        "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    assert (tmp_path / "normalization_report.json").exists()


def test_cli_rejects_bad_config():
    res = CliRunner().invoke(cli_main, ["tail", "--replicas", "0", "--threads", "1"])
    assert res.exit_code != 0


def test_cli_config_file_used(tmp_path):
    ini = tmp_path / "lab.ini"
    ini.write_text("[normalization]\nreplicas = 40\nn_list = 7\nbeta = 0.5\nseed = 12\n")
    res = CliRunner().invoke(cli_main, [
        "simulate", "--config", str(ini), "--threads", "1"])
    assert res.exit_code == 0, res.output
    assert '"replicas": 40' in res.output


def test_cli_wavefront_inf(tmp_path):
    res = CliRunner().invoke(cli_main, [
        "wavefront", "--alpha", "inf", "--iterations", "12",
        "--out", str(tmp_path), "--threads", "1"])
    assert res.exit_code == 0, res.output
    assert (tmp_path / "wavefront_report.json").exists()


def test_cli_failing_check_exits_nonzero(tmp_path):
    # tiny max-mass run: monotonicity checks cannot hold at this budget
    res = CliRunner().invoke(cli_main, [
        "simulate", "--kind", "maxmass", "--n", "6", "--n", "8",
        "--replicas", "4", "--seed", "2", "--threads", "1"])
    assert res.exit_code == 1
