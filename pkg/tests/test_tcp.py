"""Members in separate processes, attached over TCP."""

import io
import os
import socket
import subprocess
import sys
import time

import pytest

from gridsim.cli import EXIT_OK, main

SRC = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src")
CLOUD = ["--set", "noOfUsers=4", "--set", "noOfDatacenters=2", "--set", "noOfHosts=4",
         "--set", "noOfVms=12", "--set", "noOfCloudlets=30", "--set", "noOfExecutions=3"]


def _free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def _wait_listening(port, proc, timeout=20.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if proc.poll() is not None:
            raise RuntimeError(f"member process exited with {proc.returncode}")
        try:
            socket.create_connection(("127.0.0.1", port), timeout=0.2).close()
            return
        except OSError:
            time.sleep(0.05)
    raise TimeoutError(f"member on port {port} never listened")


@pytest.fixture
def remote_members():
    procs, endpoints = [], []
    env = dict(os.environ, PYTHONPATH=SRC + os.pathsep + os.environ.get("PYTHONPATH", ""))
    try:
        for _ in range(2):
            port = _free_port()
            proc = subprocess.Popen([sys.executable, "-m", "gridsim.datagrid.tcp", "--listen",
                                     f"127.0.0.1:{port}", "--cluster", "main"],
                                    env=env, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
            procs.append(proc)
            _wait_listening(port, proc)
            endpoints.append(f"127.0.0.1:{port}")
        yield ",".join(endpoints)
    finally:
        for proc in procs:
            proc.terminate()
        for proc in procs:
            proc.wait(timeout=10)


def _run(argv):
    out = io.StringIO()
    return main(argv, stdout=out), out.getvalue()


def test_cloud_report_over_tcp_matches_in_process(tmp_path, remote_members):
    local, remote = tmp_path / "local.csv", tmp_path / "remote.csv"
    assert _run(["run-cloud", *CLOUD, "--out", str(local)])[0] == EXIT_OK
    code, out = _run(["run-cloud", *CLOUD, "--tcp", remote_members, "--out", str(remote)])
    assert code == EXIT_OK
    assert out.split(",")[0] == "3"
    assert remote.read_bytes() == local.read_bytes()


def test_mapreduce_over_tcp(tmp_path, remote_members, corpus_dir):
    local = tmp_path / "local.csv"
    remote = tmp_path / "remote.csv"
    base = ["run-mapreduce", "--set", f"loadFolder={corpus_dir}", "--set", "noOfExecutions=3"]
    assert _run([*base, "--out", str(local)])[0] == EXIT_OK
    code, out = _run([*base, "--tcp", remote_members, "--out", str(remote)])
    assert code == EXIT_OK and out.startswith("map_invocations=3 ")
    assert remote.read_text() == local.read_text()


def test_too_few_endpoints_is_invalid(remote_members):
    first = remote_members.split(",")[0]
    assert _run(["run-cloud", *CLOUD, "--tcp", first])[0] == 2
