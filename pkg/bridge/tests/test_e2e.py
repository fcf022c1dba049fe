"""End-to-end: the attack artifact drives the bridge over TCP."""

import re
import subprocess
import sys
import time

import pytest

from conftest import REPO_ROOT


@pytest.fixture()
def bridge_proc(checkpoint_path):
    proc = subprocess.Popen(
        [
            sys.executable,
            "-m",
            "cifarbridge",
            "--listen",
            "tcp:127.0.0.1:0",
            "--checkpoint",
            str(checkpoint_path),
        ],
        stderr=subprocess.PIPE,
    )
    line = proc.stderr.readline().decode()
    match = re.search(r"listening on 127\.0\.0\.1:(\d+)", line)
    assert match, f"bridge did not start: {line!r}"
    yield f"127.0.0.1:{match.group(1)}"
    proc.terminate()
    proc.wait(timeout=10)


def test_attack_run_against_bridge(bridge_proc, tmp_path):
    fixtures = tmp_path / "fixtures"
    subprocess.run(
        [sys.executable, "-m", "lightattack.fixtures", str(fixtures)],
        check=True,
        cwd=REPO_ROOT,
    )
    config = tmp_path / "bridge_attack.cfg"
    config.write_text(
        f"scene = {fixtures}/airplane.cfg\n"
        "classifier = external\n"
        f"endpoint = {bridge_proc}\n"
        "captures_per_condition = 4\n"
        "master_seed = 3\n"
        "de.population_size = 8\n"
        "de.generations = 2\n"
    )
    out = tmp_path / "run"
    start = time.time()
    result = subprocess.run(
        [
            sys.executable,
            "-m",
            "lightattack.cli",
            "attack",
            "--config",
            str(config),
            "--out",
            str(out),
        ],
        cwd=REPO_ROOT,
        capture_output=True,
        text=True,
        timeout=300,
    )
    assert result.returncode == 0, result.stderr
    report = (out / "report.txt").read_text()
    assert "Baseline" in report and "Diff Evolution" in report
    lines = (out / "records.jsonl").read_text().splitlines()
    assert len(lines) == 4 * 3 + 8 * 3  # 3 plain conditions + DE budget
    print(f"e2e attack via bridge finished in {time.time() - start:.1f}s")
    print(report)
