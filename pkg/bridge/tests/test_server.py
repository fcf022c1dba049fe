import base64
import json
import subprocess
import sys

import pytest

from cifarbridge.model import Classifier
from cifarbridge.server import handle_line, selftest


@pytest.fixture(scope="module")
def classifier(checkpoint_path):
    return Classifier(str(checkpoint_path))


def make_request(request_id, value=0, size=32):
    ppm = f"P6\n{size} {size}\n255\n".encode() + bytes([value]) * (size * size * 3)
    return (
        json.dumps({"id": request_id, "ppm_b64": base64.b64encode(ppm).decode()}).encode()
        + b"\n"
    )


class TestHandleLine:
    def test_valid_request(self, classifier):
        payload = json.loads(handle_line(classifier, make_request(7)))
        assert payload["id"] == 7
        probs = payload["probs"]
        assert len(probs) == 10
        assert min(probs) >= 0.0
        assert abs(sum(probs) - 1.0) <= 1e-6

    def test_deterministic(self, classifier):
        line = make_request(3, value=120)
        assert handle_line(classifier, line) == handle_line(classifier, line)

    def test_wrong_size_is_error_with_id(self, classifier):
        payload = json.loads(handle_line(classifier, make_request(5, size=16)))
        assert payload["id"] == 5
        assert "error" in payload

    def test_garbage_is_error(self, classifier):
        payload = json.loads(handle_line(classifier, b"garbage\n"))
        assert payload["id"] == 0
        assert "error" in payload


class TestSelftest:
    def test_conformance_fixtures_pass(self, classifier, conformance_dir):
        assert selftest(classifier, conformance_dir) == 0


class TestStdioProcess:
    def test_serves_in_order_and_survives_errors(self, checkpoint_path):
        proc = subprocess.Popen(
            [
                sys.executable,
                "-m",
                "cifarbridge",
                "--listen",
                "stdio",
                "--checkpoint",
                str(checkpoint_path),
            ],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
        )
        try:
            lines = [make_request(1), b"broken\n", make_request(2, value=200)]
            proc.stdin.write(b"".join(lines))
            proc.stdin.flush()
            replies = [json.loads(proc.stdout.readline()) for _ in range(3)]
        finally:
            proc.stdin.close()
            proc.wait(timeout=10)
        assert replies[0]["id"] == 1 and "probs" in replies[0]
        assert "error" in replies[1]
        assert replies[2]["id"] == 2 and "probs" in replies[2]
