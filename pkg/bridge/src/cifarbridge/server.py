"""Bridge server: answer classifier-protocol requests over stdio or TCP.

One request is in flight at a time and responses are emitted in request
order; malformed requests get an error response and the loop keeps
serving. Parallelism is achieved by running several bridge processes.
"""

from __future__ import annotations

import argparse
import base64
import json
import socket
import sys
from pathlib import Path

from .model import Classifier
from .protocol import RequestError, error_line, parse_request, response_line

DEFAULT_CHECKPOINT = Path(__file__).resolve().parents[2] / "checkpoints" / "simcnn.pt"


def handle_line(classifier: Classifier, line: bytes) -> bytes:
    try:
        request_id, image = parse_request(line)
    except RequestError as exc:
        return error_line(exc.request_id, str(exc))
    try:
        probs = classifier.predict(image)
    except Exception as exc:  # inference must never kill the loop
        return error_line(request_id, f"inference failed: {exc}")
    return response_line(request_id, probs)


def serve_stream(classifier: Classifier, reader, writer) -> None:
    for line in reader:
        if not line.strip():
            continue
        writer.write(handle_line(classifier, line))
        writer.flush()


def serve_stdio(classifier: Classifier) -> None:
    serve_stream(classifier, sys.stdin.buffer, sys.stdout.buffer)


def serve_tcp(classifier: Classifier, host: str, port: int, ready_out=None) -> None:
    with socket.socket() as sock:
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((host, port))
        sock.listen(1)
        actual = sock.getsockname()[1]
        if ready_out is not None:
            print(f"listening on {host}:{actual}", file=ready_out, flush=True)
        while True:
            conn, _ = sock.accept()
            with conn:
                reader = conn.makefile("rb")
                writer = conn.makefile("wb")
                try:
                    serve_stream(classifier, reader, writer)
                except (BrokenPipeError, ConnectionResetError):
                    pass


def selftest(classifier: Classifier, fixtures_dir: Path) -> int:
    """Run the protocol conformance fixtures; 0 on success."""
    failures = []

    request = (fixtures_dir / "bridge_request.jsonl").read_bytes()
    reply = handle_line(classifier, request)
    payload = json.loads(reply)
    if payload.get("id") != json.loads(request)["id"]:
        failures.append("response id does not echo the request id")
    probs = payload.get("probs")
    if not isinstance(probs, list) or len(probs) != 10:
        failures.append(f"expected 10 probabilities, got {probs!r}")
    elif any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-6:
        failures.append(f"probabilities not a distribution (sum {sum(probs)!r})")

    # identical request -> identical response (stateless, eval mode)
    if handle_line(classifier, request) != reply:
        failures.append("bridge is not deterministic across identical requests")

    for line in (fixtures_dir / "bridge_malformed.jsonl").read_bytes().splitlines():
        answer = json.loads(handle_line(classifier, line + b"\n"))
        if "error" not in answer:
            failures.append(f"malformed request was accepted: {line[:40]!r}")

    # wrong image size must produce an error naming the id
    small_ppm = b"P6\n16 16\n255\n" + bytes(16 * 16 * 3)
    wrong = json.dumps(
        {"id": 11, "ppm_b64": base64.b64encode(small_ppm).decode()}
    ).encode()
    answer = json.loads(handle_line(classifier, wrong + b"\n"))
    if answer.get("id") != 11 or "error" not in answer:
        failures.append("16x16 request did not yield an id-matched error")

    for failure in failures:
        print(f"selftest: FAIL: {failure}", file=sys.stderr)
    print(f"selftest: {'PASS' if not failures else 'FAIL'}", file=sys.stderr)
    return 0 if not failures else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cifarbridge",
        description="Serve a CIFAR-10 CNN over the classifier bridge protocol.",
    )
    parser.add_argument(
        "--listen",
        default="stdio",
        help="stdio (default) or tcp:HOST:PORT (port 0 picks a free port)",
    )
    parser.add_argument(
        "--checkpoint",
        default=str(DEFAULT_CHECKPOINT),
        help="model checkpoint path",
    )
    parser.add_argument("--device", default="cpu", help="torch device selector")
    parser.add_argument(
        "--selftest",
        metavar="FIXTURES_DIR",
        help="run the protocol conformance fixtures from this directory and exit",
    )
    args = parser.parse_args(argv)

    classifier = Classifier(args.checkpoint, args.device)

    if args.selftest:
        return selftest(classifier, Path(args.selftest))

    if args.listen == "stdio":
        serve_stdio(classifier)
        return 0
    if args.listen.startswith("tcp:"):
        _, host, port = args.listen.split(":")
        serve_tcp(classifier, host, int(port), ready_out=sys.stderr)
        return 0
    parser.error(f"unknown --listen value {args.listen!r}")
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
