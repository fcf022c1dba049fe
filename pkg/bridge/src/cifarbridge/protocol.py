"""Wire protocol helpers: newline-delimited JSON with base64 PPM payloads.

request : {"id": <uint64>, "ppm_b64": "<base64 of binary PPM P6 32x32 maxval 255>"}
response: {"id": <same>, "probs": [<10 floats, fixed label order>]}
error   : {"id": <same, or 0 when unrecoverable>, "error": "<message>"}

The bridge is deliberately standalone: it shares only the wire format
with the attack artifact, not code.
"""

from __future__ import annotations

import base64
import binascii
import json

import numpy as np

LABELS = (
    "airplane",
    "automobile",
    "bird",
    "cat",
    "deer",
    "dog",
    "frog",
    "horse",
    "ship",
    "truck",
)

INPUT_SIZE = 32


class RequestError(Exception):
    """Malformed request; carries the id to echo in the error response."""

    def __init__(self, message: str, request_id: int = 0):
        super().__init__(message)
        self.request_id = request_id


def decode_ppm(data: bytes) -> np.ndarray:
    """Parse a binary PPM (P6, maxval 255) into a (H, W, 3) uint8 array."""
    if data[:2] != b"P6":
        raise ValueError("not a binary PPM")
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PPM header")
        fields.append(int(data[start:pos]))
    width, height, maxval = fields
    if maxval != 255:
        raise ValueError(f"unsupported maxval {maxval}")
    pos += 1  # single whitespace after maxval
    expected = width * height * 3
    payload = data[pos : pos + expected]
    if len(payload) != expected:
        raise ValueError("truncated PPM data")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)


def parse_request(line: bytes) -> tuple[int, np.ndarray]:
    """Decode one request line into (id, 32x32x3 uint8 image)."""
    try:
        payload = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise RequestError(f"request is not JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise RequestError("request must be a JSON object")
    request_id = payload.get("id")
    if not isinstance(request_id, int) or request_id < 0:
        raise RequestError("missing or invalid 'id'")
    encoded = payload.get("ppm_b64")
    if not isinstance(encoded, str):
        raise RequestError("missing 'ppm_b64'", request_id)
    try:
        raw = base64.b64decode(encoded, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise RequestError(f"bad base64: {exc}", request_id) from exc
    try:
        image = decode_ppm(raw)
    except ValueError as exc:
        raise RequestError(f"bad PPM payload: {exc}", request_id) from exc
    if image.shape != (INPUT_SIZE, INPUT_SIZE, 3):
        raise RequestError(
            f"image must be {INPUT_SIZE}x{INPUT_SIZE}, got {image.shape[1]}x{image.shape[0]}",
            request_id,
        )
    return request_id, image


def response_line(request_id: int, probs) -> bytes:
    payload = {"id": request_id, "probs": [float(p) for p in probs]}
    return json.dumps(payload, separators=(",", ":")).encode("ascii") + b"\n"


def error_line(request_id: int, message: str) -> bytes:
    payload = {"id": request_id, "error": message}
    return json.dumps(payload, separators=(",", ":")).encode("ascii") + b"\n"
