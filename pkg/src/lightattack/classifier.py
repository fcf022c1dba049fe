"""Closed-world probability oracles over the 10 CIFAR labels.

Three pieces: the label set / scores containers, a deterministic
centroid-softmax classifier that needs no learned weights, and a client
for external classifiers speaking the newline-delimited JSON bridge
protocol (one request, one response, matching ids).
"""

from __future__ import annotations

import base64
import json
import shlex
import socket
import subprocess
from dataclasses import dataclass

import numpy as np

from .imaging import Image8, dequantize, write_ppm

DEFAULT_LABELS = (
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
DEFAULT_TEMPERATURE = 50.0


class ClassifierError(Exception):
    """Base class for classifier-layer failures."""


class MissingClassExamples(ClassifierError):
    """fit_centroids needs at least one example for every label."""


class WrongImageSize(ClassifierError):
    """Classifier inputs must be 32x32."""


class IndexOutOfRange(ClassifierError):
    """Label index outside the label set."""


class TransportError(ClassifierError):
    """Could not reach or talk to the external classifier."""


class ProtocolViolation(ClassifierError):
    """External classifier response violates the wire contract."""


class NormalizationError(ClassifierError):
    """External probabilities do not sum close enough to 1."""


@dataclass(frozen=True)
class LabelSet:
    """Ordered, unique class names; order is significant everywhere."""

    labels: tuple[str, ...] = DEFAULT_LABELS

    def __post_init__(self):
        labels = tuple(self.labels)
        if len(labels) != len(set(labels)):
            raise ValueError("label names must be unique")
        if not labels:
            raise ValueError("label set must not be empty")
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)

    def index_of(self, label: str | int) -> int:
        """Resolve a label name or integer index to an index."""
        if isinstance(label, int):
            if not 0 <= label < len(self.labels):
                raise IndexOutOfRange(f"label index {label} out of range")
            return label
        try:
            return self.labels.index(label)
        except ValueError:
            raise IndexOutOfRange(f"unknown label {label!r}") from None


@dataclass(frozen=True)
class ClassScores:
    """Probability vector aligned with a LabelSet; sums to 1 within 1e-9."""

    probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        if any(p < 0.0 or p > 1.0 for p in probs):
            raise ValueError("probabilities must lie in [0, 1]")
        total = sum(probs)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total!r}, expected 1")
        object.__setattr__(self, "probs", probs)


def true_class_probability(scores: ClassScores, true_class: int) -> float:
    """Probability the classifier assigns to the configured true class."""
    if not 0 <= true_class < len(scores.probs):
        raise IndexOutOfRange(f"true_class {true_class} out of range")
    return scores.probs[true_class]


@dataclass(frozen=True)
class CentroidModel:
    """One mean capture per class plus a softmax temperature."""

    labels: LabelSet
    centroids: np.ndarray  # (n_classes, 32*32*3) dequantized means
    temperature: float

    def __post_init__(self):
        arr = np.asarray(self.centroids, dtype=np.float64)
        if arr.shape != (len(self.labels), INPUT_SIZE * INPUT_SIZE * 3):
            raise ValueError(f"centroid array has shape {arr.shape}")
        if not (np.isfinite(self.temperature) and self.temperature > 0.0):
            raise ValueError("temperature must be finite and positive")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "centroids", arr)


def _check_input_size(img: Image8) -> None:
    if img.height != INPUT_SIZE or img.width != INPUT_SIZE:
        raise WrongImageSize(
            f"classifier input must be {INPUT_SIZE}x{INPUT_SIZE}, "
            f"got {img.height}x{img.width}"
        )


def fit_centroids(
    examples: list[tuple[Image8, str | int]],
    temperature: float = DEFAULT_TEMPERATURE,
    labels: LabelSet = LabelSet(),
) -> CentroidModel:
    """Per-class mean of the dequantized examples."""
    sums = np.zeros((len(labels), INPUT_SIZE * INPUT_SIZE * 3))
    counts = np.zeros(len(labels), dtype=np.int64)
    for img, label in examples:
        _check_input_size(img)
        idx = labels.index_of(label)
        sums[idx] += dequantize(img).data.ravel()
        counts[idx] += 1
    missing = [labels.labels[i] for i in range(len(labels)) if counts[i] == 0]
    if missing:
        raise MissingClassExamples(f"no examples for: {', '.join(missing)}")
    return CentroidModel(labels, sums / counts[:, None], temperature)


def predict_centroid(model: CentroidModel, img: Image8) -> ClassScores:
    """Softmax over ``-||x - centroid_c||^2 / temperature``."""
    _check_input_size(img)
    x = dequantize(img).data.ravel()
    diffs = model.centroids - x
    logits = -(diffs * diffs).sum(axis=1) / model.temperature
    logits -= logits.max()
    weights = np.exp(logits)
    return ClassScores(tuple((weights / weights.sum()).tolist()))


def save_model(path, model: CentroidModel) -> None:
    """Write a centroid model as JSON (labels, temperature, centroids)."""
    payload = {
        "labels": list(model.labels.labels),
        "temperature": model.temperature,
        "centroids": [row.tolist() for row in model.centroids],
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(payload, fh, separators=(",", ":"))
        fh.write("\n")


def load_model(path) -> CentroidModel:
    with open(path, "r", encoding="ascii") as fh:
        payload = json.load(fh)
    return CentroidModel(
        LabelSet(tuple(payload["labels"])),
        np.asarray(payload["centroids"], dtype=np.float64),
        float(payload["temperature"]),
    )


# --- bridge wire protocol -------------------------------------------------
#
# request : {"id": <uint64>, "ppm_b64": "<base64 of 32x32 P6 PPM>"} + "\n"
# response: {"id": <same>, "probs": [<10 floats>]} + "\n"
# error   : {"id": <same>, "error": "<message>"} + "\n"


def encode_request(request_id: int, img: Image8) -> bytes:
    """Serialize one classification request line."""
    _check_input_size(img)
    ppm_b64 = base64.b64encode(write_ppm(img)).decode("ascii")
    line = json.dumps(
        {"id": request_id, "ppm_b64": ppm_b64}, separators=(",", ":")
    )
    return line.encode("ascii") + b"\n"


def decode_response(
    line: bytes, expected_id: int, n_labels: int = len(DEFAULT_LABELS)
) -> ClassScores:
    """Parse and validate one response line against the sent request id."""
    try:
        payload = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolViolation(f"response is not JSON: {exc}") from exc
    if not isinstance(payload, dict) or "id" not in payload:
        raise ProtocolViolation("response missing 'id'")
    if payload["id"] != expected_id:
        raise ProtocolViolation(
            f"response id {payload['id']!r} does not match request {expected_id}"
        )
    if "error" in payload:
        raise ProtocolViolation(f"classifier error: {payload['error']}")
    probs = payload.get("probs")
    if not isinstance(probs, list) or len(probs) != n_labels:
        raise ProtocolViolation(
            f"expected {n_labels} probabilities, got {probs!r}"
        )
    try:
        values = [float(p) for p in probs]
    except (TypeError, ValueError) as exc:
        raise ProtocolViolation(f"non-numeric probability: {exc}") from exc
    if any(p < 0.0 for p in values):
        raise ProtocolViolation("negative probability in response")
    total = sum(values)
    if abs(total - 1.0) > 1e-3:
        raise NormalizationError(f"probabilities sum to {total!r}")
    if abs(total - 1.0) > 1e-9:
        values = [p / total for p in values]
    return ClassScores(tuple(values))


class BridgeClient:
    """Blocking client with one in-flight request per connection.

    Endpoints: ``host:port`` (TCP) or ``cmd:<command line>`` (spawn the
    command and speak the protocol over its stdin/stdout).
    """

    def __init__(self, endpoint: str, n_labels: int = len(DEFAULT_LABELS)):
        self._n_labels = n_labels
        self._next_id = 1
        self._proc = None
        self._sock = None
        try:
            if endpoint.startswith("cmd:"):
                self._proc = subprocess.Popen(
                    shlex.split(endpoint[len("cmd:") :]),
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                )
                self._reader = self._proc.stdout
                self._writer = self._proc.stdin
            else:
                host, _, port = endpoint.rpartition(":")
                if not host or not port.isdigit():
                    raise TransportError(f"bad endpoint {endpoint!r}")
                self._sock = socket.create_connection((host, int(port)), timeout=30)
                self._reader = self._sock.makefile("rb")
                self._writer = self._sock.makefile("wb")
        except (OSError, ValueError) as exc:
            raise TransportError(f"cannot open {endpoint!r}: {exc}") from exc

    def predict(self, img: Image8) -> ClassScores:
        request_id = self._next_id
        self._next_id += 1
        try:
            self._writer.write(encode_request(request_id, img))
            self._writer.flush()
            line = self._reader.readline()
        except (OSError, ValueError, BrokenPipeError) as exc:
            raise TransportError(f"bridge connection failed: {exc}") from exc
        if not line:
            raise TransportError("bridge closed the connection")
        return decode_response(line, request_id, self._n_labels)

    def close(self) -> None:
        for stream in (getattr(self, "_writer", None), getattr(self, "_reader", None)):
            try:
                if stream is not None:
                    stream.close()
            except OSError:
                pass
        if self._sock is not None:
            self._sock.close()
        if self._proc is not None:
            self._proc.terminate()
            self._proc.wait(timeout=10)

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def predict_external(endpoint: str, img: Image8) -> ClassScores:
    """One-shot prediction over a fresh connection."""
    with BridgeClient(endpoint) as client:
        return client.predict(img)
