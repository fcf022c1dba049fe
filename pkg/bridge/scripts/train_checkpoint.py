#!/usr/bin/env python3
"""Train the bundled bridge checkpoint on simulator captures.

The public CIFAR-10 corpus is not vendored here, so the convnet is
trained on labeled captures of the ten bundled fixture scenes under
baseline-style conditions: no projected light, varied shot noise, and
mild ambient jitter (standing in for repositioning between sessions).
Projected-light attacks are therefore out of distribution for the
model, matching the role of a classifier that never saw the rig.

Requires the attack artifact (lightattack) to be installed; it is a
training-time dependency only - the serving path never imports it.

Run:  python3 bridge/scripts/train_checkpoint.py [--out checkpoints/simcnn.pt]
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import torch
from torch import nn

BRIDGE_ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(BRIDGE_ROOT / "src"))
sys.path.insert(0, str(BRIDGE_ROOT.parent / "src"))

from cifarbridge.model import SmallConvNet, save_checkpoint
from cifarbridge.protocol import LABELS

from lightattack.fixtures import fixture_bundle
from lightattack.prng import SplitMix64, derive_seed
from lightattack.scene import SceneSpec, capture

TRAIN_PER_CLASS = 240
TEST_PER_CLASS = 60
SIGMAS = (0.005, 0.01, 0.02)


def synth_captures(class_index: int, count: int, seed_tag: int) -> np.ndarray:
    """Baseline captures with noise and ambient jitter, (count, 32, 32, 3)."""
    name = LABELS[class_index]
    bundle = fixture_bundle(name)
    rng = SplitMix64(derive_seed(0xB41D6E, class_index, seed_tag))
    images = np.empty((count, 32, 32, 3), dtype=np.uint8)
    for i in range(count):
        jitter = 0.9 + 0.2 * rng.uniform()
        ambient = tuple(min(1.0, a * jitter) for a in bundle.scene.ambient)
        scene = SceneSpec(bundle.scene.reflectance, ambient, class_index)
        sigma = SIGMAS[int(rng.uniform() * len(SIGMAS))]
        camera = replace(bundle.camera, shot_noise_sigma0=sigma)
        img = capture(scene, None, None, camera, rng.next_word())
        images[i] = img.data
    return images


def build_split(per_class: int, seed_tag: int):
    xs, ys = [], []
    for idx in range(len(LABELS)):
        xs.append(synth_captures(idx, per_class, seed_tag))
        ys.append(np.full(per_class, idx, dtype=np.int64))
    return np.concatenate(xs), np.concatenate(ys)


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default=str(BRIDGE_ROOT / "checkpoints" / "simcnn.pt"))
    parser.add_argument("--epochs", type=int, default=25)
    args = parser.parse_args()

    torch.manual_seed(0)
    print("generating training captures...")
    train_x, train_y = build_split(TRAIN_PER_CLASS, seed_tag=0)
    test_x, test_y = build_split(TEST_PER_CLASS, seed_tag=1)

    floats = train_x.astype(np.float32) / 255.0
    mean = floats.mean(axis=(0, 1, 2))
    std = np.maximum(floats.std(axis=(0, 1, 2)), 1e-3)

    def to_tensor(images):
        x = torch.from_numpy(images.astype(np.float32) / 255.0).permute(0, 3, 1, 2)
        return (x - torch.tensor(mean).view(1, 3, 1, 1)) / torch.tensor(std).view(
            1, 3, 1, 1
        )

    x_train, y_train = to_tensor(train_x), torch.from_numpy(train_y)
    x_test, y_test = to_tensor(test_x), torch.from_numpy(test_y)

    model = SmallConvNet(len(LABELS))
    optimizer = torch.optim.Adam(model.parameters(), lr=1e-3)
    loss_fn = nn.CrossEntropyLoss()

    batch = 64
    for epoch in range(args.epochs):
        model.train()
        permutation = torch.randperm(len(x_train))
        total = 0.0
        for start in range(0, len(x_train), batch):
            idx = permutation[start : start + batch]
            optimizer.zero_grad()
            loss = loss_fn(model(x_train[idx]), y_train[idx])
            loss.backward()
            optimizer.step()
            total += loss.item() * len(idx)
        if (epoch + 1) % 5 == 0:
            model.eval()
            with torch.no_grad():
                acc = (model(x_test).argmax(1) == y_test).float().mean()
            print(f"epoch {epoch + 1}: loss={total / len(x_train):.4f} test_acc={acc:.4f}")

    model.eval()
    with torch.no_grad():
        test_acc = float((model(x_test).argmax(1) == y_test).float().mean())
        train_acc = float((model(x_train).argmax(1) == y_train).float().mean())
    print(f"final: train_acc={train_acc:.4f} test_acc={test_acc:.4f}")

    save_checkpoint(
        args.out,
        model,
        mean,
        std,
        meta={
            "train_per_class": TRAIN_PER_CLASS,
            "test_per_class": TEST_PER_CLASS,
            "test_accuracy": test_acc,
            "data": "simulator baseline captures, noise + ambient jitter",
        },
    )
    print(f"saved {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
