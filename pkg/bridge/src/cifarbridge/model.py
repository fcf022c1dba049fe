"""Small CIFAR-10-class CNN and checkpoint handling.

The architecture is a plain three-block convnet; any checkpoint with
matching keys works. Input normalization (per-channel mean/std) ships
inside the checkpoint so the wire payload stays raw 8-bit PPM.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .protocol import LABELS


class SmallConvNet(nn.Module):
    def __init__(self, n_classes: int = 10):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(3, 16, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),  # 16x16
            nn.Conv2d(16, 32, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),  # 8x8
            nn.Conv2d(32, 64, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),  # 4x4
        )
        self.classifier = nn.Linear(64 * 4 * 4, n_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.features(x)
        return self.classifier(torch.flatten(x, 1))


class Classifier:
    """Checkpoint-backed inference: uint8 image in, probabilities out."""

    def __init__(self, checkpoint_path: str, device: str = "cpu"):
        payload = torch.load(checkpoint_path, map_location=device, weights_only=True)
        labels = tuple(payload.get("labels", LABELS))
        if labels != LABELS:
            raise ValueError("checkpoint label order does not match the protocol")
        self.device = torch.device(device)
        self.mean = torch.tensor(payload["mean"], dtype=torch.float32).view(1, 3, 1, 1)
        self.std = torch.tensor(payload["std"], dtype=torch.float32).view(1, 3, 1, 1)
        self.model = SmallConvNet(len(labels)).to(self.device)
        self.model.load_state_dict(payload["state_dict"])
        self.model.eval()

    @torch.no_grad()
    def predict(self, image: np.ndarray) -> list[float]:
        x = torch.from_numpy(image.astype(np.float32) / 255.0)
        x = x.permute(2, 0, 1).unsqueeze(0)
        x = (x - self.mean) / self.std
        logits = self.model(x.to(self.device))
        probs = torch.softmax(logits[0], dim=0)
        return [float(p) for p in probs]


def save_checkpoint(path, model: SmallConvNet, mean, std, meta=None) -> None:
    torch.save(
        {
            "labels": list(LABELS),
            "state_dict": model.state_dict(),
            "mean": [float(m) for m in mean],
            "std": [float(s) for s in std],
            "meta": dict(meta or {}),
        },
        path,
    )
