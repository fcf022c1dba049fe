"""CIFAR-10 CNN inference bridge for the classifier wire protocol."""

from .model import Classifier, SmallConvNet
from .protocol import LABELS, parse_request, response_line

__version__ = "0.1.0"
