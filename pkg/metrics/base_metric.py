from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass
class EvalOutputs:
    """Per-sample labels and model outputs over one evaluation set.

    p_bg is NaN where the model has no background head (unimodal evaluation);
    the pooled block-K shared embeddings are None when shared tokens are off.
    """

    y_b: np.ndarray
    y_f: np.ndarray
    p_bg: np.ndarray
    fg_pred: Optional[np.ndarray]
    v_embed: Optional[np.ndarray] = None
    a_embed: Optional[np.ndarray] = None

    @property
    def foreground(self):
        return np.asarray(self.y_b) == 0


class Metric(ABC):
    """Base class for all evaluation metrics."""

    def __init__(self, debug=False):
        self.debug = debug

    @abstractmethod
    def calculate(self, outputs: EvalOutputs) -> float:
        """Calculate the metric; NaN when the outputs cannot support it."""
