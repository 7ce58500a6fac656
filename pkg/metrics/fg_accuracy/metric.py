import numpy as np
from sklearn.metrics import accuracy_score

from metrics.base_metric import EvalOutputs, Metric
from utils.common import print_colored

# Foreground accuracy: argmax of the foreground logits against y_f, over the
# samples whose audio and image share a class (y_b = 0).


class FgAccuracyMetric(Metric):
    """Foreground class accuracy."""

    def calculate(self, outputs: EvalOutputs) -> float:
        mask = outputs.foreground
        if outputs.fg_pred is None or not mask.any():
            return float("nan")
        truth = np.asarray(outputs.y_f)[mask]
        accuracy = accuracy_score(truth, np.asarray(outputs.fg_pred)[mask])

        if self.debug:
            print_colored(f"Foreground accuracy over {truth.size} samples: {accuracy}", "gray")

        return float(accuracy)
