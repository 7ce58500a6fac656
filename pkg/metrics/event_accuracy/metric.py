import numpy as np
from sklearn.metrics import accuracy_score

from metrics.base_metric import EvalOutputs, Metric
from metrics.bg_accuracy.configs import BG_THRESHOLD

BACKGROUND = -1

# Event accuracy treats background as one more class: a sample is predicted
# background when p_bg >= 0.5, otherwise the argmax foreground class.


class EventAccuracyMetric(Metric):
    """Joint background/foreground label accuracy over every sample."""

    def calculate(self, outputs: EvalOutputs) -> float:
        p_bg = np.asarray(outputs.p_bg, dtype=np.float64)
        if outputs.fg_pred is None or p_bg.size == 0 or np.isnan(p_bg).any():
            return float("nan")
        predicted = np.where(p_bg >= BG_THRESHOLD, BACKGROUND, outputs.fg_pred)
        truth = np.where(np.asarray(outputs.y_b) == 1, BACKGROUND, outputs.y_f)
        return float(accuracy_score(truth, predicted))
