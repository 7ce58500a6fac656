import numpy as np
from sklearn.metrics import accuracy_score

from metrics.base_metric import EvalOutputs, Metric
from metrics.bg_accuracy.configs import BG_THRESHOLD


class BgAccuracyMetric(Metric):
    """Background detection accuracy over every sample, p_bg >= 0.5 means background."""

    def __init__(self, debug=False):
        super().__init__(debug=debug)
        self.threshold = BG_THRESHOLD

    def calculate(self, outputs: EvalOutputs) -> float:
        p_bg = np.asarray(outputs.p_bg, dtype=np.float64)
        if p_bg.size == 0 or np.isnan(p_bg).any():
            return float("nan")
        predicted = (p_bg >= self.threshold).astype(np.int64)
        return float(accuracy_score(np.asarray(outputs.y_b), predicted))
