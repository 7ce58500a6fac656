import numpy as np
from sklearn.preprocessing import normalize

from metrics.base_metric import EvalOutputs, Metric
from metrics.retrieval_recall.configs import TOP_K
from utils.common import print_colored

# Visual-to-audio retrieval over the foreground test set: each pooled visual
# embedding ranks every pooled audio embedding by cosine similarity.
# Recall@K is the share of queries whose own audio ranks within the top K.


class RetrievalRecallMetric(Metric):
    """Cross-modal retrieval recall@K on pooled block-K shared features."""

    def __init__(self, debug=False, top_k=TOP_K):
        super().__init__(debug=debug)
        self.top_k = top_k

    def calculate(self, outputs: EvalOutputs) -> float:
        if outputs.v_embed is None or outputs.a_embed is None:
            return float("nan")
        mask = outputs.foreground
        if not mask.any():
            return float("nan")

        visual = normalize(np.asarray(outputs.v_embed)[mask])
        audio = normalize(np.asarray(outputs.a_embed)[mask])
        similarity = visual @ audio.T

        # Rank of the true partner; ties go to the lower candidate index
        own = np.diag(similarity)[:, None]
        index = np.arange(len(similarity))
        ahead = (similarity > own) | ((similarity == own) & (index[None, :] < index[:, None]))
        rank = ahead.sum(axis=1)
        recall = float(np.mean(rank < self.top_k))

        if self.debug:
            print_colored(f"Retrieval recall@{self.top_k}: {recall}", "gray")

        return recall
