import numpy as np
from sklearn.metrics import accuracy_score, pairwise_distances_argmin

from data.synthetic import PairedDataset


def nearest_prototype_predict(visual, prototypes):
    """Class of the nearest visual prototype (Euclidean, raw pixels)."""
    flat = np.asarray(visual).reshape(len(visual), -1)
    return pairwise_distances_argmin(flat, prototypes.reshape(len(prototypes), -1))


def oracle_accuracy(dataset: PairedDataset, visual_prototypes) -> float:
    """Nearest-prototype accuracy against the visual class of every sample."""
    predicted = nearest_prototype_predict(dataset.visual, visual_prototypes)
    return float(accuracy_score(dataset.visual_class, predicted))
