import numpy as np
from PIL import Image

from autograd import ops
from autograd.tensor import Tensor, grad
from models.mavt.heads import Predictions
from models.mavt.tokens import StreamState
from utils.errors import ContractError, DimensionError


def class_score(pred: Predictions, class_idx, sample=0) -> Tensor:
    """Scalar fg logit of one sample; must run under the forward pass's Tape."""
    n_classes = pred.fg_logits.shape[-1]
    if not 0 <= class_idx < n_classes:
        raise ContractError(f"class index {class_idx} outside 0..{n_classes - 1}")
    selector = np.zeros(pred.fg_logits.shape)
    selector[sample, class_idx] = 1.0
    return ops.sum(ops.mul(pred.fg_logits, Tensor(selector)))


def patch_saliency(gradient, offsets, grid_hw, sample=0) -> np.ndarray:
    """Channel-mean gradient per patch, ReLU, min-max to [0, 1], patch grid shape.

    A constant map normalises to all zeros.
    """
    gradient = np.asarray(gradient, dtype=np.float64)
    if gradient.ndim == 3:
        gradient = gradient[sample]
    start, stop = offsets["patches"]
    grid_h, grid_w = grid_hw
    if stop - start != grid_h * grid_w:
        raise DimensionError(f"{stop - start} patch rows do not fill a {grid_h}x{grid_w} grid")

    scores = np.maximum(gradient[start:stop].mean(axis=-1), 0.0)
    low, high = scores.min(), scores.max()
    if high - low <= 0:
        return np.zeros((grid_h, grid_w))
    return ((scores - low) / (high - low)).reshape(grid_h, grid_w)


def saliency_map(stream_v: StreamState, score: Tensor, grid_hw, sample=0) -> np.ndarray:
    """Patch-grid saliency of `score` w.r.t. the visual patch tokens entering block K.

    Block-K patch outputs do not reach the heads, so the gradient is read at
    the input of the last block.
    """
    if stream_v.modality != "v":
        raise ContractError("saliency maps are computed on the visual stream")
    (gradient,) = grad(score, [stream_v.embeddings[stream_v.depth - 1]])
    return patch_saliency(gradient, stream_v.offsets, grid_hw, sample)


def argmax_patch(saliency):
    """(row, col) of the most salient patch."""
    row, col = np.unravel_index(int(np.argmax(saliency)), saliency.shape)
    return int(row), int(col)


def write_pgm(path, saliency):
    """8-bit binary PGM (P5) of a [0, 1] map."""
    pixels = np.clip(np.rint(np.asarray(saliency) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(pixels).save(path, format="PPM")
