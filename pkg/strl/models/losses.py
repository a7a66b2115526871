"""Frame reconstruction losses.

All losses are means over pixels so the weights do not depend on the
working resolution.
"""

from dataclasses import dataclass

from strl.autograd import functional as F
from strl.autograd.tensor import Tensor, as_tensor
from strl.models.stae import StaePrediction, forward
from strl.utils.errors import ShapeError


@dataclass
class AeLoss:
    """Auto-encoder objective and its two branches (scalar Tensors)."""

    total: Tensor
    app: Tensor
    mot: Tensor


def _pair(target, pred, op):
    target, pred = as_tensor(target), as_tensor(pred)
    if target.shape != pred.shape:
        raise ShapeError(f"{op}: target {target.shape} and prediction {pred.shape} differ")
    return target, pred


def loss_intensity(target, pred):
    """Mean squared difference."""
    target, pred = _pair(target, pred, "loss_intensity")
    return F.mean(F.square(F.sub(target, pred)))


def _abs_gradients(x):
    """Absolute forward differences along columns (x) and rows (y)."""
    w, h = x.shape[-1], x.shape[-2]
    dx = F.abs(F.sub(x[..., :, 1:w], x[..., :, 0:w - 1]))
    dy = F.abs(F.sub(x[..., 1:h, :], x[..., 0:h - 1, :]))
    return dx, dy


def loss_gradient(target, pred):
    """
    Gradient-difference loss.

    Compares absolute image gradients along both axes; each term is averaged
    over the positions where its forward difference exists.
    """
    target, pred = _pair(target, pred, "loss_gradient")
    tdx, tdy = _abs_gradients(target)
    pdx, pdy = _abs_gradients(pred)
    return F.add(F.mean(F.abs(F.sub(tdx, pdx))), F.mean(F.abs(F.sub(tdy, pdy))))


def loss_app(target, pred, lambda_grd):
    """Intensity plus weighted gradient loss of one predicted image."""
    return F.add(loss_intensity(target, pred), F.mul(loss_gradient(target, pred), lambda_grd))


def ae_objective(prediction: StaePrediction, target, lambda_grd, lambda_mot):
    """
    Combine the appearance and motion branch losses.

    Args:
        prediction: StaePrediction of the clip batch
        target: Ground-truth next frames [B, 3, H, W]
        lambda_grd: Weight of the gradient term inside each branch
        lambda_mot: Weight of the motion branch

    Returns:
        AeLoss
    """
    app = loss_app(target, prediction.frame, lambda_grd)
    mot = loss_app(target, prediction.warped, lambda_grd)
    return AeLoss(F.add(app, F.mul(mot, lambda_mot)), app, mot)


def loss_ae(store, inputs, target, lambda_grd, lambda_mot, training=True):
    """
    Forward the auto-encoder and evaluate its objective.

    Args:
        store: ParameterStore with the auto-encoder weights
        inputs: Channel-stacked clips [B, 3k, H, W]
        target: Next frames [B, 3, H, W]
        lambda_grd: Gradient-term weight
        lambda_mot: Motion-branch weight
        training: Batch-norm mode

    Returns:
        tuple: (AeLoss, StaePrediction)
    """
    prediction = forward(store, inputs, training)
    return ae_objective(prediction, target, lambda_grd, lambda_mot), prediction
