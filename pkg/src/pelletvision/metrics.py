"""Evaluation metrics and loss oracles.

Instance detection is scored by IoU-threshold matching; classification by
per-pixel confusion-matrix metrics.  The loss functions mirror the training
objective (masked MAE / BCE+MSE / CE+Dice) as pure verification oracles; no
training happens here.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidParameterError, ShapeMismatchError
from .postproc import InstanceMap

BCE_CLAMP_EPS = 1e-7
DICE_SMOOTH = 1e-6


@dataclass
class LossWeights:
    """Weights for the combined loss; defaults follow the training recipe."""

    w_dist: float = 1.0
    w_type: float = 1.0
    w_stardist: float = 0.5

    def __post_init__(self):
        if min(self.w_dist, self.w_type, self.w_stardist) < 0:
            raise InvalidParameterError("loss weights must be >= 0")


@dataclass(eq=False)
class MatchReport:
    tp: int
    fp: int
    fn: int
    pairs: list[tuple[int, int, float]]  # (pred id, gt id, iou)
    precision: float
    recall: float
    f1: float
    mean_matched_iou: float

    def to_dict(self) -> dict:
        return {
            "tp": self.tp, "fp": self.fp, "fn": self.fn,
            "precision": self.precision, "recall": self.recall, "f1": self.f1,
            "mean_matched_iou": self.mean_matched_iou,
            "pairs": [{"pred_id": p, "gt_id": g, "iou": i}
                      for p, g, i in self.pairs],
        }


@dataclass(eq=False)
class PixelMetrics:
    """Confusion-matrix metrics; class index is the class id."""

    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float

    def to_dict(self, class_names: dict[int, str] | None = None) -> dict:
        def name(c: int) -> str:
            return class_names[c] if class_names else str(c)

        per_class = {name(c): {"precision": float(self.precision[c]),
                               "recall": float(self.recall[c]),
                               "f1": float(self.f1[c]),
                               "support": int(self.support[c])}
                     for c in range(len(self.precision))}
        return {"per_class": per_class, "accuracy": self.accuracy,
                "macro_precision": self.macro_precision,
                "macro_recall": self.macro_recall, "macro_f1": self.macro_f1}


def _as_labels(maps) -> np.ndarray:
    if isinstance(maps, InstanceMap):
        return maps.labels
    return np.asarray(maps)


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def match_instances(pred, gt, tau: float = 0.5) -> MatchReport:
    """IoU-threshold instance matching between prediction and ground truth.

    Pixel-set IoU is computed for every (pred, gt) instance pair; the
    one-to-one matching that maximizes total IoU over pairs with IoU > tau is
    found by optimal assignment.  Matched pairs are true positives, leftover
    predictions false positives, leftover ground-truth instances false
    negatives.  Results do not depend on how instance ids are numbered.
    """
    if not 0.0 <= tau <= 1.0:
        raise InvalidParameterError(f"tau must be in [0, 1], got {tau}")
    pred_labels = _as_labels(pred)
    gt_labels = _as_labels(gt)
    if pred_labels.shape != gt_labels.shape:
        raise ShapeMismatchError(
            f"prediction {pred_labels.shape} vs ground truth {gt_labels.shape}")

    pred_ids, pred_inv = np.unique(pred_labels, return_inverse=True)
    gt_ids, gt_inv = np.unique(gt_labels, return_inverse=True)
    pred_inv = pred_inv.ravel()  # numpy >= 2.0 keeps the input shape
    gt_inv = gt_inv.ravel()
    pred_fg = np.flatnonzero(pred_ids != 0)
    gt_fg = np.flatnonzero(gt_ids != 0)
    n_pred, n_gt = pred_fg.size, gt_fg.size

    pairs: list[tuple[int, int, float]] = []
    if n_pred and n_gt:
        joint = np.bincount(pred_inv * gt_ids.size + gt_inv,
                            minlength=pred_ids.size * gt_ids.size)
        joint = joint.reshape(pred_ids.size, gt_ids.size)
        pred_area = joint.sum(axis=1)
        gt_area = joint.sum(axis=0)
        inter = joint[np.ix_(pred_fg, gt_fg)].astype(np.float64)
        union = (pred_area[pred_fg][:, None] + gt_area[gt_fg][None, :] - inter)
        with np.errstate(invalid="ignore", divide="ignore"):
            iou = np.where(union > 0, inter / union, 0.0)
        valid = iou > tau
        score = np.where(valid, iou, 0.0)
        rows, cols = linear_sum_assignment(score, maximize=True)
        for r, c in zip(rows, cols):
            if iou[r, c] > tau:
                pairs.append((int(pred_ids[pred_fg[r]]),
                              int(gt_ids[gt_fg[c]]), float(iou[r, c])))
        pairs.sort()

    tp = len(pairs)
    fp = n_pred - tp
    fn = n_gt - tp
    precision = _safe_div(tp, tp + fp)
    recall = _safe_div(tp, tp + fn)
    f1 = _safe_div(2 * precision * recall, precision + recall)
    mean_iou = float(np.mean([p[2] for p in pairs])) if pairs else 0.0
    return MatchReport(tp=tp, fp=fp, fn=fn, pairs=pairs, precision=precision,
                       recall=recall, f1=f1, mean_matched_iou=mean_iou)


def pixel_metrics(pred_classes: np.ndarray, gt_classes: np.ndarray,
                  n_classes: int | None = None) -> PixelMetrics:
    """Per-class precision/recall/F1 and overall accuracy from a confusion
    matrix.  Zero-support classes report recall 0 and are left out of the
    macro averages."""
    pred = np.asarray(pred_classes)
    gt = np.asarray(gt_classes)
    if pred.shape != gt.shape:
        raise ShapeMismatchError(f"prediction {pred.shape} vs ground truth {gt.shape}")
    if n_classes is None:
        n_classes = int(max(pred.max(initial=0), gt.max(initial=0))) + 1
    confusion = np.bincount(
        gt.ravel().astype(np.int64) * n_classes + pred.ravel().astype(np.int64),
        minlength=n_classes * n_classes).reshape(n_classes, n_classes)
    tp = np.diag(confusion).astype(np.float64)
    pred_totals = confusion.sum(axis=0).astype(np.float64)
    support = confusion.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(pred_totals > 0, tp / pred_totals, 0.0)
        recall = np.where(support > 0, tp / support, 0.0)
        f1 = np.where(precision + recall > 0,
                      2 * precision * recall / (precision + recall), 0.0)
    accuracy = float(tp.sum() / confusion.sum()) if confusion.sum() else 0.0
    present = support > 0
    macro_p = float(precision[present].mean()) if present.any() else 0.0
    macro_r = float(recall[present].mean()) if present.any() else 0.0
    macro_f = float(f1[present].mean()) if present.any() else 0.0
    return PixelMetrics(precision=precision, recall=recall, f1=f1,
                        support=support, accuracy=accuracy,
                        macro_precision=macro_p, macro_recall=macro_r,
                        macro_f1=macro_f)


def _check_same_shape(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ShapeMismatchError(f"grid shapes differ: {a.shape} vs {b.shape}")


def _mask_for(grid: np.ndarray, mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != grid.shape[:mask.ndim]:
        raise ShapeMismatchError(
            f"mask {mask.shape} does not match grid {grid.shape}")
    return mask


def masked_mae(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray) -> float:
    """Mean absolute error over mask pixels (and over the ray axis when the
    grids carry one).  An empty mask yields 0 with a warning."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    _check_same_shape(pred, gt)
    mask = _mask_for(pred, mask)
    if not mask.any():
        warnings.warn("masked_mae over an empty mask; returning 0", RuntimeWarning)
        return 0.0
    return float(np.abs(pred[mask] - gt[mask]).mean())


def masked_bce_mse(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray) -> float:
    """Masked binary cross-entropy plus squared error, unit weights.

    Predictions are clamped to [eps, 1-eps] before the log terms.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    _check_same_shape(pred, gt)
    mask = _mask_for(pred, mask)
    if not mask.any():
        warnings.warn("masked_bce_mse over an empty mask; returning 0",
                      RuntimeWarning)
        return 0.0
    p = np.clip(pred[mask], BCE_CLAMP_EPS, 1.0 - BCE_CLAMP_EPS)
    g = gt[mask]
    bce = -(g * np.log(p) + (1.0 - g) * np.log(1.0 - p))
    mse = (p - g) ** 2
    return float((bce + mse).mean())


def masked_ce_dice(scores: np.ndarray, gt_onehot: np.ndarray,
                   mask: np.ndarray) -> float:
    """Masked categorical cross-entropy plus (1 - mean soft Dice).

    ``scores`` (H, W, C) are exp-normalized per pixel; ``gt_onehot`` carries
    the one-hot target.  Dice averages over the classes present in the ground
    truth within the mask, smoothed by 1e-6 in numerator and denominator.
    """
    scores = np.asarray(scores, dtype=np.float64)
    gt_onehot = np.asarray(gt_onehot, dtype=np.float64)
    _check_same_shape(scores, gt_onehot)
    mask = _mask_for(scores, mask)
    if not mask.any():
        warnings.warn("masked_ce_dice over an empty mask; returning 0",
                      RuntimeWarning)
        return 0.0
    s = scores[mask]
    g = gt_onehot[mask]
    shifted = s - s.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    probs = expd / expd.sum(axis=1, keepdims=True)
    ce = float(-(g * np.log(np.clip(probs, 1e-300, None))).sum(axis=1).mean())
    present = np.flatnonzero(g.sum(axis=0) > 0)
    dice_terms = []
    for c in present:
        num = 2.0 * (probs[:, c] * g[:, c]).sum() + DICE_SMOOTH
        den = probs[:, c].sum() + g[:, c].sum() + DICE_SMOOTH
        dice_terms.append(num / den)
    dice = float(np.mean(dice_terms)) if dice_terms else 1.0
    return ce + (1.0 - dice)


def combined_loss(dist_loss: float, type_loss: float, stardist_loss: float,
                  weights: LossWeights | None = None) -> float:
    """Weighted sum of the three branch losses."""
    if min(dist_loss, type_loss, stardist_loss) < 0:
        raise InvalidParameterError("loss components must be >= 0")
    w = weights if weights is not None else LossWeights()
    return (w.w_dist * dist_loss + w.w_type * type_loss
            + w.w_stardist * stardist_loss)
