"""Instance segmentation quality metrics over point masks.

The headline score is average precision averaged over mask-overlap
thresholds 0.50 to 0.95 in steps of 0.05, with the single-threshold
scores at 0.50 and 0.25 reported alongside. Matching is per class and
greedy in descending confidence; precision/recall curves use all-point
interpolation with a monotone precision envelope. Classes enter the
average only if they have at least one ground-truth instance. Empty
masks on either side are discarded before matching.

Accumulations run as plain python loops on purpose: the reference
evaluator in the tests must reproduce these numbers exactly, so the
summation order is part of the contract.
"""

from __future__ import annotations

from dataclasses import dataclass

from .assembly import Proposal, mask_iou
from .scene import GroundTruthInstance

IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
AP50_THRESHOLD = 0.5
AP25_THRESHOLD = 0.25


@dataclass
class ClassEval:
    """Scores for one semantic class."""

    class_id: int
    n_gt: int
    ap: float  # mean over IOU_THRESHOLDS
    ap50: float
    ap25: float
    precision50: float
    recall50: float


@dataclass
class EvalResult:
    """Class-averaged scores plus the per-class breakdown."""

    ap: float
    ap50: float
    ap25: float
    mean_precision50: float
    mean_recall50: float
    per_class: dict[int, ClassEval]

    def csv_rows(self) -> list[str]:
        rows = ["class_id,n_gt,ap,ap50,ap25,precision50,recall50"]
        for cid in sorted(self.per_class):
            ce = self.per_class[cid]
            rows.append(
                f"{cid},{ce.n_gt},{ce.ap!r},{ce.ap50!r},{ce.ap25!r},"
                f"{ce.precision50!r},{ce.recall50!r}"
            )
        rows.append(
            f"all,{sum(c.n_gt for c in self.per_class.values())},"
            f"{self.ap!r},{self.ap50!r},{self.ap25!r},"
            f"{self.mean_precision50!r},{self.mean_recall50!r}"
        )
        return rows


def match_greedy(
    pred_masks: list, pred_confs: list, gt_masks: list, threshold: float
) -> list[bool]:
    """True-positive flags for predictions visited in descending confidence.

    Each prediction claims the unmatched ground truth it overlaps most,
    provided that overlap reaches ``threshold``. Callers pass predictions
    already sorted; this helper preserves their order.
    """
    taken = [False] * len(gt_masks)
    flags = []
    for pm in pred_masks:
        best_iou = 0.0
        best_j = -1
        for j, gm in enumerate(gt_masks):
            if taken[j]:
                continue
            iou = mask_iou(pm, gm)
            if iou > best_iou:
                best_iou = iou
                best_j = j
        if best_j >= 0 and best_iou >= threshold:
            taken[best_j] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags


def average_precision(tp_flags: list[bool], n_gt: int) -> float:
    """Area under the all-point interpolated precision/recall curve."""
    if n_gt == 0:
        raise ValueError("average precision needs at least one ground truth")
    if not tp_flags:
        return 0.0
    precisions = []
    recalls = []
    tp = 0
    for i, flag in enumerate(tp_flags):
        if flag:
            tp += 1
        precisions.append(tp / (i + 1))
        recalls.append(tp / n_gt)
    for i in range(len(precisions) - 2, -1, -1):
        if precisions[i + 1] > precisions[i]:
            precisions[i] = precisions[i + 1]
    ap = recalls[0] * precisions[0]
    for i in range(1, len(recalls)):
        ap += (recalls[i] - recalls[i - 1]) * precisions[i]
    return ap


def evaluate(
    proposals: list[Proposal],
    gt_instances: list[GroundTruthInstance],
    n_points: int,
) -> EvalResult:
    """Score proposals against labeled instances."""
    gt_by_class: dict[int, list] = {}
    for gt in gt_instances:
        mask = gt.mask(n_points)
        if mask.sum() == 0:
            continue
        gt_by_class.setdefault(gt.class_id, []).append(mask)
    preds_by_class: dict[int, list] = {}
    for idx, p in enumerate(proposals):
        if p.n_points == 0:
            continue
        preds_by_class.setdefault(p.class_id, []).append((-p.confidence, idx, p))
    per_class: dict[int, ClassEval] = {}
    for cid in sorted(gt_by_class):
        gt_masks = gt_by_class[cid]
        ranked = sorted(preds_by_class.get(cid, []))
        masks = [p.mask for _, _, p in ranked]
        confs = [p.confidence for _, _, p in ranked]
        ap_sum = 0.0
        ap50 = 0.0
        for t in IOU_THRESHOLDS:
            flags = match_greedy(masks, confs, gt_masks, t)
            ap_t = average_precision(flags, len(gt_masks))
            ap_sum += ap_t
            if t == AP50_THRESHOLD:
                ap50 = ap_t
        flags25 = match_greedy(masks, confs, gt_masks, AP25_THRESHOLD)
        ap25 = average_precision(flags25, len(gt_masks))
        flags50 = match_greedy(masks, confs, gt_masks, AP50_THRESHOLD)
        n_tp = sum(flags50)
        precision50 = n_tp / len(flags50) if flags50 else 0.0
        recall50 = n_tp / len(gt_masks)
        per_class[cid] = ClassEval(
            class_id=cid,
            n_gt=len(gt_masks),
            ap=ap_sum / len(IOU_THRESHOLDS),
            ap50=ap50,
            ap25=ap25,
            precision50=precision50,
            recall50=recall50,
        )
    if not per_class:
        return EvalResult(0.0, 0.0, 0.0, 0.0, 0.0, {})
    n_classes = len(per_class)
    mean = lambda vals: sum(vals) / n_classes  # noqa: E731
    return EvalResult(
        ap=mean([c.ap for c in per_class.values()]),
        ap50=mean([c.ap50 for c in per_class.values()]),
        ap25=mean([c.ap25 for c in per_class.values()]),
        mean_precision50=mean([c.precision50 for c in per_class.values()]),
        mean_recall50=mean([c.recall50 for c in per_class.values()]),
        per_class=per_class,
    )
