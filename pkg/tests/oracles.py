"""Brute-force reference implementations used to cross-check the library.

Everything here trades speed for obviousness: plain Python loops and no
shared code with the package under test. Where a well-tested third-party
routine exists (scipy, statsmodels) the test modules compare against that
as a second independent route.
"""

import math

import numpy as np


def entropy_ref(probs, normalized=False):
    """Per-pixel Shannon entropy, natural log, 0*log(0) = 0."""
    probs = np.asarray(probs, dtype=np.float64)
    c, h, w = probs.shape
    out = np.zeros((h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            total = 0.0
            for k in range(c):
                p = probs[k, y, x]
                if p > 0.0:
                    total -= p * math.log(p)
            if normalized:
                total /= math.log(c)
            out[y, x] = total
    return out


def brier_ref(pairs, foreground_only=False):
    """Class-wise Brier score over (gt_probs, pred_probs) pairs.

    Per image: mean over voxels of the squared difference, per class;
    then the plain average over images.
    """
    first_gt = np.asarray(pairs[0][0], dtype=np.float64)
    c = first_gt.shape[0]
    per_class = [0.0] * c
    for gt, pred in pairs:
        gt = np.asarray(gt, dtype=np.float64)
        pred = np.asarray(pred, dtype=np.float64)
        _, h, w = gt.shape
        voxels = []
        for y in range(h):
            for x in range(w):
                if foreground_only and gt[0, y, x] >= 1.0 - 1e-9:
                    continue
                voxels.append((y, x))
        for k in range(c):
            acc = 0.0
            for y, x in voxels:
                acc += (gt[k, y, x] - pred[k, y, x]) ** 2
            per_class[k] += acc / len(voxels)
    return [v / len(pairs) for v in per_class]


def dice_ref(pred, gt, class_index):
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    p = g = both = 0
    for y in range(pred.shape[0]):
        for x in range(pred.shape[1]):
            in_p = pred[y, x] == class_index
            in_g = gt[y, x] == class_index
            p += in_p
            g += in_g
            both += in_p and in_g
    if p + g == 0:
        return 1.0
    return 2.0 * both / (p + g)


def pr_points_ref(u, mis, thresholds):
    """Precision/recall at each threshold; positives are u >= t."""
    u = [float(v) for v in np.asarray(u).ravel()]
    mis = [int(v) for v in np.asarray(mis).ravel()]
    total_mis = sum(mis)
    points = []
    for t in thresholds:
        tp = fp = 0
        for uv, mv in zip(u, mis):
            if uv >= t:
                if mv:
                    tp += 1
                else:
                    fp += 1
        precision = 1.0 if tp + fp == 0 else tp / (tp + fp)
        recall = tp / total_mis
        points.append((recall, precision))
    return points


def pr_auc_ref(u, mis, thresholds=None):
    """Trapezoid AUC over the PR sweep, with the zero-recall anchor."""
    u = np.asarray(u).ravel()
    if thresholds is None:
        thresholds = sorted({float(v) for v in u}, reverse=True)
    points = pr_points_ref(u, mis, [math.inf] + list(thresholds))
    auc = 0.0
    for (r0, p0), (r1, p1) in zip(points, points[1:]):
        auc += (r1 - r0) * (p0 + p1) / 2.0
    return auc


def pearson_ref(x, y):
    """Closed-form sample correlation coefficient."""
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def majority_ref(rater_arrays, num_classes):
    """Per-pixel plurality with lowest-index tie-break."""
    h, w = rater_arrays[0].shape
    out = np.zeros((h, w), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            counts = [0] * num_classes
            for r in rater_arrays:
                counts[int(r[y, x])] += 1
            best = 0
            for c in range(num_classes):
                if counts[c] > counts[best]:
                    best = c
            out[y, x] = best
    return out


def average_ref(rater_arrays, num_classes):
    """Per-pixel label frequencies."""
    h, w = rater_arrays[0].shape
    out = np.zeros((num_classes, h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            for r in rater_arrays:
                out[int(r[y, x]), y, x] += 1.0
    return out / len(rater_arrays)
