"""Statistical analysis: correlation, variance partitioning, paired tests.

These back the cohort-level questions: how strongly does each uncertainty
flavor track the raters' disagreement (Pearson with significance), how much
of that disagreement do the two flavors explain alone vs together (OLS
variance partitioning with a commonality decomposition), and is one model's
Dice reliably better than another's (Wilcoxon signed-rank on per-image
scores, paired t-test as an alternative).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import norm as _norm
from scipy.stats import rankdata
from scipy.stats import t as _t_dist

from .arrays import InvariantError, LabelMap, ScalarMap

__all__ = [
    "CorrelationResult",
    "pearson",
    "reduce_per_image",
    "VariancePartition",
    "variance_partition",
    "paired_test",
    "scatter_csv",
]


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    p_value: float
    n: int
    granularity: str = "per_image"

    def __post_init__(self):
        if not -1.0 <= self.r <= 1.0:
            raise InvariantError(f"correlation outside [-1, 1]: {self.r}")
        if not 0.0 <= self.p_value <= 1.0:
            raise InvariantError(f"p-value outside [0, 1]: {self.p_value}")

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "p_value": self.p_value,
            "n": self.n,
            "granularity": self.granularity,
        }


def pearson(x, y, granularity: str = "per_image") -> CorrelationResult:
    """Sample Pearson r with a two-sided t-test p-value (df = n - 2)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or x.size != y.size:
        raise InvariantError("pearson needs two equal-length 1D sequences")
    n = x.size
    if n < 3:
        raise InvariantError(f"pearson needs n >= 3 observations, got {n}")
    xd = x - x.mean()
    yd = y - y.mean()
    sx = math.sqrt(float(xd @ xd))
    sy = math.sqrt(float(yd @ yd))
    if sx == 0.0 or sy == 0.0:
        raise InvariantError("zero variance input: correlation undefined")
    r = float(xd @ yd) / (sx * sy)
    r = min(max(r, -1.0), 1.0)
    if abs(r) == 1.0:
        p = 0.0
    else:
        t_stat = r * math.sqrt((n - 2) / (1.0 - r * r))
        p = 2.0 * float(_t_dist.sf(abs(t_stat), df=n - 2))
        p = min(p, 1.0)
    return CorrelationResult(r=r, p_value=p, n=n, granularity=granularity)


def reduce_per_image(
    maps: list[ScalarMap],
    region: str = "all",
    gts: list[LabelMap] | None = None,
) -> list[float]:
    """One scalar per map: its mean over all pixels or over GT foreground."""
    if not maps:
        raise InvariantError("reduce_per_image needs at least one map")
    if region == "all":
        return [float(m.values.mean(dtype=np.float64)) for m in maps]
    if region != "foreground":
        raise InvariantError(f"unknown region mode {region!r}")
    if gts is None or len(gts) != len(maps):
        raise InvariantError("foreground mode needs one GT label map per scalar map")
    out = []
    for i, (m, g) in enumerate(zip(maps, gts)):
        if m.shape != g.shape:
            raise InvariantError(f"image {i}: map shape {m.shape} != GT shape {g.shape}")
        fg = g.labels != 0
        if not fg.any():
            raise InvariantError(f"image {i}: empty foreground region")
        out.append(float(m.values[fg].mean(dtype=np.float64)))
    return out


@dataclass(frozen=True)
class VariancePartition:
    """R² shares (as percentages) of GT entropy explained by the two flavors.

    ``unique_*`` and ``common`` follow the commonality decomposition and are
    derived from the three R² values, so the identity
    common = alone_e + alone_a - joint holds exactly.
    """

    r2_epistemic_alone: float
    r2_aleatoric_alone: float
    r2_joint: float
    unique_epistemic: float
    unique_aleatoric: float
    common: float

    def to_dict(self) -> dict:
        return {
            "r2_epistemic_alone": self.r2_epistemic_alone,
            "r2_aleatoric_alone": self.r2_aleatoric_alone,
            "r2_joint": self.r2_joint,
            "unique_epistemic": self.unique_epistemic,
            "unique_aleatoric": self.unique_aleatoric,
            "common": self.common,
        }

    def to_json(self, path: Path | str | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def _ols_r2(y: np.ndarray, predictors: list[np.ndarray]) -> float:
    """R² of an ordinary-least-squares fit of y on the predictors + intercept."""
    n = y.size
    design = np.column_stack([np.ones(n)] + predictors)
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < design.shape[1]:
        raise InvariantError("rank deficiency: collinear predictors in OLS fit")
    resid = y - design @ coef
    ss_res = float(resid @ resid)
    yd = y - y.mean()
    ss_tot = float(yd @ yd)
    if ss_tot == 0.0:
        raise InvariantError("zero variance response: R^2 undefined")
    return 1.0 - ss_res / ss_tot


def variance_partition(gt_entropy, epistemic, aleatoric) -> VariancePartition:
    """OLS R² of GT entropy on each uncertainty alone and on both jointly."""
    y = np.asarray(gt_entropy, dtype=np.float64)
    e = np.asarray(epistemic, dtype=np.float64)
    a = np.asarray(aleatoric, dtype=np.float64)
    if not (y.ndim == e.ndim == a.ndim == 1) or not (y.size == e.size == a.size):
        raise InvariantError("variance_partition needs three equal-length 1D sequences")
    if y.size < 4:
        raise InvariantError(f"variance_partition needs n >= 4, got {y.size}")
    r2_e = 100.0 * _ols_r2(y, [e])
    r2_a = 100.0 * _ols_r2(y, [a])
    r2_j = 100.0 * _ols_r2(y, [e, a])
    return VariancePartition(
        r2_epistemic_alone=r2_e,
        r2_aleatoric_alone=r2_a,
        r2_joint=r2_j,
        unique_epistemic=r2_j - r2_a,
        unique_aleatoric=r2_j - r2_e,
        common=r2_e + r2_a - r2_j,
    )


def _signed_rank_exact(w_plus: float, ranks: np.ndarray) -> float:
    """Two-sided exact p-value by dynamic programming over sign flips.

    Ranks may be midranks; doubling makes them integers, and the DP counts,
    for every achievable doubled rank sum, how many of the 2^n sign
    assignments reach it.  With ties present this is the exact conditional
    (permutation) distribution given the observed absolute differences.
    """
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for d in doubled:
        shifted = np.zeros_like(counts)
        shifted[d:] = counts[: total + 1 - d]
        counts = counts + shifted
    w2 = int(round(2.0 * w_plus))
    denom = 2.0 ** len(ranks)
    p_low = counts[: w2 + 1].sum() / denom
    p_high = counts[w2:].sum() / denom
    return min(1.0, 2.0 * min(p_low, p_high))


def _signed_rank_normal(w_plus: float, ranks: np.ndarray) -> float:
    """Normal approximation with tie correction and continuity correction."""
    n = len(ranks)
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var -= float(((tie_counts**3 - tie_counts) / 48.0).sum())
    if var <= 0.0:
        return 1.0
    dev = w_plus - mean
    if dev == 0.0:
        return 1.0
    z = (dev - 0.5 * math.copysign(1.0, dev)) / math.sqrt(var)
    return min(1.0, 2.0 * float(_norm.sf(abs(z))))


EXACT_WILCOXON_LIMIT = 25


def paired_test(scores_a, scores_b, method: str = "wilcoxon") -> float:
    """Two-sided paired test on per-image scores; returns the p-value.

    Default is the Wilcoxon signed-rank test: zero differences are dropped,
    the remaining absolute differences are midranked, and the p-value is
    exact (full sign-flip enumeration) for up to 25 nonzero pairs, else a
    tie-corrected normal approximation.  All-zero differences give p = 1.0.
    ``method="ttest"`` runs a paired t-test instead.
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise InvariantError("paired_test needs two equal-length 1D sequences")
    if a.size < 6:
        raise InvariantError(f"paired_test needs n >= 6 pairs, got {a.size}")
    d = a - b
    if method == "ttest":
        sd = d.std(ddof=1)
        if sd == 0.0:
            return 1.0
        t_stat = d.mean() / (sd / math.sqrt(d.size))
        return min(1.0, 2.0 * float(_t_dist.sf(abs(t_stat), df=d.size - 1)))
    if method != "wilcoxon":
        raise InvariantError(f"unknown paired test method {method!r}")
    nz = d[d != 0.0]
    if nz.size == 0:
        return 1.0
    ranks = rankdata(np.abs(nz))
    w_plus = float(ranks[nz > 0].sum())
    if nz.size <= EXACT_WILCOXON_LIMIT:
        return _signed_rank_exact(w_plus, ranks)
    return _signed_rank_normal(w_plus, ranks)


def scatter_csv(
    x, y, result: CorrelationResult, path: Path | str | None = None
) -> str:
    """Scatter-plot data as CSV: r and p in comments, then one row per point."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    buf = io.StringIO()
    buf.write(f"# r={result.r!r}\n")
    buf.write(f"# p={result.p_value!r}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x", "y"])
    for xi, yi in zip(x, y):
        writer.writerow([repr(float(xi)), repr(float(yi))])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
