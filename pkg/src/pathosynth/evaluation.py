"""Segmentation overlap metrics and rater-score statistics."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special

from .errors import EvaluationError
from .volume import LabelVolume


def dice(mask_a: np.ndarray, mask_b: np.ndarray) -> float:
    """Dice overlap 2|A&B| / (|A|+|B|); two empty masks count as 1.0."""
    a = np.asarray(mask_a)
    b = np.asarray(mask_b)
    if a.dtype != np.bool_ or b.dtype != np.bool_:
        raise EvaluationError("dice expects boolean masks")
    if a.shape != b.shape:
        raise EvaluationError("masks must share a shape")
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((a & b).sum()) / total


def per_label_dice(
    prediction: LabelVolume, truth: LabelVolume, codes: list[int] | None = None
) -> dict[int, float]:
    """Dice per label code. Default codes: every non-background code present."""
    if prediction.geometry.dims != truth.geometry.dims:
        raise EvaluationError("volumes must share dims")
    if codes is None:
        present = set(np.unique(prediction.voxels)) | set(np.unique(truth.voxels))
        present.discard(truth.background_code)
        codes = sorted(int(c) for c in present)
    return {
        int(c): dice(prediction.voxels == c, truth.voxels == c) for c in codes
    }


@dataclass
class DiceReport:
    """Per-label medians over subjects plus their mean."""

    codes: list[int]
    names: dict[int, str]
    per_subject: dict[str, dict[int, float]]
    medians: dict[int, float]
    mean_of_medians: float

    def to_dict(self) -> dict:
        return {
            "codes": list(self.codes),
            "names": {str(c): n for c, n in self.names.items()},
            "per_subject": {
                s: {str(c): v for c, v in scores.items()} for s, scores in self.per_subject.items()
            },
            "medians": {str(c): v for c, v in self.medians.items()},
            "mean_of_medians": self.mean_of_medians,
        }

    def to_text(self) -> str:
        lines = []
        for code in self.codes:
            name = self.names.get(code, f"label {code}")
            lines.append(f"{name}: median dice {self.medians[code]:.4f}")
        lines.append(f"mean of medians: {self.mean_of_medians:.4f}")
        return "\n".join(lines)


def summarize(
    per_subject: dict[str, dict[int, float]], names: dict[int, str] | None = None
) -> DiceReport:
    """Median Dice per label across subjects, and the mean of those medians."""
    if not per_subject:
        raise EvaluationError("no subjects to summarize")
    codes = sorted({int(c) for scores in per_subject.values() for c in scores})
    if not codes:
        raise EvaluationError("no labels to summarize")
    medians = {}
    for code in codes:
        values = [scores[code] for scores in per_subject.values() if code in scores]
        medians[code] = float(np.median(values))
    mean = float(np.mean(list(medians.values())))
    return DiceReport(
        codes=codes,
        names={c: (names or {}).get(c, f"label_{c}") for c in codes},
        per_subject={s: {int(c): float(v) for c, v in sc.items()} for s, sc in per_subject.items()},
        medians=medians,
        mean_of_medians=mean,
    )


# ---------------------------------------------------------------------------
# Rater scores
# ---------------------------------------------------------------------------

DEFAULT_SCORES = (0, 1, 2, 3)


def rater_mean(counts, scores=DEFAULT_SCORES) -> float:
    """Count-weighted mean score: sum(count*score) / sum(count)."""
    counts = [int(c) for c in counts]
    if len(counts) != len(scores):
        raise EvaluationError(f"expected {len(scores)} counts, got {len(counts)}")
    if any(c < 0 for c in counts):
        raise EvaluationError("counts must be non-negative")
    total = sum(counts)
    if total == 0:
        raise EvaluationError("counts sum to zero")
    return sum(c * s for c, s in zip(counts, scores)) / total


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p: float


def welch_ttest(sample_a, sample_b) -> WelchResult:
    """Two-sided t-test with unequal variances (Welch).

    t = (mean_a - mean_b) / sqrt(va/na + vb/nb) with sample variances;
    degrees of freedom by Welch-Satterthwaite; the two-sided p-value is the
    regularized incomplete beta I_{df/(df+t^2)}(df/2, 1/2).
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.size < 2 or b.size < 2:
        raise EvaluationError("each sample needs at least two 1-D observations")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise EvaluationError("samples must be finite")
    na, nb = a.size, b.size
    va, vb = a.var(ddof=1), b.var(ddof=1)
    se2 = va / na + vb / nb
    if se2 == 0.0:
        raise EvaluationError("both samples are constant; t is undefined")
    t = (a.mean() - b.mean()) / np.sqrt(se2)
    df = se2**2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    p = float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))
    return WelchResult(t=float(t), df=float(df), p=p)


@dataclass
class RaterTable:
    """Blinded realism scores for real and synthetic cases.

    counts[group][rater] is the histogram over the score values
    (default 0..3); case_scores[group], when present, holds one row per
    case with that case's score from every rater, enabling the per-case
    significance test.
    """

    counts: dict[str, dict[str, list[int]]]
    scores: tuple[int, ...] = DEFAULT_SCORES
    case_scores: dict[str, list[list[int]]] = field(default_factory=dict)

    GROUPS = ("real", "synthetic")

    def __post_init__(self):
        for group in self.GROUPS:
            if group not in self.counts:
                raise EvaluationError(f"missing group {group!r}")
            for rater, counts in self.counts[group].items():
                if len(counts) != len(self.scores):
                    raise EvaluationError(
                        f"{group}/{rater}: expected {len(self.scores)} counts"
                    )
        raters = sorted(self.counts["real"])
        if sorted(self.counts["synthetic"]) != raters:
            raise EvaluationError("real and synthetic must cover the same raters")

    @property
    def raters(self) -> list[str]:
        return sorted(self.counts["real"])

    def per_rater_means(self, group: str) -> dict[str, float]:
        return {r: rater_mean(self.counts[group][r], self.scores) for r in self.raters}

    def average_counts(self, group: str) -> list[float]:
        """Mean histogram across raters (the 'average rater' row)."""
        stacked = np.array([self.counts[group][r] for r in self.raters], dtype=np.float64)
        return [float(v) for v in stacked.mean(axis=0)]

    def group_mean(self, group: str) -> float:
        """Count-weighted mean score pooled over all raters."""
        stacked = np.array([self.counts[group][r] for r in self.raters], dtype=np.int64)
        pooled = stacked.sum(axis=0)
        return rater_mean(pooled, self.scores)

    def case_means(self, group: str) -> list[float] | None:
        rows = self.case_scores.get(group)
        if rows is None:
            return None
        return [float(np.mean(row)) for row in rows]

    def ttest(self) -> WelchResult | None:
        """Welch test on per-case mean scores; None without per-case data."""
        real = self.case_means("real")
        synthetic = self.case_means("synthetic")
        if real is None or synthetic is None:
            return None
        return welch_ttest(real, synthetic)

    def to_dict(self) -> dict:
        payload = {
            "scores": list(self.scores),
            "raters": {
                r: {g: list(self.counts[g][r]) for g in self.GROUPS} for r in self.raters
            },
        }
        if self.case_scores:
            payload["cases"] = {g: [list(r) for r in rows] for g, rows in self.case_scores.items()}
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "RaterTable":
        scores = tuple(int(s) for s in payload.get("scores", DEFAULT_SCORES))
        if "raters" in payload and isinstance(payload["raters"], dict):
            counts: dict[str, dict[str, list[int]]] = {g: {} for g in cls.GROUPS}
            for rater, groups in payload["raters"].items():
                for group in cls.GROUPS:
                    if group not in groups:
                        raise EvaluationError(f"rater {rater!r} missing group {group!r}")
                    counts[group][rater] = [int(c) for c in groups[group]]
            case_scores = {}
            for group, rows in payload.get("cases", {}).items():
                case_scores[group] = [[int(v) for v in row] for row in rows]
            return cls(counts=counts, scores=scores, case_scores=case_scores)
        if "cases" in payload:
            # per-case form: rows of per-rater scores; histograms are derived
            rater_names = payload.get("rater_names")
            case_scores = {
                g: [[int(v) for v in row] for row in rows] for g, rows in payload["cases"].items()
            }
            widths = {len(row) for rows in case_scores.values() for row in rows}
            if len(widths) != 1:
                raise EvaluationError("per-case rows must all have one score per rater")
            n_raters = widths.pop()
            if rater_names is None:
                rater_names = [f"rater_{i + 1}" for i in range(n_raters)]
            if len(rater_names) != n_raters:
                raise EvaluationError("rater_names length does not match the case rows")
            counts = {g: {} for g in cls.GROUPS}
            for group in cls.GROUPS:
                if group not in case_scores:
                    raise EvaluationError(f"missing group {group!r}")
                rows = np.array(case_scores[group], dtype=np.int64)
                for j, rater in enumerate(rater_names):
                    histogram = [int((rows[:, j] == s).sum()) for s in scores]
                    if sum(histogram) != rows.shape[0]:
                        raise EvaluationError(
                            f"{group}/{rater}: scores outside the declared values"
                        )
                    counts[group][rater] = histogram
            return cls(counts=counts, scores=scores, case_scores=case_scores)
        raise EvaluationError("rater table needs either 'raters' histograms or 'cases' scores")


def load_rater_table(path) -> RaterTable:
    return RaterTable.from_dict(json.loads(Path(path).read_text()))


def save_rater_table(table: RaterTable, path) -> None:
    Path(path).write_text(json.dumps(table.to_dict(), indent=2) + "\n")
