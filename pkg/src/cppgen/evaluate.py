"""Quantitative evaluation: IoU-matched context metrics and
longest-common-substring segment metrics.

"Accuracy" here is tp / (tp + fp + fn): detection tasks have no true
negatives, so this is the only well-defined single-ratio summary. Keep that
definition in mind when comparing against other reported tables.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import kernels
from .model import Context, DataType, EvalConfig, Kind, match_boxes

logger = logging.getLogger(__name__)

TASK_TEXTUAL = "Textual"
TASK_ICONIC = "Iconic"
TASK_OVERALL = "Overall"
TASK_SEGMENTS = "Segments"

CONTEXT_TASKS = (TASK_TEXTUAL, TASK_ICONIC, TASK_OVERALL)
ALL_TASKS = (*CONTEXT_TASKS, TASK_SEGMENTS)


@dataclass
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def populated(self) -> bool:
        return (self.tp + self.fp + self.fn) > 0

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else 0.0

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 0.0

    @property
    def accuracy(self) -> float:
        denom = self.tp + self.fp + self.fn
        return self.tp / denom if denom else 1.0

    def add(self, other: "Counts"):
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn


@dataclass
class MetricsReport:
    """Per-task, per-data-type counts with derived ratio metrics."""

    tasks: dict[str, dict[DataType, Counts]] = field(default_factory=dict)

    def counts(self, task: str, dt: DataType) -> Counts:
        return self.tasks.setdefault(task, {dt2: Counts() for dt2 in DataType})[dt]

    def macro(self, task: str) -> dict[str, float]:
        """Unweighted mean over data types with at least one gt or pred."""
        per_type = self.tasks.get(task, {})
        populated = [c for c in per_type.values() if c.populated]
        if not populated:
            return {"accuracy": 1.0, "precision": 0.0, "recall": 0.0}
        n = len(populated)
        return {
            "accuracy": sum(c.accuracy for c in populated) / n,
            "precision": sum(c.precision for c in populated) / n,
            "recall": sum(c.recall for c in populated) / n,
        }

    def merge(self, other: "MetricsReport"):
        for task, per_type in other.tasks.items():
            for dt, c in per_type.items():
                self.counts(task, dt).add(c)

    def to_json(self) -> dict:
        out: dict = {"tasks": {}}
        for task in ALL_TASKS:
            if task not in self.tasks:
                continue
            per_type = {}
            for dt in DataType:
                c = self.tasks[task][dt]
                per_type[dt.value] = {
                    "tp": c.tp,
                    "fp": c.fp,
                    "fn": c.fn,
                    "accuracy": c.accuracy,
                    "precision": c.precision,
                    "recall": c.recall,
                }
            out["tasks"][task] = {"per_type": per_type, "macro": self.macro(task)}
        return out

    def format_table(self) -> str:
        """Aligned plain-text tables, one block per task."""
        lines: list[str] = []
        name_w = max(len(dt.value) for dt in DataType)
        name_w = max(name_w, len("Average"))
        for task in ALL_TASKS:
            if task not in self.tasks:
                continue
            lines.append(task)
            header = f"{'Category':<{name_w}}  {'Accuracy':>8}  {'Precision':>9}  {'Recall':>6}"
            lines.append(header)
            lines.append("-" * len(header))
            for dt in DataType:
                c = self.tasks[task][dt]
                lines.append(
                    f"{dt.value:<{name_w}}  {c.accuracy:>8.2f}  {c.precision:>9.2f}  {c.recall:>6.2f}"
                )
            m = self.macro(task)
            lines.append(
                f"{'Average':<{name_w}}  {m['accuracy']:>8.2f}  {m['precision']:>9.2f}  {m['recall']:>6.2f}"
            )
            lines.append("")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Context metrics

ContextsByScreenshot = Mapping[str, Sequence[Context]]


def eval_contexts(
    preds: Mapping[str, ContextsByScreenshot],
    gts: Mapping[str, ContextsByScreenshot],
    cfg: EvalConfig = EvalConfig(),
) -> MetricsReport:
    """Match predictions against ground truth per screenshot and count
    TP/FP/FN per data type for the Textual, Iconic, and Overall tasks.

    `preds` and `gts` map app id -> screenshot id -> contexts. Every
    predicted app/screenshot must exist in the ground truth.
    """
    report = MetricsReport()
    for task in CONTEXT_TASKS:
        for dt in DataType:
            report.counts(task, dt)
    unknown_apps = set(preds) - set(gts)
    if unknown_apps:
        raise ValueError(f"predictions reference unknown apps: {sorted(unknown_apps)}")
    for app_id, gt_shots in gts.items():
        pred_shots = preds.get(app_id, {})
        unknown = set(pred_shots) - set(gt_shots)
        if unknown:
            raise ValueError(
                f"predictions for app {app_id!r} reference unknown screenshots: {sorted(unknown)}"
            )
        for shot_id, gt_list in gt_shots.items():
            pred_list = list(pred_shots.get(shot_id, ()))
            gt_list = list(gt_list)
            for task, kind in (
                (TASK_TEXTUAL, Kind.TEXT),
                (TASK_ICONIC, Kind.ICON),
                (TASK_OVERALL, None),
            ):
                p = [c for c in pred_list if kind is None or c.kind is kind]
                g = [c for c in gt_list if kind is None or c.kind is kind]
                matches = match_boxes(p, g, cfg)
                matched_p = {pi for pi, _ in matches}
                matched_g = {gi for _, gi in matches}
                for pi, gi in matches:
                    report.counts(task, g[gi].data_type).tp += 1
                for pi, c in enumerate(p):
                    if pi not in matched_p:
                        report.counts(task, c.data_type).fp += 1
                for gi, c in enumerate(g):
                    if gi not in matched_g:
                        report.counts(task, c.data_type).fn += 1
    return report


# ---------------------------------------------------------------------------
# Segment metrics

_PHRASE_SPLIT_RE = re.compile(r"[,.;:!?\n\r]")


def split_phrases(segment: str | Sequence[str]) -> list[str]:
    """Phrases of a segment: split at punctuation and line breaks,
    lowercased, whitespace collapsed, empties dropped."""
    if isinstance(segment, str):
        texts = [segment]
    else:
        texts = list(segment)
    phrases: list[str] = []
    for text in texts:
        for part in _PHRASE_SPLIT_RE.split(text):
            norm = " ".join(part.lower().split())
            if norm:
                phrases.append(norm)
    return phrases


def lcs(a: str, b: str) -> int:
    """Character-level longest common substring length."""
    return kernels.lcs_length(a, b)


def segment_sim(s_ret: str | Sequence[str], s_gt: str | Sequence[str]) -> float:
    """Phrase-pairwise normalized longest-common-substring similarity.

    Can exceed 1 for multi-phrase segments; reported unclamped. Two empty
    segments score 1, one empty segment scores 0.
    """
    ret_phrases = split_phrases(s_ret)
    gt_phrases = split_phrases(s_gt)
    n, m = len(ret_phrases), len(gt_phrases)
    if n == 0 and m == 0:
        return 1.0
    if n == 0 or m == 0:
        return 0.0
    total = 0.0
    for p in ret_phrases:
        for q in gt_phrases:
            total += lcs(p, q) / min(len(p), len(q))
    return total / min(n, m)


@dataclass(frozen=True)
class SegmentText:
    """A retrieved or annotated segment: fallback flag plus sentence texts."""

    fallback: bool
    sentences: tuple[str, ...] = ()


SegmentsByType = Mapping[DataType, SegmentText]


def eval_segments(
    preds: Mapping[str, SegmentsByType],
    gts: Mapping[str, SegmentsByType],
    cfg: EvalConfig = EvalConfig(),
) -> MetricsReport:
    """Per app and data type: both fallback counts as TP; a non-fallback
    prediction against a fallback truth is FP; the reverse is FN; two
    non-fallback segments are TP at segment_sim >= threshold, else FP+FN.
    Apps missing from `preds` contribute FNs for every disclosed type."""
    report = MetricsReport()
    for dt in DataType:
        report.counts(TASK_SEGMENTS, dt)
    for app_id, gt_map in gts.items():
        pred_map = preds.get(app_id)
        if pred_map is None:
            logger.warning("no predictions for app %s; counting disclosed types as FN", app_id)
            for dt in DataType:
                gt_seg = _gt_segment(gt_map, dt, app_id)
                if not gt_seg.fallback:
                    report.counts(TASK_SEGMENTS, dt).fn += 1
            continue
        for dt in DataType:
            gt_seg = _gt_segment(gt_map, dt, app_id)
            pred_seg = pred_map.get(dt, SegmentText(fallback=True))
            c = report.counts(TASK_SEGMENTS, dt)
            if pred_seg.fallback and gt_seg.fallback:
                c.tp += 1
            elif not pred_seg.fallback and gt_seg.fallback:
                c.fp += 1
            elif pred_seg.fallback and not gt_seg.fallback:
                c.fn += 1
            else:
                sim = segment_sim(pred_seg.sentences, gt_seg.sentences)
                if sim >= cfg.segment_threshold:
                    c.tp += 1
                else:
                    c.fp += 1
                    c.fn += 1
    return report


def _gt_segment(gt_map: SegmentsByType, dt: DataType, app_id: str) -> SegmentText:
    seg = gt_map.get(dt)
    if seg is None:
        logger.warning(
            "ground truth for app %s lacks data type %s; treating as fallback", app_id, dt.value
        )
        return SegmentText(fallback=True)
    return seg


def evaluate_all(
    pred_contexts: Mapping[str, ContextsByScreenshot],
    gt_contexts: Mapping[str, ContextsByScreenshot],
    pred_segments: Mapping[str, SegmentsByType],
    gt_segments: Mapping[str, SegmentsByType],
    cfg: EvalConfig = EvalConfig(),
) -> MetricsReport:
    report = eval_contexts(pred_contexts, gt_contexts, cfg)
    report.merge(eval_segments(pred_segments, gt_segments, cfg))
    return report
