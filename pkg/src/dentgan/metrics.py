"""Per-class confusion counts, P/TPR/TNR/Dice, and report rendering.

Masks are compared one class versus rest.  Per-image ("macro") averages
skip images where the class is absent from the ground truth (specificity
is averaged over all images); pooled-count ("micro") variants are also
reported.  Zero-denominator metrics are undefined and excluded from
averages rather than coerced to 0 or 1.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .palette import ClassPalette, NUM_CLASSES

FOREGROUND_CLASSES = tuple(range(1, NUM_CLASSES))


@dataclass(frozen=True)
class ConfusionCounts:
    class_id: int
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        if other.class_id != self.class_id:
            raise ValueError("cannot pool counts of different classes")
        return ConfusionCounts(
            self.class_id,
            self.tp + other.tp,
            self.fp + other.fp,
            self.tn + other.tn,
            self.fn + other.fn,
        )


@dataclass(frozen=True)
class MetricValues:
    precision: float | None
    tpr: float | None
    tnr: float | None
    dice: float | None
    accuracy: float | None

    def as_tuple(self):
        return (self.precision, self.tpr, self.tnr, self.dice)


def confusion(pred: np.ndarray, gt: np.ndarray, class_id: int) -> ConfusionCounts:
    """One-vs-rest pixel counts for a single class."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise DimensionMismatch(f"pred {pred.shape} vs gt {gt.shape}")
    p = pred == class_id
    g = gt == class_id
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    tn = pred.size - tp - fp - fn
    return ConfusionCounts(class_id, tp, fp, tn, fn)


def class_metrics(c: ConfusionCounts) -> MetricValues:
    """P, TPR, TNR, Dice (and accuracy); zero denominators yield None."""
    div = lambda num, den: (num / den) if den > 0 else None
    return MetricValues(
        precision=div(c.tp, c.tp + c.fp),
        tpr=div(c.tp, c.tp + c.fn),
        tnr=div(c.tn, c.tn + c.fp),
        dice=div(2 * c.tp, 2 * c.tp + c.fp + c.fn),
        accuracy=div(c.tp + c.tn, c.total),
    )


@dataclass
class ImageClassResult:
    pair_id: str
    class_id: int
    counts: ConfusionCounts
    metrics: MetricValues
    present: bool


@dataclass
class ClassRow:
    class_id: int
    name: str
    macro: MetricValues
    micro: MetricValues
    images_evaluated: int
    images_skipped: int
    pooled: ConfusionCounts


@dataclass
class MetricsReport:
    rows: list[ClassRow]
    aggregate_macro: MetricValues
    aggregate_micro: MetricValues
    per_image: list[ImageClassResult]


def _mean_defined(values) -> float | None:
    defined = [v for v in values if v is not None]
    return float(np.mean(defined)) if defined else None


def _average_rows(rows: list[ClassRow], which: str) -> MetricValues:
    picked = [getattr(r, which) for r in rows if r.class_id in FOREGROUND_CLASSES]
    return MetricValues(
        precision=_mean_defined([m.precision for m in picked]),
        tpr=_mean_defined([m.tpr for m in picked]),
        tnr=_mean_defined([m.tnr for m in picked]),
        dice=_mean_defined([m.dice for m in picked]),
        accuracy=_mean_defined([m.accuracy for m in picked]),
    )


def evaluate_dataset(pairs, palette: ClassPalette, ids=None) -> MetricsReport:
    """Evaluate (pred, gt) index-mask pairs over all 8 classes.

    Per-class macro rows average per-image metrics over images where the
    class appears in the ground truth (TNR and accuracy over all images);
    micro rows recompute the metrics from counts pooled over every image.
    The aggregate rows average the 7 foreground class rows.
    """
    pairs = list(pairs)
    if ids is None:
        ids = [f"pair-{i}" for i in range(len(pairs))]
    per_image: list[ImageClassResult] = []
    rows: list[ClassRow] = []
    for class_id in range(NUM_CLASSES):
        pooled = ConfusionCounts(class_id, 0, 0, 0, 0)
        image_results = []
        for pid, (pred, gt) in zip(ids, pairs):
            try:
                counts = confusion(pred, gt, class_id)
            except DimensionMismatch as exc:
                raise DimensionMismatch(f"pair '{pid}': {exc}") from exc
            result = ImageClassResult(
                pid, class_id, counts, class_metrics(counts), present=(counts.tp + counts.fn) > 0
            )
            image_results.append(result)
            pooled = pooled + counts
        per_image.extend(image_results)
        present = [r for r in image_results if r.present]
        macro = MetricValues(
            precision=_mean_defined([r.metrics.precision for r in present]),
            tpr=_mean_defined([r.metrics.tpr for r in present]),
            tnr=_mean_defined([r.metrics.tnr for r in image_results]),
            dice=_mean_defined([r.metrics.dice for r in present]),
            accuracy=_mean_defined([r.metrics.accuracy for r in image_results]),
        )
        rows.append(
            ClassRow(
                class_id=class_id,
                name=palette.entries[class_id].name,
                macro=macro,
                micro=class_metrics(pooled),
                images_evaluated=len(present),
                images_skipped=len(image_results) - len(present),
                pooled=pooled,
            )
        )
    return MetricsReport(
        rows=rows,
        aggregate_macro=_average_rows(rows, "macro"),
        aggregate_micro=_average_rows(rows, "micro"),
        per_image=per_image,
    )


def _fmt(value, digits=3) -> str:
    return "-" if value is None else f"{value:.{digits}f}"


def _fmt_full(value) -> str:
    return "-" if value is None else f"{value:.17g}"


def render_report(report: MetricsReport, format: str = "text", accuracy: bool = False) -> str:
    """Text table (3 decimal places, Table-3/4 column layout) or CSV."""
    if format == "text":
        return _render_text(report, accuracy)
    if format == "csv":
        return _render_csv(report, accuracy)
    raise ValueError(f"unknown report format '{format}'")


def _render_text(report: MetricsReport, accuracy: bool) -> str:
    out = io.StringIO()
    header = ["class", "P", "TP", "TN", "D"] + (["A"] if accuracy else [])
    widths = [12, 7, 7, 7, 7] + ([7] if accuracy else [])

    def line(cells):
        out.write("".join(str(c).ljust(w) for c, w in zip(cells, widths)).rstrip() + "\n")

    def block(which):
        line(header)
        for row in report.rows:
            m = getattr(row, which)
            cells = [row.name, _fmt(m.precision), _fmt(m.tpr), _fmt(m.tnr), _fmt(m.dice)]
            if accuracy:
                cells.append(_fmt(m.accuracy))
            line(cells)
        agg = report.aggregate_macro if which == "macro" else report.aggregate_micro
        cells = ["aggregate", _fmt(agg.precision), _fmt(agg.tpr), _fmt(agg.tnr), _fmt(agg.dice)]
        if accuracy:
            cells.append(_fmt(agg.accuracy))
        line(cells)

    out.write("per-image averages (macro)\n")
    block("macro")
    out.write("\npooled counts (micro)\n")
    block("micro")
    return out.getvalue()


def _render_csv(report: MetricsReport, accuracy: bool) -> str:
    out = io.StringIO()
    header = "class,precision,tpr,tnr,dice,images,skipped"
    if accuracy:
        header += ",accuracy"
    out.write(header + "\n")

    def row_line(name, m: MetricValues, images, skipped):
        cells = [name, _fmt_full(m.precision), _fmt_full(m.tpr), _fmt_full(m.tnr),
                 _fmt_full(m.dice), str(images), str(skipped)]
        if accuracy:
            cells.append(_fmt_full(m.accuracy))
        out.write(",".join(cells) + "\n")

    total_images = len({r.pair_id for r in report.per_image}) if report.per_image else 0
    for row in report.rows:
        row_line(row.name, row.macro, row.images_evaluated, row.images_skipped)
    row_line("aggregate", report.aggregate_macro, total_images, 0)
    for row in report.rows:
        row_line(f"{row.name}_micro", row.micro, total_images, 0)
    row_line("aggregate_micro", report.aggregate_micro, total_images, 0)
    return out.getvalue()
