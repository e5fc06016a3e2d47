"""Location-dependent SELD metrics (ER20, F20, LE_CD, LR_CD) and SELD score.

Scoring works on 1 s segments (10 label frames). Inside each segment and
class, predicted and reference directions are paired by an optimal
assignment that minimizes the total angular distance. A pair is a true
positive when its distance is at most the threshold. Counts are pooled
over segments, classes and clips (micro averaging).
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .events import FRAMES_PER_SEGMENT, NUM_CLASSES, EventAnnotation
from .geometry import angular_distance_array, sph_to_cart_array

DOA_THRESHOLD_DEG = 20.0
LE_SENTINEL_DEG = 180.0


@dataclass(frozen=True)
class FrameEvent:
    frame_index: int
    class_index: int
    doa: tuple  # unit (x, y, z)

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError(f"negative frame index {self.frame_index}")
        if not 0 <= self.class_index < NUM_CLASSES:
            raise ValueError(f"class index {self.class_index} outside 0..{NUM_CLASSES - 1}")
        object.__setattr__(self, "doa", tuple(float(c) for c in self.doa))

    @classmethod
    def from_annotation(cls, e: EventAnnotation) -> "FrameEvent":
        return cls(e.frame_index, e.class_index, tuple(sph_to_cart_array(e.doa.azimuth_deg, e.doa.elevation_deg)))


@dataclass(frozen=True)
class MetricsReport:
    er20: float
    f20: float
    le_cd_deg: float
    lr_cd: float
    seld_score: float
    tp: int = 0
    fp: int = 0
    fn: int = 0
    n_ref: int = 0
    n_pred: int = 0
    n_matched: int = 0
    le_undefined: bool = False

    def as_dict(self) -> dict:
        return asdict(self)


def seld_score(er: float, f: float, le_deg: float, lr: float) -> float:
    return (er + (1.0 - f) + le_deg / 180.0 + (1.0 - lr)) / 4.0


def _group(events: Iterable[FrameEvent], segment_frames: int):
    groups = defaultdict(list)
    for e in events:
        groups[(e.frame_index // segment_frames, e.class_index)].append(e.doa)
    return groups


class SeldAccumulator:
    """Collects counts over any number of clips before producing a report."""

    def __init__(self, threshold_deg: float = DOA_THRESHOLD_DEG, segment_frames: int = FRAMES_PER_SEGMENT):
        self.threshold_deg = threshold_deg
        self.segment_frames = segment_frames
        self.tp = self.fp = self.fn = 0
        self.errors = 0  # sum over segments of S + D + I
        self.n_ref = self.n_pred = self.n_matched = 0
        self.distance_sum = 0.0

    def update(self, preds: Sequence[FrameEvent], refs: Sequence[FrameEvent]) -> None:
        pred_groups = _group(preds, self.segment_frames)
        ref_groups = _group(refs, self.segment_frames)
        seg_fn, seg_fp = defaultdict(int), defaultdict(int)
        for key in sorted(set(pred_groups) | set(ref_groups)):
            p = np.array(pred_groups.get(key, []), dtype=float).reshape(-1, 3)
            r = np.array(ref_groups.get(key, []), dtype=float).reshape(-1, 3)
            dists = np.empty(0)
            if len(p) and len(r):
                cost = angular_distance_array(p[:, None, :], r[None, :, :])
                rows, cols = linear_sum_assignment(cost)
                dists = cost[rows, cols]
            tp = int(np.sum(dists <= self.threshold_deg))
            self.tp += tp
            self.fp += len(p) - tp
            self.fn += len(r) - tp
            seg_fp[key[0]] += len(p) - tp
            seg_fn[key[0]] += len(r) - tp
            self.n_pred += len(p)
            self.n_ref += len(r)
            self.n_matched += len(dists)
            self.distance_sum += float(np.sum(dists))
        for seg in set(seg_fn) | set(seg_fp):
            fn, fp = seg_fn[seg], seg_fp[seg]
            substitutions = min(fn, fp)
            deletions = max(0, fn - fp)
            insertions = max(0, fp - fn)
            self.errors += substitutions + deletions + insertions

    def report(self) -> MetricsReport:
        if self.n_ref == 0 and self.n_pred == 0:
            return MetricsReport(0.0, 1.0, 0.0, 1.0, 0.0)
        er = self.errors / max(self.n_ref, 1)
        denom = 2 * self.tp + self.fp + self.fn
        f = 2 * self.tp / denom if denom else 1.0
        undefined = self.n_matched == 0
        le = LE_SENTINEL_DEG if undefined else self.distance_sum / self.n_matched
        lr = self.n_matched / self.n_ref if self.n_ref else 1.0
        return MetricsReport(
            er, f, le, lr, seld_score(er, f, le, lr),
            self.tp, self.fp, self.fn, self.n_ref, self.n_pred, self.n_matched, undefined,
        )


def compute_seld_metrics(preds: Sequence[FrameEvent], refs: Sequence[FrameEvent],
                         threshold_deg: float = DOA_THRESHOLD_DEG,
                         segment_frames: int = FRAMES_PER_SEGMENT) -> MetricsReport:
    acc = SeldAccumulator(threshold_deg, segment_frames)
    acc.update(preds, refs)
    return acc.report()
