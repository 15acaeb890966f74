"""Alignment quality metric over annotated point pairs.

A method under evaluation produces a flow for each frame pair; quality is
the mean distance between each annotated point mapped through the flow and
its annotated partner. Per pair, the score is clamped to the identity-flow
distance, so a diverging method scores no worse than doing nothing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import AnnotationError
from .flowio import FlowField

CATEGORIES = ("RE", "LT", "LL", "MF", "SYNTH")


@dataclass(frozen=True)
class AnnotationPair:
    """Annotated matches for one frame pair.

    category: scene category tag, one of CATEGORIES.
    points_a, points_b: (n, 2) pixel positions, row k in a matching row k
        in b.
    """

    category: str
    points_a: np.ndarray
    points_b: np.ndarray

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise AnnotationError(
                f"unknown category {self.category!r}; expected one of {', '.join(CATEGORIES)}"
            )
        pa = np.asarray(self.points_a, dtype=np.float64)
        pb = np.asarray(self.points_b, dtype=np.float64)
        if pa.ndim != 2 or pa.shape[1] != 2 or pa.shape != pb.shape:
            raise AnnotationError(
                f"point arrays must both be (n, 2); got {pa.shape} and {pb.shape}"
            )
        if pa.shape[0] < 1:
            raise AnnotationError("annotation needs at least one point pair")
        if not (np.all(np.isfinite(pa)) and np.all(np.isfinite(pb))):
            raise AnnotationError("annotation points must be finite")
        object.__setattr__(self, "points_a", pa)
        object.__setattr__(self, "points_b", pb)

    @property
    def n_points(self) -> int:
        return self.points_a.shape[0]


def save_annotation(path, ann: AnnotationPair) -> None:
    payload = {
        "category": ann.category,
        "points_a": [[float(x), float(y)] for x, y in ann.points_a],
        "points_b": [[float(x), float(y)] for x, y in ann.points_b],
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_annotation(path) -> AnnotationPair:
    try:
        with open(path, "r", encoding="ascii") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise AnnotationError(f"{path}: {exc}") from exc
    for key in ("category", "points_a", "points_b"):
        if key not in payload:
            raise AnnotationError(f"{path}: missing key {key!r}")
    return AnnotationPair(
        category=payload["category"],
        points_a=np.asarray(payload["points_a"], dtype=np.float64),
        points_b=np.asarray(payload["points_b"], dtype=np.float64),
    )


def geometry_distance(flow: FlowField, ann: AnnotationPair) -> float:
    """Mean distance between flow-mapped a-points and their b-points."""
    mapped = ann.points_a + flow.sample(ann.points_a)
    return float(np.mean(np.linalg.norm(mapped - ann.points_b, axis=1)))


def identity_distance(ann: AnnotationPair) -> float:
    """Geometry distance of the all-zero flow."""
    return float(np.mean(np.linalg.norm(ann.points_a - ann.points_b, axis=1)))


@dataclass(frozen=True)
class EvalRow:
    name: str
    category: str
    n_points: int
    raw: float
    identity: float

    @property
    def clamped(self) -> float:
        return min(self.raw, self.identity)


@dataclass(frozen=True)
class EvalReport:
    """Per-pair rows plus category and overall means of clamped distances."""

    rows: tuple

    @property
    def overall(self) -> float:
        return float(np.mean([r.clamped for r in self.rows]))

    def per_category(self) -> dict:
        out = {}
        for cat in CATEGORIES:
            vals = [r.clamped for r in self.rows if r.category == cat]
            if vals:
                out[cat] = float(np.mean(vals))
        return out

    def to_json(self) -> str:
        payload = {
            "pairs": [
                {
                    "name": r.name,
                    "category": r.category,
                    "n_points": r.n_points,
                    "raw": r.raw,
                    "identity": r.identity,
                    "clamped": r.clamped,
                }
                for r in self.rows
            ],
            "per_category": self.per_category(),
            "overall": self.overall,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        lines = ["name,category,n_points,raw,identity,clamped"]
        for r in self.rows:
            lines.append(
                f"{r.name},{r.category},{r.n_points},{r.raw!r},{r.identity!r},{r.clamped!r}"
            )
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        name_w = max([len("pair")] + [len(r.name) for r in self.rows])
        lines = [
            f"{'pair':<{name_w}}  {'cat':<5} {'pts':>4} {'raw':>10} {'identity':>10} {'clamped':>10}"
        ]
        for r in self.rows:
            lines.append(
                f"{r.name:<{name_w}}  {r.category:<5} {r.n_points:>4}"
                f" {r.raw:>10.4f} {r.identity:>10.4f} {r.clamped:>10.4f}"
            )
        lines.append("")
        for cat, val in self.per_category().items():
            lines.append(f"mean[{cat}] = {val:.4f}")
        lines.append(f"overall = {self.overall:.4f}")
        return "\n".join(lines) + "\n"


def evaluate_flows(items) -> EvalReport:
    """Score (name, flow, annotation) triples.

    Raises AnnotationError when items is empty; flows that cannot cover an
    annotated point surface the underlying sampling error.
    """
    items = list(items)
    if not items:
        raise AnnotationError("nothing to evaluate")
    rows = []
    for name, flow, ann in items:
        rows.append(
            EvalRow(
                name=name,
                category=ann.category,
                n_points=ann.n_points,
                raw=geometry_distance(flow, ann),
                identity=identity_distance(ann),
            )
        )
    return EvalReport(rows=tuple(rows))
