"""Seeded synthetic benchmark: ablation grid, view-fraction and threshold studies."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .pipeline import PipelineConfig, run_pipeline
from .regiongrow import MULTILEVEL, PAIRWISE, SCHEDULE_FINE
from .synth import NoiseModel, SyntheticScene, build_scene, random_scene_spec

BENCHMARK_NOISE = dict(merge_prob=0.3, split_prob=0.2, erode_px=2)
SCENE_SEED_OFFSET = 100


def benchmark_scene(index: int, num_objects: int = 8, num_views: int = 24,
                    noise: dict = BENCHMARK_NOISE) -> SyntheticScene:
    """Scene ``index`` of the benchmark; the noise stream is seeded by ``index`` too."""
    spec = random_scene_spec(SCENE_SEED_OFFSET + index, num_objects, num_views)
    return build_scene(spec, NoiseModel(seed=index, **noise))


def benchmark_scenes(count: int, **kw) -> list:
    return [benchmark_scene(k, **kw) for k in range(count)]


@dataclass(frozen=True)
class AblationRow:
    name: str
    superpoints: bool
    multilevel: bool
    progressive: bool

    def config(self, base: PipelineConfig, schedule: Sequence[float]) -> PipelineConfig:
        # non-progressive rows run a single stage at the schedule's final threshold
        thresholds = tuple(schedule) if self.progressive else (schedule[-1],)
        return base.with_overrides(point_level=not self.superpoints, thresholds=thresholds,
                                   criterion=MULTILEVEL if self.multilevel else PAIRWISE)


ABLATION_ROWS = (
    AblationRow("point-level", False, False, False),
    AblationRow("superpoints", True, False, False),
    AblationRow("superpoints+multilevel", True, True, False),
    AblationRow("superpoints+progressive", True, False, True),
    AblationRow("full", True, True, True),
)


@dataclass
class StudyResult:
    name: str
    ap: np.ndarray
    ap50: np.ndarray
    ap25: np.ndarray
    regions: np.ndarray

    def mean(self) -> dict:
        return {"name": self.name, "AP": float(self.ap.mean()), "AP50": float(self.ap50.mean()),
                "AP25": float(self.ap25.mean()), "regions": float(self.regions.mean()),
                "scenes": len(self.ap)}


def evaluate_config(name: str, scenes: Iterable[SyntheticScene], config: PipelineConfig) -> StudyResult:
    rows = []
    for scene in scenes:
        res = run_pipeline(scene.cloud, scene.views, config, gt_ids=scene.gt_ids)
        rows.append((res.report.ap, res.report.ap50, res.report.ap25, res.labeling.num_regions))
    a = np.array(rows, dtype=float).reshape(-1, 4)
    return StudyResult(name, a[:, 0], a[:, 1], a[:, 2], a[:, 3])


def run_ablation(scenes: Sequence[SyntheticScene], base: PipelineConfig = PipelineConfig(),
                 schedule: Sequence[float] = SCHEDULE_FINE, rows=ABLATION_ROWS) -> list:
    return [evaluate_config(r.name, scenes, r.config(base, schedule)) for r in rows]


def ablation_table(results: Sequence[StudyResult], rows=ABLATION_ROWS) -> str:
    mark = lambda b: "x" if b else ""
    lines = [f"{'superpoints':>11} {'multilevel':>10} {'progressive':>11} | {'AP':>6} {'AP50':>6} {'AP25':>6}"]
    lines.append("-" * len(lines[0]))
    for row, res in zip(rows, results):
        m = res.mean()
        lines.append(f"{mark(row.superpoints):>11} {mark(row.multilevel):>10} {mark(row.progressive):>11} | "
                     f"{100 * m['AP']:6.1f} {100 * m['AP50']:6.1f} {100 * m['AP25']:6.1f}")
    return "\n".join(lines)


def view_fraction_study(scenes: Sequence[SyntheticScene], fractions: Sequence[float],
                        base: PipelineConfig = PipelineConfig()) -> list:
    return [evaluate_config(f"views={f:g}", scenes, base.with_overrides(views_fraction=f)) for f in fractions]


def threshold_study(scenes: Sequence[SyntheticScene], schedules: dict,
                    base: PipelineConfig = PipelineConfig()) -> list:
    """One result per named schedule, e.g. ``{"fixed 0.5": (0.5,), "progressive": SCHEDULE_FINE}``."""
    return [evaluate_config(name, scenes, base.with_overrides(thresholds=tuple(th)))
            for name, th in schedules.items()]


def gt_region_counts(scenes: Sequence[SyntheticScene]) -> np.ndarray:
    return np.array([len(np.unique(s.gt_ids[s.gt_ids > 0])) for s in scenes])
