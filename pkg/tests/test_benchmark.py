import numpy as np
import pytest

from superseg3d import benchmark
from superseg3d.pipeline import PipelineConfig
from superseg3d.regiongrow import MULTILEVEL, PAIRWISE, SCHEDULE_CLUTTERED, SCHEDULE_FINE


def test_ablation_rows_map_to_configs():
    base = PipelineConfig()
    cfgs = {r.name: r.config(base, SCHEDULE_FINE) for r in benchmark.ABLATION_ROWS}
    assert cfgs["point-level"].point_level and cfgs["point-level"].thresholds == (0.7,)
    assert cfgs["superpoints"].criterion == PAIRWISE and cfgs["superpoints"].thresholds == (0.7,)
    assert cfgs["superpoints+multilevel"].criterion == MULTILEVEL
    assert cfgs["superpoints+progressive"].thresholds == SCHEDULE_FINE
    assert cfgs["full"].criterion == MULTILEVEL and cfgs["full"].thresholds == SCHEDULE_FINE
    assert not any(c.point_level for n, c in cfgs.items() if n != "point-level")


def test_benchmark_scenes_are_seeded():
    a, b = benchmark.benchmark_scene(2, num_objects=3, num_views=4), benchmark.benchmark_scene(2, num_objects=3, num_views=4)
    assert a.cloud.positions.tobytes() == b.cloud.positions.tobytes()
    assert all(np.array_equal(x.masks.labels, y.masks.labels) for x, y in zip(a.views, b.views))


def test_cluttered_schedule_beats_each_fixed_threshold(noisy_scenes):
    """Five-stage schedule versus each of its thresholds used alone.

    Known to fail on this benchmark: merged masks put object/floor
    affinities near 0.5, so the last stage over-merges.
    """
    schedules = {f"fixed {t}": (t,) for t in SCHEDULE_CLUTTERED}
    schedules["cluttered"] = SCHEDULE_CLUTTERED
    results = {r.name: r.mean()["AP"] for r in benchmark.threshold_study(noisy_scenes, schedules)}
    print({k: round(v, 4) for k, v in results.items()})
    for name, ap in results.items():
        assert results["cluttered"] >= ap, f"cluttered {results['cluttered']:.3f} < {name} {ap:.3f}"
