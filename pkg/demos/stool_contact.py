"""A stool standing on the floor: where the leg tips touch the ground.

Leg tips sit next to both the floor and the seat, so a grower could walk
floor -> leg -> seat. On this rendered scene both criteria keep the stool
apart at merge_prob 0.3 and both swallow it at 0.7; the case where they
differ is the hand-built leg graph in tests/test_regiongrow.py.
"""
import numpy as np

from superseg3d import synth
from superseg3d.pipeline import PipelineConfig, run_pipeline

spec = synth.stool_scene_spec(seed=0, num_views=24)
noise = synth.NoiseModel(merge_prob=0.3, seed=1)   # masks sometimes fuse stool and floor
scene = synth.build_scene(spec, noise)

for criterion in ("pairwise", "multilevel"):
    for thresholds in ((0.7,), (0.9, 0.8, 0.7)):
        cfg = PipelineConfig(criterion=criterion, thresholds=thresholds)
        res = run_pipeline(scene.cloud, scene.views, cfg, gt_ids=scene.gt_ids)
        floor_region = np.bincount(res.point_ids[scene.gt_ids == synth.FLOOR_ID]).argmax()
        stool_share = np.mean(res.point_ids[scene.gt_ids == 2] == floor_region)
        print(f"{criterion:>10} {str(thresholds):>16}: AP {res.report.ap:.3f}, "
              f"{res.labeling.num_regions} regions, {stool_share:.0%} of the stool in the floor region")
