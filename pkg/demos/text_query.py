"""Look up instances by name with back-projected 2D semantic masks.

The synthetic renderer knows which object each pixel shows, so its id
images stand in for an open-vocabulary 2D segmenter.
"""
from superseg3d import synth
from superseg3d.openvocab import SemanticMaskImage, backproject_semantics, query_instances
from superseg3d.pipeline import PipelineConfig, run_pipeline

scene = synth.build_scene(synth.random_scene_spec(seed=12, num_objects=5, num_views=12))
result = run_pipeline(scene.cloud, scene.views, PipelineConfig())

table = scene.semantic_table()
sems = [SemanticMaskImage(img, table) for img in scene.semantic_images()]
votes = backproject_semantics(scene.views, sems, scene.cloud, radius=0.02)
print(f"{(votes.label > 0).mean():.1%} of points received a label vote")

for name in list(table.values()) + ["toaster"]:
    hits = query_instances(result.point_ids, votes, name, threshold=0.5)
    shown = ", ".join(f"#{i} ({o:.2f})" for i, o in hits.matches) or "nothing"
    print(f"{name:>10}: {shown}")
