"""Command-line entry point: stage-wise or end-to-end runs over a scene directory.

Exit codes: 0 success, 1 bad input, 2 internal invariant violation.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import benchmark, io as sio
from .affinity import AffinityMatrix
from .errors import InvariantViolation, SceneError
from .evaluation import evaluate_labels
from .openvocab import SemanticMaskImage, backproject_semantics, query_instances
from .oversegment import AdjacencyGraph, SuperpointPartition
from .pipeline import PipelineConfig, compute_affinity, grow, load_scene, oversegment_cloud, select_views
from .regiongrow import SCHEDULE_CLUTTERED, SCHEDULE_FINE
from .synth import NoiseModel, build_scene, load_scene_spec, random_scene_spec, write_scene_dir

log = logging.getLogger("superseg3d")

SCHEDULES = {"fine": SCHEDULE_FINE, "cluttered": SCHEDULE_CLUTTERED}
SUPERPOINTS, ADJACENCY, AFFINITY = "superpoints.json", "adjacency.txt", "affinity.txt"
INSTANCES, INSTANCE_RANGES, CONFIDENCES, REPORT = "instances.txt", "instances.json", "confidences.json", "report.json"


# ------------------------------------------------------------------ artifacts

def save_adjacency(path, graph: AdjacencyGraph) -> None:
    with open(path, "w") as fh:
        fh.write(f"# nodes {graph.num_nodes}\n")
        for i, j in graph.edges().tolist():
            fh.write(f"{i} {j}\n")


def load_adjacency(path) -> AdjacencyGraph:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# nodes "):
        raise SceneError(f"{path}: missing '# nodes N' header")
    pairs = [tuple(map(int, ln.split())) for ln in lines[1:] if ln.strip()]
    return AdjacencyGraph.from_pairs(int(lines[0].split()[2]), pairs)


def index_ranges(indices: np.ndarray) -> list:
    """Sorted indices as inclusive [start, end] runs."""
    if len(indices) == 0:
        return []
    breaks = np.nonzero(np.diff(indices) != 1)[0]
    starts = np.r_[indices[0], indices[breaks + 1]]
    ends = np.r_[indices[breaks], indices[-1]]
    return [[int(a), int(b)] for a, b in zip(starts, ends)]


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_instances(out: Path, point_ids: np.ndarray, confidences: dict) -> None:
    sio.write_ids(out / INSTANCES, point_ids)
    order = np.argsort(point_ids, kind="stable")
    keys, starts = np.unique(point_ids[order], return_index=True)
    groups = dict(zip(keys.tolist(), np.split(order, starts[1:])))
    write_json(out / INSTANCE_RANGES, {str(k): index_ranges(v) for k, v in groups.items() if k > 0})
    write_json(out / CONFIDENCES, {str(k): v for k, v in confidences.items()})


def read_confidences(path) -> dict:
    with open(path) as fh:
        return {int(k): float(v) for k, v in json.load(fh).items()}


def emit(report: dict, out=None) -> None:
    text = json.dumps(report, indent=1, sort_keys=True)
    if out is not None:
        Path(out).write_text(text + "\n")
    print(text)


# ------------------------------------------------------------------ config

def build_config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_keyvalue(sio.read_keyvalue(args.config)) if args.config else PipelineConfig()
    thresholds = None
    if args.schedule:
        thresholds = SCHEDULES[args.schedule]
    if args.thresholds:
        thresholds = tuple(float(t) for t in args.thresholds.replace(",", " ").split())
    return cfg.with_overrides(
        thresholds=thresholds, seed=args.seed, threads=args.threads, views_fraction=args.views_fraction,
        gamma=args.gamma, criterion=args.criterion, tolerance=args.tolerance, w_min=args.w_min,
        min_points=args.min_points, point_level=True if args.point_level else None,
    )


def add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration")
    g.add_argument("--config", help="key = value file of pipeline settings")
    g.add_argument("--seed", type=int)
    g.add_argument("--threads", type=int)
    g.add_argument("--views-fraction", type=float, help="use the first ceil(f*M) frames")
    g.add_argument("--thresholds", help="descending merge thresholds, e.g. '0.9,0.8,0.7'")
    g.add_argument("--schedule", choices=sorted(SCHEDULES))
    g.add_argument("--gamma", type=float)
    g.add_argument("--criterion", choices=["multilevel", "pairwise"])
    g.add_argument("--tolerance", type=float, help="depth tolerance in metres")
    g.add_argument("--w-min", type=float)
    g.add_argument("--min-points", type=int)
    g.add_argument("--point-level", action="store_true", help="treat every point as a superpoint")


def work_dir(args) -> Path:
    out = Path(args.out or args.scene)
    out.mkdir(parents=True, exist_ok=True)
    return out


def need(path: Path) -> Path:
    if not path.exists():
        raise SceneError(f"missing required path: {path}")
    return path


def load_partition(out: Path):
    partition = SuperpointPartition.from_labels(sio.read_segs(need(out / SUPERPOINTS)))
    return partition, load_adjacency(need(out / ADJACENCY))


# ------------------------------------------------------------------ commands

def cmd_oversegment(args) -> int:
    cfg, out = build_config(args), work_dir(args)
    scene = load_scene(args.scene, with_masks=False)
    views = select_views(scene.views, cfg.views_fraction)
    _, partition, adjacency = oversegment_cloud(scene.cloud, cfg, views, scene.segs)
    sio.write_segs(out / SUPERPOINTS, partition.label)
    save_adjacency(out / ADJACENCY, adjacency)
    emit({"superpoints": partition.num_superpoints, "edges": len(adjacency.edges()), "points": len(scene.cloud)})
    return 0


def cmd_affinity(args) -> int:
    cfg, out = build_config(args), work_dir(args)
    scene = load_scene(args.scene)
    partition, adjacency = load_partition(out)
    if len(partition.label) != len(scene.cloud):
        raise SceneError(f"{out / SUPERPOINTS} does not match {args.scene}/cloud.ply")
    views = select_views(scene.views, cfg.views_fraction)
    matrix = compute_affinity(scene.cloud, partition, adjacency, views, cfg)
    matrix.save(out / AFFINITY)
    emit({"pairs": len(matrix.pairs), "with_evidence": int(matrix.has_evidence.sum()), "views": len(views)})
    return 0


def cmd_grow(args) -> int:
    cfg, out = build_config(args), work_dir(args)
    partition, adjacency = load_partition(out)
    matrix = AffinityMatrix.load(need(out / AFFINITY))
    labeling, point_ids, conf = grow(partition, adjacency, matrix, cfg)
    write_instances(out, point_ids, conf)
    emit({"regions": labeling.num_regions, "thresholds": list(cfg.thresholds),
          "regions_per_stage": [int(s.max()) for s in labeling.stages]})
    return 0


def cmd_eval(args) -> int:
    pred = sio.read_ids(need(Path(args.pred)))
    gt = sio.read_ids(need(Path(args.gt)))
    conf = read_confidences(args.confidences) if args.confidences else None
    report = evaluate_labels(pred, gt, conf)
    emit(report.as_dict(), args.report)
    print(report.table(), file=sys.stderr)
    return 0


def cmd_query(args) -> int:
    scene = load_scene(args.scene, with_masks=False, with_semantic=True)
    point_ids = sio.read_ids(need(Path(args.instances)))
    sems = [SemanticMaskImage(img, scene.label_names) for img in scene.semantic]
    votes = backproject_semantics(scene.views, sems, scene.cloud, args.radius)
    result = query_instances(point_ids, votes, args.prompt, args.threshold)
    if args.ply:
        colors = np.full((len(point_ids), 3), 128, dtype=np.uint8)
        hit = np.isin(point_ids, [m[0] for m in result.matches])
        colors[hit] = (255, 40, 40)
        sio.write_ply(args.ply, scene.cloud, colors=colors)
    emit(result.as_dict())
    return 0


def cmd_synth(args) -> int:
    seed = 0 if args.seed is None else args.seed
    if args.spec:
        spec = load_scene_spec(args.spec)
    else:
        spec = random_scene_spec(seed, args.objects, args.views)
    noise = NoiseModel(args.merge_prob, args.split_prob, args.erode_px, seed)
    root = write_scene_dir(build_scene(spec, noise), args.out)
    emit({"scene": str(root), "objects": len(spec.objects), "views": len(spec.cameras.poses())})
    return 0


def cmd_run(args) -> int:
    cfg, out = build_config(args), work_dir(args)
    scene = load_scene(args.scene)
    views = select_views(scene.views, cfg.views_fraction)
    cloud, partition, adjacency = oversegment_cloud(scene.cloud, cfg, views, scene.segs)
    sio.write_segs(out / SUPERPOINTS, partition.label)
    save_adjacency(out / ADJACENCY, adjacency)
    matrix = compute_affinity(cloud, partition, adjacency, views, cfg)
    matrix.save(out / AFFINITY)
    labeling, point_ids, conf = grow(partition, adjacency, matrix, cfg)
    write_instances(out, point_ids, conf)
    summary = {"superpoints": partition.num_superpoints, "regions": labeling.num_regions, "views": len(views)}
    if args.eval:
        if scene.gt_ids is None:
            raise SceneError(f"--eval needs {Path(args.scene) / 'gt_instances.txt'}")
        report = evaluate_labels(point_ids, scene.gt_ids, conf)
        write_json(out / REPORT, report.as_dict())
        summary["report"] = report.as_dict()
        print(report.table(), file=sys.stderr)
    emit(summary)
    return 0


def cmd_ablate(args) -> int:
    cfg = build_config(args)
    noise = dict(merge_prob=args.merge_prob, split_prob=args.split_prob, erode_px=args.erode_px)
    scenes = benchmark.benchmark_scenes(args.scenes, num_objects=args.objects, num_views=args.views, noise=noise)
    schedule = cfg.thresholds
    results = benchmark.run_ablation(scenes, cfg, schedule)
    print(benchmark.ablation_table(results), file=sys.stderr)
    emit({"schedule": list(schedule), "noise": noise, "rows": [r.mean() for r in results]}, args.report)
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="superseg3d", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def stage(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("scene", help="scene directory")
        p.add_argument("-o", "--out", help="working directory for intermediates (default: the scene)")
        add_config_flags(p)
        p.set_defaults(func=func)
        return p

    stage("oversegment", cmd_oversegment, "superpoints and their adjacency")
    stage("affinity", cmd_affinity, "multi-view superpoint affinity matrix")
    stage("grow", cmd_grow, "progressive region growing into instances")
    p = stage("run", cmd_run, "all stages end to end")
    p.add_argument("--eval", action="store_true", help="score against gt_instances.txt")

    p = sub.add_parser("eval", help="class-agnostic AP of an instance file")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("--confidences", help="JSON map of instance id to confidence")
    p.add_argument("--report", help="also write the JSON report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("query", help="instances matching a text label")
    p.add_argument("scene")
    p.add_argument("--instances", required=True)
    p.add_argument("--prompt", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--radius", type=float, default=0.02, help="vote radius in metres")
    p.add_argument("--ply", help="write a PLY with matching instances highlighted")
    p.set_defaults(func=cmd_query)

    def noise_flags(p, merge=0.0, split=0.0, erode=0):
        p.add_argument("--merge-prob", type=float, default=merge)
        p.add_argument("--split-prob", type=float, default=split)
        p.add_argument("--erode-px", type=int, default=erode)
        p.add_argument("--objects", type=int, default=8)
        p.add_argument("--views", type=int, default=24)

    p = sub.add_parser("synth", help="write a synthetic scene directory")
    p.add_argument("out")
    p.add_argument("--seed", type=int)
    p.add_argument("--spec", help="scene spec key = value file")
    noise_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ablate", help="component ablation on the synthetic benchmark")
    p.add_argument("--scenes", type=int, default=10)
    p.add_argument("--report")
    add_config_flags(p)
    noise_flags(p, **{k.split("_")[0]: v for k, v in benchmark.BENCHMARK_NOISE.items()})
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2
    except (SceneError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
