"""Command line interface.

Output files and stdout are byte-deterministic for a given command line:
anything timing dependent goes to stderr as a JSON run report, never into
the files or stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from .assembly import Proposal, mask_iou, rle_decode, rle_encode
from .detection import tightness_report
from .fitter import FitConfig, check_gradients, fit_scene, targets_from_labels
from .geometry import SectorGrid
from .metrics import evaluate
from .scene import PointCloud, instances_from_labels, read_scene, write_scene
from .synth import SceneSpec, generate_scene

PROPOSALS_FORMAT = "proposals v1"

# Keeps the threadpoolctl limiter alive for the process lifetime.
_THREAD_LIMIT = None


def _limit_threads(n):
    global _THREAD_LIMIT
    if n is None:
        return
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        print(
            "note: threadpoolctl not installed, thread cap skipped "
            "(outputs are deterministic either way)",
            file=sys.stderr,
        )
        return
    _THREAD_LIMIT = threadpool_limits(limits=n)


class RunReport:
    """Wall-clock phase timings, emitted to stderr only."""

    def __init__(self, command: str):
        self.command = command
        self.timings: dict[str, float] = {}
        self._t0 = None
        self._phase = None

    def start(self, phase: str):
        self.finish()
        self._phase = phase
        self._t0 = time.perf_counter()

    def finish(self):
        if self._phase is not None:
            self.timings[self._phase] = time.perf_counter() - self._t0
            self._phase = None

    def emit(self):
        self.finish()
        json.dump(
            {"command": self.command, "timings": self.timings},
            sys.stderr,
            sort_keys=True,
        )
        sys.stderr.write("\n")


def _parse_grid(text: str) -> SectorGrid:
    try:
        a, b = text.lower().split("x")
        return SectorGrid(int(a), int(b))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"grid must look like 5x5, got {text!r}"
        ) from None


def _parse_lambdas(text: str):
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(
            "lambda weights must be four comma separated numbers: "
            "cls,conf,coarse,fine"
        )
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad lambda weights {text!r}") from None


def _parse_families(text: str):
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad family list {text!r}") from None


def _add_fit_args(
    p: argparse.ArgumentParser,
    default_anneal: bool,
    default_iterations: int = 400,
    default_lr: float = 0.3,
):
    p.add_argument("--grid", type=_parse_grid, default=SectorGrid(5, 5),
                   help="sector grid as THETAxPHI (default 5x5)")
    p.add_argument("--proposals", type=int, default=None,
                   help="proposal bank size (default: one per duplicated target)")
    p.add_argument("--iterations", type=int, default=default_iterations)
    p.add_argument("--lr", type=float, default=default_lr)
    if default_anneal:
        p.add_argument("--no-anneal", dest="anneal", action="store_false",
                       help="keep the learning rate constant")
    else:
        p.add_argument("--anneal", dest="anneal", action="store_true",
                       help="decay the learning rate to zero")
        p.set_defaults(anneal=False)
    p.add_argument("--rematch-interval", type=int, default=25)
    p.add_argument("--lambda", dest="lambdas", type=_parse_lambdas,
                   default=(0.5, 0.5, 1.0, 1.0),
                   help="loss weights cls,conf,coarse,fine (default 0.5,0.5,1,1)")
    p.add_argument("--conf-threshold", type=float, default=0.2)
    p.add_argument("--nms-iou", type=float, default=0.5)


def _config_from_args(args, n_classes: int, variant: str = "full") -> FitConfig:
    l_cls, l_conf, l_coarse, l_fine = args.lambdas
    return FitConfig(
        grid=args.grid,
        n_proposals=args.proposals,
        iterations=args.iterations,
        lr=args.lr,
        anneal=args.anneal,
        rematch_interval=args.rematch_interval,
        lambda_cls=l_cls,
        lambda_conf=l_conf,
        lambda_coarse=l_coarse,
        lambda_fine=l_fine,
        n_classes=n_classes,
        conf_threshold=args.conf_threshold,
        nms_iou=args.nms_iou,
        variant=variant,
    )


def _n_classes(cloud: PointCloud) -> int:
    if cloud.semantic_ids is None:
        return 1
    top = int(cloud.semantic_ids.max())
    return max(top + 1, 1)


def _write_text(path: str, text: str):
    with open(path, "w") as f:
        f.write(text)


def cmd_synth(args) -> int:
    report = RunReport("synth")
    report.start("generate")
    spec = SceneSpec(
        n_instances=args.instances,
        points_per_instance=args.points_per_instance,
        n_background=args.background,
        extent=args.extent,
        min_scale=args.min_scale,
        max_scale=args.max_scale,
        min_separation=args.min_separation,
        families=args.families,
        with_colors=args.colors,
        seed=args.seed,
    )
    cloud = generate_scene(spec)
    report.start("write")
    write_scene(args.out, cloud)
    report.emit()
    print(f"wrote {args.out}: {cloud.n_points} points, {args.instances} instances")
    return 0


def _proposals_to_json(result, n_points: int, grid: SectorGrid) -> str:
    items = []
    for p in result.proposals:
        items.append(
            {
                "class_id": p.class_id,
                "confidence": p.confidence,
                "center": [float(v) for v in p.polygon.center],
                "rays": [float(v) for v in p.polygon.rays],
                "mask_rle": rle_encode(p.mask),
            }
        )
    doc = {
        "format": PROPOSALS_FORMAT,
        "n_points": n_points,
        "grid": [grid.n_theta, grid.n_phi],
        "proposals": items,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def cmd_fit(args) -> int:
    report = RunReport("fit")
    report.start("load")
    cloud = read_scene(args.scene)
    if cloud.instance_ids is None or not np.any(cloud.instance_ids >= 0):
        print("scene has no labeled instances to fit", file=sys.stderr)
        return 2
    cfg = _config_from_args(args, _n_classes(cloud), args.variant)
    report.start("fit")
    result = fit_scene(cloud.positions, cloud.instance_ids, cloud.semantic_ids, cfg)
    report.start("write")
    _write_text(args.out, _proposals_to_json(result, cloud.n_points, cfg.grid))
    report.emit()
    final = result.loss_history[-1]
    print(
        f"fit {len(result.proposals)} proposals "
        f"(bank {len(result.raw_proposals)}), final loss {final!r}"
    )
    return 0


def _load_proposals(path: str, n_points: int) -> list[Proposal]:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("format") != PROPOSALS_FORMAT:
        raise ValueError(f"{path}: not a {PROPOSALS_FORMAT} file")
    if doc["n_points"] != n_points:
        raise ValueError(
            f"{path}: proposals cover {doc['n_points']} points, scene has {n_points}"
        )
    out = []
    for item in doc["proposals"]:
        mask = rle_decode(item["mask_rle"])
        out.append(Proposal(mask, int(item["class_id"]), float(item["confidence"])))
    return out


def cmd_eval(args) -> int:
    report = RunReport("eval")
    report.start("load")
    cloud = read_scene(args.scene)
    proposals = _load_proposals(args.proposals_file, cloud.n_points)
    report.start("evaluate")
    result = evaluate(proposals, instances_from_labels(cloud), cloud.n_points)
    report.start("write")
    _write_text(args.out, "\n".join(result.csv_rows()) + "\n")
    report.emit()
    print(
        f"ap={result.ap!r} ap50={result.ap50!r} ap25={result.ap25!r} "
        f"prec50={result.mean_precision50!r} rec50={result.mean_recall50!r}"
    )
    return 0


def cmd_bench_tightness(args) -> int:
    report = RunReport("bench-tightness")
    report.start("load")
    cloud = read_scene(args.scene)
    if cloud.instance_ids is None:
        print("scene has no instance labels", file=sys.stderr)
        return 2
    report.start("measure")
    rep = tightness_report(cloud.positions, cloud.instance_ids, args.grid)
    rows = ["instance_id,n_points,polygon_covered,box_covered,polygon_extra,box_extra"]
    for r in rep.rows:
        rows.append(
            f"{r.instance_id},{r.n_instance_points},{r.polygon_covered},"
            f"{r.box_covered},{r.polygon_extra},{r.box_extra}"
        )
    rows.append(
        f"total,{sum(r.n_instance_points for r in rep.rows)},"
        f"{sum(r.polygon_covered for r in rep.rows)},"
        f"{sum(r.box_covered for r in rep.rows)},"
        f"{rep.polygon_extra_total},{rep.box_extra_total}"
    )
    report.start("write")
    _write_text(args.out, "\n".join(rows) + "\n")
    report.emit()
    print(
        f"polygon coverage {rep.polygon_coverage!r}, "
        f"extra points polygon/box {rep.polygon_extra_total}/{rep.box_extra_total}"
    )
    return 0


def cmd_gradcheck(args) -> int:
    report = RunReport("gradcheck")
    report.start("check")
    spec = SceneSpec(
        n_instances=2,
        points_per_instance=40,
        n_background=40,
        families=(0, 1),
        seed=args.seed,
    )
    cloud = generate_scene(spec)
    cfg = FitConfig(grid=args.grid, n_proposals=3, n_classes=2, variant=args.variant)
    targets = targets_from_labels(
        cloud.positions, cloud.instance_ids, cloud.semantic_ids, cfg.grid
    )
    rep = check_gradients(
        cloud.positions, targets, cfg, seed=args.seed, eps=args.eps
    )
    report.emit()
    for name in sorted(rep.err_by_group):
        print(f"{name}: max abs err {rep.err_by_group[name]!r}")
    ok = rep.ok(args.tolerance)
    print(
        f"total: max abs err {rep.max_abs_err!r} "
        f"({'PASS' if ok else 'FAIL'} at {args.tolerance!r})"
    )
    return 0 if ok else 1


def _parse_seeds(text: str):
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None


def probe_coverage_iou(cloud, result) -> float:
    """Mean over ground-truth instances of the best kept-proposal mask IoU."""
    instances = instances_from_labels(cloud)
    best = []
    for gt in instances:
        gt_mask = gt.mask(cloud.n_points)
        best.append(
            max((mask_iou(p.mask, gt_mask) for p in result.proposals), default=0.0)
        )
    return float(np.mean(best)) if best else 0.0


def cmd_ablate(args) -> int:
    report = RunReport("ablate")
    rows = ["variant,seed,iou"]
    means = {}
    for variant in ("rid_only", "mc_only", "full"):
        report.start(variant)
        iou_sum = 0.0
        for seed in args.seeds:
            spec = SceneSpec(
                n_instances=args.instances,
                points_per_instance=args.points_per_instance,
                n_background=args.background,
                extent=args.extent,
                min_scale=args.min_scale,
                max_scale=args.max_scale,
                min_separation=args.min_separation,
                families=args.families,
                seed=seed,
            )
            cloud = generate_scene(spec)
            cfg = _config_from_args(args, _n_classes(cloud), variant)
            result = fit_scene(
                cloud.positions, cloud.instance_ids, cloud.semantic_ids, cfg
            )
            iou = probe_coverage_iou(cloud, result)
            iou_sum += iou
            rows.append(f"{variant},{seed},{iou!r}")
        means[variant] = iou_sum / len(args.seeds)
        rows.append(f"{variant},mean,{means[variant]!r}")
    report.start("write")
    _write_text(args.out, "\n".join(rows) + "\n")
    report.emit()
    for variant in ("full", "mc_only", "rid_only"):
        print(f"{variant}: mean iou={means[variant]!r}")
    order = " > ".join(sorted(means, key=lambda v: -means[v]))
    print(f"mean iou ordering: {order}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radialseg",
        description="Radial polygon instance segmentation on 3d point clouds.",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="best-effort cap on numeric library threads")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a labeled synthetic scene")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=5)
    p.add_argument("--points-per-instance", type=int, default=150)
    p.add_argument("--background", type=int, default=500)
    p.add_argument("--extent", type=float, default=8.0)
    p.add_argument("--min-scale", type=float, default=1.0)
    p.add_argument("--max-scale", type=float, default=2.0)
    p.add_argument("--min-separation", type=float, default=5.0)
    p.add_argument("--families", type=_parse_families, default=(0, 1, 2),
                   help="comma separated family ids (0 shell, 1 blob, 2 lshape)")
    p.add_argument("--colors", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit proposals to a labeled scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variant", choices=("full", "mc_only", "rid_only"),
                   default="full")
    _add_fit_args(p, default_anneal=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="score proposals against scene labels")
    p.add_argument("--scene", required=True)
    p.add_argument("--proposals", dest="proposals_file", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench-tightness",
                       help="compare polygon and box capture on a labeled scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", type=_parse_grid, default=SectorGrid(5, 5))
    p.set_defaults(func=cmd_bench_tightness)

    p = sub.add_parser("gradcheck",
                       help="compare analytic gradients against finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--grid", type=_parse_grid, default=SectorGrid(5, 5))
    p.add_argument("--variant", choices=("full", "mc_only", "rid_only"),
                   default="full")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("ablate", help="run the loss ablation over seeded probe scenes")
    p.add_argument("--out", required=True)
    p.add_argument("--seeds", type=_parse_seeds, default=tuple(range(20)),
                   help="comma separated scene seeds to average over")
    p.add_argument("--instances", type=int, default=1)
    p.add_argument("--points-per-instance", type=int, default=30)
    p.add_argument("--background", type=int, default=1200)
    p.add_argument("--extent", type=float, default=4.5)
    p.add_argument("--min-scale", type=float, default=2.2)
    p.add_argument("--max-scale", type=float, default=3.0)
    p.add_argument("--min-separation", type=float, default=1.0)
    p.add_argument("--families", type=_parse_families, default=(2,),
                   help="probe on concave instances by default")
    _add_fit_args(p, default_anneal=False, default_iterations=250, default_lr=0.45)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _limit_threads(args.threads)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
