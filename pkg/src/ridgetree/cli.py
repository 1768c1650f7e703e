"""Command-line interface: skeletonize, evaluate, region-report, synth,
persistence-diagram.

All subcommands are deterministic given their inputs; `skeletonize` writes
the fully resolved config next to its outputs so any run can be replayed
exactly. The thread cap comes from --threads or RIDGETREE_THREADS.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .grid import GridGeometry
from .metrics import discretize, match_metrics
from .pipeline import PipelineConfig, PipelineError, run_skeletonize
from .persistence import compute_persistence
from .regions import RegionLabelVolume, region_report
from .swcio import read_swc, write_swc
from .synth import synth_tree_volume, tube_fixture, y_fixture
from .tree import SkeletonTree
from .vtkio import read_vtk, write_vtk


def _parse_triple(text: str, cast=float):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z - got {text!r}")
    return tuple(cast(p) for p in parts)


def _add_skeletonize(sub):
    p = sub.add_parser("skeletonize", help="volume -> simplified SWC skeleton")
    p.add_argument("input", help="density volume (legacy VTK structured points)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--mode", choices=("single-neuron", "tracer"),
                   default="single-neuron")
    p.add_argument("--config", help="resolved config JSON to replay (overrides mode)")
    p.add_argument("--root", action="append", default=[],
                   type=lambda s: _parse_triple(s), metavar="X,Y,Z",
                   help="root position in µm (repeatable)")
    p.add_argument("--roots-file", help="text file with one x y z per line")
    p.add_argument("--epsilon", type=float, help="persistence threshold")
    p.add_argument("--epsilon-fraction", type=float,
                   help="persistence threshold as a fraction of the value range")
    p.add_argument("--tau", type=float, help="simplification threshold")
    p.add_argument("--tau-absolute", action="store_true",
                   help="treat --tau as an absolute score, not relative to the mean")
    p.add_argument("--alpha", type=float, help="density/vector score weight")
    p.add_argument("--k-hops", type=int, help="score smoothing hops")
    p.add_argument("--beta", type=float, help="density score distance cap (µm)")
    p.add_argument("--beta-w", type=float, help="summary weight distance cap (µm)")
    p.add_argument("--zeta", type=float, help="thickness distance cap (µm)")
    p.add_argument("--strategy", choices=("root-grower", "leaf-burner"))
    p.add_argument("--spanning", choices=("shortest", "mst"))
    p.add_argument("--gaussian-radius", type=int)
    p.add_argument("--downsample", type=lambda s: _parse_triple(s, int),
                   metavar="FX,FY,FZ")
    p.add_argument("--boundary-clean", action="store_true")
    p.add_argument("--no-boundary-clean", action="store_true")
    p.add_argument("--prune-vectors", action="store_true")
    p.add_argument("--vector-threshold", type=float)
    p.add_argument("--vector-alpha", type=float,
                   help="weight of the alignment-free term in path scores")
    p.add_argument("--nbhd-radius", type=int)
    p.add_argument("--top-k", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--dump-graph", action="store_true",
                   help="also write the Morse graph node/edge tables")
    p.add_argument("--dump-diagram", action="store_true",
                   help="also write the persistence diagram table")


def _cmd_skeletonize(args) -> int:
    field = read_vtk(args.input)
    if args.config:
        config = PipelineConfig.from_json(Path(args.config).read_text())
    else:
        config = PipelineConfig.preset(args.mode)
    roots = [tuple(r) for r in args.root]
    if args.roots_file:
        for line in Path(args.roots_file).read_text().splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                roots.append(tuple(float(t) for t in line.split()[:3]))
    if roots:
        config.roots = roots

    overrides = {
        "epsilon": args.epsilon,
        "epsilon_fraction": args.epsilon_fraction,
        "tau": args.tau,
        "alpha": args.alpha,
        "k_hops": args.k_hops,
        "beta": args.beta,
        "beta_w": args.beta_w,
        "zeta": args.zeta,
        "strategy": args.strategy,
        "spanning": args.spanning,
        "gaussian_radius": args.gaussian_radius,
        "downsample": args.downsample,
        "vector_threshold": args.vector_threshold,
        "vector_alpha": args.vector_alpha,
        "nbhd_radius": args.nbhd_radius,
        "top_k": args.top_k,
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(config, key, value)
    if args.tau_absolute:
        config.tau_mode = "absolute"
    if args.boundary_clean:
        config.boundary_clean = True
    if args.no_boundary_clean:
        config.boundary_clean = False
    if args.prune_vectors:
        config.prune_vectors = True
    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("RIDGETREE_THREADS", "0") or 0)
    config.threads = threads

    result = run_skeletonize(field, config)
    paths = result.write_outputs(args.out)
    if args.dump_graph:
        result.graph.write_text(
            Path(args.out) / "morse_nodes.txt", Path(args.out) / "morse_edges.txt"
        )
    if args.dump_diagram:
        compute_persistence(result.field).write_diagram(
            Path(args.out) / "persistence_diagram.txt"
        )
    total_nodes = sum(len(t) for t in result.trees)
    print(f"wrote {paths['swc']} ({len(result.trees)} trees, {total_nodes} nodes)")
    return 0


def _cmd_evaluate(args) -> int:
    pred = discretize(read_swc(args.predicted), args.max_segment)
    truth = discretize(read_swc(args.truth), args.max_segment)
    report = match_metrics(pred, truth, args.bound)
    lines = report.format_lines()
    print("\n".join(lines))
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
    if any(np.isnan(x) for x in (report.precision, report.recall, report.f1)):
        return 1
    return 0


def _cmd_region_report(args) -> int:
    labels = RegionLabelVolume.read(args.labels)
    if args.input.endswith(".swc"):
        trees = read_swc(args.input)
        weights_path = args.weights or (args.input[:-4] + "_weights.txt")
        _attach_weights(trees, weights_path)
        source = trees
    else:
        source = read_vtk(args.input)
    reference = None
    if args.reference:
        reference = read_vtk(args.reference)
    report = region_report(source, labels, reference)
    print("\n".join(report.format_lines()))
    if args.out:
        report.write(args.out)
    if args.out_tsv:
        report.write_tsv(args.out_tsv)
    return 0


def _attach_weights(trees, weights_path) -> None:
    table = {}
    for line in Path(weights_path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        ident, w = line.split()[:2]
        table[int(ident)] = float(w)
    offset = 0
    for tree in trees:
        w = np.zeros(len(tree))
        order = tree.topo_order()
        for n, v in enumerate(order):
            w[v] = table.get(offset + n + 1, 0.0)
        tree.weight = w
        offset += len(tree)


def _cmd_synth(args) -> int:
    spec = json.loads(Path(args.spec).read_text())
    seed = args.seed if args.seed is not None else int(spec.get("seed", 0))
    preset = spec.get("preset")
    if preset == "tube":
        field, truth = tube_fixture(
            seed,
            dims=tuple(spec.get("dims", (64, 64, 64))),
            peak=float(spec.get("peak", 20000.0)),
            noise_frac=float(spec.get("noise_frac", 0.02)),
            tube_sigma=float(spec.get("tube_sigma", 1.2)),
        )
    elif preset == "y":
        field, truth = y_fixture(
            seed,
            dims=tuple(spec.get("dims", (64, 64, 64))),
            peak=float(spec.get("peak", 20000.0)),
            noise_frac=float(spec.get("noise_frac", 0.02)),
            tube_sigma=float(spec.get("tube_sigma", 1.2)),
            gap_voxels=float(spec.get("gap_voxels", 0.0)),
        )
    elif preset is None:
        geom = GridGeometry(
            tuple(spec["dims"]),
            tuple(spec.get("spacing", (1.0, 1.0, 1.0))),
            tuple(spec.get("origin", (0.0, 0.0, 0.0))),
        )
        truth = SkeletonTree(
            positions=np.asarray(spec["tree"]["positions"], dtype=np.float64),
            parent=np.asarray(spec["tree"]["parent"], dtype=np.int64),
            root=int(spec["tree"].get("root", 0)),
        )
        field = synth_tree_volume(
            truth,
            geom,
            tube_sigma=float(spec.get("tube_sigma", 1.2)),
            peak=float(spec.get("peak", 20000.0)),
            noise_sigma=float(spec.get("noise_sigma", 0.0)),
            gaps=[tuple(g) for g in spec.get("gaps", [])] or None,
            seed=seed,
        )
    else:
        raise ValueError(f"unknown preset {preset!r}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_vtk(field, out / "volume.vtk")
    write_swc(truth, out / "truth.swc")
    print(f"wrote {out / 'volume.vtk'} and {out / 'truth.swc'} (seed {seed})")
    return 0


def _cmd_diagram(args) -> int:
    field = read_vtk(args.input)
    pairing = compute_persistence(field)
    pairing.write_diagram(args.out)
    print(f"wrote {args.out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ridgetree",
        description="Tree skeletons from 3D density volumes via "
        "persistence-guided discrete Morse theory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    _add_skeletonize(sub)

    p = sub.add_parser("evaluate", help="compare a skeleton against ground truth")
    p.add_argument("predicted")
    p.add_argument("truth")
    p.add_argument("--bound", type=float, default=4.0, help="match distance (µm)")
    p.add_argument("--max-segment", type=float, default=1.0,
                   help="discretization segment length (µm)")
    p.add_argument("--out", help="write the report here too")

    p = sub.add_parser("region-report", help="bin skeleton weights by region")
    p.add_argument("input", help=".swc (with weight sidecar) or .vtk volume")
    p.add_argument("--labels", required=True, help="region label volume")
    p.add_argument("--weights", help="weight sidecar (default: <input>_weights.txt)")
    p.add_argument("--reference", help="reference volume for coverage rates")
    p.add_argument("--out", help="write the aligned text report here")
    p.add_argument("--out-tsv", help="write the machine-readable report here")

    p = sub.add_parser("synth", help="generate a synthetic volume + truth SWC")
    p.add_argument("spec", help="JSON spec (preset tube/y or explicit tree)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("persistence-diagram", help="dump the persistence diagram")
    p.add_argument("input")
    p.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    handlers = {
        "skeletonize": _cmd_skeletonize,
        "evaluate": _cmd_evaluate,
        "region-report": _cmd_region_report,
        "synth": _cmd_synth,
        "persistence-diagram": _cmd_diagram,
    }
    try:
        return handlers[args.command](args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
