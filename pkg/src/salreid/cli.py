"""Command-line pipeline driver.

Commands: extract, saliency, match, train, eval, export-weights,
annotate-serve. All take --config (INI, every default overridable) and
heavier ones take --jobs. Exit codes: 0 success, 2 partial failure
(some images failed but the run completed), 1 fatal.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import pipeline, stores
from .config import PipelineConfig, load_config
from .features import extract_grid, load_image
from .matching import dense_correspondence
from .salmatch import (
    PHI_DIM,
    RankModel,
    minmax_normalize,
    pair_feature_map,
    sim_esalmatch,
    sim_salmatch,
)
from .saliency import saliency_map
from .ranklearn import TrainSet, train, write_training_log
from .protocol import write_cmc_csv

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2


def cmd_extract(args, cfg: PipelineConfig) -> int:
    entries = stores.read_manifest(args.manifest)
    grids = []
    failures = []
    for entry in entries:
        try:
            image = load_image(entry.path)
            grids.append(
                extract_grid(
                    image,
                    cfg.grid,
                    camera=entry.camera,
                    identity=entry.identity,
                    image_id=entry.path,
                )
            )
        except Exception as exc:  # keep going, report at the end
            failures.append((entry.path, str(exc)))
    stores.write_descriptor_store(args.out, grids)
    print(f"extracted {len(grids)} of {len(entries)} images -> {args.out}")
    for path, reason in failures:
        print(f"failed: {path}: {reason}", file=sys.stderr)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_saliency(args, cfg: PipelineConfig) -> int:
    grids = stores.read_descriptor_store(args.store)
    refs = stores.read_descriptor_store(args.refs)
    if args.method:
        from dataclasses import replace

        cfg = replace(cfg, saliency=replace(cfg.saliency, method=args.method))
    maps = pipeline.saliency_maps(grids, refs, cfg, jobs=args.jobs)
    stores.write_saliency_store(args.out, maps)
    if args.heatmaps:
        heat_dir = Path(args.heatmaps)
        heat_dir.mkdir(parents=True, exist_ok=True)
        for i, m in enumerate(maps):
            stores.write_pgm(heat_dir / f"map_{i:04d}.pgm", m.probs)
    print(f"saliency maps for {len(maps)} images -> {args.out}")
    return EXIT_OK


def _load_external(spec: str) -> tuple[np.ndarray, float]:
    """PATH[:WEIGHT] -> (min-max normalized matrix, weight)."""
    path, _, weight = spec.partition(":")
    matrix = stores.read_score_matrix(path)
    return minmax_normalize(matrix), float(weight) if weight else 1.0


def cmd_match(args, cfg: PipelineConfig) -> int:
    probes = stores.read_descriptor_store(args.probes)
    gallery = stores.read_descriptor_store(args.gallery)
    method = args.method

    probe_maps = gallery_maps = None
    if method in ("sdc", "salmatch", "esalmatch"):
        if not args.probe_sal or not args.gallery_sal:
            print("method needs --probe-sal and --gallery-sal", file=sys.stderr)
            return EXIT_FATAL
        probe_maps = stores.read_saliency_store(args.probe_sal)
        gallery_maps = stores.read_saliency_store(args.gallery_sal)

    model = None
    if method in ("salmatch", "esalmatch"):
        if not args.model:
            print("method needs --model", file=sys.stderr)
            return EXIT_FATAL
        model = stores.read_model(args.model)

    def _row(u: int) -> np.ndarray:
        scores = pipeline.component_scores(
            probes[u],
            probe_maps[u] if probe_maps else None,
            gallery,
            gallery_maps,
            model,
            cfg,
            methods=[method if method != "esalmatch" else "salmatch"],
        )
        return next(iter(scores.values()))

    matrix = np.stack(pipeline.parallel_map(_row, range(len(probes)), args.jobs))

    if method == "esalmatch":
        externals = [_load_external(spec) for spec in args.external or []]
        fused = np.empty_like(matrix)
        for u in range(matrix.shape[0]):
            for v in range(matrix.shape[1]):
                ext = [(weight, ext_m[u, v]) for ext_m, weight in externals]
                fused[u, v] = sim_esalmatch(
                    ext,
                    cfg.match.mu_sal,
                    matrix[u, v],
                    flip_sign=cfg.match.flip_fusion_sign,
                )
        matrix = fused

    stores.write_score_matrix(args.out, matrix)
    print(f"{matrix.shape[0]}x{matrix.shape[1]} {method} scores -> {args.out}")
    return EXIT_OK


def cmd_train(args, cfg: PipelineConfig) -> int:
    probes = stores.read_descriptor_store(args.probes)
    gallery = stores.read_descriptor_store(args.gallery)
    probe_maps = stores.read_saliency_store(args.probe_sal)
    gallery_maps = stores.read_saliency_store(args.gallery_sal)
    phi = pipeline.feature_table(
        probes, probe_maps, gallery, gallery_maps, cfg, jobs=args.jobs
    )
    ts = TrainSet(phi=phi, relevant=pipeline.relevance_mask(probes, gallery))
    result = train(ts, cfg.train, rows=probes[0].rows, cols=probes[0].cols)
    stores.write_model(args.out, result.model)
    if args.log:
        write_training_log(args.log, result.history)
    status = "converged" if result.converged else "hit max iterations"
    print(
        f"trained in {result.iterations} iterations ({status}, "
        f"final violation {result.final_violation:.2e}) -> {args.out}"
    )
    return EXIT_OK


def cmd_eval(args, cfg: PipelineConfig) -> int:
    entries = stores.read_manifest(args.manifest)
    items = [
        (load_image(e.path), e.camera, e.identity) for e in entries
    ]
    grids = pipeline.grids_from_items(items, cfg, jobs=args.jobs)
    results = pipeline.evaluate_components(
        grids, cfg, methods=[args.method], jobs=args.jobs
    )
    result = results[args.method]
    write_cmc_csv(args.out, result)
    print(
        f"{args.method}: rank-1 {result.rank_k(1):.4f} over "
        f"{len(result.trial_curves)} trials -> {args.out}"
    )
    return EXIT_OK


def cmd_export_weights(args, cfg: PipelineConfig) -> int:
    model = stores.read_model(args.model)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lattices = model.w.reshape(model.rows, model.cols, PHI_DIM)
    names = [f"alpha_{k}" for k in range(1, 5)] + [f"beta_{k}" for k in range(1, 5)]
    for k, name in enumerate(names):
        with open(out_dir / f"{name}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in lattices[:, :, k]:
                writer.writerow([repr(float(x)) for x in row])
    print(f"8 weight lattices -> {out_dir}")
    return EXIT_OK


def cmd_annotate_serve(args, cfg: PipelineConfig) -> int:
    from .service import make_server

    server = make_server(
        args.data_dir, cfg.annotation, port=args.port, seed=cfg.seed
    )
    host, port = server.server_address[:2]
    print(f"annotation service on http://{host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="salreid", description="saliency-based re-identification pipeline"
    )
    parser.add_argument("--config", help="INI config file", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="images -> descriptor store")
    p.add_argument("manifest")
    p.add_argument("out")
    p.set_defaults(fn=cmd_extract)

    p = sub.add_parser("saliency", help="descriptor store -> saliency store")
    p.add_argument("store")
    p.add_argument("refs")
    p.add_argument("out")
    p.add_argument("--method", choices=["knn", "ocsvm"], default=None)
    p.add_argument("--heatmaps", help="directory for PGM heat images")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_saliency)

    p = sub.add_parser("match", help="score matrix for one method")
    p.add_argument(
        "method",
        choices=["densefeats", "patmatch", "sdc", "salmatch", "esalmatch"],
    )
    p.add_argument("--probes", required=True)
    p.add_argument("--gallery", required=True)
    p.add_argument("--probe-sal")
    p.add_argument("--gallery-sal")
    p.add_argument("--model")
    p.add_argument(
        "--external",
        action="append",
        help="external score matrix CSV as PATH[:WEIGHT], repeatable",
    )
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_match)

    p = sub.add_parser("train", help="learn ranking weights")
    p.add_argument("--probes", required=True)
    p.add_argument("--gallery", required=True)
    p.add_argument("--probe-sal", required=True)
    p.add_argument("--gallery-sal", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log", help="training log CSV")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="split protocol CMC for one method")
    p.add_argument("manifest")
    p.add_argument(
        "method",
        choices=["densefeats", "patmatch", "sdc", "salmatch"],
    )
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("export-weights", help="model -> 8 CSV lattices")
    p.add_argument("model")
    p.add_argument("out_dir")
    p.set_defaults(fn=cmd_export_weights)

    p = sub.add_parser("annotate-serve", help="run the annotation service")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--data-dir", required=True)
    p.set_defaults(fn=cmd_annotate_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return args.fn(args, cfg)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
