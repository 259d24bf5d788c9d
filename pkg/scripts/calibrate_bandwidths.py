"""Measure kernel and saliency bandwidths on a manifest and emit a config.

Both bandwidths are data medians: the Gaussian kernel sigma is the median
matched-patch distance between the two camera views, and the saliency
sigma0 is the median KNN score over reference sets drawn from camera A.
"""

import argparse
import sys
from pathlib import Path

from salreid.calibrate import knn_score_median, matched_distance_median
from salreid.config import dump_config, load_config
from salreid.features import extract_grid, load_image
from salreid.stores import read_manifest

from dataclasses import replace


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("manifest", type=Path, help="image manifest CSV")
    parser.add_argument("--config", type=Path, default=None, help="base config INI")
    parser.add_argument(
        "--out", type=Path, default=None, help="write the calibrated config here"
    )
    args = parser.parse_args()

    cfg = load_config(args.config)
    grids = []
    for entry in read_manifest(args.manifest):
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

    sigma = matched_distance_median(grids, cfg)
    sigma0 = knn_score_median(grids, cfg)
    print(f"kernel sigma   = {sigma:.6f}")
    print(f"saliency sigma0 = {sigma0:.6f}")

    calibrated = replace(
        cfg,
        kernel=replace(cfg.kernel, sigma=sigma),
        saliency=replace(cfg.saliency, sigma0=sigma0),
    )
    if args.out is not None:
        args.out.write_text(dump_config(calibrated))
        print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
