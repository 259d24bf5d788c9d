"""Build an annotation service data directory from the synthetic corpus.

Camera A renders become queries, camera B renders the gallery, and each
query gets one part mask covering its identity cue patch, so a labeler
can realistically find the cross-view match by color. Point the service
at the output directory:

    salreid annotate-serve --data-dir <out_dir>
"""

import argparse
import csv
from pathlib import Path

import numpy as np
from PIL import Image

from salreid.synthetic import CUE_SIZE, cue_origin, generate_synthetic_items


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--identities", type=int, default=40)
    parser.add_argument(
        "--queries", type=int, default=8, help="identities that get a query + mask"
    )
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    if args.queries > args.identities:
        raise SystemExit("--queries cannot exceed --identities")

    query_dir = args.out_dir / "images" / "query"
    gallery_dir = args.out_dir / "images" / "gallery"
    mask_dir = args.out_dir / "masks"
    for directory in (query_dir, gallery_dir, mask_dir):
        directory.mkdir(parents=True, exist_ok=True)

    pairs = []
    for image, camera, identity in generate_synthetic_items(
        n_identities=args.identities, seed=args.seed
    ):
        index = int(identity.removeprefix("id"))
        if camera == "B":
            Image.fromarray(image).save(gallery_dir / f"g{index:03d}.png")
        elif index < args.queries:
            Image.fromarray(image).save(query_dir / f"q{index:03d}.png")
            mask = np.zeros(image.shape[:2], dtype=np.uint8)
            row, col = cue_origin(index)
            mask[row : row + CUE_SIZE, col : col + CUE_SIZE] = 255
            Image.fromarray(mask).save(mask_dir / f"q{index:03d}__cue.png")
            pairs.append((f"q{index:03d}", f"g{index:03d}"))

    with open(args.out_dir / "pairs.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query", "target"])
        writer.writerows(pairs)
    print(f"{len(pairs)} queries, {args.identities} gallery images in {args.out_dir}")


if __name__ == "__main__":
    main()
