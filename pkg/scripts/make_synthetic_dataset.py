"""Render the synthetic two-camera corpus to PNG files plus a manifest."""

import argparse
from pathlib import Path

from salreid.synthetic import write_synthetic_dataset


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", type=Path, help="output directory")
    parser.add_argument("--identities", type=int, default=60)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--images-per-view", type=int, default=1, help="shots per identity per camera"
    )
    args = parser.parse_args()

    manifest = write_synthetic_dataset(
        args.out_dir,
        n_identities=args.identities,
        seed=args.seed,
        images_per_view=args.images_per_view,
    )
    print(f"wrote {manifest}")


if __name__ == "__main__":
    main()
