"""Two-view synthetic pedestrians with controlled misalignment.

Every identity shares the same body layout and clothing palette, so
most patches look alike across people; identity lives in one small
colored cue patch whose hue and vertical slot are unique per identity.
Camera B images add vertical jitter (within the adjacency search reach),
small horizontal shifts, per-channel gain, and pixel noise. The design
separates the scorers: index-aligned matching suffers from the jitter,
constrained search recovers it, and saliency weighting amplifies the
cue against the shared clothing.
"""

from __future__ import annotations

import colorsys
from pathlib import Path

import numpy as np
from PIL import Image

from .stores import ManifestEntry, write_manifest

HEIGHT, WIDTH = 64, 32
N_HUES = 20
ROW_SLOTS = (12, 26, 40)  # cue top rows, spaced beyond the search reach
COL_SLOTS = (6, 13, 20)
CUE_SIZE = 12
DECOY_ORIGIN = (52, 11)  # below every cue slot, never overlaps
DECOY_SIZE = 10

BACKGROUND = (40, 44, 52)
SKIN = (196, 160, 130)
SHIRT = (90, 110, 150)
PANTS = (60, 60, 70)


def cue_color(identity: int) -> tuple[int, int, int]:
    hue = (identity % N_HUES) / N_HUES
    r, g, b = colorsys.hsv_to_rgb(hue, 0.9, 0.95)
    return (int(r * 255), int(g * 255), int(b * 255))


def cue_origin(identity: int) -> tuple[int, int]:
    """(row, col) of the cue patch; (hue, row slot) is unique per id."""
    return ROW_SLOTS[identity // N_HUES], COL_SLOTS[identity % len(COL_SLOTS)]


def _draw(canvas: np.ndarray, r0: int, c0: int, h: int, w: int, color) -> None:
    r0, c0 = max(r0, 0), max(c0, 0)
    canvas[r0 : min(r0 + h, HEIGHT), c0 : min(c0 + w, WIDTH)] = color


def person_image(
    identity: int,
    rng: np.random.Generator,
    dy: int = 0,
    dx: int = 0,
    gain: np.ndarray | None = None,
    noise_sigma: float = 4.0,
    decoy: bool = True,
) -> np.ndarray:
    """One (H, W, 3) uint8 rendering with the body offset by (dy, dx).

    The decoy is a random-hue patch at a fixed body position, redrawn
    per image: salient in every view yet useless for matching.
    """
    canvas = np.empty((HEIGHT, WIDTH, 3), dtype=np.float64)
    canvas[:] = BACKGROUND
    _draw(canvas, 6 + dy, 12 + dx, 8, 8, SKIN)
    _draw(canvas, 14 + dy, 6 + dx, 26, 20, SHIRT)
    _draw(canvas, 40 + dy, 8 + dx, 18, 16, PANTS)
    row, col = cue_origin(identity)
    _draw(canvas, row + dy, col + dx, CUE_SIZE, CUE_SIZE, cue_color(identity))
    if decoy:
        r, g, b = colorsys.hsv_to_rgb(rng.uniform(), 0.9, 0.95)
        _draw(
            canvas,
            DECOY_ORIGIN[0] + dy,
            DECOY_ORIGIN[1] + dx,
            DECOY_SIZE,
            DECOY_SIZE,
            (r * 255, g * 255, b * 255),
        )
    if gain is not None:
        canvas *= gain
    canvas += rng.normal(0.0, noise_sigma, canvas.shape)
    return np.clip(np.round(canvas), 0, 255).astype(np.uint8)


def generate_synthetic_items(
    n_identities: int = 60,
    seed: int = 0,
    images_per_view: int = 1,
    max_jitter: int = 8,
    noise_sigma: float = 3.0,
    gain_spread: float = 0.04,
) -> list[tuple[np.ndarray, str, str]]:
    """(image, camera, identity) triples; camera B carries the jitter."""
    if n_identities > N_HUES * len(ROW_SLOTS):
        raise ValueError(
            f"at most {N_HUES * len(ROW_SLOTS)} identities stay unique"
        )
    rng = np.random.default_rng(seed)
    items = []
    for identity in range(n_identities):
        name = f"id{identity:03d}"
        for _ in range(images_per_view):
            items.append(
                (person_image(identity, rng, noise_sigma=noise_sigma), "A", name)
            )
        for _ in range(images_per_view):
            dy = int(rng.integers(-max_jitter, max_jitter + 1))
            dx = int(rng.integers(-3, 4))
            gain = rng.uniform(1.0 - gain_spread, 1.0 + gain_spread, size=3)
            items.append(
                (
                    person_image(
                        identity,
                        rng,
                        dy=dy,
                        dx=dx,
                        gain=gain,
                        noise_sigma=noise_sigma,
                    ),
                    "B",
                    name,
                )
            )
    return items


def write_synthetic_dataset(
    out_dir,
    n_identities: int = 60,
    seed: int = 0,
    images_per_view: int = 1,
) -> Path:
    """PNG files plus a manifest CSV; returns the manifest path."""
    out_dir = Path(out_dir)
    image_dir = out_dir / "images"
    image_dir.mkdir(parents=True, exist_ok=True)
    counters: dict[tuple[str, str], int] = {}
    entries = []
    for image, camera, identity in generate_synthetic_items(
        n_identities, seed, images_per_view
    ):
        shot = counters.get((identity, camera), 0)
        counters[(identity, camera)] = shot + 1
        path = image_dir / f"{identity}_{camera}_{shot}.png"
        Image.fromarray(image).save(path)
        entries.append(
            ManifestEntry(path=str(path), camera=camera, identity=identity)
        )
    manifest = out_dir / "manifest.csv"
    write_manifest(manifest, entries)
    return manifest
