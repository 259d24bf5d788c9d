"""Dense patch descriptors for pedestrian images.

An image is sampled on a dense grid of overlapping square patches; each
patch is described by multi-scale LAB color histograms concatenated with
per-channel dense SIFT, giving a 672-dim vector under the default config
(32 bins x 3 channels x 3 scales + 128 x 3 channels).

All functions are pure: byte-equal images produce bit-equal descriptors.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .config import GridConfig

_TWO_PI = 2.0 * np.pi

# D65 white point, sRGB primaries
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ],
    dtype=np.float64,
)
_WHITE_D65 = np.array([0.95047, 1.0, 1.08883], dtype=np.float64)


@dataclass(frozen=True)
class PatchGrid:
    """M x N lattice of patch descriptors for one image."""

    rows: int
    cols: int
    descriptors: np.ndarray  # (rows, cols, dim) float32
    camera: str = ""
    identity: str | None = None
    image_id: str = ""

    def __post_init__(self) -> None:
        if self.descriptors.shape[:2] != (self.rows, self.cols):
            raise ValueError(
                f"descriptor lattice {self.descriptors.shape[:2]} does not match "
                f"grid dims ({self.rows}, {self.cols})"
            )

    @property
    def dim(self) -> int:
        return self.descriptors.shape[2]

    @property
    def flat(self) -> np.ndarray:
        """Descriptors as a (rows*cols, dim) row-major view."""
        return self.descriptors.reshape(self.rows * self.cols, self.dim)

    def linear_index(self, row: int, col: int) -> int:
        return row * self.cols + col

    def rowcol(self, index: int) -> tuple[int, int]:
        return divmod(index, self.cols)


def load_image(path: str | Path, resize: tuple[int, int] | None = None) -> np.ndarray:
    """Decode an image file to an (H, W, 3) uint8 RGB array.

    Grayscale inputs are promoted to RGB. ``resize`` is an optional
    (height, width) target, applied bilinearly.
    """
    with PILImage.open(path) as im:
        im.load()
        if im.mode != "RGB":
            im = im.convert("RGB")
        if resize is not None:
            height, width = resize
            im = im.resize((width, height), PILImage.Resampling.BILINEAR)
        return np.asarray(im, dtype=np.uint8)


def grid_dims(image: np.ndarray, cfg: GridConfig) -> tuple[int, int]:
    """Number of patch rows and columns for an image under ``cfg``."""
    height, width = image.shape[:2]
    if height < cfg.patch_size or width < cfg.patch_size:
        raise ValueError(
            f"image {height}x{width} smaller than one {cfg.patch_size}px patch"
        )
    m = (height - cfg.patch_size) // cfg.stride + 1
    n = (width - cfg.patch_size) // cfg.stride + 1
    return m, n


def rgb_to_lab(image: np.ndarray) -> np.ndarray:
    """Convert (H, W, 3) uint8 sRGB to LAB with each channel scaled to [0, 1].

    D65 white point; L* is divided by 100, a*/b* mapped from [-128, 127]
    and clipped, so histogram binning sees a common range.
    """
    srgb = image.astype(np.float64) / 255.0
    linear = np.where(
        srgb <= 0.04045, srgb / 12.92, ((srgb + 0.055) / 1.055) ** 2.4
    )
    xyz = linear @ _RGB_TO_XYZ.T
    xyz /= _WHITE_D65

    delta = 6.0 / 29.0
    f = np.where(
        xyz > delta**3, np.cbrt(xyz), xyz / (3.0 * delta**2) + 4.0 / 29.0
    )
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])

    lab[..., 0] /= 100.0
    lab[..., 1] = (lab[..., 1] + 128.0) / 255.0
    lab[..., 2] = (lab[..., 2] + 128.0) / 255.0
    return np.clip(lab, 0.0, 1.0).astype(np.float32)


def _resize_channel(channel: np.ndarray, out_hw: tuple[int, int]) -> np.ndarray:
    out_h, out_w = out_hw
    im = PILImage.fromarray(np.ascontiguousarray(channel, dtype=np.float32), mode="F")
    resized = im.resize((out_w, out_h), PILImage.Resampling.BILINEAR)
    return np.asarray(resized, dtype=np.float32)


def _scaled_dims(shape: tuple[int, int], scale: float) -> tuple[int, int]:
    return max(1, round(shape[0] * scale)), max(1, round(shape[1] * scale))


def _lab_pyramid(lab: np.ndarray, scales: tuple[float, ...]) -> dict[float, np.ndarray]:
    pyramid = {}
    for scale in scales:
        if scale == 1.0:
            pyramid[scale] = lab
            continue
        out_hw = _scaled_dims(lab.shape[:2], scale)
        channels = [_resize_channel(lab[..., c], out_hw) for c in range(3)]
        pyramid[scale] = np.stack(channels, axis=-1)
    return pyramid


def l2_normalize(vec: np.ndarray, axis: int = -1) -> np.ndarray:
    """L2-normalize along ``axis``; all-zero slices stay all-zero."""
    norm = np.linalg.norm(vec, axis=axis, keepdims=True)
    safe = np.where(norm > 0, norm, 1.0)
    return (vec / safe).astype(np.float32)


def _window_origin(
    center: float, window: int, extent: int
) -> int:
    start = int(round(center - window / 2.0))
    return int(np.clip(start, 0, extent - window))


def _histogram_blocks(
    pyramid: dict[float, np.ndarray],
    centers: np.ndarray,
    cfg: GridConfig,
) -> np.ndarray:
    """Color-histogram half of the descriptor for every patch center.

    ``centers`` is (P, 2) float (row, col) at scale 1. Output is
    (P, color_bins * 3 * len(scales)), channel-major then scale ascending,
    each bin block L2-normalized.
    """
    bins = cfg.color_bins
    num = centers.shape[0]
    scale_blocks = []
    for scale in sorted(cfg.scales):
        lab_s = pyramid[scale]
        h_s, w_s = lab_s.shape[:2]
        win_h = min(cfg.patch_size, h_s)
        win_w = min(cfg.patch_size, w_s)
        r0 = np.clip(
            np.round(centers[:, 0] * scale - win_h / 2.0).astype(np.int64), 0, h_s - win_h
        )
        c0 = np.clip(
            np.round(centers[:, 1] * scale - win_w / 2.0).astype(np.int64), 0, w_s - win_w
        )
        dr = np.arange(win_h)
        dc = np.arange(win_w)
        row_idx = r0[:, None, None] + dr[None, :, None]
        col_idx = c0[:, None, None] + dc[None, None, :]
        windows = lab_s[row_idx, col_idx, :]  # (P, win_h, win_w, 3)
        pixels = windows.reshape(num, win_h * win_w, 3)

        per_channel = []
        offsets = np.arange(num)[:, None] * bins
        for ch in range(3):
            idx = np.minimum((pixels[:, :, ch] * bins).astype(np.int64), bins - 1)
            hist = np.bincount(
                (offsets + idx).ravel(), minlength=num * bins
            ).reshape(num, bins)
            per_channel.append(l2_normalize(hist.astype(np.float32), axis=1))
        scale_blocks.append(per_channel)

    ordered = []
    for ch in range(3):
        for s_idx in range(len(cfg.scales)):
            ordered.append(scale_blocks[s_idx][ch])
    return np.concatenate(ordered, axis=1)


def _gradient_fields(channel: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradient magnitude and orientation with replicate-padded borders."""
    padded = np.pad(channel.astype(np.float64), 1, mode="edge")
    gx = 0.5 * (padded[1:-1, 2:] - padded[1:-1, :-2])
    gy = 0.5 * (padded[2:, 1:-1] - padded[:-2, 1:-1])
    magnitude = np.hypot(gx, gy)
    orientation = np.mod(np.arctan2(gy, gx), _TWO_PI)
    return magnitude, orientation


def _sift_blocks(
    lab: np.ndarray, origins: np.ndarray, cfg: GridConfig
) -> np.ndarray:
    """Dense-SIFT half of the descriptor for every patch top-left origin.

    ``origins`` is (P, 2) int (row, col) at scale 1. Output is
    (P, cells^2 * orient_bins * 3), one L2-normalized 128-dim block per
    LAB channel. Gradient magnitude votes are linearly interpolated
    across the two adjacent orientation bins only.
    """
    patch = cfg.patch_size
    cells = cfg.sift_cells
    obins = cfg.sift_orient_bins
    num = origins.shape[0]
    cell_dim = cells * cells * obins

    offs = np.arange(patch)
    cell_of_off = np.minimum(offs * cells // patch, cells - 1)
    cell_flat = (cell_of_off[:, None] * cells + cell_of_off[None, :]).ravel()  # (patch^2,)

    dr = np.arange(patch)
    row_idx = origins[:, 0][:, None, None] + dr[None, :, None]
    col_idx = origins[:, 1][:, None, None] + dr[None, None, :]

    blocks = []
    patch_offsets = np.arange(num)[:, None] * cell_dim
    for ch in range(3):
        magnitude, orientation = _gradient_fields(lab[..., ch])
        mag = magnitude[row_idx, col_idx].reshape(num, patch * patch)
        ori = orientation[row_idx, col_idx].reshape(num, patch * patch)

        pos = ori / (_TWO_PI / obins)
        lower = np.floor(pos)
        frac = pos - lower
        bin0 = lower.astype(np.int64) % obins
        bin1 = (bin0 + 1) % obins

        target0 = patch_offsets + cell_flat[None, :] * obins + bin0
        target1 = patch_offsets + cell_flat[None, :] * obins + bin1
        acc = np.bincount(
            target0.ravel(), weights=(mag * (1.0 - frac)).ravel(), minlength=num * cell_dim
        )
        acc += np.bincount(
            target1.ravel(), weights=(mag * frac).ravel(), minlength=num * cell_dim
        )
        hist = acc.reshape(num, cell_dim).astype(np.float32)
        blocks.append(l2_normalize(hist, axis=1))
    return np.concatenate(blocks, axis=1)


def _patch_centers(m: int, n: int, cfg: GridConfig) -> tuple[np.ndarray, np.ndarray]:
    """Top-left origins and float centers for all grid patches, row-major."""
    rows = np.repeat(np.arange(m), n)
    cols = np.tile(np.arange(n), m)
    origins = np.stack([rows * cfg.stride, cols * cfg.stride], axis=1)
    centers = origins + cfg.patch_size / 2.0
    return origins, centers


def color_histograms(
    image: np.ndarray, center: tuple[float, float], cfg: GridConfig
) -> np.ndarray:
    """Multi-scale LAB histogram descriptor for one patch center."""
    lab = rgb_to_lab(image)
    pyramid = _lab_pyramid(lab, cfg.scales)
    centers = np.asarray([center], dtype=np.float64)
    return _histogram_blocks(pyramid, centers, cfg)[0]


def dense_sift(
    image: np.ndarray, center: tuple[float, float], cfg: GridConfig
) -> np.ndarray:
    """Per-channel dense SIFT descriptor for one patch center."""
    lab = rgb_to_lab(image)
    height, width = lab.shape[:2]
    r0 = _window_origin(center[0], cfg.patch_size, height)
    c0 = _window_origin(center[1], cfg.patch_size, width)
    origins = np.asarray([[r0, c0]], dtype=np.int64)
    return _sift_blocks(lab, origins, cfg)[0]


def extract_grid(
    image: np.ndarray,
    cfg: GridConfig,
    camera: str = "",
    identity: str | None = None,
    image_id: str = "",
) -> PatchGrid:
    """Compute the full descriptor lattice for an image."""
    m, n = grid_dims(image, cfg)
    lab = rgb_to_lab(image)
    pyramid = _lab_pyramid(lab, cfg.scales)
    origins, centers = _patch_centers(m, n, cfg)

    color = _histogram_blocks(pyramid, centers, cfg)
    sift = _sift_blocks(lab, origins, cfg)
    descriptors = np.concatenate([color, sift], axis=1).reshape(m, n, -1)
    return PatchGrid(
        rows=m,
        cols=n,
        descriptors=np.ascontiguousarray(descriptors, dtype=np.float32),
        camera=camera,
        identity=identity,
        image_id=image_id,
    )
