"""Binary PPM (P6) rendering of sampled grids.

Output bytes are a pure function of the inputs; image row 0 is the top of
the region.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contour import Contour
from .lattice import GridConfig, VacancySet, square_bounds

__all__ = ["RenderSpec", "render_ppm"]

# One tint per level, cycled.
_LEVEL_COLORS = (
    (66, 99, 146),
    (122, 68, 132),
    (164, 98, 60),
    (84, 130, 78),
    (140, 140, 72),
    (96, 96, 96),
)


@dataclass(frozen=True)
class RenderSpec:
    cell_px: int = 4
    retained: tuple[int, int, int] = (236, 232, 224)
    vacant: tuple[int, int, int] = (28, 26, 32)
    contour: tuple[int, int, int] = (214, 40, 40)
    path: tuple[int, int, int] = (30, 120, 210)

    def __post_init__(self):
        if self.cell_px < 1:
            raise ValueError("cell_px must be >= 1")


def _block(img: np.ndarray, h_units: int, px: int, x0: int, x1: int, y0: int, y1: int):
    """Image-slice view of the unit rectangle [x0,x1) x [y0,y1)."""
    top = (h_units - y1) * px
    bot = (h_units - y0) * px
    return img[top:bot, x0 * px : x1 * px]


def render_ppm(
    cfg: GridConfig,
    bits: np.ndarray,
    vac: VacancySet | None = None,
    contour: Contour | None = None,
    path: list[tuple[int, int]] | None = None,
    spec: RenderSpec = RenderSpec(),
) -> bytes:
    w, h = cfg.width, cfg.height
    if bits.shape != (w, h):
        raise ValueError(f"bits shape {bits.shape} != region {(w, h)}")
    px = spec.cell_px
    img = np.empty((h * px, w * px, 3), dtype=np.uint8)
    # Base layer from the retention grid; rows flipped so north is up.
    cell = np.where(bits.T[::-1], 0, 1).astype(np.uint8)
    palette = np.array([spec.retained, spec.vacant], dtype=np.uint8)
    img[:] = palette[cell.repeat(px, axis=0).repeat(px, axis=1)]

    if vac is not None:
        for depth, k in enumerate(vac.levels):
            color = _LEVEL_COLORS[depth % len(_LEVEL_COLORS)]
            s = cfg.side(k)
            cols, rows = vac.arrays(k)
            for c, rw in zip(cols, rows):
                _block(img, h, px, (c - 1) * s, c * s, (rw - 1) * s, rw * s)[:] = color
    if contour is not None:
        for sq in contour.squares:
            left, right, bottom, top = square_bounds(cfg, sq)
            blk = _block(img, h, px, left, right, bottom, top)
            blk[:1, :] = spec.contour
            blk[-1:, :] = spec.contour
            blk[:, :1] = spec.contour
            blk[:, -1:] = spec.contour
    if path is not None:
        for c, rw in path:
            _block(img, h, px, c - 1, c, rw - 1, rw)[:] = spec.path
    header = f"P6\n{w * px} {h * px}\n255\n".encode("ascii")
    return header + img.tobytes()
