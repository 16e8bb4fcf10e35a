"""
SPECTROGRAM IMAGES

Renders normalized spectrograms (values in [-1, 1]) as PNG images for the
transform command: one image per panel plus a side-by-side comparison strip.
"""

from pathlib import Path
from typing import Dict, List, Union

import numpy as np
from matplotlib import colormaps
from PIL import Image

from utils.file_operations import ensure_directory
from utils.logging_config import get_logger

logger = get_logger("spectrogram_images")


def spectrogram_to_image(values: np.ndarray, zoom: int = 4, colormap: str = "magma") -> Image.Image:
    """
    Colorize an (n_mels x T) matrix with low frequencies at the bottom.

    Args:
        values: Normalized spectrogram in [-1, 1]
        zoom: Integer upscaling factor (nearest neighbour)
        colormap: Matplotlib colormap name
    """
    scaled = (np.clip(np.asarray(values, dtype=np.float64), -1.0, 1.0) + 1.0) / 2.0
    rgba = colormaps[colormap](np.flipud(scaled))
    image = Image.fromarray((rgba[..., :3] * 255).astype(np.uint8))
    if zoom > 1:
        image = image.resize((image.width * zoom, image.height * zoom), Image.Resampling.NEAREST)
    return image


def save_spectrogram_images(
    output_dir: Union[str, Path],
    stem: str,
    panels: Dict[str, np.ndarray],
    zoom: int = 4,
    gap: int = 8
) -> List[Path]:
    """
    Write one PNG per panel ("<stem>_<name>.png") and a comparison strip
    ("<stem>_panels.png") with the panels left to right.

    Returns:
        Paths of every written image, strip last
    """
    output_dir = ensure_directory(output_dir)
    images = {name: spectrogram_to_image(values, zoom=zoom) for name, values in panels.items()}

    written = []
    for name, image in images.items():
        path = output_dir / f"{stem}_{name}.png"
        image.save(path)
        written.append(path)

    if images:
        width = sum(image.width for image in images.values()) + gap * (len(images) - 1)
        height = max(image.height for image in images.values())
        strip = Image.new("RGB", (width, height), color="white")
        offset = 0
        for image in images.values():
            strip.paste(image, (offset, height - image.height))
            offset += image.width + gap
        strip_path = output_dir / f"{stem}_panels.png"
        strip.save(strip_path)
        written.append(strip_path)

    logger.debug(f"Wrote {len(written)} spectrogram images for {stem}")
    return written
