"""
PNG visualisation of a grounding: concept map with ground-truth and predicted boxes
"""

import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image, ImageDraw

from .boxes import BoundingBox
from .errors import InvalidInputError
from .scoremap import ScoreMap

logger = logging.getLogger(__name__)

GROUND_TRUTH_COLOR = (0, 200, 0)
PREDICTION_COLOR = (255, 0, 0)


def render_grounding(score_map: Optional[ScoreMap], width: int, height: int,
                     predicted: Optional[BoundingBox] = None,
                     ground_truth: Optional[BoundingBox] = None,
                     scale: int = 16) -> Image.Image:
    """
    Draw a score map in grey levels and outline the boxes

    Args:
        score_map: Map shown as background (mid grey when None)
        width: Image width in pixels
        height: Image height in pixels
        predicted: Box drawn in red
        ground_truth: Box drawn in green
        scale: Screen pixels per map pixel

    Returns:
        RGB PIL image of size (width * scale, height * scale)
    """
    if scale < 1:
        raise InvalidInputError(f"scale must be >= 1, got {scale}")
    if score_map is None:
        grey = np.full((height, width), 128, dtype=np.uint8)
    else:
        grey = np.round(score_map.probability * 255.0).astype(np.uint8)
    image = Image.fromarray(grey).convert("RGB")
    image = image.resize((width * scale, height * scale), Image.Resampling.NEAREST)

    draw = ImageDraw.Draw(image)
    line = max(1, scale // 4)
    for box, color in ((ground_truth, GROUND_TRUTH_COLOR), (predicted, PREDICTION_COLOR)):
        if box is None:
            continue
        draw.rectangle(
            [box.x1 * scale, box.y1 * scale, (box.x2 + 1) * scale - 1, (box.y2 + 1) * scale - 1],
            outline=color,
            width=line,
        )
    return image


def save_grounding(path: Union[str, Path], image: Image.Image):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    image.save(path, format="PNG")
    logger.info("✅ Rendering saved to %s", path)
