import io
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

sys.path.insert(0, str(Path(__file__).parent))

from roadatlas.config import RuntimeConfig

from scenes import Scene, identity_config


def png_bytes(image: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(image, dtype=np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


def scene_upload_parts(scene: Scene, name: str) -> list:
    """Multipart parts for one scene: the PNG plus its geo sidecar."""
    sidecar = f'{{"lat": {scene.lat}, "lon": {scene.lon}}}'.encode()
    return [
        ("files", (f"{name}.png", png_bytes(scene.image), "image/png")),
        ("files", (f"{name}.json", sidecar, "application/json")),
    ]


@pytest.fixture
def runtime() -> RuntimeConfig:
    return RuntimeConfig(pipeline=identity_config(320, 240))
