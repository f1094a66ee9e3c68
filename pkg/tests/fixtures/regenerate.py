"""Rebuild the golden files from the OpenPose fixtures.

Run only when the rasterization or parsing contract changes on purpose:
    python tests/fixtures/regenerate.py
"""
import json
from pathlib import Path

from PIL import Image

from signgan.core import denormalize
from signgan.ingestion import parse_openpose_json, rasterize_pose

HERE = Path(__file__).parent
CANVAS = (128, 128)

skeleton = parse_openpose_json((HERE / "openpose_signer.json").read_bytes(), CANVAS)
golden = {
    "body": skeleton.body.tolist(),
    "left_hand": skeleton.left_hand.tolist(),
    "right_hand": skeleton.right_hand.tolist(),
    "canvas": list(skeleton.canvas),
}
(HERE / "openpose_signer.golden.json").write_text(json.dumps(golden, indent=1))
Image.fromarray(denormalize(rasterize_pose(skeleton, 64).pixels)).save(HERE / "openpose_signer.render64.png")
