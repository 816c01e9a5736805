"""Writes the seeded multi-image evaluation fixture.

Three images with different cameras, two annotated categories plus one
listed without ground truth, yaw-only boxes spread over all depth bands,
ignored objects, duplicate detections, false positives and one prediction
of an unknown category.

    python3 tools/make_eval_fixture.py crates/cli/tests/fixtures
"""

import json
import math
import random
import sys
from pathlib import Path

SEED = 20240611

CAMERAS = [
    {"id": 1, "width": 1242.0, "height": 375.0,
     "intrinsics": {"fx": 721.5377, "fy": 721.5377, "px": 609.5593, "py": 172.854}},
    {"id": 2, "width": 640.0, "height": 480.0,
     "intrinsics": {"fx": 520.0, "fy": 518.0, "px": 319.5, "py": 241.0}},
    # No intrinsics: the loader falls back to f = 2H at the image center.
    {"id": 3, "width": 1920.0, "height": 1440.0},
]

DIMS = {"car": (1.8, 1.5, 4.2), "pedestrian": (0.6, 1.75, 0.7)}


def yaw_matrix(angle):
    c, s = math.cos(angle), math.sin(angle)
    return [c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c]


def corners(center, dims, rot):
    out = []
    for sx in (-0.5, 0.5):
        for sy in (-0.5, 0.5):
            for sz in (-0.5, 0.5):
                local = (sx * dims[0], sy * dims[1], sz * dims[2])
                out.append(tuple(
                    center[i] + sum(rot[3 * i + j] * local[j] for j in range(3))
                    for i in range(3)))
    return out


def bbox2d(image, center, dims, rot):
    k = image.get("intrinsics") or {
        "fx": 2 * image["height"], "fy": 2 * image["height"],
        "px": image["width"] / 2, "py": image["height"] / 2}
    us, vs = [], []
    for x, y, z in corners(center, dims, rot):
        us.append(k["fx"] * x / z + k["px"])
        vs.append(k["fy"] * y / z + k["py"])
    return [min(us), min(vs), max(us) - min(us), max(vs) - min(vs)]


def jitter_dims(rng, dims, scale):
    return [d * math.exp(rng.gauss(0.0, scale)) for d in dims]


def main(out_dir):
    rng = random.Random(SEED)
    annotations, predictions = [], []
    ann_id = 1
    for image in CAMERAS:
        for _ in range(rng.randint(7, 10)):
            category = rng.choice(["car", "car", "pedestrian"])
            depth = rng.choice([rng.uniform(3, 10), rng.uniform(10, 35), rng.uniform(35, 60)])
            dims = jitter_dims(rng, DIMS[category], 0.08)
            center = [rng.uniform(-0.25, 0.25) * depth, rng.uniform(0.5, 1.5), depth]
            yaw = rng.uniform(-math.pi, math.pi)
            rot = yaw_matrix(yaw)
            ann = {
                "id": ann_id,
                "image_id": image["id"],
                "category": category,
                "bbox2d": bbox2d(image, center, dims, rot),
                "center": center,
                "rotation": rot,
                "dims": dims,
            }
            if rng.random() < 0.8:
                ann["occlusion"] = rng.choice([0.0, 0.2, 0.5, 0.9])
            if rng.random() < 0.5:
                ann["truncation"] = rng.choice([0.0, 0.1, 0.7])
            annotations.append(ann)
            ann_id += 1

            detections = 0 if rng.random() < 0.15 else (2 if rng.random() < 0.2 else 1)
            for _ in range(detections):
                err = 0.02 + 0.01 * depth * rng.random()
                pred_center = [c + rng.gauss(0.0, err) for c in center]
                predictions.append({
                    "image_id": image["id"],
                    "category": category if rng.random() < 0.9 else category.upper() + " ",
                    "center": pred_center,
                    "rotation": yaw_matrix(yaw + rng.gauss(0.0, 0.2)),
                    "dims": jitter_dims(rng, dims, 0.1),
                    "score": round(rng.uniform(0.2, 1.0), 2),
                })

        for _ in range(3):
            category = rng.choice(["car", "pedestrian"])
            depth = rng.uniform(4, 50)
            predictions.append({
                "image_id": image["id"],
                "category": category,
                "center": [rng.uniform(-0.25, 0.25) * depth, rng.uniform(0.5, 1.5), depth],
                "rotation": yaw_matrix(rng.uniform(-math.pi, math.pi)),
                "dims": jitter_dims(rng, DIMS[category], 0.1),
                "score": round(rng.uniform(0.2, 1.0), 2),
            })

    predictions.append({
        "image_id": 1,
        "category": "truck",
        "center": [0.0, 1.0, 12.0],
        "rotation": yaw_matrix(0.3),
        "dims": [2.5, 3.0, 8.0],
        "score": 0.95,
    })
    rng.shuffle(predictions)

    dataset = {
        "images": CAMERAS,
        "categories": [
            {"name": "car", "priors": list(DIMS["car"])},
            {"name": "pedestrian", "priors": list(DIMS["pedestrian"])},
            {"name": "cyclist"},
        ],
        "annotations": annotations,
    }
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "eval_gt.json").write_text(json.dumps(dataset, indent=1) + "\n")
    (out / "eval_pred.json").write_text(json.dumps({"predictions": predictions}, indent=1) + "\n")


if __name__ == "__main__":
    main(sys.argv[1])
