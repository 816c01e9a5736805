"""Straight-line AP3D evaluator used to produce the golden CSV.

Deliberately shares nothing with the Rust implementation: IoU comes from
shapely polygon intersection of top-view footprints times the vertical
overlap, which is exact for yaw-only boxes and is the only case accepted.

    python3 tools/reference_eval.py GT.json PRED.json > golden.csv
"""

import json
import sys

from shapely.geometry import Polygon

THRESHOLDS = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5]
NEAR, FAR = 10.0, 35.0
MAX_OCCLUSION = 0.66
MAX_TRUNCATION = 0.66
MIN_HEIGHT_FRACTION = 0.0625
BOUNDARY_MARGIN = 1e-9


def check_yaw_only(rot):
    r = rot
    assert abs(r[4] - 1.0) < 1e-12, "only yaw-only boxes are supported"
    assert max(abs(r[1]), abs(r[3]), abs(r[5]), abs(r[7])) < 1e-12


def footprint(box):
    check_yaw_only(box["rotation"])
    cx, _, cz = box["center"]
    w, _, l = box["dims"]
    r = box["rotation"]
    pts = []
    for sx, sz in ((-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)):
        lx, lz = sx * w, sz * l
        pts.append((cx + r[0] * lx + r[2] * lz, cz + r[6] * lx + r[8] * lz))
    return Polygon(pts)


def iou(a, b):
    ya0 = a["center"][1] - a["dims"][1] / 2
    ya1 = a["center"][1] + a["dims"][1] / 2
    yb0 = b["center"][1] - b["dims"][1] / 2
    yb1 = b["center"][1] + b["dims"][1] / 2
    dy = max(0.0, min(ya1, yb1) - max(ya0, yb0))
    inter = footprint(a).intersection(footprint(b)).area * dy
    va = a["dims"][0] * a["dims"][1] * a["dims"][2]
    vb = b["dims"][0] * b["dims"][1] * b["dims"][2]
    return inter / (va + vb - inter)


def in_band(band, depth):
    if band == "all":
        return True
    if band == "near":
        return 0.0 < depth <= NEAR
    if band == "medium":
        return NEAR < depth <= FAR
    return depth > FAR


def ignored_by_rules(ann, image_height):
    if ann.get("occlusion", 0.0) > MAX_OCCLUSION:
        return True
    if ann.get("truncation", 0.0) > MAX_TRUNCATION:
        return True
    return ann["bbox2d"][3] / image_height < MIN_HEIGHT_FRACTION


def average_precision(ranked, num_gt):
    if num_gt == 0:
        return None
    ranked = sorted(ranked, key=lambda e: -e[0])
    recalls, precisions = [], []
    tp = fp = 0
    for _, is_tp in ranked:
        if is_tp:
            tp += 1
        else:
            fp += 1
        recalls.append(tp / num_gt)
        precisions.append(tp / (tp + fp))
    for i in range(len(precisions) - 1, 0, -1):
        if precisions[i] > precisions[i - 1]:
            precisions[i - 1] = precisions[i]
    total = 0.0
    for r in range(101):
        threshold = r / 100
        value = 0.0
        for i in range(len(recalls)):
            if recalls[i] >= threshold:
                value = precisions[i]
                break
        total += value
    return total / 101


def main(gt_path, pred_path):
    gt = json.load(open(gt_path))
    preds = json.load(open(pred_path))["predictions"]
    heights = {im["id"]: im["height"] for im in gt["images"]}
    norm = lambda s: s.strip().lower()
    categories = sorted({norm(c["name"]) for c in gt["categories"]}
                        | {norm(a["category"]) for a in gt["annotations"]})
    image_ids = sorted({a["image_id"] for a in gt["annotations"]} | {p["image_id"] for p in preds})

    print("category,band,tau,ap,num_gt,num_ignored,num_pred,num_tp")
    for cat in categories:
        cat_preds = [p for p in preds if norm(p["category"]) == cat]
        cat_gts = [a for a in gt["annotations"] if norm(a["category"]) == cat]
        for band in ("all", "near", "medium", "far"):
            num_gt = num_ignored = 0
            for a in cat_gts:
                if ignored_by_rules(a, heights[a["image_id"]]) or not in_band(band, a["center"][2]):
                    num_ignored += 1
                else:
                    num_gt += 1
            for tau in THRESHOLDS:
                ranked, num_tp = [], 0
                for image in image_ids:
                    ps = sorted([p for p in cat_preds if p["image_id"] == image], key=lambda p: -p["score"])
                    gs = [a for a in cat_gts if a["image_id"] == image]
                    ign = [ignored_by_rules(a, heights[image]) or not in_band(band, a["center"][2]) for a in gs]
                    taken = [False] * len(gs)
                    for p in ps:
                        ious = [iou(p, g) for g in gs]
                        for v in ious:
                            for t in THRESHOLDS:
                                assert abs(v - t) > BOUNDARY_MARGIN, "IoU too close to a threshold"
                        best, best_iou = None, None
                        for j, v in enumerate(ious):
                            if ign[j] or taken[j] or v < tau:
                                continue
                            if best is None or v > best_iou:
                                best, best_iou = j, v
                        if best is not None:
                            taken[best] = True
                            num_tp += 1
                            ranked.append((p["score"], True))
                        elif any(ign[j] and ious[j] >= tau for j in range(len(gs))):
                            pass
                        else:
                            ranked.append((p["score"], False))
                ap = average_precision(ranked, num_gt)
                ap_text = "" if ap is None else repr(ap)
                print(f"{cat},{band},{tau!r},{ap_text},{num_gt},{num_ignored},{len(cat_preds)},{num_tp}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
