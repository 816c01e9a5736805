"""Straight-line dataset statistics used to produce the golden stats JSON.

Histogram counts use numpy (inclusive upper edge on the last bin) and the
correlations use numpy.corrcoef, independently of the Rust code.

    python3 tools/reference_stats.py DATASET.json > golden.json
"""

import json
import sys

import numpy as np

CENTER_BINS = 64
TOPVIEW_BINS = 64
SIZE_BINS = 50
DEPTH_RANGE = (0.0, 20.0)
LATERAL_RANGE = (-10.0, 10.0)


def counts_1d(values, lo, hi, bins):
    inside = [v for v in values if lo <= v <= hi]
    counts, _ = np.histogram(inside, bins=bins, range=(lo, hi))
    return [int(c) for c in counts], len(values) - len(inside)


def counts_2d(cols, rows, col_range, row_range, bins):
    pairs = [(c, r) for c, r in zip(cols, rows)
             if col_range[0] <= c <= col_range[1] and row_range[0] <= r <= row_range[1]]
    counts, _, _ = np.histogram2d(
        [r for _, r in pairs], [c for c, _ in pairs],
        bins=bins, range=[row_range, col_range])
    return [[int(v) for v in row] for row in counts], len(cols) - len(pairs)


def main(path):
    ds = json.load(open(path))
    images = {im["id"]: im for im in ds["images"]}
    cx, cy, proj_z, behind = [], [], [], 0
    xs, zs, sizes = [], [], []
    categories = {}
    for a in ds["annotations"]:
        im = images[a["image_id"]]
        k = im.get("intrinsics") or {
            "fx": 2 * im["height"], "fy": 2 * im["height"],
            "px": im["width"] / 2, "py": im["height"] / 2}
        x, y, z = a["center"]
        if z > 0:
            cx.append((k["fx"] * x / z + k["px"]) / im["width"])
            cy.append((k["fy"] * y / z + k["py"]) / im["height"])
            proj_z.append(z)
        else:
            behind += 1
        xs.append(x)
        zs.append(z)
        w, h = a["bbox2d"][2], a["bbox2d"][3]
        sizes.append(float(np.sqrt(w * h / (im["width"] * im["height"]))))
        categories[a["category"]] = categories.get(a["category"], 0) + 1

    center, center_out = counts_2d(cx, cy, (0.0, 1.0), (0.0, 1.0), CENTER_BINS)
    top, top_out = counts_2d(xs, zs, LATERAL_RANGE, DEPTH_RANGE, TOPVIEW_BINS)
    size, size_out = counts_1d(sizes, 0.0, 1.0, SIZE_BINS)
    report = {
        "num_annotations": len(ds["annotations"]),
        "center_histogram": {"counts": center, "out_of_range": center_out + behind},
        "topview_histogram": {"counts": top, "out_of_range": top_out},
        "relative_size_histogram": {"counts": size, "out_of_range": size_out},
        "correlations": {
            "y_vs_depth": float(np.corrcoef(cy, proj_z)[0, 1]),
            "size_vs_depth": float(np.corrcoef(sizes, zs)[0, 1]),
        },
        "category_counts": dict(sorted(categories.items())),
    }
    print(json.dumps(report))


if __name__ == "__main__":
    main(sys.argv[1])
