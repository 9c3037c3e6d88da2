#!/usr/bin/env python3
"""Hausdorff distance between the optimized capacity boundary and brute-force simplex enumeration.

Only 2x2 input alphabets; the grid has ``(1/step + 3 choose 3)`` points.
"""
import argparse
import time
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull, cKDTree

from macdisp import boundary, load_channel


def grid_corners(w, step):
    m = int(round(1 / step))
    idx = np.array([(i, j, k, m - i - j - k) for i in range(m + 1) for j in range(m + 1 - i)
                    for k in range(m + 1 - i - j)], dtype=np.float64)
    p = idx.reshape(-1, 2, 2) / m
    joint = p[..., None] * w
    s = joint.sum(axis=1)
    py = s.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = s / p.sum(axis=1)[..., None]
        l1 = np.where(joint > 0, np.log(w) - np.log(q)[:, None], 0.0)
        l12 = np.where(joint > 0, np.log(w) - np.log(py)[:, None, None], 0.0)
    i1 = np.maximum((joint * l1).sum(axis=(1, 2, 3)), 0.0)
    i12 = (joint * l12).sum(axis=(1, 2, 3))
    return np.column_stack([i1, i12 - i1])


def pareto_outline(corners):
    pts = np.vstack([corners, [[0.0, 0.0]], [[0.0, (corners.sum(axis=1)).max()]],
                     [[corners[:, 0].max(), 0.0]]])
    hull = pts[ConvexHull(pts).vertices]
    # keep the upper-right chain, walked by increasing R1
    hull = hull[(hull[:, 0] > 0) | (hull[:, 1] > 0)]
    order = np.argsort(hull[:, 0] - 1e-12 * hull[:, 1])
    chain = [hull[i] for i in order if hull[i, 1] > 0 or hull[i, 0] == hull[:, 0].max()]
    return np.array(chain)


def densify(poly, spacing=1e-4):
    out = [poly[:1]]
    for a, b in zip(poly[:-1], poly[1:]):
        m = max(1, int(np.ceil(np.hypot(*(b - a)) / spacing)))
        out.append(a + np.linspace(0, 1, m + 1)[1:, None] * (b - a))
    return np.vstack(out)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("channels", type=Path, nargs="+")
    ap.add_argument("--resolution", type=int, default=128)
    ap.add_argument("--step", type=float, default=0.005)
    args = ap.parse_args(argv)

    for path in args.channels:
        ch = load_channel(path.read_text())
        if ch.w.shape[:2] != (2, 2):
            raise SystemExit(f"{path}: grid enumeration needs 2x2 input alphabets")
        t0 = time.perf_counter()
        bd = boundary(ch, resolution=args.resolution)
        t1 = time.perf_counter()
        a, b = densify(bd.outline()), densify(pareto_outline(grid_corners(ch.w, args.step)))
        d = max(cKDTree(b).query(a)[0].max(), cKDTree(a).query(b)[0].max())
        print(f"{path.name}: hausdorff {d:.2e} nats  (C1 {bd.r1_capacity:.5f}, Csum {bd.sum_capacity:.5f}, "
              f"boundary {t1 - t0:.1f} s)")


if __name__ == "__main__":
    main()
