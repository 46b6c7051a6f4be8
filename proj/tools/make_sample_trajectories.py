#!/usr/bin/env python3
"""Writes the synthetic 6-vehicle replay sample (vehicle_id,frame,x,y,vx,vy,length,width)."""
import argparse
import csv
import math

DT = 0.1
FRAMES = 350
LANES = [-4.0, 0.0, 4.0]

# id, x0, lane, speed profile (v0, v1), length, width, optional lane change (to_lane, t_start, duration)
VEHICLES = [
    (1, 10.0, 1, (12.5, 12.5), 4.5, 1.8, None),
    (2, 60.0, 1, (13.5, 13.5), 4.8, 1.9, None),
    (3, 30.0, 0, (13.5, 14.0), 4.4, 1.8, None),
    (4, 120.0, 0, (14.5, 14.5), 12.0, 2.5, None),
    (5, 0.0, 2, (15.0, 14.0), 4.6, 1.8, (1, 12.0, 4.0)),
    (6, 90.0, 2, (12.5, 12.5), 5.0, 2.0, None),
]


def lateral(lane, change, t):
    y0 = LANES[lane]
    if change is None:
        return y0, 0.0
    to_lane, start, dur = change
    y1 = LANES[to_lane]
    if t <= start:
        return y0, 0.0
    if t >= start + dur:
        return y1, 0.0
    s = (t - start) / dur
    y = y0 + (y1 - y0) * 0.5 * (1.0 - math.cos(math.pi * s))
    vy = (y1 - y0) * 0.5 * math.pi / dur * math.sin(math.pi * s)
    return y, vy


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out")
    args = ap.parse_args()
    rows = []
    for vid, x0, lane, (v0, v1), length, width, change in VEHICLES:
        total = (FRAMES - 1) * DT
        x = x0
        for f in range(FRAMES):
            t = f * DT
            vx = v0 + (v1 - v0) * t / total
            y, vy = lateral(lane, change, t)
            rows.append((vid, f, x, y, vx, vy, length, width))
            x += vx * DT
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["vehicle_id", "frame", "x", "y", "vx", "vy", "length", "width"])
        for r in rows:
            w.writerow([r[0], r[1]] + [f"{v:.6f}" for v in r[2:]])


if __name__ == "__main__":
    main()
