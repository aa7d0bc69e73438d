#!/usr/bin/env python3
"""Writes data/default_rig.json, a synthetic 73-landmark face rig.

Landmark order: jaw 0-14, brows 15-20 / 21-26, eyes 27-34 / 35-42,
nose 43-47, outer lip 48-61, inner lip 62-72. Object space, y points down.
"""
import json
import math
import sys
from pathlib import Path


def depth(x, y):
    return round(0.02 * x * x + 0.01 * y * y - 2.0, 4)


def pt(x, y, dz=0.0):
    return [round(x, 4), round(y, 4), round(depth(x, y) + dz, 4)]


def ellipse(cx, cy, rx, ry, n, start=math.pi, span=2 * math.pi, closed=True):
    steps = n if closed else n - 1
    return [(cx + rx * math.cos(start + span * i / steps), cy + ry * math.sin(start + span * i / steps)) for i in range(n)]


def landmarks():
    pts = []
    for x, y in ellipse(0.0, 0.0, 7.0, 9.0, 15, start=math.pi, span=-math.pi, closed=False):
        pts.append(pt(x, -y if y < 0 else y))
    for side in (-1, 1):
        for i in range(6):
            x = side * (1.2 + i * 0.9)
            pts.append(pt(x, -4.2 - 0.6 * math.sin(math.pi * i / 5)))
    for side in (-1, 1):
        for x, y in ellipse(side * 3.0, -2.2, 1.4, 0.6, 8):
            pts.append(pt(x, y))
    for x, y in [(0.0, -1.5), (0.0, 0.5), (-1.1, 1.6), (0.0, 1.9), (1.1, 1.6)]:
        pts.append(pt(x, y, dz=-1.5 if abs(x) < 0.5 else -0.8))
    for x, y in ellipse(0.0, 4.3, 2.6, 1.1, 14):
        pts.append(pt(x, y))
    for x, y in ellipse(0.0, 4.3, 1.8, 0.45, 11):
        pts.append(pt(x, y))
    assert len(pts) == 73
    return pts


def topology():
    def loop(a, b):
        return list(range(a, b)) + [a]

    return [
        list(range(0, 15)),
        list(range(15, 21)),
        list(range(21, 27)),
        loop(27, 35),
        loop(35, 43),
        [43, 44, 46],
        [45, 46, 47],
        loop(48, 62),
        loop(62, 73),
    ]


def clip(base, frames, brow_amp, blink_period, phase):
    out = []
    for f in range(frames):
        t = f / 60.0
        frame = [list(p) for p in base]
        lift = brow_amp * math.sin(2 * math.pi * 0.5 * t + phase)
        for i in range(15, 27):
            frame[i][1] = round(frame[i][1] - lift, 4)
        closing = max(0.0, math.cos(2 * math.pi * f / blink_period)) ** 8
        for eye in (range(27, 35), range(35, 43)):
            for i in eye:
                frame[i][1] = round(-2.2 + (frame[i][1] + 2.2) * (1.0 - 0.9 * closing), 4)
        out.append(frame)
    return out


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data" / "default_rig.json"
    base = landmarks()
    shoulders = [[round(x, 4), round(13.0 + 0.012 * x * x, 4), 64.0] for x in [-22, -17, -12, -7, 7, 12, 17, 22]]
    rig = {
        "landmarks": base,
        "mouth_indices": list(range(48, 73)),
        "topology": topology(),
        "rest_translation": [0.0, 0.0, 60.0],
        "static_clips": [clip(base, 90, 0.15, 90, 0.0), clip(base, 120, 0.25, 120, 1.3)],
        "billboard": {"points": shoulders, "alpha": 0.5},
    }
    out.write_text(json.dumps(rig, separators=(",", ":")) + "\n")


if __name__ == "__main__":
    main()
