"""360-ray range sensing against the arena geometry.

Rays fan out from the head link centre at one-degree spacing starting from
the head's own heading, so the scan is head-frame aligned. Each ray reports
the distance to the nearest wall rectangle, obstacle circle or beacon
circle, capped at the maximum range. The snake's own body is invisible to
the sensor.
"""

from __future__ import annotations

import math

import numpy as np

from ._jit import njit
from .arena import Arena

N_RAYS = 360
MAX_RANGE = 5.0
DOWNSAMPLE_STRIDE = 3


def ray_circle_hits(ox, oy, dx, dy, cx, cy, r):
    """Vectorised smallest positive ray parameter against one circle."""
    fx, fy = ox - cx, oy - cy
    b = dx * fx + dy * fy
    c = fx * fx + fy * fy - r * r
    disc = b * b - c
    hit = disc >= 0.0
    sqrt_disc = np.sqrt(np.where(hit, disc, 0.0))
    t_near = -b - sqrt_disc
    t_far = -b + sqrt_disc
    t = np.where(t_near > 0.0, t_near, t_far)
    return np.where(hit & (t > 0.0), t, np.inf)


def ray_rect_hits(ox, oy, dx, dy, x0, y0, x1, y1):
    """Vectorised entry parameter against one axis-aligned rectangle."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_dx = np.where(dx != 0.0, 1.0 / dx, np.inf)
        inv_dy = np.where(dy != 0.0, 1.0 / dy, np.inf)
        tx1 = (x0 - ox) * inv_dx
        tx2 = (x1 - ox) * inv_dx
        ty1 = (y0 - oy) * inv_dy
        ty2 = (y1 - oy) * inv_dy
    # a zero direction component hits the slab only if the origin is inside it
    in_x = (ox >= x0) & (ox <= x1)
    in_y = (oy >= y0) & (oy <= y1)
    tx_lo = np.where(dx != 0.0, np.minimum(tx1, tx2), np.where(in_x, -np.inf, np.inf))
    tx_hi = np.where(dx != 0.0, np.maximum(tx1, tx2), np.where(in_x, np.inf, -np.inf))
    ty_lo = np.where(dy != 0.0, np.minimum(ty1, ty2), np.where(in_y, -np.inf, np.inf))
    ty_hi = np.where(dy != 0.0, np.maximum(ty1, ty2), np.where(in_y, np.inf, -np.inf))
    t_enter = np.maximum(tx_lo, ty_lo)
    t_exit = np.minimum(tx_hi, ty_hi)
    hit = (t_exit >= t_enter) & (t_enter > 0.0)
    return np.where(hit, t_enter, np.inf)


@njit(cache=True)
def _scan_kernel(ox, oy, dx, dy, circles, rects, max_range, out):
    n_rays = dx.size
    for i in range(n_rays):
        best = max_range
        dxi, dyi = dx[i], dy[i]
        for k in range(circles.shape[0]):
            fx = ox - circles[k, 0]
            fy = oy - circles[k, 1]
            b = dxi * fx + dyi * fy
            c = fx * fx + fy * fy - circles[k, 2] * circles[k, 2]
            disc = b * b - c
            if disc >= 0.0:
                root = math.sqrt(disc)
                t = -b - root
                if t <= 0.0:
                    t = -b + root
                if 0.0 < t < best:
                    best = t
        for w in range(rects.shape[0]):
            x0, y0, x1, y1 = rects[w, 0], rects[w, 1], rects[w, 2], rects[w, 3]
            t_lo = -math.inf
            t_hi = math.inf
            ok = True
            if dxi != 0.0:
                t1 = (x0 - ox) / dxi
                t2 = (x1 - ox) / dxi
                if t1 > t2:
                    t1, t2 = t2, t1
                t_lo = t1
                t_hi = t2
            elif ox < x0 or ox > x1:
                ok = False
            if ok and dyi != 0.0:
                t1 = (y0 - oy) / dyi
                t2 = (y1 - oy) / dyi
                if t1 > t2:
                    t1, t2 = t2, t1
                if t1 > t_lo:
                    t_lo = t1
                if t2 < t_hi:
                    t_hi = t2
            elif ok and (oy < y0 or oy > y1):
                ok = False
            if ok and t_hi >= t_lo and 0.0 < t_lo < best:
                best = t_lo
        out[i] = best


def lidar_scan(arena: Arena, head_pose, n_rays: int = N_RAYS,
               max_range: float = MAX_RANGE) -> np.ndarray:
    """Ranges for rays at head_theta + k degrees, k = 0..n_rays-1."""
    hx, hy, theta = float(head_pose[0]), float(head_pose[1]), float(head_pose[2])
    angles = theta + np.arange(n_rays) * (2.0 * np.pi / n_rays)
    circles = np.vstack([arena.obstacles,
                         np.asarray(arena.beacon, dtype=np.float64)[None, :]])
    out = np.empty(n_rays)
    _scan_kernel(hx, hy, np.cos(angles), np.sin(angles), circles,
                 arena.walls, max_range, out)
    return out


def downsample(scan: np.ndarray, max_range: float = MAX_RANGE) -> np.ndarray:
    """Every third ray, normalised by the range cap into [0, 1]."""
    return np.asarray(scan, dtype=np.float64)[::DOWNSAMPLE_STRIDE] / max_range
