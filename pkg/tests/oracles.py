"""Slow, independent reference implementations used as test oracles.

Nothing here imports the code under test's geometry or numerics.
"""

from __future__ import annotations

import math
from fractions import Fraction as F
from functools import lru_cache

import numpy as np

# --- Otsu: exhaustive scan -------------------------------------------------


def otsu_scan(values):
    """All thresholds t in 1..255 maximising between-class variance of {v < t} vs {v >= t}."""
    values = [int(v) for v in np.ravel(values)]
    n = len(values)
    best, arg = -1.0, []
    for t in range(1, 256):
        lo = [v for v in values if v < t]
        hi = [v for v in values if v >= t]
        if not lo or not hi:
            var = 0.0
        else:
            m0, m1 = sum(lo) / len(lo), sum(hi) / len(hi)
            var = len(lo) / n * len(hi) / n * (m0 - m1) ** 2
        if var > best + 1e-9:
            best, arg = var, [t]
        elif abs(var - best) <= 1e-9:
            arg.append(t)
    return arg


# --- bilinear: direct formula ----------------------------------------------


def bilinear_at(img, u, v):
    """Bilinear value of ``img`` (rows x cols) at continuous column u, row v."""
    rows, cols = len(img), len(img[0])
    x0, y0 = min(int(math.floor(u)), cols - 1), min(int(math.floor(v)), rows - 1)
    x1, y1 = min(x0 + 1, cols - 1), min(y0 + 1, rows - 1)
    a, b = u - x0, v - y0
    return (
        img[y0][x0] * (1 - a) * (1 - b)
        + img[y0][x1] * a * (1 - b)
        + img[y1][x0] * (1 - a) * b
        + img[y1][x1] * a * b
    )


# --- features: exact rational geometry -------------------------------------

WINDOWS = [(0, 0, 32), (4, 4, 24), (8, 8, 16)]


def triangles(x0, y0, s):
    x0, y0, s = F(x0), F(y0), F(s)
    c = (x0 + s / 2, y0 + s / 2)
    tl, tr, br, bl = (x0, y0), (x0 + s, y0), (x0 + s, y0 + s), (x0, y0 + s)
    mid = lambda p, q: ((p[0] + q[0]) / 2, (p[1] + q[1]) / 2)  # noqa: E731
    ring = [tl, mid(tl, tr), tr, mid(tr, br), br, mid(br, bl), bl, mid(bl, tl)]
    return c, [(c, ring[i], ring[(i + 1) % 8]) for i in range(8)]


def barycentric_inside(p, tri):
    (x1, y1), (x2, y2), (x3, y3) = tri
    den = (y2 - y3) * (x1 - x3) + (x3 - x2) * (y1 - y3)
    l1 = ((y2 - y3) * (p[0] - x3) + (x3 - x2) * (p[1] - y3)) / den
    l2 = ((y3 - y1) * (p[0] - x3) + (x1 - x3) * (p[1] - y3)) / den
    l3 = 1 - l1 - l2
    return l1 >= 0 and l2 >= 0 and l3 >= 0


def on_segment(p, a, b):
    cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
    if cross != 0:
        return False
    return min(a[0], b[0]) <= p[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])


def partition_octant(p, c, tris):
    """Partition rule: interior point -> its triangle; on radial edge C-P[k] -> octant k."""
    hits = [k for k, t in enumerate(tris) if barycentric_inside(p, t)]
    if not hits:
        return -1
    if len(hits) == 1:
        return hits[0]
    if p == c:
        return 0
    for k in hits:
        if on_segment(p, c, tris[k][1]):
            return k
    raise AssertionError(f"ambiguous point {p}")


def n_bins(a, b):
    l2 = (b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2
    n = 1
    while n * n < l2:
        n += 1
    return n


@lru_cache(maxsize=None)
def _window_geometry(x0, y0, s):
    c, tris = triangles(x0, y0, s)
    members = {k: [] for k in range(8)}      # closed membership (shadows)
    partition = {}
    for y in range(y0, y0 + s):
        for x in range(x0, x0 + s):
            p = (F(2 * x + 1, 2), F(2 * y + 1, 2))
            for k, t in enumerate(tris):
                if barycentric_inside(p, t):
                    members[k].append((x, y))
            partition[(x, y)] = partition_octant(p, c, tris)
    sides = []
    proj = {}
    for k, (cc, a, b) in enumerate(tris):
        for s_idx, (u, v) in enumerate([(a, b), (cc, a), (cc, b)]):
            n = n_bins(u, v)
            sides.append(n)
            l2 = (v[0] - u[0]) ** 2 + (v[1] - u[1]) ** 2
            for (x, y) in members[k]:
                p = (F(2 * x + 1, 2), F(2 * y + 1, 2))
                t = ((p[0] - u[0]) * (v[0] - u[0]) + (p[1] - u[1]) * (v[1] - u[1])) / l2
                proj[(k, s_idx, x, y)] = min(max(math.floor(t * n), 0), n - 1)
    return tris, members, partition, sides, proj


def brute_shadows(bits):
    out = []
    for x0, y0, s in WINDOWS:
        tris, members, _, sides, proj = _window_geometry(x0, y0, s)
        for k in range(8):
            for s_idx in range(3):
                n = sides[3 * k + s_idx]
                lit = {proj[(k, s_idx, x, y)] for (x, y) in members[k] if bits[y][x]}
                out.append(len(lit) / n)
    return out


def brute_centroids(bits):
    tris, _, partition, _, _ = _window_geometry(0, 0, 32)
    out = []
    for k in range(8):
        pts = [(x, y) for (x, y), o in partition.items() if o == k and bits[y][x]]
        if pts:
            sx = sum(F(2 * x + 1, 2) for x, _ in pts)
            sy = sum(F(2 * y + 1, 2) for _, y in pts)
            out += [float(sx / len(pts) / 32), float(sy / len(pts) / 32)]
        else:
            gx = sum(v[0] for v in tris[k]) / 3
            gy = sum(v[1] for v in tris[k]) / 3
            out += [float(gx / 32), float(gy / 32)]
    return out


def brute_features(bits):
    bits = np.asarray(bits).tolist()
    return np.array(brute_shadows(bits) + brute_centroids(bits))


def brute_partition_map(x0, y0, s):
    _, _, partition, _, _ = _window_geometry(x0, y0, s)
    out = np.full((32, 32), -1)
    for (x, y), k in partition.items():
        out[y, x] = k
    return out


# --- MLP: finite differences in extended precision --------------------------


def objective_ld(W1, W2, x, target):
    """0.5 * sum (t - out)^2 evaluated in long double."""
    ld = np.longdouble
    x1 = np.append(np.asarray(x, dtype=ld), ld(1))
    h = 1 / (1 + np.exp(-(W1.astype(ld) @ x1)))
    o = 1 / (1 + np.exp(-(W2.astype(ld) @ np.append(h, ld(1)))))
    d = np.asarray(target, dtype=ld) - o
    return ld(0.5) * np.sum(d * d)


def central_differences(W1, W2, x, target, h=1e-5):
    g1 = np.zeros(W1.shape)
    g2 = np.zeros(W2.shape)
    for W, G in ((W1, g1), (W2, g2)):
        for idx in np.ndindex(W.shape):
            keep = W[idx]
            W[idx] = keep + h
            w_up, up = W[idx], objective_ld(W1, W2, x, target)
            W[idx] = keep - h
            w_down, down = W[idx], objective_ld(W1, W2, x, target)
            W[idx] = keep
            # divide by the perturbation actually stored, not the nominal 2h
            G[idx] = float((up - down) / (np.longdouble(w_up) - np.longdouble(w_down)))
    return g1, g2


def gradient_mismatch(analytic, numeric, rel=1e-4, floor=1e-8):
    """Indices where relative error exceeds ``rel`` (absolute below ``floor``)."""
    a, n = np.ravel(analytic), np.ravel(numeric)
    scale = np.maximum(np.abs(a), np.abs(n))
    err = np.abs(a - n)
    bad = np.where(scale < floor, err > floor, err > rel * scale)
    return np.flatnonzero(bad), float(np.max(np.where(scale < floor, 0, err / np.maximum(scale, floor))))


def central_differences_fast(W1, W2, x, target, h=1e-5):
    """Same quantity as ``central_differences``, all perturbations evaluated at once in long double.

    Perturbing W1[j, i] only moves hidden unit j; perturbing W2[k, j] only moves output k.
    """
    ld = np.longdouble
    sig = lambda t: 1 / (1 + np.exp(-t))
    x1 = np.append(np.asarray(x, dtype=ld), ld(1))
    t = np.asarray(target, dtype=ld)
    A1, A2 = W1.astype(ld), W2.astype(ld)
    a = A1 @ x1
    hid = sig(a)
    h1 = np.append(hid, ld(1))
    z = A2 @ h1

    def objective_w1(step):
        # stored perturbation per weight, then the shifted hidden unit and outputs
        dw = (W1 + step).astype(ld) - A1                        # (H, I+1)
        hj = sig(a[:, None] + dw * x1[None, :])                 # (H, I+1)
        dz = A2[:, :-1].T[:, None, :] * (hj - hid[:, None])[..., None]   # (H, I+1, K)
        o = sig(z[None, None, :] + dz)
        return ld(0.5) * ((t - o) ** 2).sum(axis=-1), dw

    def objective_w2(step):
        dw = (W2 + step).astype(ld) - A2                        # (K, H+1)
        zk = z[:, None] + dw * h1[None, :]
        o = sig(z)
        base = (t - o) ** 2
        rest = base.sum() - base                                # error of the untouched outputs
        return ld(0.5) * (rest[:, None] + (t[:, None] - sig(zk)) ** 2), dw

    up1, du1 = objective_w1(h)
    dn1, dd1 = objective_w1(-h)
    up2, du2 = objective_w2(h)
    dn2, dd2 = objective_w2(-h)
    return ((up1 - dn1) / (du1 - dd1)).astype(float), ((up2 - dn2) / (du2 - dd2)).astype(float)
