"""Pure-Python implementations of the hot kernels.

This module mirrors ``_ckernels.pyx`` operation for operation, so both
backends produce bit-identical doubles on the same platform.  Keep the
two files in sync.

Box layout everywhere: ``(cx, cy, w, h, theta)``.  Matching ``k`` pairs
edge ``i`` of the prediction with edge ``(i + k) % 4`` of the target,
which re-expresses the prediction as ``(w', h', theta - k*pi/2)`` with
``w'``/``h'`` swapped for odd ``k``.
"""
from math import cos, sin

MAX_POLY = 64


def _cos_shift(d, k):
    # cos(d - k*pi/2) and its derivative in d, without rounding pi/2
    if k == 0:
        return cos(d), -sin(d)
    if k == 1:
        return sin(d), cos(d)
    if k == 2:
        return -cos(d), sin(d)
    return -sin(d), -cos(d)


def edwd_branches(p, t, a_w, a_h, s_o, s_w, s_h):
    """Squared distance for each of the four cyclic matchings."""
    px, py, pw, ph, pt = p
    tx, ty, tw, th, tt = t
    dx = px - tx
    dy = py - ty
    center = 4.0 * (dx * dx + dy * dy) / (s_o * s_o)
    d = pt - tt
    out = []
    for k in range(4):
        c, _ = _cos_shift(d, k)
        if k % 2 == 0:
            wq = pw
            hq = ph
        else:
            wq = ph
            hq = pw
        dw = (wq - tw) * (wq - tw) + 2.0 * wq * tw * (1.0 - c)
        dh = (hq - th) * (hq - th) + 2.0 * hq * th * (1.0 - c)
        out.append(center + a_w * dw / (s_w * s_w) + a_h * dh / (s_h * s_h))
    return tuple(out)


def edwd_value_grad(p, t, a_w, a_h, s_o, s_w, s_h):
    """Value, active matching and gradient w.r.t. the raw prediction.

    Ties resolve to the smallest ``k``.
    """
    br = edwd_branches(p, t, a_w, a_h, s_o, s_w, s_h)
    k = 0
    best = br[0]
    for j in range(1, 4):
        if br[j] < best:
            best = br[j]
            k = j
    px, py, pw, ph, pt = p
    tx, ty, tw, th, tt = t
    c, dc = _cos_shift(pt - tt, k)
    if k % 2 == 0:
        wq = pw
        hq = ph
    else:
        wq = ph
        hq = pw
    so2 = s_o * s_o
    sw2 = s_w * s_w
    sh2 = s_h * s_h
    g_x = 8.0 * (px - tx) / so2
    g_y = 8.0 * (py - ty) / so2
    g_wq = a_w * 2.0 * (wq - tw * c) / sw2
    g_hq = a_h * 2.0 * (hq - th * c) / sh2
    dcos = -2.0 * (a_w * wq * tw / sw2 + a_h * hq * th / sh2)
    g_t = dcos * dc
    if k % 2 == 0:
        g_w = g_wq
        g_h = g_hq
    else:
        g_w = g_hq
        g_h = g_wq
    return best, k, (g_x, g_y, g_w, g_h, g_t), dcos


def edwd_batch(P, T, C, W, K, G):
    """Row-wise ``edwd_value_grad``; ``C`` rows hold (a_w, a_h, s_o, s_w, s_h).

    Results are written into the preallocated ``W``, ``K`` and ``G``.
    """
    n = P.shape[0]
    Pl = P.tolist()
    Tl = T.tolist()
    Cl = C.tolist()
    for i in range(n):
        a_w, a_h, s_o, s_w, s_h = Cl[i]
        val, k, g, _ = edwd_value_grad(Pl[i], Tl[i], a_w, a_h, s_o, s_w, s_h)
        W[i] = val
        K[i] = k
        G[i, 0] = g[0]
        G[i, 1] = g[1]
        G[i, 2] = g[2]
        G[i, 3] = g[3]
        G[i, 4] = g[4]


def signed_area(xs, ys):
    n = len(xs)
    acc = 0.0
    for i in range(n):
        j = (i + 1) % n
        acc += xs[i] * ys[j] - xs[j] * ys[i]
    return 0.5 * acc


def convex_overlap_area(a, b):
    """Area of the intersection of two convex polygons (Sutherland-Hodgman).

    ``a`` and ``b`` are ``(n, 2)`` arrays in either orientation.  Degenerate
    inputs give 0.
    """
    ax = [float(v) for v in a[:, 0]]
    ay = [float(v) for v in a[:, 1]]
    bx = [float(v) for v in b[:, 0]]
    by = [float(v) for v in b[:, 1]]
    if len(ax) + len(bx) > MAX_POLY:
        raise ValueError("polygons too large for the clipping kernel")
    sa = signed_area(ax, ay)
    sb = signed_area(bx, by)
    if sa == 0.0 or sb == 0.0:
        return 0.0
    if sa < 0.0:
        ax.reverse()
        ay.reverse()
    if sb < 0.0:
        bx.reverse()
        by.reverse()
    # positive signed area: interior lies where cross(edge, p - start) >= 0
    ox = ax
    oy = ay
    nb = len(bx)
    for j in range(nb):
        if len(ox) == 0:
            return 0.0
        x1 = bx[j]
        y1 = by[j]
        x2 = bx[(j + 1) % nb]
        y2 = by[(j + 1) % nb]
        ex = x2 - x1
        ey = y2 - y1
        ix = ox
        iy = oy
        ox = []
        oy = []
        m = len(ix)
        sx = ix[m - 1]
        sy = iy[m - 1]
        s_in = ex * (sy - y1) - ey * (sx - x1)
        for i in range(m):
            qx = ix[i]
            qy = iy[i]
            q_in = ex * (qy - y1) - ey * (qx - x1)
            if q_in >= 0.0:
                if s_in < 0.0:
                    r = s_in / (s_in - q_in)
                    ox.append(sx + r * (qx - sx))
                    oy.append(sy + r * (qy - sy))
                ox.append(qx)
                oy.append(qy)
            elif s_in >= 0.0:
                r = s_in / (s_in - q_in)
                ox.append(sx + r * (qx - sx))
                oy.append(sy + r * (qy - sy))
            sx = qx
            sy = qy
            s_in = q_in
    if len(ox) < 3:
        return 0.0
    area = signed_area(ox, oy)
    return area if area > 0.0 else 0.0
