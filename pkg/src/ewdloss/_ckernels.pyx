# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``.

Arithmetic is written in the same order as the Python fallback so the two
backends agree bit for bit (compiled with ``-ffp-contract=off``).
"""
from libc.math cimport cos, sin

cdef enum:
    MAX_POLY = 64
    BUF = 256


cdef inline void _cos_shift(double d, int k, double* c, double* dc) noexcept nogil:
    if k == 0:
        c[0] = cos(d)
        dc[0] = -sin(d)
    elif k == 1:
        c[0] = sin(d)
        dc[0] = cos(d)
    elif k == 2:
        c[0] = -cos(d)
        dc[0] = sin(d)
    else:
        c[0] = -sin(d)
        dc[0] = -cos(d)


cdef void _branches(double px, double py, double pw, double ph, double pt,
                    double tx, double ty, double tw, double th, double tt,
                    double a_w, double a_h, double s_o, double s_w, double s_h,
                    double* out) noexcept nogil:
    cdef double dx = px - tx
    cdef double dy = py - ty
    cdef double center = 4.0 * (dx * dx + dy * dy) / (s_o * s_o)
    cdef double d = pt - tt
    cdef double c, dc, wq, hq, dw, dh
    cdef int k
    for k in range(4):
        _cos_shift(d, k, &c, &dc)
        if k % 2 == 0:
            wq = pw
            hq = ph
        else:
            wq = ph
            hq = pw
        dw = (wq - tw) * (wq - tw) + 2.0 * wq * tw * (1.0 - c)
        dh = (hq - th) * (hq - th) + 2.0 * hq * th * (1.0 - c)
        out[k] = center + a_w * dw / (s_w * s_w) + a_h * dh / (s_h * s_h)


cdef int _value_grad(double px, double py, double pw, double ph, double pt,
                     double tx, double ty, double tw, double th, double tt,
                     double a_w, double a_h, double s_o, double s_w, double s_h,
                     double* val, double* g, double* dcos) noexcept nogil:
    cdef double br[4]
    cdef int k = 0
    cdef int j
    cdef double best, c, dc, wq, hq, so2, sw2, sh2, g_wq, g_hq
    _branches(px, py, pw, ph, pt, tx, ty, tw, th, tt, a_w, a_h, s_o, s_w, s_h, br)
    best = br[0]
    for j in range(1, 4):
        if br[j] < best:
            best = br[j]
            k = j
    _cos_shift(pt - tt, k, &c, &dc)
    if k % 2 == 0:
        wq = pw
        hq = ph
    else:
        wq = ph
        hq = pw
    so2 = s_o * s_o
    sw2 = s_w * s_w
    sh2 = s_h * s_h
    g[0] = 8.0 * (px - tx) / so2
    g[1] = 8.0 * (py - ty) / so2
    g_wq = a_w * 2.0 * (wq - tw * c) / sw2
    g_hq = a_h * 2.0 * (hq - th * c) / sh2
    dcos[0] = -2.0 * (a_w * wq * tw / sw2 + a_h * hq * th / sh2)
    g[4] = dcos[0] * dc
    if k % 2 == 0:
        g[2] = g_wq
        g[3] = g_hq
    else:
        g[2] = g_hq
        g[3] = g_wq
    val[0] = best
    return k


def edwd_branches(p, t, double a_w, double a_h, double s_o, double s_w, double s_h):
    """Squared distance for each of the four cyclic matchings."""
    cdef double out[4]
    _branches(p[0], p[1], p[2], p[3], p[4], t[0], t[1], t[2], t[3], t[4],
              a_w, a_h, s_o, s_w, s_h, out)
    return (out[0], out[1], out[2], out[3])


def edwd_value_grad(p, t, double a_w, double a_h, double s_o, double s_w, double s_h):
    """Value, active matching and gradient w.r.t. the raw prediction."""
    cdef double val, dcos
    cdef double g[5]
    cdef int k = _value_grad(p[0], p[1], p[2], p[3], p[4], t[0], t[1], t[2], t[3], t[4],
                             a_w, a_h, s_o, s_w, s_h, &val, g, &dcos)
    return val, k, (g[0], g[1], g[2], g[3], g[4]), dcos


def edwd_batch(double[:, ::1] P, double[:, ::1] T, double[:, ::1] C,
               double[::1] W, long[::1] K, double[:, ::1] G):
    """Row-wise ``edwd_value_grad``; ``C`` rows hold (a_w, a_h, s_o, s_w, s_h)."""
    cdef Py_ssize_t i, n = P.shape[0]
    cdef double val, dcos
    cdef double g[5]
    cdef int k
    with nogil:
        for i in range(n):
            k = _value_grad(P[i, 0], P[i, 1], P[i, 2], P[i, 3], P[i, 4],
                            T[i, 0], T[i, 1], T[i, 2], T[i, 3], T[i, 4],
                            C[i, 0], C[i, 1], C[i, 2], C[i, 3], C[i, 4],
                            &val, g, &dcos)
            W[i] = val
            K[i] = k
            G[i, 0] = g[0]
            G[i, 1] = g[1]
            G[i, 2] = g[2]
            G[i, 3] = g[3]
            G[i, 4] = g[4]


cdef double _signed_area(double* xs, double* ys, int n) noexcept nogil:
    cdef double acc = 0.0
    cdef int i, j
    for i in range(n):
        j = (i + 1) % n
        acc += xs[i] * ys[j] - xs[j] * ys[i]
    return 0.5 * acc


def signed_area(xs, ys):
    cdef double bx[MAX_POLY]
    cdef double by[MAX_POLY]
    cdef int i, n = len(xs)
    if n > MAX_POLY:
        raise ValueError("polygon too large for the kernel")
    for i in range(n):
        bx[i] = xs[i]
        by[i] = ys[i]
    return _signed_area(bx, by, n)


def convex_overlap_area(double[:, ::1] a, double[:, ::1] b):
    """Area of the intersection of two convex polygons (Sutherland-Hodgman)."""
    cdef double ax[BUF]
    cdef double ay[BUF]
    cdef double bx[MAX_POLY]
    cdef double by[MAX_POLY]
    cdef double ix[BUF]
    cdef double iy[BUF]
    cdef int na = a.shape[0]
    cdef int nb = b.shape[0]
    cdef int i, j, m, no
    cdef double sa, sb, x1, y1, x2, y2, ex, ey, sx, sy, s_in, qx, qy, q_in, r, area
    if na + nb > MAX_POLY:
        raise ValueError("polygons too large for the clipping kernel")
    for i in range(na):
        ax[i] = a[i, 0]
        ay[i] = a[i, 1]
    for i in range(nb):
        bx[i] = b[i, 0]
        by[i] = b[i, 1]
    sa = _signed_area(ax, ay, na)
    sb = _signed_area(bx, by, nb)
    if sa == 0.0 or sb == 0.0:
        return 0.0
    if sa < 0.0:
        for i in range(na // 2):
            ax[i], ax[na - 1 - i] = ax[na - 1 - i], ax[i]
            ay[i], ay[na - 1 - i] = ay[na - 1 - i], ay[i]
    if sb < 0.0:
        for i in range(nb // 2):
            bx[i], bx[nb - 1 - i] = bx[nb - 1 - i], bx[i]
            by[i], by[nb - 1 - i] = by[nb - 1 - i], by[i]
    # ax/ay double as the output buffer; ix/iy hold the current input
    no = na
    for j in range(nb):
        if no == 0:
            return 0.0
        x1 = bx[j]
        y1 = by[j]
        x2 = bx[(j + 1) % nb]
        y2 = by[(j + 1) % nb]
        ex = x2 - x1
        ey = y2 - y1
        for i in range(no):
            ix[i] = ax[i]
            iy[i] = ay[i]
        m = no
        if m > BUF // 2:
            raise ValueError("clipping produced too many vertices")
        no = 0
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
                    ax[no] = sx + r * (qx - sx)
                    ay[no] = sy + r * (qy - sy)
                    no += 1
                ax[no] = qx
                ay[no] = qy
                no += 1
            elif s_in >= 0.0:
                r = s_in / (s_in - q_in)
                ax[no] = sx + r * (qx - sx)
                ay[no] = sy + r * (qy - sy)
                no += 1
            sx = qx
            sy = qy
            s_in = q_in
    if no < 3:
        return 0.0
    area = _signed_area(ax, ay, no)
    return area if area > 0.0 else 0.0
