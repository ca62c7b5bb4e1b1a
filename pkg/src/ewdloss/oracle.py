"""Brute-force evaluators used to check the closed forms.

Nothing here calls the closed-form distance code in :mod:`ewdloss.ewd` or
:func:`ewdloss.gaussian.w2_gaussian`; each routine takes an independent path
(eigendecomposition, quadrature, linear programming, sampling).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog

from .gaussian import Gauss2, edge_gaussian
from .geom import DirectedEdge, OBox5, as_polygon, to_edges

NOISE = 64 * np.finfo(float).eps
MAX_LP_ATOMS = 64
MAX_ASSIGN_ATOMS = 4096


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(w) != len(pts):
            raise ValueError("one weight per point is required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be non-negative and sum to 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, points) -> "PointCloud":
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return cls(pts, np.full(len(pts), 1.0 / len(pts)))

    def __len__(self):
        return len(self.points)


def _floored_sqrt(m: np.ndarray, floor: np.ndarray):
    """Batched PSD square root; eigenvalues at or below ``floor`` become 0."""
    lam, vec = np.linalg.eigh(0.5 * (m + np.swapaxes(m, -1, -2)))
    scale = np.maximum(1.0, np.abs(lam[..., -1]))
    if np.any(lam[..., 0] < -1e-9 * scale):
        raise ValueError("matrix is not positive semi-definite")
    lam = np.where(lam <= floor[..., None], 0.0, lam)
    root = (vec * np.sqrt(lam)[..., None, :]) @ np.swapaxes(vec, -1, -2)
    return root, lam


def w2_gaussian_numeric_batch(mu1, s1, mu2, s2) -> np.ndarray:
    """Squared W2 for stacks of Gaussians (``mu``: (..., 2), ``s``: (..., 2, 2)).

    Eigenvalues within rounding noise of zero are dropped before square
    roots are taken, so stored rank-one covariances stay rank one.
    """
    s1 = np.asarray(s1, float)
    s2 = np.asarray(s2, float)
    tr1 = np.trace(s1, axis1=-2, axis2=-1)
    tr2 = np.trace(s2, axis1=-2, axis2=-1)
    lam1 = np.linalg.eigvalsh(s1)
    root1, _ = _floored_sqrt(s1, NOISE * np.maximum(lam1[..., -1], 0.0))
    inner = root1 @ s2 @ root1
    _, lam_c = _floored_sqrt(inner, NOISE * tr1 * tr2)
    cross = np.sum(np.sqrt(lam_c), axis=-1)
    dmu = np.asarray(mu1, float) - np.asarray(mu2, float)
    return np.maximum(np.sum(dmu * dmu, axis=-1) + tr1 + tr2 - 2.0 * cross, 0.0)


def w2_gaussian_numeric(g1: Gauss2, g2: Gauss2) -> float:
    """Squared W2 via symmetric eigendecompositions."""
    return float(w2_gaussian_numeric_batch(g1.mu, g1.sigma, g2.mu, g2.sigma))


def uniform_density(x):
    return np.full_like(np.asarray(x, dtype=float), 0.5)


def _quadrature(n: int, rule: str):
    if n < 3:
        raise ValueError("need at least 3 quadrature points")
    x = np.linspace(-1.0, 1.0, n)
    h = 2.0 / (n - 1)
    if rule == "trapezoid":
        wts = np.full(n, h)
        wts[[0, -1]] = 0.5 * h
    elif rule == "simpson":
        if n % 2 == 0:
            raise ValueError("Simpson's rule needs an odd number of points")
        wts = np.full(n, 2.0)
        wts[1:-1:2] = 4.0
        wts[[0, -1]] = 1.0
        wts *= h / 3.0
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}")
    return x, wts


def density_variance(density: Callable, n: int = 2001) -> float:
    x, wts = _quadrature(n, "simpson")
    return float(np.sum(wts * density(x) * x * x))


def check_symmetric_density(density: Callable, tol: float = 1e-12) -> None:
    x = np.linspace(0.0, 1.0, 257)
    px, pm = np.asarray(density(x), float), np.asarray(density(-x), float)
    if np.max(np.abs(px - pm)) > tol * max(1.0, float(np.max(np.abs(px)))):
        raise ValueError("edge density must be symmetric about the edge centre")


def edwd_edge_integral(e1: DirectedEdge, e2: DirectedEdge, density: Callable = uniform_density,
                       n: int = 3, rule: str = "simpson") -> float:
    """Quadrature of ``int p(x) |dc + x dv / 2|^2 dx`` over ``x`` in [-1, 1].

    Points at the same normalised position on the two edges are coupled.
    """
    check_symmetric_density(density)
    dc = e1.center - e2.center
    dv = e1.vector - e2.vector
    x, wts = _quadrature(n, rule)
    diff = dc[None, :] + 0.5 * x[:, None] * dv[None, :]
    return float(np.sum(wts * np.asarray(density(x), float) * np.sum(diff * diff, axis=1)))


def edge_point_cloud(e: DirectedEdge, n_atoms: int = 16) -> PointCloud:
    """Uniform midpoint sampling of an edge."""
    x = -1.0 + (2.0 * np.arange(n_atoms) + 1.0) / n_atoms
    return PointCloud.uniform(e.center[None, :] + 0.5 * x[:, None] * e.vector[None, :])


def coupled_cloud_cost(p: PointCloud, q: PointCloud) -> float:
    """Cost of the index-aligned coupling (atom ``i`` to atom ``i``)."""
    if len(p) != len(q):
        raise ValueError("aligned coupling needs equal cardinality")
    d = p.points - q.points
    return float(np.sum(p.weights * np.sum(d * d, axis=1)))


def discrete_ot(p: PointCloud, q: PointCloud) -> float:
    """Exact squared-Euclidean optimal transport cost."""
    cost = np.sum((p.points[:, None, :] - q.points[None, :, :]) ** 2, axis=2)
    n, m = len(p), len(q)
    uniform = (n == m and np.allclose(p.weights, 1.0 / n, rtol=0, atol=1e-15)
               and np.allclose(q.weights, 1.0 / m, rtol=0, atol=1e-15))
    if uniform:
        if n > MAX_ASSIGN_ATOMS:
            raise ValueError(f"assignment oracle limited to {MAX_ASSIGN_ATOMS} atoms; subsample")
        rows, cols = linear_sum_assignment(cost)
        return float(cost[rows, cols].sum() / n)
    if n > MAX_LP_ATOMS or m > MAX_LP_ATOMS:
        raise ValueError(f"transport LP limited to {MAX_LP_ATOMS} atoms per cloud; use smaller clouds")
    a_eq = np.zeros((n + m, n * m))
    for i in range(n):
        a_eq[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        a_eq[n + j, j::m] = 1.0
    b_eq = np.concatenate([p.weights, q.weights])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)


def _edge_gaussian_stack(boxes: np.ndarray):
    """Edge means (n, 4, 2) and rank-one covariances (n, 4, 2, 2) from corners."""
    cx, cy, w, h, t = (boxes[:, i] for i in range(5))
    c, s = np.cos(t), np.sin(t)
    ux, uy = 0.5 * w * c, 0.5 * w * s
    vx, vy = -0.5 * h * s, 0.5 * h * c
    corners = np.stack([
        np.stack([cx - ux - vx, cy - uy - vy], -1),
        np.stack([cx + ux - vx, cy + uy - vy], -1),
        np.stack([cx + ux + vx, cy + uy + vy], -1),
        np.stack([cx - ux + vx, cy - uy + vy], -1),
    ], axis=1)
    nxt = np.roll(corners, -1, axis=1)
    vec = nxt - corners
    mu = 0.5 * (corners + nxt)
    sigma = 0.25 * vec[..., :, None] * vec[..., None, :]
    return mu, sigma


def egwd_matching_oracle_batch(a: np.ndarray, b: np.ndarray):
    """Row-wise :func:`egwd_matching_oracle` for ``(n, 5)`` box arrays."""
    a = np.atleast_2d(np.asarray(a, float))
    b = np.atleast_2d(np.asarray(b, float))
    mu_a, s_a = _edge_gaussian_stack(a)
    mu_b, s_b = _edge_gaussian_stack(b)
    totals = np.empty((len(a), 4))
    for k in range(4):
        idx = (np.arange(4) + k) % 4
        totals[:, k] = w2_gaussian_numeric_batch(mu_a, s_a, mu_b[:, idx], s_b[:, idx]).sum(axis=1)
    k = np.argmin(totals, axis=1)
    return totals[np.arange(len(a)), k], k


def egwd_matching_oracle(a: OBox5, b: OBox5):
    """Enumerate the four cyclic matchings of edge Gaussians; ``(min, argmin k)``.

    Edge ``i`` of ``a`` is paired with edge ``(i + k) % 4`` of ``b``.
    """
    ga = [edge_gaussian(e) for e in to_edges(a).edges]
    gb = [edge_gaussian(e) for e in to_edges(b).edges]
    # all 16 pairings in one batched eigendecomposition
    idx = [(i, (i + k) % 4) for k in range(4) for i in range(4)]
    d = w2_gaussian_numeric_batch(np.array([ga[i].mu for i, _ in idx]),
                                  np.array([ga[i].sigma for i, _ in idx]),
                                  np.array([gb[j].mu for _, j in idx]),
                                  np.array([gb[j].sigma for _, j in idx]))
    totals = d.reshape(4, 4).sum(axis=1)
    best_k = min(range(4), key=lambda k: (totals[k], k))
    return float(totals[best_k]), best_k


def _inside_convex(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    area2 = np.sum(poly[:, 0] * np.roll(poly[:, 1], -1) - np.roll(poly[:, 0], -1) * poly[:, 1])
    sign = 1.0 if area2 >= 0 else -1.0
    inside = np.ones(len(pts), bool)
    for i in range(len(poly)):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % len(poly)]
        cross = (x2 - x1) * (pts[:, 1] - y1) - (y2 - y1) * (pts[:, 0] - x1)
        inside &= sign * cross >= 0
    return inside


def iou_monte_carlo(a, b, n: int = 1_000_000, seed: int = 0) -> float:
    """IoU estimated by uniform sampling over the joint bounding box."""
    pa, pb = as_polygon(a), as_polygon(b)
    allp = np.vstack([pa, pb])
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    rng = np.random.default_rng(seed)
    pts = lo + (hi - lo) * rng.random((n, 2))
    ia, ib = _inside_convex(pts, pa), _inside_convex(pts, pb)
    union = np.count_nonzero(ia | ib)
    return np.count_nonzero(ia & ib) / union if union else 0.0
