"""2-D Gaussian algebra with exact 2x2 matrix functions.

Edge Gaussians are rank one, so every routine here accepts singular
covariances.  Determinants and traces that sit at the rounding-noise floor
(``NOISE * scale**2``) are snapped to zero; without that, a rank-one matrix
stored in floating point has a spurious eigenvalue of order ``eps * tr``
whose square root (``~1e-8 * sqrt(tr)``) pollutes every distance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geom import DirectedEdge, OBox5

NOISE = 64 * np.finfo(float).eps
SYM_TOL = 1e-12
NEG_TOL = 1e-12


class InvalidCovarianceError(ValueError):
    """Covariance is not symmetric positive semi-definite."""


class DegenerateDistributionError(ValueError):
    """A divergence needs a full-rank covariance and did not get one."""


def _check_psd(m: np.ndarray, neg_tol: float = NEG_TOL) -> None:
    scale = max(1.0, float(np.max(np.abs(m))))
    if abs(m[0, 1] - m[1, 0]) > SYM_TOL * scale:
        raise InvalidCovarianceError(f"covariance is not symmetric: {m.tolist()}")
    tr = m[0, 0] + m[1, 1]
    half_gap = math.hypot(0.5 * (m[0, 0] - m[1, 1]), m[0, 1])
    if 0.5 * tr - half_gap < -neg_tol * scale:
        raise InvalidCovarianceError(f"covariance has a negative eigenvalue: {m.tolist()}")


@dataclass(frozen=True, eq=False)
class Gauss2:
    """Mean and (possibly singular) covariance of a planar Gaussian."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).reshape(2)
        sigma = np.array(self.sigma, dtype=float).reshape(2, 2)
        _check_psd(sigma)
        sigma = 0.5 * (sigma + sigma.T)
        mu.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    def __eq__(self, other):
        if not isinstance(other, Gauss2):
            return NotImplemented
        return np.array_equal(self.mu, other.mu) and np.array_equal(self.sigma, other.sigma)

    def __hash__(self):
        return hash((self.mu.tobytes(), self.sigma.tobytes()))


def _det(m) -> float:
    """Determinant snapped to 0 inside the rounding noise of ``tr**2``."""
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    tr = m[0, 0] + m[1, 1]
    if det <= NOISE * tr * tr:
        return 0.0
    return float(det)


def sqrtm_2x2(m) -> np.ndarray:
    """Principal square root of a symmetric PSD 2x2 matrix.

    Uses ``sqrt(M) = (M + sqrt(det M) I) / sqrt(tr M + 2 sqrt(det M))``.
    """
    m = np.asarray(m, dtype=float)
    _check_psd(m, neg_tol=1e-9)
    s = math.sqrt(_det(m))
    t2 = m[0, 0] + m[1, 1] + 2.0 * s
    if t2 <= 0.0:
        return np.zeros((2, 2))
    out = (m + s * np.eye(2)) / math.sqrt(t2)
    return 0.5 * (out + out.T)


def box_gaussian(b: OBox5) -> Gauss2:
    """Full-box Gaussian used by the GWD/KLD baselines.

    ``Sigma^(1/2) = R diag(w/2, h/2) R^T``.  Written as ``b + (a - b) c^2`` so a
    square gives exactly ``(w/2)^2 I`` for every angle.
    """
    a = 0.25 * b.w * b.w
    bb = 0.25 * b.h * b.h
    c, s = math.cos(b.theta), math.sin(b.theta)
    diff = a - bb
    sigma = np.array([[bb + diff * c * c, diff * c * s],
                      [diff * c * s, a - diff * c * c]])
    return Gauss2((b.cx, b.cy), sigma)


def edge_gaussian(e: DirectedEdge) -> Gauss2:
    """Rank-one Gaussian of an edge: ``Sigma = v v^T / 4``."""
    v = e.vector
    return Gauss2(e.center, 0.25 * np.outer(v, v))


def _trace_sqrt_product(s1: np.ndarray, s2: np.ndarray) -> float:
    # tr((S1^1/2 S2 S1^1/2)^1/2) via the 2x2 closed form: the inner matrix has
    # trace tr(S1 S2) and determinant det(S1) det(S2)
    tr1 = s1[0, 0] + s1[1, 1]
    tr2 = s2[0, 0] + s2[1, 1]
    tr_c = float(np.sum(s1 * s2))
    if tr_c <= NOISE * tr1 * tr2:
        tr_c = 0.0
    det_c = _det(s1) * _det(s2)
    return math.sqrt(tr_c + 2.0 * math.sqrt(det_c))


def w2_gaussian(g1: Gauss2, g2: Gauss2) -> float:
    """Squared 2-Wasserstein distance between two Gaussians."""
    dmu = g1.mu - g2.mu
    s1, s2 = g1.sigma, g2.sigma
    tr_term = (s1[0, 0] + s1[1, 1]) + (s2[0, 0] + s2[1, 1]) - 2.0 * _trace_sqrt_product(s1, s2)
    val = float(dmu @ dmu) + tr_term
    scale = 1.0 + float(dmu @ dmu) + s1[0, 0] + s1[1, 1] + s2[0, 0] + s2[1, 1]
    if val < -1e-12 * scale:
        raise InvalidCovarianceError(f"negative Wasserstein distance {val}")
    return max(val, 0.0)


def kld_gaussian(g1: Gauss2, g2: Gauss2) -> float:
    """KL(g1 || g2) for full-rank Gaussians."""
    det2 = _det(g2.sigma)
    if det2 == 0.0:
        raise DegenerateDistributionError("KL divergence needs a full-rank reference covariance")
    det1 = _det(g1.sigma)
    if det1 == 0.0:
        raise DegenerateDistributionError("KL divergence is infinite for a singular first argument")
    s2 = g2.sigma
    inv2 = np.array([[s2[1, 1], -s2[0, 1]], [-s2[1, 0], s2[0, 0]]]) / det2
    dmu = g2.mu - g1.mu
    val = 0.5 * (float(np.sum(inv2 * g1.sigma)) + float(dmu @ inv2 @ dmu)
                 - 2.0 + math.log(det2 / det1))
    return max(val, 0.0)
