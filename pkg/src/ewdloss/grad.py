"""Analytic gradients of the edge losses and a finite-difference checker.

Gradients go through the active matching only (envelope rule); at an exact
tie the smallest ``k`` wins.  They are taken w.r.t. the raw predicted
parameters ``(cx, cy, w, h, theta)``; normalisation scales depend on the
target only and enter as constants.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from ._backend import kernels
from .ewd import (LossConfig, NormScheme, PostFn, Variance, Variant, kernel_coefficients,
                  loss, polygon_scale, polygon_variances)
from .geom import OBox5

PARAMS = ("cx", "cy", "w", "h", "theta")


@dataclass(frozen=True)
class BoxGrad:
    d_cx: float
    d_cy: float
    d_w: float
    d_h: float
    d_theta: float
    k: int = -1
    degenerate: bool = False

    def asarray(self) -> np.ndarray:
        return np.array([self.d_cx, self.d_cy, self.d_w, self.d_h, self.d_theta])

    def norm(self) -> float:
        return float(np.linalg.norm(self.asarray()))


def _check_edge_cfg(cfg: LossConfig) -> None:
    if cfg.variant not in (Variant.EGWD, Variant.EDWD):
        raise ValueError(f"analytic gradients exist for egwd/edwd only, not {cfg.variant.value}")


def edwd_value_grad(pred: OBox5, target: OBox5, cfg: LossConfig):
    """``(loss, BoxGrad)`` for an EGWD/EDWD config, post function included.

    ``sqrt`` at a zero distance has no derivative; the gradient is then 0 and
    ``degenerate`` is set.
    """
    _check_edge_cfg(cfg)
    w, k, g, _ = kernels.edwd_value_grad(pred.astuple(), target.astuple(),
                                         *kernel_coefficients(target, cfg))
    dpost, flag = cfg.post.derivative(w)
    value = cfg.post(max(w, 0.0))
    return value, BoxGrad(*(dpost * gi for gi in g), k=k, degenerate=flag)


def edwd_grad(pred: OBox5, target: OBox5, cfg: LossConfig) -> BoxGrad:
    return edwd_value_grad(pred, target, cfg)[1]


def dW_dcos(pred: OBox5, target: OBox5, cfg: LossConfig) -> float:
    """Derivative of the raw distance w.r.t. ``cos`` of the matched angle difference."""
    _check_edge_cfg(cfg)
    return kernels.edwd_value_grad(pred.astuple(), target.astuple(),
                                   *kernel_coefficients(target, cfg))[3]


def _perturb(b: OBox5, i: int, delta: float) -> OBox5:
    vals = list(b.astuple())
    vals[i] += delta
    return OBox5(*vals)


def fd_gradient(f: Callable[[OBox5], float], pred: OBox5, h: float = 1e-5) -> BoxGrad:
    """Central differences of ``f`` in each raw parameter (theta in radians)."""
    if not h > 0:
        raise ValueError("step must be positive")
    g = []
    for i in range(5):
        g.append((f(_perturb(pred, i, h)) - f(_perturb(pred, i, -h))) / (2.0 * h))
    return BoxGrad(*g)


def active_match(pred: OBox5, target: OBox5, cfg: LossConfig) -> int:
    br = kernels.edwd_branches(pred.astuple(), target.astuple(), *kernel_coefficients(target, cfg))
    return min(range(4), key=lambda j: (br[j], j))


def near_matching_tie(pred: OBox5, target: OBox5, cfg: LossConfig, radius: float = 1e-3) -> bool:
    """True when moving any one parameter by ``radius`` changes the active matching."""
    k0 = active_match(pred, target, cfg)
    for i in range(5):
        for sgn in (-1.0, 1.0):
            p = pred.astuple()
            vals = list(p)
            vals[i] += sgn * radius
            if i in (2, 3) and vals[i] <= 0:
                continue
            if active_match(OBox5(*vals), target, cfg) != k0:
                return True
    return False


def gradient_error(analytic, numeric, abs_floor: float = 1e-6, rel: float = 1e-4) -> float:
    """Max component error scaled so that ``<= rel`` means within tolerance.

    The reference scale is the largest FD component, floored at
    ``abs_floor / rel`` so tiny gradients are judged absolutely.
    """
    a = np.asarray(analytic.asarray() if isinstance(analytic, BoxGrad) else analytic, float)
    n = np.asarray(numeric.asarray() if isinstance(numeric, BoxGrad) else numeric, float)
    scale = max(float(np.max(np.abs(n))), abs_floor / rel)
    return float(np.max(np.abs(a - n))) / scale


# -- polygons ----------------------------------------------------------------

def quad_value_grad(pred: np.ndarray, target: np.ndarray, cfg: LossConfig):
    """Loss, active shift and gradient w.r.t. the predicted vertices ``(n, 2)``."""
    _check_edge_cfg(cfg)
    pp = np.asarray(pred, float)
    tp = np.asarray(target, float)
    n = len(pp)
    if len(tp) != n:
        raise ValueError("vertex count mismatch")
    s = polygon_scale(tp, cfg.norm)
    sig = polygon_variances(tp, cfg)
    origin = tp.mean(axis=0)
    P = (pp - origin) / s
    T = (tp - origin) / s
    cp, vp = 0.5 * (P + np.roll(P, -1, 0)), np.roll(P, -1, 0) - P
    ct, vt = 0.5 * (T + np.roll(T, -1, 0)), np.roll(T, -1, 0) - T
    best, best_k = math.inf, 0
    for k in range(n):
        dc = cp - np.roll(ct, -k, 0)
        dv = vp - np.roll(vt, -k, 0)
        val = float(np.sum(dc * dc) + np.sum(0.25 * np.roll(sig, -k) * np.sum(dv * dv, axis=1)))
        if val < best:
            best, best_k = val, k
    dc = cp - np.roll(ct, -best_k, 0)
    dv = vp - np.roll(vt, -best_k, 0)
    sk = np.roll(sig, -best_k)[:, None]
    # edge i runs from vertex i to vertex i+1
    g_c = 2.0 * dc
    g_v = 0.5 * sk * dv
    grad = 0.5 * g_c - g_v + np.roll(0.5 * g_c + g_v, 1, axis=0)
    grad /= s
    dpost, _ = cfg.post.derivative(best)
    return cfg.post(best), best_k, dpost * grad


# -- random gradient suite ---------------------------------------------------

NORM_CHOICES = ("none", "image", "anchor", "target_wh", "target_min", "target_max")
POST_CHOICES = ("identity", "sqrt", "log1p")


def random_box(rng: np.random.Generator, center=10.0, size=(0.1, 20.0)) -> OBox5:
    return OBox5(float(rng.uniform(-center, center)), float(rng.uniform(-center, center)),
                 float(rng.uniform(*size)), float(rng.uniform(*size)),
                 float(rng.uniform(-math.pi, math.pi)))


def random_edge_config(rng: np.random.Generator, variants: Iterable[str] = ("egwd", "edwd")) -> LossConfig:
    variant = Variant(str(rng.choice(list(variants))))
    kind = str(rng.choice(NORM_CHOICES))
    size = float(rng.uniform(8.0, 64.0)) if kind in ("image", "anchor") else None
    post = PostFn(str(rng.choice(POST_CHOICES)))
    var_kind = str(rng.choice(("aspect_ratio", "constant", "raw_length")))
    variance = Variance(var_kind, float(rng.uniform(0.0, 2.0)) if var_kind == "constant" else 1.0)
    return LossConfig(variant, norm=NormScheme(kind, size), post=post, variance=variance)


@dataclass
class GradCheckReport:
    """Outcome of :func:`check_gradients`, per loss name."""

    max_error: dict = field(default_factory=dict)
    checked: dict = field(default_factory=dict)
    skipped_ties: dict = field(default_factory=dict)
    worst_case: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def ok(self) -> bool:
        return not self.failures


def check_gradients(trials: int, seed: int = 0, losses: Iterable[str] = ("egwd", "edwd"),
                    rel: float = 1e-4, abs_floor: float = 1e-6, h: float = 1e-5,
                    tie_radius: float = 1e-3,
                    grad_fn: Optional[Callable] = None) -> GradCheckReport:
    """Compare analytic and central-difference gradients on random triples.

    Triples within ``tie_radius`` of a matching switch are skipped.
    """
    losses = tuple(losses)
    grad_fn = grad_fn or edwd_grad
    rng = np.random.default_rng(seed)
    rep = GradCheckReport()
    for name in losses:
        rep.max_error[name] = 0.0
        rep.checked[name] = 0
        rep.skipped_ties[name] = 0
    for _ in range(trials):
        cfg = random_edge_config(rng, losses)
        pred, target = random_box(rng), random_box(rng)
        name = cfg.variant.value
        if near_matching_tie(pred, target, cfg, tie_radius):
            rep.skipped_ties[name] += 1
            continue
        a = grad_fn(pred, target, cfg)
        n = fd_gradient(lambda b: loss(b, target, cfg), pred, h)
        err = gradient_error(a, n, abs_floor, rel)
        rep.checked[name] += 1
        if err > rep.max_error[name]:
            rep.max_error[name] = err
            rep.worst_case[name] = (pred, target, cfg)
        if not err <= rel:
            rep.failures.append((pred, target, cfg, err))
    return rep
