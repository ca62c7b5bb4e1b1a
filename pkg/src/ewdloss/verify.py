"""Seeded closed-form vs oracle sweeps behind ``ewdloss verify``."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ewd import edwd_edge, egwd_obox
from .geom import DirectedEdge, OBox5, rotated_iou
from .oracle import (coupled_cloud_cost, discrete_ot, edge_point_cloud, edwd_edge_integral,
                     egwd_matching_oracle, iou_monte_carlo)

UNIFORM_VAR = 1.0 / 3.0


@dataclass(frozen=True)
class SuiteResult:
    name: str
    trials: int
    max_dev: float
    tol: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.max_dev <= self.tol


def random_box(rng: np.random.Generator) -> OBox5:
    """Centre in [-10, 10]^2, sides in [0.1, 20], angle in [-pi, pi)."""
    return OBox5(*(float(v) for v in rng.uniform(-10, 10, 2)),
                 *(float(v) for v in rng.uniform(0.1, 20.0, 2)),
                 float(rng.uniform(-math.pi, math.pi)))


def random_edge(rng: np.random.Generator) -> DirectedEdge:
    p = rng.uniform(-10, 10, 4)
    return DirectedEdge((float(p[0]), float(p[1])), (float(p[2]), float(p[3])))


def _rel(a: float, b: float, rel: float, abs_floor: float) -> float:
    # scaled so that <= rel means |a - b| <= max(rel |b|, abs_floor)
    return abs(a - b) / max(abs(b), abs_floor / rel)


def egwd_oracle(trials: int = 10_000, seed: int = 0, rel: float = 1e-9,
                abs_floor: float = 1e-12) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        a, b = random_box(rng), random_box(rng)
        worst = max(worst, _rel(egwd_obox(a, b), egwd_matching_oracle(a, b)[0], rel, abs_floor))
    return SuiteResult("egwd-oracle", trials, worst, rel)


def edwd_integral(trials: int = 1000, seed: int = 0, tol: float = 1e-6,
                  n_trap: int = 10_000) -> SuiteResult:
    """Simpson at n=3 must be exact (to rounding); trapezoid at ``n_trap`` within ``tol``."""
    rng = np.random.default_rng(seed)
    simpson = trap = 0.0
    for _ in range(trials):
        e1, e2 = random_edge(rng), random_edge(rng)
        closed = edwd_edge(e1, e2, UNIFORM_VAR)
        simpson = max(simpson, _rel(edwd_edge_integral(e1, e2, n=3), closed, 1e-12, 1e-12))
        trap = max(trap, _rel(edwd_edge_integral(e1, e2, n=n_trap, rule="trapezoid"),
                              closed, tol, 1e-12))
    # a non-exact Simpson result counts as a failure whatever the trapezoid does
    worst = trap if simpson <= 1e-12 else math.inf
    return SuiteResult("edwd-integral", trials, worst, tol,
                       f"simpson_n3_rel={simpson:.3g} trapezoid_rel={trap:.3g}")


def ot_bound(trials: int = 500, seed: int = 0, n_atoms: int = 16) -> SuiteResult:
    """Unconstrained OT never exceeds the constrained edge coupling.

    Midpoint sampling has second moment ``1/3 - 1/(3 n^2)`` below the
    uniform variance, so the sampled aligned coupling already sits under the
    closed form; the only slack needed is rounding.
    """
    rng = np.random.default_rng(seed)
    worst_closed = worst_coupled = -math.inf
    violations = 0
    for _ in range(trials):
        e1, e2 = random_edge(rng), random_edge(rng)
        closed = edwd_edge(e1, e2, UNIFORM_VAR)
        p, q = edge_point_cloud(e1, n_atoms), edge_point_cloud(e2, n_atoms)
        ot = discrete_ot(p, q)
        coupled = coupled_cloud_cost(p, q)
        bound = 1e-12 * max(1.0, closed)
        worst_closed = max(worst_closed, ot - closed)
        worst_coupled = max(worst_coupled, ot - coupled)
        violations += max(ot - closed, ot - coupled) > bound
    # max_dev counts violations
    return SuiteResult("ot-bound", trials, float(violations), 0.0,
                       f"max(ot-edwd)={worst_closed:.3g} max(ot-coupled)={worst_coupled:.3g}")


def iou_mc(trials: int = 100, seed: int = 0, tol: float = 0.01,
           n_samples: int = 200_000) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(trials):
        a = OBox5(*(float(v) for v in rng.uniform(-2, 2, 2)), *(float(v) for v in rng.uniform(1, 6, 2)),
                  float(rng.uniform(-math.pi, math.pi)))
        b = OBox5(*(float(v) for v in rng.uniform(-2, 2, 2)), *(float(v) for v in rng.uniform(1, 6, 2)),
                  float(rng.uniform(-math.pi, math.pi)))
        worst = max(worst, abs(rotated_iou(a, b) - iou_monte_carlo(a, b, n_samples, seed=seed + i)))
    return SuiteResult("iou-mc", trials, worst, tol)


SUITES = {
    "egwd-oracle": egwd_oracle,
    "edwd-integral": edwd_integral,
    "ot-bound": ot_bound,
    "iou-mc": iou_mc,
}
