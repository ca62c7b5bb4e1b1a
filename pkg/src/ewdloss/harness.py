"""Toy box/quad regression by gradient descent, plus loss-vs-angle sweeps.

Scenario manifests are JSON::

    {
      "version": 1,
      "defaults": {"optimizer": {"lr": 0.01, "momentum": 0.9, "max_steps": 2000},
                   "stop": {"grad_tol": 1e-8, "iou_target": null},
                   "loss": {"variant": "edwd"}},
      "scenarios": [
        {"name": "square_30", "target": [0, 0, 10, 10, 0], "init": [0, 0, 10, 10, 30]},
        {"name": "quad", "target": [[0, 0], [4, 0], [4, 2], [0, 2]],
         "init": [[1, 0], [5, 1], [4, 3], [0, 2]], "loss": {"variant": "egwd"}}
      ]
    }

Boxes are ``[cx, cy, w, h, theta_deg]``; quads are four clockwise ``[x, y]``
corners (y down).  ``loss`` keys mirror :class:`LossConfig` fields, with
string values in the ``parse`` syntax (``"image:1024"``, ``"inv_tau:2:log1p"``).
Per-scenario ``optimizer``/``stop``/``loss`` entries are merged over the
defaults.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np

from ._backend import kernels
from .ewd import LossConfig, Variant, kernel_coefficients, loss_with_match
from .geom import OBox5, Quad, rotated_iou
from .grad import edwd_value_grad, fd_gradient, quad_value_grad

MIN_SIDE = 1e-6
FD_STEP = 1e-6

Shape = Union[OBox5, Quad]


@dataclass(frozen=True)
class Optimizer:
    lr: float = 0.01
    momentum: float = 0.9
    max_steps: int = 2000

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")


@dataclass(frozen=True)
class StopRule:
    """Stop early when the gradient norm or the IoU reaches its threshold."""

    grad_tol: float = 1e-8
    iou_target: Optional[float] = None


@dataclass(frozen=True)
class FitScenario:
    name: str
    target: Shape
    init: Shape
    cfg: LossConfig
    optimizer: Optimizer = field(default_factory=Optimizer)
    stop: StopRule = field(default_factory=StopRule)

    def __post_init__(self):
        if isinstance(self.target, OBox5) != isinstance(self.init, OBox5):
            raise ValueError("target and init must both be boxes or both be quads")
        if isinstance(self.target, Quad) and self.cfg.variant not in (Variant.EGWD, Variant.EDWD):
            raise ValueError(f"{self.cfg.name} is only defined for oriented boxes")

    def with_loss(self, cfg: LossConfig) -> "FitScenario":
        return FitScenario(self.name, self.target, self.init, cfg, self.optimizer, self.stop)


@dataclass(frozen=True)
class StepRecord:
    step: int
    params: tuple
    loss: float
    grad_norm: float
    iou: float
    match_k: int


@dataclass
class FitTrace:
    scenario: str
    records: List[StepRecord]
    status: str  # converged | stalled | diverged

    @property
    def final(self) -> StepRecord:
        return self.records[-1]

    def steps_to_iou(self, level: float) -> Optional[int]:
        for r in self.records:
            if r.iou >= level:
                return r.step
        return None


def _to_params(s: Shape) -> np.ndarray:
    if isinstance(s, OBox5):
        return s.asarray()
    return s.asarray().ravel()


def _shape(params: np.ndarray, is_box: bool):
    if is_box:
        return OBox5(*map(float, params))
    return params.reshape(-1, 2)


def _value_grad(params: np.ndarray, target: Shape, cfg: LossConfig, is_box: bool):
    if not is_box:
        val, k, g = quad_value_grad(params.reshape(-1, 2), target.asarray(), cfg)
        return val, k, g.ravel()
    pred = OBox5(*map(float, params))
    if cfg.variant in (Variant.EGWD, Variant.EDWD):
        val, g = edwd_value_grad(pred, target, cfg)
        return val, g.k, g.asarray()
    # baselines: central differences, sides kept positive
    h = min(FD_STEP, 0.5 * pred.w, 0.5 * pred.h)
    val, k = loss_with_match(pred, target, cfg)
    g = fd_gradient(lambda b: loss_with_match(b, target, cfg)[0], pred, h)
    return val, k, g.asarray()


def fit(s: FitScenario) -> FitTrace:
    """Heavy-ball descent: ``v = mu v + g``, ``p -= lr v``, sides clamped at 1e-6.

    The state is recorded before each update.  Non-finite losses end the run
    with ``diverged``; the last recorded state is the last finite one.
    """
    is_box = isinstance(s.target, OBox5)
    p = _to_params(s.init).astype(float)
    vel = np.zeros_like(p)
    opt, stop = s.optimizer, s.stop
    records: List[StepRecord] = []
    status = "stalled"
    for step in range(opt.max_steps + 1):
        try:
            val, k, g = _value_grad(p, s.target, s.cfg, is_box)
        except (ValueError, ArithmeticError):
            status = "diverged"
            break
        if not (math.isfinite(val) and np.all(np.isfinite(g))):
            status = "diverged"
            break
        gn = float(np.linalg.norm(g))
        iou = rotated_iou(_shape(p, is_box), s.target)
        records.append(StepRecord(step, tuple(float(x) for x in p), float(val), gn, iou, int(k)))
        if gn <= stop.grad_tol or (stop.iou_target is not None and iou >= stop.iou_target):
            status = "converged"
            break
        if step == opt.max_steps:
            break
        vel = opt.momentum * vel + g
        p = p - opt.lr * vel
        if is_box:
            p[2:4] = np.maximum(p[2:4], MIN_SIDE)
        if not np.all(np.isfinite(p)):
            status = "diverged"
            break
    if not records:
        raise ValueError(f"scenario {s.name!r}: loss is not finite at the initial state")
    return FitTrace(s.name, records, status)


def angle_error_deg(pred: OBox5, target: OBox5) -> float:
    """Orientation error in degrees, reduced modulo 90 into [-45, 45)."""
    d = math.degrees(pred.theta - target.theta)
    return (d + 45.0) % 90.0 - 45.0


# -- curves ------------------------------------------------------------------

@dataclass(frozen=True)
class CurveSpec:
    ratios: tuple
    dthetas_deg: tuple
    losses: tuple
    area: float = 1.0

    def __post_init__(self):
        if not self.ratios or not self.dthetas_deg or not self.losses:
            raise ValueError("ratios, angles and losses must be non-empty")
        if any(not r >= 1.0 for r in self.ratios):
            raise ValueError("aspect ratios must be >= 1 (use the reciprocal box)")
        if any(b <= a for a, b in zip(self.dthetas_deg, self.dthetas_deg[1:])):
            raise ValueError("angle grid must be strictly increasing")
        if not self.area > 0:
            raise ValueError("area must be positive")

    def configs(self) -> list:
        return [c if isinstance(c, LossConfig) else LossConfig.named(c) for c in self.losses]


@dataclass(frozen=True)
class CurveRow:
    ratio: float
    dtheta_deg: float
    loss: str
    value: float
    match_k: int


def curve_pair(ratio: float, dtheta_deg: float, area: float = 1.0):
    """``(pred, target)``: the target box and the same box rotated by ``dtheta``."""
    target = OBox5(0.0, 0.0, math.sqrt(area * ratio), math.sqrt(area / ratio), 0.0)
    pred = OBox5(0.0, 0.0, target.w, target.h, math.radians(dtheta_deg))
    return pred, target


def sweep_curve(c: CurveSpec) -> List[CurveRow]:
    """Rows ordered by ratio, then loss, then angle."""
    rows = []
    for r in c.ratios:
        for cfg in c.configs():
            for d in c.dthetas_deg:
                pred, target = curve_pair(r, d, c.area)
                val, k = loss_with_match(pred, target, cfg)
                rows.append(CurveRow(float(r), float(d), cfg.name, float(val), int(k)))
    return rows


def branch_curve(ratio: float, dthetas_deg: Sequence[float], cfg: LossConfig, area: float = 1.0):
    """Distance under each of the four matchings along an angle grid, shape (n, 4)."""
    out = []
    for d in dthetas_deg:
        pred, target = curve_pair(ratio, d, area)
        out.append(kernels.edwd_branches(pred.astuple(), target.astuple(),
                                         *kernel_coefficients(target, cfg)))
    return np.array(out)


def detect_turning_point(dthetas_deg: Sequence[float], ks: Sequence[int],
                         branches: Optional[np.ndarray] = None) -> list:
    """Grid angles where the active matching switches.

    A switch between neighbours ``i`` and ``i + 1`` is reported at whichever of
    the two lies closer to the crossing of the two branches (linear
    interpolation of their difference).  Without branch values the first
    point carrying the new ``k`` is reported.
    """
    x = list(dthetas_deg)
    ks = list(ks)
    if len(x) != len(ks):
        raise ValueError("angle and matching series differ in length")
    out = []
    for i in range(len(x) - 1):
        k0, k1 = ks[i], ks[i + 1]
        if k0 == k1:
            continue
        if branches is None:
            out.append(x[i + 1])
            continue
        d0 = branches[i][k0] - branches[i][k1]
        d1 = branches[i + 1][k0] - branches[i + 1][k1]
        frac = d0 / (d0 - d1) if d0 != d1 else 0.5
        out.append(x[i] if frac <= 0.5 else x[i + 1])
    return out


# -- comparisons -------------------------------------------------------------

@dataclass(frozen=True)
class CompareRow:
    scenario: str
    loss: str
    status: str
    steps: int
    steps_to_iou: Optional[int]
    initial_dtheta_deg: float
    final_dtheta_deg: float
    initial_iou: float
    final_iou: float


def compare_losses(scenarios: Sequence[FitScenario], losses: Sequence[LossConfig],
                   iou_level: float = 0.9) -> List[CompareRow]:
    """Fit every scenario under every loss; one row per (loss, scenario)."""
    if not scenarios or not losses:
        raise ValueError("need at least one scenario and one loss")
    rows = []
    for cfg in losses:
        for sc in scenarios:
            tr = fit(sc.with_loss(cfg))
            first, last = tr.records[0], tr.final
            if isinstance(sc.target, OBox5):
                d0 = angle_error_deg(OBox5(*first.params), sc.target)
                d1 = angle_error_deg(OBox5(*last.params), sc.target)
            else:
                d0 = d1 = math.nan
            rows.append(CompareRow(sc.name, cfg.name, tr.status, last.step, tr.steps_to_iou(iou_level),
                                   d0, d1, first.iou, last.iou))
    return rows


# -- manifests ---------------------------------------------------------------

class ManifestError(ValueError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"line {line}, column {col}: {msg}" if line else msg)
        self.line, self.col = line, col


def _parse_shape(v, where: str) -> Shape:
    arr = np.asarray(v, dtype=float)
    if arr.shape == (5,):
        return OBox5.from_degrees(*arr)
    if arr.shape == (4, 2):
        return Quad(tuple(map(tuple, arr)))
    raise ValueError(f"{where}: expected [cx, cy, w, h, theta_deg] or four [x, y] corners")


def _merge(base: dict, over: Optional[dict]) -> dict:
    out = dict(base or {})
    out.update(over or {})
    return out


def parse_manifest(text: str) -> List[FitScenario]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ManifestError(e.msg, e.lineno, e.colno) from None
    try:
        if not isinstance(doc, dict) or "scenarios" not in doc:
            raise ValueError("top level must be an object with a 'scenarios' list")
        if doc.get("version", 1) != 1:
            raise ValueError(f"unsupported manifest version {doc['version']!r}")
        dflt = doc.get("defaults", {})
        out = []
        for i, sc in enumerate(doc["scenarios"]):
            name = sc.get("name", f"scenario{i}")
            lossd = _merge({"variant": "edwd"}, _merge(dflt.get("loss"), sc.get("loss")))
            out.append(FitScenario(
                name=name,
                target=_parse_shape(sc["target"], f"{name}.target"),
                init=_parse_shape(sc["init"], f"{name}.init"),
                cfg=LossConfig.from_dict(lossd),
                optimizer=Optimizer(**_merge(dflt.get("optimizer"), sc.get("optimizer"))),
                stop=StopRule(**_merge(dflt.get("stop"), sc.get("stop"))),
            ))
        if not out:
            raise ValueError("manifest has no scenarios")
        return out
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ManifestError):
            raise
        raise ManifestError(f"invalid manifest: {e}") from None


def load_manifest(path) -> List[FitScenario]:
    with open(path, encoding="utf-8") as fh:
        return parse_manifest(fh.read())


def standard_suite() -> List[FitScenario]:
    """The versioned scenario suite shipped with the package."""
    text = resources.files("ewdloss").joinpath("data/scenarios.json").read_text(encoding="utf-8")
    return parse_manifest(text)


def scenario_by_name(name: str, scenarios: Optional[Iterable[FitScenario]] = None) -> FitScenario:
    for sc in scenarios if scenarios is not None else standard_suite():
        if sc.name == name:
            return sc
    raise KeyError(name)
