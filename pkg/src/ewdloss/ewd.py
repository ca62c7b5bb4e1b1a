"""Edge Wasserstein distances and the baseline box losses.

For a box pair and a cyclic matching ``k`` the edge distance is

    4 |do|^2 / s_o^2 + a_w |dw|^2 / s_w^2 + a_h |dh|^2 / s_h^2

where ``dw``/``dh`` are differences of the matched width/height edge vectors,
``a = 1/2 + sigma^2/2`` and ``s_*`` are the normalisation scales.  EGWD is the
case ``sigma^2 = 1``.  The distance is the minimum over the four matchings;
ties resolve to the smallest ``k``.  Scales and variances depend on the
target only, and the matching shift is applied before normalising, so the
distance between a box and any re-parameterisation of itself is zero.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from ._backend import kernels
from .gaussian import box_gaussian, kld_gaussian, w2_gaussian
from .geom import BoxDef, DirectedEdge, EdgeSeq, OBox5, Quad, canonicalize, signed_area


class Variant(enum.Enum):
    EGWD = "egwd"
    EDWD = "edwd"
    GWD = "gwd"
    KLD = "kld"
    SMOOTH_L1 = "smoothl1"


_NORM_KINDS = ("none", "image", "anchor", "target_wh", "target_min", "target_max")


@dataclass(frozen=True)
class NormScheme:
    """How lengths are scaled before the distance is taken.

    ``image`` and ``anchor`` divide everything by a supplied constant.
    ``target_wh`` divides widths by ``w_t``, heights by ``h_t`` and the centre
    offset by ``sqrt(w_t h_t)``.  ``target_min``/``target_max`` use one scale.
    """

    kind: str = "none"
    size: Optional[float] = None

    def __post_init__(self):
        if self.kind not in _NORM_KINDS:
            raise ValueError(f"unknown normalisation {self.kind!r}; expected one of {_NORM_KINDS}")
        if self.kind in ("image", "anchor"):
            if self.size is None or not self.size > 0 or not math.isfinite(self.size):
                raise ValueError(f"{self.kind} normalisation needs a positive size, got {self.size}")

    @classmethod
    def parse(cls, text: str) -> "NormScheme":
        kind, _, arg = text.partition(":")
        return cls(kind, float(arg) if arg else None)

    def __str__(self):
        return f"{self.kind}:{self.size:g}" if self.size is not None else self.kind

    def scales(self, target: OBox5):
        """``(s_center, s_width, s_height)`` for this target."""
        k = self.kind
        if k == "none":
            s = (1.0, 1.0, 1.0)
        elif k in ("image", "anchor"):
            s = (self.size,) * 3
        elif k == "target_wh":
            s = (math.sqrt(target.w * target.h), target.w, target.h)
        elif k == "target_min":
            s = (min(target.w, target.h),) * 3
        else:
            s = (max(target.w, target.h),) * 3
        if not all(v > 0 and math.isfinite(v) for v in s):
            raise ValueError(f"normalisation scale must be positive, got {s}")
        return s

    def isotropic_scale(self, target: OBox5) -> float:
        """Single length scale (the centre scale), for baselines that need similarity."""
        return self.scales(target)[0]


_POST_KINDS = ("identity", "sqrt", "log1p", "inv_tau")


@dataclass(frozen=True)
class PostFn:
    """Monotone map applied to the squared distance.

    ``inv_tau`` computes ``1 - 1/(tau + inner(W))``; note it maps 0 to
    ``1 - 1/tau``, which is 0 only for ``tau == 1``.
    """

    kind: str = "identity"
    tau: float = 1.0
    inner: Optional["PostFn"] = None

    def __post_init__(self):
        if self.kind not in _POST_KINDS:
            raise ValueError(f"unknown post function {self.kind!r}")
        if self.kind == "inv_tau":
            if not self.tau > 0:
                raise ValueError("tau must be positive")
            if self.inner is None:
                object.__setattr__(self, "inner", PostFn("identity"))
            elif self.inner.kind == "inv_tau":
                raise ValueError("inv_tau cannot be nested")

    @classmethod
    def parse(cls, text: str) -> "PostFn":
        """``identity``, ``sqrt``, ``log1p`` or ``inv_tau:<tau>[:<inner>]``."""
        parts = text.split(":")
        if parts[0] == "inv_tau":
            tau = float(parts[1]) if len(parts) > 1 else 1.0
            inner = cls(parts[2]) if len(parts) > 2 else cls("identity")
            return cls("inv_tau", tau, inner)
        if len(parts) != 1:
            raise ValueError(f"bad post function {text!r}")
        return cls(parts[0])

    def __str__(self):
        if self.kind == "inv_tau":
            return f"inv_tau:{self.tau:g}:{self.inner}"
        return self.kind

    def __call__(self, w: float) -> float:
        return apply_post(w, self)

    def derivative(self, w: float):
        """``(d post / dW, degenerate)``; ``degenerate`` flags the sqrt kink at 0."""
        k = self.kind
        if k == "identity":
            return 1.0, False
        if k == "sqrt":
            if w <= 0.0:
                return 0.0, True
            return 0.5 / math.sqrt(w), False
        if k == "log1p":
            return 1.0 / (1.0 + w), False
        d_inner, flag = self.inner.derivative(w)
        denom = self.tau + apply_post(w, self.inner)
        return d_inner / (denom * denom), flag


def apply_post(w: float, post: PostFn) -> float:
    if w < 0:
        raise ValueError(f"distance must be non-negative, got {w}")
    k = post.kind
    if k == "identity":
        return w
    if k == "sqrt":
        return math.sqrt(w)
    if k == "log1p":
        return math.log1p(w)
    return 1.0 - 1.0 / (post.tau + apply_post(w, post.inner))


_VAR_KINDS = ("aspect_ratio", "constant", "raw_length")


@dataclass(frozen=True)
class Variance:
    """Per-edge variance of the EDWD edge density.

    ``aspect_ratio`` sets ``sigma_w^2 = w_t/h_t`` and ``sigma_h^2 = h_t/w_t``;
    ``raw_length`` uses ``w_t`` and ``h_t`` unscaled; ``constant`` uses ``value``.
    """

    kind: str = "aspect_ratio"
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in _VAR_KINDS:
            raise ValueError(f"unknown variance mode {self.kind!r}")
        if self.kind == "constant" and not self.value >= 0:
            raise ValueError("constant variance must be non-negative")

    @classmethod
    def parse(cls, text: str) -> "Variance":
        kind, _, arg = text.partition(":")
        if kind == "const":
            kind = "constant"
        return cls(kind, float(arg) if arg else 1.0)

    def __str__(self):
        return f"constant:{self.value:g}" if self.kind == "constant" else self.kind

    def sigma2(self, target: OBox5):
        if self.kind == "constant":
            return self.value, self.value
        if self.kind == "raw_length":
            return target.w, target.h
        return target.w / target.h, target.h / target.w


@dataclass(frozen=True)
class LossConfig:
    variant: Variant
    norm: NormScheme = field(default_factory=lambda: NormScheme("target_wh"))
    post: PostFn = field(default_factory=PostFn)
    variance: Variance = field(default_factory=Variance)
    box_def: BoxDef = BoxDef.MIN
    beta: float = 1.0 / 9.0
    kl_reverse: bool = False
    canonicalize_pred: bool = False

    def __post_init__(self):
        if self.variant is Variant.EGWD and self.variance != Variance("constant", 1.0):
            object.__setattr__(self, "variance", Variance("constant", 1.0))
        if not self.beta > 0:
            raise ValueError("smooth-L1 beta must be positive")

    @property
    def name(self) -> str:
        if self.variant is Variant.SMOOTH_L1:
            return f"smoothl1_{self.box_def.value}"
        return self.variant.value

    def with_(self, **kw) -> "LossConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "norm": str(self.norm),
            "post": str(self.post),
            "variance": str(self.variance),
            "box_def": self.box_def.value,
            "beta": self.beta,
            "kl_reverse": self.kl_reverse,
            "canonicalize_pred": self.canonicalize_pred,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LossConfig":
        """Inverse of :meth:`to_dict`; ``variant`` may also be a short name like ``smoothl1_le``."""
        d = dict(d)
        base = cls.named(d.pop("variant"))
        kw = {}
        if "norm" in d:
            kw["norm"] = NormScheme.parse(d.pop("norm"))
        if "post" in d:
            kw["post"] = PostFn.parse(d.pop("post"))
        if "variance" in d:
            kw["variance"] = Variance.parse(d.pop("variance"))
        if "box_def" in d:
            kw["box_def"] = BoxDef(d.pop("box_def"))
        for key in ("beta", "kl_reverse", "canonicalize_pred"):
            if key in d:
                kw[key] = d.pop(key)
        if d:
            raise ValueError(f"unknown loss config keys: {sorted(d)}")
        return base.with_(**kw)

    @classmethod
    def named(cls, name: str) -> "LossConfig":
        """Default config for a short loss name (``edwd``, ``kld``, ``smoothl1_min``...)."""
        name = name.lower()
        if name.startswith("smoothl1"):
            _, _, bdef = name.partition("_")
            return cls(Variant.SMOOTH_L1, box_def=BoxDef(bdef or "min"))
        try:
            variant = Variant(name)
        except ValueError:
            raise ValueError(f"unknown loss {name!r}") from None
        return cls(variant)


def delta_w_sq(l1: float, t1: float, l2: float, t2: float) -> float:
    """``|l1 e(t1) - l2 e(t2)|^2`` for directed edge vectors."""
    return l1 * l1 + l2 * l2 - 2.0 * l1 * l2 * math.cos(t1 - t2)


def kernel_coefficients(target: OBox5, cfg: LossConfig):
    """``(a_w, a_h, s_o, s_w, s_h)`` as consumed by the kernels."""
    sw2, sh2 = cfg.variance.sigma2(target)
    s_o, s_w, s_h = cfg.norm.scales(target)
    return 0.5 + 0.5 * sw2, 0.5 + 0.5 * sh2, s_o, s_w, s_h


def _edge_config(cfg: Optional[LossConfig], variant: Variant) -> LossConfig:
    if cfg is None:
        return LossConfig(variant, norm=NormScheme("none"))
    if cfg.variant not in (Variant.EGWD, Variant.EDWD):
        raise ValueError(f"{cfg.variant.value} is not an edge distance")
    return cfg


def matching_distances(pred: OBox5, target: OBox5, cfg: LossConfig) -> tuple:
    """Distance under each of the four matchings (before the post function)."""
    coef = kernel_coefficients(target, cfg)
    return kernels.edwd_branches(pred.astuple(), target.astuple(), *coef)


def edwd_obox_match(pred: OBox5, target: OBox5, cfg: Optional[LossConfig] = None):
    """``(distance, k)`` with ``k`` the active matching."""
    cfg = _edge_config(cfg, Variant.EDWD)
    br = matching_distances(pred, target, cfg)
    k = min(range(4), key=lambda j: (br[j], j))
    return br[k], k


def batch_coefficients(targets: np.ndarray, cfg: LossConfig) -> np.ndarray:
    """Vectorised :func:`kernel_coefficients` for an ``(n, 5)`` target array."""
    tw, th = targets[:, 2], targets[:, 3]
    var = cfg.variance
    if var.kind == "constant":
        sw2 = np.full(len(targets), var.value)
        sh2 = sw2
    elif var.kind == "raw_length":
        sw2, sh2 = tw, th
    else:
        sw2, sh2 = tw / th, th / tw
    kind = cfg.norm.kind
    if kind == "none":
        s_o = s_w = s_h = np.ones(len(targets))
    elif kind in ("image", "anchor"):
        s_o = s_w = s_h = np.full(len(targets), float(cfg.norm.size))
    elif kind == "target_wh":
        s_o, s_w, s_h = np.sqrt(tw * th), tw, th
    else:
        s_o = s_w = s_h = np.minimum(tw, th) if kind == "target_min" else np.maximum(tw, th)
    return np.ascontiguousarray(np.stack([0.5 + 0.5 * sw2, 0.5 + 0.5 * sh2, s_o, s_w, s_h], axis=1))


def edwd_obox_batch(preds: np.ndarray, targets: np.ndarray, cfg: Optional[LossConfig] = None):
    """Distances, active matchings and raw-parameter gradients for box arrays.

    Returns ``(W, k, grad)`` with shapes ``(n,)``, ``(n,)`` and ``(n, 5)``;
    the gradient is of the distance, before any post function.
    """
    cfg = _edge_config(cfg, Variant.EDWD)
    P = np.ascontiguousarray(np.atleast_2d(preds), dtype=float)
    T = np.ascontiguousarray(np.atleast_2d(targets), dtype=float)
    if P.shape != T.shape or P.shape[1] != 5:
        raise ValueError("preds and targets must both be (n, 5)")
    C = batch_coefficients(T, cfg)
    n = len(P)
    W = np.empty(n)
    K = np.empty(n, dtype=np.int64)
    G = np.empty((n, 5))
    kernels.edwd_batch(P, T, C, W, K, G)
    return W, K, G


def edwd_obox(pred: OBox5, target: OBox5, cfg: Optional[LossConfig] = None) -> float:
    return edwd_obox_match(pred, target, cfg)[0]


def egwd_obox(pred: OBox5, target: OBox5, norm: Optional[NormScheme] = None) -> float:
    """``min_k 4|do|^2 + |dw|^2 + |dh|^2``; unnormalised by default."""
    cfg = LossConfig(Variant.EGWD, norm=norm or NormScheme("none"))
    return edwd_obox_match(pred, target, cfg)[0]


def _similar_pair(pred: OBox5, target: OBox5, norm: Optional[NormScheme]):
    if norm is None or norm.kind == "none":
        return pred, target
    s = norm.isotropic_scale(target)
    p = OBox5((pred.cx - target.cx) / s, (pred.cy - target.cy) / s, pred.w / s, pred.h / s, pred.theta)
    t = OBox5(0.0, 0.0, target.w / s, target.h / s, target.theta)
    return p, t


def gwd_box(pred: OBox5, target: OBox5, norm: Optional[NormScheme] = None) -> float:
    """Wasserstein distance between full-box Gaussians."""
    p, t = _similar_pair(pred, target, norm)
    return w2_gaussian(box_gaussian(p), box_gaussian(t))


def kld_box(pred: OBox5, target: OBox5, norm: Optional[NormScheme] = None,
            reverse: bool = False) -> float:
    """KL(pred || target) between full-box Gaussians (or the reverse)."""
    p, t = _similar_pair(pred, target, norm)
    gp, gt = box_gaussian(p), box_gaussian(t)
    return kld_gaussian(gt, gp) if reverse else kld_gaussian(gp, gt)


def smooth_l1(x: float, beta: float) -> float:
    ax = abs(x)
    return 0.5 * ax * ax / beta if ax < beta else ax - 0.5 * beta


def smooth_l1_loss(pred: OBox5, target: OBox5, box_def: BoxDef = BoxDef.MIN,
                   norm: Optional[NormScheme] = None, beta: float = 1.0 / 9.0,
                   canonicalize_pred: bool = False) -> float:
    """Element-wise smooth-L1 on the five parameters.

    The target is encoded under ``box_def``; the prediction is taken as the
    raw regression output unless ``canonicalize_pred`` is set.
    """
    t = canonicalize(target, box_def)
    p = canonicalize(pred, box_def) if canonicalize_pred else pred
    s_o, s_w, s_h = (norm or NormScheme("none")).scales(t)
    deltas = ((p.cx - t.cx) / s_o, (p.cy - t.cy) / s_o,
              (p.w - t.w) / s_w, (p.h - t.h) / s_h, p.theta - t.theta)
    return sum(smooth_l1(d, beta) for d in deltas)


@dataclass(frozen=True)
class Normalized:
    """Normalised box deltas plus the scales that produced them."""

    dx: float
    dy: float
    w_ratio: float
    h_ratio: float
    target_w: float
    target_h: float
    s_center: float
    s_width: float
    s_height: float


def apply_norm(pred: OBox5, target: OBox5, scheme: NormScheme) -> Normalized:
    s_o, s_w, s_h = scheme.scales(target)
    return Normalized((pred.cx - target.cx) / s_o, (pred.cy - target.cy) / s_o,
                      pred.w / s_w, pred.h / s_h, target.w / s_w, target.h / s_h,
                      s_o, s_w, s_h)


# -- polygons ----------------------------------------------------------------

def _edge_arrays(seq):
    if isinstance(seq, EdgeSeq):
        return seq.centers(), seq.vectors()
    pts = np.asarray(seq.asarray() if isinstance(seq, Quad) else seq, dtype=float)
    nxt = np.roll(pts, -1, axis=0)
    return 0.5 * (pts + nxt), nxt - pts


def polygon_branches(pred, target, sigma2) -> np.ndarray:
    """Distance for every cyclic shift; pred edge ``i`` meets target edge ``i + k``."""
    cp, vp = _edge_arrays(pred)
    ct, vt = _edge_arrays(target)
    n = len(cp)
    if len(ct) != n:
        raise ValueError(f"edge count mismatch: {n} vs {len(ct)}")
    sig = np.broadcast_to(np.asarray(sigma2, dtype=float), (n,))
    out = np.empty(n)
    for k in range(n):
        ctk = np.roll(ct, -k, axis=0)
        vtk = np.roll(vt, -k, axis=0)
        sk = np.roll(sig, -k)
        dc = cp - ctk
        dv = vp - vtk
        out[k] = np.sum(dc * dc) + np.sum(0.25 * sk * np.sum(dv * dv, axis=1))
    return out


def edwd_edge(e1: DirectedEdge, e2: DirectedEdge, sigma2: float) -> float:
    """Dense coupling distance of one edge pair: ``|dc|^2 + sigma2/4 |dv|^2``."""
    dc = e1.center - e2.center
    dv = e1.vector - e2.vector
    return float(dc @ dc + 0.25 * sigma2 * (dv @ dv))


def edwd_polygon_match(pred, target, sigma2):
    br = polygon_branches(pred, target, sigma2)
    k = int(np.argmin(br))
    return float(br[k]), k


def edwd_polygon(pred, target, sigma2) -> float:
    """``min_k sum_i |dc_i|^2 + sigma_i^2/4 |dv_i|^2`` over cyclic shifts.

    ``sigma2`` is a scalar or one variance per target edge.
    """
    return edwd_polygon_match(pred, target, sigma2)[0]


def polygon_variances(target, cfg: LossConfig) -> np.ndarray:
    _, vt = _edge_arrays(target)
    lens = np.hypot(vt[:, 0], vt[:, 1])
    if cfg.variance.kind == "constant":
        return np.full(len(lens), cfg.variance.value)
    if cfg.variance.kind == "raw_length":
        return lens
    # rectangle aspect ratio generalised: edge length over its neighbours' mean
    neigh = 0.5 * (np.roll(lens, 1) + np.roll(lens, -1))
    return lens / neigh


def polygon_scale(target, norm: NormScheme) -> float:
    """Isotropic scale for polygons; ``target_wh`` uses ``sqrt(area)``."""
    k = norm.kind
    if k == "none":
        return 1.0
    if k in ("image", "anchor"):
        return float(norm.size)
    pts = target.asarray() if isinstance(target, Quad) else np.asarray(
        target.vertices() if isinstance(target, EdgeSeq) else target, float)
    if k == "target_wh":
        s = math.sqrt(abs(signed_area(pts)))
    else:
        _, vt = _edge_arrays(pts)
        lens = np.hypot(vt[:, 0], vt[:, 1])
        s = float(lens.min() if k == "target_min" else lens.max())
    if not s > 0:
        raise ValueError("normalisation scale must be positive")
    return s


def _poly_points(p) -> np.ndarray:
    if isinstance(p, Quad):
        return p.asarray()
    if isinstance(p, EdgeSeq):
        return p.vertices()
    return np.asarray(p, dtype=float)


# -- dispatcher --------------------------------------------------------------

BoxOrPoly = Union[OBox5, Quad, EdgeSeq, Sequence, np.ndarray]


def distance_with_match(pred: BoxOrPoly, target: BoxOrPoly, cfg: LossConfig):
    """Raw distance (before the post function) and active matching, or ``-1``."""
    v = cfg.variant
    if isinstance(pred, OBox5) and isinstance(target, OBox5):
        if v in (Variant.EGWD, Variant.EDWD):
            return edwd_obox_match(pred, target, cfg)
        if v is Variant.GWD:
            return gwd_box(pred, target, cfg.norm), -1
        if v is Variant.KLD:
            return kld_box(pred, target, cfg.norm, cfg.kl_reverse), -1
        return smooth_l1_loss(pred, target, cfg.box_def, cfg.norm, cfg.beta,
                              cfg.canonicalize_pred), -1
    if isinstance(pred, OBox5) or isinstance(target, OBox5):
        raise ValueError("pred and target must both be boxes or both be polygons")
    if v not in (Variant.EGWD, Variant.EDWD):
        raise ValueError(f"{v.value} is only defined for oriented boxes")
    tp = _poly_points(target)
    s = polygon_scale(tp, cfg.norm)
    pp = _poly_points(pred)
    origin = tp.mean(axis=0)
    return edwd_polygon_match((pp - origin) / s, (tp - origin) / s, polygon_variances(tp, cfg))


def loss_with_match(pred: BoxOrPoly, target: BoxOrPoly, cfg: LossConfig):
    w, k = distance_with_match(pred, target, cfg)
    if cfg.variant is Variant.SMOOTH_L1:
        return w, k
    return apply_post(w, cfg.post), k


def loss(pred: BoxOrPoly, target: BoxOrPoly, cfg: LossConfig) -> float:
    """Post function of the variant distance, after normalisation.

    Smooth-L1 ignores the post function.
    """
    return loss_with_match(pred, target, cfg)[0]
