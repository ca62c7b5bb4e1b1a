import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import boxes, random_box
from ewdloss import _pykernels
from ewdloss.ewd import (LossConfig, NormScheme, PostFn, Variance, Variant, apply_norm, apply_post,
                         delta_w_sq, distance_with_match, edwd_edge, edwd_obox, edwd_obox_batch,
                         edwd_obox_match, edwd_polygon, egwd_obox, gwd_box, kld_box, loss,
                         matching_distances, polygon_variances, smooth_l1_loss)
from ewdloss.gaussian import w2_gaussian
from ewdloss.geom import BoxDef, DirectedEdge, OBox5, Quad, rotate, shift, to_edges
from ewdloss.oracle import edwd_edge_integral, egwd_matching_oracle

EDWD = LossConfig(Variant.EDWD)
ALL_NORMS = [NormScheme("none"), NormScheme("image", 1024.0), NormScheme("anchor", 32.0),
             NormScheme("target_wh"), NormScheme("target_min"), NormScheme("target_max")]


def test_delta_w_sq():
    assert delta_w_sq(2, 0, 2, 0) == 0
    assert delta_w_sq(2, 0, 2, math.pi / 2) == pytest.approx(8)
    assert delta_w_sq(2, 0, 2, math.pi) == pytest.approx(16)


def test_egwd_examples():
    b = OBox5(0.3, -2, 4, 2, 0.7)
    assert egwd_obox(b, b) == 0
    assert egwd_obox(OBox5(0, 0, 4, 2, math.pi / 6), OBox5(0, 0, 2, 4, math.pi / 6 + math.pi / 2)) \
        == pytest.approx(0, abs=1e-12)
    assert egwd_obox(OBox5(1, 0, 2, 1, 0), OBox5(0, 0, 2, 1, 0)) == pytest.approx(4)
    assert egwd_matching_oracle(OBox5(1, 0, 2, 1, 0), OBox5(0, 0, 2, 1, 0))[0] == pytest.approx(4)


def test_egwd_quarter_turn_vs_oracle():
    a, b = OBox5(0, 0, 4, 2, 0), OBox5(0, 0, 4, 2, math.pi / 2)
    w, k = edwd_obox_match(a, b, LossConfig(Variant.EGWD, norm=NormScheme("none")))
    ow, ok = egwd_matching_oracle(a, b)
    assert w == pytest.approx(ow, rel=1e-12)
    # 4 + 4 from the two width-vs-height mismatches under the best pairing
    assert w == pytest.approx(8, rel=1e-12)


def test_egwd_is_sum_of_edge_w2(rng):
    for _ in range(200):
        a, b = random_box(rng), random_box(rng)
        ea, eb = to_edges(a).edges, to_edges(b).edges
        from ewdloss.gaussian import edge_gaussian
        best = min(sum(w2_gaussian(edge_gaussian(ea[i]), edge_gaussian(eb[(i + k) % 4])) for i in range(4))
                   for k in range(4))
        assert egwd_obox(a, b) == pytest.approx(best, rel=1e-9, abs=1e-12)


def test_egwd_equals_edwd_constant_one(rng):
    for _ in range(500):
        a, b = random_box(rng), random_box(rng)
        for norm in ALL_NORMS:
            eg = LossConfig(Variant.EGWD, norm=norm)
            ed = LossConfig(Variant.EDWD, norm=norm, variance=Variance("constant", 1.0))
            assert edwd_obox(a, b, eg) == edwd_obox(a, b, ed)


def test_egwd_ignores_variance_setting():
    cfg = LossConfig(Variant.EGWD, variance=Variance("raw_length"))
    assert cfg.variance == Variance("constant", 1.0)


@settings(max_examples=300)
@given(boxes(), boxes())
def test_egwd_symmetric_without_norm(a, b):
    assert egwd_obox(a, b) == pytest.approx(egwd_obox(b, a), rel=1e-9, abs=1e-9)


def test_target_norm_breaks_symmetry_only_through_scales():
    a, b = OBox5(0, 0, 4, 1, 0.2), OBox5(1, 0, 2, 3, 0.5)
    cfg = LossConfig(Variant.EGWD, norm=NormScheme("target_max"))
    assert edwd_obox(a, b, cfg) != pytest.approx(edwd_obox(b, a, cfg))
    # same isotropic scale on both sides restores symmetry
    fixed = LossConfig(Variant.EGWD, norm=NormScheme("image", 4.0))
    assert edwd_obox(a, b, fixed) == pytest.approx(edwd_obox(b, a, fixed), rel=1e-12)


@settings(max_examples=300)
@given(boxes(), st.integers(0, 3), st.sampled_from(ALL_NORMS),
       st.sampled_from(["aspect_ratio", "constant", "raw_length"]))
def test_reparameterisation_invariance(b, k, norm, var):
    for variant in (Variant.EGWD, Variant.EDWD):
        cfg = LossConfig(variant, norm=norm, variance=Variance(var, 0.7))
        assert edwd_obox(shift(b, k), b, cfg) < 1e-9
        assert edwd_obox(b, shift(b, k), cfg) < 1e-9


def test_edwd_variance_modes():
    t = OBox5(0, 0, 4, 1, 0)
    assert Variance().sigma2(t) == (4.0, 0.25)
    assert Variance("raw_length").sigma2(t) == (4.0, 1.0)
    assert Variance.parse("const:0.5").sigma2(t) == (0.5, 0.5)


def test_edwd_square_discriminability():
    sq = OBox5(0, 0, 3, 3, 0.1)
    cfg = LossConfig(Variant.EDWD, variance=Variance("constant", 1.0))
    for deg in (5, 15, 30, 45, 60, 85):
        p = rotate(sq, math.radians(deg))
        assert edwd_obox(p, sq, cfg) > 1e-3
        assert edwd_obox(p, sq, EDWD) > 1e-3
        assert gwd_box(p, sq) == pytest.approx(0, abs=1e-12)
        assert kld_box(p, sq) == pytest.approx(0, abs=1e-12)
    for deg in (0, 90, -90):
        assert edwd_obox(rotate(sq, math.radians(deg)), sq, EDWD) < 1e-12


def test_edwd_curve_matches_line_integral():
    # per-edge sum of the quadrature under the active matching, uniform density
    t = OBox5(0, 0, 4, 2, 0)
    cfg = LossConfig(Variant.EDWD, norm=NormScheme("none"), variance=Variance("constant", 1 / 3))
    for deg in range(-90, 91, 5):
        p = rotate(t, math.radians(deg))
        w, k = edwd_obox_match(p, t, cfg)
        ep, et = to_edges(p).edges, to_edges(t).edges
        integ = sum(edwd_edge_integral(ep[i], et[(i + k) % 4], n=3) for i in range(4))
        assert w == pytest.approx(integ, rel=1e-6, abs=1e-6)


def test_edwd_edge_closed_form():
    e1 = DirectedEdge((0, 0), (2, 0))
    e2 = DirectedEdge((0, 1), (2, 1))
    assert edwd_edge(e1, e2, 1 / 3) == pytest.approx(1.0)
    assert edwd_edge(e1, e1, 5.0) == 0


def test_gwd_kld_examples():
    assert gwd_box(OBox5(0, 0, 4, 2, 0), OBox5(2, 0, 4, 2, 0)) == pytest.approx(4)
    b = OBox5(1, 1, 4, 2, 0.3)
    assert gwd_box(b, b) == 0 and kld_box(b, b) == pytest.approx(0, abs=1e-14)
    p = OBox5(1, 0, 4, 2, 0.3)
    cfg = LossConfig(Variant.KLD, kl_reverse=True)
    assert loss(p, b, cfg) == pytest.approx(kld_box(p, b, cfg.norm, reverse=True))


def test_smooth_l1_examples():
    b = OBox5(0, 0, 2, 1, 0.2)
    assert smooth_l1_loss(b, b) == 0
    # the quadratic branch: 0.5 x^2 / beta with beta = 1 gives 0.125 at 0.5
    p = OBox5(0.5, 0, 2, 1, 0.2)
    assert smooth_l1_loss(p, b, beta=1.0) == pytest.approx(0.125)
    assert smooth_l1_loss(p, b) == pytest.approx(0.5 - 0.5 / 9)


def test_smooth_l1_min_boundary_discontinuity():
    pred = OBox5.from_degrees(0, 0, 2, 2, 10)
    eps = 1e-6
    left = smooth_l1_loss(pred, OBox5(0, 0, 2, 2, math.pi / 4 - eps))
    right = smooth_l1_loss(pred, OBox5(0, 0, 2, 2, math.pi / 4 + eps))
    assert abs(left - right) > 0.3


def test_smooth_l1_not_reparameterisation_invariant(rng):
    hits = 0
    for _ in range(100):
        b = random_box(rng)
        hits += max(smooth_l1_loss(shift(b, k), b) for k in range(4)) > 0
    assert hits == 100


def test_apply_norm_examples():
    t = OBox5(0, 0, 4, 1, 0)
    p = OBox5(1, 2, 3, 2, 0)
    n = apply_norm(p, t, NormScheme("target_wh"))
    assert n.s_center == 2 and (n.w_ratio, n.h_ratio) == (0.75, 2.0)
    n = apply_norm(p, t, NormScheme("none"))
    assert (n.dx, n.dy, n.w_ratio, n.h_ratio) == (1, 2, 3, 2)
    assert NormScheme("target_min").scales(t) == (1, 1, 1)
    with pytest.raises(ValueError):
        NormScheme("image")
    with pytest.raises(ValueError):
        NormScheme("image", -1.0)


def test_norm_parse_roundtrip():
    for text in ("none", "image:1024", "anchor:32", "target_wh", "target_min", "target_max"):
        assert str(NormScheme.parse(text)) == text


def test_apply_post_examples():
    assert apply_post(0, PostFn("log1p")) == 0
    assert apply_post(3, PostFn("sqrt")) == pytest.approx(math.sqrt(3))
    f = PostFn.parse("inv_tau:1:sqrt")
    assert f(4.0) == pytest.approx(1 - 1 / 3)
    assert PostFn.parse("inv_tau:2")(0.0) == pytest.approx(0.5)
    assert str(f) == "inv_tau:1:sqrt"
    with pytest.raises(ValueError):
        apply_post(-1, PostFn())
    with pytest.raises(ValueError):
        PostFn("inv_tau", 0.0)


@given(st.floats(0, 1e6), st.floats(0, 1e6))
def test_post_functions_monotone(a, b):
    lo, hi = min(a, b), max(a, b)
    for f in (PostFn(), PostFn("sqrt"), PostFn("log1p"), PostFn.parse("inv_tau:2:log1p")):
        assert f(lo) <= f(hi)


def test_post_preserves_argmin(rng):
    for _ in range(200):
        a, b = random_box(rng), random_box(rng)
        br = matching_distances(a, b, EDWD)
        for f in (PostFn("sqrt"), PostFn("log1p"), PostFn.parse("inv_tau:3:sqrt")):
            mapped = [f(max(x, 0.0)) for x in br]
            assert int(np.argmin(mapped)) == int(np.argmin(br))


def test_polygon_examples():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    assert edwd_polygon(sq, sq, 1.0) == 0
    assert edwd_polygon(np.roll(sq, 1, axis=0), sq, 1.0) == 0
    assert edwd_polygon(sq + [1, 0], sq, 0.0) == pytest.approx(4)
    with pytest.raises(ValueError):
        edwd_polygon(sq[:3], sq, 1.0)


def test_polygon_matches_box_form(rng):
    # constant variance, no normalisation: the quad form of a box equals the box form
    for _ in range(200):
        a, b = random_box(rng), random_box(rng)
        cfg = LossConfig(Variant.EGWD, norm=NormScheme("none"))
        qa = Quad(tuple(map(tuple, to_edges(a).vertices())))
        qb = Quad(tuple(map(tuple, to_edges(b).vertices())))
        assert loss(qa, qb, cfg) == pytest.approx(edwd_obox(a, b, cfg), rel=1e-9, abs=1e-9)


def test_polygon_aspect_variance_on_rectangle():
    t = Quad(((0, 0), (4, 0), (4, 1), (0, 1)))
    assert np.allclose(polygon_variances(t, EDWD), [4, 0.25, 4, 0.25])


def test_loss_dispatch_errors():
    b = OBox5(0, 0, 1, 1, 0)
    q = Quad(((0, 0), (1, 0), (1, 1), (0, 1)))
    with pytest.raises(ValueError):
        loss(b, q, EDWD)
    with pytest.raises(ValueError):
        loss(q, q, LossConfig(Variant.GWD))


def test_loss_zero_at_equal_inputs(rng):
    for _ in range(50):
        b = random_box(rng)
        # canonical under every box definition (w >= h, theta in [-pi/4, 0))
        b = OBox5(b.cx, b.cy, max(b.w, b.h), min(b.w, b.h), -0.3)
        for name in ("egwd", "edwd", "gwd", "kld", "smoothl1_min", "smoothl1_le"):
            for post in ("identity", "sqrt", "log1p", "inv_tau:1:sqrt"):
                cfg = LossConfig.named(name).with_(post=PostFn.parse(post))
                assert distance_with_match(b, b, cfg)[0] == pytest.approx(0, abs=1e-12)
                # sqrt lifts a 1e-16 rounding residue to ~1e-8
                assert loss(b, b, cfg) == pytest.approx(0, abs=1e-7)


def test_loss_fuzz_finite_nonnegative(rng):
    names = ("egwd", "edwd", "gwd", "kld", "smoothl1_oc", "smoothl1_le", "smoothl1_min")
    posts = ("identity", "sqrt", "log1p", "inv_tau:1", "inv_tau:2:log1p")
    for i in range(10_000):
        a, b = random_box(rng), random_box(rng)
        cfg = LossConfig.named(names[i % len(names)]).with_(
            norm=ALL_NORMS[i % len(ALL_NORMS)], post=PostFn.parse(posts[i % len(posts)]))
        v = loss(a, b, cfg)
        assert math.isfinite(v) and v >= 0


def test_config_dict_roundtrip():
    cfg = LossConfig(Variant.EDWD, norm=NormScheme("image", 800.0), post=PostFn.parse("inv_tau:2:log1p"),
                     variance=Variance("constant", 0.5))
    assert LossConfig.from_dict(cfg.to_dict()) == cfg
    assert LossConfig.named("smoothl1_le").box_def is BoxDef.LE
    with pytest.raises(ValueError):
        LossConfig.from_dict({"variant": "edwd", "colour": "red"})
    with pytest.raises(ValueError):
        LossConfig.named("iou")


def test_batch_matches_scalar(rng):
    P = np.array([random_box(rng).astuple() for _ in range(300)])
    T = np.array([random_box(rng).astuple() for _ in range(300)])
    for norm in ALL_NORMS:
        cfg = LossConfig(Variant.EDWD, norm=norm)
        W, K, _ = edwd_obox_batch(P, T, cfg)
        for i in range(len(P)):
            w, k = distance_with_match(OBox5(*P[i]), OBox5(*T[i]), cfg)
            assert W[i] == w and K[i] == k


def test_python_and_compiled_kernels_agree(rng):
    ck = pytest.importorskip("ewdloss._ckernels")
    P = np.array([random_box(rng).astuple() for _ in range(500)])
    T = np.array([random_box(rng).astuple() for _ in range(500)])
    from ewdloss.ewd import batch_coefficients
    C = batch_coefficients(T, EDWD)
    outs = []
    for mod in (ck, _pykernels):
        W, K, G = np.empty(500), np.empty(500, dtype=np.int64), np.empty((500, 5))
        mod.edwd_batch(P, T, C, W, K, G)
        outs.append((W, K, G))
    assert np.allclose(outs[0][0], outs[1][0], rtol=1e-13, atol=1e-13)
    assert np.array_equal(outs[0][1], outs[1][1])
    assert np.allclose(outs[0][2], outs[1][2], rtol=1e-12, atol=1e-12)
    for i in range(200):
        from ewdloss.geom import corners_array
        a, b = corners_array(OBox5(*P[i])), corners_array(OBox5(*T[i]))
        assert ck.convex_overlap_area(a, b) == pytest.approx(_pykernels.convex_overlap_area(a, b),
                                                              rel=1e-12, abs=1e-12)
