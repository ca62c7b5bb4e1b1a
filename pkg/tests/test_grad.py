import math

import numpy as np
import pytest

from conftest import random_box
from ewdloss.ewd import LossConfig, NormScheme, PostFn, Variance, Variant, loss
from ewdloss.geom import OBox5, Quad, rotate
from ewdloss.grad import (BoxGrad, check_gradients, dW_dcos, edwd_grad, fd_gradient,
                          gradient_error, near_matching_tie, quad_value_grad)

EDWD = LossConfig(Variant.EDWD)


def test_zero_gradient_at_target(rng):
    for _ in range(50):
        b = random_box(rng)
        for variant in (Variant.EGWD, Variant.EDWD):
            g = edwd_grad(b, b, LossConfig(variant))
            assert np.all(g.asarray() == 0)


@pytest.mark.parametrize("w,h", [(1, 1), (2, 1), (1, 3), (8, 1), (0.3, 5)])
def test_dcos_constant(w, h):
    t = OBox5(0, 0, w, h, 0.2)
    for deg in (0.0, 10.0, 30.0):
        p = rotate(t, math.radians(deg))
        assert dW_dcos(p, t, EDWD) == pytest.approx(-(2 + w / h + h / w), abs=1e-10)
    if w == h:
        assert dW_dcos(rotate(t, 0.3), t, EDWD) == -4.0


def test_fd_engine_examples():
    b = OBox5(1, 0, 2, 2, 0)
    assert np.all(fd_gradient(lambda x: 3.0, b).asarray() == 0)
    g = fd_gradient(lambda x: 4 * x.cx ** 2, b, 1e-3)
    assert g.d_cx == pytest.approx(8, abs=1e-9)
    with pytest.raises(ValueError):
        fd_gradient(lambda x: 0.0, b, 0.0)


def test_random_triples_match_fd():
    rep = check_gradients(2000, seed=3)
    assert rep.ok(), rep.failures[:1]
    assert all(rep.checked[n] > 500 for n in ("egwd", "edwd"))
    assert max(rep.max_error.values()) < 1e-6


def test_corrupted_gradient_is_caught():
    def wrong(p, t, cfg):
        g = edwd_grad(p, t, cfg)
        return BoxGrad(g.d_cx, g.d_cy, g.d_w, g.d_h, 1.01 * g.d_theta + 1e-3)
    assert not check_gradients(200, seed=0, grad_fn=wrong).ok()


def test_sqrt_at_zero_is_flagged():
    b = OBox5(2, 3, 4, 1, 0.5)
    g = edwd_grad(b, b, EDWD.with_(post=PostFn("sqrt")))
    assert g.degenerate and np.all(g.asarray() == 0)
    assert not edwd_grad(OBox5(2.1, 3, 4, 1, 0.5), b, EDWD.with_(post=PostFn("sqrt"))).degenerate


def test_post_chain_rule():
    p, t = OBox5(1, 0, 3, 1, 0.4), OBox5(0, 0, 2, 1, 0.1)
    base = edwd_grad(p, t, EDWD).asarray()
    w = loss(p, t, EDWD)
    assert np.allclose(edwd_grad(p, t, EDWD.with_(post=PostFn("log1p"))).asarray(), base / (1 + w))
    assert np.allclose(edwd_grad(p, t, EDWD.with_(post=PostFn("sqrt"))).asarray(), base * 0.5 / math.sqrt(w))


def test_square_angle_gradient():
    sq = OBox5(0, 0, 1, 1, 0)
    for deg in (5, 15, 30, 45, 60, 85):
        p = rotate(sq, math.radians(deg))
        assert abs(edwd_grad(p, sq, EDWD).d_theta) > 1e-3
        for name in ("gwd", "kld"):
            cfg = LossConfig.named(name)
            assert abs(fd_gradient(lambda b: loss(b, sq, cfg), p, 1e-5).d_theta) < 1e-8


def test_tie_uses_smallest_k():
    sq = OBox5(0, 0, 2, 2, 0)
    p = rotate(sq, math.pi / 4)
    g = edwd_grad(p, sq, EDWD)
    assert g.k == 0
    assert near_matching_tie(p, sq, EDWD)
    assert not near_matching_tie(rotate(sq, 0.2), sq, EDWD)


def test_scale_responsiveness():
    t = OBox5(3, -2, 6, 2, 0.3)
    p = OBox5(4, -1, 5, 2.5, 0.6)
    half_t = OBox5(1.5, -1, 3, 1, 0.3)
    half_p = OBox5(2, -0.5, 2.5, 1.25, 0.6)
    wh = LossConfig(Variant.EDWD, norm=NormScheme("target_wh"))
    g, gh = edwd_grad(p, t, wh).asarray(), edwd_grad(half_p, half_t, wh).asarray()
    # gradient w.r.t. normalised lengths (raw gradient times scale) is unchanged
    assert np.allclose(gh[:4], 2 * g[:4], rtol=1e-12)
    assert gh[4] == pytest.approx(g[4], rel=1e-12)
    raw = LossConfig(Variant.EDWD, norm=NormScheme("none"))
    g, gh = edwd_grad(p, t, raw).asarray(), edwd_grad(half_p, half_t, raw).asarray()
    assert np.allclose(gh[:4], 0.5 * g[:4], rtol=1e-12)
    assert not np.allclose(gh[:4], 2 * g[:4])


def test_baseline_variants_rejected():
    b = OBox5(0, 0, 1, 1, 0)
    with pytest.raises(ValueError):
        edwd_grad(b, b, LossConfig.named("gwd"))


def test_gradient_error_scaling():
    assert gradient_error(np.zeros(5), np.zeros(5)) == 0
    assert gradient_error(np.array([1e-6, 0, 0, 0, 0]), np.zeros(5)) == pytest.approx(1e-4)
    assert gradient_error(np.array([101.0, 0, 0, 0, 0]), np.array([100.0, 0, 0, 0, 0])) == pytest.approx(0.01)


def test_quad_gradient_matches_fd(rng):
    for _ in range(100):
        t = np.array([[0, 0], [5, 0.5], [5.5, 3], [-0.5, 2.5]]) + rng.normal(0, 0.3, (4, 2))
        p = t + rng.normal(0, 1.0, (4, 2))
        cfg = LossConfig.named(str(rng.choice(["edwd", "egwd"]))).with_(
            post=PostFn(str(rng.choice(["identity", "log1p"]))),
            norm=NormScheme(str(rng.choice(["none", "target_wh", "target_max"]))))
        val, k, g = quad_value_grad(p, Quad.clockwise(t).asarray(), cfg)
        tq = Quad.clockwise(t).asarray()
        assert val == pytest.approx(loss(p, tq, cfg), rel=1e-12)
        fd = np.zeros_like(p)
        for i in range(4):
            for j in range(2):
                a, b = p.copy(), p.copy()
                a[i, j] += 1e-6
                b[i, j] -= 1e-6
                fd[i, j] = (loss(a, tq, cfg) - loss(b, tq, cfg)) / 2e-6
        assert gradient_error(g.ravel(), fd.ravel()) < 1e-4
