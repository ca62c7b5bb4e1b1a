import math

import numpy as np
import pytest

from conftest import random_box
from ewdloss.ewd import edwd_edge, egwd_obox, edwd_obox_batch, LossConfig, Variant, NormScheme
from ewdloss.gaussian import Gauss2, edge_gaussian
from ewdloss.geom import DirectedEdge, OBox5, shift, to_edges
from ewdloss.oracle import (MAX_LP_ATOMS, PointCloud, check_symmetric_density, coupled_cloud_cost,
                            density_variance, discrete_ot, edge_point_cloud, edwd_edge_integral,
                            egwd_matching_oracle, egwd_matching_oracle_batch, uniform_density,
                            w2_gaussian_numeric)


def test_w2_numeric_trivial():
    g = Gauss2((1, 1), [[2, 0.5], [0.5, 1]])
    assert w2_gaussian_numeric(g, g) == pytest.approx(0, abs=1e-12)
    z = np.zeros((2, 2))
    assert w2_gaussian_numeric(Gauss2((0, 0), z), Gauss2((1, 2), z)) == pytest.approx(5)
    e1 = edge_gaussian(DirectedEdge((0, 0), (2, 0)))
    assert w2_gaussian_numeric(e1, e1) == 0


def test_uniform_density_variance():
    assert density_variance(uniform_density) == pytest.approx(1 / 3, rel=1e-12)


def test_edge_integral_examples():
    e = DirectedEdge((0, 0), (3, 1))
    assert edwd_edge_integral(e, e) == 0
    par = DirectedEdge((0, 2), (3, 3))
    assert edwd_edge_integral(e, par) == pytest.approx(4, abs=1e-12)
    a, b = DirectedEdge((-1, 0), (1, 0)), DirectedEdge((0, -1), (0, 1))
    assert edwd_edge_integral(a, b, n=10_000, rule="trapezoid") == pytest.approx(
        edwd_edge(a, b, 1 / 3), abs=1e-6)


def test_edge_integral_errors():
    e = DirectedEdge((0, 0), (1, 0))
    with pytest.raises(ValueError):
        edwd_edge_integral(e, e, density=lambda x: 0.5 + 0.1 * np.asarray(x))
    with pytest.raises(ValueError):
        edwd_edge_integral(e, e, n=4)
    with pytest.raises(ValueError):
        edwd_edge_integral(e, e, n=2, rule="trapezoid")
    check_symmetric_density(lambda x: 0.75 * (1 - np.asarray(x) ** 2))


def test_simpson_exact_for_other_symmetric_density():
    # Epanechnikov density has variance 1/5; its integrand is degree 4, so use many points
    dens = lambda x: 0.75 * (1 - np.asarray(x, float) ** 2)
    a, b = DirectedEdge((0, 0), (4, 1)), DirectedEdge((1, 1), (0, 3))
    assert edwd_edge_integral(a, b, dens, n=2001) == pytest.approx(edwd_edge(a, b, 0.2), rel=1e-10)


def test_trapezoid_convergence_rate():
    a, b = DirectedEdge((0, 0), (4, 1)), DirectedEdge((1, 1), (-2, 3))
    exact = edwd_edge(a, b, 1 / 3)
    errs = [abs(edwd_edge_integral(a, b, n=n, rule="trapezoid") - exact) for n in (11, 21, 41, 81)]
    ratios = [errs[i] / errs[i + 1] for i in range(3)]
    assert all(3.5 < r < 4.5 for r in ratios)


def test_point_cloud_validation():
    with pytest.raises(ValueError):
        PointCloud([[0, 0], [1, 1]], [0.7, 0.7])
    with pytest.raises(ValueError):
        PointCloud([[0, 0]], [0.5, 0.5])


def test_discrete_ot_examples(rng):
    p = PointCloud.uniform(rng.normal(size=(8, 2)))
    assert discrete_ot(p, p) == pytest.approx(0, abs=1e-12)
    assert discrete_ot(PointCloud.uniform([[0, 0]]), PointCloud.uniform([[3, 4]])) == pytest.approx(25)


def test_lp_path_matches_assignment(rng):
    p = PointCloud.uniform(rng.normal(size=(10, 2)))
    q = PointCloud.uniform(rng.normal(size=(10, 2)))
    # unequal weights force the transport LP
    qw = PointCloud(q.points, np.r_[0.05, np.full(9, 0.95 / 9)])
    assert discrete_ot(p, q) <= coupled_cloud_cost(p, q) + 1e-12
    assert discrete_ot(p, qw) >= 0
    rep = PointCloud(np.repeat(q.points, 2, axis=0), np.full(20, 0.05))
    assert discrete_ot(p, rep) == pytest.approx(discrete_ot(p, q), rel=1e-9)


def test_ot_size_limit(rng):
    big = PointCloud.uniform(rng.normal(size=(MAX_LP_ATOMS + 1, 2)))
    small = PointCloud.uniform(rng.normal(size=(3, 2)))
    with pytest.raises(ValueError, match="atoms"):
        discrete_ot(big, small)


def test_parallel_segments_bound():
    a, b = DirectedEdge((0, 0), (4, 0)), DirectedEdge((1, 2), (5, 2))
    ot = discrete_ot(edge_point_cloud(a), edge_point_cloud(b))
    assert ot <= edwd_edge(a, b, 1 / 3) + 1e-12


def test_egwd_oracle_trivial(rng):
    b = random_box(rng)
    assert egwd_matching_oracle(b, b) == (pytest.approx(0, abs=1e-12), 0)
    w, k = egwd_matching_oracle(shift(b, 1), b)
    assert w == pytest.approx(0, abs=1e-9)


def test_egwd_oracle_batch_agrees(rng):
    a = np.array([random_box(rng).astuple() for _ in range(2000)])
    b = np.array([random_box(rng).astuple() for _ in range(2000)])
    ow, ok = egwd_matching_oracle_batch(a, b)
    cw, ck, _ = edwd_obox_batch(a, b, LossConfig(Variant.EGWD, norm=NormScheme("none")))
    assert np.max(np.abs(ow - cw) / np.maximum(np.abs(ow), 1e-3)) < 1e-9
    assert np.array_equal(ok, ck)
    for i in range(50):
        assert egwd_matching_oracle(OBox5(*a[i]), OBox5(*b[i]))[0] == pytest.approx(ow[i], rel=1e-12, abs=1e-12)


def test_oracle_argmin_survives_monotone_post(rng):
    for _ in range(100):
        a, b = random_box(rng), random_box(rng)
        ga = [edge_gaussian(e) for e in to_edges(a).edges]
        gb = [edge_gaussian(e) for e in to_edges(b).edges]
        totals = [sum(w2_gaussian_numeric(ga[i], gb[(i + k) % 4]) for i in range(4)) for k in range(4)]
        assert int(np.argmin(np.log1p(totals))) == egwd_matching_oracle(a, b)[1]
        assert int(np.argmin(np.sqrt(totals))) == egwd_matching_oracle(a, b)[1]
