import math

import numpy as np
import pytest

from pslab.filtration import build, build_cech, build_rips, count_new_simplices
from pslab.persistence import (
    CapError,
    RankQuery,
    boundary_masks,
    connected_component_count,
    diagram_from_csv,
    persistent_betti_direct,
    rank_queries_from_csv,
    reduce,
)
from pslab.point_process import Box, DomainError, PointCloud, RngSeed, sample_poisson_homogeneous, unit_box

SQUARE = PointCloud(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]), unit_box(2))
RT2 = math.sqrt(2.0)


def _pairs(D, q):
    return sorted(
        (float(b), float(d)) for qq, b, d in zip(D.qs, D.births, D.deaths) if qq == q
    )


def test_single_vertex_diagram():
    P = PointCloud(np.array([[0.0, 0.0]]), unit_box(2))
    D = reduce(build_rips(P, r_max=1.0, q_max=1))
    assert _pairs(D, 0) == [(0.0, math.inf)]


def test_square_rips_diagram():
    D = reduce(build_rips(SQUARE, r_max=2.0, q_max=2))
    h0 = _pairs(D, 0)
    assert h0 == pytest.approx([(0.0, 1.0)] * 3 + [(0.0, math.inf)])
    h1 = [(b, d) for b, d in _pairs(D, 1) if d > b]
    assert h1 == pytest.approx([(1.0, RT2)])


def test_square_cech_diagram():
    D = reduce(build_cech(SQUARE, r_max=1.0, q_max=2))
    h1 = [(b, d) for b, d in _pairs(D, 1) if d > b]
    assert h1 == pytest.approx([(0.5, RT2 / 2.0)])


def test_clearing_agrees_bit_for_bit():
    rng = np.random.default_rng(31)
    for _ in range(20):
        P = PointCloud(rng.random((10, 2)), unit_box(2))
        for kind in ("rips", "cech"):
            C = build(P, kind, r_max=1.0, q_max=2)
            D1, D2 = reduce(C, clearing=False), reduce(C, clearing=True)
            assert np.array_equal(D1.qs, D2.qs)
            assert np.array_equal(D1.births, D2.births)
            assert np.array_equal(D1.deaths, D2.deaths)


def test_boundary_of_boundary_vanishes():
    C = build_rips(SQUARE, r_max=2.0, q_max=3)
    masks = boundary_masks(C)
    for j in range(C.n_cells):
        acc = 0
        col = masks[j]
        while col:
            low = col.bit_length() - 1
            acc ^= masks[low]
            col ^= 1 << low
        assert acc == 0


def test_rectangle_rule_examples():
    D = reduce(build_rips(SQUARE, r_max=2.0, q_max=2))
    assert D.persistent_betti(RankQuery(1, 1.0, 1.2)) == 1
    assert D.persistent_betti(RankQuery(1, 0.9, 1.2)) == 0
    assert D.persistent_betti(RankQuery(1, 1.0, RT2)) == 0
    # r = s = r_max gives the ordinary Betti numbers of the full complex
    assert D.persistent_betti(RankQuery(0, 2.0, 2.0)) == 1
    assert D.persistent_betti(RankQuery(1, 2.0, 2.0)) == 0


def test_isolated_points_rank():
    P = PointCloud(np.array([[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]]), Box((0.0, 0.0), (6.0, 6.0)))
    D = reduce(build_rips(P, r_max=1.0, q_max=1))
    assert D.persistent_betti(RankQuery(0, 0.0, 0.0)) == 3


def test_query_validation():
    D = reduce(build_rips(SQUARE, r_max=2.0, q_max=2))
    with pytest.raises(DomainError):
        RankQuery(1, 1.5, 1.0)
    with pytest.raises(CapError):
        D.persistent_betti(RankQuery(1, 1.0, 2.5))


def test_direct_oracle_square():
    C = build_rips(SQUARE, r_max=2.0, q_max=2)
    assert persistent_betti_direct(C, RankQuery(1, 1.0, 1.2)) == 1
    empty = build_rips(PointCloud(np.array([[0.0, 0.0]]), unit_box(2)), r_max=1.0, q_max=1)
    assert persistent_betti_direct(empty, RankQuery(1, 0.5, 0.5)) == 0


def test_oracle_cross_check_random_clouds():
    rng = np.random.default_rng(32)
    for _ in range(30):
        P = PointCloud(rng.random((8, 2)), unit_box(2))
        for kind in ("rips", "cech"):
            C = build(P, kind, r_max=0.9, q_max=2)
            D = reduce(C)
            times = sorted(set(np.round(C.event_times(), 12))) or [0.0]
            probe = times[:: max(1, len(times) // 4)]
            for q in (0, 1):
                for ir, r in enumerate(probe):
                    for s in probe[ir:]:
                        query = RankQuery(q, float(r), float(s))
                        assert D.persistent_betti(query) == persistent_betti_direct(C, query)


def test_monotonicity_in_r_and_s():
    rng = np.random.default_rng(33)
    P = PointCloud(rng.random((12, 2)), unit_box(2))
    D = reduce(build_rips(P, r_max=1.0, q_max=2))
    grid = np.linspace(0.0, 1.0, 6)
    for q in (0, 1):
        for s in grid:
            vals = [D.persistent_betti(RankQuery(q, r, s)) for r in grid if r <= s]
            assert vals == sorted(vals)
        for r in grid:
            vals = [D.persistent_betti(RankQuery(q, r, s)) for s in grid if s >= r]
            assert vals == sorted(vals, reverse=True)


def test_euler_characteristic():
    rng = np.random.default_rng(34)
    P = PointCloud(rng.random((10, 2)), unit_box(2))
    C = build_rips(P, r_max=1.5, q_max=2)
    D = reduce(C)
    for r in sorted(set(C.event_times())):
        chi_cells = sum(
            (-1) ** int(C.dims[i]) for i in range(C.n_cells) if C.times[i] <= r
        )
        # q_max = 2 retains 2-cells whose positive classes are unobservable;
        # count them directly as cycles minus boundaries at top dimension
        betti = [D.persistent_betti(RankQuery(q, float(r), float(r))) for q in (0, 1)]
        chi_homology = betti[0] - betti[1] + _top_betti(C, 2, float(r))
        assert chi_cells == chi_homology


def _top_betti(C, q, r):
    masks = boundary_masks(C)
    cols = [masks[i] for i in range(C.n_cells) if C.dims[i] == q and C.times[i] <= r]
    pivots = {}
    rank = 0
    for col in cols:
        while col:
            low = col.bit_length() - 1
            if low in pivots:
                col ^= pivots[low]
            else:
                pivots[low] = col
                rank += 1
                break
    return len(cols) - rank


def test_connected_components():
    P = PointCloud(np.array([[0.0, 0.0], [0.9, 0.0], [1.8, 0.0]]), Box((0.0, 0.0), (2.0, 2.0)))
    assert connected_component_count(P, 0.0) == 3
    assert connected_component_count(P, 0.9) == 1
    empty = PointCloud(np.empty((0, 2)), unit_box(2))
    assert connected_component_count(empty, 1.0) == 0
    rng = np.random.default_rng(35)
    for _ in range(10):
        Q = PointCloud(rng.random((15, 2)), unit_box(2))
        D = reduce(build_rips(Q, r_max=1.5, q_max=1))
        for t in (0.1, 0.25, 0.4):
            assert connected_component_count(Q, t) == D.persistent_betti(RankQuery(0, t, t))


def test_geometric_bound_on_rank_difference():
    rng = np.random.default_rng(36)
    for _ in range(50):
        pts = rng.random((12, 2))
        k = rng.integers(4, 11)
        X = PointCloud(pts[:k], unit_box(2))
        Y = PointCloud(pts, unit_box(2))
        r, s = sorted(rng.uniform(0.1, 0.8, 2))
        for q in (0, 1):
            bx = reduce(build_rips(X, r_max=s, q_max=q + 1)).persistent_betti(RankQuery(q, r, s))
            by = reduce(build_rips(Y, r_max=s, q_max=q + 1)).persistent_betti(RankQuery(q, r, s))
            bound = count_new_simplices(X, Y, s, q, "rips") + count_new_simplices(X, Y, s, q + 1, "rips")
            assert abs(by - bx) <= bound


def test_translation_scaling_invariance_of_ranks():
    rng = np.random.default_rng(37)
    P = PointCloud(rng.random((10, 2)), unit_box(2))
    D = reduce(build_rips(P, r_max=1.0, q_max=2))
    Dt = reduce(build_rips(P.translate([3.0, 4.0]), r_max=1.0, q_max=2))
    Ds = reduce(build_rips(P.scale(2.0), r_max=2.0, q_max=2))
    for q in (0, 1):
        for r, s in [(0.2, 0.5), (0.4, 0.4), (0.3, 0.9)]:
            v = D.persistent_betti(RankQuery(q, r, s))
            assert Dt.persistent_betti(RankQuery(q, r, s)) == v
            assert Ds.persistent_betti(RankQuery(q, 2 * r, 2 * s)) == v


def test_diagram_csv_roundtrip():
    D = reduce(build_rips(SQUARE, r_max=2.0, q_max=2))
    text = D.to_csv()
    assert text.splitlines()[0] == "q,birth,death"
    back = diagram_from_csv(text, kind="rips", q_max=2, r_max=2.0)
    assert np.array_equal(back.qs, D.qs)
    assert np.array_equal(back.births, D.births)
    assert np.array_equal(back.deaths, D.deaths)


def test_rank_queries_csv():
    queries = rank_queries_from_csv("q,r,s\n1,0.5,0.7\n0,0.0,0.0\n")
    assert queries == [RankQuery(1, 0.5, 0.7), RankQuery(0, 0.0, 0.0)]


def test_infinite_pairs_count_betti_at_cap():
    rng = np.random.default_rng(38)
    P = PointCloud(rng.random((12, 2)), unit_box(2))
    C = build_rips(P, r_max=1.5, q_max=2)
    D = reduce(C)
    n_inf = int(np.count_nonzero((D.qs == 0) & np.isinf(D.deaths)))
    assert n_inf == D.persistent_betti(RankQuery(0, 1.5, 1.5))
