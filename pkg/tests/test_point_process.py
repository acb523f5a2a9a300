import numpy as np
import pytest

from pslab.point_process import (
    BlockedDensity,
    Box,
    Density,
    DomainError,
    PointCloud,
    RngSeed,
    cloud_from_csv,
    constant_density,
    in_lattice_cube,
    sample_binomial,
    sample_poisson_homogeneous,
    sample_poisson_inhomogeneous,
    swap_window,
    unit_box,
)


def test_poisson_zero_intensity_is_empty():
    P = sample_poisson_homogeneous(0.0, unit_box(2), RngSeed(1, 0))
    assert P.n == 0


def test_poisson_negative_intensity_rejected():
    with pytest.raises(DomainError):
        sample_poisson_homogeneous(-1.0, unit_box(2), RngSeed(1, 0))


def test_poisson_mean_count():
    box = Box((0.0, 0.0), (10.0, 10.0))
    counts = [sample_poisson_homogeneous(1.0, box, RngSeed(7, i)).n for i in range(1000)]
    mean = np.mean(counts)
    # Poisson(100): 3 standard errors of the MC mean around 100
    assert 97.0 <= mean <= 103.0


def test_poisson_equidispersion():
    box = Box((0.0, 0.0), (5.0, 5.0))
    counts = np.array([sample_poisson_homogeneous(2.0, box, RngSeed(8, i)).n for i in range(1000)])
    ratio = counts.var(ddof=1) / counts.mean()
    assert 0.85 <= ratio <= 1.15


def test_poisson_disjoint_boxes_uncorrelated():
    box = Box((0.0, 0.0), (2.0, 1.0))
    left, right = [], []
    for i in range(2000):
        P = sample_poisson_homogeneous(1.0, box, RngSeed(9, i))
        inside_left = P.points[:, 0] < 1.0
        left.append(int(inside_left.sum()))
        right.append(int((~inside_left).sum()))
    corr = np.corrcoef(left, right)[0, 1]
    assert abs(corr) <= 0.07


def test_inhomogeneous_constant_matches_homogeneous_mean():
    counts = [sample_poisson_inhomogeneous(constant_density(2), 100.0, RngSeed(10, i)).n for i in range(500)]
    mean = np.mean(counts)
    se = np.std(counts, ddof=1) / np.sqrt(500)
    assert abs(mean - 100.0) <= 3 * se + 1e-9


def test_blocked_cell_mean_count():
    blocked = BlockedDensity(2, 2, (2.0, 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0))
    dens = blocked.as_density()
    counts = []
    for i in range(500):
        P = sample_poisson_inhomogeneous(dens, 300.0, RngSeed(11, i))
        counts.append(int((blocked.cell_index(P.points) == 0).sum()) if P.n else 0)
    mean = np.mean(counts)
    se = np.std(counts, ddof=1) / np.sqrt(500)
    assert abs(mean - 150.0) <= 3 * se


def test_coupling_determinism():
    dens = constant_density(2)
    A = sample_poisson_inhomogeneous(dens, 50.0, RngSeed(12, 3))
    B = sample_poisson_inhomogeneous(dens, 50.0, RngSeed(12, 3))
    assert np.array_equal(A.points, B.points)


def test_coupling_monotonicity():
    # kappa <= kappa' pointwise with shared sup_bound: the smaller-intensity
    # cloud must be a subset of the larger one (thinning construction)
    lo = Density(2, "callable", 1.0, 0.5, lambda x: np.full(x.shape[0], 0.5))
    hi = Density(2, "callable", 1.0, 1.0, lambda x: np.ones(x.shape[0]))
    for i in range(20):
        A = sample_poisson_inhomogeneous(lo, 80.0, RngSeed(13, i))
        B = sample_poisson_inhomogeneous(hi, 80.0, RngSeed(13, i))
        sa = {tuple(p) for p in A.points}
        sb = {tuple(p) for p in B.points}
        assert sa <= sb


def test_binomial_cardinality():
    assert sample_binomial(0, constant_density(2), RngSeed(14, 0)).n == 0
    assert sample_binomial(7, constant_density(2), RngSeed(14, 1)).n == 7


def test_binomial_uniformity():
    from scipy.stats import chi2

    crit = chi2.ppf(0.999, 15)
    dens = constant_density(2)
    ok = 0
    for i in range(200):
        P = sample_binomial(500, dens, RngSeed(15, i))
        idx = np.clip((P.points * 4).astype(int), 0, 3)
        obs = np.bincount(idx[:, 0] * 4 + idx[:, 1], minlength=16)
        stat = ((obs - 500 / 16.0) ** 2 / (500 / 16.0)).sum()
        ok += stat < crit
    assert ok >= 190


def test_blocked_normalization_enforced():
    with pytest.raises(DomainError):
        BlockedDensity(2, 2, (1.0, 1.0, 1.0, 2.0))


def test_swap_self_identity():
    P = sample_poisson_homogeneous(1.0, Box((-3.0, -3.0), (3.0, 3.0)), RngSeed(16, 0))
    S = swap_window(P, P, (0.0, 0.0))
    assert {tuple(p) for p in S.points} == {tuple(p) for p in P.points}


def test_swap_cardinality():
    box = Box((-3.0, -3.0), (3.0, 3.0))
    P = PointCloud(np.array([[0.0, 0.0], [0.1, 0.2], [-0.3, 0.4], [2.0, 2.0]]), box)
    P_prime = PointCloud(np.array([[2.5, 2.5]]), box)
    S = swap_window(P, P_prime, (0.0, 0.0))
    assert S.n == P.n - 3


def test_swap_membership_oracle():
    box = Box((-3.0, -3.0), (3.0, 3.0))
    rng = np.random.default_rng(17)
    for _ in range(25):
        P = PointCloud(rng.uniform(-3, 3, (30, 2)), box)
        Pp = PointCloud(rng.uniform(-3, 3, (30, 2)), box)
        z = rng.integers(-2, 3, 2).astype(float)
        S = swap_window(P, Pp, z)
        outside = {tuple(p) for p in P.points[~in_lattice_cube(P.points, z)]}
        swapped = {tuple(p) for p in Pp.points[in_lattice_cube(Pp.points, z)]}
        assert {tuple(p) for p in S.points} == outside | swapped


def test_lattice_cube_half_open():
    pts = np.array([[0.5, 0.0], [-0.5, 0.0], [0.0, 0.5], [0.0, -0.5]])
    inside = in_lattice_cube(pts, (0.0, 0.0))
    # Q(0) = (-1/2, 1/2]^2: upper faces in, lower faces out
    assert list(inside) == [True, False, True, False]


def test_sampling_determinism():
    box = Box((0.0, 0.0), (4.0, 4.0))
    A = sample_poisson_homogeneous(1.5, box, RngSeed(18, 2))
    B = sample_poisson_homogeneous(1.5, box, RngSeed(18, 2))
    assert np.array_equal(A.points, B.points)
    assert not np.array_equal(
        A.points, sample_poisson_homogeneous(1.5, box, RngSeed(18, 3)).points
    )


def test_cloud_csv_roundtrip():
    P = sample_poisson_homogeneous(1.0, Box((0.0, 0.0), (3.0, 3.0)), RngSeed(19, 0))
    text = P.to_csv()
    assert text.splitlines()[0] == "x0,x1"
    Q = cloud_from_csv(text, P.window)
    assert np.array_equal(P.points, Q.points)


def test_cloud_rejects_nonfinite():
    with pytest.raises(DomainError):
        PointCloud(np.array([[0.0, np.inf]]), unit_box(2))
