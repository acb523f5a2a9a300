"""Add-one costs, swap differences, and stabilization radii on finite windows.

The weak radius is computed event-by-event: the restricted complexes can only
change when the ball B(z, a) gains a point, so probing the point distances is
exact.  The strong radius is a certified UPPER BOUND: each new q-simplex is
resolved either by an F2 positivity test or by a locality certificate; the
exact stopping-time condition is not computable from a finite window.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .filtration import build, mu
from .persistence import RankQuery, boundary_masks, reduce
from .point_process import (
    BallWindow,
    Box,
    DomainError,
    PointCloud,
    RngSeed,
    sample_poisson_homogeneous,
)


@dataclass(frozen=True)
class AddOneQuery:
    P: PointCloud
    Q: np.ndarray  # (m, d) added points, disjoint from P
    q: int
    r: float
    s: float
    kind: str = "rips"

    def __post_init__(self):
        object.__setattr__(self, "Q", np.atleast_2d(np.asarray(self.Q, dtype=float)))
        if self.r > self.s:
            raise DomainError("add-one query needs r <= s")
        if self.Q.size and self.P.n:
            d2 = ((self.P.points[:, None, :] - self.Q[None, :, :]) ** 2).sum(axis=2)
            if d2.min() == 0.0:
                raise DomainError("added set must be disjoint from the base cloud")


@dataclass
class StabilizationTrace:
    """Step functions D1, D2 per homology degree, evaluated at event radii."""

    z: np.ndarray
    radii: np.ndarray  # (m,) increasing
    d1: np.ndarray  # (m, d) rows per radius, columns per q
    d2: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["a", "q", "D1", "D2"])
        for i, a in enumerate(self.radii):
            for q in range(self.d1.shape[1]):
                w.writerow([repr(float(a)), q, int(self.d1[i, q]), int(self.d2[i, q])])
        return buf.getvalue()


@dataclass(frozen=True)
class RadiusEstimate:
    value: float
    censored: bool
    margin: float


@dataclass(frozen=True)
class SwapDifferenceRecord:
    z: np.ndarray
    n: float
    r: float
    s: float
    q: int
    value: int
    geometric_bound: int


def _betti(P: PointCloud, q: int, r: float, s: float, kind: str) -> int:
    C = build(P, kind, r_max=s, q_max=q + 1)
    return reduce(C).persistent_betti(RankQuery(q, r, s))


def add_one_cost(query: AddOneQuery) -> int:
    """beta^{r,s}_q(K(P u Q)) - beta^{r,s}_q(K(P)), by two persistence runs."""
    P = query.P
    if query.Q.size == 0:
        return 0
    merged = PointCloud(np.vstack([P.points, query.Q]) if P.n else query.Q, P.window)
    return _betti(merged, query.q, query.r, query.s, query.kind) - (
        _betti(P, query.q, query.r, query.s, query.kind) if P.n else 0
    )


# ---------------------------------------------------------------------------
# Weak radius
# ---------------------------------------------------------------------------


def window_radius_around(window, z: np.ndarray) -> float:
    """Largest a with B(z, a) inside the window."""
    z = np.asarray(z, dtype=float)
    if isinstance(window, Box):
        lo = np.asarray(window.lo)
        hi = np.asarray(window.hi)
        return float(min((z - lo).min(), (hi - z).min()))
    if isinstance(window, BallWindow):
        return float(window.radius - np.linalg.norm(z - np.asarray(window.center)))
    raise DomainError(f"unsupported window type {type(window).__name__}")


class _GlobalComplex:
    """One complex on P u Q with per-cell ball radii; restrictions are prefixes
    in the (ball radius) filter while keeping the stored (time, dim) order."""

    def __init__(self, P: PointCloud, Q: np.ndarray, z: np.ndarray, kind: str, r_max: float, q_max: int):
        Q = np.atleast_2d(np.asarray(Q, dtype=float)) if np.asarray(Q).size else np.empty((0, P.d))
        pts = np.vstack([P.points, Q]) if P.n else Q
        merged = PointCloud(pts, P.window)
        self.C = build(merged, kind, r_max=r_max, q_max=q_max)
        self.masks = boundary_masks(self.C)
        dist = np.linalg.norm(pts - np.asarray(z, dtype=float), axis=1)
        self.point_dist = dist
        self.n_base = P.n
        self.cell_ball = np.array([dist[list(v)].max() for v in self.C.verts])
        self.cell_uses_q = np.array([any(i >= P.n for i in v) for v in self.C.verts])

    def pair_counts(self, a: float, with_q: bool, r: float, s: float, d: int):
        """dim Z_q(K_r) and dim(Z_q(K_r) ^ B_q(K_s)) for q < d, on the subcomplex
        of cells within B(z, a), with or without the added points."""
        C, masks = self.C, self.masks
        keep = self.cell_ball <= a
        if not with_q:
            keep = keep & ~self.cell_uses_q
        pivot_of_low: dict[int, int] = {}
        reduced: dict[int, int] = {}
        death_of: dict[int, int] = {}
        for j in np.flatnonzero(keep):
            col = masks[j]
            while col:
                low = col.bit_length() - 1
                k = pivot_of_low.get(low)
                if k is None:
                    break
                col ^= reduced[k]
            if col:
                low = col.bit_length() - 1
                pivot_of_low[low] = int(j)
                reduced[int(j)] = col
                death_of[low] = int(j)
        dim_z = np.zeros(d, dtype=int)
        dim_zb = np.zeros(d, dtype=int)
        killed = set(death_of.values())
        for i in np.flatnonzero(keep):
            i = int(i)
            if i in killed:
                continue
            q = int(C.dims[i])
            if q >= d or C.times[i] > r:
                continue
            dim_z[q] += 1
            j = death_of.get(i)
            if j is not None and C.times[j] <= s:
                dim_zb[q] += 1
        return dim_z, dim_zb


def stabilization_trace(
    P: PointCloud,
    Q: np.ndarray,
    z: np.ndarray,
    r: float,
    s: float,
    kind: str = "rips",
    window_radius: float | None = None,
) -> StabilizationTrace:
    if r > s:
        raise DomainError("weak radius needs r <= s")
    z = np.asarray(z, dtype=float)
    Q = np.atleast_2d(np.asarray(Q, dtype=float)) if np.asarray(Q).size else np.empty((0, P.d))
    if window_radius is None:
        window_radius = window_radius_around(P.window, z)
    L = float(np.linalg.norm(Q - z, axis=1).max()) if len(Q) else 0.0
    a_star = L + mu(kind, s)
    if window_radius < a_star:
        raise DomainError(f"window radius {window_radius} below a*(s) = {a_star}")

    G = _GlobalComplex(P, Q, z, kind, r_max=s, q_max=P.d)
    events = np.unique(G.point_dist[G.point_dist <= window_radius])
    probes = np.unique(np.concatenate([events, [a_star, window_radius]]))
    d = P.d
    d1 = np.zeros((len(probes), d), dtype=int)
    d2 = np.zeros((len(probes), d), dtype=int)
    for i, a in enumerate(probes):
        z_with, zb_with = G.pair_counts(a, True, r, s, d)
        z_wo, zb_wo = G.pair_counts(a, False, r, s, d)
        d1[i] = z_with - z_wo
        d2[i] = zb_with - zb_wo
    return StabilizationTrace(z, probes, d1, d2)


def weak_radius(
    P: PointCloud,
    Q: np.ndarray,
    z: np.ndarray,
    r: float,
    s: float,
    margin: float | None = None,
    kind: str = "rips",
    window_radius: float | None = None,
    return_trace: bool = False,
):
    """Smallest event radius beyond which D1 and D2 are constant for every q.

    Censored when less than `margin` (default 2 mu(s)) of constant trailing
    radius was observed inside the window.
    """
    if window_radius is None:
        window_radius = window_radius_around(P.window, z)
    if margin is None:
        margin = 2.0 * mu(kind, s)
    trace = stabilization_trace(P, Q, z, r, s, kind, window_radius)
    changed = (trace.d1 != trace.d1[-1]).any(axis=1) | (trace.d2 != trace.d2[-1]).any(axis=1)
    idx = np.flatnonzero(changed)
    value = 0.0 if len(idx) == 0 else float(trace.radii[idx[-1] + 1])
    censored = (window_radius - value) < margin
    est = RadiusEstimate(value, bool(censored), float(margin))
    return (est, trace) if return_trace else est


# ---------------------------------------------------------------------------
# Strong radius surrogate
# ---------------------------------------------------------------------------


class _Echelon:
    """Incremental F2 echelon basis supporting membership tests."""

    def __init__(self):
        self.pivots: dict[int, int] = {}

    def residual(self, v: int) -> int:
        while v:
            p = self.pivots.get(v.bit_length() - 1)
            if p is None:
                return v
            v ^= p
        return 0

    def insert(self, v: int) -> bool:
        v = self.residual(v)
        if v:
            self.pivots[v.bit_length() - 1] = v
            return True
        return False


def strong_radius_estimate(
    P: PointCloud,
    Q: np.ndarray,
    z: np.ndarray,
    r: float,
    q: int,
    kind: str = "rips",
    window_radius: float | None = None,
) -> RadiusEstimate:
    """Upper-bound surrogate for the strong stabilization radius.

    Every q-simplex of K(P u Q)_r not in K(P)_r must be resolved: certified
    positive (its boundary is spanned by boundaries of base q-cells and earlier
    new simplices inside B(z, R)) or certified permanently negative (the
    component of its star stays clear of the boundary collar of width 2 mu(r),
    so no unseen point can complete a cycle through it).  The reported horizon
    only grows under the surrogate; it dominates the exact radius.
    """
    z = np.asarray(z, dtype=float)
    Q = np.atleast_2d(np.asarray(Q, dtype=float)) if np.asarray(Q).size else np.empty((0, P.d))
    if window_radius is None:
        window_radius = window_radius_around(P.window, z)
    L = float(np.linalg.norm(Q - z, axis=1).max()) if len(Q) else 0.0
    interaction = mu(kind, r)
    a_star = L + interaction
    if window_radius < a_star:
        raise DomainError(f"window radius {window_radius} below a*(r) = {a_star}")

    G = _GlobalComplex(P, Q, z, kind, r_max=r, q_max=q + 1)
    C = G.C
    new_ids = [
        int(i)
        for i in np.flatnonzero((C.dims == q) & G.cell_uses_q)
        if G.cell_ball[i] <= a_star + 1e-12
    ]
    # every simplex through Q at parameter r sits inside B(z, a*(r))
    assert all(G.cell_ball[i] <= a_star + 1e-9 for i in np.flatnonzero((C.dims == q) & G.cell_uses_q))
    if not new_ids:
        return RadiusEstimate(float(a_star), False, 0.0)

    pts = np.vstack([P.points, Q]) if P.n else Q
    dist = G.point_dist
    if len(pts) >= 2:
        # wide query then exact filter: the tree's squared-distance compare
        # can drop pairs sitting exactly at the interaction range
        cand = cKDTree(pts).query_pairs(interaction * (1.0 + 1e-9) + 1e-12, output_type="ndarray")
        keep_pair = [float(np.linalg.norm(pts[i] - pts[j])) <= interaction for i, j in cand]
        pairs = cand[np.asarray(keep_pair, dtype=bool)] if len(cand) else cand
    else:
        pairs = np.empty((0, 2), dtype=int)
    pair_maxdist = np.maximum(dist[pairs[:, 0]], dist[pairs[:, 1]]) if len(pairs) else np.empty(0)

    horizons = np.unique(np.concatenate([dist[(dist > a_star) & (dist <= window_radius)], [a_star, window_radius]]))
    masks = G.masks
    base_q = sorted(int(i) for i in np.flatnonzero((C.dims == q) & ~G.cell_uses_q))
    unresolved = set(new_ids)
    base_ptr = 0

    for R in horizons:
        ech = _Echelon()
        for i in base_q:
            if G.cell_ball[i] <= R:
                ech.insert(masks[i])
        # union-find over points within B(z, R) for the locality certificate
        parent = list(range(len(pts)))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for k in np.flatnonzero(pair_maxdist <= R):
            a, b = int(pairs[k, 0]), int(pairs[k, 1])
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
        comp_max: dict[int, float] = {}
        for p in np.flatnonzero(dist <= R):
            rp = find(int(p))
            comp_max[rp] = max(comp_max.get(rp, 0.0), float(dist[p]))

        for i in new_ids:
            positive = ech.residual(masks[i]) == 0
            ech.insert(masks[i])
            if i not in unresolved:
                continue
            if positive:
                unresolved.discard(i)
                continue
            roots = {find(v) for v in C.verts[i]}
            if all(comp_max[rt] <= R - 2.0 * interaction for rt in roots):
                unresolved.discard(i)
        if not unresolved:
            return RadiusEstimate(float(R), False, 0.0)
    return RadiusEstimate(float(window_radius), True, 0.0)


# ---------------------------------------------------------------------------
# Swap differences
# ---------------------------------------------------------------------------


def _restrict_box(P: PointCloud, box: Box) -> PointCloud:
    keep = np.ones(P.n, dtype=bool)
    for j in range(P.d):
        keep &= (P.points[:, j] >= box.lo[j]) & (P.points[:, j] <= box.hi[j])
    return PointCloud(P.points[keep], box)


def swap_difference(
    P: PointCloud,
    P_prime: PointCloud,
    z: np.ndarray,
    n: float,
    q: int,
    r: float,
    s: float,
    kind: str = "rips",
) -> SwapDifferenceRecord:
    """Delta^{r,s}_z(B_n): persistent Betti change when the unit lattice cube at
    z is resampled from the coupled copy, both clouds cut to B_n."""
    from .point_process import lattice_cube, swap_window

    z = np.asarray(z, dtype=float)
    d = P.d
    half = n ** (1.0 / d) / 2.0
    box = Box(tuple([-half] * d), tuple([half] * d))
    cube_lo, cube_hi = lattice_cube(z)
    if any(cube_lo[j] < box.lo[j] or cube_hi[j] > box.hi[j] for j in range(d)):
        raise DomainError("the swap cube Q(z) must lie inside B_n")

    base = _restrict_box(P, box)
    swapped = _restrict_box(swap_window(P, P_prime, z), box)
    Cb = build(base, kind, r_max=s, q_max=q + 1)
    Cs = build(swapped, kind, r_max=s, q_max=q + 1)
    query = RankQuery(q, r, s)
    value = reduce(Cb).persistent_betti(query) - reduce(Cs).persistent_betti(query)

    # geometric bound: count j-simplices at parameter s present in one complex
    # but not the other, keyed by vertex coordinates
    bound = 0
    for j_dim in (q, q + 1):
        sb = {tuple(map(tuple, np.round(base.points[list(v)], 12))) for v, dd in zip(Cb.verts, Cb.dims) if dd == j_dim}
        ss = {tuple(map(tuple, np.round(swapped.points[list(v)], 12))) for v, dd in zip(Cs.verts, Cs.dims) if dd == j_dim}
        bound += len(sb ^ ss)
    return SwapDifferenceRecord(z, float(n), float(r), float(s), q, int(value), int(bound))


# ---------------------------------------------------------------------------
# Serialization and batch driver
# ---------------------------------------------------------------------------


def radius_rows_to_csv(rows: list[tuple[np.ndarray, float, float, RadiusEstimate]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["z", "r", "s", "value", "censored"])
    for z, r, s, est in rows:
        zs = ";".join(repr(float(c)) for c in np.atleast_1d(z))
        w.writerow([zs, repr(float(r)), repr(float(s)), repr(est.value), str(est.censored).lower()])
    return buf.getvalue()


def run_radius_jobs(jobs: list[dict]) -> list[tuple[np.ndarray, float, float, RadiusEstimate]]:
    """Batch driver.  Each job: mode (weak|strong), seed, stream, lambda,
    window_radius, d, r, s (weak) or q (strong), kind."""
    out = []
    for job in jobs:
        d = int(job.get("d", 2))
        w = float(job["window_radius"])
        kind = job.get("kind", "rips")
        lam = float(job.get("lambda", 1.0))
        seed = RngSeed(int(job["seed"]), int(job.get("stream", 0)))
        box = Box(tuple([-w] * d), tuple([w] * d))
        P = sample_poisson_homogeneous(lam, box, seed)
        z = np.asarray(job.get("z", [0.0] * d), dtype=float)
        Q = np.asarray(job.get("Q", [[0.0] * d]), dtype=float)
        r = float(job["r"])
        if job.get("mode", "weak") == "strong":
            est = strong_radius_estimate(P, Q, z, r, int(job["q"]), kind, window_radius=w)
            out.append((z, r, r, est))
        else:
            s = float(job["s"])
            est = weak_radius(P, Q, z, r, s, kind=kind, window_radius=w)
            out.append((z, r, s, est))
    return out


def run_radius_jobs_json(text: str) -> str:
    return radius_rows_to_csv(run_radius_jobs(json.loads(text)))
