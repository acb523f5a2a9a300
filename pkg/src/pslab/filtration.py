"""Vietoris-Rips and Cech filtered complexes over finite point clouds.

A filtered complex stores every simplex of dimension <= q_max whose entry time
is <= r_max, ordered by (time, dimension, lexicographic vertex tuple).  Entry
times: Rips uses the diameter of the simplex, Cech the radius of the smallest
enclosing ball of its vertices.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .point_process import BallWindow, DomainError, PointCloud

MB_TOL = 1e-9


def mu(kind: str, r: float) -> float:
    """Upper bound on the diameter of a simplex alive at filtration time r."""
    if kind == "rips":
        return r
    if kind == "cech":
        return 2.0 * r
    raise DomainError(f"unknown filtration kind {kind!r}")


# ---------------------------------------------------------------------------
# Smallest enclosing ball
# ---------------------------------------------------------------------------


def _circumball(R: list[np.ndarray]) -> tuple[np.ndarray, float]:
    """Smallest ball with all points of R on its boundary (R affinely small)."""
    p0 = R[0]
    if len(R) == 1:
        return p0, 0.0
    A = 2.0 * (np.asarray(R[1:]) - p0)
    b = np.einsum("ij,ij->i", np.asarray(R[1:]) - p0, np.asarray(R[1:]) - p0)
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    c = p0 + sol
    r = max(float(np.linalg.norm(p - c)) for p in R)
    return c, r


def _welzl(pts: list[np.ndarray], boundary: list[np.ndarray], d: int):
    if not pts or len(boundary) == d + 1:
        if not boundary:
            return None
        return _circumball(boundary)
    p = pts[-1]
    ball = _welzl(pts[:-1], boundary, d)
    if ball is not None:
        c, r = ball
        if np.linalg.norm(p - c) <= r + MB_TOL * (1.0 + r):
            return ball
    return _welzl(pts[:-1], boundary + [p], d)


def miniball(points) -> tuple[np.ndarray, float]:
    """Center and radius of the smallest enclosing ball of a nonempty point set."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise DomainError("miniball of an empty point set")
    n, d = pts.shape
    if n == 1:
        return pts[0].copy(), 0.0
    if n == 2:
        return _mb2(pts[0], pts[1])
    if n == 3:
        return _mb3(pts[0], pts[1], pts[2])
    order = np.random.default_rng(0).permutation(n)
    if n + 50 > sys.getrecursionlimit():
        sys.setrecursionlimit(2 * n + 100)
    ball = _welzl([pts[i] for i in order], [], d)
    assert ball is not None
    return ball


def _mb2(p, q) -> tuple[np.ndarray, float]:
    c = 0.5 * (p + q)
    return c, float(np.linalg.norm(p - c))


def _mb3(p, q, r) -> tuple[np.ndarray, float]:
    best = None
    for a, b, other in ((p, q, r), (p, r, q), (q, r, p)):
        c, rad = _mb2(a, b)
        if np.linalg.norm(other - c) <= rad + MB_TOL * (1.0 + rad):
            if best is None or rad < best[1]:
                best = (c, rad)
    if best is not None:
        return best
    return _circumball([p, q, r])


def _simplex_time(kind: str, coords: np.ndarray, verts: tuple[int, ...], diam: float) -> float:
    if kind == "rips":
        return diam
    sub = coords[list(verts)]
    if len(verts) == 2:
        return diam / 2.0
    return miniball(sub)[1] if len(verts) > 3 else _mb3(sub[0], sub[1], sub[2])[1]


# ---------------------------------------------------------------------------
# Filtered complex
# ---------------------------------------------------------------------------


@dataclass
class FilteredComplex:
    d: int
    kind: str  # cech | rips
    q_max: int
    r_max: float
    verts: list[tuple[int, ...]]  # sorted vertex tuples, one per cell
    times: np.ndarray  # float entry times, aligned with verts
    dims: np.ndarray  # simplex dimensions, aligned with verts
    vertex_coords: np.ndarray

    @property
    def n_cells(self) -> int:
        return len(self.verts)

    def cell_index(self) -> dict[tuple[int, ...], int]:
        return {v: i for i, v in enumerate(self.verts)}

    def event_times(self) -> np.ndarray:
        return np.unique(self.times)

    def count_cells(self, q: int, r: float) -> int:
        return int(np.count_nonzero((self.dims == q) & (self.times <= r)))

    def to_text(self) -> str:
        lines = []
        for v, t, q in zip(self.verts, self.times, self.dims):
            lines.append(" ".join([repr(float(t)), str(int(q))] + [str(i) for i in v]))
        return "\n".join(lines) + ("\n" if lines else "")


def complex_from_text(text: str, d: int, kind: str, q_max: int, r_max: float,
                      vertex_coords: np.ndarray | None = None) -> FilteredComplex:
    verts: list[tuple[int, ...]] = []
    times: list[float] = []
    dims: list[int] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        parts = line.split()
        times.append(float(parts[0]))
        dims.append(int(parts[1]))
        verts.append(tuple(int(x) for x in parts[2:]))
    coords = vertex_coords if vertex_coords is not None else np.empty((0, d))
    return FilteredComplex(d, kind, q_max, r_max, verts, np.asarray(times), np.asarray(dims, dtype=int), coords)


def _forward_neighbors(pts: np.ndarray, cutoff: float) -> list[np.ndarray]:
    """nbrs[i] = sorted array of j > i with ||p_i - p_j|| <= cutoff."""
    n = pts.shape[0]
    nbrs: list[list[int]] = [[] for _ in range(n)]
    if n >= 2 and cutoff > 0:
        # query slightly wide: the tree compares squared distances, which can
        # disagree by 1 ulp with the norms used for filtration times
        pairs = cKDTree(pts).query_pairs(cutoff * (1.0 + 1e-9) + 1e-12, output_type="ndarray")
        for i, j in pairs:
            a, b = (int(i), int(j)) if i < j else (int(j), int(i))
            if float(np.linalg.norm(pts[a] - pts[b])) <= cutoff:
                nbrs[a].append(b)
    return [np.array(sorted(v), dtype=int) for v in nbrs]


def _build(P: PointCloud, kind: str, r_max: float, q_max: int,
           tie_break: str = "lex", tie_seed: int = 0) -> FilteredComplex:
    if r_max < 0:
        raise DomainError("r_max must be nonnegative")
    if q_max < 0:
        raise DomainError("q_max must be nonnegative")
    pts = P.points
    n = pts.shape[0]
    cutoff = mu(kind, r_max)
    nbrs = _forward_neighbors(pts, cutoff) if q_max >= 1 else [np.empty(0, dtype=int)] * n

    verts: list[tuple[int, ...]] = [(i,) for i in range(n)]
    times: list[float] = [0.0] * n
    dims: list[int] = [0] * n

    # Clique expansion: each simplex is a clique of the cutoff graph, extended
    # by common forward neighbors; diameter is tracked along the way.
    stack: list[tuple[tuple[int, ...], np.ndarray, float]] = []
    for i in range(n):
        for j in nbrs[i]:
            diam = float(np.linalg.norm(pts[i] - pts[j]))
            t = diam if kind == "rips" else diam / 2.0
            if t <= r_max:
                verts.append((i, int(j)))
                times.append(t)
                dims.append(1)
                if q_max >= 2:
                    common = np.intersect1d(nbrs[i], nbrs[j], assume_unique=True)
                    stack.append(((i, int(j)), common, diam))
    while stack:
        base, cands, diam = stack.pop()
        q = len(base)  # dimension of the extended simplex
        for w in cands:
            w = int(w)
            new_diam = max(diam, float(np.max(np.linalg.norm(pts[list(base)] - pts[w], axis=1))))
            t = _simplex_time(kind, pts, base + (w,), new_diam)
            if t > r_max:
                continue
            verts.append(base + (w,))
            times.append(t)
            dims.append(q)
            if q < q_max:
                stack.append((base + (w,), np.intersect1d(cands, nbrs[w], assume_unique=True), new_diam))

    # enforce exact face monotonicity: the scalar and vectorized distance
    # paths can disagree by 1 ulp, which would break the filtration property
    index = {v: k for k, v in enumerate(verts)}
    for k in sorted(range(len(verts)), key=lambda k: dims[k]):
        v = verts[k]
        if len(v) < 2:
            continue
        t = times[k]
        for c in range(len(v)):
            ft = times[index[v[:c] + v[c + 1:]]]
            if ft > t:
                t = ft
        times[k] = t

    times_arr = np.asarray(times)
    dims_arr = np.asarray(dims, dtype=int)
    if tie_break == "lex":
        order = sorted(range(len(verts)), key=lambda k: (times[k], dims[k], verts[k]))
    elif tie_break == "random":
        rng = np.random.default_rng(tie_seed)
        noise = rng.random(len(verts))
        order = sorted(range(len(verts)), key=lambda k: (times[k], dims[k], noise[k]))
    else:
        raise DomainError(f"unknown tie_break {tie_break!r}")
    verts = [verts[k] for k in order]
    return FilteredComplex(P.d, kind, q_max, r_max, verts, times_arr[order], dims_arr[order], pts)


def build_rips(P: PointCloud, r_max: float, q_max: int, **kw) -> FilteredComplex:
    if r_max <= 0:
        raise DomainError("r_max must be positive")
    return _build(P, "rips", r_max, q_max, **kw)


def build_cech(P: PointCloud, r_max: float, q_max: int, **kw) -> FilteredComplex:
    if r_max <= 0:
        raise DomainError("r_max must be positive")
    return _build(P, "cech", r_max, q_max, **kw)


def build(P: PointCloud, kind: str, r_max: float, q_max: int, **kw) -> FilteredComplex:
    """Generic builder; unlike the named wrappers it accepts r_max = 0 (a
    vertices-only complex), which internal callers use for time-zero queries."""
    if kind not in ("rips", "cech"):
        raise DomainError(f"unknown filtration kind {kind!r}")
    return _build(P, kind, r_max, q_max, **kw)


def restrict(P: PointCloud, center, a: float) -> PointCloud:
    """Points of P within the closed ball B(center, a); window becomes that ball."""
    if a < 0:
        raise DomainError("restriction radius must be nonnegative")
    c = np.asarray(center, dtype=float)
    if P.n:
        keep = np.linalg.norm(P.points - c, axis=1) <= a
        pts = P.points[keep]
    else:
        pts = P.points
    return PointCloud(pts, BallWindow(tuple(c), a))


def _point_set(P: PointCloud) -> set[tuple[float, ...]]:
    return {tuple(row) for row in P.points}


def count_new_simplices(X: PointCloud, Y: PointCloud, s: float, q: int, kind: str) -> int:
    """Number of q-simplices of K_s(Y) with at least one vertex outside X."""
    sx, sy = _point_set(X), _point_set(Y)
    if not sx <= sy:
        raise DomainError("X must be a subset of Y")
    if s <= 0:
        # At s = 0 (or below) only vertices are present.
        return (Y.n - X.n) if q == 0 and s >= 0 else 0
    cy = _build(Y, kind, s, q)
    cx = _build(X, kind, s, q)
    return int(np.count_nonzero(cy.dims == q)) - int(np.count_nonzero(cx.dims == q))
