"""Finite doubling metric spaces, ball coverings, colorings and the cutoff Δ_P.

Points are always addressed by their index ``0..n-1``; ``MetricSpace.ids``
maps indices back to human-readable ids (integers, lattice tuples).

Two metric backends exist: lattices (ℤ intervals and ℤᵈ boxes with the sup
metric) are evaluated from integer coordinates and never materialize an
``n × n`` table; trees and explicit tables keep a dense distance matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .errors import CapacityError, DegenerateInputError, FormatError, InvalidMetricError, ParameterError
from .exponents import pnorm

DENSE_SPACE_CAP = 5000
LATTICE_KINDS = ("z_interval", "zd_box")


@dataclass(frozen=True)
class GrowthStats:
    growth_d: float
    growth_K: float
    doubling_D: float
    doubling_samples: int
    radii: tuple


class MetricSpace:
    """A finite metric space given by a coordinate rule or a distance table.

    Instances are immutable; equality is by ``(kind, params)``.
    """

    def __init__(self, kind: str, params: tuple, *, coords=None, dims=None, table=None, depth=None, tree_radius=None):
        self.kind = kind
        self.params = params
        self._coords = coords
        self._dims = dims
        self._table = table
        self._depth = depth
        self._tree_radius = tree_radius
        if coords is not None:
            coords.setflags(write=False)
        if table is not None:
            table.setflags(write=False)

    # -- identity -----------------------------------------------------------
    def __eq__(self, other):
        return isinstance(other, MetricSpace) and self.kind == other.kind and self.params == other.params

    def __hash__(self):
        return hash((self.kind, self.params))

    def __repr__(self):
        if self.kind == "explicit":
            return f"MetricSpace(explicit, n={self.n})"
        return f"MetricSpace({self.kind}, {self.params})"

    def to_json(self) -> dict:
        if self.kind == "z_interval":
            return {"kind": "z_interval", "n": self.params[0]}
        if self.kind == "zd_box":
            return {"kind": "zd_box", "dims": list(self.params)}
        if self.kind == "tree":
            return {"kind": "tree", "degree": self.params[0], "radius": self.params[1]}
        return {"kind": "explicit", "distances": [list(map(float, row)) for row in self._table]}

    # -- basic geometry -----------------------------------------------------
    @property
    def n(self) -> int:
        if self._coords is not None:
            return self._coords.shape[0]
        return self._table.shape[0]

    def __len__(self):
        return self.n

    @property
    def is_lattice(self) -> bool:
        return self.kind in LATTICE_KINDS

    @property
    def dim(self) -> int | None:
        return self._coords.shape[1] if self.is_lattice else None

    @property
    def dims(self) -> tuple | None:
        return self._dims

    @property
    def coords(self) -> np.ndarray:
        if self._coords is None:
            raise ParameterError(f"{self.kind} space has no lattice coordinates")
        return self._coords

    @property
    def table(self) -> np.ndarray:
        if self._table is None:
            raise ParameterError(f"{self.kind} space has no distance table")
        return self._table

    @cached_property
    def ids(self) -> list:
        if self.kind == "zd_box":
            return [tuple(int(c) for c in row) for row in self._coords]
        return list(range(self.n))

    def index_of(self, point_id) -> int:
        if self.kind == "zd_box":
            c = np.asarray(point_id, dtype=np.int64)
            return int(np.ravel_multi_index(tuple(c), self._dims))
        i = int(point_id)
        if not 0 <= i < self.n:
            raise ParameterError(f"point {point_id} outside the space")
        return i

    def dist(self, i: int, j: int) -> float:
        if self.is_lattice:
            return int(np.abs(self._coords[i] - self._coords[j]).max())
        return float(self._table[i, j])

    def dist_from(self, i: int) -> np.ndarray:
        if self.is_lattice:
            return np.abs(self._coords - self._coords[i]).max(axis=1)
        return self._table[i]

    def dist_block(self, I, J) -> np.ndarray:
        I = np.asarray(I, dtype=np.int64)
        J = np.asarray(J, dtype=np.int64)
        if self.is_lattice:
            C = self._coords
            if C.shape[1] == 1:
                return np.abs(C[I, 0][:, None] - C[J, 0][None, :])
            return np.abs(C[I][:, None, :] - C[J][None, :, :]).max(axis=2)
        return self._table[np.ix_(I, J)]

    def pair_dist(self, I, J) -> np.ndarray:
        """Elementwise distances d(I[k], J[k])."""
        I = np.asarray(I, dtype=np.int64)
        J = np.asarray(J, dtype=np.int64)
        if self.is_lattice:
            return np.abs(self._coords[I] - self._coords[J]).max(axis=1)
        return self._table[I, J]

    def dist_to_set(self, idx) -> np.ndarray:
        """d(x, P) for every point x; +inf everywhere when P is empty."""
        idx = np.unique(np.asarray(idx, dtype=np.int64))
        if idx.size == 0:
            return np.full(self.n, np.inf)
        if self.is_lattice:
            if self._coords.shape[1] == 1:
                x = self._coords[:, 0]
                P = self._coords[idx, 0]
                pos = np.searchsorted(P, x)
                left = P[np.clip(pos - 1, 0, P.size - 1)]
                right = P[np.clip(pos, 0, P.size - 1)]
                return np.minimum(np.abs(x - left), np.abs(right - x))
            return kernels.dist_to_set_lattice(self._coords, self._coords[idx])
        return self._table[idx].min(axis=0)

    @cached_property
    def diameter(self) -> float:
        if self.is_lattice:
            return int(max(d - 1 for d in self._dims))
        return float(self._table.max()) if self.n else 0.0

    def volumes(self, r: float) -> np.ndarray:
        """V(x, r) = |B(x, r)| for every x (closed balls)."""
        if self.is_lattice:
            R = int(math.floor(r))
            V = np.ones(self.n, dtype=np.int64)
            for k, nk in enumerate(self._dims):
                c = self._coords[:, k]
                V *= np.minimum(c + R, nk - 1) - np.maximum(c - R, 0) + 1
            return V
        return (self._table <= r).sum(axis=1)

    def volume(self, i: int, r: float) -> int:
        if self.is_lattice:
            R = int(math.floor(r))
            v = 1
            for k, nk in enumerate(self._dims):
                c = int(self._coords[i, k])
                v *= min(c + R, nk - 1) - max(c - R, 0) + 1
            return v
        return int((self._table[i] <= r).sum())

    def max_volume(self, r: float) -> int:
        """v(r): the largest ball of radius r in the space."""
        if self.is_lattice:
            R = int(math.floor(r))
            return int(np.prod([min(2 * R + 1, nk) for nk in self._dims]))
        return int(self.volumes(r).max()) if self.n else 0

    def ball(self, i: int, r: float) -> np.ndarray:
        return np.flatnonzero(self.dist_from(i) <= r)

    def interior_mask(self, r: float) -> np.ndarray:
        """Points x whose ball B(x, r) is not truncated by the window."""
        if self.is_lattice:
            R = int(math.floor(r))
            m = np.ones(self.n, dtype=bool)
            for k, nk in enumerate(self._dims):
                c = self._coords[:, k]
                m &= (c - R >= 0) & (c + R <= nk - 1)
            return m
        if self.kind == "tree":
            return self._depth + r <= self._tree_radius
        return np.ones(self.n, dtype=bool)

    # -- growth / doubling --------------------------------------------------
    @cached_property
    def growth(self) -> GrowthStats:
        return _measure_growth(self)

    @property
    def growth_d(self) -> float:
        return self.growth.growth_d

    @property
    def growth_K(self) -> float:
        return self.growth.growth_K

    @property
    def doubling_D(self) -> float:
        return self.growth.doubling_D

    def check_metric(self, max_exhaustive: int = 300, samples: int = 200_000, seed: int = 0) -> dict:
        """Symmetry, identity of indiscernibles and triangle inequality.

        Exhaustive over all triples when ``n <= max_exhaustive``, sampled
        otherwise.
        """
        n = self.n
        rng = np.random.default_rng(seed)
        if n <= max_exhaustive:
            idx = np.arange(n)
            D = self.dist_block(idx, idx).astype(float)
            symmetric = bool(np.array_equal(D, D.T))
            off = D[~np.eye(n, dtype=bool)]
            identity = bool(np.all(np.diag(D) == 0) and np.all(off > 0))
            triangle = True
            for k in range(n):
                if np.any(D > D[:, k][:, None] + D[k][None, :] + 1e-12 * (1 + D.max())):
                    triangle = False
                    break
            return {"symmetric": symmetric, "identity": identity, "triangle": triangle, "exhaustive": True}
        I, J, K = (rng.integers(0, n, samples) for _ in range(3))
        dij, dji = self.pair_dist(I, J), self.pair_dist(J, I)
        dik, dkj = self.pair_dist(I, K), self.pair_dist(K, J)
        symmetric = bool(np.array_equal(dij, dji))
        identity = bool(np.all((dij == 0) == (I == J)))
        triangle = bool(np.all(dij <= dik + dkj + 1e-12))
        return {"symmetric": symmetric, "identity": identity, "triangle": triangle, "exhaustive": False}

    # -- sub-windows ----------------------------------------------------------
    def sub_window(self, size) -> tuple["MetricSpace", np.ndarray]:
        """Leading sub-window of a lattice and the indices it keeps."""
        if self.kind == "z_interval":
            m = int(size)
            if not 1 <= m <= self.n:
                raise ParameterError(f"sub-window {m} does not fit in {self!r}")
            return z_interval(m), np.arange(m)
        if self.kind == "zd_box":
            sizes = [int(size)] * self.dim if np.isscalar(size) else [int(s) for s in size]
            if any(s < 1 or s > d for s, d in zip(sizes, self._dims)):
                raise ParameterError(f"sub-window {sizes} does not fit in {self!r}")
            keep = np.all(self._coords < np.asarray(sizes), axis=1)
            return zd_box(sizes), np.flatnonzero(keep)
        raise ParameterError("sub-windows are only defined for lattice spaces")


def _measure_growth(space: MetricSpace) -> GrowthStats:
    n = space.n
    diam = space.diameter
    radii = []
    r = 1
    while r <= max(diam, 1):
        radii.append(r)
        r *= 2
    D = 1.0
    samples = 0
    for r in radii:
        mask = space.interior_mask(2 * r)
        if not mask.any():
            continue
        V1 = space.volumes(r)[mask]
        V2 = space.volumes(2 * r)[mask]
        D = max(D, float((V2 / V1).max()))
        samples += int(mask.sum())
    if samples == 0 and n > 1:
        # window too small for any untruncated double ball
        for r in radii:
            D = max(D, float((space.volumes(2 * r) / space.volumes(r)).max()))
    if space.is_lattice:
        d = float(space.dim)
        Rs = np.arange(1, int(diam) + 1) if diam >= 1 else np.array([1])
        v = np.array([space.max_volume(R) for R in Rs], dtype=float)
        K = float(np.max(v / Rs.astype(float) ** d))
    else:
        d = math.log2(D) if D > 1 else 0.0
        cand = set(float(r) for r in radii)
        uniq = np.unique(space.table)
        uniq = uniq[uniq >= 1]
        if uniq.size <= 512:
            cand.update(float(u) for u in uniq)
        cand.add(1.0)
        K = max(space.max_volume(R) / R**d for R in sorted(cand))
    return GrowthStats(growth_d=d, growth_K=float(K), doubling_D=float(D), doubling_samples=samples, radii=tuple(radii))


# -- constructors -------------------------------------------------------------
def z_interval(n: int) -> MetricSpace:
    n = int(n)
    if n < 1:
        raise ParameterError("z_interval needs n >= 1")
    coords = np.arange(n, dtype=np.int64)[:, None]
    return MetricSpace("z_interval", (n,), coords=coords, dims=(n,))


def zd_box(dims) -> MetricSpace:
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 1 for d in dims):
        raise ParameterError("zd_box needs all dims >= 1")
    grids = np.indices(dims).reshape(len(dims), -1).T.astype(np.int64)
    return MetricSpace("zd_box", dims, coords=np.ascontiguousarray(grids), dims=dims)


def tree(degree: int, radius: int) -> MetricSpace:
    """Ball of the given radius around the root of the degree-regular tree."""
    degree, radius = int(degree), int(radius)
    if degree < 2 or radius < 0:
        raise ParameterError("tree needs degree >= 2 and radius >= 0")
    parent = [-1]
    depth = [0]
    frontier = [0]
    for level in range(1, radius + 1):
        nxt = []
        for v in frontier:
            kids = degree if v == 0 else degree - 1
            for _ in range(kids):
                parent.append(v)
                depth.append(level)
                nxt.append(len(parent) - 1)
        frontier = nxt
    n = len(parent)
    if n > DENSE_SPACE_CAP:
        raise CapacityError(f"tree has {n} vertices; dense metric capped at {DENSE_SPACE_CAP}")
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import shortest_path

    child = np.arange(1, n)
    par = np.asarray(parent[1:])
    adj = coo_matrix((np.ones(n - 1), (child, par)), shape=(n, n))
    table = shortest_path(adj, directed=False, unweighted=True)
    return MetricSpace(
        "tree", (degree, radius), table=np.ascontiguousarray(table), depth=np.asarray(depth), tree_radius=radius
    )


def explicit(table) -> MetricSpace:
    try:
        T = np.array(table, dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"distance table is not numeric: {exc}") from exc
    if T.ndim != 2 or T.shape[0] != T.shape[1] or T.shape[0] < 1:
        raise FormatError("distance table must be a non-empty square array")
    if T.shape[0] > DENSE_SPACE_CAP:
        raise CapacityError(f"explicit table of size {T.shape[0]} exceeds {DENSE_SPACE_CAP}")
    if not np.all(np.isfinite(T)) or np.any(T < 0):
        raise FormatError("distances must be finite and non-negative")
    if not np.array_equal(T, T.T):
        raise FormatError("distance table is not symmetric")
    if np.any(np.diag(T) != 0):
        raise FormatError("distance table must have zero diagonal")
    params = tuple(tuple(float(v) for v in row) for row in T)
    space = MetricSpace("explicit", params, table=np.ascontiguousarray(T))
    chk = space.check_metric()
    if not chk["identity"]:
        raise InvalidMetricError("distinct points at distance zero")
    if not chk["triangle"]:
        raise InvalidMetricError("triangle inequality violated")
    return space


def make_space(spec) -> MetricSpace:
    """Build a space from its JSON description (the ``"space"`` field of a matrix file)."""
    if isinstance(spec, MetricSpace):
        return spec
    if not isinstance(spec, dict) or "kind" not in spec:
        raise FormatError("space description must be an object with a 'kind'")
    kind = spec["kind"]
    try:
        if kind == "z_interval":
            return z_interval(spec["n"])
        if kind == "zd_box":
            return zd_box(spec["dims"])
        if kind == "tree":
            return tree(spec["degree"], spec["radius"])
        if kind == "explicit":
            return explicit(spec["distances"])
    except KeyError as exc:
        raise FormatError(f"space '{kind}' is missing field {exc}") from exc
    raise FormatError(f"unknown space kind {kind!r}")


# -- coverings ------------------------------------------------------------------
@dataclass(frozen=True)
class BallCovering:
    space: MetricSpace = field(repr=False)
    L: float
    alpha: float
    centers: np.ndarray
    colors: np.ndarray  # colors[k] in 1..num_colors for centers[k]
    num_colors: int
    max_degree: int

    def color_class(self, color: int) -> np.ndarray:
        return self.centers[self.colors == color]

    def classes(self) -> dict:
        return {c: self.color_class(c) for c in range(1, self.num_colors + 1)}

    def verify(self) -> dict:
        """Covering, same-color separation and the color-count bound."""
        covered = bool(np.all(self.space.dist_to_set(self.centers) <= self.L))
        separated = True
        for c in range(1, self.num_colors + 1):
            P = self.color_class(c)
            if P.size > 1:
                D = self.space.dist_block(P, P).astype(float)
                np.fill_diagonal(D, np.inf)
                if D.min() < self.alpha * self.L:
                    separated = False
        return {
            "covering": covered,
            "separation": separated,
            "color_bound": self.num_colors <= self.max_degree + 1,
        }


def covering(space: MetricSpace, L: float, alpha: float = 6.0) -> BallCovering:
    """Greedy maximal L-net, then greedy coloring of the αL conflict graph."""
    if not L > 0:
        raise ParameterError("covering radius L must be positive")
    if alpha < 1:
        raise ParameterError("alpha must be >= 1")
    if space.is_lattice:
        centers = kernels.greedy_net_lattice(space.coords, space.dims, float(L))
    else:
        centers = kernels.greedy_net_dense(space.table, float(L))
    centers = np.asarray(centers, dtype=np.int64)
    k = centers.size
    colors = np.zeros(k, dtype=np.int64)
    max_deg = 0
    block = 2048
    for s in range(0, k, block):
        Dblk = space.dist_block(centers[s : s + block], centers)
        adj = Dblk < alpha * L
        for t in range(Dblk.shape[0]):
            i = s + t
            row = adj[t].copy()
            row[i] = False
            max_deg = max(max_deg, int(row.sum()))
            used = set(colors[:i][row[:i]].tolist())
            c = 1
            while c in used:
                c += 1
            colors[i] = c
    num_colors = int(colors.max()) if k else 0
    return BallCovering(space, float(L), float(alpha), centers, colors, num_colors, max_deg)


def thickened(space: MetricSpace, P, L: float) -> np.ndarray:
    """Boolean mask of [P]_L = {x : d(x, P) <= L}."""
    return space.dist_to_set(P) <= L


@dataclass(frozen=True)
class ColorChoice:
    color: int
    centers: np.ndarray
    ratio: float
    class_norms: dict


def select_color_class(f, cov: BallCovering, p: float) -> ColorChoice:
    """Color class P maximizing ||1_[P]_L f||_p (smallest color on ties)."""
    f = np.asarray(f, dtype=float)
    total = pnorm(f, p)
    if total == 0:
        raise DegenerateInputError("f vanishes identically")
    norms = {}
    best, best_c = -1.0, 1
    for c in range(1, cov.num_colors + 1):
        mask = thickened(cov.space, cov.color_class(c), cov.L)
        v = pnorm(f[mask], p)
        norms[c] = v
        if v > best:
            best, best_c = v, c
    return ColorChoice(best_c, cov.color_class(best_c), best / total, norms)


# -- cutoff ---------------------------------------------------------------------
@dataclass(frozen=True)
class CutoffProfile:
    space: MetricSpace = field(repr=False)
    P: np.ndarray
    L: float
    values: np.ndarray
    dist: np.ndarray = field(repr=False)

    def verify(self, exhaustive: bool = True, samples: int = 200_000, seed: int = 0, chunk_elems: int = 4_000_000) -> dict:
        """The four cutoff properties; Lipschitz over all pairs when exhaustive."""
        v, d, L = self.values, self.dist, self.L
        eps = 1e-12
        out = {
            "vanishes_beyond_2L": bool(np.all(v[d >= 2 * L] == 0)),
            "half_on_L_ball": bool(np.all(v[d <= L] >= 0.5)),
            "bounded": bool(np.all((v >= 0) & (v <= 1))),
        }
        n = self.space.n
        lip = True
        worst = 0.0
        if exhaustive:
            all_idx = np.arange(n)
            rows = max(1, chunk_elems // max(n, 1))
            for s in range(0, n, rows):
                I = all_idx[s : s + rows]
                D = self.space.dist_block(I, all_idx)
                gap = np.abs(v[I][:, None] - v[None, :]) - D / (2 * L)
                m = float(gap.max())
                worst = max(worst, m)
                if m > eps:
                    lip = False
                    break
        else:
            rng = np.random.default_rng(seed)
            I, J = rng.integers(0, n, samples), rng.integers(0, n, samples)
            gap = np.abs(v[I] - v[J]) - self.space.pair_dist(I, J) / (2 * L)
            worst = float(gap.max())
            lip = worst <= eps
        out["lipschitz"] = lip
        out["lipschitz_excess"] = worst
        return out


def cutoff(P, L: float, space: MetricSpace) -> CutoffProfile:
    """Δ_P(x) = max{0, 1 - d(x, P)/(2L)}."""
    P = np.unique(np.asarray(P, dtype=np.int64))
    if P.size == 0:
        raise DegenerateInputError("cutoff needs a non-empty center set")
    if not L > 0:
        raise ParameterError("L must be positive")
    d = space.dist_to_set(P).astype(float)
    values = np.maximum(0.0, 1.0 - d / (2.0 * L))
    return CutoffProfile(space, P, float(L), values, d)
