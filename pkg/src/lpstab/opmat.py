"""Sparse matrices indexed by Y × X, their structure and their norms."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import kernels
from .errors import FormatError, ParameterError, ShapeError, StructureError
from .exponents import INF, column_pnorms, dual_exponent, parse_p, pnorm
from .space import MetricSpace

DENSE_CAP = 3000
POWER_TOL = 1e-10
POWER_MAXITER = 100_000


def _canonical(M) -> sp.csr_matrix:
    M = sp.csr_matrix(M, dtype=np.float64, copy=True)
    M.sum_duplicates()
    M.eliminate_zeros()
    M.sort_indices()
    for arr in (M.data, M.indices, M.indptr):
        arr.setflags(write=False)
    return M


class IndexedMatrix:
    """A real matrix ``(a_{y,x})`` with columns indexed by a metric space X.

    The row set Y is either the same space as X (``same``), another metric
    space, or a bare index set (``row_space is None``). Stored as a canonical
    CSR matrix: sorted, deduplicated, exact zeros removed.
    """

    def __init__(self, matrix, col_space: MetricSpace | None, row_space: MetricSpace | None = None):
        M = _canonical(matrix)
        if not np.all(np.isfinite(M.data)):
            raise FormatError("matrix entries must be finite")
        if col_space is not None and M.shape[1] != col_space.n:
            raise ShapeError(f"{M.shape[1]} columns but the column space has {col_space.n} points")
        if row_space is not None and M.shape[0] != row_space.n:
            raise ShapeError(f"{M.shape[0]} rows but the row space has {row_space.n} points")
        self.csr = M
        self.col_space = col_space
        self.row_space = row_space

    # -- constructors ---------------------------------------------------------
    @classmethod
    def from_entries(cls, col_space, rows, entries, *, strict: bool = True):
        """``rows`` is ``"same"``, a row count, or a row MetricSpace."""
        row_space, n_rows = _resolve_rows(col_space, rows)
        n_cols = col_space.n if col_space is not None else None
        if entries is None or len(entries) == 0:
            arr = np.zeros((0, 3))
        else:
            try:
                arr = np.asarray(entries, dtype=float).reshape(-1, 3)
            except (TypeError, ValueError) as exc:
                raise FormatError(f"entries must be [row, col, value] triples: {exc}") from exc
        r = arr[:, 0]
        c = arr[:, 1]
        if np.any(r != np.round(r)) or np.any(c != np.round(c)):
            raise FormatError("row/col indices must be integers")
        r = r.astype(np.int64)
        c = c.astype(np.int64)
        if n_cols is None:
            n_cols = int(c.max()) + 1 if c.size else 0
        if np.any((r < 0) | (r >= n_rows)) or np.any((c < 0) | (c >= n_cols)):
            raise FormatError("entry index out of range")
        if not np.all(np.isfinite(arr[:, 2])):
            raise FormatError("entry values must be finite")
        if strict and r.size:
            key = r * n_cols + c
            if np.unique(key).size != key.size:
                raise FormatError("duplicate entries")
        M = sp.coo_matrix((arr[:, 2], (r, c)), shape=(n_rows, n_cols))
        return cls(M, col_space, row_space)

    @classmethod
    def from_dense(cls, M, col_space, rows="same"):
        M = np.asarray(M, dtype=float)
        row_space, n_rows = _resolve_rows(col_space, rows, default_rows=M.shape[0])
        if M.shape[0] != n_rows:
            raise ShapeError("dense matrix row count does not match")
        return cls(sp.csr_matrix(M), col_space, row_space)

    # -- shape/info -------------------------------------------------------------
    @property
    def shape(self):
        return self.csr.shape

    @property
    def n_rows(self) -> int:
        return self.csr.shape[0]

    @property
    def n_cols(self) -> int:
        return self.csr.shape[1]

    @property
    def nnz(self) -> int:
        return self.csr.nnz

    @property
    def same(self) -> bool:
        return self.row_space is not None and self.row_space == self.col_space

    @cached_property
    def coo(self):
        """``(rows, cols, vals)`` sorted by (row, col)."""
        M = self.csr
        rows = np.repeat(np.arange(M.shape[0], dtype=np.int64), np.diff(M.indptr))
        return rows, M.indices.astype(np.int64), M.data

    @property
    def entries(self) -> list:
        r, c, v = self.coo
        return list(zip(r.tolist(), c.tolist(), v.tolist()))

    def todense(self) -> np.ndarray:
        return self.csr.toarray()

    @cached_property
    def csc(self):
        C = self.csr.tocsc()
        C.sort_indices()
        return C

    @cached_property
    def sup(self) -> float:
        """max |a_{y,x}|."""
        return float(np.abs(self.csr.data).max()) if self.nnz else 0.0

    @cached_property
    def stats(self) -> "StructuralStats":
        return structural_stats(self)

    def entry_dist(self) -> np.ndarray:
        if not self.same:
            raise StructureError("entry distances need Y = X")
        r, c, _ = self.coo
        return self.col_space.pair_dist(r, c)

    def with_matrix(self, M) -> "IndexedMatrix":
        return IndexedMatrix(M, self.col_space, self.row_space)

    def __repr__(self):
        return f"IndexedMatrix({self.n_rows}x{self.n_cols}, nnz={self.nnz}, same={self.same})"

    def __eq__(self, other):
        if not isinstance(other, IndexedMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.col_space == other.col_space
            and self.row_space == other.row_space
            and np.array_equal(self.csr.indptr, other.csr.indptr)
            and np.array_equal(self.csr.indices, other.csr.indices)
            and np.array_equal(self.csr.data, other.csr.data)
        )

    __hash__ = None


def _resolve_rows(col_space, rows, default_rows=None):
    if isinstance(rows, MetricSpace):
        return rows, rows.n
    if rows == "same" or rows is None and default_rows is None:
        if col_space is None:
            raise FormatError("rows='same' needs a column space")
        return col_space, col_space.n
    if rows is None:
        return None, int(default_rows)
    try:
        n = int(rows)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"rows must be 'same' or an integer, got {rows!r}") from exc
    if n < 0:
        raise FormatError("row count must be non-negative")
    return None, n


def identity(space: MetricSpace) -> IndexedMatrix:
    return IndexedMatrix(sp.identity(space.n, format="csr"), space, space)


# -- arithmetic -----------------------------------------------------------------
def apply(A: IndexedMatrix, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (A.n_cols,):
        raise ShapeError(f"vector of shape {f.shape} for a matrix with {A.n_cols} columns")
    return A.csr @ f


def adjoint(A: IndexedMatrix) -> IndexedMatrix:
    return IndexedMatrix(A.csr.T, A.row_space, A.col_space)


def absolute(A: IndexedMatrix) -> IndexedMatrix:
    return A.with_matrix(abs(A.csr))


def compose(A: IndexedMatrix, B: IndexedMatrix) -> IndexedMatrix:
    """The product AB (apply B first)."""
    if A.n_cols != B.n_rows:
        raise ShapeError(f"cannot compose {A.shape} with {B.shape}")
    if A.col_space is not None and B.row_space is not None and A.col_space != B.row_space:
        raise ShapeError("inner index spaces differ")
    return IndexedMatrix(A.csr @ B.csr, B.col_space, A.row_space)


def subtract(A: IndexedMatrix, B: IndexedMatrix) -> IndexedMatrix:
    if A.shape != B.shape:
        raise ShapeError("shape mismatch")
    return A.with_matrix(A.csr - B.csr)


def scale(A: IndexedMatrix, c: float) -> IndexedMatrix:
    return A.with_matrix(A.csr * float(c))


def restrict(A: IndexedMatrix, size) -> IndexedMatrix:
    """Row/column restriction of a square lattice matrix to a leading sub-window."""
    if not A.same:
        raise StructureError("window restriction needs Y = X")
    sub, keep = A.col_space.sub_window(size)
    M = A.csr[keep][:, keep]
    return IndexedMatrix(M, sub, sub)


# -- norms ------------------------------------------------------------------------
@dataclass(frozen=True)
class NormValue:
    value: float
    kind: str  # exact | upper_bound | lower_bound | approximate
    lower: float
    upper: float

    def __float__(self):
        return self.value


# Absolute sums go through bincount, which adds strictly in array order. Every
# column or row is then summed in increasing index order, so the 1-norm of A and
# the inf-norm of adjoint(A) agree bit for bit.
def norm_1(A: IndexedMatrix) -> float:
    """max column absolute sum."""
    if A.nnz == 0:
        return 0.0
    r, c, v = A.coo
    return float(np.bincount(c, np.abs(v), minlength=A.n_cols).max())


def norm_inf(A: IndexedMatrix) -> float:
    """max row absolute sum."""
    if A.nnz == 0:
        return 0.0
    r, c, v = A.coo
    return float(np.bincount(r, np.abs(v), minlength=A.n_rows).max())


def norm_2(A: IndexedMatrix) -> NormValue:
    if A.nnz == 0:
        return NormValue(0.0, "exact", 0.0, 0.0)
    if max(A.shape) <= DENSE_CAP:
        M = A.todense()
        G = M.T @ M if A.n_cols <= A.n_rows else M @ M.T
        k = G.shape[0]
        top = sla.eigvalsh(G, subset_by_index=[k - 1, k - 1], check_finite=False)[0]
        s = math.sqrt(max(float(top), 0.0))
        return NormValue(s, "exact", s, s)
    s = _power_sigma_max(A.csr)
    return NormValue(s, "approximate", s, math.sqrt(norm_1(A) * norm_inf(A)))


def _power_sigma_max(M, tol=POWER_TOL, maxiter=POWER_MAXITER, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(M.shape[1])
    x /= np.linalg.norm(x)
    prev = 0.0
    MT = M.T.tocsr()
    for _ in range(maxiter):
        y = MT @ (M @ x)
        ny = np.linalg.norm(y)
        if ny == 0:
            return 0.0
        x = y / ny
        if abs(ny - prev) <= tol * ny:
            break
        prev = ny
    return float(np.linalg.norm(M @ x))


def pnorm_power(matvec, rmatvec, n: int, p: float, x0=None, iters: int = 100) -> tuple[float, np.ndarray]:
    """Higham/Boyd power iteration for ||M||_{p->p}; returns a witnessed lower bound."""
    q = dual_exponent(p)
    x = np.ones(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    nx = pnorm(x, p)
    if nx == 0:
        x = np.ones(n)
        nx = pnorm(x, p)
    x /= nx
    best = pnorm(matvec(x), p)
    best_x = x.copy()
    for _ in range(iters):
        y = matvec(x)
        ny = pnorm(y, p)
        if ny == 0:
            break
        z = rmatvec(_dual_vec(y, p))
        if pnorm(z, q) <= float(z @ x) * (1 + 1e-12):
            break
        x = _dual_vec(z, q)
        x /= pnorm(x, p)
        val = pnorm(matvec(x), p)
        if val > best:
            best, best_x = val, x.copy()
    return best, best_x


def _dual_vec(y, p):
    """A vector of unit dual norm attaining <., y> = ||y||_p."""
    ay = np.abs(y)
    if math.isinf(p):
        out = np.zeros_like(y)
        k = int(np.argmax(ay))
        out[k] = np.sign(y[k]) or 1.0
        return out
    if p == 1:
        return np.where(y >= 0, 1.0, -1.0)
    ny = pnorm(y, p)
    if ny == 0:
        return np.zeros_like(y)
    return np.sign(y) * (ay / ny) ** (p - 1)


def op_norm(A: IndexedMatrix, p) -> NormValue:
    """||A||_{p->p}: exact for p in {1, 2, inf} and p <= 1, bracketed otherwise."""
    p = parse_p(p)
    if p == 1:
        v = norm_1(A)
        return NormValue(v, "exact", v, v)
    if math.isinf(p):
        v = norm_inf(A)
        return NormValue(v, "exact", v, v)
    if p == 2:
        return norm_2(A)
    if p < 1:
        # p-triangle inequality: the extreme points ±e_x of the quasi-ball attain the sup
        v = float(column_pnorms(A.csr, p).max()) if A.nnz else 0.0
        return NormValue(v, "exact", v, v)
    n1, ninf = norm_1(A), norm_inf(A)
    upper = n1 ** (1.0 / p) * ninf ** (1.0 - 1.0 / p)
    M, MT = A.csr, A.csr.T.tocsr()
    lower, _ = pnorm_power(lambda x: M @ x, lambda y: MT @ y, A.n_cols, p)
    cols = column_pnorms(M, p)
    if cols.size:
        lower = max(lower, float(cols.max()))
    return NormValue(upper, "upper_bound", lower, upper)


def schur_norm(A: IndexedMatrix) -> float:
    """||A||_{1->1} + ||A||_{inf->inf}; column sums from the CSC arrays, row sums from CSR."""
    if A.nnz == 0:
        return 0.0
    C = A.csc
    cols = np.repeat(np.arange(A.n_cols), np.diff(C.indptr))
    R = A.csr
    rows = np.repeat(np.arange(A.n_rows), np.diff(R.indptr))
    col_max = np.bincount(cols, np.abs(C.data), minlength=A.n_cols).max()
    row_max = np.bincount(rows, np.abs(R.data), minlength=A.n_rows).max()
    return float(col_max + row_max)


@dataclass(frozen=True)
class Weight:
    """ω(x,y) = 1 + d^alpha (``poly``) or exp(C d^delta) (``subexp``)."""

    family: str
    alpha: float = 0.0
    C: float = 1.0
    delta: float = 0.5

    def __post_init__(self):
        if self.family == "poly":
            if self.alpha < 0:
                raise ParameterError("polynomial weight needs alpha >= 0")
        elif self.family == "subexp":
            if not (self.C > 0 and 0 < self.delta < 1):
                raise ParameterError("sub-exponential weight needs C > 0 and 0 < delta < 1")
        else:
            raise ParameterError(f"unknown weight family {self.family!r}")

    @classmethod
    def poly(cls, alpha: float) -> "Weight":
        return cls("poly", alpha=float(alpha))

    @classmethod
    def subexp(cls, C: float, delta: float) -> "Weight":
        return cls("subexp", C=float(C), delta=float(delta))

    @classmethod
    def parse(cls, spec) -> "Weight":
        if isinstance(spec, Weight):
            return spec
        if isinstance(spec, dict):
            if "poly" in spec:
                return cls.poly(spec["poly"])
            if "subexp" in spec:
                C, delta = spec["subexp"]
                return cls.subexp(C, delta)
        raise ParameterError(f"bad weight spec {spec!r}")

    def to_json(self) -> dict:
        if self.family == "poly":
            return {"poly": self.alpha}
        return {"subexp": [self.C, self.delta]}

    def __call__(self, d):
        d = np.asarray(d, dtype=float)
        if self.family == "poly":
            return 1.0 + d**self.alpha
        return np.exp(self.C * d**self.delta)


def weighted_schur_norm(A: IndexedMatrix, weight: Weight) -> float:
    if not A.same:
        raise StructureError("weighted Schur norm needs Y = X")
    r, c, v = A.coo
    if v.size == 0:
        return 0.0
    w = weight(A.entry_dist()) * np.abs(v)
    return float(np.bincount(r, w, minlength=A.n_rows).max() + np.bincount(c, w, minlength=A.n_cols).max())


def cd_norm(A: IndexedMatrix, weight: Weight | None = None) -> float:
    """Σ_k sup_{x - y = k} ω |a_{y,x}| over lattice translates k."""
    if not A.same:
        raise StructureError("convolution-dominated norm needs Y = X")
    if not A.col_space.is_lattice:
        raise StructureError("convolution-dominated norm needs a lattice (ℤᵈ box) space")
    r, c, v = A.coo
    if v.size == 0:
        return 0.0
    C = A.col_space.coords
    k = C[c] - C[r]
    a = np.abs(v)
    if weight is not None:
        a = a * weight(np.abs(k).max(axis=1))
    _, inv = np.unique(k, axis=0, return_inverse=True)
    inv = np.asarray(inv).ravel()
    env = np.zeros(inv.max() + 1)
    np.maximum.at(env, inv, a)
    return float(env.sum())


# -- structure ------------------------------------------------------------------------
@dataclass(frozen=True)
class StructuralStats:
    thickness: float | None
    sparseness: int
    row_sparseness: int
    band_width: float | None
    row_radius: np.ndarray | None
    row_centers: np.ndarray | None

    def summary(self) -> dict:
        return {
            "thickness": self.thickness,
            "sparseness": self.sparseness,
            "row_sparseness": self.row_sparseness,
            "band_width": self.band_width,
        }


def row_radii(space: MetricSpace, M: sp.csr_matrix) -> tuple[np.ndarray, np.ndarray]:
    """Smallest enclosing-ball radius of each row support, centers restricted to X."""
    m = M.shape[0]
    counts = np.diff(M.indptr)
    nonempty = counts > 0
    if space.is_lattice:
        C = space.coords
        rad = np.zeros(m, dtype=np.int64)
        cen = np.full(m, -1, dtype=np.int64)
        if not nonempty.any():
            return rad, cen
        starts = M.indptr[:-1][nonempty]
        pts = C[M.indices]
        lo = np.minimum.reduceat(pts, starts, axis=0)
        hi = np.maximum.reduceat(pts, starts, axis=0)
        span = hi - lo
        rad[nonempty] = ((span + 1) // 2).max(axis=1)
        mid = (lo + hi) // 2
        cen[nonempty] = np.ravel_multi_index(tuple(mid.T), space.dims)
        return rad, cen
    rad, cen = kernels.row_thickness_dense(M.indptr, M.indices, space.table)
    return np.asarray(rad), np.asarray(cen)


def structural_stats(A: IndexedMatrix) -> StructuralStats:
    M = A.csr
    col_counts = np.bincount(M.indices, minlength=A.n_cols) if A.nnz else np.zeros(A.n_cols, dtype=np.int64)
    row_counts = np.diff(M.indptr)
    sparseness = int(col_counts.max()) if col_counts.size else 0
    row_sparse = int(row_counts.max()) if row_counts.size else 0
    thickness = rad = cen = None
    if A.col_space is not None:
        rad, cen = row_radii(A.col_space, M)
        t = rad.max() if rad.size else 0
        thickness = int(t) if A.col_space.is_lattice else float(t)
    band = None
    if A.same:
        d = A.entry_dist()
        b = d.max() if d.size else 0
        band = int(b) if A.col_space.is_lattice else float(b)
    return StructuralStats(thickness, sparseness, row_sparse, band, rad, cen)


def band_width(A: IndexedMatrix) -> float:
    if not A.same:
        raise StructureError("band width needs Y = X")
    return A.stats.band_width


@dataclass(frozen=True)
class DisjointCheck:
    disjoint: bool
    precondition_met: bool
    gap: float
    two_r: float


def check_disjoint_supports(A: IndexedMatrix, u, v) -> DisjointCheck:
    """Do Au and Av have disjoint supports? Guaranteed when supp u, supp v are 2r-disjoint."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    su, sv = np.flatnonzero(u), np.flatnonzero(v)
    r = A.stats.thickness
    if su.size == 0 or sv.size == 0:
        gap = math.inf
    else:
        gap = float(A.col_space.dist_to_set(sv)[su].min())
    Au, Av = apply(A, u), apply(A, v)
    disjoint = not bool(np.any((Au != 0) & (Av != 0)))
    return DisjointCheck(disjoint, gap > 2 * r, gap, 2 * r)


@dataclass(frozen=True)
class GramCheck:
    ok: bool
    propagation: float
    bound: float


def gram(A: IndexedMatrix) -> IndexedMatrix:
    """A*A, indexed by X × X."""
    return IndexedMatrix(A.csr.T @ A.csr, A.col_space, A.col_space)


def check_gram_banded(A: IndexedMatrix) -> GramCheck:
    """band_width(A*A) <= 2 * thickness(A)."""
    G = gram(A)
    prop = G.stats.band_width
    bound = 2 * A.stats.thickness
    return GramCheck(prop <= bound, prop, bound)


@dataclass(frozen=True)
class NormSSCheck:
    v: int
    sup: float
    bound: float
    norms: dict
    verified: bool


def sparse_sparse_bound(A: IndexedMatrix) -> NormSSCheck:
    """||A||_{p->p} <= v * max|a| for p in {1, 2, inf}, v the row/column sparseness."""
    st = A.stats
    v = max(st.sparseness, st.row_sparseness)
    bound = v * A.sup
    norms = {1.0: norm_1(A), 2.0: norm_2(A).value, INF: norm_inf(A)}
    ok = all(val <= bound * (1 + 1e-12) for val in norms.values())
    return NormSSCheck(v, A.sup, bound, norms, ok)
