"""Example operators and seeded random structured matrices."""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

from .errors import FeasibilityError, ParameterError
from .exponents import parse_p, pnorm
from .opmat import IndexedMatrix, adjoint
from .space import MetricSpace, z_interval


def dilation_part(n: int, scale: float = 1.0) -> IndexedMatrix:
    """scale·D on rows 0..2n-1, columns 0..n-1: entries (2k,k) = (2k+1,k) = scale/2."""
    n = int(n)
    if n < 1:
        raise ParameterError("dilation needs n >= 1")
    k = np.arange(n)
    rows = np.concatenate([2 * k, 2 * k + 1])
    cols = np.concatenate([k, k])
    vals = np.full(2 * n, scale / 2.0)
    M = sp.coo_matrix((vals, (rows, cols)), shape=(2 * n, n))
    return IndexedMatrix(M, z_interval(n), None)


def dilation_matrix(n: int, lam: float) -> IndexedMatrix:
    """I - λD truncated to rows 0..2n-1 and columns 0..n-1; the identity part is zero on rows >= n."""
    if not lam > 0:
        raise ParameterError("λ must be positive")
    D = dilation_part(n, lam).csr
    I = sp.eye(2 * int(n), int(n), format="csr")
    return IndexedMatrix(I - D, z_interval(n), None)


def phi(m: int, length: int) -> np.ndarray:
    """φ_m = 1_{[0, m-1]}/m padded to the given length."""
    if not 1 <= m <= length:
        raise ParameterError("need 1 <= m <= length")
    v = np.zeros(length)
    v[:m] = 1.0 / m
    return v


def dilation_adjoint_curve(ns, lam: float = 1.0) -> dict:
    """n ↦ ‖(I - λD)* φ_n‖_1 measured on the 2n-row window."""
    out = {}
    for n in ns:
        A = dilation_matrix(n, lam)
        out[int(n)] = pnorm(adjoint(A).csr @ phi(n, 2 * n), 1)
    return out


def staircase_matrix(p, N: int) -> IndexedMatrix:
    """Column n (1-indexed) holds n copies of n^(-1/p) in rows T(n-1)..T(n)-1."""
    p = parse_p(p)
    N = int(N)
    if N < 1 or math.isinf(p):
        raise ParameterError("staircase needs N >= 1 and finite p")
    ns = np.arange(1, N + 1)
    cols = np.repeat(ns - 1, ns)
    rows = np.arange(N * (N + 1) // 2)
    vals = np.repeat(ns.astype(float) ** (-1.0 / p), ns)
    M = sp.coo_matrix((vals, (rows, cols)), shape=(rows.size, N))
    return IndexedMatrix(M, z_interval(N), None)


def random_walk_operator(n: int) -> IndexedMatrix:
    """I - P on the ℤ-window: 1 on the diagonal, -1/2 at distance 1."""
    n = int(n)
    if n < 2:
        raise ParameterError("random walk needs n >= 2")
    M = sp.diags([np.full(n - 1, -0.5), np.ones(n), np.full(n - 1, -0.5)], [-1, 0, 1])
    sp_ = z_interval(n)
    return IndexedMatrix(M, sp_, sp_)


def elliptic_operator(n: int, shift: float = 0.5) -> IndexedMatrix:
    """(I - P) + shift·I on the ℤ-window."""
    A = random_walk_operator(n)
    return A.with_matrix(A.csr + shift * sp.identity(int(n)))


def slanted_matrix(alpha: float, width: int, n: int, seed: int = 0) -> IndexedMatrix:
    """Uniform [-1, 1] entries on {(y, x) : |y - αx| <= width}, x in 0..n-1.

    Rows are the integers from min(αx) - width to max(αx) + width, reindexed from 0.
    """
    if alpha == 0:
        raise ParameterError("α must be nonzero")
    if width < 0:
        raise ParameterError("width must be >= 0")
    n = int(n)
    rng = np.random.default_rng(seed)
    x = np.arange(n)
    lo = math.floor(min(alpha * x[0], alpha * x[-1]) - width)
    hi = math.ceil(max(alpha * x[0], alpha * x[-1]) + width)
    rows, cols = [], []
    for xi in x:
        c = alpha * xi
        ys = np.arange(math.ceil(c - width - 1e-12), math.floor(c + width + 1e-12) + 1)
        rows.append(ys - lo)
        cols.append(np.full(ys.size, xi))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    vals = rng.uniform(-1.0, 1.0, rows.size)
    vals[vals == 0] = 1.0
    M = sp.coo_matrix((vals, (rows, cols)), shape=(hi - lo + 1, n))
    return IndexedMatrix(M, z_interval(n), None)


def _ball(space: MetricSpace, c: int, r: float) -> np.ndarray:
    if space.kind == "z_interval":
        R = int(math.floor(r))
        return np.arange(max(0, c - R), min(space.n, c + R + 1))
    return np.flatnonzero(space.dist_from(c) <= r)


def random_thin_sparse(
    space: MetricSpace,
    r: int,
    v: int | None,
    density: float = 0.5,
    seed: int = 0,
    n_rows: int | None = None,
    diag_shift: float = 0.0,
) -> IndexedMatrix:
    """Random matrix with row supports in balls of radius r and at most v nonzeros per column.

    With ``n_rows=None`` the rows are the space itself and row y is centered at y
    (so the matrix is banded with width <= r). Otherwise rows are a bare index set
    with seeded random centers (distinct when m <= n). ``v=None`` removes the column constraint (thin-∅).
    """
    if r < 0:
        raise ParameterError("r must be >= 0")
    if v is not None and v < 1:
        raise FeasibilityError("sparseness v must be >= 1")
    if not 0 <= density <= 1:
        raise ParameterError("density must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    n = space.n
    same = n_rows is None
    m = n if same else int(n_rows)
    if v is not None and m > n * v:
        raise FeasibilityError(f"{m} rows need at least one entry each but columns hold at most {n * v}")
    if same:
        centers = np.arange(n)
    elif m <= n:
        centers = np.sort(rng.choice(n, m, replace=False))
    else:
        centers = np.sort(rng.integers(0, n, m))
    cap = np.full(n, np.iinfo(np.int64).max if v is None else v, dtype=np.int64)
    rows, cols, vals = [], [], []
    # one entry per row first, at the center when capacity allows
    for y in range(m):
        c = int(centers[y])
        if cap[c] == 0:
            ball = _ball(space, c, r)
            free = ball[cap[ball] > 0]
            if free.size == 0:
                raise FeasibilityError(f"row {y}: no column with spare capacity within radius {r}")
            c = int(free[rng.integers(free.size)])
        rows.append(y)
        cols.append(c)
        vals.append(rng.uniform(-1.0, 1.0) + diag_shift * (c == centers[y]))
        cap[c] -= 1
    for y in range(m):
        c = int(centers[y])
        ball = _ball(space, c, r)
        pick = ball[rng.random(ball.size) < density]
        for x in pick:
            if x == cols[y] or cap[x] == 0:
                continue
            rows.append(y)
            cols.append(int(x))
            vals.append(rng.uniform(-1.0, 1.0))
            cap[x] -= 1
    vals = np.asarray(vals)
    vals[vals == 0] = 0.5
    M = sp.coo_matrix((vals, (rows, cols)), shape=(m, n))
    return IndexedMatrix(M, space, space if same else None)


def polynomial_decay_matrix(space: MetricSpace, beta: float, seed: int = 0, scale: float = 1.0) -> IndexedMatrix:
    """a_{x,y} = s·(1 + d(x,y))^(-β) with seeded random signs s."""
    if not beta > 1:
        raise ParameterError("β must exceed 1")
    return _decay_matrix(space, lambda d: scale * (1.0 + d) ** (-float(beta)), seed)


def exponential_decay_matrix(space: MetricSpace, rate: float = 1.0, seed: int = 0) -> IndexedMatrix:
    """a_{x,y} = s·exp(-rate·d(x,y)) with seeded random signs s."""
    if not rate > 0:
        raise ParameterError("rate must be positive")
    return _decay_matrix(space, lambda d: np.exp(-float(rate) * d), seed)


def _decay_matrix(space, profile, seed):
    rng = np.random.default_rng(seed)
    idx = np.arange(space.n)
    D = space.dist_block(idx, idx).astype(float)
    signs = np.where(rng.random(D.shape) < 0.5, -1.0, 1.0)
    M = signs * profile(D)
    return IndexedMatrix(sp.csr_matrix(M), space, space)


GENERATORS = {
    "dilation": dilation_matrix,
    "staircase": staircase_matrix,
    "random-walk": random_walk_operator,
    "elliptic": elliptic_operator,
    "slanted": slanted_matrix,
    "random-thin-sparse": random_thin_sparse,
    "polynomial-decay": polynomial_decay_matrix,
    "exponential-decay": exponential_decay_matrix,
}
