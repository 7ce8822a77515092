"""Extended exponents p in (0, inf] and the corresponding (quasi-)norms."""
from __future__ import annotations

import math

import numpy as np

from .errors import ParameterError

INF = math.inf

DEFAULT_GRID = (1.0, 4.0 / 3.0, 2.0, 3.0, 6.0, INF)


def parse_p(value) -> float:
    """Accept floats, ints and the literals ``"inf"``/``"∞"``."""
    if isinstance(value, str):
        s = value.strip().lower()
        if s in ("inf", "infinity", "∞", "+inf"):
            return INF
        try:
            value = float(s)
        except ValueError as exc:
            raise ParameterError(f"bad exponent {value!r}") from exc
    p = float(value)
    if not p > 0:
        raise ParameterError(f"exponent must be positive, got {p}")
    return p


def parse_grid(text) -> list[float]:
    if isinstance(text, str):
        items = [t for t in text.replace(";", ",").split(",") if t.strip()]
    else:
        items = list(text)
    return [parse_p(t) for t in items]


def recip(p: float) -> float:
    """1/p with 1/inf = 0."""
    return 0.0 if math.isinf(p) else 1.0 / p


def fmt_p(p: float) -> str:
    if math.isinf(p):
        return "inf"
    return f"{p:.10g}"


def pnorm(x, p: float) -> float:
    x = np.abs(np.asarray(x, dtype=float))
    if x.size == 0:
        return 0.0
    if math.isinf(p):
        return float(x.max())
    if p == 1:
        return float(x.sum())
    if p == 2:
        return float(math.sqrt(np.dot(x, x)))
    m = x.max()
    if m == 0:
        return 0.0
    # scale first to avoid overflow/underflow of |x|^p
    return float(m * np.sum((x / m) ** p) ** (1.0 / p))


def column_pnorms(M, p: float) -> np.ndarray:
    """p-norms of the columns of a dense or scipy-sparse matrix."""
    import scipy.sparse as sp

    if sp.issparse(M):
        M = M.tocsc()
        A = abs(M)
        if math.isinf(p):
            return A.max(axis=0).toarray().ravel()
        if p == 1:
            return np.asarray(A.sum(axis=0)).ravel()
        return np.asarray(A.power(p).sum(axis=0)).ravel() ** (1.0 / p)
    A = np.abs(np.asarray(M, dtype=float))
    if math.isinf(p):
        return A.max(axis=0) if A.shape[0] else np.zeros(A.shape[1])
    return np.sum(A**p, axis=0) ** (1.0 / p)


def dual_exponent(p: float) -> float:
    if p == 1:
        return INF
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)
