"""Lower ℓᵖ bounds λ_p(A): estimation, localization, propagation across exponents, thinning."""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import kernels
from .errors import (
    CapacityError,
    DecayViolationError,
    DegenerateInputError,
    ParameterError,
    StepTooLargeError,
)
from .exponents import DEFAULT_GRID, INF, fmt_p, parse_grid, parse_p, pnorm, recip
from .opmat import (
    DENSE_CAP,
    IndexedMatrix,
    absolute,
    norm_1,
    norm_2,
    norm_inf,
    op_norm,
    pnorm_power,
    row_radii,
    subtract,
)
from .space import covering, cutoff, select_color_class

SIGN_PATTERN_CAP = 20
DEGENERACY_RATIO = 1e-6
Z_K = 18.0
Z_C1 = 3.0
Z_LAMBDA2_FACTOR = 162.0
COVER_ALPHA = 6.0


def ratio(A: IndexedMatrix, f, p) -> float:
    """‖Af‖_p / ‖f‖_p."""
    f = np.asarray(f, dtype=float)
    nf = pnorm(f, p)
    if nf == 0:
        raise DegenerateInputError("ratio of a zero vector")
    return pnorm(A.csr @ f, p) / nf


def support_ball(space, f) -> tuple[float | None, int | None]:
    """(radius, center) of the smallest ball of the space containing supp f."""
    idx = np.flatnonzero(np.asarray(f))
    if space is None or idx.size == 0:
        return None, None
    M = sp.csr_matrix((np.ones(idx.size), idx, [0, idx.size]), shape=(1, space.n))
    rad, cen = row_radii(space, M)
    r = int(rad[0]) if space.is_lattice else float(rad[0])
    return r, int(cen[0])


def support_radius(space, f) -> float | None:
    return support_ball(space, f)[0]


# -- λ estimates -----------------------------------------------------------------
@dataclass
class LambdaEstimate:
    p: float
    value: float
    witness: np.ndarray = field(repr=False)
    method: str  # exact_svd | exact_inverse | sign_pattern | optimizer | localized_sweep
    tolerance: float
    seed: int | None = None
    starts: int = 0

    def recompute(self, A: IndexedMatrix) -> float:
        return ratio(A, self.witness, self.p)

    def witness_support_radius(self, space) -> float | None:
        return support_radius(space, self.witness)

    def to_json(self, space=None) -> dict:
        return {
            "p": fmt_p(self.p),
            "lambda_hat": self.value,
            "method": self.method,
            "tolerance": self.tolerance,
            "seed": self.seed,
            "witness_support_radius": self.witness_support_radius(space),
        }


def _estimate(A, p, f, method, tol, seed=None, starts=0) -> LambdaEstimate:
    f = np.asarray(f, dtype=float)
    f = f / pnorm(f, 2)
    return LambdaEstimate(parse_p(p), ratio(A, f, p), f, method, tol, seed, starts)


def _unit_zero_witness(A, p, method, seed):
    f = np.zeros(A.n_cols)
    f[0] = 1.0
    return LambdaEstimate(parse_p(p), 0.0, f, method, 0.0, seed)


def _dense_cap(A):
    if max(A.shape) > DENSE_CAP:
        raise CapacityError(f"window {A.shape} exceeds the dense cap {DENSE_CAP}; use the optimizer or a smaller window")


def lambda_exact_2(A: IndexedMatrix) -> LambdaEstimate:
    """σ_min(A) with its right singular vector."""
    _dense_cap(A)
    if A.n_cols == 0:
        raise DegenerateInputError("matrix has no columns")
    M = A.todense()
    _, s, Vt = np.linalg.svd(M, full_matrices=True)
    if A.n_rows < A.n_cols:
        w = Vt[-1]
    else:
        w = Vt[int(np.argmin(s))]
    return _estimate(A, 2.0, w, "exact_svd", 1e-12 * max(float(s.max()) if s.size else 0.0, 1.0))


def _square_inverse(A: IndexedMatrix):
    if A.n_rows != A.n_cols:
        raise ParameterError("exact λ via the inverse needs a square matrix")
    _dense_cap(A)
    M = A.todense()
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[-1] <= 1e-13 * s[0]:
        return M, None
    return M, np.linalg.inv(M)


def lambda_exact_inverse(A: IndexedMatrix, p) -> LambdaEstimate:
    """λ_1 = 1/max column sum of A⁻¹, λ_∞ = 1/max row sum of A⁻¹ (square invertible A)."""
    p = parse_p(p)
    if p == 2:
        return lambda_exact_2(A)
    if p not in (1.0, INF):
        raise ParameterError("exact inverse formula only for p in {1, 2, inf}")
    M, Minv = _square_inverse(A)
    if Minv is None:
        est = lambda_exact_2(A)
        return LambdaEstimate(p, ratio(A, est.witness, p), est.witness, "exact_inverse", 1e-12, None)
    if p == 1:
        j = int(np.argmax(np.abs(Minv).sum(axis=0)))
        f = Minv[:, j]
    else:
        i = int(np.argmax(np.abs(Minv).sum(axis=1)))
        f = Minv @ np.where(Minv[i] >= 0, 1.0, -1.0)
    return _estimate(A, p, f, "exact_inverse", 1e-12)


def lambda_sign_pattern(A: IndexedMatrix, p) -> LambdaEstimate:
    """λ_p for p in {1, inf} by exhaustive search over sign vectors (small square A)."""
    p = parse_p(p)
    if p not in (1.0, INF):
        raise ParameterError("sign-pattern search is for p in {1, inf}")
    if A.n_cols > SIGN_PATTERN_CAP:
        raise CapacityError(f"sign-pattern search capped at n = {SIGN_PATTERN_CAP}")
    M, Minv = _square_inverse(A)
    if Minv is None:
        est = lambda_exact_2(A)
        return LambdaEstimate(p, ratio(A, est.witness, p), est.witness, "sign_pattern", 0.0, None)
    if math.isinf(p):
        # ‖A⁻¹‖_∞ = max over u ∈ {±1}ⁿ of ‖A⁻¹u‖_∞
        val, u = kernels.sign_pattern_max(np.ascontiguousarray(Minv))
        f = Minv @ np.asarray(u, dtype=float)
    else:
        # ‖A⁻¹‖_1 = ‖A⁻ᵀ‖_∞; the extremal vector is a column of A⁻¹
        val, _ = kernels.sign_pattern_max(np.ascontiguousarray(Minv.T))
        j = int(np.argmax(np.abs(Minv).sum(axis=0)))
        f = Minv[:, j]
    est = _estimate(A, p, f, "sign_pattern", 1e-12)
    est.tolerance = abs(est.value - 1.0 / val)
    return est


def _grad_norm(y, p):
    """A subgradient of ‖y‖_p."""
    if math.isinf(p):
        g = np.zeros_like(y)
        k = int(np.argmax(np.abs(y)))
        g[k] = np.sign(y[k])
        return g
    if p == 1:
        return np.sign(y)
    ny = pnorm(y, p)
    if ny == 0:
        return np.zeros_like(y)
    ay = np.abs(y) / ny
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(ay > 0, ay ** (p - 1), 0.0)
    return np.sign(y) * w


def _descend(A, AT, f, p, iters):
    """Normalized subgradient descent on log ‖Af‖_p/‖f‖_p with backtracking."""
    f = f / np.linalg.norm(f)
    Af = A @ f
    nf, nAf = pnorm(f, p), pnorm(Af, p)
    val = nAf / nf
    eta = 0.1
    for _ in range(iters):
        if val == 0 or eta < 1e-12:
            break
        g = AT @ _grad_norm(Af, p) / nAf - _grad_norm(f, p) / nf
        gn = np.linalg.norm(g)
        if gn == 0 or not np.isfinite(gn):
            break
        cand = f - eta * g / gn
        nc = np.linalg.norm(cand)
        if nc == 0:
            eta *= 0.5
            continue
        cand /= nc
        Ac = A @ cand
        nfc = pnorm(cand, p)
        vc = pnorm(Ac, p) / nfc if nfc > 0 else math.inf
        if vc < val:
            f, Af, nf, nAf, val = cand, Ac, nfc, pnorm(Ac, p), vc
            eta *= 1.2
        else:
            eta *= 0.5
    return val, f


def _start_vectors(A: IndexedMatrix, p, starts, rng):
    n = A.n_cols
    out = []
    if max(A.shape) <= DENSE_CAP:
        est = lambda_exact_2(A)
        out.append(("svd", est.witness))
        if A.n_rows == A.n_cols and n > 1:
            M = A.todense()
            try:
                with warnings.catch_warnings():
                    # a singular factor is detected just below
                    warnings.simplefilter("ignore", sla.LinAlgWarning)
                    lu = sla.lu_factor(M, check_finite=False)
                if np.all(np.isfinite(lu[0])) and np.min(np.abs(np.diag(lu[0]))) > 0:
                    _, x = pnorm_power(
                        lambda v: sla.lu_solve(lu, v), lambda v: sla.lu_solve(lu, v, trans=1), n, p, iters=50
                    )
                    out.append(("inverse_power", sla.lu_solve(lu, x)))
            except (ValueError, np.linalg.LinAlgError):
                pass
    cols = np.asarray([pnorm(A.csc[:, j].toarray().ravel(), p) for j in range(n)]) if n <= 4096 else None
    if cols is not None:
        for j in np.argsort(cols, kind="stable")[: min(n, 8)]:
            e = np.zeros(n)
            e[j] = 1.0
            out.append(("basis", e))
    for _ in range(starts):
        out.append(("dense", rng.standard_normal(n)))
    space = A.col_space
    for _ in range(starts):
        f = np.zeros(n)
        c = int(rng.integers(n))
        rad = int(rng.integers(1, 6))
        if space is not None:
            ball = np.flatnonzero(space.dist_from(c) <= rad)
        else:
            ball = np.arange(max(0, c - rad), min(n, c + rad + 1))
        f[ball] = rng.standard_normal(ball.size)
        if not f.any():
            f[c] = 1.0
        out.append(("bump", f))
    return out


def lambda_estimate(A: IndexedMatrix, p, budget=(8, 200), seed: int = 0, localize_L=None) -> LambdaEstimate:
    """Multi-start minimization of ‖Af‖_p/‖f‖_p; the result is a witnessed upper bound on λ_p."""
    p = parse_p(p)
    starts, iters = int(budget[0]), int(budget[1])
    if A.n_cols == 0:
        raise DegenerateInputError("matrix has no columns")
    if A.nnz == 0:
        return _unit_zero_witness(A, p, "optimizer", seed)
    rng = np.random.default_rng(seed)
    M, MT = A.csr, A.csr.T.tocsr()
    results = []
    for k, (_, f0) in enumerate(_start_vectors(A, p, starts, rng)):
        if not np.any(f0):
            continue
        val, f = _descend(M, MT, np.asarray(f0, dtype=float), p, iters)
        results.append((val, k, f, "optimizer"))
    results.sort(key=lambda t: (t[0], t[1]))
    best_val, _, best_f, _ = results[0]
    if p >= 1 and A.same and A.col_space is not None and best_val > 0:
        r = max(float(A.stats.band_width), 1.0)
        Ls = localize_L or [L for L in (2 * r, 8 * r, 32 * r) if L < A.col_space.diameter]
        base = len(results)
        for j, L in enumerate(Ls):
            try:
                loc = localize(A, best_f, L, p)
            except (DegenerateInputError, ParameterError):
                continue
            val, f = _descend(M, MT, loc.h, p, iters)
            results.append((val, base + j, f, "localized_sweep"))
        results.sort(key=lambda t: (t[0], t[1]))
    val, _, f, method = results[0]
    est = _estimate(A, p, f, method, 0.0, seed, len(results))
    return est


def estimate_lambda(A: IndexedMatrix, p, method: str = "auto", budget=(8, 200), seed: int = 0) -> LambdaEstimate:
    """Dispatch: exact where a closed form applies at this size, optimizer otherwise."""
    p = parse_p(p)
    small = max(A.shape) <= DENSE_CAP
    if method == "auto":
        if p == 2 and small:
            method = "exact_svd"
        elif p in (1.0, INF) and small and A.n_rows == A.n_cols:
            method = "exact_inverse"
        else:
            method = "optimizer"
    if method == "exact_svd":
        if p != 2:
            raise ParameterError("exact_svd is only available at p = 2")
        return lambda_exact_2(A)
    if method == "exact_inverse":
        return lambda_exact_inverse(A, p)
    if method == "sign_pattern":
        return lambda_sign_pattern(A, p)
    if method == "optimizer":
        return lambda_estimate(A, p, budget, seed)
    raise ParameterError(f"unknown λ method {method!r}")


# -- localization ---------------------------------------------------------------------
@dataclass
class LocalizeResult:
    h: np.ndarray = field(repr=False)
    ratio_h: float
    ratio_f: float
    bound: float
    holds: bool
    C1: float
    C2: float
    r: float
    L: float
    p: float
    form: str  # "z" or "general"
    center: int
    radius: float
    pieces: int
    choice: object = None
    additivity_gap: float = 0.0

    def to_json(self) -> dict:
        return {
            "ratio_h": self.ratio_h,
            "ratio_f": self.ratio_f,
            "bound": self.bound,
            "holds": self.holds,
            "C1": self.C1,
            "C2": self.C2,
            "r": self.r,
            "L": self.L,
            "p": fmt_p(self.p),
            "form": self.form,
            "center": self.center,
            "radius": self.radius,
            "pieces": self.pieces,
            "choice": self.choice,
            "additivity_gap": self.additivity_gap,
            "alpha": COVER_ALPHA,
        }


def _pick_piece(A, g, labels, p):
    """Split g by piece labels and return the piece of smallest ratio, plus the additivity gap."""
    idx = np.flatnonzero((g != 0) & (labels >= 0))
    lab, inv = np.unique(labels[idx], return_inverse=True)
    G = sp.csc_matrix((g[idx], (idx, inv)), shape=(g.size, lab.size))
    AG = (A.csr @ G).tocsc()
    num = np.array([pnorm(AG[:, k].toarray().ravel(), p) for k in range(lab.size)])
    den = np.array([pnorm(G[:, k].toarray().ravel(), p) for k in range(lab.size)])
    ratios = num / den
    k = int(np.argmin(ratios))
    h = G[:, k].toarray().ravel()
    Ag = pnorm(A.csr @ g, p)
    if math.isinf(p):
        gap = abs(Ag - num.max())
    else:
        gap = abs(Ag**p - float(np.sum(num**p))) / max(Ag**p, 1e-300)
    return h, float(ratios[k]), lab.size, gap


def localize(A: IndexedMatrix, f, L: float, p) -> LocalizeResult:
    """Replace f by a piece h supported in a ball of radius 2L with comparable ratio.

    On a ℤ window with Y = X the sharper constants apply:
    ratio(h) ≤ 3·(ratio(f) + 3r²‖A‖_sup/L) with r the band width.
    Elsewhere ratio(h) ≤ 2·numColors·(ratio(f) + ‖|A|‖·r/L) with r the thickness.
    """
    p = parse_p(p)
    if p < 1:
        raise ParameterError("localize needs p >= 1")
    f = np.asarray(f, dtype=float)
    if f.shape != (A.n_cols,):
        raise ParameterError("f must be a function on the column space")
    if A.col_space is None:
        raise ParameterError("localize needs a column metric space")
    L = float(L)
    if not pnorm(f, p) > 0:
        raise DegenerateInputError("f vanishes identically")
    rf = ratio(A, f, p)
    space = A.col_space
    if space.kind == "z_interval" and A.same:
        r = float(A.stats.band_width)
        if L < r or L <= 0:
            raise ParameterError(f"L = {L} is below the band width {r}")
        x = space.coords[:, 0].astype(float)
        period = 6.0 * L
        best = None
        for s in (0.0, 2.0 * L, 4.0 * L):
            t = np.mod(x - s, period)
            d = np.minimum(t, period - t)
            delta = np.maximum(0.0, 1.0 - d / (2.0 * L))
            g = delta * f
            ng = pnorm(g, p)
            if best is None or ng > best[0]:
                best = (ng, s, g, np.floor((x - s) / period + 0.5).astype(np.int64), d)
        _, s, g, labels, d = best
        labels = np.where(d < 2.0 * L, labels, -1)
        h, rh, npieces, gap = _pick_piece(A, g, labels, p)
        C1, C2 = Z_C1, 3.0 * r * r * A.sup
        bound = C1 * (rf + C2 / L)
        form, choice = "z", {"shift": s}
    else:
        r = float(A.stats.thickness)
        if L < r or L <= 0:
            raise ParameterError(f"L = {L} is below the thickness {r}")
        cov = covering(space, L, COVER_ALPHA)
        ch = select_color_class(f, cov, p)
        prof = cutoff(ch.centers, L, space)
        g = prof.values * f
        D = space.dist_block(ch.centers, np.arange(space.n))
        near = D < 2.0 * L
        labels = np.where(near.any(axis=0), np.argmax(near, axis=0), -1)
        h, rh, npieces, gap = _pick_piece(A, g, labels, p)
        C1 = 2.0 * cov.num_colors
        C2 = max(norm_1(A), norm_inf(A))
        bound = C1 * (rf + C2 * r / L)
        form, choice = "general", {"color": ch.color, "num_colors": cov.num_colors}
    rh = ratio(A, h, p)
    rad, center = support_ball(space, h)
    return LocalizeResult(
        h=h,
        ratio_h=rh,
        ratio_f=rf,
        bound=bound,
        holds=bool(rh <= bound * (1 + 1e-12)),
        C1=C1,
        C2=C2,
        r=r,
        L=L,
        p=p,
        form=form,
        center=center,
        radius=rad,
        pieces=npieces,
        choice=choice,
        additivity_gap=gap,
    )


# -- propagation ------------------------------------------------------------------------
@dataclass
class PropagationConstants:
    C1: float
    C2: float
    K: float
    d: float
    r: float
    v: float | None
    k: float | None = None
    t: float | None = None
    s: float | None = None
    form: str = "general"

    @property
    def u(self) -> float | None:
        if self.t is None or self.s is None:
            return None
        return min(0.5, self.t / 2.0, self.s * self.d)

    @classmethod
    def for_matrix(cls, A: IndexedMatrix, t=None, s=None) -> "PropagationConstants":
        st = A.stats
        if A.same and A.col_space.kind == "z_interval":
            r = float(st.band_width)
            return cls(Z_C1, 3.0 * r * r * A.sup, Z_K, 1.0, r, float(st.sparseness), t=t, s=s, form="z")
        space = A.col_space
        r = float(st.thickness)
        cov = covering(space, max(r, 1.0), COVER_ALPHA)
        C1 = 2.0 * cov.num_colors
        return cls(
            C1, max(norm_1(A), norm_inf(A)), 2.0 * C1 * space.growth_K, space.growth_d, r, float(st.sparseness), t=t, s=s
        )

    def to_json(self) -> dict:
        return {
            "C1": self.C1,
            "C2": self.C2,
            "K": self.K,
            "k": self.k,
            "d": self.d,
            "r": self.r,
            "v": self.v,
            "t": self.t,
            "s": self.s,
            "u": self.u,
            "form": self.form,
            "alpha": COVER_ALPHA,
        }


def _gap(p, q, d):
    return abs(d * recip(p) - d * recip(q))


def propagation_bound(lam_q: float, p, q, consts: PropagationConstants, variant: str = "TS") -> float:
    """Lower bound on λ_p from λ_q across a single exponent step with |d/p - d/q| < 1."""
    p, q = parse_p(p), parse_p(q)
    delta = _gap(p, q, consts.d)
    if delta >= 1:
        raise StepTooLargeError(f"|d/p - d/q| = {delta:.6g} >= 1; chain smaller steps")
    if variant == "T0":
        if p > q:
            raise ParameterError("the thin-∅ propagation needs p <= q")
        factor = consts.K
    elif variant == "TS":
        if consts.v is None:
            raise ParameterError("thin-sparse propagation needs the sparseness v")
        factor = consts.K * max(consts.v, 1.0) ** abs(recip(p) - recip(q))
    else:
        raise ParameterError(f"unknown variant {variant!r}")
    factor *= max(consts.r, 1.0) ** delta
    if lam_q <= 0:
        return 0.0
    return (lam_q / factor) ** (1.0 / (1.0 - delta))


@dataclass
class ChainStep:
    p_from: float
    p_to: float
    gap: float
    bound: float


@dataclass
class ChainResult:
    Lambda: float
    p_M: float
    per_target: dict  # p -> {"bound", "exponent", "steps"}
    bound: float
    exponent: float
    k: float
    z_lambda2: dict | None = None

    def to_json(self) -> dict:
        return {
            "Lambda": self.Lambda,
            "p_M": fmt_p(self.p_M),
            "bound": self.bound,
            "exponent": self.exponent,
            "k": self.k,
            "per_target": {
                fmt_p(p): {
                    "bound": v["bound"],
                    "exponent": v["exponent"],
                    "steps": [[fmt_p(s.p_from), fmt_p(s.p_to), s.gap, s.bound] for s in v["steps"]],
                }
                for p, v in self.per_target.items()
            },
            "z_lambda2": self.z_lambda2,
        }


def _chain_points(p_from, p_to, d):
    """Exponents visited from p_from to p_to in equal d/p-steps of size at most 1/2."""
    x0, x1 = d * recip(p_from), d * recip(p_to)
    n = max(1, math.ceil(abs(x1 - x0) / 0.5 - 1e-12))
    pts = []
    for i in range(1, n + 1):
        x = x0 + (x1 - x0) * i / n
        pts.append(INF if x <= 0 else d / x)
    pts[-1] = p_to
    return pts


def chain_propagation(estimates: dict, consts: PropagationConstants, variant: str | None = None) -> ChainResult:
    """Propagate the largest λ̂ over the grid to every other grid exponent."""
    if not estimates:
        raise ParameterError("empty grid")
    if variant is None:
        variant = "TS" if consts.v is not None else "T0"
    vals = {parse_p(p): float(v) for p, v in estimates.items()}
    Lam = max(vals.values())
    # ties toward p = 2 (in reciprocal distance)
    p_M = min((p for p, v in vals.items() if v == Lam), key=lambda p: (abs(recip(p) - 0.5), recip(p)))
    per = {}
    for target in vals:
        if target == p_M:
            per[target] = {"bound": Lam, "exponent": 1.0, "steps": []}
            continue
        if variant == "T0" and target > p_M:
            continue
        lam, expo, cur = Lam, 1.0, p_M
        steps = []
        for nxt in _chain_points(p_M, target, consts.d):
            g = _gap(nxt, cur, consts.d)
            lam = propagation_bound(lam, nxt, cur, consts, variant)
            expo /= 1.0 - g
            steps.append(ChainStep(cur, nxt, g, lam))
            cur = nxt
        per[target] = {"bound": lam, "exponent": expo, "steps": steps}
    worst = min(per, key=lambda p: per[p]["bound"])
    bound, expo = per[worst]["bound"], max(v["exponent"] for v in per.values())
    k = bound / Lam ** per[worst]["exponent"] if Lam > 0 else 0.0
    return ChainResult(Lam, p_M, per, bound, expo, k)


def z_lambda2_bound(Lambda: float, r: float, sup: float) -> float:
    """λ₂ ≥ Λ²/(162·r³·‖A‖_sup) on ℤ, with r the band width (at least 1)."""
    r = max(float(r), 1.0)
    if sup <= 0:
        return math.inf
    return Lambda**2 / (Z_LAMBDA2_FACTOR * r**3 * sup)


def z_lambda2_check(lambda2: float, estimates: dict, r: float, sup: float, tol: float = 1e-6) -> dict:
    """For every grid p: λ₂ ≥ (λ̂_p - tol)²/(162 r³ ‖A‖_sup)."""
    rows = {}
    ok = True
    for p, lam in estimates.items():
        b = z_lambda2_bound(max(float(lam) - tol, 0.0), r, sup)
        good = bool(lambda2 >= b)
        ok &= good
        rows[fmt_p(parse_p(p))] = {"lambda_hat": float(lam), "bound": b, "holds": good}
    return {"holds": ok, "lambda2": lambda2, "factor": Z_LAMBDA2_FACTOR, "r": max(float(r), 1.0), "sup": sup, "per_p": rows}


# -- almost thin-sparse ---------------------------------------------------------------------
@dataclass
class AlmostTSResult:
    localized: LocalizeResult
    ratio_h: float
    ratio_f: float
    approx_error: float
    decay_budget: float
    bound: float
    holds: bool
    r: float
    v: float
    L: float

    def to_json(self) -> dict:
        return {
            "ratio_h": self.ratio_h,
            "ratio_f": self.ratio_f,
            "approx_error": self.approx_error,
            "decay_budget": self.decay_budget,
            "bound": self.bound,
            "holds": self.holds,
            "r": self.r,
            "v": self.v,
            "L": self.L,
            "inner": self.localized.to_json(),
        }


def almost_ts_localize(A: IndexedMatrix, approximants, f, L, p, t, s, r, v, K: float = 1.0) -> AlmostTSResult:
    """Localize through a thin-sparse approximant A_{r,v}; the error term is measured, not assumed.

    ``approximants`` maps (r, v) to an IndexedMatrix, or is the approximant itself.
    """
    p = parse_p(p)
    if L < 1:
        raise ParameterError("L must be >= 1")
    Arv = approximants(r, v) if callable(approximants) else approximants
    err = op_norm(absolute(subtract(A, Arv)), p).upper
    budget = K * (float(r) ** (-t) + float(v) ** (-s))
    if err > budget * (1 + 1e-12):
        raise DecayViolationError(
            f"‖|A - A_rv|‖ = {err:.6g} exceeds K(r^-t + v^-s) = {budget:.6g}", measured={"error": err, "budget": budget}
        )
    loc = localize(Arv, f, L, p)
    rf = ratio(A, f, p)
    rh = ratio(A, loc.h, p)
    if loc.form == "z":
        bound = loc.C1 * (rf + err + loc.C2 / loc.L) + err
    else:
        bound = loc.C1 * (rf + err + loc.C2 * loc.r / loc.L) + err
    return AlmostTSResult(loc, rh, rf, err, budget, bound, bool(rh <= bound * (1 + 1e-12)), float(r), float(v), float(L))


@dataclass(frozen=True)
class AlmostTSPreset:
    u: float
    L: float
    r: float
    v: float


def almost_ts_preset(lam: float, t: float, s: float, d: float) -> AlmostTSPreset:
    """u = min{1/2, t/2, s·d}, L = λ^(-1/u), r = L^(1/2), v = L^d."""
    if not (t > 0 and s > 0 and d > 0):
        raise ParameterError("t, s and d must be positive")
    if not 0 < lam < 1:
        raise ParameterError("the preset needs 0 < λ < 1")
    u = min(0.5, t / 2.0, s * d)
    L = lam ** (-1.0 / u)
    return AlmostTSPreset(u, L, math.sqrt(L), L**d)


# -- ordered sequences and thinning -----------------------------------------------------------
def sequence_tail_bound(p, q, m) -> float:
    """Upper bound on (Σ_{i>m} a_i^q)^(1/q) over non-increasing a with Σ a_i^p = 1."""
    p, q = parse_p(p), parse_p(q)
    if not q > p:
        raise ParameterError("sequence_tail_bound needs q > p")
    if m < 1:
        raise ParameterError("m must be >= 1")
    if math.isinf(q):
        return (m + 1.0) ** (-1.0 / p)
    a = p / q
    return a ** (1.0 / q) * (1.0 - a) ** (1.0 / p - 1.0 / q) / m ** (1.0 / p - 1.0 / q)


def flat_tail(p, q, m, k) -> float:
    """(Σ_{i>m} a_i^q)^(1/q) for the flat sequence of k entries k^(-1/p)."""
    p, q = parse_p(p), parse_p(q)
    if k <= m:
        return 0.0
    if math.isinf(q):
        return k ** (-1.0 / p)
    return ((k - m) / k ** (q / p)) ** (1.0 / q)


def tail_value(a, q, m) -> float:
    """(Σ_{i>m} a_i^q)^(1/q) of a sorted non-increasing sequence."""
    return pnorm(np.asarray(a, dtype=float)[m:], q)


@dataclass
class ThinningResult:
    A_m: IndexedMatrix
    scale: float
    bound: float
    measured: dict
    m: int
    p: float
    q: float
    v_r: int

    @property
    def holds(self) -> bool:
        return self.measured[self.q] <= self.bound * (1 + 1e-12)

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "p": fmt_p(self.p),
            "q": fmt_p(self.q),
            "scale": self.scale,
            "bound": self.bound,
            "v_r": self.v_r,
            "measured": {fmt_p(k): v for k, v in self.measured.items()},
            "holds": self.holds,
        }


def top_m_thinning(A: IndexedMatrix, m: int, p, q) -> ThinningResult:
    """Keep the m largest entries of each column of A/‖A‖_p (ties to the smallest row)."""
    p, q = parse_p(p), parse_p(q)
    if q < max(p, 1.0):
        raise ParameterError("top-m thinning needs q >= max(p, 1)")
    if m < 1:
        raise ParameterError("m must be >= 1")
    nv = op_norm(A, p)
    scale = nv.value if nv.value > 0 else 1.0
    B = A.csc.astype(float) / scale
    B = sp.csc_matrix(B)
    B.sort_indices()
    keep = np.zeros(B.nnz, dtype=bool)
    for j in range(B.shape[1]):
        lo, hi = B.indptr[j], B.indptr[j + 1]
        if hi - lo <= m:
            keep[lo:hi] = True
            continue
        a = np.abs(B.data[lo:hi])
        order = np.lexsort((B.indices[lo:hi], -a))
        keep[lo + order[:m]] = True
    Am = sp.csc_matrix((np.where(keep, B.data, 0.0), B.indices, B.indptr), shape=B.shape)
    tail = sp.csc_matrix((np.where(keep, 0.0, np.abs(B.data)), B.indices, B.indptr), shape=B.shape)
    Am_ix = IndexedMatrix(Am, A.col_space, A.row_space)
    T = IndexedMatrix(tail, A.col_space, A.row_space)
    measured = {1.0: norm_1(T), 2.0: norm_2(T).value, INF: norm_inf(T)}
    if q not in measured:
        measured[q] = op_norm(T, q).upper
    r = A.stats.thickness
    v_r = A.col_space.max_volume(r) if A.col_space is not None else A.stats.row_sparseness
    if math.isinf(q):
        bound = sequence_tail_bound(p, INF, m) * v_r
    elif q == p:
        bound = 1.0 * v_r ** (1.0 - 1.0 / q)
    else:
        bound = sequence_tail_bound(p, q, m) * v_r ** (1.0 - 1.0 / q)
    return ThinningResult(Am_ix, scale, bound, measured, m, p, q, v_r)


# -- reports ------------------------------------------------------------------------------------
@dataclass
class StabilityReport:
    p_grid: list
    estimates: dict
    lambda_small: float
    Lambda_big: float
    p_m: float
    p_M: float
    verdict: str
    threshold: float
    norm2: float
    constants: PropagationConstants | None = None
    chain: ChainResult | None = None
    z_lambda2: dict | None = None
    space: object = field(default=None, repr=False)
    seed: int = 0

    def to_json(self) -> dict:
        return {
            "p_grid": [fmt_p(p) for p in self.p_grid],
            "estimates": [self.estimates[p].to_json(self.space) for p in self.p_grid],
            "lambda": self.lambda_small,
            "Lambda": self.Lambda_big,
            "p_m": fmt_p(self.p_m),
            "p_M": fmt_p(self.p_M),
            "verdict": self.verdict,
            "threshold": self.threshold,
            "norm2": self.norm2,
            "constants": self.constants.to_json() if self.constants else None,
            "chain": self.chain.to_json() if self.chain else None,
            "z_lambda2": self.z_lambda2,
            "fixed_constants": {"K_Z": Z_K, "z_lambda2_factor": Z_LAMBDA2_FACTOR, "alpha": COVER_ALPHA},
            "seed": self.seed,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["p", "lambda_hat", "method", "witness_support_radius", "seed"])
        for p in self.p_grid:
            e = self.estimates[p]
            w.writerow([fmt_p(p), repr(e.value), e.method, e.witness_support_radius(self.space), self.seed])
        return buf.getvalue()


def stability_report(
    A: IndexedMatrix,
    p_grid=DEFAULT_GRID,
    seed: int = 0,
    budget=(8, 200),
    require_standard: bool = True,
    method: str = "auto",
) -> StabilityReport:
    grid = parse_grid(p_grid)
    if require_standard and not {1.0, 2.0, INF} <= set(grid):
        raise ParameterError("p grid must include 1, 2 and inf")
    ests = {p: estimate_lambda(A, p, method, budget, seed) for p in grid}
    vals = {p: e.value for p, e in ests.items()}
    lam = min(vals.values())
    Lam = max(vals.values())
    p_m = min(vals, key=lambda p: (vals[p], abs(recip(p) - 0.5)))
    p_M = max(vals, key=lambda p: (vals[p], -abs(recip(p) - 0.5)))
    n2 = norm_2(A).value
    thr = DEGENERACY_RATIO * n2
    verdict = "degenerate" if all(v < thr for v in vals.values()) else "uniformly_bounded_below"
    consts = chain = z = None
    if A.same and A.col_space is not None and A.nnz:
        consts = PropagationConstants.for_matrix(A)
        chain = chain_propagation(vals, consts)
        consts.k = chain.k
        if consts.form == "z" and 2.0 in vals:
            z = z_lambda2_check(vals[2.0], vals, consts.r, A.sup, tol=0.0)
            z["bound_from_Lambda"] = z_lambda2_bound(Lam, consts.r, A.sup)
            chain.z_lambda2 = z
    return StabilityReport(grid, ests, lam, Lam, p_m, p_M, verdict, thr, n2, consts, chain, z, A.col_space, seed)
