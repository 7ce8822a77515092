"""Left inverses B = (A*A)⁻¹A*, band truncation with decay fits, and the window-sweep pipeline."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import CapacityError, NotBoundedBelowError, ParameterError, StructureError
from .exponents import DEFAULT_GRID, INF, fmt_p, parse_p
from .opmat import (
    DENSE_CAP,
    IndexedMatrix,
    Weight,
    cd_norm,
    check_gram_banded,
    norm_1,
    norm_2,
    norm_inf,
    op_norm,
    restrict,
    schur_norm,
    weighted_schur_norm,
)
from .stability import estimate_lambda, stability_report

SIGMA_TOL = 1e-9
BA_TOL = 1e-8
WINDOW_RATIO = 2.0
TREND_SLOPE = -0.5


def band_truncate(A: IndexedMatrix, r: float) -> IndexedMatrix:
    """Drop entries with d(x, y) > r."""
    if not A.same:
        raise StructureError("band truncation needs Y = X")
    rows, cols, vals = A.coo
    keep = A.entry_dist() <= r
    M = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=A.shape)
    return A.with_matrix(M)


@dataclass
class DecayProfile:
    radii: list
    errors: list
    fitted_t: float
    fit_residual: float
    semilog_rate: float | None = None
    semilog_residual: float | None = None
    flags: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "radii": list(self.radii),
            "errors": list(self.errors),
            "fitted_t": "inf" if math.isinf(self.fitted_t) else self.fitted_t,
            "fit_residual": self.fit_residual,
            "semilog_rate": self.semilog_rate,
            "semilog_residual": self.semilog_residual,
            "flags": list(self.flags),
        }


def _lsq(x, y):
    X = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    res = y - X @ coef
    return coef, float(np.sqrt(np.mean(res**2)))


def default_radii(A: IndexedMatrix) -> list:
    diam = A.col_space.diameter
    rs = [r for r in (16, 32, 64, 128, 256) if r < diam]
    if len(rs) < 3:
        rs = sorted({max(1, int(round(diam * f))) for f in (0.1, 0.2, 0.4)})
    return rs


def decay_profile(A: IndexedMatrix, radii=None) -> DecayProfile:
    """Schur-norm errors ‖A - A_r‖ over the radii with a log-log least-squares fit of the exponent."""
    if not A.same:
        raise StructureError("decay profile needs Y = X")
    radii = sorted(float(r) for r in (radii if radii is not None else default_radii(A)))
    if len(radii) < 3:
        raise ParameterError("decay profile needs at least 3 radii")
    rows, cols, vals = A.coo
    d = A.entry_dist().astype(float)
    a = np.abs(vals)
    # tails accumulated from the largest radius down, so errors are non-increasing exactly
    bins = np.searchsorted(np.asarray(radii), d, side="left")  # entry counts for radii[k] iff bins > k
    col_tail = np.zeros(A.n_cols)
    row_tail = np.zeros(A.n_rows)
    errors = [0.0] * len(radii)
    for k in range(len(radii) - 1, -1, -1):
        sel = bins == k + 1
        col_tail += np.bincount(cols[sel], a[sel], minlength=A.n_cols)
        row_tail += np.bincount(rows[sel], a[sel], minlength=A.n_rows)
        errors[k] = float(col_tail.max() + row_tail.max()) if A.nnz else 0.0
    R = np.asarray(radii)
    E = np.asarray(errors)
    nz = E > 0
    flags = []
    semi_rate = semi_res = None
    if nz.sum() == 0:
        return DecayProfile(radii, errors, math.inf, 0.0, None, None, ["banded"])
    if nz.sum() < 2:
        return DecayProfile(radii, errors, math.inf, 0.0, None, None, ["insufficient_points"])
    coef, res = _lsq(np.log(R[nz]), np.log(E[nz]))
    t = -float(coef[1])
    coef_s, semi_res = _lsq(R[nz], np.log(E[nz]))
    semi_rate = -float(coef_s[1])
    if nz.sum() < len(radii):
        flags.append("partially_banded")
    if nz.sum() >= 3 and semi_res < 0.5 * res and semi_rate > 0:
        flags.append("super_polynomial")
    else:
        logs = np.log(E[nz])
        lr = np.log(R[nz])
        local = -np.diff(logs) / np.diff(lr)
        if t < 0.1 or (local.size >= 2 and local[-1] < 0.5 * local[0]):
            flags.append("sub_polynomial")
            flags.append("outside_theorem_scope")
    return DecayProfile(radii, errors, t, res, semi_rate, semi_res, flags)


def _decay_envelope(B: IndexedMatrix) -> dict:
    """max |b_{x,y}| over d(x,y) = k, and a semi-log fit of it."""
    d = B.entry_dist().astype(float)
    a = np.abs(B.coo[2])
    if a.size == 0:
        return {"distances": [], "envelope": [], "rate": None}
    ks, inv = np.unique(d, return_inverse=True)
    env = np.zeros(ks.size)
    np.maximum.at(env, inv, a)
    keep = env > 0
    rate = None
    if keep.sum() >= 3:
        coef, _ = _lsq(ks[keep], np.log(env[keep]))
        rate = -float(coef[1])
    return {"distances": ks.tolist(), "envelope": env.tolist(), "rate": rate}


@dataclass
class InverseDiagnostics:
    ba_error: float
    sigma_min: float
    sigma_max: float
    gram_propagation: float | None
    gram_bound: float | None
    gram_ok: bool | None
    decay: dict | None

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        if self.decay is not None:
            d["decay"] = {"rate": self.decay["rate"], "max_distance": self.decay["distances"][-1] if self.decay["distances"] else None}
        return d


def build_left_inverse(A: IndexedMatrix, tol: float = SIGMA_TOL) -> tuple[IndexedMatrix, InverseDiagnostics]:
    """B = (A*A)⁻¹A* by Cholesky with one step of iterative refinement."""
    if max(A.shape) > DENSE_CAP:
        raise CapacityError(f"window {A.shape} exceeds the dense cap {DENSE_CAP}")
    M = A.todense()
    s = np.linalg.svd(M, compute_uv=False)
    smax = float(s[0]) if s.size else 0.0
    smin = float(s[-1]) if A.n_rows >= A.n_cols and s.size else 0.0
    if smin <= tol * smax or smax == 0:
        raise NotBoundedBelowError(smin, smax)
    G = M.T @ M
    cf = sla.cho_factor(G, lower=False, check_finite=False)
    Z = sla.cho_solve(cf, M.T, check_finite=False)
    Z += sla.cho_solve(cf, M.T - G @ Z, check_finite=False)
    B = IndexedMatrix(sp.csr_matrix(Z), A.row_space, A.col_space)
    err = float(np.abs(Z @ M - np.eye(A.n_cols)).max()) if A.n_cols else 0.0
    gram = None
    if A.col_space is not None:
        gram = check_gram_banded(A)
    decay = _decay_envelope(B) if B.same else None
    diag = InverseDiagnostics(
        err,
        smin,
        smax,
        None if gram is None else float(gram.propagation),
        None if gram is None else float(gram.bound),
        None if gram is None else bool(gram.ok),
        decay,
    )
    return B, diag


@dataclass(frozen=True)
class NormIdentityCheck:
    lhs: float
    rhs: float
    gap: float


def selfadjoint_inverse_norm_check(A: IndexedMatrix, p, seed: int = 0) -> NormIdentityCheck:
    """Compare ‖A⁻¹‖_p with 1/λ̂_p(A) for symmetric invertible A."""
    p = parse_p(p)
    if A.n_rows != A.n_cols:
        raise StructureError("needs a square matrix")
    M = A.todense()
    if np.abs(M - M.T).max(initial=0.0) > 1e-12 * max(np.abs(M).max(initial=0.0), 1.0):
        raise StructureError("matrix is not self-adjoint")
    s = np.linalg.svd(M, compute_uv=False)
    if s[-1] <= SIGMA_TOL * s[0]:
        raise NotBoundedBelowError(float(s[-1]), float(s[0]))
    inv = IndexedMatrix(sp.csr_matrix(np.linalg.inv(M)), A.col_space, A.row_space)
    nv = op_norm(inv, p)
    lhs = nv.value if nv.kind == "exact" else nv.lower
    lam = estimate_lambda(A, p, seed=seed).value
    rhs = 1.0 / lam
    return NormIdentityCheck(lhs, rhs, abs(lhs - rhs) / rhs)


def gram_lambda_identity_check(A: IndexedMatrix) -> NormIdentityCheck:
    """λ₂(A*A) against λ₂(A)², both from dense singular values."""
    if max(A.shape) > DENSE_CAP:
        raise CapacityError("dense cap exceeded")
    M = A.todense()
    n = A.n_cols
    s = np.linalg.svd(M, compute_uv=False)
    lam = float(s[-1]) if A.n_rows >= n else 0.0
    g = np.linalg.svd(M.T @ M, compute_uv=False)
    lg = float(g[-1])
    rhs = lam**2
    scale = max(lg, rhs, 1e-300)
    gap = abs(lg - rhs) / scale if max(lg, rhs) > 1e-14 * max(float(s[0]) ** 2, 1.0) else abs(lg - rhs)
    return NormIdentityCheck(lg, rhs, gap)


# -- pipeline ---------------------------------------------------------------------------
@dataclass
class WindowResult:
    window: int
    report: object
    decay: DecayProfile | None
    verdict: str
    norms_B: dict | None = None
    diagnostics: InverseDiagnostics | None = None
    note: str | None = None

    def to_json(self) -> dict:
        return {
            "window": self.window,
            "verdict": self.verdict,
            "stability": self.report.to_json(),
            "decay": self.decay.to_json() if self.decay else None,
            "norms_B": None if self.norms_B is None else {str(k): v for k, v in self.norms_B.items()},
            "diagnostics": self.diagnostics.to_json() if self.diagnostics else None,
            "note": self.note,
        }


@dataclass
class PipelineReport:
    windows: list
    verdict: str
    trend_slope: float | None
    norm_ratios: dict
    weight: Weight
    reasons: list
    boundary_policy: str = "window restriction (rows and columns outside the window are dropped)"

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "trend_slope": self.trend_slope,
            "norm_ratios": self.norm_ratios,
            "weight": self.weight.to_json(),
            "reasons": self.reasons,
            "boundary_policy": self.boundary_policy,
            "windows": [w.to_json() for w in self.windows],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["window", "p", "lambda_hat", "norm_B_p", "schur_B", "weighted_schur_B", "fitted_t", "verdict"])
        for win in self.windows:
            t = win.decay.fitted_t if win.decay else None
            nb = win.norms_B or {}
            for p in win.report.p_grid:
                w.writerow(
                    [
                        win.window,
                        fmt_p(p),
                        repr(win.report.estimates[p].value),
                        nb.get(fmt_p(p), ""),
                        nb.get("schur", ""),
                        nb.get("weighted_schur", ""),
                        "inf" if t is not None and math.isinf(t) else t,
                        win.verdict,
                    ]
                )
        return buf.getvalue()


def default_windows(A: IndexedMatrix) -> list:
    """Leading sub-windows n/4, n/2, n of a lattice matrix."""
    sp_ = A.col_space
    if sp_ is None or not sp_.is_lattice:
        return [None]
    if sp_.kind == "z_interval":
        n = sp_.n
        return sorted({w for w in (n // 4, n // 2, n) if w >= 2})
    side = min(sp_.dims)
    return sorted({w for w in (side // 4, side // 2, side) if w >= 2})


def stability_pipeline(
    A: IndexedMatrix | None = None,
    weight=None,
    p_grid=DEFAULT_GRID,
    seed: int = 0,
    windows=None,
    family=None,
    budget=(8, 200),
    radii=None,
) -> PipelineReport:
    """Stability report, decay fit and left inverse over a sweep of windows.

    Either ``A`` is given (windows are leading sub-windows of A) or ``family``
    builds the operator on a window of the requested size.
    """
    weight = Weight.parse(weight) if weight is not None else Weight.poly(1.0)
    if A is None and family is None:
        raise ParameterError("need a matrix or a family")
    if A is not None and not A.same:
        raise StructureError("the pipeline needs Y = X")
    if windows is None:
        if family is not None:
            raise ParameterError("a family needs explicit windows")
        windows = default_windows(A)
    results = []
    for w in windows:
        if family is not None:
            Aw = family(int(w))
        elif w is None or (A.col_space.kind == "z_interval" and w == A.n_cols):
            Aw = A
        else:
            Aw = restrict(A, w)
        rep = stability_report(Aw, p_grid, seed=seed, budget=budget)
        try:
            dec = decay_profile(Aw, radii)
        except ParameterError:
            dec = None
        res = WindowResult(Aw.n_cols, rep, dec, rep.verdict)
        if rep.verdict == "uniformly_bounded_below":
            try:
                B, diag = build_left_inverse(Aw)
                res.diagnostics = diag
                nb = {fmt_p(1.0): norm_1(B), fmt_p(2.0): norm_2(B).value, fmt_p(INF): norm_inf(B)}
                nb["schur"] = schur_norm(B)
                nb["weighted_schur"] = weighted_schur_norm(B, weight)
                if B.col_space.is_lattice:
                    nb["cd"] = cd_norm(B)
                    nb["weighted_cd"] = cd_norm(B, weight)
                nb["ba_error"] = diag.ba_error
                res.norms_B = nb
            except NotBoundedBelowError as exc:
                res.verdict = "degenerate"
                res.note = f"not bounded below on this window: σ_min = {exc.sigma_min:.3g}"
        results.append(res)
    return _summarize(results, weight)


def _summarize(results, weight) -> PipelineReport:
    reasons = []
    slope = None
    ns = np.array([r.window for r in results], dtype=float)
    lams = np.array([r.report.lambda_small for r in results])
    if len(results) >= 2 and np.all(lams > 0) and np.unique(ns).size >= 2:
        slope = float(np.polyfit(np.log(ns), np.log(lams), 1)[0])
    ratios = {}
    keys = ["1", "2", "inf", "schur", "weighted_schur"]
    have = [r for r in results if r.norms_B]
    for a, b in zip(have, have[1:]):
        for k in keys:
            if k in a.norms_B and k in b.norms_B and a.norms_B[k] > 0:
                ratios.setdefault(k, []).append(b.norms_B[k] / a.norms_B[k])
    if any(r.verdict == "degenerate" for r in results):
        verdict = "degenerate"
        reasons.append("λ̂ below threshold on some window")
    elif slope is not None and slope < TREND_SLOPE:
        verdict = "degenerate"
        reasons.append(f"λ̂ decays with the window: log-log slope {slope:.3g} < {TREND_SLOPE}")
    else:
        verdict = "uniformly_bounded_below"
        bad = [k for k, v in ratios.items() if any(not (1 / WINDOW_RATIO <= x <= WINDOW_RATIO) for x in v)]
        if bad:
            verdict = "inconsistent"
            reasons.append(f"‖B‖ not stable across windows for {bad}")
        if any(r.diagnostics and r.diagnostics.ba_error > BA_TOL for r in results):
            verdict = "inconsistent"
            reasons.append(f"‖BA - I‖ exceeds {BA_TOL}")
        for r in results:
            if r.decay and "outside_theorem_scope" in r.decay.flags:
                reasons.append(f"window {r.window}: decay fit outside theorem scope")
    return PipelineReport(results, verdict, slope, ratios, weight, reasons)
