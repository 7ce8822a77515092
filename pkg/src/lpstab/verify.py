"""Acceptance suites: seeded randomized checks with replayable counterexample dumps."""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import inverse, stability, zoo
from .errors import FormatError, LpstabError, ParameterError
from .exponents import DEFAULT_GRID, INF, fmt_p, parse_p, pnorm, recip
from .io import jsonable, loads_matrix, matrix_to_dict, write_report
from .opmat import (
    IndexedMatrix,
    Weight,
    check_disjoint_supports,
    check_gram_banded,
    sparse_sparse_bound,
)
from .space import covering, cutoff, make_space, z_interval, zd_box


@dataclass
class Criterion:
    number: int
    name: str
    passed: bool
    elapsed: float
    limit: float
    checks: int
    failures: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.passed and self.elapsed <= self.limit

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        extra = "" if self.elapsed <= self.limit else f" (over time limit {self.limit:.0f}s)"
        return (
            f"[{status}] criterion {self.number:>2}  {self.name:<38} "
            f"checks={self.checks:<6} failures={len(self.failures):<3} {self.elapsed:7.2f}s{extra}"
        )

    def to_json(self) -> dict:
        return {
            "criterion": self.number,
            "name": self.name,
            "passed": self.ok,
            "elapsed": self.elapsed,
            "limit": self.limit,
            "checks": self.checks,
            "failures": self.failures[:20],
            "detail": self.detail,
        }


class _Run:
    """Counts checks and keeps failure records with replayable inputs."""

    def __init__(self):
        self.checks = 0
        self.failures = []

    def check(self, ok: bool, check: str, **inputs) -> bool:
        self.checks += 1
        if not ok:
            # serialized only on failure; matrices become interchange documents
            inputs = {k: matrix_to_dict(v) if isinstance(v, IndexedMatrix) else v for k, v in inputs.items()}
            self.failures.append({"check": check, **jsonable(inputs)})
        return ok


# -- criterion 1 ----------------------------------------------------------------------
def _structure_instance(run: _Run, A: IndexedMatrix, rng, seed_info: dict):
    r = A.stats.thickness
    n = A.n_cols
    # (a) disjoint supports on intervals with a gap > 2r
    w = int(rng.integers(1, max(2, n // 4)))
    gap = 2 * r + 1 + int(rng.integers(0, 3))
    if 2 * w + gap <= n:
        s = int(rng.integers(0, n - 2 * w - gap + 1))
        u = np.zeros(n)
        v = np.zeros(n)
        u[s : s + w] = rng.standard_normal(w)
        v[s + w + gap : s + 2 * w + gap] = rng.standard_normal(w)
        chk = check_disjoint_supports(A, u, v)
        ok = (not chk.precondition_met) or chk.disjoint
        run.check(ok and chk.precondition_met, "disjoint_supports", matrix=A, u=u, v=v, **seed_info)
    # (b) Gram bandedness
    g = check_gram_banded(A)
    run.check(g.ok, "gram_banded", matrix=A, measured=g.propagation, bound=g.bound, **seed_info)
    # (c) sparse-sparse norm bound
    ss = sparse_sparse_bound(A)
    run.check(ss.verified, "sparse_sparse", matrix=A, norms={fmt_p(k): v for k, v in ss.norms.items()}, bound=ss.bound, **seed_info)


def suite_structure(seed: int = 0, count: int = 500) -> list:
    t0 = time.perf_counter()
    run = _Run()
    rng = np.random.default_rng(seed)
    for i in range(count):
        n = int(np.exp(rng.uniform(np.log(10), np.log(1000))))
        r = int(rng.integers(1, 5))
        v = int(rng.integers(1, 5))
        inst_seed = int(rng.integers(2**31))
        bare = i % 2 == 1
        density = float(rng.uniform(0.2, 0.9))
        A = zoo.random_thin_sparse(z_interval(n), r, v, density, seed=inst_seed, n_rows=max(1, n // 2) if bare else None)
        info = {"instance": i, "n": n, "r": r, "sparseness": v, "instance_seed": inst_seed}
        run.check(A.stats.thickness <= r and A.stats.sparseness <= v, "generator_stats", matrix=A, **info)
        _structure_instance(run, A, rng, info)
    return [
        Criterion(1, "structural properties", not run.failures, time.perf_counter() - t0, 30.0, run.checks, run.failures, {"instances": count})
    ]


# -- criteria 2 and 3 -------------------------------------------------------------------
def _cover_and_cutoff(run: _Run, space, L):
    cov = covering(space, L, 6.0)
    inv = cov.verify()
    info = {"space": space.to_json(), "L": L}
    run.check(inv["covering"], "covering", **info)
    run.check(inv["separation"], "color_separation", **info)
    run.check(inv["color_bound"], "color_bound", **info)
    for P in (cov.color_class(1), cov.centers):
        prof = cutoff(P, L, space).verify(exhaustive=True)
        for prop in ("vanishes_beyond_2L", "half_on_L_ball", "bounded", "lipschitz"):
            run.check(prof[prop], f"cutoff_{prop}", centers=P, **info)
    return cov.num_colors


def _localize_pair(run: _Run, A, f, Ls, ps, info):
    worst = 0.0
    for L in Ls:
        for p in ps:
            res = stability.localize(A, f, L, p)
            bound_z = 3.0 * (res.ratio_f + 3.0 * res.r**2 * A.sup / L)
            ok = res.ratio_h <= bound_z * (1 + 1e-12) and res.radius <= 2 * L
            worst = max(worst, res.ratio_h / bound_z)
            run.check(ok, "localize", matrix=A, f=f, L=L, p=fmt_p(p), ratio_h=res.ratio_h, bound=bound_z, radius=res.radius, **info)
    return worst


def suite_localization(seed: int = 0, pairs: int = 200) -> list:
    out = []
    t0 = time.perf_counter()
    run = _Run()
    colors = {}
    spaces = [z_interval(n) for n in (10, 100, 1000, 10_000)] + [zd_box((k, k)) for k in (10, 30, 60)]
    for space in spaces:
        for L in (4, 16, 64):
            colors[f"{space.kind}{space.params}/L={L}"] = _cover_and_cutoff(run, space, L)
    out.append(
        Criterion(2, "cutoff and covering invariants", not run.failures, time.perf_counter() - t0, 60.0, run.checks, run.failures, {"num_colors": colors})
    )
    t0 = time.perf_counter()
    run = _Run()
    rng = np.random.default_rng(seed)
    space = z_interval(4000)
    Ls = (8, 16, 32, 64, 128, 256)
    ps = (1.0, 2.0, INF)
    worst = 0.0
    for i in range(pairs):
        r = int(rng.integers(1, 4))
        inst_seed = int(rng.integers(2**31))
        A = zoo.random_thin_sparse(space, r, None, density=float(rng.uniform(0.3, 1.0)), seed=inst_seed)
        f = _random_f(rng, space.n, i % 3)
        worst = max(worst, _localize_pair(run, A, f, Ls, ps, {"pair": i, "instance_seed": inst_seed}))
    out.append(
        Criterion(3, "localization certificate", not run.failures, time.perf_counter() - t0, 120.0, run.checks, run.failures, {"pairs": pairs, "max_ratio_over_bound": worst})
    )
    return out


def _random_f(rng, n, kind):
    if kind == 0:
        return rng.standard_normal(n)
    x = np.arange(n)
    if kind == 1:
        c, w = rng.uniform(0, n), rng.uniform(5, n / 4)
        return np.exp(-(((x - c) / w) ** 2)) + 1e-3 * rng.standard_normal(n)
    f = np.zeros(n)
    for _ in range(int(rng.integers(1, 6))):
        c = int(rng.integers(n))
        w = int(rng.integers(1, 40))
        f[max(0, c - w) : c + w] += rng.standard_normal()
    if not f.any():
        f[0] = 1.0
    return f


# -- criteria 4 and 5 -------------------------------------------------------------------
def _random_sequences(rng, count, n, p):
    """Random non-increasing non-negative sequences with Σ a_i^p = 1, rows padded to length n."""
    lens = rng.integers(1, n + 1, count)
    a = rng.random((count, n)) ** rng.uniform(0.2, 5.0, (count, 1))
    a[np.arange(n)[None, :] >= lens[:, None]] = 0.0
    a = -np.sort(-a, axis=1)
    s = np.sum(a**p, axis=1) ** (1.0 / p)
    return a / s[:, None]


def _tails(a, m, q):
    t = a[:, m:]
    if math.isinf(q):
        return t.max(axis=1) if t.shape[1] else np.zeros(a.shape[0])
    return np.sum(t**q, axis=1) ** (1.0 / q)


def _refine(a, m, p, q, rng, steps=200):
    """Coordinate perturbation hill climb from a, keeping the constraints."""
    best = a.copy()
    bv = _tails(best[None, :], m, q)[0]
    for _ in range(steps):
        c = best * np.exp(0.1 * rng.standard_normal(best.size))
        c = -np.sort(-c)
        c /= np.sum(c**p) ** (1.0 / p)
        v = _tails(c[None, :], m, q)[0]
        if v > bv:
            best, bv = c, v
    return bv


def sequence_bruteforce(p, q, m, n=12, random_count=10_000, seed=0) -> tuple[float, float]:
    """(brute-force max of the tail, closed-form bound) for one (p, q, m)."""
    rng = np.random.default_rng(seed)
    flat = max(stability.flat_tail(p, q, m, k) for k in range(1, n + 1))
    A = _random_sequences(rng, random_count, n, p)
    vals = _tails(A, m, q)
    top = A[np.argsort(-vals)[:3]]
    refined = max(_refine(a, m, p, q, rng) for a in top)
    return max(flat, float(vals.max()), refined), stability.sequence_tail_bound(p, q, m)


def suite_sequences(seed: int = 0, thin_count: int = 100) -> list:
    out = []
    t0 = time.perf_counter()
    run = _Run()
    grid = []
    for p in (1.0, 1.5, 2.0):
        for q in sorted({p + 0.5, p + 1.0, 4.0, INF}):
            if q > p:
                grid.extend((p, q, m) for m in range(1, 9))
    attained = None
    for k, (p, q, m) in enumerate(grid):
        brute, bound = sequence_bruteforce(p, q, m, seed=seed + k)
        run.check(brute <= bound * (1 + 1e-12), "sequence_tail", p=fmt_p(p), q=fmt_p(q), m=m, brute=brute, bound=bound)
        if (p, q, m) == (1.0, 2.0, 1):
            attained = (brute, bound)
    run.check(abs(attained[0] - attained[1]) <= 1e-6, "sequence_attained", brute=attained[0], bound=attained[1])
    out.append(
        Criterion(4, "ordered-sequence tail bound", not run.failures, time.perf_counter() - t0, 30.0, run.checks, run.failures, {"grid_points": len(grid), "attained_1_2_1": attained})
    )
    t0 = time.perf_counter()
    run = _Run()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(thin_count):
        n = int(rng.integers(20, 200))
        r = int(rng.integers(1, 5))
        inst_seed = int(rng.integers(2**31))
        A = zoo.random_thin_sparse(z_interval(n), r, None, density=float(rng.uniform(0.3, 1.0)), seed=inst_seed, n_rows=int(rng.integers(n // 2, 2 * n)))
        for q in (2.0, INF):
            for m in (1, 2, 4, 8):
                res = stability.top_m_thinning(A, m, 1.0, q)
                worst = max(worst, res.measured[q] / res.bound)
                run.check(res.holds, "thinning", matrix=A, m=m, p=1, q=fmt_p(q), measured=res.measured[q], bound=res.bound, instance_seed=inst_seed)
    out.append(
        Criterion(5, "thinning bound", not run.failures, time.perf_counter() - t0, 60.0, run.checks, run.failures, {"instances": thin_count, "max_measured_over_bound": worst})
    )
    return out


# -- criterion 6 ----------------------------------------------------------------------------
def suite_propagation(seed: int = 0, count: int = 100) -> list:
    t0 = time.perf_counter()
    run = _Run()
    rng = np.random.default_rng(seed)
    space = z_interval(12)
    worst_cal = 0.0
    min_margin = math.inf
    for i in range(count):
        r = int(rng.integers(1, 4))
        inst_seed = int(rng.integers(2**31))
        A = zoo.random_thin_sparse(space, r, None, density=float(rng.uniform(0.3, 1.0)), seed=inst_seed, diag_shift=float(rng.choice([0.0, 1.0])))
        lam2 = stability.lambda_exact_2(A).value
        opt2 = stability.lambda_estimate(A, 2.0, budget=(4, 100), seed=seed).value
        worst_cal = max(worst_cal, abs(opt2 - lam2))
        info = {"matrix": A, "instance_seed": inst_seed}
        run.check(abs(opt2 - lam2) <= 1e-6, "calibration_p2", lam2=lam2, optimizer=opt2, **info)
        est = {2.0: lam2}
        for p in (1.0, INF):
            sgn = stability.lambda_sign_pattern(A, p).value
            closed = stability.lambda_exact_inverse(A, p).value
            run.check(abs(sgn - closed) <= 1e-9 * max(1.0, closed), "sign_pattern_vs_closed_form", p=fmt_p(p), sign=sgn, closed=closed, **info)
            est[p] = sgn
        for p in DEFAULT_GRID:
            if p not in est:
                est[p] = stability.lambda_estimate(A, p, budget=(4, 100), seed=seed).value
        r_band = A.stats.band_width
        z = stability.z_lambda2_check(lam2, est, r_band, A.sup, tol=1e-6)
        for key, row in z["per_p"].items():
            if row["bound"] > 0:
                min_margin = min(min_margin, lam2 / row["bound"])
        run.check(z["holds"], "z_lambda2", estimates={fmt_p(k): v for k, v in est.items()}, **info)
    return [
        Criterion(6, "propagation on Z (fixed constants)", not run.failures, time.perf_counter() - t0, 120.0, run.checks, run.failures, {"instances": count, "calibration_max_gap": worst_cal, "min_lambda2_over_bound": min_margin})
    ]


# -- criteria 7, 8, 9 ------------------------------------------------------------------------
def suite_inverse(seed: int = 0) -> list:
    out = []
    rng = np.random.default_rng(seed)
    # 7
    t0 = time.perf_counter()
    run = _Run()
    worst = 0.0
    for i in range(100):
        M = rng.standard_normal((20, 12))
        A = IndexedMatrix.from_dense(M, z_interval(12), rows=20)
        g = inverse.gram_lambda_identity_check(A)
        worst = max(worst, g.gap)
        run.check(g.gap <= 1e-9, "gram_identity", dense=M, lhs=g.lhs, rhs=g.rhs)
    worst_sa = 0.0
    for i in range(20):
        Q = rng.standard_normal((10, 10))
        M = Q @ Q.T + 0.5 * np.eye(10)
        A = IndexedMatrix.from_dense(M, z_interval(10))
        c = inverse.selfadjoint_inverse_norm_check(A, 2.0)
        s_min = stability.lambda_exact_2(A).value
        prod = c.lhs * s_min
        worst_sa = max(worst_sa, abs(prod - 1.0))
        run.check(abs(prod - 1.0) <= 1e-9, "selfadjoint_inverse_norm", dense=M, product=prod)
    worst_ba = 0.0
    built = 0
    tries = 0
    while built < 5 and tries < 100:
        tries += 1
        inst_seed = int(rng.integers(2**31))
        A = zoo.random_thin_sparse(z_interval(300), int(rng.integers(1, 4)), None, 0.5, seed=inst_seed, diag_shift=3.0)
        if stability.lambda_exact_2(A).value < 0.5:
            continue
        B, diag = inverse.build_left_inverse(A)
        built += 1
        worst_ba = max(worst_ba, diag.ba_error)
        run.check(diag.ba_error <= 1e-8, "left_inverse", matrix=A, ba_error=diag.ba_error)
    run.check(built == 5, "left_inverse_instances", built=built)
    out.append(
        Criterion(7, "Gram and inverse identities", not run.failures, time.perf_counter() - t0, 60.0, run.checks, run.failures, {"gram_max_gap": worst, "selfadjoint_max_gap": worst_sa, "ba_max": worst_ba})
    )
    # 8
    t0 = time.perf_counter()
    run = _Run()
    ell = inverse.stability_pipeline(family=zoo.elliptic_operator, windows=[100, 200, 400], weight=Weight.poly(1.0), seed=seed)
    run.check(all(w.verdict == "uniformly_bounded_below" for w in ell.windows), "elliptic_window_verdicts", verdicts=[w.verdict for w in ell.windows])
    run.check(ell.verdict == "uniformly_bounded_below", "elliptic_verdict", verdict=ell.verdict, reasons=ell.reasons)
    for k in ("1", "2", "inf", "schur", "weighted_schur"):
        ratios = ell.norm_ratios.get(k, [])
        run.check(len(ratios) == 2 and all(0.5 <= x <= 2.0 for x in ratios), "elliptic_norm_stability", norm=k, ratios=ratios)
    for w in ell.windows:
        run.check(w.diagnostics is not None and w.diagnostics.ba_error <= 1e-8, "elliptic_ba", window=w.window)
    rw = inverse.stability_pipeline(family=zoo.random_walk_operator, windows=[100, 200, 400], seed=seed)
    gaps = {}
    for w in rw.windows:
        expect = 1.0 - math.cos(math.pi / (w.window + 1))
        got = w.report.estimates[2.0].value
        gaps[w.window] = abs(got - expect)
        run.check(abs(got - expect) <= 1e-9, "random_walk_lambda2", window=w.window, got=got, expected=expect)
    run.check(rw.verdict == "degenerate", "random_walk_verdict", verdict=rw.verdict, slope=rw.trend_slope)
    S = zoo.staircase_matrix(1.0, 16)
    l1 = stability.estimate_lambda(S, 1.0, seed=seed).value
    linf = stability.estimate_lambda(S, INF, seed=seed).value
    run.check(abs(l1 - 1.0) <= 1e-12, "staircase_lambda1", value=l1)
    run.check(linf <= 1.0 / 16.0, "staircase_lambda_inf", value=linf)
    out.append(
        Criterion(8, "pipeline trichotomy", not run.failures, time.perf_counter() - t0, 180.0, run.checks, run.failures, {
            "elliptic_norm_ratios": ell.norm_ratios, "random_walk_lambda2_gaps": gaps, "random_walk_slope": rw.trend_slope,
            "staircase_lambda1": l1, "staircase_lambda_inf": linf,
        })
    )
    # 9
    t0 = time.perf_counter()
    run = _Run()
    fits = {}
    space = z_interval(2000)
    for beta in (2.0, 3.0):
        dp = inverse.decay_profile(zoo.polynomial_decay_matrix(space, beta, seed=seed))
        fits[beta] = dp.fitted_t
        run.check(abs(dp.fitted_t - (beta - 1.0)) <= 0.15, "decay_fit", beta=beta, fitted_t=dp.fitted_t, errors=dp.errors)
        run.check(all(a >= b for a, b in zip(dp.errors, dp.errors[1:])), "decay_monotone", beta=beta, errors=dp.errors)
    de = inverse.decay_profile(zoo.exponential_decay_matrix(space, 1.0, seed=seed))
    run.check("super_polynomial" in de.flags, "exponential_flag", flags=de.flags)
    out.append(
        Criterion(9, "decay fitting", not run.failures, time.perf_counter() - t0, 60.0, run.checks, run.failures, {"fitted_t": fits, "exponential_flags": de.flags})
    )
    return out


# -- criterion 10 -------------------------------------------------------------------------------
DILATION_NOTE = (
    "open question: the measured curve n -> ||(I - D*) phi_n||_1 stays at 1/2 "
    "for every n measured, odd n included; it does not tend to 0"
)


def suite_zoo(seed: int = 0) -> list:
    t0 = time.perf_counter()
    run = _Run()
    ns = [4, 5, 6, 7, 8, 16, 31, 32, 64, 100, 128, 256, 512, 1000, 1024]
    curve = zoo.dilation_adjoint_curve(ns, 1.0)
    for n, v in curve.items():
        if n % 2 == 0:
            run.check(abs(v - 0.5) <= 1e-12, "dilation_curve", n=n, value=v)
    D = zoo.dilation_part(8)
    rng = np.random.default_rng(seed)
    for p in (0.5, 1.0, 2.0, 3.0, INF):
        f = rng.standard_normal(8)
        lhs = pnorm(D.csr @ f, p)
        rhs = 2.0 ** (recip(p) - 1.0) * pnorm(f, p)
        run.check(abs(lhs - rhs) <= 1e-12 * rhs, "duplication_identity", p=fmt_p(p), lhs=lhs, rhs=rhs)
    return [
        Criterion(10, "dilation discrepancy report", not run.failures, time.perf_counter() - t0, 60.0, run.checks, run.failures, {
            "curve": {str(k): v for k, v in curve.items()}, "flag": DILATION_NOTE,
        })
    ]


SUITES = {
    "structure": suite_structure,
    "localization": suite_localization,
    "propagation": suite_propagation,
    "sequences": suite_sequences,
    "inverse": suite_inverse,
    "zoo": suite_zoo,
}
SUITE_ORDER = ("structure", "localization", "sequences", "propagation", "inverse", "zoo")


def run_suite(name: str, seed: int = 0) -> list:
    if name == "all":
        out = []
        for s in SUITE_ORDER:
            out.extend(SUITES[s](seed))
        return sorted(out, key=lambda c: c.number)
    if name not in SUITES:
        raise ParameterError(f"unknown suite {name!r}; choose from {sorted(SUITES) + ['all']}")
    return SUITES[name](seed)


def dump_counterexamples(results, suite: str, seed: int, out_dir) -> list:
    """One JSON file per failed criterion, replayable with ``verify --replay``."""
    paths = []
    for c in results:
        if c.ok:
            continue
        doc = {"kind": "counterexample", "suite": suite, "seed": seed, "criterion": c.number, "name": c.name,
               "elapsed": c.elapsed, "limit": c.limit, "failures": c.failures[:20]}
        paths.append(write_report(Path(out_dir) / f"counterexample_c{c.number}_seed{seed}.json", doc))
    return paths


# -- checks on a supplied matrix file and replay -------------------------------------------------
def verify_matrix_text(text: str, seed: int = 0) -> tuple[bool, list]:
    """Parse a matrix file and run the structural checks that apply to it."""
    run = _Run()
    try:
        A = loads_matrix(text)
    except LpstabError as exc:
        run.check(False, "matrix_file", error=str(exc), text=text)
        return False, run.failures
    rng = np.random.default_rng(seed)
    info = {"matrix": A}
    st = A.stats
    if A.col_space is not None and st.row_radius is not None and A.nnz:
        # every row support lies in the ball at its recorded center
        rows, cols, _ = A.coo
        d = A.col_space.pair_dist(st.row_centers[rows], cols)
        run.check(bool(np.all(d <= st.row_radius[rows])), "thickness_realized", **info)
    g = check_gram_banded(A)
    run.check(g.ok, "gram_banded", measured=g.propagation, bound=g.bound, **info)
    ss = sparse_sparse_bound(A)
    run.check(ss.verified, "sparse_sparse", bound=ss.bound, **info)
    if A.col_space.kind == "z_interval" and A.n_cols > 4 * st.thickness + 4:
        n = A.n_cols
        r = st.thickness
        u = np.zeros(n)
        v = np.zeros(n)
        u[0] = 1.0
        v[2 * r + 1 :] = rng.standard_normal(n - 2 * r - 1)
        chk = check_disjoint_supports(A, u, v)
        run.check(chk.disjoint, "disjoint_supports", u=u, v=v, **info)
    return not run.failures, run.failures


def replay(doc: dict) -> tuple[bool, list]:
    """Re-run the checks recorded in a counterexample dump."""
    if doc.get("kind") != "counterexample":
        raise FormatError("not a counterexample dump")
    if doc.get("suite") == "matrix":
        return verify_matrix_text(doc["failures"][0].get("text") or json.dumps(doc["failures"][0]["matrix"]), doc.get("seed", 0))
    outcomes = []
    ok_all = True
    for fail in doc.get("failures", []):
        ok = _replay_one(fail)
        ok_all &= ok
        outcomes.append({"check": fail["check"], "passed": ok})
    if not doc.get("failures"):
        results = run_suite(doc["suite"], doc.get("seed", 0))
        ok_all = all(c.ok for c in results if c.number == doc.get("criterion"))
    return ok_all, outcomes


def _load(fail) -> IndexedMatrix:
    return loads_matrix(json.dumps(fail["matrix"]))


def _replay_one(fail: dict) -> bool:
    check = fail["check"]
    if check == "matrix_file":
        return verify_matrix_text(fail.get("text", ""))[0]
    if check == "gram_banded":
        return check_gram_banded(_load(fail)).ok
    if check == "sparse_sparse":
        return sparse_sparse_bound(_load(fail)).verified
    if check == "disjoint_supports":
        return check_disjoint_supports(_load(fail), np.asarray(fail["u"]), np.asarray(fail["v"])).disjoint
    if check == "localize":
        A = _load(fail)
        p = parse_p(fail["p"])
        res = stability.localize(A, np.asarray(fail["f"]), fail["L"], p)
        return res.ratio_h <= 3.0 * (res.ratio_f + 3.0 * res.r**2 * A.sup / fail["L"]) * (1 + 1e-12) and res.radius <= 2 * fail["L"]
    if check == "thinning":
        res = stability.top_m_thinning(_load(fail), fail["m"], 1.0, parse_p(fail["q"]))
        return res.holds
    if check == "z_lambda2":
        A = _load(fail)
        est = {parse_p(k): v for k, v in fail["estimates"].items()}
        return stability.z_lambda2_check(stability.lambda_exact_2(A).value, est, A.stats.band_width, A.sup, 1e-6)["holds"]
    if check == "sequence_tail":
        p, q = parse_p(fail["p"]), parse_p(fail["q"])
        brute, bound = sequence_bruteforce(p, q, fail["m"])
        return brute <= bound * (1 + 1e-12)
    if check == "left_inverse":
        return inverse.build_left_inverse(_load(fail))[1].ba_error <= 1e-8
    if check == "covering":
        cov = covering(make_space(fail["space"]), fail["L"], 6.0)
        return all(cov.verify().values())
    if check.startswith("cutoff_"):
        prof = cutoff(np.asarray(fail["centers"]), fail["L"], make_space(fail["space"])).verify()
        return bool(prof[check[len("cutoff_"):]])
    raise ParameterError(f"no replay rule for check {check!r}")
