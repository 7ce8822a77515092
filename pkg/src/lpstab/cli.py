"""Command-line interface: ``lpstab gen|analyze|lambda|localize|invert|verify``."""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import inverse, stability, verify, zoo
from .errors import LpstabError, ParameterError
from .exponents import DEFAULT_GRID, INF, fmt_p, parse_grid, parse_p
from .io import dumps_report, read_matrix, write_matrix, write_report, write_text_atomic
from .opmat import (
    Weight,
    cd_norm,
    check_disjoint_supports,
    check_gram_banded,
    norm_1,
    norm_2,
    norm_inf,
    schur_norm,
    sparse_sparse_bound,
    weighted_schur_norm,
)
from .space import make_space, z_interval, zd_box

P_FLOOR = 0.1


@dataclass
class RunConfig:
    p_grid: list = field(default_factory=lambda: list(DEFAULT_GRID))
    seed: int = 0
    budget: tuple = (8, 200)
    L_sweep: list = field(default_factory=lambda: [8, 16, 32, 64])
    window_sweep: list | None = None
    weight: Weight = field(default_factory=lambda: Weight.poly(1.0))
    allow_partial_grid: bool = False

    def __post_init__(self):
        self.p_grid = parse_grid(self.p_grid)
        if any(p < P_FLOOR for p in self.p_grid):
            raise ParameterError(f"grid exponents must be >= {P_FLOOR}")
        if not self.allow_partial_grid and not {1.0, 2.0, INF} <= set(self.p_grid):
            raise ParameterError("p grid must include 1, 2 and inf (pass --allow-partial-grid to override)")
        self.weight = Weight.parse(self.weight)
        if len(self.budget) != 2 or min(self.budget) < 1:
            raise ParameterError("budget is (starts, iterations), both >= 1")

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        doc = {}
        if getattr(args, "config", None):
            try:
                doc = json.loads(Path(args.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ParameterError(f"cannot read config {args.config}: {exc}") from exc
        if args.p_grid is not None:
            doc["p_grid"] = args.p_grid
        if args.seed is not None:
            doc["seed"] = args.seed
        if getattr(args, "budget", None):
            doc["budget"] = [int(x) for x in args.budget.split(",")]
        if getattr(args, "windows", None):
            doc["window_sweep"] = [int(x) for x in args.windows.split(",")]
        if getattr(args, "weight", None):
            doc["weight"] = json.loads(args.weight)
        if args.allow_partial_grid:
            doc["allow_partial_grid"] = True
        known = {"p_grid", "seed", "budget", "L_sweep", "window_sweep", "weight", "allow_partial_grid"}
        extra = set(doc) - known
        if extra:
            raise ParameterError(f"unknown config keys {sorted(extra)}")
        if "budget" in doc:
            doc["budget"] = tuple(doc["budget"])
        return cls(**doc)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("LPSTAB_THREADS", "1")))
    except ValueError:
        return 1


# -- output helpers ------------------------------------------------------------------------
def _emit(args, name: str, doc, csv_text: str | None = None):
    """Print the report and, with --out-dir, write JSON (and CSV) atomically."""
    if args.out_dir:
        write_report(Path(args.out_dir) / f"{name}.json", doc)
        if csv_text is not None:
            write_text_atomic(Path(args.out_dir) / f"{name}.csv", csv_text)
    if args.format == "csv" and csv_text is not None:
        sys.stdout.write(csv_text)
    else:
        sys.stdout.write(dumps_report(doc))


# -- gen ------------------------------------------------------------------------------------
def _gen_space(args):
    if args.space:
        return make_space(json.loads(args.space))
    if args.dims:
        return zd_box([int(x) for x in args.dims.split(",")])
    return z_interval(args.n)


def _generate(args):
    g = args.generator
    if g == "dilation":
        return zoo.dilation_matrix(args.n, args.lam)
    if g == "staircase":
        return zoo.staircase_matrix(args.p, args.N)
    if g == "random-walk":
        return zoo.random_walk_operator(args.n)
    if g == "elliptic":
        return zoo.elliptic_operator(args.n, args.shift)
    if g == "identity":
        from .opmat import identity

        return identity(_gen_space(args))
    if g == "slanted":
        return zoo.slanted_matrix(args.alpha, args.width, args.n, args.seed or 0)
    if g == "random-thin-sparse":
        return zoo.random_thin_sparse(_gen_space(args), args.r, args.v, args.density, args.seed or 0, args.rows, args.diag_shift)
    if g == "polynomial-decay":
        return zoo.polynomial_decay_matrix(_gen_space(args), args.beta, args.seed or 0)
    if g == "exponential-decay":
        return zoo.exponential_decay_matrix(_gen_space(args), args.rate, args.seed or 0)
    raise ParameterError(f"unknown generator {g!r}")


def cmd_gen(args) -> int:
    A = _generate(args)
    out = args.out or (Path(args.out_dir) / f"{args.generator}.json" if args.out_dir else None)
    if out is None:
        raise ParameterError("gen needs --out or --out-dir")
    write_matrix(out, A)
    summary = {"file": str(out), "shape": list(A.shape), "entries": A.nnz, **A.stats.summary()}
    sys.stdout.write(dumps_report(summary))
    return 0


# -- analyze --------------------------------------------------------------------------------
def analyze_matrix(A, cfg: RunConfig) -> dict:
    st = A.stats
    doc = {"shape": list(A.shape), "entries": A.nnz, "structure": st.summary()}
    norms = {"1": norm_1(A), "2": norm_2(A).value, "inf": norm_inf(A), "schur": schur_norm(A), "sup": A.sup}
    if A.same:
        norms["weighted_schur"] = weighted_schur_norm(A, cfg.weight)
        if A.col_space.is_lattice:
            norms["cd"] = cd_norm(A)
            norms["weighted_cd"] = cd_norm(A, cfg.weight)
    doc["norms"] = norms
    doc["weight"] = cfg.weight.to_json()
    sp_ = A.col_space
    g = sp_.growth
    doc["doubling"] = {"D": g.doubling_D, "growth_d": g.growth_d, "growth_K": g.growth_K, "samples": g.doubling_samples}
    checks = {}
    gb = check_gram_banded(A)
    checks["gram_banded"] = {"ok": gb.ok, "propagation": gb.propagation, "bound": gb.bound}
    ss = sparse_sparse_bound(A)
    checks["sparse_sparse"] = {"ok": ss.verified, "v": ss.v, "bound": ss.bound, "norms": {fmt_p(k): v for k, v in ss.norms.items()}}
    r = st.thickness
    n = A.n_cols
    if sp_.kind == "z_interval" and n > 2 * r + 2:
        rng = np.random.default_rng(cfg.seed)
        u = np.zeros(n)
        v = np.zeros(n)
        half = (n - 2 * r - 1) // 2
        u[: max(1, half)] = rng.standard_normal(max(1, half))
        v[max(1, half) + 2 * r + 1 :] = rng.standard_normal(n - max(1, half) - 2 * r - 1)
        dc = check_disjoint_supports(A, u, v)
        checks["disjoint_supports"] = {"ok": dc.disjoint, "precondition_met": dc.precondition_met, "gap": dc.gap}
    doc["checks"] = checks
    if A.same and sp_.diameter >= 3:
        doc["decay"] = inverse.decay_profile(A).to_json()
    return doc


def cmd_analyze(args) -> int:
    cfg = RunConfig.from_args(args)
    A = read_matrix(args.file)
    _emit(args, "analyze", analyze_matrix(A, cfg))
    return 0


# -- lambda -------------------------------------------------------------------------------------
def cmd_lambda(args) -> int:
    cfg = RunConfig.from_args(args)
    A = read_matrix(args.file)
    grid = cfg.p_grid
    strict = not cfg.allow_partial_grid

    def one(M):
        return stability.stability_report(M, grid, cfg.seed, cfg.budget, require_standard=strict, method=args.method)

    rep = one(A)
    doc = rep.to_json()
    if cfg.window_sweep and A.same and A.col_space.is_lattice:
        from .opmat import restrict

        subs = [restrict(A, w) for w in cfg.window_sweep]
        with ThreadPoolExecutor(max_workers=_threads()) as ex:
            reports = list(ex.map(one, subs))
        doc["window_sweep"] = [
            {"window": M.n_cols, "lambda": r.lambda_small, "estimates": {fmt_p(p): e.value for p, e in r.estimates.items()}}
            for M, r in zip(subs, reports)
        ]
    _emit(args, "lambda", doc, rep.to_csv())
    return 0


# -- localize ---------------------------------------------------------------------------------------
def _load_f(args, n, seed):
    if args.f:
        try:
            f = np.asarray(json.loads(Path(args.f).read_text()), dtype=float)
        except (OSError, json.JSONDecodeError, ValueError) as exc:
            raise ParameterError(f"cannot read f from {args.f}: {exc}") from exc
        if f.shape != (n,):
            raise ParameterError(f"f has shape {f.shape}, expected ({n},)")
        return f
    rng = np.random.default_rng(seed)
    if args.f_kind == "ones":
        return np.ones(n)
    if args.f_kind == "bump":
        x = np.arange(n)
        return np.exp(-(((x - n / 2) / max(n / 8, 1)) ** 2))
    return rng.standard_normal(n)


def cmd_localize(args) -> int:
    cfg = RunConfig.from_args(args)
    A = read_matrix(args.file)
    f = _load_f(args, A.n_cols, cfg.seed)
    Ls = [float(x) for x in args.L.split(",")] if args.L else cfg.L_sweep
    out = []
    for L in Ls:
        res = stability.localize(A, f, L, parse_p(args.p))
        out.append(res.to_json())
    doc = {"p": fmt_p(parse_p(args.p)), "results": out}
    pts = [(r["L"], r["ratio_h"]) for r in out if r["ratio_h"] > 0]
    if len({L for L, _ in pts}) >= 2:
        # measured, not assumed: the localized ratio's decay exponent in L
        x, y = np.log([L for L, _ in pts]), np.log([v for _, v in pts])
        doc["ratio_decay_exponent"] = float(np.polyfit(x, y, 1)[0])
    _emit(args, "localize", doc)
    return 0 if all(r["holds"] for r in out) else 1


# -- invert --------------------------------------------------------------------------------------------
def cmd_invert(args) -> int:
    cfg = RunConfig.from_args(args)
    A = read_matrix(args.file)
    rep = inverse.stability_pipeline(A, cfg.weight, cfg.p_grid, cfg.seed, windows=cfg.window_sweep, budget=cfg.budget)
    doc = rep.to_json()
    if args.emit_inverse:
        try:
            B, _ = inverse.build_left_inverse(A)
            write_matrix(args.emit_inverse, B)
            doc["inverse_file"] = str(args.emit_inverse)
        except LpstabError as exc:
            doc["inverse_file"] = None
            doc["inverse_error"] = str(exc)
    _emit(args, "invert", doc, rep.to_csv())
    return 0


# -- verify ------------------------------------------------------------------------------------------------
def cmd_verify(args) -> int:
    seed = args.seed or 0
    out_dir = Path(args.out_dir or ".")
    if args.replay:
        doc = json.loads(Path(args.replay).read_text())
        ok, outcomes = verify.replay(doc)
        sys.stdout.write(dumps_report({"replay": str(args.replay), "passed": ok, "outcomes": outcomes}))
        return 0 if ok else 1
    if args.matrix:
        try:
            text = Path(args.matrix).read_text()
        except OSError as exc:
            raise ParameterError(f"cannot read {args.matrix}: {exc.strerror}") from exc
        ok, failures = verify.verify_matrix_text(text, seed)
        status = "PASS" if ok else "FAIL"
        print(f"[{status}] matrix file {args.matrix}")
        if not ok:
            doc = {"kind": "counterexample", "suite": "matrix", "seed": seed, "source": str(args.matrix), "failures": failures}
            path = write_report(out_dir / f"counterexample_matrix_seed{seed}.json", doc)
            for f in failures:
                print(f"  failed check: {f['check']}" + (f" ({f['error']})" if "error" in f else ""))
            print(f"counterexample written to {path}")
            return 1
        return 0
    results = verify.run_suite(args.suite, seed)
    for c in results:
        print(c.line())
    if args.out_dir:
        write_report(out_dir / f"verify_{args.suite}_seed{seed}.json", {"suite": args.suite, "seed": seed, "criteria": [c.to_json() for c in results]})
    paths = verify.dump_counterexamples(results, args.suite, seed, out_dir)
    for p in paths:
        print(f"counterexample written to {p}")
    return 0 if all(c.ok for c in results) else 1


# -- parser --------------------------------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="seed for every randomized step")
    common.add_argument("--out-dir", default=None, help="directory for JSON/CSV outputs")
    common.add_argument("--p-grid", default=None, help="comma-separated exponents, e.g. 1,2,inf")
    common.add_argument("--allow-partial-grid", action="store_true", help="allow a grid without 1, 2 and inf")
    common.add_argument("--config", default=None, help="RunConfig JSON file")
    fmt = common.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="format", action="store_const", const="json", default="json")
    fmt.add_argument("--csv", dest="format", action="store_const", const="csv")

    ap = argparse.ArgumentParser(prog="lpstab", description="lp stability of matrices indexed by doubling metric spaces")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="write a generated matrix file")
    g.add_argument("generator", choices=sorted(list(zoo.GENERATORS) + ["identity"]))
    g.add_argument("--out", default=None)
    g.add_argument("--n", type=int, default=100)
    g.add_argument("--N", type=int, default=16)
    g.add_argument("--p", type=parse_p, default=1.0)
    g.add_argument("--lambda", dest="lam", type=float, default=1.0)
    g.add_argument("--shift", type=float, default=0.5)
    g.add_argument("--alpha", type=float, default=1.0)
    g.add_argument("--width", type=int, default=1)
    g.add_argument("--r", type=int, default=1)
    g.add_argument("--v", type=int, default=None)
    g.add_argument("--rows", type=int, default=None, help="bare row count (default: rows are the space)")
    g.add_argument("--density", type=float, default=0.5)
    g.add_argument("--diag-shift", type=float, default=0.0)
    g.add_argument("--beta", type=float, default=3.0)
    g.add_argument("--rate", type=float, default=1.0)
    g.add_argument("--dims", default=None, help="ℤᵈ box dims, e.g. 30,30")
    g.add_argument("--space", default=None, help="space JSON, e.g. '{\"kind\":\"tree\",\"degree\":3,\"radius\":4}'")
    g.set_defaults(func=cmd_gen)

    a = sub.add_parser("analyze", parents=[common], help="structure, norms and property checks")
    a.add_argument("file")
    a.add_argument("--weight", default=None, help='weight JSON: {"poly": 1} or {"subexp": [1, 0.5]}')
    a.set_defaults(func=cmd_analyze)

    lam = sub.add_parser("lambda", parents=[common], help="λ_p estimates over the grid")
    lam.add_argument("file")
    lam.add_argument("--budget", default=None, help="starts,iterations")
    lam.add_argument("--method", default="auto", choices=["auto", "exact_svd", "exact_inverse", "sign_pattern", "optimizer"])
    lam.add_argument("--windows", default=None, help="comma-separated sub-window sizes")
    lam.set_defaults(func=cmd_lambda)

    lo = sub.add_parser("localize", parents=[common], help="localize a given f")
    lo.add_argument("file")
    lo.add_argument("--f", default=None, help="JSON array with f")
    lo.add_argument("--f-kind", default="random", choices=["random", "ones", "bump"])
    lo.add_argument("--L", default=None, help="comma-separated radii")
    lo.add_argument("--p", default="2")
    lo.set_defaults(func=cmd_localize)

    inv = sub.add_parser("invert", parents=[common], help="left inverse and stability pipeline")
    inv.add_argument("file")
    inv.add_argument("--emit-inverse", default=None, help="write B as a matrix file")
    inv.add_argument("--windows", default=None, help="comma-separated sub-window sizes")
    inv.add_argument("--budget", default=None, help="starts,iterations")
    inv.add_argument("--weight", default=None)
    inv.set_defaults(func=cmd_invert)

    v = sub.add_parser("verify", parents=[common], help="run acceptance suites")
    v.add_argument("--suite", default="all", choices=sorted(list(verify.SUITES) + ["all"]))
    v.add_argument("--matrix", default=None, help="verify a matrix file instead of a suite")
    v.add_argument("--replay", default=None, help="replay a counterexample dump")
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except LpstabError as exc:
        print(f"lpstab: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (json.JSONDecodeError, ValueError) as exc:
        print(f"lpstab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
