from __future__ import annotations

import math

import numpy as np
import pytest

from lpstab.errors import DecayViolationError, DegenerateInputError, ParameterError, StepTooLargeError
from lpstab.inverse import band_truncate
from lpstab.opmat import IndexedMatrix, identity
from lpstab.space import z_interval
from lpstab.stability import (
    PropagationConstants,
    almost_ts_localize,
    almost_ts_preset,
    chain_propagation,
    estimate_lambda,
    flat_tail,
    lambda_estimate,
    lambda_exact_2,
    lambda_exact_inverse,
    lambda_sign_pattern,
    localize,
    propagation_bound,
    ratio,
    sequence_tail_bound,
    stability_report,
    top_m_thinning,
    z_lambda2_bound,
)
from lpstab.zoo import polynomial_decay_matrix, random_thin_sparse, random_walk_operator, staircase_matrix

INF = math.inf


def dense(M):
    M = np.asarray(M, dtype=float)
    return IndexedMatrix.from_dense(M, z_interval(M.shape[1]))


# -- exact λ ----------------------------------------------------------------------------------
def test_lambda_exact_2_examples():
    assert lambda_exact_2(dense(np.diag([3.0, 1.0, 2.0]))).value == pytest.approx(1.0, abs=1e-14)
    assert lambda_exact_2(identity(z_interval(6))).value == pytest.approx(1.0, abs=1e-14)


def test_lambda_exact_2_path_spectrum():
    # Dirichlet path graph: eigenvalues 1 - cos(kπ/(n+1))
    n = 100
    oracle = 1 - math.cos(math.pi / (n + 1))
    assert oracle == pytest.approx(4.838e-4, rel=1e-3)
    assert lambda_exact_2(random_walk_operator(n)).value == pytest.approx(oracle, rel=1e-9)


def test_lambda_exact_witness_reproduces_value(rng):
    A = dense(rng.standard_normal((9, 9)))
    for est in (lambda_exact_2(A), lambda_exact_inverse(A, 1), lambda_exact_inverse(A, INF)):
        assert est.recompute(A) == pytest.approx(est.value, rel=1e-9)


def test_exact_inverse_matches_sign_pattern(rng):
    A = dense(rng.standard_normal((7, 7)) + 3 * np.eye(7))
    for p in (1.0, INF):
        assert lambda_sign_pattern(A, p).value == pytest.approx(lambda_exact_inverse(A, p).value, rel=1e-12)


def test_lambda_zero_matrix():
    Z = IndexedMatrix.from_entries(z_interval(4), "same", [])
    est = lambda_estimate(Z, 2.0)
    assert est.value == 0.0
    assert np.linalg.norm(est.witness) == pytest.approx(1.0)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0, INF])
def test_lambda_identity(p):
    assert estimate_lambda(identity(z_interval(12)), p).value == pytest.approx(1.0, abs=1e-12)


def test_staircase_lambda_infinity_witness():
    A = staircase_matrix(1, 16)
    e16 = np.zeros(A.n_cols)
    e16[-1] = 1.0
    assert ratio(A, e16, INF) == pytest.approx(1 / 16)
    assert lambda_estimate(A, INF).value <= 1 / 16 + 1e-15


def test_optimizer_calibrated_at_two():
    rng = np.random.default_rng(0)
    for _ in range(200):
        M = rng.standard_normal((10, 10))
        oracle = np.linalg.svd(M, compute_uv=False)[-1]
        assert lambda_estimate(dense(M), 2.0, budget=(4, 60)).value == pytest.approx(oracle, abs=1e-6)


def test_optimizer_upper_bounds_exact(rng):
    # the optimizer only ever reports achieved ratios
    for _ in range(20):
        A = dense(rng.standard_normal((8, 8)))
        for p in (1.0, INF):
            assert lambda_estimate(A, p, budget=(4, 60)).value >= lambda_exact_inverse(A, p).value * (1 - 1e-9)


def test_estimate_is_seed_deterministic():
    A = random_thin_sparse(z_interval(80), 2, None, 0.6, seed=1, diag_shift=1.0)
    a = lambda_estimate(A, 3.0, seed=5)
    b = lambda_estimate(A, 3.0, seed=5)
    assert a.value == b.value and np.array_equal(a.witness, b.witness)


# -- localization -------------------------------------------------------------------------------
@pytest.mark.parametrize("L", [1, 4, 16])
def test_localize_identity(L, rng):
    f = rng.standard_normal(200)
    for p in (1.0, 2.0, INF):
        res = localize(identity(z_interval(200)), f, L, p)
        assert res.ratio_h == pytest.approx(1.0)
        assert res.ratio_h <= 3 * (1 + 3 / L)
        assert res.radius <= 2 * L


def test_localize_banded_certificate():
    n = 4000
    for seed in range(3):
        A = random_thin_sparse(z_interval(n), 2, None, 0.7, seed=seed)
        f = np.random.default_rng(seed).standard_normal(n)
        for L in (8, 32, 256):
            for p in (1.0, 2.0, INF):
                res = localize(A, f, L, p)
                assert res.holds, (seed, L, p, res.ratio_h, res.bound)
                assert res.radius <= 2 * L


def test_localize_general_form_on_tree(rng):
    from lpstab.space import tree

    T = tree(3, 4)
    A = random_thin_sparse(T, 1, None, 0.7, seed=3)
    f = rng.standard_normal(T.n)
    res = localize(A, f, 2, 2.0)
    assert res.form == "general" and res.holds and res.radius <= 4


def test_localize_ratio_decreases_for_walk():
    n = 20000
    A = random_walk_operator(n)
    ratios = [localize(A, np.ones(n), L, 2.0).ratio_h for L in (8, 32, 128)]
    assert ratios[0] > ratios[1] > ratios[2]


def test_localize_errors():
    A = random_walk_operator(30)
    with pytest.raises(ParameterError):
        localize(A, np.ones(30), 0.5, 2.0)
    with pytest.raises(DegenerateInputError):
        localize(A, np.zeros(30), 4, 2.0)


# -- propagation --------------------------------------------------------------------------------
def _zconsts(r=1.0, v=3.0):
    return PropagationConstants(C1=3, C2=3 * r * r, K=18.0, d=1.0, r=r, v=v, form="z")


def test_propagation_zero_gap():
    c = _zconsts()
    assert propagation_bound(0.7, 2, 2, c) == pytest.approx(0.7 / 18)


def test_propagation_two_to_infinity():
    oracle = (0.9 / (18 * math.sqrt(3))) ** 2
    assert propagation_bound(0.9, 2, INF, _zconsts()) == pytest.approx(oracle, rel=1e-12)
    assert oracle == pytest.approx(8.33e-4, rel=1e-3)


def test_propagation_vanishing_and_step_limit():
    c = _zconsts()
    assert propagation_bound(0.0, 2, INF, c) == 0.0
    with pytest.raises(StepTooLargeError):
        propagation_bound(0.5, 1, INF, c)


def test_chain_exponent_d1():
    est = {1.0: 0.5, 2.0: 0.9, INF: 0.4}
    res = chain_propagation({1.0: 0.9, 2.0: 0.5, INF: 0.4}, _zconsts())
    # from p=1 to p=∞ there are two steps of gap 1/2
    steps = res.per_target[INF]["steps"]
    assert len(steps) == 2 and all(s.gap == pytest.approx(0.5) for s in steps)
    assert res.per_target[INF]["exponent"] == pytest.approx(4.0)
    assert chain_propagation(est, _zconsts()).p_M == 2.0


def test_z_lambda2_identity():
    rep = stability_report(identity(z_interval(20)), [1, 2, INF])
    assert rep.lambda_small == pytest.approx(1.0) and rep.Lambda_big == pytest.approx(1.0)
    assert rep.z_lambda2["holds"]
    assert z_lambda2_bound(1.0, 0, 1.0) == pytest.approx(1 / 162)


def test_z_lambda2_small_banded():
    for seed in range(5):
        A = random_thin_sparse(z_interval(12), 1, None, 0.8, seed=seed, diag_shift=0.5)
        rep = stability_report(A, [1, 4 / 3, 2, 3, 6, INF], seed=seed)
        lam2 = rep.estimates[2.0].value
        r = max(A.stats.band_width, 1)
        for p, e in rep.estimates.items():
            assert lam2 >= (e.value - 1e-6) ** 2 / (162 * r**3 * A.sup)


def test_report_requires_standard_grid():
    with pytest.raises(ParameterError):
        stability_report(identity(z_interval(5)), [2, 3])


def test_report_degenerate_verdict():
    rep = stability_report(staircase_matrix(1, 16), [1, 2, INF])
    assert rep.verdict == "uniformly_bounded_below"
    Z = IndexedMatrix.from_entries(z_interval(5), "same", [[0, 0, 1.0]])
    assert stability_report(Z, [1, 2, INF]).verdict == "degenerate"


# -- almost thin-sparse ------------------------------------------------------------------------------
def test_almost_ts_exact_approximant(rng):
    A = random_thin_sparse(z_interval(300), 2, None, 0.7, seed=2, diag_shift=1.0)
    f = rng.standard_normal(300)
    res = almost_ts_localize(A, A, f, 16, 2.0, t=1, s=1, r=2, v=5)
    base = localize(A, f, 16, 2.0)
    assert res.approx_error == 0.0
    assert res.bound == pytest.approx(base.bound)
    assert res.holds


def test_almost_ts_polynomial_decay():
    n = 600
    A = polynomial_decay_matrix(z_interval(n), 3.0, seed=0)
    f = np.random.default_rng(0).standard_normal(n)
    for r in (4, 8, 16):
        tail = sum(2 * (1 + k) ** -3.0 for k in range(r + 1, n))
        err = np.abs(A.todense() - band_truncate(A, r).todense()).sum(axis=0).max()
        assert err <= tail + 1e-12 and tail <= r**-2.0
    res = almost_ts_localize(A, lambda r, v: band_truncate(A, r), f, 64, 1.0, t=2, s=1, r=8, v=17)
    assert res.holds


def test_almost_ts_decay_violation():
    n = 200
    A = polynomial_decay_matrix(z_interval(n), 1.5, seed=0)
    with pytest.raises(DecayViolationError):
        almost_ts_localize(A, lambda r, v: band_truncate(A, r), np.ones(n), 16, 1.0, t=5, s=5, r=4, v=9)


def test_almost_ts_preset():
    pre = almost_ts_preset(0.01, 2, 1, 1)
    assert pre.u == 0.5
    assert pre.L == pytest.approx(1e4)


# -- sequences and thinning ------------------------------------------------------------------------------
def test_sequence_tail_bound_values():
    assert sequence_tail_bound(1, 2, 1) == pytest.approx(0.5)
    assert sequence_tail_bound(1, 2, 4) == pytest.approx(0.25)
    with pytest.raises(ParameterError):
        sequence_tail_bound(2, 2, 1)


def test_flat_sequence_attains_bound():
    # with p=1, q=2, m=1 the flat sequence of k=2 entries 1/2 has tail exactly 1/2
    assert flat_tail(1, 2, 1, 2) == pytest.approx(sequence_tail_bound(1, 2, 1))


@pytest.mark.parametrize("p,q,m", [(1, 2, 1), (1, 2, 4), (1, 3, 2), (1.5, 4, 3), (1, INF, 2)])
def test_integer_k_scan_below_bound(p, q, m):
    best = max(flat_tail(p, q, m, k) for k in range(1, 2000))
    assert best <= sequence_tail_bound(p, q, m) * (1 + 1e-12)
    if not math.isinf(q):
        kstar = max(range(1, 2000), key=lambda k: flat_tail(p, q, m, k))
        assert abs(kstar - m / (1 - p / q)) <= 1


def test_thinning_single_column():
    A = IndexedMatrix.from_entries(z_interval(1), 3, [[0, 0, 0.5], [1, 0, 0.3], [2, 0, 0.2]])
    res = top_m_thinning(A, 1, 1, 2)
    assert res.scale == pytest.approx(1.0)
    assert res.A_m.entries == [(0, 0, 0.5)]
    assert res.measured[2.0] == pytest.approx(math.sqrt(0.13))
    assert res.bound == pytest.approx(0.5)
    assert res.holds


def test_thinning_large_m_is_identity_map():
    A = staircase_matrix(1, 8)
    res = top_m_thinning(A, 100, 1, 2)
    assert res.A_m == A and all(v == 0 for v in res.measured.values())


def test_thinning_staircase():
    A = staircase_matrix(1, 16)
    res = top_m_thinning(A, 4, 1, 2)
    assert res.measured[2.0] <= 0.5 * 4**-0.5 * res.v_r**0.5
    assert res.holds
