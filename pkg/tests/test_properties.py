"""Randomized checks of the invariants each module promises."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from lpstab.inverse import build_left_inverse, decay_profile, gram_lambda_identity_check, selfadjoint_inverse_norm_check
from lpstab.io import dumps_matrix, loads_matrix
from lpstab.opmat import (
    IndexedMatrix,
    absolute,
    adjoint,
    check_disjoint_supports,
    check_gram_banded,
    compose,
    op_norm,
    schur_norm,
    structural_stats,
)
from lpstab.space import covering, cutoff, select_color_class, tree, z_interval, zd_box
from lpstab.stability import (
    PropagationConstants,
    flat_tail,
    lambda_estimate,
    lambda_exact_2,
    localize,
    propagation_bound,
    sequence_tail_bound,
    tail_value,
)
from lpstab.zoo import polynomial_decay_matrix, random_thin_sparse, staircase_matrix

INF = math.inf
SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])

spaces = st.one_of(
    st.integers(5, 400).map(z_interval),
    st.tuples(st.integers(2, 14), st.integers(2, 14)).map(zd_box),
    st.tuples(st.integers(2, 4), st.integers(1, 3)).map(lambda t: tree(*t)),
)
seeds = st.integers(0, 2**31 - 1)
exponents = st.sampled_from([1.0, 4 / 3, 1.5, 2.0, 3.0, 6.0, INF])


def dense(M, rows="same"):
    return IndexedMatrix.from_dense(np.asarray(M, dtype=float), z_interval(np.shape(M)[1]), rows=rows)


@st.composite
def thin_matrices(draw, max_n=150):
    n = draw(st.integers(4, max_n))
    r = draw(st.integers(1, 4))
    return random_thin_sparse(z_interval(n), r, None, draw(st.floats(0.2, 1.0)), seed=draw(seeds)), r


@st.composite
def dense_matrices(draw, max_n=8, square=False):
    m = draw(st.integers(1, max_n))
    n = m if square else draw(st.integers(1, max_n))
    rng = np.random.default_rng(draw(seeds))
    M = rng.standard_normal((m, n)) * (rng.random((m, n)) < 0.7)
    return IndexedMatrix.from_dense(M, z_interval(n), rows="same" if m == n else m)


# -- space ----------------------------------------------------------------------------------------
@SETTINGS
@given(spaces, st.floats(0.5, 12), st.floats(1, 8))
def test_covering_and_separation(X, L, alpha):
    cov = covering(X, L, alpha)
    D = X.dist_block(cov.centers, np.arange(X.n))
    assert np.all(D.min(axis=0) <= L)
    for c in range(1, cov.num_colors + 1):
        P = cov.color_class(c)
        if P.size > 1:
            DP = X.dist_block(P, P)
            assert np.all(DP[~np.eye(P.size, dtype=bool)] >= alpha * L)
    assert cov.num_colors <= cov.max_degree + 1


@SETTINGS
@given(spaces, st.floats(0.5, 10), seeds)
def test_cutoff_lipschitz(X, L, seed):
    rng = np.random.default_rng(seed)
    P = rng.choice(X.n, size=rng.integers(1, min(X.n, 5) + 1), replace=False)
    prof = cutoff(P, L, X)
    D = X.dist_block(np.arange(X.n), np.arange(X.n))
    assert np.all(np.abs(prof.values[:, None] - prof.values[None, :]) <= D / (2 * L) + 1e-12)
    assert np.all(prof.values[P] == 1.0)


@SETTINGS
@given(spaces, st.floats(0.5, 10), seeds, exponents)
def test_select_color_pigeonhole(X, L, seed, p):
    f = np.random.default_rng(seed).standard_normal(X.n)
    cov = covering(X, L)
    assert select_color_class(f, cov, p).ratio >= 1 / cov.num_colors - 1e-12


# -- opmat ----------------------------------------------------------------------------------------
@SETTINGS
@given(dense_matrices())
def test_adjoint_swaps_one_and_infinity(A):
    assert op_norm(A, 1).value == op_norm(adjoint(A), INF).value


@SETTINGS
@given(dense_matrices(), st.sampled_from([1.0, 2.0, INF]))
def test_abs_monotone(A, p):
    assert op_norm(A, p).value <= op_norm(absolute(A), p).value + 1e-12


@SETTINGS
@given(dense_matrices())
def test_schur_is_sum_of_extreme_norms(A):
    assert schur_norm(A) == op_norm(A, 1).value + op_norm(A, INF).value


@SETTINGS
@given(seeds, st.integers(1, 7))
def test_compose_associative(seed, n):
    rng = np.random.default_rng(seed)
    A, B, C = (dense(rng.standard_normal((n, n))) for _ in range(3))
    lhs = compose(compose(A, B), C).todense()
    rhs = compose(A, compose(B, C)).todense()
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, np.abs(lhs).max())


@SETTINGS
@given(thin_matrices())
def test_gram_band_at_most_twice_thickness(Ar):
    A, r = Ar
    g = check_gram_banded(A)
    assert g.ok and g.propagation <= 2 * structural_stats(A).thickness <= 2 * r


@SETTINGS
@given(thin_matrices(), seeds)
def test_separated_inputs_give_disjoint_outputs(Ar, seed):
    A, _ = Ar
    r = int(structural_stats(A).thickness)
    n = A.n_cols
    rng = np.random.default_rng(seed)
    cut = int(rng.integers(0, n))
    u = np.zeros(n)
    v = np.zeros(n)
    u[:cut] = rng.standard_normal(cut)
    v[cut + 2 * r + 1 :] = rng.standard_normal(max(0, n - cut - 2 * r - 1))
    res = check_disjoint_supports(A, u, v)
    assert res.precondition_met or not (u.any() and v.any())
    if res.precondition_met:
        assert res.disjoint


# -- stability ----------------------------------------------------------------------------------------
@SETTINGS
@given(dense_matrices(max_n=7, square=True))
def test_estimates_are_upper_bounds_at_two(A):
    exact = lambda_exact_2(A).value
    est = lambda_estimate(A, 2.0, budget=(3, 60)).value
    assert est >= exact - 1e-6


@SETTINGS
@given(thin_matrices(max_n=300), st.integers(4, 64), seeds, st.sampled_from([1.0, 2.0, 3.0, INF]))
def test_localize_certificate_and_additivity(Ar, L, seed, p):
    A, r = Ar
    if L < A.stats.band_width:
        L = int(A.stats.band_width)
    f = np.random.default_rng(seed).standard_normal(A.n_cols)
    res = localize(A, f, L, p)
    assert res.holds
    assert res.radius <= 2 * L
    assert res.additivity_gap <= 1e-9


@st.composite
def pqm(draw):
    p = draw(st.sampled_from([1.0, 1.5, 2.0]))
    q = draw(st.one_of(st.just(INF), st.floats(p + 0.5, 4.0)))
    return p, q, draw(st.integers(1, 8))


@SETTINGS
@given(pqm(), seeds)
def test_sequence_bound_dominates_random_sequences(params, seed):
    p, q, m = params
    rng = np.random.default_rng(seed)
    a = np.sort(rng.random((200, 12)) ** rng.uniform(0.2, 5), axis=1)[:, ::-1]
    a /= np.sum(a**p, axis=1, keepdims=True) ** (1 / p)
    best = max(tail_value(row, q, m) for row in a)
    assert best <= sequence_tail_bound(p, q, m) * (1 + 1e-12)


@pytest.mark.parametrize("p,q,m", [(1, 2, 1), (1, 2, 3), (1, 4, 3), (1.5, 3, 2), (2, 4, 4), (1, 1.5, 1)])
def test_sequence_bound_attained_at_integer_optimum(p, q, m):
    k = round(m / (1 - p / q))
    assert k == pytest.approx(m / (1 - p / q))
    assert flat_tail(p, q, m, k) == pytest.approx(sequence_tail_bound(p, q, m), abs=1e-6)


@SETTINGS
@given(st.floats(0, 1), st.floats(0, 1), exponents, exponents)
def test_propagation_monotone(l1, l2, p, q):
    c = PropagationConstants(C1=3, C2=3, K=18.0, d=1.0, r=2.0, v=5.0, form="z")
    if abs(1 / p - 1 / q) >= 1:
        return
    lo, hi = sorted((l1, l2))
    assert propagation_bound(lo, p, q, c) <= propagation_bound(hi, p, q, c)
    if p == q:
        assert propagation_bound(hi, p, p, c) == pytest.approx(hi / 18)


# -- inverse -----------------------------------------------------------------------------------------
@SETTINGS
@given(dense_matrices(max_n=10))
def test_left_inverse_identity_when_built(A):
    from lpstab.errors import NotBoundedBelowError

    try:
        B, diag = build_left_inverse(A)
    except NotBoundedBelowError:
        return
    assert np.abs(B.todense() @ A.todense() - np.eye(A.n_cols)).max() <= 1e-8


@SETTINGS
@given(st.integers(30, 300), st.floats(1.2, 4), seeds)
def test_decay_errors_monotone(n, beta, seed):
    prof = decay_profile(polynomial_decay_matrix(z_interval(n), beta, seed=seed), radii=[1, 2, 4, 8, 16])
    assert all(a >= b for a, b in zip(prof.errors, prof.errors[1:]))


@SETTINGS
@given(dense_matrices(max_n=10))
def test_gram_identity_random(A):
    assert gram_lambda_identity_check(A).gap <= 1e-9 or gram_lambda_identity_check(A).rhs < 1e-12


@SETTINGS
@given(seeds, st.integers(2, 9))
def test_selfadjoint_inverse_norm_at_two(seed, n):
    X = np.random.default_rng(seed).standard_normal((n, n))
    A = dense(X + X.T + (2 * n) * np.eye(n))
    res = selfadjoint_inverse_norm_check(A, 2)
    assert res.lhs * lambda_exact_2(A).value == pytest.approx(1.0, abs=1e-9)


# -- zoo and io -----------------------------------------------------------------------------------------
@SETTINGS
@given(spaces, st.integers(1, 3), st.one_of(st.none(), st.integers(2, 8)), st.floats(0.1, 1.0), seeds)
def test_generator_stats_exact(X, r, v, density, seed):
    from lpstab.errors import FeasibilityError

    try:
        A = random_thin_sparse(X, r, v, density, seed=seed)
    except FeasibilityError:
        return
    st_ = structural_stats(A)
    assert st_.thickness <= r
    if v is not None:
        assert st_.sparseness <= v
    assert random_thin_sparse(X, r, v, density, seed=seed) == A


@SETTINGS
@given(st.floats(1, 5), st.integers(1, 20), seeds)
def test_staircase_isometry(p, N, seed):
    A = staircase_matrix(p, N)
    f = np.random.default_rng(seed).standard_normal(N)
    lhs = np.sum(np.abs(A.todense() @ f) ** p)
    assert lhs == pytest.approx(np.sum(np.abs(f) ** p), rel=1e-12)


@SETTINGS
@given(spaces, seeds)
def test_round_trip(X, seed):
    A = random_thin_sparse(X, 1, None, 0.5, seed=seed)
    text = dumps_matrix(A)
    assert dumps_matrix(loads_matrix(text)) == text
