import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_antisym
from nonrev.basis import build_balanced_basis
from nonrev.errors import DegenerateLadder, ValidationError
from nonrev.linalg import eig_general, match_spectra, operator_norm, random_spd
from nonrev.optimal import (
    EigenLadder,
    build_jtilde,
    build_optimal_pair,
    check_divergence_free,
    default_ladder,
    kappa_qinv_s,
    lyapunov_residual,
    prefactor_constants,
    spectrum_report,
)
from nonrev.presets import make_laplacian

spd_cases = st.tuples(st.integers(2, 12), st.floats(0.0, 6.0), st.integers(0, 2**32 - 1))


def _spd(case):
    n, log_kappa, seed = case
    return random_spd(np.random.default_rng(seed), n, 10.0**log_kappa)


def test_scalar_matrix_gives_zero_perturbation():
    pair = build_optimal_pair(3.0 * np.eye(4))
    assert np.all(pair.jtilde == 0.0)
    assert np.all(pair.j == 0.0)


def test_identity_pair():
    pair = build_optimal_pair(np.eye(3))
    np.testing.assert_array_equal(pair.b_j, np.eye(3))
    assert pair.rate == 1.0


def test_two_dim_entry_against_closed_relation():
    lam = 0.1
    s = np.diag([1.0, lam])
    basis = build_balanced_basis(s)
    jt = build_jtilde(basis, EigenLadder([2.0, 3.0]), s)
    assert abs(jt[0, 1]) == pytest.approx(2.25, rel=1e-12)
    # (l2 - l1)(-2 a sqrt(lam)) = (l2 + l1)(1 - lam)
    a_oracle = -(3.0 + 2.0) * (1.0 - lam) / ((3.0 - 2.0) * 2.0 * math.sqrt(lam))
    a = jt[0, 1] / math.sqrt(lam)
    assert abs(a) == pytest.approx(abs(a_oracle), rel=1e-12)
    assert abs(a) == pytest.approx(7.115, abs=5e-4)


def test_default_ladder():
    np.testing.assert_array_equal(default_ladder(2).values, [3.0, 4.0])
    np.testing.assert_array_equal(default_ladder(1).values, [2.0])
    assert default_ladder(100).kappa == pytest.approx(200 / 101, rel=1e-15)
    pair = build_optimal_pair(np.array([[2.5]]))
    assert pair.jtilde[0, 0] == 0.0


def test_ladder_validation():
    with pytest.raises(DegenerateLadder):
        EigenLadder([1.0, 1.0])
    with pytest.raises(DegenerateLadder):
        EigenLadder([1.0, -2.0])
    with pytest.raises(ValidationError):
        build_optimal_pair(np.eye(2), construction="bogus")


def test_three_dim_rate():
    pair = build_optimal_pair(np.diag([1.0, 0.1, 0.01]))
    rep = spectrum_report(pair)
    assert rep["minRe"] == pytest.approx(0.37, abs=1e-12)
    assert rep["minReUnperturbed"] == 0.01
    assert pair.lyapunov_residual() < 1e-12


def test_laplacian_rate():
    pair = build_optimal_pair(make_laplacian(100))
    rep = spectrum_report(pair)
    assert rep["minRe"] == pytest.approx(2.0, abs=1e-6)
    assert rep["minReUnperturbed"] == pytest.approx(4 * math.sin(math.pi / 202) ** 2, rel=1e-10)


def test_divergence_free():
    s = np.diag([1.0, 0.1, 0.01])
    pair = build_optimal_pair(s)
    assert check_divergence_free(pair.j @ s, s)["divergence_free"]
    rep = check_divergence_free(s, s)
    assert not rep["divergence_free"] and rep["trace"] > 0
    assert check_divergence_free(np.zeros((3, 3)), s)["divergence_free"]


def test_prefactor_default_ladder():
    for n in (2, 3, 7):
        pair = build_optimal_pair(random_spd(np.random.default_rng(n), n, 50.0))
        c = prefactor_constants(pair)
        assert c["kappaQ"] == pytest.approx(2 * n / (n + 1))
        assert c["cn1"] < math.sqrt(2)
        assert c["upperBoundHolds"] and c["defaultLadderBoundHolds"]
        assert c["lowerBoundOffDiagonalHolds"]


def test_prefactor_cn2_three_dim():
    c = prefactor_constants(build_optimal_pair(np.diag([1.0, 0.1, 0.01])))
    # 2^5 * 3 * (6/4)^{1/2} * (6/1)^2 evaluated independently
    assert c["cn2"] == pytest.approx(4232.718275529332, rel=1e-14)


def test_prefactor_scalar_flag():
    c = prefactor_constants(build_optimal_pair(2.0 * np.eye(3)))
    assert c["jTildeNorm"] == 0.0
    assert c["scalarS"]
    assert c["lowerBoundHolds"]


def test_literal_lower_bound_can_fail():
    # nearly scalar S: J~ is tiny but the literal bound does not shrink with the spread
    c = prefactor_constants(build_optimal_pair(np.diag([1.0, 1.001])))
    assert not c["lowerBoundHolds"]
    assert c["lowerBoundOffDiagonalHolds"]


def test_kappa_qinv_s_is_tight():
    pair = build_optimal_pair(np.diag([1.0, 0.1, 0.01]))
    q_half = np.linalg.cholesky(pair.q)
    s_half = np.linalg.cholesky(pair.s)
    # ||Q^{-1/2} S^{1/2}|| * ||S^{-1/2} Q^{1/2}|| with any square-root factors
    m = np.linalg.solve(q_half, s_half)
    expect = (np.linalg.norm(m, 2) * np.linalg.norm(np.linalg.inv(m), 2)) ** 2
    assert kappa_qinv_s(pair) == pytest.approx(expect, rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(spd_cases)
def test_all_eigenvalues_on_vertical_line(case):
    s = _spd(case)
    pair = build_optimal_pair(s)
    rate = pair.rate
    w = eig_general(pair.b_jtilde).eigenvalues
    assert np.max(np.abs(w.real - rate)) <= 1e-7 * rate
    wj = eig_general(pair.b_j).eigenvalues
    assert np.max(np.abs(wj.real - rate)) <= 1e-7 * rate
    assert match_spectra(w, wj) <= 1e-7 * max(1.0, np.abs(w).max())
    # Tr(JS) = 0; rounding scales with the size of the product
    rounding = 1e-14 * s.shape[0] * operator_norm(np.eye(s.shape[0]) + pair.j) * operator_norm(s)
    assert abs(np.trace(pair.b_j) - np.trace(s)) <= rounding


@settings(max_examples=100, deadline=None)
@given(spd_cases)
def test_lyapunov_and_sign_flip(case):
    s = _spd(case)
    pair = build_optimal_pair(s)
    scale = np.linalg.norm(pair.q) * (np.linalg.norm(s) + np.linalg.norm(pair.jtilde))
    assert pair.lyapunov_residual() <= 1e-10 * scale
    flip = pair.flipped()
    assert flip.lyapunov_residual() <= 1e-10 * np.linalg.norm(flip.q) * (
        np.linalg.norm(s) + np.linalg.norm(pair.jtilde))


@settings(max_examples=100, deadline=None)
@given(spd_cases)
def test_frame_relation(case):
    s = _spd(case)
    pair = build_optimal_pair(s)
    psi = pair.basis.vectors
    lam = pair.ladder.values
    jf = psi @ pair.jtilde @ psi.T
    sf = psi @ s @ psi.T
    lhs = (lam[:, None] - lam[None, :]) * jf
    rhs = (lam[None, :] + lam[:, None]) * sf
    off = ~np.eye(lam.size, dtype=bool)
    assert np.max(np.abs(lhs - rhs)[off]) <= 1e-9 * np.abs(rhs).max()


@settings(max_examples=500, deadline=None)
@given(st.integers(2, 8), st.floats(0.0, 4.0), st.floats(0.0, 10.0), st.integers(0, 2**32 - 1))
def test_random_antisymmetric_never_beats_optimum(n, log_kappa, j_scale, seed):
    rng = np.random.default_rng(seed)
    s = random_spd(rng, n, 10.0**log_kappa)
    j = random_antisym(rng, n, j_scale)
    w = eig_general((np.eye(n) + j) @ s).eigenvalues
    rate = np.trace(s) / n
    assert w.real.min() > 0.0
    assert w.real.min() <= rate * (1 + 1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 6), st.floats(0.0, 4.0), st.integers(0, 2**32 - 1))
def test_custom_ladder(n, log_kappa, seed):
    rng = np.random.default_rng(seed)
    s = random_spd(rng, n, 10.0**log_kappa)
    ladder = EigenLadder(np.cumsum(rng.uniform(0.5, 3.0, size=n)))
    pair = build_optimal_pair(s, ladder)
    w = eig_general(pair.b_jtilde).eigenvalues
    assert np.max(np.abs(w.real - pair.rate)) <= 1e-7 * pair.rate
    assert lyapunov_residual(pair.jtilde, pair.q, s) <= 1e-9 * np.linalg.norm(pair.q) * (
        np.linalg.norm(s) + np.linalg.norm(pair.jtilde))


@pytest.mark.parametrize("n", [2, 3, 5])
def test_triangular_construction(n):
    s = random_spd(np.random.default_rng(n), n, 100.0)
    pair = build_optimal_pair(s, construction="triangular")
    psi = pair.basis.vectors
    m = psi @ pair.b_jtilde @ psi.T
    # lower triangular in the balanced frame with constant diagonal
    assert np.max(np.abs(np.triu(m, 1))) <= 1e-12 * operator_norm(s)
    np.testing.assert_allclose(np.diag(m), pair.rate, rtol=1e-10)
    with pytest.raises(ValidationError):
        pair.lyapunov_residual()
