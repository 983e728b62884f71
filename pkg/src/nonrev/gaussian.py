"""Exact evolution of Gaussian laws under dX = -B X dt + sqrt(2) dW, B = (I + J) S.

The stationary law is N(0, S^{-1}).  Distances to it are measured in
L^2(psi_inf^{-1}), which is finite only while Sigma_t < 2 S^{-1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla

from nonrev.errors import NonSpd, TimeBelowThreshold, ValidationError
from nonrev.linalg import as_square, expm, operator_norm, validate_spd
from nonrev.optimal import OptimalPair, kappa_qinv_s


@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=float)
        if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-10 * (1.0 + np.abs(cov).max()):
            raise ValidationError("covariance is not symmetric")
        cov = 0.5 * (cov + cov.T)
        if np.linalg.eigvalsh(cov)[0] < -1e-12 * max(operator_norm(cov), 1e-300):
            raise ValidationError("covariance is not positive semidefinite")
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))


def _drift(b) -> np.ndarray:
    return b.b_j if isinstance(b, OptimalPair) else as_square(b)


def evolve_mean(b, x0, t: float) -> np.ndarray:
    if t < 0:
        raise ValidationError("t must be nonnegative")
    return expm(_drift(b), -t) @ np.asarray(x0, dtype=float)


def evolve_covariance(b, s, sigma0, t: float) -> np.ndarray:
    """Sigma_t = S^{-1} + e^{-tB} (Sigma_0 - S^{-1}) e^{-tB^T}."""
    if t < 0:
        raise ValidationError("t must be nonnegative")
    s = validate_spd(s)
    s_inv = np.linalg.inv(s)
    s_inv = 0.5 * (s_inv + s_inv.T)
    e = expm(_drift(b), -t)
    out = s_inv + e @ (np.asarray(sigma0, dtype=float) - s_inv) @ e.T
    return 0.5 * (out + out.T)


def evolve(b, s, state: GaussianState, t: float) -> GaussianState:
    return GaussianState(evolve_mean(b, state.mean, t),
                         evolve_covariance(b, s, state.covariance, t))


def log1p_l2_squared(state: GaussianState, s) -> float:
    """log(1 + ||psi_t - psi_inf||^2) in L^2(psi_inf^{-1}); +inf when divergent.

    With W = L^T Sigma L for S = L L^T (symmetric and similar to S Sigma):
        1 + d^2 = det(W)^{-1/2} det(2I - W)^{-1/2}
                  * exp(x^T [2 (2 Sigma - Sigma S Sigma)^{-1} - Sigma^{-1}] x).
    """
    s = validate_spd(s)
    cov = state.covariance
    x = state.mean
    n = s.shape[0]
    try:
        c_cov = spla.cho_factor(cov, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NonSpd("covariance is not strictly positive definite") from exc
    ls = np.linalg.cholesky(s)
    w = ls.T @ cov @ ls
    w = 0.5 * (w + w.T)
    two_minus = 2.0 * np.eye(n) - w
    try:
        c_two = np.linalg.cholesky(two_minus)
    except np.linalg.LinAlgError:
        return math.inf
    logdet_w = 2.0 * float(np.sum(np.log(np.diag(spla.cholesky(w, lower=True)))))
    logdet_two = 2.0 * float(np.sum(np.log(np.diag(c_two))))
    quad = 0.0
    if np.any(x):
        m = 2.0 * cov - cov @ s @ cov
        m = 0.5 * (m + m.T)
        quad = 2.0 * float(x @ np.linalg.solve(m, x)) - float(x @ spla.cho_solve(c_cov, x))
    return -0.5 * logdet_w - 0.5 * logdet_two + quad


def l2_distance_to_equilibrium(state: GaussianState, s) -> float:
    """||psi_t - psi_inf|| in L^2(psi_inf^{-1}); ``math.inf`` when the law is not in that space."""
    v = log1p_l2_squared(state, s)
    if math.isinf(v) or v > 709.0:
        return math.inf
    return math.sqrt(max(math.expm1(v), 0.0))


def threshold_t0(pair: OptimalPair, sigma0) -> float:
    """t_0 = N/(2 Tr S) ln[4 (1 + ||S||) kappa(Q^{-1}S) (1 + ||S Sigma_0||)]."""
    s = pair.s
    n = pair.dim
    arg = (4.0 * (1.0 + operator_norm(s)) * kappa_qinv_s(pair)
           * (1.0 + operator_norm(s @ np.asarray(sigma0, dtype=float))))
    return n / (2.0 * float(np.trace(s))) * math.log(arg)


def gaussian_bound(pair: OptimalPair, x0, sigma0, t: float) -> float:
    """Upper bound on the squared L^2(psi_inf^{-1}) distance, valid for t >= t_0."""
    t0 = threshold_t0(pair, sigma0)
    if t < t0:
        raise TimeBelowThreshold(f"t = {t} is below t_0 = {t0}")
    n = pair.dim
    e = math.exp(-2.0 * pair.rate * (t - t0))
    r2 = float(np.dot(x0, x0))
    return n * 2.0**n * e * (1.0 + r2 * math.exp(2.0 * e * r2))


def threshold_talpha(pair: OptimalPair, alpha: float) -> float:
    """t_alpha = t_0(Sigma_0 = 0) + N/(2 Tr S) |ln(alpha/4)|."""
    if not alpha > 0.0:
        raise ValidationError("alpha must be positive")
    n = pair.dim
    t0 = threshold_t0(pair, np.zeros((n, n)))
    return t0 + n / (2.0 * float(np.trace(pair.s))) * abs(math.log(alpha / 4.0))


def general_density_bound(pair: OptimalPair, alpha: float, exp_moment: float, t: float) -> float:
    """N 2^{N+1} e^{-2 Tr S (t - t_alpha)/N} * E[exp(alpha |X_0|^2)], for t >= t_alpha.

    ``exp_moment`` is supplied by the caller; this is a certificate, not a
    measurement.
    """
    ta = threshold_talpha(pair, alpha)
    if t < ta:
        raise TimeBelowThreshold(f"t = {t} is below t_alpha = {ta}")
    n = pair.dim
    return n * 2.0 ** (n + 1) * math.exp(-2.0 * pair.rate * (t - ta)) * exp_moment
