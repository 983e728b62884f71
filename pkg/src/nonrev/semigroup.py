"""Decay of matrix semigroups exp(-tB) and the closed-form 2x2 theory."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from nonrev.errors import Underflow, ValidationError
from nonrev.linalg import as_square, expm, frobenius_norm, operator_norm
from nonrev.optimal import OptimalPair, kappa_qinv_s


@dataclass(frozen=True)
class DecayCurve:
    times: np.ndarray
    norms: np.ndarray
    label: str = ""


def decay_curve(b, t_max: float, steps: int = 200, label: str = "") -> DecayCurve:
    """Operator norms of exp(-tB) on a uniform grid of ``steps`` points in [0, t_max].

    Every point is an independent exponential; no powers of exp(-dt B) are reused.
    """
    b = as_square(b)
    if not t_max > 0.0:
        raise ValidationError("t_max must be positive")
    if steps < 2:
        raise ValidationError("need at least two grid points")
    times = np.linspace(0.0, t_max, steps)
    norms = np.array([operator_norm(expm(b, -t)) for t in times])
    return DecayCurve(times, norms, label)


def fit_rate(curve: DecayCurve, transient_fraction: float = 0.3) -> dict:
    """Least-squares slope of log ||exp(-tB)|| after discarding the transient."""
    if not 0.0 <= transient_fraction < 1.0:
        raise ValidationError("transient_fraction must lie in [0, 1)")
    t, y = curve.times, curve.norms
    keep = t >= t[0] + transient_fraction * (t[-1] - t[0])
    t, y = t[keep], y[keep]
    if t.size < 10:
        raise ValidationError("fewer than 10 samples after the transient cutoff")
    if np.any(y <= 1e-300):
        raise Underflow("norms underflow; shrink t_max")
    slope, intercept = np.polyfit(t, np.log(y), 1)
    return {"rate": float(-slope), "logPrefactor": float(intercept)}


def qnorm_decay_check(pair: OptimalPair, y0, times) -> float:
    """Max over ``times`` of | ||y_t||_{Q^-1}^2 e^{2 rate t} / ||y_0||_{Q^-1}^2 - 1 |.

    In exact arithmetic the Q^{-1}-norm of y_t = exp(-t(S + J~)) y_0 decays
    at exactly twice the optimal rate, so the result measures rounding only.
    """
    if pair.q is None:
        raise ValidationError("pair has no companion matrix Q")
    y0 = np.asarray(y0, dtype=float)
    if not np.any(y0):
        raise ValidationError("y0 must be nonzero")
    qinv = np.linalg.inv(pair.q)
    base = float(y0 @ qinv @ y0)
    worst = 0.0
    for t in np.atleast_1d(times):
        yt = expm(pair.b_jtilde, -t) @ y0
        val = float(yt @ qinv @ yt) * math.exp(2.0 * pair.rate * t) / base
        worst = max(worst, abs(val - 1.0))
    return worst


def semigroup_bounds(pair: OptimalPair, t) -> dict:
    """Both exponential bounds at time ``t`` together with the measured norms."""
    decay = math.exp(-pair.rate * t)
    return {
        "normTilde": operator_norm(expm(pair.b_jtilde, -t)),
        "boundTilde": math.sqrt(pair.ladder.kappa) * decay,
        "norm": operator_norm(expm(pair.b_j, -t)),
        "bound": math.sqrt(kappa_qinv_s(pair)) * decay,
    }


@dataclass(frozen=True)
class TwoDimReport:
    lam: float
    a: float
    a_crit_squared: float
    mu_plus: complex
    mu_minus: complex
    jordan: bool
    p_norm_product: float | None
    frobenius_bound: float | None

    @property
    def b_j(self) -> np.ndarray:
        return two_dim_drift(self.lam, self.a)

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "a": self.a,
            "aCritSquared": self.a_crit_squared,
            "muPlus": [self.mu_plus.real, self.mu_plus.imag],
            "muMinus": [self.mu_minus.real, self.mu_minus.imag],
            "jordan": self.jordan,
            "pNormProduct": self.p_norm_product,
            "frobeniusBound": self.frobenius_bound,
        }


def two_dim_drift(lam: float, a: float) -> np.ndarray:
    """B_J = (I + J) S for S = diag(1, lam), J = [[0, a], [-a, 0]]."""
    return np.array([[1.0, a * lam], [-a, lam]])


def two_dim_report(lam: float, a: float) -> TwoDimReport:
    if not lam > 0.0:
        raise ValidationError("lambda must be positive")
    crit = (1.0 - lam) ** 2 / (4.0 * lam)
    a2 = a * a
    disc = 4.0 * lam * a2 - (1.0 - lam) ** 2
    root = np.sqrt(complex(disc))
    mu_p = (lam + 1.0 + 1j * root) / 2.0
    mu_m = (lam + 1.0 - 1j * root) / 2.0
    jordan = abs(a2 - crit) <= 1e-10 * max(1.0, a2)
    p_prod = bound = None
    if a2 > crit and not jordan:
        al_p = (mu_p - 1.0) / (a * lam)
        al_m = (mu_m - 1.0) / (a * lam)
        p = np.array([[1.0, 1.0], [al_p, al_m]])
        pinv = np.array([[al_m, -1.0], [-al_p, 1.0]]) / (al_m - al_p)
        p_prod = frobenius_norm(np.abs(p)) * frobenius_norm(np.abs(pinv))
        bound = 2.0 * (lam + 1.0) * abs(a) / math.sqrt(disc)
    return TwoDimReport(lam, a, crit, complex(mu_p), complex(mu_m), jordan, p_prod, bound)
