"""Optimal antisymmetric perturbations (J~, Q) and the constants attached to them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla

from nonrev.basis import BalancedBasis, build_balanced_basis
from nonrev.errors import DegenerateLadder, ValidationError
from nonrev.linalg import (
    as_square,
    eig_general,
    frobenius_norm,
    operator_norm,
    sqrtm_spd,
    validate_spd,
)


@dataclass(frozen=True)
class EigenLadder:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0 or not np.all(np.isfinite(v)) or np.any(v <= 0.0):
            raise DegenerateLadder("ladder values must be finite and strictly positive")
        if v.size > 1:
            gaps = np.abs(v[:, None] - v[None, :])[~np.eye(v.size, dtype=bool)]
            if gaps.min() <= 1e-12 * v.max():
                raise DegenerateLadder("ladder values must be pairwise distinct")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size

    @property
    def min_gap(self) -> float:
        v = np.sort(self.values)
        return float(np.min(np.diff(v))) if v.size > 1 else np.inf

    @property
    def max_gap(self) -> float:
        return float(self.values.max() - self.values.min())

    @property
    def kappa(self) -> float:
        return float(self.values.max() / self.values.min())


def default_ladder(n: int) -> EigenLadder:
    """lambda_k = N + k for k = 1..N, so that kappa(Q) = 2N/(N+1) < 2."""
    if n < 1:
        raise ValidationError("dimension must be positive")
    return EigenLadder(np.arange(n + 1, 2 * n + 1, dtype=float))


def _frame_to_matrix(basis: BalancedBasis, coeffs: np.ndarray) -> np.ndarray:
    # rows of basis.vectors are psi_k; M = sum_jk c_jk psi_j psi_k^T
    psi = basis.vectors
    return psi.T @ coeffs @ psi


def build_jtilde(basis: BalancedBasis, ladder: EigenLadder, s) -> np.ndarray:
    """Antisymmetric J~ with <psi_j, J~ psi_k> = -(l_k + l_j)/(l_k - l_j) <psi_j, S psi_k>."""
    s = as_square(s)
    lam = ladder.values
    if lam.size != basis.dim or s.shape[0] != basis.dim:
        raise ValidationError("basis, ladder and matrix dimensions disagree")
    psi = basis.vectors
    s_frame = psi @ s @ psi.T
    n = lam.size
    iu = np.triu_indices(n, k=1)
    j, k = iu
    c = np.zeros((n, n))
    c[iu] = -(lam[k] + lam[j]) / (lam[k] - lam[j]) * s_frame[iu]
    c = c - c.T
    jt = _frame_to_matrix(basis, c)
    jt = 0.5 * (jt - jt.T)
    jt.setflags(write=False)
    return jt


def triangular_jtilde(basis: BalancedBasis, s) -> np.ndarray:
    """Limit of J~ for a geometric ladder: coefficients -sign(k - j) <psi_j, S psi_k>.

    S + J~ is lower triangular in the psi frame, so its spectrum is the single
    point Tr(S)/N, but it is generally not diagonalizable.
    """
    s = as_square(s)
    psi = basis.vectors
    s_frame = psi @ s @ psi.T
    n = basis.dim
    sign = np.sign(np.arange(n)[None, :] - np.arange(n)[:, None])
    c = -sign * s_frame
    jt = _frame_to_matrix(basis, c)
    jt = 0.5 * (jt - jt.T)
    jt.setflags(write=False)
    return jt


@dataclass(frozen=True)
class OptimalPair:
    s: np.ndarray
    basis: BalancedBasis
    ladder: EigenLadder | None
    jtilde: np.ndarray
    q: np.ndarray | None
    j: np.ndarray
    construction: str = "popt"

    @property
    def dim(self) -> int:
        return self.s.shape[0]

    @property
    def rate(self) -> float:
        return float(np.trace(self.s)) / self.dim

    @property
    def b_j(self) -> np.ndarray:
        return (np.eye(self.dim) + self.j) @ self.s

    @property
    def b_jtilde(self) -> np.ndarray:
        return self.s + self.jtilde

    def lyapunov_residual(self) -> float:
        """Frobenius norm of J~Q - QJ~ + QS + SQ - (2 Tr S / N) Q."""
        if self.q is None:
            raise ValidationError("triangular construction has no companion matrix Q")
        return lyapunov_residual(self.jtilde, self.q, self.s)

    def flipped(self) -> "OptimalPair":
        """(-J~, Q^{-1}) is again optimal."""
        qinv = None if self.q is None else np.linalg.inv(self.q)
        ladder = None if self.ladder is None else EigenLadder(1.0 / self.ladder.values)
        return OptimalPair(self.s, self.basis, ladder, -self.jtilde, qinv, -self.j,
                           self.construction)


def lyapunov_residual(jtilde, q, s) -> float:
    jtilde, q, s = map(np.asarray, (jtilde, q, s))
    n = s.shape[0]
    r = jtilde @ q - q @ jtilde + q @ s + s @ q - (2.0 * np.trace(s) / n) * q
    return frobenius_norm(r)


def to_original_coordinates(jtilde, s) -> np.ndarray:
    _, s_inv_half = sqrtm_spd(s)
    j = s_inv_half @ jtilde @ s_inv_half
    return 0.5 * (j - j.T)


def build_optimal_pair(s, ladder: EigenLadder | None = None,
                       construction: str = "popt") -> OptimalPair:
    """Optimal pair for ``s``.

    ``construction`` is ``"popt"`` (companion matrix Q with the given ladder,
    default lambda_k = N + k) or ``"triangular"`` (limit construction; no Q,
    and B_J may carry Jordan blocks).
    """
    s = validate_spd(s)
    n = s.shape[0]
    basis = build_balanced_basis(s)
    if construction == "popt":
        ladder = ladder if ladder is not None else default_ladder(n)
        jt = build_jtilde(basis, ladder, s)
        psi = basis.vectors
        q = (psi.T * ladder.values) @ psi
        q = 0.5 * (q + q.T)
        q.setflags(write=False)
    elif construction == "triangular":
        jt = triangular_jtilde(basis, s)
        ladder, q = None, None
    else:
        raise ValidationError(f"unknown construction {construction!r}")
    j = to_original_coordinates(jt, s)
    j.setflags(write=False)
    return OptimalPair(s, basis, ladder, jt, q, j, construction)


def check_divergence_free(a, s, tol: float = 1e-9) -> dict:
    """Whether the linear field x -> A x preserves exp(-x^T S x / 2).

    True exactly when A = J S with J antisymmetric, i.e. A S^{-1} is
    antisymmetric; the trace and A^T S antisymmetry are reported too.
    """
    a = as_square(a)
    s = validate_spd(s)
    if a.shape != s.shape:
        raise ValidationError("dimension mismatch")
    j = np.linalg.solve(s.T, a.T).T  # A S^{-1}
    scale = max(1.0, operator_norm(a)) * max(1.0, np.linalg.cond(s))
    sym_part = float(np.max(np.abs(j + j.T), initial=0.0))
    ats = a.T @ s
    trace = float(np.trace(a))
    ok = sym_part <= tol * scale
    return {
        "divergence_free": bool(ok),
        "trace": trace,
        "antisymmetry_defect": sym_part,
        "ats_symmetric_part": float(np.max(np.abs(ats + ats.T), initial=0.0)),
    }


def prefactor_constants(pair: OptimalPair) -> dict:
    """Prefactor constants C_N^(1), C_N^(2) and the norm bounds on J~."""
    if pair.q is None or pair.ladder is None:
        raise ValidationError("constants need a companion matrix Q")
    n = pair.dim
    lam = pair.ladder.values
    s_eig = np.linalg.eigvalsh(pair.s)
    kappa_q = pair.ladder.kappa
    cn1 = float(np.sqrt(kappa_q))
    if n > 1:
        ratio = lam.max() / pair.ladder.min_gap
        cn2 = float(2**5 * n * np.sqrt(kappa_q) * ratio**2)
        lower = float(np.sqrt(2.0) * lam.min() * s_eig[0] / pair.ladder.max_gap)
        # only the off-diagonal part of S in the psi frame enters J~
        off = max(frobenius_norm(pair.s) ** 2 - np.trace(pair.s) ** 2 / n, 0.0)
        lower_valid = float(2.0 * lam.min() / pair.ladder.max_gap * np.sqrt(off / n))
        upper_frob = float(np.sqrt(2.0) * ratio * frobenius_norm(pair.s))
    else:
        cn2, lower, lower_valid, upper_frob = float(2**5 * np.sqrt(kappa_q)), 0.0, 0.0, 0.0
    jt_norm = operator_norm(pair.jtilde)
    jt_frob = frobenius_norm(pair.jtilde)
    scalar = bool(np.isclose(s_eig[0], s_eig[-1], rtol=1e-12, atol=0.0))
    is_default = n > 0 and np.array_equal(lam, default_ladder(n).values)
    return {
        "cn1": cn1,
        "cn2": cn2,
        "kappaQ": kappa_q,
        "kappaQinvS": kappa_qinv_s(pair),
        "jTildeNorm": jt_norm,
        "jTildeFrobenius": jt_frob,
        "lowerBoundJ": lower,
        "lowerBoundHolds": bool(scalar or jt_norm >= lower * (1 - 1e-12)),
        "lowerBoundJOffDiagonal": lower_valid,
        "lowerBoundOffDiagonalHolds": bool(jt_norm >= lower_valid * (1 - 1e-12)),
        "upperBoundFrobenius": upper_frob,
        "upperBoundHolds": bool(jt_frob <= upper_frob * (1 + 1e-12) + 1e-300),
        "defaultLadderBound": 4.0 * n * frobenius_norm(pair.s),
        "defaultLadderBoundHolds": bool(not is_default
                                        or jt_frob <= 4.0 * n * frobenius_norm(pair.s)),
        "scalarS": scalar,
    }


def kappa_qinv_s(pair: OptimalPair) -> float:
    """Eigenvalue ratio of Q^{-1}S (diagonalizable with positive spectrum).

    This is the tight constant: ||S^{-1/2} Q^{1/2}|| ||Q^{-1/2} S^{1/2}||
    equals its square root.
    """
    if pair.q is None:
        raise ValidationError("no companion matrix Q")
    w = spla.eigh(pair.s, pair.q, eigvals_only=True)
    return float(w[-1] / w[0])


def spectrum_report(pair: OptimalPair) -> dict:
    spec = eig_general(pair.b_j)
    spec_t = eig_general(pair.b_jtilde)
    s_eig = np.linalg.eigvalsh(pair.s)
    return {
        "rate": pair.rate,
        "minRe": spec.min_real,
        "maxRe": spec.max_real,
        "minReTilde": spec_t.min_real,
        "minReUnperturbed": float(s_eig[0]),
        "eigenvalues": [[float(z.real), float(z.imag)] for z in spec.eigenvalues],
    }
