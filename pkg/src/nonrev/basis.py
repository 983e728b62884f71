"""Orthonormal bases whose Rayleigh quotients against S are all Tr(S)/N.

The construction sweeps over positions n = 1..N-1.  At each sweep the
remaining vectors with the largest and smallest Rayleigh quotient are
rotated inside their common plane until one of them hits the target
exactly; that vector is frozen and the sweep moves on.  The frozen vector
is orthogonal to everything that remains, so the trace of S restricted to
the remaining span keeps the same average and the target never changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from nonrev.errors import (
    NegativeDiscriminant,
    NumericalError,
    TargetNotBracketed,
    ValidationError,
)
from nonrev.linalg import validate_spd


@dataclass(frozen=True)
class BalancedBasis:
    """Rows of ``vectors`` are the basis vectors psi_1..psi_N."""

    vectors: np.ndarray
    target: float
    rotations: int = 0
    rayleigh: np.ndarray = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    def gram_residual(self) -> float:
        v = self.vectors
        return float(np.linalg.norm(v @ v.T - np.eye(self.dim)))


def solve_tstar(alpha0: float, alpha1: float, beta: float, target: float) -> float:
    """Angle t in (0, pi/2) with
    cos^2(t) alpha0 + 2 sin(t) cos(t) beta + sin^2(t) alpha1 == target.

    ``alpha0`` is the quotient of the vector carrying the cosine.
    """
    if not all(map(math.isfinite, (alpha0, alpha1, beta, target))):
        raise ValidationError("solve_tstar inputs must be finite")
    if not alpha0 < target < alpha1:
        raise TargetNotBracketed(
            f"need alpha0 < target < alpha1, got {alpha0!r}, {target!r}, {alpha1!r}"
        )
    a = alpha1 - target
    c = alpha0 - target
    disc = beta * beta - a * c
    if disc < 0.0:
        if disc < -1e-14:
            raise NegativeDiscriminant(f"discriminant {disc:.3e} < 0")
        disc = 0.0
    root = math.sqrt(disc)
    # positive root of a*tau^2 + 2*beta*tau + c, written to avoid cancellation
    if beta >= 0.0:
        tau = -c / (beta + root)
    else:
        tau = (-beta + root) / a
    return math.atan(tau)


def _rayleigh(s: np.ndarray, rows: np.ndarray) -> np.ndarray:
    return np.einsum("ij,jk,ik->i", rows, s, rows)


def build_balanced_basis(s) -> BalancedBasis:
    """Balanced orthonormal basis for the SPD matrix ``s``.

    Deterministic: starts from the canonical basis, and ties in the max/min
    selection go to the smallest index.
    """
    s = validate_spd(s)
    n = s.shape[0]
    trace = float(np.trace(s))
    target = trace / n
    tol = 1e-12 * trace
    psi = np.eye(n)
    rotations = 0

    for pos in range(n - 1):
        q = _rayleigh(s, psi[pos:])
        dev = q - target
        if np.all(np.abs(dev) <= tol):
            break
        active = np.abs(dev) > tol
        masked_hi = np.where(active, dev, -np.inf)
        masked_lo = np.where(active, dev, np.inf)
        hi, lo = int(np.argmax(masked_hi)), int(np.argmin(masked_lo))
        # an active deviation on one side forces the other side to be nonzero
        if not dev[hi] > 0.0:
            hi = int(np.argmax(dev))
        if not dev[lo] < 0.0:
            lo = int(np.argmin(dev))
        if not (dev[hi] > 0.0 and dev[lo] < 0.0):
            break
        hi += pos
        lo += pos
        # max vector to position pos, min vector to pos + 1
        psi[[pos, hi]] = psi[[hi, pos]]
        if lo == pos:
            lo = hi
        psi[[pos + 1, lo]] = psi[[lo, pos + 1]]

        v_max, v_min = psi[pos].copy(), psi[pos + 1].copy()
        alpha0 = float(v_min @ s @ v_min)
        alpha1 = float(v_max @ s @ v_max)
        beta = float(v_min @ s @ v_max)
        t = solve_tstar(alpha0, alpha1, beta, target)
        fixed = math.cos(t) * v_min + math.sin(t) * v_max
        fixed /= np.linalg.norm(fixed)
        rest = v_max - (v_max @ fixed) * fixed
        rest /= np.linalg.norm(rest)
        psi[pos], psi[pos + 1] = fixed, rest
        rotations += 1

        gram = psi @ psi.T
        if np.linalg.norm(gram - np.eye(n)) > 1e-12:
            psi = _reorthonormalize(psi)

    q = _rayleigh(s, psi)
    if np.max(np.abs(q - target)) > 1e-9 * trace:
        raise NumericalError("balanced basis construction failed to converge")
    psi.setflags(write=False)
    return BalancedBasis(psi, target, rotations, q)


def _reorthonormalize(psi: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt on rows, in order."""
    out = psi.copy()
    for i in range(out.shape[0]):
        v = out[i]
        for j in range(i):
            v = v - (out[j] @ v) * out[j]
        out[i] = v / np.linalg.norm(v)
    return out
