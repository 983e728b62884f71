"""Wick quantization on tensor Hermite functions truncated at total degree K.

The quadratic operators a^{*,T} M a preserve total degree, so restricting
them to degrees <= K is exact: each degree block D_k is a finite matrix
whose spectrum is exactly the corresponding part of the operator spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from nonrev.errors import ValidationError
from nonrev.linalg import as_square, eig_general, match_spectra, operator_norm, validate_spd


def _compositions(n: int, k: int):
    """Multi-indices in N^n with |m| = k, in lexicographic order."""
    if n == 1:
        yield (k,)
        return
    for first in range(k + 1):
        for rest in _compositions(n - 1, k - first):
            yield (first, *rest)


@dataclass(frozen=True)
class HermiteTruncation:
    dim: int
    max_degree: int
    index: tuple
    offsets: tuple

    @classmethod
    def build(cls, dim: int, max_degree: int = 6) -> "HermiteTruncation":
        if dim < 1 or max_degree < 1:
            raise ValidationError("need dim >= 1 and max_degree >= 1")
        index, offsets = [], []
        for k in range(max_degree + 1):
            offsets.append(len(index))
            index.extend(_compositions(dim, k))
        offsets.append(len(index))
        return cls(dim, max_degree, tuple(index), tuple(offsets))

    @property
    def size(self) -> int:
        return len(self.index)

    def block(self, k: int) -> slice:
        return slice(self.offsets[k], self.offsets[k + 1])

    def block_dim(self, k: int) -> int:
        return comb(self.dim + k - 1, k)


def ladder_matrices(trunc: HermiteTruncation) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Matrices of a_j and a_j^* (a_j phi_n = sqrt(n_j) phi_{n - e_j})."""
    pos = {m: i for i, m in enumerate(trunc.index)}
    size = trunc.size
    lower = []
    for j in range(trunc.dim):
        a = np.zeros((size, size))
        for col, m in enumerate(trunc.index):
            if m[j] == 0:
                continue
            target = list(m)
            target[j] -= 1
            a[pos[tuple(target)], col] = np.sqrt(m[j])
        lower.append(a)
    return lower, [a.T.copy() for a in lower]


def wick_quadratic(trunc: HermiteTruncation, m, ladders=None) -> np.ndarray:
    """Matrix of a^{*,T} M a = sum_ij M_ij a_i^* a_j on the truncation."""
    m = as_square(m)
    if m.shape[0] != trunc.dim:
        raise ValidationError("coefficient matrix does not match the truncation")
    a, a_star = ladders if ladders is not None else ladder_matrices(trunc)
    out = np.zeros((trunc.size, trunc.size))
    for i in range(trunc.dim):
        for j in range(trunc.dim):
            if m[i, j] != 0.0:
                out += m[i, j] * (a_star[i] @ a[j])
    return out


def generator_matrix(trunc: HermiteTruncation, s, jtilde, ladders=None) -> np.ndarray:
    """Matrix of -L~_J = a^{*,T} (S - J~) a."""
    return wick_quadratic(trunc, np.asarray(s) - np.asarray(jtilde), ladders)


def combination_spectrum(eigs, k: int) -> np.ndarray:
    """Multiset {sum_l m_l lambda_l : |m| = k} over the listed eigenvalues."""
    eigs = np.asarray(eigs, dtype=complex)
    return np.array([np.dot(m, eigs) for m in _compositions(eigs.size, k)], dtype=complex)


def verify_spectrum(trunc: HermiteTruncation, s, jtilde) -> dict:
    """Compare each degree block's spectrum with integer combinations of sigma(S + J~)."""
    if trunc.max_degree > 12:
        raise ValidationError("max_degree above 12 is not supported")
    s = validate_spd(s)
    jt = as_square(jtilde)
    m = generator_matrix(trunc, s, jt)
    base = eig_general(s + jt).eigenvalues
    per_block = []
    worst = 0.0
    for k in range(trunc.max_degree + 1):
        blk = m[trunc.block(k), trunc.block(k)]
        got = eig_general(blk).eigenvalues
        want = combination_spectrum(base, k)
        d = match_spectra(got, want)
        worst = max(worst, d)
        nonzero = got[np.abs(got) > 1e-12] if k else got[:0]
        per_block.append({
            "degree": k,
            "size": int(blk.shape[0]),
            "mismatch": d,
            "minRe": float(nonzero.real.min()) if nonzero.size else None,
        })
    return {"maxMismatch": worst, "perBlock": per_block,
            "offBlockMax": off_block_max(trunc, m)}


def off_block_max(trunc: HermiteTruncation, m) -> float:
    mask = np.ones(m.shape, dtype=bool)
    for k in range(trunc.max_degree + 1):
        mask[trunc.block(k), trunc.block(k)] = False
    return float(np.max(np.abs(m[mask]), initial=0.0))


def coercivity_min_eigenvalue(trunc: HermiteTruncation, s, jtilde, q) -> dict:
    """Smallest eigenvalue of M^T C_Q + C_Q M - (2 Tr S / N) C_Q on each block k >= 1."""
    s = validate_spd(s)
    q = validate_spd(q)
    ladders = ladder_matrices(trunc)
    m = generator_matrix(trunc, s, jtilde, ladders)
    c = wick_quadratic(trunc, q, ladders)
    rate2 = 2.0 * float(np.trace(s)) / trunc.dim
    h = m.T @ c + c @ m - rate2 * c
    h = 0.5 * (h + h.T)
    per_block = []
    for k in range(1, trunc.max_degree + 1):
        blk = h[trunc.block(k), trunc.block(k)]
        per_block.append(float(np.linalg.eigvalsh(blk)[0]))
    return {"minEigenvalue": min(per_block), "perBlock": per_block}


def sector_constant(s, jtilde) -> float:
    """||J~|| / min sigma(S): bound on tan(arg <u, -L~_J u>)."""
    return operator_norm(jtilde) / float(np.linalg.eigvalsh(s)[0])


def numerical_range_ratio(trunc: HermiteTruncation, s, jtilde, u) -> float:
    """|Im <u, M u>| / Re <u, M u> for a complex vector u."""
    m = generator_matrix(trunc, s, jtilde)
    u = np.asarray(u, dtype=complex)
    val = np.vdot(u, m @ u)
    return float(abs(val.imag) / val.real)


def hermite_report(s, jtilde, q, max_degree: int = 6) -> dict:
    s = validate_spd(s)
    n = s.shape[0]
    if max_degree == 6 and n > 6:
        raise ValidationError("default degree 6 supports N <= 6")
    trunc = HermiteTruncation.build(n, max_degree)
    report = verify_spectrum(trunc, s, jtilde)
    report["sectorConstant"] = sector_constant(s, jtilde)
    if q is not None:
        report["coercivity"] = coercivity_min_eigenvalue(trunc, s, jtilde, q)
    report["rate"] = float(np.trace(s)) / n
    report["dimension"] = n
    report["maxDegree"] = max_degree
    return report

