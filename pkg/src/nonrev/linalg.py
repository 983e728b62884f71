"""Dense real matrix helpers shared by every other module.

Validated matrices are plain ``numpy.ndarray`` objects with the writeable
flag cleared, so downstream code can rely on them not changing.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as spla

from nonrev.errors import (
    NoConvergence,
    NotAntisymmetric,
    NotPositiveDefinite,
    NotSymmetric,
    Overflow,
    ValidationError,
)

SPEC_TOL = 1e-8


def sym_tol(m: np.ndarray) -> float:
    return 1e-10 * (1.0 + float(np.max(np.abs(m), initial=0.0)))


def _frozen(m: np.ndarray) -> np.ndarray:
    out = np.array(m, dtype=float, copy=True)
    out.setflags(write=False)
    return out


def as_square(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("matrix has non-finite entries")
    return a


def validate_spd(candidate) -> np.ndarray:
    """Return a symmetrized, read-only copy of ``candidate`` if it is SPD.

    Raises
    ------
    NotSymmetric
        If the asymmetry exceeds ``1e-10 * (1 + max|a_ij|)``.
    NotPositiveDefinite
        If the smallest eigenvalue is not strictly positive.
    """
    a = as_square(candidate)
    if np.max(np.abs(a - a.T), initial=0.0) > sym_tol(a):
        raise NotSymmetric("matrix is not symmetric within tolerance")
    a = 0.5 * (a + a.T)
    lo = np.linalg.eigvalsh(a)[0]
    if not lo > 0.0:
        raise NotPositiveDefinite(f"smallest eigenvalue {lo:.3e} is not positive")
    return _frozen(a)


def validate_antisym(candidate) -> np.ndarray:
    a = as_square(candidate)
    if np.max(np.abs(a + a.T), initial=0.0) > sym_tol(a):
        raise NotAntisymmetric("matrix is not antisymmetric within tolerance")
    return _frozen(0.5 * (a - a.T))


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None

    @property
    def min_real(self) -> float:
        return float(np.min(self.eigenvalues.real))

    @property
    def max_real(self) -> float:
        return float(np.max(self.eigenvalues.real))


def eig_general(m, vectors: bool = False) -> Spectrum:
    """All eigenvalues of a real (possibly nonsymmetric) matrix.

    LAPACK ``geev`` (Hessenberg reduction + shifted QR) does the work;
    complex eigenvalues of a real input come out in exact conjugate pairs.
    """
    a = as_square(m)
    try:
        if vectors:
            w, v = np.linalg.eig(a)
        else:
            w, v = np.linalg.eigvals(a), None
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    w = np.asarray(w, dtype=complex)
    order = np.lexsort((w.imag, w.real))
    w = w[order]
    if v is not None:
        v = np.asarray(v, dtype=complex)[:, order]
    return Spectrum(w, v)


def expm(m, t: float = 1.0) -> np.ndarray:
    """Matrix exponential ``exp(t m)`` by scaling and squaring with Pade."""
    a = as_square(m)
    with np.errstate(over="raise", invalid="raise"):
        try:
            out = spla.expm(t * a)
        except FloatingPointError as exc:
            raise Overflow("matrix exponential overflowed") from exc
    if not np.all(np.isfinite(out)):
        raise Overflow("matrix exponential overflowed")
    return out


def operator_norm(m) -> float:
    return float(np.linalg.norm(np.asarray(m, dtype=float), 2))


def frobenius_norm(m) -> float:
    m = np.asarray(m, dtype=float)
    scale = float(np.max(np.abs(m), initial=0.0))
    if scale == 0.0 or not np.isfinite(scale):
        return float(np.linalg.norm(m, "fro"))
    # rescale so squares neither underflow nor overflow
    return scale * float(np.linalg.norm(m / scale, "fro"))


def condition_number(s) -> float:
    """Eigenvalue ratio of an SPD matrix."""
    w = np.linalg.eigvalsh(validate_spd(s))
    return float(w[-1] / w[0])


def sqrtm_spd(s) -> tuple[np.ndarray, np.ndarray]:
    """``(S^{1/2}, S^{-1/2})`` from the symmetric eigendecomposition."""
    w, v = np.linalg.eigh(s)
    r = np.sqrt(w)
    half = (v * r) @ v.T
    inv_half = (v / r) @ v.T
    return 0.5 * (half + half.T), 0.5 * (inv_half + inv_half.T)


def match_spectra(a, b) -> float:
    """Largest distance under greedy nearest-neighbour pairing of two multisets."""
    a = np.asarray(a, dtype=complex).ravel()
    b = list(np.asarray(b, dtype=complex).ravel())
    if a.size != len(b):
        raise ValidationError("spectra have different sizes")
    worst = 0.0
    for z in a[np.lexsort((a.imag, a.real))]:
        d = np.abs(np.asarray(b) - z)
        i = int(np.argmin(d))
        worst = max(worst, float(d[i]))
        b.pop(i)
    return worst


def random_spd(rng: np.random.Generator, n: int, kappa: float) -> np.ndarray:
    """Random SPD matrix with condition number exactly ``kappa``."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    if n == 1:
        w = np.array([rng.uniform(0.5, 2.0)])
    else:
        inner = rng.uniform(0.0, 1.0, size=n - 2)
        w = kappa ** np.concatenate(([0.0, 1.0], inner))
        w *= rng.uniform(0.1, 10.0)
    s = (q * w) @ q.T
    return 0.5 * (s + s.T)


# ---------------------------------------------------------------- file I/O

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def read_matrix(path) -> np.ndarray:
    """Read ``N`` followed by N rows, or a headerless CSV."""
    text = Path(path).read_text().strip()
    if not text:
        raise ValidationError(f"{path}: empty matrix file")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    rows = [ln.replace(",", " ").split() for ln in lines]
    if len(rows[0]) == 1 and len(rows) > 1 and "," not in lines[0]:
        try:
            n = int(rows[0][0])
        except ValueError:
            n = None
        if n is not None and len(rows) - 1 == n:
            rows = rows[1:]
    try:
        a = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"{path}: matrix is not square")
    return a


def write_matrix(path, m) -> None:
    a = np.atleast_2d(np.asarray(m, dtype=float))
    lines = [str(a.shape[0])]
    lines += [" ".join(_fmt(v) for v in row) for row in a]
    Path(path).write_text("\n".join(lines) + "\n")


def read_vector(path) -> np.ndarray:
    """Whitespace/comma separated values, with an optional leading count."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValidationError(f"{path}: empty vector file")
    try:
        vals = [float(v) for ln in lines for v in ln.replace(",", " ").split()]
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    head = lines[0].split()
    if len(lines) > 1 and len(head) == 1 and head[0].isdigit() and int(head[0]) == len(vals) - 1:
        vals = vals[1:]
    return np.array(vals)
