"""Euler-Maruyama Monte-Carlo for linear and (perturbed) gradient drifts.

Paths are split into fixed-size blocks.  Block ``b`` draws its noise from a
Philox stream keyed by ``(seed, b)``, so the noise seen by path ``i`` is a
function of ``(seed, i)`` alone and the result does not depend on how many
workers process the blocks.  Partial moments are merged in block order.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from nonrev.errors import BoxTooSmall, GradientMismatch, NonFinite, ValidationError
from nonrev.linalg import as_square

Array = np.ndarray
BLOCK_SIZE = 8192


@dataclass(frozen=True)
class Potential:
    """Vectorized potential: ``value`` maps (M, N) -> (M,), ``grad`` (M, N) -> (M, N)."""

    name: str
    dim: int
    value: Callable[[Array], Array]
    grad: Callable[[Array], Array]


def double_well() -> Potential:
    """V(x, y) = (x^2 - 1)^2 / 4 + y^2 / 2."""

    def value(p):
        x, y = p[:, 0], p[:, 1]
        return 0.25 * (x * x - 1.0) ** 2 + 0.5 * y * y

    def grad(p):
        x, y = p[:, 0], p[:, 1]
        return np.stack((x * x * x - x, y), axis=1)

    return Potential("double_well", 2, value, grad)


def quadratic(s) -> Potential:
    """V(x) = x^T S x / 2."""
    s = as_square(s)

    def value(p):
        return 0.5 * np.einsum("ij,jk,ik->i", p, s, p)

    def grad(p):
        return p @ s.T

    return Potential("quadratic", s.shape[0], value, grad)


def check_gradient(potential: Potential, points: int = 10, seed: int = 0,
                   h: float = 1e-5, rtol: float = 1e-6) -> float:
    """Central finite differences of ``value`` against ``grad``; returns the worst error."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2.0, 2.0, size=(points, potential.dim))
    g = potential.grad(x)
    fd = np.empty_like(g)
    for k in range(potential.dim):
        e = np.zeros(potential.dim)
        e[k] = h
        fd[:, k] = (potential.value(x + e) - potential.value(x - e)) / (2.0 * h)
    err = np.abs(fd - g) / np.maximum(1.0, np.abs(g))
    worst = float(err.max())
    if worst > rtol:
        raise GradientMismatch(f"{potential.name}: gradient mismatch {worst:.2e}")
    return worst


def gradient_drift(potential: Potential, delta: float = 0.0, j=None) -> Callable[[Array], Array]:
    """x -> (-I + delta J) grad V(x); ``j`` defaults to [[0, 1], [-1, 0]] in 2D."""
    check_gradient(potential)
    n = potential.dim
    if j is None:
        if n != 2:
            raise ValidationError("a default J only exists in two dimensions")
        j = np.array([[0.0, 1.0], [-1.0, 0.0]])
    j = as_square(j)
    if np.max(np.abs(j + j.T)) > 1e-12:
        raise ValidationError("J must be antisymmetric")
    mt = (-np.eye(n) + delta * j).T

    def drift(x):
        return potential.grad(x) @ mt

    return drift


def linear_drift(b) -> Callable[[Array], Array]:
    """x -> -B x."""
    bt = -as_square(b).T

    def drift(x):
        return x @ bt

    return drift


def second_moment(x: Array) -> Array:
    return np.einsum("ij,ij->i", x, x)


OBSERVABLES = {"second_moment": second_moment}


@dataclass(frozen=True)
class SdeConfig:
    """Run parameters.  ``kind`` is ``"linear"`` (uses ``b``) or ``"gradient"``
    (uses ``potential``, ``delta`` and ``j``).  ``x0`` is a single point or an
    (M, N) list of points; path i starts from row i mod M.
    """

    dim: int
    kind: str
    beta: float = 1.0
    dt: float = 1e-3
    steps: int = 1000
    n_paths: int = 10_000
    seed: int = 0
    x0: Array | None = None
    b: Array | None = None
    potential: Potential | None = None
    delta: float = 0.0
    j: Array | None = None
    record_every: int = 100
    block_size: int = BLOCK_SIZE

    def __post_init__(self):
        if self.kind not in ("linear", "gradient"):
            raise ValidationError(f"unknown drift kind {self.kind!r}")
        if self.kind == "linear" and self.b is None:
            raise ValidationError("linear drift needs b")
        if self.kind == "gradient" and self.potential is None:
            raise ValidationError("gradient drift needs a potential")
        if not (self.beta > 0 and self.dt > 0):
            raise ValidationError("beta and dt must be positive")
        if min(self.steps, self.n_paths, self.record_every, self.block_size) < 1:
            raise ValidationError("steps, n_paths, record_every, block_size must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        x0 = np.zeros(self.dim) if self.x0 is None else np.asarray(self.x0, dtype=float)
        if x0.shape[-1] != self.dim or x0.ndim > 2:
            raise ValidationError("x0 does not match the dimension")
        object.__setattr__(self, "x0", np.atleast_2d(x0))

    def drift(self) -> Callable[[Array], Array]:
        if self.kind == "linear":
            return linear_drift(self.b)
        return gradient_drift(self.potential, self.delta, self.j)

    @property
    def record_steps(self) -> np.ndarray:
        r = np.arange(0, self.steps + 1, self.record_every)
        if r[-1] != self.steps:
            r = np.append(r, self.steps)
        return r

    def stability_number(self, drift=None) -> float:
        """dt times a Lipschitz estimate of the drift (Euler is unstable above 2)."""
        if self.kind == "linear":
            rho = float(np.max(np.abs(np.linalg.eigvals(as_square(self.b)))))
            return self.dt * rho
        drift = drift or self.drift()
        rng = np.random.default_rng(0)
        scale = 1.0 + float(np.max(np.abs(self.x0))) + 3.0 / math.sqrt(self.beta)
        pts = rng.uniform(-scale, scale, size=(10, self.dim))
        h = 1e-6
        worst = 0.0
        for p in pts:
            jac = np.empty((self.dim, self.dim))
            for k in range(self.dim):
                e = np.zeros(self.dim)
                e[k] = h
                jac[:, k] = (drift((p + e)[None])[0] - drift((p - e)[None])[0]) / (2 * h)
            worst = max(worst, float(np.linalg.norm(jac, 2)))
        return self.dt * worst


@dataclass(frozen=True)
class ObservableTrace:
    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    n_paths: int = 0
    meta: dict = field(default_factory=dict)


def _run_block(cfg: SdeConfig, drift, observable, block: int):
    start = block * cfg.block_size
    m = min(cfg.block_size, cfg.n_paths - start)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(cfg.seed), block])))
    idx = np.arange(start, start + m) % cfg.x0.shape[0]
    x = cfg.x0[idx].copy()
    sigma = math.sqrt(2.0 * cfg.dt / cfg.beta)
    rec = cfg.record_steps
    means = np.empty(rec.size)
    m2 = np.empty(rec.size)

    def record(slot):
        v = observable(x)
        mu = float(np.mean(v))
        means[slot] = mu
        m2[slot] = float(np.sum((v - mu) ** 2))

    record(0)
    slot = 1
    for step in range(1, cfg.steps + 1):
        x += drift(x) * cfg.dt + sigma * rng.standard_normal((m, cfg.dim))
        if not np.isfinite(x).all():
            bad = int(np.flatnonzero(~np.isfinite(x).all(axis=1))[0])
            raise NonFinite(start + bad, step)
        if slot < rec.size and step == rec[slot]:
            record(slot)
            slot += 1
    return m, means, m2


def simulate(cfg: SdeConfig, observable=second_moment, workers: int = 1) -> ObservableTrace:
    """Monte-Carlo mean and standard error of ``observable`` on the record grid."""
    if isinstance(observable, str):
        observable = OBSERVABLES[observable]
    drift = cfg.drift()
    stab = cfg.stability_number(drift)
    if stab >= 2.0:
        warnings.warn(f"dt * Lipschitz estimate = {stab:.3g} >= 2: explicit Euler may be unstable",
                      RuntimeWarning, stacklevel=2)
    n_blocks = -(-cfg.n_paths // cfg.block_size)

    def job(b):
        return _run_block(cfg, drift, observable, b)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, range(n_blocks)))
    else:
        parts = [job(b) for b in range(n_blocks)]

    # Chan et al. pairwise merge, always in block order
    count, mean, m2 = parts[0]
    mean, m2 = mean.copy(), m2.copy()
    for nb, mb, m2b in parts[1:]:
        tot = count + nb
        delta = mb - mean
        mean = mean + delta * (nb / tot)
        m2 = m2 + m2b + delta * delta * (count * nb / tot)
        count = tot
    var = m2 / max(count - 1, 1)
    stderr = np.sqrt(var / count)
    times = cfg.record_steps * cfg.dt
    return ObservableTrace(times, mean, stderr, count, {"stability": stab})


def settling_time(trace: ObservableTrace, target: float, rel: float = 0.05) -> float:
    """First recorded time after which the trace stays within ``rel * |target|``."""
    inside = np.abs(trace.values - target) <= rel * abs(target)
    outside = np.flatnonzero(~inside)
    if outside.size == 0:
        return float(trace.times[0])
    last = outside[-1]
    if last == trace.times.size - 1:
        return math.inf
    return float(trace.times[last + 1])


def equilibrium_quadrature_2d(potential: Potential, beta: float, observable=second_moment,
                              box=(-3.0, 3.0, -3.0, 3.0), nodes: int = 400) -> float:
    """Trapezoidal tensor quadrature of E[obs] under exp(-beta V) / Z on a box."""
    if potential.dim != 2:
        raise ValidationError("quadrature is two-dimensional")
    if isinstance(observable, str):
        observable = OBSERVABLES[observable]
    x = np.linspace(box[0], box[1], nodes)
    y = np.linspace(box[2], box[3], nodes)
    xx, yy = np.meshgrid(x, y, indexing="ij")
    pts = np.stack((xx.ravel(), yy.ravel()), axis=1)
    v = potential.value(pts)
    w = np.exp(-beta * (v - v.min())).reshape(nodes, nodes)
    edge = max(w[0].max(), w[-1].max(), w[:, 0].max(), w[:, -1].max())
    if edge >= 1e-12 * w.max():
        raise BoxTooSmall(f"boundary density ratio {edge / w.max():.2e} >= 1e-12")
    obs = observable(pts).reshape(nodes, nodes)
    z = np.trapezoid(np.trapezoid(w, y, axis=1), x) if hasattr(np, "trapezoid") else \
        np.trapz(np.trapz(w, y, axis=1), x)
    num = np.trapezoid(np.trapezoid(w * obs, y, axis=1), x) if hasattr(np, "trapezoid") else \
        np.trapz(np.trapz(w * obs, y, axis=1), x)
    return float(num / z)
