"""Reproducible experiment presets and their file outputs.

Each preset is a pure function of (name, seed, overrides).  Floats are
written with 17 significant digits so that reruns are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from nonrev.errors import ValidationError
from nonrev.optimal import build_optimal_pair, kappa_qinv_s, spectrum_report
from nonrev.sde import SdeConfig, double_well, equilibrium_quadrature_2d, settling_time, simulate
from nonrev.semigroup import decay_curve, two_dim_drift

PRESETS = ("fig2-2d", "fig3-3d", "fig4-random100", "fig5-laplacian100", "fig6-doublewell")


def make_laplacian(n: int) -> np.ndarray:
    """Tridiagonal (2, -1) matrix with Dirichlet truncation (no corner entries)."""
    if n < 2:
        raise ValidationError("n must be at least 2")
    return 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)


def random_diagonal(n: int, seed: int, floor: float = 1e-6) -> np.ndarray:
    """Uniform(0, 1) diagonal entries; draws below ``floor`` are redrawn."""
    rng = np.random.default_rng(seed)
    d = rng.uniform(0.0, 1.0, size=n)
    while np.any(d < floor):
        bad = d < floor
        d[bad] = rng.uniform(0.0, 1.0, size=int(bad.sum()))
    return np.diag(d)


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in PRESETS:
            raise ValidationError(f"unknown preset {self.name!r}; choose from {', '.join(PRESETS)}")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(path: Path, header: list[str], columns: list) -> None:
    cols = [np.asarray(c, dtype=float) for c in columns]
    lines = [",".join(header)]
    lines += [",".join(_fmt(c[i]) for c in cols) for i in range(cols[0].size)]
    path.write_text("\n".join(lines) + "\n")


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def preset_matrix(preset: ExperimentPreset) -> np.ndarray:
    p = preset.params
    if preset.name == "fig2-2d":
        return np.diag([1.0, p.get("lambda", 0.1)])
    if preset.name == "fig3-3d":
        return np.diag([1.0, 0.1, 0.01])
    if preset.name == "fig4-random100":
        return random_diagonal(int(p.get("n", 100)), preset.seed)
    if preset.name == "fig5-laplacian100":
        return make_laplacian(int(p.get("n", 100)))
    raise ValidationError(f"{preset.name} has no matrix")


def _linear_preset(preset: ExperimentPreset, out: Path) -> tuple[list[Path], dict]:
    s = preset_matrix(preset)
    pair = build_optimal_pair(s)
    t_max = float(preset.params.get("tMax", 10.0 / pair.rate))
    steps = int(preset.params.get("steps", 200))
    rev = decay_curve(s, t_max, steps, "reversible")
    opt = decay_curve(pair.b_j, t_max, steps, "optimal")
    bound = math.sqrt(kappa_qinv_s(pair)) * np.exp(-pair.rate * rev.times)
    header = ["t", "norm_reversible", "norm_optimal", "bound_optimal"]
    cols = [rev.times, rev.norms, opt.norms, bound]
    if preset.name == "fig2-2d":
        lam = float(s[1, 1])
        a_crit = math.sqrt((1.0 - lam) ** 2 / (4.0 * lam))
        crit = decay_curve(two_dim_drift(lam, a_crit), t_max, steps, "critical")
        header.append("norm_critical")
        cols.append(crit.norms)
    files = [out / "decay.csv", out / "spectrum.json"]
    write_csv(files[0], header, cols)
    report = spectrum_report(pair)
    report["lyapunovResidual"] = pair.lyapunov_residual()
    report["traceS"] = float(np.trace(s))
    write_json(files[1], report)
    params = {"tMax": t_max, "steps": steps, "ladder": "default", "construction": "popt",
              "dim": pair.dim}
    return files, params


def _doublewell_preset(preset: ExperimentPreset, out: Path) -> tuple[list[Path], dict]:
    p = preset.params
    beta = float(p.get("beta", 10.0))
    dt = float(p.get("dt", 1e-3))
    t_max = float(p.get("tMax", 10.0))
    steps = int(round(t_max / dt))
    n_paths = int(p.get("nPaths", 100_000))
    deltas = [float(d) for d in p.get("deltas", [0.0, 10.0])]
    pot = double_well()
    target = equilibrium_quadrature_2d(pot, beta)
    header, cols, summary = ["t"], [], {"equilibrium": target, "runs": []}
    for d in deltas:
        cfg = SdeConfig(dim=2, kind="gradient", beta=beta, dt=dt, steps=steps, n_paths=n_paths,
                        seed=preset.seed, potential=pot, delta=d,
                        record_every=int(p.get("recordEvery", 100)))
        tr = simulate(cfg, workers=int(p.get("workers", 1)))
        if not cols:
            cols.append(tr.times)
        header += [f"mean_delta{d:g}", f"stderr_delta{d:g}"]
        cols += [tr.values, tr.stderr]
        summary["runs"].append({
            "delta": d,
            "final": float(tr.values[-1]),
            "finalStderr": float(tr.stderr[-1]),
            "settlingTime": settling_time(tr, target),
        })
    files = [out / "trace.csv", out / "summary.json"]
    write_csv(files[0], header, cols)
    write_json(files[1], summary)
    params = {"beta": beta, "dt": dt, "tMax": t_max, "nPaths": n_paths, "deltas": deltas,
              "x0": [0.0, 0.0]}
    return files, params


def run_preset(preset: ExperimentPreset | str, out_dir, seed: int | None = None,
               overrides: dict | None = None) -> dict:
    """Run a preset, write its files under ``out_dir`` and return the manifest."""
    if isinstance(preset, str):
        preset = ExperimentPreset(preset, 0 if seed is None else seed, dict(overrides or {}))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if preset.name == "fig6-doublewell":
        files, params = _doublewell_preset(preset, out)
    else:
        files, params = _linear_preset(preset, out)
    manifest = {
        "preset": preset.name,
        "seed": preset.seed,
        "parameters": params,
        "tolerances": {"symTol": "1e-10 * (1 + max|entry|)", "specTol": 1e-8},
        "files": {f.name: _sha256(f) for f in files},
    }
    write_json(out / "manifest.json", manifest)
    return manifest


def verify_manifest(out_dir) -> bool:
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text())
    return all(_sha256(out / name) == digest for name, digest in manifest["files"].items())

