"""Command-line interface.

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from nonrev.basis import build_balanced_basis
from nonrev.errors import NumericalError, TimeBelowThreshold, ValidationError
from nonrev.gaussian import (
    GaussianState,
    evolve,
    gaussian_bound,
    l2_distance_to_equilibrium,
    threshold_t0,
)
from nonrev.hermite import hermite_report
from nonrev.linalg import operator_norm, read_matrix, read_vector, validate_spd, write_matrix
from nonrev.optimal import (
    EigenLadder,
    build_optimal_pair,
    kappa_qinv_s,
    prefactor_constants,
    spectrum_report,
)
from nonrev.presets import PRESETS, run_preset, write_csv, write_json
from nonrev.sde import OBSERVABLES, SdeConfig, double_well, quadratic, simulate
from nonrev.semigroup import decay_curve, two_dim_report

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


def _echo_json(obj) -> None:
    click.echo(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable))


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _emit_table(path: Path, header: list[str], cols: list, fmt: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path = path.with_suffix(".json")
        write_json(path, {h: [_num(v) for v in np.asarray(c, dtype=float)]
                          for h, c in zip(header, cols)})
    else:
        write_csv(path, header, cols)
    return path


def _num(v: float):
    # JSON has no inf/nan literals
    return v if math.isfinite(v) else repr(float(v))


def _target(ctx, given: str | None, default: str) -> Path:
    out = Path(ctx.obj["out"])
    return Path(given) if given else out / default


def _parse_ladder(spec: str) -> EigenLadder | None:
    if spec == "default":
        return None
    if spec.startswith("csv:"):
        return EigenLadder(read_vector(spec[4:]))
    raise ValidationError("ladder must be 'default' or 'csv:<file>'")


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True,
              help="Seed for randomized steps.")
@click.option("--tol", type=float, default=1e-8, show_default=True,
              help="Tolerance used for pass/fail flags in reports.")
@click.option("--out", "out", type=click.Path(file_okay=False), default=".", show_default=True,
              help="Output directory.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
              show_default=True, help="Format for tabular output.")
@click.pass_context
def cli(ctx, seed, tol, out, fmt):
    """Optimal non-reversible perturbations of Ornstein-Uhlenbeck processes."""
    ctx.obj = {"seed": seed, "tol": tol, "out": out, "fmt": fmt}


@cli.command()
@click.option("--matrix", required=True, help="SPD matrix file.")
@click.pass_context
def basis(ctx, matrix):
    """Balanced orthonormal basis: every psi_k has <psi_k, S psi_k> = Tr S / N."""
    s = validate_spd(read_matrix(matrix))
    b = build_balanced_basis(s)
    out = Path(ctx.obj["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "basis.txt", b.vectors)
    idx = np.arange(1, b.dim + 1)
    _emit_table(out / "balance.csv", ["index", "rayleigh", "deviation"],
                [idx, b.rayleigh, b.rayleigh - b.target], ctx.obj["fmt"])
    _echo_json({"target": b.target, "rotations": b.rotations, "gramResidual": b.gram_residual(),
                "maxDeviation": float(np.max(np.abs(b.rayleigh - b.target)))})


@cli.command()
@click.option("--matrix", required=True, help="SPD matrix file.")
@click.option("--ladder", default="default", show_default=True,
              help="'default' (lambda_k = N + k) or 'csv:<file>'.")
@click.option("--construction", type=click.Choice(["popt", "triangular"]), default="popt",
              show_default=True)
@click.option("--flip-sign", is_flag=True, help="Return the companion pair (-J~, Q^-1).")
@click.pass_context
def optimize(ctx, matrix, ladder, construction, flip_sign):
    """Optimal J, J~, Q and B_J for an SPD matrix."""
    s = validate_spd(read_matrix(matrix))
    pair = build_optimal_pair(s, _parse_ladder(ladder), construction)
    if flip_sign:
        pair = pair.flipped()
    out = Path(ctx.obj["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "J.txt", pair.j)
    write_matrix(out / "Jtilde.txt", pair.jtilde)
    write_matrix(out / "BJ.txt", pair.b_j)
    report = {"construction": construction, "spectrum": spectrum_report(pair)}
    if pair.q is not None:
        write_matrix(out / "Q.txt", pair.q)
        report["lyapunovResidual"] = pair.lyapunov_residual()
        report["constants"] = prefactor_constants(pair)
    spec = report["spectrum"]
    report["rateDeviation"] = max(abs(spec["minRe"] - pair.rate), abs(spec["maxRe"] - pair.rate))
    report["pass"] = bool(report["rateDeviation"] <= ctx.obj["tol"] * pair.rate)
    write_json(out / "report.json", json.loads(json.dumps(report, default=_jsonable)))
    _echo_json(report)


@cli.command()
@click.option("--matrix", required=True, help="SPD matrix file.")
@click.option("--optimal", is_flag=True, help="Add the optimal-perturbation curve and bound.")
@click.option("--tmax", type=float, default=None, help="Horizon (default 10 / expected rate).")
@click.option("--steps", type=int, default=200, show_default=True)
@click.option("--out", "target", default=None, help="Output file (default <out>/decay.csv).")
@click.pass_context
def decay(ctx, matrix, optimal, tmax, steps, target):
    """Operator norms of exp(-tS) and, with --optimal, exp(-tB_J)."""
    s = validate_spd(read_matrix(matrix))
    pair = build_optimal_pair(s) if optimal else None
    rate = pair.rate if optimal else float(np.linalg.eigvalsh(s)[0])
    tmax = tmax if tmax is not None else 10.0 / rate
    rev = decay_curve(s, tmax, steps)
    header, cols = ["t", "norm_reversible"], [rev.times, rev.norms]
    if optimal:
        opt = decay_curve(pair.b_j, tmax, steps)
        bound = math.sqrt(kappa_qinv_s(pair)) * np.exp(-pair.rate * rev.times)
        header += ["norm_optimal", "bound_optimal"]
        cols += [opt.norms, bound]
    path = _emit_table(_target(ctx, target, "decay.csv"), header, cols, ctx.obj["fmt"])
    click.echo(str(path))


@cli.command()
@click.option("--lambda", "lam", type=float, required=True, help="S = diag(1, lambda).")
@click.option("--a", "a", type=float, required=True, help="J = [[0, a], [-a, 0]].")
def twodim(lam, a):
    """Closed-form 2x2 spectrum and conditioning."""
    _echo_json(two_dim_report(lam, a).as_dict())


@cli.command()
@click.option("--matrix", required=True, help="SPD matrix file.")
@click.option("--x0", "x0_file", required=True, help="Initial mean vector file.")
@click.option("--sigma0", "sigma0_file", required=True, help="Initial covariance file.")
@click.option("--tmax", type=float, required=True)
@click.option("--steps", type=int, default=101, show_default=True)
@click.option("--reversible", is_flag=True, help="Use J = 0 instead of the optimal J.")
@click.option("--out", "target", default=None, help="Output file (default <out>/gaussflow.csv).")
@click.pass_context
def gaussflow(ctx, matrix, x0_file, sigma0_file, tmax, steps, reversible, target):
    """Exact Gaussian law along the flow and its L^2 distance to equilibrium."""
    s = validate_spd(read_matrix(matrix))
    x0 = read_vector(x0_file)
    sigma0 = read_matrix(sigma0_file)
    if x0.size != s.shape[0] or sigma0.shape != s.shape:
        raise ValidationError("x0 / sigma0 dimensions do not match the matrix")
    if not tmax > 0 or steps < 2:
        raise ValidationError("need tmax > 0 and steps >= 2")
    pair = build_optimal_pair(s)
    b = s if reversible else pair.b_j
    state0 = GaussianState(x0, sigma0)
    s_inv = np.linalg.inv(s)
    times = np.linspace(0.0, tmax, steps)
    mean_norm, cov_dev, dist, bound = [], [], [], []
    for t in times:
        st = evolve(b, s, state0, float(t))
        mean_norm.append(float(np.linalg.norm(st.mean)))
        cov_dev.append(operator_norm(st.covariance - s_inv))
        try:
            dist.append(l2_distance_to_equilibrium(st, s))
        except NumericalError:
            dist.append(math.nan)
        try:
            bound.append(gaussian_bound(pair, x0, sigma0, float(t)) if not reversible else math.nan)
        except TimeBelowThreshold:
            bound.append(math.nan)
    path = _emit_table(_target(ctx, target, "gaussflow.csv"),
                       ["t", "mean_norm", "cov_dev_norm", "l2_distance", "bound"],
                       [times, mean_norm, cov_dev, dist, bound], ctx.obj["fmt"])
    click.echo(str(path))
    if not reversible:
        click.echo(f"t0 = {threshold_t0(pair, sigma0):.17g}", err=True)


def config_from_json(obj: dict, default_seed: int = 0) -> tuple[SdeConfig, str, int]:
    """SdeConfig from a JSON object; also returns the observable name and worker count."""
    dim = int(obj["dim"])
    kind = obj.get("drift", "gradient" if "potential" in obj else "linear")
    dt = float(obj.get("dt", 1e-3))
    steps = int(obj["steps"]) if "steps" in obj else int(round(float(obj.get("tMax", 1.0)) / dt))
    kwargs = {}
    if kind == "linear":
        kwargs["b"] = np.asarray(obj["B"], dtype=float)
    else:
        name = obj.get("potential")
        if name == "double_well":
            pot = double_well()
        elif name == "quadratic":
            pot = quadratic(np.asarray(obj["S"], dtype=float))
        else:
            raise ValidationError("potential must be 'double_well' or 'quadratic'")
        kwargs.update(potential=pot, delta=float(obj.get("delta", 0.0)))
        if "J" in obj:
            kwargs["j"] = np.asarray(obj["J"], dtype=float)
    beta = float(obj["beta"]) if "beta" in obj else 1.0 / float(obj.get("temperature", 1.0))
    cfg = SdeConfig(dim=dim, kind=kind, beta=beta, dt=dt, steps=steps,
                    n_paths=int(obj.get("nPaths", 10_000)), seed=int(obj.get("seed", default_seed)),
                    x0=obj.get("x0"), record_every=int(obj.get("recordEvery", 100)), **kwargs)
    observable = obj.get("observable", "second_moment")
    if observable not in OBSERVABLES:
        raise ValidationError(f"unknown observable {observable!r}")
    return cfg, observable, int(obj.get("workers", 1))


@cli.command("simulate")
@click.option("--config", "config_file", required=True, help="JSON run configuration.")
@click.option("--out", "target", default=None, help="Output file (default <out>/trace.csv).")
@click.pass_context
def simulate_cmd(ctx, config_file, target):
    """Euler-Maruyama Monte-Carlo trace of an observable."""
    try:
        obj = json.loads(Path(config_file).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{config_file}: {exc}") from exc
    try:
        cfg, observable, workers = config_from_json(obj, ctx.obj["seed"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"bad config: {exc}") from exc
    trace = simulate(cfg, observable, workers=workers)
    path = _emit_table(_target(ctx, target, "trace.csv"), ["t", "mean_obs", "stderr"],
                       [trace.times, trace.values, trace.stderr], ctx.obj["fmt"])
    click.echo(str(path))


@cli.command("hermite-check")
@click.option("--matrix", required=True, help="SPD matrix file.")
@click.option("--degree", type=int, default=6, show_default=True)
@click.pass_context
def hermite_check(ctx, matrix, degree):
    """Spectrum, sector and coercivity checks of the quantized generator."""
    s = validate_spd(read_matrix(matrix))
    pair = build_optimal_pair(s)
    report = hermite_report(s, pair.jtilde, pair.q, degree)
    tol = ctx.obj["tol"]
    report["pass"] = bool(report["maxMismatch"] <= tol
                          and report["coercivity"]["minEigenvalue"] >= -tol)
    _echo_json(report)


@cli.command()
@click.argument("name", type=click.Choice(PRESETS))
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Override a preset parameter (JSON value).")
@click.pass_context
def preset(ctx, name, overrides):
    """Run an experiment preset and write its files under <out>/<name>."""
    params = {}
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"override {item!r} is not KEY=VALUE")
        try:
            params[key] = json.loads(value)
        except json.JSONDecodeError:
            params[key] = value
    manifest = run_preset(name, Path(ctx.obj["out"]) / name, ctx.obj["seed"], params)
    _echo_json(manifest)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="nonrev", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_VALIDATION
    except click.ClickException as exc:
        exc.show()
        return EXIT_VALIDATION
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_VALIDATION
    except NumericalError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return EXIT_NUMERICAL
    except OSError as exc:
        click.echo(f"I/O error: {exc}", err=True)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
