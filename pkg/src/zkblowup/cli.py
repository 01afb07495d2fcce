"""Command-line front end: ground-state, spectrum, theta, profile, ode, simulate, decompose, verify.

Settings come from, in increasing priority: built-in defaults, a plain-text
key = value config file, ZKBLOWUP_* environment variables, and flags.
Exit codes: 0 ok, 1 a hard check failed, 2 usage error, 3 numerical failure.
"""
import hashlib
import json
import logging
import subprocess
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__

log = logging.getLogger("zkblowup")

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULT_GRIDS = {
    "ground-state": "512,512,40,40",
    "theta": "512,512,40,40",
    "spectrum": "256,256,20,20",
    "profile": "512,512,32,32",
    "ode": "256,256,24,24",
    "simulate": "256,256,16,16",
    "decompose": "256,256,24,24",
    "verify": "768,768,40,40",
}

TOLERANCES = {
    "ground_state_residual": 1e-10,
    "energy_over_H1_4": 1e-8,
    "gn_ratio": 1e-8,
    "LambdaQ_dot_Q": 1e-9,
    "L_LambdaQ_plus_2Q": 1e-8,
    "P_dot_Q_relative": 1e-5,
    "grad_P_dot_Q": 1e-7,
    "theta_consistency": 1e-3,
    "profile_residual": 1e-5,
    "profile_identity": 1e-6,
    "special_solution": 1e-8,
    "rate_exponent": 1e-3,
    "lambda_metric": 10.0,
    "b_growth": 2.0,
    "negative_eigenvalue": 1e-6,
    "kernel_eigenvalue": 1e-6,
    "shape_error": 1e-6,
    "speed_error": 1e-6,
    "conservation_drift": 1e-10,
    "decompose_parameters": 1e-8,
    "orthogonality": 1e-10,
}


class UsageProblem(click.UsageError):
    exit_code = EXIT_USAGE


# configuration

def read_config(path):
    """Parse `key = value` lines; '#' starts a comment."""
    out = {}
    if path is None:
        return out
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageProblem(f"cannot read config {path}: {exc}")
    for num, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageProblem(f"{path}:{num}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def parse_grid(text):
    from .spectral_core import Grid2D
    try:
        parts = [p.strip() for p in str(text).split(",")]
        if len(parts) != 4:
            raise ValueError
        n1, n2 = int(parts[0]), int(parts[1])
        return Grid2D(n1, n2, float(parts[2]), float(parts[3]))
    except ValueError as exc:
        raise UsageProblem(f"bad grid {text!r}; expected n1,n2,L1,L2 ({exc})")


class Settings:
    """Merged view of flags over config-file values over defaults."""

    def __init__(self, config, flags, defaults):
        self.config = dict(config)
        self.values = dict(defaults)
        self.values.update({k: v for k, v in config.items() if k in defaults})
        unused = set(config) - set(defaults) - {"grid"}
        if unused:
            log.info("config keys not used by this command: %s", sorted(unused))
        self.values.update({k: v for k, v in flags.items() if v is not None})

    def get(self, key, kind=str):
        v = self.values.get(key)
        if v is None:
            return None
        try:
            if kind is bool and isinstance(v, str):
                return v.lower() in ("1", "true", "yes", "on")
            return kind(v)
        except (TypeError, ValueError):
            raise UsageProblem(f"bad value for {key}: {v!r}")


# cache

def _key(parts):
    blob = json.dumps(parts, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:24]


def _sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class ArtifactCache:
    """Content-addressed store of field dumps with sha256 sidecars."""

    def __init__(self, root):
        self.root = Path(root) / "cache"
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, kind, parts, ext):
        return self.root / f"{kind}-{_key({'kind': kind, **parts})}.{ext}"

    def lookup(self, path):
        """True when the file exists and its checksum matches."""
        path = Path(path)
        side = path.with_suffix(path.suffix + ".sha256")
        if not path.exists() or not side.exists():
            return False
        if side.read_text().strip() != _sha(path):
            log.warning("checksum mismatch for %s; recomputing", path.name)
            return False
        log.info("cache hit %s", path.name)
        return True

    def seal(self, path):
        path = Path(path)
        path.with_suffix(path.suffix + ".sha256").write_text(_sha(path) + "\n")


def ground_state(grid, cache, tol=1e-11):
    from .ground_state import GroundState, energy, residual, solve_ground_state
    from .spectral_core import RealField2D, read_dump, write_dump
    path = cache.path("Q", {"grid": list(grid.key()), "tol": tol}, "zkf") if cache else None
    if path is not None and cache.lookup(path):
        g2, q = read_dump(path)
        if g2 != grid:
            raise UsageProblem("cached ground state has an inconsistent grid")
        return GroundState(RealField2D(grid, q), float(np.max(np.abs(residual(grid, q)))),
                           grid.inner(q, q), energy(grid, q), 0)
    gs = solve_ground_state(grid, tol=tol)
    if path is not None:
        write_dump(path, grid, gs.values)
        cache.seal(path)
    return gs


def profile_P(gs, cache, tol=1e-13):
    from .profiles import ProfileP, profile_P_diagnostics, solve_P, transverse_profiles
    from .zfields import ZField
    tp = transverse_profiles(gs)
    path = cache.path("P", {"grid": list(gs.grid.key()), "tol": tol, "q": _sha_array(gs.values)}, "npz") if cache else None
    if path is not None and cache.lookup(path):
        data = np.load(path)
        f = ZField(gs.grid, data["core"], data["tails"])
        return ProfileP(f, profile_P_diagnostics(gs, tp, f)), tp
    P = solve_P(gs, tp, tol=tol)
    if path is not None:
        with open(path, "wb") as fh:
            np.savez(fh, core=P.P.core, tails=P.P.tails)
        cache.seal(path)
    return P, tp


def _sha_array(a):
    return hashlib.sha256(np.ascontiguousarray(a).tobytes()).hexdigest()[:16]


# reports

def version_string():
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=Path(__file__).parent,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if np.isfinite(v) else str(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_report(ctx, name, results, theta=None, grid=None, B=None, checks=None):
    obj = ctx.obj
    report = {
        "command": name,
        "version": version_string(),
        "theta": theta,
        "grid": None if grid is None else {"n1": grid.n1, "n2": grid.n2, "half_width1": grid.half_width1,
                                           "half_width2": grid.half_width2},
        "B": B,
        "tolerances": TOLERANCES,
        "config": obj["config"],
        "results": results,
        "checks": checks or {},
    }
    path = obj["out"] / f"{name}.json"
    path.write_text(json.dumps(_clean(report), indent=2, sort_keys=True) + "\n")
    click.echo(str(path))
    failed = [k for k, v in (checks or {}).items() if not v]
    if failed:
        click.echo(f"FAILED checks: {', '.join(failed)}", err=True)
        ctx.exit(EXIT_CHECK)
    return report


def numeric_guard(fn):
    """Map numerical failures to exit code 3."""
    import functools

    @functools.wraps(fn)
    def wrapper(*a, **kw):
        from .ground_state import ConvergenceError
        from .linearized_ops import SolverError
        from .modulation_ode import ParameterRangeError
        from .profiles import SolvabilityError
        from .zk_dynamics import DecompositionError, IntegrationFailure
        try:
            return fn(*a, **kw)
        except (ConvergenceError, SolverError, ParameterRangeError, SolvabilityError, DecompositionError,
                IntegrationFailure, FloatingPointError, np.linalg.LinAlgError) as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(EXIT_NUMERIC)

    return wrapper


def _settings(ctx, name, flags, defaults):
    obj = ctx.obj
    defaults = dict(defaults)
    defaults.setdefault("grid", DEFAULT_GRIDS[name])
    flags = dict(flags)
    flags["grid"] = obj["grid_flag"]
    st = Settings(obj["config"], flags, defaults)
    return st, parse_grid(st.get("grid"))


def _theta_of(gs):
    from .profiles import compute_F, compute_theta
    return compute_theta(compute_F(gs), gs.grid.half_width2)


# commands

@click.group(context_settings={"auto_envvar_prefix": "ZKBLOWUP", "help_option_names": ["-h", "--help"]})
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, envvar="ZKBLOWUP_CONFIG",
              help="key = value file.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, envvar="ZKBLOWUP_OUT",
              help="Output directory.")
@click.option("--threads", type=int, default=None, envvar="ZKBLOWUP_THREADS", help="FFT worker threads.")
@click.option("--grid", "grid_flag", default=None, envvar="ZKBLOWUP_GRID",
              help="n1,n2,L1,L2 (overrides the per-command default).")
@click.option("--no-cache", is_flag=True, help="Ignore and do not write cached fields.")
@click.option("-v", "--verbose", count=True)
@click.pass_context
def main(ctx, config_path, out_dir, threads, grid_flag, no_cache, verbose):
    """Minimal-mass blow-up toolkit for the 2D cubic ZK equation."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(message)s")
    config = read_config(config_path)
    out = Path(out_dir or config.get("out", "zkblowup_out"))
    out.mkdir(parents=True, exist_ok=True)
    threads = threads if threads is not None else config.get("threads")
    if threads is not None:
        from .spectral_core import set_threads
        try:
            set_threads(int(threads))
        except ValueError:
            raise UsageProblem(f"bad thread count {threads!r}")
    grid_flag = grid_flag or config.get("grid")
    config = {k: v for k, v in config.items() if k not in ("out", "threads")}
    ctx.obj = {"config": config, "out": out, "grid_flag": grid_flag,
               "cache": None if no_cache else ArtifactCache(out)}


@main.command("ground-state")
@click.option("--tol", default=None, type=float)
@click.pass_context
@numeric_guard
def ground_state_cmd(ctx, tol):
    """Solve for Q and check its identities; writes Q.zkf."""
    from .ground_state import gagliardo_nirenberg_ratio, verify_identities
    from .spectral_core import write_dump
    st, grid = _settings(ctx, "ground-state", {"tol": tol}, {"tol": "1e-11"})
    gs = ground_state(grid, ctx.obj["cache"], st.get("tol", float))
    ids = verify_identities(gs)
    gn = gagliardo_nirenberg_ratio(gs.Q, gs.mass)
    write_dump(ctx.obj["out"] / "Q.zkf", grid, gs.values)
    res = {"mass": gs.mass, "energy": gs.energy, "Q0": float(gs.values.max()), "gn_ratio": gn,
           "iterations": gs.iterations, "identities": ids}
    checks = {"residual": gs.residual_sup <= TOLERANCES["ground_state_residual"],
              "energy": ids["energy_over_H1_4"] <= TOLERANCES["energy_over_H1_4"],
              "gn_ratio": abs(gn - 1.0) <= TOLERANCES["gn_ratio"]}
    write_report(ctx, "ground-state", res, _theta_of(gs), grid, checks=checks)


@main.command("spectrum")
@click.option("--k", "nev", default=None, type=int, help="Number of eigenpairs.")
@click.pass_context
@numeric_guard
def spectrum_cmd(ctx, nev):
    """Lowest eigenvalues of L and the constrained coercivity constants mu1, mu2."""
    from .linearized_ops import LinearizedOperator, coercivity_constant, lowest_eigenpairs
    from .spectral_core import write_dump
    st, grid = _settings(ctx, "spectrum", {"k": nev}, {"k": "4"})
    gs = ground_state(grid, ctx.obj["cache"])
    op = LinearizedOperator(gs)
    rep = lowest_eigenpairs(op, k=st.get("k", int))
    d1, d2 = grid.grad(gs.values)
    mu1 = coercivity_constant(op, [rep.Y.values, d1, d2])
    mu2 = coercivity_constant(LinearizedOperator(gs, kind="H"), [gs.values, d1, d2])
    write_dump(ctx.obj["out"] / "Y.zkf", grid, rep.Y.values)
    ev = np.asarray(rep.eigenvalues)
    res = {"eigenvalues": ev, "mu0": rep.mu0, "kernel_residuals": rep.kernel_residuals, "mu1": mu1, "mu2": mu2}
    checks = {"one_negative": int(np.sum(ev < -TOLERANCES["negative_eigenvalue"])) == 1,
              "two_kernel": int(np.sum(np.abs(ev) <= TOLERANCES["kernel_eigenvalue"])) == 2,
              "mu1_positive": mu1 > 0, "mu2_positive": mu2 > 0}
    write_report(ctx, "spectrum", res, _theta_of(gs), grid, checks=checks)


@main.command("theta")
@click.option("--consistency/--no-consistency", default=None, help="Also solve for P and cross-check theta.")
@click.pass_context
@numeric_guard
def theta_cmd(ctx, consistency):
    """Blow-up exponent theta from the transverse Fourier quotient."""
    from .profiles import compute_F, compute_theta, theta_consistency
    st, grid = _settings(ctx, "theta", {"consistency": consistency}, {"consistency": "false"})
    t0 = time.perf_counter()
    gs = ground_state(grid, ctx.obj["cache"])
    th = compute_theta(compute_F(gs), grid.half_width2)
    log.info("theta computed in %.1f s", time.perf_counter() - t0)
    res = {"theta": th}
    checks = {}
    if st.get("consistency", bool):
        P, _ = profile_P(gs, ctx.obj["cache"])
        tc = theta_consistency(P, gs)
        res.update({"theta_consistency": tc, "P_diagnostics": P.diagnostics})
        checks["consistency"] = abs(th - tc) / th <= TOLERANCES["theta_consistency"]
    write_report(ctx, "theta", res, th, grid, checks=checks)


def _profile_set(gs, cache, K):
    from .profiles import build_profile_set
    P, tp = profile_P(gs, cache)
    return build_profile_set(gs, K=K, P=P, tp=tp, allow_high_order=K > 2)


@main.command("profile")
@click.option("--lambda", "lam", default=None, type=float)
@click.option("--b", default=None, type=float)
@click.option("--order", default=None, type=int, help="Expansion order K.")
@click.pass_context
@numeric_guard
def profile_cmd(ctx, lam, b, order):
    """Build W_{b,lambda}, check the residual identity and report the refined scalar product."""
    from .profiles import (build_blowup_profile, c2_quadrature, compute_sigma_star, local_residual_norm,
                           profile_residual, refined_scalar_product)
    from .modulation_ode import gamma, OdeConfig
    from .spectral_core import write_dump
    st, grid = _settings(ctx, "profile", {"lambda": lam, "b": b, "order": order},
                         {"lambda": "0.1", "b": "0.0", "order": "2"})
    lam, b, K = st.get("lambda", float), st.get("b", float), st.get("order", int)
    if not 0 < lam <= 0.3:
        raise UsageProblem("--lambda must lie in (0, 0.3]")
    gs = ground_state(grid, ctx.obj["cache"])
    ps = _profile_set(gs, ctx.obj["cache"], K)
    bp = build_blowup_profile(ps, lam, K)
    rate = -float(gamma(OdeConfig.from_profiles(ps), lam))
    r = profile_residual(bp, rate)
    res = {"lambda": lam, "b": b, "K": K, "c": ps.c, "c2_quadrature": c2_quadrature(ps) if K >= 2 else None,
           "sigma_star": compute_sigma_star(ps.P, gs), "relative_identity_error": r["relative_identity_error"],
           "local_residual_norm": local_residual_norm(r), "eval_grid": list(bp.eval_grid.key())}
    if b != 0.0:
        lhs, scale = refined_scalar_product(bp, b)
        res.update({"refined_scalar_product": lhs, "refined_scale": scale, "refined_constant": abs(lhs) / scale})
    write_dump(ctx.obj["out"] / "W.zkf", bp.eval_grid, bp.W)
    checks = {"identity": res["relative_identity_error"] <= TOLERANCES["profile_identity"]}
    write_report(ctx, "profile", res, ps.theta, grid, checks=checks)


@main.command("ode")
@click.option("--n", default=None, type=float, help="Seed at s = -n.")
@click.option("--s-end", default=None, type=float)
@click.option("--truncate-gamma", is_flag=True, default=None)
@click.option("--theta", "theta_flag", default=None, type=float, help="Use this theta instead of computing it.")
@click.option("--samples", default=None, type=int)
@click.pass_context
@numeric_guard
def ode_cmd(ctx, n, s_end, truncate_gamma, theta_flag, samples):
    """Integrate the modulation ODE from s = -n and write ode.csv."""
    from .modulation_ode import (G_inverse, OdeConfig, ParamState, anchor_pair, blowup_trajectory,
                                 fit_blowup_rates, integrate_params, special_solution)
    st, grid = _settings(ctx, "ode", {"n": n, "s_end": s_end, "truncate_gamma": truncate_gamma, "theta": theta_flag,
                                      "samples": samples},
                         {"n": "100", "s_end": "-10", "truncate_gamma": "false", "theta": None, "samples": "400"})
    n, s_end, trunc = st.get("n", float), st.get("s_end", float), st.get("truncate_gamma", bool)
    if not (n > 0 and -n < s_end < 0):
        raise UsageProblem("need n > 0 and -n < s_end < 0")
    th = st.get("theta", float)
    if th is not None and not trunc:
        raise UsageProblem("--theta only applies with --truncate-gamma")
    if trunc:
        if th is None:
            th = _theta_of(ground_state(grid, ctx.obj["cache"]))
        try:
            cfg = OdeConfig(theta=th)
        except ValueError as exc:
            raise UsageProblem(str(exc))
        lam0 = float(special_solution(th, -n))
    else:
        ps = _profile_set(ground_state(grid, ctx.obj["cache"]), ctx.obj["cache"], 2)
        cfg = OdeConfig.from_profiles(ps)
        th = cfg.theta
        lam0 = G_inverse(cfg, n)
    T, S = anchor_pair(th, n)
    init = ParamState(S, T, lam0, 0.0, -th / (th - 1.0) * n ** (1.0 - 1.0 / th))
    traj = integrate_params(cfg, init, s_end, n_samples=st.get("samples", int))
    traj.to_csv(ctx.obj["out"] / "ode.csv")
    slope = float(np.polyfit(np.log(np.abs(traj.s)), np.log(traj.lam), 1)[0])
    res = {"truncated": trunc, "c1": cfg.c1, "c2": cfg.c2, "lambda_start": lam0, "slope_log_lambda_vs_log_s": slope,
           "expected_slope": -1.0 / th, "status": traj.status,
           "special_solution_error": float(np.max(np.abs(traj.lam - special_solution(th, traj.s)))) if trunc else None}
    if not trunc:
        res["rates"] = fit_blowup_rates(blowup_trajectory(cfg, 1e-6, 1e-2))
        res["expected_rates"] = {"p_lambda": 1.0 / (3.0 - th), "p_x1": (1.0 - th) / (3.0 - th)}
    checks = {"completed": traj.status == "ok"}
    if trunc:
        checks["special_solution"] = res["special_solution_error"] <= TOLERANCES["special_solution"]
    else:
        checks["rates"] = all(abs(res["rates"][k] - v) <= TOLERANCES["rate_exponent"]
                              for k, v in res["expected_rates"].items())
    write_report(ctx, "ode", res, th, grid, checks=checks)


@main.command("simulate")
@click.option("--mode", type=click.Choice(["soliton", "blowup"]), default=None)
@click.option("--dt", default=None, type=float)
@click.option("--t-end", default=None, type=float)
@click.option("--n", default=None, type=float)
@click.option("--window", default=None, type=float)
@click.option("--ds", default=None, type=float)
@click.option("--B", "B", default=None, type=float)
@click.pass_context
@numeric_guard
def simulate_cmd(ctx, mode, dt, t_end, n, window, ds, B):
    """Soliton transit test, or the rescaled-frame blow-up experiment (writes experiment.csv)."""
    from . import functionals as fn
    from . import zk_dynamics as zd
    from .modulation_ode import OdeConfig
    defaults = {"mode": "soliton", "dt": "1e-3", "t_end": "10", "n": "100", "window": "20", "ds": "0.02", "B": "32"}
    st, grid = _settings(ctx, "simulate", {"mode": mode, "dt": dt, "t_end": t_end, "n": n, "window": window,
                                           "ds": ds, "B": B}, defaults)
    gs = ground_state(grid, ctx.obj["cache"])
    if st.get("mode") == "soliton":
        r = zd.soliton_transit(gs, zd.SolverConfig(dt=st.get("dt", float)), st.get("t_end", float))
        r = {k: v for k, v in r.items() if k != "final"}
        checks = {"shape": r["shape_error"] <= TOLERANCES["shape_error"],
                  "speed": r["speed_error"] <= TOLERANCES["speed_error"],
                  "mass": r["mass_drift"] <= TOLERANCES["conservation_drift"],
                  "energy": r["energy_drift"] <= TOLERANCES["conservation_drift"]}
        write_report(ctx, "simulate", r, _theta_of(gs), grid, checks=checks)
        return
    Bv = st.get("B", float)
    ps = _profile_set(gs, ctx.obj["cache"], 2)
    cfg = zd.ExperimentConfig(n=st.get("n", float), window=st.get("window", float), ds=st.get("ds", float))
    wf = fn.build_weights(Bv)
    res = zd.run_blowup_experiment(ps, cfg, diagnostics=fn.experiment_hook(wf, gs.values))
    cols = ["s", "t", "lambda", "b", "x1", "eps_L2", "eps_loc", "N_B", "F_energy", "P_virial", "W_lyapunov",
            "dissipation", "mass", "energy", "residual"]
    data = np.column_stack([res.column(c) for c in cols]) if res.samples else np.zeros((0, len(cols)))
    np.savetxt(ctx.obj["out"] / "experiment.csv", data, delimiter=",", header=",".join(cols), comments="",
               fmt="%.17g")
    summary = zd.bootstrap_metrics(res, ps.theta)
    summary["status"] = res.status
    summary["modulation"] = {k: v for k, v in zd.modulation_residuals(
        {c: res.column(c) for c in ("s", "lambda", "b", "x1", "eps_loc")}, OdeConfig.from_profiles(ps)).items()
        if k.startswith("max")} if len(res.samples) >= 5 else None
    checks = {"completed": res.status == "ok",
              "lambda_bounded": summary["max_lambda_metric"] <= TOLERANCES["lambda_metric"],
              "b_bounded": summary["b_growth"] <= TOLERANCES["b_growth"],
              "N_B_finite": summary.get("N_B_finite", False)}
    write_report(ctx, "simulate", summary, ps.theta, grid, B=Bv, checks=checks)


@main.command("decompose")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Field dump to decompose; without it a synthetic round trip is run.")
@click.option("--offset", default=None, type=float, help="y1 coordinate of the dump's box center.")
@click.option("--lambda", "lam", default=None, type=float)
@click.option("--x1", default=None, type=float)
@click.option("--b", default=None, type=float)
@click.option("--seed", default=None, type=int)
@click.pass_context
@numeric_guard
def decompose_cmd(ctx, input_path, offset, lam, x1, b, seed):
    """Modulation decomposition (lambda, x1, b, eps) of a field."""
    from . import zk_dynamics as zd
    from .spectral_core import read_dump, write_dump
    st, grid = _settings(ctx, "decompose", {"offset": offset, "lambda": lam, "x1": x1, "b": b, "seed": seed},
                         {"offset": "0", "lambda": "0.25", "x1": "0", "b": "0.002", "seed": "0"})
    gs = ground_state(grid, ctx.obj["cache"])
    ps = _profile_set(gs, ctx.obj["cache"], 2)
    source = zd.ProfileSource(ps)
    guess = (st.get("lambda", float), st.get("x1", float), st.get("b", float))
    if input_path is not None:
        g2, vals = read_dump(input_path)
        d = zd.decompose(vals, g2, guess, source, offset1=st.get("offset", float))
        res = {"lambda": d.lam, "x1": d.x1, "b": d.b, "eps_L2": d.eps_l2, "residuals": d.residuals,
               "iterations": d.iterations}
        checks = {"orthogonality": float(np.max(np.abs(d.residuals))) <= TOLERANCES["orthogonality"]}
    else:
        res = zd.round_trip(source, guess, np.random.default_rng(st.get("seed", int)))
        checks = {"parameters": res["parameter_error"] <= TOLERANCES["decompose_parameters"],
                  "orthogonality": res["orthogonality"] <= TOLERANCES["orthogonality"]}
        d = res.pop("decomposition")
    write_dump(ctx.obj["out"] / "eps.zkf", grid, d.epsilon)
    write_report(ctx, "decompose", res, ps.theta, grid, checks=checks)


@main.command("verify")
@click.argument("target", type=click.Choice(["identities", "weights"]), default="identities")
@click.option("--B-list", "B_list", default=None, help="Comma-separated B values for the weight audit.")
@click.option("--seed", default=None, type=int)
@click.pass_context
@numeric_guard
def verify_cmd(ctx, target, B_list, seed):
    """Identity suite for Q and P, or the weight inequality audit over a B sweep."""
    from . import functionals as fn
    st, grid = _settings(ctx, "verify", {"B_list": B_list, "seed": seed}, {"B_list": "16,32,64", "seed": "0"})
    if target == "weights":
        try:
            Bs = [float(x) for x in st.get("B_list").split(",")]
        except ValueError:
            raise UsageProblem("bad --B-list")
        audits, checks = {}, {}
        for Bv in Bs:
            rep = fn.weight_inequality_audit(fn.build_weights(Bv))
            audits[str(Bv)] = rep
            for k, v in rep.items():
                if not k.startswith("_"):
                    checks[f"B{Bv:g}:{k}"] = v["holds"]
        write_report(ctx, "verify-weights", {"audits": audits}, None, None, B=Bs, checks=checks)
        return
    from .ground_state import gagliardo_nirenberg_ratio, verify_identities
    from .profiles import theta_consistency
    gs = ground_state(grid, ctx.obj["cache"])
    ids = verify_identities(gs)
    th = _theta_of(gs)
    P, _ = profile_P(gs, ctx.obj["cache"])
    dg = P.diagnostics
    tc = theta_consistency(P, gs)
    gn = gagliardo_nirenberg_ratio(gs.Q, gs.mass)
    res = {"identities": ids, "gn_ratio": gn, "theta_consistency": tc, "P_diagnostics": dg}
    rel_pq = abs(dg["P_dot_Q"] - dg["quarter_F_sq"]) / abs(dg["quarter_F_sq"])
    checks = {
        "residual": gs.residual_sup <= TOLERANCES["ground_state_residual"],
        "energy": ids["energy_over_H1_4"] <= TOLERANCES["energy_over_H1_4"],
        "gn_ratio": abs(gn - 1.0) <= TOLERANCES["gn_ratio"],
        "LambdaQ_dot_Q": ids["LambdaQ_dot_Q"] <= TOLERANCES["LambdaQ_dot_Q"],
        "L_LambdaQ_plus_2Q": ids["L_LambdaQ_plus_2Q"] <= TOLERANCES["L_LambdaQ_plus_2Q"],
        "P_dot_Q": rel_pq <= TOLERANCES["P_dot_Q_relative"],
        "grad_P_dot_Q": max(abs(dg["d1P_dot_Q"]), abs(dg["d2P_dot_Q"])) <= TOLERANCES["grad_P_dot_Q"],
        "theta_consistency": abs(th - tc) / th <= TOLERANCES["theta_consistency"],
    }
    write_report(ctx, "verify", res, th, grid, checks=checks)


def run(argv=None):
    """Entry point returning the exit code instead of raising SystemExit."""
    try:
        # without standalone mode click returns ctx.exit codes instead of raising
        rv = main.main(args=argv, prog_name="zkblowup", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except SystemExit as exc:
        return int(exc.code or 0)
    return rv if isinstance(rv, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(run())
