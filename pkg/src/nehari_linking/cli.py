"""Command-line front-end.

    nehari-linking audit --config desk.conf --out runs/a
    nehari-linking solve --config desk.conf --out runs/s

Every file written carries the config hash; failures map to exit codes
2 (config), 3 (numerical), 4 (geometry breach), 5 (not projectable).
"""
import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from . import _accel
from .config import load_config
from .errors import ConfigError, NehariLinkingError


def _model(cfg):
    from .nonlinearity import NonlinearityModel

    p = cfg.problem
    return NonlinearityModel(s=p["s"], lam=p["lambda"])


def _grid(cfg, **kw):
    from .grid import ExteriorGrid

    p = cfg.problem
    args = dict(N=p["N"], h=p["h"], rho=p["rho"], R_out=p["R_out"],
                obstacle_axes=p["obstacle_axes"] or None)
    args.update(kw)
    return ExteriorGrid(**args)


def _linking_grid(cfg, R):
    """Desk box, enlarged when the bump centres R y would not fit."""
    lk = cfg.linking
    p = cfg.problem
    x0 = np.asarray(lk["x0"], dtype=float)
    margin = 6.0 / math.sqrt(p["lambda"])
    need = np.abs(R * x0) + R * lk["separation"] + margin
    widths = tuple(float(max(p["R_out"], e)) for e in need)
    return _grid(cfg, half_widths=widths)


def _profile(cfg, model):
    from .limit_problem import shoot_ground_state

    return shoot_ground_state(model, N=cfg.problem["N"])


def _linking_config(cfg, R):
    from .linking import LinkingConfig

    lk = cfg.linking
    return LinkingConfig(R=R, x0=tuple(lk["x0"]), separation=lk["separation"],
                         n_y=lk["y_samples"], n_t=lk["t_samples"], n_theta=lk["n_theta"])


class Run:
    def __init__(self, cfg, out):
        self.cfg = cfg
        self.out = Path(out or cfg.output["directory"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.formats = set(cfg.output["formats"])

    def write_json(self, name, payload):
        payload = dict(payload)
        payload["config_hash"] = self.cfg.hash()
        path = self.out / name
        path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")
        return path

    def csv_header(self):
        return f"# config_hash={self.cfg.hash()}\n"


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serialisable: {type(x)}")


def _prepend(path, line):
    text = Path(path).read_text()
    Path(path).write_text(line + text)


def _guard(fn):
    """Run a command body, translating package errors into exit codes."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(exc.exit_code)
        except NehariLinkingError as exc:
            click.echo(f"{type(exc).__name__}: {exc}", err=True)
            sys.exit(exc.exit_code)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _common(fn):
    fn = click.option("--threads", type=int, default=None, help="worker threads for FFTs and kernels")(fn)
    fn = click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), default=None, help="override solver.seed")(fn)
    fn = click.option("--out", "out", type=click.Path(file_okay=False), default=None, help="output directory")(fn)
    fn = click.option("--config", "config", type=click.Path(dir_okay=False), required=True, help="config file")(fn)
    return fn


def _setup(config, seed, threads, check_admissible=True):
    cfg = load_config(config, check_admissible=check_admissible)
    if seed is not None:
        cfg = cfg.with_overrides(**{"solver.seed": seed})
    if threads is not None:
        _accel.set_threads(threads)
    np.random.seed(cfg.solver["seed"] % 2 ** 32)
    return cfg


@click.group()
def main():
    """Positive solutions of -Delta u + lambda u = f(u) outside an obstacle."""


@main.command()
@_common
@_guard
def audit(config, out, seed, threads):
    """Check the structural hypotheses on f; exit 0 iff all pass."""
    from .nonlinearity import audit_hypotheses

    cfg = _setup(config, seed, threads, check_admissible=False)
    model = _model(cfg)
    report = audit_hypotheses(model, N=cfg.problem["N"])
    run = Run(cfg, out)
    run.write_json("audit.json", {"pass": report.passed, "hypotheses": report.entries})
    for e in report.entries:
        click.echo(f"{e['name']:12s} {'pass' if e['pass'] else 'FAIL'}  {e['detail']}")
    sys.exit(0 if report.passed else 1)


@main.command("ground-state")
@_common
@_guard
def ground_state(config, out, seed, threads):
    """Radial ground state of the limit problem: profile CSV and sidecar."""
    from .limit_problem import fit_decay_constants

    cfg = _setup(config, seed, threads)
    model = _model(cfg)
    prof = _profile(cfg, model)
    run = Run(cfg, out)
    extra = {"config_hash": cfg.hash()}
    try:
        sigma_fit, quality = fit_decay_constants(prof)
        extra.update(sigma_fit=sigma_fit, fit_quality=quality)
    except NehariLinkingError:
        pass
    prof.save(run.out / "profile.csv", run.out / "profile.json", extra=extra)
    _prepend(run.out / "profile.csv", run.csv_header())
    click.echo(f"m = {prof.m:.12g}  sigma = {prof.sigma:.10g}  b = {prof.b:.12g}  w(0) = {prof.w0:.12g}")


@main.command()
@_common
@_guard
def project(config, out, seed, threads):
    """Nehari times of single cut-off bumps at the configured radii."""
    from .linking import bump
    from .nehari import nehari_time
    from .energy import total_energy

    cfg = _setup(config, seed, threads)
    model = _model(cfg)
    prof = _profile(cfg, model)
    x0 = np.asarray(cfg.linking["x0"])
    rows = []
    for R in cfg.linking["R_list"]:
        grid = _grid(cfg) if _grid_fits(cfg, R) else _linking_grid(cfg, R)
        proj = nehari_time(bump(prof, grid, R * x0, model), model)
        rows.append({"R": R, "tau": proj.tau, "energy": total_energy(proj.projected, model),
                     "g_omega": proj.g_omega, "residual": proj.residual_at_tau})
        click.echo(f"R = {R:6.2f}  T = {proj.tau:.12f}  I = {rows[-1]['energy']:.10g}")
    run = Run(cfg, out)
    run.write_json("projection.json", {"m": prof.m, "rows": rows})
    if "csv" in run.formats:
        with open(run.out / "projection.csv", "w") as fh:
            fh.write(run.csv_header())
            fh.write("R,tau,energy\n")
            for r in rows:
                fh.write(f"{r['R']!r},{r['tau']!r},{r['energy']!r}\n")


def _grid_fits(cfg, R):
    p = cfg.problem
    return R + 5.0 / math.sqrt(p["lambda"]) <= p["R_out"]


@main.command("link-scan")
@_common
@_guard
def link_scan(config, out, seed, threads):
    """Energy over the linking surface and the three geometry verdicts, per R."""
    from .linking import geometry_scan

    cfg = _setup(config, seed, threads)
    model = _model(cfg)
    prof = _profile(cfg, model)
    run = Run(cfg, out)
    blocks = []
    for R in cfg.linking["R_list"]:
        grid = _linking_grid(cfg, R)
        scan = geometry_scan(_linking_config(cfg, R), prof, grid, model)
        v = scan.verdict()
        v["box_half_widths"] = list(grid.half_widths)
        blocks.append(v)
        if "csv" in run.formats:
            path = run.out / f"scan_R{R:g}.csv"
            scan.write_csv(path)
            _prepend(path, run.csv_header())
        ok = all(v["inequalities"].values())
        click.echo(f"R = {R:g}: sup_dQ = {v['sup_dQ']:.10g}  inf_S~ = {v['inf_S_sampled']:.10g}  "
                   f"max_Q = {v['max_Q']:.10g}  2m = {v['two_m']:.10g}  {'pass' if ok else 'FAIL'}")
    run.write_json("link_scan.json", {"m": prof.m, "verdicts": blocks})


@main.command()
@_common
@click.option("--mode", type=click.Choice(["linking", "descent"]), default="linking",
              help="linking minimax (default) or plain Nehari minimization from one bump")
@_guard
def solve(config, out, seed, threads, mode):
    """Run the linking minimax at the largest configured R."""
    from .linking import bump
    from .minimax import linking_minimax, nehari_descent

    cfg = _setup(config, seed, threads)
    model = _model(cfg)
    prof = _profile(cfg, model)
    run = Run(cfg, out)
    sol = cfg.solver
    log_path = run.out / "run_log.jsonl"
    log_fh = open(log_path, "w")

    def log(row):
        log_fh.write(json.dumps(row, default=_jsonable) + "\n")

    try:
        if mode == "descent":
            R = min(cfg.linking["R_list"])
            grid = _grid(cfg)
            start = bump(prof, grid, R * np.asarray(cfg.linking["x0"]), model)
            state, diag = nehari_descent(start, model, budget=sol["budget"], tol=sol["tol"],
                                         m=prof.m, log=log)
            solution = state.u
            report = {"status": state.status, "energy": state.energy, "window": [prof.m, 2 * prof.m],
                      "residual": state.residual, "iterations": state.iter, "mode": mode,
                      "diagnostics": diag.to_dict(),
                      "positivity_min": float(solution.values[grid.interior].min())}
        else:
            R = max(cfg.linking["R_list"])
            grid = _linking_grid(cfg, R)
            solution, report = linking_minimax(_linking_config(cfg, R), prof, grid, model,
                                               budget=sol["budget"], tol=sol["tol"], band=sol["band"],
                                               log=log, progress=click.echo)
            report["mode"] = mode
    finally:
        log_fh.close()
    report["m"] = prof.m
    run.write_json("report.json", report)
    grid.save_field(solution, run.out / "solution.field", meta={"config_hash": cfg.hash()})
    if "csv" in run.formats:
        grid.field_to_csv(solution, run.out / "solution.csv", stride=4)
        _prepend(run.out / "solution.csv", run.csv_header())
    click.echo(f"status {report['status']}  energy {report['energy']:.10g}  "
               f"(m = {prof.m:.10g}, 2m = {2 * prof.m:.10g})  residual {report['residual']:.3e}")
    if mode == "descent":
        sys.exit(0)
    sys.exit(0 if report["status"] == "Converged" else 3)


@main.command()
@_common
@click.option("--run-dir", type=click.Path(file_okay=False, exists=True), default=None,
              help="directory of a previous solve (default: --out or output.directory)")
@_guard
def diagnose(config, out, seed, threads, run_dir):
    """Escape / splitting diagnostics from a solve run log."""
    from .minimax import strictly_increasing

    cfg = _setup(config, seed, threads)
    src = Path(run_dir or out or cfg.output["directory"])
    rows = [json.loads(line) for line in (src / "run_log.jsonl").read_text().splitlines() if line.strip()]
    report = json.loads((src / "report.json").read_text())
    m = report["m"]
    if len(rows) < 20:
        raise NehariLinkingError(f"run log has {len(rows)} rows; need at least 20")
    drift = [math.hypot(*r["beta"]) for r in rows]
    energies = [r["energy"] for r in rows]
    tail = drift[-20:]
    # rows are logged before each step; the report holds the final state
    final = report.get("energy", energies[-1])
    plateau = abs(final - m) <= 1e-2 * m
    summary = {
        "rows": len(rows),
        "bounded_max_energy": max(energies),
        "drift_first": drift[0],
        "drift_last": drift[-1],
        "drift_increasing_tail": strictly_increasing(tail),
        "energy_plateau_at_m": plateau,
        "splitting_suspected": bool(strictly_increasing(tail) and plateau),
        "final_energy": final,
        "window_ok": bool(m + 1e-2 * m < final < 2 * m - 1e-2 * m),
        "source": str(src),
    }
    Run(cfg, out or src).write_json("diagnose.json", summary)
    for k, v in summary.items():
        click.echo(f"{k:24s} {v}")


if __name__ == "__main__":  # pragma: no cover
    main()
