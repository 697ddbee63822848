"""Command-line experiment runner.

``fracorbit run <config>`` runs one experiment described by a YAML file,
``fracorbit compare <dirA> <dirB>`` diffs the CSV outputs of two runs and
``fracorbit verify`` runs the built-in verification suites.

Exit codes: 0 success, 1 configuration or schema error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings

import numpy as np

from . import __version__ as VERSION
from . import config as cfgmod
from . import io
from .config import ConfigError
from .forward import solve_moving_source
from .inverse import (
    ReconstructionConfig,
    ReconstructionError,
    SingularSystemError,
    point_reselections,
    random_localized_pairs,
    reconstruct_orbit_global,
    reconstruct_orbit_local,
    stability_experiment,
    synthesize_data,
)
from .model import ObservabilityError
from .specfun import MittagLefflerConvergenceError

NUMERICAL_ERRORS = (ReconstructionError, SingularSystemError, MittagLefflerConvergenceError,
                    ObservabilityError, np.linalg.LinAlgError)



class NumericalFailure(RuntimeError):
    pass


def _prepare(cfg):
    dim = cfgmod.dimension(cfg)
    return (dim, cfgmod.build_domain(cfg, dim), cfgmod.build_profile(cfg, dim),
            cfgmod.build_grid(cfg))


def _labels(prefix, d):
    return [f"{prefix}_{k + 1}" for k in range(d)] if d > 1 else [prefix]


def _point_label(p):
    return "u(" + ",".join(f"{v:.6g}" for v in p) + ")"


def _trace_columns(t, points, values):
    cols = {"t": t}
    for j, p in enumerate(points):
        cols[_point_label(p)] = values[:, j]
    return cols


def run_simulate(cfg, out):
    dim, domain, g, grid = _prepare(cfg)
    orbit = cfgmod.build_orbit(cfg, dim)
    points, _ = cfgmod.observation_points(cfg, dim)
    alpha = float(cfg["alpha"])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sol = solve_moving_source(g, orbit, alpha, domain, grid)
    traces = sol.traces(points)
    t = grid.nodes
    io.write_columns(os.path.join(out, "traces.csv"), _trace_columns(t, points, traces.values))
    meta = {"kind": "simulate", "alpha": alpha, "n_basis": int(sol.rates.size),
            "tail_coefficient": sol.tail_coefficient(), "points": points,
            "warnings": [str(w.message) for w in caught]}
    if dim == 1:
        half = (domain.lengths[0] / 2 if domain.kind == "box"
                else float(np.max(np.abs(orbit(t)))) + 4 * g.delta)
        x = np.linspace(-half, half, 201)[:, None]
        idx = np.unique(np.linspace(0, grid.n_steps, 5).round().astype(int))
        field = sol.field(x)[idx].T
        cols = {"x": x[:, 0]}
        for k, i in enumerate(idx):
            cols[f"t={t[i]:.6g}"] = field[:, k]
        io.write_columns(os.path.join(out, "field.csv"), cols)
        if cfg["output"]["figures"]:
            from .plotting import plot_field

            plot_field(os.path.join(out, "field.png"), x[:, 0], t[idx], field)
    if cfg["output"]["figures"]:
        from .plotting import plot_traces

        plot_traces(os.path.join(out, "traces.png"), t, traces.values,
                    [_point_label(p) for p in points])
    return meta


def run_reconstruct(cfg, out):
    dim, domain, g, grid = _prepare(cfg)
    orbit = cfgmod.build_orbit(cfg, dim)
    points, sel_eps = cfgmod.observation_points(cfg, dim)
    alpha = float(cfg["alpha"])
    rc = cfg["reconstruction"]
    data = synthesize_data(g, orbit, alpha, domain, grid, points,
                           refine=int(cfg["grid"]["data_refine"]),
                           noise_level=float(cfg["noise"]["level"]), seed=int(cfg["noise"]["seed"]))
    try:
        conf = ReconstructionConfig(newton_tol=float(rc["newton_tol"]),
                                    newton_max_iter=int(rc["newton_max_iter"]),
                                    mollifier=int(rc["mollifier"]),
                                    subtract_stationary=bool(rc["subtract_stationary"]))
    except ValueError as exc:
        raise ConfigError(f"'reconstruction': {exc}") from None
    if rc["mode"] == "global":
        eps = rc["epsilon"] if rc["epsilon"] is not None else (sel_eps or 0.05)
        res = reconstruct_orbit_global(data, g, alpha, domain, orbit.K, float(eps), conf)
    else:
        if points.shape[0] != dim:
            raise ConfigError(f"'observation.points' must hold exactly {dim} point(s) for local mode")
        res = reconstruct_orbit_local(data, g, alpha, domain, conf)
    t = res.grid.nodes
    true = orbit(t)
    cols = {"t": t}
    for k, name in enumerate(_labels("gamma_true", dim)):
        cols[name] = true[:, k]
    for k, name in enumerate(_labels("gamma_rec", dim)):
        cols[name] = res.gamma[:, k]
    cols["newton_residual"] = res.residual
    cols["jacobian_cond"] = res.jacobian_cond
    io.write_columns(os.path.join(out, "reconstruction.csv"), cols)
    io.write_columns(os.path.join(out, "traces.csv"), _trace_columns(data.grid.nodes, points, data.values))
    err = res.error(orbit)
    meta = {"kind": "reconstruct", "alpha": alpha, "mode": rc["mode"], "max_error": err,
            "max_newton_residual": float(np.max(res.residual)),
            "max_jacobian_cond": float(np.nanmax(res.jacobian_cond)),
            "coverage": list(res.coverage), "point_reselections": point_reselections(res),
            "intervals": [list(i) for i in res.intervals], "log": res.log}
    if cfg["output"]["figures"]:
        from .plotting import plot_reconstruction, plot_traces

        plot_reconstruction(os.path.join(out, "reconstruction.png"), t, true, res.gamma)
        plot_traces(os.path.join(out, "traces.png"), data.grid.nodes, data.values,
                    [_point_label(p) for p in points])
    return meta


def run_stability(cfg, out):
    dim, domain, g, grid = _prepare(cfg)
    st = cfg["stability"]
    points, _ = cfgmod.observation_points(cfg, dim)
    pairs = random_localized_pairs(int(st["n_pairs"]), float(st["epsilon"]), grid.t_end, dim,
                                   seed=int(st["seed"]))
    alphas = [float(a) for a in st["alphas"]]
    rows, worst = stability_experiment(pairs, g, alphas, domain, points, grid)
    keys = ["pair_id", "alpha", "c_norm_diff", "trace_norm", "ratio"]
    io.write_csv(os.path.join(out, "stability.csv"), keys, [[r[k] for k in keys] for r in rows])
    per_alpha = {a: max(r["ratio"] for r in rows if r["alpha"] == a) for a in alphas}
    vals = np.array(list(per_alpha.values()))
    meta = {"kind": "stability", "max_ratio": worst, "max_ratio_per_alpha": per_alpha,
            "spread": float(vals.max() / vals.min()), "points": points}
    if not np.isfinite(worst):
        raise NumericalFailure("stability ratio is not finite")
    if cfg["output"]["figures"]:
        from .plotting import plot_stability

        plot_stability(os.path.join(out, "stability.png"), rows)
    return meta


def run_verify(cfg, out):
    from .verification import SUITES, run_all

    suites = list(cfg["verify"]["suites"])
    for s in suites:
        if s not in SUITES:
            raise ConfigError(f"'verify.suites': unknown suite '{s}'")
    checks = run_all(suites)
    io.write_csv(os.path.join(out, "report.csv"), ["suite", "check", "value", "tol", "passed"],
                 [[c.suite, c.name, c.value, c.tol, int(c.passed)] for c in checks])
    lines = [f"{'PASS' if c.passed else 'FAIL'}  [{c.suite}] {c.name}: {c.value:.3e} (tol {c.tol:.1e})"
             + (f"  {c.note}" if c.note else "") for c in checks]
    n_fail = sum(not c.passed for c in checks)
    lines.append(f"{len(checks) - n_fail}/{len(checks)} checks passed")
    with open(os.path.join(out, "report.txt"), "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    if n_fail:
        raise NumericalFailure(f"{n_fail} verification check(s) failed")
    return {"kind": "verify", "n_checks": len(checks), "n_failed": n_fail}


RUNNERS = {"simulate": run_simulate, "reconstruct": run_reconstruct,
           "stability": run_stability, "verify": run_verify}


def execute(cfg, out_dir=None):
    """Run a resolved config; returns the metadata dict."""
    out = out_dir or cfg["output"]["dir"]
    if not os.path.isabs(out):
        out = os.path.join(cfg.get("_base_dir", "."), out) if out_dir is None else os.path.abspath(out)
    cfg["output"]["dir"] = out
    try:
        io.ensure_dir(out)
    except OSError as exc:
        raise ConfigError(f"'output.dir': cannot create '{out}': {exc.strerror}") from None
    cfgmod.dump(cfg, os.path.join(out, "resolved_config.yaml"))
    try:
        with np.errstate(all="ignore"):
            meta = RUNNERS[cfg["kind"]](cfg, out)
    except ObservabilityError as exc:
        raise NumericalFailure(str(exc)) from exc
    threads = {k: os.environ.get(k) for k in ("FRACORBIT_THREADS", "OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS")}
    meta.update(version=VERSION, determinism=bool(cfg["determinism"]), threads=threads,
                numpy=np.__version__)
    io.write_json(os.path.join(out, "metadata.json"), meta)
    return meta


# ---------------------------------------------------------------------------
# compare


class SchemaMismatch(ValueError):
    pass


def compare_dirs(dir_a, dir_b):
    """Per-column max absolute difference of the CSVs shared by two runs.

    Returns a list of ``(file, column, max_abs_diff)``. Text cells count as
    0 when equal and ``inf`` otherwise. Different CSV sets, headers or row
    counts raise :class:`SchemaMismatch`.
    """
    def csvs(d):
        if not os.path.isdir(d):
            raise SchemaMismatch(f"'{d}' is not a directory")
        return sorted(f for f in os.listdir(d) if f.endswith(".csv"))

    fa, fb = csvs(dir_a), csvs(dir_b)
    if fa != fb:
        raise SchemaMismatch(f"CSV sets differ: {fa} vs {fb}")
    if not fa:
        raise SchemaMismatch("no CSV files to compare")
    out = []
    for name in fa:
        ha, a = io.read_csv(os.path.join(dir_a, name))
        hb, b = io.read_csv(os.path.join(dir_b, name))
        if ha != hb:
            raise SchemaMismatch(f"{name}: headers differ")
        if a.shape != b.shape:
            raise SchemaMismatch(f"{name}: row counts differ ({a.shape[0]} vs {b.shape[0]})")
        text_a, text_b = _text_cells(os.path.join(dir_a, name)), _text_cells(os.path.join(dir_b, name))
        for k, col in enumerate(ha):
            x, y = a[:, k], b[:, k]
            both_nan = np.isnan(x) & np.isnan(y)
            diff = np.where(both_nan, 0.0, np.abs(x - y))
            if np.any(both_nan) and text_a[k] != text_b[k]:
                diff = np.append(diff, np.inf)
            diff = np.where(np.isnan(diff), np.inf, diff)
            out.append((name, col, float(np.max(diff)) if diff.size else 0.0))
    return out


def _text_cells(path):
    import csv

    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return list(zip(*rows)) if rows else []


# ---------------------------------------------------------------------------
# entry point


def _parser():
    p = argparse.ArgumentParser(prog="fracorbit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the experiment described by a YAML config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides output.dir)")
    c = sub.add_parser("compare", help="per-column max |difference| of two runs' CSVs")
    c.add_argument("dir_a")
    c.add_argument("dir_b")
    c.add_argument("--out", help="also write the diff table to this CSV")
    v = sub.add_parser("verify", help="run the built-in verification suites")
    v.add_argument("--out", default="verify-out", help="output directory (default: verify-out)")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "compare":
            rows = compare_dirs(args.dir_a, args.dir_b)
            for f, col, d in rows:
                print(f"{f}\t{col}\t{d:.17g}")
            if args.out:
                io.write_csv(args.out, ["file", "column", "max_abs_diff"], rows)
            return 0
        if args.command == "verify":
            cfg = cfgmod.resolve({"kind": "verify"}, base_dir=os.getcwd())
            execute(cfg, args.out)
            return 0
        cfg = cfgmod.load(args.config)
        meta = execute(cfg, args.out)
        print(f"{cfg['kind']} finished; outputs in {cfg['output']['dir']}")
        if "max_error" in meta:
            print(f"max orbit error {meta['max_error']:.3e}")
        return 0
    except (ConfigError, SchemaMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NUMERICAL_ERRORS + (NumericalFailure,) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
