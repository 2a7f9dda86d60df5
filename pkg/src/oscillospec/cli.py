"""oscillospec command line.

    oscillospec cell      --config c.json --grid -10:10:401 --out cell.csv
    oscillospec phase     --epsilon 0.2 --alpha 2 --grid -40:40:8001 --out phase.csv
    oscillospec solve     --epsilon 0.2 --alpha 2 --num-eigs 6 --out spec.json
    oscillospec effective --epsilon 0.2 --alpha 1 --with-v1 --num-eigs 4 --out eff.json
    oscillospec compare   --alpha 2 --eps-grid 0.25:0.015625:dyadic --num-eigs 3 --out report.csv
    oscillospec sweep     --config sweep.json --out report.csv
    oscillospec wkb       --n 0 --orders 5 --epsilon 0.2 --out wkb.json

Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cache import ResultCache, atomic_write_text, cached_spectral, clean_floats, dumps_json, resolve_cache_dir
from .config import ConfigError, ExperimentConfig, load_raw, parse_eps_grid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

log = logging.getLogger("oscillospec")


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p):
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--out", help="output file")
    p.add_argument("--cache-dir", help="result cache directory (OSCILLOSPEC_CACHE overrides)")
    p.add_argument("--jobs", type=int, default=None, help="parallel workers for sweeps")
    p.add_argument("--seed", type=int, default=None, help="seed for synthetic test fixtures only")
    p.add_argument("--json-errors", action="store_true", help="print diagnostics as JSON on stderr")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    ap = _Parser(prog="oscillospec", description="Low-lying spectra of D^2 + q(eps^a x, x/eps).")
    ap.add_argument("--version", action="version", version=f"oscillospec {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("cell", help="cell corrector Q and effective potentials V0, V1")
    _common(p)
    p.add_argument("--grid", default="-10:10:401", help="start:stop:points in X")

    p = sub.add_parser("phase", help="phase profiles, change of variable and reduced-potential mismatch")
    _common(p)
    p.add_argument("--epsilon", type=float, default=0.2)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--grid", default=None, help="start:stop:points in x (default: +-4 eps^-alpha, 2001 points)")

    p = sub.add_parser("solve", help="restricted Fourier solve of the oscillatory operator")
    _common(p)
    _solver_flags(p, default_eigs=6)

    p = sub.add_parser("effective", help="eigenpairs of the effective operator")
    _common(p)
    p.add_argument("--epsilon", type=float, default=0.2)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--with-v1", action="store_true")
    p.add_argument("--num-eigs", type=int, default=4)
    p.add_argument("--L", type=float, default=None)
    p.add_argument("--modes", type=int, default=None, help="Fourier modes on the line (default: automatic)")

    p = sub.add_parser("compare", help="oscillatory vs effective vs closed form over an eps grid")
    _common(p)
    p.add_argument("--alpha", type=float, nargs="+", default=None)
    p.add_argument("--eps-grid", default=None)
    p.add_argument("--num-eigs", type=int, default=None)
    p.add_argument("--no-functions", action="store_true", help="skip eigenfunction distances")

    p = sub.add_parser("sweep", help="config-driven sweep writing CSV and JSON reports")
    _common(p)
    p.add_argument("--json-out", default=None, help="JSON report path (default: next to --out)")

    p = sub.add_parser("wkb", help="alpha = 2 WKB jets, profiles and quasimode residuals")
    _common(p)
    p.add_argument("--n", type=int, default=0, help="WKB level (0 = ground state)")
    p.add_argument("--orders", type=int, default=5)
    p.add_argument("--epsilon", type=float, nargs="+", default=[0.2])
    p.add_argument("--jet-order", type=int, default=None)
    p.add_argument("--cutoff-R", type=float, default=None)
    p.add_argument("--samples", type=int, default=201)
    return ap


def _solver_flags(p, default_eigs):
    p.add_argument("--epsilon", type=float, default=0.2)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--num-eigs", type=int, default=default_eigs)
    p.add_argument("--L", type=float, default=None, help="half-length of the periodic box (default: automatic)")
    p.add_argument("--grid-N", "--N-grid", dest="N_grid", type=int, default=None, help="sampling grid size")
    p.add_argument("--modes-n", "--n", dest="n", type=int, default=None, help="band half-width of the mode set")
    p.add_argument("--emit-grid", default=None, help="start:stop:points; also write eigenfunctions on this grid")


# -- helpers -------------------------------------------------------------

def _config(args) -> tuple[ExperimentConfig, dict]:
    raw = load_raw(args.config)
    cfg = ExperimentConfig.from_dict(raw) if raw else ExperimentConfig()
    if args.jobs is not None:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cfg.jobs = args.jobs
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg, raw


def _cache(args, cfg):
    d = resolve_cache_dir(args.cache_dir or cfg.cache_dir)
    return (ResultCache(d), d) if d is not None else (None, None)


def _check_eps_alpha(eps, alpha):
    if not 0 < eps <= 1:
        raise ConfigError(f"--epsilon must lie in (0, 1], got {eps}")
    if not alpha > -1:
        raise ConfigError(f"--alpha must exceed -1, got {alpha}")


def _write(path, text, default):
    path = Path(path or default)
    atomic_write_text(path, text)
    return path


def parse_grid(text):
    """'start:stop:points' -> linspace."""
    try:
        a, b, m = text.split(":")
        a, b, m = float(a), float(b), int(m)
    except ValueError:
        raise ConfigError(f"bad grid {text!r}; expected start:stop:points") from None
    if m < 2 or not b > a:
        raise ConfigError(f"bad grid {text!r}; need stop > start and points >= 2")
    return np.linspace(a, b, m)


def _is_csv(out, default):
    return str(out or default).lower().endswith(".csv")


def _csv(names, cols):
    lines = [",".join(names)]
    for row in zip(*cols):
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def _spectral_json(res, **extra):
    blob = {
        "version": __version__,
        "eigenvalues": [float(v) for v in res.eigenvalues],
        "negative_threshold": res.negative_threshold(),
        "negative_count": res.negative_count(),
        "meta": res.meta,
    }
    blob.update(extra)
    return dumps_json(clean_floats(blob))


# -- subcommands -----------------------------------------------------------

def cmd_cell(args):
    from .cell import solve_cell

    cfg, _ = _config(args)
    cell = solve_cell(cfg.potential)
    X = parse_grid(args.grid)
    V0, V1, V0pp = cell.V0(X), cell.V1(X), cell.V0_derivative(X, 2)
    if _is_csv(args.out, "cell.csv"):
        return _write(args.out, _csv(["X", "V0", "V1", "V0pp"], [X, V0, V1, V0pp]), "cell.csv")
    y = np.arange(64) / 64.0
    blob = {
        "version": __version__,
        "potential": cfg.potential.to_spec(),
        "X": X,
        "V0": V0,
        "V1": V1,
        "V0pp": V0pp,
        "integral_V0": cell.integral_V0,
        "integral_absV0": cell.integral_absV0,
        "integral_V1": cell.integral_V1,
        "Q_coefficients": {str(m): {"re": cell.Q_coefficient(m, X).real, "im": cell.Q_coefficient(m, X).imag}
                           for m in cfg.potential.harmonics},
        "y": y,
        "Q_at_X0": cell.Q(0.0, y),
    }
    return _write(args.out, dumps_json(clean_floats(blob)), "cell.json")


def cmd_phase(args):
    from .cell import solve_cell
    from .normalform import ChangeOfVariable, PhaseExpansion, effective_mismatch, phase_residual, reduced_potential

    cfg, _ = _config(args)
    _check_eps_alpha(args.epsilon, args.alpha)
    eps, a = args.epsilon, args.alpha
    pe = PhaseExpansion(solve_cell(cfg.potential))
    if args.grid:
        x = parse_grid(args.grid)
    else:
        xm = 4.0 / eps**max(a, 0.0)
        x = np.linspace(-xm, xm, 2001)
    phi, d1, d2 = pe.evaluate(eps, a, x, 2)
    cv = ChangeOfVariable(pe, eps, a)
    xt = cv.forward(x)
    vred = reduced_potential(pe, eps, a, x)
    if _is_csv(args.out, "phase.csv"):
        return _write(args.out, _csv(["x", "phi", "dphi", "ddphi", "Vred", "x_tilde"], [x, phi, d1, d2, vred, xt]),
                      "phase.csv")
    res = phase_residual(pe, eps, a, x)
    mis = effective_mismatch(pe, eps, a, x, cv)
    blob = {"version": __version__, "epsilon": eps, "alpha": a, "x": x, "phi": phi, "dphi": d1, "ddphi": d2,
            "Vred": vred, "x_tilde": xt, "phase_residual_max": float(np.max(np.abs(res))),
            "reduced_mismatch_max": float(np.max(np.abs(mis)))}
    return _write(args.out, dumps_json(clean_floats(blob)), "phase.json")


def cmd_solve(args):
    from .cell import solve_cell
    from .oscillatory import _check_grid, min_grid, mode_set, solve_oscillatory
    from .pipeline import auto_params

    cfg, _ = _config(args)
    cache, _ = _cache(args, cfg)
    eps, a = args.epsilon, args.alpha
    _check_eps_alpha(eps, a)
    if args.num_eigs < 1:
        raise ConfigError("--num-eigs must be >= 1")
    if args.L is not None and not args.L > 0:
        raise ConfigError("--L must be positive")
    pot = cfg.potential
    params = auto_params(solve_cell(pot), eps, a, args.num_eigs, L=args.L)
    n = args.n or params.n
    ms = mode_set(params.L, eps, n)
    N_grid = args.N_grid or max(params.N_grid, min_grid(ms.kmax))
    _check_grid(N_grid, ms)
    res = cached_spectral(cache, "osc", lambda: solve_oscillatory(pot, eps, a, params.L, N_grid, n, args.num_eigs),
                          potential=pot.to_spec(), eps=eps, alpha=a, L=params.L, N_grid=N_grid, n=n,
                          count=args.num_eigs)
    extra = {"epsilon": eps, "alpha": a, "seed": cfg.seed}
    if args.emit_grid:
        x = parse_grid(args.emit_grid)
        extra["grid"] = {"x": x, "eigenfunctions": [res.evaluate(x, i).real for i in range(res.count)]}
    return _write(args.out, _spectral_json(res, **extra), "spec.json")


def cmd_effective(args):
    from .cell import solve_cell
    from .effective import solve_effective

    cfg, _ = _config(args)
    cache, _ = _cache(args, cfg)
    eps, a = args.epsilon, args.alpha
    _check_eps_alpha(eps, a)
    cell = solve_cell(cfg.potential)
    res = cached_spectral(cache, "eff-cli", lambda: solve_effective(cell, eps, a, args.with_v1, args.num_eigs, args.L,
                                                                    args.modes),
                          potential=cfg.potential.to_spec(), eps=eps, alpha=a, L=args.L, N=args.modes,
                          include_V1=args.with_v1, count=args.num_eigs)
    return _write(args.out, _spectral_json(res, epsilon=eps, alpha=a, with_v1=args.with_v1), "eff.json")


def _run_sweep(args, cfg):
    from .sweep import run_sweep

    _, cdir = _cache(args, cfg)
    res = run_sweep(cfg, cdir, cfg.jobs)
    for f in res.failures:
        log.error("point eps=%g alpha=%g: %s", f["eps"], f["alpha"], f["error"])
    return res


def cmd_compare(args):
    cfg, raw = _config(args)
    if args.alpha is not None:
        cfg.alphas = list(args.alpha)
    if args.eps_grid is not None:
        cfg.eps = parse_eps_grid(args.eps_grid)
    if args.num_eigs is not None:
        cfg.num_eigs = args.num_eigs
    if args.no_functions:
        cfg.functions = False
    cfg.__post_init__()
    res = _run_sweep(args, cfg)
    path = _write(args.out or cfg.csv, res.to_csv(), "report.csv")
    if res.failures:
        raise NumericalFailure(f"{len(res.failures)} point(s) failed; see the log (report written to {path})")
    return path


def cmd_sweep(args):
    from .sweep import write_outputs

    if not args.config:
        raise ConfigError("sweep needs --config")
    cfg, _ = _config(args)
    res = _run_sweep(args, cfg)
    csv_path = Path(args.out or cfg.csv or "report.csv")
    json_path = Path(args.json_out or cfg.json_out or csv_path.with_suffix(".json"))
    write_outputs(res, cfg, csv_path, json_path)
    if res.failures:
        raise NumericalFailure(f"{len(res.failures)} point(s) failed; reports written")
    return csv_path


def cmd_wkb(args):
    from .cell import solve_cell
    from .wkb import AgmonProfile, build_quasimode, eigenvalue_jets, eikonal_residual

    cfg, _ = _config(args)
    w = dict(cfg.wkb)
    n = args.n if args.n is not None else w.get("n", 0)
    K = args.orders if args.orders is not None else w.get("orders", 5)
    J = args.jet_order or w.get("jet_order", 12)
    R = args.cutoff_R or w.get("cutoff_R")
    inner = w.get("cutoff_inner", 0.5)
    if n < 0 or not 0 <= K <= 8:
        raise ConfigError("need n >= 0 and 0 <= orders <= 8")
    cell = solve_cell(cfg.potential)
    ej = eigenvalue_jets(cell, n, K, J)
    ap = AgmonProfile(cell, n, J=J)
    X = np.linspace(-4.0, 4.0, args.samples)
    quasi = []
    for eps in args.epsilon:
        _check_eps_alpha(eps, 2.0)
        qm = build_quasimode(cell, eps, n, R=R, inner=inner, ablation=True, ap=ap, lambdas=ej.lambdas[:6]
                             if K >= 5 else None)
        quasi.append({"epsilon": eps, "R": qm.R, "lambda_app": qm.lam_app, "residual_ratio": qm.ratio,
                      "ablation_residual_ratio": qm.ablation_ratio, "truncated_mass": qm.truncated_mass,
                      "grid_points": int(qm.x.size)})
    blob = {"version": __version__, "n": n, "orders": K, "jet_order": J, "lambdas": list(ej.lambdas),
            "f_jets": {str(k): v for k, v in ej.f.items()}, "jet_valid": {str(k): v for k, v in ej.valid.items()},
            "X": X, "Phi": ap.phi(X), "f0": ap.f0(X), "eikonal_residual_max": float(np.max(np.abs(
                eikonal_residual(cell, X)))), "quasimodes": quasi}
    return _write(args.out, dumps_json(clean_floats(blob)), "wkb.json")


COMMANDS = {"cell": cmd_cell, "phase": cmd_phase, "solve": cmd_solve, "effective": cmd_effective,
            "compare": cmd_compare, "sweep": cmd_sweep, "wkb": cmd_wkb}


def _fail(code, kind, message, as_json):
    if as_json:
        sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    else:
        sys.stderr.write(f"oscillospec: {kind}: {message}\n")
    return code


_GRID_FLAGS = ("--grid", "--emit-grid", "--eps-grid")


def _glue_negative(argv):
    # "--grid -10:10:401" would otherwise read the value as an option
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _GRID_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
            continue
        out.append(argv[i])
        i += 1
    return out


def main(argv=None) -> int:
    argv = _glue_negative(sys.argv[1:] if argv is None else list(argv))
    as_json = "--json-errors" in argv
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail(EXIT_CONFIG, "usage", str(exc), as_json)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .oscillatory import AliasingError, EigenSolverError
    from .wkb import JetOrderError, MinimumError

    try:
        path = COMMANDS[args.command](args)
    except (ConfigError, AliasingError) as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), as_json)
    except (NumericalFailure, EigenSolverError, JetOrderError, MinimumError, FloatingPointError,
            np.linalg.LinAlgError, MemoryError) as exc:
        return _fail(EXIT_NUMERIC, "numerical", str(exc), as_json)
    except ValueError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), as_json)
    if args.verbose:
        log.info("wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
