"""Command line entry point: energy sweeps, bound verification and the point-interaction demo.

Usage::

    rsbounds sweep-gamma --config run.json [--seed N] [--threads N] [--quiet]

The config is a JSON object; see README.md for the keys.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import ensemble as ens
from . import verify as ver
from .kronig_penney import (KronigPenneyScatterer, kp_beta_plus_published, kp_beta_plus_scalar_formula,
                            kp_ensemble_ab, kp_ensemble_ab_published)
from .montecarlo import lyapunov_mc, spectral_shift_mc
from .potential import FormalDelta, from_config as potential_from_config
from .scattering import DEFAULT_STEPS, GridScatterer, UnwrapError

log = logging.getLogger("rsbounds")

COMMANDS = ("sweep-gamma", "sweep-ids", "verify", "kp-demo")
GAMMA_COLUMNS = ["E", "gamma_mc", "gamma_stderr", "gamma_tilde", "beta_plus", "beta_minus"]
IDS_COLUMNS = ["E", "xi_mc", "xi_stderr", "xi_single_mean", "r", "r_pointwise",
               "N_mc", "N_lower", "N_upper", "N_free"]
KP_COLUMNS = ["E", "a", "abs_b", "beta_plus", "gamma_tilde", "a_ensemble", "abs_b_ensemble",
              "beta_plus_scalar_b", "a_printed", "abs_b_printed", "beta_plus_printed",
              "gamma_tilde_printed"]
THOULESS_COLUMNS = ["E_check", "gamma", "integral", "tail", "rhs", "residual", "tolerance", "passed"]

DEFAULT_TOLERANCES = {"sigmas": 3.0, "thouless": 0.1, "E_min": 1e-4}

EXIT_OK, EXIT_CHECK_FAILED, EXIT_BAD_CONFIG, EXIT_UNWRAP = 0, 1, 2, 3


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class RunConfig:
    raw: dict
    potential: object
    kappa: object
    energies: np.ndarray
    n: int
    realizations: int
    n_xi: int
    realizations_xi: int
    seed: int
    out_dir: Path
    prefix: str
    tolerances: dict
    steps: int = DEFAULT_STEPS
    thouless: dict | None = None
    scatterer: object = field(default=None, repr=False)


def _section(cfg, key) -> dict:
    v = cfg.get(key)
    if not isinstance(v, dict):
        raise ConfigError(key, "missing or not an object")
    return v


def _int(d, key, path, default=None, lo=None):
    v = d.get(key, default)
    if v is None:
        raise ConfigError(path, "missing")
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(path, f"must be at least {lo}")
    return v


def _float(d, key, path, default=None):
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    if not np.isfinite(v):
        raise ConfigError(path, "must be finite")
    return float(v)


def _energies(cfg, e_min_guard) -> np.ndarray:
    e = _section(cfg, "energies")
    if "values" in e:
        vals = e["values"]
        if not isinstance(vals, list) or not vals:
            raise ConfigError("energies.values", "expected a nonempty list")
        E = np.array([_float({"v": v}, "v", "energies.values") for v in vals])
    else:
        lo = _float(e, "min", "energies.min")
        hi = _float(e, "max", "energies.max")
        count = _int(e, "count", "energies.count", lo=1)
        spacing = e.get("spacing", "log")
        if spacing not in ("linear", "log"):
            raise ConfigError("energies.spacing", "must be 'linear' or 'log'")
        if hi < lo or (count > 1 and hi == lo):
            raise ConfigError("energies.max", "must exceed energies.min")
        if lo <= 0:
            raise ConfigError("energies.min", "energies must be positive")
        E = np.geomspace(lo, hi, count) if spacing == "log" else np.linspace(lo, hi, count)
    if np.any(E < e_min_guard):
        raise ConfigError("energies", f"energies below E_min={e_min_guard!r}")
    if np.unique(E).size != E.size:
        raise ConfigError("energies", "energies must be distinct")
    return E


def parse_config(cfg: dict, seed: int | None = None) -> RunConfig:
    if not isinstance(cfg, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    try:
        potential = potential_from_config(_section(cfg, "potential"))
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("potential", str(exc)) from exc

    kcfg = _section(cfg, "kappa")
    try:
        kappa = ens.kappa_from_config(kcfg)
    except (KeyError, TypeError, ValueError) as exc:
        key = "kappa.atoms" if kcfg.get("type") == "discrete" else "kappa"
        if kcfg.get("type") not in ("discrete", "uniform", "triangular"):
            key = "kappa.type"
        raise ConfigError(key, str(exc)) from exc

    tol = dict(DEFAULT_TOLERANCES)
    tcfg = cfg.get("tolerances", {})
    if not isinstance(tcfg, dict):
        raise ConfigError("tolerances", "not an object")
    for k in tcfg:
        tol[k] = _float(tcfg, k, f"tolerances.{k}")
    E = _energies(cfg, tol["E_min"])

    mc = _section(cfg, "mc")
    n = _int(mc, "n", "mc.n", lo=1)
    realizations = _int(mc, "realizations", "mc.realizations", lo=2)
    if seed is None:
        seed = _int(mc, "seed", "mc.seed", lo=0)
    if not 0 <= seed < 2**64:
        raise ConfigError("mc.seed", "must fit in an unsigned 64-bit integer")

    out = _section(cfg, "output")
    out_dir, prefix = out.get("dir"), out.get("prefix", "run")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("output.dir", "expected a path")
    if not isinstance(prefix, str) or not prefix or os.sep in prefix:
        raise ConfigError("output.prefix", "expected a plain file name prefix")

    steps = _int(cfg, "steps", "steps", DEFAULT_STEPS, lo=8)
    thouless = cfg.get("thouless")
    if thouless is not None and not isinstance(thouless, dict):
        raise ConfigError("thouless", "not an object")

    run = RunConfig(cfg, potential, kappa, E, n, realizations,
                    _int(mc, "n_xi", "mc.n_xi", 64, lo=1),
                    _int(mc, "realizations_xi", "mc.realizations_xi", 100, lo=2),
                    seed, Path(out_dir), prefix, tol, steps, thouless)
    run.scatterer = (KronigPenneyScatterer() if isinstance(potential, FormalDelta)
                     else GridScatterer(potential, steps))
    return run


# -- output ---------------------------------------------------------------------

def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _manifest(run: RunConfig, command: str, threads: int, outputs: list[str], status: int) -> str:
    return json.dumps({
        "command": command,
        "seed": run.seed,
        "threads": threads,
        "exit_code": status,
        "outputs": outputs,
        "versions": {"rsbounds": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "config": run.raw,
    }, indent=2, sort_keys=True) + "\n"


# -- subcommands -----------------------------------------------------------------

def sweep_gamma(run: RunConfig, workers: int) -> list[dict]:
    rows = []
    for e in run.energies:
        est = lyapunov_mc(run.kappa, run.scatterer, float(e), run.n, run.realizations, run.seed, workers)
        m = ens.ensemble_matrices(run.kappa, run.scatterer, float(e))
        rows.append({"E": float(e), "gamma_mc": est.mean, "gamma_stderr": est.stderr,
                     "gamma_tilde": m.gamma_tilde, "beta_plus": m.beta_plus, "beta_minus": m.beta_minus})
        log.info("E=%g gamma=%.6g +- %.2g bound=%.6g", e, est.mean, est.stderr, m.gamma_tilde)
    return rows


def sweep_ids(run: RunConfig, workers: int) -> list[dict]:
    order = np.argsort(run.energies)
    est = spectral_shift_mc(run.kappa, run.scatterer, run.energies[order], run.n_xi,
                            run.realizations_xi, run.seed, workers)
    by_index = dict(zip(order.tolist(), est))
    rows = []
    for i, e in enumerate(run.energies):
        env = ens.ids_envelope(run.kappa, run.scatterer, float(e))
        x = by_index[i]
        rows.append({"E": float(e), "xi_mc": x.mean, "xi_stderr": x.stderr, "xi_single_mean": env.xi_mean,
                     "r": env.r, "r_pointwise": env.r_pointwise, "N_mc": env.N_free - x.mean,
                     "N_lower": env.N_lower, "N_upper": env.N_upper, "N_free": env.N_free})
    return rows


def kp_demo(run: RunConfig) -> list[dict]:
    rows = []
    for e in run.energies:
        e = float(e)
        a, b = kp_ensemble_ab(run.kappa, e)
        m = ens.ensemble_matrices(run.kappa, run.scatterer, e)
        ap, bp = kp_ensemble_ab_published(run.kappa, e)
        bpp = kp_beta_plus_published(run.kappa, e)
        rows.append({"E": e, "a": a, "abs_b": abs(b), "beta_plus": a + abs(b),
                     "gamma_tilde": 0.5 * float(np.log(a + abs(b))),
                     "a_ensemble": m.a, "abs_b_ensemble": abs(m.b),
                     "beta_plus_scalar_b": kp_beta_plus_scalar_formula(run.kappa, e),
                     "a_printed": ap, "abs_b_printed": abs(bp), "beta_plus_printed": bpp,
                     "gamma_tilde_printed": 0.5 * float(np.log(bpp))})
    return rows


def _thouless_row(run: RunConfig, workers: int) -> dict:
    t = run.thouless
    e_check = _float(t, "E_check", "thouless.E_check", 2.0)
    grid = ver.thouless_grid(e_check, _float(t, "k_step", "thouless.k_step", 0.004),
                             _float(t, "k_max", "thouless.k_max", 60.0))
    terms = ver.thouless_terms(run.kappa, run.scatterer, e_check, grid,
                               n=_int(t, "n", "thouless.n", 1000, lo=1),
                               n_realizations=_int(t, "realizations", "thouless.realizations", 2, lo=2),
                               master_seed=run.seed, workers=workers)
    tol = run.tolerances["thouless"]
    return {"E_check": e_check, "gamma": terms.gamma, "integral": terms.integral, "tail": terms.tail,
            "rhs": terms.rhs, "residual": terms.residual, "tolerance": tol,
            "passed": bool(terms.residual <= tol)}


def _print_table(rows, columns, out=sys.stdout):
    print("  ".join(f"{c:>12}" for c in columns), file=out)
    for r in rows:
        cells = []
        for c in columns:
            v = r[c]
            cells.append(f"{('PASS' if v else 'FAIL'):>12}" if isinstance(v, bool) else f"{v:>12.6g}")
        print("  ".join(cells), file=out)


def execute(run: RunConfig, command: str, workers: int = 1, quiet: bool = False) -> tuple[int, list[str]]:
    """Run one subcommand and write its CSV files.  Returns (exit code, file names)."""
    base = run.out_dir / run.prefix
    written = []

    def emit(suffix, rows, columns):
        path = Path(f"{base}_{suffix}.csv")
        write_atomic(path, ver.rows_to_csv(rows, columns))
        written.append(path.name)

    status = EXIT_OK
    if command == "sweep-gamma":
        emit("gamma", sweep_gamma(run, workers), GAMMA_COLUMNS)
    elif command == "sweep-ids":
        emit("ids", sweep_ids(run, workers), IDS_COLUMNS)
    elif command == "kp-demo":
        if not isinstance(run.potential, FormalDelta):
            raise ConfigError("potential.type", "kp-demo needs the point interaction ('delta')")
        rows = kp_demo(run)
        emit("kp_demo", rows, KP_COLUMNS)
        if not quiet:
            _print_table(rows, ["E", "a", "abs_b", "beta_plus", "a_printed", "abs_b_printed",
                                "beta_plus_printed"])
    elif command == "verify":
        params = ver.MCParams(run.n, run.realizations, run.n_xi, run.realizations_xi, run.seed,
                              workers, run.tolerances["sigmas"])
        rows = ver.bound_report(run.kappa, run.scatterer, run.energies, params)
        dict_rows = [dict(vars(r)) for r in rows]
        columns = list(dict_rows[0])
        emit("verify", dict_rows, columns)
        ok = all(r.passed for r in rows)
        if not quiet:
            _print_table(dict_rows, ["E", "gamma_mc", "gamma_tilde", "gamma_pass", "xi_mc", "r",
                                     "xi_pass", "N_pass"])
        if run.thouless is not None:
            trow = _thouless_row(run, workers)
            emit("thouless", [trow], THOULESS_COLUMNS)
            ok = ok and trow["passed"]
            if not quiet:
                _print_table([trow], THOULESS_COLUMNS)
        status = EXIT_OK if ok else EXIT_CHECK_FAILED
    else:
        raise ValueError(f"unknown command {command!r}")
    return status, written


def run(config_path, command: str, seed: int | None = None, threads: int = 1, quiet: bool = False) -> int:
    """Load, validate and execute; returns the process exit code."""
    try:
        with open(config_path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        log.error("config: %s", exc)
        return EXIT_BAD_CONFIG
    try:
        cfg = parse_config(raw, seed)
        status, written = execute(cfg, command, threads, quiet)
    except ConfigError as exc:
        log.error("invalid config key %s", exc)
        return EXIT_BAD_CONFIG
    except UnwrapError as exc:
        log.error("phase unwrapping failed: %s", exc)
        return EXIT_UNWRAP
    manifest = cfg.out_dir / f"{cfg.prefix}_{command.replace('-', '_')}_manifest.json"
    write_atomic(manifest, _manifest(cfg, command, threads, written, status))
    if status != EXIT_OK:
        log.error("bound check failed")
    return status


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="rsbounds", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--seed", type=int, default=None, help="master seed, overrides mc.seed")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for Monte Carlo")
    ap.add_argument("--quiet", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    if args.threads < 1:
        ap.error("--threads must be positive")
    return run(args.config, args.command, args.seed, args.threads, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
