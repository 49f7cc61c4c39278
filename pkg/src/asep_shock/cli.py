"""Command-line front end.

Every subcommand takes its parameters from an optional flat ``key=value``
config file (``--config``) overridden by flags, writes CSV output plus a
``manifest.json`` echoing the resolved configuration, and exits with 0 on
success, 2 on a tolerance failure and 1 on a usage error.

A manifest can be passed back through ``--config`` to reproduce a run.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .errors import AsepShockError

EXIT_OK, EXIT_USAGE, EXIT_TOLERANCE = 0, 1, 2
WORKERS_ENV = "ASEP_SHOCK_WORKERS"


class UsageError(Exception):
    pass


def _floats(text):
    text = str(text).strip()
    return tuple(float(v) for v in text.split(",") if v.strip()) if text else ()


def _ints(text):
    text = str(text).strip()
    return tuple(int(v) for v in text.split(",") if v.strip()) if text else ()


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _fmt(v):
    return f"{v:.17e}"


# name -> (parser, default, help)
COMMON = {
    "output_dir": (str, "out", "directory for CSV and manifest output"),
    "workers": (int, None, f"worker count (default from ${WORKERS_ENV}, else 1)"),
}

COMMANDS = {
    "exact": ("stationary table and density profile from the exact solver", {
        "n": (int, 4, "number of sites (<= 14)"),
        "alpha": (float, 1.0, "entry rate at site 1"),
        "beta": (float, 1.0, "exit rate at site n"),
        "gamma": (float, 0.0, "exit rate at site 1"),
        "delta": (float, 0.0, "entry rate at site n"),
        "q": (float, 0.0, "left hop rate"),
    }),
    "mpa-check": ("Askey-Wilson integrals vs the exact height Laplace transform", {
        "A": (float, 0.5, ""), "B": (float, -0.2, ""), "C": (float, 0.5, ""), "D": (float, -0.2, ""),
        "q": (float, 0.3, ""),
        "n_min": (int, 2, ""), "n_max": (int, 8, ""),
        "times": (_floats, (0.5, 0.8, 1.0), "integration times, one per block (x_k = k/d)"),
        "tol": (float, 1e-7, "absolute tolerance"),
    }),
    "zn": ("Z_n along a scaling sequence (or at fixed A, C)", {
        "mode": (str, "scaling", "scaling | direct"),
        "a": (float, 0.5, "scaling limit of sqrt(n)(1 - A_n)"),
        "c": (float, -1.0, "scaling limit of sqrt(n)(1 - C_n)"),
        "A": (float, 1.5, "direct mode"), "C": (float, 1.5, "direct mode"),
        "B": (float, -0.2, ""), "D": (float, -0.1, ""), "q": (float, 0.3, ""),
        "n_list": (_ints, (100, 1000, 10000), ""),
    }),
    "limit-laplace": ("psi and phi Laplace transforms of the limit process", {
        "a": (float, 0.5, ""), "c": (float, -1.0, ""),
        "x": (_floats, (1.0,), "observation points, last equal to 1"),
        "coeffs": (_floats, (1.0,), "Laplace coefficients"),
    }),
    "duality-check": ("residual of the duality identity", {
        "d": (int, 2, ""), "a": (float, 0.5, ""), "c": (float, -1.0, ""),
        "x": (_floats, (), "observation points; empty draws random instances"),
        "coeffs": (_floats, (), "coefficients; empty draws random instances"),
        "count": (int, 10, "number of random instances"),
        "seed": (int, 0, ""),
        "margin": (float, 0.05, "margin for random instances"),
        "method": (str, "quadrature", "quadrature | mc"),
        "tol": (float, 1e-3, "relative tolerance"),
    }),
    "eta-sample": ("importance-weighted sample of the limit process", {
        "a": (float, 0.5, ""), "c": (float, -1.0, ""),
        "m": (int, 256, "grid size, a power of two"),
        "N": (int, 10000, "number of paths"),
        "seed": (int, 0, ""),
        "max_paths": (int, 100, "paths written to CSV"),
    }),
    "simulate": ("Monte Carlo stationary samples of open ASEP", {
        "mode": (str, "scaling", "rates | scaling"),
        "alpha": (float, 1.0, ""), "beta": (float, 1.0, ""), "gamma": (float, 0.0, ""), "delta": (float, 0.0, ""),
        "a": (float, 0.5, ""), "c": (float, -1.0, ""), "B": (float, 0.0, ""), "D": (float, 0.0, ""),
        "q": (float, 0.0, ""),
        "n": (int, 50, ""),
        "samples": (int, 10240, ""),
        "burn_in": (int, 0, "clock ticks; 0 selects 20 n^2"),
        "thin": (int, 0, "clock ticks; 0 selects 5 n"),
        "replicas": (int, 16, ""),
        "seed": (int, 0, ""),
        "x": (_floats, (1.0,), ""), "coeffs": (_floats, (1.0,), ""),
        "dump": (_bool, False, "write every configuration"),
    }),
    "convergence": ("Monte Carlo vs finite-n quadrature vs limit along n", {
        "a": (float, 0.5, ""), "c": (float, -1.0, ""), "B": (float, 0.0, ""), "D": (float, 0.0, ""),
        "q": (float, 0.0, ""),
        "n_list": (_ints, (50, 200, 800), ""),
        "x": (_floats, (1.0,), ""), "coeffs": (_floats, (1.0,), ""),
        "budget": (int, 10240, "samples per n"),
        "replicas": (int, 64, ""),
        "seed": (int, 0, ""),
        "k": (float, 3.0, "standard errors allowed for the final gap"),
    }),
    "selftest": ("run the acceptance suite", {
        "skip": (_ints, (), "criterion numbers to skip"),
    }),
}


def _parser():
    p = _Parser(prog="asep-shock", description="Open ASEP shock-region numerical laboratory.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (desc, spec) in COMMANDS.items():
        sp = sub.add_parser(name, help=desc, description=desc)
        sp.add_argument("--config", help="key=value file or a manifest.json from a previous run")
        for key, (_, default, hlp) in {**COMMON, **spec}.items():
            sp.add_argument("--" + key.replace("_", "-"), dest=key, default=None,
                            help=f"{hlp} (default: {default})".strip())
    return p


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def read_config(path, command):
    """Parse a key=value file or a JSON manifest into raw string values."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        if data.get("command") != command:
            raise UsageError(f"manifest is for command {data.get('command')!r}, not {command!r}")
        out = {}
        for k, v in data["config"].items():
            out[k] = ",".join(map(str, v)) if isinstance(v, list) else ("" if v is None else str(v))
        return out
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def resolve(command, ns) -> dict:
    """Defaults, then config file, then flags."""
    spec = {**COMMON, **COMMANDS[command][1]}
    raw = {}
    if ns.config:
        raw.update(read_config(ns.config, command))
    unknown = sorted(set(raw) - set(spec))
    if unknown:
        raise UsageError(f"unknown config key(s) for {command}: {', '.join(unknown)}")
    for k in spec:
        v = getattr(ns, k, None)
        if v is not None:
            raw[k] = v
    cfg = {}
    for k, (conv, default, _) in spec.items():
        if k in raw and raw[k] != "":
            try:
                cfg[k] = conv(raw[k])
            except ValueError as exc:
                raise UsageError(f"bad value for {k}: {raw[k]!r} ({exc})") from None
        else:
            cfg[k] = default
    if cfg["workers"] is None:
        cfg["workers"] = int(os.environ.get(WORKERS_ENV, "1"))
    return cfg


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for r in rows:
            wr.writerow([_fmt(v) if isinstance(v, float) else v for v in r])


# ---------------------------------------------------------------------------
# commands; each returns (exit code, output files, summary dict)

def cmd_exact(cfg, out):
    from . import asep_exact as ex
    from .params import RateParams

    r = RateParams(cfg["alpha"], cfg["beta"], cfg["gamma"], cfg["delta"], cfg["q"])
    st = ex.solve(r, cfg["n"])
    st.to_csv(out / "stationary.csv")
    _write_csv(out / "profile.csv", ["site", "density"],
               [(i + 1, float(v)) for i, v in enumerate(st.density_profile())])
    for b, p in st.as_dict().items():
        print(f"{b} {p:.17e}")
    return EXIT_OK, ["stationary.csv", "profile.csv"], {"residual": st.residual}


def cmd_mpa_check(cfg, out):
    from . import asep_exact as ex
    from . import prelimit as pl
    from .params import BoundaryParams

    bp = BoundaryParams(cfg["A"], cfg["B"], cfg["C"], cfg["D"], cfg["q"])
    times = cfg["times"]
    if not times:
        raise UsageError("times must be non-empty")
    d = len(times)
    x = [(k + 1) / d for k in range(d)]
    rows, bad = [], []
    for n in range(cfg["n_min"], cfg["n_max"] + 1):
        st = ex.solve(bp, n)
        req = pl.request_from_times(times, x, n)
        quad = pl.laplace_ratio(req, bp, n)
        exact = ex.height_laplace(st, x, req.c)
        err = abs(quad - exact)
        rows.append((n, d, " ".join(_fmt(t) for t in times), float(quad), float(exact), float(err)))
        if not err < cfg["tol"]:
            bad.append(n)
    _write_csv(out / "mpa_check.csv", ["n", "d", "times", "quadrature", "exact", "abs_err"], rows)
    for n in bad:
        print(f"tolerance failure: n={n} |quadrature - exact| exceeds {cfg['tol']:g}", file=sys.stderr)
    return (EXIT_TOLERANCE if bad else EXIT_OK), ["mpa_check.csv"], {"max_abs_err": max(r[-1] for r in rows)}


def cmd_zn(cfg, out):
    from . import prelimit as pl
    from .params import BoundaryParams, ScalingLimitParams, scaling_sequence
    from .specfun import calH

    rows = []
    if cfg["mode"] == "scaling":
        s = ScalingLimitParams(cfg["a"], cfg["c"], cfg["B"], cfg["D"], cfg["q"])
        lim = calH(cfg["a"] / math.sqrt(2), cfg["c"] / math.sqrt(2))
        for n in cfg["n_list"]:
            z = pl.z_n(scaling_sequence(s, n).params, n)
            rows.append((n, float(z), float(lim), float(abs(z - lim))))
    elif cfg["mode"] == "direct":
        bp = BoundaryParams(cfg["A"], cfg["B"], cfg["C"], cfg["D"], cfg["q"])
        for n in cfg["n_list"]:
            rows.append((n, float(pl.z_n(bp, n)), float("nan"), float("nan")))
    else:
        raise UsageError("mode must be 'scaling' or 'direct'")
    _write_csv(out / "zn.csv", ["n", "zn", "limit", "abs_err"], rows)
    return EXIT_OK, ["zn.csv"], {}


def cmd_limit_laplace(cfg, out):
    from .limit_process import LimitLawParams, eta_laplace, limit_height_laplace

    lp = LimitLawParams(cfg["a"], cfg["c"])
    x, c = cfg["x"], cfg["coeffs"]
    psi = eta_laplace(lp, x, c)
    phi = limit_height_laplace(lp, x, c)
    d = len(x)
    _write_csv(out / "limit_laplace.csv",
               [*[f"x_{i + 1}" for i in range(d)], *[f"c_{i + 1}" for i in range(d)], "psi", "phi"],
               [(*map(float, x), *map(float, c), psi, phi)])
    return EXIT_OK, ["limit_laplace.csv"], {"psi": psi, "phi": phi}


def cmd_duality_check(cfg, out):
    from . import duality as du

    if cfg["x"] or cfg["coeffs"]:
        insts = [du.DualityInstance(cfg["a"], cfg["c"], cfg["x"], cfg["coeffs"])]
    else:
        rng = np.random.default_rng(cfg["seed"])
        insts = [du.random_instance(rng, cfg["d"], cfg["margin"]) for _ in range(cfg["count"])]
    rows = [(inst, du.duality_residual(inst, method=cfg["method"], seed=cfg["seed"])) for inst in insts]
    du.write_report(out / "duality.csv", rows)
    bad = [i for i, (_, r) in enumerate(rows) if not r.rel_gap < cfg["tol"]]
    for i in bad:
        inst, r = rows[i]
        print(f"tolerance failure: instance {i} a={inst.a_lim} c={inst.c_lim} x={inst.x} coeffs={inst.c} "
              f"rel_gap={r.rel_gap:.3e}", file=sys.stderr)
    worst = max(r.rel_gap for _, r in rows)
    print(f"{len(rows)} instances, max rel_gap {worst:.3e}")
    return (EXIT_TOLERANCE if bad else EXIT_OK), ["duality.csv"], {"max_rel_gap": worst}


def cmd_eta_sample(cfg, out):
    from .limit_process import LimitLawParams, eta_sample

    ens = eta_sample(LimitLawParams(cfg["a"], cfg["c"]), m=cfg["m"], N=cfg["N"], seed=cfg["seed"])
    ens.to_csv(out / "ensemble.csv", max_paths=cfg["max_paths"])
    mean, se = ens.normalizer_estimate()
    return EXIT_OK, ["ensemble.csv"], {"ess": ens.ess, "normalizer": mean, "normalizer_se": se}


def _rates(cfg):
    from .params import RateParams, ScalingLimitParams, boundary_to_rates, scaling_sequence

    if cfg["mode"] == "rates":
        return RateParams(cfg["alpha"], cfg["beta"], cfg["gamma"], cfg["delta"], cfg["q"])
    if cfg["mode"] == "scaling":
        s = ScalingLimitParams(cfg["a"], cfg["c"], cfg["B"], cfg["D"], cfg["q"])
        return boundary_to_rates(scaling_sequence(s, cfg["n"]).params)
    raise UsageError("mode must be 'rates' or 'scaling'")


def cmd_simulate(cfg, out):
    from .asep_mc import SimulationPlan, empirical_height_laplace, simulate

    n = cfg["n"]
    plan = SimulationPlan(_rates(cfg), n, burn_in_events=cfg["burn_in"] or None, samples=cfg["samples"],
                          thin_events=cfg["thin"] or None, seed=cfg["seed"], replicas=cfg["replicas"])
    ss = simulate(plan, cfg["workers"])
    x, c = cfg["x"], cfg["coeffs"]
    est, se = empirical_height_laplace(ss, x, c)
    d = len(x)
    _write_csv(out / "laplace.csv",
               ["n", *[f"x_{i + 1}" for i in range(d)], *[f"c_{i + 1}" for i in range(d)], "empirical", "stderr"],
               [(n, *map(float, x), *map(float, c), est, se)])
    _write_csv(out / "profile.csv", ["site", "density"],
               [(i + 1, float(v)) for i, v in enumerate(ss.density_profile())])
    files = ["laplace.csv", "profile.csv"]
    if cfg["dump"]:
        ss.to_csv(out / "configs.csv")
        files.append("configs.csv")
    return EXIT_OK, files, {"empirical": est, "stderr": se, "events": ss.event_counts}


def cmd_convergence(cfg, out):
    from .asep_mc import convergence_experiment
    from .params import ScalingLimitParams

    s = ScalingLimitParams(cfg["a"], cfg["c"], cfg["B"], cfg["D"], cfg["q"])
    tab = convergence_experiment(s, cfg["n_list"], cfg["x"], cfg["coeffs"], budget=cfg["budget"],
                                 seed=cfg["seed"], replicas=cfg["replicas"], workers=cfg["workers"])
    tab.to_csv(out / "convergence.csv")
    ok = tab.final_within(cfg["k"])
    if not ok:
        last = tab.rows[-1]
        print(f"tolerance failure: n={last.n} gap {last.gap:.3e} exceeds {cfg['k']:g} SE ({last.stderr:.3e})",
              file=sys.stderr)
    summary = {"final_within": ok, "empirical_trend": tab.empirical_gaps_trend(cfg["k"]),
               "prelimit_decreasing": tab.prelimit_gaps_decreasing()}
    return (EXIT_OK if ok else EXIT_TOLERANCE), ["convergence.csv"], summary


def cmd_selftest(cfg, out):
    from .acceptance import run_all

    results = run_all(skip=cfg["skip"])
    _write_csv(out / "selftest.csv", ["criterion", "name", "passed", "seconds", "detail"],
               [(r.number, r.name, r.passed, float(r.seconds), r.detail) for r in results])
    ok = all(r.passed for r in results)
    return (EXIT_OK if ok else EXIT_TOLERANCE), ["selftest.csv"], {"passed": ok}


HANDLERS = {
    "exact": cmd_exact, "mpa-check": cmd_mpa_check, "zn": cmd_zn, "limit-laplace": cmd_limit_laplace,
    "duality-check": cmd_duality_check, "eta-sample": cmd_eta_sample, "simulate": cmd_simulate,
    "convergence": cmd_convergence, "selftest": cmd_selftest,
}


def _jsonable(v):
    if isinstance(v, tuple):
        return list(v)
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def main(argv=None) -> int:
    try:
        ns = _parser().parse_args(argv)
        cfg = resolve(ns.command, ns)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    try:
        code, files, summary = HANDLERS[ns.command](cfg, out)
    except (UsageError, AsepShockError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        code, files, summary = EXIT_USAGE, [], {"error": f"{type(exc).__name__}: {exc}"}
    manifest = {
        "command": ns.command,
        "config": {k: _jsonable(v) for k, v in cfg.items()},
        "outputs": files,
        "exit_code": code,
        "summary": {k: _jsonable(v) for k, v in summary.items()},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
