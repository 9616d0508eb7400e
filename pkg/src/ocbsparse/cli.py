"""Command-line recipes: ``ocb {tradeoff,entropy,asymptotics,image,solve,mc}``.

Every command reads an optional JSON config (``--config``); explicit flags
override its fields. Data files start with a comment line carrying the config
hash and seed, so re-running a stored config reproduces them byte for byte.
Exit codes: 0 success, 2 configuration error, 3 convergence failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import BudgetError, ConvergenceError, InputError, OCBError, ParameterError, ShapeError

log = logging.getLogger("ocbsparse")

# Fields that never change results and are left out of the config hash.
_UNHASHED = {"out", "threads", "report", "image_out", "input", "config"}

DEFAULTS = {
    "tradeoff": {
        "alpha": 0.5, "sigma_y2": 1.0, "rates": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
        "methods": ["naive", "l0_replica", "l1_replica", "l1ls_replica", "omp", "amp_ls"],
        "M_values": [50, 100, 150, 200, 250], "instances": 20, "seed": None,
        "out": "tradeoff", "threads": 1,
    },
    "entropy": {
        "alpha": 0.5, "sigma_y2": 1.0, "r": 0.4, "M_values": [15, 20, 25], "instances": 5,
        "T": 15, "mu_min": None, "mu_max": None, "steps": None, "exhaustive_max_M": 15,
        "replica": True, "seed": None, "out": "entropy", "threads": 1,
    },
    "asymptotics": {
        "r": 0.2, "sigma_y2": 1.0, "alphas": None, "slope_window": [1e-3, 1e-2],
        "out": "asymptotics", "threads": 1,
    },
    "image": {
        "input": None, "method": "omp", "r": 0.5, "alpha": 0.5, "lam": None, "seed": None,
        "image_out": None, "report": "image_report.json", "threads": 1,
    },
    "solve": {
        "M": 50, "alpha": 0.5, "sigma_y2": 1.0, "method": "omp", "r": 0.5, "lam": None,
        "seed": None, "out": "solve", "threads": 1,
    },
    "mc": {
        "M": 15, "alpha": 0.5, "sigma_y2": 1.0, "r": 0.4, "T": 15, "mu_min": None, "mu_max": None,
        "steps": None, "instance_seed": 0, "wham": True, "seed": None, "out": "mc", "threads": 1,
    },
}


# --------------------------------------------------------------------------- config

def config_hash(config) -> str:
    body = {k: v for k, v in config.items() if k not in _UNHASHED}
    text = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def resolve_config(command, args) -> dict:
    """Defaults, then the JSON config file, then explicit flags, then ``OCB_SEED``."""
    cfg = dict(DEFAULTS[command])
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise InputError("config must be a JSON object")
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise ParameterError(f"unknown config fields for {command}: {sorted(unknown)}")
        cfg.update(loaded)
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if "seed" in cfg and cfg["seed"] is None:
        env = os.environ.get("OCB_SEED")
        try:
            cfg["seed"] = int(env) if env is not None else 0
        except ValueError as exc:
            raise ParameterError(f"OCB_SEED must be an integer, got {env!r}") from exc
    return cfg


# --------------------------------------------------------------------------- output

def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if v is None:
        return "nan"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.12g}"


def write_csv(path, header, rows, cfg):
    lines = [f"# config_hash={config_hash(cfg)} seed={cfg.get('seed')} version={__version__}",
             ",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def write_json(path, payload, cfg):
    doc = {"config_hash": config_hash(cfg), "seed": cfg.get("seed"),
           "config": {k: v for k, v in cfg.items() if k not in _UNHASHED}, **payload}
    Path(path).write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")


def write_gnuplot(path, text):
    Path(path).write_text(text)


def _map(fn, items, threads):
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


# --------------------------------------------------------------------------- commands

REPLICA_METHODS = ("l0_replica", "l1_replica", "l1ls_replica")
SIM_METHODS = ("naive", "omp", "amp_ls")


def _replica_point(method, alpha, r, s2):
    from .replica import l0_zero_point, l1_from_rate, l1ls_from_rate
    if method == "l0_replica":
        return l0_zero_point(alpha, r, s2)[1]
    if method == "l1_replica":
        return l1_from_rate(alpha, r, s2).epsilon
    return l1ls_from_rate(alpha, r, s2)[1]


def cmd_tradeoff(cfg) -> dict:
    """(r, eps) table per method; simulated methods are extrapolated in ``1/M``."""
    from .experiments import simulate_ensemble
    from .replica import l1_from_rate
    from .stats import SizeSeries, extrapolate

    alpha, s2, seed, threads = cfg["alpha"], cfg["sigma_y2"], cfg["seed"], cfg["threads"]
    bad = set(cfg["methods"]) - set(REPLICA_METHODS + SIM_METHODS)
    if bad:
        raise ParameterError(f"unknown methods {sorted(bad)}")
    rows, summary = [], {}
    Ms = sorted(int(m) for m in cfg["M_values"])
    for method in cfg["methods"]:
        for r in cfg["rates"]:
            if method in REPLICA_METHODS:
                eps = _replica_point(method, alpha, r, s2)
                rows.append([method, r, r, "inf", eps, eps, eps])
                summary.setdefault(method, []).append({"r": r, "epsilon": eps})
                continue
            lam = l1_from_rate(alpha, r, s2).lam if method == "amp_ls" else None
            sim = "amp" if method == "amp_ls" else method
            key = "epsilon_ls" if method == "amp_ls" else "epsilon"
            samples, rates = [], []
            for M in Ms:
                res = simulate_ensemble(sim, M, alpha, s2, seed, cfg["instances"], r=r, lam=lam,
                                        threads=threads)
                samples.append(res[key])
                rates.append(float(np.median(res["rate"])))
            series = SizeSeries.from_samples(Ms, samples, quantity=key, seed=seed)
            for M, rm, med, lo, hi in zip(Ms, rates, series.medians, series.ci_lo, series.ci_hi):
                rows.append([method, r, rm, M, med, lo, hi])
            point = {"r": r, "rates_measured": rates}
            if len(Ms) >= 3:
                fit = extrapolate(series)
                rate_fit = extrapolate(np.array(Ms, dtype=float), "linear_invM", np.array(rates))
                half = 1.96 * fit.stderr
                rows.append([method, r, rate_fit.intercept, "inf", fit.intercept,
                             fit.intercept - half, fit.intercept + half])
                point.update(epsilon=fit.intercept, stderr=fit.stderr, rate=rate_fit.intercept)
            summary.setdefault(method, []).append(point)
    header = ["method", "r_target", "r", "M", "epsilon", "lo", "hi"]
    out = cfg["out"]
    write_csv(f"{out}.csv", header, rows, cfg)
    write_json(f"{out}.json", {"tradeoff": summary}, cfg)
    plots = " , \\\n     ".join(
        f"'{Path(out).name}.csv' using 3:(strcol(1) eq '{m}' && strcol(4) eq 'inf' ? $5 : 1/0) "
        f"with linespoints title '{m}'" for m in cfg["methods"])
    write_gnuplot(f"{out}.gp", "set datafile separator ','\nset key left top\n"
                  "set xlabel 'r'\nset ylabel 'epsilon'\n"
                  f"plot {plots}\n")
    return summary


def cmd_entropy(cfg) -> dict:
    """phi0(mu) per size from exhaustive search and exchange MC, with extrapolation and replica overlay."""
    from .core import generate_instance
    from .experiments import instance_seed
    from .mcmc import TemperatureLadder, multi_histogram_phi0, run_exchange_mc
    from .replica import entropy_curve_l0
    from .solvers import exhaustive_search
    from .stats import SizeSeries, bootstrap_median_ci, extrapolate

    alpha, s2, r, seed = cfg["alpha"], cfg["sigma_y2"], cfg["r"], cfg["seed"]
    if cfg["mu_min"] is not None and cfg["mu_max"] is not None:
        ladder = TemperatureLadder.geometric(cfg["mu_min"], cfg["mu_max"], cfg["T"])
    else:
        ladder = TemperatureLadder.default(r, cfg["T"])
    mus = ladder.mu_values
    rows, summary = [], {"mu": mus, "sizes": {}}
    Ms = sorted(int(m) for m in cfg["M_values"])
    mc_medians = []

    def one(args):
        M, i = args
        inst = generate_instance(M, alpha, s2, instance_seed(seed, M, i))
        out = {}
        if M <= cfg["exhaustive_max_M"]:
            _, hist = exhaustive_search(inst, r)
            out["exhaustive"] = hist.phi0(mus)
        run = run_exchange_mc(inst, r, ladder, cfg["steps"], instance_seed(seed, M, i, 1))
        out["mc"] = multi_histogram_phi0(run).phi0
        return out

    for M in Ms:
        res = _map(one, [(M, i) for i in range(cfg["instances"])], cfg["threads"])
        size = {}
        for source in ("exhaustive", "mc"):
            if source not in res[0]:
                continue
            P = np.array([x[source] for x in res])
            cis = [bootstrap_median_ci(P[:, j], seed=seed) for j in range(mus.size)]
            size[source] = [c[0] for c in cis]
            for mu, (med, lo, hi) in zip(mus, cis):
                rows.append([f"phi0_{source}", M, mu, med, lo, hi])
        if "exhaustive" in res[0]:
            diff = np.max(np.abs(np.array([x["mc"] - x["exhaustive"] for x in res])), axis=0)
            for j, mu in enumerate(mus):
                rows.append(["crosscheck_maxdiff", M, mu, diff[j], 0.0, diff[j]])
            size["crosscheck_maxdiff"] = float(diff.max())
        mc_medians.append(np.array([x["mc"] for x in res]))
        summary["sizes"][str(M)] = size
    if len(Ms) >= 3:
        ext = []
        for j, mu in enumerate(mus):
            series = SizeSeries.from_samples(Ms, [P[:, j] for P in mc_medians], seed=seed)
            fit = extrapolate(series)
            half = 1.96 * fit.stderr
            rows.append(["phi0_extrapolated", "inf", mu, fit.intercept,
                         fit.intercept - half, fit.intercept + half])
            ext.append(fit.intercept)
        summary["extrapolated"] = ext
    if cfg["replica"]:
        curve = entropy_curve_l0(alpha, r, s2, mus)
        for mu, ph in zip(curve.mu_grid, curve.phi0_of_mu):
            rows.append(["phi0_replica", "inf", mu, ph, ph, ph])
        summary["replica"] = {"phi0": curve.phi0_of_mu, "mu0": curve.mu0, "epsilon0": curve.epsilon0}
    out = cfg["out"]
    write_csv(f"{out}.csv", ["quantity", "M", "mu", "value", "lo", "hi"], rows, cfg)
    write_json(f"{out}.json", summary, cfg)
    name = Path(out).name
    write_gnuplot(f"{out}.gp", "set datafile separator ','\nset logscale x\n"
                  "set xlabel 'mu'\nset ylabel 'phi0'\n"
                  f"plot '{name}.csv' using 3:(strcol(1) eq 'phi0_mc' ? $4 : 1/0) title 'MC', \\\n"
                  f"     '{name}.csv' using 3:(strcol(1) eq 'phi0_replica' ? $4 : 1/0) with lines title 'replica'\n")
    return summary


def cmd_asymptotics(cfg) -> dict:
    from .replica import asymptotics_alpha_to_zero

    alphas = cfg["alphas"]
    if alphas is not None and len(alphas) == 0:
        raise InputError("empty alpha grid")
    rep = asymptotics_alpha_to_zero(cfg["r"], cfg["sigma_y2"], alphas,
                                    slope_window=tuple(cfg["slope_window"]))
    d = rep.to_dict()
    rows = [[a, e0, e1, els] for a, e0, e1, els in zip(rep.alphas, rep.eps0, rep.eps1, rep.eps1ls)]
    out = cfg["out"]
    write_csv(f"{out}.csv", ["alpha", "epsilon0", "epsilon1", "epsilon1_ls"], rows, cfg)
    write_json(f"{out}.json", {"report": d}, cfg)
    name = Path(out).name
    write_gnuplot(f"{out}.gp", "set datafile separator ','\nset logscale xy\n"
                  "set xlabel 'alpha'\nset ylabel 'epsilon'\n"
                  f"plot for [c=2:4] '{name}.csv' using 1:c with linespoints title columnhead(c)\n")
    return d


def cmd_image(cfg) -> dict:
    from .imagepipe import bundled_image, compress_image, read_pgm, write_pgm

    img = bundled_image() if cfg["input"] is None else read_pgm(cfg["input"])
    res = compress_image(img, cfg["method"], cfg["r"], cfg["alpha"], cfg["seed"], lam=cfg["lam"],
                         threads=cfg["threads"])
    if cfg["image_out"]:
        write_pgm(res.image, cfg["image_out"])
    be = res.block_epsilon
    payload = {"psnr": res.psnr if math.isfinite(res.psnr) else "inf", "elapsed": res.elapsed,
               "blocks": int(be.size),
               "block_epsilon": {"mean": be.mean(), "median": np.median(be), "min": be.min(),
                                 "max": be.max()}}
    write_json(cfg["report"], payload, cfg)
    return payload


def cmd_solve(cfg) -> dict:
    from .core import generate_instance, ls_refit
    from .solvers import amp, exhaustive_search, lasso_solve, omp

    inst = generate_instance(cfg["M"], cfg["alpha"], cfg["sigma_y2"], cfg["seed"])
    method = cfg["method"]
    extra = {}
    if method == "omp":
        sol = omp(inst, cfg["r"])
    elif method == "exhaustive":
        sol, hist = exhaustive_search(inst, cfg["r"])
        extra["supports"] = hist.total
    elif method in ("lasso", "lasso_ls", "amp", "amp_ls"):
        if cfg["lam"] is None:
            raise ParameterError(f"method {method} needs lam")
        if method.startswith("amp"):
            sol, state = amp(inst, cfg["lam"])
            extra["iterations"] = state.iterations
        else:
            sol, diag = lasso_solve(inst, cfg["lam"])
            extra["iterations"] = diag.iterations
        if method.endswith("_ls"):
            extra["epsilon_shrunk"] = sol.epsilon
            sol = ls_refit(inst, sol.support)
    else:
        raise ParameterError(f"unknown method {method!r}")
    payload = {"instance": inst.to_record(), "epsilon": sol.epsilon, "rate": sol.rate(inst.M),
               "support": [int(i) for i in sol.support.indices], **extra}
    out = cfg["out"]
    write_csv(f"{out}.csv", ["index", "x"], [[int(i), sol.x[i]] for i in sol.support.indices], cfg)
    write_json(f"{out}.json", payload, cfg)
    return payload


def cmd_mc(cfg) -> dict:
    from .core import generate_instance
    from .mcmc import TemperatureLadder, multi_histogram_phi0, run_exchange_mc

    inst = generate_instance(cfg["M"], cfg["alpha"], cfg["sigma_y2"], cfg["instance_seed"])
    if cfg["mu_min"] is not None and cfg["mu_max"] is not None:
        ladder = TemperatureLadder.geometric(cfg["mu_min"], cfg["mu_max"], cfg["T"])
    else:
        ladder = TemperatureLadder.default(cfg["r"], cfg["T"])
    run = run_exchange_mc(inst, cfg["r"], ladder, cfg["steps"], cfg["seed"])
    out = cfg["out"]
    S, T = run.energies.shape
    rows = [[run.burn_in + s + 1, t, run.energies[s, t]] for s in range(S) for t in range(T)]
    write_csv(f"{out}.csv", ["step", "temperature_index", "energy"], rows, cfg)
    payload = run.sidecar()
    if cfg["wham"]:
        w = multi_histogram_phi0(run)
        payload["wham"] = {"mu": w.mu_grid, "phi0": w.phi0, "epsilon": w.epsilon,
                           "entropy": w.entropy, "iterations": w.iterations}
    write_json(f"{out}.json", payload, cfg)
    return payload


COMMANDS = {"tradeoff": cmd_tradeoff, "entropy": cmd_entropy, "asymptotics": cmd_asymptotics,
            "image": cmd_image, "solve": cmd_solve, "mc": cmd_mc}


# --------------------------------------------------------------------------- parser

def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _strs(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ocb", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", help="JSON config; flags override its fields")
        sp.add_argument("--threads", type=int)
        if out:
            sp.add_argument("--out", help="output prefix (writes .csv/.json/.gp)")

    sp = sub.add_parser("tradeoff", help="distortion-rate table per method")
    common(sp)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--sigma-y2", dest="sigma_y2", type=float)
    sp.add_argument("--rates", type=_floats)
    sp.add_argument("--methods", type=_strs)
    sp.add_argument("--M-values", dest="M_values", type=_ints)
    sp.add_argument("--instances", type=int)
    sp.add_argument("--seed", type=int)

    sp = sub.add_parser("entropy", help="phi0(mu) from exhaustive search and exchange MC")
    common(sp)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--sigma-y2", dest="sigma_y2", type=float)
    sp.add_argument("--rate", dest="r", type=float)
    sp.add_argument("--M-values", dest="M_values", type=_ints)
    sp.add_argument("--instances", type=int)
    sp.add_argument("--T", type=int)
    sp.add_argument("--mu-min", dest="mu_min", type=float)
    sp.add_argument("--mu-max", dest="mu_max", type=float)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--exhaustive-max-M", dest="exhaustive_max_M", type=int)
    sp.add_argument("--seed", type=int)

    sp = sub.add_parser("asymptotics", help="small-alpha scaling report")
    common(sp)
    sp.add_argument("--rate", dest="r", type=float)
    sp.add_argument("--sigma-y2", dest="sigma_y2", type=float)
    sp.add_argument("--alphas", type=_floats)

    sp = sub.add_parser("image", help="block compression of a grayscale PGM")
    common(sp, out=False)
    sp.add_argument("--in", dest="input", help="8-bit P5 PGM; default is the bundled image")
    sp.add_argument("--method", choices=["omp", "amp_ls", "identity"])
    sp.add_argument("--rate", dest="r", type=float)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--lam", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", dest="image_out", help="reconstructed PGM")
    sp.add_argument("--report", help="JSON report path")

    sp = sub.add_parser("solve", help="solve one generated instance")
    common(sp)
    sp.add_argument("--M", type=int)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--sigma-y2", dest="sigma_y2", type=float)
    sp.add_argument("--method", choices=["omp", "exhaustive", "lasso", "lasso_ls", "amp", "amp_ls"])
    sp.add_argument("--rate", dest="r", type=float)
    sp.add_argument("--lam", type=float)
    sp.add_argument("--seed", type=int)

    sp = sub.add_parser("mc", help="raw exchange MC chains for one instance")
    common(sp)
    sp.add_argument("--M", type=int)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--sigma-y2", dest="sigma_y2", type=float)
    sp.add_argument("--rate", dest="r", type=float)
    sp.add_argument("--T", type=int)
    sp.add_argument("--mu-min", dest="mu_min", type=float)
    sp.add_argument("--mu-max", dest="mu_max", type=float)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--instance-seed", dest="instance_seed", type=int)
    sp.add_argument("--seed", type=int, help="MC seed")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args.command, args)
        threads = cfg.get("threads")
        cfg["threads"] = 1 if threads is None else int(threads)
        if cfg["threads"] < 1:
            raise ParameterError("threads must be >= 1")
        COMMANDS[args.command](cfg)
    except ConvergenceError as exc:
        print(f"ocb {args.command}: convergence failure: {exc}", file=sys.stderr)
        return 3
    except (ParameterError, ShapeError, BudgetError, ValueError, OSError) as exc:
        print(f"ocb {args.command}: configuration error: {exc}", file=sys.stderr)
        return 2
    except OCBError as exc:
        print(f"ocb {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
