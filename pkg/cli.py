"""Command-line entry point: simulate, tabulate, analyze and verify.

    python cli.py density --kind kerov --c-param 2 --grid -8:8:2001 --out rho_c2.csv
    python cli.py simulate-sde --n-dim 50 --beta 0.5 --samples 2000 --seed 7
    python cli.py analyze nnsd --input samples.csv --beta 0.5 --out nnsd.csv --ref surmise
    python cli.py verify --suite moments --c-param 1

Every output file gets a manifest next to it (<stem>.json) holding the
fully resolved configuration; `--config manifest.json` replays the run.
"""

import argparse
import json
import os
import re
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np
from dotenv import load_dotenv
from joblib import Parallel, delayed
from rich.console import Console

import density
import eigen_sde
import matrix_process
import spectral_stats
import verification
from errors import BetaEnsembleError, ConfigError, DomainError

load_dotenv()  # BETA_ENSEMBLES_* defaults may live in a .env file

console = Console(stderr=True)

VERSION = "0.1.0"

COMMON_DEFAULTS = {
    "seed": 0,
    "out_dir": ".",
    "replicas": 1,
    "n_jobs": 1,
    "format": "csv",
    "quiet": False,
}

DEFAULTS = {
    "simulate-sde": {
        "n_dim": 50,
        "mode": None,
        "beta": 1.0,
        "c_param": 0.0,
        "p": 0.5,
        "switch_rate": 100,
        "sigma": 1.0,
        "dt": 1e-3,
        "burn_in": 40.0,
        "stride": 1.0,
        "samples": 100,
        "out": "samples.csv",
    },
    "simulate-matrix": {
        "n_dim": 50,
        "p": 0.5,
        "switch_rate": 100,
        "sigma": 1.0,
        "dt": 1e-2,
        "burn_in": 40.0,
        "stride": 1.0,
        "samples": 100,
        "eig_method": "jacobi",
        "keep_vectors": False,
        "snapshot": None,
        "restart": None,
        "out": "matrix_samples.csv",
    },
    "density": {
        "kind": "kerov",
        "beta": None,
        "n_dim": None,
        "sigma": 1.0,
        "c_param": None,
        "grid": None,
        "out": "density.csv",
    },
    "analyze": {
        "analysis": None,
        "input": None,
        "beta": None,
        "sigma": 1.0,
        "bulk_fraction": 0.5,
        "bins": None,
        "range": None,
        "ref": "surmise",
        "out": None,
    },
    "verify": {
        "suite": "density",
        "c_param": 1.0,
        "out": None,
    },
}

ENV_VARS = {
    "out_dir": ("BETA_ENSEMBLES_OUT_DIR", str),
    "seed": ("BETA_ENSEMBLES_SEED", int),
    "replicas": ("BETA_ENSEMBLES_REPLICAS", int),
    "quiet": ("BETA_ENSEMBLES_QUIET", lambda v: v.strip().lower() in ("1", "true", "yes")),
}

ANALYSIS_OUTPUTS = {"nnsd": "nnsd.csv", "density": "density_fit.csv", "moments": "moments.csv"}


def parse_grid(text):
    """'lo:hi:count' -> evenly spaced array."""
    parts = str(text).split(":")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except (IndexError, ValueError):
        raise ConfigError("grid", f"expected lo:hi:count, got {text!r}") from None
    if len(parts) != 3 or count < 2 or not hi > lo:
        raise ConfigError("grid", f"expected lo:hi:count with lo < hi and count >= 2, got {text!r}")
    return np.linspace(lo, hi, count)


def parse_range(text):
    parts = str(text).split(":")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except (IndexError, ValueError):
        raise ConfigError("range", f"expected lo:hi, got {text!r}") from None
    if len(parts) != 2 or not hi > lo:
        raise ConfigError("range", f"expected lo:hi with lo < hi, got {text!r}")
    return lo, hi


_NEGATIVE_VALUE = re.compile(r"^-[\d.]")


def glue_negative_values(argv):
    """`--grid -8:8:2001` -> `--grid=-8:8:2001`; argparse would read -8:8:2001 as a flag."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok.startswith("--") and "=" not in tok and i + 1 < len(argv) and _NEGATIVE_VALUE.match(argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def _add_common(p):
    p.add_argument("--seed", type=int, help="master seed; all randomness flows from it")
    p.add_argument("--out", help="output file (relative paths land in --out-dir)")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--config", help="JSON config file or manifest to replay")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--replicas", type=int)
    p.add_argument("--n-jobs", dest="n_jobs", type=int)
    p.add_argument("--quiet", action="store_true", default=None)


def _add_dynamics(p, with_mode):
    p.add_argument("--n-dim", dest="n_dim", type=int)
    if with_mode:
        p.add_argument("--mode", choices=["fixed_beta", "crossover", "switched"])
        p.add_argument("--beta", type=float)
        p.add_argument("--c-param", dest="c_param", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--switch-rate", dest="switch_rate", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--burn-in", dest="burn_in", type=float)
    p.add_argument("--stride", type=float)
    p.add_argument("--samples", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="beta-ensembles", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate-sde", help="eigenvalue gas samples")
    _add_dynamics(p, with_mode=True)
    _add_common(p)

    p = sub.add_parser("simulate-matrix", help="switched matrix diffusion samples")
    _add_dynamics(p, with_mode=False)
    p.add_argument("--eig-method", dest="eig_method", choices=["jacobi", "lapack"])
    p.add_argument("--keep-vectors", dest="keep_vectors", action="store_true", default=None)
    p.add_argument("--snapshot", help="write the final matrix of replica 0 here")
    p.add_argument("--restart", help="start from a saved matrix snapshot")
    _add_common(p)

    p = sub.add_parser("density", help="tabulate a density model")
    p.add_argument("--kind", choices=["gaussian", "semicircle", "kerov", "corrected"])
    p.add_argument("--beta", type=float)
    p.add_argument("--n-dim", dest="n_dim", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--c-param", dest="c_param", type=float)
    p.add_argument("--grid", help="lo:hi:count")
    _add_common(p)

    p = sub.add_parser("analyze", help="statistics of a samples file")
    p.add_argument("analysis", choices=sorted(ANALYSIS_OUTPUTS))
    p.add_argument("--input")
    p.add_argument("--beta", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--bulk-fraction", dest="bulk_fraction", type=float)
    p.add_argument("--bins", type=int)
    p.add_argument("--range", help="lo:hi")
    p.add_argument("--ref", choices=["surmise", "none"])
    _add_common(p)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("--suite", choices=sorted(verification.SUITES) + ["all"])
    p.add_argument("--c-param", dest="c_param", type=float)
    _add_common(p)
    return parser


def _env_layer():
    layer = {}
    for key, (name, cast) in ENV_VARS.items():
        raw = os.getenv(name)
        if raw is None or raw == "":
            continue
        try:
            layer[key] = cast(raw)
        except ValueError:
            raise ConfigError(key, f"cannot parse {name}={raw!r}") from None
    return layer


def _file_layer(path, allowed):
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError("config", f"cannot read {path}: {e}") from None
    if isinstance(payload, dict) and isinstance(payload.get("config"), dict):
        payload = payload["config"]
    if not isinstance(payload, dict):
        raise ConfigError("config", "config file must hold a JSON object")
    layer = {}
    for key, value in payload.items():
        name = key.replace("-", "_")
        if name == "command":
            continue
        if name not in allowed:
            raise ConfigError(name, "unknown option in config file")
        layer[name] = value
    return layer


def resolve_config(args):
    """defaults < environment < --config file < explicit flags."""
    command = args.command
    resolved = dict(COMMON_DEFAULTS)
    resolved.update(DEFAULTS[command])
    explicit = set()

    resolved.update(_env_layer())
    if getattr(args, "config", None):
        layer = _file_layer(args.config, set(resolved))
        resolved.update(layer)
        explicit.update(layer)
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        resolved[key] = value
        explicit.add(key)

    if command == "simulate-sde" and resolved["mode"] is None:
        if "c_param" in explicit:
            resolved["mode"] = "crossover"
        elif "p" in explicit:
            resolved["mode"] = "switched"
        else:
            resolved["mode"] = "fixed_beta"
    if command == "analyze" and resolved["out"] is None:
        resolved["out"] = ANALYSIS_OUTPUTS[resolved["analysis"]]
    if resolved["replicas"] < 1:
        raise ConfigError("replicas", f"must be >= 1, got {resolved['replicas']}")
    return {"command": command, **resolved}


def _output_path(cfg):
    out = Path(cfg["out"])
    return out if out.is_absolute() else Path(cfg["out_dir"]) / out


def _manifest_path(out):
    path = out.with_suffix(".json")
    return path if path != out else out.with_suffix(".manifest.json")


def write_manifest(cfg, out, counters=None, statistics=None):
    manifest = {
        "version": VERSION,
        "command": cfg["command"],
        "config": {k: v for k, v in cfg.items() if k != "command"},
        "seed": cfg.get("seed"),
        "counters": counters or {},
    }
    if statistics:
        manifest["statistics"] = statistics
    path = _manifest_path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _write_samples(cfg, samples, out, counters):
    if cfg["format"] == "json":
        spectral_stats.write_samples_json(samples, out, metadata={"seed": cfg["seed"], "counters": counters})
    else:
        spectral_stats.write_samples_csv(samples, out)
    return write_manifest(cfg, out, counters=counters)


def cmd_simulate_sde(cfg):
    sde = eigen_sde.SdeConfig(
        n_dim=cfg["n_dim"],
        mode=cfg["mode"],
        beta=cfg["beta"],
        c=cfg["c_param"],
        p=cfg["p"],
        switch_rate=cfg["switch_rate"],
        sigma=cfg["sigma"],
        dt=cfg["dt"],
        burn_in=cfg["burn_in"],
        sample_stride=cfg["stride"],
        n_samples=cfg["samples"],
        seed=cfg["seed"],
    ).validate()
    console.print(f"🎲 simulating {sde.mode} gas, N={sde.n_dim}, {cfg['replicas']} replica(s)")
    counters = eigen_sde.StepCounters()
    samples = eigen_sde.simulate_replicas(
        sde, cfg["replicas"], n_jobs=cfg["n_jobs"], verbose=not cfg["quiet"], counters=counters
    )
    out = _output_path(cfg)
    manifest = _write_samples(cfg, samples, out, counters.as_dict())
    console.print(f"✅ {len(samples)} samples -> {out} (manifest {manifest})")
    return 0


def cmd_simulate_matrix(cfg):
    mc = matrix_process.MatrixConfig(
        n_dim=cfg["n_dim"],
        p=cfg["p"],
        switch_rate=cfg["switch_rate"],
        sigma=cfg["sigma"],
        dt=cfg["dt"],
        burn_in=cfg["burn_in"],
        sample_stride=cfg["stride"],
        n_samples=cfg["samples"],
        seed=cfg["seed"],
        eig_method=cfg["eig_method"],
        keep_vectors=bool(cfg["keep_vectors"]),
    ).validate()
    initial = matrix_process.load_snapshot(cfg["restart"]) if cfg["restart"] else None
    console.print(f"🎲 simulating switched matrices, N={mc.n_dim}, p={mc.p}, {cfg['replicas']} replica(s)")

    def one(r):
        return matrix_process.simulate_switched(
            replace(mc, replica=r), initial=initial, verbose=not cfg["quiet"]
        )

    runs = Parallel(n_jobs=cfg["n_jobs"], prefer="threads")(delayed(one)(r) for r in range(cfg["replicas"]))
    samples = [s for run in runs for s in run.samples]
    counters = {}
    for run in runs:
        for key, value in run.counters.items():
            counters[key] = counters.get(key, 0) + value

    out = _output_path(cfg)
    manifest = _write_samples(cfg, samples, out, counters)
    if cfg["snapshot"]:
        matrix_process.save_snapshot(runs[0].final_state, cfg["snapshot"])
    if mc.keep_vectors:
        vectors = np.array([s.vectors for run in runs for s in run.snapshots])
        np.save(out.with_suffix(".vectors.npy"), vectors)
    console.print(f"✅ {len(samples)} samples -> {out} (manifest {manifest})")
    return 0


def _density_model(cfg):
    try:
        return density.DensityModel(
            kind=cfg["kind"],
            beta=cfg["beta"],
            n_dim=cfg["n_dim"],
            sigma=cfg["sigma"],
            c=cfg["c_param"],
        )
    except DomainError as e:
        raise ConfigError("kind", str(e)) from None


def cmd_density(cfg):
    model = _density_model(cfg)
    grid = parse_grid(cfg["grid"]) if cfg["grid"] else None
    curve = density.tabulate(model, grid)
    out = _output_path(cfg)
    curve.to_csv(out)
    stats = {"integral": curve.integral(), "m2": curve.moment(2), "m4": curve.moment(4)}
    write_manifest(cfg, out, statistics=stats)
    console.print(f"📈 {model.kind} density, {len(curve.lambda_grid)} points, integral {stats['integral']:.8f} -> {out}")
    return 0


def _unfolding_model(beta, n_dim, sigma):
    if beta is None:
        return None
    if beta < 2:
        return density.DensityModel("corrected", beta=beta, n_dim=n_dim, sigma=sigma)
    return density.DensityModel("semicircle", beta=beta, n_dim=n_dim, sigma=sigma)


def _analyze_nnsd(cfg, samples, out):
    n_dim = samples[0].n_dim
    spacings = spectral_stats.nns(samples, cfg["bulk_fraction"], _unfolding_model(cfg["beta"], n_dim, cfg["sigma"]))
    hist = spectral_stats.spacing_histogram(spacings, bins=cfg["bins"] or 40)
    columns = [hist.lambda_grid, hist.values]
    header = "s,p_empirical"
    stats = dict(spacings.metadata())
    if cfg["ref"] == "surmise" and cfg["beta"]:
        columns.append(spectral_stats.wigner_surmise(cfg["beta"], hist.lambda_grid))
        header += ",p_reference"
        beta = cfg["beta"]
        stats["ks_surmise"] = spectral_stats.ks_distance(
            spacings.spacings, lambda s: spectral_stats.wigner_surmise_cdf(beta, s)
        )
    stats["small_s_exponent"] = spectral_stats.small_s_exponent(spacings)
    np.savetxt(out, np.column_stack(columns), delimiter=",", header=header, comments="", fmt="%.17g")
    return stats


def _analyze_density(cfg, samples, out):
    n_dim = samples[0].n_dim
    if cfg["beta"] is None:
        raise ConfigError("beta", "analyze density needs --beta")
    beta, sigma = cfg["beta"], cfg["sigma"]
    edge = density.semicircle_edge(beta, n_dim, sigma)
    lo, hi = parse_range(cfg["range"]) if cfg["range"] else (-1.3 * edge, 1.3 * edge)
    bins = cfg["bins"] or 100
    if bins < spectral_stats.MIN_HISTOGRAM_BINS:
        raise ConfigError("bins", f"must be >= {spectral_stats.MIN_HISTOGRAM_BINS}, got {bins}")
    hist = spectral_stats.histogram(samples, bins, (lo, hi))
    semi = density.DensityModel("semicircle", beta=beta, n_dim=n_dim, sigma=sigma)
    columns = [hist.lambda_grid, hist.values]
    header = "lambda,empirical"
    stats = {}
    pooled = np.concatenate([s.lambdas for s in samples])
    if beta < 2:
        corr = density.DensityModel("corrected", beta=beta, n_dim=n_dim, sigma=sigma)
        columns.append(corr.evaluate(hist.lambda_grid))
        header += ",corrected"
        stats["ks_corrected"] = spectral_stats.ks_distance(pooled, density.tabulate(corr).cdf())
    columns.append(semi.evaluate(hist.lambda_grid))
    header += ",semicircle"
    stats["ks_semicircle"] = spectral_stats.ks_distance(pooled, density.tabulate(semi).cdf())
    np.savetxt(out, np.column_stack(columns), delimiter=",", header=header, comments="", fmt="%.17g")
    return stats


def _analyze_moments(cfg, samples, out):
    n_dim = samples[0].n_dim
    model = _unfolding_model(cfg["beta"], n_dim, cfg["sigma"])
    reference = density.tabulate(model) if model is not None else None
    rows = []
    for k in (1, 2, 3, 4):
        est = spectral_stats.moment(samples, k)
        ref = reference.moment(k) if reference is not None else np.nan
        rows.append([k, est.value, est.stderr, ref])
    np.savetxt(out, np.array(rows), delimiter=",", header="k,value,stderr,reference", comments="", fmt="%.17g")
    return {f"m{int(r[0])}": {"value": r[1], "stderr": r[2]} for r in rows}


def cmd_analyze(cfg):
    if not cfg["input"]:
        raise ConfigError("input", "analyze needs --input")
    path = Path(cfg["input"])
    samples = spectral_stats.read_samples_json(path) if path.suffix == ".json" else spectral_stats.read_samples_csv(path)
    out = _output_path(cfg)
    out.parent.mkdir(parents=True, exist_ok=True)
    handler = {"nnsd": _analyze_nnsd, "density": _analyze_density, "moments": _analyze_moments}[cfg["analysis"]]
    console.print(f"🔍 {cfg['analysis']} over {len(samples)} samples from {path}")
    stats = handler(cfg, samples, out)
    write_manifest(cfg, out, statistics=stats)
    console.print(f"✅ {out}")
    return 0


def cmd_verify(cfg):
    names = sorted(verification.SUITES) if cfg["suite"] == "all" else [cfg["suite"]]
    all_passed = True
    report = {}
    for name in names:
        checks = verification.run_suite(name, c=cfg["c_param"], seed=cfg["seed"], verbose=not cfg["quiet"])
        console.print(verification.report_table(name, checks))
        all_passed &= all(ch.passed for ch in checks)
        report[name] = [asdict(ch) for ch in checks]
    if cfg["out"]:
        out = _output_path(cfg)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    console.print("✅ all checks passed" if all_passed else "❌ some checks failed")
    return 0 if all_passed else 1


COMMANDS = {
    "simulate-sde": cmd_simulate_sde,
    "simulate-matrix": cmd_simulate_matrix,
    "density": cmd_density,
    "analyze": cmd_analyze,
    "verify": cmd_verify,
}


def run(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(glue_negative_values(argv))
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cfg = resolve_config(args)
        console.quiet = bool(cfg["quiet"])
        return COMMANDS[cfg["command"]](cfg)
    except ConfigError as e:
        console.print(f"[red]Error:[/red] {e}")
        return 2
    except (BetaEnsembleError, OSError, ValueError) as e:
        console.print(f"[red]Error:[/red] {e}")
        return 1
    finally:
        console.quiet = False


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
