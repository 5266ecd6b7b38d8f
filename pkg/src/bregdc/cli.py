"""Command line entry point ``bregdc``.

Usage::

    bregdc simulate|solve|bench|metrics --config run.json [--set key=value ...] [--seed N]

The run configuration is a flat JSON object; ``--set`` entries and ``--seed``
override its keys. Values given to ``--set`` are parsed as JSON when possible
(``--set tol=1e-6``, ``--set beta='"zero"'``) and kept as strings otherwise
(``--set beta=zero``). See :data:`DEFAULTS` for every key.

Exit codes: 0 success (``solve``: converged), 1 I/O, parse or runtime error,
2 ``solve`` stopped at ``max_iter`` without converging, 3 configuration error
(the violated inequality is printed on stderr).
"""

import argparse
import dataclasses
import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from .bench import DEFAULT_L1_WEIGHT, bench_threads, run_rician_benchmark, summarize
from .errors import BregDCError, ConfigurationError, InvalidInputError
from .imageio import read_image, write_image
from .metrics import capped_psnr, psnr, ssim
from .phantoms import phantom_set
from .phase_retrieval import (CDPOperator, GaussianSNR, NoNoise, PRMeasurement, ShotNoise,
                              align_global_sign, build_pr_problem, random_masks, read_masks,
                              realized_snr, simulate_pr, spectral_init, write_masks)
from .priors import l1_prior, load_linear_smoother
from .rician import RicianModel, build_rician_problem, rician_schedule, simulate_rician
from .solver import SolverConfig, solve, write_trace_csv

__all__ = ["main", "DEFAULTS", "load_config"]

DEFAULTS = {
    "task": "rician",          # rician | phase-retrieval
    "input": None,             # ground truth (simulate), measurement (solve), directory (bench)
    "output": "out",           # output directory
    "truth": None,             # optional ground truth for solve / reference for metrics
    "seed": 0,
    # noise
    "sigma": 25.5,             # rician
    "snr_db": None,            # phase retrieval: Gaussian noise at this SNR
    "alpha": None,             # phase retrieval: shot noise level
    "masks": 4,                # phase retrieval: number of random masks
    # solver
    "lambda": None,            # default: rician schedule, or 0.9/(3m+1) for phase retrieval
    "delta": 0.51,
    "epsilon": 0.01,
    "tol": 1e-5,
    "max_iter": 1000,
    "beta": "fista",           # fista | zero | a fixed number in [0, 1)
    # prior
    "prior": "l1",             # l1 | stencil | none
    "mu": DEFAULT_L1_WEIGHT,   # l1 weight
    "stencil": None,           # stencil file for prior=stencil
    "gamma": None,             # denoiser strength label (defaults to the schedule's gamma)
    # metrics
    "peak": None,              # default 255 for rician, max(truth) for phase retrieval
}

TASKS = ("rician", "phase-retrieval")


class _Usage(Exception):
    """Argument or configuration parse failure (exit 1)."""


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path=None, overrides=(), seed=None):
    """Merge defaults, the JSON file and ``key=value`` overrides."""
    cfg = dict(DEFAULTS)
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise _Usage(f"{path}: cannot read config: {exc.strerror}")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise _Usage(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}")
        if not isinstance(data, dict):
            raise _Usage(f"{path}: config must be a JSON object")
        cfg.update(data)
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise _Usage(f"--set expects key=value, got {item!r}")
        cfg[key.strip()] = _parse_value(value)
    if seed is not None:
        cfg["seed"] = seed
    unknown = sorted(set(cfg) - set(DEFAULTS))
    if unknown:
        raise _Usage(f"unknown config keys: {', '.join(unknown)}")
    if cfg["task"] not in TASKS:
        raise _Usage(f"task must be one of {TASKS}, got {cfg['task']!r}")
    if not isinstance(cfg["seed"], int) or not 0 <= cfg["seed"] < 2 ** 64:
        raise _Usage(f"seed must be an unsigned 64-bit integer, got {cfg['seed']!r}")
    return cfg


def _need(cfg, key):
    if cfg[key] is None:
        raise _Usage(f"config key {key!r} is required for this command")
    return cfg[key]


def _solver_config(cfg, lam):
    beta = cfg["beta"]
    try:
        return SolverConfig(lam=lam, delta=float(cfg["delta"]), epsilon=float(cfg["epsilon"]),
                            beta=beta, tol=float(cfg["tol"]), max_iter=int(cfg["max_iter"]))
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc))


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _out_dir(cfg):
    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _pr_noise(cfg):
    if cfg["snr_db"] is not None and cfg["alpha"] is not None:
        raise ConfigurationError("set at most one of snr_db and alpha")
    if cfg["snr_db"] is not None:
        return GaussianSNR(float(cfg["snr_db"]))
    if cfg["alpha"] is not None:
        return ShotNoise(float(cfg["alpha"]))
    return NoNoise()


# --- simulate -----------------------------------------------------------

def cmd_simulate(cfg):
    x = read_image(_need(cfg, "input"))
    out = _out_dir(cfg)
    side = {"task": cfg["task"], "input": str(cfg["input"]), "seed": cfg["seed"]}
    if cfg["task"] == "rician":
        sigma = float(cfg["sigma"])
        b = simulate_rician(x, sigma, seed=cfg["seed"])
        write_image(b, out / "measurement.bdcf")
        side.update(sigma=sigma, measurement="measurement.bdcf")
    else:
        noise = _pr_noise(cfg)
        m = int(cfg["masks"])
        # masks and noise come from independent streams of the same seed
        mask_seed, noise_seed = np.random.SeedSequence(cfg["seed"]).spawn(2)
        K = CDPOperator(random_masks(m, x.shape, seed=np.random.default_rng(mask_seed)))
        meas = simulate_pr(K, x, noise, seed=np.random.default_rng(noise_seed))
        clean = np.abs(K.forward(x)) ** 2
        np.save(out / "measurement.npy", meas.d)
        write_masks(K.masks, out / "masks.cdpm")
        snr = realized_snr(clean, meas.d)
        side.update(masks=m, noise=type(noise).__name__, snr_db=cfg["snr_db"], alpha=cfg["alpha"],
                    realized_snr=None if np.isinf(snr) else snr,
                    measurement="measurement.npy", mask_file="masks.cdpm")
    _write_json(out / "simulate.json", side)
    print(f"wrote {out}")
    return 0


# --- solve --------------------------------------------------------------

def _prior(cfg, schedule_gamma=None):
    kind = cfg["prior"]
    if kind == "none" or kind is None:
        return None
    if kind == "l1":
        return l1_prior(float(cfg["mu"]))
    if kind == "stencil":
        gamma = cfg["gamma"] if cfg["gamma"] is not None else (schedule_gamma or 0.0)
        return load_linear_smoother(_need(cfg, "stencil"), gamma=float(gamma))
    raise ConfigurationError(f"prior must be l1, stencil or none, got {kind!r}")


def _load_pr_measurement(cfg):
    src = Path(_need(cfg, "input"))
    if src.is_dir():
        d_path, m_path = src / "measurement.npy", src / "masks.cdpm"
    else:
        d_path, m_path = src, src.with_name("masks.cdpm")
    try:
        d = np.load(d_path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise InvalidInputError(f"{d_path}: cannot read measurement: {exc}")
    K = CDPOperator(read_masks(m_path))
    return K, PRMeasurement(d=d, operator=K)


def cmd_solve(cfg):
    truth = read_image(cfg["truth"]) if cfg["truth"] is not None else None
    if cfg["task"] == "rician":
        b = read_image(_need(cfg, "input"))
        sched = rician_schedule(float(cfg["sigma"]), float(cfg["delta"]), float(cfg["epsilon"]))
        if cfg["lambda"] is not None:
            sched = dataclasses.replace(sched, lam=float(cfg["lambda"]))
        problem = build_rician_problem(RicianModel(float(cfg["sigma"]), b),
                                       _prior(cfg, sched.gamma), sched)
        config = _solver_config(cfg, sched.lam)
        x0 = b
        peak = 255.0
    else:
        K, meas = _load_pr_measurement(cfg)
        if cfg["prior"] not in ("none", "stencil", None):
            raise ConfigurationError("phase retrieval supports prior none or stencil")
        lam = cfg["lambda"] if cfg["lambda"] is not None else 0.9 / (3 * K.m + 1)
        problem = build_pr_problem(K, meas, _prior(cfg), float(lam),
                                   float(cfg["delta"]), float(cfg["epsilon"]))
        config = _solver_config(cfg, float(lam))
        x0 = spectral_init(K, meas, seed=cfg["seed"])
        peak = float(np.max(np.abs(truth))) if truth is not None else 1.0

    t0 = time.perf_counter()
    res = solve(problem, config, x0)
    wall = time.perf_counter() - t0

    x = res.x_final
    if truth is not None and cfg["task"] == "phase-retrieval":
        x = align_global_sign(x, truth)
    if cfg["peak"] is not None:
        peak = float(cfg["peak"])

    out = _out_dir(cfg)
    write_image(x, out / "restored.bdcf")
    write_trace_csv(res.trace, out / "trace.csv")
    summary = {
        "psnr_db": None, "ssim": None,
        "iterations": res.iterations, "wall_seconds": wall, "converged": res.converged,
        "config": cfg,
    }
    if truth is not None:
        summary["psnr_db"] = capped_psnr(psnr(x, truth, peak))
        if min(truth.shape) >= 11:
            summary["ssim"] = ssim(x, truth, peak)
    if cfg["task"] == "phase-retrieval":
        d = meas.d
        summary["relative_residual"] = float(
            np.linalg.norm(np.abs(K.forward(x)) ** 2 - d) / np.linalg.norm(d))
    _write_json(out / "summary.json", summary)
    print(f"{'converged' if res.converged else 'max_iter reached'} after {res.iterations} iterations")
    return 0 if res.converged else 2


# --- bench --------------------------------------------------------------

def _bench_images(cfg):
    if cfg["input"] is None:
        return {f"phantom{i}": img for i, img in enumerate(phantom_set(5, seed=cfg["seed"]))}
    src = Path(cfg["input"])
    if not src.is_dir():
        raise InvalidInputError(f"{src}: bench input must be a directory")
    images = {}
    for p in sorted(src.iterdir()):
        if not p.is_file():
            continue
        try:
            images[p.name] = read_image(p)
        except (BregDCError, OSError) as exc:
            warnings.warn(f"skipping {p}: {exc}")
            print(f"warning: skipping {p}: {exc}", file=sys.stderr)
    if not images:
        raise InvalidInputError(f"{src}: no readable images")
    return images


def cmd_bench(cfg):
    if cfg["task"] != "rician":
        raise ConfigurationError("bench runs the rician task only")
    if cfg["prior"] != "l1":
        raise ConfigurationError("bench uses the l1 prior")
    images = _bench_images(cfg)
    # the bench runs to the tolerance; the solve default cap of 1000 is too small
    max_iter = int(cfg["max_iter"]) if cfg["max_iter"] != DEFAULTS["max_iter"] else 50000
    rows = run_rician_benchmark(images, sigma=float(cfg["sigma"]), mu=float(cfg["mu"]),
                                tol=float(cfg["tol"]), max_iter=max_iter, seed=cfg["seed"],
                                delta=float(cfg["delta"]), epsilon=float(cfg["epsilon"]),
                                threads=bench_threads())
    out = _out_dir(cfg)
    with open(out / "bench.csv", "w") as fh:
        fh.write("image,beta_mode,iterations,psnr,seconds\n")
        for r in rows:
            fh.write(f"{r.image},{r.beta_mode},{r.iterations},"
                     f"{capped_psnr(r.psnr):.17g},{r.seconds:.6f}\n")
    agg = summarize(rows)
    agg["config"] = dict(cfg, max_iter=max_iter)
    _write_json(out / "bench_summary.json", agg)
    for mode in ("zero", "fista"):
        a = agg[mode]
        print(f"{mode:5s}: mean iterations {a['mean_iterations']:.1f}, mean PSNR {a['mean_psnr']:.2f} dB")
    return 0


# --- metrics ------------------------------------------------------------

def cmd_metrics(cfg):
    x = read_image(_need(cfg, "input"))
    ref = read_image(_need(cfg, "truth"))
    peak = float(cfg["peak"]) if cfg["peak"] is not None else 255.0
    res = {"psnr_db": capped_psnr(psnr(x, ref, peak)),
           "ssim": ssim(x, ref, peak) if min(ref.shape) >= 11 else None}
    text = json.dumps(res, sort_keys=True)
    print(text)
    if cfg["output"] != DEFAULTS["output"]:
        Path(cfg["output"]).write_text(text + "\n")
    return 0


COMMANDS = {"simulate": cmd_simulate, "solve": cmd_solve, "bench": cmd_bench, "metrics": cmd_metrics}


def _u64(text):
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="bregdc", description="Inertial Bregman proximal DC solvers.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    p.add_argument("--seed", type=_u64, help="random seed (overrides the config)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides, args.seed)
        return COMMANDS[args.command](cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    except (_Usage, BregDCError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
