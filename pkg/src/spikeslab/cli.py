"""Command-line entry point.

Subcommands: generate (synthetic datasets), sample (run one chain),
mix (lag-coupled meeting times and the TV-bound curve), validate
(sampler marginals against the enumeration oracle), reproduce
(end-to-end benchmark pipelines).

Configuration precedence is built-in defaults < config file (one
``key = value`` per line, ``#`` comments) < command-line flags; the
effective merged configuration is written next to the outputs.  Exit
codes: 0 success, 2 usage error, 3 validation failure, 4 I/O error.
"""

import argparse
import ast
import hashlib
import os
import sys

import numpy as np

from .coupling import MixingCurve, estimate_mixing_bound, write_replica_csv
from .experiments import (
    EXPERIMENT_KINDS,
    SyntheticSpec,
    async_screen_size,
    default_niter,
    generate_design,
    generate_response,
    generate_signal,
    lasso_warm_start,
    make_dataset,
    protocol_hyperparams,
    relative_error,
    run_experiment,
    support_frequencies,
)
from .kernels import KernelConfig
from .models import RegressionData, make_model
from .oracle import enumerate_posterior
from .rngtools import substream
from .samplers import SamplerConfig, run_chain
from .sparsity import SparsityVector

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4

FIGURES = {
    # name -> (experiment kind, desk config, paper config)
    "mixing_lm": ("mixing_vs_p",
                  {"p_grid": (200, 400, 800), "reps": 50},
                  {"p_grid": (500, 1000, 2000, 4000), "reps": 50}),
    "relerr_lm": ("relative_error",
                  {"p": 1000, "reps": 10},
                  {"p": 1000, "reps": 50}),
    "paths_lm": ("pen_loglik_paths",
                 {"p": 1000, "reps": 10},
                 {"p": 1000, "reps": 50}),
    "paths_logistic": ("pen_loglik_paths",
                       {"p": 1000, "reps": 5, "model": "logistic"},
                       {"p": 1000, "reps": 50, "model": "logistic"}),
    "relerr_logistic": ("relative_error",
                        {"p": 1000, "reps": 5, "model": "logistic"},
                        {"p": 1000, "reps": 50, "model": "logistic"}),
    "runtime": ("runtime_table",
                {"p_grid": (1000,), "reps": 3, "iters": 1000},
                {"p_grid": (1000, 2000, 5000), "reps": 5, "iters": 1000}),
}

PLOT_SCRIPTS = {
    "mixing_vs_p": (
        "set datafile separator ','\n"
        "set key top left\n"
        "set xlabel 'p'", "set ylabel 'estimated mixing time'\n"
        "plot 'mixing.csv' every ::1 using 1:4 with points title 't_mix'\n"),
    "relative_error": (
        "set datafile separator ','\n"
        "set xlabel 'algorithm'", "set ylabel 'relative error'\n"
        "plot 'relerr.csv' every ::1 using 4:5 with points title 'E'\n"),
    "pen_loglik_paths": (
        "set datafile separator ','\n"
        "set xlabel 'iteration'", "set ylabel 'penalized test log-likelihood'\n"
        "plot 'paths.csv' every ::1 using 2:3 with lines title 'mean path'\n"),
    "runtime_table": (
        "set datafile separator ','\n"
        "set xlabel 'p'", "set ylabel 'seconds'\n"
        "plot 'runtime.csv' every ::1 using 2:3 with points title 'mean_s'\n"),
}


class UsageError(Exception):
    pass


class ValidationFailure(Exception):
    pass


def _parse_value(text):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def read_config_file(path):
    """Parse a ``key = value`` config file (# comments, blank lines ok)."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            out[key.strip()] = _parse_value(value.strip())
    return out


def merge_config(defaults, file_cfg, flag_cfg):
    """defaults < config file < flags (flags only where actually given)."""
    merged = dict(defaults)
    for key, value in file_cfg.items():
        if key not in merged:
            raise UsageError(f"unknown config key {key!r}")
        merged[key] = value
    for key, value in flag_cfg.items():
        if value is not None:
            merged[key] = value
    return merged


def write_effective_config(out_dir, cfg):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "config_effective.txt")
    with open(path, "w") as fh:
        for key in sorted(cfg):
            fh.write(f"{key} = {cfg[key]!r}\n")
    return path


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------- generate

GENERATE_DEFAULTS = {
    "p": 1000, "n": None, "varrho": 0.0, "s_star": 10,
    "signal_low": 6.0, "signal_high": 7.0, "model": "linear", "sigma": 1.0,
    "normalize_columns": False,
}


def cmd_generate(cfg, seed, out_dir):
    n = cfg["n"] if cfg["n"] is not None else cfg["p"] // 2
    try:
        spec = SyntheticSpec(
            n=n, p=cfg["p"], varrho=cfg["varrho"], s_star=cfg["s_star"],
            signal_low=cfg["signal_low"], signal_high=cfg["signal_high"],
            model=cfg["model"], sigma=cfg["sigma"],
            normalize_columns=bool(cfg["normalize_columns"]), seed=seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    theta_star, delta_star = generate_signal(spec, substream(seed, "dataset", "signal"))
    X = generate_design(spec, substream(seed, "dataset", "design"))
    y = generate_response(spec, X, theta_star, substream(seed, "dataset", "response"))
    os.makedirs(out_dir, exist_ok=True)
    files = {
        "X.npy": X, "y.npy": y,
        "theta_star.npy": theta_star,
        "delta_star.npy": delta_star.bits,
    }
    for name, arr in files.items():
        np.save(os.path.join(out_dir, name), arr)
    with open(os.path.join(out_dir, "manifest.txt"), "w") as fh:
        for key in sorted(spec.__dataclass_fields__):
            fh.write(f"{key} = {getattr(spec, key)!r}\n")
        fh.write(f"seed = {seed}\n")
        for name in sorted(files):
            fh.write(f"sha256 {name} = {_sha256(os.path.join(out_dir, name))}\n")
    print(f"dataset written to {out_dir} (n={spec.n}, p={spec.p}, model={spec.model})")
    return EXIT_OK


def load_dataset(path):
    X = np.load(os.path.join(path, "X.npy"))
    y = np.load(os.path.join(path, "y.npy"))
    manifest = {}
    with open(os.path.join(path, "manifest.txt")) as fh:
        for line in fh:
            if "=" in line and not line.startswith("sha256"):
                key, value = line.split("=", 1)
                manifest[key.strip()] = _parse_value(value.strip())
    theta_path = os.path.join(path, "theta_star.npy")
    theta_star = np.load(theta_path) if os.path.exists(theta_path) else None
    sigma = float(manifest.get("sigma", 1.0))
    return RegressionData(X, y, sigma**2), manifest, theta_star


# ---------------------------------------------------------------- sample

SAMPLE_DEFAULTS = {
    "dataset": None, "p": 200, "n": None, "varrho": 0.0, "s_star": 10,
    "model": "linear", "algorithm": "exact", "kernel": None,
    "mala_step": 0.01, "sgld_step": 0.005, "batch_size": None,
    "iters": None, "record_every": 1, "j": None, "u": 1.5,
    "rho0": None, "rho1": 1.0, "init": "null_model",
    "snapshots": "none", "test_set": False,
}


def cmd_sample(cfg, seed, out_dir):
    if cfg["dataset"] is not None:
        data, manifest, theta_star = load_dataset(cfg["dataset"])
        model_kind = manifest.get("model", cfg["model"])
    else:
        spec = SyntheticSpec(
            n=cfg["n"] if cfg["n"] is not None else cfg["p"] // 2,
            p=cfg["p"], varrho=cfg["varrho"], s_star=cfg["s_star"],
            model=cfg["model"], seed=seed,
        )
        data, theta_star = make_dataset(spec, stream_scope=("sample", "train"))
        model_kind = cfg["model"]

    algo = cfg["algorithm"]
    if algo not in ("exact", "async", "sa_sgld"):
        raise UsageError(f"unknown algorithm {algo!r}")
    kern_kind = cfg["kernel"]
    if kern_kind is None:
        kern_kind = ("sgld" if algo == "sa_sgld"
                     else "exact_gaussian" if model_kind == "linear" else "mala")
    if algo == "sa_sgld" and kern_kind == "sgld" and cfg["batch_size"] is None:
        raise UsageError("--algorithm sa_sgld requires --batch-size")
    if kern_kind == "sgld" and cfg["batch_size"] is None:
        raise UsageError("the sgld kernel requires --batch-size")
    step = cfg["sgld_step"] if kern_kind == "sgld" else cfg["mala_step"]
    kernel = KernelConfig(kern_kind, step=step, batch_size=cfg["batch_size"])
    # "async + sgld kernel" is the sparse asynchronous SGLD configuration.
    if algo == "async" and kern_kind == "sgld":
        algo = "sa_sgld"

    n, p = data.n, data.p
    J = cfg["j"] if cfg["j"] is not None else (100 if algo == "exact"
                                               else async_screen_size(n))
    iters = cfg["iters"] if cfg["iters"] is not None else default_niter(p)
    h_rho0 = cfg["rho0"] if cfg["rho0"] is not None else float(n)
    from .posterior import Hyperparams

    h = Hyperparams(u=cfg["u"], rho0=h_rho0, rho1=cfg["rho1"], J=min(J, p),
                    B=cfg["batch_size"], gamma=cfg["sgld_step"],
                    mala_step=cfg["mala_step"])
    init = cfg["init"]
    if init == "lasso":
        fit = lasso_warm_start(data, kind=model_kind)
        bits = np.zeros(p, dtype=np.uint8)
        bits[fit.support] = 1
        init = (fit.theta, SparsityVector(bits))
    elif init != "null_model":
        raise UsageError("--init must be null_model or lasso")

    sampler_cfg = SamplerConfig(algo, kernel, int(iters),
                                record_every=cfg["record_every"], init=init)
    model = make_model(model_kind, data)
    try:
        sampler_cfg.validate_for(model, h)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    test_data = None
    if cfg["test_set"] and cfg["dataset"] is None and theta_star is not None:
        spec_t = SyntheticSpec(n=n, p=p, varrho=cfg["varrho"], model=model_kind,
                               seed=seed, s_star=max(1, int(np.count_nonzero(theta_star))))
        test_data, _ = make_dataset(spec_t, theta_star, stream_scope=("sample", "test"))

    trace = run_chain(sampler_cfg, model, h, seed, test_data=test_data,
                      test_model_kind=model_kind)
    os.makedirs(out_dir, exist_ok=True)
    trace.write_series_csv(os.path.join(out_dir, "trace.csv"))
    if cfg["snapshots"] == "csv":
        trace.write_snapshots_csv(os.path.join(out_dir, "snapshots.csv"))
    elif cfg["snapshots"] == "npz":
        trace.write_snapshots_npz(os.path.join(out_dir, "snapshots.npz"))

    burn = max(0, int(iters) - 1000)
    lines = [f"algorithm = {algo}", f"kernel = {kern_kind}", f"iterations = {iters}",
             f"final_support_size = {trace.final_state.delta.count}"]
    if iters > burn:
        freq = support_frequencies(trace, burn)
        top = np.argsort(freq)[::-1][:20]
        lines.append("top_inclusion = " + ", ".join(
            f"{int(j)}:{freq[j]:.3f}" for j in top if freq[j] > 0))
        if theta_star is not None and np.linalg.norm(theta_star) > 0:
            lines.append(
                f"relative_error = {relative_error(trace, theta_star, burn):.6g}")
    lines.append(f"wall_s = {trace.wall_ns[-1] / 1e9:.3f}")
    with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


# ---------------------------------------------------------------- mix

MIX_DEFAULTS = {
    "dataset": None, "p": 200, "n": None, "varrho": 0.0, "s_star": 10,
    "model": "linear", "kernel": "exact_gaussian",
    "lag": 1, "replicas": 50, "max_iters": 20000, "eps": 0.25, "j": 100,
}


def cmd_mix(cfg, seed, out_dir):
    if cfg["model"] != "linear" or cfg["kernel"] != "exact_gaussian":
        raise UsageError(
            "mixing estimation is supported only for the linear model with the "
            "exact Gaussian kernel (the coupled kernel needs the closed-form "
            "conditional)"
        )
    if cfg["dataset"] is not None:
        data, manifest, _ = load_dataset(cfg["dataset"])
        if manifest.get("model", "linear") != "linear":
            raise UsageError("mixing estimation requires a linear-model dataset")
    else:
        spec = SyntheticSpec(
            n=cfg["n"] if cfg["n"] is not None else cfg["p"] // 2,
            p=cfg["p"], varrho=cfg["varrho"], s_star=cfg["s_star"], seed=seed,
        )
        data, _ = make_dataset(spec, stream_scope=("mix", "train"))
    model = make_model("linear", data)
    h = protocol_hyperparams(data.n, J=min(int(cfg["j"]), data.p))
    sampler_cfg = SamplerConfig("exact", KernelConfig("exact_gaussian"), 0)
    curve, traces = estimate_mixing_bound(
        model, h, sampler_cfg, int(cfg["lag"]), int(cfg["replicas"]), seed,
        max_iters=int(cfg["max_iters"]),
    )
    os.makedirs(out_dir, exist_ok=True)
    seeds = [seed] * len(traces)
    write_replica_csv(os.path.join(out_dir, "mixing.csv"), traces, seeds)
    curve.write_csv(os.path.join(out_dir, "curve.csv"))
    tmix = curve.t_mix(float(cfg["eps"]))
    flag = " (low confidence: censored pairs)" if curve.low_confidence else ""
    print(f"replicas = {len(traces)}, censored = {curve.censored}, "
          f"t_mix(eps={cfg['eps']}) = {tmix}{flag}")
    return EXIT_OK


# ---------------------------------------------------------------- validate

VALIDATE_DEFAULTS = {
    "p": 5, "n": 50, "varrho": 0.0, "s_star": 2, "iters": 100000,
    "tol_exact": 0.02, "tol_async": 0.05, "algorithms": "exact,async",
    "j_async": 1,
}


def cmd_validate(cfg, seed, out_dir):
    p = int(cfg["p"])
    if p > 20:
        raise UsageError("oracle validation requires p <= 20")
    spec = SyntheticSpec(n=int(cfg["n"]), p=p, varrho=cfg["varrho"],
                         s_star=int(cfg["s_star"]), seed=seed)
    theta_star, delta_star = generate_signal(spec, substream(seed, "validate", "signal"))
    data, _ = make_dataset(spec, theta_star, stream_scope=("validate",))
    model = make_model("linear", data)
    table = enumerate_posterior(data, protocol_hyperparams(data.n, J=p))
    algos = [a.strip() for a in str(cfg["algorithms"]).split(",") if a.strip()]
    iters = int(cfg["iters"])

    freqs = {}
    for algo in algos:
        J = p if algo == "exact" else min(int(cfg["j_async"]), p)
        h = protocol_hyperparams(data.n, J=J)
        sampler_cfg = SamplerConfig(algo, KernelConfig("exact_gaussian"), iters)
        trace = run_chain(sampler_cfg, model, h, seed, scope=("validate", algo))
        if iters == 0:
            freqs[algo] = trace.snapshots[0][1].astype(float)
        else:
            freqs[algo] = support_frequencies(trace, min(1000, iters // 10))

    os.makedirs(out_dir, exist_ok=True)
    true_sup = set(int(j) for j in delta_star.support)
    failures = []
    with open(os.path.join(out_dir, "validate.csv"), "w", newline="") as fh:
        fh.write("coordinate,is_true,oracle," +
                 ",".join(f"{a}_freq,{a}_absdiff" for a in algos) + "\n")
        for j in range(p):
            row = [str(j), str(int(j in true_sup)), format(table.inclusion[j], ".17g")]
            for algo in algos:
                diff = abs(freqs[algo][j] - table.inclusion[j])
                row += [format(freqs[algo][j], ".17g"), format(diff, ".17g")]
                if algo == "exact" and diff > cfg["tol_exact"]:
                    failures.append(f"exact coord {j}: |diff|={diff:.4f} > {cfg['tol_exact']}")
                if algo != "exact":
                    if j in true_sup and diff > cfg["tol_async"]:
                        failures.append(
                            f"{algo} true coord {j}: |diff|={diff:.4f} > {cfg['tol_async']}")
                    if j not in true_sup and freqs[algo][j] > cfg["tol_async"]:
                        failures.append(
                            f"{algo} null coord {j}: freq={freqs[algo][j]:.4f} > {cfg['tol_async']}")
            fh.write(",".join(row) + "\n")
    if failures:
        print("VALIDATION FAIL")
        for f in failures:
            print("  " + f)
        raise ValidationFailure(f"{len(failures)} coordinate(s) out of tolerance")
    print(f"VALIDATION PASS (p={p}, iters={iters}, algorithms={','.join(algos)})")
    return EXIT_OK


# ---------------------------------------------------------------- reproduce

REPRODUCE_DEFAULTS = {"scale": "desk", "overrides": None}


def cmd_reproduce(figure, cfg, seed, out_dir, threads):
    if figure not in FIGURES:
        raise UsageError(
            f"unknown figure {figure!r}; valid names: {', '.join(sorted(FIGURES))}")
    kind, desk, paper = FIGURES[figure]
    exp_cfg = dict(desk if cfg["scale"] == "desk" else paper)
    if cfg["overrides"]:
        for item in str(cfg["overrides"]).split(";"):
            if not item.strip():
                continue
            if "=" not in item:
                raise UsageError(f"bad override {item!r}; expected key=value")
            key, value = item.split("=", 1)
            exp_cfg[key.strip()] = _parse_value(value.strip())
    os.makedirs(out_dir, exist_ok=True)
    exp_cfg["checkpoint"] = os.path.join(out_dir, f"{figure}.resume")
    report = run_experiment(kind, exp_cfg, seed, out_dir=out_dir, threads=threads)
    script = os.path.join(out_dir, f"{figure}.gnuplot")
    with open(script, "w") as fh:
        head, tail = PLOT_SCRIPTS[kind]
        fh.write(f"# gnuplot script for {figure}\n{head}\n{tail}")
    print(f"{figure}: wrote {', '.join(sorted(report.tables))} CSV(s) to {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------- driver

def build_parser():
    parser = argparse.ArgumentParser(
        prog="spikeslab",
        description="Spike-and-slab MCMC: samplers, couplings, oracle validation, benchmarks.",
    )
    parser.add_argument("--seed", type=int, default=0,
                        help="64-bit master seed (default 0)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for replications; outputs are "
                             "identical for any value (default 1)")
    parser.add_argument("--config", default=None,
                        help="config file, one key = value per line, # comments")
    parser.add_argument("--out", default="out",
                        help="output directory (default ./out)")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset")
    g.add_argument("--p", type=int, help="regressors (default 1000, protocol default)")
    g.add_argument("--n", type=int, help="samples (default p/2, protocol default)")
    g.add_argument("--varrho", type=float, help="AR(1) design correlation (default 0.0)")
    g.add_argument("--s-star", dest="s_star", type=int,
                   help="true support size (default 10, protocol default)")
    g.add_argument("--signal-low", dest="signal_low", type=float,
                   help="signal magnitude lower edge (default 6.0, protocol default)")
    g.add_argument("--signal-high", dest="signal_high", type=float,
                   help="signal magnitude upper edge (default 7.0, protocol default)")
    g.add_argument("--model", choices=["linear", "logistic"],
                   help="response model (default linear)")
    g.add_argument("--sigma", type=float, help="noise scale (default 1.0, protocol default)")
    g.add_argument("--normalize-columns", dest="normalize_columns",
                   action="store_const", const=True,
                   help="rescale every design column to length sqrt(n) (default off)")

    s = sub.add_parser("sample", help="run one sampler chain")
    s.add_argument("--dataset", help="directory written by `generate` (default: fresh synthetic)")
    s.add_argument("--p", type=int, help="fresh-data regressors (default 200)")
    s.add_argument("--n", type=int, help="fresh-data samples (default p/2)")
    s.add_argument("--varrho", type=float, help="fresh-data AR correlation (default 0.0)")
    s.add_argument("--s-star", dest="s_star", type=int, help="fresh-data support size (default 10)")
    s.add_argument("--model", choices=["linear", "logistic"], help="model (default linear)")
    s.add_argument("--algorithm", choices=["exact", "async", "sa_sgld"],
                   help="sampler (default exact)")
    s.add_argument("--kernel", choices=["exact_gaussian", "mala", "sgld"],
                   help="theta-kernel (default: exact_gaussian for linear, mala otherwise)")
    s.add_argument("--mala-step", dest="mala_step", type=float,
                   help="MaLa step size (default 0.01, protocol default)")
    s.add_argument("--sgld-step", dest="sgld_step", type=float,
                   help="SGLD step size (default 0.005, protocol default)")
    s.add_argument("--batch-size", dest="batch_size", type=int,
                   help="SGLD minibatch size (protocol default 100; required for sgld)")
    s.add_argument("--iters", type=int,
                   help="iterations (default max(2000, p-2000), protocol default)")
    s.add_argument("--record-every", dest="record_every", type=int,
                   help="snapshot stride (default 1)")
    s.add_argument("--j", type=int,
                   help="screening batch size (default 100 for exact, 0.04*n guideline otherwise)")
    s.add_argument("--u", type=float, help="prior sparsity exponent (default 1.5, protocol default)")
    s.add_argument("--rho0", type=float, help="spike precision (default n, protocol default)")
    s.add_argument("--rho1", type=float, help="slab precision (default 1.0, protocol default)")
    s.add_argument("--init", choices=["null_model", "lasso"],
                   help="chain start (default null_model)")
    s.add_argument("--snapshots", choices=["none", "csv", "npz"],
                   help="state snapshot format (default none)")
    s.add_argument("--test-set", dest="test_set", action="store_const", const=True,
                   help="attach an equal-size test set for the penalized score (default off)")

    m = sub.add_parser("mix", help="coupled-chain mixing-time estimation")
    m.add_argument("--dataset", help="linear dataset directory (default: fresh synthetic)")
    m.add_argument("--p", type=int, help="fresh-data regressors (default 200)")
    m.add_argument("--n", type=int, help="fresh-data samples (default p/2)")
    m.add_argument("--varrho", type=float, help="AR correlation (default 0.0)")
    m.add_argument("--s-star", dest="s_star", type=int, help="support size (default 10)")
    m.add_argument("--model", choices=["linear", "logistic"], help="model (must be linear)")
    m.add_argument("--kernel", choices=["exact_gaussian", "mala", "sgld"],
                   help="theta-kernel (must be exact_gaussian)")
    m.add_argument("--lag", type=int, help="coupling lag L (default 1, protocol default)")
    m.add_argument("--replicas", type=int, help="coupled pairs (default 50, protocol default)")
    m.add_argument("--max-iters", dest="max_iters", type=int,
                   help="censoring horizon (default 20000)")
    m.add_argument("--eps", type=float,
                   help="mixing threshold (default 0.25, standard convention)")
    m.add_argument("--j", type=int, help="screening batch size (default 100, protocol default)")

    v = sub.add_parser("validate", help="compare sampler marginals to the enumeration oracle")
    v.add_argument("--p", type=int, help="regressors, at most 20 (default 5)")
    v.add_argument("--n", type=int, help="samples (default 50)")
    v.add_argument("--varrho", type=float, help="AR correlation (default 0.0)")
    v.add_argument("--s-star", dest="s_star", type=int, help="true support size (default 2)")
    v.add_argument("--iters", type=int, help="chain length (default 100000)")
    v.add_argument("--tol-exact", dest="tol_exact", type=float,
                   help="per-coordinate tolerance for the exact sampler (default 0.02)")
    v.add_argument("--tol-async", dest="tol_async", type=float,
                   help="tolerance for asynchronous sampler true/null coords (default 0.05)")
    v.add_argument("--algorithms", help="comma list among exact,async (default both)")
    v.add_argument("--j-async", dest="j_async", type=int,
                   help="asynchronous screening size (default 1, 0.02*n guideline)")

    r = sub.add_parser("reproduce", help="run a full benchmark pipeline")
    r.add_argument("figure", help=f"one of: {', '.join(sorted(FIGURES))}")
    r.add_argument("--scale", choices=["desk", "paper"],
                   help="grid size: desk (default) or paper-scale")
    r.add_argument("--overrides",
                   help="semicolon list key=value applied to the pipeline config")

    return parser


_DEFAULTS = {
    "generate": GENERATE_DEFAULTS,
    "sample": SAMPLE_DEFAULTS,
    "mix": MIX_DEFAULTS,
    "validate": VALIDATE_DEFAULTS,
    "reproduce": REPRODUCE_DEFAULTS,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    defaults = _DEFAULTS[args.command]
    flag_cfg = {k: v for k, v in vars(args).items()
                if k in defaults}
    try:
        file_cfg = read_config_file(args.config) if args.config else {}
        cfg = merge_config(defaults, file_cfg, flag_cfg)
        out_dir = args.out
        write_effective_config(out_dir, {**cfg, "seed": args.seed,
                                         "threads": args.threads,
                                         "command": args.command})
        if args.command == "generate":
            return cmd_generate(cfg, args.seed, out_dir)
        if args.command == "sample":
            return cmd_sample(cfg, args.seed, out_dir)
        if args.command == "mix":
            return cmd_mix(cfg, args.seed, out_dir)
        if args.command == "validate":
            return cmd_validate(cfg, args.seed, out_dir)
        if args.command == "reproduce":
            return cmd_reproduce(args.figure, cfg, args.seed, out_dir, args.threads)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationFailure as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
