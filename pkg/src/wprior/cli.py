"""Command-line interface: ``wprior {wim, prior, fit, simulate, report}``.

Exit codes: 0 success, 2 configuration or parse error, 3 numerical
failure, 4 propriety refusal. Outputs are written through a temporary file
and renamed, so a failing command never leaves a partial file behind.
The default output directory is ``$WPRIOR_OUTPUT_DIR`` or the current
directory.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .dist import NormalLinReg, model_from_json, spec_from_json
from .errors import CapabilityError, DomainError, InvalidStartError, ProprietyError, QuadratureError
from .infer import McmcConfig, make_log_posterior, mcmc_sample, mle_fit, summarize
from .prior import check_propriety, make_prior, sn_alpha_jeffreys, sn_alpha_wprior, student_t_approx
from .quad import DEFAULT_BUDGET
from .rng import substream
from .sim import (
    PRESETS,
    REPORT_FORMATS,
    Scenario,
    atomic_write_text,
    emit_report,
    preset,
    read_report_csv,
    report_markdown,
    run_scenario,
)
from .wim import wim_closed_form, wim_generic

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PROPRIETY = 0, 2, 3, 4
OUTPUT_ENV = "WPRIOR_OUTPUT_DIR"


class ConfigError(Exception):
    """Bad command line or configuration file."""


def _load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return obj


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write_text(out, text)


def _seed(args, config_seed):
    seed = args.seed if args.seed is not None else config_seed
    if seed is None:
        raise ConfigError("no seed given: pass --seed or set \"seed\" in the config")
    return int(seed)


def _outdir(args) -> str:
    return args.outdir or os.environ.get(OUTPUT_ENV) or os.getcwd()


# ---------------------------------------------------------------------------
# subcommands


def cmd_wim(args) -> int:
    cfg = _load_json(args.config)
    try:
        model, params = spec_from_json(cfg)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    tol = float(cfg.get("tol", 1e-8))
    method = cfg.get("method", "auto")
    if method not in ("auto", "quadrature"):
        raise ConfigError(f"method must be 'auto' or 'quadrature', got {method!r}")
    W = None
    if method == "auto":
        try:
            W = wim_closed_form(model, params)
        except CapabilityError:
            pass
    if W is None:
        W = wim_generic(model, params, tol, budget=int(cfg.get("budget", DEFAULT_BUDGET)))
    _emit(json.dumps(W.to_json()) + "\n", args.output)
    return EXIT_OK


def _grid_from(cfg) -> np.ndarray:
    try:
        lo, hi, step = float(cfg["lower"]), float(cfg["upper"]), float(cfg["step"])
    except KeyError as exc:
        raise ConfigError(f"prior grid needs 'lower', 'upper' and 'step' (missing {exc})") from exc
    if not (step > 0 and hi >= lo):
        raise ConfigError("prior grid needs step > 0 and upper >= lower")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(count), 12)


def cmd_prior(args) -> int:
    cfg = _load_json(args.config)
    grid = _grid_from(cfg)
    lines = ["alpha,pi_w,pi_j,t_approx"]
    for a in grid:
        a = float(a)
        lines.append(f"{a!r},{sn_alpha_wprior(a)!r},{sn_alpha_jeffreys(a)!r},{student_t_approx(a)!r}")
    _emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK


def _read_data(path) -> np.ndarray:
    vals = []
    try:
        with open(path, encoding="utf-8") as fh:
            for k, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                try:
                    vals.append(float(line))
                except ValueError as exc:
                    raise ConfigError(f"{path}:{k}: not a number: {line!r}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    if not vals:
        raise ConfigError(f"{path}: no data")
    return np.array(vals)


def _fit_start(model, data, cfg):
    if "init" in cfg:
        return np.asarray(cfg["init"], dtype=float)
    if isinstance(model, NormalLinReg):
        beta, *_ = np.linalg.lstsq(model.design, data, rcond=None)
        return np.append(beta, max(float(np.std(data - model.design @ beta)), 1e-3))
    m, s = float(np.mean(data)), float(np.std(data)) or 1.0
    if model.name == "exponential":
        return np.array([m])
    if model.name == "skew_normal":
        return np.array([m, s, 0.0])
    if model.name == "skew_normal_alpha":
        return np.array([0.0])
    return np.array([m, s])


def cmd_fit(args) -> int:
    cfg = _load_json(args.config)
    data = _read_data(args.data)
    try:
        model = model_from_json(cfg.get("model", cfg))
        prior = make_prior(cfg.get("prior", "wasserstein"), model)
        mcmc = McmcConfig.from_json(cfg.get("mcmc", {}))
    except (DomainError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    seed = _seed(args, cfg.get("seed"))
    verdict = check_propriety(model, prior, data)
    result = {"propriety": verdict.to_json()}
    if not verdict.proper and not args.force:
        sys.stderr.write("refusing to sample: " + verdict.describe() + "\n")
        return EXIT_PROPRIETY
    fit = mle_fit(model, data, _fit_start(model, data, cfg))
    result["mle"] = {"params": fit.params.tolist(), "loglik": fit.loglik, "converged": fit.converged}
    chain = mcmc_sample(make_log_posterior(model, prior, data), fit.params, mcmc,
                        np.random.default_rng(substream(seed, "fit")),
                        positive=model.positive_indices(), param_names=model.param_names)
    result["posterior"] = {"param_names": list(model.param_names), "accept_rate": chain.accept_rate,
                           "draws": len(chain), **summarize(chain).to_json()}
    result["seed"] = seed
    _emit(json.dumps(result, indent=2) + "\n", args.output)
    return EXIT_OK


def _scenario_from_args(args) -> Scenario:
    if args.preset:
        sc = preset(args.preset, seed=None)
    elif args.config:
        try:
            sc = Scenario.from_json(_load_json(args.config))
        except (DomainError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
    else:
        raise ConfigError("simulate needs a scenario file or --preset")
    if args.replicates is not None:
        sc = replace(sc, replicates=args.replicates)
    return replace(sc, seed=_seed(args, sc.seed))


def cmd_simulate(args) -> int:
    sc = _scenario_from_args(args)
    outdir = _outdir(args)

    def progress(event):
        if args.verbose:
            sys.stderr.write(f"n={event['n']} replicate={event['replicate']}"
                             + (f" failures={event['failures']}" if event["failures"] else "") + "\n")

    report = run_scenario(sc, progress, workers=max(1, args.threads))
    for fmt in REPORT_FORMATS:
        emit_report(report, fmt, outdir)
    seen = []
    for r in report.rows:
        if (r.prior, r.n) in seen:
            continue
        seen.append((r.prior, r.n))
        cells = [f"{q.parameter}={q.m_mean:.3f}[cov {q.coverage:.2f}]"
                 for q in report.rows if (q.prior, q.n) == (r.prior, r.n)]
        print(f"{sc.name} prior={r.prior} n={r.n} used={r.replicates} excluded={r.excluded} "
              + " ".join(cells))
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        report = read_report_csv(args.csv, name=os.path.splitext(os.path.basename(args.csv))[0])
    except OSError as exc:
        raise ConfigError(f"cannot read {args.csv}: {exc.strerror}") from exc
    except (DomainError, KeyError, ValueError) as exc:
        raise ConfigError(f"{args.csv}: not a report CSV ({exc})") from exc
    if not report.rows:
        raise ConfigError(f"{args.csv}: report is empty")
    _emit(report_markdown(report), args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wprior", description="Wasserstein information matrices and priors.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="progress on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("wim", help="WIM of a model at a parameter")
    p.add_argument("config", help='JSON, e.g. {"family": "exponential", "params": [1.0]}')
    p.add_argument("-o", "--output", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_wim)

    p = sub.add_parser("prior", help="skew-normal alpha priors on a grid (CSV)")
    p.add_argument("config", help='JSON, e.g. {"lower": -5, "upper": 5, "step": 0.1}')
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_prior)

    p = sub.add_parser("fit", help="MLE and posterior summary for a dataset")
    p.add_argument("config", help="JSON with 'model', 'prior', optional 'mcmc', 'seed', 'init'")
    p.add_argument("data", help="one number per line")
    p.add_argument("-o", "--output")
    p.add_argument("--seed", type=int)
    p.add_argument("--force", action="store_true", help="sample even if propriety is not verified")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="run a simulation scenario and write reports")
    p.add_argument("config", nargs="?", help="scenario JSON")
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("--replicates", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("--outdir", help=f"output directory (default ${OUTPUT_ENV} or cwd)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="render a report CSV as a markdown table")
    p.add_argument("csv")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "data", None) is None and args.command == "fit":
            raise ConfigError("fit needs a data file")
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"wprior: error: {exc}\n")
        return EXIT_CONFIG
    except ProprietyError as exc:
        sys.stderr.write(f"wprior: propriety not verified:\n{exc}\n")
        return EXIT_PROPRIETY
    except (DomainError, CapabilityError) as exc:
        sys.stderr.write(f"wprior: error: {exc}\n")
        return EXIT_CONFIG
    except (QuadratureError, InvalidStartError, ArithmeticError) as exc:
        sys.stderr.write(f"wprior: numerical failure: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
