"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 input error,
3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import __version__
from . import channel as chn
from . import identities as ids
from . import mixture as mx
from .formats import (InputError, RunConfig, load_config, load_distribution, override,
                      parse_float_list, to_csv, to_json)
from .quadrature import ConvergenceError
from .verify import run_suite

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
KL_METHODS = ("direct", "mismatched", "fisher")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InputError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value run configuration")
    common.add_argument("--out", metavar="DIR", help="also write reports and curves into DIR")
    common.add_argument("--seed", type=int, help="Monte Carlo seed (mc.seed)")
    common.add_argument("--workers", type=int, help="threads for SNR-grid evaluations")
    common.add_argument("--renormalize", action="store_true",
                        help="rescale distribution weights that do not sum to one")

    p = _Parser(prog="epideficit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("mmse", parents=[common], help="MMSE and output Fisher information over SNR")
    s.add_argument("dist")
    s.add_argument("--gamma", metavar="LIST", required=True, help="comma-separated SNRs >= 0")

    s = sub.add_parser("entropy", parents=[common], help="differential entropy in nats")
    s.add_argument("dist")
    s.add_argument("--method", choices=("direct", "immse"), default="direct")

    for name, text in (("deficit", "Lieb deficit as an SNR integral"),
                       ("diagnose", "equality-condition residuals on the gamma grid")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("x1")
        s.add_argument("x2")
        s.add_argument("--alpha", type=float, required=True)
        if name == "diagnose":
            s.add_argument("--gamma", metavar="LIST", help="overrides gamma.grid")

    s = sub.add_parser("kl", parents=[common], help="relative entropy D(P||Q)")
    s.add_argument("p")
    s.add_argument("q")
    s.add_argument("--method", default="all",
                   help="direct, mismatched, fisher, a comma list of these, or all")

    s = sub.add_parser("verify", parents=[common], help="run the self-check suite")
    s.add_argument("--suite", choices=("fast", "full"), default="fast")
    return p


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    return override(cfg, mc_seed=args.seed, output_dir=args.out, workers=args.workers)


def _traced(trace) -> list:
    return [{"quantity": what, **res.as_record()} for what, res in trace]


def _report(command, inputs, results, trace) -> dict:
    return {"command": command, "version": __version__, "inputs": inputs,
            "results": results, "quad_diagnostics": _traced(trace)}


def _emit(cfg: RunConfig, files: dict, stdout_name: str) -> None:
    sys.stdout.write(files[stdout_name])
    if cfg.output_dir:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out / name).write_text(text)


def cmd_mmse(args, cfg):
    gm = load_distribution(args.dist, args.renormalize)
    gammas = parse_float_list(args.gamma, "--gamma")
    if any(g < 0 for g in gammas):
        raise InputError("--gamma: SNR values must be >= 0")
    s = cfg.settings
    rows = []
    for g in gammas:
        ch = chn.ChannelView(gm, g)
        m = chn.mmse(ch, s)
        rows.append((g, m, chn.fisher_output(ch, s), 1.0 - g * m))
    _emit(cfg, {"mmse.csv": to_csv(("gamma", "mmse", "fisher_output", "one_minus_gamma_mmse"), rows)},
          "mmse.csv")
    return EXIT_OK


def cmd_entropy(args, cfg):
    gm = load_distribution(args.dist, args.renormalize)
    s, trace = cfg.settings, []
    direct = mx.entropy_direct(gm, s, trace)
    results = {"method": args.method, "direct": {"value": direct, "est_error": trace[-1][1].est_error}}
    if args.method == "immse":
        h = ids.entropy_immse(gm, s, trace)
        results["immse"] = {"value": h, "est_error": 0.5 * trace[-1][1].est_error}
        results["agreement"] = abs(h - direct)
    results["entropy"] = results[args.method]["value"]
    report = _report("entropy", {"dist": gm.to_dict()}, results, trace)
    _emit(cfg, {"entropy.json": to_json(report)}, "entropy.json")
    return EXIT_OK


def _instance(args) -> ids.LiebInstance:
    x1 = load_distribution(args.x1, args.renormalize)
    x2 = load_distribution(args.x2, args.renormalize)
    if not 0.0 <= args.alpha <= 1.0:
        raise InputError(f"--alpha must lie in [0, 1], got {args.alpha!r}")
    return ids.LiebInstance(x1, x2, args.alpha)


def _inputs(inst) -> dict:
    return {"x1": inst.x1.to_dict(), "x2": inst.x2.to_dict(), "alpha": inst.alpha}


def cmd_deficit(args, cfg):
    inst = _instance(args)
    trace = []
    rep = ids.deficit(inst, cfg.settings, trace)
    gap_err = sum(r.est_error for what, r in trace if what == "entropy_direct")
    results = {
        "delta": {"value": rep.delta, "est_error": rep.delta_est_error},
        "direct_gap": {"value": rep.direct_gap, "est_error": gap_err},
        "identity_error": {"value": rep.identity_error, "tolerance": 1e-4 * (1 + abs(rep.direct_gap))},
        "gamma_samples": len(rep.gamma_samples),
    }
    files = {"deficit.json": to_json(_report("deficit", _inputs(inst), results, trace))}
    files["deficit_gamma.csv"] = to_csv(("gamma", "integrand"), rep.gamma_samples)
    _emit(cfg, files, "deficit.json")
    return EXIT_OK


def cmd_diagnose(args, cfg):
    inst = _instance(args)
    gammas = parse_float_list(args.gamma, "--gamma") if args.gamma else cfg.gamma_grid
    if any(g <= 0 for g in gammas):
        raise InputError("diagnostics need gamma > 0")
    rep = ids.diagnostics(inst, gammas, cfg.settings)
    results = rep.as_dict()
    results["tolerance"] = {"equality_threshold": ids.EQUALITY_THRESHOLD,
                            "tol1d": cfg.tol1d, "tol2d": cfg.tol2d}
    _emit(cfg, {"diagnose.json": to_json(_report("diagnose", _inputs(inst), results, []))}, "diagnose.json")
    return EXIT_OK


def cmd_kl(args, cfg):
    p = load_distribution(args.p, args.renormalize)
    q = load_distribution(args.q, args.renormalize)
    methods = KL_METHODS if args.method == "all" else tuple(m.strip() for m in args.method.split(","))
    bad = [m for m in methods if m not in KL_METHODS]
    if bad or not methods:
        raise InputError(f"--method: unknown method(s) {bad}; choose from {KL_METHODS}")
    funcs = {"direct": ids.kl_direct, "mismatched": ids.kl_mismatched, "fisher": ids.kl_via_fisher}
    s, trace, results = cfg.settings, [], {}
    for m in methods:
        value = funcs[m](p, q, s, trace)
        # the SNR-integral methods report half the integral
        err = trace[-1][1].est_error * (1.0 if m == "direct" else 0.5)
        results[m] = {"value": value, "est_error": err}
    if len(methods) > 1:
        vals = [results[m]["value"] for m in methods]
        spread = max(vals) - min(vals)
        scale = max(abs(v) for v in vals)
        results["agreement"] = {"max_abs_diff": spread, "max_rel_diff": spread / scale if scale else 0.0,
                                "tolerance_rel": 1e-3}
    report = _report("kl", {"p": p.to_dict(), "q": q.to_dict()}, results, trace)
    _emit(cfg, {"kl.json": to_json(report)}, "kl.json")
    return EXIT_OK


def cmd_verify(args, cfg):
    checks = run_suite(args.suite, cfg.settings, cfg.mc_seed, cfg.mc_samples)
    failed = [c for c in checks if not c.passed]
    summary = {
        "command": "verify",
        "version": __version__,
        "suite": args.suite,
        "config": {"tol1d": cfg.tol1d, "tol2d": cfg.tol2d, "max_levels": cfg.max_levels,
                   "mc_seed": cfg.mc_seed, "mc_samples": cfg.mc_samples},
        "passed": not failed,
        "n_checks": len(checks),
        "n_failed": len(failed),
        "failures": [c.as_dict() for c in failed[:10]],
        "checks": [c.as_dict() for c in checks],
    }
    _emit(cfg, {"verify.json": to_json(summary)}, "verify.json")
    return EXIT_VERIFY if failed else EXIT_OK


COMMANDS = {"mmse": cmd_mmse, "entropy": cmd_entropy, "deficit": cmd_deficit,
            "diagnose": cmd_diagnose, "kl": cmd_kl, "verify": cmd_verify}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
