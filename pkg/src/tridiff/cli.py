"""Operator entry points: coefficient fitting, accuracy reports, plaintext
and share-based sampling, TCP party daemon, and communication benchmarks.

Exit codes: 0 success, 2 argument/config error, 3 I/O or corrupt-file error,
4 handshake failure, 5 protocol abort or transport failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import coeffs as coeffs_mod
from . import nonlinear, primitives, reference, rss, sampler
from .approx import approx_mish, approx_negexp, approx_silu
from .config import ConfigError, load_config
from .denoiser import ParamFormatError, load_params, random_params, save_params
from .transport import HandshakeError, ProtocolAbort, TransportError

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_HANDSHAKE = 4
EXIT_PROTOCOL = 5


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tridiff",
        description="Three-party secret-shared diffusion sampling toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="refit approximation coefficients")
    p_fit.add_argument("--function", required=True,
                       choices=["exp", "silu", "mish"])
    p_fit.add_argument("--interval", nargs=2, type=float, default=None,
                       metavar=("LO", "HI"),
                       help="fit interval (exp only; default -14 0)")
    p_fit.add_argument("--degree", type=int, default=7,
                       help="polynomial degree (exp only; default 7)")
    p_fit.add_argument("--output", required=True)

    p_acc = sub.add_parser("accuracy", help="approximation error report")
    p_acc.add_argument("--activation", required=True,
                       choices=["silu", "mish", "exp"])
    p_acc.add_argument("--grid", type=int, default=100_001)
    p_acc.add_argument("--coeffs", default=None,
                       help="evaluate a coefficient file instead of the built-ins")

    p_sample = sub.add_parser("sample", help="sample one image")
    p_sample.add_argument("--config", required=True)
    p_sample.add_argument("--mode", default="plain",
                          choices=["plain", "mpc-local", "mpc-tcp"])
    p_sample.add_argument("--params", required=True)
    p_sample.add_argument("--out", required=True,
                          help="output prefix; writes .pgm, .raw, .cost.txt")
    p_sample.add_argument("--flavor", default="approx",
                          choices=["approx", "exact"],
                          help="plain-mode nonlinearity flavor")
    p_sample.add_argument("--tcp-party", type=int, default=0,
                          choices=[0, 1, 2],
                          help="which party this process plays in mpc-tcp mode")
    p_sample.add_argument("--json", action="store_true",
                          help="emit the cost report as JSON")

    p_party = sub.add_parser("party", help="run one TCP party to completion")
    p_party.add_argument("--id", type=int, required=True, choices=[0, 1, 2])
    p_party.add_argument("--config", required=True)
    p_party.add_argument("--params", required=True)
    p_party.add_argument("--out", default=None,
                         help="optional output prefix for this party's copy")
    p_party.add_argument("--json", action="store_true")

    p_bench = sub.add_parser("bench", help="bytes/rounds/time per protocol")
    p_bench.add_argument("--protocol", required=True,
                         choices=["mul", "relu", "silu", "mish", "softmax",
                                  "baseline-softmax", "baseline-silu",
                                  "baseline-mish"])
    p_bench.add_argument("--size", type=int, default=64)
    p_bench.add_argument("--trials", type=int, default=3)
    p_bench.add_argument("--seed", type=int, default=7)

    p_make = sub.add_parser("make-params",
                            help="write a seeded random parameter file")
    p_make.add_argument("--seed", type=int, default=0)
    p_make.add_argument("--output", required=True)

    return parser


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_fit(args) -> int:
    if args.function == "exp":
        interval = tuple(args.interval) if args.interval else (-14.0, 0.0)
        if args.degree < 0:
            raise ValueError("degree must be nonnegative")
        cfs, report = coeffs_mod.fit_polynomial(np.exp, interval, args.degree)
        coeffs_mod.write_coeff_file(
            args.output, cfs,
            header=f"exp fit on [{interval[0]}, {interval[1]}], "
                   f"degree {args.degree}, Chebyshev basis c0..c{args.degree}")
        print(f"fit exp degree={args.degree} interval=[{interval[0]}, "
              f"{interval[1]}] {report.format()}")
    else:
        fit, report = coeffs_mod.fit_activation(args.function)
        ordered = list(fit.quad) + list(fit.hexic)
        coeffs_mod.write_coeff_file(
            args.output, ordered,
            header=(f"{args.function} piecewise fit: x^2,x,1 on [-6,-2] then "
                    f"x^6,x^4,x^2,x,1 on [-2,6]"))
        exact = (reference.exact_silu if args.function == "silu"
                 else reference.exact_mish)
        xs0 = np.linspace(-6.0, -2.0, 20_001)
        q = fit.quad
        mse0 = float(np.mean((q[0] * xs0 ** 2 + q[1] * xs0 + q[2]
                              - exact(xs0)) ** 2))
        xs1 = np.linspace(-2.0, 6.0, 20_001)
        c = fit.hexic
        mse1 = float(np.mean((c[0] * xs1 ** 6 + c[1] * xs1 ** 4
                              + c[2] * xs1 ** 2 + c[3] * xs1 + c[4]
                              - exact(xs1)) ** 2))
        print(f"fit {args.function} branch[-6,-2] degree=2 mse={mse0:.6e}")
        print(f"fit {args.function} branch[-2,6] degree=6(even+linear) "
              f"mse={mse1:.6e}")
        print(f"fit {args.function} overall {report.format()}")
    print(f"wrote {args.output}")
    return EXIT_OK


def _cmd_accuracy(args) -> int:
    if args.grid < 2:
        raise ValueError("grid must have at least 2 points")
    if args.activation == "exp":
        fit = (coeffs_mod.exp_fit_from_file(args.coeffs) if args.coeffs
               else coeffs_mod.EXP_FIT)
        xs = np.linspace(fit.cutoff, 0.0, args.grid)
        approx = approx_negexp(xs, fit)
        exact = np.exp(xs)
    else:
        if args.coeffs:
            fit = coeffs_mod.activation_fit_from_file(args.coeffs,
                                                      args.activation)
        else:
            fit = coeffs_mod.activation_fit(args.activation)
        xs = np.linspace(-8.0, 8.0, args.grid)
        approx = (approx_silu(xs, fit) if args.activation == "silu"
                  else approx_mish(xs, fit))
        exact = (reference.exact_silu(xs) if args.activation == "silu"
                 else reference.exact_mish(xs))
    err = np.abs(approx - exact)
    worst = int(err.argmax())
    print(f"activation={args.activation} grid={args.grid}")
    print(f"mse={np.mean((approx - exact) ** 2):.6e}")
    print(f"max_abs={err[worst]:.6e}")
    print(f"worst_input={xs[worst]:.6f}")
    return EXIT_OK


def _write_sample_outputs(prefix: str, img, report, as_json: bool) -> None:
    sampler.write_pgm(f"{prefix}.pgm", img)
    sampler.write_raw(f"{prefix}.raw", img)
    if as_json:
        with open(f"{prefix}.cost.json", "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        with open(f"{prefix}.cost.txt", "w", encoding="utf-8") as fh:
            fh.write(report.format_text())


def _cmd_sample(args) -> int:
    cfg = load_config(args.config)
    params = load_params(args.params, activation=cfg.activation,
                         dims=cfg.sampler_config().dims)
    scfg = cfg.sampler_config()
    report = sampler.CostReport()
    if args.mode == "plain":
        img = sampler.run_plain(params, scfg, flavor=args.flavor)
    elif args.mode == "mpc-local":
        img, report = sampler.run_mpc_local(params, scfg, ring=cfg.ring())
    else:
        img, tracker = sampler.run_mpc_tcp_party(
            args.tcp_party, cfg.addresses(), params, scfg, ring=cfg.ring(),
            config_crc=cfg.crc(), timeout=cfg.net_timeout)
        report = sampler.CostReport()
        report.bytes_sent[tracker.party] = tracker.bytes_sent
        report.messages_sent[tracker.party] = tracker.messages_sent
        report.rounds = tracker.rounds
        report.per_protocol = {k: dict(v) for k, v in tracker.per_label.items()}
    _write_sample_outputs(args.out, img, report, args.json)
    print(f"wrote {args.out}.pgm")
    return EXIT_OK


def _cmd_party(args) -> int:
    cfg = load_config(args.config)
    params = load_params(args.params, activation=cfg.activation,
                         dims=cfg.sampler_config().dims)
    img, tracker = sampler.run_mpc_tcp_party(
        args.id, cfg.addresses(), params, cfg.sampler_config(),
        ring=cfg.ring(), config_crc=cfg.crc(), timeout=cfg.net_timeout)
    report = sampler.CostReport()
    report.bytes_sent[tracker.party] = tracker.bytes_sent
    report.messages_sent[tracker.party] = tracker.messages_sent
    report.rounds = tracker.rounds
    report.per_protocol = {k: dict(v) for k, v in tracker.per_label.items()}
    if args.out:
        _write_sample_outputs(args.out, img, report, args.json)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        sys.stdout.write(report.format_text())
    return EXIT_OK


_BENCH_FNS = {
    "mul": lambda rt, x: rss.mul_raw(rt, x, x),
    "relu": nonlinear.secure_relu,
    "silu": nonlinear.secure_silu,
    "mish": nonlinear.secure_mish,
    "softmax": nonlinear.secure_softmax,
    "baseline-softmax": nonlinear.baseline_softmax,
    "baseline-silu": nonlinear.baseline_silu,
    "baseline-mish": nonlinear.baseline_mish,
}


def run_bench(protocol: str, size: int, trials: int, seed: int = 7):
    """One benchmark row: mean payload bytes, rounds, and wall time over
    ``trials`` runs of ``protocol`` on a size-``size`` vector of inputs drawn
    uniformly from [-6, 6]."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if size < 1:
        raise ValueError("size must be >= 1")
    fn = _BENCH_FNS[protocol]
    rng = np.random.default_rng(seed)
    totals = {"bytes": 0.0, "rounds": 0.0, "time": 0.0}
    for trial in range(trials):
        values = rng.uniform(-6.0, 6.0, size=size)

        def program(rt):
            x = rss.Dealer(rt.ring, seed + trial).share_reals(values)[rt.party]
            return fn(rt, x)

        start = time.perf_counter()
        _, report = rss.spawn_local_parties(program, master_seed=seed + trial)
        totals["time"] += time.perf_counter() - start
        totals["bytes"] += report.total_bytes
        totals["rounds"] += report.rounds
    return {k: v / trials for k, v in totals.items()}


def _cmd_bench(args) -> int:
    row = run_bench(args.protocol, args.size, args.trials, args.seed)
    print(f"protocol={args.protocol} size={args.size} trials={args.trials} "
          f"bytes={row['bytes']:.0f} rounds={row['rounds']:.0f} "
          f"wall_time={row['time']:.4f}s")
    return EXIT_OK


def _cmd_make_params(args) -> int:
    save_params(args.output, random_params(seed=args.seed))
    print(f"wrote {args.output}")
    return EXIT_OK


_COMMANDS = {
    "fit": _cmd_fit,
    "accuracy": _cmd_accuracy,
    "sample": _cmd_sample,
    "party": _cmd_party,
    "bench": _cmd_bench,
    "make-params": _cmd_make_params,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except HandshakeError as exc:
        print(f"handshake error: {exc}", file=sys.stderr)
        return EXIT_HANDSHAKE
    except (ProtocolAbort, TransportError) as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except ParamFormatError as exc:
        print(f"parameter file error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        name = getattr(exc, "filename", None)
        where = f" ({name})" if name else ""
        print(f"i/o error: {exc}{where}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"argument error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
