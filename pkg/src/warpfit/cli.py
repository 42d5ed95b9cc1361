"""Command-line interface.

Exit codes: 0 success, 1 test rejected and ``--fail-on-reject`` was given,
2 usage error, 3 data error. Errors go to standard error as
``warpfit:<kind>: <message>``.
"""

from __future__ import annotations

import argparse
import itertools
import os
import sys

import numpy as np

from .align import minimize_alignment
from .boot import BootstrapConfig, gof_test, threshold_test
from .deform import ParameterVector, get_family
from .empirical import frechet_mean, variation_r, wasserstein_r
from .exceptions import InvalidSpec, WarpfitError
from .experiments import run_level_experiment, run_power_experiment
from .io import dumps_json, read_samples, write_text
from .limitlaw import DEFAULT_N, sample_gof_limit
from .rng import RandomStream
from .scenarios import DistSpec

EXIT_OK, EXIT_REJECT, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3
FAMILIES = ("location-scale", "scale", "location")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _default_seed():
    raw = os.environ.get("WARPFIT_SEED")
    if raw is None or raw.strip() == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"WARPFIT_SEED must be an integer, got {raw!r}") from None


def _emit(text, out):
    if out:
        write_text(out, text)
    else:
        sys.stdout.write(text)


def _bootstrap_config(args, default_exp):
    m_exp = default_exp if args.m_exp is None and args.m is None else args.m_exp
    return BootstrapConfig(
        B=args.B, m_exponent=m_exp, m=args.m, seed=args.seed, alpha=args.alpha,
        scheme=getattr(args, "scheme", None),
    )


def _cmd_variation(args):
    ids, ds = read_samples(args.input)
    bary = frechet_mean(ds, args.r)
    payload = {
        "r": args.r,
        "variation": variation_r(ds, args.r),
        "samples": [
            {"sample_id": sid, "n": d.n, "distance_to_barycenter": wasserstein_r(d, bary, args.r)}
            for sid, d in zip(ids, ds)
        ],
    }
    _emit(dumps_json(payload), args.out)
    return EXIT_OK


def _cmd_align(args):
    ids, ds = read_samples(args.input)
    fam = get_family(args.family)
    ref = _ref_index(args.ref, ids)
    res = minimize_alignment(ds, fam, ref)
    payload = {
        "family": fam.name,
        "cost": res.cost,
        "reference": ids[res.theta_hat.ref_index],
        "converged": res.converged,
        "method": res.method,
        "parameters": {sid: lam.tolist() for sid, lam in zip(ids, res.theta_hat.thetas)},
    }
    _emit(dumps_json(payload), args.out)
    return EXIT_OK


def _ref_index(ref, ids):
    if ref is None:
        return None
    if ref in ids:
        return ids.index(ref)
    raise UsageError(f"--ref {ref!r} is not a sample_id in the input")


def _cmd_test(args):
    ids, ds = read_samples(args.input)
    ref = _ref_index(args.ref, ids)
    if args.kind == "gof":
        cfg = _bootstrap_config(args, 0.9)
        report = gof_test(ds, args.family, ref, cfg)
    else:
        if args.delta0 is None:
            raise UsageError("test threshold requires --delta0")
        if args.scheme == "pooled":
            raise UsageError("test threshold supports only --scheme independent")
        cfg = _bootstrap_config(args, 0.5)
        report = threshold_test(ds, args.family, ref, args.delta0, cfg)
    _emit(dumps_json(report.to_dict()), args.out)
    return EXIT_REJECT if args.fail_on_reject and report.reject else EXIT_OK


def _grid(args):
    return list(itertools.product(args.J, args.n, args.m_exp))


def _cmd_simulate(args):
    common = dict(K=args.K, B=args.B, alpha=args.alpha, seed=args.seed, threads=args.threads,
                  family=args.family)
    if args.kind == "level":
        table = run_level_experiment(_grid(args), **common)
    else:
        table = run_power_experiment(_grid(args), args.gamma, **common)
    _emit(table.to_csv(), args.out)
    return EXIT_OK


def _cmd_limit(args):
    fam = get_family(args.family)
    err = DistSpec.parse(args.error).to_error_distribution()
    theta = ParameterVector(np.tile(fam.identity, (args.J, 1)), args.J - 1)
    draws = sample_gof_limit(
        fam, theta, err, N=args.N, stream=RandomStream(args.seed), size=args.size,
        centered=args.centered,
    )
    lines = ["draw"] + [repr(float(v)) for v in np.atleast_1d(draws)]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def build_parser(seed_default=0):
    parser = _Parser(prog="warpfit", description="Wasserstein variation and deformation-model tests.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, seed=True):
        p.add_argument("--out", help="output file (default: standard output)")
        p.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1,
                       help="worker threads; never changes results")
        if seed:
            p.add_argument("--seed", type=int, default=seed_default,
                           help="master seed (default: $WARPFIT_SEED or 0)")

    p = sub.add_parser("variation", help="Wasserstein r-variation of the samples")
    p.add_argument("--input", required=True)
    p.add_argument("--r", type=float, default=2.0)
    common(p, seed=False)
    p.set_defaults(func=_cmd_variation)

    p = sub.add_parser("align", help="fit a deformation model by minimal alignment cost")
    p.add_argument("--input", required=True)
    p.add_argument("--family", choices=FAMILIES, default="location-scale")
    p.add_argument("--ref", help="sample_id of the pinned reference (default: last)")
    common(p, seed=False)
    p.set_defaults(func=_cmd_align)

    p = sub.add_parser("test", help="bootstrap tests")
    tsub = p.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    for kind in ("gof", "threshold"):
        t = tsub.add_parser(kind)
        t.add_argument("--input", required=True)
        t.add_argument("--family", choices=FAMILIES, default="location-scale")
        t.add_argument("--ref")
        t.add_argument("--alpha", type=float, default=0.05)
        t.add_argument("--B", type=_positive_int, default=500)
        t.add_argument("--m-exp", type=float, default=None)
        t.add_argument("--m", type=_positive_int, default=None)
        t.add_argument("--scheme", choices=("pooled", "independent"), default=None)
        t.add_argument("--fail-on-reject", action="store_true")
        if kind == "threshold":
            t.add_argument("--delta0", type=float)
        else:
            t.set_defaults(delta0=None)
        common(t)
        t.set_defaults(func=_cmd_test)

    p = sub.add_parser("simulate", help="Monte Carlo level and power tables")
    ssub = p.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    for kind in ("level", "power"):
        s = ssub.add_parser(kind)
        s.add_argument("--J", type=int, nargs="+", required=True)
        s.add_argument("--n", type=int, nargs="+", required=True)
        s.add_argument("--m-exp", type=float, nargs="+", default=[0.9])
        s.add_argument("--K", type=_positive_int, default=300)
        s.add_argument("--B", type=_positive_int, default=500)
        s.add_argument("--alpha", type=float, default=0.05)
        s.add_argument("--family", choices=FAMILIES, default="location-scale")
        if kind == "power":
            s.add_argument("--gamma", required=True, help="e.g. exp(1), laplace(0,1), t(3)")
        common(s)
        s.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("limit", help="limit-law samplers")
    lsub = p.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    s = lsub.add_parser("sample", help="draws from the limit law of n * A_n")
    s.add_argument("--family", choices=FAMILIES, default="location")
    s.add_argument("--error", default="uniform(0,1)", help="error law, e.g. uniform(0,1)")
    s.add_argument("--J", type=int, default=2)
    s.add_argument("--size", type=_positive_int, default=1000)
    s.add_argument("--N", type=_positive_int, default=DEFAULT_N)
    s.add_argument("--centered", action="store_true")
    common(s)
    s.set_defaults(func=_cmd_limit)
    return parser


def _fail(kind, message, code):
    sys.stderr.write(f"warpfit:{kind}: {message}\n")
    return code


def main(argv=None):
    """Run the CLI and return its exit code."""
    try:
        args = build_parser(_default_seed()).parse_args(argv)
    except UsageError as exc:
        return _fail("usage-error", exc, EXIT_USAGE)
    try:
        return args.func(args)
    except UsageError as exc:
        return _fail("usage-error", exc, EXIT_USAGE)
    except InvalidSpec as exc:
        return _fail("usage-error", exc, EXIT_USAGE)
    except WarpfitError as exc:
        return _fail("data-error", exc, EXIT_DATA)
    except ValueError as exc:
        return _fail("usage-error", exc, EXIT_USAGE)
    except OSError as exc:
        return _fail("io-error", exc, EXIT_DATA)


if __name__ == "__main__":
    sys.exit(main())
