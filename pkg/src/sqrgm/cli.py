"""Command-line front end: ``sqrgm <command> [options]``.

Exit codes: 0 success, 2 usage, 3 data error, 4 numeric/validity error.
Failures print one line ``ErrorClass: detail`` on stderr.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import bench
from .errors import InvalidParamsError, ParseError, SqrError
from .estimation import FitConfig, fit, fit_independent_baseline
from .family import FamilyTag, node_log_partition
from .io import load_csv, save_csv
from .model import Normalizability, check_normalizable, load_model, save_model
from .sampling import AisConfig, GibbsConfig, ais_log_partition, gibbs_sample, log_likelihood

FAMILIES = [t.value for t in FamilyTag]


def default_threads() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# commands

def cmd_fit(args):
    data = load_csv(args.input, args.family, args.header)
    cfg = FitConfig(lam=args.lam, max_iters=args.max_iters, grad_tol=args.grad_tol)
    model, nodes = fit(data.values, cfg, args.family, threads=args.threads, return_nodes=True)
    save_model(model, args.output)
    print("node,iterations,converged,kkt_residual,objective")
    for nf in nodes:
        obj = nf.objective_trace[-1] if nf.objective_trace else float("nan")
        print(f"{nf.s},{nf.iterations},{int(nf.converged)},{nf.kkt_residual:.3e},{obj:.10g}")
    n_conv = sum(nf.converged for nf in nodes)
    print(f"# {n_conv}/{len(nodes)} nodes converged; model written to {args.output}")
    if args.edges:
        names = data.column_names or [str(i) for i in range(model.p)]
        iu = np.triu_indices(model.p, k=1)
        w = model.phi[iu]
        keep = np.flatnonzero(w != 0)
        rows = [[names[iu[0][i]], names[iu[1][i]], format(w[i], ".17g")] for i in keep]
        with open(args.edges, "w") as fh:
            fh.write("source,target,weight\n")
            fh.writelines(",".join(r) + "\n" for r in rows)
    return 0


def cmd_baseline(args):
    data = load_csv(args.input, args.family, args.header)
    model = fit_independent_baseline(data.values, args.family)
    save_model(model, args.output)
    print(f"independent {model.tag.value} model with p={model.p} written to {args.output}")
    return 0


def cmd_sample(args):
    model = load_model(args.model)
    cfg = GibbsConfig(sweeps=args.sweeps, slice_steps=args.slice_steps)
    x = gibbs_sample(model, args.n, cfg, rng=args.seed, threads=args.threads)
    if args.output == "-":
        for row in x:
            print(",".join(format(v, ".17g") for v in row))
    else:
        save_csv(args.output, x)
    return 0


def _is_independent(model):
    return not np.any(model.phi_off)


def _log_partition(model, args):
    # independent models have an exact log partition; AIS otherwise
    if _is_independent(model):
        a = float(np.sum(node_log_partition(model.tag, (model.phi_diag, model.theta))))
        return a, 0.0, "exact"
    diag = check_normalizable(model)
    if diag.status is Normalizability.INVALID:
        raise InvalidParamsError(f"model is not normalizable: {diag}")
    cfg = AisConfig(
        num_chains=args.ais_chains,
        anneal_steps=args.anneal_steps,
        gibbs_per_step=args.gibbs_per_step,
        slice_steps=args.slice_steps,
    )
    res = ais_log_partition(model, cfg, rng=args.seed, threads=args.threads)
    return res.log_partition, res.std_err, "AIS"


def cmd_loglik(args):
    model = load_model(args.model)
    data = load_csv(args.input, model.tag, args.header)
    if data.p != model.p:
        raise ParseError(f"data has {data.p} columns, model has p={model.p}")
    a, se, how = _log_partition(model, args)
    ll = log_likelihood(model, data.values, a)
    n = data.n
    print(f"log_likelihood = {ll:.17g}")
    print(f"log_partition = {a:.17g} +/- {se:.3g} ({how})")
    print(f"mean_log_likelihood = {ll / n:.17g}")
    if args.baseline:
        base = load_model(args.baseline)
        if base.tag is not model.tag or base.p != model.p:
            raise ParseError("baseline model family or dimension differs from the model")
        a0, se0, how0 = _log_partition(base, args)
        ll0 = log_likelihood(base, data.values, a0)
        print(f"baseline_log_likelihood = {ll0:.17g}")
        print(f"baseline_log_partition = {a0:.17g} +/- {se0:.3g} ({how0})")
        print(f"relative_likelihood = {bench.relative_likelihood(ll, ll0, n):.17g}")
    return 0


def cmd_synth_chain(args):
    gibbs = GibbsConfig(sweeps=args.sweeps, slice_steps=args.slice_steps)
    fit_cfg = FitConfig(lam=args.lam, max_iters=args.max_iters)

    def progress(row):
        if args.verbose:
            print(f"# k={row.k} n={row.n} seed={row.seed} precision={row.precision:.4f}", file=sys.stderr)

    rows = bench.run_chain_experiment(
        p=args.p, lam=args.lam, ks=args.k, ns=args.n, seeds=args.seed,
        gibbs=gibbs, fit_cfg=fit_cfg, threads=args.threads, progress=progress,
    )
    text = bench.rows_to_csv(rows)
    sys.stdout.write(text)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    return 0


def cmd_check(args):
    model = load_model(args.model)
    diag = check_normalizable(model, n_probes=args.probes)
    print(diag)
    return 4 if diag.status is Normalizability.INVALID else 0


# ---------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="sqrgm", description="Square root graphical models.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def threads(p):
        p.add_argument("--threads", type=int, default=default_threads(),
                       help="worker threads (output does not depend on this)")

    def family(p):
        p.add_argument("--family", required=True, choices=FAMILIES)

    def data_in(p):
        p.add_argument("--input", required=True, help="CSV, one instance per row")
        p.add_argument("--header", action="store_true", help="first CSV line holds column names")

    p = sub.add_parser("fit", help="l1-regularized node-wise fit")
    family(p)
    data_in(p)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--grad-tol", type=float, default=1e-6)
    p.add_argument("--output", required=True)
    p.add_argument("--edges", help="also write nonzero edges as source,target,weight CSV")
    threads(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("baseline", help="independent-model MLE")
    family(p)
    data_in(p)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("sample", help="Gibbs sampling")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sweeps", type=int, default=1000)
    p.add_argument("--slice-steps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default="-")
    threads(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("loglik", help="log-likelihood via AIS")
    p.add_argument("--model", required=True)
    data_in(p)
    p.add_argument("--ais-chains", type=int, default=1000)
    p.add_argument("--anneal-steps", type=int, default=100)
    p.add_argument("--gibbs-per-step", type=int, default=10)
    p.add_argument("--slice-steps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--baseline", help="second model; prints the per-instance likelihood ratio")
    threads(p)
    p.set_defaults(func=cmd_loglik)

    p = sub.add_parser("synth-chain", help="edge recovery on circular chain graphs")
    p.add_argument("--p", type=int, default=30)
    p.add_argument("--k", type=int, nargs="+", default=[1])
    p.add_argument("--n", type=int, nargs="+", default=[400])
    p.add_argument("--lambda", dest="lam", type=float, default=1e-5)
    p.add_argument("--seed", type=int, nargs="+", default=[0])
    p.add_argument("--sweeps", type=int, default=1000)
    p.add_argument("--slice-steps", type=int, default=10)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--output", help="also write the CSV table here")
    threads(p)
    p.set_defaults(func=cmd_synth_chain)

    p = sub.add_parser("check", help="normalizability certificate or witness")
    p.add_argument("--model", required=True)
    p.add_argument("--probes", type=int, default=10_000)
    p.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SqrError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"IOError: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"UsageError: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
