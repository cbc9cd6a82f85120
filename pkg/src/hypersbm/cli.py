"""Command-line front end.

Subcommands: sample, mp, infer, energy, landscape, bounds, diagnostics,
eval, sweep.  Exit codes: 0 success, 2 input/validation error, 3 numerical
abort.  An optional JSON config file supplies flag defaults; explicit flags
win.  The environment variable HYPERSBM_WORKERS overrides the sweep worker
pool size.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .errors import InputError, NumericalAbort
from .hypergraph import (
    Hypergraph,
    canonical_node_order,
    load_hypergraph,
    relabel,
    truncate,
    write_hypergraph,
)
from .model import ModelParams
from .sampling import SamplerConfig, sample_hypergraph
from .mp import MpConfig, hard_assignment, run_mp
from .em import EmConfig, run_em
from .energy import free_energy, simplex_sweep
from .detectability import detectability_report, entropy_diagnostics, ensemble_size_distribution, ks_threshold
from .metrics import EvalReport, auc_link_prediction, labels_to_marginals, nmi, overlap, size_histogram

logger = logging.getLogger(__name__)

WORKERS_ENV = "HYPERSBM_WORKERS"


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    argv = _apply_config_defaults(parser, argv)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3
    return 0


def _apply_config_defaults(parser, argv):
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if known.config:
        with open(known.config, "r", encoding="utf-8") as fh:
            defaults = json.load(fh)
        if not isinstance(defaults, dict):
            raise InputError("config file must hold a JSON object")
        for sub in parser._subparsers._group_actions[0].choices.values():
            sub.set_defaults(**{k: v for k, v in defaults.items()})
    return [a for i, a in enumerate(argv)
            if not (a == "--config" or (i > 0 and argv[i - 1] == "--config"))]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypersbm", description=__doc__)
    parser.add_argument("--version", action="version", version=f"hypersbm {__version__}")
    parser.add_argument("--config", help="JSON file of flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw a synthetic hypergraph")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--communities", type=int, default=2)
    p.add_argument("--degree", type=float, default=None, help="mean community degree c")
    p.add_argument("--cin", type=float, default=None)
    p.add_argument("--cout", type=float, default=None)
    p.add_argument("--params", default=None, help="parameter file overriding the block flags")
    p.add_argument("--max-size", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("mp", help="run message passing at fixed parameters")
    _mp_flags(p)
    p.add_argument("--hypergraph", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--nodes", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mp)

    p = sub.add_parser("infer", help="learn communities and parameters by EM")
    _mp_flags(p, alpha_default=0.01)
    p.add_argument("--hypergraph", required=True)
    p.add_argument("-K", "--communities", type=int, required=True)
    p.add_argument("--nodes", type=int, default=None)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--em-iters", type=int, default=50)
    p.add_argument("--em-eps", type=float, default=1e-4)
    p.add_argument("--max-size", type=int, default=None,
                   help="drop hyperedges larger than this before inference")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("energy", help="cavity free energy of data at fixed parameters")
    _mp_flags(p)
    p.add_argument("--hypergraph", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--nodes", type=int, default=None)
    p.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("landscape", help="free-energy simplex sweep over parameter vertices")
    _mp_flags(p)
    p.add_argument("--hypergraph", required=True)
    p.add_argument("--vertex", action="append", required=True,
                   help="parameter file; give exactly three")
    p.add_argument("--nodes", type=int, default=None)
    p.add_argument("--resolution", type=int, default=15)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_landscape)

    p = sub.add_parser("bounds", help="detectability bounds and their decomposition")
    p.add_argument("--communities", type=int, required=True)
    p.add_argument("--degree", type=float, required=True)
    p.add_argument("--max-size", type=int, required=True)
    p.add_argument("--kappa", default="default")
    p.add_argument("--nodes", type=int, default=10_000,
                   help="node count entering the kappa schedule")
    p.add_argument("--cout", type=float, default=None,
                   help="evaluate stability of the equal-blocks model at this c_out")
    p.add_argument("--empirical", default=None, help="hypergraph file for empirical mode")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("diagnostics", help="entropy diagnostics of a hypergraph")
    p.add_argument("--hypergraph", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_diagnostics)

    p = sub.add_parser("eval", help="score predicted communities")
    p.add_argument("--pred", required=True, help="predicted labels, one per line")
    p.add_argument("--truth", required=True, help="true labels, one per line")
    p.add_argument("--marginals", default=None, help="tab-separated N x K marginals")
    p.add_argument("--hypergraph", default=None)
    p.add_argument("--params", default=None)
    p.add_argument("--auc-samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="overlap across an assortativity grid")
    _mp_flags(p)
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--communities", type=int, required=True)
    p.add_argument("--degree", type=float, required=True)
    p.add_argument("--max-size", type=int, default=2)
    p.add_argument("--ratios", default="0:0.9:15",
                   help="c_out/c_in grid as start:stop:count")
    p.add_argument("--cout-values", default=None, help="comma-separated c_out grid (overrides --ratios)")
    p.add_argument("--replicates", type=int, default=3, help="seeds per grid point")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    return parser


def _mp_flags(p, alpha_default=0.25):
    p.add_argument("--alpha", type=float, default=alpha_default, help="dropout fraction")
    p.add_argument("--damping", type=float, default=0.3, help="update damping fraction")
    p.add_argument("--eps", type=float, default=1e-6, help="convergence threshold")
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--patience", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)


def _mp_config(args) -> MpConfig:
    return MpConfig(dropout=args.alpha, damping=args.damping, tol=args.eps,
                    max_iter=args.max_iter, patience=args.patience, seed=args.seed)


def _load_graph(args) -> Hypergraph:
    h, _ = load_hypergraph(args.hypergraph, num_nodes=getattr(args, "nodes", None))
    return h


def _load_params(path, num_nodes) -> ModelParams:
    return ModelParams.load(path, num_nodes)


def _write_json(payload: dict, path: str | None):
    text = json.dumps(payload, indent=2, default=_jsonable)
    if path is None:
        print(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.bool_,)):
        return bool(x)
    raise TypeError(f"not JSON serializable: {type(x)}")


def _write_assignment(labels, path):
    with open(path, "w", encoding="utf-8") as fh:
        for v in labels:
            fh.write(f"{int(v)}\n")


def _write_marginals(marginals, path):
    with open(path, "w", encoding="utf-8") as fh:
        for row in marginals:
            fh.write("\t".join(f"{x:.12g}" for x in row) + "\n")


def _read_labels(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        return np.array([int(line.strip()) for line in fh if line.strip()], dtype=np.int64)


# ---------------------------------------------------------------------------


def cmd_sample(args):
    params = _sample_params(args)
    h, labels = sample_hypergraph(params, SamplerConfig(seed=args.seed))
    # relabel so that a write/load round trip yields identical dense ids
    order = canonical_node_order(h)
    h = relabel(h, order)
    new_labels = np.empty_like(labels)
    new_labels[order] = labels
    write_hypergraph(h, args.out + ".hyg")
    _write_assignment(new_labels, args.out + ".assign")
    print(f"wrote {h.num_hyperedges} hyperedges on {h.num_nodes} nodes to {args.out}.hyg")


def _sample_params(args) -> ModelParams:
    if args.params:
        return ModelParams.load(args.params, args.nodes)
    K = args.communities
    degree, cin, cout = args.degree, args.cin, args.cout
    given = sum(x is not None for x in (degree, cin, cout))
    if given < 2:
        raise InputError("give --params, or at least two of --degree/--cin/--cout")
    if degree is None:
        degree = (cin + (K - 1) * cout) / K
    elif cout is None:
        cout = (K * degree - cin) / max(K - 1, 1) if cin is not None else 0.0
    if cin is not None and abs(cin + (K - 1) * cout - K * degree) > 1e-6:
        raise InputError("--cin/--cout inconsistent with --degree: need c_in + (K-1) c_out = K c")
    return ModelParams.assortative(args.nodes, K, degree, cout, args.max_size)


def cmd_mp(args):
    h = _load_graph(args)
    params = _load_params(args.params, h.num_nodes)
    started = time.perf_counter()
    result = run_mp(h, params, _mp_config(args))
    elapsed = time.perf_counter() - started
    _write_marginals(result.state.marginals, args.out + ".marginals")
    _write_assignment(hard_assignment(result.state.marginals), args.out + ".assign")
    _write_json({
        "sweeps": result.sweeps,
        "final_delta": result.final_delta,
        "converged": result.converged,
        "elapsed_seconds": elapsed,
    }, args.out + ".report.json")


def cmd_infer(args):
    h = _load_graph(args)
    if args.max_size is not None:
        h = truncate(h, args.max_size)
    config = EmConfig(
        num_communities=args.communities,
        tol=args.em_eps,
        max_iter=args.em_iters,
        restarts=args.restarts,
        seed=args.seed,
        mp=_mp_config(args),
    )
    started = time.perf_counter()
    result = run_em(h, config)
    elapsed = time.perf_counter() - started
    result.params.save(args.out + ".params.json")
    _write_marginals(result.marginals, args.out + ".marginals")
    _write_assignment(result.assignment, args.out + ".assign")
    _write_json({
        "free_energy": result.free_energy,
        "converged": result.converged,
        "em_steps": len(result.delta_trace),
        "best_restart": result.restart,
        "elapsed_seconds": elapsed,
    }, args.out + ".report.json")


def cmd_energy(args):
    h = _load_graph(args)
    params = _load_params(args.params, h.num_nodes)
    result = run_mp(h, params, _mp_config(args))
    fe = free_energy(h, params, result.state)
    _write_json({
        "free_energy": fe.total,
        "node_terms": fe.sum_fi,
        "observed_hyperedge_terms": fe.sum_fe_observed,
        "unobserved_hyperedge_terms": fe.sum_fe_unobserved,
        "mp_converged": result.converged,
        "mp_sweeps": result.sweeps,
    }, args.out)


def cmd_landscape(args):
    h = _load_graph(args)
    if len(args.vertex) != 3:
        raise InputError("landscape needs exactly three --vertex files")
    vertices = [_load_params(path, h.num_nodes) for path in args.vertex]
    rows = simplex_sweep(h, vertices, resolution=args.resolution,
                         mp_config=_mp_config(args), seed=args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("lambda1\tlambda2\tlambda3\tfree_energy\tconverged\tsweeps\n")
        for row in rows:
            fh.write("\t".join([
                f"{row['lambda1']:.6g}", f"{row['lambda2']:.6g}", f"{row['lambda3']:.6g}",
                f"{row['free_energy']:.12g}", str(int(row["converged"])), str(row["sweeps"]),
            ]) + "\n")
    print(f"wrote {len(rows)} grid points to {args.out}")


def cmd_bounds(args):
    K, degree, D = args.communities, args.degree, args.max_size
    # with no --cout, build the perfectly mixed model: thresholds and the
    # phi decomposition do not depend on the matrix, only on (K, c, D)
    cout = args.cout if args.cout is not None else degree
    params = ModelParams.assortative(args.nodes, K, degree, cout, D,
                                     kappa=_kappa_from_flag(args))
    h = None
    if args.empirical:
        h, _ = load_hypergraph(args.empirical)
        if h.max_size > params.max_size:
            raise InputError("empirical hypergraph exceeds --max-size")
    report = detectability_report(params, hypergraph=h,
                                  evaluate_matrix=args.cout is not None)
    payload = report.to_dict()
    _write_json(payload, args.out)
    if args.out is not None:
        return
    print(_bounds_table(payload))


def _kappa_from_flag(args):
    from .model import KappaSchedule

    if args.kappa == "default":
        return KappaSchedule.default(args.nodes, args.max_size)
    values = [float(x) for x in args.kappa.split(",")]
    return KappaSchedule.from_values(args.nodes, values)


def _bounds_table(payload: dict) -> str:
    keys = ["num_communities", "degree", "max_size", "mode", "mean_degree", "mean_size",
            "alpha", "beta", "gamma1", "gamma2", "gamma", "phi", "threshold",
            "eigenvalue", "criterion_value", "stable"]
    width = max(len(k) for k in keys)
    lines = []
    for k in keys:
        v = payload.get(k)
        if isinstance(v, float):
            v = f"{v:.6g}"
        lines.append(f"{k:<{width}}  {v}")
    return "\n".join(lines)


def cmd_diagnostics(args):
    h, _ = load_hypergraph(args.hypergraph)
    diag = entropy_diagnostics(h)
    _write_json(diag.to_dict(), args.out)


def cmd_eval(args):
    pred = _read_labels(args.pred)
    truth = _read_labels(args.truth)
    if pred.shape != truth.shape:
        raise InputError("pred and truth must list the same number of nodes")
    K = int(max(pred.max(), truth.max())) + 1
    if args.marginals:
        marginals = np.loadtxt(args.marginals, ndmin=2)
    else:
        marginals = labels_to_marginals(pred, K)
    if marginals.shape[1] < K:
        pad = np.zeros((marginals.shape[0], K - marginals.shape[1]))
        marginals = np.hstack([marginals, pad])

    report = EvalReport()
    counts = np.bincount(truth, minlength=K)
    prior = counts / counts.sum()
    if K >= 2 and prior.max() < 1.0:
        report.overlap_raw = overlap(marginals, truth, prior)
        report.overlap = max(report.overlap_raw, 0.0)
    report.nmi = nmi(pred, truth)
    if args.hypergraph and args.params:
        h, _ = load_hypergraph(args.hypergraph)
        params = _load_params(args.params, h.num_nodes)
        rng = np.random.default_rng(args.seed)
        report.auc = auc_link_prediction(h, params, pred[:h.num_nodes],
                                         num_comparisons=args.auc_samples, rng=rng)
        report.size_histogram = size_histogram(h)
    _write_json(report.to_dict(), args.out)


# -- sweep ------------------------------------------------------------------


def _sweep_grid(args):
    K, c = args.communities, args.degree
    if args.cout_values:
        couts = [float(x) for x in args.cout_values.split(",")]
    else:
        try:
            start, stop, count = args.ratios.split(":")
            ratios = np.linspace(float(start), float(stop), int(count))
        except ValueError as exc:
            raise InputError("--ratios must be start:stop:count") from exc
        # ratio r = c_out / c_in with c_in + (K-1) c_out = K c
        couts = [float(K * c * r / (1.0 + (K - 1) * r)) for r in ratios]
    for cout in couts:
        if K * c - (K - 1) * cout < -1e-9:
            raise InputError(f"c_out={cout} implies negative c_in")
    return couts


def _sweep_point(task):
    (nodes, K, c, cout, D, seed, mp_kwargs) = task
    params = ModelParams.assortative(nodes, K, c, cout, D)
    h, truth = sample_hypergraph(params, SamplerConfig(seed=seed))
    started = time.perf_counter()
    result = run_mp(h, params, MpConfig(**mp_kwargs),
                    rng=np.random.default_rng(seed + 1))
    elapsed = time.perf_counter() - started
    value = overlap(result.state.marginals, truth, params.prior)
    return cout, seed, value, result.sweeps, result.converged, elapsed


def cmd_sweep(args):
    couts = _sweep_grid(args)
    K, c, D = args.communities, args.degree, args.max_size
    kappa_ref = ModelParams.assortative(args.nodes, K, c, couts[0], D).kappa
    threshold = ks_threshold(K, c, ensemble_size_distribution(kappa_ref), kappa=kappa_ref)
    mp_kwargs = dict(dropout=args.alpha, damping=args.damping, tol=args.eps,
                     max_iter=args.max_iter, patience=args.patience, seed=args.seed)
    tasks = []
    for i, cout in enumerate(couts):
        for rep in range(args.replicates):
            seed = int(np.random.SeedSequence(entropy=args.seed, spawn_key=(i, rep)).generate_state(1)[0] % (2**31))
            tasks.append((args.nodes, K, c, cout, D, seed, mp_kwargs))

    workers = int(os.environ.get(WORKERS_ENV, os.cpu_count() or 1))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(t) for t in tasks]

    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("c_out\tc_in\tratio\tmax_size\tseed\toverlap\tsweeps\tconverged"
                 "\telapsed_seconds\tthreshold_gap\n")
        for cout, seed, value, sweeps, converged, elapsed in results:
            cin = K * c - (K - 1) * cout
            ratio = cout / cin if cin > 0 else float("inf")
            fh.write("\t".join([
                f"{cout:.6g}", f"{cin:.6g}", f"{ratio:.6g}", str(D), str(seed),
                f"{value:.6g}", str(sweeps), str(int(converged)),
                f"{elapsed:.3f}", f"{threshold:.6g}",
            ]) + "\n")
    print(f"wrote {len(results)} rows to {args.out}")


if __name__ == "__main__":
    sys.exit(main())
