"""Command line front end.

Subcommands: generate (draw a graph and save it), find-structure (run a
star search and emit a certificate), validate (recheck a certificate
against its graph), simulate (extinction-time batch), sweep (grid of
(n, lambda) cells from a config file), oracle (exact mean extinction
time for tiny graphs), metastability (Exp(1) test on a records file).

Exit codes: 0 success, 1 domain failure (a search or statistical test
failed), 2 usage or I/O error.  Every output file starts with the same
provenance comments: tool version, the command line, the base seed.
Nothing time-dependent goes into output, so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import __version__, contact, graphs, stats, structure
from .config import (
    SpecError,
    load_sweep_config,
    parse_scale,
    parse_weight_model,
)

E_OK = 0
E_DOMAIN = 1
E_USAGE = 2

_PILOT_REPLICAS = 16
_PILOT_MULT = 40.0
_PILOT_CAP = 1e7
_PILOT_EVENT_BUDGET = 2e8
# seed strides keeping graph draws, cell batches, and pilot batches apart
_GRAPH_STRIDE = 104_729
_CELL_STRIDE = 1_000_003
_PILOT_OFFSET = 500_009


def _provenance(argv, seed):
    return (
        f"cplab {__version__}",
        "command: cplab " + " ".join(argv),
        f"base seed: {seed}",
    )


def _positive_float(text):
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(val) or val <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text}")
    return val


def _positive_int(text):
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if val < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text}")
    return val


def _seed_of(args):
    return 0 if args.seed is None else args.seed


# -- generate ----------------------------------------------------------


def _cmd_generate(args, argv):
    seed = _seed_of(args)
    if args.model == "er":
        if args.p is None:
            raise SpecError("er model needs --p")
        g = graphs.sample_er(args.n, args.p, seed)
    elif args.model == "irg":
        if args.weights is None:
            raise SpecError("irg model needs --weights")
        g = graphs.sample_irg(args.n, parse_weight_model(args.weights), seed)
    else:
        if args.spine is None or args.star is None:
            raise SpecError("glued-star model needs --spine and --star")
        g = graphs.glue_star_path(args.spine, args.star)
    if args.out is None:
        raise SpecError("generate needs --out")
    graphs.write_graph(g, args.out, _provenance(argv, seed))

    sizes, diameter, exact = graphs.components_and_diameter(g)
    mean_deg = 2.0 * g.n_edges / g.n if g.n else 0.0
    print(f"n={g.n} edges={g.n_edges} mean_degree={mean_deg:.4f}")
    shown = ",".join(str(s) for s in sizes[:6]) + (",..." if len(sizes) > 6 else "")
    bound = "" if exact else ">="
    print(f"components={len(sizes)} sizes={shown} diameter={bound}{diameter}")
    print(f"wrote {args.out}")
    return E_OK


# -- find-structure / validate -----------------------------------------


def _report_certificate(cert, n):
    ell = len(cert.stars)
    print(
        f"stars={ell} star_size={cert.star_size} mode={cert.mode} "
        f"spacing_bound={cert.spacing_bound} density={ell / n:.6g}"
    )


def _cmd_find_structure(args, argv):
    g = graphs.read_graph(args.graph)
    if args.mode == "irg":
        if args.k is None:
            raise SpecError("irg mode needs --k")
        cfg = structure.SearchConfig(
            seed_size=args.k,
            scale=parse_scale(args.scale),
            levels=args.levels,
            max_trials=args.max_trials,
            growth_fraction=args.growth_fraction,
            seed=_seed_of(args),
        )
        cert = structure.certify_irg(g, cfg)
    else:
        if args.m is None:
            raise SpecError("er mode needs --m")
        cert = structure.certify_er(g, args.m)

    # certify_* validate before returning; recheck anyway so the verdict
    # printed here never leans on the search path
    check = structure.validate_certificate(g, cert)
    if not check.valid:
        raise structure.StructureSearchError(
            "validation", "; ".join(check.violations)
        )
    _report_certificate(cert, g.n)
    if args.out is not None:
        structure.write_certificate(cert, args.out, _provenance(argv, _seed_of(args)))
        reread = structure.read_certificate(args.out)
        if not structure.validate_certificate(g, reread).valid:
            raise structure.StructureSearchError("validation", "reloaded file invalid")
        print(f"wrote {args.out}")
    return E_OK


def _cmd_validate(args, argv):
    g = graphs.read_graph(args.graph)
    cert = structure.read_certificate(args.certificate)
    check = structure.validate_certificate(g, cert)
    if check.valid:
        print("certificate valid")
        _report_certificate(cert, g.n)
        return E_OK
    for v in check.violations:
        print(f"violation: {v}")
    return E_DOMAIN


# -- simulate ----------------------------------------------------------


def _cmd_simulate(args, argv):
    g = graphs.read_graph(args.graph)
    seed = _seed_of(args)
    records = contact.batch(
        g, args.lam, args.replicas, args.tmax, seed, threads=args.threads
    )
    taus = np.array([r.tau for r in records])
    n_cens = sum(r.censored for r in records)
    print(
        f"replicas={len(records)} mean_tau={taus.mean():.6f} "
        f"median_tau={np.median(taus):.6f} censored={n_cens}"
    )
    if args.out is not None:
        contact.write_records(records, args.out, _provenance(argv, seed))
        print(f"wrote {args.out}")
    return E_OK


# -- oracle ------------------------------------------------------------


def _cmd_oracle(args, argv):
    g = graphs.read_graph(args.graph)
    if g.n > 20:
        print(
            f"refused: graph has {g.n} vertices; the exact solver stops at 20",
            file=sys.stderr,
        )
        return E_USAGE
    val = contact.exact_mean_extinction(g, args.lam)
    print(f"exact_mean_tau={val!r}")
    return E_OK


# -- metastability -----------------------------------------------------


def _cmd_metastability(args, argv):
    records = contact.read_records(args.records)
    taus = np.array([r.tau for r in records])
    censored = np.array([r.censored for r in records])
    report = stats.metastability_test(taus, censored, threshold=args.threshold)
    print(f"count={report.count} censor_fraction={report.censor_fraction:.4f}")
    if not report.evaluable:
        print(f"not evaluable: {report.reason}")
        return E_DOMAIN
    print(
        f"mean={report.mean:.6f} ks={report.ks_stat:.6f} "
        f"pvalue={report.pvalue:.6g} threshold={report.threshold}"
    )
    print(f"mean_rel_err={report.mean_rel_err:.4f} (sampling bias on the mean)")
    print("verdict: pass" if report.passed else "verdict: fail")
    return E_OK if report.passed else E_DOMAIN


# -- sweep -------------------------------------------------------------


class _CellFailure(Exception):
    pass


def _sample_model(model, n, seed):
    if model.kind == "er":
        return graphs.sample_er(n, model.p, seed)
    if model.kind == "irg":
        return graphs.sample_irg(n, model.weights, seed)
    return graphs.glue_star_path(model.spine_length, model.star_size)


def _pilot_t_max(g, lam, seed, threads):
    """Size the horizon so the full batch almost never censors.

    Escalates a short pilot until most replicas die, then allows a wide
    multiple of the pilot median.  Cells that survive every horizon are
    declared unreachable once the next escalation would blow the event
    budget; without that brake a supercritical cell would burn
    rate * t_max events per censored replica at each doubling.
    """
    t = 1e3
    while True:
        recs = contact.batch(g, lam, _PILOT_REPLICAS, t, seed, threads=threads)
        alive = sorted(r.tau for r in recs if not r.censored)
        if len(alive) * 4 >= _PILOT_REPLICAS * 3:
            break
        n_cens = _PILOT_REPLICAS - len(alive)
        round_events = sum(r.events for r in recs)
        if t >= _PILOT_CAP or round_events * 10 > _PILOT_EVENT_BUDGET:
            raise _CellFailure(
                f"pilot still {n_cens}/{_PILOT_REPLICAS} censored at "
                f"t_max={t:g}; cell looks out of reach"
            )
        t *= 10
    med = alive[len(alive) // 2]
    return float(min(max(_PILOT_MULT * med, 100.0), _PILOT_CAP))


def _cmd_sweep(args, argv):
    cfg = load_sweep_config(args.config)
    out_dir = args.out if args.out is not None else cfg.out_dir
    base = cfg.base_seed if args.seed is None else args.seed
    os.makedirs(out_dir, exist_ok=True)
    prov = _provenance(argv, base)

    # one graph per n, shared by every lambda so slopes compare like with like
    cell_graphs = {}
    for i, n in enumerate(cfg.n_grid):
        g = _sample_model(cfg.model, n, base + _GRAPH_STRIDE * (i + 1))
        cell_graphs[n] = g
        graphs.write_graph(g, os.path.join(out_dir, f"graph_n{n}.graph"), prov)

    failures = []
    summary_rows = []
    medians = {}
    for idx, (n, lam) in enumerate(cfg.cells()):
        replicas, t_max = cfg.cell_plan(n, lam)
        cell_seed = base + _CELL_STRIDE * idx
        g = cell_graphs[n]
        rec_name = f"records_n{n}_l{lam:g}.csv"
        try:
            if t_max == "pilot":
                t_max = _pilot_t_max(g, lam, cell_seed + _PILOT_OFFSET, args.threads)
            records = contact.batch(
                g, lam, replicas, t_max, cell_seed, threads=args.threads
            )
            contact.write_records(records, os.path.join(out_dir, rec_name), prov)
            taus = np.array([r.tau for r in records])
            med = float(np.median(taus))
            cens = sum(r.censored for r in records) / len(records)
            medians[(n, lam)] = med
            summary_rows.append(
                (n, lam, replicas, t_max, f"{med!r}", f"{cens:.6f}", rec_name, "ok")
            )
            print(
                f"cell n={n} lambda={lam:g}: median_tau={med:.4f} "
                f"censor={cens:.4f} t_max={t_max:g}"
            )
        except Exception as err:  # isolate the cell, keep going
            reason = f"{type(err).__name__}: {err}".replace(",", ";")
            failures.append((n, lam, reason))
            summary_rows.append((n, lam, replicas, "", "", "", rec_name, f"failed {reason}"))
            print(f"cell n={n} lambda={lam:g}: FAILED ({reason})")

    with open(os.path.join(out_dir, "summary.csv"), "w") as fh:
        for c in prov:
            fh.write(f"# {c}\n")
        fh.write("n,lambda,replicas,t_max,median_tau,censor_fraction,records,status\n")
        for row in summary_rows:
            fh.write(",".join(str(x) for x in row) + "\n")

    fit_rows = []
    for lam in cfg.lambda_grid:
        pts = [
            (n, math.log(medians[(n, lam)]))
            for n in cfg.n_grid
            if medians.get((n, lam), 0.0) > 0.0
        ]
        if len(pts) < 2:
            continue
        slope, intercept, r2 = stats.fit_line(
            [p[0] for p in pts], [p[1] for p in pts]
        )
        fit_rows.append((lam, len(pts), slope, intercept, r2))
        print(
            f"fit lambda={lam:g}: slope={slope:.6f} intercept={intercept:.6f} "
            f"r2={r2:.4f} cells={len(pts)}"
        )
    with open(os.path.join(out_dir, "fits.csv"), "w") as fh:
        for c in prov:
            fh.write(f"# {c}\n")
        fh.write("lambda,cells,slope,intercept,r_squared\n")
        for lam, cells, slope, intercept, r2 in fit_rows:
            fh.write(f"{lam:g},{cells},{slope!r},{intercept!r},{r2!r}\n")

    if cfg.structure is not None:
        struct_rows = []
        for n in cfg.n_grid:
            g = cell_graphs[n]
            try:
                if cfg.model.kind == "irg":
                    cert = structure.certify_irg(g, cfg.structure)
                else:
                    cert = structure.certify_er(g, cfg.structure.seed_size)
                name = f"cert_n{n}.cert"
                structure.write_certificate(cert, os.path.join(out_dir, name), prov)
                ell = len(cert.stars)
                struct_rows.append((n, ell, cert.star_size, f"{ell / g.n!r}", "ok"))
                print(f"structure n={n}: stars={ell} density={ell / g.n:.6g}")
            except structure.StructureSearchError as err:
                failures.append((n, "structure", str(err)))
                struct_rows.append((n, "", "", "", f"failed {err.stage}"))
                print(f"structure n={n}: FAILED ({err})")
        with open(os.path.join(out_dir, "structure.csv"), "w") as fh:
            for c in prov:
                fh.write(f"# {c}\n")
            fh.write("n,stars,star_size,density,status\n")
            for row in struct_rows:
                fh.write(",".join(str(x) for x in row) + "\n")

    n_cells = len(summary_rows)
    print(f"sweep complete: {n_cells - len(failures)} ok, {len(failures)} failed")
    return E_DOMAIN if failures else E_OK


# -- parser ------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="base seed")
    common.add_argument("--threads", type=_positive_int, default=1)
    common.add_argument("--out", default=None, help="output path")

    parser = argparse.ArgumentParser(
        prog="cplab",
        description="contact-process laboratory: graphs, structure, extinction times",
    )
    parser.add_argument("--version", action="version", version=f"cplab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="draw a graph, write it")
    p.add_argument("--model", choices=["er", "irg", "glued-star"], required=True)
    p.add_argument("--n", type=_positive_int, default=100)
    p.add_argument("--p", type=_positive_float, help="er mean degree")
    p.add_argument("--weights", help="irg weight model, e.g. powerlaw(alpha=2.5)")
    p.add_argument("--spine", type=_positive_int, help="glued-star path length")
    p.add_argument("--star", type=_positive_int, help="glued-star star size")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser(
        "find-structure", parents=[common], help="search for disjoint stars"
    )
    p.add_argument("graph")
    p.add_argument("--mode", choices=["irg", "er"], required=True)
    p.add_argument("--k", type=_positive_int, help="irg seed-set size")
    p.add_argument("--scale", default="sqrt", help="irg budget scale function")
    p.add_argument("--levels", type=_positive_int, default=1)
    p.add_argument("--max-trials", type=_positive_int, default=None)
    p.add_argument("--growth-fraction", type=_positive_float, default=0.02,
                   help="irg collection target as a fraction of n")
    p.add_argument("--m", type=_positive_int, help="er star size")
    p.set_defaults(func=_cmd_find_structure)

    p = sub.add_parser(
        "validate", parents=[common], help="recheck a certificate against a graph"
    )
    p.add_argument("graph")
    p.add_argument("certificate")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("simulate", parents=[common], help="extinction-time batch")
    p.add_argument("graph")
    p.add_argument("--lambda", dest="lam", type=_positive_float, required=True)
    p.add_argument("--replicas", type=_positive_int, default=100)
    p.add_argument("--tmax", type=_positive_float, default=1e6)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", parents=[common], help="run a sweep config")
    p.add_argument("config")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("oracle", parents=[common], help="exact mean, n <= 20")
    p.add_argument("graph")
    p.add_argument("--lambda", dest="lam", type=_positive_float, required=True)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser(
        "metastability", parents=[common], help="Exp(1) test on a records file"
    )
    p.add_argument("records")
    p.add_argument("--threshold", type=_positive_float, default=0.08)
    p.set_defaults(func=_cmd_metastability)

    return parser


def main(argv=None):
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, argv)
    except structure.StructureSearchError as err:
        print(f"structure search failed at {err.stage}: {err.details}", file=sys.stderr)
        return E_DOMAIN
    except (
        OSError,
        SpecError,
        graphs.GraphFormatError,
        structure.CertificateFormatError,
    ) as err:
        print(f"error: {err}", file=sys.stderr)
        return E_USAGE


if __name__ == "__main__":
    sys.exit(main())
