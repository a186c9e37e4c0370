"""Command-line interface: CSV in, JSON (default) or CSV out.

Exit status is 0 on success, 2 on usage errors (bad flags or
out-of-range settings) and 1 when the computation itself fails.
Defaults of the shared flags can be overridden with environment
variables ``COPENTROPY_K``, ``COPENTROPY_NORM``, ``COPENTROPY_TIE``,
``COPENTROPY_SEED``, ``COPENTROPY_THREADS`` and ``COPENTROPY_FORMAT``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import analysis, copulas, core, stattests
from .dataset import Dataset, TiePolicy, load_csv, pseudo_observations, write_csv
from .errors import ConfigError, CopEntropyError, PartitionError
from .knn import NORMS, EntropyConfig
from .simlab import load_scenario, simulate

ENV_PREFIX = "COPENTROPY_"


class UsageError(Exception):
    pass


def _env(name: str, default, cast=str):
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None:
        return default
    try:
        return cast(raw)
    except ValueError:
        raise UsageError(f"invalid value {raw!r} for {ENV_PREFIX}{name}") from None


# -- argument plumbing ------------------------------------------------------------

def _shared_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("estimator and output")
    g.add_argument("--input", required=True, help="CSV file of observations (rows) by variables")
    g.add_argument("--header", action="store_true", help="first CSV row holds column names")
    g.add_argument("--delimiter", default=",", help="CSV field delimiter")
    g.add_argument("--k", type=int, default=_env("K", 3, int), help="nearest-neighbour order")
    g.add_argument("--norm", choices=NORMS, default=_env("NORM", "chebyshev"),
                   help="kNN distance")
    g.add_argument("--tie", choices=("average", "random"), default=_env("TIE", "average"),
                   help="rank tie policy")
    g.add_argument("--seed", type=int, default=_env("SEED", 1, int),
                   help="seed for every random choice")
    g.add_argument("--threads", type=int, default=_env("THREADS", 1, int),
                   help="worker threads (0 = all cores); never changes results")
    g.add_argument("--format", choices=("json", "csv"), default=_env("FORMAT", "json"),
                   help="output format")
    return p


def _cols(text: str | None) -> list | None:
    """Comma-separated column list; integers are 0-based positions, anything else a name."""
    if text is None:
        return None
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            raise UsageError(f"empty column in {text!r}")
        out.append(int(tok) if tok.lstrip("-").isdigit() else tok)
    return out


def _col(text: str):
    cols = _cols(text)
    if len(cols) != 1:
        raise UsageError(f"expected a single column, got {text!r}")
    return cols[0]


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog="copentropy",
        description="Copula entropy estimation, dependence analysis and hypothesis tests.",
        formatter_class=fmt,
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    shared = _shared_parent()

    def add(name, help_):
        return sub.add_parser(name, parents=[shared], help=help_, description=help_,
                              formatter_class=fmt)

    p = add("ce", "copula entropy of the selected columns")
    p.add_argument("--cols", default=None, help="columns to use (default: all)")

    p = add("mi-matrix", "pairwise mutual information matrix")
    p.add_argument("--cols", default=None, help="columns to use (default: all)")

    p = add("cmi", "conditional mutual information I(x; y | z)")
    p.add_argument("--x", required=True, help="x columns")
    p.add_argument("--y", required=True, help="y columns")
    p.add_argument("--z", required=True, help="conditioning columns")

    p = add("te", "transfer entropy from source to target")
    p.add_argument("--source", default="0", help="source column")
    p.add_argument("--target", default="1", help="target column")
    p.add_argument("--lag", type=int, default=1, help="time lag")
    p.add_argument("--history", choices=("literal", "adjacent"), default="literal",
                   help="lagged triple layout")

    p = add("assoc", "association between groups of columns (random vectors)")
    p.add_argument("--groups", required=True, help="groups separated by ';', e.g. '0,1;2,3'")

    p = add("select", "rank candidate variables by |CE| with a target")
    p.add_argument("--target", required=True, help="target column")
    p.add_argument("--top", type=int, default=None, help="keep only the best N (default: all)")

    p = add("lag", "time-lag estimation by transfer entropy")
    p.add_argument("--source", default="0", help="source column")
    p.add_argument("--target", default="1", help="target column")
    p.add_argument("--max-lag", type=int, default=10, help="largest lag scanned")
    p.add_argument("--history", choices=("literal", "adjacent"), default="literal",
                   help="lagged triple layout")

    p = add("sysid", "relevance of states to state derivatives")
    p.add_argument("--dt", type=float, required=True, help="sampling step")
    p.add_argument("--second-order", action="store_true",
                   help="add products and squares as candidate terms")

    p = add("tree", "Chow-Liu dependence tree")
    p.add_argument("--edges", action="store_true",
                   help="emit a tab-separated 'i j weight' edge list")
    p.add_argument("--dot", action="store_true", help="emit a graph description block")

    p = add("mvnt", "multivariate normality statistic")
    p.add_argument("--permutations", type=int, default=None,
                   help="permutation count for a p-value (>= 99)")

    p = add("gof", "copula goodness-of-fit statistic")
    p.add_argument("--family", choices=copulas.FAMILIES, required=True, help="copula family")

    p = add("tst", "two-sample statistic")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--other", help="CSV file with the second sample")
    g.add_argument("--split-at", type=int, help="rows before this index form the first sample")
    p.add_argument("--permutations", type=int, default=None,
                   help="permutation count for a p-value (>= 99)")
    p.add_argument("--label-draws", type=int, default=stattests.DEFAULT_LABEL_DRAWS,
                   help="label tie-break draws averaged per statistic")

    p = add("cpd", "change-point detection by binary segmentation")
    p.add_argument("--threshold", type=float, default=stattests.DEFAULT_CPD_THRESHOLD,
                   help="split when the profile maximum exceeds this")
    p.add_argument("--min-segment", type=int, default=stattests.DEFAULT_MIN_SEGMENT,
                   help="smallest admissible segment")
    p.add_argument("--label-draws", type=int, default=stattests.DEFAULT_LABEL_DRAWS,
                   help="label tie-break draws averaged per statistic")

    p = add("symtest", "mirror-symmetry statistic of one column")
    p.add_argument("--col", default="0", help="column to test")
    p.add_argument("--permutations", type=int, default=None,
                   help="permutation count for a p-value (>= 99)")
    p.add_argument("--label-draws", type=int, default=stattests.DEFAULT_LABEL_DRAWS,
                   help="label tie-break draws averaged per statistic")

    p = add("fit-copula", "maximum pseudo-likelihood copula fit")
    p.add_argument("--family", choices=copulas.FAMILIES, required=True, help="copula family")

    p = sub.add_parser("simulate", help="draw a dataset from a scenario file",
                       description="draw a dataset from a scenario file", formatter_class=fmt)
    p.add_argument("--scenario", required=True, help="scenario JSON (kind, params, T, seed)")
    p.add_argument("--out", default=None, help="CSV destination (default: standard output)")
    return parser


# -- rendering ----------------------------------------------------------------------

def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _matrix_csv(row_names, col_names, m) -> str:
    return _csv(["", *col_names], [[r, *map(float, row)] for r, row in zip(row_names, m)])


def _flat_csv(d: dict) -> str:
    scalars = {k: v for k, v in d.items() if not isinstance(v, (dict, list))}
    return _csv(list(scalars), [list(scalars.values())])


# -- command handlers ---------------------------------------------------------------

def _ctx(args):
    if args.k < 1:
        raise UsageError("--k must be >= 1")
    cfg = EntropyConfig(k=args.k, norm=args.norm, workers=1)
    tp = TiePolicy.random(args.seed) if args.tie == "random" else TiePolicy()
    d = load_csv(args.input, args.header, args.delimiter)
    return d, cfg, tp


def _select(d: Dataset, cols) -> Dataset:
    return d if cols is None else d.select(cols)


def _cmd_ce(args, d, cfg, tp):
    res = core.copula_entropy(_select(d, _cols(args.cols)), cfg, tp).to_dict()
    return res, _flat_csv(res)


def _cmd_mi_matrix(args, d, cfg, tp):
    m = core.ce_matrix(_select(d, _cols(args.cols)), cfg, tp, args.threads)
    res = {"names": list(m.names), "mi": m.values.tolist(), "k": cfg.k, "norm": cfg.norm}
    return res, _matrix_csv(m.names, m.names, m.values)


def _cmd_cmi(args, d, cfg, tp):
    x, y, z = _cols(args.x), _cols(args.y), _cols(args.z)
    v = core.conditional_mi(d, x, y, z, cfg, tp)
    res = {"cmi": v, "x": x, "y": y, "z": z, "k": cfg.k, "norm": cfg.norm}
    return res, _flat_csv(res)


def _two_series(d: Dataset, src, tgt):
    return d.values[:, d.column_index(src)], d.values[:, d.column_index(tgt)]


def _cmd_te(args, d, cfg, tp):
    x, y = _two_series(d, _col(args.source), _col(args.target))
    v = core.transfer_entropy(x, y, args.lag, cfg, tp, args.history)
    res = {"te": v, "lag": args.lag, "history": args.history, "k": cfg.k, "norm": cfg.norm}
    return res, _flat_csv(res)


def _cmd_assoc(args, d, cfg, tp):
    groups = [_cols(g) for g in args.groups.split(";")]
    v = core.vector_association(d, groups, cfg, tp)
    res = {"association": v, "groups": groups, "k": cfg.k, "norm": cfg.norm}
    return res, _flat_csv(res)


def _cmd_select(args, d, cfg, tp):
    r = analysis.select_variables(d, _col(args.target), cfg, tp, args.threads)
    ranking = r.ranking if args.top is None else r.ranking[: args.top]
    res = {"target": r.target, "ranking": [{"variable": v, "score": s} for v, s in ranking]}
    return res, _csv(["variable", "score"], ranking)


def _cmd_lag(args, d, cfg, tp):
    x, y = _two_series(d, _col(args.source), _col(args.target))
    prof = analysis.estimate_time_lag(x, y, args.max_lag, cfg, tp, args.history, args.threads)
    return prof.to_dict(), _csv(["lag", "te"], zip(prof.lags.tolist(), prof.te.tolist()))


def _cmd_sysid(args, d, cfg, tp):
    r = analysis.identify_system(d, args.dt, cfg, tp, second_order=args.second_order,
                                 threads=args.threads)
    return r.to_dict(), _matrix_csv([f"d{s}/dt" for s in r.states], r.candidates, r.values)


def _cmd_tree(args, d, cfg, tp):
    t = analysis.chow_liu_tree(d, cfg, tp, args.threads)
    if args.edges:
        return None, t.to_edge_list()
    if args.dot:
        return None, t.to_dot()
    return t.to_dict(), _csv(["i", "j", "weight"], t.edges)


def _report(rep: stattests.TestReport):
    res = rep.to_dict()
    return res, _flat_csv({k: v for k, v in res.items() if k != "config"})


def _cmd_mvnt(args, d, cfg, tp):
    return _report(stattests.mvn_test(d, cfg, tp, permutations=args.permutations,
                                      seed=args.seed))


def _cmd_gof(args, d, cfg, tp):
    return _report(stattests.copula_gof_test(d, args.family, cfg, tp))


def _cmd_tst(args, d, cfg, tp):
    if args.other is not None:
        a, b = d, load_csv(args.other, args.header, args.delimiter)
    else:
        if not 0 < args.split_at < d.T:
            raise UsageError(f"--split-at must lie in (0, {d.T})")
        a, b = d.rows(0, args.split_at), d.rows(args.split_at, d.T)
    return _report(stattests.two_sample_test(a, b, cfg, tp, seed=args.seed,
                                             permutations=args.permutations,
                                             label_draws=args.label_draws))


def _cmd_cpd(args, d, cfg, tp):
    r = stattests.multi_change_point(d, args.threshold, args.min_segment, cfg, tp,
                                     seed=args.seed, threads=args.threads,
                                     label_draws=args.label_draws)
    rows = [(p["start"], p["stop"], s, v) for p in r.profiles
            for s, v in zip(p["splits"], p["statistic"])]
    return r.to_dict(), _csv(["start", "stop", "split", "statistic"], rows)


def _cmd_symtest(args, d, cfg, tp):
    x = d.values[:, d.column_index(_col(args.col))]
    return _report(stattests.symmetry_test(x, cfg, tp, seed=args.seed,
                                           permutations=args.permutations,
                                           label_draws=args.label_draws))


def _cmd_fit_copula(args, d, cfg, tp):
    res = copulas.fit_copula(pseudo_observations(d, tp), args.family).to_dict()
    return res, _flat_csv({**res, **{f"param_{k}": v for k, v in res["params"].items()
                                     if not isinstance(v, list)}})


HANDLERS = {
    "ce": _cmd_ce,
    "mi-matrix": _cmd_mi_matrix,
    "cmi": _cmd_cmi,
    "te": _cmd_te,
    "assoc": _cmd_assoc,
    "select": _cmd_select,
    "lag": _cmd_lag,
    "sysid": _cmd_sysid,
    "tree": _cmd_tree,
    "mvnt": _cmd_mvnt,
    "gof": _cmd_gof,
    "tst": _cmd_tst,
    "cpd": _cmd_cpd,
    "symtest": _cmd_symtest,
    "fit-copula": _cmd_fit_copula,
}


def _run(args, out) -> None:
    if args.command == "simulate":
        d = simulate(load_scenario(args.scenario))
        if args.out is None:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(d.names)
            w.writerows([repr(float(v)) for v in row] for row in d.values)
            out.write(buf.getvalue())
        else:
            write_csv(d, args.out)
        return
    d, cfg, tp = _ctx(args)
    res, text = HANDLERS[args.command](args, d, cfg, tp)
    if res is not None and args.format == "json":
        text = _json(res)
    out.write(text)


def main(argv=None) -> int:
    try:
        parser = build_parser()
    except UsageError as exc:
        print(f"copentropy: error: {exc}", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _run(args, sys.stdout)
    except (UsageError, ConfigError, PartitionError) as exc:
        print(f"copentropy {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (CopEntropyError, OSError, ValueError, ArithmeticError, KeyError) as exc:
        print(f"copentropy {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
