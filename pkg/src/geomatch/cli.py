"""Command line front end.

Every subcommand reads curve files, runs one computation and writes its
results into ``--out`` (default: the current directory).  A short JSON
summary goes to standard output; failures print a JSON error record to
standard error and exit with a nonzero status.  Set ``GEOMATCH_LOG`` to a
logging level name (``DEBUG``, ``INFO``...) for progress messages.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import io as gio
from .convergence import FAMILIES, energy_convergence_study
from .curves import DiscreteCurve
from .errors import CurveFileError, DomainError, GeomatchError
from .generators import GENERATORS
from .geodesics import geodesic_length, geodesic_shoot
from .matching import MatchConfig, dp_match, optimal_match, verticality_ratio
from .statistics import LINKAGES, DistanceMatrix, cluster, distance_matrix, karcher_mean

log = logging.getLogger("geomatch")


class UsageError(GeomatchError):
    code = "usage"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# helpers


def _config(args) -> MatchConfig:
    return MatchConfig(
        steps=args.steps or 100,
        shoot_tol=args.tol,
        shoot_max_iter=args.shoot_max_iter,
        horizontality_tol=args.horizontality_tol,
        max_iter=args.max_iter,
        upsample=args.upsample,
        square=args.square,
        relaxed=args.relaxed_edges,
    )


def _gather(files, relaxed) -> tuple[list, list]:
    curves, names = [], []
    for f in files:
        cf = gio.read_curve_file(f)
        curves.extend(cf.discrete(relaxed))
        names.extend(cf.names)
    if curves and any(c.manifold != curves[0].manifold for c in curves):
        raise CurveFileError("input curves live on different manifolds")
    return curves, names


def _pair(args) -> tuple[DiscreteCurve, DiscreteCurve]:
    curves, _ = _gather(args.files, args.relaxed_edges)
    if len(curves) != 2:
        raise UsageError(f"expected exactly two curves, got {len(curves)}")
    if curves[0].n != curves[1].n:
        raise DomainError("the two curves must have the same number of points")
    return curves[0], curves[1]


def _out(args, name) -> str:
    return os.path.join(args.out, name)


def _trace(geo) -> np.ndarray:
    r = verticality_ratio(geo)
    return np.where(np.isfinite(r), r, -1.0)


def _save_verticality(path, geo):
    s = np.linspace(0.0, 1.0, geo.m + 1)
    gio.save_table(path, ["s", "verticality_ratio"], [s, _trace(geo)])


# ---------------------------------------------------------------------------
# subcommands


def cmd_geodesic(args) -> dict:
    a0, a1 = _pair(args)
    geo = geodesic_shoot(a0, a1, args.steps or 100, args.tol, args.shoot_max_iter)
    gio.save_path(_out(args, "geodesic.json"), geo)
    rep = {
        "length": geodesic_length(geo),
        "iterations": int(geo.meta.get("iterations", 0)),
        "converged": bool(geo.meta.get("converged", True)),
        "method": geo.meta.get("method", "shoot"),
        "n": a0.n,
        "steps": geo.m,
    }
    gio.save_json(_out(args, "geodesic_report.json"), rep)
    return rep


def _match_report(geo, match):
    return {
        "length": geodesic_length(geo),
        "iterations": match.iterations,
        "converged": match.converged,
        "reason": match.reason,
        "length_history": match.length_history,
        "ratio_history": match.ratio_history,
    }


def cmd_match(args) -> dict:
    a0, a1 = _pair(args)
    geo, match = optimal_match(a0, a1, _config(args))
    gio.save_phi(_out(args, "match_phi.csv"), match.phi)
    gio.save_path(_out(args, "match_geodesic.json"), geo)
    gio.save_curves(_out(args, "match_curve.json"), [match.matched], ["matched"])
    _save_verticality(_out(args, "match_verticality.csv"), geo)
    rep = _match_report(geo, match)
    gio.save_json(_out(args, "match_report.json"), rep)
    return rep


def cmd_dp_match(args) -> dict:
    a0, a1 = _pair(args)
    geo, match = dp_match(a0, a1, args.square, _config(args))
    gio.save_phi(_out(args, "dp_phi.csv"), match.phi)
    gio.save_path(_out(args, "dp_geodesic.json"), geo)
    gio.save_curves(_out(args, "dp_curve.json"), [match.matched], ["matched"])
    rep = {"length": geodesic_length(geo), "square": args.square}
    gio.save_json(_out(args, "dp_report.json"), rep)
    return rep


def cmd_compare(args) -> dict:
    a0, a1 = _pair(args)
    cfg = _config(args)
    raw = geodesic_shoot(a0, a1, cfg.steps, cfg.shoot_tol, cfg.shoot_max_iter)
    om_geo, om = optimal_match(a0, a1, cfg)
    dp_geo, _ = dp_match(a0, a1, cfg.square, cfg)
    l_raw, l_om, l_dp = (geodesic_length(g) for g in (raw, om_geo, dp_geo))
    s = np.linspace(0.0, 1.0, cfg.steps + 1)
    gio.save_table(_out(args, "compare_verticality.csv"), ["s", "unmatched", "optimal_match", "dynamic_programming"],
                   [s, _trace(raw), _trace(om_geo), _trace(dp_geo)])
    rep = {
        "unmatched_length": l_raw,
        "optimal_match_length": l_om,
        "dynamic_programming_length": l_dp,
        "relative_difference": (l_om - l_dp) / l_dp if l_dp > 0 else 0.0,
        "optimal_match_iterations": om.iterations,
        "length_history": om.length_history,
        "ratio_history": om.ratio_history,
    }
    gio.save_json(_out(args, "compare_report.json"), rep)
    return rep


def _write_matrix(path, dm: DistanceMatrix):
    rows = [",".join(["label"] + [str(x) for x in dm.labels])]
    for lab, r in zip(dm.labels, dm.values):
        rows.append(",".join([str(lab)] + [gio.fmt(v) for v in r]))
    gio._write(path, "\n".join(rows) + "\n")


def _read_matrix(path) -> DistanceMatrix:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    except OSError as exc:
        raise CurveFileError(f"{path}: {exc.strerror}") from None
    labels = lines[0].split(",")[1:]
    vals = []
    for i, ln in enumerate(lines[1:], start=2):
        try:
            vals.append([float(v) for v in ln.split(",")[1:]])
        except ValueError:
            raise CurveFileError(f"{path}: malformed row (line {i})", line=i) from None
    return DistanceMatrix(labels, np.array(vals))


def cmd_dist(args) -> dict:
    curves, names = _gather(args.files, args.relaxed_edges)
    dm = distance_matrix(curves, _config(args), names)
    _write_matrix(_out(args, "distances.csv"), dm)
    return {"labels": dm.labels, "distances": dm.values}


def cmd_mean(args) -> dict:
    curves, _ = _gather(args.files, args.relaxed_edges)
    res = karcher_mean(curves, _config(args), full=True)
    gio.save_curves(_out(args, "mean.json"), [res.mean], ["mean"])
    rep = {
        "iterations": res.iterations,
        "converged": res.converged,
        "gradient_norms": res.gradient_norms,
        "objectives": res.objectives,
    }
    gio.save_json(_out(args, "mean_report.json"), rep)
    return rep


def cmd_cluster(args) -> dict:
    if args.matrix:
        dm = _read_matrix(args.matrix)
    else:
        curves, names = _gather(args.files, args.relaxed_edges)
        dm = distance_matrix(curves, _config(args), names)
        _write_matrix(_out(args, "distances.csv"), dm)
    k = args.k if args.k is not None or args.height is not None else 2
    labels, dend = cluster(dm, k=k, height=args.height, linkage=args.linkage)
    gio._write(_out(args, "clusters.csv"),
               "label,cluster\n" + "".join(f"{n},{c}\n" for n, c in zip(dm.labels, labels)))
    Z = dend.to_linkage_matrix()
    gio.save_table(_out(args, "dendrogram.csv"), ["a", "b", "height", "size"], list(Z.T))
    return {"labels": dm.labels, "clusters": labels, "linkage": args.linkage}


def cmd_gen(args) -> dict:
    curves = GENERATORS[args.name](args.n, args.seed)
    if args.name == "two-bundles":
        names = [f"{'ab'[i // (len(curves) // 2)]}{i % (len(curves) // 2)}" for i in range(len(curves))]
        path = _out(args, f"{args.name}.json")
        gio.save_curves(path, curves, names, {"generator": args.name, "seed": args.seed})
        return {"files": [path]}
    files = []
    for tag, c in zip("ab", curves):
        path = _out(args, f"{args.name}-{tag}.json")
        gio.save_curves(path, [c], [tag], {"generator": args.name, "seed": args.seed})
        files.append(path)
    return {"files": files}


def cmd_converge(args) -> dict:
    n_list = [int(x) for x in args.n_list.split(",")]
    tab = energy_convergence_study(args.family, n_list, args.steps or 20)
    gio.save_table(_out(args, "convergence.csv"), ["n", "energy", "error"],
                   [tab.n, tab.energies, tab.errors])
    rep = {"family": tab.family, "reference": tab.reference, "reference_n": tab.reference_n,
           "slope": tab.slope, "n": tab.n, "errors": tab.errors}
    gio.save_json(_out(args, "convergence_report.json"), rep)
    return rep


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--steps", type=int, default=None,
                        help="path steps m (default 100; 20 for converge)")
    common.add_argument("--tol", type=float, default=None, help="shooting tolerance")
    common.add_argument("--max-iter", type=int, default=30, help="optimal-matching iterations")
    common.add_argument("--shoot-max-iter", type=int, default=50, help="shooting iterations")
    common.add_argument("--horizontality-tol", type=float, default=0.05)
    common.add_argument("--square", type=int, default=7, help="DP window side")
    common.add_argument("--upsample", type=int, default=None, help="points used when resampling")
    common.add_argument("--relaxed-edges", action="store_true", help="allow vanishing edges (flat only)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=".", help="output directory")

    p = _Parser(prog="geomatch", description="Elastic matching and geodesics of discrete curves.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_, files="+"):
        sp = sub.add_parser(name, parents=[common], help=help_, description=help_)
        if files:
            sp.add_argument("files", nargs=files, help="curve files (JSON or CSV)")
        sp.set_defaults(func=func)
        return sp

    add("geodesic", cmd_geodesic, "shoot the geodesic between two curves")
    add("match", cmd_match, "optimal matching by horizontal geodesics")
    add("dp-match", cmd_dp_match, "dynamic-programming matching baseline")
    add("compare", cmd_compare, "unmatched vs optimal matching vs dynamic programming")
    add("dist", cmd_dist, "pairwise shape distances")
    add("mean", cmd_mean, "Karcher mean of curve shapes")
    sp = add("cluster", cmd_cluster, "agglomerative clustering by shape distance", files="*")
    sp.add_argument("--matrix", help="distance matrix CSV written by 'dist'")
    sp.add_argument("--k", type=int, default=None, help="number of clusters (default 2)")
    sp.add_argument("--height", type=float, default=None, help="cut height")
    sp.add_argument("--linkage", choices=LINKAGES, default="average")
    sp = add("gen", cmd_gen, "write synthetic curves", files=None)
    sp.add_argument("name", choices=sorted(GENERATORS))
    sp.add_argument("--n", type=int, default=30, help="edges per curve")
    sp = add("converge", cmd_converge, "energy convergence under refinement", files=None)
    sp.add_argument("family", choices=sorted(FAMILIES))
    sp.add_argument("--n-list", default="8,16,32,64")
    return p


def _setup_logging():
    level = os.environ.get("GEOMATCH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _emit(obj):
    sys.stdout.write(json.dumps(obj, sort_keys=True, default=gio._default) + "\n")


def main(argv=None) -> int:
    _setup_logging()
    try:
        args = build_parser().parse_args(argv)
        os.makedirs(args.out, exist_ok=True)
        _emit(args.func(args))
        return 0
    except GeomatchError as exc:
        sys.stderr.write(json.dumps(exc.record(), sort_keys=True) + "\n")
        return 2 if isinstance(exc, UsageError) else 1
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": "io", "message": str(exc), "details": {}}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
