"""Command-line interface"""
import argparse
import math
import sys
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .boundary import BoundaryMap, analytic_K, boundary_directions, k_curve
from .config import Config, get_delta, get_seed, load_config_file, parse_float_list
from .embeddings import (
    build_sqrt_tree_embedding,
    build_tree_to_h2,
    candidate_pairs,
    measure_distortion,
    radial_extension,
)
from .errors import AcceptanceFailure, QILabError, UsageError
from .experiments import Experiment, ExperimentSpec, NetCache, check_acceptance, run
from .export import (
    read_map_csv,
    read_net_csv,
    read_rows_csv,
    write_jsonl,
    write_map_csv,
    write_net_csv,
    write_rows_csv,
    write_triplets_csv,
)
from .growth import fit_growth
from .logging_config import get_logger, setup_logging
from .poincare import (
    make_ball_kernel,
    poincare_exact_p2,
    poincare_lower_ascent,
    testfunction_lower_bound,
)
from .sepvol import connectivity_bound_check, separation, tree_bound_check, vol_a, volume_growth_lower_bound
from .spaces import SpaceParams, build_h2_net, build_ray_net, build_tree_ball, build_zmu_net

logger = get_logger(__name__)

EPILOG = """
Examples:
  %(prog)s space --space zmu --mu 1,2 --radius 4 --output z.csv
  %(prog)s embed sqrt-tree --radius 16 --output map.csv
  %(prog)s embed radial --theta zmu_identity --mu 1,2 --mu-prime 1,1 --radius 10
  %(prog)s poincare p2 --space zmu --mu 1,2 --radius 6 --width 2
  %(prog)s boundary kr --theta unipotent --R-list 5,10,20,40
  %(prog)s sepvol growth-bound --alpha 2 --lambda 2 --radius 1000
  %(prog)s fit --input rows.csv --y total
  %(prog)s run tree_embed --assert
"""


def _floats(text: str) -> List[float]:
    return parse_float_list(text)


def _add_space_args(p: argparse.ArgumentParser, default_space: str = "h2") -> None:
    p.add_argument("--space", default=default_space, choices=["h2", "tree", "zmu"], help="Model space")
    p.add_argument("--mu", type=_floats, default=[1.0, 2.0], help="Z_mu exponents, e.g. 1,2")
    p.add_argument("--radius", "-R", type=float, default=4.0, help="Ball radius R")
    p.add_argument("--mesh", type=float, default=1.0, help="Net mesh (H2 separation, Z_mu level spacing)")
    p.add_argument("--degree", type=int, default=3, help="Tree vertex degree (>= 3)")
    p.add_argument("--cover", action="store_true", help="Double cover of Z_mu in the last coordinate")
    p.add_argument("--sector", type=float, default=2 * math.pi, help="Angular width of H2 nets")
    p.add_argument("--measure", default="volume", choices=["volume", "counting"], help="Point weights")
    p.add_argument("--level-cap", type=int, default=-1, help="Z_mu points per level before thinning (0 = none)")


def _add_theta_args(p: argparse.ArgumentParser, default: str = "unipotent") -> None:
    p.add_argument("--theta", default=default, choices=["identity", "biholder", "zmu_identity", "unipotent"])
    p.add_argument("--mu", type=_floats, default=[1.0, 2.0], help="Source exponents")
    p.add_argument("--mu-prime", type=_floats, default=[1.0, 1.0], help="Target exponents (zmu_identity)")
    p.add_argument("--alpha", type=float, default=0.8, help="Bi-Holder lower exponent")
    p.add_argument("--beta", type=float, default=1.5, help="Bi-Holder upper exponent")


class _Parser(argparse.ArgumentParser):
    """Usage errors surface as UsageError (exit 1) instead of SystemExit(2)"""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="qi-lab",
        description="Quasi-isometry distortion lab: hyperbolic nets, embeddings, Poincare constants",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=EPILOG,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="Flat key = value file supplying flag defaults")
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable verbose output (debug mode)")
    parser.add_argument("--no-color", action="store_true", help="Disable coloured log output")
    parser.add_argument("--log-file", metavar="FILE", help="Also write DEBUG logs to FILE")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("space", help="Build a net and write it as CSV")
    _add_space_args(p)

    p = sub.add_parser("embed", help="Embedding constructions")
    esub = p.add_subparsers(dest="action", required=True)
    e = esub.add_parser("sqrt-tree", help="sqrt(R)-tree of an H2 ball")
    e.add_argument("--radius", "-R", type=float, default=16.0)
    e.add_argument("--mesh", type=float, default=None, help="H2 net separation (default sqrt(R))")
    e.add_argument("--sector", type=float, default=None, help="Wedge width (default: about 1500 top points)")
    e = esub.add_parser("tree-to-h2", help="Tree ball placed on H2 circles")
    e.add_argument("--degree", type=int, default=3, help="Branching number d")
    e.add_argument("--radius", "-R", type=int, default=6)
    e.add_argument("--rule", default="packing", choices=["packing", "exponential"])
    e = esub.add_parser("radial", help="Radial extension of a boundary map on a ray net")
    _add_theta_args(e, default="zmu_identity")
    e.add_argument("--radius", "-R", type=float, default=10.0)
    e.add_argument("--mesh", type=float, default=1.0)
    for e in esub.choices.values():
        e.add_argument("--report", default=None, help="JSON-lines distortion report (default: stdout)")

    p = sub.add_parser("distort", help="Distortion of a stored map")
    dsub = p.add_subparsers(dest="action", required=True)
    d = dsub.add_parser("measure", help="Optimal (lambda, c) of a map")
    d.add_argument("--map", required=True, help="Map CSV domain_id,codomain_id")
    d.add_argument("--domain", required=True, help="Domain net CSV")
    d.add_argument("--codomain", required=True, help="Codomain net CSV")
    d.add_argument("--mu", type=_floats, default=None, help="Exponents of Z_mu or ray nets")
    d.add_argument("--objective", default="sum", choices=["sum", "max"])

    p = sub.add_parser("poincare", help="Poincare constant estimates")
    psub = p.add_subparsers(dest="action", required=True)
    for name, helptext in (("p2", "Exact spectral constant at p = 2"),
                           ("ascent", "Lower bound by gradient ascent"),
                           ("testfn", "Test-function lower bound on the double cover")):
        q = psub.add_parser(name, help=helptext)
        _add_space_args(q, default_space="zmu")
        q.add_argument("--width", type=float, default=2.0, help="Ball kernel width")
        q.add_argument("--p", type=float, default=2.0, help="Exponent p >= 1")
        q.add_argument("--restarts", type=int, default=8)
        q.add_argument("--iters", type=int, default=500)
        q.add_argument("--kernel-out", default=None, help="Write the kernel as i,j,value triplets")

    p = sub.add_parser("boundary", help="Boundary map distortion")
    bsub = p.add_subparsers(dest="action", required=True)
    b = bsub.add_parser("kr", help="K(R) curve")
    _add_theta_args(b)
    b.add_argument("--R-list", type=_floats, default=[5.0, 10.0, 20.0, 40.0])
    b.add_argument("--grid-n", type=int, default=1024)

    p = sub.add_parser("sepvol", help="Coarse volume, separation and obstruction checks")
    ssub = p.add_subparsers(dest="action", required=True)
    for name in ("vol", "sep"):
        s = ssub.add_parser(name, help="Vol_a of a net" if name == "vol" else "Separation bounds of a net")
        _add_space_args(s)
        s.add_argument("--a", type=float, default=1.0, help="Scale a")
        s.add_argument("--c1", type=float, default=None, help="Known C_1 of the family kernel")
    s = ssub.add_parser("tree-bound", help="lambda*2a + c >= log_d(S / V_c)")
    s.add_argument("--S", type=float, required=True, dest="S")
    s.add_argument("--V-c", type=float, required=True, dest="V_c")
    s.add_argument("--degree", type=int, default=3)
    s.add_argument("--a", type=float, default=1.0)
    s.add_argument("--lambda", type=float, default=1.0, dest="lam")
    s.add_argument("--c", type=float, default=1.0)
    s = ssub.add_parser("growth-bound", help="Smallest additive constant allowed by volume growth")
    s.add_argument("--alpha", type=float, default=2.0)
    s.add_argument("--lambda", type=float, default=2.0, dest="lam")
    s.add_argument("--radius", "-R", type=float, default=1000.0)
    s = ssub.add_parser("connectivity", help="R <= 12 lambda2 c1 + 4 c2")
    s.add_argument("--radius", "-R", type=float, required=True)
    s.add_argument("--lambda2", type=float, default=1.0)
    s.add_argument("--c1", type=float, default=1.0)
    s.add_argument("--c2", type=float, default=1.0)

    p = sub.add_parser("fit", help="Select a growth model for a series")
    p.add_argument("--input", help="CSV with one row per R")
    p.add_argument("--x", default="R", help="Column holding R")
    p.add_argument("--y", default="total", help="Column to fit")
    p.add_argument("--R-list", type=_floats, default=None, help="R values (instead of --input)")
    p.add_argument("--y-list", type=_floats, default=None, help="Series values (instead of --input)")

    p = sub.add_parser("run", help="Run an experiment over an R sweep")
    p.add_argument("experiment", choices=[e.value for e in Experiment])
    p.add_argument("--R-list", type=_floats, default=None)
    p.add_argument("--mu", type=_floats, default=None)
    p.add_argument("--mu-prime", type=_floats, default=None)
    p.add_argument("--mesh", type=float, default=None)
    p.add_argument("--theta", default=None, choices=["identity", "biholder", "zmu_identity", "unipotent"])
    p.add_argument("--degree", type=int, default=None, dest="d")
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--width", type=float, default=None)
    p.add_argument("--grid-n", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--cache-file", default=None, help="JSON file keeping rows between runs")
    p.add_argument("--assert", action="store_true", dest="check", help="Check acceptance thresholds (exit 3 on failure)")

    for leaf in _all_parsers(parser):
        if leaf is not parser and not any(isinstance(a, argparse._SubParsersAction) for a in leaf._actions):
            leaf.add_argument("--seed", type=int, default=None, help="Random seed (default: QILAB_SEED)")
            leaf.add_argument("--output", "-o", default=None, help="Output file (default: stdout)")
    return parser


def _all_parsers(parser: argparse.ArgumentParser) -> List[argparse.ArgumentParser]:
    found = [parser]
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for child in action.choices.values():
                found.extend(_all_parsers(child))
    return found


def _flag_keys(action: argparse.Action) -> set:
    keys = {opt.lstrip("-").replace("-", "_") for opt in action.option_strings if opt.startswith("--")}
    return keys | {action.dest}


def _apply_config(parser: argparse.ArgumentParser, path: str) -> None:
    """Config-file values become defaults on every parser that has the flag"""
    parsers = _all_parsers(parser)
    known = set().union(*(_flag_keys(a) for p in parsers for a in p._actions)) - {"help", "version", "config"}
    values = load_config_file(path, known)
    for p in parsers:
        for action in p._actions:
            hits = _flag_keys(action) & set(values)
            if not hits or action.dest in ("help", "version", "config"):
                continue
            value = values[sorted(hits)[0]]
            if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                value = value.lower() in ("1", "true", "yes", "on")
            p.set_defaults(**{action.dest: value})
    logger.debug(f"Loaded {len(values)} defaults from {path}")


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command-line arguments"""
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        _apply_config(parser, known.config)
    return parser.parse_args(argv)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _net_from_args(args):
    if args.space == "h2":
        return build_h2_net(args.radius, args.mesh, sector=args.sector, measure=args.measure, delta=get_delta())
    if args.space == "tree":
        return build_tree_ball(args.degree, int(args.radius))
    params = SpaceParams(tuple(args.mu), args.radius, args.mesh, get_delta())
    level_cap = None if args.level_cap == 0 else args.level_cap
    return build_zmu_net(params, cover=args.cover, level_cap=level_cap, measure=args.measure)


def _theta_from_args(args) -> BoundaryMap:
    if args.theta == "identity":
        return BoundaryMap.identity(mu=args.mu)
    if args.theta == "zmu_identity":
        return BoundaryMap.zmu_identity(args.mu, args.mu_prime)
    if args.theta == "biholder":
        return BoundaryMap.biholder(args.alpha, args.beta, dim=len(args.mu))
    return BoundaryMap.unipotent()


def cmd_space(args) -> int:
    net = _net_from_args(args)
    if not args.output:
        raise UsageError("space needs --output for the net CSV (edges go to a sidecar file)")
    write_net_csv(net, args.output)
    return 0


def cmd_embed(args, seed: int) -> int:
    if args.action == "sqrt-tree":
        R = args.radius
        eps = args.mesh or math.sqrt(R)
        sector = args.sector or min(2 * math.pi, 1500 * 2 * math.sinh(eps / 2) / math.sinh(R))
        net = build_h2_net(R, eps, sector=sector, delta=get_delta())
        _, fmap = build_sqrt_tree_embedding(net, R)
    elif args.action == "tree-to-h2":
        fmap, _ = build_tree_to_h2(args.degree, args.radius, args.rule)
    else:
        theta = _theta_from_args(args)
        params = SpaceParams(theta.source_mu, args.radius, args.mesh, get_delta())
        domain = build_ray_net(params, boundary_directions(theta, args.radius, seed=seed))
        fmap = radial_extension(theta, domain)
    if args.output:
        write_map_csv(fmap, args.output)
    I, J, _ = candidate_pairs(fmap, Config.MAX_PAIR_POINTS, seed)
    report = measure_distortion(fmap, pairs=(I, J))
    record = {"construction": args.action, "R": args.radius, "seed": seed, **report.as_dict()}
    write_jsonl([record], args.report)
    return 0


def cmd_distort(args) -> int:
    params = None
    if args.mu is not None:
        params = SpaceParams(tuple(args.mu), 1.0, 1.0, get_delta())
    domain = read_net_csv(args.domain, params=params)
    codomain = read_net_csv(args.codomain, params=params)
    fmap = read_map_csv(args.map, domain, codomain)
    report = measure_distortion(fmap, args.objective)
    write_jsonl([report.as_dict()], args.output)
    return 0


def cmd_poincare(args, seed: int) -> int:
    if args.action == "testfn":
        if args.space != "zmu":
            raise UsageError("the test-function bound lives on the Z_mu double cover")
        args.cover = True
        net = _net_from_args(args)
        est = testfunction_lower_bound(net, args.p)
    else:
        net = _net_from_args(args)
        kernel = make_ball_kernel(net, args.width)
        if args.kernel_out:
            write_triplets_csv(*kernel.triplets(), target=args.kernel_out)
        if args.action == "p2":
            if args.p != 2:
                raise UsageError("the spectral solver is exact only at p = 2")
            est = poincare_exact_p2(net, kernel, seed=seed)
        else:
            est = poincare_lower_ascent(net, kernel, args.p, restarts=args.restarts, iters=args.iters, seed=seed)
    record = {**est.as_dict(), "R": args.radius, "mu": list(args.mu) if args.space == "zmu" else None, "seed": seed}
    write_jsonl([record], args.output)
    return 0


def cmd_boundary(args, seed: int) -> int:
    theta = _theta_from_args(args)
    curve = k_curve(theta, args.R_list, args.grid_n, seed)
    rows = curve.rows()
    for row in rows:
        exact = analytic_K(theta, row["R"])
        if exact is not None:
            row["analytic"] = exact.value
    write_rows_csv(rows, args.output, ["R", "K", "method", "grid_n", "seed", "analytic"])
    return 0


def cmd_sepvol(args) -> int:
    if args.action == "vol":
        record = vol_a(_net_from_args(args), args.a).as_dict()
    elif args.action == "sep":
        record = separation(_net_from_args(args), args.a, args.c1).as_dict()
    elif args.action == "tree-bound":
        holds, slack = tree_bound_check(args.S, args.V_c, args.degree, args.a, args.lam, args.c)
        record = {"holds": holds, "slack": slack}
    elif args.action == "growth-bound":
        c_min = volume_growth_lower_bound(args.alpha, args.lam, args.radius)
        record = {"alpha": args.alpha, "lambda": args.lam, "R": args.radius, "c_min": c_min,
                  "c_min_over_R": c_min / args.radius}
    else:
        record = {"R": args.radius, "holds": connectivity_bound_check(args.radius, args.lambda2, args.c1, args.c2)}
    write_jsonl([record], args.output)
    return 0


def cmd_fit(args) -> int:
    if args.input:
        rows = read_rows_csv(args.input)
        try:
            R = [float(r[args.x]) for r in rows]
            y = [float(r[args.y]) for r in rows]
        except KeyError as e:
            raise UsageError(f"{args.input} has no column {e}")
    elif args.R_list is not None and args.y_list is not None:
        R, y = args.R_list, args.y_list
    else:
        raise UsageError("fit needs --input or both --R-list and --y-list")
    fit = fit_growth(R, y)
    write_jsonl([fit.as_dict()], args.output)
    return 0


def cmd_run(args, seed: int) -> int:
    overrides: Dict = {
        "R_list": tuple(args.R_list) if args.R_list else None,
        "mu": tuple(args.mu) if args.mu else None,
        "mu_prime": tuple(args.mu_prime) if args.mu_prime else None,
        "mesh": args.mesh, "theta": args.theta, "d": args.d, "p": args.p, "a": args.a,
        "width": args.width, "grid_n": args.grid_n, "seed": seed, "output": args.output,
    }
    spec = ExperimentSpec.for_experiment(args.experiment, **overrides)
    cache = NetCache(rows_file=args.cache_file)
    rows = run(spec, cache, workers=args.workers)
    write_rows_csv(rows, args.output)
    if args.check:
        failures, detail = check_acceptance(spec, rows)
        if failures:
            raise AcceptanceFailure(spec.experiment.value, failures, detail)
        logger.info(f"{spec.experiment.value}: all acceptance checks passed")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point"""
    try:
        args = parse_args(argv)
    except QILabError as e:
        setup_logging(verbose=False, use_colors=False)
        logger.error(str(e))
        return e.exit_code

    setup_logging(verbose=args.verbose, use_colors=not args.no_color, log_file=args.log_file)
    seed = args.seed if args.seed is not None else get_seed()
    np.seterr(over="ignore", under="ignore")

    try:
        if args.command == "space":
            return cmd_space(args)
        if args.command == "embed":
            return cmd_embed(args, seed)
        if args.command == "distort":
            return cmd_distort(args)
        if args.command == "poincare":
            return cmd_poincare(args, seed)
        if args.command == "boundary":
            return cmd_boundary(args, seed)
        if args.command == "sepvol":
            return cmd_sepvol(args)
        if args.command == "fit":
            return cmd_fit(args)
        return cmd_run(args, seed)
    except QILabError as e:
        logger.error(str(e))
        if isinstance(e, AcceptanceFailure):
            for failure in e.failures:
                logger.error(f"  - {failure}")
        return e.exit_code
    except KeyboardInterrupt:
        logger.info("Interrupted")
        return 130


if __name__ == "__main__":
    sys.exit(main())
