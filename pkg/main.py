import argparse
import json
import logging
import os
import sys
from typing import Dict, List, Optional

import pandas as pd
from pydantic import ValidationError

from analytics.audit import AuditEngine, report_frame
from analytics.bounds import bound_curve, bounds_report
from config import settings
from core.errors import DRAuditError, InvalidArgumentError
from core.geometry import sample_uniform_ball
from core.schema import AuditConfig, BoundParams, EmbeddingPair, PointCloud, SimulationConfig
from data.cloud_store import load_cloud, save_cloud, save_embedding_pair, table_format, write_table
from data.synthetic import pca_projection, project, s_curve, swiss_roll
from experiments.plotting import emit_plot
from experiments.tradeoff import make_projection, rv_star_agreement, simulate_radius_sweep, simulate_tradeoff
from experiments.verification import CHECKS, run_verifications

# Setup Logging
logging.basicConfig(level=settings.LOG_LEVEL, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger("dr-audit")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_ERROR = 0, 1, 2


def _int_list(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _out_path(args, default_name: str) -> str:
    if args.out:
        return args.out
    return os.path.join(settings.OUTPUT_DIR, f"{default_name}.{args.format}")


def write_json(payload, path: Optional[str]):
    text = json.dumps(payload, indent=2)
    if path is None:
        print(text)
        return
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w") as f:
        f.write(text + "\n")
    logger.info(f"Wrote {path}")


class DRAuditSystem:
    """
    Orchestrates the auditing library behind the command line: each run_* method serves
    one subcommand and returns the process exit code.
    """

    def run_simulate(self, args) -> int:
        config = SimulationConfig(
            n=args.n, N=args.N, seed=args.seed, k_target=args.k_target, m_list=args.m_list,
            rv_grid=args.rv_grid, beta=args.beta, k=args.k, projection=args.projection, table_format=args.format,
            table_path=_out_path(args, "radius_sweep" if args.radius_sweep else "tradeoff"),
            plot_path=args.plot,
        )
        if args.radius_sweep:
            table = simulate_radius_sweep(config, m=args.m, k_list=args.k_list)
            if args.plot:
                emit_plot(table, "pr-curve", args.plot)
            return EXIT_OK

        table = simulate_tradeoff(config)
        agreement = rv_star_agreement(table)
        hits = int(agreement["within_tolerance"].sum())
        logger.info(f"optimal r_V within 15% of the best f-beta for {hits} of {len(agreement)} m values")
        return EXIT_OK

    def run_verify(self, args) -> int:
        results = run_verifications(args.check, seed=args.seed)
        payload = [r.model_dump(by_alias=True) for r in results]
        write_json(payload, args.out)
        failed = [r.name for r in results if not r.passed]
        if failed:
            logger.error(f"Failed checks: {', '.join(failed)}")
            return EXIT_CHECK_FAILED
        logger.info(f"All {len(results)} checks passed")
        return EXIT_OK

    def run_bounds(self, args) -> int:
        params = BoundParams(n=args.n, m=args.m, R=args.R, r_u=args.r_u, r_v=args.r_v, L=args.L)
        if args.n_max:
            table = bound_curve(args.m, args.R, args.r_u, args.r_v, range(args.m + 1, args.n_max + 1), L=args.L)
            write_table(table, _out_path(args, "bound_curve"), args.format)
            if args.plot:
                emit_plot(table, "bound-curve", args.plot)
            return EXIT_OK
        report = bounds_report(params, delta=args.delta)
        write_json(report.model_dump(), args.out)
        return EXIT_OK

    def _audit_config(self, args) -> AuditConfig:
        return AuditConfig(k=args.k, r_u=args.r_u, r_v=args.r_v, beta=args.beta)

    def run_audit(self, args) -> int:
        pair = EmbeddingPair(X=load_cloud(args.high), Y=load_cloud(args.low))
        report = AuditEngine(self._audit_config(args)).audit(pair)
        path = _out_path(args, "report")
        if table_format(path, args.format) == "json":
            write_json(json.loads(report.model_dump_json()), path)
        else:
            write_table(report_frame(report), path, "csv")
        return EXIT_OK

    def run_compare(self, args) -> int:
        X = load_cloud(args.high)
        embeddings: Dict[str, PointCloud] = {}
        for spec in args.embedding:
            name, _, path = spec.partition("=")
            if not path:
                raise InvalidArgumentError(f"--embedding expects name=path, got {spec!r}")
            embeddings[name] = load_cloud(path)
        table = AuditEngine(self._audit_config(args)).compare(X, embeddings)
        write_table(table, _out_path(args, "comparison"), args.format)
        return EXIT_OK

    def run_sample(self, args) -> int:
        if args.kind == "ball":
            cloud = sample_uniform_ball(args.n, args.R, args.N, args.seed)
        elif args.kind == "s-curve":
            cloud = s_curve(args.N, args.noise, args.seed)
        else:
            cloud = swiss_roll(args.N, args.noise, args.seed)
        save_cloud(cloud, _out_path(args, args.kind))
        return EXIT_OK

    def run_project(self, args) -> int:
        X = load_cloud(args.input)
        if args.map == "pca":
            linear_map = pca_projection(X, args.m)
        else:
            linear_map = make_projection(args.map, X.dim, args.m, args.seed)
        pair: EmbeddingPair = project(X, linear_map)
        prefix = args.out or os.path.join(settings.OUTPUT_DIR, f"{args.map}_m{args.m}")
        sidecar = {"map": linear_map.kind, "lipschitz": linear_map.lipschitz, "seed": linear_map.seed,
                   "matrix": linear_map.matrix.tolist()}
        save_embedding_pair(pair, prefix, sidecar)
        return EXIT_OK

    def run_plot(self, args) -> int:
        table = pd.read_csv(args.table, float_precision="round_trip")
        emit_plot(table, args.kind, args.out or os.path.join(settings.OUTPUT_DIR, f"{args.kind}.svg"))
        return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=settings.DEFAULT_SEED, help="Random seed")
    common.add_argument("--out", default=None, help="Output file (or prefix for `project`)")
    common.add_argument("--format", choices=["csv", "json"], default="csv", help="Table format")
    common.add_argument("--verbose", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(prog="dr-audit", description="Precision/recall and Wasserstein audits of DR maps")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="Precision/recall tradeoff on a uniform ball")
    sim.add_argument("--n", type=int, default=10)
    sim.add_argument("--N", type=int, default=3000)
    sim.add_argument("--k-target", type=int, default=None)
    sim.add_argument("--m-list", type=_int_list, default=list(range(1, 10)))
    sim.add_argument("--rv-grid", type=_float_list, default=None)
    sim.add_argument("--beta", type=float, default=settings.DEFAULT_BETA)
    sim.add_argument("--k", type=int, default=settings.DEFAULT_K, help="Neighborhood size of the mean W2 columns")
    sim.add_argument("--projection", choices=["orthonormal", "gaussian", "coordinate"], default="orthonormal")
    sim.add_argument("--plot", default=None, help="SVG path for the PR curves")
    sim.add_argument("--radius-sweep", action="store_true", help="Fix m and vary r_U through --k-list")
    sim.add_argument("--m", type=int, default=5)
    sim.add_argument("--k-list", type=_int_list, default=[50, 100, 250, 500, 1000])

    ver = sub.add_parser("verify", parents=[common], help="Desk-scale checks of the closed forms")
    ver.add_argument("--check", action="append", choices=list(CHECKS) + ["all"], default=None)

    bnd = sub.add_parser("bounds", parents=[common], help="Closed-form bounds as JSON")
    bnd.add_argument("--n", type=int, required=True)
    bnd.add_argument("--m", type=int, required=True)
    bnd.add_argument("--R", type=float, default=1.0)
    bnd.add_argument("--r-u", type=float, required=True)
    bnd.add_argument("--r-v", type=float, required=True)
    bnd.add_argument("--L", type=float, default=1.0)
    bnd.add_argument("--delta", type=float, default=None)
    bnd.add_argument("--n-max", type=int, default=None, help="Emit the bound curve for n = m+1 .. n-max instead")
    bnd.add_argument("--plot", default=None)

    for name, text in (("audit", "Audit one embedding"), ("compare", "Rank several embeddings of one X")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--high", required=True, help="High-dimensional cloud (CSV/JSON)")
        if name == "audit":
            p.add_argument("--low", required=True, help="Embedded cloud, row-aligned with --high")
        else:
            p.add_argument("--embedding", action="append", required=True, help="name=path, repeatable")
        p.add_argument("--k", type=int, default=settings.DEFAULT_K)
        p.add_argument("--r-u", type=float, required=True)
        p.add_argument("--r-v", type=float, required=True)
        p.add_argument("--beta", type=float, default=settings.DEFAULT_BETA)

    smp = sub.add_parser("sample", parents=[common], help="Write a synthetic cloud")
    smp.add_argument("--kind", choices=["ball", "s-curve", "swiss-roll"], default="ball")
    smp.add_argument("--n", type=int, default=10)
    smp.add_argument("--R", type=float, default=1.0)
    smp.add_argument("--N", type=int, default=10000)
    smp.add_argument("--noise", type=float, default=0.0)

    prj = sub.add_parser("project", parents=[common], help="Apply a linear map and write the embedding pair")
    prj.add_argument("--input", required=True)
    prj.add_argument("--map", choices=["orthonormal", "gaussian", "coordinate", "pca"], default="orthonormal")
    prj.add_argument("--m", type=int, required=True)

    plt_ = sub.add_parser("plot", parents=[common], help="Render a result table as SVG")
    plt_.add_argument("--table", required=True)
    plt_.add_argument("--kind", choices=["pr-curve", "bound-curve"], default="pr-curve")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    if args.command == "verify" and not args.check:
        args.check = ["all"]

    system = DRAuditSystem()
    handler = getattr(system, f"run_{args.command}")
    try:
        return handler(args)
    except (DRAuditError, ValidationError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
