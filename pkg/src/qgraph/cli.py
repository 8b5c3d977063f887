"""Command-line front end.

    qgraph forward    --config C (--lambdas 0,1.5 | --lambda-file F) --out samples.csv
    qgraph lambda-log --config C --out lambdas.txt
    qgraph invert     --config C [--dtn samples.csv] --out report.json
    qgraph roundtrip  --config C [--out report.json]

``lambda-log`` runs the inversion against the live forward model and writes
the energies it asked for, so ``forward`` can record exactly those samples
and ``invert --dtn`` can replay them.  Exit codes: 0 success, 2 invalid
input, 3 numerical failure or tolerance breach.
"""
from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor

from . import files
from .files import ConfigError, ProblemConfig
from .inverse_hex import reconstruct_hex
from .inverse_square import reconstruct_square
from .stripping import ReconstructionError
from .sturm import BorgError, PoleProximityError, SpectrumError
from .vertex_op import DtnOracle, MissingSampleError, SingularSystemError, dtn

log = logging.getLogger("qgraph")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3
NUMERIC_ERRORS = (ReconstructionError, SingularSystemError, PoleProximityError, SpectrumError, BorgError, ArithmeticError)


class NumericFailure(RuntimeError):
    def __init__(self, msg: str, report: dict | None = None):
        super().__init__(msg)
        self.report = report


def _config(args) -> ProblemConfig:
    if args.config:
        cfg = ProblemConfig.load(args.config)
        if args.lattice and args.lattice != cfg.lattice:
            raise ConfigError(f"--lattice {args.lattice} contradicts the config ({cfg.lattice})")
    elif args.lattice:
        cfg = ProblemConfig.unperturbed(args.lattice)
    else:
        raise ConfigError("give --config or --lattice")
    if args.tol_potential is not None:
        cfg.tolerances["potential"] = args.tol_potential
    if args.tol_coupling is not None:
        cfg.tolerances["coupling"] = args.tol_coupling
    cfg.validate()
    return cfg


def _reconstruct(cfg: ProblemConfig, oracle: DtnOracle, edges):
    dom = oracle.domain
    run = reconstruct_square if dom.kind == "square" else reconstruct_hex
    return run(oracle, dom, edges, cfg.scan_config(), strategy=cfg.strategy)


def forward_samples(cfg: ProblemConfig, lams, threads: int = 1) -> tuple[dict, dict]:
    """D-N matrices at every energy that passes the guards, and the rejected energies."""
    dom, edges, couplings = cfg.fields()

    def one(lam):
        try:
            return lam, dtn(dom, edges, couplings, lam), None
        except PoleProximityError as exc:
            log.warning("rejecting lam=%r: %s", lam, exc)
            return lam, None, "pole"
        except SingularSystemError as exc:
            log.warning("rejecting lam=%r: %s", lam, exc)
            return lam, None, "singular"

    lams = sorted(set(float(x) for x in lams))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, lams))
    else:
        results = [one(lam) for lam in lams]
    samples = {lam: mat for lam, mat, _ in results if mat is not None}
    rejected = {lam: kind for lam, _, kind in results if kind is not None}
    if lams and not samples:
        raise NumericFailure("every requested energy was rejected by the guards")
    return samples, rejected


def cmd_forward(cfg: ProblemConfig, lams, out, threads: int = 1) -> dict:
    samples, rejected = forward_samples(cfg, lams, threads)
    files.write_samples(out, cfg.domain(), samples, rejected)
    return samples


def cmd_lambda_log(cfg: ProblemConfig, out) -> list[float]:
    dom, edges, couplings = cfg.fields()
    oracle = DtnOracle.live(dom, edges, couplings)
    _reconstruct(cfg, oracle, edges)
    lams = sorted(oracle.requests)
    files.write_lambdas(out, lams)
    return lams


def cmd_invert(cfg: ProblemConfig, out, dtn_path=None) -> dict:
    dom, edges, couplings = cfg.fields()
    if dtn_path is not None:
        oracle = DtnOracle.recorded(dom, *files.read_sample_set(dtn_path, dom))
    else:
        oracle = DtnOracle.live(dom, edges, couplings)
    report = files.report_dict(_reconstruct(cfg, oracle, edges))
    files.dump_json(out, report)
    return report


def cmd_roundtrip(cfg: ProblemConfig, out=None) -> dict:
    dom, edges, couplings = cfg.fields()
    oracle = DtnOracle.live(dom, edges, couplings)
    rep = _reconstruct(cfg, oracle, edges)
    data = files.report_dict(rep)
    cmp = files.compare(rep, edges, couplings, cfg.J)
    cmp["tolerances"] = dict(cfg.tolerances)
    cmp["passed"] = (cmp["potential_error"] <= cfg.tolerances["potential"]
                     and cmp["coupling_error"] <= cfg.tolerances["coupling"])
    data["comparison"] = cmp
    files.dump_json(out, data)
    if not cmp["passed"]:
        raise NumericFailure(
            f"tolerance breach: potential {cmp['potential_error']:.3e}, coupling {cmp['coupling_error']:.3e}", data
        )
    return data


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qgraph", description="Quantum-graph D-N maps and layer-stripping inversion.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="problem config (JSON)")
    common.add_argument("--lattice", choices=["square", "hex"], help="lattice kind; alone, an unperturbed default")
    common.add_argument("--out", help="output path")
    common.add_argument("--tol-potential", type=float, dest="tol_potential")
    common.add_argument("--tol-coupling", type=float, dest="tol_coupling")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    f = sub.add_parser("forward", parents=[common], help="record D-N samples")
    f.add_argument("--lambdas", help="comma-separated energies")
    f.add_argument("--lambda-file", help="file with one energy per line")
    sub.add_parser("lambda-log", parents=[common], help="energies the inversion will request")
    inv = sub.add_parser("invert", parents=[common], help="reconstruct from live or recorded D-N data")
    inv.add_argument("--dtn", help="recorded sample file; default is the live forward model")
    sub.add_parser("roundtrip", parents=[common], help="forward model, inversion and comparison")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        if args.command == "forward":
            if not args.out:
                raise ConfigError("forward needs --out")
            if args.lambdas:
                lams = [float(x) for x in args.lambdas.split(",") if x.strip()]
            elif args.lambda_file:
                lams = files.read_lambdas(args.lambda_file)
            else:
                raise ConfigError("forward needs --lambdas or --lambda-file")
            samples = cmd_forward(cfg, lams, args.out, args.threads)
            print(f"wrote {len(samples)} samples to {args.out}")
        elif args.command == "lambda-log":
            if not args.out:
                raise ConfigError("lambda-log needs --out")
            lams = cmd_lambda_log(cfg, args.out)
            print(f"wrote {len(lams)} energies to {args.out}")
        elif args.command == "invert":
            if not args.out:
                raise ConfigError("invert needs --out")
            report = cmd_invert(cfg, args.out, args.dtn)
            print(f"recovered {len(report['edges'])} edges and {len(report['couplings'])} couplings")
        else:
            data = cmd_roundtrip(cfg, args.out)
            c = data["comparison"]
            print(f"potential error {c['potential_error']:.3e}, coupling error {c['coupling_error']:.3e}: ok")
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except MissingSampleError as exc:
        print(f"error: recorded samples do not cover the requested energies; missing: "
              f"{', '.join(files.fmt(x) for x in exc.missing)}", file=sys.stderr)
        return EXIT_NUMERIC
    except NumericFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
