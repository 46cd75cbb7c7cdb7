"""
Command-line front end for the optimized QFI bound.

    python main.py bound  --eta 0.5 --nbar-b 1 --probe custom --mean 1 --var 1
    python main.py sweep  --output ecs_sweep.csv
    python main.py verify --only identities --dim 16
    python main.py oracle --eta 0.5 --nbar-b 1 --probe coherent --alpha 1

Results go to stdout (or --output) as JSON or CSV; logs go to stderr.
"""

import argparse
import asyncio
import sys
from typing import Dict, List, Optional

from pydantic import ValidationError

from channel_math import cq_star, derive_params
from config import load_config_file, settings
from errors import BoundError, DomainError
from logger import log_error, log_info, set_level
from models import ChannelParams, MomentMode, ProbeFamily, ProbeSpec, SweepSpec
from probe_stats import make_probe_spec, moments
from storage import GOLDEN_BOUND, GOLDEN_ORACLE, GOLDEN_SWEEP, ResultStorageService
from sweep_service import SweepService
from verify_service import CHECK_NAMES, CompleteVerificationService, OracleService

PROBE_ALIASES = {
    "coherent": ProbeFamily.coherent,
    "fock": ProbeFamily.fock,
    "thermal": ProbeFamily.thermal_probe,
    "thermal_probe": ProbeFamily.thermal_probe,
    "squeezed": ProbeFamily.squeezed_vacuum,
    "squeezed_vacuum": ProbeFamily.squeezed_vacuum,
    "ecs": ProbeFamily.entangled_coherent,
    "entangled_coherent": ProbeFamily.entangled_coherent,
    "custom": ProbeFamily.custom,
}

DEFAULT_FORMAT = {"bound": "json", "sweep": "csv", "verify": "json", "oracle": "json"}
VERIFY_COLUMNS = ["name", "passed", "residual", "tolerance"]

TRUE_WORDS = {"true", "yes", "on"}
FALSE_WORDS = {"false", "no", "off"}


def exit_code_for(error: Exception) -> int:
    """Single place where failures become process exit codes"""
    if isinstance(error, BoundError):
        return error.exit_code
    if isinstance(error, ValidationError):
        return DomainError.exit_code
    return 1


def _float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="random seed for verification draws")
    common.add_argument("--dim", type=int, help="Fock cutoff per mode for the oracle")
    common.add_argument("--config", help="flat `key = value` file using the flag names as keys")
    common.add_argument("--output", help="write results to this path instead of stdout")
    common.add_argument("--format", choices=["json", "csv"])
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")

    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--probe", choices=sorted(PROBE_ALIASES))
    probe.add_argument("--alpha", type=float, help="coherent amplitude |alpha| (default 1)")
    probe.add_argument("--photons", type=int, help="photon number of a Fock probe")
    probe.add_argument("--mean", type=float, help="mean photon number (thermal and custom probes)")
    probe.add_argument("--var", type=float, help="photon-number variance (custom probes)")
    probe.add_argument("--squeeze", type=float, help="squeezing parameter r")
    probe.add_argument("--n-modes", type=int, help="number of identical probe modes")
    probe.add_argument("--moments", choices=[mode.value for mode in MomentMode])

    channel = argparse.ArgumentParser(add_help=False)
    channel.add_argument("--eta", type=float, help="transmissivity in (0, 1]")
    channel.add_argument("--nbar-b", type=float, help="mean thermal photon number of the bath")

    golden = argparse.ArgumentParser(add_help=False)
    golden.add_argument("--regen-golden", action="store_true", help="overwrite the golden file for this command")
    golden.add_argument("--i-know", action="store_true", help="confirm --regen-golden")

    parser = argparse.ArgumentParser(
        prog="qfi-bound",
        description="Optimized QFI bound for phase estimation through lossy thermal channels",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    bound = subparsers.add_parser("bound", parents=[common, probe, channel, golden],
                                  help="closed-form optimized bound at one point")
    bound.add_argument("--strict", action="store_true", help="fail on a degenerate denominator")

    sweep = subparsers.add_parser("sweep", parents=[common, probe, golden],
                                  help="bound over an (eta, nbar_b) grid")
    sweep.add_argument("--etas", type=_float_list, help="comma-separated eta values")
    sweep.add_argument("--nbar-start", type=float)
    sweep.add_argument("--nbar-stop", type=float)
    sweep.add_argument("--nbar-count", type=int)
    sweep.add_argument("--strict", action="store_true", help="fail on a degenerate denominator")
    sweep.add_argument("--spot-check", type=int, metavar="POINTS",
                       help="compare this many grid points with the two-mode oracle")

    verify = subparsers.add_parser("verify", parents=[common, probe, channel],
                                   help="check the closed forms against the Fock-space oracle")
    verify.add_argument("--only", action="append", help=f"comma-separated subset of: {', '.join(CHECK_NAMES)}")
    verify.add_argument("--draws", type=int, help="number of random probe draws")

    oracle = subparsers.add_parser("oracle", parents=[common, probe, channel, golden],
                                   help="exact QFI of the channel output next to the bound")
    oracle.add_argument("--theta", type=float, default=0.0, help="phase at which the output is evaluated")

    return parser


def config_arguments(values: Dict[str, str]) -> List[str]:
    """Config-file entries as flags; they go before the command-line flags, which win"""
    arguments = []
    for key, value in values.items():
        if key == "config":
            continue
        flag = "--" + key.replace("_", "-")
        word = value.strip().lower()
        if word in TRUE_WORDS:
            arguments.append(flag)
        elif word not in FALSE_WORDS:
            arguments.extend([flag, value.strip()])
    return arguments


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        position = argv.index(args.command) + 1
        args = parser.parse_args(argv[:position] + config_arguments(load_config_file(args.config)) + argv[position:])
    return args


def probe_from_args(args: argparse.Namespace, default: str) -> ProbeSpec:
    family = PROBE_ALIASES[args.probe or default]
    return make_probe_spec(
        family=family,
        amplitude=1.0 if args.alpha is None else args.alpha,
        photon_count=args.photons or 0,
        mean=args.mean or 0.0,
        var=args.var or 0.0,
        squeeze=args.squeeze or 0.0,
        n_modes=args.n_modes or (2 if family == ProbeFamily.entangled_coherent else 1),
    )


def channel_from_args(args: argparse.Namespace) -> ChannelParams:
    if args.eta is None or args.nbar_b is None:
        raise DomainError("--eta and --nbar-b are required")
    return derive_params(args.eta, args.nbar_b)


def moment_mode(args: argparse.Namespace) -> MomentMode:
    return MomentMode(args.moments) if args.moments else MomentMode.quoted


def output_format(args: argparse.Namespace) -> str:
    return args.format or DEFAULT_FORMAT[args.command]


def emit(storage: ResultStorageService, args: argparse.Namespace, text: str, golden_name: Optional[str] = None):
    if golden_name and args.regen_golden:
        storage.save_golden(golden_name, text, confirmed=args.i_know)
    storage.write_text(text, args.output)


async def cmd_bound(args: argparse.Namespace, storage: ResultStorageService) -> int:
    p = channel_from_args(args)
    probe = moments(probe_from_args(args, "coherent"), moment_mode(args))
    log_info("Evaluating bound", eta=p.eta, nbar_b=p.nbar_b, n_modes=probe.n_modes)

    if output_format(args) == "csv":
        row = SweepService(storage, strict=args.strict).evaluate_point(p.eta, p.nbar_b, probe)
        emit(storage, args, storage.render_csv([row]))
        return 0

    result = cq_star(p, probe, strict=args.strict)
    payload = {
        "eta": p.eta,
        "nbar_b": p.nbar_b,
        "n": probe.n_modes,
        "mean": probe.mean_total,
        "var": probe.var_total,
        **result.model_dump(),
    }
    emit(storage, args, storage.render_json(payload), GOLDEN_BOUND)
    return 0


async def cmd_sweep(args: argparse.Namespace, storage: ResultStorageService) -> int:
    fields = {
        "etas": args.etas,
        "nbar_start": args.nbar_start,
        "nbar_stop": args.nbar_stop,
        "nbar_count": args.nbar_count,
    }
    spec = SweepSpec(
        probe=probe_from_args(args, "ecs"),
        moment_mode=moment_mode(args),
        output_path=args.output,
        **{key: value for key, value in fields.items() if value is not None},
    )
    service = SweepService(storage, strict=args.strict)
    rows = await service.run_sweep(spec)

    if output_format(args) == "json":
        emit(storage, args, storage.render_json([row.model_dump() for row in rows]))
    else:
        if args.regen_golden:
            storage.save_golden(GOLDEN_SWEEP, storage.render_csv(rows), confirmed=args.i_know)
        await service.write_sweep(spec, rows)

    if args.spot_check:
        checks = await service.spot_check_oracle(spec, args.spot_check)
        for check in checks:
            log_info(f"Spot check {'PASS' if check.passed else 'FAIL'} at eta={check.details['eta']}, "
                     f"nbar_b={check.details['nbar_b']}: residual={check.residual:.3e}",
                     residual=check.residual, **check.details)
        if not all(check.passed for check in checks):
            return 1
    return 0


async def cmd_verify(args: argparse.Namespace, storage: ResultStorageService) -> int:
    only = [name.strip() for entry in args.only or [] for name in entry.split(",") if name.strip()]
    point = None
    if args.probe:
        p = channel_from_args(args)
        point = (probe_from_args(args, "coherent"), p.eta, p.nbar_b)

    service = CompleteVerificationService(settings, dim=args.dim, draws=args.draws, seed=args.seed,
                                          dominance_point=point)
    report = await service.verify_all(only)

    if output_format(args) == "csv":
        emit(storage, args, storage.render_table(VERIFY_COLUMNS, [check.model_dump() for check in report.checks]))
    else:
        emit(storage, args, storage.render_json({"passed": report.passed, **report.model_dump()}))
    return 0 if report.passed else 1


async def cmd_oracle(args: argparse.Namespace, storage: ResultStorageService) -> int:
    p = channel_from_args(args)
    spec = probe_from_args(args, "coherent")
    dim = args.dim or (settings.multimode_dim if spec.n_modes == 2 else settings.dim)
    if spec.n_modes == 2 and dim > settings.multimode_max_dim:
        raise DomainError(f"two-mode oracle is limited to {settings.multimode_max_dim} photons per mode, got {dim}")
    result = await OracleService(settings).run_oracle(spec, p, dim, args.theta)

    payload = {"eta": p.eta, "nbar_b": p.nbar_b, "dim": dim, "theta": args.theta, **result.model_dump()}
    if output_format(args) == "csv":
        emit(storage, args, storage.render_table(list(payload), [payload]))
    else:
        emit(storage, args, storage.render_json(payload), GOLDEN_ORACLE)
    return 0


COMMANDS = {
    "bound": cmd_bound,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "oracle": cmd_oracle,
}


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = parse_arguments(argv)
        if args.log_level:
            set_level(args.log_level)
        return asyncio.run(COMMANDS[args.command](args, ResultStorageService()))
    except (BoundError, ValidationError) as e:
        log_error("Command failed", error=e)
        return exit_code_for(e)
    except Exception as e:
        log_error("Unexpected error", error=e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
