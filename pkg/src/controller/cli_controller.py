# CLI Controller - Parses command-line arguments, calls the services and maps outcomes to exit codes.
import argparse
import os
import sys
import warnings
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from resources.resource_config import VALID_CHAIN_EXTENSIONS, NumericDefaults, default_thread_count, get_chain_path
from src.model.distance_profile import DistanceKind
from src.model.errors import ChainAnalysisError, NotReversible, OutOfRange, UnderflowRiskWarning, ZeroReferenceMass
from src.model.family import FamilyParams
from src.model.markov_chain import ChainSpec
from src.model.reports import INEQUALITY_NAMES, SuiteConfig
from src.services import chain_service, family_service, metrics_service, mixing_service, product_service
from src.services.file_service import FileService
from src.services.log_service import get_logger, setup_logging
from src.services.suite_service import run_suite
from src.view.console_view import ConsoleView

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

DEFAULT_S_GRID = '0.25:3:12'
DEFAULT_GRID_POINTS = 50
MIX_TOLERANCE_KEYS = ('delta', 'precutoff_bound')


class UsageError(Exception):
    # Raised for argument combinations argparse cannot check by itself.
    pass


def parse_grid(spec: str, log_spaced: bool = False) -> np.ndarray:
    """
    Parse ``LO:HI:POINTS`` into a strictly increasing grid.

    Args:
        spec: Grid specification, e.g. ``0:5:50``.
        log_spaced: Geometric spacing; needs LO > 0.

    Returns:
        The grid as a numpy array.
    """
    parts = spec.split(':')
    if len(parts) != 3:
        raise UsageError(f"grid must be LO:HI:POINTS, got {spec!r}")
    try:
        lo, hi, points = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"grid must be LO:HI:POINTS, got {spec!r}") from None
    if points < 1 or lo < 0 or (points > 1 and not hi > lo):
        raise UsageError(f"grid needs 0 <= LO < HI and POINTS >= 1, got {spec!r}")
    if log_spaced:
        if lo <= 0:
            raise UsageError("a log-spaced grid needs LO > 0")
        return np.geomspace(lo, hi, points)
    return np.linspace(lo, hi, points)


def parse_kind(name: str) -> DistanceKind:
    try:
        return DistanceKind.parse(name)
    except OutOfRange as e:
        raise UsageError(str(e)) from None


def parse_float_list(text: str) -> list[float]:
    try:
        return [float(item) for item in text.split(',') if item.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def parse_tolerances(items: Sequence[str], allowed: Sequence[str]) -> dict[str, float]:
    tolerances = {}
    for item in items or []:
        key, sep, value = item.partition('=')
        if not sep or key not in allowed:
            raise UsageError(f"unknown tolerance {key!r}; expected one of {', '.join(allowed)}")
        try:
            tolerances[key] = float(value)
        except ValueError:
            raise UsageError(f"tolerance {key} needs a number, got {value!r}") from None
    return tolerances


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--verbose', action='store_true', default=argparse.SUPPRESS,
                        help='log progress at INFO level on stderr')
    common.add_argument('--out', default=argparse.SUPPRESS, metavar='PATH',
                        help='write the output document to PATH instead of stdout')

    source = argparse.ArgumentParser(add_help=False)
    source.add_argument('--chain', metavar='PATH', help='chain-spec JSON file or bundled sample name')
    source.add_argument('--n', type=int, help='use the two-route family chain G_n')
    source.add_argument('--epsilon', type=float, help='backtrack rate of G_n')

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument('--t', metavar='LO:HI:POINTS', help='time grid (default anchored to 1/gap)')
    grid.add_argument('--log', action='store_true', help='log-spaced time grid')

    fmt_csv = argparse.ArgumentParser(add_help=False)
    fmt_csv.add_argument('--format', choices=('csv', 'json'), default='csv')
    fmt_json = argparse.ArgumentParser(add_help=False)
    fmt_json.add_argument('--format', choices=('csv', 'json'), default='json')

    parser = argparse.ArgumentParser(prog='cutoff', description='Mixing-time and cutoff analysis of finite Markov chains.')
    parser.add_argument('--verbose', action='store_true', help='log progress at INFO level on stderr')
    parser.add_argument('--out', metavar='PATH', help='write the output document to PATH instead of stdout')
    sub = parser.add_subparsers(dest='command', required=True)

    chain = sub.add_parser('chain', parents=[common, source], help='stationary law, gap and reversibility')
    chain.add_argument('--emit-chain', metavar='PATH', help='also write the chain-spec JSON')

    profile = sub.add_parser('profile', parents=[common, source, grid, fmt_csv], help='worst-case distance profile')
    profile.add_argument('--kind', default='tv', help='tv, sep, hellinger or pairwise')

    product = sub.add_parser('product', parents=[common, source, grid, fmt_csv], help='n-fold product distances')
    product.add_argument('--copies', type=int, required=True)
    product.add_argument('--kind', default='sep', help='sep, hellinger or tv (envelope)')
    product.add_argument('--tensor', action='store_true', help='add the exact tensor-chain column')

    mix = sub.add_parser('mix', parents=[common, source, fmt_json], help='mixing times and cutoff diagnostics')
    mix.add_argument('--kind', default='tv')
    mix.add_argument('--eps', default='0.2', help='comma-separated thresholds in (0, 1/2]')
    mix.add_argument('--sizes', help='comma-separated family sizes, e.g. 8,16,32')
    mix.add_argument('--copies', help="product copies: an integer, or 'n' for n copies of G_n")
    mix.add_argument('--tol', action='append', metavar='KEY=VAL', help='delta or precutoff_bound')

    family = sub.add_parser('family', parents=[common, fmt_csv], help='the two-route family G_n')
    family.add_argument('--n', type=int, required=True)
    family.add_argument('--epsilon', type=float)
    family.add_argument('--s-grid', default=DEFAULT_S_GRID, metavar='LO:HI:POINTS')
    family.add_argument('--emit-chain', metavar='PATH')

    verify = sub.add_parser('verify', parents=[common, fmt_json], help='run the inequality suite')
    verify.add_argument('--seed', type=int, default=0)
    verify.add_argument('--chains', type=int, default=NumericDefaults.SUITE_CHAIN_COUNT)
    verify.add_argument('--only', help='comma-separated inequality names')
    verify.add_argument('--tol', action='append', metavar='KEY=VAL')
    verify.add_argument('--threads', type=int, default=None)
    return parser


class CliController:
    # Connects parsed arguments to the services and renders results through the view.

    def __init__(self, args: argparse.Namespace) -> None:
        self.args = args
        self.view = ConsoleView(out_path=getattr(args, 'out', None))

    # ------------------------------------------------------------- helpers

    def load_chain(self) -> ChainSpec:
        args = self.args
        if getattr(args, 'chain', None):
            path = args.chain
            if not os.path.exists(path) and get_chain_path(path).exists():
                path = str(get_chain_path(path))
            if not FileService.is_valid_chain_file(path):
                expected = ', '.join(VALID_CHAIN_EXTENSIONS)
                raise UsageError(f"not a chain file: {path} (expected an existing {expected} file)")
            return FileService.load_chain(path)
        if getattr(args, 'n', None) is not None:
            return family_service.build_family_chain(FamilyParams(args.n, args.epsilon))[0]
        raise UsageError('give --chain PATH or --n N')

    def time_grid(self, chain: ChainSpec) -> np.ndarray:
        if self.args.t:
            return parse_grid(self.args.t, self.args.log)
        try:
            gap = chain_service.spectral_gap(chain)
        except (NotReversible, ZeroReferenceMass):
            gap = chain.max_exit_rate
        if self.args.log:
            return np.geomspace(0.01 / gap, 20.0 / gap, DEFAULT_GRID_POINTS)
        return np.linspace(0.0, 20.0 / gap, DEFAULT_GRID_POINTS)

    def finish(self, emitted: bool) -> int:
        if not emitted:
            self.view.show_error('the output could not be written')
            return EXIT_FAILURE
        return EXIT_OK

    # ------------------------------------------------------------ commands

    def on_chain(self) -> int:
        chain = self.load_chain()
        pi = chain_service.resolve_equilibrium(chain)
        verdict = chain_service.check_detailed_balance(chain, pi)
        try:
            gap = chain_service.spectral_gap(chain, pi)
        except NotReversible:
            gap = None
        if self.args.emit_chain and FileService.save_chain(chain, self.args.emit_chain) is None:
            return self.finish(False)
        document = {
            'states': list(chain.state_labels),
            'equilibrium_mode': 'log' if pi.is_log else 'linear',
            'stationary': pi.values.tolist(),
            'log_stationary': pi.log_values().tolist(),
            'gap': gap,
            'reversible': verdict.balanced,
            'worst_edge': list(verdict.worst_edge) if verdict.worst_edge else None,
            'worst_violation': verdict.worst_violation,
        }
        return self.finish(self.view.emit_json(document))

    def on_profile(self) -> int:
        chain = self.load_chain()
        kind = parse_kind(self.args.kind)
        profile = metrics_service.worst_case_profile(chain, kind, self.time_grid(chain))
        return self.finish(self.view.emit_profile(profile, self.args.format))

    def on_product(self) -> int:
        args = self.args
        chain = self.load_chain()
        kind = parse_kind(args.kind)
        times = self.time_grid(chain)
        pi = chain_service.resolve_equilibrium(chain)
        table = pd.DataFrame({'time': times})
        if kind is DistanceKind.TOTAL_VARIATION:
            tv = metrics_service.worst_case_profile(chain, kind, times, pi)
            hellinger = metrics_service.worst_case_profile(chain, DistanceKind.HELLINGER, times, pi)
            lower, upper = product_service.product_tv_envelope(tv, hellinger, args.copies)
            table['marginal_tv'] = tv.values
            table['marginal_hellinger'] = hellinger.values
            table['lower'] = lower.values
            table['upper'] = upper.values
        elif kind in (DistanceKind.SEPARATION, DistanceKind.HELLINGER):
            marginal = metrics_service.worst_case_profile(chain, kind, times, pi)
            table['marginal'] = marginal.values
            table['product'] = product_service.product_profile(marginal, args.copies).values
        else:
            raise UsageError(f"product supports sep, hellinger or tv, got {args.kind!r}")
        if args.tensor:
            tensor = product_service.tensor_product(product_service.ProductSpec(chain, args.copies))
            tensor_pi = product_service.product_stationary(pi.to_linear(), args.copies)
            table['tensor'] = metrics_service.worst_case_values(tensor, kind, times, tensor_pi)
        return self.finish(self.view.emit_table(table, args.format))

    def on_mix(self) -> int:
        args = self.args
        kind = parse_kind(args.kind)
        eps_list = parse_float_list(args.eps)
        tolerances = parse_tolerances(args.tol, MIX_TOLERANCE_KEYS)
        delta = tolerances.get('delta', NumericDefaults.CUTOFF_DELTA)
        bound = tolerances.get('precutoff_bound', NumericDefaults.PRECUTOFF_BOUND)

        copies = None
        product = args.copies is not None
        if product and args.copies != 'n':
            try:
                copies = int(args.copies)
            except ValueError:
                raise UsageError(f"--copies needs an integer or 'n', got {args.copies!r}") from None

        if args.sizes:
            sizes = [int(size) for size in parse_float_list(args.sizes)]
            reports = family_service.family_sweep(sizes, args.epsilon, kind, eps_list, product, copies,
                                                  delta=delta, precutoff_bound=bound)
        else:
            chain = self.load_chain()
            source = mixing_service.ProfileSource.from_chain(chain, kind)
            if product:
                if copies is None:
                    raise UsageError("--copies n needs --sizes")
                if kind is DistanceKind.TOTAL_VARIATION:
                    hellinger = mixing_service.ProfileSource.from_chain(chain, DistanceKind.HELLINGER)
                    source = mixing_service.ProfileSource.tv_envelope(source, hellinger, copies, 'upper')
                else:
                    source = mixing_service.ProfileSource.product(source, copies)
            reports = [mixing_service.mixing_report(source, eps_list)]

        if args.format == 'csv':
            rows = [{'size': report.size, 'eps': eps, 'ratio': ratio}
                    for report in reports for eps, ratio in zip(report.eps_list, report.ratios)]
            return self.finish(self.view.emit_table(pd.DataFrame(rows, columns=['size', 'eps', 'ratio'])))
        payload = [report.to_dict() for report in reports]
        return self.finish(self.view.emit_json(payload if args.sizes else payload[0]))

    def on_family(self) -> int:
        args = self.args
        params = FamilyParams(args.n, args.epsilon)
        s_grid = parse_grid(args.s_grid)
        chain, log_back_rate = family_service.build_family_chain(params)
        if args.emit_chain and FileService.save_chain(chain, args.emit_chain) is None:
            return self.finish(False)
        table = family_service.scaled_profile_table(params, s_grid)
        if args.format == 'csv':
            return self.finish(self.view.emit_table(table))

        pi = chain_service.stationary_distribution(chain, 'log')
        balance = chain_service.check_detailed_balance(chain, pi)
        document = {
            'n': params.n,
            'epsilon': params.epsilon,
            'log_back_rate': log_back_rate,
            'detailed_balance': {'balanced': balance.balanced, 'worst_violation': balance.worst_violation},
            'stationary_target_mass': float(pi.values[params.target]),
            'plateau': {
                'time': 1.5 * params.time_scale,
                'product_tv_approx': family_service.product_tv_approx(params, 1.5 * params.time_scale, chain),
            },
            'scaled_profile': table.to_dict(orient='records'),
        }
        if params.n <= NumericDefaults.SMALL_FAMILY_MAX_N:
            times = [params.n / 2, params.n, 2 * params.n, 3 * params.n]
            document['separation_minorization'] = family_service.separation_minorization_check(params, times)
        return self.finish(self.view.emit_json(document))

    def on_verify(self) -> int:
        args = self.args
        inequalities = tuple(name.strip() for name in args.only.split(',')) if args.only else INEQUALITY_NAMES
        unknown = [name for name in inequalities if name not in INEQUALITY_NAMES]
        if unknown:
            raise UsageError(f"unknown inequalities: {', '.join(unknown)}")
        config = SuiteConfig(
            master_seed=args.seed,
            chain_count=args.chains,
            tolerances=parse_tolerances(args.tol, INEQUALITY_NAMES),
            inequalities=inequalities,
            threads=args.threads if args.threads is not None else default_thread_count(),
        )
        report = run_suite(config)
        if not self.view.emit_json(report):
            return EXIT_FAILURE
        if not report.passed:
            failed = [result.name for result in report.results if not result.passed]
            if failed:
                self.view.show_message(f"inequalities failed: {', '.join(failed)}")
            else:
                self.view.show_message(f"suite did not pass: non_vacuous={report.non_vacuous}, "
                                       f"{len(report.errors)} error record(s)")
            return EXIT_FAILURE
        return EXIT_OK

    def dispatch(self) -> int:
        handler = getattr(self, f"on_{self.args.command}")
        return handler()


def parse_and_dispatch(argv: Sequence[str]) -> int:
    """
    Run one command line.

    Args:
        argv: Arguments without the program name.

    Returns:
        0 on success (and suite pass), 1 on computation errors, 2 on argument errors.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    setup_logging('INFO' if args.verbose else None)

    controller = CliController(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter('always', UnderflowRiskWarning)
        try:
            return controller.dispatch()
        except UsageError as e:
            parser.print_usage(controller.view.stderr)
            controller.view.show_error(str(e))
            return EXIT_USAGE
        except ChainAnalysisError as e:
            logger.error(f"Command '{args.command}' failed: {e}")
            controller.view.show_error(str(e))
            return EXIT_FAILURE
        finally:
            for record in caught:
                controller.view.show_warning(str(record.message))


def run_application(argv: Optional[Sequence[str]] = None) -> int:
    # The main entry point for running the command-line application.
    return parse_and_dispatch(sys.argv[1:] if argv is None else argv)
