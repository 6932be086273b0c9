#!/usr/bin/env python3
"""
Lindstedt Series Explorer - Main Entry Point
"""
import argparse
import math
import sys
import time
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from database import STATUS_ERROR, RunStore
from errors import LindstedtError, ModelValidationError, NearSingularInversion, NoConvergence
from fourier_taylor import ft_convolve
from log_config import logger, set_level
from model import ALPHA, BETA, FULL, Model, load_model, reference_document
from oracle import coefficient_growth, residual_norm, solve_to_order
from renormalized import DomainSpec, probe_domain, reexpand_in_eps, renormalized_enumerator, renormalized_expand, \
    residual_on_torus
from reports import Report, Reporter
from scales import ScaleSequence, assign_scales, bryuno_check, build_scale_sequence, verify_separation
from self_energy import SelfEnergyMatrix, build_catalog, fixed_point_defect, hermiticity_defect, \
    transposition_defect, truncation_estimate, verify_block_bounds, verify_localized_cancellations
from settings import Settings
from trees import TreeEnumerator, sum_tree_values, tree_dump, verify_zero_momentum_cancellation
from utils import fit_slope, mode_ball, parse_since

COMMANDS = ['expand', 'verify', 'resum', 'probe-domain', 'bench', 'history']
SUITES = ['all', 'oracle', 'trees', 'scales', 'bryuno', 'self-energy', 'symmetry', 'resummation']

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Bad command-line input"""


def resolve_model(name: str, settings: Settings) -> Model:
    """'ref1' selects the built-in reference model, anything else is a path to a JSON document"""
    if name == 'ref1':
        return load_model(reference_document(), settings.zero_tolerance, settings.diophantine_nmax)
    if not Path(name).exists():
        raise UsageError(f"--model: file '{name}' not found")
    return load_model(name, settings.zero_tolerance, settings.diophantine_nmax)


def working_dtype(settings: Settings):
    return np.clongdouble if settings.precision == 'extended' else np.complex128


def build_engine(model: Model, settings: Settings, vmax: int) -> Tuple[ScaleSequence, SelfEnergyMatrix]:
    sequence = build_scale_sequence(model.frequency, settings.n_min, settings.gamma_grid, settings.scale_floor)
    catalog = build_catalog(model, vmax, settings.n_min, sequence)
    return sequence, SelfEnergyMatrix(model, catalog, sequence, settings.condition_threshold)


def _relative(diff: float, scale: float) -> float:
    return diff / scale if scale > 0 else diff


def check_residuals(report: Report, model: Model, K: int, settings: Settings):
    solution = solve_to_order(model, K, settings.solver_tolerance, working_dtype(settings))
    report.section('formal solution residuals')
    for k in range(1, K + 1):
        residual = residual_norm(model, solution, k)
        scale = max(1.0, solution.h.max_at_order(k))
        report.check(f"order {k}", residual <= 1e-10 * scale, residual / scale)
    return solution


def expand(model: Model, settings: Settings, args, reporter: Reporter) -> Report:
    """Oracle solution, tree sums against it, and the coefficient dump"""
    K = args.order
    dtype = working_dtype(settings)
    report = Report('expand')
    report.section('model').add('name', model.name).add('order', K).add('precision', settings.precision)
    solution = check_residuals(report, model, K, settings)

    report.section('tree sums against the recursion')
    enumerator = TreeEnumerator(model, collapsed=True)
    source = solution.leaf_source()
    for k in range(1, K + 1):
        worst = 0.0
        count = 0
        for nu in mode_ball(model.r, k * model.nf, include_zero=True):
            if not any(nu) and k in solution.undetermined:
                continue
            value = sum_tree_values(model, k, nu, FULL, source, enumerator, dtype)
            worst = max(worst, float(np.max(np.abs(value - solution.h.get(k, nu)))))
            count += 1
        relative = _relative(worst, solution.h.max_at_order(k))
        report.check(f"order {k} ({count} modes)", relative <= 1e-10, relative)

    if K >= 2:
        growth = coefficient_growth(solution.h)
        report.section('coefficient growth').add('geometric rate', growth.rate) \
            .add('factorial power', growth.factorial_power)
    reporter.write_coefficients(solution.h)

    if args.dump_trees:
        for gamma in (ALPHA, BETA):
            for nu in mode_ball(model.r, model.nf):
                for tree in TreeEnumerator(model).trees(K, nu, gamma)[:3]:
                    reporter.console.print("\n".join(tree_dump(tree)))
    return report


def _suite_trees(report: Report, model: Model, K: int, settings: Settings):
    solution = solve_to_order(model, K, settings.solver_tolerance)
    enumerator = TreeEnumerator(model)
    report.section('zero-momentum cancellation')
    for k in range(1, K + 1):
        result = verify_zero_momentum_cancellation(model, k, solution.leaf_source(), enumerator)
        report.add(f"order {k} trees", result.tree_count).add(f"order {k} families", len(result.families))
        report.check(f"order {k} global", result.relative <= 1e-12, result.relative)
        report.check(f"order {k} worst family", result.worst_family <= 1e-12, result.worst_family)


def _suite_bryuno(report: Report, model: Model, K: int, sequence: ScaleSequence):
    enumerator = TreeEnumerator(model, leaves=False)
    report.section('bryuno bound')
    for k in range(1, min(K, 5) + 1):
        checked = violations = 0
        for nu in mode_ball(model.r, k * model.nf, include_zero=True):
            for gamma in (ALPHA, BETA):
                for tree in enumerator.trees(k, nu, gamma):
                    result = bryuno_check(assign_scales(tree, sequence, model.frequency), sequence)
                    checked += 1
                    violations += len(result.violations)
        report.add(f"order {k} trees", checked)
        report.check(f"order {k} violations", violations == 0, violations)


def _suite_self_energy(report: Report, matrix: SelfEnergyMatrix, K: int, settings: Settings, reporter: Reporter):
    result = verify_localized_cancellations(matrix, min(K, 4), settings.localize_step)
    report.section('localized self-energy cancellations')
    report.add('families', len(result.families))
    rows = []
    for family in result.families:
        scale = max(family.scale, 1e-300)
        rows.append([family.source, family.size, family.scale, family.constant_aa / scale,
                     max(family.constant_ab, family.constant_ba) / scale, family.derivative_aa / scale,
                     family.antisymmetry_ab / scale, family.derivative_bb / scale])
        report.check(f"{family.source} family {len(rows)}", family.ok(), max(rows[-1][3:]))
    reporter.print_table("Self-energy families",
                         ['source', 'members', 'scale', 'aa(0)', 'ab(0)', "aa'", "ab'+ba'^T", "bb'"], rows)


def _suite_symmetry(report: Report, matrix: SelfEnergyMatrix, seed: int, samples: int = 100):
    rng = np.random.default_rng(seed)
    sequence = matrix.sequence
    # deep windows, where skeletons with internal lines are admissible
    windows = [n for n in sequence.scales if n <= -4 and n > sequence.n_min] or sequence.scales[:1]
    worst_transposition = worst_hermitian = 0.0
    for _ in range(samples):
        low, high = sequence.window(int(rng.choice(windows)))
        modulus = rng.uniform(low, min(high, 2 * low))
        x = modulus * np.exp(1j * rng.uniform(-0.3, 0.3))
        eps = 0.01 * rng.uniform(0.1, 1.0) * np.exp(1j * rng.uniform(-np.pi / 2, np.pi / 2))
        worst_transposition = max(worst_transposition, transposition_defect(matrix, 2, complex(x), complex(eps)))
        worst_hermitian = max(worst_hermitian, hermiticity_defect(matrix, 2, float(modulus), float(abs(eps))))
    report.section('self-energy symmetry')
    report.check('transposition', worst_transposition <= 1e-10, worst_transposition)
    report.check('self-adjoint at real eps', worst_hermitian <= 1e-10, worst_hermitian)


def _suite_resummation(report: Report, model: Model, matrix: SelfEnergyMatrix, K: int, settings: Settings):
    K = min(K, 3)
    enumerator = renormalized_enumerator(matrix)
    # one order beyond K so that b^(K)_0 is fixed on both sides
    oracle = solve_to_order(model, K + 1, settings.solver_tolerance)
    tol, k_max = settings.m_tolerance, settings.m_max_iterations
    expanded = reexpand_in_eps(lambda e: renormalized_expand(matrix, K + 1, e, tol, k_max, enumerator).h, K)
    report.section('renormalized expansion')
    for k in range(1, K + 1):
        worst = 0.0
        for nu in mode_ball(model.r, k * model.nf, include_zero=True):
            worst = max(worst, float(np.max(np.abs(expanded.get(k, nu) - oracle.h.get(k, nu)))))
        relative = _relative(worst, oracle.h.max_at_order(k))
        report.check(f"order {k} matches recursion", relative <= 1e-8, relative)

    eps_values = list(np.geomspace(1e-3, 1e-2, 3))
    for order in sorted({1, K}):
        residuals = [residual_on_torus(model, renormalized_expand(matrix, order, e, tol, k_max, enumerator),
                                       m=settings.psi_grid_exponent) for e in eps_values]
        slope = fit_slope(eps_values, residuals)
        report.check(f"residual slope K={order}", slope >= order + 1 - 0.1, slope)


def verify(model: Model, settings: Settings, args, reporter: Reporter) -> Report:
    """Run the selected verification suites"""
    suite = args.suite or 'all'
    K = args.order
    report = Report('verify')
    report.section('model').add('name', model.name).add('order', K).add('suite', suite)
    wanted = SUITES[1:] if suite == 'all' else [suite]

    if 'oracle' in wanted:
        check_residuals(report, model, K, settings)
    if 'trees' in wanted:
        _suite_trees(report, model, K, settings)

    needs_engine = any(s in wanted for s in ('scales', 'bryuno', 'self-energy', 'symmetry', 'resummation'))
    if needs_engine:
        sequence, matrix = build_engine(model, settings, args.vmax)
        if 'scales' in wanted:
            violations = verify_separation(sequence, model.frequency)
            report.section('scale sequence').add('n_min', sequence.n_min).add('ball radius', sequence.ball_radius)
            for n in sorted(sequence.gammas, reverse=True):
                report.add(f"gamma[{n}]", sequence.gammas[n])
            report.check('separation', not violations, len(violations))
        if 'bryuno' in wanted:
            _suite_bryuno(report, model, K, sequence)
        if 'self-energy' in wanted:
            _suite_self_energy(report, matrix, K, settings, reporter)
        if 'symmetry' in wanted:
            _suite_symmetry(report, matrix, args.seed)
        if 'resummation' in wanted:
            _suite_resummation(report, model, matrix, K, settings)
    return report


def resum(model: Model, settings: Settings, args, reporter: Reporter) -> Report:
    """Fixed point of the self-energy levels, block bounds and catalog truncation"""
    eps = args.eps
    sequence, matrix = build_engine(model, settings, args.vmax)
    tol, k_max = settings.m_tolerance, settings.m_max_iterations
    report = Report('resum')
    report.section('catalog').add('vmax', args.vmax).add('skeletons', len(matrix.catalog)).add('eps', eps)
    for V in range(1, args.vmax + 1):
        report.add(f"V={V}", len(matrix.catalog.by_size(V)))

    samples = []
    for n in sequence.scales:
        x = sequence.sample(n)
        samples.append(x)
        report.section(f"scale {n}").add('x', x)
        try:
            result = matrix.limit(x, eps, tol, k_max)
        except (NoConvergence, NearSingularInversion) as e:
            report.check('fixed point', False, str(e))
            continue
        report.add('history', result.history)
        if result.ratios:
            report.add('ratios', result.ratios)
        report.check('converged', result.history[-1] <= tol and result.iterations <= 8, result.iterations)
        defect = fixed_point_defect(matrix, x, eps, tol, k_max)
        report.check('fixed-point identity', defect <= 1e-12, defect)

    window = max(sequence.n_min + 1, -5)
    bounds = verify_block_bounds(matrix, 2, abs(eps), window)
    report.section(f"block bounds at window {window}")
    for name, slope in bounds.slopes.items():
        report.add(f"slope {name}", slope)
    report.add('eps slope', bounds.eps_slope)
    if bounds.vanishing:
        report.add('vanishing', ", ".join(bounds.vanishing))
    report.check('vanishing orders', bounds.ok())

    if args.truncation:
        larger = SelfEnergyMatrix(model, build_catalog(model, args.vmax + 1, settings.n_min, sequence), sequence,
                                  settings.condition_threshold)
        report.section('catalog truncation').add(f"vmax {args.vmax + 1} skeletons", len(larger.catalog))
        report.add('max difference', truncation_estimate(matrix, larger, 2, samples, eps))
    return report


def probe(model: Model, settings: Settings, args, reporter: Reporter) -> Report:
    """Propagator bound on the sector arcs, the excluded half-axis and the cusp"""
    sequence, matrix = build_engine(model, settings, args.vmax)
    spec = DomainSpec(settings.eps0, settings.phi_grid, settings.arc_samples, settings.cusp_offsets)
    xs = [sequence.sample(n) for n in (0, -1, -2) if n > sequence.n_min]
    domain = probe_domain(matrix, spec, xs)
    reporter.write_domain(domain)

    report = Report('probe-domain')
    report.section('domain').add('eps0', spec.eps0).add('branch', model.equilibrium.branch)
    for phi in spec.phi_grid:
        arc = [s for s in domain.samples if s.phi == phi and s.kind == 'arc']
        report.check(f"arc phi={phi:.6f}", all(s.passed for s in arc), min(s.norm_margin for s in arc))
    report.check('excluded half-axis fails', domain.negative_axis_failures == len(spec.phi_grid),
                 domain.negative_axis_failures)
    report.section('cusp').add('points', len(domain.cusp_points))
    for point in domain.cusp_points:
        report.add('boundary', point)
    report.check('quadratic cusp', not math.isnan(domain.cusp_slope) and abs(domain.cusp_slope - 2.0) <= 0.2,
                 domain.cusp_slope)
    return report


def bench(model: Model, settings: Settings, args, reporter: Reporter) -> Tuple[Report, List[Tuple[str, float]]]:
    """Tree enumeration and convolution throughput"""
    K = args.order
    report = Report('bench')
    report.section('enumeration').add('order', K)
    enumerator = TreeEnumerator(model)
    start = time.perf_counter()
    count = 0
    for nu in mode_ball(model.r, K * model.nf, include_zero=True):
        for gamma in (ALPHA, BETA):
            count += len(enumerator.trees(K, nu, gamma))
    elapsed = time.perf_counter() - start
    report.add('trees', count).add('seconds', elapsed)
    if K <= 4:
        report.check('within 10 s', elapsed <= 10.0, elapsed)

    solution = solve_to_order(model, K, settings.solver_tolerance)
    sizes = [len(solution.h.modes(k)) for k in solution.h.orders]
    products = sum(a * b for i, a in enumerate(sizes) for j, b in enumerate(sizes) if i + j + 2 <= K)
    repeats = 5
    start = time.perf_counter()
    for _ in range(repeats):
        ft_convolve(solution.h, solution.h)
    convolution = (time.perf_counter() - start) / repeats
    report.section('convolution').add('coefficient products', products).add('seconds', convolution)
    metrics = [('trees_per_second', count / elapsed if elapsed > 0 else 0.0),
               ('enumeration_seconds', elapsed),
               ('products_per_second', products / convolution if convolution > 0 else 0.0)]
    for name, value in metrics:
        report.add(name, value)
    return report, metrics


def show_history(store: Optional[RunStore], args, reporter: Reporter):
    if store is None:
        raise UsageError("history needs the run store; drop --no-db")
    since = None
    if args.since:
        try:
            since = parse_since(args.since)
        except (ValueError, OverflowError) as e:
            raise UsageError(f"--since: cannot parse '{args.since}'") from e
    reporter.print_history(store.get_runs(since=since, limit=args.limit))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='Lindstedt series explorer for hyperbolic tori',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Coefficients of the reference model to order 3
  %(prog)s expand --model ref1 --order 3 --out reports

  # Every verification suite
  %(prog)s verify --model ref1 --order 3

  # Only the self-energy family table
  %(prog)s verify self-energy

  # Self-energy fixed point at eps = 0.01
  %(prog)s resum --eps 0.01

  # Heart-domain probe
  %(prog)s probe-domain --out reports

  # Runs recorded since a date
  %(prog)s history --since "1 Oct 2026"
        """
    )

    parser.add_argument('command', choices=COMMANDS, help='Command to execute')
    parser.add_argument('suite', nargs='?', choices=SUITES, help='Suite for the verify command (default: all)')
    parser.add_argument('--model', default='ref1', help="Model document path, or 'ref1' (default: ref1)")
    parser.add_argument('--order', type=int, default=3, help='Truncation order K (default: 3)')
    parser.add_argument('--vmax', type=int, default=None, help='Largest self-energy skeleton (default: from config)')
    parser.add_argument('--precision', choices=['double', 'extended'], default=None,
                        help='Arithmetic precision (default: from config)')
    parser.add_argument('--seed', type=int, default=None, help='Seed of sampled checks (default: from config)')
    parser.add_argument('--eps', type=float, default=0.01, help='Perturbation parameter for resum (default: 0.01)')
    parser.add_argument('--out', default=None, help='Directory for report files')
    parser.add_argument('--config', default='config.json', help='Settings file (default: config.json)')
    parser.add_argument('--db', default=None, help='Run store path (default: from config)')
    parser.add_argument('--no-db', action='store_true', help='Do not record the run')
    parser.add_argument('--log-level', default=None, help='Log level (default: from config)')
    parser.add_argument('--dump-trees', action='store_true', help='Print the trees of the highest order')
    parser.add_argument('--truncation', action='store_true', help='Compare the catalog with one of size vmax+1')
    parser.add_argument('--since', default=None, help='history: only runs started after this date')
    parser.add_argument('--limit', type=int, default=20, help='history: number of runs (default: 20)')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    settings = Settings(args.config)
    try:
        if args.suite and args.command != 'verify':
            raise UsageError(f"suite '{args.suite}' only applies to verify")
        if args.order < 1:
            raise UsageError("--order must be at least 1")
        if args.precision:
            settings.settings["precision"] = args.precision
        args.vmax = settings.vmax if args.vmax is None else args.vmax
        if args.vmax < 1:
            raise UsageError("--vmax must be at least 1")
        args.seed = settings.seed if args.seed is None else args.seed
        set_level(args.log_level or settings.log_level)
    except (UsageError, ValueError) as e:
        print(f"❌ Error: {e}")
        return EXIT_USAGE

    reporter = Reporter(settings, args.out)
    store = None if args.no_db else RunStore(args.db or settings.database)
    try:
        if args.command == 'history':
            show_history(store, args, reporter)
            return EXIT_OK

        try:
            model = resolve_model(args.model, settings)
        except ModelValidationError as e:
            print(f"❌ Error: {e}")
            return EXIT_USAGE

        run = store.start_run(args.command, model.name, args.order, args.vmax, settings.precision, args.seed) \
            if store else None
        metrics: List[Tuple[str, float]] = []
        try:
            if args.command == 'expand':
                report = expand(model, settings, args, reporter)
            elif args.command == 'verify':
                report = verify(model, settings, args, reporter)
            elif args.command == 'resum':
                report = resum(model, settings, args, reporter)
            elif args.command == 'probe-domain':
                report = probe(model, settings, args, reporter)
            else:
                report, metrics = bench(model, settings, args, reporter)
        except LindstedtError:
            if run is not None:
                store.finish_run(run, EXIT_FAILED, STATUS_ERROR)
            raise

        reporter.print_report(report)
        reporter.write_report(report)
        status = EXIT_OK if report.ok else EXIT_FAILED
        if run is not None:
            for name, value in metrics:
                store.add_metric(run, name, value)
            store.add_metric(run, 'failed_checks', len(report.failures))
            store.finish_run(run, status)
        return status

    except UsageError as e:
        print(f"❌ Error: {e}")
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("\n\n👋 Interrupted")
        return EXIT_FAILED
    except LindstedtError as e:
        logger.debug("engine failure", exc_info=True)
        print(f"\n❌ Error: {e}")
        return EXIT_FAILED
    finally:
        if store is not None:
            store.close()


if __name__ == "__main__":
    sys.exit(main())
