"""
Command-line surface: files in, reports out.

Exit status 0 means success, 1 means the computation ran and the verdict is
negative (a violated condition, a non-optimal circuit), 2 means the inputs
could not be used.
"""

import argparse
import functools
import logging
import math
from dataclasses import dataclass
from pathlib import Path

from dephase_lab.dephase import block_summary, dephase_partial, dephase_total, distribution_rows
from dephase_lab.discrimination import (
    CONDITION_CSV_HEADER,
    classify_patterns,
    condition_rows,
    conditional_mode_check,
    optimal_form_check,
    orthogonal_hierarchy,
    usd_hierarchy,
    usd_report,
)
from dephase_lab.errors import DephaseLabError, InputFormatError
from dephase_lab.fock import (
    DEFAULT_TOLERANCE,
    coherent_product_state,
    inner_product,
    max_photon_number,
    state_from_dict,
    state_to_dict,
)
from dephase_lab.linop import circuit_from_dict, circuit_to_dict, decompose_to_givens, givens_to_dict, transform
from dephase_lab.metrics import check_fidelity_bounds
from dephase_lab.naimark import (
    naimark_unitary,
    povm_from_dict,
    rail_state,
    simulate_povm,
    usd_povm,
    usd_signals,
)
from dephase_lab.search import (
    SWEEP_CSV_HEADER,
    AncillaSpec,
    SearchConfig,
    ancilla_sweep,
    beam_splitter_50_50,
    match_toy_pair,
    minimize_failure,
    toy_feasibility,
)
from dephase_lab.utils.io_formats import load_document, write_csv, write_document
from dephase_lab.utils.logging_config import setup_logging
from dephase_lab.utils.var_helpers import parse_extra_vars

logger = logging.getLogger(__name__)

OK, NEGATIVE, INPUT_ERROR = 0, 1, 2
DEFAULT_CHECK_ORDER = 6

FILE_SCHEMAS = """\
file formats (JSON or YAML; mode indices are 0-based everywhere):
  state     {"n_modes": int, "terms": [{"pattern": [int, ...], "re": float, "im": float}, ...]}
            or {"coherent": {"alphas": [[re, im], ...], "tail_tol": float, "headroom": int}}
  circuit   {"dim": int, "rows": [[[re, im], ...], ...]}   row j = output mode, column i = input mode,
            with U^dag a_j U = sum_i U_ji a_i
  mesh      {"dim": int, "angles": [...], "phases": [...]}
  povm      {"signal_dim": int, "elements": [{"vec": [[re, im], ...]}, ...]}
  search    {"n_modes": int, "max_restarts": int, "seed": int, "max_iterations": int,
             "convergence_tol": float, "classification_tol": float, "hierarchy_order": int,
             "threads": int, "ancillas": [{"label": str, "state": <state>, "exploratory": bool}]}
            every key may be overridden with DEPHASE_LAB_<KEY> or -e key=value

environment:
  DEPHASE_LAB_THREADS   cap on parallel search restarts (default: machine parallelism)

exit status: 0 success, 1 negative verdict, 2 input error
"""


@dataclass(frozen=True)
class CommandOutcome:
    status: int
    paths: tuple = ()


def reports_input_errors(func):
    """Turn invalid inputs into exit status 2 with one log line."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (DephaseLabError, ValueError, OSError) as e:
            logger.error(f"{func.__name__}: {e}")
            return CommandOutcome(INPUT_ERROR)
    return wrapper


def _load_state(path):
    return state_from_dict(load_document(path), str(path))


def _load_circuit(path):
    return circuit_from_dict(load_document(path), str(path))


def _pair(plus_file, minus_file, circuit_file):
    return _load_state(plus_file), _load_state(minus_file), _load_circuit(circuit_file)


@reports_input_errors
def cmd_transform(state_file, circuit_file, out_file):
    state = _load_state(state_file)
    circuit = _load_circuit(circuit_file)
    out = transform(circuit, state)
    path = write_document(out_file, state_to_dict(out))
    print(f"norm^2 = {out.norm_sq:.15g}")
    print(f"patterns = {len(out)}")
    return CommandOutcome(OK, (path,))


@reports_input_errors
def cmd_dephase(state_file, out_file, circuit_file=None, modes=None):
    state = _load_state(state_file)
    if circuit_file:
        state = transform(_load_circuit(circuit_file), state)
    if modes:
        mixture = dephase_partial(state, modes)
        path = write_document(out_file, block_summary(mixture))
        print(f"blocks = {len(mixture.blocks)}, total probability = {mixture.total:.15g}")
    else:
        mixture = dephase_total(state)
        path = write_csv(out_file, ['pattern', 'probability'],
                         [[label, repr(p)] for label, p in distribution_rows(mixture)])
        print(f"patterns = {len(mixture.weights)}, total probability = {mixture.total:.15g}")
    return CommandOutcome(OK, (path,))


@reports_input_errors
def cmd_classify(plus_file, minus_file, circuit_file, out_file):
    plus, minus, circuit = _pair(plus_file, minus_file, circuit_file)
    classification = classify_patterns(transform(circuit, plus), transform(circuit, minus))
    path = write_document(out_file, classification.to_dict())
    print(f"conclusive(+) = {len(classification.conclusive_plus)}, "
          f"conclusive(-) = {len(classification.conclusive_minus)}, "
          f"ambiguous = {len(classification.ambiguous)}")
    return CommandOutcome(OK, (path,))


@reports_input_errors
def cmd_check(plus_file, minus_file, circuit_file, out_file, mode='all', max_order=None):
    plus, minus, circuit = _pair(plus_file, minus_file, circuit_file)
    if max_order is None:
        max_order = max(1, min(DEFAULT_CHECK_ORDER, max(max_photon_number(plus), max_photon_number(minus))))
    orthogonal = abs(inner_product(plus, minus)) <= DEFAULT_TOLERANCE.abs_tol
    if mode != 'all':
        report = conditional_mode_check(circuit, plus, minus, int(mode), max_order)
    elif orthogonal:
        report = orthogonal_hierarchy(circuit, plus, minus, max_order)
    else:
        report = usd_hierarchy(circuit, plus, minus, max_order)
    path = write_csv(out_file, CONDITION_CSV_HEADER, condition_rows(report))
    print(f"{report.kind} conditions up to order {report.max_order}: "
          f"{len(report.entries)} moments, {len(report.violations())} violated")
    if report.sum_rule is not None:
        print(f"sum rule: {report.sum_rule.lhs:.12g} vs {report.sum_rule.rhs:.12g} "
              f"({'ok' if report.sum_rule.ok else 'violated'})")
    print("verdict: " + ("pass" if report.verdict else "fail"))
    return CommandOutcome(OK if report.verdict else NEGATIVE, (path,))


@reports_input_errors
def cmd_usd(plus_file, minus_file, circuit_file, out_file=None, priors=0.5):
    plus, minus, circuit = _pair(plus_file, minus_file, circuit_file)
    report = usd_report(circuit, plus, minus, (priors, 1.0 - priors))
    doc = {'usd_report': report.to_dict()}
    if report.optimal is not None:
        bounds = check_fidelity_bounds(plus, minus, circuit, None, min(1.0, report.prob_fail_circuit))
        form = optimal_form_check(transform(circuit, plus), transform(circuit, minus))
        doc['fidelity_bounds'] = bounds.to_dict()
        doc['optimal_form'] = {'amplitude_match': form.amplitude_match,
                               'common_phase': form.common_phase, 'phase': form.phase,
                               'ambiguous': [list(p) for p in form.ambiguous]}
        print(f"fidelity bounds: {bounds.f_input:.12g} <= {bounds.f_dephased:.12g} "
              f"<= {bounds.prob_fail ** 2:.12g}")
    paths = (write_document(out_file, doc),) if out_file else ()
    print(f"P_fail = {report.prob_fail_circuit:.15g}")
    print(f"P_succ = {report.prob_success_circuit:.15g}")
    if report.optimal is None:
        print("optimality: not applicable for unequal priors")
        return CommandOutcome(OK, paths)
    print(f"optimum |<+|->| = {report.prob_fail_optimal:.15g}, optimal = {report.optimal}")
    return CommandOutcome(OK if report.optimal else NEGATIVE, paths)


def _mesh_path(out_circuit):
    out_circuit = Path(out_circuit)
    return out_circuit.with_name(out_circuit.stem + '.mesh.json')


@reports_input_errors
def cmd_naimark(out_circuit, povm_file=None, usd=None, mesh_file=None):
    if usd is not None:
        alpha, beta = usd
        construction = usd_povm(alpha, beta)
        dilation = naimark_unitary(construction.povm)
        print(f"P_fail = {construction.prob_fail:.15g}")
        big_n = dilation.unitary.shape[0]
        for name, vector in zip(('+', '-'), usd_signals(alpha, beta)):
            clicks = simulate_povm(dilation, rail_state(vector, big_n))
            print(f"outcomes({name}) = " + ', '.join(f"{p:.12g}" for p in clicks))
    elif povm_file is not None:
        dilation = naimark_unitary(povm_from_dict(load_document(povm_file), str(povm_file)))
    else:
        raise InputFormatError("either a POVM file or --usd ALPHA BETA is required")
    circuit_path = write_document(out_circuit, circuit_to_dict(dilation.circuit))
    mesh_path = write_document(mesh_file or _mesh_path(out_circuit),
                               givens_to_dict(decompose_to_givens(dilation.circuit)))
    print(f"rails = {dilation.unitary.shape[0]}, signal levels = {dilation.povm.signal_dim}")
    return CommandOutcome(OK, (circuit_path, mesh_path))


def _ancillas(raw):
    if raw is None:
        return []
    if not isinstance(raw, list):
        raise InputFormatError("'ancillas' must be a list")
    specs = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict) or 'state' not in item:
            raise InputFormatError(f"ancilla {i} needs a 'state' mapping")
        specs.append(AncillaSpec(str(item.get('label', f'ancilla-{i}')),
                                 state_from_dict(item['state'], f"ancilla {i}"),
                                 bool(item.get('exploratory', False))))
    return specs


@reports_input_errors
def cmd_search(plus_file, minus_file, config_file, out_file=None, sweep_file=None, extra_vars=None):
    plus, minus = _load_state(plus_file), _load_state(minus_file)
    doc = dict(load_document(config_file))
    ancillas = _ancillas(doc.pop('ancillas', None))
    config = SearchConfig.from_mapping(doc, extra_vars)

    toy = match_toy_pair(plus, minus)
    feasibility = toy_feasibility(*toy) if toy else None
    result = minimize_failure(plus, minus, config)

    report = result.to_dict()
    if feasibility is not None:
        report['toy_feasibility'] = feasibility.to_dict()
    paths = []
    if out_file:
        paths.append(write_document(out_file, report))
    if ancillas:
        rows = ancilla_sweep(plus, minus, ancillas, config)
        sweep_path = sweep_file or Path(out_file or 'search').with_suffix('.sweep.csv')
        paths.append(write_csv(sweep_path, SWEEP_CSV_HEADER, [row.csv_row() for row in rows]))
        for row in rows:
            print(f"ancilla {row.label}: P_fail = {row.result.objective:.12g}, "
                  f"optimal = {row.result.optimal} ({row.note})")

    print(f"best P_fail = {result.objective:.15g}, overlap = {result.overlap:.15g}")
    print(result.note)
    if feasibility is not None:
        if feasibility.verdict == 'infeasible':
            print(f"analytic verdict: infeasible for a fixed array ({feasibility.obstruction})")
        else:
            print(f"analytic verdict: {feasibility.verdict}")
    return CommandOutcome(OK if result.optimal else NEGATIVE, tuple(paths))


@reports_input_errors
def cmd_coherent_demo(alpha=0.7, tail_tol=1e-12, max_order=6, out_file=None):
    """|+-alpha>|alpha> through a 50/50 beam splitter."""
    plus = coherent_product_state([alpha, alpha], tail_tol, headroom=max_order)
    minus = coherent_product_state([-alpha, alpha], tail_tol, headroom=max_order)
    circuit = beam_splitter_50_50()
    report = usd_report(circuit, plus, minus)
    expected = math.exp(-2 * alpha ** 2)
    checks = [conditional_mode_check(circuit, plus, minus, j, max_order) for j in range(2)]
    form = optimal_form_check(transform(circuit, plus), transform(circuit, minus))
    print(f"P_fail = {report.prob_fail_circuit:.15g} (exp(-2 alpha^2) = {expected:.15g})")
    print(f"truncation deficit = {plus.truncation_deficit:.3g}, optimal = {report.optimal}")
    for j, check in enumerate(checks):
        largest = max(abs(e.value) for e in check.entries)
        print(f"mode {j}: orders 1..{max_order} largest |moment| = {largest:.3g}, "
              f"verdict {'pass' if check.verdict else 'fail'}")
    print(f"optimal form: amplitude match {form.amplitude_match}, common phase {form.phase}")
    paths = ()
    if out_file:
        paths = (write_document(out_file, {
            'usd_report': report.to_dict(),
            'expected_prob_fail': expected,
            'conditional_checks': [c.to_dict() for c in checks],
        }),)
    passed = bool(report.optimal) and all(c.verdict for c in checks) and form.ok
    return CommandOutcome(OK if passed else NEGATIVE, paths)


def build_parser():
    parser = argparse.ArgumentParser(
        prog='dephase-lab',
        description='Dephasing-approach feasibility checks for linear-optics POVMs and USD.',
        epilog=FILE_SCHEMAS,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    parser.add_argument('--log-file', help='also write log records to this file')
    parser.add_argument('-e', '--extra', action='append', default=[], metavar='KEY=VALUE',
                        help='override a search config key')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('transform', help='apply a circuit to a state')
    p.add_argument('state')
    p.add_argument('circuit')
    p.add_argument('out')

    p = sub.add_parser('dephase', help='dephase a (transformed) state')
    p.add_argument('state')
    p.add_argument('--circuit')
    p.add_argument('--modes', type=int, nargs='+', help='dephase only these modes')
    p.add_argument('--out', required=True)

    p = sub.add_parser('classify', help='conclusive and ambiguous output patterns')
    p.add_argument('plus')
    p.add_argument('minus')
    p.add_argument('circuit')
    p.add_argument('--out', required=True)

    p = sub.add_parser('check', help='hierarchy of moment conditions')
    p.add_argument('plus')
    p.add_argument('minus')
    p.add_argument('circuit')
    p.add_argument('--mode', default='all', help="'all' or one output mode for the conditional subset")
    p.add_argument('--max-order', type=int)
    p.add_argument('--out', required=True)

    p = sub.add_parser('usd', help='USD failure probability and fidelity bounds')
    p.add_argument('plus')
    p.add_argument('minus')
    p.add_argument('circuit')
    p.add_argument('--priors', type=float, default=0.5, help='prior of the + state')
    p.add_argument('--out')

    p = sub.add_parser('naimark', help='compile a one-photon POVM to a circuit')
    p.add_argument('out_circuit')
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument('--povm')
    source.add_argument('--usd', type=float, nargs=2, metavar=('ALPHA', 'BETA'))
    p.add_argument('--mesh')

    p = sub.add_parser('search', help='search circuits for optimal USD')
    p.add_argument('plus')
    p.add_argument('minus')
    p.add_argument('config')
    p.add_argument('--out')
    p.add_argument('--sweep-out')

    p = sub.add_parser('coherent-demo', help='binary coherent states with a coherent ancilla')
    p.add_argument('--alpha', type=float, default=0.7)
    p.add_argument('--tail-tol', type=float, default=1e-12)
    p.add_argument('--max-order', type=int, default=6)
    p.add_argument('--out')
    return parser


def dispatch(args, extra_vars):
    if args.command == 'transform':
        return cmd_transform(args.state, args.circuit, args.out)
    if args.command == 'dephase':
        return cmd_dephase(args.state, args.out, args.circuit, args.modes)
    if args.command == 'classify':
        return cmd_classify(args.plus, args.minus, args.circuit, args.out)
    if args.command == 'check':
        return cmd_check(args.plus, args.minus, args.circuit, args.out, args.mode, args.max_order)
    if args.command == 'usd':
        return cmd_usd(args.plus, args.minus, args.circuit, args.out, args.priors)
    if args.command == 'naimark':
        return cmd_naimark(args.out_circuit, args.povm, args.usd, args.mesh)
    if args.command == 'search':
        return cmd_search(args.plus, args.minus, args.config, args.out, args.sweep_out, extra_vars)
    return cmd_coherent_demo(args.alpha, args.tail_tol, args.max_order, args.out)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(verbose=args.verbose, log_file=args.log_file)
    extra_vars = parse_extra_vars(['-e' + item for item in args.extra])

    logger.info(f"=== dephase-lab {args.command} ===")
    try:
        outcome = dispatch(args, extra_vars)
    except KeyboardInterrupt:
        logger.info("Interrupted")
        return 130
    except Exception as e:
        logger.error(f"Fatal error: {e}")
        raise
    for path in outcome.paths:
        logger.debug(f"Report written: {path}")
    return outcome.status
