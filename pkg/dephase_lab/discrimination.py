"""
Pattern classification, USD failure probabilities and the hierarchies of
necessary conditions on normally ordered moments.

All moments are <chi+| c^dag_J c_J |chi-> for a multiset J of output
modes, computed in the Schroedinger picture: transform both states, lower
the modes in J, take the overlap.
"""

import cmath
import logging
import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from types import MappingProxyType
from typing import Mapping, Optional

from dephase_lab.errors import (
    DimensionMismatchError,
    InvalidStateError,
    NonorthogonalInputError,
    OrthogonalInputError,
    ParameterError,
)
from dephase_lab.fock import (
    DEFAULT_TOLERANCE,
    apply_lowering,
    fixed_photon_number,
    inner_product,
    max_photon_number,
)
from dephase_lab.linop import lower_output_modes, transform

logger = logging.getLogger(__name__)

EQUAL_PRIORS = (0.5, 0.5)
OPTIMALITY_TOL = 1e-10
PRIORS_TOL = 1e-12

CONDITION_CSV_HEADER = ['order', 'modes', 'value_re', 'value_im', 'modulus', 'bound',
                        'phase_ok', 'modulus_ok', 'vanishing']


def _check_pair(circuit, plus, minus):
    if plus.n_modes != minus.n_modes or circuit.dim != plus.n_modes:
        raise DimensionMismatchError(
            f"circuit has {circuit.dim} modes, states have {plus.n_modes} and {minus.n_modes}")


def _lowered_overlap(plus_h, minus_h, modes):
    return inner_product(apply_lowering(plus_h, modes), apply_lowering(minus_h, modes))


def normal_ordered_moment(circuit, plus, minus, modes):
    """<chi+| c^dag_J c_J |chi->; exactly 0 when |J| exceeds the photon number."""
    _check_pair(circuit, plus, minus)
    modes = tuple(modes)
    if any(not 0 <= j < circuit.dim for j in modes):
        raise DimensionMismatchError(f"modes {modes} out of range for {circuit.dim} modes")
    if len(modes) > max(max_photon_number(plus), max_photon_number(minus)):
        return 0j
    return _lowered_overlap(transform(circuit, plus), transform(circuit, minus), modes)


def heisenberg_moment(circuit, plus, minus, modes):
    """Same moment with c_j = sum_i U_ji a_i expanded on the input states."""
    _check_pair(circuit, plus, minus)
    return inner_product(lower_output_modes(circuit, plus, modes),
                         lower_output_modes(circuit, minus, modes))


@dataclass(frozen=True)
class PatternClassification:
    conclusive_plus: frozenset
    conclusive_minus: frozenset
    ambiguous: frozenset
    amplitudes_plus: Mapping
    amplitudes_minus: Mapping

    def __post_init__(self):
        object.__setattr__(self, 'amplitudes_plus', MappingProxyType(dict(self.amplitudes_plus)))
        object.__setattr__(self, 'amplitudes_minus', MappingProxyType(dict(self.amplitudes_minus)))

    def to_dict(self):
        def amps(patterns, table):
            return [{'pattern': list(p), 're': table.get(p, 0j).real, 'im': table.get(p, 0j).imag}
                    for p in sorted(patterns)]
        return {
            'conclusive_plus': amps(self.conclusive_plus, self.amplitudes_plus),
            'conclusive_minus': amps(self.conclusive_minus, self.amplitudes_minus),
            'ambiguous': [
                {'pattern': list(p),
                 'plus': [self.amplitudes_plus[p].real, self.amplitudes_plus[p].imag],
                 'minus': [self.amplitudes_minus[p].real, self.amplitudes_minus[p].imag]}
                for p in sorted(self.ambiguous)
            ],
        }


def classify_patterns(plus_h, minus_h, tol=DEFAULT_TOLERANCE):
    """Split the joint support into conclusive-for-plus (k), conclusive-for-minus (l)
    and ambiguous (m) patterns.

    A pattern is ambiguous when both amplitudes exceed tol.abs_tol. Otherwise it
    goes to the side with the larger amplitude, ties to plus.
    """
    if plus_h.n_modes != minus_h.n_modes:
        raise DimensionMismatchError(f"mode counts differ: {plus_h.n_modes} vs {minus_h.n_modes}")
    k, l, m = set(), set(), set()
    for p in set(plus_h.terms) | set(minus_h.terms):
        a = abs(plus_h.terms.get(p, 0j))
        b = abs(minus_h.terms.get(p, 0j))
        if a > tol.abs_tol and b > tol.abs_tol:
            m.add(p)
        elif a >= b:
            k.add(p)
        else:
            l.add(p)
    return PatternClassification(frozenset(k), frozenset(l), frozenset(m),
                                 plus_h.terms, minus_h.terms)


def exactly_discriminates(plus_h, minus_h, tol=DEFAULT_TOLERANCE):
    return not classify_patterns(plus_h, minus_h, tol).ambiguous


@dataclass(frozen=True)
class PatternContribution:
    pattern: tuple
    p_plus: float
    p_minus: float
    weighted: float


@dataclass(frozen=True)
class UsdReport:
    priors: tuple
    overlap: complex
    prob_fail_circuit: float
    prob_success_circuit: float
    # None unless the priors are equal
    prob_fail_optimal: Optional[float]
    optimal: Optional[bool]
    contributions: tuple = field(default=())

    def to_dict(self):
        return {
            'priors': list(self.priors),
            'overlap': [self.overlap.real, self.overlap.imag],
            'prob_fail_circuit': self.prob_fail_circuit,
            'prob_success_circuit': self.prob_success_circuit,
            'prob_fail_optimal': self.prob_fail_optimal,
            'optimal': self.optimal,
            'contributions': [
                {'pattern': list(c.pattern), 'p_plus': c.p_plus, 'p_minus': c.p_minus,
                 'weighted': c.weighted}
                for c in self.contributions
            ],
        }


def _validate_priors(priors):
    p_plus, p_minus = (float(p) for p in priors)
    if p_plus < 0 or p_minus < 0 or abs(p_plus + p_minus - 1.0) > PRIORS_TOL:
        raise ParameterError(f"priors must be non-negative and sum to 1, got {priors}")
    return p_plus, p_minus


def failure_from_classification(classification, priors=EQUAL_PRIORS):
    p_plus, p_minus = priors
    contributions = []
    for p in sorted(classification.ambiguous):
        a = abs(classification.amplitudes_plus[p]) ** 2
        b = abs(classification.amplitudes_minus[p]) ** 2
        contributions.append(PatternContribution(tuple(p), a, b, p_plus * a + p_minus * b))
    return math.fsum(c.weighted for c in contributions), tuple(contributions)


def usd_report(circuit, plus, minus, priors=EQUAL_PRIORS, tol=DEFAULT_TOLERANCE,
               optimality_tol=OPTIMALITY_TOL):
    """Failure probability of detecting every output mode after `circuit`."""
    _check_pair(circuit, plus, minus)
    priors = _validate_priors(priors)
    classification = classify_patterns(transform(circuit, plus), transform(circuit, minus), tol)
    prob_fail, contributions = failure_from_classification(classification, priors)
    overlap = inner_product(plus, minus)
    prob_fail_optimal, optimal = None, None
    if abs(priors[0] - priors[1]) <= PRIORS_TOL:
        prob_fail_optimal = abs(overlap)
        optimal = abs(prob_fail - prob_fail_optimal) <= optimality_tol
    report = UsdReport(priors, overlap, prob_fail, 1.0 - prob_fail, prob_fail_optimal, optimal,
                       contributions)
    logger.info(f"USD report: P_fail={prob_fail:.12g} over {len(contributions)} ambiguous patterns, "
                f"optimum {prob_fail_optimal}, optimal={optimal}")
    return report


@dataclass(frozen=True)
class ConditionEntry:
    order: int
    modes: tuple
    # 'distinct', 'single-mode' or 'mixed' index multiset
    chain: str
    value: complex
    modulus_bound: float
    phase_ok: Optional[bool]
    modulus_ok: bool
    vanishing: bool
    sufficient_alone: bool = False

    @property
    def ok(self):
        return self.modulus_ok and self.phase_ok is not False


@dataclass(frozen=True)
class SumRuleCheck:
    lhs: complex
    rhs: complex
    ok: bool


@dataclass(frozen=True)
class ConditionReport:
    kind: str
    overlap: complex
    reference_phase: Optional[float]
    photon_number: int
    max_order: int
    entries: tuple
    sum_rule: Optional[SumRuleCheck]
    verdict: bool

    def violations(self):
        return [e for e in self.entries if not e.ok]

    def to_dict(self):
        return {
            'kind': self.kind,
            'overlap': [self.overlap.real, self.overlap.imag],
            'reference_phase': self.reference_phase,
            'photon_number': self.photon_number,
            'max_order': self.max_order,
            'verdict': self.verdict,
            'sum_rule': None if self.sum_rule is None else {
                'lhs': [self.sum_rule.lhs.real, self.sum_rule.lhs.imag],
                'rhs': [self.sum_rule.rhs.real, self.sum_rule.rhs.imag],
                'ok': self.sum_rule.ok,
            },
            'entries': [
                {'order': e.order, 'modes': list(e.modes), 'chain': e.chain,
                 'value': [e.value.real, e.value.imag], 'bound': e.modulus_bound,
                 'phase_ok': e.phase_ok, 'modulus_ok': e.modulus_ok, 'vanishing': e.vanishing,
                 'sufficient_alone': e.sufficient_alone}
                for e in self.entries
            ],
        }


def _chain_label(modes):
    distinct = len(set(modes))
    if distinct == len(modes):
        return 'distinct'
    if distinct == 1:
        return 'single-mode'
    return 'mixed'


def phase_distance(a, b):
    return abs(cmath.phase(a / b)) if b != 0 and a != 0 else math.pi


def _zero_entry(order, modes, value, tol, sufficient_alone=False):
    vanishing = abs(value) <= tol.abs_tol
    return ConditionEntry(order, tuple(modes), _chain_label(modes), value, 0.0, None,
                          vanishing, vanishing, sufficient_alone)


def _usd_entry(order, modes, value, n_photons, overlap, tol):
    vanishing = abs(value) <= tol.abs_tol
    bound = math.perm(n_photons, order) * abs(overlap)
    phase_ok = None if vanishing else phase_distance(value, overlap) <= tol.phase_tol
    return ConditionEntry(order, tuple(modes), _chain_label(modes), value, bound, phase_ok,
                          abs(value) <= bound + tol.abs_tol, vanishing)


def _photon_number(plus, minus):
    """Fixed N shared by both states, else the largest photon number present."""
    n_plus, n_minus = fixed_photon_number(plus), fixed_photon_number(minus)
    if n_plus is not None and n_plus == n_minus:
        return n_plus, True
    return max(max_photon_number(plus), max_photon_number(minus)), False


def _moment_table(plus_h, minus_h, multisets, n_photons):
    return [(modes, _lowered_overlap(plus_h, minus_h, modes) if len(modes) <= n_photons else 0j)
            for modes in multisets]


def _check_order(max_order):
    if int(max_order) != max_order or max_order < 1:
        raise ParameterError(f"max_order must be a positive integer, got {max_order}")


def _multisets(dim, max_order):
    return [m for r in range(1, max_order + 1) for m in combinations_with_replacement(range(dim), r)]


def orthogonal_hierarchy(circuit, plus, minus, max_order, tol=DEFAULT_TOLERANCE):
    """All moments up to max_order must vanish for exact discrimination."""
    _check_pair(circuit, plus, minus)
    _check_order(max_order)
    overlap = inner_product(plus, minus)
    if abs(overlap) > tol.abs_tol:
        raise NonorthogonalInputError(f"inputs are not orthogonal: |<+|->| = {abs(overlap):.3g}")
    n_photons, fixed = _photon_number(plus, minus)
    if fixed:
        max_order = min(max_order, n_photons)
    plus_h, minus_h = transform(circuit, plus), transform(circuit, minus)
    entries = tuple(
        _zero_entry(len(modes), modes, value, tol, sufficient_alone=fixed and len(modes) == n_photons)
        for modes, value in _moment_table(plus_h, minus_h, _multisets(circuit.dim, max_order), n_photons)
    )
    report = ConditionReport('orthogonal', overlap, None, n_photons, max_order, entries, None,
                             all(e.ok for e in entries))
    logger.info(f"Orthogonal hierarchy up to order {max_order}: {len(entries)} moments, "
                f"verdict {'pass' if report.verdict else 'fail'}")
    return report


def usd_hierarchy(circuit, plus, minus, max_order, tol=DEFAULT_TOLERANCE):
    """Phase and modulus conditions on every moment of a nonorthogonal pair.

    A non-vanishing moment of order r must carry the phase of <chi+|chi-> and
    be bounded by N(N-1)...(N-r+1)|<chi+|chi->|. Fixed-N inputs also get the
    sum rule sum_j <c^dag_j c_j> = N <chi+|chi->.
    """
    _check_pair(circuit, plus, minus)
    _check_order(max_order)
    overlap = inner_product(plus, minus)
    if abs(overlap) <= tol.abs_tol:
        raise OrthogonalInputError("inputs are orthogonal; use orthogonal_hierarchy")
    n_photons, fixed = _photon_number(plus, minus)
    plus_h, minus_h = transform(circuit, plus), transform(circuit, minus)
    table = _moment_table(plus_h, minus_h, _multisets(circuit.dim, max_order), n_photons)
    entries = tuple(_usd_entry(len(modes), modes, value, n_photons, overlap, tol)
                    for modes, value in table)

    sum_rule = None
    if fixed:
        lhs = complex(sum(value for modes, value in table if len(modes) == 1))
        rhs = n_photons * overlap
        sum_rule = SumRuleCheck(lhs, rhs, abs(lhs - rhs) <= tol.abs_tol)

    verdict = all(e.ok for e in entries) and (sum_rule is None or sum_rule.ok)
    report = ConditionReport('usd', overlap, cmath.phase(overlap), n_photons, max_order, entries,
                             sum_rule, verdict)
    failed = report.violations()
    logger.info(f"USD hierarchy up to order {max_order}: {len(entries)} moments, "
                f"{len(failed)} violated, verdict {'pass' if verdict else 'fail'}")
    return report


def conditional_mode_check(circuit, plus, minus, mode, max_order, tol=DEFAULT_TOLERANCE):
    """Repeated-index moments (c^dag_j)^n c_j^n, n = 1..max_order, for one mode j."""
    _check_pair(circuit, plus, minus)
    _check_order(max_order)
    if not 0 <= mode < circuit.dim:
        raise DimensionMismatchError(f"mode {mode} out of range for {circuit.dim} modes")
    overlap = inner_product(plus, minus)
    orthogonal = abs(overlap) <= tol.abs_tol
    n_photons, _fixed = _photon_number(plus, minus)
    plus_h, minus_h = transform(circuit, plus), transform(circuit, minus)
    multisets = [(mode,) * n for n in range(1, max_order + 1)]
    table = _moment_table(plus_h, minus_h, multisets, n_photons)
    if orthogonal:
        entries = tuple(_zero_entry(len(modes), modes, value, tol) for modes, value in table)
        reference = None
    else:
        entries = tuple(_usd_entry(len(modes), modes, value, n_photons, overlap, tol)
                        for modes, value in table)
        reference = cmath.phase(overlap)
    report = ConditionReport('conditional', overlap, reference, n_photons, max_order, entries, None,
                             all(e.ok for e in entries))
    logger.info(f"Conditional check on mode {mode} up to order {max_order}: "
                f"verdict {'pass' if report.verdict else 'fail'}")
    return report


def condition_rows(report):
    def flag(value):
        if value is None:
            return 'n/a'
        return 'true' if value else 'false'
    return [
        [e.order, ' '.join(str(j) for j in e.modes), repr(e.value.real), repr(e.value.imag),
         repr(abs(e.value)), repr(e.modulus_bound), flag(e.phase_ok), flag(e.modulus_ok),
         flag(e.vanishing)]
        for e in report.entries
    ]


@dataclass(frozen=True)
class OptimalFormReport:
    amplitude_match: bool
    common_phase: bool
    phase: Optional[float]
    ambiguous: tuple

    @property
    def ok(self):
        return self.amplitude_match and self.common_phase


def optimal_form_check(plus_h, minus_h, tol=DEFAULT_TOLERANCE):
    """On the ambiguous patterns an optimal circuit has |alpha_m| = |beta_m| and
    one common phase for beta_m / alpha_m."""
    classification = classify_patterns(plus_h, minus_h, tol)
    ambiguous = tuple(sorted(classification.ambiguous))
    if not ambiguous:
        return OptimalFormReport(True, True, None, ())
    ratios = [minus_h.terms[p] / plus_h.terms[p] for p in ambiguous]
    amplitude_match = all(abs(abs(plus_h.terms[p]) - abs(minus_h.terms[p])) <= tol.abs_tol
                          for p in ambiguous)
    common_phase = all(phase_distance(r, ratios[0]) <= tol.phase_tol for r in ratios[1:])
    phase = cmath.phase(ratios[0]) if common_phase else None
    return OptimalFormReport(amplitude_match, common_phase, phase, ambiguous)


@dataclass(frozen=True)
class HighestOrderEntry:
    pattern: tuple
    moment: complex
    product: complex
    factor: int
    consistent: bool


@dataclass(frozen=True)
class HighestOrderTable:
    photon_number: int
    entries: tuple
    all_products_zero: bool

    @property
    def consistent(self):
        return all(e.consistent for e in self.entries)


def highest_order_products(circuit, plus, minus, tol=DEFAULT_TOLERANCE):
    """Order-N moments against conj(alpha_p) beta_p of the matching output pattern.

    For fixed N, lowering N photons leaves only the vacuum, so the moment for the
    multiset of pattern p is prod_j n_j! * conj(alpha_p) beta_p.
    """
    _check_pair(circuit, plus, minus)
    n_plus, n_minus = fixed_photon_number(plus), fixed_photon_number(minus)
    if n_plus is None or n_plus != n_minus:
        raise InvalidStateError("highest-order products need both states at the same fixed photon number")
    plus_h, minus_h = transform(circuit, plus), transform(circuit, minus)
    entries = []
    for modes in combinations_with_replacement(range(circuit.dim), n_plus):
        pattern = tuple(modes.count(j) for j in range(circuit.dim))
        moment = _lowered_overlap(plus_h, minus_h, modes)
        product = plus_h.amplitude(pattern).conjugate() * minus_h.amplitude(pattern)
        factor = math.prod(math.factorial(n) for n in pattern)
        entries.append(HighestOrderEntry(pattern, moment, product, factor,
                                         abs(moment - factor * product) <= tol.abs_tol))
    entries.sort(key=lambda e: e.pattern)
    return HighestOrderTable(n_plus, tuple(entries),
                             all(abs(e.product) <= tol.abs_tol for e in entries))
