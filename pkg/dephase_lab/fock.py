"""
Sparse multimode Fock states and the ladder algebra the other modules build on
"""

import cmath
import logging
import math
from dataclasses import dataclass

from scipy.stats import poisson

from dephase_lab.errors import DimensionMismatchError, InputFormatError, InvalidStateError
from dephase_lab.utils.io_formats import complex_from_pair, require

logger = logging.getLogger(__name__)

PRUNE_THRESHOLD = 1e-14
NORM_TOL = 1e-10
EXACT_FACTORIAL_LIMIT = 20


class FockPattern(tuple):
    """Photon numbers per mode, e.g. (2, 0) for |20>.

    A tuple subclass, so patterns hash and compare like plain tuples and sort
    lexicographically.
    """

    __slots__ = ()

    def __new__(cls, occupations):
        occ = tuple(int(n) for n in occupations)
        if not occ:
            raise InvalidStateError("a pattern needs at least one mode")
        if any(n < 0 for n in occ):
            raise InvalidStateError(f"negative occupation in pattern {occ}")
        return super().__new__(cls, occ)

    @property
    def n_modes(self):
        return len(self)

    @property
    def total(self):
        return sum(self)

    def label(self):
        return ' '.join(str(n) for n in self)

    def __repr__(self):
        return '|' + ''.join(str(n) if n < 10 else f'({n})' for n in self) + '>'


def as_pattern(key):
    if type(key) is FockPattern:
        return key
    return tuple.__new__(FockPattern, key)


@dataclass(frozen=True)
class ComplexTolerance:
    abs_tol: float = 1e-10
    phase_tol: float = 1e-8

    def __post_init__(self):
        for name in ('abs_tol', 'phase_tol'):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise InvalidStateError(f"{name} must be finite and non-negative, got {value}")


DEFAULT_TOLERANCE = ComplexTolerance()


def sqrt_factorial(n):
    if n <= EXACT_FACTORIAL_LIMIT:
        return math.sqrt(math.factorial(n))
    return math.exp(0.5 * math.lgamma(n + 1))


class PureState:
    """Sparse superposition sum_p amp_p |p> over Fock patterns of n_modes modes.

    Instances are immutable. States that come out of ladder operators may be
    unnormalized or zero; `build_pure_state` is the validating constructor for
    signal states. `truncation_deficit` is the probability mass left out by a
    Fock cutoff (coherent states), carried as metadata and never renormalized.
    """

    __slots__ = ('n_modes', 'terms', 'norm_sq', 'truncation_deficit')

    def __init__(self, n_modes, terms, truncation_deficit=0.0):
        object.__setattr__(self, 'n_modes', n_modes)
        object.__setattr__(self, 'terms', {as_pattern(p): complex(a) for p, a in terms.items()})
        object.__setattr__(self, 'norm_sq', math.fsum(abs(a) ** 2 for a in self.terms.values()))
        object.__setattr__(self, 'truncation_deficit', float(truncation_deficit))

    def __setattr__(self, name, value):
        raise AttributeError("PureState is immutable")

    def __reduce__(self):
        # slot state cannot be restored through the blocked __setattr__
        return (PureState, (self.n_modes, dict(self.terms), self.truncation_deficit))

    @property
    def normalized(self):
        return abs(self.norm_sq - 1.0) <= NORM_TOL

    @property
    def is_zero(self):
        return not self.terms

    def amplitude(self, pattern):
        return self.terms.get(tuple(pattern), 0j)

    def patterns(self):
        return sorted(self.terms)

    def items(self):
        """Terms in lexicographic pattern order."""
        return [(p, self.terms[p]) for p in sorted(self.terms)]

    def __len__(self):
        return len(self.terms)

    def __repr__(self):
        shown = ' + '.join(f'({a:.4g}){p!r}' for p, a in self.items()[:6])
        more = ' + ...' if len(self.terms) > 6 else ''
        return f'PureState(n_modes={self.n_modes}, {shown or "0"}{more})'


def _pruned(terms, prune):
    return {p: a for p, a in terms.items() if abs(a) >= prune}


def build_pure_state(n_modes, terms, prune=PRUNE_THRESHOLD):
    """Validated signal state from (pattern, amplitude) pairs; duplicates are summed."""
    if int(n_modes) != n_modes or n_modes < 1:
        raise InvalidStateError(f"n_modes must be a positive integer, got {n_modes}")
    n_modes = int(n_modes)
    merged = {}
    for pattern, amplitude in terms:
        p = FockPattern(pattern)
        if len(p) != n_modes:
            raise DimensionMismatchError(f"pattern {tuple(p)} has {len(p)} modes, expected {n_modes}")
        amplitude = complex(amplitude)
        if not cmath.isfinite(amplitude):
            raise InvalidStateError(f"amplitude of {p!r} is not finite: {amplitude}")
        merged[p] = merged.get(p, 0j) + amplitude
    merged = _pruned(merged, prune)
    if not merged:
        raise InvalidStateError("all-zero state")
    state = PureState(n_modes, merged)
    if state.norm_sq > 1.0 + NORM_TOL:
        raise InvalidStateError(f"squared norm {state.norm_sq:.12g} exceeds 1")
    return state


def normalize(state):
    if state.is_zero:
        raise InvalidStateError("cannot normalize the zero state")
    scale = 1.0 / math.sqrt(state.norm_sq)
    return PureState(state.n_modes, {p: a * scale for p, a in state.terms.items()})


def _check_same_modes(a, b):
    if a.n_modes != b.n_modes:
        raise DimensionMismatchError(f"mode counts differ: {a.n_modes} vs {b.n_modes}")


def inner_product(bra, ket):
    """<bra|ket>, conjugate-linear in the first argument."""
    _check_same_modes(bra, ket)
    if len(bra.terms) <= len(ket.terms):
        total = sum(a.conjugate() * ket.terms[p] for p, a in bra.terms.items() if p in ket.terms)
    else:
        total = sum(bra.terms[p].conjugate() * b for p, b in ket.terms.items() if p in bra.terms)
    return complex(total)


def combine_deficits(*deficits):
    kept = 1.0
    for d in deficits:
        kept *= 1.0 - d
    return 1.0 - kept


def tensor(a, b, prune=PRUNE_THRESHOLD):
    terms = {}
    for pa, xa in a.terms.items():
        for pb, xb in b.terms.items():
            amp = xa * xb
            if abs(amp) >= prune:
                terms[pa + pb] = amp
    return PureState(a.n_modes + b.n_modes, terms,
                     combine_deficits(a.truncation_deficit, b.truncation_deficit))


def _coherent_mode(alpha, tail_tol, headroom, prune):
    alpha = complex(alpha)
    mean = abs(alpha) ** 2
    if mean == 0.0:
        return PureState(1, {(0,): 1.0})
    cutoff = 0
    while poisson.sf(cutoff, mean) >= tail_tol:
        cutoff += 1
    cutoff += headroom
    envelope = math.exp(-mean / 2)
    terms = {}
    for n in range(cutoff + 1):
        amp = envelope * alpha ** n / sqrt_factorial(n)
        if abs(amp) >= prune:
            terms[(n,)] = amp
    deficit = float(poisson.sf(cutoff, mean))
    logger.debug(f"Coherent mode alpha={alpha:.4g}: cutoff {cutoff}, neglected mass {deficit:.3g}")
    return PureState(1, terms, deficit)


def coherent_product_state(amplitudes, tail_tol, headroom=0, prune=PRUNE_THRESHOLD):
    """Product of truncated coherent states, one per amplitude.

    Each mode keeps Fock levels up to the smallest cutoff whose Poisson tail is
    below `tail_tol`, plus `headroom` extra levels. Sectors of total photon
    number up to the per-mode cutoff are exact; lowering r times draws on
    r levels above that, so moments of order r need headroom r.
    """
    if not 0.0 < tail_tol < 1.0:
        raise InvalidStateError(f"tail_tol must lie in (0, 1), got {tail_tol}")
    if int(headroom) != headroom or headroom < 0:
        raise InvalidStateError(f"headroom must be a non-negative integer, got {headroom}")
    amplitudes = list(amplitudes)
    if not amplitudes:
        raise InvalidStateError("at least one coherent amplitude is required")
    if not all(cmath.isfinite(complex(alpha)) for alpha in amplitudes):
        raise InvalidStateError(f"coherent amplitudes must be finite, got {amplitudes}")
    state = None
    for alpha in amplitudes:
        mode = _coherent_mode(alpha, tail_tol, int(headroom), prune)
        state = mode if state is None else tensor(state, mode, prune)
    if state.truncation_deficit > 0:
        logger.debug(f"Coherent product state: {len(state)} terms, "
                     f"truncation deficit {state.truncation_deficit:.3g}")
    return state


def apply_lowering(state, modes):
    """(prod_j a_j)|state> over the multiset `modes`; may be unnormalized or zero."""
    terms = state.terms
    for j in modes:
        if not 0 <= j < state.n_modes:
            raise DimensionMismatchError(f"mode {j} out of range for {state.n_modes} modes")
        lowered = {}
        for pattern, amp in terms.items():
            n = pattern[j]
            if n:
                lowered[pattern[:j] + (n - 1,) + pattern[j + 1:]] = amp * math.sqrt(n)
        terms = lowered
    return PureState(state.n_modes, terms, state.truncation_deficit)


def number_expectation(state, mode):
    return math.fsum(abs(a) ** 2 * p[mode] for p, a in state.terms.items())


def photon_numbers(state):
    return {p.total for p in state.terms}


def fixed_photon_number(state):
    """Total photon number N when every term has the same N, otherwise None."""
    totals = photon_numbers(state)
    return totals.pop() if len(totals) == 1 else None


def max_photon_number(state):
    return max(photon_numbers(state), default=0)


def state_to_dict(state):
    return {
        'n_modes': state.n_modes,
        'terms': [{'pattern': list(p), 're': a.real, 'im': a.imag} for p, a in state.items()],
    }


def state_from_dict(doc, where='state'):
    """Parse either the explicit-terms form or the coherent-product form."""
    if 'coherent' in doc:
        spec = doc['coherent']
        if not isinstance(spec, dict):
            raise InputFormatError(f"{where}: 'coherent' must be a mapping")
        alphas = [complex_from_pair(a, f"{where}: alphas") for a in require(spec, 'alphas', where)]
        return coherent_product_state(alphas, float(require(spec, 'tail_tol', where)),
                                      headroom=int(spec.get('headroom', 0)))
    n_modes = require(doc, 'n_modes', where)
    raw_terms = require(doc, 'terms', where)
    if not isinstance(raw_terms, list):
        raise InputFormatError(f"{where}: 'terms' must be a list")
    terms = []
    for i, term in enumerate(raw_terms):
        if not isinstance(term, dict):
            raise InputFormatError(f"{where}: term {i} must be a mapping")
        pattern = require(term, 'pattern', f"{where} term {i}")
        amp = complex(float(term.get('re', 0.0)), float(term.get('im', 0.0)))
        terms.append((pattern, amp))
    return build_pure_state(n_modes, terms)
