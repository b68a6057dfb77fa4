"""
Total and partial dephasing in the Fock basis.

Photon counting after a circuit is equivalent to averaging over random
phase shifts on every detected mode, which strikes out all coherences
between different occupations of those modes. The phase average is done
analytically here: total dephasing keeps |amp|^2 per pattern, partial
dephasing keeps one conditional pure state per occupation of the detected
modes.
"""

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Optional

from dephase_lab.errors import DimensionMismatchError, InvalidStateError
from dephase_lab.fock import PureState

logger = logging.getLogger(__name__)

DROP_THRESHOLD = 1e-14


@dataclass(frozen=True)
class DiagonalMixture:
    n_modes: int
    weights: Mapping

    def __post_init__(self):
        object.__setattr__(self, 'weights', MappingProxyType(dict(self.weights)))

    @property
    def total(self):
        return math.fsum(self.weights.values())

    def probability(self, pattern):
        return self.weights.get(tuple(pattern), 0.0)


@dataclass(frozen=True)
class Block:
    probability: float
    # None when every mode was dephased
    conditional: Optional[PureState]


@dataclass(frozen=True)
class BlockMixture:
    n_modes: int
    dephased_modes: tuple
    blocks: Mapping
    dropped: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, 'blocks', MappingProxyType(dict(self.blocks)))

    @property
    def remaining_modes(self):
        return tuple(j for j in range(self.n_modes) if j not in self.dephased_modes)

    @property
    def total(self):
        return math.fsum(b.probability for b in self.blocks.values())


def dephase_total(state):
    return DiagonalMixture(state.n_modes, {p: abs(a) ** 2 for p, a in state.terms.items()})


def dephase_partial(state, modes):
    """Blocks keyed by the occupations of `modes`, each with its normalized relative state."""
    modes = tuple(sorted(set(modes)))
    if not modes:
        raise InvalidStateError("partial dephasing needs at least one mode")
    if any(not 0 <= j < state.n_modes for j in modes):
        raise DimensionMismatchError(f"modes {modes} out of range for {state.n_modes} modes")
    rest = [j for j in range(state.n_modes) if j not in modes]

    groups = defaultdict(dict)
    for pattern, amp in state.terms.items():
        key = tuple(pattern[j] for j in modes)
        groups[key][tuple(pattern[j] for j in rest)] = amp

    blocks, dropped = {}, []
    for key in sorted(groups):
        terms = groups[key]
        prob = math.fsum(abs(a) ** 2 for a in terms.values())
        if prob < DROP_THRESHOLD:
            dropped.append((key, prob))
            continue
        conditional = None
        if rest:
            scale = 1.0 / math.sqrt(prob)
            conditional = PureState(len(rest), {sub: a * scale for sub, a in terms.items()})
        blocks[key] = Block(prob, conditional)
    if dropped:
        logger.warning(f"Dropped {len(dropped)} blocks below probability {DROP_THRESHOLD:g} "
                       f"while dephasing modes {modes}")
    return BlockMixture(state.n_modes, modes, blocks, tuple(dropped))


def pattern_distribution(mix):
    if not mix.weights:
        raise InvalidStateError("the mixture has no patterns")
    return [(p, mix.weights[p]) for p in sorted(mix.weights)]


def marginal(mix, modes):
    """Total weight per occupation of `modes`."""
    modes = tuple(sorted(set(modes)))
    out = defaultdict(float)
    for pattern, w in mix.weights.items():
        out[tuple(pattern[j] for j in modes)] += w
    return dict(out)


def distribution_rows(mix):
    return [(' '.join(str(n) for n in p), prob) for p, prob in pattern_distribution(mix)]


def block_summary(bm):
    return {
        'dephased_modes': list(bm.dephased_modes),
        'blocks': [
            {
                'occupations': list(key),
                'probability': block.probability,
                'conditional': None if block.conditional is None else [
                    {'pattern': list(p), 're': a.real, 'im': a.imag}
                    for p, a in block.conditional.items()
                ],
            }
            for key, block in sorted(bm.blocks.items())
        ],
        'dropped': [{'occupations': list(k), 'probability': p} for k, p in bm.dropped],
    }
