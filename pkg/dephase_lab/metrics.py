"""
Fidelities of pure, diagonal and block-diagonal states, and the bound chain
F(inputs) <= F(dephased outputs) <= P_fail^2 that a USD circuit must obey.
"""

import logging
import math
from dataclasses import asdict, dataclass

from dephase_lab.dephase import dephase_partial, dephase_total
from dephase_lab.errors import DimensionMismatchError, InvalidStateError
from dephase_lab.fock import inner_product
from dephase_lab.linop import transform

logger = logging.getLogger(__name__)

BOUND_TOL = 1e-10


def _clip(value):
    return min(1.0, max(0.0, value))


def fidelity_pure(a, b):
    if not (a.normalized and b.normalized):
        raise InvalidStateError(
            f"fidelity_pure needs normalized states (norms^2 {a.norm_sq:.12g}, {b.norm_sq:.12g})")
    return _clip(abs(inner_product(a, b)) ** 2)


def bhattacharyya(m1, m2):
    if m1.n_modes != m2.n_modes:
        raise DimensionMismatchError(f"mode counts differ: {m1.n_modes} vs {m2.n_modes}")
    small, large = (m1, m2) if len(m1.weights) <= len(m2.weights) else (m2, m1)
    return math.fsum(math.sqrt(w * large.weights[p])
                     for p, w in small.weights.items() if p in large.weights)


def fidelity_diagonal(m1, m2):
    return _clip(bhattacharyya(m1, m2) ** 2)


def fidelity_block(b1, b2):
    if b1.dephased_modes != b2.dephased_modes or b1.n_modes != b2.n_modes:
        raise DimensionMismatchError(
            f"dephased mode sets differ: {b1.dephased_modes} vs {b2.dephased_modes}")
    total = 0.0
    for key, block in b1.blocks.items():
        other = b2.blocks.get(key)
        if other is None:
            continue
        if block.conditional is None:
            overlap = 1.0
        else:
            overlap = abs(inner_product(block.conditional, other.conditional))
        total += math.sqrt(block.probability * other.probability) * overlap
    return _clip(total ** 2)


@dataclass(frozen=True)
class FidelityBoundsReport:
    f_input: float
    f_dephased: float
    prob_fail: float
    lower_ok: bool
    upper_ok: bool
    slack_lower: float
    slack_upper: float

    def to_dict(self):
        return asdict(self)


def check_fidelity_bounds(plus, minus, circuit, dephased_modes, prob_fail):
    """Check F_input <= F_dephased <= prob_fail^2.

    `dephased_modes=None` means every mode is detected; a subset gives the
    partial-dephasing (block) fidelity. Violations are report content.
    """
    if not 0.0 <= prob_fail <= 1.0 + BOUND_TOL:
        raise InvalidStateError(f"prob_fail must lie in [0, 1], got {prob_fail}")
    f_input = fidelity_pure(plus, minus)
    plus_h = transform(circuit, plus)
    minus_h = transform(circuit, minus)
    if dephased_modes is None:
        f_dephased = fidelity_diagonal(dephase_total(plus_h), dephase_total(minus_h))
    else:
        f_dephased = fidelity_block(dephase_partial(plus_h, dephased_modes),
                                    dephase_partial(minus_h, dephased_modes))
    slack_lower = f_dephased - f_input
    slack_upper = prob_fail ** 2 - f_dephased
    report = FidelityBoundsReport(
        f_input=f_input,
        f_dephased=f_dephased,
        prob_fail=prob_fail,
        lower_ok=slack_lower >= -BOUND_TOL,
        upper_ok=slack_upper >= -BOUND_TOL,
        slack_lower=slack_lower,
        slack_upper=slack_upper,
    )
    logger.debug(f"Fidelity bounds: {f_input:.6g} <= {f_dephased:.6g} <= {prob_fail ** 2:.6g}")
    return report
