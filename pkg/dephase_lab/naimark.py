"""
One-photon POVMs compiled to linear optics.

A rank-1 POVM E_mu = |u_mu><u_mu| on an n-level system encoded in n rails
becomes projective on N >= n rails once each u_mu is extended by a vector
N_mu so that the rows w_mu = u_mu + N_mu are orthonormal. A circuit mapping
w_mu onto rail mu then realises the POVM by one-photon counting.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from dephase_lab.errors import (
    DimensionMismatchError,
    InputFormatError,
    InvalidStateError,
    ParameterError,
    PovmCompletenessError,
    PovmError,
)
from dephase_lab.fock import DEFAULT_TOLERANCE, PureState
from dephase_lab.linop import LinearCircuit, transform, validate_unitary
from dephase_lab.utils.io_formats import complex_from_pair, complex_to_pair, require

logger = logging.getLogger(__name__)

COMPLETENESS_TOL = 1e-10
RANK_TOL = 1e-8


def _frozen(vector):
    v = np.array(vector, dtype=complex).ravel()
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class PovmSet:
    signal_dim: int
    elements: tuple
    deviation: float = 0.0

    @property
    def total_dim(self):
        return len(self.elements)

    def matrix(self):
        """N x n array whose row mu is u_mu."""
        return np.array(self.elements)

    def operators(self):
        return [np.outer(u, u.conj()) for u in self.elements]


def validate_povm(elements, signal_dim, tol=COMPLETENESS_TOL):
    vectors = tuple(_frozen(v) for v in elements)
    if not vectors:
        raise PovmError("a POVM needs at least one element")
    for mu, v in enumerate(vectors):
        if v.shape[0] != signal_dim:
            raise PovmError(f"element {mu} has length {v.shape[0]}, expected {signal_dim}")
    a = np.array(vectors)
    deviation = float(np.max(np.abs(a.conj().T @ a - np.eye(signal_dim))))
    if not deviation <= tol:
        raise PovmCompletenessError(
            f"elements do not sum to the identity: max deviation {deviation:.3g}", deviation)
    return PovmSet(signal_dim, vectors, deviation)


@dataclass(frozen=True, eq=False)
class NaimarkDilation:
    povm: PovmSet
    extensions: tuple
    # rows are w_mu = u_mu (+) N_mu
    unitary: np.ndarray

    @property
    def rows(self):
        return [self.unitary[mu] for mu in range(self.unitary.shape[0])]

    @property
    def circuit(self):
        """Detection circuit; maps rail vector w_mu onto rail mu in the fixed mode convention."""
        return LinearCircuit(self.unitary.conj())


def _dilation(povm, extensions):
    ext = tuple(_frozen(v) for v in extensions)
    rows = [np.concatenate([u, n]) for u, n in zip(povm.elements, ext)]
    unitary = validate_unitary(np.array(rows)).matrix
    return NaimarkDilation(povm, ext, unitary)


def naimark_unitary(povm):
    """Complete the n orthonormal columns of [u_mu] to an orthonormal N-frame.

    Canonical basis vectors e_0, e_1, ... are orthogonalized against the
    frame in index order and kept when their residual is not negligible.
    """
    a = povm.matrix()
    big_n, n = a.shape
    if big_n < n:
        raise DimensionMismatchError(f"{big_n} elements cannot resolve a {n}-dimensional signal")
    frame = [a[:, i] for i in range(n)]
    for k in range(big_n):
        if len(frame) == big_n:
            break
        v = np.zeros(big_n, dtype=complex)
        v[k] = 1.0
        # two Gram-Schmidt sweeps
        for _ in range(2):
            for b in frame:
                v = v - (b.conj() @ v) * b
        norm = np.linalg.norm(v)
        if norm > RANK_TOL:
            frame.append(v / norm)
    if len(frame) < big_n:
        raise PovmError(f"completion found only {len(frame)} of {big_n} orthonormal columns")
    w = np.column_stack(frame)
    extensions = [w[mu, n:] for mu in range(big_n)]
    dilation = _dilation(povm, extensions)
    logger.info(f"Naimark dilation: {n}-level signal on {big_n} rails")
    return dilation


@dataclass(frozen=True, eq=False)
class UsdPovm:
    alpha: float
    beta: float
    povm: PovmSet
    extensions: tuple
    prob_success: float
    prob_fail: float

    def dilation(self):
        return _dilation(self.povm, self.extensions)


def usd_signals(alpha, beta):
    """alpha|0> +- beta|1> as 2-level vectors."""
    return np.array([alpha, beta], dtype=complex), np.array([alpha, -beta], dtype=complex)


def usd_povm(alpha, beta, tol=COMPLETENESS_TOL):
    """Optimal USD POVM for alpha|0> +- beta|1>, alpha > beta > 0.

    u_{1,2} = (beta/alpha |0> +- |1>)/sqrt2 identify the + and - signal,
    u_3 = sqrt(1 - beta^2/alpha^2)|0> is the inconclusive outcome, and the
    one-rail extensions are N_{1,2} = sqrt((1 - beta^2/alpha^2)/2),
    N_3 = -beta/alpha.
    """
    alpha, beta = float(alpha), float(beta)
    if not alpha > beta > 0:
        raise ParameterError(f"need alpha > beta > 0, got alpha={alpha}, beta={beta}")
    if abs(alpha ** 2 + beta ** 2 - 1.0) > tol:
        raise ParameterError(f"need alpha^2 + beta^2 = 1, got {alpha ** 2 + beta ** 2:.12g}")
    r = beta / alpha
    s = math.sqrt(1.0 - r * r)
    root2 = math.sqrt(2.0)
    elements = [[r / root2, 1 / root2], [r / root2, -1 / root2], [s, 0.0]]
    extensions = [[s / root2], [s / root2], [-r]]
    povm = validate_povm(elements, 2, tol)

    plus, minus = usd_signals(alpha, beta)
    born_plus = born_probabilities(povm, plus)
    born_minus = born_probabilities(povm, minus)
    if born_minus[0] > tol or born_plus[1] > tol:
        raise PovmError("constructed POVM is not unambiguous")
    if abs(born_plus[0] - 2 * beta ** 2) > tol:
        raise PovmError(f"success probability {born_plus[0]:.12g} differs from 2 beta^2")
    return UsdPovm(alpha, beta, povm, tuple(_frozen(v) for v in extensions),
                   prob_success=2 * beta ** 2, prob_fail=alpha ** 2 - beta ** 2)


def born_probabilities(povm, vector):
    """<psi|E_mu|psi> for each element."""
    psi = np.asarray(vector, dtype=complex)
    return tuple(float(np.real(psi.conj() @ op @ psi)) for op in povm.operators())


def rail_state(vector, n_modes=None):
    """One photon spread over rails: sum_i v_i |0..1_i..0>."""
    vector = list(vector)
    n_modes = n_modes or len(vector)
    if n_modes < len(vector):
        raise DimensionMismatchError(f"{len(vector)} amplitudes do not fit in {n_modes} rails")
    terms = {}
    for i, amp in enumerate(vector):
        if amp != 0:
            terms[tuple(1 if k == i else 0 for k in range(n_modes))] = complex(amp)
    return PureState(n_modes, terms)


def simulate_povm(dilation, state, tol=DEFAULT_TOLERANCE):
    """Click probability per rail after the detection circuit."""
    big_n = dilation.unitary.shape[0]
    n = dilation.povm.signal_dim
    if state.n_modes != big_n:
        raise DimensionMismatchError(f"state has {state.n_modes} modes, dilation acts on {big_n}")
    for pattern, amp in state.terms.items():
        if pattern.total != 1:
            raise InvalidStateError(f"multi-photon input: pattern {tuple(pattern)}")
        if pattern.index(1) >= n and abs(amp) > tol.abs_tol:
            raise InvalidStateError(f"signal amplitude on extension rail {pattern.index(1)}")
    out = transform(dilation.circuit, state)
    return tuple(abs(out.amplitude(tuple(1 if k == mu else 0 for k in range(big_n)))) ** 2
                 for mu in range(big_n))


def povm_to_dict(povm):
    return {'signal_dim': povm.signal_dim,
            'elements': [{'vec': [complex_to_pair(x) for x in u]} for u in povm.elements]}


def povm_from_dict(doc, where='povm'):
    signal_dim = int(require(doc, 'signal_dim', where))
    raw = require(doc, 'elements', where)
    if not isinstance(raw, list):
        raise InputFormatError(f"{where}: 'elements' must be a list")
    elements = []
    for mu, item in enumerate(raw):
        if not isinstance(item, dict):
            raise InputFormatError(f"{where}: element {mu} must be a mapping")
        elements.append([complex_from_pair(x, f"{where} element {mu}")
                         for x in require(item, 'vec', f"{where} element {mu}")])
    return validate_povm(elements, signal_dim)
