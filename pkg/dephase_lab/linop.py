"""
Passive linear-optics circuits: validation, exact Fock-space action and
triangular Givens meshes.

Mode convention: U^dag a_j U = sum_i U_ji a_i, hence a creation operator
is substituted as a^dag_j -> sum_i U_ij a^dag_i. Row j of the matrix is an
output mode, column i an input mode.
"""

import itertools
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from functools import singledispatch

import numpy as np
import scipy.linalg

from dephase_lab.errors import DimensionMismatchError, InputFormatError, UnitarityError
from dephase_lab.fock import PRUNE_THRESHOLD, PureState, apply_lowering, sqrt_factorial
from dephase_lab.utils.io_formats import complex_from_pair, complex_to_pair, require

logger = logging.getLogger(__name__)

UNITARITY_TOL = 1e-10
TWO_PI = 2.0 * math.pi
NULL_TOL = 1e-15


@dataclass(frozen=True, eq=False)
class LinearCircuit:
    """A validated N x N unitary. Build through validate_unitary."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, 'matrix', m)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def __eq__(self, other):
        return isinstance(other, LinearCircuit) and np.array_equal(self.matrix, other.matrix)

    __hash__ = None


def validate_unitary(matrix, tol=UNITARITY_TOL):
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise DimensionMismatchError(f"expected a non-empty square matrix, got shape {m.shape}")
    n = m.shape[0]
    deviation = float(np.max(np.abs(m.conj().T @ m - np.eye(n))))
    # NaN entries give a NaN deviation, which must fail too
    if not deviation <= tol:
        raise UnitarityError(f"matrix is not unitary: max |U^dag U - 1| = {deviation:.3g}", deviation)
    return LinearCircuit(m)


def _column_entries(matrix):
    n = matrix.shape[0]
    return [[(i, matrix[i, j]) for i in range(n) if matrix[i, j] != 0] for j in range(n)]


class _CreationPowers:
    """Monomial expansions of (sum_i U_ij x_i)^k, built on demand and shared
    by every input pattern of one transform."""

    def __init__(self, matrix):
        self.n = matrix.shape[0]
        self.columns = _column_entries(matrix)
        self.table = {}

    def get(self, j, k):
        cached = self.table.get((j, k))
        if cached is not None:
            return cached
        start = max((p for (jj, p) in self.table if jj == j and p < k), default=0)
        poly = self.table.get((j, start), {(0,) * self.n: 1.0 + 0j})
        for power in range(start + 1, k + 1):
            nxt = defaultdict(complex)
            for e, c in poly.items():
                for i, u in self.columns[j]:
                    nxt[e[:i] + (e[i] + 1,) + e[i + 1:]] += c * u
            poly = nxt
            self.table[(j, power)] = poly
        return poly


def _multiply(p, q):
    out = defaultdict(complex)
    for e1, c1 in p.items():
        for e2, c2 in q.items():
            out[tuple(a + b for a, b in zip(e1, e2))] += c1 * c2
    return out


def transform(circuit, state, prune=PRUNE_THRESHOLD):
    """|state> -> U|state>.

    |n> = prod_j (a^dag_j)^{n_j} / sqrt(n_j!) |0> and each a^dag_j becomes
    sum_i U_ij a^dag_i; the product is expanded as a polynomial in the output
    creation operators and monomials are read back as sqrt(m!) |m>.
    """
    if circuit.dim != state.n_modes:
        raise DimensionMismatchError(f"circuit has {circuit.dim} modes, state has {state.n_modes}")
    powers = _CreationPowers(circuit.matrix)
    vacuum = (0,) * state.n_modes
    out = defaultdict(complex)
    for pattern, amp in state.terms.items():
        poly = {vacuum: amp / math.prod(sqrt_factorial(n) for n in pattern)}
        for j, count in enumerate(pattern):
            if count:
                poly = _multiply(poly, powers.get(j, count))
        for e, c in poly.items():
            out[e] += c
    terms = {}
    for e, c in out.items():
        amp = c * math.prod(sqrt_factorial(m) for m in e)
        if abs(amp) >= prune:
            terms[e] = amp
    return PureState(state.n_modes, terms, state.truncation_deficit)


def lower_output_modes(circuit, state, modes):
    """prod_j c_j |state> with c_j = sum_i U_ji a_i, applied to the untransformed state."""
    if circuit.dim != state.n_modes:
        raise DimensionMismatchError(f"circuit has {circuit.dim} modes, state has {state.n_modes}")
    current = state
    for j in modes:
        acc = defaultdict(complex)
        for i in range(circuit.dim):
            u = circuit.matrix[j, i]
            if u == 0:
                continue
            for p, a in apply_lowering(current, [i]).terms.items():
                acc[p] += u * a
        current = PureState(state.n_modes, acc, state.truncation_deficit)
    return current


@singledispatch
def embed_with_vacuum(obj, extra_modes):
    raise TypeError(f"cannot embed {type(obj).__name__}")


@embed_with_vacuum.register
def _embed_state(state: PureState, extra_modes):
    if extra_modes < 0:
        raise DimensionMismatchError(f"extra_modes must be >= 0, got {extra_modes}")
    pad = (0,) * extra_modes
    return PureState(state.n_modes + extra_modes, {p + pad: a for p, a in state.terms.items()},
                     state.truncation_deficit)


@embed_with_vacuum.register
def _embed_circuit(circuit: LinearCircuit, extra_modes):
    if extra_modes < 0:
        raise DimensionMismatchError(f"extra_modes must be >= 0, got {extra_modes}")
    if extra_modes == 0:
        return circuit
    return LinearCircuit(scipy.linalg.block_diag(circuit.matrix, np.eye(extra_modes)))


def haar_random(dim, seed):
    """Haar-distributed unitary from the QR decomposition of a complex Gaussian matrix."""
    if dim < 1:
        raise DimensionMismatchError(f"dim must be >= 1, got {dim}")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    return validate_unitary(q)


# Givens meshes
#
# U = D . T_K ... T_1, where T_k = T(theta_k, phi_k) mixes modes (m, m+1):
#     [[e^{i phi} cos theta, -sin theta],
#      [e^{i phi} sin theta,  cos theta]]
# and D = diag(e^{i delta_j}). The mesh positions follow the elimination
# order of decompose_to_givens: bottom row first, left to right.

def mesh_positions(dim):
    return [m for r in range(dim - 1, 0, -1) for m in range(r)]


def rotation_count(dim):
    return dim * (dim - 1) // 2


def wrap_phase(value):
    phase = float(np.mod(value, TWO_PI))
    return 0.0 if phase >= TWO_PI else phase


@dataclass(frozen=True)
class GivensParameterization:
    dim: int
    angles: tuple
    phases: tuple

    def __post_init__(self):
        object.__setattr__(self, 'angles', tuple(float(x) for x in self.angles))
        object.__setattr__(self, 'phases', tuple(float(x) for x in self.phases))
        k = rotation_count(self.dim)
        if self.dim < 1:
            raise DimensionMismatchError(f"dim must be >= 1, got {self.dim}")
        if len(self.angles) != k:
            raise DimensionMismatchError(f"{self.dim} modes need {k} angles, got {len(self.angles)}")
        if len(self.phases) != k + self.dim:
            raise DimensionMismatchError(
                f"{self.dim} modes need {k + self.dim} phases, got {len(self.phases)}")
        if any(not -1e-12 <= t <= math.pi / 2 + 1e-12 for t in self.angles):
            raise InputFormatError(f"angles must lie in [0, pi/2]: {self.angles}")
        if any(not -1e-12 <= p < TWO_PI for p in self.phases):
            raise InputFormatError(f"phases must lie in [0, 2pi): {self.phases}")

    @property
    def rotation_phases(self):
        return self.phases[:rotation_count(self.dim)]

    @property
    def output_phases(self):
        return self.phases[rotation_count(self.dim):]


def mesh_unitary(dim, angles, phases):
    """Mesh product for arbitrary real parameters; the optimizer's parameter map."""
    k = rotation_count(dim)
    m_out = np.eye(dim, dtype=complex)
    for m, theta, phi in zip(mesh_positions(dim), angles, phases[:k]):
        c, s = math.cos(theta), math.sin(theta)
        e = complex(math.cos(phi), math.sin(phi))
        top = m_out[m].copy()
        bottom = m_out[m + 1].copy()
        m_out[m] = e * c * top - s * bottom
        m_out[m + 1] = e * s * top + c * bottom
    return np.exp(1j * np.asarray(phases[k:k + dim], dtype=float))[:, None] * m_out


def compose_from_givens(params):
    return LinearCircuit(mesh_unitary(params.dim, params.angles, params.phases))


def decompose_to_givens(circuit):
    """Null the strictly lower triangle with column rotations, then read off D."""
    w = np.array(circuit.matrix, dtype=complex)
    angles, rotation_phases = [], []
    for r in range(circuit.dim - 1, 0, -1):
        for m in range(r):
            a, b = w[r, m], w[r, m + 1]
            if abs(a) <= NULL_TOL:
                theta, phi = 0.0, 0.0
            else:
                theta = math.atan2(abs(a), abs(b))
                phi = wrap_phase(np.angle(a) - np.angle(b)) if abs(b) > NULL_TOL else 0.0
            c, s = math.cos(theta), math.sin(theta)
            e = complex(math.cos(phi), -math.sin(phi))
            col_m = w[:, m].copy()
            col_n = w[:, m + 1].copy()
            w[:, m] = col_m * e * c - col_n * s
            w[:, m + 1] = col_m * e * s + col_n * c
            angles.append(theta)
            rotation_phases.append(phi)
    output_phases = [wrap_phase(np.angle(w[j, j])) for j in range(circuit.dim)]
    return GivensParameterization(circuit.dim, angles, rotation_phases + output_phases)


def permanent(matrix):
    """Ryser's inclusion-exclusion formula."""
    a = np.asarray(matrix, dtype=complex)
    n = a.shape[0]
    if n == 0:
        return 1 + 0j
    total = 0j
    for size in range(1, n + 1):
        sign = (-1) ** size
        for cols in itertools.combinations(range(n), size):
            total += sign * np.prod(a[:, list(cols)].sum(axis=1))
    return complex((-1) ** n * total)


def transition_amplitude(circuit, in_pattern, out_pattern):
    """<out|U|in> as a permanent of the repeated-row/column submatrix."""
    if len(in_pattern) != circuit.dim or len(out_pattern) != circuit.dim:
        raise DimensionMismatchError("pattern lengths must equal the circuit dimension")
    if sum(in_pattern) != sum(out_pattern):
        return 0j
    cols = [i for i, n in enumerate(in_pattern) for _ in range(n)]
    rows = [j for j, n in enumerate(out_pattern) for _ in range(n)]
    sub = circuit.matrix[np.ix_(rows, cols)]
    norm = math.prod(sqrt_factorial(n) for n in in_pattern) * math.prod(sqrt_factorial(n) for n in out_pattern)
    return permanent(sub) / norm


def circuit_to_dict(circuit):
    return {'dim': circuit.dim,
            'rows': [[complex_to_pair(x) for x in row] for row in circuit.matrix]}


def circuit_from_dict(doc, where='circuit'):
    dim = int(require(doc, 'dim', where))
    rows = require(doc, 'rows', where)
    if not isinstance(rows, list) or len(rows) != dim or any(
            not isinstance(row, list) or len(row) != dim for row in rows):
        raise InputFormatError(f"{where}: 'rows' must be a {dim} x {dim} array of [re, im] pairs")
    matrix = [[complex_from_pair(x, f"{where} row {j}") for x in row] for j, row in enumerate(rows)]
    return validate_unitary(matrix)


def givens_to_dict(params):
    return {'dim': params.dim, 'angles': list(params.angles), 'phases': list(params.phases)}


def givens_from_dict(doc, where='mesh'):
    return GivensParameterization(int(require(doc, 'dim', where)),
                                  require(doc, 'angles', where), require(doc, 'phases', where))
