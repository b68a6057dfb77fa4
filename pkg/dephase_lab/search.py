"""
Circuit search for optimal USD, plus the analytic feasibility test for the
two-photon toy family alpha|20> +- beta|11>.

The failure probability is piecewise constant in the circuit parameters
wherever the ambiguous pattern set does not change, so the search minimizes
P_fail + S with the smooth surrogate S = sum_p sqrt(P+_p P-_p), which equals
sqrt(F_dephased) and is bounded below by |<chi+|chi->|. Restarts are seeded
per index so results do not depend on worker scheduling.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from functools import partial
from typing import Optional

import numpy as np
from deepdiff import DeepDiff
from scipy.optimize import minimize

from dephase_lab.dephase import dephase_total
from dephase_lab.discrimination import (
    classify_patterns,
    failure_from_classification,
    usd_hierarchy,
    usd_report,
)
from dephase_lab.errors import ConfigError, InvalidStateError, OrthogonalInputError, ParameterError
from dephase_lab.fock import DEFAULT_TOLERANCE, ComplexTolerance, inner_product, max_photon_number, tensor
from dephase_lab.linop import (
    LinearCircuit,
    circuit_to_dict,
    decompose_to_givens,
    embed_with_vacuum,
    givens_to_dict,
    mesh_unitary,
    rotation_count,
    transform,
    validate_unitary,
)
from dephase_lab.metrics import bhattacharyya
from dephase_lab.utils.var_helpers import get_var, thread_cap

logger = logging.getLogger(__name__)

XATOL = 1e-10
SEARCH_PHASE_TOL = 1e-6
POLISH_FRACTION = 4
REGENERATION_TOL = 1e-12
TOY_TOL = 1e-12


@dataclass(frozen=True)
class SearchConfig:
    # None keeps the signal's own mode count; larger values add vacuum rails
    n_modes: Optional[int] = None
    max_restarts: int = 64
    seed: int = 0
    max_iterations: int = 2000
    convergence_tol: float = 1e-9
    classification_tol: float = 1e-7
    hierarchy_order: int = 4
    threads: Optional[int] = None

    def __post_init__(self):
        for name in ('max_restarts', 'max_iterations', 'hierarchy_order'):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ('convergence_tol', 'classification_tol'):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be a positive number, got {value}")
        if self.n_modes is not None and self.n_modes < 1:
            raise ConfigError(f"n_modes must be positive, got {self.n_modes}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError(f"threads must be positive, got {self.threads}")

    @classmethod
    def from_mapping(cls, doc, extra_vars=None):
        """Build from a config document; env DEPHASE_LAB_<KEY> and -e key=value override it."""
        unknown = set(doc) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown search config keys: {sorted(unknown)}")
        casts = {'n_modes': int, 'max_restarts': int, 'seed': int, 'max_iterations': int,
                 'convergence_tol': float, 'classification_tol': float, 'hierarchy_order': int,
                 'threads': int}
        values = {}
        for name, cast in casts.items():
            raw = get_var(name, doc, None, extra_vars)
            if raw is None:
                continue
            try:
                values[name] = cast(raw)
            except (TypeError, ValueError):
                raise ConfigError(f"search config '{name}' must be {cast.__name__}, got {raw!r}")
        return cls(**values)

    @property
    def tolerance(self):
        return ComplexTolerance(abs_tol=self.classification_tol, phase_tol=SEARCH_PHASE_TOL)

    def to_dict(self):
        return asdict(self)


class _FailureObjective:
    """P_fail at classification tolerance plus the Bhattacharyya surrogate.

    Parameters are the mesh angles followed by the rotation phases; output
    phases do not change photon-counting statistics and stay at zero.
    """

    def __init__(self, plus, minus, dim, tol):
        self.plus = plus
        self.minus = minus
        self.dim = dim
        self.tol = tol
        self.evaluations = 0

    @property
    def size(self):
        return 2 * rotation_count(self.dim)

    def matrix(self, x):
        k = rotation_count(self.dim)
        phases = np.concatenate([np.asarray(x[k:2 * k], dtype=float), np.zeros(self.dim)])
        return mesh_unitary(self.dim, x[:k], phases)

    def evaluate(self, x):
        circuit = LinearCircuit(self.matrix(x))
        plus_h = transform(circuit, self.plus)
        minus_h = transform(circuit, self.minus)
        prob_fail, _ = failure_from_classification(classify_patterns(plus_h, minus_h, self.tol))
        surrogate = bhattacharyya(dephase_total(plus_h), dephase_total(minus_h))
        return prob_fail, surrogate

    def __call__(self, x):
        self.evaluations += 1
        prob_fail, surrogate = self.evaluate(x)
        return prob_fail + surrogate


@dataclass(frozen=True)
class RestartOutcome:
    index: int
    objective: float
    surrogate: float
    evaluations: int
    converged: bool
    message: str
    parameters: tuple

    def to_dict(self):
        return {'index': self.index, 'objective': self.objective, 'surrogate': self.surrogate,
                'evaluations': self.evaluations, 'converged': self.converged, 'message': self.message}


def _starting_point(seed, index, dim):
    rng = np.random.default_rng([seed, index])
    k = rotation_count(dim)
    return np.concatenate([rng.uniform(0.0, math.pi / 2, k), rng.uniform(0.0, 2 * math.pi, k)])


def _run_restart(plus, minus, dim, config, index):
    objective = _FailureObjective(plus, minus, dim, config.tolerance)
    options = {'maxfev': config.max_iterations, 'xatol': XATOL, 'fatol': config.convergence_tol}
    res = minimize(objective, _starting_point(config.seed, index, dim), method='Nelder-Mead',
                   options=options)
    x, best_f, converged, message = res.x, res.fun, bool(res.success), str(res.message)
    # a second simplex from the converged point escapes premature collapse
    polish_options = dict(options, maxfev=max(1, config.max_iterations // POLISH_FRACTION))
    polished = minimize(objective, x, method='Nelder-Mead', options=polish_options)
    if polished.fun < best_f:
        x, converged, message = polished.x, bool(polished.success), str(polished.message)
    prob_fail, surrogate = objective.evaluate(x)
    logger.debug(f"Restart {index}: P_fail={prob_fail:.12g}, surrogate={surrogate:.12g}, "
                 f"{objective.evaluations} evaluations, converged={converged}")
    return RestartOutcome(index, prob_fail, surrogate, objective.evaluations, converged, message,
                          tuple(float(v) for v in x))


@dataclass(frozen=True, eq=False)
class SearchResult:
    plus: object
    minus: object
    config: SearchConfig
    circuit: LinearCircuit
    objective: float
    surrogate: float
    overlap: float
    optimal: bool
    usd_report: object
    hierarchy: object
    restarts: tuple
    budget_exhausted: bool

    @property
    def n_modes(self):
        return self.circuit.dim

    @property
    def note(self):
        if self.optimal:
            return "optimum found"
        return (f"not found within budget ({len(self.restarts)} restarts on {self.n_modes} modes); "
                f"this is not a proof of impossibility")

    def to_dict(self):
        return {
            'n_modes': self.n_modes,
            'objective': self.objective,
            'surrogate': self.surrogate,
            'overlap': self.overlap,
            'optimal': self.optimal,
            'note': self.note,
            'budget_exhausted': self.budget_exhausted,
            'config': self.config.to_dict(),
            'circuit': circuit_to_dict(self.circuit),
            'mesh': givens_to_dict(decompose_to_givens(self.circuit)),
            'usd_report': self.usd_report.to_dict(),
            'hierarchy': self.hierarchy.to_dict(),
            'restarts': [r.to_dict() for r in self.restarts],
        }


def _evaluate_circuit(circuit, plus, minus, config):
    report = usd_report(circuit, plus, minus, tol=config.tolerance,
                        optimality_tol=config.convergence_tol)
    order = max(1, min(config.hierarchy_order, max(max_photon_number(plus), max_photon_number(minus))))
    hierarchy = usd_hierarchy(circuit, plus, minus, order, tol=config.tolerance)
    return report, hierarchy


def minimize_failure(plus, minus, config=None):
    """Nelder-Mead with seeded restarts over passive circuits on config.n_modes modes."""
    config = config or SearchConfig()
    if not (plus.normalized and minus.normalized):
        raise InvalidStateError("search inputs must be normalized")
    overlap = abs(inner_product(plus, minus))
    if overlap <= DEFAULT_TOLERANCE.abs_tol:
        raise OrthogonalInputError("search needs nonorthogonal inputs")
    dim = config.n_modes or plus.n_modes
    if dim < plus.n_modes:
        raise ConfigError(f"n_modes={dim} is smaller than the signal's {plus.n_modes} modes")
    plus = embed_with_vacuum(plus, dim - plus.n_modes)
    minus = embed_with_vacuum(minus, dim - minus.n_modes)

    workers = min(config.threads or thread_cap(), config.max_restarts)
    logger.info(f"Searching {config.max_restarts} restarts on {dim} modes with {workers} workers "
                f"(seed {config.seed}, overlap {overlap:.12g})")
    if dim == 1:
        outcomes = [RestartOutcome(0, *_FailureObjective(plus, minus, 1, config.tolerance).evaluate([]),
                                   1, True, 'single mode: nothing to optimize', ())]
    elif workers == 1:
        outcomes = [_run_restart(plus, minus, dim, config, i) for i in range(config.max_restarts)]
    else:
        # the objective is pure Python, so restarts run in worker processes
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(partial(_run_restart, plus, minus, dim, config),
                                     range(config.max_restarts)))
    best = min(outcomes, key=lambda r: (r.objective, r.surrogate, r.index))

    objective = _FailureObjective(plus, minus, dim, config.tolerance)
    circuit = validate_unitary(objective.matrix(np.asarray(best.parameters)))
    report, hierarchy = _evaluate_circuit(circuit, plus, minus, config)
    budget_exhausted = not any(r.converged for r in outcomes)
    result = SearchResult(plus, minus, config, circuit, report.prob_fail_circuit, best.surrogate,
                          overlap, bool(report.optimal), report, hierarchy, tuple(outcomes),
                          budget_exhausted)
    if result.optimal:
        logger.info(f"Optimum found: P_fail={result.objective:.12g} (restart {best.index})")
    else:
        logger.warning(f"Best P_fail={result.objective:.12g} above overlap {overlap:.12g}: {result.note}")
    return result


def verify_search_result(result):
    """Regenerate the embedded reports from the stored circuit; empty diff when identical."""
    report, hierarchy = _evaluate_circuit(result.circuit, result.plus, result.minus, result.config)
    stored = {'objective': result.objective, 'usd_report': result.usd_report.to_dict(),
              'hierarchy': result.hierarchy.to_dict()}
    regenerated = {'objective': report.prob_fail_circuit, 'usd_report': report.to_dict(),
                   'hierarchy': hierarchy.to_dict()}
    return DeepDiff(stored, regenerated, math_epsilon=REGENERATION_TOL)


@dataclass(frozen=True, eq=False)
class ToyFeasibility:
    alpha_sq: float
    beta_sq: float
    # 'optimal-witness', 'infeasible' or 'not-excluded'
    verdict: str
    witness: Optional[LinearCircuit]
    obstruction: Optional[str]
    a: tuple
    b: tuple

    @property
    def feasible_fixed_array(self):
        return self.verdict != 'infeasible'

    def to_dict(self):
        return {
            'alpha_sq': self.alpha_sq,
            'beta_sq': self.beta_sq,
            'verdict': self.verdict,
            'feasible_fixed_array': self.feasible_fixed_array,
            'witness': None if self.witness is None else circuit_to_dict(self.witness),
            'obstruction': self.obstruction,
            'a': list(self.a),
            'b': list(self.b),
        }


def beam_splitter_50_50():
    root = 1 / math.sqrt(2)
    return validate_unitary([[root, root], [root, -root]])


def toy_feasibility(alpha, beta):
    """Sign analysis of the first- and second-order conditions for alpha|20> +- beta|11>.

    For an output row nu the first-order moment is nu.a and the repeated
    second-order moment is 2|nu_0|^2 nu.b (with |nu_j|^2 components). Both must
    be non-negative (or zero) on every row. nu.b >= 0 needs
    |nu_0|^2 >= 2 beta^2 / (alpha^2 + 2 beta^2) unless nu_0 = 0, and the two rows
    of a unitary cannot both satisfy it while alpha^2 < 2 beta^2; a row with
    nu_0 = 0 gives nu.a = -beta^2 < 0.
    """
    alpha, beta = float(alpha), float(beta)
    if not (alpha > 0 and beta > 0):
        raise ParameterError(f"need alpha, beta > 0, got {alpha}, {beta}")
    a_sq, b_sq = alpha ** 2, beta ** 2
    if abs(a_sq + b_sq - 1.0) > 1e-10:
        raise ParameterError(f"need alpha^2 + beta^2 = 1, got {a_sq + b_sq:.12g}")
    a = (2 * a_sq - b_sq, -b_sq)
    b = (a_sq, -2 * b_sq)
    if abs(a_sq - 2 * b_sq) <= TOY_TOL:
        verdict, witness, obstruction = 'optimal-witness', beam_splitter_50_50(), None
    elif b_sq - TOY_TOL <= a_sq < 2 * b_sq:
        verdict, witness = 'infeasible', None
        obstruction = (f"beta^2 <= alpha^2 < 2 beta^2: no pair of orthonormal rows keeps both "
                       f"nu.a = ({a[0]:.6g}, {a[1]:.6g}) and nu.b = ({b[0]:.6g}, {b[1]:.6g}) "
                       f"non-negative, so optimal USD is impossible for a fixed array")
    else:
        verdict, witness, obstruction = 'not-excluded', None, None
    logger.info(f"Toy feasibility at alpha^2={a_sq:.6g}: {verdict}")
    return ToyFeasibility(a_sq, b_sq, verdict, witness, obstruction, a, b)


def match_toy_pair(plus, minus, tol=1e-10):
    """(alpha, beta) when the inputs are alpha|20> + beta|11> and alpha|20> - beta|11>."""
    if plus.n_modes != 2 or minus.n_modes != 2:
        return None
    support = {(2, 0), (1, 1)}
    if set(plus.terms) != support or set(minus.terms) != support:
        return None
    alpha = plus.amplitude((2, 0))
    beta = plus.amplitude((1, 1))
    if abs(alpha.imag) > tol or abs(beta.imag) > tol or alpha.real <= 0 or beta.real <= 0:
        return None
    if abs(minus.amplitude((2, 0)) - alpha) > tol or abs(minus.amplitude((1, 1)) + beta) > tol:
        return None
    return alpha.real, beta.real


@dataclass(frozen=True, eq=False)
class AncillaSpec:
    label: str
    state: object
    exploratory: bool = False


@dataclass(frozen=True, eq=False)
class SweepRow:
    label: str
    n_modes: int
    result: SearchResult
    exploratory: bool
    note: str = field(default='')

    def csv_row(self):
        return [self.label, self.n_modes, repr(self.result.objective),
                'true' if self.result.optimal else 'false', repr(self.result.overlap)]


SWEEP_CSV_HEADER = ['ancilla_label', 'n_modes', 'best_objective', 'optimal', 'overlap']


def ancilla_sweep(plus, minus, ancillas, config=None):
    """minimize_failure on signal (x) ancilla for each ancilla, over the enlarged modes."""
    config = config or SearchConfig()
    rows = []
    for spec in ancillas:
        joint_plus = tensor(plus, spec.state)
        joint_minus = tensor(minus, spec.state)
        n_modes = max(config.n_modes or 0, joint_plus.n_modes)
        result = minimize_failure(joint_plus, joint_minus, replace(config, n_modes=n_modes))
        note = (f"search bounded to {n_modes} modes and {config.max_restarts} restarts")
        if spec.exploratory:
            note += "; exploratory ancilla"
        logger.info(f"Ancilla '{spec.label}': best P_fail={result.objective:.12g}, "
                    f"optimal={result.optimal}")
        rows.append(SweepRow(spec.label, n_modes, result, spec.exploratory, note))
    return tuple(rows)
