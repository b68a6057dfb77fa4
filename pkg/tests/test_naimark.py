import math

import numpy as np
import pytest

from dephase_lab.errors import (
    DimensionMismatchError,
    InputFormatError,
    InvalidStateError,
    ParameterError,
    PovmCompletenessError,
    PovmError,
)
from dephase_lab.fock import build_pure_state
from dephase_lab.linop import compose_from_givens, decompose_to_givens, haar_random
from dephase_lab.naimark import (
    PovmSet,
    born_probabilities,
    naimark_unitary,
    povm_from_dict,
    povm_to_dict,
    rail_state,
    simulate_povm,
    usd_povm,
    usd_signals,
    validate_povm,
)


@pytest.fixture
def usd_08():
    return usd_povm(0.8, 0.6)


def test_usd_povm_probabilities(usd_08):
    assert usd_08.prob_success == pytest.approx(0.72)
    assert usd_08.prob_fail == pytest.approx(0.28)
    plus, minus = usd_signals(0.8, 0.6)
    np.testing.assert_allclose(born_probabilities(usd_08.povm, plus), (0.72, 0.0, 0.28), atol=1e-12)
    np.testing.assert_allclose(born_probabilities(usd_08.povm, minus), (0.0, 0.72, 0.28), atol=1e-12)


def test_canonical_completion_matches_explicit_extension(usd_08):
    canonical = naimark_unitary(usd_08.povm)
    explicit = usd_08.dilation()
    np.testing.assert_allclose(canonical.unitary, explicit.unitary, atol=1e-12)
    r = 0.6 / 0.8
    np.testing.assert_allclose([e[0] for e in canonical.extensions],
                               [math.sqrt((1 - r * r) / 2)] * 2 + [-r], atol=1e-12)


def test_compiled_circuit_realises_usd(usd_08):
    dilation = naimark_unitary(usd_08.povm)
    plus, minus = usd_signals(0.8, 0.6)
    np.testing.assert_allclose(simulate_povm(dilation, rail_state(plus, 3)), (0.72, 0.0, 0.28),
                               atol=1e-12)
    np.testing.assert_allclose(simulate_povm(dilation, rail_state(minus, 3)), (0.0, 0.72, 0.28),
                               atol=1e-12)


def test_detection_circuit_maps_rows_to_rails(usd_08):
    dilation = naimark_unitary(usd_08.povm)
    for mu, w in enumerate(dilation.rows):
        expected = np.zeros(3)
        expected[mu] = 1.0
        np.testing.assert_allclose(dilation.circuit.matrix @ w, expected, atol=1e-12)


def test_mesh_of_compiled_circuit(usd_08):
    circuit = naimark_unitary(usd_08.povm).circuit
    params = decompose_to_givens(circuit)
    np.testing.assert_allclose(compose_from_givens(params).matrix, circuit.matrix, atol=1e-10)


@pytest.mark.parametrize('seed', range(10))
def test_random_povm_matches_born_rule(seed):
    rng = np.random.default_rng(seed)
    isometry = haar_random(4, seed).matrix[:, :2]
    povm = validate_povm(list(isometry), 2)
    dilation = naimark_unitary(povm)
    psi = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    psi /= np.linalg.norm(psi)
    np.testing.assert_allclose(simulate_povm(dilation, rail_state(psi, 4)),
                               born_probabilities(povm, psi), atol=1e-12)
    assert sum(born_probabilities(povm, psi)) == pytest.approx(1.0)


def test_projective_povm_gives_identity():
    povm = validate_povm([[1, 0], [0, 1]], 2)
    dilation = naimark_unitary(povm)
    np.testing.assert_allclose(dilation.unitary, np.eye(2), atol=1e-15)
    assert dilation.extensions[0].shape == (0,)


def test_incomplete_povm():
    with pytest.raises(PovmCompletenessError) as err:
        validate_povm([[1, 0], [0, 0.5]], 2)
    assert err.value.deviation == pytest.approx(0.75)


def test_povm_shape_errors():
    with pytest.raises(PovmError):
        validate_povm([], 2)
    with pytest.raises(PovmError):
        validate_povm([[1, 0, 0]], 2)
    with pytest.raises(DimensionMismatchError):
        # one element cannot resolve a two-level signal
        naimark_unitary(PovmSet(2, (np.array([1.0, 0.0]),)))


@pytest.mark.parametrize('alpha, beta', [(0.6, 0.8), (0.8, 0.0), (0.9, 0.6)])
def test_usd_povm_rejects_bad_amplitudes(alpha, beta):
    with pytest.raises(ParameterError):
        usd_povm(alpha, beta)


def test_simulate_povm_input_checks(usd_08):
    dilation = naimark_unitary(usd_08.povm)
    with pytest.raises(DimensionMismatchError):
        simulate_povm(dilation, rail_state([1, 0], 2))
    with pytest.raises(InvalidStateError):
        simulate_povm(dilation, build_pure_state(3, [((2, 0, 0), 1.0)]))
    with pytest.raises(InvalidStateError):
        simulate_povm(dilation, rail_state([0, 0, 1], 3))


def test_rail_state():
    state = rail_state([0.6, 0.8j], 3)
    assert state.amplitude((1, 0, 0)) == pytest.approx(0.6)
    assert state.amplitude((0, 1, 0)) == pytest.approx(0.8j)
    assert state.n_modes == 3
    with pytest.raises(DimensionMismatchError):
        rail_state([1, 0, 0], 2)


def test_povm_dict_round_trip(usd_08):
    again = povm_from_dict(povm_to_dict(usd_08.povm))
    np.testing.assert_allclose(again.matrix(), usd_08.povm.matrix())
    with pytest.raises(InputFormatError):
        povm_from_dict({'signal_dim': 2, 'elements': [[1, 0]]})


def test_povm_with_nan_is_incomplete():
    with pytest.raises(PovmCompletenessError) as err:
        validate_povm([[math.nan, 0], [0, 1]], 2)
    assert math.isnan(err.value.deviation)
    with pytest.raises(PovmCompletenessError):
        povm_from_dict({'signal_dim': 1, 'elements': [{'vec': [[math.nan, 0]]}]})


def test_born_probabilities_use_element_operators(usd_08):
    psi = np.array([0.6, 0.8j])
    expected = [float(np.real(np.trace(op @ np.outer(psi, psi.conj())))) for op in usd_08.povm.operators()]
    np.testing.assert_allclose(born_probabilities(usd_08.povm, psi), expected, atol=1e-15)
    np.testing.assert_allclose(sum(usd_08.povm.operators()), np.eye(2), atol=1e-12)
