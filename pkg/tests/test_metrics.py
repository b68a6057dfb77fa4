import numpy as np
import pytest

from conftest import random_state
from dephase_lab.dephase import dephase_partial, dephase_total
from dephase_lab.discrimination import usd_report
from dephase_lab.errors import DimensionMismatchError, InvalidStateError
from dephase_lab.fock import PureState, build_pure_state
from dephase_lab.linop import haar_random, transform
from dephase_lab.metrics import (
    bhattacharyya,
    check_fidelity_bounds,
    fidelity_block,
    fidelity_diagonal,
    fidelity_pure,
)

PHOTON_CHOICES = ([1], [2], [1, 2], [2, 3])


def random_instance(seed):
    rng = np.random.default_rng(seed)
    n_modes = int(rng.integers(2, 4))
    photons = PHOTON_CHOICES[int(rng.integers(len(PHOTON_CHOICES)))]
    plus = random_state(rng, n_modes, photons)
    minus = random_state(rng, n_modes, photons)
    return plus, minus, haar_random(n_modes, seed)


def test_fidelity_pure_toy(toy_pair):
    assert fidelity_pure(*toy_pair) == pytest.approx(1 / 9)
    assert fidelity_pure(toy_pair[0], toy_pair[0]) == pytest.approx(1.0)


def test_fidelity_pure_requires_normalized(toy_pair):
    half = PureState(2, {(2, 0): 0.5})
    with pytest.raises(InvalidStateError):
        fidelity_pure(half, toy_pair[0])


def test_bhattacharyya_toy(toy_pair, hadamard):
    plus_h = dephase_total(transform(hadamard, toy_pair[0]))
    minus_h = dephase_total(transform(hadamard, toy_pair[1]))
    assert bhattacharyya(plus_h, minus_h) == pytest.approx(1 / 3)
    assert fidelity_diagonal(plus_h, minus_h) == pytest.approx(1 / 9)


def test_diagonal_fidelity_disjoint_support():
    a = dephase_total(build_pure_state(2, [((2, 0), 1.0)]))
    b = dephase_total(build_pure_state(2, [((0, 2), 1.0)]))
    assert fidelity_diagonal(a, b) == 0.0
    with pytest.raises(DimensionMismatchError):
        bhattacharyya(a, dephase_total(build_pure_state(1, [((1,), 1.0)])))


def test_block_fidelity_requires_same_modes(toy_pair):
    with pytest.raises(DimensionMismatchError):
        fidelity_block(dephase_partial(toy_pair[0], [0]), dephase_partial(toy_pair[1], [1]))


def test_block_fidelity_without_dephasing_effect():
    # mode 0 holds one photon in every term, so dephasing it changes nothing
    a = build_pure_state(2, [((1, 0), 0.6), ((1, 1), 0.8)])
    b = build_pure_state(2, [((1, 0), 0.8), ((1, 1), 0.6)])
    assert fidelity_block(dephase_partial(a, [0]), dephase_partial(b, [0])) == pytest.approx(
        fidelity_pure(a, b))


@pytest.mark.parametrize('modes', [[0], [1]])
def test_block_fidelity_toy_after_hadamard(toy_pair, hadamard, modes):
    plus, minus = (transform(hadamard, s) for s in toy_pair)
    # only the |11> block is shared after the 50/50 transform
    fid = fidelity_block(dephase_partial(plus, modes), dephase_partial(minus, modes))
    assert fid == pytest.approx(1 / 9, abs=1e-12)


def test_block_fidelity_orthogonal_conditionals():
    a = build_pure_state(2, [((1, 0), 0.6), ((0, 1), 0.8j)])
    b = build_pure_state(2, [((1, 1), 0.8), ((0, 0), -0.6)])
    ba, bb = dephase_partial(a, [0]), dephase_partial(b, [0])
    assert set(ba.blocks) == set(bb.blocks) == {(0,), (1,)}
    assert fidelity_block(ba, bb) == pytest.approx(0.0, abs=1e-15)


def test_bounds_on_toy_optimum(toy_pair, hadamard):
    report = check_fidelity_bounds(*toy_pair, hadamard, None, prob_fail=1 / 3)
    assert report.lower_ok and report.upper_ok
    assert report.f_input == pytest.approx(1 / 9)
    assert report.f_dephased == pytest.approx(1 / 9)
    assert report.slack_upper == pytest.approx(0.0, abs=1e-12)
    assert report.to_dict()['prob_fail'] == pytest.approx(1 / 3)


def test_bounds_report_violation_as_content(toy_pair, hadamard):
    report = check_fidelity_bounds(*toy_pair, hadamard, None, prob_fail=0.2)
    assert report.lower_ok
    assert not report.upper_ok


def test_bounds_reject_bad_probability(toy_pair, hadamard):
    with pytest.raises(InvalidStateError):
        check_fidelity_bounds(*toy_pair, hadamard, None, prob_fail=1.5)


def test_fidelity_bounds_random_instances():
    for seed in range(500):
        plus, minus, circuit = random_instance(seed)
        prob_fail = min(1.0, usd_report(circuit, plus, minus).prob_fail_circuit)
        report = check_fidelity_bounds(plus, minus, circuit, None, prob_fail)
        assert report.slack_lower >= -1e-10, seed
        assert report.slack_upper >= -1e-10, seed


def test_partial_dephasing_sits_between_input_and_total():
    for seed in range(100):
        plus, minus, circuit = random_instance(1000 + seed)
        prob_fail = min(1.0, usd_report(circuit, plus, minus).prob_fail_circuit)
        partial = check_fidelity_bounds(plus, minus, circuit, [0], prob_fail)
        total = check_fidelity_bounds(plus, minus, circuit, None, prob_fail)
        assert partial.f_input <= partial.f_dephased + 1e-10, seed
        assert partial.f_dephased <= total.f_dephased + 1e-10, seed
        assert partial.upper_ok, seed
