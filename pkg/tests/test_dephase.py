import logging
import math

import pytest

from conftest import random_state
from dephase_lab.dephase import (
    DiagonalMixture,
    block_summary,
    dephase_partial,
    dephase_total,
    distribution_rows,
    marginal,
    pattern_distribution,
)
from dephase_lab.errors import DimensionMismatchError, InvalidStateError
from dephase_lab.fock import build_pure_state, inner_product
from dephase_lab.linop import transform

A, B, C = 0.6, 0.48, 0.64


@pytest.fixture
def three_mode_state():
    return build_pure_state(3, [((1, 1, 0), A), ((1, 0, 1), B), ((0, 0, 2), C)])


def test_total_dephasing_keeps_pattern_weights(three_mode_state):
    mix = dephase_total(three_mode_state)
    assert dict(mix.weights) == {(1, 1, 0): A ** 2, (1, 0, 1): B ** 2, (0, 0, 2): C ** 2}
    assert mix.total == pytest.approx(1.0, abs=1e-15)


def test_total_dephasing_of_complex_amplitudes():
    state = build_pure_state(2, [((1, 0), 0.6j), ((0, 1), -0.8)])
    mix = dephase_total(state)
    assert mix.probability((1, 0)) == pytest.approx(0.36)
    assert mix.probability((0, 1)) == pytest.approx(0.64)
    assert mix.probability((2, 0)) == 0.0


def test_weights_are_read_only(three_mode_state):
    mix = dephase_total(three_mode_state)
    with pytest.raises(TypeError):
        mix.weights[(0, 0, 0)] = 1.0


def test_partial_dephasing_blocks(three_mode_state):
    bm = dephase_partial(three_mode_state, [0])
    assert bm.remaining_modes == (1, 2)
    assert set(bm.blocks) == {(0,), (1,)}

    detected = bm.blocks[(1,)]
    assert detected.probability == pytest.approx(A ** 2 + B ** 2)
    norm = math.sqrt(A ** 2 + B ** 2)
    assert detected.conditional.amplitude((1, 0)) == pytest.approx(A / norm)
    assert detected.conditional.amplitude((0, 1)) == pytest.approx(B / norm)
    assert detected.conditional.normalized

    empty = bm.blocks[(0,)]
    assert empty.probability == pytest.approx(C ** 2)
    assert empty.conditional.amplitude((0, 2)) == pytest.approx(1.0)
    assert bm.total == pytest.approx(1.0)


def test_partial_over_all_modes_matches_total(three_mode_state):
    bm = dephase_partial(three_mode_state, [2, 0, 1])
    mix = dephase_total(three_mode_state)
    assert bm.dephased_modes == (0, 1, 2)
    for key, block in bm.blocks.items():
        assert block.conditional is None
        assert block.probability == pytest.approx(mix.probability(key))


def test_partial_drops_negligible_blocks(caplog):
    state = build_pure_state(2, [((1, 0), math.sqrt(1 - 1e-16)), ((0, 1), 1e-8)])
    with caplog.at_level(logging.WARNING):
        bm = dephase_partial(state, [1])
    assert set(bm.blocks) == {(0,)}
    assert bm.dropped[0][0] == (1,)
    assert 'Dropped 1 blocks' in caplog.text


def test_partial_errors(three_mode_state):
    with pytest.raises(InvalidStateError):
        dephase_partial(three_mode_state, [])
    with pytest.raises(DimensionMismatchError):
        dephase_partial(three_mode_state, [3])


def test_dephased_toy_outputs(toy_pair, hadamard):
    plus_h = dephase_total(transform(hadamard, toy_pair[0]))
    minus_h = dephase_total(transform(hadamard, toy_pair[1]))
    assert plus_h.probability((2, 0)) == pytest.approx(2 / 3)
    assert minus_h.probability((0, 2)) == pytest.approx(2 / 3)
    assert plus_h.probability((1, 1)) == pytest.approx(minus_h.probability((1, 1)))


def test_conditional_states_keep_relative_phase():
    state = build_pure_state(2, [((1, 1), 0.6), ((1, 0), 0.8j)])
    bm = dephase_partial(state, [0])
    reference = build_pure_state(1, [((1,), 0.6), ((0,), 0.8j)])
    assert abs(inner_product(bm.blocks[(1,)].conditional, reference)) == pytest.approx(1.0)


def test_marginal(three_mode_state):
    mix = dephase_total(three_mode_state)
    assert marginal(mix, [0]) == pytest.approx({(1,): A ** 2 + B ** 2, (0,): C ** 2})
    assert marginal(mix, [2, 1]) == pytest.approx(
        {(1, 0): A ** 2, (0, 1): B ** 2, (0, 2): C ** 2})


def test_distribution_exports(three_mode_state):
    mix = dephase_total(three_mode_state)
    assert [p for p, _ in pattern_distribution(mix)] == [(0, 0, 2), (1, 0, 1), (1, 1, 0)]
    assert distribution_rows(mix)[0] == ('0 0 2', C ** 2)
    with pytest.raises(InvalidStateError):
        pattern_distribution(DiagonalMixture(1, {}))


def test_block_summary(three_mode_state):
    summary = block_summary(dephase_partial(three_mode_state, [0]))
    assert summary['dephased_modes'] == [0]
    assert [b['occupations'] for b in summary['blocks']] == [[0], [1]]
    [term] = summary['blocks'][0]['conditional']
    assert term['pattern'] == [0, 2]
    assert term['re'] == pytest.approx(1.0)
    assert summary['dropped'] == []


@pytest.mark.parametrize('n_modes, photons, modes', [
    (2, [2], [0]),
    (3, [1, 2], [1]),
    (3, [2, 3], [0, 2]),
    (4, [2], [3, 1]),
])
def test_block_probabilities_match_total_marginal(rng, n_modes, photons, modes):
    for _ in range(10):
        state = random_state(rng, n_modes, photons)
        bm = dephase_partial(state, modes)
        expected = marginal(dephase_total(state), modes)
        assert set(bm.blocks) == set(expected)
        for key, block in bm.blocks.items():
            assert block.probability == pytest.approx(expected[key], abs=1e-12)
        assert bm.total == pytest.approx(1.0, abs=1e-12)
