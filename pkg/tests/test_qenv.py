import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from forage_lab.qenv import (
    Direction, INITIAL_FOOD, QWorld, encode_state, new_qworld, perspective_keys, state_key, step_joint,
)

N, E, S, W = Direction.NORTH, Direction.EAST, Direction.SOUTH, Direction.WEST


def test_new_world():
    w = new_qworld()
    assert w.food_on_grid() == 60 == INITIAL_FOOD
    assert w.food_on_grid() + w.carried.sum() == 60
    assert len({tuple(p) for p in w.agent_pos}) == 4


def test_dump():
    lines = new_qworld().dump().splitlines()
    assert lines[0] == "0******1" and lines[7] == "2******3"


def test_own_view_encoding():
    enc = encode_state(new_qworld(), agent=0)
    assert enc.shape == (64,)
    assert enc[0] == -0.5
    assert enc[7] == enc[56] == enc[63] == -1
    assert np.count_nonzero(enc == 1) == 60


def test_joint_view_encoding():
    enc = encode_state(new_qworld())
    np.testing.assert_allclose(enc[[0, 7, 56, 63]], [-0.5, -0.6, -0.7, -0.8])
    aliased = encode_state(new_qworld(), alias=True)
    assert (aliased[[0, 7, 56, 63]] == -1).all()


def test_empty_world_codes():
    w = new_qworld()
    w.food[:] = False
    assert set(np.unique(encode_state(w, agent=2))) <= {0.0, -1.0, -0.5}


def test_state_key_examples():
    assert state_key([0, 1, -1, -0.5]) == 0 + 1 * 4 + 2 * 16 + 3 * 64 == 228
    assert state_key(np.zeros(64)) == 0
    with pytest.raises(ValueError):
        state_key([0.3, 0, 0, 0])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 63), st.integers(0, 2**32))
def test_state_key_injective_on_single_tile_change(tile, seed):
    r = np.random.default_rng(seed)
    enc = r.choice([0.0, 1.0, -1.0, -0.5], size=64)
    other = enc.copy()
    other[tile] = {0.0: 1.0, 1.0: 0.0, -1.0: -0.5, -0.5: -1.0}[enc[tile]]
    assert state_key(enc) != state_key(other)


def _random_world(r):
    w = new_qworld()
    for _ in range(int(r.integers(0, 40))):
        step_joint(w, r.integers(0, 4, 4))
    return w


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.booleans())
def test_fast_keys_match_reference(seed, alias):
    w = _random_world(np.random.default_rng(seed))
    assert perspective_keys(w, True, alias) == [state_key(encode_state(w, alias=alias))]
    assert perspective_keys(w, False) == [state_key(encode_state(w, agent=i)) for i in range(4)]


def test_step_all_onto_food():
    w = new_qworld()
    deltas = step_joint(w, [E, W, E, W])
    assert list(deltas) == [1, 1, 1, 1]
    assert w.step_count == 1


def test_step_transfer():
    w = new_qworld()
    w.agent_pos[1] = (1, 0)
    w.carried[0] = 2
    deltas = step_joint(w, [E, N, N, N])
    assert list(deltas[:2]) == [-1, 1]
    assert tuple(w.agent_pos[0]) == (0, 0) and tuple(w.agent_pos[1]) == (1, 0)


def test_step_boundary():
    w = new_qworld()
    deltas = step_joint(w, [N, N, S, S])
    assert list(deltas) == [0, 0, 0, 0]
    assert tuple(w.agent_pos[0]) == (0, 0)


def test_conservation_under_random_moves(rng):
    w = QWorld()
    for _ in range(10_000):
        before = w.food_on_grid()
        d = step_joint(w, rng.integers(0, 4, 4))
        assert w.food_on_grid() + w.carried.sum() == 60
        assert d.sum() == before - w.food_on_grid()
        assert len({tuple(p) for p in w.agent_pos}) == 4
        if w.food_on_grid() == 0:
            w = QWorld()
