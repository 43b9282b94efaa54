import numpy as np
import pytest

from qdyn import GameSpec, expected_reward, prisoners_dilemma
from qdyn.errors import InputDomainError


def test_pd_payoffs(pd):
    assert pd.action_labels == (("C", "D"), ("C", "D"))
    assert pd.reward(0, 0, 0) == 3.0
    assert pd.reward(0, 1, 0) == 5.0
    # agent 2 plays C against D -> 0, D against C -> 5
    assert pd.reward(1, 1, 0) == 5.0
    assert pd.reward(1, 0, 1) == 0.0
    assert pd.reward(0, 1, 1) == pd.reward(1, 1, 1) == 1.0
    assert pd.is_symmetric()
    assert pd.interaction_prefactor(0) == -1.0


def test_expected_reward_examples(pd):
    assert expected_reward(pd, 0, 0, [1.0, 0.0]) == 3.0
    assert expected_reward(pd, 0, 1, [0.0, 1.0]) == 1.0
    assert expected_reward(pd, 0, 1, [0.5, 0.5]) == 3.0


@pytest.mark.parametrize("bad", [[0.6, 0.6], [1.2, -0.2], [np.nan, 1.0], [1.0]])
def test_expected_reward_rejects_bad_policy(pd, bad):
    with pytest.raises(InputDomainError):
        expected_reward(pd, 0, 0, bad)


def test_expected_reward_is_affine_and_bounded(pd, rng):
    for _ in range(200):
        a, b, lam = rng.random(3)
        p, q = np.array([a, 1 - a]), np.array([b, 1 - b])
        for agent in (0, 1):
            for act in (0, 1):
                mix = expected_reward(pd, agent, act, lam * p + (1 - lam) * q)
                lin = lam * expected_reward(pd, agent, act, p) + (1 - lam) * expected_reward(
                    pd, agent, act, q)
                assert abs(mix - lin) <= 1e-12
                row = pd.rewards[agent][act]
                assert row.min() - 1e-12 <= mix <= row.max() + 1e-12


def test_game_validation():
    with pytest.raises(InputDomainError):
        GameSpec((("C",), ("C", "D")), (np.zeros((1, 2)), np.zeros((2, 1))))
    with pytest.raises(InputDomainError):
        GameSpec((("C", "D"), ("C", "D")), (np.zeros((2, 3)), np.zeros((2, 2))))
    with pytest.raises(InputDomainError):
        GameSpec((("C", "D"), ("C", "D")), (np.array([[1, np.inf], [0, 0]]), np.zeros((2, 2))))


def test_game_is_immutable_and_round_trips(pd):
    with pytest.raises(ValueError):
        pd.rewards[0][0, 0] = 9.0
    assert GameSpec.from_flat(pd.flat_payoffs()) == pd
    assert hash(GameSpec.from_flat(pd.flat_payoffs())) == hash(prisoners_dilemma())


def test_asymmetric_three_action_game():
    g = GameSpec((("a", "b", "c"), ("x", "y")),
                 (np.arange(6.0).reshape(3, 2), np.arange(6.0).reshape(2, 3)))
    assert g.n_actions == (3, 2)
    assert not g.is_symmetric()
    assert expected_reward(g, 0, 2, [0.25, 0.75]) == 0.25 * 4 + 0.75 * 5
    assert expected_reward(g, 1, 1, [0.2, 0.3, 0.5]) == 0.2 * 3 + 0.3 * 4 + 0.5 * 5
