import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vanetsec.fusion import FALSE, TRUE, Inbox, apply_malice, majority_vote


def test_strict_majority():
    rng = np.random.default_rng(0)
    assert majority_vote(Inbox(2, 1), rng) == TRUE
    assert majority_vote(Inbox(0, 3), rng) == FALSE


def test_strict_majority_consumes_no_randomness():
    rng = np.random.default_rng(5)
    majority_vote(Inbox(3, 1), rng)
    assert rng.random() == np.random.default_rng(5).random()


@pytest.mark.parametrize("inbox", [Inbox(1, 1), Inbox(0, 0), Inbox(4, 4)])
def test_tie_is_fair(inbox):
    rng = np.random.default_rng(123)
    draws = np.array([majority_vote(inbox, rng) for _ in range(100_000)])
    assert set(np.unique(draws)) == {TRUE, FALSE}
    assert abs((draws == TRUE).mean() - 0.5) <= 0.01


def test_malice():
    assert apply_malice(TRUE, True) == FALSE
    assert apply_malice(TRUE, False) == TRUE
    assert apply_malice(FALSE, True) == TRUE
    with pytest.raises(ValueError):
        apply_malice(0, True)


@given(st.sampled_from([TRUE, FALSE]), st.booleans())
def test_malice_involution(m, flag):
    assert apply_malice(apply_malice(m, flag), flag) == m


@given(st.lists(st.sampled_from([TRUE, FALSE]), max_size=12), st.randoms())
def test_vote_ignores_arrival_order(messages, shuffler):
    a = Inbox()
    for m in messages:
        a = a.receive(m)
    shuffled = list(messages)
    shuffler.shuffle(shuffled)
    b = Inbox()
    for m in shuffled:
        b = b.receive(m)
    assert a == b
    if not a.tied:
        assert majority_vote(a, np.random.default_rng(0)) == majority_vote(b, np.random.default_rng(1))


def test_inbox_validation():
    with pytest.raises(ValueError):
        Inbox(-1, 0)
    with pytest.raises(ValueError):
        Inbox().receive(2)
