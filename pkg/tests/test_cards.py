"""Hand evaluation and card codec tests.

Covers: rank-major encoding round trips, text notation, 5-card category
ordering, wheel straight, and best-of-seven selection.
"""

from headsup.cards import Deck, best_five_rank, evaluate_five
from headsup.cards import FLUSH, FULL_HOUSE, HIGH_CARD, ONE_PAIR, STRAIGHT, STRAIGHT_FLUSH

FULL = Deck("23456789TJQKA", "cdhs")


def cards(text: str) -> tuple[int, ...]:
    return tuple(FULL.parse_card(text[i : i + 2]) for i in range(0, len(text), 2))


def rank_of_text(text: str) -> tuple:
    cs = cards(text)
    return evaluate_five(
        [FULL.rank_value(c) for c in cs], [c % FULL.n_suits for c in cs]
    )


def test_encoding_is_rank_major():
    # rank index * n_suits + suit index; 2c = 0, As = 51
    assert FULL.parse_card("2c") == 0
    assert FULL.parse_card("As") == 51
    assert FULL.card_text(51) == "As"
    assert FULL.card_text(FULL.parse_card("Td")) == "Td"


def test_single_suit_deck_renders_rank_only():
    kuhn = Deck("JQK", "s")
    assert kuhn.card_text(kuhn.parse_card("K")) == "K"
    assert len(kuhn) == 3


def test_category_ordering():
    ladder = [
        rank_of_text("2c7d9hJsKc"),  # high card
        rank_of_text("2c2d9hJsKc"),  # pair
        rank_of_text("2c2d9h9sKc"),  # two pair
        rank_of_text("2c2d2h9sKc"),  # trips
        rank_of_text("3c4d5h6s7c"),  # straight
        rank_of_text("2c9cJcQcKc"),  # flush
        rank_of_text("2c2d2hKsKc"),  # full house
        rank_of_text("2c2d2h2sKc"),  # quads
        rank_of_text("3c4c5c6c7c"),  # straight flush
    ]
    for weaker, stronger in zip(ladder, ladder[1:]):
        assert weaker < stronger


def test_wheel_straight_is_five_high():
    wheel = rank_of_text("Ac2d3h4s5c")
    six_high = rank_of_text("2d3h4s5c6c")
    assert wheel[0] == STRAIGHT
    assert wheel < six_high


def test_kickers_break_ties():
    a = rank_of_text("AcAd9h5s3c")
    b = rank_of_text("AcAd9h5s2c")
    assert a > b
    assert rank_of_text("KcQd9h5s3c")[0] == HIGH_CARD


def test_best_of_seven_prefers_flush_over_pair():
    seven = cards("AsKs7s4s2sAdKc")
    assert best_five_rank(FULL, seven)[0] == FLUSH


def test_best_of_seven_finds_full_house():
    seven = cards("QcQdQh9s9cKd2h")
    assert best_five_rank(FULL, seven)[0] == FULL_HOUSE


def test_straight_flush_beats_quads_in_seven():
    seven = cards("5c6c7c8c9c9d9h")
    assert best_five_rank(FULL, seven)[0] == STRAIGHT_FLUSH


def test_pair_detected_across_hand_and_board():
    assert rank_of_text("TcTd4h8sQc")[0] == ONE_PAIR
