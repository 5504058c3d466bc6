"""Card encoding, deck construction, and showdown hand evaluation.

Cards are small integers in rank-major order: ``card = rank_index * n_suits +
suit_index``.  Rank index 0 is the lowest rank in the deck's rank string.
Text form is the usual two-character notation ("As", "Td"); decks with a
single suit render the rank character alone ("K").
"""

from __future__ import annotations

from itertools import combinations

STANDARD_RANKS = "23456789TJQKA"
STANDARD_SUITS = "cdhs"

# Standard poker rank values; decks use subsets of these characters.
RANK_VALUE = {ch: i + 2 for i, ch in enumerate(STANDARD_RANKS)}

# Hand category codes, ascending strength.
HIGH_CARD = 0
ONE_PAIR = 1
TWO_PAIR = 2
TRIPS = 3
STRAIGHT = 4
FLUSH = 5
FULL_HOUSE = 6
QUADS = 7
STRAIGHT_FLUSH = 8


def card_id(rank_index: int, suit_index: int, n_suits: int) -> int:
    return rank_index * n_suits + suit_index


def rank_of(card: int, n_suits: int) -> int:
    return card // n_suits


def suit_of(card: int, n_suits: int) -> int:
    return card % n_suits


class Deck:
    """An ordered deck over a rank string and a suit string."""

    def __init__(self, ranks: str, suits: str):
        if len(set(ranks)) != len(ranks) or len(set(suits)) != len(suits):
            raise ValueError("duplicate rank or suit characters")
        for ch in ranks:
            if ch not in RANK_VALUE:
                raise ValueError(f"unknown rank character {ch!r}")
        self.ranks = ranks
        self.suits = suits
        self.n_suits = len(suits)
        self.cards = tuple(range(len(ranks) * len(suits)))

    def __len__(self) -> int:
        return len(self.cards)

    def rank_value(self, card: int) -> int:
        return RANK_VALUE[self.ranks[rank_of(card, self.n_suits)]]

    def card_text(self, card: int) -> str:
        r = self.ranks[rank_of(card, self.n_suits)]
        if self.n_suits == 1:
            return r
        return r + self.suits[suit_of(card, self.n_suits)]

    def parse_card(self, text: str) -> int:
        if self.n_suits == 1:
            ri = self.ranks.index(text)
            return card_id(ri, 0, 1)
        ri = self.ranks.index(text[0])
        si = self.suits.index(text[1])
        return card_id(ri, si, self.n_suits)

    def cards_text(self, cards) -> str:
        return "".join(self.card_text(c) for c in cards)


def evaluate_five(values: list[int], suits: list[int]) -> tuple:
    """Rank a 5-card hand; higher tuples beat lower ones.

    ``values`` are standard rank values (2..14), ``suits`` arbitrary suit ids.
    The wheel (A-5 straight) counts as a straight with high card 5.
    """
    counts: dict[int, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    # Group values by multiplicity, then by value, both descending.
    groups = sorted(counts.items(), key=lambda kv: (-kv[1], -kv[0]))
    shape = tuple(n for _, n in groups)
    ordered = tuple(v for v, _ in groups)

    is_flush = len(set(suits)) == 1
    distinct = sorted(counts)
    is_straight = False
    straight_high = 0
    if len(distinct) == 5:
        if distinct[4] - distinct[0] == 4:
            is_straight = True
            straight_high = distinct[4]
        elif distinct == [2, 3, 4, 5, 14]:
            is_straight = True
            straight_high = 5

    if is_straight and is_flush:
        return (STRAIGHT_FLUSH, straight_high)
    if shape == (4, 1):
        return (QUADS,) + ordered
    if shape == (3, 2):
        return (FULL_HOUSE,) + ordered
    if is_flush:
        return (FLUSH,) + tuple(sorted(values, reverse=True))
    if is_straight:
        return (STRAIGHT, straight_high)
    if shape == (3, 1, 1):
        return (TRIPS,) + ordered
    if shape == (2, 2, 1):
        return (TWO_PAIR,) + ordered
    if shape == (2, 1, 1, 1):
        return (ONE_PAIR,) + ordered
    return (HIGH_CARD,) + tuple(sorted(values, reverse=True))


def best_five_rank(deck: Deck, cards: tuple[int, ...]) -> tuple:
    """Best 5-card rank among all 5-card subsets of ``cards`` (>= 5 cards)."""
    if len(cards) < 5:
        raise ValueError("need at least five cards")
    vals = [deck.rank_value(c) for c in cards]
    sts = [suit_of(c, deck.n_suits) for c in cards]
    if len(cards) == 5:
        return evaluate_five(vals, sts)
    best: tuple | None = None
    for idx in combinations(range(len(cards)), 5):
        r = evaluate_five([vals[i] for i in idx], [sts[i] for i in idx])
        if best is None or r > best:
            best = r
    assert best is not None
    return best
