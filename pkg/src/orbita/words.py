"""Words of a finitely generated abelian group, as multi-exponents."""
from __future__ import annotations

import itertools

from .errors import BudgetExceeded, ContractViolation

MAX_WORDS = 100_000


def default_budget(m: int) -> int:
    return 6 if m == 1 else 3


def word_count(m: int, K: int) -> int:
    return (2 * K + 1) ** m


def enumerate_words(m: int, K: int) -> list[tuple[int, ...]]:
    """All multi-exponents with ``|k_i| <= K``, graded by ``sum |k_i|`` then lexicographic."""
    if m < 1 or K < 0:
        raise ContractViolation(f"need m >= 1 generators and budget K >= 0, got m={m}, K={K}")
    if word_count(m, K) > MAX_WORDS:
        raise BudgetExceeded(f"{word_count(m, K)} words for m={m}, K={K} exceeds {MAX_WORDS}")
    words = itertools.product(range(-K, K + 1), repeat=m)
    return sorted(words, key=lambda k: (sum(abs(e) for e in k), k))


def add_words(a, b):
    return tuple(x + y for x, y in zip(a, b))


def word_label(k) -> str:
    return "(" + ",".join(str(e) for e in k) + ")"
