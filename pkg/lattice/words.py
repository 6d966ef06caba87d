# lattice/words.py
"""
Finite binary words: the vertex labels of the wrapped graph and of the wrapped dual.

A word is stored as (value, depth); bits are read most significant first, so
`Word.parse("011")` has value 3 and depth 3. The empty word ∅ is written "~".
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from dyadlab.errors import DomainError

from .dyadic import DyadicRational

EMPTY_SYMBOL = "~"


@dataclass(frozen=True, slots=True, order=True)
class Word:
    value: int
    depth: int

    def __post_init__(self):
        if self.depth < 0:
            raise DomainError(f"negative depth {self.depth}")
        if not 0 <= self.value < (1 << self.depth):
            raise DomainError(f"value {self.value} does not fit in {self.depth} bits")

    # ---- construction ----
    @classmethod
    def from_bits(cls, bits) -> "Word":
        value = 0
        depth = 0
        for b in bits:
            if b not in (0, 1):
                raise DomainError(f"not a bit: {b!r}")
            value = (value << 1) | b
            depth += 1
        return cls(value, depth)

    @classmethod
    def parse(cls, text: str) -> "Word":
        text = text.strip()
        if text in (EMPTY_SYMBOL, ""):
            return EMPTY
        if set(text) - {"0", "1"}:
            raise DomainError(f"not a binary word: {text!r}")
        return cls(int(text, 2), len(text))

    # ---- queries ----
    @property
    def bits(self) -> tuple[int, ...]:
        return tuple((self.value >> (self.depth - 1 - i)) & 1 for i in range(self.depth))

    @property
    def is_root(self) -> bool:
        return self.depth == 0

    @property
    def last_bit(self) -> int:
        if self.depth == 0:
            raise DomainError("∅ has no last bit")
        return self.value & 1

    @property
    def is_even(self) -> bool:
        """Ends in 0 (degree-4 vertex). ∅ is not even."""
        return self.depth > 0 and self.value & 1 == 0

    def __str__(self) -> str:
        if self.depth == 0:
            return EMPTY_SYMBOL
        return format(self.value, f"0{self.depth}b")

    def __repr__(self) -> str:
        return f"Word({self})"


EMPTY = Word(0, 0)


class Shift(str, Enum):
    APPEND0 = "append0"
    APPEND1 = "append1"
    POP = "pop"


# ---------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------

def word_add(w: Word, delta: int) -> Word:
    """Horizontal step: value ± 1 reduced modulo 2^depth."""
    if delta not in (1, -1):
        raise DomainError(f"delta must be +1 or -1, got {delta}")
    if w.depth == 0:
        # ∅'s sideways moves are self-loops, handled by the graph module
        raise DomainError("∅ has no horizontal neighbours")
    return Word((w.value + delta) % (1 << w.depth), w.depth)


def word_shift(w: Word, direction: Shift | str) -> Word:
    direction = Shift(direction)
    if direction is Shift.APPEND0:
        return Word(w.value << 1, w.depth + 1)
    if direction is Shift.APPEND1:
        return Word((w.value << 1) | 1, w.depth + 1)
    if w.depth == 0:
        raise DomainError("cannot pop ∅")
    return Word(w.value >> 1, w.depth - 1)


def position_of(w: Word) -> DyadicRational:
    """Horizontal position v(w) / 2^depth in [0, 1); ∅ sits at 0."""
    return DyadicRational(w.value, w.depth)


def words_at_depth(depth: int):
    for v in range(1 << depth):
        yield Word(v, depth)
