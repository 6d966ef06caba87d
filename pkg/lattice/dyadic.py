# lattice/dyadic.py
"""
Exact dyadic arithmetic.

- DyadicRational: numerator / 2^exponent, canonical (numerator odd or exponent 0).
- Bit providers: deterministic left-infinite bit strings (zero tail, periodic tail, seeded tail).
- LazyDyadic: a dyadic integer reached from a provider by ±1, ×2 and ÷2, with bits evaluated on demand.
"""
from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import total_ordering

import numpy as np

from dyadlab.errors import DomainError, ParityError


# ---------------------------------------------------------------------
# Dyadic rationals
# ---------------------------------------------------------------------

def _trailing_zeros(n: int) -> int:
    return (n & -n).bit_length() - 1


@total_ordering
@dataclass(frozen=True, slots=True, eq=True)
class DyadicRational:
    numerator: int
    exponent: int = 0

    def __post_init__(self):
        if self.exponent < 0:
            raise DomainError("exponent must be nonnegative")
        n, e = self.numerator, self.exponent
        if n == 0:
            e = 0
        elif e:
            shift = min(_trailing_zeros(n), e)
            n >>= shift
            e -= shift
        object.__setattr__(self, "numerator", n)
        object.__setattr__(self, "exponent", e)

    @classmethod
    def from_fraction(cls, value: Fraction | int) -> "DyadicRational":
        value = Fraction(value)
        den = value.denominator
        if den & (den - 1):
            raise DomainError(f"{value} is not a dyadic rational")
        return cls(value.numerator, den.bit_length() - 1)

    def _aligned(self, other: "DyadicRational") -> tuple[int, int, int]:
        e = max(self.exponent, other.exponent)
        return self.numerator << (e - self.exponent), other.numerator << (e - other.exponent), e

    def __add__(self, other):
        if isinstance(other, int):
            other = DyadicRational(other)
        if not isinstance(other, DyadicRational):
            return NotImplemented
        a, b, e = self._aligned(other)
        return DyadicRational(a + b, e)

    __radd__ = __add__

    def __neg__(self):
        return DyadicRational(-self.numerator, self.exponent)

    def __sub__(self, other):
        if isinstance(other, int):
            other = DyadicRational(other)
        if not isinstance(other, DyadicRational):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __lt__(self, other):
        if isinstance(other, int):
            other = DyadicRational(other)
        if not isinstance(other, DyadicRational):
            return NotImplemented
        a, b, _ = self._aligned(other)
        return a < b

    def scaled(self, k: int) -> "DyadicRational":
        """Multiply by 2^k (k may be negative)."""
        if k >= 0:
            return DyadicRational(self.numerator << k, self.exponent)
        return DyadicRational(self.numerator, self.exponent - k)

    def mod1(self) -> "DyadicRational":
        return DyadicRational(self.numerator % (1 << self.exponent), self.exponent)

    def to_fraction(self) -> Fraction:
        return Fraction(self.numerator, 1 << self.exponent)

    def __float__(self) -> float:
        return float(self.to_fraction())

    def __str__(self) -> str:
        return f"{self.numerator}/2^{self.exponent}"


ZERO = DyadicRational(0)


# ---------------------------------------------------------------------
# Bit providers
# ---------------------------------------------------------------------

class ProviderKind(str, Enum):
    ZERO_TAIL = "zero_tail"
    PERIODIC_TAIL = "periodic_tail"
    SEEDED_TAIL = "seeded_tail"


def _check_bits(text: str, what: str) -> str:
    if set(text) - {"0", "1"}:
        raise DomainError(f"{what} must be a 0/1 string, got {text!r}")
    return text


class BitProvider(ABC):
    """
    A left-infinite bit string (a_k)_{k <= 0}. `suffix` is written most significant
    first, so its last character is a_0. Evaluated bits are memoized as one integer.
    """

    kind: ProviderKind

    def __init__(self, suffix: str = ""):
        self.suffix = _check_bits(suffix, "suffix")
        self._lock = threading.Lock()
        self._known = int(suffix, 2) if suffix else 0
        self._known_len = len(suffix)

    @abstractmethod
    def _tail_bits(self, start: int, count: int) -> int:
        """Bits start .. start+count-1 beyond the suffix, packed little-endian (bit j = a_{-(start+j)})."""

    def low_bits(self, count: int) -> int:
        """a mod 2^count as a nonnegative integer."""
        if count <= self._known_len:
            return self._known & ((1 << count) - 1)
        with self._lock:
            if count > self._known_len:
                # grow in 64-bit chunks so repeated small extensions stay cheap
                target = max(count, self._known_len + 64)
                extra = self._tail_bits(self._known_len, target - self._known_len)
                self._known |= extra << self._known_len
                self._known_len = target
            return self._known & ((1 << count) - 1)

    def window(self, start: int, count: int) -> int:
        """Bits a_{-start} .. a_{-(start+count-1)} as an integer (floor(a / 2^start) mod 2^count)."""
        return self.low_bits(start + count) >> start

    def bit_at(self, index: int) -> int:
        """a_{-index} for index >= 0."""
        return (self.low_bits(index + 1) >> index) & 1

    def bit(self, k: int) -> int:
        """a_k for k <= 0."""
        if k > 0:
            raise DomainError("dyadic integers have no bits at positive index")
        return self.bit_at(-k)

    def is_eventually_periodic(self) -> bool:
        return self.kind in (ProviderKind.ZERO_TAIL, ProviderKind.PERIODIC_TAIL)

    @abstractmethod
    def to_dict(self) -> dict: ...

    def __eq__(self, other):
        return isinstance(other, BitProvider) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(tuple(sorted(self.to_dict().items())))

    def __repr__(self):
        return f"{type(self).__name__}({self.to_dict()})"


class ZeroTailProvider(BitProvider):
    kind = ProviderKind.ZERO_TAIL

    def _tail_bits(self, start, count):
        return 0

    def to_dict(self):
        return {"kind": self.kind.value, "suffix": self.suffix}


class PeriodicTailProvider(BitProvider):
    kind = ProviderKind.PERIODIC_TAIL

    def __init__(self, suffix: str = "", period: str = "1"):
        if not period:
            raise DomainError("period must be nonempty")
        self.period = _check_bits(period, "period")
        super().__init__(suffix)

    def _tail_bits(self, start, count):
        p = len(self.period)
        out = 0
        for j in range(count):
            i = start + j - len(self.suffix)
            # ... period period suffix: the period's last char sits just above the suffix
            out |= int(self.period[p - 1 - (i % p)]) << j
        return out

    def to_dict(self):
        return {"kind": self.kind.value, "suffix": self.suffix, "period": self.period}


class SeededTailProvider(BitProvider):
    """Pseudorandom tail from a Philox stream; raw 64-bit outputs are stable across numpy versions."""

    kind = ProviderKind.SEEDED_TAIL

    def __init__(self, suffix: str = "", seed: int = 0):
        self.seed = int(seed)
        self._bitgen = np.random.Philox(key=self.seed)
        self._raw = 0
        self._raw_len = 0
        super().__init__(suffix)

    def _tail_bits(self, start, count):
        need = start - len(self.suffix) + count
        if need > self._raw_len:
            words = -(-(need - self._raw_len) // 64)
            for w in self._bitgen.random_raw(words):
                self._raw |= int(w) << self._raw_len
                self._raw_len += 64
        offset = start - len(self.suffix)
        return (self._raw >> offset) & ((1 << count) - 1)

    def to_dict(self):
        return {"kind": self.kind.value, "suffix": self.suffix, "seed": self.seed}


def provider_from_dict(data: dict) -> BitProvider:
    kind = ProviderKind(data["kind"])
    suffix = data.get("suffix", "")
    if kind is ProviderKind.ZERO_TAIL:
        return ZeroTailProvider(suffix)
    if kind is ProviderKind.PERIODIC_TAIL:
        return PeriodicTailProvider(suffix, data["period"])
    return SeededTailProvider(suffix, data["seed"])


# ---------------------------------------------------------------------
# Lazy dyadic integers
# ---------------------------------------------------------------------

class LazyOp(str, Enum):
    ADD1 = "add1"
    SUB1 = "sub1"
    MUL2 = "mul2"
    DIV2 = "div2"


class LazyDyadic:
    """
    value = floor(a / 2^shift) * 2^scale + offset, with min(shift, scale) == 0.

    `offset` is the pending carry: ±1 never touches the provider, and bits are only
    read from the provider when low_bits() is asked for. A vertex at depth m reached
    from the root (0, a) always has scale = max(m, 0) and shift = max(-m, 0).
    """

    __slots__ = ("provider", "shift", "scale", "offset")

    def __init__(self, provider: BitProvider, shift: int = 0, scale: int = 0, offset: int = 0):
        if shift < 0 or scale < 0:
            raise DomainError("shift and scale must be nonnegative")
        # canonical form: fold common powers of two back into the provider
        while shift > 0 and scale > 0:
            shift -= 1
            scale -= 1
            offset -= provider.bit_at(shift) << scale
        self.provider = provider
        self.shift = shift
        self.scale = scale
        self.offset = offset

    @classmethod
    def from_dict(cls, data: dict) -> "LazyDyadic":
        return cls(provider_from_dict(data))

    def to_dict(self) -> dict:
        data = self.provider.to_dict()
        if (self.shift, self.scale, self.offset) != (0, 0, 0):
            data.update(shift=self.shift, scale=self.scale, offset=self.offset)
        return data

    # ---- bits ----
    def low_bits(self, count: int) -> int:
        """value mod 2^count."""
        if count <= 0:
            return 0
        mask = (1 << count) - 1
        base = self.provider.window(self.shift, max(count - self.scale, 0)) if count > self.scale else 0
        return ((base << self.scale) + self.offset) & mask

    def bit(self, k: int) -> int:
        if k > 0:
            raise DomainError("dyadic integers have no bits at positive index")
        return (self.low_bits(1 - k) >> -k) & 1

    @property
    def is_even(self) -> bool:
        return self.low_bits(1) == 0

    def to_word(self, count: int) -> str:
        """The low `count` bits, most significant first."""
        return format(self.low_bits(count), f"0{count}b") if count else "~"

    # ---- arithmetic ----
    def add1(self) -> "LazyDyadic":
        return LazyDyadic(self.provider, self.shift, self.scale, self.offset + 1)

    def sub1(self) -> "LazyDyadic":
        return LazyDyadic(self.provider, self.shift, self.scale, self.offset - 1)

    def mul2(self) -> "LazyDyadic":
        if self.shift > 0:
            # 2 floor(a/2^r) = floor(a/2^(r-1)) - a_{-(r-1)}
            r = self.shift - 1
            return LazyDyadic(self.provider, r, 0, 2 * self.offset - self.provider.bit_at(r))
        return LazyDyadic(self.provider, 0, self.scale + 1, 2 * self.offset)

    def div2(self) -> "LazyDyadic":
        if self.scale > 0:
            if self.offset & 1:
                raise ParityError("cannot halve an odd dyadic integer")
            return LazyDyadic(self.provider, self.shift, self.scale - 1, self.offset // 2)
        b = self.provider.bit_at(self.shift)
        if (b + self.offset) & 1:
            raise ParityError("cannot halve an odd dyadic integer")
        return LazyDyadic(self.provider, self.shift + 1, 0, (self.offset + b) // 2)

    # ---- identity ----
    def key(self) -> tuple[int, int, int]:
        return (self.shift, self.scale, self.offset)

    def __eq__(self, other):
        return (
            isinstance(other, LazyDyadic)
            and self.key() == other.key()
            and (self.provider is other.provider or self.provider == other.provider)
        )

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"LazyDyadic(…{self.to_word(8)}, shift={self.shift}, scale={self.scale}, offset={self.offset})"


def lazy_arith(a: LazyDyadic, op: LazyOp | str) -> LazyDyadic:
    op = LazyOp(op)
    if op is LazyOp.ADD1:
        return a.add1()
    if op is LazyOp.SUB1:
        return a.sub1()
    if op is LazyOp.MUL2:
        return a.mul2()
    return a.div2()
