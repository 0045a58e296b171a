"""Immutable bit strings, block parsing, and closeness predicates.

Everything else in the package moves data around as :class:`BitString`
values: prompts, generated responses, syndromes, digests-as-bits, and
candidate strings under verification.  Bits are packed little-endian
within bytes (bit ``i`` lives in byte ``i // 8`` at position ``i % 8``),
which makes the byte serialization deterministic across platforms and
lets sub-block extraction fall out of plain byte slicing.

Closeness thresholds are carried as exact rationals so that boundary
comparisons like ``diff_count <= delta * length`` never hit
floating-point edge cases.
"""
from __future__ import annotations

import base64
from fractions import Fraction
from typing import Iterable, Iterator, Union

DeltaLike = Union[Fraction, int, float, tuple]


def _as_fraction(delta: DeltaLike) -> Fraction:
    if isinstance(delta, tuple):
        num, den = delta
        return Fraction(num, den)
    return Fraction(delta)


class BitString:
    """A fixed-length, immutable sequence of bits.

    Internally the bits are one Python integer (bit ``i`` of the string is
    bit ``i`` of the integer) plus a length.  Out-of-range access raises,
    never truncates.
    """

    __slots__ = ("_val", "_len")

    def __init__(self, value: int, length: int):
        if length < 0:
            raise ValueError("negative length")
        if value < 0:
            raise ValueError("negative bit value")
        if value >> length:
            raise ValueError(f"value has bits beyond length {length}")
        self._val = value
        self._len = length

    # -- constructors ------------------------------------------------

    @classmethod
    def zeros(cls, length: int) -> "BitString":
        return cls(0, length)

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BitString":
        val = 0
        n = 0
        for b in bits:
            if b not in (0, 1):
                raise ValueError(f"bit must be 0 or 1, got {b!r}")
            val |= b << n
            n += 1
        return cls(val, n)

    @classmethod
    def from_01(cls, text: str) -> "BitString":
        """Parse an ASCII run of '0'/'1' characters."""
        return cls.from_bits(int(c) for c in text.strip())

    @classmethod
    def from_bytes(cls, data: bytes, length: int | None = None) -> "BitString":
        if length is None:
            length = 8 * len(data)
        if len(data) < (length + 7) // 8:
            raise ValueError("not enough bytes for requested length")
        val = int.from_bytes(data, "little")
        return cls(val & ((1 << length) - 1), length)

    @classmethod
    def basis(cls, length: int, index: int) -> "BitString":
        """The unit vector e_index of the given length."""
        if not 0 <= index < length:
            raise IndexError("basis index out of range")
        return cls(1 << index, length)

    @classmethod
    def random(cls, length: int, rng) -> "BitString":
        """Draw a uniform bit string from an entropy source with .bytes()."""
        nbytes = (length + 7) // 8
        val = int.from_bytes(rng.bytes(nbytes), "little") if nbytes else 0
        return cls(val & ((1 << length) - 1), length)

    # -- codec ---------------------------------------------------------

    def to_01(self) -> str:
        return "".join("1" if (self._val >> i) & 1 else "0" for i in range(self._len))

    def to_bytes(self) -> bytes:
        return self._val.to_bytes((self._len + 7) // 8, "little")

    def to_b64(self) -> str:
        """Render as ``b<length>:<base64-of-packed-bytes>``."""
        return f"b{self._len}:" + base64.b64encode(self.to_bytes()).decode("ascii")

    @classmethod
    def from_b64(cls, text: str) -> "BitString":
        text = text.strip()
        if not text.startswith("b"):
            raise ValueError("missing 'b<length>:' header")
        head, _, body = text.partition(":")
        length = int(head[1:])
        return cls.from_bytes(base64.b64decode(body), length)

    @classmethod
    def parse_text(cls, text: str) -> "BitString":
        """Accept either the base64 header codec or a raw '01' run."""
        text = text.strip()
        if text.startswith("b") and ":" in text:
            return cls.from_b64(text)
        return cls.from_01(text)

    # -- core protocol -------------------------------------------------

    def __len__(self) -> int:
        return self._len

    @property
    def value(self) -> int:
        return self._val

    def __getitem__(self, key):
        if isinstance(key, slice):
            start, stop, step = key.indices(self._len)
            if step != 1:
                raise ValueError("only step-1 slices supported")
            width = max(0, stop - start)
            return BitString((self._val >> start) & ((1 << width) - 1), width)
        if not 0 <= key < self._len:
            raise IndexError(f"bit index {key} out of range [0, {self._len})")
        return (self._val >> key) & 1

    def __iter__(self) -> Iterator[int]:
        v = self._val
        for _ in range(self._len):
            yield v & 1
            v >>= 1

    def __add__(self, other: "BitString") -> "BitString":
        """Concatenation; self comes first."""
        return BitString(self._val | (other._val << self._len), self._len + other._len)

    def __xor__(self, other: "BitString") -> "BitString":
        if self._len != other._len:
            raise ValueError("xor requires equal lengths")
        return BitString(self._val ^ other._val, self._len)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BitString)
            and self._len == other._len
            and self._val == other._val
        )

    def __hash__(self) -> int:
        return hash((self._val, self._len))

    def __repr__(self) -> str:
        if self._len <= 64:
            return f"BitString('{self.to_01()}')"
        return f"BitString(<{self._len} bits>)"

    # -- arithmetic helpers ---------------------------------------------

    def weight(self) -> int:
        return self._val.bit_count()

    def hamming_distance(self, other: "BitString") -> int:
        if self._len != other._len:
            raise ValueError("distance requires equal lengths")
        return (self._val ^ other._val).bit_count()

    def flip(self, *indices: int) -> "BitString":
        v = self._val
        for i in indices:
            if not 0 <= i < self._len:
                raise IndexError(f"bit index {i} out of range")
            v ^= 1 << i
        return BitString(v, self._len)

    def set_slice(self, start: int, sub: "BitString") -> "BitString":
        """Return a copy with bits [start, start+len(sub)) replaced."""
        if start < 0 or start + len(sub) > self._len:
            raise IndexError("slice out of range")
        mask = ((1 << len(sub)) - 1) << start
        return BitString((self._val & ~mask) | (sub._val << start), self._len)

    def find(self, sub: "BitString") -> int:
        """First bit offset where `sub` occurs as a contiguous substring, or -1."""
        if len(sub) > self._len:
            return -1
        mask = (1 << len(sub)) - 1
        v = self._val
        for off in range(self._len - len(sub) + 1):
            if (v >> off) & mask == sub._val:
                return off
        return -1

    def blocks(self, n: int) -> "BlockView":
        return BlockView(self, n)


def concat(parts: Iterable[BitString]) -> BitString:
    val = 0
    length = 0
    for p in parts:
        val |= p.value << length
        length += len(p)
    return BitString(val, length)


class BlockView:
    """Non-overlapping n-bit blocks of a source string.

    Block ``t`` (0-indexed) covers bits ``[t*n, (t+1)*n)``.  Trailing bits
    that do not form a full block are never exposed.
    """

    __slots__ = ("source", "block_size_n", "count")

    def __init__(self, source: BitString, block_size_n: int):
        if block_size_n < 1:
            raise ValueError("block size must be >= 1")
        self.source = source
        self.block_size_n = block_size_n
        self.count = len(source) // block_size_n

    def __len__(self) -> int:
        return self.count

    def __getitem__(self, t: int) -> BitString:
        if not 0 <= t < self.count:
            raise IndexError(f"block {t} out of range [0, {self.count})")
        n = self.block_size_n
        return self.source[t * n : (t + 1) * n]

    def __iter__(self) -> Iterator[BitString]:
        for t in range(self.count):
            yield self[t]


# ---------------------------------------------------------------------------
# Closeness operations
# ---------------------------------------------------------------------------

def hamming_close(y: BitString, y2: BitString, delta: DeltaLike) -> int:
    """1 iff the strings have equal length and differ in at most a
    delta-fraction of positions.

    The threshold comparison is exact: ``diff * den <= num * |y|``.
    Length mismatch returns 0 (it is part of the predicate, not an error).
    """
    if len(y) != len(y2):
        return 0
    d = _as_fraction(delta)
    diff = y.hamming_distance(y2)
    return int(diff * d.denominator <= d.numerator * len(y))


def every_block_close(
    zeta_star: BitString, y: BitString, inner: "Predicate", n: int
) -> int:
    """Blockwise lifting of a predicate to consecutive n-bit blocks.

    Returns 0 unless ``|zeta_star|`` is a positive multiple of ``n``.
    Otherwise returns 1 iff some offset ``t`` into the blocks of ``y``
    aligns every block of ``zeta_star`` with an inner-close block of ``y``.
    """
    if len(zeta_star) == 0 or len(zeta_star) % n != 0:
        return 0
    zb = zeta_star.blocks(n)
    yb = y.blocks(n)
    r = zb.count
    if yb.count < r:
        return 0
    for t in range(yb.count - r + 1):
        if all(inner.evaluate(zb[j], yb[t + j]) for j in range(r)):
            return 1
    return 0


def block_equality_close(
    y: BitString, y2: BitString, delta: DeltaLike, ell: int
) -> int:
    """Sub-block closeness: the first ell-bit sub-block must match exactly,
    and at most a delta-fraction of the remaining sub-blocks may differ.

    Returns 0 on length mismatch or when ell does not divide the length.
    """
    if len(y) != len(y2) or len(y) == 0 or len(y) % ell != 0:
        return 0
    yb = y.blocks(ell)
    y2b = y2.blocks(ell)
    if yb[0] != y2b[0]:
        return 0
    rest = yb.count - 1
    diff = sum(1 for i in range(1, yb.count) if yb[i] != y2b[i])
    d = _as_fraction(delta)
    return int(diff * d.denominator <= d.numerator * rest)


# ---------------------------------------------------------------------------
# Predicate objects
# ---------------------------------------------------------------------------

class Predicate:
    """A two-input closeness predicate on bit strings."""

    def evaluate(self, a: BitString, b: BitString) -> int:
        raise NotImplementedError

    def __call__(self, a: BitString, b: BitString) -> int:
        return self.evaluate(a, b)


class Equality(Predicate):
    def evaluate(self, a: BitString, b: BitString) -> int:
        return int(a == b)

    def __repr__(self) -> str:
        return "Equality()"


class Hamming(Predicate):
    """Close iff equal length and at most a delta-fraction of bits differ."""

    def __init__(self, delta: DeltaLike):
        self.delta = _as_fraction(delta)
        if not 0 <= self.delta <= 1:
            raise ValueError("delta must lie in [0, 1]")

    def evaluate(self, a: BitString, b: BitString) -> int:
        return hamming_close(a, b, self.delta)

    def __repr__(self) -> str:
        return f"Hamming({self.delta})"


class BlockEquality(Predicate):
    """Close iff the first ell-bit sub-block matches exactly and at most a
    delta-fraction of the later sub-blocks differ."""

    def __init__(self, delta: DeltaLike, ell: int):
        self.delta = _as_fraction(delta)
        if not 0 <= self.delta <= 1:
            raise ValueError("delta must lie in [0, 1]")
        if ell < 1:
            raise ValueError("ell must be >= 1")
        self.ell = ell

    def evaluate(self, a: BitString, b: BitString) -> int:
        return block_equality_close(a, b, self.delta, self.ell)

    def __repr__(self) -> str:
        return f"BlockEquality({self.delta}, ell={self.ell})"


class EveryBlockClose(Predicate):
    """Lifts an inner predicate over consecutive n-bit blocks."""

    def __init__(self, inner: Predicate, n: int):
        if n < 1:
            raise ValueError("block size must be >= 1")
        self.inner = inner
        self.n = n

    def evaluate(self, a: BitString, b: BitString) -> int:
        return every_block_close(a, b, self.inner, self.n)

    def __repr__(self) -> str:
        return f"EveryBlockClose({self.inner!r}, n={self.n})"
