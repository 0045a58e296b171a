"""Difference-recovering sharp sketches for Hamming closeness.

A sketch of ``x`` is a syndrome of ``x`` under a linear code plus a keyed
collision-resistant digest of ``x``.  Given the sketch and any ``x'``
within Hamming distance ``r``, the exact ``x`` is recovered by decoding
the syndrome difference; the digest check (and an explicit weight check)
turn every decoding failure mode into a clean ``None`` instead of a
wrong answer.

The module also carries the generic boundary-walk recovery algorithm
that extracts a difference vector from any closeness oracle over hashes,
and the information-theoretic floor on sketch size used to sanity-check
shipped parameter sets.
"""
from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from typing import Callable, List, Optional

from .bits import BitString
from .codes import LinearCode, Syndrome

_CRHF_TAG = b"chainmark-crhf-v1:"


@dataclass(frozen=True)
class SharpSketchKey:
    """A sampled sketching function: linear code + keyed hash.

    ``r`` is the number of substitutions recovery must tolerate; it may
    not exceed the code's guaranteed decoding radius and must stay below
    half the input length for the close/far gap to make sense.
    """

    code: LinearCode
    crhf_key: bytes
    r: int
    n: int
    digest_bits: int = 256

    def __post_init__(self):
        if self.n != self.code.n:
            raise ValueError("input length must match code length")
        if not 1 <= self.r <= self.code.max_correctable:
            raise ValueError(
                f"r={self.r} outside the code's decoding radius "
                f"{self.code.max_correctable}"
            )
        if 2 * self.r >= self.n:
            raise ValueError("need r < n/2")
        if self.digest_bits % 8 or not 8 <= self.digest_bits <= 256:
            raise ValueError("digest_bits must be a multiple of 8 in [8, 256]")

    @property
    def sketch_bits(self) -> int:
        return self.code.redundancy + self.digest_bits

    def digest(self, x: BitString) -> bytes:
        h = hashlib.sha256(
            _CRHF_TAG
            + self.crhf_key
            + struct.pack("<I", len(x))
            + x.to_bytes()
        ).digest()
        return h[: self.digest_bits // 8]


@dataclass(frozen=True)
class Sketch:
    syndrome: Syndrome
    digest: bytes

    def size_bits(self) -> int:
        return len(self.syndrome) + 8 * len(self.digest)

    def serialize(self) -> bytes:
        """Syndrome bits then digest bytes, each length-prefixed."""
        syn = self.syndrome.bits
        return (
            struct.pack("<I", len(syn))
            + syn.to_bytes()
            + struct.pack("<I", len(self.digest))
            + self.digest
        )

    @classmethod
    def deserialize(cls, blob: bytes) -> "Sketch":
        (nbits,) = struct.unpack_from("<I", blob, 0)
        off = 4
        nbytes = (nbits + 7) // 8
        syn = BitString.from_bytes(blob[off : off + nbytes], nbits)
        off += nbytes
        (dlen,) = struct.unpack_from("<I", blob, off)
        off += 4
        return cls(Syndrome(syn), blob[off : off + dlen])


def sketch(key: SharpSketchKey, x: BitString) -> Sketch:
    if len(x) != key.n:
        raise ValueError(f"input length {len(x)} != {key.n}")
    return Sketch(key.code.syndrome(x), key.digest(x))


def sketch_recover(
    key: SharpSketchKey, z: Sketch, x_prime: BitString
) -> Optional[BitString]:
    """Recover the sketched input from any x' within distance r, else None.

    Decodes the syndrome difference to a candidate error vector, then
    insists on both the weight bound and the digest match before
    answering, so a miscorrected candidate can never escape.
    """
    if len(x_prime) != key.n:
        raise ValueError(f"input length {len(x_prime)} != {key.n}")
    diff = z.syndrome ^ key.code.syndrome(x_prime)
    e = key.code.decode_syndrome(diff, key.r)
    if e is None:
        return None
    if e.weight() > key.r:
        return None
    candidate = x_prime ^ e
    if key.digest(candidate) != z.digest:
        return None
    return candidate


# ---------------------------------------------------------------------------
# Generic boundary-walk difference recovery
# ---------------------------------------------------------------------------

def generic_pph_recover(
    eval_oracle: Callable[[object, object], int],
    hash_oracle: Callable[[BitString], object],
    z: object,
    x_prime: BitString,
    r: int,
    n: int,
    walk_log: Optional[List[BitString]] = None,
) -> Optional[BitString]:
    """Recover the bitwise difference x xor x' from a closeness oracle.

    ``eval_oracle(z, hash_oracle(candidate))`` must answer whether the
    hidden input is within distance r of the candidate, consistently for
    every query made here (the caller's obligation).  Returns the
    difference vector, or None when the initial evaluation says far.

    The walk flips coordinates one at a time until it crosses the
    closeness boundary; the last close point sits at distance exactly r
    from the hidden input, after which single-bit probes read off the
    difference support.  ``walk_log``, when supplied, collects the walk
    points for instrumentation.
    """
    if len(x_prime) != n:
        raise ValueError("x_prime length mismatch")
    if not 0 < r < n / 2:
        raise ValueError("need 0 < r < n/2")
    if not eval_oracle(z, hash_oracle(x_prime)):
        return None

    # boundary walk: zeta_j = x' xor e_1 xor ... xor e_j
    boundary = None
    zeta = x_prime
    if walk_log is not None:
        walk_log.append(zeta)
    for j in range(n):
        nxt = zeta.flip(j)
        if walk_log is not None:
            walk_log.append(nxt)
        if not eval_oracle(z, hash_oracle(nxt)):
            boundary = zeta
            break
        zeta = nxt
    if boundary is None:
        # cannot happen with a consistent oracle: the walk ends at the
        # complement of the start, which is far whenever r < n/2
        return None

    delta = BitString.zeros(n)
    for j in range(n):
        if eval_oracle(z, hash_oracle(boundary.flip(j))):
            delta = delta.flip(j)
    return delta ^ x_prime ^ boundary


def identity_pph(x: BitString, r: int, n: int):
    """The identity hash with an exact Hamming evaluator; the test
    instantiation for the generic recovery algorithm."""

    def hash_oracle(candidate: BitString) -> BitString:
        return candidate

    def eval_oracle(z: BitString, hashed: BitString) -> int:
        return int(z.hamming_distance(hashed) <= r)

    return eval_oracle, hash_oracle, x


# ---------------------------------------------------------------------------
# Size floor
# ---------------------------------------------------------------------------

def sketch_size_lower_bound(n: int, r: int) -> float:
    """log2 of the number of r-subsets of n positions: the floor on the
    bit-size of any sketch that recovers r substitutions."""
    if not 0 <= r <= n:
        raise ValueError("need 0 <= r <= n")
    return (
        math.lgamma(n + 1) - math.lgamma(r + 1) - math.lgamma(n - r + 1)
    ) / math.log(2)
