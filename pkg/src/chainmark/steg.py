"""Block steganography by hash-conditioned rejection sampling.

One n-bit block is generated as n/ell sub-blocks of ell bits.  The first
sub-block is sampled freely and seeds a keyed mask; the remaining
sub-blocks are resampled from the model until a keyed one-bit hash of
each equals the next bit of the masked, error-corrected payload.  The
decoder recomputes the hashes and mask from the block alone -- neither
the model nor the generation context is needed, because the hashes
depend only on the key seed and the sub-block value.

Decoding is exposed both per-block (:func:`steg_dec`) and as a bulk scan
over every bit offset of a long string (:func:`steg_scan`), which the
watermark layer uses for sliding-window verification.  The scan has a
vectorized path for ell in {4, 8}; hash values are table lookups because
a sub-block has only 2^ell possible values.
"""
from __future__ import annotations

import hashlib
import math
import struct
from typing import Dict, List, Optional

import numpy as np

from .bits import BitString, BlockEquality
from .codes import LinearCode, RepetitionCode
from .lm import LanguageModel, Prng, SamplerState, min_entropy_per_block

_H1_TAG = b"chainmark-steg-h1:"
_H2_TAG = b"chainmark-steg-h2:"


class EmbedFailure(Exception):
    """A sub-block exhausted its rejection budget: the model is not
    supplying the entropy the embedding relies on."""


class StegKey:
    """Key material and geometry for one block-steganography instance.

    Instances are immutable after construction.  In public-key mode the
    seed is part of the verification key (decoding needs it); secret-key
    mode is the same scheme with the seed withheld from the adversary
    interface.
    """

    def __init__(
        self,
        r_seed: bytes,
        n: int,
        ell: int,
        payload_code: LinearCode,
        entropy_floor: float = 1.0,
        retry_cap: Optional[int] = None,
        _h1_tag: bytes = _H1_TAG,
        _h2_tag: bytes = _H2_TAG,
    ):
        if n % ell:
            raise ValueError("ell must divide n")
        if ell < 1 or ell > 16:
            raise ValueError("ell must lie in [1, 16]")
        if payload_code.n != n // ell - 1:
            raise ValueError(
                f"payload code length {payload_code.n} != n/ell - 1 = {n // ell - 1}"
            )
        self.r_seed = r_seed
        self.n = n
        self.ell = ell
        self.payload_code = payload_code
        self.capacity_k = payload_code.k
        self.entropy_floor = entropy_floor
        self.retry_cap = (
            retry_cap
            if retry_cap is not None
            else math.ceil(64 * 2 ** (ell - entropy_floor))
        )
        self._h1_tag = _h1_tag
        self._h2_tag = _h2_tag
        self._h1_lut: Optional[np.ndarray] = None
        self._h2_lut: Optional[np.ndarray] = None

    # -- derived robustness figures -------------------------------------

    @property
    def carried_bits(self) -> int:
        """Sub-blocks that carry payload bits: n/ell - 1."""
        return self.n // self.ell - 1

    @property
    def payload_radius(self) -> int:
        """Sub-block corruptions (first sub-block intact) that decoding is
        guaranteed to correct, from the payload code's distance."""
        return (self.payload_code.min_distance_bound - 1) // 2

    @property
    def delta_max(self):
        """The guaranteed corruption fraction of the sub-block closeness
        predicate, derived from the payload code rather than assumed."""
        from fractions import Fraction

        return Fraction(self.payload_radius, self.carried_bits)

    @property
    def robust_predicate(self) -> BlockEquality:
        return BlockEquality(self.delta_max, self.ell)

    # -- keyed hash tables ----------------------------------------------

    def _h1(self) -> np.ndarray:
        # Keyed, exactly balanced bit function: rank the 2^ell sub-block
        # values by their keyed hash and give each half one bit value.
        # Plain hash bits would leave the two preimage sets binomially
        # unbalanced, which at small ell biases the conditional sub-block
        # distribution enough to show up in first-order statistics.
        if self._h1_lut is None:
            count = 1 << self.ell
            scores = []
            for v in range(count):
                h = hashlib.sha256(
                    self._h1_tag + self.r_seed + struct.pack("<BH", self.ell, v)
                ).digest()
                scores.append((h, v))
            scores.sort()
            lut = np.zeros(count, dtype=np.uint8)
            for _, v in scores[count // 2 :]:
                lut[v] = 1
            self._h1_lut = lut
        return self._h1_lut

    def _h2(self) -> np.ndarray:
        if self._h2_lut is None:
            L = self.carried_bits
            nbytes = (L + 7) // 8
            rows = np.empty((1 << self.ell, L), dtype=np.uint8)
            for v in range(1 << self.ell):
                stream = b""
                ctr = 0
                base = self._h2_tag + self.r_seed + struct.pack("<BH", self.ell, v)
                while len(stream) < nbytes:
                    stream += hashlib.sha256(base + struct.pack("<I", ctr)).digest()
                    ctr += 1
                rows[v] = np.unpackbits(
                    np.frombuffer(stream[:nbytes], dtype=np.uint8), bitorder="little"
                )[:L]
            self._h2_lut = rows
        return self._h2_lut

    def __repr__(self) -> str:
        return (
            f"StegKey(n={self.n}, ell={self.ell}, capacity={self.capacity_k}, "
            f"radius={self.payload_radius})"
        )


class EmbedResult:
    """An embedded block plus per-sub-block rejection counts (diagnostics
    for the carried sub-blocks, in order)."""

    __slots__ = ("block", "attempts")

    def __init__(self, block: BitString, attempts: List[int]):
        self.block = block
        self.attempts = attempts


def steg_gen(
    lambda_bits: int,
    params: dict,
    rng: Prng,
    entropy_floor: float = 1.0,
    retry_cap: Optional[int] = None,
) -> StegKey:
    """Sample a key: a lambda-bit seed plus the block geometry.

    ``params`` needs n and ell, and either a ``code`` instance or a
    ``payload_rep`` repetition factor for the default payload code.
    """
    n, ell = params["n"], params["ell"]
    code = params.get("code")
    if code is None:
        length = n // ell - 1
        code = RepetitionCode(length, length // params["payload_rep"])
    return StegKey(
        r_seed=rng.bytes((lambda_bits + 7) // 8),
        n=n,
        ell=ell,
        payload_code=code,
        entropy_floor=entropy_floor,
        retry_cap=retry_cap,
    )


def steg_embed(
    key: StegKey,
    model: LanguageModel,
    context: BitString,
    m: BitString,
    rng: Prng,
) -> EmbedResult:
    """Embed a capacity_k-bit message into one freshly generated block."""
    if len(m) != key.capacity_k:
        raise ValueError(f"message length {len(m)} != capacity {key.capacity_k}")
    if min_entropy_per_block(model, key.ell) < key.entropy_floor:
        raise EmbedFailure(
            f"model min-entropy per {key.ell}-bit sub-block is below the "
            f"configured floor {key.entropy_floor}"
        )
    h1 = key._h1()
    h2 = key._h2()

    session = SamplerState(model=model, rng=rng, context=context)
    y1 = session.draw(key.ell)
    session.commit(y1)

    codeword = key.payload_code.encode(m)
    cbits = np.unpackbits(
        np.frombuffer(codeword.to_bytes(), dtype=np.uint8), bitorder="little"
    )[: key.carried_bits]
    masked = cbits ^ h2[y1.value]

    if model.kind == "uniform":
        values, attempts = _rejection_sample_uniform(key, masked, rng)
        return EmbedResult(block=y1 + _pack_values(key.ell, values), attempts=attempts)

    parts = [y1]
    attempts = []
    for i in range(key.carried_bits):
        target = masked[i]
        tries = 0
        while True:
            tries += 1
            if tries > key.retry_cap:
                raise EmbedFailure(
                    f"sub-block {i + 2} exceeded the retry cap {key.retry_cap}"
                )
            cand = session.draw(key.ell)
            if h1[cand.value] == target:
                break
        session.commit(cand)
        parts.append(cand)
        attempts.append(tries)

    from .bits import concat

    return EmbedResult(block=concat(parts), attempts=attempts)


def _pack_values(ell: int, values: np.ndarray) -> BitString:
    """Concatenate ell-bit sub-block values into one string."""
    count = len(values)
    if ell == 8:
        return BitString.from_bytes(values.astype(np.uint8).tobytes(), 8 * count)
    if ell == 4:
        nib = values.astype(np.uint8)
        even = nib[0::2]
        odd = nib[1::2]
        if len(odd) < len(even):
            odd = np.append(odd, np.uint8(0))
        return BitString.from_bytes((even | (odd << 4)).tobytes(), 4 * count)
    val = 0
    for i, v in enumerate(values):
        val |= int(v) << (i * ell)
    return BitString(val, ell * count)


def _rejection_sample_uniform(key: StegKey, targets: np.ndarray, rng: Prng):
    """Rejection-sample all carried sub-blocks in vectorized rounds.

    Valid only for the uniform model, where candidate draws do not depend
    on context: each position independently takes the first of its own
    iid uniform draws whose keyed hash bit matches, which is the same
    distribution the sequential loop produces.
    """
    h1 = key._h1()
    L = key.carried_bits
    values = np.zeros(L, dtype=np.uint16)
    attempts = np.zeros(L, dtype=np.int64)
    pending = np.arange(L, dtype=np.int64)
    mask = (1 << key.ell) - 1
    nbytes = 1 if key.ell <= 8 else 2
    round_no = 0
    while len(pending):
        round_no += 1
        if round_no > key.retry_cap:
            raise EmbedFailure(
                f"{len(pending)} sub-blocks exceeded the retry cap {key.retry_cap}"
            )
        raw = np.frombuffer(rng.bytes(nbytes * len(pending)), dtype=np.uint8)
        if nbytes == 2:
            draws = (raw[0::2].astype(np.uint16) | (raw[1::2].astype(np.uint16) << 8)) & mask
        else:
            draws = raw & mask
        ok = h1[draws] == targets[pending]
        hit = pending[ok]
        values[hit] = draws[ok]
        attempts[hit] = round_no
        pending = pending[~ok]
    return values, [int(a) for a in attempts]


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------

def _subblock_values(key: StegKey, zeta: BitString) -> np.ndarray:
    """Values of the n/ell aligned sub-blocks of an n-bit block."""
    raw = np.frombuffer(zeta.to_bytes(), dtype=np.uint8)
    if key.ell == 8:
        return raw[: key.n // 8]
    if key.ell == 4:
        vals = np.empty(2 * len(raw), dtype=np.uint8)
        vals[0::2] = raw & 15
        vals[1::2] = raw >> 4
        return vals[: key.n // 4]
    count = key.n // key.ell
    return np.array(
        [zeta[i * key.ell : (i + 1) * key.ell].value for i in range(count)],
        dtype=np.int64,
    )


def steg_dec(key: StegKey, zeta: BitString) -> Optional[BitString]:
    """Decode one n-bit block; None when the payload vote is ambiguous."""
    if len(zeta) != key.n:
        raise ValueError(f"input length {len(zeta)} != {key.n}")
    vals = _subblock_values(key, zeta)
    cbits = key._h1()[vals[1:]]
    u = cbits ^ key._h2()[vals[0]]
    code = key.payload_code
    if isinstance(code, RepetitionCode):
        votes = np.bincount(code._class, weights=u, minlength=code.k).astype(np.int64)
        return code.decode_votes(votes)
    return code.decode(
        BitString.from_bytes(np.packbits(u, bitorder="little").tobytes(), len(u))
    )


def steg_scan(key: StegKey, zeta: BitString) -> Dict[int, BitString]:
    """Decode the n-bit window at every bit offset of ``zeta``.

    Returns {offset: message} for each window that decodes.  Windows
    whose payload vote ties anywhere are dropped, which at repetition
    factor >= 2 rejects virtually every window that is not aligned with
    an embedded block, so the result stays sparse on long inputs.
    """
    total = len(zeta)
    if total < key.n:
        return {}
    if key.ell in (4, 8) and isinstance(key.payload_code, RepetitionCode):
        return _scan_fast(key, zeta)
    out: Dict[int, BitString] = {}
    for p in range(total - key.n + 1):
        m = steg_dec(key, zeta[p : p + key.n])
        if m is not None:
            out[p] = m
    return out


def _phase_values(key: StegKey, zeta: BitString, phase: int) -> np.ndarray:
    """Sub-block values at bit positions phase, phase+ell, ... of zeta."""
    shifted = zeta.value >> phase
    nbits = len(zeta) - phase
    raw = np.frombuffer(
        shifted.to_bytes((nbits + 7) // 8 or 1, "little"), dtype=np.uint8
    )
    if key.ell == 8:
        return raw[: nbits // 8]
    vals = np.empty(2 * len(raw), dtype=np.uint8)
    vals[0::2] = raw & 15
    vals[1::2] = raw >> 4
    return vals[: nbits // 4]


def _scan_fast(key: StegKey, zeta: BitString) -> Dict[int, BitString]:
    code: RepetitionCode = key.payload_code  # type: ignore[assignment]
    h1 = key._h1()
    h2 = key._h2()
    L = key.carried_bits
    total = len(zeta)
    out: Dict[int, BitString] = {}

    # positions of the copies of each message-bit class within the payload
    class_of = code._class
    copies = code._copies
    # filter on classes that can tie (even copy count), a few are enough
    filter_classes = [int(j) for j in np.nonzero(copies % 2 == 0)[0][:48]]
    positions_by_class = {
        j: np.nonzero(class_of == j)[0].astype(np.int64) for j in filter_classes
    }

    for phase in range(key.ell):
        vals = _phase_values(key, zeta, phase)
        subcount = key.n // key.ell
        # window q sits at bit offset phase + ell*q and needs n more bits
        q_count = (total - key.n - phase) // key.ell + 1 if total - key.n >= phase else 0
        q_count = min(q_count, len(vals) - subcount + 1)
        if q_count <= 0:
            continue
        c_all = h1[vals].astype(np.uint8)
        first_vals = vals[:q_count]

        alive = np.arange(q_count, dtype=np.int64)
        if code.min_distance_bound >= 2:
            for j in filter_classes:
                if len(alive) == 0:
                    break
                pos = positions_by_class[j]
                votes = np.zeros(len(alive), dtype=np.int64)
                fv = first_vals[alive]
                for p in pos:
                    votes += c_all[alive + 1 + p] ^ h2[fv, p]
                alive = alive[2 * votes != copies[j]]

        for q in alive:
            q = int(q)
            u = c_all[q + 1 : q + 1 + L] ^ h2[vals[q]]
            votes = np.bincount(class_of, weights=u, minlength=code.k).astype(np.int64)
            m = code.decode_votes(votes)
            if m is not None:
                out[phase + key.ell * q] = m
    return out


# ---------------------------------------------------------------------------
# Response generation helper shared with the watermark layer
# ---------------------------------------------------------------------------

def embed_session(
    key: StegKey, model: LanguageModel, prompt: BitString, rng: Prng
) -> "EmbedSession":
    return EmbedSession(key, model, prompt, rng)


class EmbedSession:
    """Sequential block embedding with the growing context the scheme
    requires: each block is generated conditioned on the prompt plus all
    previously emitted blocks."""

    def __init__(self, key: StegKey, model: LanguageModel, prompt: BitString, rng: Prng):
        self.key = key
        self.model = model
        self.rng = rng
        self.context = prompt
        self.blocks: List[BitString] = []
        self.attempt_log: List[List[int]] = []

    def embed_block(self, m: BitString) -> BitString:
        res = steg_embed(self.key, self.model, self.context, m, self.rng)
        self.context = self.context + res.block
        self.blocks.append(res.block)
        self.attempt_log.append(res.attempts)
        return res.block
