"""Attack simulation against the watermark, with full transcripts.

The harness plays the challenger's role: it owns the record of every
generation-oracle call, applies an attack to a recorded response, runs
public verification and recovery on the result, and evaluates closeness
of the attacked string to the transcript.  Closeness never enters the
verifier itself; only the harness, which holds the transcript, can
evaluate it.

The attacks are generic (bounded corruption, splicing, pure noise); no
cryptanalytic coverage is claimed, since resistance to key-dependent
forgery rests on the signature and hash assumptions rather than on an
empirically measurable rate.

Robustness-style claims (close inputs verify) and forgery-style claims
(far inputs do not) are always asserted separately, never as a
two-sided equivalence on one window size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Dict, List, Optional, Tuple

import numpy as np

from .bits import BitString, Hamming, every_block_close
from .lm import LanguageModel, Prng
from .sketch import SharpSketchKey, Sketch
from .watermark import (
    VerificationReport,
    WatermarkKeySet,
    wm_generate,
    wm_recover,
    wm_verify,
)


class AmbiguityDetected(Exception):
    """Two distinct candidates matched syndrome and digest: a hash
    collision at toy digest widths."""


@dataclass
class AttackTranscript:
    """Append-only record of oracle interactions, responses bit-exact."""

    entries: List[Tuple[BitString, BitString]] = field(default_factory=list)
    verify_calls: List[Tuple[BitString, VerificationReport]] = field(
        default_factory=list
    )

    def record_generation(self, prompt: BitString, response: BitString) -> None:
        self.entries.append((prompt, response))

    def record_verify(self, candidate: BitString, report) -> None:
        self.verify_calls.append((candidate, report))

    def responses(self) -> List[BitString]:
        return [y for _, y in self.entries]

    def contains_substring(self, xi: BitString, block_size: int) -> bool:
        """Is xi a bit-exact contiguous substring of some recorded response?

        Block-aligned offsets of every response are tried first (genuine
        recoveries land there, and the newest responses are the likely
        sources); the full bit-offset scan only backs a negative answer.
        """
        candidates = [y for y in reversed(self.responses()) if len(xi) <= len(y)]
        for y in candidates:
            for off in range(0, len(y) - len(xi) + 1, block_size):
                if y[off : off + len(xi)] == xi:
                    return True
        return any(y.find(xi) >= 0 for y in candidates)


@dataclass(frozen=True)
class AttackSpec:
    """One attack family and its parameters.

    kinds:
      flip_per_block        -- flip `count` random bits in every block except
                               the last (first sub-block spared); the final,
                               carrier-only block is scrambled within the
                               payload radius instead
      scramble_subblocks    -- fully scramble floor(fraction * carried)
                               carried sub-blocks per block, sparing the
                               first sub-block when preserve_first is set
      splice_into_random    -- plant the watermarked response inside
                               `padding_bits` of uniform noise at a random
                               bit offset
      pure_random           -- replace the response with `length` uniform
                               bits (no copying at all)
      cross_response_splice -- first block from one response, second block
                               from another
    """

    kind: str
    count: int = 0
    fraction: float = 0.0
    preserve_first: bool = True
    padding_bits: int = 0
    length: int = 0
    seed: int = 0

    KINDS = (
        "flip_per_block",
        "scramble_subblocks",
        "splice_into_random",
        "pure_random",
        "cross_response_splice",
    )

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if self.fraction < 0 or self.fraction > 1:
            raise ValueError("fraction must lie in [0, 1]")
        if self.count < 0 or self.padding_bits < 0 or self.length < 0:
            raise ValueError("attack parameters must be non-negative")


@dataclass
class AttackSummary:
    spec: AttackSpec
    trials: int
    accept_rate: float
    recover_exact_rate: float
    ebc_close_rate: float
    forged_entries: int
    transcript: AttackTranscript
    accept_flags: List[int] = field(default_factory=list)
    recover_flags: List[int] = field(default_factory=list)
    close_flags: List[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "attack": self.spec.kind,
            "trials": self.trials,
            "accept_rate": self.accept_rate,
            "recover_exact_rate": self.recover_exact_rate,
            "ebc_close_rate": self.ebc_close_rate,
            "forged_entries": self.forged_entries,
        }


def _scramble_subblock(rng: Prng, y: BitString, n: int, block: int, sub: int,
                       ell: int) -> BitString:
    return y.set_slice(block * n + sub * ell, rng.bits(ell))


def apply_attack(
    keys: WatermarkKeySet,
    spec: AttackSpec,
    response: BitString,
    other: Optional[BitString],
    rng: Prng,
) -> BitString:
    n = keys.n
    ell = keys.steg.ell
    blocks = len(response) // n
    if spec.kind == "pure_random":
        return rng.bits(spec.length or len(response))
    if spec.kind == "splice_into_random":
        pad = spec.padding_bits
        offset = rng.randrange(pad + 1)
        return rng.bits(offset) + response + rng.bits(pad - offset)
    if spec.kind == "cross_response_splice":
        assert other is not None and len(other) >= 2 * n
        return response[0:n] + other[n : 2 * n]
    if spec.kind == "flip_per_block":
        if spec.count > n - ell:
            raise ValueError("flip count exceeds block geometry")
        out = response
        for b in range(blocks - 1):
            lo = b * n + ell
            idxs = [lo + i for i in rng.sample_without_replacement(n - ell, spec.count)]
            out = out.flip(*idxs)
        for _ in range(keys.steg.payload_radius):
            sub = 1 + rng.randrange(keys.steg.carried_bits)
            out = _scramble_subblock(rng, out, n, blocks - 1, sub, ell)
        return out
    if spec.kind == "scramble_subblocks":
        carried = keys.steg.carried_bits
        per_block = int(spec.fraction * carried)
        out = response
        for b in range(blocks):
            subs = rng.sample_without_replacement(carried, min(per_block, carried))
            for s in subs:
                sub = s + 1 if spec.preserve_first else s
                out = _scramble_subblock(rng, out, n, b, sub, ell)
        return out
    raise AssertionError(spec.kind)


def run_attack(
    keys: WatermarkKeySet,
    model: LanguageModel,
    spec: AttackSpec,
    trials: int,
    num_blocks: int = 3,
    rng: Optional[Prng] = None,
    inner_delta: Optional[Fraction] = None,
) -> AttackSummary:
    """Generate, attack, verify, recover; rates over all trials.

    Every response flows through the recorded oracle; recovery outputs are
    judged against the transcript: a trial counts toward
    recover_exact_rate only when recovery returned something and every
    entry is a bit-exact substring of a recorded response of the right
    length.  EBC closeness uses the sketch-layer Hamming radius unless an
    explicit inner delta is supplied.
    """
    if rng is None:
        rng = Prng(b"attack-" + spec.kind.encode() + bytes([spec.seed & 0xFF]))
    n = keys.n
    vk = keys.verification_key
    delta = inner_delta if inner_delta is not None else Fraction(
        keys.rds.sketch_key.r, n
    )
    inner = Hamming(delta)
    transcript = AttackTranscript()
    accepts = 0
    exact = 0
    close = 0
    forged = 0
    accept_flags: List[int] = []
    recover_flags: List[int] = []
    close_flags: List[int] = []
    for t in range(trials):
        trial_rng = rng.fork(f"trial-{t}")
        prompt = trial_rng.bits(16)
        y = wm_generate(keys, model, prompt, num_blocks, trial_rng)
        transcript.record_generation(prompt, y)
        other = None
        if spec.kind == "cross_response_splice":
            prompt2 = trial_rng.bits(16)
            other = wm_generate(keys, model, prompt2, num_blocks, trial_rng)
            transcript.record_generation(prompt2, other)
        zeta = apply_attack(keys, spec, y, other, trial_rng)

        report = wm_verify(vk, zeta)
        transcript.record_verify(zeta, report)
        accepts += report.accepted
        accept_flags.append(report.accepted)

        recs = wm_recover(vk, zeta)
        trial_ok = len(recs) > 0
        for entry in recs:
            if len(entry.bits) != (entry.chain_r - 1) * n or not (
                transcript.contains_substring(entry.bits, n)
            ):
                forged += 1
                trial_ok = False
        exact += trial_ok
        recover_flags.append(int(trial_ok))

        is_close = int(
            any(
                every_block_close(zeta, resp, inner, n)
                for resp in reversed(transcript.responses())
            )
        )
        close += is_close
        close_flags.append(is_close)
    return AttackSummary(
        spec=spec,
        trials=trials,
        accept_rate=accepts / trials,
        recover_exact_rate=exact / trials,
        ebc_close_rate=close / trials,
        forged_entries=forged,
        transcript=transcript,
        accept_flags=accept_flags,
        recover_flags=recover_flags,
        close_flags=close_flags,
    )


# ---------------------------------------------------------------------------
# Brute-force sketch oracle
# ---------------------------------------------------------------------------

_ORACLE_CACHE: Dict[SharpSketchKey, Tuple[List[int], Dict[int, List[int]]]] = {}


def _unit_syndromes(key: SharpSketchKey) -> Tuple[List[int], Dict[int, List[int]]]:
    """Per-unit-vector syndromes plus a value -> positions index."""
    if key not in _ORACLE_CACHE:
        rows = key.code.parity_rows()
        cols = [0] * key.n
        for j, row in enumerate(rows):
            v = row
            while v:
                i = (v & -v).bit_length() - 1
                cols[i] |= 1 << j
                v &= v - 1
        lookup: Dict[int, List[int]] = {}
        for i, c in enumerate(cols):
            lookup.setdefault(c, []).append(i)
        _ORACLE_CACHE[key] = (cols, lookup)
    return _ORACLE_CACHE[key]


def brute_force_sketch_oracle(
    key: SharpSketchKey, z: Sketch, x_prime: BitString, r: int
) -> Optional[BitString]:
    """Exhaustively search every candidate within Hamming radius r of x'.

    Returns the unique candidate whose syndrome and digest both match the
    sketch, None if there is none, and raises AmbiguityDetected if two
    match.  Independent of the algebraic decoding path by construction:
    weight-2 patterns are enumerated through an exact value index over
    unit-vector syndromes, everything else literally.
    """
    if len(x_prime) != key.n:
        raise ValueError("x_prime length mismatch")
    target = z.syndrome.bits.value ^ key.code.syndrome(x_prime).bits.value
    cols, lookup = _unit_syndromes(key)

    matches: List[BitString] = []

    def _try(idxs: Tuple[int, ...]) -> None:
        cand = x_prime.flip(*idxs) if idxs else x_prime
        if key.digest(cand) == z.digest:
            matches.append(cand)

    if target == 0:
        _try(())
    if r >= 1:
        for i in lookup.get(target, ()):
            _try((i,))
    if r >= 2:
        for i in range(key.n):
            for j in lookup.get(target ^ cols[i], ()):
                if j > i:
                    _try((i, j))
    if r >= 3:
        if key.n > 64:
            raise ValueError("weight >= 3 exhaustive search supported for n <= 64")
        for w in range(3, r + 1):
            for idxs in combinations(range(key.n), w):
                acc = 0
                for i in idxs:
                    acc ^= cols[i]
                if acc == target:
                    _try(idxs)

    if len(matches) > 1:
        raise AmbiguityDetected(
            f"{len(matches)} candidates share syndrome and digest"
        )
    return matches[0] if matches else None


# ---------------------------------------------------------------------------
# Undetectability proxy
# ---------------------------------------------------------------------------

def undetectability_test(
    keys: WatermarkKeySet,
    model: LanguageModel,
    samples: int,
    rng: Optional[Prng] = None,
    num_blocks: int = 2,
) -> Dict[str, float]:
    """Desk-scale distinguisher proxy: marginal bit frequency (chi-square)
    and lag-1 autocorrelation of embedded output.

    Full undetectability is a computational claim about oracles; this
    measures the observable first-order statistics only.
    """
    if rng is None:
        rng = Prng(b"undetectability")
    n = keys.n
    total = 0
    ones = 0
    agree = 0
    pairs = 0
    chunk_fractions: List[float] = []
    while total < samples:
        prompt = rng.bits(8)
        y = wm_generate(keys, model, prompt, num_blocks, rng)
        arr = np.unpackbits(
            np.frombuffer(y.to_bytes(), dtype=np.uint8), bitorder="little"
        )[: len(y)]
        total += len(arr)
        ones += int(arr.sum())
        agree += int((arr[:-1] == arr[1:]).sum())
        pairs += len(arr) - 1
        chunk_fractions.append(float(arr.mean()))
    chi2 = (2 * ones - total) ** 2 / total
    chi_square_p = math.erfc(math.sqrt(chi2 / 2))
    # under the null, adjacent bits agree with probability 1/2
    autocorr = 2 * agree / pairs - 1
    autocorr_sigma = abs(agree - pairs / 2) / math.sqrt(pairs / 4)
    return {
        "bits": float(total),
        "responses": float(len(chunk_fractions)),
        "ones_fraction": ones / total,
        "chi_square_p": chi_square_p,
        "autocorr_lag1": autocorr,
        "autocorr_sigma": autocorr_sigma,
        "chunk_fractions": chunk_fractions,
    }
