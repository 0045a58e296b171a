"""The full watermarking scheme: chained robust signatures inside
steganographic blocks.

Generation emits n-bit blocks where block t (t >= 2) carries a robust
signature of block t-1; the first block carries a fresh random message.
Verification slides an n-bit decode window over every bit offset of the
candidate string, extracts embedded signatures, and accepts when some
window pair (message block, decoded signature) verifies.  Chain
verification demands r-1 consecutive verifying pairs.  Recovery runs the
same machinery for every chain size and window, collecting the bit-exact
signed blocks it can reconstruct.

A robustness-only baseline (every block carries the constant message 1,
acceptance is "anything decodes") is included for comparison; it has no
false-positive or recovery guarantee by construction.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .bits import BitString, concat
from .codes import RepetitionCode, Syndrome, bch_code
from .lm import LanguageModel, Prng
from .rds import RdsKeypair, RdsPublicKey, RobustSignature, rds_gen, rds_recover, rds_sign
from .sketch import Sketch, sketch_size_lower_bound
from .steg import EmbedSession, StegKey, steg_scan
from . import signer as _signer

_WIRE_PREFIX_BITS = 16


class PresetInfeasible(Exception):
    """The robust signature does not fit the block's embedding capacity."""


@dataclass(frozen=True)
class Preset:
    name: str
    n: int
    ell: int
    r_sketch: int
    payload_rep: int
    signer_scheme: str
    digest_bits: int
    bch_m: int
    seed_bits: int = 256


PRESETS: Dict[str, Preset] = {
    "desk-default": Preset(
        name="desk-default",
        n=32768,
        ell=8,
        r_sketch=8,
        payload_rep=4,
        signer_scheme="ed25519",
        digest_bits=256,
        bch_m=16,
    ),
    "unit-tiny": Preset(
        name="unit-tiny",
        n=512,
        ell=4,
        r_sketch=2,
        payload_rep=1,
        signer_scheme="mac64",
        digest_bits=24,
        bch_m=10,
    ),
    # negative fixture: the digest alone overflows the embedding capacity
    "tiny-infeasible": Preset(
        name="tiny-infeasible",
        n=512,
        ell=4,
        r_sketch=2,
        payload_rep=1,
        signer_scheme="mac64",
        digest_bits=256,
        bch_m=10,
    ),
}


def _resolve_preset(preset) -> Preset:
    if isinstance(preset, Preset):
        return preset
    try:
        return PRESETS[preset]
    except KeyError:
        raise ValueError(
            f"unknown preset {preset!r}; have {sorted(PRESETS)}"
        ) from None


@dataclass(frozen=True)
class WatermarkVerifyKey:
    """Public-mode verification key: steganography seed material plus the
    robust-signature public key.  Contains no signing secrets."""

    steg: StegKey
    rds_pub: RdsPublicKey
    preset: Preset

    @property
    def n(self) -> int:
        return self.steg.n

    @property
    def sigma_bits(self) -> int:
        return self.rds_pub.signature_bits

    @property
    def wire_bits(self) -> int:
        return _WIRE_PREFIX_BITS + self.sigma_bits


@dataclass(frozen=True)
class WatermarkKeySet:
    """Generation-side bundle: the steg key and the full signature keypair.

    The verification key is the strict subset a verifier needs; exposing
    it does not expose signing capability.
    """

    steg: StegKey
    rds: RdsKeypair
    preset: Preset

    @property
    def n(self) -> int:
        return self.steg.n

    @property
    def verification_key(self) -> WatermarkVerifyKey:
        return WatermarkVerifyKey(
            steg=self.steg, rds_pub=self.rds.public, preset=self.preset
        )

    @property
    def generation_key(self) -> "WatermarkKeySet":
        return self


def params_summary(preset) -> dict:
    """Size accounting for a preset: capacity, sketch and signature sizes,
    slack, and the information-theoretic sketch-size floor check."""
    p = _resolve_preset(preset)
    code = bch_code(m=p.bch_m, n=p.n, t=p.r_sketch)
    carried = p.n // p.ell - 1
    payload = RepetitionCode(carried, carried // p.payload_rep)
    sketch_bits = code.redundancy + p.digest_bits
    sigma_bits = sketch_bits + _signer.sig_bits(p.signer_scheme)
    wire_bits = _WIRE_PREFIX_BITS + sigma_bits
    capacity = payload.k
    bound = sketch_size_lower_bound(p.n, p.r_sketch)
    return {
        "preset": p.name,
        "n": p.n,
        "ell": p.ell,
        "r_sketch": p.r_sketch,
        "payload_rep": p.payload_rep,
        "carried_subblocks": carried,
        "capacity_bits": capacity,
        "syndrome_bits": code.redundancy,
        "digest_bits": p.digest_bits,
        "sketch_bits": sketch_bits,
        "signer_scheme": p.signer_scheme,
        "inner_signature_bits": _signer.sig_bits(p.signer_scheme),
        "sigma_bits": sigma_bits,
        "wire_bits": wire_bits,
        "capacity_slack_bits": capacity - wire_bits,
        "capacity_ok": capacity >= wire_bits,
        "sketch_size_lower_bound_bits": bound,
        "lower_bound_ok": sketch_bits >= bound,
        "payload_radius_subblocks": payload.max_correctable,
    }


def wm_gen(preset, rng: Prng) -> WatermarkKeySet:
    """Generate a key set, rejecting any preset whose signature cannot fit
    the per-block embedding capacity."""
    p = _resolve_preset(preset)
    summary = params_summary(p)
    if not summary["capacity_ok"]:
        raise PresetInfeasible(
            f"preset {p.name!r}: signature wire size {summary['wire_bits']} bits "
            f"exceeds embedding capacity {summary['capacity_bits']} bits"
        )
    code = bch_code(m=p.bch_m, n=p.n, t=p.r_sketch)
    carried = p.n // p.ell - 1
    payload = RepetitionCode(carried, carried // p.payload_rep)
    steg = StegKey(
        r_seed=rng.bytes(p.seed_bits // 8),
        n=p.n,
        ell=p.ell,
        payload_code=payload,
    )
    rds = rds_gen(
        {"n": p.n, "r": p.r_sketch},
        rng,
        scheme=p.signer_scheme,
        digest_bits=p.digest_bits,
        code=code,
    )
    return WatermarkKeySet(steg=steg, rds=rds, preset=p)


# ---------------------------------------------------------------------------
# Signature <-> steg message wire format
# ---------------------------------------------------------------------------

def sigma_to_message(keys, sigma: RobustSignature) -> BitString:
    """Fixed-width embedding form: 16-bit body length, syndrome bits,
    digest bits, inner signature bits, zero padding to capacity."""
    capacity = keys.steg.capacity_k
    body = sigma.z.syndrome.bits + BitString.from_bytes(sigma.z.digest) + sigma.tau
    wire = BitString(len(body), _WIRE_PREFIX_BITS) + body
    if len(wire) > capacity:
        raise PresetInfeasible(
            f"serialized signature ({len(wire)} bits) exceeds capacity {capacity}"
        )
    return wire + BitString.zeros(capacity - len(wire))


def sigma_from_message(
    vk: WatermarkVerifyKey, m: BitString
) -> Optional[RobustSignature]:
    """Parse an embedded message back into a signature; None on any shape
    mismatch (the usual fate of a decoded non-watermarked window)."""
    syn_bits = vk.rds_pub.sketch_key.code.redundancy
    dig_bits = vk.rds_pub.sketch_key.digest_bits
    tau_bits = vk.rds_pub.sig_len
    expect = syn_bits + dig_bits + tau_bits
    if len(m) < _WIRE_PREFIX_BITS + expect:
        return None
    if m[0:_WIRE_PREFIX_BITS].value != expect:
        return None
    off = _WIRE_PREFIX_BITS
    syn = m[off : off + syn_bits]
    off += syn_bits
    digest = m[off : off + dig_bits].to_bytes()
    off += dig_bits
    tau = m[off : off + tau_bits]
    return RobustSignature(z=Sketch(Syndrome(syn), digest), tau=tau)


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

def wm_generate(
    keys: WatermarkKeySet,
    model: LanguageModel,
    prompt: BitString,
    num_blocks: int,
    rng: Prng,
) -> BitString:
    """Generate num_blocks chained watermarked blocks for the prompt."""
    if num_blocks < 1:
        raise ValueError("num_blocks must be >= 1")
    session = EmbedSession(keys.steg, model, prompt, rng)
    session.embed_block(BitString.random(keys.steg.capacity_k, rng))
    for _ in range(2, num_blocks + 1):
        sigma = rds_sign(keys.rds, session.blocks[-1])
        session.embed_block(sigma_to_message(keys, sigma))
    return concat(session.blocks)


def wm_generate_baseline(
    keys: WatermarkKeySet,
    model: LanguageModel,
    prompt: BitString,
    num_blocks: int,
    rng: Prng,
    done_pattern: Optional[BitString] = None,
) -> BitString:
    """Robustness-only baseline: every block embeds the constant message 1.

    With ``done_pattern`` set, generation stops at the first block
    containing the pattern and truncates just before it; by default an
    explicit block-count target is used.
    """
    if num_blocks < 1:
        raise ValueError("num_blocks must be >= 1")
    session = EmbedSession(keys.steg, model, prompt, rng)
    message = BitString(1, keys.steg.capacity_k)
    out: List[BitString] = []
    for _ in range(num_blocks):
        block = session.embed_block(message)
        if done_pattern is not None:
            at = block.find(done_pattern)
            if at >= 0:
                out.append(block[:at])
                break
        out.append(block)
    return concat(out)


# ---------------------------------------------------------------------------
# Verification and recovery
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VerificationReport:
    accepted: int
    matched_offset: Optional[int]
    chain_length_r: int
    reason: Optional[str] = None

    def __post_init__(self):
        assert (self.accepted == 1) == (self.matched_offset is not None)


@dataclass(frozen=True)
class RecoveryEntry:
    bits: BitString
    offset: int
    chain_r: int


@dataclass
class RecoveryList:
    entries: List[RecoveryEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def contents(self) -> List[BitString]:
        return [e.bits for e in self.entries]


class _WindowScan:
    """Shared verification state over one candidate string.

    ``steg_scan`` decodes the n-bit window at every bit offset once; the
    pair check (recover the block at offset p against the signature
    decoded at p + n) is memoized because every chain size reuses it.

    A stride > 1 restricts decoding to window offsets divisible by the
    stride.  Stride n is the fast block-aligned mode; it weakens the
    any-substring quantifier, which is why it is off by default.
    """

    def __init__(self, vk: WatermarkVerifyKey, zeta: BitString, stride: int = 1):
        self.vk = vk
        self.zeta = zeta
        self.n = vk.n
        if stride < 1:
            raise ValueError("stride must be >= 1")
        if stride == 1:
            self.decoded = steg_scan(vk.steg, zeta)
        else:
            from .steg import steg_dec

            self.decoded = {}
            for p in range(0, len(zeta) - vk.n + 1, stride):
                m = steg_dec(vk.steg, zeta[p : p + vk.n])
                if m is not None:
                    self.decoded[p] = m
        self._sigma_cache: Dict[int, Optional[RobustSignature]] = {}
        self._pair_cache: Dict[int, Optional[BitString]] = {}

    def sigma_at(self, offset: int) -> Optional[RobustSignature]:
        if offset not in self._sigma_cache:
            msg = self.decoded.get(offset)
            self._sigma_cache[offset] = (
                None if msg is None else sigma_from_message(self.vk, msg)
            )
        return self._sigma_cache[offset]

    def pair(self, p: int) -> Optional[BitString]:
        """Recovered original of the block at offset p, or None."""
        if p not in self._pair_cache:
            sigma = self.sigma_at(p + self.n)
            if sigma is None:
                self._pair_cache[p] = None
            else:
                self._pair_cache[p] = rds_recover(
                    self.vk.rds_pub, self.zeta[p : p + self.n], sigma
                )
        return self._pair_cache[p]

    def pair_starts(self) -> List[int]:
        """Ascending offsets p where a signature decoded at p + n."""
        return sorted(
            off - self.n
            for off in self.decoded
            if off >= self.n
        )


def wm_verify(
    vk: WatermarkVerifyKey, zeta: BitString, stride: int = 1
) -> VerificationReport:
    """Slide a 2n-bit window over every offset; accept at the first offset
    whose decoded signature verifies against its message block.

    stride=1 (the default) honors the any-substring guarantee; stride=n
    is the fast block-aligned mode."""
    n = vk.n
    if len(zeta) < 2 * n:
        return VerificationReport(0, None, 2, reason="TooShort")
    scan = _WindowScan(vk, zeta, stride=stride)
    for p in scan.pair_starts():
        if p + 2 * n > len(zeta):
            continue
        if scan.pair(p) is not None:
            return VerificationReport(1, p, 2)
    return VerificationReport(0, None, 2)


def wm_verify_chain(
    vk: WatermarkVerifyKey, zeta: BitString, r: int, stride: int = 1
) -> VerificationReport:
    """Accept iff some rn-bit window has all r-1 consecutive pairs verifying."""
    if r < 2:
        raise ValueError("chain size must be >= 2")
    n = vk.n
    if len(zeta) < r * n:
        return VerificationReport(0, None, r, reason="TooShort")
    scan = _WindowScan(vk, zeta, stride=stride)
    for p in scan.pair_starts():
        if p + r * n > len(zeta):
            continue
        if all(scan.pair(p + j * n) is not None for j in range(r - 1)):
            return VerificationReport(1, p, r)
    return VerificationReport(0, None, r)


def wm_recover(
    vk: WatermarkVerifyKey, zeta: BitString, stride: int = 1
) -> RecoveryList:
    """Run chain recovery at every chain size and window offset.

    An entry is kept only when every link of its window recovered; equal
    recovered contents from overlapping windows are deduplicated (first
    occurrence by chain size, then offset, wins).
    """
    n = vk.n
    out = RecoveryList()
    if len(zeta) < 2 * n:
        return out
    scan = _WindowScan(vk, zeta, stride=stride)
    starts = scan.pair_starts()
    seen = set()
    for r in range(2, len(zeta) // n + 1):
        for p in starts:
            if p + r * n > len(zeta):
                continue
            parts = []
            for j in range(r - 1):
                rec = scan.pair(p + j * n)
                if rec is None:
                    parts = None
                    break
                parts.append(rec)
            if parts is None:
                continue
            xi = concat(parts)
            assert len(xi) == (r - 1) * n
            if xi not in seen:
                seen.add(xi)
                out.entries.append(RecoveryEntry(bits=xi, offset=p, chain_r=r))
    return out


def wm_verify_baseline(vk: WatermarkVerifyKey, zeta: BitString) -> int:
    """Baseline acceptance: any n-bit window that decodes at all.

    No false-positive guarantee: with a repetition factor of 1 every
    window decodes and this accepts everything, which is the documented
    cost of skipping the signature layer.
    """
    if len(zeta) < vk.n:
        return 0
    return int(bool(steg_scan(vk.steg, zeta)))
