"""Robust and recoverable signatures over fixed-length messages.

A robust signature of ``y`` is the pair ``(z, tau)``: a sharp sketch of
``y`` plus an inner signature of that sketch.  Verification against a
candidate ``zeta`` succeeds when the inner signature checks out AND the
sketch recovers something from ``zeta`` -- which, by sharpness, happens
exactly when ``zeta`` is within the Hamming radius of the signed
message.  Recovery returns that message bit-exactly.

Because the verifier holds ``zeta`` in the clear, the hash-pair
evaluation step collapses into recover-and-check on the sketch; the
weight and digest checks inside ``sketch_recover`` are what make
verification reject far inputs.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .bits import BitString, Hamming
from .codes import bch_code
from .lm import Prng
from .sketch import SharpSketchKey, Sketch, sketch, sketch_recover
from . import signer as _signer

_Z_TAG = b"chainmark-rds-z-v1:"


@dataclass(frozen=True)
class RdsPublicKey:
    """Everything a verifier needs: the sketching function and the inner
    verification key.  Contains no signing material."""

    sketch_key: SharpSketchKey
    signer_public: bytes
    scheme_tag: str

    @property
    def n(self) -> int:
        return self.sketch_key.n

    @property
    def r(self) -> int:
        return self.sketch_key.r

    @property
    def sig_len(self) -> int:
        return _signer.sig_bits(self.scheme_tag)

    @property
    def signature_bits(self) -> int:
        """Total robust-signature size: sketch bits + inner signature bits."""
        return self.sketch_key.sketch_bits + self.sig_len

    @property
    def predicate(self) -> Hamming:
        return Hamming(Fraction(self.r, self.n))


@dataclass(frozen=True)
class RdsKeypair:
    sketch_key: SharpSketchKey
    dss: _signer.SignerKeypair
    message_len_n: int

    def __post_init__(self):
        if self.sketch_key.n != self.message_len_n:
            raise ValueError("sketch key length != message length")

    @property
    def public(self) -> RdsPublicKey:
        return RdsPublicKey(
            sketch_key=self.sketch_key,
            signer_public=self.dss.public_part,
            scheme_tag=self.dss.scheme_tag,
        )

    @property
    def predicate(self) -> Hamming:
        return Hamming(Fraction(self.sketch_key.r, self.message_len_n))


@dataclass(frozen=True)
class RobustSignature:
    z: Sketch
    tau: BitString

    def size_bits(self) -> int:
        return self.z.size_bits() + len(self.tau)

    def serialize(self) -> bytes:
        """Version byte, then length-prefixed sketch and tau blobs."""
        zb = self.z.serialize()
        tb = self.tau.to_bytes()
        return (
            b"\x01"
            + struct.pack("<I", len(zb))
            + zb
            + struct.pack("<I", len(self.tau))
            + tb
        )

    @classmethod
    def deserialize(cls, blob: bytes) -> "RobustSignature":
        if blob[0:1] != b"\x01":
            raise ValueError("unsupported robust-signature version")
        (zlen,) = struct.unpack_from("<I", blob, 1)
        off = 5
        z = Sketch.deserialize(blob[off : off + zlen])
        off += zlen
        (taubits,) = struct.unpack_from("<I", blob, off)
        off += 4
        tau = BitString.from_bytes(blob[off : off + (taubits + 7) // 8], taubits)
        return cls(z=z, tau=tau)


def _z_message(z: Sketch) -> BitString:
    """Canonical byte form of a sketch for inner signing; any re-encoding
    ambiguity here would let distinct inputs verify as the same z."""
    return BitString.from_bytes(_Z_TAG + z.serialize())


def rds_gen(
    params: dict,
    rng: Prng,
    scheme: str = "ed25519",
    digest_bits: int = 256,
    code=None,
    lambda_bits: int = 256,
) -> RdsKeypair:
    """Build a keypair for n-bit messages tolerating r substitutions.

    The sketch code defaults to the structured cyclic family sized for n;
    tests may inject any LinearCode (e.g. a certified random code).
    lambda_bits sizes the hash key material.
    """
    n, r = params["n"], params["r"]
    if code is None:
        m = max(4, n.bit_length())
        code = bch_code(m=m, n=n, t=r)
    sketch_key = SharpSketchKey(
        code=code,
        crhf_key=rng.bytes((lambda_bits + 7) // 8),
        r=r,
        n=n,
        digest_bits=digest_bits,
    )
    dss = _signer.dss_gen(scheme, rng)
    return RdsKeypair(sketch_key=sketch_key, dss=dss, message_len_n=n)


def rds_sign(kp: RdsKeypair, y: BitString) -> RobustSignature:
    if len(y) != kp.message_len_n:
        raise ValueError(f"message length {len(y)} != {kp.message_len_n}")
    z = sketch(kp.sketch_key, y)
    tau = _signer.dss_sign(kp.dss, _z_message(z))
    return RobustSignature(z=z, tau=tau)


def _checked_recover(
    pk: RdsPublicKey, zeta: BitString, sigma: RobustSignature
) -> Optional[BitString]:
    if len(zeta) != pk.n:
        raise ValueError(f"candidate length {len(zeta)} != {pk.n}")
    if len(sigma.tau) != pk.sig_len:
        return None
    if not _signer.dss_verify(
        pk.signer_public, pk.scheme_tag, _z_message(sigma.z), sigma.tau
    ):
        return None
    return sketch_recover(pk.sketch_key, sigma.z, zeta)


def rds_verify(pk: RdsPublicKey, zeta: BitString, sigma: RobustSignature) -> int:
    """1 iff the inner signature over z verifies and zeta is within the
    sketch's recovery radius of the signed message."""
    return int(_checked_recover(pk, zeta, sigma) is not None)


def rds_recover(
    pk: RdsPublicKey, zeta: BitString, sigma: RobustSignature
) -> Optional[BitString]:
    """The bit-exact signed message when zeta is close to it, else None.

    Shares one code path with rds_verify, so verify == 1 exactly when
    recover is not None.
    """
    return _checked_recover(pk, zeta, sigma)
