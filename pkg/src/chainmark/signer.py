"""Inner signature primitive with swappable backends.

The default backend is Ed25519: deterministic, strongly unforgeable in
the standard literature, and exactly 512 signature bits.  A keyed-MAC
backend truncated to 64-128 bits exists purely so small-parameter test
harnesses can fit a "signature" into a tiny steganographic capacity; it
is NOT publicly verifiable (the verifier holds the MAC secret), which is
acceptable only in secret-key-mode setups where the verifier holds key
material anyway.

All signed messages carry a fixed context prefix so signatures produced
here can never be confused with other protocol messages.
"""
from __future__ import annotations

import hashlib
import hmac
import struct
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .bits import BitString

_DOMAIN = b"chainmark-sig-v1:"

SCHEMES = ("ed25519", "mac128", "mac96", "mac64")

PUBLICLY_VERIFIABLE = {"ed25519": True, "mac128": False, "mac96": False, "mac64": False}

_SIG_BITS = {"ed25519": 512, "mac128": 128, "mac96": 96, "mac64": 64}


@dataclass(frozen=True)
class SignerKeypair:
    public_part: bytes
    secret_part: bytes
    scheme_tag: str
    sig_len: int

    @property
    def publicly_verifiable(self) -> bool:
        return PUBLICLY_VERIFIABLE[self.scheme_tag]


def sig_bits(scheme: str) -> int:
    if scheme not in _SIG_BITS:
        raise ValueError(f"unknown signature scheme {scheme!r}")
    return _SIG_BITS[scheme]


def dss_gen(scheme: str, rng) -> SignerKeypair:
    """Generate a keypair; key material is drawn from the injected
    entropy source so runs are reproducible."""
    if scheme == "ed25519":
        seed = rng.bytes(32)
        priv = Ed25519PrivateKey.from_private_bytes(seed)
        pub = priv.public_key().public_bytes_raw()
        return SignerKeypair(
            public_part=pub, secret_part=seed, scheme_tag=scheme, sig_len=512
        )
    if scheme in _SIG_BITS:
        secret = rng.bytes(32)
        # MAC verification needs the secret: public_part carries it, and
        # the scheme is flagged not-publicly-verifiable.
        return SignerKeypair(
            public_part=secret,
            secret_part=secret,
            scheme_tag=scheme,
            sig_len=_SIG_BITS[scheme],
        )
    raise ValueError(f"unknown signature scheme {scheme!r}")


def _tagged(scheme: str, m: BitString) -> bytes:
    return _DOMAIN + scheme.encode() + b":" + struct.pack("<I", len(m)) + m.to_bytes()


def dss_sign(kp: SignerKeypair, m: BitString) -> BitString:
    """Fixed-length signature; deterministic for every backend."""
    msg = _tagged(kp.scheme_tag, m)
    if kp.scheme_tag == "ed25519":
        priv = Ed25519PrivateKey.from_private_bytes(kp.secret_part)
        return BitString.from_bytes(priv.sign(msg), 512)
    mac = hmac.new(kp.secret_part, msg, hashlib.sha256).digest()
    return BitString.from_bytes(mac, kp.sig_len)


def dss_verify(pk: bytes, scheme: str, m: BitString, sig: BitString) -> int:
    if len(sig) != sig_bits(scheme):
        return 0
    msg = _tagged(scheme, m)
    if scheme == "ed25519":
        try:
            Ed25519PublicKey.from_public_bytes(pk).verify(sig.to_bytes(), msg)
            return 1
        except (InvalidSignature, ValueError):
            return 0
    mac = hmac.new(pk, msg, hashlib.sha256).digest()
    expect = BitString.from_bytes(mac, sig_bits(scheme))
    return int(hmac.compare_digest(expect.to_bytes(), sig.to_bytes()))


# -- key file payloads (versioned: scheme tag + key bytes) -------------------

def serialize_key(kp: SignerKeypair, include_secret: bool) -> bytes:
    tag = kp.scheme_tag.encode()
    body = kp.secret_part if include_secret else kp.public_part
    return struct.pack("<BB", 1, len(tag)) + tag + struct.pack("<H", len(body)) + body


def deserialize_key(blob: bytes):
    """Returns (scheme_tag, key_bytes); the caller knows the role."""
    version, taglen = struct.unpack_from("<BB", blob, 0)
    if version != 1:
        raise ValueError(f"unsupported signer key version {version}")
    off = 2
    tag = blob[off : off + taglen].decode()
    off += taglen
    (blen,) = struct.unpack_from("<H", blob, off)
    off += 2
    if tag not in _SIG_BITS:
        raise ValueError(f"unknown signature scheme {tag!r}")
    return tag, blob[off : off + blen], off + blen


def keypair_from_secret(scheme: str, secret: bytes) -> SignerKeypair:
    if scheme == "ed25519":
        priv = Ed25519PrivateKey.from_private_bytes(secret)
        return SignerKeypair(
            public_part=priv.public_key().public_bytes_raw(),
            secret_part=secret,
            scheme_tag=scheme,
            sig_len=512,
        )
    return SignerKeypair(
        public_part=secret, secret_part=secret, scheme_tag=scheme,
        sig_len=sig_bits(scheme),
    )
