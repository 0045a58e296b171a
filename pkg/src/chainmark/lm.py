"""Toy autoregressive bit-stream models and the entropy sources they sample from.

A model maps a context to the probability that the next token (bit) is 1.
Three families are enough to exercise the embedding layer: a uniform
source, a biased Bernoulli source, and small fixed-order Markov chains.
``min_entropy_per_block`` certifies how much entropy a model feeds the
rejection sampler, which is the precondition the steganography layer
checks before embedding.

All randomness in the package flows through :class:`Prng`, a seedable
SHA-256 counter generator, so any run is reproducible from its seed.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Dict, Union

from .bits import BitString

SeedLike = Union[bytes, int, str]


class Prng:
    """Deterministic byte/bit stream derived from SHA-256 in counter mode."""

    __slots__ = ("_seed", "_counter", "_buf", "_bitbuf", "_bitcount")

    def __init__(self, seed: SeedLike):
        if isinstance(seed, int):
            seed = seed.to_bytes(max(1, (seed.bit_length() + 7) // 8), "little")
        elif isinstance(seed, str):
            seed = seed.encode("utf-8")
        self._seed = hashlib.sha256(b"prng-v1:" + seed).digest()
        self._counter = 0
        self._buf = b""
        self._bitbuf = 0
        self._bitcount = 0

    def fork(self, label: SeedLike) -> "Prng":
        """Derive an independent stream; used for per-trial seeding."""
        if isinstance(label, int):
            label = str(label)
        if isinstance(label, str):
            label = label.encode("utf-8")
        return Prng(self._seed + b"/" + label)

    def bytes(self, k: int) -> bytes:
        out = bytearray()
        while len(out) < k:
            if not self._buf:
                block = self._seed + self._counter.to_bytes(8, "little")
                self._buf = hashlib.sha256(block).digest()
                self._counter += 1
            take = min(k - len(out), len(self._buf))
            out += self._buf[:take]
            self._buf = self._buf[take:]
        return bytes(out)

    def bits(self, nbits: int) -> BitString:
        return BitString.from_bytes(self.bytes((nbits + 7) // 8), nbits)

    def bit(self) -> int:
        if self._bitcount == 0:
            self._bitbuf = self.bytes(1)[0]
            self._bitcount = 8
        b = self._bitbuf & 1
        self._bitbuf >>= 1
        self._bitcount -= 1
        return b

    def uniform(self) -> float:
        """A float in [0, 1) with 53 random bits."""
        return int.from_bytes(self.bytes(7), "little") % (1 << 53) / (1 << 53)

    def bernoulli(self, p: float) -> int:
        if p <= 0:
            return 0
        if p >= 1:
            return 1
        if p == 0.5:
            return self.bit()
        return int(self.uniform() < p)

    def randrange(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randrange needs n >= 1")
        # rejection sampling to avoid modulo bias
        nbytes = (n.bit_length() + 7) // 8
        limit = (256**nbytes // n) * n
        while True:
            v = int.from_bytes(self.bytes(nbytes), "little")
            if v < limit:
                return v % n

    def sample_without_replacement(self, n: int, k: int) -> list:
        if k > n:
            raise ValueError("cannot sample more than population")
        chosen: list = []
        seen = set()
        while len(chosen) < k:
            v = self.randrange(n)
            if v not in seen:
                seen.add(v)
                chosen.append(v)
        return chosen


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LanguageModel:
    """Next-bit probability model.

    kind is one of ``uniform``, ``biased`` (parameter ``p``), or ``markov``
    (parameter ``order`` and ``table`` mapping each order-bit history,
    written as a '01' string, to the probability the next bit is 1).
    """

    kind: str
    p: float = 0.5
    order: int = 0
    table: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("uniform", "biased", "markov"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == "biased" and not 0 <= self.p <= 1:
            raise ValueError("bias must lie in [0, 1]")
        if self.kind == "markov":
            if self.order < 1:
                raise ValueError("markov order must be >= 1")
            want = 2**self.order
            if len(self.table) != want:
                raise ValueError(f"markov table needs {want} entries")
            for state, prob in self.table.items():
                if len(state) != self.order or set(state) - {"0", "1"}:
                    raise ValueError(f"bad markov state {state!r}")
                if not 0 <= prob <= 1:
                    raise ValueError("markov probabilities must lie in [0, 1]")

    @classmethod
    def uniform(cls) -> "LanguageModel":
        return cls(kind="uniform")

    @classmethod
    def biased(cls, p: float) -> "LanguageModel":
        return cls(kind="biased", p=p)

    @classmethod
    def markov(cls, table: Dict[str, float]) -> "LanguageModel":
        order = len(next(iter(table)))
        return cls(kind="markov", order=order, table=dict(table))

    # -- model spec files ---------------------------------------------

    def to_spec(self) -> dict:
        if self.kind == "uniform":
            return {"kind": "uniform"}
        if self.kind == "biased":
            return {"kind": "biased", "p": self.p}
        return {"kind": "markov", "order": self.order, "table": dict(self.table)}

    @classmethod
    def from_spec(cls, spec: dict) -> "LanguageModel":
        kind = spec.get("kind")
        if kind == "uniform":
            return cls.uniform()
        if kind == "biased":
            return cls.biased(float(spec["p"]))
        if kind == "markov":
            return cls.markov({str(k): float(v) for k, v in spec["table"].items()})
        raise ValueError(f"unknown model kind {kind!r}")

    @classmethod
    def from_json(cls, text: str) -> "LanguageModel":
        return cls.from_spec(json.loads(text))

    def to_json(self) -> str:
        return json.dumps(self.to_spec(), sort_keys=True)


def _markov_state(model: LanguageModel, context: BitString) -> str:
    k = model.order
    if len(context) >= k:
        return context[len(context) - k :].to_01()
    # short contexts are left-padded with zeros
    return "0" * (k - len(context)) + context.to_01()


def next_bit_prob(model: LanguageModel, context: BitString) -> float:
    """Probability that the next bit is 1 given the context so far."""
    if model.kind == "uniform":
        return 0.5
    if model.kind == "biased":
        return model.p
    return model.table[_markov_state(model, context)]


def response(model: LanguageModel, prompt: BitString, ell: int, rng: Prng) -> BitString:
    """Sample ell bits autoregressively, conditioning on prompt + prefix.

    Only the state the model actually reads is threaded through the loop,
    so sampling stays O(ell) even for long prompts.
    """
    if model.kind == "uniform":
        return rng.bits(ell)
    if model.kind == "biased":
        return BitString.from_bits(rng.bernoulli(model.p) for _ in range(ell))
    state = _markov_state(model, prompt)
    out = []
    for _ in range(ell):
        b = rng.bernoulli(model.table[state])
        out.append(b)
        state = (state + str(b))[-model.order :]
    return BitString.from_bits(out)


@dataclass
class SamplerState:
    """One generation session: the model, its entropy source, and the
    context accumulated so far (prompt plus committed output)."""

    model: LanguageModel
    rng: Prng
    context: BitString

    def draw(self, ell: int) -> BitString:
        """Sample a candidate continuation without committing it."""
        return response(self.model, self.context, ell, self.rng)

    def commit(self, bits: BitString) -> None:
        self.context = self.context + bits


def min_entropy_per_block(model: LanguageModel, ell: int) -> float:
    """A certified lower bound (in bits) on the min-entropy of any
    ell-bit response, minimized over all possible contexts.

    Uniform and biased sources have a closed form.  Markov chains use an
    exact most-likely-path dynamic program up to ell = 32 and fall back to
    a per-step bound beyond that.
    """
    if ell < 0:
        raise ValueError("ell must be >= 0")
    if ell == 0:
        return 0.0
    if model.kind == "uniform":
        return float(ell)
    if model.kind == "biased":
        q = max(model.p, 1 - model.p)
        return -ell * math.log2(q) if q < 1 else 0.0

    step_max = max(max(p, 1 - p) for p in model.table.values())
    if ell > 32:
        return -ell * math.log2(step_max) if step_max < 1 else 0.0
    # exact DP: best[state] = max probability of any path of the remaining
    # length starting from state; worst case over initial states.
    states = sorted(model.table)
    best = {s: 1.0 for s in states}
    for _ in range(ell):
        new = {}
        for s in states:
            p1 = model.table[s]
            nxt1 = (s + "1")[-model.order :]
            nxt0 = (s + "0")[-model.order :]
            new[s] = max(p1 * best[nxt1], (1 - p1) * best[nxt0])
        best = new
    peak = max(best.values())
    return -math.log2(peak) if peak < 1 else 0.0
