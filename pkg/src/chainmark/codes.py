"""Binary linear error-correcting codes.

Three families cover the package's needs:

* :class:`BchCode` -- structured cyclic codes (possibly shortened) with
  algebraic bounded-distance syndrome decoding.  This is the production
  sketch code: syndromes are cheap parity products and decoding up to
  ``t`` errors runs Berlekamp-Massey plus a vectorized Chien search.
* :class:`RandomDenseCode` -- a dense random parity-check code for
  ``n <= 24`` whose minimum distance is certified exhaustively at
  construction; decoding is an exhaustive table.  Used as the
  independent oracle against the algebraic path.
* :class:`RepetitionCode` -- an interleaved majority-vote repetition
  code used as the steganographic payload code.

Decoders return ``None`` (never a best-effort guess) when no error
pattern within the guaranteed radius matches, so callers see a clean
"no decode" value exactly where the upper layers expect one.

Bit ``i`` of a length-``n`` word corresponds to position ``i``; parity
rows are stored as packed Python integers so a syndrome bit is one
AND + popcount.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, List, Optional, Sequence

import numpy as np

from .bits import BitString


@dataclass(frozen=True)
class Syndrome:
    """H.x over GF(2); the length always equals n - k of the owning code."""

    bits: BitString

    def __len__(self) -> int:
        return len(self.bits)

    def __xor__(self, other: "Syndrome") -> "Syndrome":
        return Syndrome(self.bits ^ other.bits)

    def is_zero(self) -> bool:
        return self.bits.value == 0


# ---------------------------------------------------------------------------
# GF(2^m)
# ---------------------------------------------------------------------------

def _factorize(n: int) -> List[int]:
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


def _poly_mulmod(a: int, b: int, mod: int, m: int) -> int:
    res = 0
    while b:
        if b & 1:
            res ^= a
        b >>= 1
        a <<= 1
        if a >> m:
            a ^= mod
    return res


def _poly_powmod(base: int, exp: int, mod: int, m: int) -> int:
    res = 1
    while exp:
        if exp & 1:
            res = _poly_mulmod(res, base, mod, m)
        base = _poly_mulmod(base, base, mod, m)
        exp >>= 1
    return res


def _find_primitive_poly(m: int) -> int:
    """Smallest degree-m polynomial over GF(2) whose root generates the
    multiplicative group of GF(2^m)."""
    order = (1 << m) - 1
    prime_factors = _factorize(order)
    for cand in range((1 << m) + 1, 1 << (m + 1), 2):
        if _poly_powmod(2, order, cand, m) != 1:
            continue
        if all(_poly_powmod(2, order // q, cand, m) != 1 for q in prime_factors):
            return cand
    raise RuntimeError(f"no primitive polynomial of degree {m}")  # pragma: no cover


class _GF:
    """GF(2^m) arithmetic through log/antilog tables."""

    def __init__(self, m: int):
        if not 2 <= m <= 20:
            raise ValueError("field degree must be in [2, 20]")
        self.m = m
        self.order = (1 << m) - 1
        self.poly = _find_primitive_poly(m)
        exp = [0] * self.order
        log = [0] * (1 << m)
        v = 1
        for i in range(self.order):
            exp[i] = v
            log[v] = i
            v <<= 1
            if v >> m:
                v ^= self.poly
        self.exp = exp
        self.log = log
        self.exp_np = np.array(exp + exp, dtype=np.int64)  # doubled: free mod
        self.log_np = np.array(log, dtype=np.int64)

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self.exp[(self.log[a] + self.log[b]) % self.order]

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("no inverse of 0")
        return self.exp[(self.order - self.log[a]) % self.order]

    def pow_alpha(self, e: int) -> int:
        return self.exp[e % self.order]


_GF_CACHE: Dict[int, _GF] = {}


def _gf(m: int) -> _GF:
    if m not in _GF_CACHE:
        _GF_CACHE[m] = _GF(m)
    return _GF_CACHE[m]


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

def _pack_bit_array(bits: np.ndarray) -> int:
    """uint8 0/1 array -> packed int, bit i of array -> bit i of int."""
    return int.from_bytes(np.packbits(bits, bitorder="little").tobytes(), "little")


def _rank_gf2(rows: Sequence[int]) -> int:
    basis: List[int] = []
    for row in rows:
        for b in basis:
            row = min(row, row ^ b)
        if row:
            basis.append(row)
            basis.sort(reverse=True)
    return len(basis)


class LinearCode:
    """Common interface: length n, dimension k, syndromes, decoding."""

    family: str
    n: int
    k: int
    min_distance_bound: int

    @property
    def redundancy(self) -> int:
        return self.n - self.k

    @property
    def max_correctable(self) -> int:
        return (self.min_distance_bound - 1) // 2

    def parity_rows(self) -> List[int]:
        raise NotImplementedError

    def syndrome(self, x: BitString) -> Syndrome:
        if len(x) != self.n:
            raise ValueError(f"input length {len(x)} != code length {self.n}")
        v = x.value
        bits = 0
        for i, row in enumerate(self.parity_rows()):
            bits |= ((row & v).bit_count() & 1) << i
        return Syndrome(BitString(bits, self.redundancy))

    def decode_syndrome(self, s: Syndrome, max_weight: int) -> Optional[BitString]:
        raise NotImplementedError

    def encode(self, m: BitString) -> BitString:
        raise NotImplementedError

    def decode(self, c: BitString) -> Optional[BitString]:
        raise NotImplementedError

    def _check_decode_pre(self, s: Syndrome, max_weight: int) -> None:
        if len(s) != self.redundancy:
            raise ValueError("syndrome length mismatch")
        if max_weight > self.max_correctable:
            raise ValueError(
                f"max_weight {max_weight} exceeds guaranteed radius "
                f"{self.max_correctable}"
            )

    def to_blob(self) -> bytes:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# BCH-style cyclic codes
# ---------------------------------------------------------------------------

class BchCode(LinearCode):
    """Binary BCH code of designed distance 2t+1, shortened to length n.

    Positions 0..n-1 carry locators alpha^0..alpha^(n-1) in GF(2^m).
    Only the odd power sums S_1, S_3, ..., S_{2t-1} are stored as parity
    rows; the even ones are recovered by squaring, which is exact for
    any binary word.
    """

    family = "bch"

    def __init__(self, m: int, n: int, t: int):
        gf = _gf(m)
        if not 1 <= n <= gf.order:
            raise ValueError(f"length {n} out of range for GF(2^{m})")
        if t < 1:
            raise ValueError("t must be >= 1")
        self.gf = gf
        self.m = m
        self.n = n
        self.t = t
        self.min_distance_bound = 2 * t + 1

        odd = list(range(1, 2 * t, 2))
        rows: List[int] = []
        idx = np.arange(n, dtype=np.int64)
        for j in odd:
            vals = gf.exp_np[(j * idx) % gf.order]
            for b in range(m):
                rows.append(_pack_bit_array(((vals >> b) & 1).astype(np.uint8)))
        self._rows = rows
        self._odd = odd
        if _rank_gf2(rows) != len(rows):
            raise ValueError(
                f"BCH parameters (m={m}, n={n}, t={t}) give dependent parity "
                "rows; pick parameters with full-rank checks"
            )
        self.k = n - len(rows)
        if self.k <= 0:
            raise ValueError("code has no information positions")
        self._generator: Optional[int] = None

    def parity_rows(self) -> List[int]:
        return self._rows

    # -- syndromes -----------------------------------------------------

    def _field_syndromes(self, s: Syndrome) -> List[int]:
        """Power sums S_1..S_2t of the unknown error, from packed bits."""
        gf = self.gf
        raw = s.bits.value
        by_j: Dict[int, int] = {}
        for i, j in enumerate(self._odd):
            by_j[j] = (raw >> (i * self.m)) & ((1 << self.m) - 1)
        out = [0] * (2 * self.t + 1)
        for j in range(1, 2 * self.t + 1):
            if j % 2 == 1:
                out[j] = by_j[j]
            else:
                out[j] = gf.mul(out[j // 2], out[j // 2])
        return out[1:]

    def _berlekamp_massey(self, S: List[int]) -> List[int]:
        gf = self.gf
        C = [1]
        B = [1]
        L = 0
        m_ = 1
        b = 1
        for n_ in range(len(S)):
            d = S[n_]
            for i in range(1, L + 1):
                if i < len(C) and C[i] and S[n_ - i]:
                    d ^= gf.mul(C[i], S[n_ - i])
            if d == 0:
                m_ += 1
                continue
            coef = gf.mul(d, gf.inv(b))
            shifted = [0] * m_ + [gf.mul(coef, x) for x in B]
            if 2 * L <= n_:
                T = C[:]
                C = [a ^ b2 for a, b2 in _zip_pad(C, shifted)]
                L = n_ + 1 - L
                B = T
                b = d
                m_ = 1
            else:
                C = [a ^ b2 for a, b2 in _zip_pad(C, shifted)]
                m_ += 1
        while C and C[-1] == 0:
            C.pop()
        return C if len(C) - 1 == L else []

    def _chien_positions(self, locator: List[int]) -> Optional[List[int]]:
        """All positions i < n with locator(alpha^-i) = 0, via table lookups."""
        gf = self.gf
        order = gf.order
        i = np.arange(self.n, dtype=np.int64)
        acc = np.full(self.n, locator[0], dtype=np.int64)
        for j in range(1, len(locator)):
            lam = locator[j]
            if lam == 0:
                continue
            e = (gf.log[lam] - (i * j)) % order
            acc ^= gf.exp_np[e]
        pos = np.nonzero(acc == 0)[0]
        if len(pos) != len(locator) - 1:
            return None
        return [int(p) for p in pos]

    def decode_syndrome(self, s: Syndrome, max_weight: int) -> Optional[BitString]:
        self._check_decode_pre(s, max_weight)
        if s.is_zero():
            return BitString.zeros(self.n)
        locator = self._berlekamp_massey(self._field_syndromes(s))
        if len(locator) < 2:
            return None
        positions = self._chien_positions(locator)
        if positions is None:
            return None
        e = 0
        for p in positions:
            e |= 1 << p
        err = BitString(e, self.n)
        if err.weight() > max_weight:
            return None
        if self.syndrome(err).bits != s.bits:
            return None
        return err

    # -- encoding (systematic, CRC-style remainder in the low positions) --

    def _gen_poly(self) -> int:
        if self._generator is None:
            gf = self.gf
            g = 1
            covered = set()
            for j in self._odd:
                # minimal polynomial of alpha^j: product over the 2-cyclotomic coset
                coset = set()
                c = j
                while c not in coset:
                    coset.add(c)
                    c = (c * 2) % gf.order
                if coset & covered:
                    continue
                covered |= coset
                poly = [1]
                for c in coset:
                    root = gf.pow_alpha(c)
                    nxt = [0] * (len(poly) + 1)
                    for deg, coef in enumerate(poly):
                        nxt[deg + 1] ^= coef
                        nxt[deg] ^= gf.mul(coef, root)
                    poly = nxt
                assert all(x in (0, 1) for x in poly)
                minpoly = sum(bit << i for i, bit in enumerate(poly))
                g = _carryless_mul(g, minpoly)
            assert g.bit_length() - 1 == self.redundancy
            self._generator = g
        return self._generator

    def encode(self, m: BitString) -> BitString:
        if len(m) != self.k:
            raise ValueError(f"message length {len(m)} != dimension {self.k}")
        g = self._gen_poly()
        dg = self.redundancy
        shifted = m.value << dg
        rem = _poly_mod(shifted, g)
        return BitString(shifted | rem, self.n)

    def decode(self, c: BitString) -> Optional[BitString]:
        if len(c) != self.n:
            raise ValueError("codeword length mismatch")
        e = self.decode_syndrome(self.syndrome(c), self.t)
        if e is None:
            return None
        return (c ^ e)[self.redundancy :]

    def to_blob(self) -> bytes:
        return _blob_header(1, self.n, self.k, self.min_distance_bound) + struct.pack(
            "<HH", self.m, self.t
        )


def _zip_pad(a: List[int], b: List[int]):
    n = max(len(a), len(b))
    return zip(a + [0] * (n - len(a)), b + [0] * (n - len(b)))


def _carryless_mul(a: int, b: int) -> int:
    res = 0
    shift = 0
    while b:
        if b & 1:
            res ^= a << shift
        b >>= 1
        shift += 1
    return res


def _poly_mod(a: int, g: int) -> int:
    dg = g.bit_length() - 1
    while a.bit_length() - 1 >= dg and a:
        a ^= g << (a.bit_length() - 1 - dg)
    return a


_BCH_CACHE: Dict[tuple, BchCode] = {}


def bch_code(m: int, n: int, t: int) -> BchCode:
    """Cached factory; code objects are immutable and shareable."""
    key = (m, n, t)
    if key not in _BCH_CACHE:
        _BCH_CACHE[key] = BchCode(m, n, t)
    return _BCH_CACHE[key]


# ---------------------------------------------------------------------------
# Random dense codes (oracle-scale)
# ---------------------------------------------------------------------------

class RandomDenseCode(LinearCode):
    """Dense random parity-check code with an exhaustively certified
    decoding radius; practical only for n <= 24.

    Construction resamples H until every error pattern of weight <= r has
    a distinct syndrome, which certifies minimum distance >= 2r+1 and
    yields a perfect lookup decoder over that ball.
    """

    family = "random-dense"
    _MAX_N = 24

    def __init__(self, n: int, redundancy: int, r: int, rng, _rows=None):
        if n > self._MAX_N:
            raise ValueError(f"random-dense codes support n <= {self._MAX_N}")
        if not 1 <= redundancy < n:
            raise ValueError("redundancy must lie in [1, n)")
        if r < 1:
            raise ValueError("r must be >= 1")
        self.n = n
        self.k = n - redundancy
        self.r = r
        self.min_distance_bound = 2 * r + 1

        if _rows is not None:
            rows = list(_rows)
            table = self._build_table(rows)
            if table is None or _rank_gf2(rows) != redundancy:
                raise ValueError("serialized parity check fails certification")
        else:
            table = None
            for _ in range(200):
                rows = [BitString.random(n, rng).value for _ in range(redundancy)]
                if _rank_gf2(rows) != redundancy:
                    continue
                table = self._build_table(rows)
                if table is not None:
                    break
            if table is None:
                raise ValueError(
                    f"could not certify distance {self.min_distance_bound} at "
                    f"n={n}, redundancy={redundancy}; increase redundancy"
                )
        self._rows = rows
        self._table = table
        self._basis, self._free_cols = self._null_space(rows)

    def _build_table(self, rows: List[int]) -> Optional[Dict[int, int]]:
        table: Dict[int, int] = {}
        for w in range(self.r + 1):
            for idxs in combinations(range(self.n), w):
                e = 0
                for i in idxs:
                    e |= 1 << i
                s = 0
                for bi, row in enumerate(rows):
                    s |= ((row & e).bit_count() & 1) << bi
                if s in table:
                    return None
                table[s] = e
        return table

    def _null_space(self, rows: List[int]):
        # RREF over GF(2); free columns form a systematic information set.
        work = list(rows)
        pivots = []
        rix = 0
        for col in range(self.n):
            sel = None
            for i in range(rix, len(work)):
                if (work[i] >> col) & 1:
                    sel = i
                    break
            if sel is None:
                continue
            work[rix], work[sel] = work[sel], work[rix]
            for i in range(len(work)):
                if i != rix and (work[i] >> col) & 1:
                    work[i] ^= work[rix]
            pivots.append(col)
            rix += 1
        free = [c for c in range(self.n) if c not in pivots]
        basis = []
        for f in free:
            v = 1 << f
            for i, p in enumerate(pivots):
                if (work[i] >> f) & 1:
                    v |= 1 << p
            basis.append(v)
        return basis, free

    def parity_rows(self) -> List[int]:
        return self._rows

    def decode_syndrome(self, s: Syndrome, max_weight: int) -> Optional[BitString]:
        self._check_decode_pre(s, max_weight)
        e = self._table.get(s.bits.value)
        if e is None:
            return None
        err = BitString(e, self.n)
        if err.weight() > max_weight:
            return None
        return err

    def encode(self, m: BitString) -> BitString:
        if len(m) != self.k:
            raise ValueError(f"message length {len(m)} != dimension {self.k}")
        v = 0
        for j in range(self.k):
            if m[j]:
                v ^= self._basis[j]
        return BitString(v, self.n)

    def decode(self, c: BitString) -> Optional[BitString]:
        if len(c) != self.n:
            raise ValueError("codeword length mismatch")
        e = self.decode_syndrome(self.syndrome(c), self.r)
        if e is None:
            return None
        fixed = c ^ e
        return BitString.from_bits(fixed[f] for f in self._free_cols)

    def to_blob(self) -> bytes:
        head = _blob_header(2, self.n, self.k, self.min_distance_bound)
        body = struct.pack("<H", self.r)
        nbytes = (self.n + 7) // 8
        for row in self._rows:
            body += row.to_bytes(nbytes, "little")
        return head + body


# ---------------------------------------------------------------------------
# Interleaved repetition payload code
# ---------------------------------------------------------------------------

class RepetitionCode(LinearCode):
    """Majority-decoded repetition code behind a round-robin interleaver.

    Codeword position p carries message bit ``p mod k``, so the copies of
    each bit are spread across the word.  Decoding takes a per-bit
    majority vote; an exact tie is a decode failure rather than a guess.
    """

    family = "repetition"

    def __init__(self, length: int, k: int):
        if not 1 <= k <= length:
            raise ValueError("need 1 <= k <= length")
        self.n = length
        self.k = k
        self._class = np.arange(length, dtype=np.int64) % k
        self._copies = np.bincount(self._class, minlength=k).astype(np.int64)
        self.min_distance_bound = int(self._copies.min())
        self._rows: Optional[List[int]] = None

    @property
    def copies(self) -> np.ndarray:
        return self._copies

    def parity_rows(self) -> List[int]:
        if self._rows is None:
            rows = []
            for p in range(self.k, self.n):
                rows.append((1 << p) | (1 << (p % self.k)))
            self._rows = rows
        return self._rows

    def encode(self, m: BitString) -> BitString:
        if len(m) != self.k:
            raise ValueError(f"message length {len(m)} != dimension {self.k}")
        mbits = np.frombuffer(
            np.unpackbits(
                np.frombuffer(m.to_bytes(), dtype=np.uint8), bitorder="little"
            ).tobytes(),
            dtype=np.uint8,
        )[: self.k]
        return BitString.from_bytes(
            np.packbits(mbits[self._class], bitorder="little").tobytes(), self.n
        )

    def decode_votes(self, votes: np.ndarray) -> Optional[BitString]:
        """Decode from per-bit vote counts; tie -> None."""
        twice = 2 * votes
        if np.any(twice == self._copies):
            return None
        bits = (twice > self._copies).astype(np.uint8)
        return BitString.from_bytes(
            np.packbits(bits, bitorder="little").tobytes(), self.k
        )

    def decode(self, c: BitString) -> Optional[BitString]:
        if len(c) != self.n:
            raise ValueError("codeword length mismatch")
        cbits = np.unpackbits(
            np.frombuffer(c.to_bytes(), dtype=np.uint8), bitorder="little"
        )[: self.n]
        votes = np.bincount(self._class, weights=cbits, minlength=self.k).astype(
            np.int64
        )
        return self.decode_votes(votes)

    def decode_syndrome(self, s: Syndrome, max_weight: int) -> Optional[BitString]:
        self._check_decode_pre(s, max_weight)
        sv = s.bits.value
        e = 0
        total = 0
        for j in range(self.k):
            # syndrome bit for copy position p >= k is row p - k: e_p xor e_j
            ones = []
            zeros = []
            for p in range(j + self.k, self.n, self.k):
                (ones if (sv >> (p - self.k)) & 1 else zeros).append(p)
            if len(ones) <= 1 + len(zeros):  # take e_j = 0
                for p in ones:
                    e |= 1 << p
                total += len(ones)
            else:  # take e_j = 1
                e |= 1 << j
                for p in zeros:
                    e |= 1 << p
                total += 1 + len(zeros)
            if total > max_weight:
                return None
        return BitString(e, self.n)

    def to_blob(self) -> bytes:
        return _blob_header(3, self.n, self.k, self.min_distance_bound)


# ---------------------------------------------------------------------------
# Spec-level operation wrappers and blob codec
# ---------------------------------------------------------------------------

def syndrome(code: LinearCode, x: BitString) -> Syndrome:
    return code.syndrome(x)


def decode_syndrome(
    code: LinearCode, s: Syndrome, max_weight: int
) -> Optional[BitString]:
    return code.decode_syndrome(s, max_weight)


def payload_encode(code: LinearCode, m: BitString) -> BitString:
    return code.encode(m)


def payload_decode(code: LinearCode, c: BitString) -> Optional[BitString]:
    return code.decode(c)


_BLOB_MAGIC = b"CMCODE01"


def _blob_header(tag: int, n: int, k: int, d: int) -> bytes:
    return _BLOB_MAGIC + struct.pack("<BIII", tag, n, k, d)


def code_from_blob(blob: bytes, rng=None) -> LinearCode:
    if blob[:8] != _BLOB_MAGIC:
        raise ValueError("bad code blob magic")
    tag, n, k, d = struct.unpack_from("<BIII", blob, 8)
    off = 8 + struct.calcsize("<BIII")
    if tag == 1:
        m, t = struct.unpack_from("<HH", blob, off)
        code = bch_code(m, n, t)
    elif tag == 2:
        (r,) = struct.unpack_from("<H", blob, off)
        off += 2
        nbytes = (n + 7) // 8
        rows = []
        for _ in range(n - k):
            rows.append(int.from_bytes(blob[off : off + nbytes], "little"))
            off += nbytes
        code = RandomDenseCode(n, n - k, r, rng=None, _rows=rows)
    elif tag == 3:
        code = RepetitionCode(n, k)
    else:
        raise ValueError(f"unknown code family tag {tag}")
    if (code.n, code.k, code.min_distance_bound) != (n, k, d):
        raise ValueError("code blob header does not match reconstruction")
    return code
