import math
from itertools import combinations

import pytest

from chainmark.bits import BitString
from chainmark.codes import RandomDenseCode, bch_code
from chainmark.lm import Prng
from chainmark.sketch import (
    Sketch,
    SharpSketchKey,
    generic_pph_recover,
    identity_pph,
    sketch,
    sketch_recover,
    sketch_size_lower_bound,
)


def exhaustive_recover(key, z, x_prime):
    """Independent oracle: try every candidate within distance r of x'."""
    hits = []
    for w in range(key.r + 1):
        for idxs in combinations(range(key.n), w):
            cand = x_prime.flip(*idxs)
            if (
                key.code.syndrome(cand).bits == z.syndrome.bits
                and key.digest(cand) == z.digest
            ):
                hits.append(cand)
    assert len(hits) <= 1, "digest collision at toy widths"
    return hits[0] if hits else None


@pytest.fixture(scope="module")
def tiny_key():
    code = RandomDenseCode(n=14, redundancy=10, r=2, rng=Prng(b"sk-code"))
    return SharpSketchKey(code=code, crhf_key=b"k" * 16, r=2, n=14, digest_bits=64)


@pytest.fixture(scope="module")
def bch_key():
    return SharpSketchKey(
        code=bch_code(m=10, n=512, t=2), crhf_key=b"K" * 16, r=2, n=512
    )


class TestSketchBasics:
    def test_deterministic(self, bch_key):
        x = BitString.random(512, Prng(b"det"))
        a, b = sketch(bch_key, x), sketch(bch_key, x)
        assert a.syndrome.bits == b.syndrome.bits and a.digest == b.digest

    def test_zero_input_zero_syndrome(self, bch_key):
        assert sketch(bch_key, BitString.zeros(512)).syndrome.is_zero()

    def test_sketch_size_accounting(self, bch_key):
        x = BitString.random(512, Prng(b"sz"))
        z = sketch(bch_key, x)
        assert z.size_bits() == bch_key.sketch_bits == 20 + 256

    def test_desk_preset_sketch_size(self):
        key = SharpSketchKey(
            code=bch_code(m=16, n=32768, t=8), crhf_key=b"d" * 16, r=8, n=32768
        )
        # exact n - k for the chosen parameters: t * m = 128 bits
        assert key.sketch_bits == 128 + 256

    def test_length_mismatch_raises(self, bch_key):
        with pytest.raises(ValueError):
            sketch(bch_key, BitString.zeros(100))
        with pytest.raises(ValueError):
            sketch_recover(bch_key, sketch(bch_key, BitString.zeros(512)),
                           BitString.zeros(100))

    def test_key_validation(self):
        code = bch_code(m=10, n=512, t=2)
        with pytest.raises(ValueError):
            SharpSketchKey(code=code, crhf_key=b"x", r=3, n=512)  # r > radius
        with pytest.raises(ValueError):
            SharpSketchKey(code=code, crhf_key=b"x", r=2, n=100)

    def test_serialization_roundtrip(self, bch_key):
        z = sketch(bch_key, BitString.random(512, Prng(b"ser")))
        back = Sketch.deserialize(z.serialize())
        assert back.syndrome.bits == z.syndrome.bits
        assert back.digest == z.digest


class TestSketchRecover:
    def test_exact_input_recovers(self, bch_key):
        x = BitString.random(512, Prng(b"r0"))
        assert sketch_recover(bch_key, sketch(bch_key, x), x) == x

    def test_r_flips_recover(self, bch_key):
        rng = Prng(b"r2")
        for _ in range(100):
            x = BitString.random(512, rng)
            z = sketch(bch_key, x)
            idxs = rng.sample_without_replacement(512, bch_key.r)
            assert sketch_recover(bch_key, z, x.flip(*idxs)) == x

    def test_far_flips_reject(self, bch_key):
        rng = Prng(b"far")
        for _ in range(100):
            x = BitString.random(512, rng)
            z = sketch(bch_key, x)
            idxs = rng.sample_without_replacement(512, 2 * bch_key.r + 1)
            assert sketch_recover(bch_key, z, x.flip(*idxs)) is None

    def test_matches_exhaustive_oracle(self, tiny_key):
        rng = Prng(b"match")
        for x_full in range(40):
            x = BitString.random(tiny_key.n, rng)
            z = sketch(tiny_key, x)
            for w in range(tiny_key.r + 2):
                idxs = rng.sample_without_replacement(tiny_key.n, w)
                xp = x.flip(*idxs)
                assert sketch_recover(tiny_key, z, xp) == exhaustive_recover(
                    tiny_key, z, xp
                )

    def test_exhaustive_all_inputs_small_n(self):
        # every x and a covering set of perturbations, against the oracle
        code = RandomDenseCode(n=10, redundancy=8, r=1, rng=Prng(b"xs"))
        key = SharpSketchKey(code=code, crhf_key=b"q" * 8, r=1, n=10, digest_bits=32)
        for v in range(1 << 10):
            x = BitString(v, 10)
            z = sketch(key, x)
            for idxs in [(), (0,), (5,), (9,), (0, 5), (3, 7)]:
                xp = x.flip(*idxs)
                assert sketch_recover(key, z, xp) == exhaustive_recover(key, z, xp)

    def test_fuzzed_sketches_never_return_bad_values(self, tiny_key):
        # adversarial z: output must be within r of x' and digest-consistent
        rng = Prng(b"fuzz")
        from chainmark.codes import Syndrome

        for _ in range(500):
            x_prime = BitString.random(tiny_key.n, rng)
            z = Sketch(
                Syndrome(BitString.random(tiny_key.code.redundancy, rng)),
                rng.bytes(tiny_key.digest_bits // 8),
            )
            got = sketch_recover(tiny_key, z, x_prime)
            if got is not None:
                assert got.hamming_distance(x_prime) <= tiny_key.r
                assert tiny_key.digest(got) == z.digest


class TestGenericRecovery:
    def test_identity_pph_zero_difference(self):
        x = BitString.random(64, Prng(b"g0"))
        ev, ho, z = identity_pph(x, r=5, n=64)
        assert generic_pph_recover(ev, ho, z, x, 5, 64) == BitString.zeros(64)

    def test_identity_pph_recovers_difference(self):
        rng = Prng(b"g200")
        for _ in range(200):
            x = BitString.random(64, rng)
            idxs = rng.sample_without_replacement(64, 5)
            e = BitString.zeros(64).flip(*idxs)
            ev, ho, z = identity_pph(x, r=5, n=64)
            assert generic_pph_recover(ev, ho, z, x ^ e, 5, 64) == e

    def test_far_pair_rejected_at_first_check(self):
        rng = Prng(b"gfar")
        x = BitString.random(64, rng)
        idxs = rng.sample_without_replacement(64, 11)
        ev, ho, z = identity_pph(x, r=5, n=64)
        assert generic_pph_recover(ev, ho, z, x.flip(*idxs), 5, 64) is None

    def test_exhaustive_small_n(self):
        # close iff recovered, and the recovery equals the difference
        n, r = 10, 2
        rng = Prng(b"gex")
        for _ in range(30):
            x = BitString.random(n, rng)
            ev, ho, z = identity_pph(x, r, n)
            for w in range(r + 3):
                for idxs in combinations(range(n), w):
                    e = BitString.zeros(n).flip(*idxs)
                    got = generic_pph_recover(ev, ho, z, x ^ e, r, n)
                    if w <= r:
                        assert got == e
                    else:
                        assert got is None

    def test_walk_steps_change_distance_by_one(self):
        rng = Prng(b"gwalk")
        for _ in range(50):
            x = BitString.random(32, rng)
            idxs = rng.sample_without_replacement(32, 3)
            ev, ho, z = identity_pph(x, r=3, n=32)
            log = []
            got = generic_pph_recover(ev, ho, z, x.flip(*idxs), 3, 32, walk_log=log)
            assert got is not None
            dists = [x.hamming_distance(p) for p in log]
            assert all(abs(b - a) == 1 for a, b in zip(dists, dists[1:]))

    def test_parameter_validation(self):
        x = BitString.zeros(8)
        ev, ho, z = identity_pph(x, 2, 8)
        with pytest.raises(ValueError):
            generic_pph_recover(ev, ho, z, BitString.zeros(7), 2, 8)
        with pytest.raises(ValueError):
            generic_pph_recover(ev, ho, z, x, 4, 8)  # r >= n/2


class TestLowerBound:
    def test_zero_choose(self):
        assert sketch_size_lower_bound(10, 0) == 0.0

    def test_small_exact_values(self):
        assert abs(sketch_size_lower_bound(4, 2) - math.log2(6)) < 1e-9
        assert abs(sketch_size_lower_bound(10, 2) - math.log2(45)) < 1e-9

    def test_relative_error_against_exact_binomial(self):
        for n, r in [(100, 3), (512, 2), (32768, 8), (1000, 500)]:
            exact = math.log2(math.comb(n, r))
            got = sketch_size_lower_bound(n, r)
            assert abs(got - exact) <= 1e-9 * max(1.0, exact)

    def test_shipped_presets_exceed_bound(self):
        desk = SharpSketchKey(
            code=bch_code(m=16, n=32768, t=8), crhf_key=b"d", r=8, n=32768
        )
        tiny = SharpSketchKey(
            code=bch_code(m=10, n=512, t=2), crhf_key=b"t", r=2, n=512, digest_bits=24
        )
        for key in (desk, tiny):
            assert key.sketch_bits >= sketch_size_lower_bound(key.n, key.r)

    def test_validation(self):
        with pytest.raises(ValueError):
            sketch_size_lower_bound(4, 5)
