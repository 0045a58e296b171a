import pytest

from chainmark.bits import BitString
from chainmark.lm import LanguageModel, Prng
from chainmark.rds import rds_sign
from chainmark.watermark import (
    PresetInfeasible,
    params_summary,
    sigma_from_message,
    sigma_to_message,
    wm_gen,
    wm_generate,
    wm_generate_baseline,
    wm_recover,
    wm_verify,
    wm_verify_baseline,
    wm_verify_chain,
)

UNIFORM = LanguageModel.uniform()







def tamper_flip(rng, y, n, block_idx, count, avoid_first_subblock_bits=0):
    """Flip `count` random bits inside one block, optionally sparing the
    leading bits (the steg mask seed)."""
    lo = block_idx * n + avoid_first_subblock_bits
    hi = (block_idx + 1) * n
    idxs = [lo + i for i in rng.sample_without_replacement(hi - lo, count)]
    return y.flip(*idxs)


class TestPresets:
    def test_shipped_presets_feasible(self):
        for name in ("desk-default", "unit-tiny"):
            s = params_summary(name)
            assert s["capacity_ok"], name
            assert s["lower_bound_ok"], name

    def test_desk_size_accounting(self):
        s = params_summary("desk-default")
        assert s["capacity_bits"] == 1023
        assert s["syndrome_bits"] == 128
        assert s["sketch_bits"] == 128 + 256
        assert s["sigma_bits"] == 128 + 256 + 512
        assert s["wire_bits"] == 16 + 896
        assert s["capacity_slack_bits"] == 1023 - 912

    def test_tiny_size_accounting(self):
        s = params_summary("unit-tiny")
        assert s["capacity_bits"] == 127
        assert s["sigma_bits"] == 20 + 24 + 64
        assert s["wire_bits"] == 124
        assert s["capacity_ok"]

    def test_infeasible_preset_rejected(self):
        with pytest.raises(PresetInfeasible):
            wm_gen("tiny-infeasible", Prng(b"x"))
        assert not params_summary("tiny-infeasible")["capacity_ok"]

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            wm_gen("nope", Prng(b"x"))

    def test_keyset_split(self, tiny_keys):
        vk = tiny_keys.verification_key
        assert vk.steg is tiny_keys.steg
        assert not hasattr(vk.rds_pub, "dss")
        assert tiny_keys.generation_key is tiny_keys


class TestSigmaWire:
    def test_roundtrip(self, tiny_keys):
        y = BitString.random(tiny_keys.n, Prng(b"sw"))
        sigma = rds_sign(tiny_keys.rds, y)
        m = sigma_to_message(tiny_keys, sigma)
        assert len(m) == tiny_keys.steg.capacity_k
        back = sigma_from_message(tiny_keys.verification_key, m)
        assert back is not None
        assert back.tau == sigma.tau
        assert back.z.digest == sigma.z.digest
        assert back.z.syndrome.bits == sigma.z.syndrome.bits

    def test_bad_prefix_rejected(self, tiny_keys):
        vk = tiny_keys.verification_key
        m = BitString.random(tiny_keys.steg.capacity_k, Prng(b"junk"))
        fixed = BitString(7, 16) + m[16:]
        assert sigma_from_message(vk, fixed) is None


class TestGenerate:
    def test_output_length_exact(self, tiny_keys):
        for blocks in (1, 2, 4):
            y = wm_generate(tiny_keys, UNIFORM, BitString.zeros(8), blocks,
                            Prng(b"len"))
            assert len(y) == blocks * tiny_keys.n

    def test_seeded_regeneration_identical(self, tiny_keys):
        prompt = BitString.from_01("0110")
        a = wm_generate(tiny_keys, UNIFORM, prompt, 3, Prng(b"same"))
        b = wm_generate(tiny_keys, UNIFORM, prompt, 3, Prng(b"same"))
        assert a == b

    def test_num_blocks_validation(self, tiny_keys):
        with pytest.raises(ValueError):
            wm_generate(tiny_keys, UNIFORM, BitString.zeros(0), 0, Prng(b"x"))


class TestVerify:
    def test_roundtrip_accepts_at_offset_zero(self, tiny_keys):
        y = wm_generate(tiny_keys, UNIFORM, BitString.zeros(4), 2, Prng(b"rt"))
        report = wm_verify(tiny_keys.verification_key, y)
        assert report.accepted == 1
        assert report.matched_offset == 0

    def test_too_short(self, tiny_keys):
        report = wm_verify(tiny_keys.verification_key, BitString.zeros(100))
        assert report.accepted == 0
        assert report.reason == "TooShort"

    def test_random_inputs_reject(self, tiny_keys):
        vk = tiny_keys.verification_key
        rng = Prng(b"rand")
        accepted = 0
        for _ in range(50):
            accepted += wm_verify(vk, rng.bits(4 * tiny_keys.n)).accepted
        assert accepted == 0

    def test_flips_in_message_blocks_still_verify(self, tiny_keys):
        # flips within the sketch radius in blocks 1..B-1, final block clean
        rng = Prng(b"flip")
        vk = tiny_keys.verification_key
        r = tiny_keys.preset.r_sketch
        for _ in range(20):
            y = wm_generate(tiny_keys, UNIFORM, rng.bits(8), 3, rng)
            attacked = y
            for b in (0, 1):
                attacked = tamper_flip(rng, attacked, tiny_keys.n, b, r,
                                       avoid_first_subblock_bits=tiny_keys.steg.ell)
            assert wm_verify(vk, attacked).accepted == 1

    def test_planted_inside_random_padding(self, tiny_keys):
        vk = tiny_keys.verification_key
        rng = Prng(b"plant")
        y = wm_generate(tiny_keys, UNIFORM, rng.bits(4), 2, rng)
        pad = 10 * tiny_keys.n
        for _ in range(3):
            offset = rng.randrange(pad)
            zeta = rng.bits(offset) + y + rng.bits(pad - offset)
            report = wm_verify(vk, zeta)
            assert report.accepted == 1
            assert report.matched_offset == offset

    def test_bit_shift_does_not_break_acceptance(self, mid_keys):
        # verification scans all offsets, not just multiples of n
        vk = mid_keys.verification_key
        rng = Prng(b"shift")
        y = wm_generate(mid_keys, UNIFORM, rng.bits(8), 2, rng)
        for shift in (1, 3, 11):
            report = wm_verify(vk, rng.bits(shift) + y)
            assert report.accepted == 1
            assert report.matched_offset == shift


class TestChain:
    def test_chain_accepts_all_r(self, tiny_keys):
        vk = tiny_keys.verification_key
        y = wm_generate(tiny_keys, UNIFORM, BitString.zeros(4), 4, Prng(b"ch"))
        for r in (2, 3, 4):
            report = wm_verify_chain(vk, y, r)
            assert report.accepted == 1
            assert report.matched_offset == 0
            assert report.chain_length_r == r

    def test_chain_monotonicity(self, tiny_keys):
        vk = tiny_keys.verification_key
        rng = Prng(b"mono")
        y = wm_generate(tiny_keys, UNIFORM, rng.bits(8), 4, rng)
        # break the last block: chains that avoid it still verify
        attacked = tamper_flip(rng, y, tiny_keys.n, 3, 50)
        accepted = {r: wm_verify_chain(vk, attacked, r).accepted for r in (2, 3, 4)}
        assert accepted[2] == 1 and accepted[3] == 1
        for r in (3, 4):
            if accepted[r]:
                assert accepted[r - 1] == 1

    def test_chain_too_short(self, tiny_keys):
        vk = tiny_keys.verification_key
        y = wm_generate(tiny_keys, UNIFORM, BitString.zeros(4), 2, Prng(b"cs"))
        assert wm_verify_chain(vk, y, 3).reason == "TooShort"

    def test_chain_r_validation(self, tiny_keys):
        with pytest.raises(ValueError):
            wm_verify_chain(tiny_keys.verification_key, BitString.zeros(2048), 1)

    def test_verify_accept_implies_chain2_same_offset(self, tiny_keys):
        vk = tiny_keys.verification_key
        rng = Prng(b"coh2")
        y = wm_generate(tiny_keys, UNIFORM, rng.bits(4), 2, rng)
        zeta = rng.bits(33) + y
        rep = wm_verify(vk, zeta)
        rep2 = wm_verify_chain(vk, zeta, 2)
        assert rep.accepted == rep2.accepted == 1
        assert rep.matched_offset == rep2.matched_offset


class TestRecover:
    def test_unmodified_three_blocks(self, tiny_keys):
        vk = tiny_keys.verification_key
        y = wm_generate(tiny_keys, UNIFORM, BitString.zeros(4), 3, Prng(b"rec"))
        n = tiny_keys.n
        got = wm_recover(vk, y)
        contents = got.contents()
        assert y[0:n] in contents  # r=2 window on block 1
        assert y[n : 2 * n] in contents  # r=2 window on block 2
        assert y[0 : 2 * n] in contents  # r=3 window: blocks 1-2 bit-exact
        for e in got:
            assert len(e.bits) == (e.chain_r - 1) * n

    def test_corrupted_blocks_recover_exact_original(self, tiny_keys):
        # at payload repetition 1 the carrier blocks tolerate no corruption,
        # so flips go in block 1 only; its signature chain stays intact and
        # the r=3 window must reproduce blocks 1-2 bit-exactly
        vk = tiny_keys.verification_key
        rng = Prng(b"recflip")
        n = tiny_keys.n
        r = tiny_keys.preset.r_sketch
        for _ in range(10):
            y = wm_generate(tiny_keys, UNIFORM, rng.bits(8), 3, rng)
            attacked = tamper_flip(rng, y, n, 0, r)
            got = wm_recover(vk, attacked)
            assert y[0 : 2 * n] in got.contents()

    def test_random_input_recovers_nothing(self, tiny_keys):
        vk = tiny_keys.verification_key
        rng = Prng(b"recrand")
        for _ in range(30):
            assert len(wm_recover(vk, rng.bits(3 * tiny_keys.n))) == 0

    def test_recover_nonempty_implies_verify(self, tiny_keys):
        vk = tiny_keys.verification_key
        rng = Prng(b"reccoh")
        cases = [
            wm_generate(tiny_keys, UNIFORM, rng.bits(4), 2, rng),
            rng.bits(2 * tiny_keys.n),
        ]
        for zeta in cases:
            got = wm_recover(vk, zeta)
            if len(got) > 0:
                assert wm_verify(vk, zeta).accepted == 1

    def test_dedupes_by_content(self, tiny_keys):
        vk = tiny_keys.verification_key
        y = wm_generate(tiny_keys, UNIFORM, BitString.zeros(4), 3, Prng(b"dd"))
        got = wm_recover(vk, y)
        contents = got.contents()
        assert len(contents) == len(set(contents))

    def test_cross_response_splice_yields_only_genuine_blocks(self, tiny_keys):
        # blocks spliced from two responses: recovered entries must be
        # substrings of a single genuine response, never a chimera
        vk = tiny_keys.verification_key
        rng = Prng(b"splice")
        n = tiny_keys.n
        ya = wm_generate(tiny_keys, UNIFORM, rng.bits(4), 2, rng)
        yb = wm_generate(tiny_keys, UNIFORM, rng.bits(4), 2, rng)
        zeta = ya + yb
        got = wm_recover(vk, zeta)
        for e in got:
            assert ya.find(e.bits) >= 0 or yb.find(e.bits) >= 0


class TestBaseline:
    def test_baseline_roundtrip(self, tiny_keys):
        vk = tiny_keys.verification_key
        y = wm_generate_baseline(tiny_keys, UNIFORM, BitString.zeros(4), 3,
                                 Prng(b"base"))
        assert len(y) == 3 * tiny_keys.n
        assert wm_verify_baseline(vk, y) == 1

    def test_baseline_random_rejects_with_sparse_decoder(self, mid_keys):
        vk = mid_keys.verification_key
        rng = Prng(b"baser")
        accepted = 0
        for _ in range(20):
            accepted += wm_verify_baseline(vk, rng.bits(3 * mid_keys.n))
        assert accepted == 0

    def test_baseline_robust_to_scrambled_subblock(self, mid_keys):
        vk = mid_keys.verification_key
        rng = Prng(b"baserob")
        y = wm_generate_baseline(mid_keys, UNIFORM, rng.bits(8), 2, rng)
        i = 1 + rng.randrange(mid_keys.steg.carried_bits)
        attacked = y.set_slice(i * mid_keys.steg.ell, rng.bits(mid_keys.steg.ell))
        assert wm_verify_baseline(vk, attacked) == 1

    def test_baseline_done_pattern_truncates(self, tiny_keys):
        rng = Prng(b"done")
        probe = wm_generate_baseline(tiny_keys, UNIFORM, BitString.zeros(4), 3,
                                     Prng(b"done-inner"))
        pattern = probe[700:712]
        y = wm_generate_baseline(tiny_keys, UNIFORM, BitString.zeros(4), 3,
                                 Prng(b"done-inner"), done_pattern=pattern)
        assert len(y) < 3 * tiny_keys.n
        assert y.find(pattern) == -1 or y.find(pattern) + len(pattern) <= len(y)


class TestStrideMode:
    def test_stride_n_accepts_aligned(self, tiny_keys):
        vk = tiny_keys.verification_key
        y = wm_generate(tiny_keys, UNIFORM, BitString.zeros(4), 3, Prng(b"st"))
        n = tiny_keys.n
        assert wm_verify(vk, y, stride=n).accepted == 1
        assert wm_verify_chain(vk, y, 3, stride=n).accepted == 1
        got = wm_recover(vk, y, stride=n)
        assert y[0 : 2 * n] in got.contents()

    def test_stride_n_weakens_substring_quantifier(self, tiny_keys):
        # off by default precisely because a shifted copy stops verifying
        vk = tiny_keys.verification_key
        rng = Prng(b"st2")
        y = wm_generate(tiny_keys, UNIFORM, rng.bits(4), 2, rng)
        shifted = rng.bits(5) + y
        assert wm_verify(vk, shifted).accepted == 1
        assert wm_verify(vk, shifted, stride=tiny_keys.n).accepted == 0

    def test_stride_validation(self, tiny_keys):
        with pytest.raises(ValueError):
            wm_verify(tiny_keys.verification_key,
                      BitString.zeros(2 * tiny_keys.n), stride=0)


class TestMidScaleRobustness:
    def test_scramble_within_payload_radius(self, mid_keys):
        # scramble exactly the certified number of carried sub-blocks in the
        # final block, flip within sketch radius elsewhere: always verifies
        vk = mid_keys.verification_key
        rng = Prng(b"midrob")
        n, ell = mid_keys.n, mid_keys.steg.ell
        radius = mid_keys.steg.payload_radius
        assert radius >= 1
        for _ in range(10):
            y = wm_generate(mid_keys, UNIFORM, rng.bits(8), 2, rng)
            attacked = tamper_flip(rng, y, n, 0, mid_keys.preset.r_sketch,
                                   avoid_first_subblock_bits=ell)
            for _ in range(radius):
                i = 1 + rng.randrange(mid_keys.steg.carried_bits)
                attacked = attacked.set_slice(n + i * ell, rng.bits(ell))
            assert wm_verify(vk, attacked).accepted == 1
            got = wm_recover(vk, attacked)
            assert y[0:n] in got.contents()
