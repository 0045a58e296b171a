import pytest

from chainmark.lm import Prng
from chainmark.watermark import Preset, wm_gen

# Mid-size fixture preset: desk-like geometry (ell == r_sketch, repetition 4
# so the vote filter sees ties) at a fraction of the block size.
TEST_MID = Preset(
    name="test-mid",
    n=8192,
    ell=8,
    r_sketch=8,
    payload_rep=4,
    signer_scheme="mac64",
    digest_bits=24,
    bch_m=14,
)


@pytest.fixture(scope="session")
def tiny_keys():
    return wm_gen("unit-tiny", Prng(b"fixture-tiny"))


@pytest.fixture(scope="session")
def mid_keys():
    return wm_gen(TEST_MID, Prng(b"fixture-mid"))


@pytest.fixture(scope="session")
def desk_keys():
    return wm_gen("desk-default", Prng(b"fixture-desk"))
