"""chainmark: recoverable, robust, and unforgeable watermarking for
binary token streams.

The construction chains three layers: difference-recovering sharp
sketches for Hamming closeness, robust signatures built by signing a
sketch, and block steganography that embeds each block's signature into
the next generated block.  Verification slides over every bit offset of
a candidate string and accepts when an embedded signature verifies
against the preceding window; recovery reconstructs the original signed
blocks bit-exactly from corrupted copies.
"""

from .bits import (
    BitString,
    BlockEquality,
    BlockView,
    Equality,
    EveryBlockClose,
    Hamming,
    Predicate,
    block_equality_close,
    every_block_close,
    hamming_close,
)
from .codes import (
    BchCode,
    LinearCode,
    RandomDenseCode,
    RepetitionCode,
    Syndrome,
    bch_code,
    decode_syndrome,
    payload_decode,
    payload_encode,
    syndrome,
)
from .harness import (
    AmbiguityDetected,
    AttackSpec,
    AttackSummary,
    AttackTranscript,
    brute_force_sketch_oracle,
    run_attack,
    undetectability_test,
)
from .lm import (
    LanguageModel,
    Prng,
    SamplerState,
    min_entropy_per_block,
    next_bit_prob,
    response,
)
from .rds import (
    RdsKeypair,
    RdsPublicKey,
    RobustSignature,
    rds_gen,
    rds_recover,
    rds_sign,
    rds_verify,
)
from .signer import SignerKeypair, dss_gen, dss_sign, dss_verify
from .sketch import (
    SharpSketchKey,
    Sketch,
    generic_pph_recover,
    identity_pph,
    sketch,
    sketch_recover,
    sketch_size_lower_bound,
)
from .steg import (
    EmbedFailure,
    EmbedResult,
    StegKey,
    steg_dec,
    steg_embed,
    steg_gen,
    steg_scan,
)
from .watermark import (
    PRESETS,
    Preset,
    PresetInfeasible,
    RecoveryEntry,
    RecoveryList,
    VerificationReport,
    WatermarkKeySet,
    WatermarkVerifyKey,
    params_summary,
    wm_gen,
    wm_generate,
    wm_generate_baseline,
    wm_recover,
    wm_verify,
    wm_verify_baseline,
    wm_verify_chain,
)

__version__ = "0.1.0"
