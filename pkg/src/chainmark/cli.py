"""Command-line surface: key lifecycle, generation, verification,
recovery, attack simulation, and parameter reporting.

Exit codes are the machine contract: 0 for success/accept, 1 for
reject/no-result/failed-check, 2 for usage or input errors.  Human
reports go to stdout as ``key=value`` lines; diagnostics go to stderr.

Key files are small versioned binaries.  A generation key file contains
signing material; a verification key file never does, and verification
runs with only the latter.
"""
from __future__ import annotations

import argparse
import json
import os
import struct
import sys
from pathlib import Path
from typing import Optional

from .bits import BitString
from .codes import RepetitionCode, bch_code
from .harness import AttackSpec, run_attack, undetectability_test
from .lm import LanguageModel, Prng
from .rds import RdsKeypair, RdsPublicKey
from .sketch import SharpSketchKey
from .steg import StegKey
from .watermark import (
    PRESETS,
    PresetInfeasible,
    WatermarkKeySet,
    WatermarkVerifyKey,
    params_summary,
    wm_gen,
    wm_generate,
    wm_recover,
    wm_verify,
    wm_verify_chain,
)
from . import signer as _signer

KEYFILE_MAGIC = b"CMWMKEY\x00"
_ROLE_GENERATION = 1
_ROLE_VERIFICATION = 2

ENV_PRESET = "CHAINMARK_PRESET"


class CliError(Exception):
    pass


# ---------------------------------------------------------------------------
# Key files
# ---------------------------------------------------------------------------

def _pack_blob(b: bytes) -> bytes:
    return struct.pack("<H", len(b)) + b


def _unpack_blob(buf: bytes, off: int):
    (ln,) = struct.unpack_from("<H", buf, off)
    off += 2
    return buf[off : off + ln], off + ln


def write_keyfile(path, keys: WatermarkKeySet, role: str) -> None:
    if role == "generation":
        role_tag = _ROLE_GENERATION
        signer_blob = _signer.serialize_key(keys.rds.dss, include_secret=True)
    elif role == "verification":
        role_tag = _ROLE_VERIFICATION
        signer_blob = _signer.serialize_key(keys.rds.dss, include_secret=False)
    else:
        raise ValueError(f"unknown key role {role!r}")
    body = (
        KEYFILE_MAGIC
        + struct.pack("<HB", 1, role_tag)
        + _pack_blob(keys.preset.name.encode())
        + _pack_blob(keys.steg.r_seed)
        + _pack_blob(keys.rds.sketch_key.crhf_key)
        + _pack_blob(signer_blob)
    )
    Path(path).write_bytes(body)


def _rebuild_material(preset_name: str):
    if preset_name not in PRESETS:
        raise CliError(f"key file references unknown preset {preset_name!r}")
    p = PRESETS[preset_name]
    code = bch_code(m=p.bch_m, n=p.n, t=p.r_sketch)
    carried = p.n // p.ell - 1
    payload = RepetitionCode(carried, carried // p.payload_rep)
    return p, code, payload


def read_keyfile(path):
    """Returns a WatermarkKeySet (generation role) or WatermarkVerifyKey."""
    buf = Path(path).read_bytes()
    if buf[:8] != KEYFILE_MAGIC:
        raise CliError(f"{path}: not a key file")
    version, role_tag = struct.unpack_from("<HB", buf, 8)
    if version != 1:
        raise CliError(f"{path}: unsupported key file version {version}")
    off = 11
    name_b, off = _unpack_blob(buf, off)
    seed, off = _unpack_blob(buf, off)
    crhf_key, off = _unpack_blob(buf, off)
    signer_blob, off = _unpack_blob(buf, off)
    scheme, key_bytes, _ = _signer.deserialize_key(signer_blob)

    preset, code, payload = _rebuild_material(name_b.decode())
    steg = StegKey(r_seed=seed, n=preset.n, ell=preset.ell, payload_code=payload)
    sketch_key = SharpSketchKey(
        code=code, crhf_key=crhf_key, r=preset.r_sketch, n=preset.n,
        digest_bits=preset.digest_bits,
    )
    if role_tag == _ROLE_GENERATION:
        dss = _signer.keypair_from_secret(scheme, key_bytes)
        rds = RdsKeypair(sketch_key=sketch_key, dss=dss, message_len_n=preset.n)
        return WatermarkKeySet(steg=steg, rds=rds, preset=preset)
    if role_tag == _ROLE_VERIFICATION:
        rds_pub = RdsPublicKey(
            sketch_key=sketch_key, signer_public=key_bytes, scheme_tag=scheme
        )
        return WatermarkVerifyKey(steg=steg, rds_pub=rds_pub, preset=preset)
    raise CliError(f"{path}: unknown key role tag {role_tag}")


def _require_generation(obj, path) -> WatermarkKeySet:
    if not isinstance(obj, WatermarkKeySet):
        raise CliError(f"{path}: need a generation key file")
    return obj


def _require_verification(obj, path) -> WatermarkVerifyKey:
    if isinstance(obj, WatermarkKeySet):
        return obj.verification_key
    return obj


# ---------------------------------------------------------------------------
# Shared argument handling
# ---------------------------------------------------------------------------

def _rng_from_seed(seed_hex: Optional[str]) -> Prng:
    if seed_hex:
        try:
            return Prng(bytes.fromhex(seed_hex))
        except ValueError:
            raise CliError(f"--seed must be hex, got {seed_hex!r}") from None
    return Prng(os.urandom(32))


def _load_model(spec: str) -> LanguageModel:
    if spec == "uniform":
        return LanguageModel.uniform()
    if spec.startswith("biased:"):
        return LanguageModel.biased(float(spec.split(":", 1)[1]))
    try:
        return LanguageModel.from_json(Path(spec).read_text())
    except FileNotFoundError:
        raise CliError(f"model spec file not found: {spec}") from None
    except (ValueError, KeyError) as e:
        raise CliError(f"bad model spec {spec}: {e}") from None


def _load_bits(arg: str) -> BitString:
    if arg.startswith("@"):
        return BitString.parse_text(Path(arg[1:]).read_text())
    return BitString.parse_text(arg)


def _preset_name(args) -> str:
    if args.preset:
        return args.preset
    env = os.environ.get(ENV_PRESET)
    if env:
        return env
    raise CliError(f"no --preset given and {ENV_PRESET} is unset")


def _parse_attack(text: str) -> AttackSpec:
    head, _, rest = text.partition(":")
    params = {}
    if rest:
        for item in rest.split(","):
            k, _, v = item.partition("=")
            params[k.strip()] = v.strip()
    try:
        if head == "flip":
            return AttackSpec(kind="flip_per_block", count=int(params["count"]))
        if head == "scramble":
            return AttackSpec(
                kind="scramble_subblocks",
                fraction=float(params["fraction"]),
                preserve_first=params.get("preserve_first", "1") not in ("0", "false"),
            )
        if head == "splice":
            return AttackSpec(kind="splice_into_random",
                              padding_bits=int(params["padding"]))
        if head == "random":
            return AttackSpec(kind="pure_random", length=int(params["length"]))
        if head == "crosssplice":
            return AttackSpec(kind="cross_response_splice")
    except KeyError as e:
        raise CliError(f"attack {head!r} is missing parameter {e}") from None
    except ValueError as e:
        raise CliError(f"bad attack parameter: {e}") from None
    raise CliError(
        f"unknown attack {head!r}; use flip:count=K, scramble:fraction=F, "
        "splice:padding=B, random:length=B, or crosssplice"
    )


def _emit(mapping: dict) -> None:
    from .report import format_kv

    sys.stdout.write(format_kv(mapping))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_keygen(args) -> int:
    name = _preset_name(args)
    rng = _rng_from_seed(args.seed)
    try:
        keys = wm_gen(name, rng)
    except PresetInfeasible as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    write_keyfile(args.out_gen, keys, "generation")
    write_keyfile(args.out_ver, keys, "verification")
    _emit({"preset": name, "generation_key": args.out_gen,
           "verification_key": args.out_ver})
    return 0


def cmd_generate(args) -> int:
    keys = _require_generation(read_keyfile(args.gen_key), args.gen_key)
    model = _load_model(args.model)
    prompt = _load_bits(args.prompt) if args.prompt else BitString.zeros(0)
    rng = _rng_from_seed(args.seed)
    y = wm_generate(keys, model, prompt, args.blocks, rng)
    Path(args.out).write_text(y.to_b64() + "\n")
    _emit({"blocks": args.blocks, "bits": len(y), "out": args.out})
    return 0


def cmd_verify(args) -> int:
    vk = _require_verification(read_keyfile(args.ver_key), args.ver_key)
    zeta = _load_bits("@" + args.infile)
    if args.chain:
        report = wm_verify_chain(vk, zeta, args.chain)
    else:
        report = wm_verify(vk, zeta)
    _emit(
        {
            "accepted": report.accepted,
            "matched_offset": (
                report.matched_offset if report.matched_offset is not None else "none"
            ),
            "chain_length_r": report.chain_length_r,
            "reason": report.reason or "none",
        }
    )
    return 0 if report.accepted else 1


def cmd_recover(args) -> int:
    vk = _require_verification(read_keyfile(args.ver_key), args.ver_key)
    zeta = _load_bits("@" + args.infile)
    recs = wm_recover(vk, zeta)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    meta = []
    for i, entry in enumerate(recs):
        name = f"recovered_{i:03d}.txt"
        (outdir / name).write_text(entry.bits.to_b64() + "\n")
        meta.append(
            {
                "file": name,
                "offset": entry.offset,
                "chain_r": entry.chain_r,
                "bits": len(entry.bits),
            }
        )
    (outdir / "recoveries.json").write_text(json.dumps(meta, indent=2) + "\n")
    _emit({"recoveries": len(recs), "out": str(outdir)})
    return 0 if len(recs) else 1


def cmd_attack(args) -> int:
    keys = _require_generation(read_keyfile(args.gen_key), args.gen_key)
    if args.ver_key:
        vk = _require_verification(read_keyfile(args.ver_key), args.ver_key)
        if (
            vk.steg.r_seed != keys.steg.r_seed
            or vk.rds_pub != keys.rds.public
        ):
            raise CliError("verification key does not match generation key")
    spec = _parse_attack(args.attack)
    model = _load_model(args.model)
    rng = _rng_from_seed(args.seed)
    summary = run_attack(keys, model, spec, trials=args.trials,
                         num_blocks=args.blocks, rng=rng)
    _emit(summary.to_dict())
    if args.out_dir:
        from .report import attack_report, undetectability_report

        written = attack_report(args.out_dir, summary)
        if args.undetectability_bits:
            stats = undetectability_test(
                keys, model, samples=args.undetectability_bits, rng=rng
            )
            written += undetectability_report(args.out_dir, stats)
        for p in written:
            print(f"wrote {p}", file=sys.stderr)
    return 0


def cmd_params(args) -> int:
    name = _preset_name(args)
    try:
        summary = params_summary(name)
    except ValueError as e:
        raise CliError(str(e)) from None
    _emit(summary)
    return 0 if summary["capacity_ok"] and summary["lower_bound_ok"] else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="chainmark",
        description="Recoverable, robust, unforgeable watermarking for "
        "binary token streams",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate a key pair for a preset")
    p.add_argument("--preset", help=f"preset name (or ${ENV_PRESET})")
    p.add_argument("--out-gen", required=True, help="generation key file")
    p.add_argument("--out-ver", required=True, help="verification key file")
    p.add_argument("--seed", help="hex seed for reproducible keys")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("generate", help="generate watermarked output")
    p.add_argument("--gen-key", required=True)
    p.add_argument("--model", required=True,
                   help="model spec JSON path, 'uniform', or 'biased:P'")
    p.add_argument("--prompt", default="",
                   help="prompt bits ('01...' or b<len>:base64, @file to read)")
    p.add_argument("--blocks", type=int, required=True)
    p.add_argument("--seed", help="hex seed")
    p.add_argument("--out", required=True, help="output bitstream file")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("verify", help="verify a candidate bitstream")
    p.add_argument("--ver-key", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--chain", type=int, default=0,
                   help="require an r-block chain instead of a single pair")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("recover", help="recover watermarked originals")
    p.add_argument("--ver-key", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("attack", help="run an attack simulation")
    p.add_argument("--gen-key", required=True)
    p.add_argument("--ver-key", help="must match the generation key if given")
    p.add_argument("--model", required=True)
    p.add_argument("--attack", required=True,
                   help="flip:count=K | scramble:fraction=F | splice:padding=B "
                        "| random:length=B | crosssplice")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--blocks", type=int, default=3)
    p.add_argument("--seed", help="hex seed")
    p.add_argument("--out-dir", help="write summary text/JSON and figures here")
    p.add_argument("--undetectability-bits", type=int, default=0,
                   help="also run the undetectability proxy on this many bits")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("params", help="report preset parameters and checks")
    p.add_argument("--preset", help=f"preset name (or ${ENV_PRESET})")
    p.set_defaults(func=cmd_params)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
