"""augkit command-line interface.

One binary, one subcommand per operation. Randomized subcommands accept
--seed and default it to 0 rather than to entropy: this is corpus-building
tooling, where a silently irreproducible run is the worse failure. Exit
codes: 0 success, 1 operational failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .audio import read_wav_file, write_wav_file
from .features import (
    FrontendConfig,
    VtlnConfig,
    cmvn,
    frontend_config_from_file,
    mfcc,
    read_archive_file,
    read_vtln_map,
    write_archive_file,
)
from .lattice import (
    DEFAULT_ACOUSTIC_SCALE,
    DEFAULT_MBR_NBEST,
    mbr_decode,
    nbest,
    parse_lattice,
    serialize_lattice,
    union,
)
from .manifest import (
    cleanse,
    parse_data_dir,
    read_ctm_file,
    write_ctm,
    write_data_dir,
)
from .objectives import LogitVector, ScoredHypothesis, mmi_objective, rnnlm_objective
from .pipeline import PipelineConfig, expand_corpus, featurize_corpus
from .resample import SpeedFactor, speed_perturb
from .seeding import derive_seed
from .specaugment import SpecAugmentConfig, spec_augment
from .word_perturb import apply_plan, make_plan

DEFAULT_SEED = 0


def _cmd_speed(args) -> int:
    w = read_wav_file(args.input)
    write_wav_file(args.output, speed_perturb(w, SpeedFactor(args.factor)))
    return 0


def _cmd_usp(args) -> int:
    w = read_wav_file(args.input)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.input).stem
    for alpha in (0.9, 1.1):
        write_wav_file(outdir / f"{stem}.sp{alpha}.wav", speed_perturb(w, SpeedFactor(alpha)))
    return 0


def _cmd_wsp(args) -> int:
    w = read_wav_file(args.input)
    utt_id = args.utt if args.utt is not None else Path(args.input).stem
    words = sorted(
        (a for a in read_ctm_file(args.ctm) if a.utt_id == utt_id), key=lambda a: a.start
    )
    if not words:
        raise ValueError(f"no CTM rows for utterance '{utt_id}' in {args.ctm}")
    plan = make_plan(words, args.fraction_fast, args.seed)
    out, new_words = apply_plan(w, words, plan, crossfade_ms=args.crossfade_ms)
    write_wav_file(args.output, out)
    if args.out_ctm:
        Path(args.out_ctm).write_text(write_ctm(new_words), encoding="utf-8")
    return 0


def _cmd_specaug(args) -> int:
    entries = read_archive_file(args.input)
    cfg = SpecAugmentConfig(
        num_freq_masks=args.mf,
        max_freq_width=args.F,
        num_time_masks=args.mt,
        max_time_width=args.T,
        max_time_fraction=args.p,
        mask_value=args.mask_value,
        fill_with_dim_mean=args.fill_dim_mean,
    )
    out = []
    for utt, m in entries:
        seeded = replace(cfg, seed=derive_seed(args.seed, utt, "specaug"))
        out.append((utt, spec_augment(m, seeded)))
    write_archive_file(args.output, out)
    return 0


def _cmd_mfcc(args) -> int:
    fe = frontend_config_from_file(args.config) if args.config else FrontendConfig()
    vtln_table = read_vtln_map(args.vtln_map) if args.vtln_map else None
    source = Path(args.input)
    if source.suffix.lower() == ".wav":
        jobs = [(source.stem, str(source))]
    else:
        jobs = []
        for lineno, line in enumerate(source.read_text(encoding="utf-8").splitlines(), 1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 2:
                raise ValueError(f"{source.name} line {lineno}: expected '<utt-id> <path>'")
            jobs.append((fields[0], fields[1]))
    entries = []
    for utt, path in jobs:
        w = read_wav_file(path)
        cfg = fe if fe.sample_rate == w.sample_rate else replace(fe, sample_rate=w.sample_rate)
        vtln = None
        if vtln_table is not None:
            if utt not in vtln_table:
                raise ValueError(f"vtln map has no warp for '{utt}'")
            vtln = VtlnConfig(vtln_table[utt])
        entries.append((utt, mfcc(w, cfg, vtln)))
    write_archive_file(args.output, entries)
    return 0


def _cmd_cmvn(args) -> int:
    entries = read_archive_file(args.input)
    utt2spk = None
    if args.utt2spk:
        utt2spk = {}
        for line in Path(args.utt2spk).read_text(encoding="utf-8").splitlines():
            fields = line.split()
            if fields:
                utt2spk[fields[0]] = fields[1]
    write_archive_file(args.output, cmvn(entries, utt2spk, args.mode))
    return 0


def _cmd_cleanse(args) -> int:
    manifest = parse_data_dir(args.datadir)
    alignments = read_ctm_file(args.ctm)
    kept = cleanse(manifest, alignments, args.min_conf, args.min_words)
    write_data_dir(kept, args.outdir)
    print(f"kept {len(kept.utt_ids)} of {len(manifest.utt_ids)} utterances")
    return 0


def _cmd_expand(args) -> int:
    manifest = parse_data_dir(args.datadir)
    ctm = read_ctm_file(args.ctm) if args.ctm else []
    if not args.no_wsp and not args.ctm:
        raise ValueError("word-level perturbation requires --ctm (or pass --no-wsp)")
    cfg = PipelineConfig(
        global_seed=args.seed,
        enable_usp=not args.no_usp,
        enable_wsp=not args.no_wsp,
        workers=args.workers,
    )
    expanded = expand_corpus(manifest, ctm, cfg, args.outdir)
    if args.summary:
        summary_src = Path(args.outdir) / "summary.json"
        Path(args.summary).write_text(summary_src.read_text(encoding="utf-8"), encoding="utf-8")
    print(f"expanded {len(manifest.utt_ids)} -> {len(expanded.utt_ids)} utterances")
    return 0


def _cmd_featurize(args) -> int:
    manifest = parse_data_dir(args.datadir)
    specaug = None
    if args.specaug:
        specaug = SpecAugmentConfig(
            num_freq_masks=args.mf,
            max_freq_width=args.F,
            num_time_masks=args.mt,
            max_time_width=args.T,
            max_time_fraction=args.p,
        )
    cfg = PipelineConfig(
        global_seed=args.seed,
        specaugment=specaug,
        vtln_map=args.vtln_map,
        cmvn_mode=args.cmvn,
        workers=args.workers,
    )
    featurize_corpus(manifest, cfg, args.output, summary_path=args.summary)
    return 0


def _cmd_lat_union(args) -> int:
    lattices = []
    for path in args.inputs:
        lattices.extend(parse_lattice(Path(path).read_text(encoding="utf-8")))
    priors = None
    if args.priors:
        priors = [float(p) for p in args.priors.split(",")]
    merged = union(lattices, priors)
    Path(args.output).write_text(serialize_lattice(merged), encoding="utf-8")
    return 0


def _cmd_nbest(args) -> int:
    for lat in parse_lattice(Path(args.input).read_text(encoding="utf-8")):
        for hyp in nbest(lat, args.n, args.acoustic_scale):
            print(f"{lat.id} {hyp.combined_cost:.6f} {' '.join(hyp.words)}")
    return 0


def _cmd_mbr(args) -> int:
    for lat in parse_lattice(Path(args.input).read_text(encoding="utf-8")):
        hyp = mbr_decode(lat, args.n, args.acoustic_scale)
        print(" ".join(hyp.words))
    return 0


def _cmd_mmi(args) -> int:
    rows = []
    for lineno, line in enumerate(Path(args.scores).read_text(encoding="utf-8").splitlines(), 1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 3:
            raise ValueError(
                f"{args.scores} line {lineno}: expected 'label acoustic_loglik lm_logprob'"
            )
        rows.append(ScoredHypothesis(fields[0], float(fields[1]), float(fields[2])))
    if not rows:
        raise ValueError(f"{args.scores}: no score rows")
    print(f"{mmi_objective(rows[0], rows, args.k):.12g}")
    return 0


def _cmd_rnnlm_obj(args) -> int:
    tokens = Path(args.logits).read_text(encoding="utf-8").split()
    logits = tuple(float(t) for t in tokens)
    print(f"{rnnlm_objective(LogitVector(logits, args.target)):.12g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="augkit",
        description="Speech corpus augmentation toolkit: speed perturbation, "
        "SpecAugment, MFCC/VTLN/CMVN features, lattice combination and MBR decoding.",
    )
    parser.add_argument("--version", action="version", version=f"augkit {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, metavar="<command>")

    p = sub.add_parser("speed", help="resample one WAV by a speed factor")
    p.add_argument("--factor", type=float, required=True, help="speaking-rate multiplier alpha")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=_cmd_speed)

    p = sub.add_parser("usp", help="write the 0.9x and 1.1x copies of one WAV")
    p.add_argument("--outdir", required=True)
    p.add_argument("input")
    p.set_defaults(func=_cmd_usp)

    p = sub.add_parser("wsp", help="word-level speed perturbation of one WAV")
    p.add_argument("--ctm", required=True, help="word alignments (CTM)")
    p.add_argument("--fraction-fast", type=float, required=True, help="share of words sped to 1.1x (0.8 or 0.2 for the standard copies)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--utt", help="utterance id in the CTM (default: input file stem)")
    p.add_argument("--out-ctm", help="write time-scaled alignments here")
    p.add_argument("--crossfade-ms", type=float, default=0.0, help="junction crossfade (default 0: hard splice)")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=_cmd_wsp)

    p = sub.add_parser("specaug", help="mask a feature archive")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--mf", type=int, default=1, help="number of frequency masks")
    p.add_argument("--F", type=int, default=10, help="max frequency-mask width (bins)")
    p.add_argument("--mt", type=int, default=1, help="number of time masks")
    p.add_argument("--T", type=int, default=20, help="max time-mask width (frames)")
    p.add_argument("--p", type=float, default=0.05, help="max time-mask fraction of the utterance")
    p.add_argument("--mask-value", type=float, default=0.0)
    p.add_argument("--fill-dim-mean", action="store_true", help="mask with per-dimension means")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=_cmd_specaug)

    p = sub.add_parser("mfcc", help="extract MFCCs from a wav.scp or single WAV")
    p.add_argument("--vtln-map", help="per-speaker warp table '<spk> <alpha>'")
    p.add_argument("--config", help="front-end key=value file")
    p.add_argument("input", help="wav.scp or a .wav file")
    p.add_argument("output", help="output text archive")
    p.set_defaults(func=_cmd_mfcc)

    p = sub.add_parser("cmvn", help="mean/variance-normalize a feature archive")
    p.add_argument("--mode", choices=["speaker", "utterance"], required=True)
    p.add_argument("--utt2spk", help="required for speaker mode")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=_cmd_cmvn)

    p = sub.add_parser("cleanse", help="drop low-confidence utterances from a data dir")
    p.add_argument("--ctm", required=True, help="alignments with confidences")
    p.add_argument("--min-conf", type=float, default=0.9, help="mean-confidence threshold (default 0.9)")
    p.add_argument("--min-words", type=int, default=0)
    p.add_argument("datadir")
    p.add_argument("outdir")
    p.set_defaults(func=_cmd_cleanse)

    p = sub.add_parser("expand", help="write the augmented (up to 5x) corpus")
    p.add_argument("--ctm", help="word alignments; required unless --no-wsp")
    p.add_argument("--no-usp", action="store_true")
    p.add_argument("--no-wsp", action="store_true")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--outdir", required=True)
    p.add_argument("--summary", help="also write the JSON run report here")
    p.add_argument("datadir")
    p.set_defaults(func=_cmd_expand)

    p = sub.add_parser("featurize", help="MFCC + CMVN (+ SpecAugment) for a data dir")
    p.add_argument("--specaug", action="store_true")
    p.add_argument("--mf", type=int, default=1)
    p.add_argument("--F", type=int, default=10)
    p.add_argument("--mt", type=int, default=1)
    p.add_argument("--T", type=int, default=20)
    p.add_argument("--p", type=float, default=0.05)
    p.add_argument("--vtln-map")
    p.add_argument("--cmvn", choices=["speaker", "utterance"], default="speaker")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--summary", help="write the JSON run report here")
    p.add_argument("datadir")
    p.add_argument("output", help="output text archive")
    p.set_defaults(func=_cmd_featurize)

    p = sub.add_parser("lat-union", help="merge lattices with prior weights")
    p.add_argument("--priors", help="comma-separated, must sum to 1 (default: equal)")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("inputs", nargs="+")
    p.set_defaults(func=_cmd_lat_union)

    p = sub.add_parser("nbest", help="print the n best hypotheses of each lattice")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--acoustic-scale", type=float, default=DEFAULT_ACOUSTIC_SCALE)
    p.add_argument("input")
    p.set_defaults(func=_cmd_nbest)

    p = sub.add_parser("mbr", help="minimum-Bayes-risk decode each lattice")
    p.add_argument("--n", type=int, default=DEFAULT_MBR_NBEST)
    p.add_argument("--acoustic-scale", type=float, default=DEFAULT_ACOUSTIC_SCALE)
    p.add_argument("input")
    p.set_defaults(func=_cmd_mbr)

    p = sub.add_parser("mmi", help="MMI objective for a scores table (first row = reference)")
    p.add_argument("--k", type=float, required=True, help="acoustic weighting factor")
    p.add_argument("scores", help="rows: label acoustic_loglik lm_logprob")
    p.set_defaults(func=_cmd_mmi)

    p = sub.add_parser("rnnlm-obj", help="sampled-softmax objective of a logit vector")
    p.add_argument("--target", type=int, required=True, help="target word index")
    p.add_argument("logits", help="whitespace-separated reals")
    p.set_defaults(func=_cmd_rnnlm_obj)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - uniform one-line CLI diagnostics
        print(f"augkit {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
