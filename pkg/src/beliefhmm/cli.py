"""Command-line interface: ``beliefhmm {extract,synth,train,recognize,benchmark}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import benchmark, features, recognizer, storage
from .corpus import Corpus, SyntheticSpec, synth_corpus
from .features import AudioFormatError, FeatureConfig
from .storage import FormatError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2

log = logging.getLogger("beliefhmm")


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        if "-" in part.strip()[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part.strip():
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", encoding="utf-8", newline="")


def cmd_extract(args) -> None:
    corpus = Corpus()
    for name in args.wavs:
        path = Path(name)
        signal, rate = features.wav_read(path)
        cfg = FeatureConfig(rate, args.frame_ms, args.hop_ms, args.filters, args.coeffs, args.preemphasis)
        label = args.label or path.parent.name
        if not label:
            raise UsageError(f"{path}: cannot infer a label; pass --label")
        corpus.add(label, features.mfcc_extract(signal, cfg), path.stem)
        log.info("%s: %d frames", path, len(corpus[-1].obs))
    storage.write_features(args.output, corpus)


def cmd_synth(args) -> None:
    spec = SyntheticSpec(n_classes=args.classes, exemplars=args.exemplars, noise_scale=args.noise, seed=args.seed)
    storage.write_features(args.output, synth_corpus(spec))


def cmd_train(args) -> None:
    corpus = storage.read_features(args.features)
    bank = recognizer.train_bank(corpus, args.kind, args.states, args.mixtures, args.seed)
    storage.save_bank(args.output, bank)
    log.info("trained %s bank: %d classes, %d models", bank.kind, len(bank.labels), len(bank))


def cmd_recognize(args) -> None:
    bank = storage.load_bank(args.bank)
    corpus = storage.read_features(args.features)
    report = recognizer.evaluate(bank, corpus)
    out = _open_out(args.output)
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["source", "label", "predicted", *bank.labels])
        for it, (pred, _, scores) in zip(corpus, report.items):
            w.writerow([it.source, it.label, "" if pred is None else pred, *(repr(scores[l]) for l in bank.labels)])
    finally:
        if out is not sys.stdout:
            out.close()
    print(f"rate {report.rate:.4f} ({report.correct}/{report.total})", file=sys.stderr)


def cmd_benchmark(args) -> None:
    corpus = storage.read_features(args.features)
    kinds = args.kind or list(recognizer.KINDS)
    print(f"mode: {'resubstitution' if args.resubstitution else 'held-out'}", file=sys.stderr)
    seeds = args.seeds or [args.seed]
    rows = benchmark.run(corpus, args.counts, seeds, kinds, args.states, args.mixtures, args.resubstitution)
    out = _open_out(args.output)
    try:
        out.write(benchmark.to_csv(rows))
    finally:
        if out is not sys.stdout:
            out.close()


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="beliefhmm", description="Probabilistic and belief HMM recognizers.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def model_flags(sp):
        sp.add_argument("--states", type=_positive, default=3)
        sp.add_argument("--mixtures", type=_positive, default=2)

    sp = sub.add_parser("extract", help="WAV files to an MFCC feature file")
    sp.add_argument("wavs", nargs="+")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--label", help="class label for every file (default: parent directory name)")
    sp.add_argument("--frame-ms", type=float, default=25.0)
    sp.add_argument("--hop-ms", type=float, default=10.0)
    sp.add_argument("--filters", type=int, default=26)
    sp.add_argument("--coeffs", type=int, default=13)
    sp.add_argument("--preemphasis", type=float, default=0.97)
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("synth", help="write the synthetic corpus")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--classes", type=int, default=SyntheticSpec.n_classes)
    sp.add_argument("--exemplars", type=_positive, default=SyntheticSpec.exemplars)
    sp.add_argument("--noise", type=float, default=SyntheticSpec.noise_scale)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("train", help="train a model bank from a feature file")
    sp.add_argument("features")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--kind", choices=recognizer.KINDS, required=True)
    sp.add_argument("--seed", type=int, default=0)
    model_flags(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("recognize", help="score a feature file against a bank (CSV)")
    sp.add_argument("bank")
    sp.add_argument("features")
    sp.add_argument("-o", "--output", default="-")
    sp.set_defaults(func=cmd_recognize)

    sp = sub.add_parser("benchmark", help="recognition rate against exemplar count (CSV)")
    sp.add_argument("features")
    sp.add_argument("-o", "--output", default="-")
    sp.add_argument("--counts", type=_int_list, default=[1])
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--seeds", type=_int_list, help="list of split seeds, e.g. 0-9 (overrides --seed)")
    sp.add_argument("--kind", choices=recognizer.KINDS, action="append")
    sp.add_argument("--resubstitution", action="store_true", help="test on the training exemplars")
    model_flags(sp)
    sp.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (OSError, FormatError, AudioFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK
